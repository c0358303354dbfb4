#include "spnmkl/dataset.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>

#include "spnmkl/error.hpp"

namespace spnmkl {

DataFormat format_from_path(const std::string& path) {
  for (const char* ext : {".svm", ".libsvm", ".txt"}) {
    std::string_view e(ext);
    if (path.size() >= e.size() && path.compare(path.size() - e.size(), e.size(), e) == 0) return DataFormat::libsvm;
  }
  return DataFormat::csv;
}

DataFormat data_format_from_string(std::string_view text) {
  if (text == "csv") return DataFormat::csv;
  if (text == "libsvm") return DataFormat::libsvm;
  throw Error(ErrorKind::parse, "unknown data format '" + std::string(text) + "' (expected csv or libsvm)");
}

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

std::optional<double> to_number(std::string_view s) {
  s = trim(s);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) return std::nullopt;
  return v;
}

[[noreturn]] void bad_line(std::size_t line, const std::string& what) {
  throw Error(ErrorKind::data, "line " + std::to_string(line) + ": " + what);
}

int to_label(std::string_view field, std::size_t line) {
  auto v = to_number(field);
  if (!v || !std::isfinite(*v) || *v != std::round(*v) || std::abs(*v) > 1e9)
    bad_line(line, "label '" + std::string(trim(field)) + "' is not an integer");
  return static_cast<int>(*v);
}

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    auto pos = s.find(sep, start);
    out.push_back(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

std::vector<std::string_view> tokens(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
    std::size_t j = i;
    while (j < s.size() && !std::isspace(static_cast<unsigned char>(s[j]))) ++j;
    if (j > i) out.push_back(s.substr(i, j - i));
    i = j;
  }
  return out;
}

Dataset assemble(const std::vector<std::vector<double>>& rows, std::vector<int> labels, Eigen::Index dim) {
  if (rows.empty()) throw Error(ErrorKind::data, "dataset has no samples");
  Dataset d;
  d.x = Matrix::Zero(static_cast<Eigen::Index>(rows.size()), dim);
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < rows[i].size(); ++j) d.x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
  d.labels = std::move(labels);
  return d;
}

Dataset parse_csv(std::string_view text, bool labeled) {
  std::vector<std::vector<double>> rows;
  std::vector<int> labels;
  std::size_t width = 0, line_no = 0;
  for (auto line : split(text, '\n')) {
    ++line_no;
    line = trim(line);
    if (line.empty() || line.front() == '#') continue;
    auto fields = split(line, ',');
    if (rows.empty() && labels.empty() && !to_number(fields.front())) continue;  // header
    std::vector<double> row;
    std::size_t first = 0;
    if (labeled) {
      labels.push_back(to_label(fields.front(), line_no));
      first = 1;
    }
    for (std::size_t k = first; k < fields.size(); ++k) {
      auto v = to_number(fields[k]);
      if (!v) bad_line(line_no, "feature '" + std::string(trim(fields[k])) + "' is not a number");
      if (!std::isfinite(*v)) bad_line(line_no, "non-finite feature value");
      row.push_back(*v);
    }
    if (rows.empty()) width = row.size();
    if (row.size() != width)
      bad_line(line_no, "expected " + std::to_string(width) + " features, found " + std::to_string(row.size()));
    if (width == 0) bad_line(line_no, "no feature columns");
    rows.push_back(std::move(row));
  }
  return assemble(rows, std::move(labels), static_cast<Eigen::Index>(width));
}

Dataset parse_libsvm(std::string_view text, std::optional<bool> labeled, Eigen::Index dimension) {
  std::vector<std::vector<double>> rows;
  std::vector<int> labels;
  Eigen::Index max_index = 0;
  std::size_t line_no = 0;
  for (auto line : split(text, '\n')) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    auto toks = tokens(line);
    if (toks.empty()) continue;
    bool has_label = labeled.value_or(toks.front().find(':') == std::string_view::npos);
    if (!labeled) labeled = has_label;
    std::size_t first = 0;
    if (has_label) {
      labels.push_back(to_label(toks.front(), line_no));
      first = 1;
    }
    std::vector<double> row;
    long previous = 0;
    for (std::size_t k = first; k < toks.size(); ++k) {
      auto colon = toks[k].find(':');
      if (colon == std::string_view::npos) bad_line(line_no, "expected index:value, found '" + std::string(toks[k]) + "'");
      auto idx = to_number(toks[k].substr(0, colon));
      auto val = to_number(toks[k].substr(colon + 1));
      if (!idx || *idx != std::round(*idx) || *idx < 1 || *idx > 1e7) bad_line(line_no, "invalid feature index");
      if (!val || !std::isfinite(*val)) bad_line(line_no, "invalid feature value");
      long i = static_cast<long>(*idx);
      if (i <= previous) bad_line(line_no, "feature indices must be strictly increasing");
      previous = i;
      if (static_cast<long>(row.size()) < i) row.resize(static_cast<std::size_t>(i), 0.0);
      row[static_cast<std::size_t>(i - 1)] = *val;
      max_index = std::max<Eigen::Index>(max_index, i);
    }
    rows.push_back(std::move(row));
  }
  if (dimension == 0) dimension = max_index;
  if (max_index > dimension)
    throw Error(ErrorKind::data, "feature index " + std::to_string(max_index) + " exceeds dimension " + std::to_string(dimension));
  if (dimension == 0) throw Error(ErrorKind::data, "dataset has no features");
  return assemble(rows, std::move(labels), dimension);
}

// Shortest text that reads back to the same double.
std::string number_text(double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

}  // namespace

Dataset parse_dataset(std::string_view text, DataFormat format, std::optional<bool> labeled, Eigen::Index dimension) {
  if (format == DataFormat::csv) {
    auto d = parse_csv(text, labeled.value_or(true));
    if (dimension > 0 && d.x.cols() != dimension)
      throw Error(ErrorKind::data, "dataset has " + std::to_string(d.x.cols()) + " features, expected " + std::to_string(dimension));
    return d;
  }
  return parse_libsvm(text, labeled, dimension);
}

Dataset read_dataset(const std::string& path, std::optional<DataFormat> format, std::optional<bool> labeled,
                     Eigen::Index dimension) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::io, "cannot open data file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_dataset(buf.str(), format.value_or(format_from_path(path)), labeled, dimension);
}

std::string format_csv(const Dataset& data) {
  std::ostringstream os;
  for (Eigen::Index i = 0; i < data.x.rows(); ++i) {
    bool first = true;
    if (data.labeled()) {
      os << data.labels[static_cast<std::size_t>(i)];
      first = false;
    }
    for (Eigen::Index j = 0; j < data.x.cols(); ++j) {
      if (!first) os << ',';
      os << number_text(data.x(i, j));
      first = false;
    }
    os << '\n';
  }
  return os.str();
}

std::string format_libsvm(const Dataset& data) {
  std::ostringstream os;
  for (Eigen::Index i = 0; i < data.x.rows(); ++i) {
    bool first = true;
    if (data.labeled()) {
      os << data.labels[static_cast<std::size_t>(i)];
      first = false;
    }
    for (Eigen::Index j = 0; j < data.x.cols(); ++j) {
      if (data.x(i, j) == 0.0) continue;
      if (!first) os << ' ';
      os << j + 1 << ':' << number_text(data.x(i, j));
      first = false;
    }
    os << '\n';
  }
  return os.str();
}

Dataset two_gaussians(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, 1.0);
  Dataset d;
  d.x.resize(static_cast<Eigen::Index>(n), 2);
  for (std::size_t i = 0; i < n; ++i) {
    int label = static_cast<int>(i % 2);
    double c = label == 1 ? 1.0 : -1.0;
    d.x(static_cast<Eigen::Index>(i), 0) = c + noise(rng);
    d.x(static_cast<Eigen::Index>(i), 1) = c + noise(rng);
    d.labels.push_back(label);
  }
  return d;
}

Dataset xor_rings(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> angle(0.0, 2.0 * std::numbers::pi);
  std::normal_distribution<double> radius(0.5, 0.1);
  const double centers[4][2] = {{1, 1}, {-1, 1}, {-1, -1}, {1, -1}};
  Dataset d;
  d.x.resize(static_cast<Eigen::Index>(n), 2);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t q = i % 4;
    double a = angle(rng), r = radius(rng);
    d.x(static_cast<Eigen::Index>(i), 0) = centers[q][0] + r * std::cos(a);
    d.x(static_cast<Eigen::Index>(i), 1) = centers[q][1] + r * std::sin(a);
    d.labels.push_back(q % 2 == 0 ? 1 : 0);
  }
  return d;
}

Dataset k_blobs(std::size_t n, int k, std::uint64_t seed) {
  if (k < 2) throw Error(ErrorKind::parse, "k-blobs needs at least two blobs");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, 0.7);
  Dataset d;
  d.x.resize(static_cast<Eigen::Index>(n), 2);
  for (std::size_t i = 0; i < n; ++i) {
    int label = static_cast<int>(i % static_cast<std::size_t>(k));
    double a = 2.0 * std::numbers::pi * label / k;
    d.x(static_cast<Eigen::Index>(i), 0) = 3.0 * std::cos(a) + noise(rng);
    d.x(static_cast<Eigen::Index>(i), 1) = 3.0 * std::sin(a) + noise(rng);
    d.labels.push_back(label);
  }
  return d;
}

}  // namespace spnmkl
