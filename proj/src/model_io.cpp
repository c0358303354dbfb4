#include "spnmkl/model_io.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "json_io.hpp"
#include "spnmkl/error.hpp"
#include "spnmkl/parallel.hpp"
#include "spnmkl/qp_solver.hpp"

namespace spnmkl {

using nlohmann::json;

Vector task_targets(const TaskModel& task, const std::vector<int>& labels) {
  return one_vs_rest_labels(labels, task.positive_class);
}

Prediction predict(const TrainedModel& model, const Matrix& query) {
  if (query.cols() != model.dimension)
    throw Error(ErrorKind::data, "query dimension " + std::to_string(query.cols()) + " does not match training dimension " +
                                     std::to_string(model.dimension));
  const Eigen::Index nq = query.rows();
  const Eigen::Index ntasks = static_cast<Eigen::Index>(model.tasks.size());
  Prediction out;
  out.decision = Matrix::Zero(nq, ntasks);
  for (Eigen::Index c = 0; c < ntasks; ++c) out.decision.col(c).setConstant(model.tasks[c].bias);

  if (model.support_vectors.rows() > 0 && nq > 0) {
    Matrix coef(model.support_vectors.rows(), ntasks);
    for (Eigen::Index c = 0; c < ntasks; ++c) {
      const auto& task = model.tasks[c];
      coef.col(c) = task.alpha.cwiseProduct(task_targets(task, model.support_labels));
    }
    std::vector<Matrix> parts(model.table.size());
    parallel_for(model.table.size(), [&](std::size_t m) {
      double g = model.path_weights[m];
      if (g == 0.0) return;
      parts[m] = g * (cross_kernel(model.support_vectors, query, model.table.paths[m], model.kernels) * coef);
    });
    Matrix sum = Matrix::Zero(nq, ntasks);
    for (const auto& part : parts)
      if (part.size() > 0) sum += part;
    out.decision += sum;
  }

  out.labels.resize(static_cast<std::size_t>(nq));
  for (Eigen::Index i = 0; i < nq; ++i) {
    if (model.classes.size() == 2) {
      out.labels[i] = out.decision(i, 0) >= 0.0 ? model.classes[1] : model.classes[0];
      continue;
    }
    Eigen::Index best = 0;
    for (Eigen::Index c = 1; c < ntasks; ++c)
      if (out.decision(i, c) > out.decision(i, best)) best = c;
    out.labels[i] = model.tasks[best].positive_class;
  }
  return out;
}

RademacherReport rademacher_bound(const TrainedModel& model, const Matrix& data, const std::vector<int>& labels) {
  if (static_cast<std::size_t>(data.rows()) != labels.size())
    throw Error(ErrorKind::data, "label count does not match the number of rows");
  if (data.rows() == 0) throw Error(ErrorKind::data, "empty training set");
  RademacherReport report;
  report.A = compute_A(build_workspace(data, model.kernels, model.table));

  // R1 = sum_m |w_m|^2 / (2 g_m) = sum_m g_m / 2 * sum_c u_c' K_m u_c with u_c = alpha_c y_c.
  if (model.support_vectors.rows() > 0) {
    std::vector<Vector> coef;
    for (const auto& task : model.tasks) coef.push_back(task.alpha.cwiseProduct(task_targets(task, model.support_labels)));
    std::vector<double> r1(model.table.size(), 0.0);
    parallel_for(model.table.size(), [&](std::size_t m) {
      double g = model.path_weights[m];
      if (g == 0.0) return;
      Matrix k = cross_kernel(model.support_vectors, model.support_vectors, model.table.paths[m], model.kernels);
      double q = 0.0;
      for (const auto& u : coef) q += u.dot(k * u);
      r1[m] = 0.5 * g * std::max(q, 0.0);
    });
    for (double v : r1) report.regularizer += v;
  }
  for (const auto& [node, unit] : model.table.unit_coeff) report.regularizer += unit.to_double() * model.betas.at(node);

  auto pred = predict(model, data);
  for (std::size_t c = 0; c < model.tasks.size(); ++c) {
    Vector y = task_targets(model.tasks[c], labels);
    for (Eigen::Index i = 0; i < data.rows(); ++i)
      report.hinge += std::max(0.0, 1.0 - y[i] * pred.decision(i, static_cast<Eigen::Index>(c)));
  }
  report.bound = 2.0 * report.A / static_cast<double>(data.rows()) * (report.regularizer + model.params.C * report.hinge);
  return report;
}

namespace {

json vector_json(const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Vector vector_from(const json& j) {
  auto values = j.get<std::vector<double>>();
  return Eigen::Map<Vector>(values.data(), static_cast<Eigen::Index>(values.size()));
}

std::string exponent_text(Rational r) {
  std::ostringstream os;
  os << r;
  return os.str();
}

[[noreturn]] void corrupt(const std::string& what) { throw Error(ErrorKind::parse, "invalid model file: " + what); }

}  // namespace

std::string save_model(const TrainedModel& model) {
  json paths = json::array();
  for (const auto& path : model.table.paths) {
    json members = json::array();
    for (const auto& m : path.members) members.push_back({{"node", m.node}, {"exponent", exponent_text(m.exponent)}});
    paths.push_back({{"id", path.id},
                     {"leaf_kernels", path.leaf_kernels},
                     {"members", std::move(members)},
                     {"g", model.path_weights.at(path.id)}});
  }
  json kernels = json::object();
  for (const auto& [name, spec] : model.kernels) kernels[name] = detail::kernel_json(spec);
  json tasks = json::array();
  for (const auto& t : model.tasks)
    tasks.push_back({{"positive_class", t.positive_class}, {"bias", t.bias}, {"alpha", vector_json(t.alpha)}});
  json rows = json::array();
  for (Eigen::Index i = 0; i < model.support_vectors.rows(); ++i)
    rows.push_back(vector_json(model.support_vectors.row(i).transpose()));

  json doc = {
      {"format", "spnmkl-model"},
      {"version", model.format_version},
      {"structure", json::parse(serialize_spn(model.graph))},
      {"paths", std::move(paths)},
      {"kernels", std::move(kernels)},
      {"regularizer",
       {{"lambda", model.params.lambda}, {"C", model.params.C}, {"default_p", model.params.default_p}, {"p", model.params.p}}},
      {"betas", model.betas},
      {"classes", model.classes},
      {"tasks", std::move(tasks)},
      {"dimension", model.dimension},
      {"support_vectors", std::move(rows)},
      {"support_labels", model.support_labels},
      {"pruned", model.pruned},
  };
  return doc.dump(2) + "\n";
}

TrainedModel load_model(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    corrupt(std::string("not valid JSON: ") + e.what());
  }
  try {
    if (doc.value("format", std::string()) != "spnmkl-model") corrupt("missing format tag");
    int version = doc.at("version").get<int>();
    if (version != kModelFormatVersion)
      throw Error(ErrorKind::parse, "unsupported model format version " + std::to_string(version) + " (expected " +
                                        std::to_string(kModelFormatVersion) + ")");

    KernelSpecs kernels;
    std::set<std::string> names;
    for (const auto& [name, j] : doc.at("kernels").items()) {
      kernels.emplace(name, detail::kernel_from_json(name, j));
      names.insert(name);
    }
    TrainedModel model(parse_spn(doc.at("structure").dump(), &names));
    model.kernels = std::move(kernels);

    const auto& jpaths = doc.at("paths");
    model.table = enumerate_paths(model.graph, std::max(kDefaultMaxPaths, jpaths.size()));
    if (model.table.size() != jpaths.size()) corrupt("path table does not match the structure");
    for (std::size_t m = 0; m < jpaths.size(); ++m) {
      const auto& jp = jpaths[m];
      const auto& path = model.table.paths[m];
      if (jp.at("leaf_kernels").get<std::vector<std::string>>() != path.leaf_kernels)
        corrupt("leaf kernels of path " + std::to_string(m) + " do not match the structure");
      const auto& jm = jp.at("members");
      if (jm.size() != path.members.size()) corrupt("members of path " + std::to_string(m) + " do not match");
      for (std::size_t k = 0; k < jm.size(); ++k)
        if (jm[k].at("node").get<std::string>() != path.members[k].node ||
            jm[k].at("exponent").get<std::string>() != exponent_text(path.members[k].exponent))
          corrupt("members of path " + std::to_string(m) + " do not match");
      model.path_weights.push_back(jp.at("g").get<double>());
    }

    const auto& jr = doc.at("regularizer");
    model.params.lambda = jr.at("lambda").get<double>();
    model.params.C = jr.at("C").get<double>();
    model.params.default_p = jr.at("default_p").get<double>();
    model.params.p = jr.at("p").get<std::map<NodeId, double>>();
    model.params.validate();
    model.betas = doc.at("betas").get<WeightVector>();
    for (const auto& [node, ids] : model.table.node_to_paths)
      if (!model.betas.count(node)) corrupt("no weight for node '" + node + "'");
    for (const auto& path : model.table.paths) {
      double g = g_path(path, model.betas), cached = model.path_weights[path.id];
      if (std::abs(g - cached) > 1e-12 * std::max(1.0, std::abs(g))) corrupt("path weight cache is inconsistent");
    }

    model.classes = doc.at("classes").get<std::vector<int>>();
    model.dimension = doc.at("dimension").get<Eigen::Index>();
    model.support_labels = doc.at("support_labels").get<std::vector<int>>();
    const auto& rows = doc.at("support_vectors");
    if (rows.size() != model.support_labels.size()) corrupt("support vector and label counts differ");
    model.support_vectors.resize(static_cast<Eigen::Index>(rows.size()), model.dimension);
    for (std::size_t i = 0; i < rows.size(); ++i) {
      Vector r = vector_from(rows[i]);
      if (r.size() != model.dimension) corrupt("support vector of the wrong dimension");
      model.support_vectors.row(static_cast<Eigen::Index>(i)) = r.transpose();
    }
    for (const auto& jt : doc.at("tasks")) {
      TaskModel t;
      t.positive_class = jt.at("positive_class").get<int>();
      t.bias = jt.at("bias").get<double>();
      t.alpha = vector_from(jt.at("alpha"));
      if (t.alpha.size() != model.support_vectors.rows()) corrupt("alpha length does not match the support vectors");
      model.tasks.push_back(std::move(t));
    }
    std::size_t expected_tasks = model.classes.size() == 2 ? 1 : model.classes.size();
    if (model.classes.size() < 2 || model.tasks.size() != expected_tasks) corrupt("task list does not match the classes");
    model.pruned = doc.at("pruned").get<std::vector<NodeId>>();
    return model;
  } catch (const json::exception& e) {
    corrupt(e.what());
  }
}

void write_model_file(const TrainedModel& model, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::io, "cannot open '" + path + "' for writing");
  out << save_model(model);
  if (!out) throw Error(ErrorKind::io, "failed to write '" + path + "'");
}

TrainedModel read_model_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::io, "cannot open '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return load_model(buf.str());
}

}  // namespace spnmkl
