#include "spnmkl/kernel_engine.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>

#include "spnmkl/error.hpp"
#include "spnmkl/parallel.hpp"

namespace spnmkl {

const char* to_string(KernelFamily family) noexcept {
  switch (family) {
    case KernelFamily::linear: return "linear";
    case KernelFamily::polynomial: return "polynomial";
    case KernelFamily::rbf: return "rbf";
  }
  return "unknown";
}

KernelFamily kernel_family_from_string(std::string_view text) {
  if (text == "linear") return KernelFamily::linear;
  if (text == "polynomial" || text == "poly") return KernelFamily::polynomial;
  if (text == "rbf" || text == "gaussian") return KernelFamily::rbf;
  throw Error(ErrorKind::parse, "unknown kernel family '" + std::string(text) + "'");
}

void KernelSpec::validate() const {
  if (name.empty()) throw Error(ErrorKind::parse, "kernel spec without a name");
  if (family == KernelFamily::rbf && !(gamma > 0.0))
    throw Error(ErrorKind::parse, "kernel '" + name + "': gamma must be positive");
  if (family == KernelFamily::polynomial && degree < 1)
    throw Error(ErrorKind::parse, "kernel '" + name + "': degree must be at least 1");
}

double kernel_value(const KernelSpec& spec, const Eigen::Ref<const Vector>& a,
                    const Eigen::Ref<const Vector>& b) {
  switch (spec.family) {
    case KernelFamily::linear: return a.dot(b);
    case KernelFamily::polynomial: return std::pow(a.dot(b) + spec.coef, spec.degree);
    case KernelFamily::rbf: return std::exp(-spec.gamma * (a - b).squaredNorm());
  }
  return 0.0;
}

namespace {

void require_finite(const Matrix& data, const char* what) {
  if (!data.allFinite()) throw Error(ErrorKind::data, std::string(what) + " contains non-finite entries");
}

Vector self_similarity(const Matrix& data, const KernelSpec& spec) {
  Vector diag(data.rows());
  for (Eigen::Index i = 0; i < data.rows(); ++i) {
    Vector row = data.row(i).transpose();
    diag[i] = kernel_value(spec, row, row);
    if (!(diag[i] > 0.0))
      throw Error(ErrorKind::data, "kernel '" + spec.name + "': zero self-similarity at row " + std::to_string(i) +
                                       " cannot be normalized");
  }
  return diag;
}

}  // namespace

Matrix compute_gram(const Matrix& data, const KernelSpec& spec) {
  spec.validate();
  if (data.rows() < 1) throw Error(ErrorKind::data, "gram of an empty data set");
  require_finite(data, "data");

  const Eigen::Index n = data.rows();
  Matrix gram(n, n);
  Matrix rows = data.transpose();
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index i = j; i < n; ++i) {
      double v = kernel_value(spec, rows.col(i), rows.col(j));
      gram(i, j) = v;
      gram(j, i) = v;
    }
  }
  if (spec.normalize) {
    Vector diag = self_similarity(data, spec);
    Vector inv = diag.cwiseSqrt().cwiseInverse();
    for (Eigen::Index j = 0; j < n; ++j) {
      for (Eigen::Index i = j; i < n; ++i) {
        double v = (i == j || rows.col(i) == rows.col(j)) ? 1.0 : gram(i, j) * (inv[i] * inv[j]);
        gram(i, j) = v;
        gram(j, i) = v;
      }
    }
  }
  return gram;
}

Matrix compute_cross_gram(const Matrix& train, const Matrix& query, const KernelSpec& spec) {
  spec.validate();
  if (train.cols() != query.cols())
    throw Error(ErrorKind::data, "query dimension " + std::to_string(query.cols()) + " does not match training dimension " +
                                     std::to_string(train.cols()));
  require_finite(query, "query data");

  Matrix cross(query.rows(), train.rows());
  Matrix train_rows = train.transpose();
  Matrix query_rows = query.transpose();
  for (Eigen::Index i = 0; i < train.rows(); ++i)
    for (Eigen::Index q = 0; q < query.rows(); ++q) cross(q, i) = kernel_value(spec, query_rows.col(q), train_rows.col(i));

  if (spec.normalize) {
    Vector train_inv = self_similarity(train, spec).cwiseSqrt().cwiseInverse();
    Vector query_inv = self_similarity(query, spec).cwiseSqrt().cwiseInverse();
    for (Eigen::Index i = 0; i < train.rows(); ++i)
      for (Eigen::Index q = 0; q < query.rows(); ++q) {
        // Identical points normalize to exactly 1, as in compute_gram.
        cross(q, i) = (query_rows.col(q) == train_rows.col(i)) ? 1.0 : cross(q, i) * (query_inv[q] * train_inv[i]);
      }
  }
  return cross;
}

Matrix path_kernel(const Path& path, const KernelWorkspace& ws) {
  if (path.leaf_kernels.empty()) throw Error(ErrorKind::numeric, "path without leaves");
  auto lookup = [&](const std::string& ref) -> const Matrix& {
    auto it = ws.basis_grams.find(ref);
    if (it == ws.basis_grams.end()) throw Error(ErrorKind::numeric, "missing basis gram for kernel '" + ref + "'");
    return it->second;
  };
  Matrix out = lookup(path.leaf_kernels.front());
  for (std::size_t k = 1; k < path.leaf_kernels.size(); ++k) out = out.cwiseProduct(lookup(path.leaf_kernels[k]));
  return out;
}

KernelWorkspace build_workspace(const Matrix& data, const KernelSpecs& specs, const PathTable& table) {
  std::vector<std::string> refs;
  for (const auto& path : table.paths)
    for (const auto& ref : path.leaf_kernels)
      if (std::find(refs.begin(), refs.end(), ref) == refs.end()) refs.push_back(ref);
  std::sort(refs.begin(), refs.end());

  std::vector<Matrix> grams(refs.size());
  parallel_for(refs.size(), [&](std::size_t k) {
    auto it = specs.find(refs[k]);
    if (it == specs.end()) throw Error(ErrorKind::parse, "no kernel spec named '" + refs[k] + "'");
    grams[k] = compute_gram(data, it->second);
  });

  KernelWorkspace ws;
  for (std::size_t k = 0; k < refs.size(); ++k) ws.basis_grams.emplace(refs[k], std::move(grams[k]));
  ws.path_grams.resize(table.size());
  parallel_for(table.size(), [&](std::size_t m) { ws.path_grams[m] = path_kernel(table.paths[m], ws); });
  ws.diag_sums.resize(table.size());
  for (std::size_t m = 0; m < table.size(); ++m) ws.diag_sums[m] = ws.path_grams[m].trace();
  return ws;
}

void retain_paths(KernelWorkspace& ws, const PathTable& before, const PathTable& after) {
  // Pruning keeps the relative order of surviving paths.
  std::vector<Matrix> grams;
  std::vector<double> diags;
  std::size_t src = 0;
  for (const auto& path : after.paths) {
    while (src < before.size() && !(before.paths[src].members == path.members &&
                                    before.paths[src].leaf_kernels == path.leaf_kernels))
      ++src;
    if (src == before.size()) throw Error(ErrorKind::numeric, "pruned table is not a subsequence of the original");
    grams.push_back(std::move(ws.path_grams[src]));
    diags.push_back(ws.diag_sums[src]);
    ++src;
  }
  ws.path_grams = std::move(grams);
  ws.diag_sums = std::move(diags);
}

Matrix cross_kernel(const Matrix& train, const Matrix& query, const Path& path, const KernelSpecs& specs) {
  if (path.leaf_kernels.empty()) throw Error(ErrorKind::numeric, "path without leaves");
  if (train.cols() != query.cols())
    throw Error(ErrorKind::data, "query dimension " + std::to_string(query.cols()) + " does not match training dimension " +
                                     std::to_string(train.cols()));
  std::map<std::string, Matrix> cache;
  Matrix out;
  for (const auto& ref : path.leaf_kernels) {
    auto spec = specs.find(ref);
    if (spec == specs.end()) throw Error(ErrorKind::parse, "no kernel spec named '" + ref + "'");
    auto it = cache.find(ref);
    if (it == cache.end()) it = cache.emplace(ref, compute_cross_gram(train, query, spec->second)).first;
    out = out.size() == 0 ? it->second : Matrix(out.cwiseProduct(it->second));
  }
  return out;
}

double compute_A(const KernelWorkspace& ws) {
  double total = 0.0;
  for (const auto& gram : ws.path_grams) {
    double scale = std::max(1.0, gram.diagonal().cwiseAbs().maxCoeff());
    for (Eigen::Index i = 0; i < gram.rows(); ++i) {
      if (gram(i, i) < -1e-10 * scale)
        throw Error(ErrorKind::numeric, "negative diagonal entry in a path kernel; kernel is not valid");
      total += std::max(0.0, gram(i, i));
    }
  }
  return std::sqrt(total);
}

SpectrumEstimate estimate_spectrum(const Matrix& m, int max_steps) {
  const Eigen::Index n = m.rows();
  if (n == 0) return {};
  const Eigen::Index steps = std::min<Eigen::Index>(n, max_steps);

  Matrix basis(n, steps);
  Vector alpha = Vector::Zero(steps);
  Vector beta = Vector::Zero(steps);

  // Deterministic start vector with no symmetry that could hide eigenvectors.
  Vector q(n);
  for (Eigen::Index i = 0; i < n; ++i) q[i] = 1.0 + 0.5 * std::sin(1.0 + 2.0 * static_cast<double>(i));
  q.normalize();

  Eigen::Index used = 0;
  for (Eigen::Index k = 0; k < steps; ++k) {
    basis.col(k) = q;
    ++used;
    Vector w = m * q;
    alpha[k] = q.dot(w);
    // Full reorthogonalization, applied twice.
    for (int pass = 0; pass < 2; ++pass) w -= basis.leftCols(k + 1) * (basis.leftCols(k + 1).transpose() * w);
    double norm = w.norm();
    if (k + 1 == steps || norm <= 1e-14 * std::max(1.0, std::abs(alpha[k]))) break;
    beta[k] = norm;
    q = w / norm;
  }

  Matrix tri = Matrix::Zero(used, used);
  for (Eigen::Index k = 0; k < used; ++k) {
    tri(k, k) = alpha[k];
    if (k + 1 < used) tri(k, k + 1) = tri(k + 1, k) = beta[k];
  }
  Eigen::SelfAdjointEigenSolver<Matrix> solver(tri, Eigen::EigenvaluesOnly);
  const Vector& ev = solver.eigenvalues();
  return {ev[0], std::max(std::abs(ev[0]), std::abs(ev[used - 1]))};
}

bool is_psd(const Matrix& m, double rel_tol) {
  auto est = estimate_spectrum(m);
  return est.min_eigenvalue >= -rel_tol * est.spectral_norm;
}

}  // namespace spnmkl
