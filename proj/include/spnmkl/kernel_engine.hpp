#pragma once

#include <Eigen/Dense>
#include <map>
#include <string>
#include <vector>

#include "spnmkl/spn_graph.hpp"

namespace spnmkl {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

enum class KernelFamily { linear, polynomial, rbf };

const char* to_string(KernelFamily family) noexcept;
KernelFamily kernel_family_from_string(std::string_view text);

/// A basis kernel. polynomial: (x'y + coef)^degree, rbf: exp(-gamma |x-y|^2).
struct KernelSpec {
  std::string name;
  KernelFamily family = KernelFamily::linear;
  int degree = 2;
  double coef = 1.0;
  double gamma = 1.0;
  bool normalize = true;

  void validate() const;

  friend bool operator==(const KernelSpec&, const KernelSpec&) = default;
};

using KernelSpecs = std::map<std::string, KernelSpec>;

/// Unnormalized kernel value.
double kernel_value(const KernelSpec& spec, const Eigen::Ref<const Vector>& a,
                    const Eigen::Ref<const Vector>& b);

/// Gram matrix over the rows of `data`. With normalization the result has a unit diagonal.
Matrix compute_gram(const Matrix& data, const KernelSpec& spec);

/// Rows index `query`, columns index `train`. Normalization uses each point's own
/// self-similarity, the same statistic compute_gram uses.
Matrix compute_cross_gram(const Matrix& train, const Matrix& query, const KernelSpec& spec);

struct KernelWorkspace {
  std::map<std::string, Matrix> basis_grams;
  std::vector<Matrix> path_grams;  // indexed by path id
  std::vector<double> diag_sums;   // trace of each path gram

  std::size_t samples() const { return path_grams.empty() ? 0 : static_cast<std::size_t>(path_grams.front().rows()); }
};

/// Entry-wise product of the path's leaf grams (repeated leaves multiply repeatedly).
Matrix path_kernel(const Path& path, const KernelWorkspace& ws);

/// Computes basis grams for every kernel the table references, then every path gram.
KernelWorkspace build_workspace(const Matrix& data, const KernelSpecs& specs, const PathTable& table);

/// Path gram restricted to the paths still present in `table` (after pruning).
void retain_paths(KernelWorkspace& ws, const PathTable& before, const PathTable& after);

/// Cross kernel of one path between `query` rows and `train` rows.
Matrix cross_kernel(const Matrix& train, const Matrix& query, const Path& path, const KernelSpecs& specs);

/// sqrt(sum_i sum_m K_m(x_i, x_i)).
double compute_A(const KernelWorkspace& ws);

struct SpectrumEstimate {
  double min_eigenvalue = 0.0;
  double spectral_norm = 0.0;
};

/// Extreme eigenvalues of a symmetric matrix by Lanczos with full
/// reorthogonalization (at most `max_steps` Krylov vectors).
SpectrumEstimate estimate_spectrum(const Matrix& m, int max_steps = 80);

/// min eigenvalue >= -rel_tol * spectral norm.
bool is_psd(const Matrix& m, double rel_tol = 1e-8);

}  // namespace spnmkl
