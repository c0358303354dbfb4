#pragma once

#include <cstdint>
#include <map>
#include <vector>

#include "spnmkl/kernel_engine.hpp"

namespace spnmkl {

struct SolverOptions {
  double tol = 1e-6;                     // maximal KKT violation at exit
  std::int64_t max_updates = 1'000'000;  // pair updates
  bool check_psd = true;
};

struct DualSolution {
  Vector alpha;
  double bias = 0.0;
  double objective = 0.0;  // e'a - 1/2 (a.y)' K (a.y)
  std::vector<Eigen::Index> sv_indices;
  std::int64_t updates = 0;
  double max_violation = 0.0;
  bool converged = false;
  bool psd_warning = false;
};

/// Dual objective of the box and equality constrained SVM problem.
double dual_objective(const Matrix& kernel, const Vector& labels, const Vector& alpha);

/// Sequential minimal optimization with maximal-violating-pair selection.
///
/// Maximizes e'a - 1/2 (a.y)' K (a.y) subject to 0 <= a <= C and y'a = 0.
/// `labels` must be +1/-1 with both signs present. A feasible `warm_start`
/// seeds the iteration; an infeasible one is ignored.
///
/// The bias is the mean of y_i - sum_j a_j y_j K_ij over free support
/// vectors, or the midpoint of the feasible bias interval when none is free.
DualSolution solve_dual(const Matrix& kernel, const Vector& labels, double C, const SolverOptions& options = {},
                        const Vector* warm_start = nullptr);

/// +1 for samples of `cls`, -1 for everything else.
Vector one_vs_rest_labels(const std::vector<int>& labels, int cls);

/// Independent one-vs-rest duals sharing `kernel`.
std::map<int, DualSolution> solve_multiclass(const Matrix& kernel, const std::vector<int>& labels,
                                             const std::vector<int>& classes, double C,
                                             const SolverOptions& options = {},
                                             const std::map<int, Vector>* warm_starts = nullptr);

}  // namespace spnmkl
