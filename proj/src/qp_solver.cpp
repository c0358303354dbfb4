#include "spnmkl/qp_solver.hpp"

#include <cmath>
#include <limits>

#include "spnmkl/error.hpp"
#include "spnmkl/parallel.hpp"

namespace spnmkl {

namespace {

constexpr double kMinCurvature = 1e-12;

bool in_up(double a, double y, double C) { return y > 0 ? a < C : a > 0; }
bool in_low(double a, double y, double C) { return y > 0 ? a > 0 : a < C; }

bool feasible_start(const Vector& alpha, const Vector& y, double C) {
  if (alpha.size() != y.size()) return false;
  for (Eigen::Index i = 0; i < alpha.size(); ++i)
    if (!(alpha[i] >= 0.0 && alpha[i] <= C)) return false;
  return std::abs(y.dot(alpha)) <= 1e-12 * C * static_cast<double>(y.size());
}

}  // namespace

double dual_objective(const Matrix& kernel, const Vector& labels, const Vector& alpha) {
  Vector ay = alpha.cwiseProduct(labels);
  return alpha.sum() - 0.5 * ay.dot(kernel * ay);
}

DualSolution solve_dual(const Matrix& kernel, const Vector& labels, double C, const SolverOptions& options,
                        const Vector* warm_start) {
  const Eigen::Index n = labels.size();
  if (kernel.rows() != n || kernel.cols() != n) throw Error(ErrorKind::data, "kernel and label sizes differ");
  if (!(C > 0.0)) throw Error(ErrorKind::degenerate, "box bound C must be positive");
  bool has_pos = false, has_neg = false;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (labels[i] == 1.0) has_pos = true;
    else if (labels[i] == -1.0) has_neg = true;
    else throw Error(ErrorKind::data, "labels must be +1 or -1");
  }
  if (!has_pos || !has_neg) throw Error(ErrorKind::degenerate, "both classes must be present in the dual problem");

  DualSolution sol;
  if (options.check_psd) sol.psd_warning = !is_psd(kernel);

  Vector& alpha = sol.alpha;
  alpha = (warm_start && feasible_start(*warm_start, labels, C)) ? *warm_start : Vector::Zero(n);

  const Vector& y = labels;
  // Gradient of the minimization form 1/2 a'Qa - e'a with Q_ij = y_i y_j K_ij.
  Vector grad = y.cwiseProduct(kernel * alpha.cwiseProduct(y)) - Vector::Ones(n);
  const Vector diag = kernel.diagonal();

  double gap = std::numeric_limits<double>::infinity();
  while (true) {
    Eigen::Index i = -1, j = -1;
    double g_max = -std::numeric_limits<double>::infinity();
    double g_min = std::numeric_limits<double>::infinity();
    for (Eigen::Index t = 0; t < n; ++t) {
      double v = -y[t] * grad[t];
      if (in_up(alpha[t], y[t], C) && v > g_max) {
        g_max = v;
        i = t;
      }
      if (in_low(alpha[t], y[t], C) && v < g_min) {
        g_min = v;
        j = t;
      }
    }
    gap = (i < 0 || j < 0) ? 0.0 : g_max - g_min;
    if (gap <= options.tol) {
      sol.converged = true;
      break;
    }
    if (sol.updates >= options.max_updates) break;
    ++sol.updates;

    const double old_i = alpha[i], old_j = alpha[j];
    const double k_ij = kernel(i, j);
    if (y[i] != y[j]) {
      double quad = std::max(diag[i] + diag[j] - 2.0 * k_ij, kMinCurvature);
      double delta = (-grad[i] - grad[j]) / quad;
      double diff = alpha[i] - alpha[j];
      alpha[i] += delta;
      alpha[j] += delta;
      if (diff > 0) {
        if (alpha[j] < 0) {
          alpha[j] = 0;
          alpha[i] = diff;
        }
      } else if (alpha[i] < 0) {
        alpha[i] = 0;
        alpha[j] = -diff;
      }
      if (diff > 0) {
        if (alpha[i] > C) {
          alpha[i] = C;
          alpha[j] = C - diff;
        }
      } else if (alpha[j] > C) {
        alpha[j] = C;
        alpha[i] = C + diff;
      }
    } else {
      double quad = std::max(diag[i] + diag[j] - 2.0 * k_ij, kMinCurvature);
      double delta = (grad[i] - grad[j]) / quad;
      double sum = alpha[i] + alpha[j];
      alpha[i] -= delta;
      alpha[j] += delta;
      if (sum > C) {
        if (alpha[i] > C) {
          alpha[i] = C;
          alpha[j] = sum - C;
        }
      } else if (alpha[j] < 0) {
        alpha[j] = 0;
        alpha[i] = sum;
      }
      if (sum > C) {
        if (alpha[j] > C) {
          alpha[j] = C;
          alpha[i] = sum - C;
        }
      } else if (alpha[i] < 0) {
        alpha[i] = 0;
        alpha[j] = sum;
      }
    }

    const double d_i = (alpha[i] - old_i) * y[i];
    const double d_j = (alpha[j] - old_j) * y[j];
    grad += y.cwiseProduct(kernel.col(i) * d_i + kernel.col(j) * d_j);
  }
  sol.max_violation = gap;

  // Fresh gradient for the reported quantities.
  grad = y.cwiseProduct(kernel * alpha.cwiseProduct(y)) - Vector::Ones(n);
  sol.objective = dual_objective(kernel, labels, alpha);

  double free_sum = 0.0;
  int free_count = 0;
  double lower = -std::numeric_limits<double>::infinity();
  double upper = std::numeric_limits<double>::infinity();
  for (Eigen::Index t = 0; t < n; ++t) {
    double r = -y[t] * grad[t];  // bias that puts sample t exactly on its margin
    if (alpha[t] > 0.0 && alpha[t] < C) {
      free_sum += r;
      ++free_count;
    } else if ((alpha[t] == 0.0) == (y[t] > 0)) {
      lower = std::max(lower, r);
    } else {
      upper = std::min(upper, r);
    }
    if (alpha[t] > 0.0) sol.sv_indices.push_back(t);
  }
  if (free_count > 0) {
    sol.bias = free_sum / free_count;
  } else if (std::isfinite(lower) && std::isfinite(upper)) {
    sol.bias = 0.5 * (lower + upper);
  } else {
    sol.bias = std::isfinite(lower) ? lower : upper;
  }
  return sol;
}

Vector one_vs_rest_labels(const std::vector<int>& labels, int cls) {
  Vector y(static_cast<Eigen::Index>(labels.size()));
  for (std::size_t i = 0; i < labels.size(); ++i) y[static_cast<Eigen::Index>(i)] = labels[i] == cls ? 1.0 : -1.0;
  return y;
}

std::map<int, DualSolution> solve_multiclass(const Matrix& kernel, const std::vector<int>& labels,
                                             const std::vector<int>& classes, double C, const SolverOptions& options,
                                             const std::map<int, Vector>* warm_starts) {
  if (classes.size() < 2) throw Error(ErrorKind::degenerate, "multiclass training needs at least two classes");
  for (int c : classes)
    if (std::find(labels.begin(), labels.end(), c) == labels.end())
      throw Error(ErrorKind::degenerate, "class " + std::to_string(c) + " has no samples");

  std::vector<DualSolution> solutions(classes.size());
  parallel_for(classes.size(), [&](std::size_t k) {
    const Vector* warm = nullptr;
    if (warm_starts) {
      auto it = warm_starts->find(classes[k]);
      if (it != warm_starts->end()) warm = &it->second;
    }
    solutions[k] = solve_dual(kernel, one_vs_rest_labels(labels, classes[k]), C, options, warm);
  });

  std::map<int, DualSolution> out;
  for (std::size_t k = 0; k < classes.size(); ++k) out.emplace(classes[k], std::move(solutions[k]));
  return out;
}

}  // namespace spnmkl
