#pragma once

#include <cmath>
#include <vector>

#include "spnmkl/qp_solver.hpp"

namespace spnmkl::testing {

struct ClassicalMkl {
  std::vector<double> betas;
  Vector alpha;
  double bias = 0.0;
  double objective = 0.0;
};

/// Classical linear MKL by alternation: exact SVM on sum_m beta_m K_m, then the
/// closed-form weight update beta_m = |w_m| / sqrt(2 lambda) that minimizes
/// |w_m|^2 / (2 beta_m) + lambda beta_m with w fixed.
inline ClassicalMkl classical_mkl(const std::vector<Matrix>& grams, const Vector& y, double C, double lambda,
                                  int max_rounds = 2000) {
  const std::size_t m = grams.size();
  const Eigen::Index n = y.size();
  SolverOptions tight;
  tight.tol = 1e-11;
  ClassicalMkl out;
  out.betas.assign(m, 1.0);
  double previous = 0.0;
  for (int round = 0; round < max_rounds; ++round) {
    Matrix k = Matrix::Zero(n, n);
    for (std::size_t j = 0; j < m; ++j) k += out.betas[j] * grams[j];
    auto sol = solve_dual(k, y, C, tight, round > 0 ? &out.alpha : nullptr);
    out.alpha = sol.alpha;
    out.bias = sol.bias;
    Vector u = sol.alpha.cwiseProduct(y);
    Vector f = k * u + Vector::Constant(n, sol.bias);
    std::vector<double> w_sq(m);
    double obj = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
      w_sq[j] = out.betas[j] * out.betas[j] * std::max(0.0, u.dot(grams[j] * u));
      if (out.betas[j] > 0) obj += w_sq[j] / (2 * out.betas[j]);
      obj += lambda * out.betas[j];
    }
    for (Eigen::Index i = 0; i < n; ++i) obj += C * std::max(0.0, 1 - y[i] * f[i]);
    out.objective = obj;
    if (round > 0 && std::abs(previous - obj) <= 1e-13 * std::abs(obj)) break;
    previous = obj;
    for (std::size_t j = 0; j < m; ++j) out.betas[j] = std::sqrt(w_sq[j] / (2 * lambda));
  }
  return out;
}

}  // namespace spnmkl::testing
