#pragma once

#include <map>
#include <optional>
#include <vector>

#include "spnmkl/spn_graph.hpp"

namespace spnmkl {

/// Nonnegative weight of every weighted product node.
using WeightVector = std::map<NodeId, double>;

/// Squared norm of each path's classifier block, indexed by path id.
using WNorms = std::vector<double>;

struct RegularizerParams {
  double lambda = 1.0;
  double C = 1.0;
  double default_p = 1.0;
  std::map<NodeId, double> p;  // per-node overrides of default_p

  double exponent(const NodeId& node) const {
    auto it = p.find(node);
    return it == p.end() ? default_p : it->second;
  }
  void validate() const;
};

/// Weights below this are treated as zero by the gradient routines.
inline constexpr double kBetaFloor = 1e-10;

/// Product over members of beta^(1/(N_m N_{m_l})). Zero iff some member weight is zero.
double g_path(const Path& path, const WeightVector& betas);

/// lambda * sum over occurrences of v of 1/(N_m N_{m_l}).
std::map<NodeId, double> reg_coeffs(const PathTable& table, const RegularizerParams& params);

struct RegularizerValue {
  double r1 = 0.0;  // sum_m |w_m|^2 / (2 g_m)
  double r2 = 0.0;  // sum_v c_v beta_v^p_v
  double total() const { return r1 + r2; }
};

/// Returns nullopt when some path has g_m = 0 but a nonzero block norm.
std::optional<RegularizerValue> try_eval_R(const PathTable& table, const WeightVector& betas, const WNorms& wn,
                                           const RegularizerParams& params);

/// Throws ErrorKind::numeric on a continuity violation.
RegularizerValue eval_R(const PathTable& table, const WeightVector& betas, const WNorms& wn,
                        const RegularizerParams& params);

/// dR1/dbeta_v. Requires beta_v >= kBetaFloor.
double grad_R1(const NodeId& node, const PathTable& table, const WeightVector& betas, const WNorms& wn);

/// dR2/dbeta_v = c_v p_v beta_v^(p_v - 1). Throws when beta_v = 0 and p_v < 1.
double grad_R2(const NodeId& node, const std::map<NodeId, double>& coeffs, const WeightVector& betas,
               const RegularizerParams& params);

}  // namespace spnmkl
