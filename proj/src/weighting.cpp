#include "spnmkl/weighting.hpp"

#include <cmath>
#include <limits>

#include "spnmkl/error.hpp"

namespace spnmkl {

void RegularizerParams::validate() const {
  if (!(lambda >= 0.0)) throw Error(ErrorKind::parse, "lambda must be nonnegative");
  if (!(C >= 0.0)) throw Error(ErrorKind::parse, "C must be nonnegative");
  if (!(default_p > 0.0)) throw Error(ErrorKind::parse, "default exponent p must be positive");
  for (const auto& [node, value] : p)
    if (!(value > 0.0)) throw Error(ErrorKind::parse, "exponent p for node '" + node + "' must be positive");
}

namespace {

double beta_of(const WeightVector& betas, const NodeId& node) {
  auto it = betas.find(node);
  if (it == betas.end()) throw Error(ErrorKind::numeric, "no weight for product node '" + node + "'");
  if (!(it->second >= 0.0)) throw Error(ErrorKind::numeric, "negative weight on product node '" + node + "'");
  return it->second;
}

}  // namespace

double g_path(const Path& path, const WeightVector& betas) {
  double g = 1.0;
  for (const auto& m : path.members) {
    double beta = beta_of(betas, m.node);
    if (beta == 0.0) return 0.0;
    g *= std::pow(beta, m.exponent.to_double());
  }
  return g;
}

std::map<NodeId, double> reg_coeffs(const PathTable& table, const RegularizerParams& params) {
  std::map<NodeId, double> coeffs;
  for (const auto& [node, unit] : table.unit_coeff) coeffs[node] = params.lambda * unit.to_double();
  return coeffs;
}

std::optional<RegularizerValue> try_eval_R(const PathTable& table, const WeightVector& betas, const WNorms& wn,
                                           const RegularizerParams& params) {
  RegularizerValue value;
  for (const auto& path : table.paths) {
    double w_sq = wn.at(path.id);
    if (w_sq == 0.0) continue;
    double g = g_path(path, betas);
    if (g == 0.0) return std::nullopt;
    value.r1 += w_sq / (2.0 * g);
  }
  for (const auto& [node, c] : reg_coeffs(table, params)) {
    double beta = beta_of(betas, node);
    value.r2 += c * std::pow(beta, params.exponent(node));
  }
  return value;
}

RegularizerValue eval_R(const PathTable& table, const WeightVector& betas, const WNorms& wn,
                        const RegularizerParams& params) {
  auto value = try_eval_R(table, betas, wn, params);
  if (!value) throw Error(ErrorKind::numeric, "continuity violation: a path with zero weighting has a nonzero block norm");
  return *value;
}

double grad_R1(const NodeId& node, const PathTable& table, const WeightVector& betas, const WNorms& wn) {
  double beta = beta_of(betas, node);
  if (beta < kBetaFloor)
    throw Error(ErrorKind::numeric, "weight of node '" + node + "' is below the gradient floor; prune it first");
  auto it = table.node_to_paths.find(node);
  if (it == table.node_to_paths.end()) return 0.0;

  double grad = 0.0;
  for (std::size_t id : it->second) {
    const auto& path = table.paths[id];
    double w_sq = wn.at(id);
    if (w_sq == 0.0) continue;
    double share = 0.0;  // sum of this node's exponents along the path
    for (const auto& m : path.members)
      if (m.node == node) share += m.exponent.to_double();
    double g = g_path(path, betas);
    if (g == 0.0) throw Error(ErrorKind::numeric, "continuity violation on path " + std::to_string(id));
    grad -= w_sq * share / (2.0 * g * beta);
  }
  return grad;
}

double grad_R2(const NodeId& node, const std::map<NodeId, double>& coeffs, const WeightVector& betas,
               const RegularizerParams& params) {
  auto it = coeffs.find(node);
  if (it == coeffs.end()) return 0.0;
  double beta = beta_of(betas, node);
  double p = params.exponent(node);
  if (p == 1.0) return it->second;
  if (beta == 0.0) {
    if (p < 1.0) throw Error(ErrorKind::numeric, "singular penalty gradient at zero weight for node '" + node + "'");
    return 0.0;
  }
  return it->second * p * std::pow(beta, p - 1.0);
}

}  // namespace spnmkl
