#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "spnmkl/kernel_engine.hpp"
#include "spnmkl/model_io.hpp"
#include "spnmkl/qp_solver.hpp"
#include "spnmkl/spn_graph.hpp"
#include "spnmkl/weighting.hpp"

namespace spnmkl {

/// Backtracking line search on the projected gradient step.
struct StepConfig {
  double initial = 1.0;
  double shrink = 0.5;
  double armijo = 1e-4;
  int max_shrinks = 30;
};

/// Per-iteration training record, one line of the training log.
struct IterationRecord {
  int iteration = 0;
  double objective = 0.0;  // after the dual solve
  double r1 = 0.0;
  double r2 = 0.0;
  double hinge = 0.0;
  double objective_after_beta = 0.0;  // same (W, b), updated weights
  std::size_t active_nodes = 0;
  std::size_t active_paths = 0;
  std::vector<NodeId> pruned;
  std::int64_t dual_updates = 0;
  int line_search_shrinks = 0;
  int cccp_inner_iterations = 0;
  bool stalled = false;
  bool psd_warning = false;
};

struct TrainConfig {
  RegularizerParams params;
  int outer_max_iters = 200;
  double outer_rel_tol = 1e-5;
  StepConfig step;
  int convex_inner_steps = 1;  // guarded projected steps per outer iteration
  int cccp_max_inner = 50;
  double inner_tol = 1e-10;  // relative change of the inner objective that ends a weight step
  double prune_threshold = 1e-8;
  std::uint64_t seed = 0;
  std::size_t max_paths = kDefaultMaxPaths;
  SolverOptions solver{1e-10, 10'000'000, true};

  /// Called after every weight update, before pruning; may edit the weights.
  std::function<void(int iteration, WeightVector& betas)> after_beta_update;
  std::function<void(const IterationRecord&)> on_iteration;

  void validate() const;
};

/// Alternating-optimization state for the current path table.
///
/// The classifier blocks are w_m = s_m sum_i alpha_i y_i phi_m(x_i), where s_m
/// are the path weights in force when the duals were solved. The weight step
/// keeps (alpha, s, b) fixed and moves only the betas.
struct TrainState {
  WeightVector betas;
  std::vector<int> classes;
  std::vector<Vector> targets;  // +1/-1 per task
  std::vector<Vector> alphas;
  std::vector<double> biases;
  std::vector<double> scales;  // s_m, indexed by path id
  WNorms w_norms;
  std::vector<std::pair<int, double>> objective_trace;
};

struct ObjectiveParts {
  double r1 = 0.0;
  double r2 = 0.0;
  double hinge = 0.0;
  double total = 0.0;
};

/// sum_m g_m K_m. Throws ErrorKind::empty_model when every g_m is zero.
Matrix compose_optimal_kernel(const PathTable& table, const KernelWorkspace& ws, const WeightVector& betas);

/// |w_m|^2 = s_m^2 sum_c (alpha_c y_c)' K_m (alpha_c y_c), clamped at zero.
WNorms update_w_norms(const PathTable& table, const KernelWorkspace& ws, const std::vector<double>& scales,
                      const std::vector<Vector>& alphas, const std::vector<Vector>& targets);

/// Training decision values, one column per task.
Matrix decision_values(const PathTable& table, const KernelWorkspace& ws, const TrainState& state);

/// R1 + R2 + C * total hinge loss at the current state.
ObjectiveParts eval_objective(const TrainState& state, const KernelWorkspace& ws, const PathTable& table,
                              const RegularizerParams& params);

struct BetaStep {
  WeightVector betas;
  int shrinks = 0;
  int inner_iterations = 0;
  bool stalled = false;
};

/// Guarded projected gradient steps on R over `nodes` (Jacobi sweep, stable
/// id order). The other weights and the w-norms stay fixed.
BetaStep beta_step_convex(const TrainState& state, const PathTable& table, const std::map<NodeId, double>& coeffs,
                          const TrainConfig& config, const std::vector<NodeId>& nodes);

/// Concave-convex step over `nodes`: their penalty terms are linearized at the
/// current weights and the convex surrogate is minimized by guarded projected
/// gradient steps.
BetaStep beta_step_cccp(const TrainState& state, const PathTable& table, const std::map<NodeId, double>& coeffs,
                        const TrainConfig& config, const std::vector<NodeId>& nodes);

/// Fills the exponent of every weighted node: explicit override, then the
/// structure's own p, then the default. Rejects overrides on other nodes.
RegularizerParams resolve_exponents(const RegularizerParams& params, const SpnGraph& graph);

struct FitResult {
  TrainedModel model;
  TrainState state;
  std::vector<IterationRecord> log;
  int iterations = 0;
  bool converged = false;
  double training_accuracy = 0.0;
};

FitResult fit(const Matrix& data, const std::vector<int>& labels, const SpnGraph& graph, const KernelSpecs& specs,
              const TrainConfig& config);

}  // namespace spnmkl
