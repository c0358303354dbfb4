#include "spnmkl/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>

#include "spnmkl/error.hpp"
#include "spnmkl/parallel.hpp"

namespace spnmkl {

void TrainConfig::validate() const {
  params.validate();
  if (outer_max_iters < 1) throw Error(ErrorKind::parse, "outer_max_iters must be at least 1");
  if (!(outer_rel_tol > 0.0)) throw Error(ErrorKind::parse, "outer_rel_tol must be positive");
  if (!(step.initial > 0.0)) throw Error(ErrorKind::parse, "initial step size must be positive");
  if (!(step.shrink > 0.0 && step.shrink < 1.0)) throw Error(ErrorKind::parse, "shrink factor must lie in (0, 1)");
  if (!(step.armijo > 0.0 && step.armijo < 1.0)) throw Error(ErrorKind::parse, "Armijo constant must lie in (0, 1)");
  if (step.max_shrinks < 0) throw Error(ErrorKind::parse, "max_shrinks must be nonnegative");
  if (convex_inner_steps < 1) throw Error(ErrorKind::parse, "convex_inner_steps must be at least 1");
  if (cccp_max_inner < 1) throw Error(ErrorKind::parse, "cccp_max_inner must be at least 1");
  if (!(prune_threshold >= 0.0)) throw Error(ErrorKind::parse, "prune_threshold must be nonnegative");
}

Matrix compose_optimal_kernel(const PathTable& table, const KernelWorkspace& ws, const WeightVector& betas) {
  const Eigen::Index n = static_cast<Eigen::Index>(ws.samples());
  Matrix k = Matrix::Zero(n, n);
  bool any = false;
  for (const auto& path : table.paths) {
    double g = g_path(path, betas);
    if (g == 0.0) continue;
    k += g * ws.path_grams.at(path.id);
    any = true;
  }
  if (!any) throw Error(ErrorKind::empty_model, "every path weighting is zero");
  return k;
}

WNorms update_w_norms(const PathTable& table, const KernelWorkspace& ws, const std::vector<double>& scales,
                      const std::vector<Vector>& alphas, const std::vector<Vector>& targets) {
  std::vector<Vector> coef;
  for (std::size_t c = 0; c < alphas.size(); ++c) coef.push_back(alphas[c].cwiseProduct(targets[c]));
  WNorms wn(table.size(), 0.0);
  parallel_for(table.size(), [&](std::size_t m) {
    double s = scales.at(m);
    if (s == 0.0) return;
    const Matrix& k = ws.path_grams.at(m);
    double q = 0.0;
    for (const auto& u : coef) q += u.dot(k * u);
    wn[m] = std::max(0.0, s * s * q);
  });
  return wn;
}

Matrix decision_values(const PathTable& table, const KernelWorkspace& ws, const TrainState& state) {
  const Eigen::Index n = static_cast<Eigen::Index>(ws.samples());
  const Eigen::Index tasks = static_cast<Eigen::Index>(state.alphas.size());
  Matrix coef(n, tasks);
  for (Eigen::Index c = 0; c < tasks; ++c) coef.col(c) = state.alphas[c].cwiseProduct(state.targets[c]);
  Matrix f = Matrix::Zero(n, tasks);
  for (const auto& path : table.paths) {
    double s = state.scales.at(path.id);
    if (s != 0.0) f += s * (ws.path_grams.at(path.id) * coef);
  }
  for (Eigen::Index c = 0; c < tasks; ++c) f.col(c).array() += state.biases[c];
  return f;
}

ObjectiveParts eval_objective(const TrainState& state, const KernelWorkspace& ws, const PathTable& table,
                              const RegularizerParams& params) {
  ObjectiveParts parts;
  auto r = eval_R(table, state.betas, state.w_norms, params);
  parts.r1 = r.r1;
  parts.r2 = r.r2;
  Matrix f = decision_values(table, ws, state);
  for (Eigen::Index c = 0; c < f.cols(); ++c)
    for (Eigen::Index i = 0; i < f.rows(); ++i) parts.hinge += std::max(0.0, 1.0 - state.targets[c][i] * f(i, c));
  parts.total = parts.r1 + parts.r2 + params.C * parts.hinge;
  return parts;
}

namespace {

using ValueFn = std::function<std::optional<double>(const WeightVector&)>;
using GradFn = std::function<double(const NodeId&, const WeightVector&)>;

struct StepOutcome {
  WeightVector betas;
  double value = 0.0;
  int shrinks = 0;
  bool moved = false;
  bool stalled = false;
};

// Largest step eta_v = initial * shrink^k (k <= max_shrinks) that passes the
// Armijo test when only node v moves. Returns the moved value, or nullopt.
std::optional<double> node_step(const WeightVector& betas, double value, const NodeId& v, double g, const ValueFn& f,
                                const StepConfig& step, int& shrinks) {
  const double b = betas.at(v);
  double eta = step.initial;
  WeightVector cand = betas;
  for (int s = 0; s <= step.max_shrinks; ++s, eta *= step.shrink) {
    double moved = b - eta * g;
    moved = moved < kBetaFloor ? 0.0 : moved;
    if (moved == b) return std::nullopt;  // pinned at zero
    cand.at(v) = moved;
    auto fv = f(cand);
    if (fv && *fv <= value + step.armijo * g * (moved - b)) {
      shrinks += s;
      return moved;
    }
  }
  shrinks += step.max_shrinks;
  return std::nullopt;
}

// One projected gradient step. Every node gets its own backtracked step size
// from the sweep-start gradient; the combined move is then backtracked along
// its direction until the Armijo test holds for the joint update. Weights that
// land below the gradient floor are projected to exactly zero.
StepOutcome projected_step(const WeightVector& betas, double value, const std::vector<NodeId>& nodes,
                           const ValueFn& f, const GradFn& grad, const StepConfig& step) {
  StepOutcome out{betas, value};
  const std::size_t n = nodes.size();
  std::vector<double> g(n), target(n);
  std::vector<int> shrinks(n, 0);
  std::vector<char> found(n, 0);
  parallel_for(n, [&](std::size_t k) {
    g[k] = grad(nodes[k], betas);
    if (g[k] == 0.0) return;
    if (auto moved = node_step(betas, value, nodes[k], g[k], f, step, shrinks[k])) {
      target[k] = *moved;
      found[k] = 1;
    }
  });
  for (int s : shrinks) out.shrinks += s;
  bool any_gradient = std::any_of(g.begin(), g.end(), [](double v) { return v != 0.0; });
  if (std::none_of(found.begin(), found.end(), [](char c) { return c != 0; })) {
    // No single node can descend: either stationary, pinned, or the line search ran out.
    out.stalled = any_gradient && out.shrinks > 0;
    return out;
  }

  double t = 1.0;
  for (int s = 0; s <= step.max_shrinks; ++s, t *= step.shrink) {
    WeightVector cand = betas;
    double directional = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      if (!found[k]) continue;
      double& b = cand.at(nodes[k]);
      double moved = b + t * (target[k] - b);
      moved = moved < kBetaFloor ? 0.0 : moved;
      directional += g[k] * (moved - b);
      b = moved;
    }
    if (directional >= 0.0) break;
    auto v = f(cand);
    if (v && *v <= value + step.armijo * directional) {
      out.betas = std::move(cand);
      out.value = *v;
      out.shrinks += s;
      out.moved = true;
      return out;
    }
  }
  out.stalled = true;
  return out;
}

double relative_change(double before, double after) {
  return std::abs(before - after) / std::max(std::abs(before), std::numeric_limits<double>::min());
}

// Repeated guarded steps until a step stalls, stops moving, changes the value
// by at most `tol` relative, or zeroes a node.
BetaStep descend(const WeightVector& start, const std::vector<NodeId>& nodes, const ValueFn& f, const GradFn& grad,
                 const StepConfig& config, int max_steps, double tol) {
  BetaStep result{start};
  double value = *f(result.betas);
  for (int k = 0; k < max_steps; ++k) {
    auto step = projected_step(result.betas, value, nodes, f, grad, config);
    result.shrinks += step.shrinks;
    ++result.inner_iterations;
    if (step.stalled) {
      result.stalled = true;
      return result;
    }
    if (!step.moved) return result;
    bool small = relative_change(value, step.value) <= tol;
    result.betas = std::move(step.betas);
    value = step.value;
    if (small) return result;
    // Zeroed nodes have no gradient; they are pruned before the next step.
    if (std::any_of(nodes.begin(), nodes.end(), [&](const NodeId& v) { return result.betas.at(v) == 0.0; }))
      return result;
  }
  return result;
}

}  // namespace

BetaStep beta_step_convex(const TrainState& state, const PathTable& table, const std::map<NodeId, double>& coeffs,
                          const TrainConfig& config, const std::vector<NodeId>& nodes) {
  if (nodes.empty()) return BetaStep{state.betas};
  ValueFn f = [&](const WeightVector& b) -> std::optional<double> {
    auto r = try_eval_R(table, b, state.w_norms, config.params);
    if (!r) return std::nullopt;
    return r->total();
  };
  GradFn grad = [&](const NodeId& v, const WeightVector& b) {
    return grad_R1(v, table, b, state.w_norms) + grad_R2(v, coeffs, b, config.params);
  };
  return descend(state.betas, nodes, f, grad, config.step, config.convex_inner_steps, config.inner_tol);
}

BetaStep beta_step_cccp(const TrainState& state, const PathTable& table, const std::map<NodeId, double>& coeffs,
                        const TrainConfig& config, const std::vector<NodeId>& nodes) {
  if (nodes.empty()) return BetaStep{state.betas};

  std::map<NodeId, double> slope;
  for (const auto& v : nodes) slope[v] = grad_R2(v, coeffs, state.betas, config.params);

  RegularizerParams no_penalty = config.params;
  no_penalty.lambda = 0.0;
  ValueFn surrogate = [&](const WeightVector& b) -> std::optional<double> {
    auto r = try_eval_R(table, b, state.w_norms, no_penalty);
    if (!r) return std::nullopt;
    double value = r->r1;
    for (const auto& [v, c] : coeffs) {
      auto it = slope.find(v);
      value += it != slope.end() ? it->second * b.at(v) : c * std::pow(b.at(v), config.params.exponent(v));
    }
    return value;
  };
  GradFn grad = [&](const NodeId& v, const WeightVector& b) {
    return grad_R1(v, table, b, state.w_norms) + slope.at(v);
  };
  auto result = descend(state.betas, nodes, surrogate, grad, config.step, config.cccp_max_inner, config.inner_tol);
  if (result.inner_iterations == config.cccp_max_inner) result.stalled = true;
  return result;
}

namespace {

// Maps each surviving path to its position in the table before pruning.
std::vector<std::size_t> surviving_ids(const PathTable& before, const PathTable& after) {
  std::vector<std::size_t> ids;
  std::size_t src = 0;
  for (const auto& path : after.paths) {
    while (src < before.size() &&
           !(before.paths[src].members == path.members && before.paths[src].leaf_kernels == path.leaf_kernels))
      ++src;
    if (src == before.size()) throw Error(ErrorKind::numeric, "pruned table is not a subsequence of the original");
    ids.push_back(src++);
  }
  return ids;
}

}  // namespace

RegularizerParams resolve_exponents(const RegularizerParams& params, const SpnGraph& graph) {
  RegularizerParams out = params;
  for (const auto& id : graph.product_ids()) {
    if (params.p.count(id)) continue;
    const auto& exponent = graph.node(id).exponent;
    out.p[id] = exponent ? *exponent : params.default_p;
  }
  for (const auto& [id, value] : params.p)
    if (!graph.contains(id) || graph.node(id).kind != NodeKind::product)
      throw Error(ErrorKind::parse, "exponent given for '" + id + "', which is not a weighted product node");
  return out;
}

FitResult fit(const Matrix& data, const std::vector<int>& labels, const SpnGraph& graph, const KernelSpecs& specs,
              const TrainConfig& config) {
  config.validate();
  if (static_cast<std::size_t>(data.rows()) != labels.size())
    throw Error(ErrorKind::data, "label count does not match the number of rows");
  if (data.rows() < 2) throw Error(ErrorKind::degenerate, "training needs at least two samples");

  TrainConfig cfg = config;
  cfg.params = resolve_exponents(config.params, graph);

  TrainState state;
  state.classes = labels;
  std::sort(state.classes.begin(), state.classes.end());
  state.classes.erase(std::unique(state.classes.begin(), state.classes.end()), state.classes.end());
  if (state.classes.size() < 2) throw Error(ErrorKind::degenerate, "training data contains a single class");
  std::vector<int> task_classes;
  if (state.classes.size() == 2) task_classes = {state.classes[1]};
  else task_classes = state.classes;
  for (int c : task_classes) state.targets.push_back(one_vs_rest_labels(labels, c));

  SpnGraph current = graph;
  PathTable table = enumerate_paths(current, cfg.max_paths);
  KernelWorkspace ws = build_workspace(data, specs, table);
  for (const auto& [node, ids] : table.node_to_paths) state.betas[node] = 1.0;
  // With lambda = 0 the weight block has no minimizer (R1 decreases without
  // bound in every beta), so the weights stay at their initial value.
  const bool frozen = cfg.params.lambda == 0.0;

  std::vector<NodeId> all_pruned;
  FitResult result{TrainedModel(current), {}, {}, 0, false, 0.0};
  double previous = 0.0;
  for (int it = 1;; ++it) {
    IterationRecord rec;
    rec.iteration = it;

    Matrix k = compose_optimal_kernel(table, ws, state.betas);
    state.scales.assign(table.size(), 0.0);
    for (const auto& path : table.paths) state.scales[path.id] = g_path(path, state.betas);

    std::vector<DualSolution> duals(state.targets.size());
    parallel_for(duals.size(), [&](std::size_t c) {
      const Vector* warm = state.alphas.size() == duals.size() ? &state.alphas[c] : nullptr;
      duals[c] = solve_dual(k, state.targets[c], cfg.params.C, cfg.solver, warm);
    });
    state.alphas.clear();
    state.biases.clear();
    for (auto& d : duals) {
      rec.dual_updates += d.updates;
      rec.psd_warning = rec.psd_warning || d.psd_warning;
      state.alphas.push_back(std::move(d.alpha));
      state.biases.push_back(d.bias);
    }
    state.w_norms = update_w_norms(table, ws, state.scales, state.alphas, state.targets);

    auto obj = eval_objective(state, ws, table, cfg.params);
    state.objective_trace.emplace_back(it, obj.total);
    rec.objective = obj.total;
    rec.r1 = obj.r1;
    rec.r2 = obj.r2;
    rec.hinge = obj.hinge;
    rec.objective_after_beta = obj.total;
    rec.active_nodes = state.betas.size();
    rec.active_paths = table.size();

    bool done = it > 1 && relative_change(previous, obj.total) < cfg.outer_rel_tol;
    result.converged = done;
    if (done || it == cfg.outer_max_iters) {
      result.iterations = it;
      result.log.push_back(rec);
      if (cfg.on_iteration) cfg.on_iteration(rec);
      break;
    }
    previous = obj.total;

    if (!frozen) {
      std::vector<NodeId> convex, concave;
      for (const auto& [node, beta] : state.betas) (cfg.params.exponent(node) >= 1.0 ? convex : concave).push_back(node);
      auto coeffs = reg_coeffs(table, cfg.params);
      auto step = beta_step_convex(state, table, coeffs, cfg, convex);
      state.betas = std::move(step.betas);
      rec.line_search_shrinks = step.shrinks;
      rec.stalled = step.stalled;
      auto cccp = beta_step_cccp(state, table, coeffs, cfg, concave);
      state.betas = std::move(cccp.betas);
      rec.line_search_shrinks += cccp.shrinks;
      rec.cccp_inner_iterations = cccp.inner_iterations;
      rec.stalled = rec.stalled || cccp.stalled;
    }
    if (cfg.after_beta_update) cfg.after_beta_update(it, state.betas);
    if (auto r = try_eval_R(table, state.betas, state.w_norms, cfg.params))
      rec.objective_after_beta = r->total() + cfg.params.C * obj.hinge;
    else
      rec.objective_after_beta = std::numeric_limits<double>::infinity();

    bool prune = std::any_of(state.betas.begin(), state.betas.end(),
                             [&](const auto& kv) { return kv.second <= cfg.prune_threshold; });
    if (prune) {
      auto pruned = prune_zero_nodes(current, table, state.betas, cfg.prune_threshold);
      auto ids = surviving_ids(table, pruned.table);
      retain_paths(ws, table, pruned.table);
      WNorms wn;
      std::vector<double> scales;
      for (std::size_t src : ids) {
        wn.push_back(state.w_norms[src]);
        scales.push_back(state.scales[src]);
      }
      state.w_norms = std::move(wn);
      state.scales = std::move(scales);
      WeightVector kept;
      for (const auto& [node, paths] : pruned.table.node_to_paths) kept[node] = state.betas.at(node);
      state.betas = std::move(kept);
      for (auto it_p = cfg.params.p.begin(); it_p != cfg.params.p.end();)
        it_p = state.betas.count(it_p->first) ? std::next(it_p) : cfg.params.p.erase(it_p);
      current = std::move(pruned.graph);
      table = std::move(pruned.table);
      rec.pruned = pruned.removed;
      all_pruned.insert(all_pruned.end(), pruned.removed.begin(), pruned.removed.end());
    }
    result.log.push_back(rec);
    if (cfg.on_iteration) cfg.on_iteration(rec);
  }

  // Final decision values come from the last dual solve, for which the scales
  // equal the current path weights.
  Matrix f = decision_values(table, ws, state);
  std::size_t correct = 0;
  for (Eigen::Index i = 0; i < f.rows(); ++i) {
    int predicted;
    if (state.classes.size() == 2) {
      predicted = f(i, 0) >= 0.0 ? state.classes[1] : state.classes[0];
    } else {
      Eigen::Index best = 0;
      for (Eigen::Index c = 1; c < f.cols(); ++c)
        if (f(i, c) > f(i, best)) best = c;
      predicted = task_classes[best];
    }
    if (predicted == labels[i]) ++correct;
  }
  result.training_accuracy = static_cast<double>(correct) / static_cast<double>(f.rows());

  TrainedModel model(current);
  model.table = table;
  model.kernels = specs;
  model.params = cfg.params;
  model.betas = state.betas;
  model.path_weights = state.scales;
  model.classes = state.classes;
  model.dimension = data.cols();
  model.pruned = all_pruned;
  std::sort(model.pruned.begin(), model.pruned.end());

  std::vector<Eigen::Index> rows;
  for (Eigen::Index i = 0; i < data.rows(); ++i)
    for (const auto& a : state.alphas)
      if (a[i] > 0.0) {
        rows.push_back(i);
        break;
      }
  model.support_vectors.resize(static_cast<Eigen::Index>(rows.size()), data.cols());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    model.support_vectors.row(static_cast<Eigen::Index>(r)) = data.row(rows[r]);
    model.support_labels.push_back(labels[rows[r]]);
  }
  for (std::size_t c = 0; c < task_classes.size(); ++c) {
    TaskModel t;
    t.positive_class = task_classes[c];
    t.bias = state.biases[c];
    t.alpha.resize(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t r = 0; r < rows.size(); ++r) t.alpha[static_cast<Eigen::Index>(r)] = state.alphas[c][rows[r]];
    model.tasks.push_back(std::move(t));
  }
  result.model = std::move(model);
  result.state = std::move(state);
  return result;
}

}  // namespace spnmkl
