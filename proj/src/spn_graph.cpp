#include "spnmkl/spn_graph.hpp"

#include <algorithm>
#include <functional>
#include <json.hpp>

#include "spnmkl/error.hpp"

namespace spnmkl {

const char* to_string(NodeKind kind) noexcept {
  switch (kind) {
    case NodeKind::sum: return "sum";
    case NodeKind::product: return "product";
    case NodeKind::combiner: return "combiner";
    case NodeKind::leaf: return "leaf";
  }
  return "unknown";
}

NodeKind node_kind_from_string(std::string_view text) {
  if (text == "sum") return NodeKind::sum;
  if (text == "product") return NodeKind::product;
  if (text == "combiner") return NodeKind::combiner;
  if (text == "leaf") return NodeKind::leaf;
  throw Error(ErrorKind::parse, "unknown node kind '" + std::string(text) + "'");
}

namespace {

[[noreturn]] void structure_error(const std::string& msg) { throw Error(ErrorKind::parse, msg); }

}  // namespace

SpnGraph::SpnGraph(std::vector<SpnNode> nodes, NodeId root, const std::set<std::string>* known_kernels)
    : nodes_(std::move(nodes)), root_(std::move(root)) {
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    if (!index_.emplace(nodes_[i].id, i).second) structure_error("duplicate node id '" + nodes_[i].id + "'");
  }
  if (!index_.contains(root_)) structure_error("root '" + root_ + "' is not a node");

  for (const auto& n : nodes_) {
    if (n.kind == NodeKind::leaf) {
      if (!n.children.empty()) structure_error("leaf '" + n.id + "' has children");
      if (n.kernel.empty()) structure_error("leaf '" + n.id + "' has no kernel");
      if (known_kernels && !known_kernels->contains(n.kernel))
        structure_error("leaf '" + n.id + "' references unknown kernel '" + n.kernel + "'");
    } else {
      if (n.children.empty()) structure_error(std::string(to_string(n.kind)) + " node '" + n.id + "' has no children");
      if (!n.kernel.empty()) structure_error("non-leaf node '" + n.id + "' carries a kernel");
      for (const auto& c : n.children)
        if (!index_.contains(c)) structure_error("node '" + n.id + "' references unknown child '" + c + "'");
    }
    if (n.exponent) {
      if (n.kind != NodeKind::product)
        structure_error("weight declared on " + std::string(to_string(n.kind)) + " node '" + n.id + "'");
      if (!(*n.exponent > 0.0)) structure_error("nonpositive exponent on node '" + n.id + "'");
    }
  }

  // Cycle detection and reachability from the root in one DFS.
  enum class Mark { none, active, done };
  std::vector<Mark> mark(nodes_.size(), Mark::none);
  std::function<void(std::size_t)> visit = [&](std::size_t i) {
    mark[i] = Mark::active;
    for (const auto& c : nodes_[i].children) {
      std::size_t j = index_.find(c)->second;
      if (mark[j] == Mark::active) structure_error("cycle detected through node '" + c + "'");
      if (mark[j] == Mark::none) visit(j);
    }
    mark[i] = Mark::done;
  };
  visit(index_.find(root_)->second);
  for (std::size_t i = 0; i < nodes_.size(); ++i)
    if (mark[i] == Mark::none) structure_error("node '" + nodes_[i].id + "' is unreachable from the root");
}

const SpnNode& SpnGraph::node(std::string_view id) const {
  auto it = index_.find(id);
  if (it == index_.end()) throw Error(ErrorKind::parse, "no node '" + std::string(id) + "'");
  return nodes_[it->second];
}

bool SpnGraph::contains(std::string_view id) const { return index_.find(id) != index_.end(); }

std::vector<NodeId> SpnGraph::product_ids() const {
  std::vector<NodeId> ids;
  for (const auto& n : nodes_)
    if (n.kind == NodeKind::product) ids.push_back(n.id);
  std::sort(ids.begin(), ids.end());
  return ids;
}

std::set<std::string> SpnGraph::kernel_refs() const {
  std::set<std::string> refs;
  for (const auto& n : nodes_)
    if (n.kind == NodeKind::leaf) refs.insert(n.kernel);
  return refs;
}

SpnGraph parse_spn(std::string_view text, const std::set<std::string>* known_kernels) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    structure_error(std::string("structure document is not valid JSON: ") + e.what());
  }
  try {
    if (!doc.is_object() || !doc.contains("nodes") || !doc.contains("root"))
      structure_error("structure document needs 'nodes' and 'root'");
    std::vector<SpnNode> nodes;
    for (const auto& jn : doc.at("nodes")) {
      SpnNode n;
      n.id = jn.at("id").get<std::string>();
      n.kind = node_kind_from_string(jn.at("kind").get<std::string>());
      if (jn.contains("children")) n.children = jn.at("children").get<std::vector<std::string>>();
      if (jn.contains("kernel")) n.kernel = jn.at("kernel").get<std::string>();
      for (const char* key : {"p", "weight", "beta"}) {
        if (!jn.contains(key)) continue;
        if (n.kind != NodeKind::product)
          structure_error("weight declared on " + std::string(to_string(n.kind)) + " node '" + n.id + "'");
        if (std::string_view(key) == "p") n.exponent = jn.at(key).get<double>();
      }
      nodes.push_back(std::move(n));
    }
    return SpnGraph(std::move(nodes), doc.at("root").get<std::string>(), known_kernels);
  } catch (const nlohmann::json::exception& e) {
    structure_error(std::string("malformed structure document: ") + e.what());
  }
}

std::string serialize_spn(const SpnGraph& graph) {
  nlohmann::json nodes = nlohmann::json::array();
  for (const auto& n : graph.nodes()) {
    nlohmann::json jn = {{"id", n.id}, {"kind", to_string(n.kind)}};
    if (n.kind != NodeKind::leaf) jn["children"] = n.children;
    if (n.kind == NodeKind::leaf) jn["kernel"] = n.kernel;
    if (n.exponent) jn["p"] = *n.exponent;
    nodes.push_back(std::move(jn));
  }
  nlohmann::json doc = {{"nodes", std::move(nodes)}, {"root", graph.root()}};
  return doc.dump(2);
}

namespace {

struct Partial {
  std::vector<std::pair<NodeId, int>> members;  // (product node, sum depth)
  std::vector<std::string> leaves;
};

// Number of induced trees below `id`, saturated at `cap + 1`.
std::size_t count_trees(const SpnGraph& g, const NodeId& id, std::size_t cap,
                        std::map<NodeId, std::size_t>& memo) {
  if (auto it = memo.find(id); it != memo.end()) return it->second;
  const auto& n = g.node(id);
  std::size_t count = 0;
  switch (n.kind) {
    case NodeKind::leaf: count = 1; break;
    case NodeKind::sum:
      for (const auto& c : n.children) count = std::min(cap + 1, count + count_trees(g, c, cap, memo));
      break;
    case NodeKind::product:
    case NodeKind::combiner:
      count = 1;
      for (const auto& c : n.children) {
        std::size_t k = count_trees(g, c, cap, memo);
        count = (k != 0 && count > (cap + 1) / k) ? cap + 1 : std::min(cap + 1, count * k);
      }
      break;
  }
  memo[id] = count;
  return count;
}

std::vector<Partial> expand(const SpnGraph& g, const NodeId& id, int depth) {
  const auto& n = g.node(id);
  switch (n.kind) {
    case NodeKind::leaf: return {Partial{{}, {n.kernel}}};
    case NodeKind::sum: {
      std::vector<Partial> out;
      for (const auto& c : n.children) {
        auto sub = expand(g, c, depth + 1);
        out.insert(out.end(), std::make_move_iterator(sub.begin()), std::make_move_iterator(sub.end()));
      }
      return out;
    }
    case NodeKind::product:
    case NodeKind::combiner: {
      Partial seed;
      if (n.kind == NodeKind::product) seed.members.emplace_back(n.id, depth);
      std::vector<Partial> acc{std::move(seed)};
      for (const auto& c : n.children) {
        auto sub = expand(g, c, depth);
        std::vector<Partial> next;
        next.reserve(acc.size() * sub.size());
        for (const auto& a : acc) {
          for (const auto& s : sub) {
            Partial p = a;
            p.members.insert(p.members.end(), s.members.begin(), s.members.end());
            p.leaves.insert(p.leaves.end(), s.leaves.begin(), s.leaves.end());
            next.push_back(std::move(p));
          }
        }
        acc = std::move(next);
      }
      return acc;
    }
  }
  return {};
}

Path make_path(Partial partial) {
  Path path;
  path.leaf_kernels = std::move(partial.leaves);

  std::vector<int> depths;
  for (const auto& [node, depth] : partial.members) depths.push_back(depth);
  std::sort(depths.begin(), depths.end());
  depths.erase(std::unique(depths.begin(), depths.end()), depths.end());

  path.num_layers = static_cast<int>(depths.size());
  path.layer_sizes.assign(depths.size(), 0);
  for (auto& [node, depth] : partial.members) {
    int layer = static_cast<int>(std::lower_bound(depths.begin(), depths.end(), depth) - depths.begin()) + 1;
    int index = ++path.layer_sizes[layer - 1];
    path.members.push_back(PathMember{std::move(node), depth, layer, index, Rational{}});
  }
  for (auto& m : path.members)
    m.exponent = Rational(1, static_cast<std::int64_t>(path.num_layers) * path.layer_sizes[m.layer - 1]);
  return path;
}

}  // namespace

void rebuild_index(PathTable& table) {
  table.node_to_paths.clear();
  table.unit_coeff.clear();
  for (std::size_t i = 0; i < table.paths.size(); ++i) {
    auto& path = table.paths[i];
    path.id = i;
    for (const auto& m : path.members) {
      auto& ids = table.node_to_paths[m.node];
      if (ids.empty() || ids.back() != i) ids.push_back(i);
      table.unit_coeff[m.node] += m.exponent;
    }
  }
}

PathTable enumerate_paths(const SpnGraph& graph, std::size_t max_paths) {
  std::map<NodeId, std::size_t> memo;
  std::size_t count = count_trees(graph, graph.root(), max_paths, memo);
  if (count > max_paths)
    throw Error(ErrorKind::limit, "path count exceeds the cap of " + std::to_string(max_paths));

  PathTable table;
  for (auto& partial : expand(graph, graph.root(), 0)) table.paths.push_back(make_path(std::move(partial)));
  rebuild_index(table);
  return table;
}

PruneResult prune_zero_nodes(const SpnGraph& graph, const PathTable& table,
                             const std::map<NodeId, double>& betas, double threshold) {
  if (!(threshold >= 0.0)) throw Error(ErrorKind::numeric, "prune threshold must be nonnegative");

  std::set<NodeId> dead;
  for (const auto& n : graph.nodes()) {
    if (n.kind != NodeKind::product) continue;
    auto it = betas.find(n.id);
    if (it != betas.end() && it->second <= threshold) dead.insert(n.id);
  }
  if (dead.empty()) return {graph, table, {}};

  // Sums die when every child is dead, products and combiners when any child is.
  for (bool changed = true; changed;) {
    changed = false;
    for (const auto& n : graph.nodes()) {
      if (dead.contains(n.id) || n.kind == NodeKind::leaf) continue;
      auto is_dead = [&](const NodeId& c) { return dead.contains(c); };
      bool dies = n.kind == NodeKind::sum ? std::all_of(n.children.begin(), n.children.end(), is_dead)
                                          : std::any_of(n.children.begin(), n.children.end(), is_dead);
      if (dies) {
        dead.insert(n.id);
        changed = true;
      }
    }
  }
  if (dead.contains(graph.root())) throw Error(ErrorKind::empty_model, "pruning removed every path");

  // Drop dead nodes and anything no longer reachable.
  std::set<NodeId> reachable;
  std::function<void(const NodeId&)> reach = [&](const NodeId& id) {
    if (!reachable.insert(id).second) return;
    for (const auto& c : graph.node(id).children)
      if (!dead.contains(c)) reach(c);
  };
  reach(graph.root());

  std::vector<SpnNode> kept;
  std::vector<NodeId> removed;
  for (const auto& n : graph.nodes()) {
    if (!reachable.contains(n.id)) {
      if (n.kind == NodeKind::product) removed.push_back(n.id);
      continue;
    }
    SpnNode copy = n;
    std::erase_if(copy.children, [&](const NodeId& c) { return dead.contains(c); });
    kept.push_back(std::move(copy));
  }
  std::sort(removed.begin(), removed.end());

  PathTable pruned;
  for (const auto& path : table.paths) {
    bool alive = std::none_of(path.members.begin(), path.members.end(),
                              [&](const PathMember& m) { return !reachable.contains(m.node); });
    if (alive) pruned.paths.push_back(path);
  }
  if (pruned.paths.empty()) throw Error(ErrorKind::empty_model, "pruning removed every path");
  rebuild_index(pruned);

  return {SpnGraph(std::move(kept), graph.root()), std::move(pruned), std::move(removed)};
}

}  // namespace spnmkl
