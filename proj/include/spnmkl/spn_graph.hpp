#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "spnmkl/rational.hpp"

namespace spnmkl {

using NodeId = std::string;

enum class NodeKind { sum, product, combiner, leaf };

const char* to_string(NodeKind kind) noexcept;
NodeKind node_kind_from_string(std::string_view text);

/// One vertex of a kernel-combination network.
///
/// Product nodes carry the learnable weight beta and the penalty exponent p.
/// Combiner nodes multiply their children entry-wise without a weight.
struct SpnNode {
  NodeId id;
  NodeKind kind = NodeKind::leaf;
  std::vector<NodeId> children;
  std::string kernel;              // leaf only
  std::optional<double> exponent;  // product only; unset means "use the configured default"

  friend bool operator==(const SpnNode&, const SpnNode&) = default;
};

/// Validated rooted DAG. Immutable after construction.
class SpnGraph {
 public:
  /// Validates every structural invariant. When `known_kernels` is given,
  /// each leaf's kernel must be one of them.
  SpnGraph(std::vector<SpnNode> nodes, NodeId root,
           const std::set<std::string>* known_kernels = nullptr);

  const std::vector<SpnNode>& nodes() const { return nodes_; }
  const NodeId& root() const { return root_; }
  const SpnNode& node(std::string_view id) const;
  bool contains(std::string_view id) const;

  /// Ids of weighted product nodes in ascending id order.
  std::vector<NodeId> product_ids() const;
  std::set<std::string> kernel_refs() const;

  friend bool operator==(const SpnGraph& a, const SpnGraph& b) {
    return a.root_ == b.root_ && a.nodes_ == b.nodes_;
  }

 private:
  std::vector<SpnNode> nodes_;
  NodeId root_;
  std::map<NodeId, std::size_t, std::less<>> index_;
};

/// Reads the JSON structure document `{nodes: [{id, kind, children, kernel, p}], root}`.
SpnGraph parse_spn(std::string_view text, const std::set<std::string>* known_kernels = nullptr);
std::string serialize_spn(const SpnGraph& graph);

struct PathMember {
  NodeId node;
  int depth = 0;           // sum nodes strictly above this occurrence
  int layer = 0;           // 1-based dense rank of `depth` among the path's members
  int index_in_layer = 0;  // 1-based
  Rational exponent;       // 1 / (N_m * N_{m_l})

  friend bool operator==(const PathMember&, const PathMember&) = default;
};

/// One induced tree: a single child chosen at every sum node, all children
/// kept at product and combiner nodes.
struct Path {
  std::size_t id = 0;
  std::vector<PathMember> members;       // weighted product occurrences, preorder
  std::vector<std::string> leaf_kernels;  // multiset, preorder
  int num_layers = 0;                     // N_m
  std::vector<int> layer_sizes;           // N_{m_l} for l = 1..N_m

  friend bool operator==(const Path&, const Path&) = default;
};

struct PathTable {
  std::vector<Path> paths;
  /// Paths through each weighted product node, ascending ids.
  std::map<NodeId, std::vector<std::size_t>> node_to_paths;
  /// Sum over occurrences of 1/(N_m N_{m_l}); the regularizer coefficient is lambda times this.
  std::map<NodeId, Rational> unit_coeff;

  std::size_t size() const { return paths.size(); }

  friend bool operator==(const PathTable&, const PathTable&) = default;
};

inline constexpr std::size_t kDefaultMaxPaths = 10000;

/// Expands the network into its induced trees in lexicographic order of the
/// child choices made at sum nodes. Throws ErrorKind::limit past `max_paths`.
PathTable enumerate_paths(const SpnGraph& graph, std::size_t max_paths = kDefaultMaxPaths);

/// Recomputes node_to_paths and unit_coeff from `paths`, renumbering path ids.
void rebuild_index(PathTable& table);

struct PruneResult {
  SpnGraph graph;
  PathTable table;
  std::vector<NodeId> removed;  // product nodes no longer present, ascending
};

/// Removes every product node whose weight is at or below `threshold`, all
/// paths through it, and any structure that can no longer produce a path.
/// Throws ErrorKind::empty_model when nothing survives.
PruneResult prune_zero_nodes(const SpnGraph& graph, const PathTable& table,
                             const std::map<NodeId, double>& betas, double threshold);

}  // namespace spnmkl
