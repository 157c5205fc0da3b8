#pragma once

#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "cgame/core_model.hpp"

namespace cgame {

/// Directed graph over named nodes. Node order is insertion order; adjacency
/// lists keep insertion order too, so every traversal is deterministic.
class DiGraph {
 public:
  void add_node(const std::string& n);
  void add_edge(const std::string& from, const std::string& to);
  bool has_node(const std::string& n) const { return index_.count(n) != 0; }
  bool has_edge(const std::string& from, const std::string& to) const;

  const std::vector<std::string>& nodes() const { return nodes_; }
  const std::vector<std::string>& parents(const std::string& n) const;
  const std::vector<std::string>& children(const std::string& n) const;
  std::set<std::string> descendants(const std::string& n) const;
  std::vector<std::pair<std::string, std::string>> edges() const;
  bool is_acyclic() const;

 private:
  std::size_t id(const std::string& n) const;
  std::vector<std::string> nodes_;
  std::map<std::string, std::size_t> index_;
  std::vector<std::vector<std::string>> parents_;
  std::vector<std::vector<std::string>> children_;
};

enum class Dir { forward, backward };

/// A non-repeating path. dirs[k] is the orientation of the edge between
/// nodes[k] and nodes[k+1]: forward means nodes[k] -> nodes[k+1].
struct Path {
  std::vector<std::string> nodes;
  std::vector<Dir> dirs;
  /// Conditioning set the path is active under (reachability paths only).
  std::vector<std::string> conditioning;

  std::string to_string() const;
  /// Edges of the path as (tail, head) pairs.
  std::vector<std::pair<std::string, std::string>> edges() const;
  friend bool operator==(const Path&, const Path&) = default;
};

using NodeSet = std::set<std::string>;

/// True iff every path between X and Z is blocked given Y. X, Z, Y must be
/// disjoint. Works on cyclic graphs (by path enumeration there).
bool d_separated(const DiGraph& g, const NodeSet& x, const NodeSet& z, const NodeSet& y);
/// Every path from a node of X to a node of Z that is not blocked by Y.
/// Paths end at the first Z node reached and never revisit X.
std::vector<Path> active_paths(const DiGraph& g, const NodeSet& x, const NodeSet& z, const NodeSet& y);

DiGraph object_graph(const CausalGame& game);

enum class Rationality { best_response };

/// Mechanism node of an object-level variable: PI_<D> for decisions,
/// THETA_<V> otherwise.
std::string mechanism_node(const CausalGame& game, const std::string& variable);
bool is_mechanism_node(const std::string& node);
/// Object-level variable a mechanism node governs.
std::string mechanism_variable(const std::string& node);
/// All mechanism nodes in variable order.
std::vector<std::string> mechanism_nodes(const CausalGame& game);

/// Object-level graph plus mechanism nodes, without inter-mechanism edges.
/// An object-level fix of a decision severs PI_D -> D.
DiGraph independent_mechanised_graph(const CausalGame& game);

struct MechanisedGraph {
  DiGraph graph;        // full mechanised graph
  DiGraph independent;  // without inter-mechanism edges
  /// Inter-mechanism edges ordered by (target, source) variable order.
  std::vector<std::pair<std::string, std::string>> inter_edges;

  bool has_inter_edge(const std::string& from, const std::string& to) const;
};

/// Whether the mechanism node can influence the best response at decision
/// rule `target` (a PI_ node). Two disjuncts on the independent mechanised graph:
/// mech is d-connected to the agent's utilities downstream of D given D and
/// its parents, or mech is d-connected to D's parents given nothing.
bool r_relevant(const CausalGame& game, const std::string& mech, const std::string& target);
/// Witness paths for both disjuncts, each annotated with its conditioning set.
std::vector<Path> reachability_paths(const CausalGame& game, const std::string& mech, const std::string& target);

/// Committed decision rules receive no inter-mechanism edges.
MechanisedGraph build_mechanised_graph(const CausalGame& game, Rationality r = Rationality::best_response);

}  // namespace cgame
