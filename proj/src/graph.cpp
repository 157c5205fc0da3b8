#include "cgame/graph.hpp"

#include <algorithm>
#include <deque>

#include "util.hpp"

namespace cgame {

void DiGraph::add_node(const std::string& n) {
  if (has_node(n)) return;
  index_[n] = nodes_.size();
  nodes_.push_back(n);
  parents_.emplace_back();
  children_.emplace_back();
}

std::size_t DiGraph::id(const std::string& n) const {
  auto it = index_.find(n);
  if (it == index_.end()) throw Error("unknown node " + n);
  return it->second;
}

void DiGraph::add_edge(const std::string& from, const std::string& to) {
  add_node(from);
  add_node(to);
  if (has_edge(from, to)) return;
  children_[id(from)].push_back(to);
  parents_[id(to)].push_back(from);
}

bool DiGraph::has_edge(const std::string& from, const std::string& to) const {
  if (!has_node(from) || !has_node(to)) return false;
  const auto& ch = children_[id(from)];
  return std::find(ch.begin(), ch.end(), to) != ch.end();
}

const std::vector<std::string>& DiGraph::parents(const std::string& n) const { return parents_[id(n)]; }
const std::vector<std::string>& DiGraph::children(const std::string& n) const { return children_[id(n)]; }

std::set<std::string> DiGraph::descendants(const std::string& n) const {
  std::set<std::string> seen;
  std::vector<std::string> stack = children(n);
  while (!stack.empty()) {
    std::string cur = std::move(stack.back());
    stack.pop_back();
    if (!seen.insert(cur).second) continue;
    for (const auto& c : children(cur)) stack.push_back(c);
  }
  return seen;
}

std::vector<std::pair<std::string, std::string>> DiGraph::edges() const {
  std::vector<std::pair<std::string, std::string>> out;
  for (std::size_t i = 0; i < nodes_.size(); ++i)
    for (const auto& c : children_[i]) out.emplace_back(nodes_[i], c);
  return out;
}

bool DiGraph::is_acyclic() const {
  std::vector<std::size_t> indeg(nodes_.size());
  for (std::size_t i = 0; i < nodes_.size(); ++i) indeg[i] = parents_[i].size();
  std::deque<std::size_t> ready;
  for (std::size_t i = 0; i < nodes_.size(); ++i)
    if (indeg[i] == 0) ready.push_back(i);
  std::size_t seen = 0;
  while (!ready.empty()) {
    std::size_t i = ready.front();
    ready.pop_front();
    ++seen;
    for (const auto& c : children_[i])
      if (--indeg[id(c)] == 0) ready.push_back(id(c));
  }
  return seen == nodes_.size();
}

std::string Path::to_string() const {
  std::string out = nodes.empty() ? "" : nodes[0];
  for (std::size_t k = 0; k < dirs.size(); ++k) {
    out += dirs[k] == Dir::forward ? " -> " : " <- ";
    out += nodes[k + 1];
  }
  return out;
}

std::vector<std::pair<std::string, std::string>> Path::edges() const {
  std::vector<std::pair<std::string, std::string>> out;
  for (std::size_t k = 0; k < dirs.size(); ++k) {
    if (dirs[k] == Dir::forward) out.emplace_back(nodes[k], nodes[k + 1]);
    else out.emplace_back(nodes[k + 1], nodes[k]);
  }
  return out;
}

// ---------------------------------------------------------------------------
// d-separation

namespace {

void check_sets(const DiGraph& g, const NodeSet& x, const NodeSet& z, const NodeSet& y) {
  for (const NodeSet* s : {&x, &z, &y})
    for (const auto& n : *s)
      if (!g.has_node(n)) throw Error("unknown node " + n);
  for (const auto& n : x)
    if (z.count(n) || y.count(n)) throw Error("node sets must be disjoint (" + n + ")");
  for (const auto& n : z)
    if (y.count(n)) throw Error("node sets must be disjoint (" + n + ")");
}

// Nodes that are in Y or have a descendant in Y.
NodeSet ancestors_of(const DiGraph& g, const NodeSet& y) {
  NodeSet out;
  std::vector<std::string> stack(y.begin(), y.end());
  while (!stack.empty()) {
    std::string cur = std::move(stack.back());
    stack.pop_back();
    if (!out.insert(cur).second) continue;
    for (const auto& p : g.parents(cur)) stack.push_back(p);
  }
  return out;
}

// Reachable-node traversal ("Bayes ball") for acyclic graphs.
bool bayes_ball_separated(const DiGraph& g, const NodeSet& x, const NodeSet& z, const NodeSet& y) {
  const NodeSet anc = ancestors_of(g, y);
  enum Way { up = 0, down = 1 };  // up: arrived from a child
  std::set<std::pair<std::string, int>> visited;
  std::vector<std::pair<std::string, int>> stack;
  for (const auto& n : x) stack.emplace_back(n, up);
  while (!stack.empty()) {
    auto [n, way] = stack.back();
    stack.pop_back();
    if (!visited.insert({n, way}).second) continue;
    const bool observed = y.count(n) != 0;
    if (!observed && z.count(n)) return false;
    if (way == up && !observed) {
      for (const auto& p : g.parents(n)) stack.emplace_back(p, up);
      for (const auto& c : g.children(n)) stack.emplace_back(c, down);
    } else if (way == down) {
      if (!observed)
        for (const auto& c : g.children(n)) stack.emplace_back(c, down);
      if (anc.count(n))
        for (const auto& p : g.parents(n)) stack.emplace_back(p, up);
    }
  }
  return true;
}

struct PathSearch {
  const DiGraph& g;
  const NodeSet& x;
  const NodeSet& z;
  const NodeSet& y;
  NodeSet anc;
  bool first_only = false;
  std::vector<Path> found;
  Path current;
  NodeSet on_path;

  bool passes(const std::string& n, Dir in, Dir out) const {
    const bool collider = in == Dir::forward && out == Dir::backward;
    if (collider) return anc.count(n) != 0;
    return y.count(n) == 0;
  }

  // Returns true to stop the search.
  bool extend() {
    const std::string n = current.nodes.back();
    auto step = [&](const std::string& next, Dir d) -> bool {
      if (on_path.count(next) || x.count(next)) return false;
      if (!current.dirs.empty() && !passes(n, current.dirs.back(), d)) return false;
      current.nodes.push_back(next);
      current.dirs.push_back(d);
      bool stop = false;
      if (z.count(next)) {
        found.push_back(current);
        stop = first_only;
      } else {
        on_path.insert(next);
        stop = extend();
        on_path.erase(next);
      }
      current.nodes.pop_back();
      current.dirs.pop_back();
      return stop;
    };
    for (const auto& p : g.parents(n))
      if (step(p, Dir::backward)) return true;
    for (const auto& c : g.children(n))
      if (step(c, Dir::forward)) return true;
    return false;
  }

  void run() {
    for (const auto& start : g.nodes()) {
      if (!x.count(start)) continue;
      current = Path{{start}, {}, {}};
      on_path = {start};
      if (extend()) return;
    }
  }
};

}  // namespace

std::vector<Path> active_paths(const DiGraph& g, const NodeSet& x, const NodeSet& z, const NodeSet& y) {
  check_sets(g, x, z, y);
  PathSearch search{g, x, z, y, ancestors_of(g, y), false, {}, {}, {}};
  search.run();
  return search.found;
}

bool d_separated(const DiGraph& g, const NodeSet& x, const NodeSet& z, const NodeSet& y) {
  check_sets(g, x, z, y);
  if (g.is_acyclic()) return bayes_ball_separated(g, x, z, y);
  PathSearch search{g, x, z, y, ancestors_of(g, y), true, {}, {}, {}};
  search.run();
  return search.found.empty();
}

// ---------------------------------------------------------------------------
// Mechanised graphs

DiGraph object_graph(const CausalGame& game) {
  DiGraph g;
  for (const auto& v : game.variables()) g.add_node(v.name);
  for (const auto& v : game.variables())
    for (const auto& p : game.parents(v.name)) g.add_edge(p, v.name);
  return g;
}

std::string mechanism_node(const CausalGame& game, const std::string& variable) {
  return (game.variable(variable).kind == VarKind::decision ? "PI_" : "THETA_") + variable;
}

bool is_mechanism_node(const std::string& node) {
  return node.rfind("PI_", 0) == 0 || node.rfind("THETA_", 0) == 0;
}

std::string mechanism_variable(const std::string& node) {
  if (node.rfind("PI_", 0) == 0) return node.substr(3);
  if (node.rfind("THETA_", 0) == 0) return node.substr(6);
  throw Error(node + " is not a mechanism node");
}

std::vector<std::string> mechanism_nodes(const CausalGame& game) {
  std::vector<std::string> out;
  for (const auto& v : game.variables()) out.push_back(mechanism_node(game, v.name));
  return out;
}

DiGraph independent_mechanised_graph(const CausalGame& game) {
  DiGraph g = object_graph(game);
  for (const auto& v : game.variables()) {
    const std::string m = mechanism_node(game, v.name);
    g.add_node(m);
    if (!game.object_fixed().count(v.name)) g.add_edge(m, v.name);
  }
  return g;
}

bool MechanisedGraph::has_inter_edge(const std::string& from, const std::string& to) const {
  return std::find(inter_edges.begin(), inter_edges.end(), std::make_pair(from, to)) != inter_edges.end();
}

namespace {

struct RelevanceQuery {
  std::string decision;
  NodeSet utilities;  // agent's utilities downstream of the decision
  NodeSet given;      // {D} u Pa_D
  NodeSet parents;    // Pa_D
};

RelevanceQuery relevance_query(const CausalGame& game, const DiGraph& indep, const std::string& mech,
                               const std::string& target) {
  if (!indep.has_node(mech) || !is_mechanism_node(mech)) throw Error(mech + " is not a mechanism node");
  if (target.rfind("PI_", 0) != 0 || !game.has_variable(mechanism_variable(target)) ||
      game.variable(mechanism_variable(target)).kind != VarKind::decision)
    throw Error(target + " is not a decision-rule node");
  RelevanceQuery q;
  q.decision = mechanism_variable(target);
  const int agent = game.variable(q.decision).agent;
  const auto desc = indep.descendants(q.decision);
  for (const auto& u : game.utilities_of(agent))
    if (desc.count(u)) q.utilities.insert(u);
  q.parents = NodeSet(game.parents(q.decision).begin(), game.parents(q.decision).end());
  q.given = q.parents;
  q.given.insert(q.decision);
  return q;
}

bool relevant_on(const CausalGame& game, const DiGraph& indep, const std::string& mech, const std::string& target) {
  if (mech == target) return false;
  const auto q = relevance_query(game, indep, mech, target);
  if (!q.utilities.empty() && !d_separated(indep, {mech}, q.utilities, q.given)) return true;
  if (!q.parents.empty() && !d_separated(indep, {mech}, q.parents, {})) return true;
  return false;
}

}  // namespace

bool r_relevant(const CausalGame& game, const std::string& mech, const std::string& target) {
  return relevant_on(game, independent_mechanised_graph(game), mech, target);
}

std::vector<Path> reachability_paths(const CausalGame& game, const std::string& mech, const std::string& target) {
  const DiGraph indep = independent_mechanised_graph(game);
  const auto q = relevance_query(game, indep, mech, target);
  if (mech == target) return {};
  std::vector<Path> out;
  if (!q.utilities.empty()) {
    std::vector<std::string> given;
    for (const auto& v : game.variables())
      if (q.given.count(v.name)) given.push_back(v.name);
    for (auto& p : active_paths(indep, {mech}, q.utilities, q.given)) {
      p.conditioning = given;
      out.push_back(std::move(p));
    }
  }
  if (!q.parents.empty())
    for (auto& p : active_paths(indep, {mech}, q.parents, {})) out.push_back(std::move(p));
  return out;
}

MechanisedGraph build_mechanised_graph(const CausalGame& game, Rationality) {
  MechanisedGraph mg;
  mg.independent = independent_mechanised_graph(game);
  mg.graph = mg.independent;
  const auto mechs = mechanism_nodes(game);
  for (const auto& v : game.variables()) {
    if (v.kind != VarKind::decision || game.commitments().count(v.name)) continue;
    const std::string target = mechanism_node(game, v.name);
    for (const auto& m : mechs)
      if (relevant_on(game, mg.independent, m, target)) mg.inter_edges.emplace_back(m, target);
  }
  for (const auto& [from, to] : mg.inter_edges) mg.graph.add_edge(from, to);
  return mg;
}

}  // namespace cgame
