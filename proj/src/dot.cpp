#include <sstream>

#include "cgame/graph.hpp"
#include "cgame/io.hpp"

namespace cgame {

namespace {

const char* const kAgentColours[] = {"#4c72b0", "#dd8452", "#55a868", "#c44e52", "#8172b3", "#937860"};

std::string quoted(const std::string& s) { return "\"" + s + "\""; }

std::string agent_colour(int agent) { return kAgentColours[static_cast<std::size_t>(agent - 1) % 6]; }

void write_variable(std::ostringstream& out, const Variable& v) {
  out << "  " << quoted(v.name) << " [";
  switch (v.kind) {
    case VarKind::chance: out << "shape=ellipse"; break;
    case VarKind::decision:
      out << "shape=box, style=filled, fillcolor=" << quoted(agent_colour(v.agent));
      break;
    case VarKind::utility:
      out << "shape=diamond, style=filled, fillcolor=" << quoted(agent_colour(v.agent));
      break;
  }
  out << "];\n";
}

}  // namespace

std::string export_dot(const CausalGame& game, GraphKind kind) {
  std::ostringstream out;
  out << "digraph " << quoted(game.name().empty() ? "cgame" : game.name()) << " {\n";
  if (game.variables().empty()) {
    out << "}\n";
    return out.str();
  }
  for (const auto& v : game.variables()) write_variable(out, v);
  if (kind != GraphKind::object) {
    for (const auto& v : game.variables()) {
      out << "  " << quoted(mechanism_node(game, v.name)) << " [shape="
          << (v.kind == VarKind::decision ? "box" : "ellipse") << ", style=dashed";
      if (v.kind != VarKind::chance) out << ", color=" << quoted(agent_colour(v.agent));
      out << "];\n";
    }
  }
  for (const auto& v : game.variables())
    for (const auto& p : game.parents(v.name)) out << "  " << quoted(p) << " -> " << quoted(v.name) << ";\n";
  if (kind == GraphKind::object) {
    out << "}\n";
    return out.str();
  }
  const DiGraph independent = independent_mechanised_graph(game);
  for (const auto& v : game.variables()) {
    const std::string m = mechanism_node(game, v.name);
    if (independent.has_edge(m, v.name)) out << "  " << quoted(m) << " -> " << quoted(v.name) << " [style=dashed];\n";
  }
  if (kind == GraphKind::mechanised)
    for (const auto& [from, to] : build_mechanised_graph(game).inter_edges)
      out << "  " << quoted(from) << " -> " << quoted(to) << " [color=grey];\n";
  out << "}\n";
  return out.str();
}

}  // namespace cgame
