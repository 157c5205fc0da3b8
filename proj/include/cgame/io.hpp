#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "cgame/core_model.hpp"
#include "cgame/interventions.hpp"

namespace cgame {

/// Syntax or validation error in a game or scenario file. Line and column are
/// 1-based; column 0 means the whole line.
class ParseError : public Error {
 public:
  ParseError(const std::string& source, std::size_t line, std::size_t column, const std::string& message);
  std::size_t line() const { return line_; }
  std::size_t column() const { return column_; }

 private:
  std::size_t line_;
  std::size_t column_;
};

/// Values for `param` declarations, overriding the file's defaults.
using ParamMap = std::map<std::string, double>;

CausalGame parse_game(const std::string& text, const ParamMap& overrides = {}, const std::string& source = "<input>");
CausalGame load_game(const std::string& path, const ParamMap& overrides = {});
std::string serialize_game(const CausalGame& game);

/// Bundled games by name.
const std::map<std::string, std::string>& fixture_sources();
CausalGame load_fixture(const std::string& name, const ParamMap& overrides = {});
/// A bundled fixture name, or else a path to a game file.
CausalGame resolve_game(const std::string& ref, const ParamMap& overrides = {});

struct Scenario {
  std::string game_ref;
  CausalGame game;
  std::vector<LabelledIntervention> interventions;
  VisibilityMap visibility;
  std::vector<int> order;
  std::optional<std::vector<std::pair<std::vector<int>, std::vector<std::string>>>> stages;
  std::vector<std::string> queries;
  std::optional<std::uint64_t> seed;
};

/// `base_dir` resolves relative game paths.
Scenario parse_scenario(const std::string& text, const std::string& base_dir = ".", const ParamMap& overrides = {},
                        const std::string& source = "<input>");
Scenario load_scenario(const std::string& path, const ParamMap& overrides = {});

/// Parses a single intervention line body, e.g. "do T = h" or "add_edge T D2",
/// against `game`. Kinds that need a table block are not accepted here.
InterventionSpec parse_intervention(const std::string& text, const CausalGame& game);

enum class GraphKind { object, mechanised, independent_mechanised };

/// Graphviz text with stable node and edge order.
std::string export_dot(const CausalGame& game, GraphKind kind);

}  // namespace cgame
