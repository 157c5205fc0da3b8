#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "cgame/core_model.hpp"
#include "cgame/equilibrium.hpp"
#include "cgame/interventions.hpp"

namespace cgame {

/// Syntax error in a query; `column` is 1-based.
class QueryParseError : public Error {
 public:
  QueryParseError(const std::string& message, std::size_t column)
      : Error("column " + std::to_string(column) + ": " + message), column_(column) {}
  std::size_t column() const { return column_; }

 private:
  std::size_t column_;
};

enum class Quantifier { forall, exists, sampled };
const char* to_string(Quantifier q);

enum class CmpOp { lt, le, eq, ge, gt, ne };
const char* to_string(CmpOp op);

struct Expr;
using ExprPtr = std::shared_ptr<const Expr>;

/// Variable-value assignments, all of which must hold.
using Event = std::vector<std::pair<std::string, std::string>>;

struct ConstExpr {
  double value = 0.0;
};
struct ProbExpr {
  Event event;
};
/// E[i] for agent i, E[total], or E[U] for a single utility variable.
struct ExpectExpr {
  enum class Kind { agent, total, variable } kind = Kind::total;
  int agent = 0;
  std::string variable;
};
struct BinaryExpr {
  char op = '+';  // + - *
  ExprPtr lhs, rhs;
};
struct NegExpr {
  ExprPtr operand;
};

struct Expr {
  std::variant<ConstExpr, ProbExpr, ExpectExpr, BinaryExpr, NegExpr> node;
};

struct Formula;
using FormulaPtr = std::shared_ptr<const Formula>;

struct CompareFormula {
  CmpOp op = CmpOp::eq;
  ExprPtr lhs, rhs;
};
struct NotFormula {
  FormulaPtr operand;
};
struct AndFormula {
  FormulaPtr lhs, rhs;
};
struct OrFormula {
  FormulaPtr lhs, rhs;
};

struct Formula {
  std::variant<CompareFormula, NotFormula, AndFormula, OrFormula> node;
};

struct QueryDirectives {
  /// Agents fixed at a stage play the uniform mixture over their distinct
  /// rules across that stage's pure equilibria.
  bool mix_ties = false;
  /// Outcomes include behavioral equilibria (extreme points).
  bool behavioral = false;
  double epsilon = 1e-9;
};

/// A query is either a formula (boolean verdict) or a bare expression (value).
struct QueryAST {
  Quantifier quantifier = Quantifier::forall;
  QueryDirectives directives;
  std::variant<FormulaPtr, ExprPtr> body;

  bool is_formula() const { return std::holds_alternative<FormulaPtr>(body); }
  std::string to_string() const;
};

QueryAST parse_query(const std::string& text);

/// Throws Error if the query mentions variables, values or agents the game lacks.
void check_query(const QueryAST& q, const CausalGame& game);

double evaluate_expr(const Expr& e, const CausalGame& game, const PolicyProfile& profile,
                     std::optional<JointDistribution>& joint);
bool evaluate_formula(const Formula& f, const CausalGame& game, const PolicyProfile& profile, double eps,
                      std::optional<JointDistribution>& joint);

struct QueryJob {
  CausalGame game;
  std::vector<LabelledIntervention> interventions;
  VisibilityMap visibility;
  DecomposeOptions decompose_options;
  /// When set, replaces the computed decomposition: (agents, labels) per stage.
  std::optional<std::vector<std::pair<std::vector<int>, std::vector<std::string>>>> stages;
  QueryAST query;
  std::uint64_t seed = 0;
  double equilibrium_epsilon = kEquilibriumEpsilon;
};

struct StageTrace {
  std::size_t index = 0;
  std::vector<int> agents;                // A_j
  std::vector<std::string> steps;         // labels applied (or undone)
  std::vector<std::string> primitives;    // primitives as applied
  std::vector<int> overridden;            // agents added to A' at this stage
  std::vector<int> still_choosing;        // (A_j u ... u A_m) \ A'
  std::size_t outcomes = 0;               // rational outcomes of the stage game
  std::vector<PolicyProfile> candidates;  // distinct fixings of A_j
  std::optional<std::size_t> chosen;      // sampled mode
};

struct QueryLeaf {
  std::vector<std::size_t> choices;  // candidate index per stage
  PolicyProfile profile;             // rules of the final game's free decisions
  std::vector<double> utilities;     // by agent, entry 0 unused
  std::optional<bool> verdict;
  std::optional<double> value;
};

struct QueryResult {
  std::optional<bool> verdict;
  std::optional<double> value;  // bare-expression queries with one value
  std::vector<QueryLeaf> leaves;
  std::vector<StageTrace> trace;
  CausalGame final_game;
};

/// Algorithm 1. At each stage the stage's primitives are applied, then the
/// agents of that stage fix their rules from a rational outcome of the game
/// they see. Fixings are not visible to later stages.
QueryResult evaluate_query(const QueryJob& job);

enum class VisibilityTag { pre_policy, post_policy, interleaved };
const char* to_string(VisibilityTag tag);

std::map<int, VisibilityTag> classify_visibility(const std::vector<LabelledIntervention>& interventions,
                                                 const Decomposition& d);

enum class SpecDirection { at_least, at_most };

struct SpecEnvReport {
  double before_extreme = 0.0;  // max (at_least) or min (at_most) over original outcomes
  double after_extreme = 0.0;   // min (at_least) or max (at_most) over intervened outcomes
  std::size_t before_outcomes = 0;
  std::size_t after_outcomes = 0;
  bool holds = false;
};

/// Environment-modification specification: with at_least, every outcome of
/// the intervened game makes the event at least as likely as every outcome of
/// the original game.
SpecEnvReport check_spec_env(const CausalGame& game, const CompoundIntervention& interventions, const Event& event,
                             SpecDirection direction = SpecDirection::at_least, bool behavioral = false,
                             double eps = 1e-9);

}  // namespace cgame
