#pragma once

#include <cstddef>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace cgame {

/// Default tolerance for probability and equality checks.
inline constexpr double kProbEpsilon = 1e-9;

/// Raised for domain errors: invalid games, inapplicable interventions,
/// unsupported solver configurations.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class VarKind { chance, decision, utility };

const char* to_string(VarKind kind);

/// An object-level variable. Decision and utility variables belong to an
/// agent (1-based); chance variables have agent 0. Utility variables carry the
/// numeric value of each domain label in `payoffs`.
struct Variable {
  std::string name;
  VarKind kind = VarKind::chance;
  int agent = 0;
  std::vector<std::string> domain;
  std::vector<double> payoffs;

  static Variable chance(std::string name, std::vector<std::string> domain);
  static Variable decision(std::string name, int agent, std::vector<std::string> domain);
  static Variable utility(std::string name, int agent, std::vector<double> values);

  std::size_t cardinality() const { return domain.size(); }
  std::optional<std::size_t> value_index(std::string_view label) const;

  friend bool operator==(const Variable&, const Variable&) = default;
};

/// Conditional probability table. Rows are indexed by parent instantiations in
/// mixed radix order (first parent most significant); each row is a
/// distribution over the variable's domain.
class TabularCpd {
 public:
  TabularCpd() = default;
  TabularCpd(std::string variable, std::size_t card, std::vector<std::string> parents,
             std::vector<std::size_t> parent_cards, std::vector<double> values);

  /// Point mass on `value` in every parent context.
  static TabularCpd delta(std::string variable, std::size_t card, std::size_t value,
                          std::vector<std::string> parents = {},
                          std::vector<std::size_t> parent_cards = {});
  static TabularCpd uniform(std::string variable, std::size_t card,
                            std::vector<std::string> parents = {},
                            std::vector<std::size_t> parent_cards = {});

  const std::string& variable() const { return variable_; }
  const std::vector<std::string>& parents() const { return parents_; }
  const std::vector<std::size_t>& parent_cards() const { return parent_cards_; }
  std::size_t card() const { return card_; }
  std::size_t rows() const { return card_ == 0 ? 0 : values_.size() / card_; }
  const std::vector<double>& values() const { return values_; }

  std::span<const double> row(std::size_t r) const;
  double prob(std::size_t r, std::size_t v) const { return values_[r * card_ + v]; }
  double& at(std::size_t r, std::size_t v) { return values_[r * card_ + v]; }

  /// Row index of a parent instantiation given as value indices in parent order.
  std::size_t row_index(std::span<const std::size_t> parent_values) const;
  /// Inverse of row_index.
  std::vector<std::size_t> row_context(std::size_t r) const;

  /// All entries in {0, 1}.
  bool is_pure(double eps = kProbEpsilon) const;
  /// All entries strictly positive.
  bool is_fully_stochastic(double eps = kProbEpsilon) const;
  /// Per-row sum and sign check; returns indices of offending rows.
  std::vector<std::size_t> bad_rows(double eps = kProbEpsilon) const;

  /// Same conditional distribution up to parent reordering, within eps.
  bool equivalent(const TabularCpd& other, double eps = kProbEpsilon) const;
  /// Same table with parents permuted into `order` (a permutation of parents()).
  TabularCpd reordered(const std::vector<std::string>& order) const;

  friend bool operator==(const TabularCpd&, const TabularCpd&) = default;

 private:
  std::string variable_;
  std::size_t card_ = 0;
  std::vector<std::string> parents_;
  std::vector<std::size_t> parent_cards_;
  std::vector<double> values_;
};

/// A decision rule is a CPD attached to a decision variable.
using DecisionRule = TabularCpd;

/// Decision rules keyed by decision variable; may be partial.
struct PolicyProfile {
  std::map<std::string, DecisionRule> rules;

  bool contains(const std::string& decision) const { return rules.count(decision) != 0; }
  const DecisionRule& at(const std::string& decision) const;
  void set(DecisionRule rule);
  /// Union of two profiles; entries of `other` win.
  PolicyProfile merged(const PolicyProfile& other) const;
  bool equivalent(const PolicyProfile& other, double eps = kProbEpsilon) const;
};

/// A causal game: agents, a DAG over typed variables, and tabular CPDs for the
/// non-decision variables.
///
/// Besides the pristine structure the game also records mechanism-level state
/// left behind by interventions:
///  - `object_fixed`: decisions whose distribution was set by an object-level
///    intervention; their decision-rule node no longer governs them.
///  - `commitments`: decisions whose decision-rule node was hard-fixed to a rule.
/// A decision that is neither is "free" and is chosen by its agent.
class CausalGame {
 public:
  CausalGame() = default;
  explicit CausalGame(int agents, std::string name = {}) : name_(std::move(name)), agents_(agents) {}

  const std::string& name() const { return name_; }
  void set_name(std::string name) { name_ = std::move(name); }
  int agents() const { return agents_; }
  void set_agents(int agents) { agents_ = agents; }

  const std::vector<Variable>& variables() const { return variables_; }
  bool has_variable(std::string_view name) const;
  const Variable& variable(std::string_view name) const;
  std::size_t position(std::string_view name) const;
  std::size_t cardinality(std::string_view name) const { return variable(name).cardinality(); }
  std::size_t value_index(std::string_view var, std::string_view label) const;

  const std::vector<std::string>& parents(std::string_view name) const;
  std::vector<std::string> children(std::string_view name) const;
  std::vector<std::string> descendants(std::string_view name) const;
  std::vector<std::string> ancestors(std::string_view name) const;
  std::vector<std::size_t> parent_cards(std::string_view name) const;

  std::vector<std::string> decisions() const;
  std::vector<std::string> decisions_of(int agent) const;
  std::vector<std::string> utilities_of(int agent) const;
  /// Decisions still chosen by their agent (not object-fixed, not committed).
  std::vector<std::string> free_decisions() const;
  std::vector<std::string> free_decisions_of(int agent) const;
  /// Agents owning at least one free decision, ascending.
  std::vector<int> strategic_agents() const;
  bool is_free_decision(std::string_view name) const;

  const std::map<std::string, TabularCpd>& cpds() const { return cpds_; }
  const TabularCpd& cpd(std::string_view name) const;
  const std::map<std::string, TabularCpd>& object_fixed() const { return object_fixed_; }
  const std::map<std::string, DecisionRule>& commitments() const { return commitments_; }

  /// Variables in a topological order of the object-level graph (throws on a cycle).
  std::vector<std::string> topological_order() const;

  // Mutators. They keep indices consistent but do not validate the result;
  // call validate_game afterwards where it matters.
  void add_variable(Variable v, std::vector<std::string> parents, std::optional<std::size_t> at = {});
  void remove_variable(std::string_view name);
  void set_parents(std::string_view name, std::vector<std::string> parents);
  void set_cpd(TabularCpd cpd);
  void erase_cpd(std::string_view name);
  void set_object_fixed(TabularCpd cpd);
  void clear_object_fixed(std::string_view name);
  void set_commitment(DecisionRule rule);
  void clear_commitment(std::string_view name);

 private:
  std::string name_;
  int agents_ = 0;
  std::vector<Variable> variables_;
  std::map<std::string, std::vector<std::string>, std::less<>> parents_;
  std::map<std::string, TabularCpd> cpds_;
  std::map<std::string, TabularCpd> object_fixed_;
  std::map<std::string, DecisionRule> commitments_;
};

struct Violation {
  std::string subject;
  std::string message;
};

/// Checks every structural invariant; an empty report means the game is valid.
std::vector<Violation> validate_game(const CausalGame& game, double eps = kProbEpsilon);
void require_valid(const CausalGame& game, double eps = kProbEpsilon);

/// Same agents, variables, parent sets, CPDs (as functions) and mechanism state.
/// Variable order and parent order do not matter.
bool structurally_equal(const CausalGame& a, const CausalGame& b, double eps = kProbEpsilon);
/// Human-readable first difference, empty when structurally equal.
std::string structural_difference(const CausalGame& a, const CausalGame& b, double eps = kProbEpsilon);

/// Full joint distribution over every variable of a game.
class JointDistribution {
 public:
  JointDistribution(std::vector<std::string> variables, std::vector<std::size_t> cards,
                    std::vector<double> probs);

  const std::vector<std::string>& variables() const { return variables_; }
  const std::vector<std::size_t>& cards() const { return cards_; }
  const std::vector<double>& probs() const { return probs_; }
  std::size_t size() const { return probs_.size(); }
  double total() const;
  /// Value indices (in variables() order) of flat index i.
  std::vector<std::size_t> instantiation(std::size_t i) const;
  double probability(const std::map<std::string, std::size_t>& full_assignment) const;
  /// Probability that every listed variable takes the listed value index.
  double event_probability(const std::vector<std::pair<std::string, std::size_t>>& event) const;
  std::vector<double> marginal(const std::string& variable) const;

  /// Same distribution up to variable reordering.
  bool equivalent(const JointDistribution& other, double tol) const;

 private:
  std::size_t position(const std::string& variable) const;
  std::vector<std::string> variables_;
  std::vector<std::size_t> cards_;
  std::vector<std::size_t> strides_;
  std::vector<double> probs_;
};

/// The rule actually governing a decision: the object-level CPD if fixed,
/// then a commitment, then the profile's rule. Throws if none applies.
const DecisionRule& effective_rule(const CausalGame& game, const PolicyProfile& profile,
                                   const std::string& decision);
bool profile_is_full(const CausalGame& game, const PolicyProfile& profile);

JointDistribution induced_joint(const CausalGame& game, const PolicyProfile& profile);

/// Sum over the agent's utility variables of their expectations.
double expected_utility(const CausalGame& game, const PolicyProfile& profile, int agent);
/// Expected utility of every agent, indexed by agent (entry 0 is unused).
std::vector<double> expected_utilities(const CausalGame& game, const PolicyProfile& profile);
/// Sum of all agents' expected utilities.
double expected_total_utility(const CausalGame& game, const PolicyProfile& profile);

/// Every pure decision rule for `decision` over its current parents, in
/// lexicographic order over (context, action).
std::vector<DecisionRule> enumerate_pure_rules(const CausalGame& game, const std::string& decision);

/// Rule choosing `action` in every context.
DecisionRule constant_rule(const CausalGame& game, const std::string& decision, std::size_t action);
DecisionRule uniform_rule(const CausalGame& game, const std::string& decision);

}  // namespace cgame
