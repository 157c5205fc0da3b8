#pragma once

#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "cgame/core_model.hpp"
#include "cgame/graph.hpp"

namespace cgame {

/// Object-level intervention: X gets parents `parents` and distribution `cpd`.
/// For a decision, a cpd makes the decision object-fixed (its decision rule no
/// longer governs it); no cpd returns the decision to its agent with the new
/// parents as information set.
struct FixObject {
  std::string target;
  std::vector<std::string> parents;
  std::optional<TabularCpd> cpd;
};

/// Mechanism-level intervention. For a chance or utility variable, `cpd`
/// replaces its parameters (same parents). For a decision, `cpd` hard-fixes
/// the decision rule (a commitment); no cpd releases it to best response.
struct FixMechanism {
  std::string target;
  std::optional<TabularCpd> cpd;
};

/// Per-child rewiring used when adding or removing a variable.
struct ChildSpec {
  std::string name;
  std::optional<std::vector<std::string>> parents;
  std::optional<TabularCpd> cpd;          // cpd, or object-level table of a decision
  std::optional<DecisionRule> commitment;  // committed rule of a decision child
};

struct AddVariable {
  Variable variable;
  std::vector<std::string> parents;
  std::optional<TabularCpd> cpd;  // required unless the variable is a free decision
  std::optional<DecisionRule> commitment;
  std::vector<ChildSpec> children;  // default: append the new parent, duplicate rows
  std::optional<std::size_t> position;
};

/// Removes a variable. Children without a spec lose the edge and have the
/// variable marginalised out under its own distribution.
struct RemoveVariable {
  std::string target;
  std::vector<ChildSpec> children;
};

using Primitive = std::variant<FixObject, FixMechanism, AddVariable, RemoveVariable>;

enum class PrimitiveKind { fix_object, fix_mechanism, add_variable, remove_variable };
const char* to_string(PrimitiveKind kind);

/// A primitive intervention. `journal` holds the inverse computed when the
/// primitive was applied; it is what makes inversion exact.
struct PrimitiveIntervention {
  Primitive payload;
  std::optional<Primitive> journal;

  PrimitiveKind kind() const { return static_cast<PrimitiveKind>(payload.index()); }
  /// Object-level variable the primitive acts on.
  const std::string& target() const;
  std::string describe() const;
};

using CompoundIntervention = std::vector<PrimitiveIntervention>;

struct Applied {
  CausalGame game;
  PrimitiveIntervention primitive;  // with journal
};

/// Applies a primitive; the result is validated. The input is not modified.
CausalGame apply_primitive(const CausalGame& game, const PrimitiveIntervention& p);
Applied apply_journaled(const CausalGame& game, const PrimitiveIntervention& p);
/// The inverse of an applied primitive.
PrimitiveIntervention invert(const PrimitiveIntervention& p);

struct AppliedCompound {
  CausalGame game;
  CompoundIntervention primitives;  // with journals
};
AppliedCompound apply_compound(const CausalGame& game, const CompoundIntervention& ps);
/// Inverses in reverse order.
CompoundIntervention invert(const CompoundIntervention& ps);

// Convenience constructors.
PrimitiveIntervention make_do(const CausalGame& game, const std::string& variable, const std::string& value);
PrimitiveIntervention make_fix_parameters(const TabularCpd& cpd);
PrimitiveIntervention make_commit(const DecisionRule& rule);
PrimitiveIntervention make_release(const std::string& decision);

/// Table with `parent` appended as least significant parent; rows are
/// duplicated so the new parent is ignored.
TabularCpd add_parent_duplicated(const TabularCpd& cpd, const std::string& parent, std::size_t parent_card);

/// Adds X -> Y as an object-level fix of Y.
PrimitiveIntervention add_edge(const CausalGame& game, const std::string& from, const std::string& to);
/// Removes X -> Y as an object-level fix of Y. X is marginalised out: with a
/// profile, under P(x | other parents of Y); without, under X's marginal
/// (which then must not depend on free decisions).
PrimitiveIntervention remove_edge(const CausalGame& game, const std::string& from, const std::string& to,
                                  const PolicyProfile* profile = nullptr);

/// FixObject written as RemoveVariable followed by AddVariable.
CompoundIntervention trivial_decomposition(const CausalGame& game, const FixObject& fix);

// ---------------------------------------------------------------------------
// Mechanism-level analysis

struct SideEffectReport {
  std::vector<std::pair<std::string, std::string>> removed;
  std::vector<std::pair<std::string, std::string>> added;
  /// Removals predicted from reachability paths severed by an object-level fix.
  std::vector<std::pair<std::string, std::string>> predicted_removed;
  bool consistent = true;  // predicted_removed is contained in removed
};

SideEffectReport side_effects(const CausalGame& game, const PrimitiveIntervention& p);

/// Smallest set of object-level variables hitting every reachability path
/// from `mech` to `target`; ties broken by variable order.
std::vector<std::string> minimum_intervention_set(const CausalGame& game, const std::string& mech,
                                                  const std::string& target);
/// The sets the minimum intervention set must hit, one per reachability path.
std::vector<std::vector<std::string>> hitting_requirements(const CausalGame& game, const std::string& mech,
                                                           const std::string& target);

struct IncentiveChange {
  std::string mech;
  std::string target;
  bool before = false;
  bool after = false;
};
/// Mechanism/decision-rule pairs whose relevance switches on or off.
std::vector<IncentiveChange> incentive_changes(const CausalGame& game, const CompoundIntervention& ps);
bool incentive_invariant(const CausalGame& game, const CompoundIntervention& ps);

// ---------------------------------------------------------------------------
// Labelled interventions and decomposition

struct AddEdgeSpec {
  std::string from, to;
};
struct RemoveEdgeSpec {
  std::string from, to;
};
/// Inverse of a previously applied label.
struct UnfixSpec {
  std::string label;
};

using InterventionSpec = std::variant<PrimitiveIntervention, AddEdgeSpec, RemoveEdgeSpec, UnfixSpec>;

struct LabelledIntervention {
  std::string label;
  InterventionSpec spec;
};

/// Per-agent visible labels; agents not listed see nothing.
using VisibilityMap = std::map<int, std::vector<std::string>>;

/// Applies labelled interventions in order, resolving derived ones against the
/// running game. Keeps the journal of each applied label for later unfixes.
class InterventionRunner {
 public:
  explicit InterventionRunner(CausalGame game) : game_(std::move(game)) {}
  const CausalGame& game() const { return game_; }
  /// Applies and returns the journaled primitive.
  PrimitiveIntervention apply(const LabelledIntervention& li);
  /// Reverts a previously applied label.
  PrimitiveIntervention undo(const std::string& label);
  bool is_applied(const std::string& label) const { return applied_.count(label) != 0; }

 private:
  CausalGame game_;
  std::map<std::string, PrimitiveIntervention> applied_;
};

/// The game agent-visible labels produce: those labels applied in I's order.
CausalGame visible_game(const CausalGame& game, const std::vector<LabelledIntervention>& interventions,
                        const std::vector<std::string>& visible);

struct Stage {
  std::vector<int> agents;
  std::vector<std::string> steps;           // label or "undo <label>"
  CompoundIntervention primitives;          // as applied, with journals
  std::vector<std::string> visible_labels;  // labels in effect after this stage
};

struct Decomposition {
  std::vector<Stage> stages;
  std::vector<CausalGame> games;  // game after each stage
};

struct DecomposeOptions {
  /// Stage order for groups; default orders by visible-set size, then agent.
  std::vector<int> agent_order;
  /// Merge agents with identical visible sets into one stage.
  bool merge = true;
};

Decomposition decompose(const CausalGame& game, const std::vector<LabelledIntervention>& interventions,
                        const VisibilityMap& visibility, const DecomposeOptions& options = {});

/// Builds stages from an explicit (agents, labels) list, resolving each label
/// against the running game.
Decomposition explicit_stages(const CausalGame& game, const std::vector<LabelledIntervention>& interventions,
                              const std::vector<std::pair<std::vector<int>, std::vector<std::string>>>& stages);

/// Empty when every agent of stage j sees exactly the game after stage j;
/// otherwise a description of the first mismatch.
std::string check_decomposition(const CausalGame& game, const std::vector<LabelledIntervention>& interventions,
                                const VisibilityMap& visibility, const Decomposition& d);

}  // namespace cgame
