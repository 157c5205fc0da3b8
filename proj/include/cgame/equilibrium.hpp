#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cgame/core_model.hpp"
#include "cgame/graph.hpp"

namespace cgame {

/// Tolerance for best-response comparisons.
inline constexpr double kEquilibriumEpsilon = 1e-7;

enum class OutcomeMode { pure_exhaustive, behavioral_support_enum };

struct RationalOutcomeSet {
  std::vector<PolicyProfile> outcomes;
  OutcomeMode mode = OutcomeMode::pure_exhaustive;
};

/// All pure policies of `agent` (over its free decisions) maximising its
/// expected utility against `others`, in enumeration order. `others` must
/// cover every other agent's free decisions.
std::vector<PolicyProfile> best_responses(const CausalGame& game, int agent, const PolicyProfile& others,
                                          double eps = kEquilibriumEpsilon);

/// Every pure profile over the free decisions in which each agent best-responds.
/// Profiles come out in lexicographic order of their rules.
RationalOutcomeSet pure_nash(const CausalGame& game, double eps = kEquilibriumEpsilon);

/// No agent gains more than eps from a pure deviation.
bool verify_rational_outcome(const CausalGame& game, const PolicyProfile& profile, double eps = kEquilibriumEpsilon,
                             Rationality r = Rationality::best_response);

/// Uniform draw over pure_nash(game), reproducible for a given seed.
PolicyProfile sample_rational_outcome(const CausalGame& game, std::uint64_t seed, double eps = kEquilibriumEpsilon,
                                      Rationality r = Rationality::best_response);

/// Probability of the first action of `decision` in parent context `context`.
struct BehavioralParameter {
  std::string decision;
  std::size_t context = 0;
  std::string label;  // e.g. "P(D2=j | D1=g)"
};

/// A convex set of equilibria: the product of one polytope per agent over
/// that agent's parameters.
struct BehavioralFamily {
  std::vector<std::vector<double>> extreme_points;  // over all parameters
  std::vector<double> lower;
  std::vector<double> upper;
};

struct BehavioralNashResult {
  std::vector<BehavioralParameter> params;
  std::vector<BehavioralFamily> families;  // maximal families only
  /// Extreme points of every family as profiles, each verified.
  RationalOutcomeSet extreme_points;

  PolicyProfile profile_at(const CausalGame& game, const std::vector<double>& values) const;
};

/// Behavioral equilibria by support enumeration. Supported: at most two
/// strategic agents, one free decision each, binary actions, at most four
/// contexts per decision.
BehavioralNashResult behavioral_nash_small(const CausalGame& game, double eps = kEquilibriumEpsilon);

enum class CommitmentMode { exact, grid };

struct CommitmentResult {
  DecisionRule rule;
  double leader_utility = 0.0;
  /// Followers' pure response to the committed rule.
  PolicyProfile response;
};

/// Best rule for the leader's single free decision when every other agent
/// best-responds to it, breaking follower ties in the leader's favour.
/// Exact mode solves one linear program per follower response; grid mode
/// sweeps the first-action probability of every context in `grid_step`.
CommitmentResult optimal_commitment(const CausalGame& game, int leader, CommitmentMode mode = CommitmentMode::exact,
                                    double grid_step = 1e-3, double eps = kEquilibriumEpsilon);

}  // namespace cgame
