#include "cgame/equilibrium.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "polytope.hpp"
#include "util.hpp"

namespace cgame {

namespace {

constexpr std::size_t kMaxProfiles = 5'000'000;

// Joint pure policies over a list of decisions, indexed in mixed radix with
// the first decision most significant.
struct PolicySpace {
  std::vector<std::string> decisions;
  std::vector<std::vector<DecisionRule>> rules;
  std::vector<std::size_t> strides;
  std::size_t size = 1;

  PolicySpace(const CausalGame& game, std::vector<std::string> ds) : decisions(std::move(ds)) {
    for (const auto& d : decisions) {
      rules.push_back(enumerate_pure_rules(game, d));
      if (rules.back().empty()) throw Error("decision " + d + " has no pure rules");
      if (size > kMaxProfiles / rules.back().size()) throw Error("game too large for exhaustive policy enumeration");
      size *= rules.back().size();
    }
    strides.assign(decisions.size(), 1);
    for (std::size_t k = decisions.size(); k-- > 1;) strides[k - 1] = strides[k] * rules[k].size();
  }

  std::size_t digit(std::size_t idx, std::size_t k) const { return (idx / strides[k]) % rules[k].size(); }

  void assign(std::size_t idx, PolicyProfile& out) const {
    for (std::size_t k = 0; k < decisions.size(); ++k) out.set(rules[k][digit(idx, k)]);
  }
};

std::vector<std::string> free_decisions_except(const CausalGame& game, int agent) {
  std::vector<std::string> out;
  for (const auto& d : game.free_decisions())
    if (game.variable(d).agent != agent) out.push_back(d);
  return out;
}

std::string context_label(const CausalGame& game, const std::string& decision, std::size_t row) {
  const auto& parents = game.parents(decision);
  if (parents.empty()) return {};
  const auto ctx = TabularCpd::delta(decision, 1, 0, parents, game.parent_cards(decision)).row_context(row);
  std::vector<std::string> parts;
  for (std::size_t k = 0; k < parents.size(); ++k)
    parts.push_back(parents[k] + "=" + game.variable(parents[k]).domain[ctx[k]]);
  return join(parts, ", ");
}

}  // namespace

std::vector<PolicyProfile> best_responses(const CausalGame& game, int agent, const PolicyProfile& others, double eps) {
  if (agent < 1 || agent > game.agents()) throw Error("unknown agent " + std::to_string(agent));
  PolicyProfile base;
  for (const auto& d : free_decisions_except(game, agent)) {
    if (!others.contains(d)) throw Error("missing decision rule for " + d);
    base.set(others.at(d));
  }
  PolicySpace space(game, game.free_decisions_of(agent));
  std::vector<double> values(space.size);
  double best = -std::numeric_limits<double>::infinity();
  for (std::size_t idx = 0; idx < space.size; ++idx) {
    PolicyProfile p = base;
    space.assign(idx, p);
    values[idx] = expected_utility(game, p, agent);
    best = std::max(best, values[idx]);
  }
  std::vector<PolicyProfile> out;
  for (std::size_t idx = 0; idx < space.size; ++idx) {
    if (values[idx] < best - eps) continue;
    PolicyProfile p;
    space.assign(idx, p);
    out.push_back(std::move(p));
  }
  return out;
}

RationalOutcomeSet pure_nash(const CausalGame& game, double eps) {
  const auto decisions = game.free_decisions();
  PolicySpace space(game, decisions);
  std::vector<std::vector<double>> eu(space.size);
  for (std::size_t idx = 0; idx < space.size; ++idx) {
    PolicyProfile p;
    space.assign(idx, p);
    eu[idx] = expected_utilities(game, p);
  }

  std::map<int, std::vector<std::size_t>> owned;  // agent -> decision positions
  for (std::size_t k = 0; k < decisions.size(); ++k) owned[game.variable(decisions[k]).agent].push_back(k);

  RationalOutcomeSet out;
  for (std::size_t idx = 0; idx < space.size; ++idx) {
    bool stable = true;
    for (const auto& [agent, positions] : owned) {
      std::size_t base = idx;
      std::size_t combos = 1;
      for (std::size_t k : positions) {
        base -= space.digit(idx, k) * space.strides[k];
        combos *= space.rules[k].size();
      }
      double best = -std::numeric_limits<double>::infinity();
      for (std::size_t c = 0; c < combos; ++c) {
        std::size_t rest = c;
        std::size_t j = base;
        for (std::size_t n = positions.size(); n-- > 0;) {
          const std::size_t k = positions[n];
          j += (rest % space.rules[k].size()) * space.strides[k];
          rest /= space.rules[k].size();
        }
        best = std::max(best, eu[j][static_cast<std::size_t>(agent)]);
      }
      if (eu[idx][static_cast<std::size_t>(agent)] < best - eps) {
        stable = false;
        break;
      }
    }
    if (!stable) continue;
    PolicyProfile p;
    space.assign(idx, p);
    out.outcomes.push_back(std::move(p));
  }
  return out;
}

bool verify_rational_outcome(const CausalGame& game, const PolicyProfile& profile, double eps, Rationality) {
  for (const auto& d : game.free_decisions())
    if (!profile.contains(d)) throw Error("missing decision rule for " + d);
  const auto current = expected_utilities(game, profile);
  for (int agent : game.strategic_agents()) {
    PolicySpace space(game, game.free_decisions_of(agent));
    for (std::size_t idx = 0; idx < space.size; ++idx) {
      PolicyProfile p = profile;
      space.assign(idx, p);
      if (expected_utility(game, p, agent) > current[static_cast<std::size_t>(agent)] + eps) return false;
    }
  }
  return true;
}

PolicyProfile sample_rational_outcome(const CausalGame& game, std::uint64_t seed, double eps, Rationality) {
  auto ne = pure_nash(game, eps);
  if (ne.outcomes.empty()) throw Error("no pure rational outcome found");
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, ne.outcomes.size() - 1);
  return ne.outcomes[pick(rng)];
}

// ---------------------------------------------------------------------------
// Behavioral equilibria

namespace {

struct Side {
  int agent = 0;
  std::string decision;
  std::size_t contexts = 0;
  std::size_t offset = 0;  // position of this side's parameters
};

DecisionRule binary_rule(const CausalGame& game, const std::string& decision, const std::vector<double>& first) {
  std::vector<double> values;
  for (double p : first) {
    values.push_back(p);
    values.push_back(1.0 - p);
  }
  return TabularCpd(decision, 2, game.parents(decision), game.parent_cards(decision), std::move(values));
}

DecisionRule one_hot(const CausalGame& game, const std::string& decision, std::size_t row, std::size_t action) {
  TabularCpd t(decision, game.cardinality(decision), game.parents(decision), game.parent_cards(decision),
               std::vector<double>(game.cardinality(decision) * TabularCpd::delta(decision, 1, 0, game.parents(decision),
                                                                                  game.parent_cards(decision))
                                                                  .rows(),
                                   0.0));
  t.at(row, action) = 1.0;
  return t;
}

// Affine form gain(c; y) = base[c] + coef[c] . y : the gain of `me` from its
// first action over its second at context c, as a function of the other
// side's parameters y.
struct GainForms {
  std::vector<double> base;
  std::vector<std::vector<double>> coef;
};

GainForms gain_forms(const CausalGame& game, const Side& me, const Side* other) {
  GainForms g;
  const std::size_t ny = other ? other->contexts : 0;
  auto q = [&](std::size_t c, std::size_t a, const std::vector<double>& y) {
    PolicyProfile p;
    p.set(one_hot(game, me.decision, c, a));
    if (other) p.set(binary_rule(game, other->decision, y));
    return expected_utility(game, p, me.agent);
  };
  for (std::size_t c = 0; c < me.contexts; ++c) {
    std::vector<double> zero(ny, 0.0);
    const double at0 = q(c, 0, zero) - q(c, 1, zero);
    g.base.push_back(at0);
    std::vector<double> coef(ny);
    for (std::size_t k = 0; k < ny; ++k) {
      std::vector<double> e(ny, 0.0);
      e[k] = 1.0;
      coef[k] = (q(c, 0, e) - q(c, 1, e)) - at0;
    }
    g.coef.push_back(std::move(coef));
  }
  return g;
}

enum Support { first_only = 0, second_only = 1, both = 2 };

std::vector<std::vector<int>> all_supports(std::size_t contexts) {
  std::vector<std::vector<int>> out;
  std::size_t n = 1;
  for (std::size_t c = 0; c < contexts; ++c) n *= 3;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<int> s(contexts);
    std::size_t rest = i;
    for (std::size_t c = contexts; c-- > 0;) {
      s[c] = static_cast<int>(rest % 3);
      rest /= 3;
    }
    out.push_back(std::move(s));
  }
  return out;
}

// Constraints on one side's parameters: its own support box plus the other
// side's optimality conditions (which are affine in these parameters).
std::vector<LinearConstraint> side_constraints(std::size_t dim, const std::vector<int>& own_support,
                                               const GainForms* opponent_gain, const std::vector<int>* opponent_support,
                                               double eps) {
  std::vector<LinearConstraint> cs;
  for (std::size_t c = 0; c < dim; ++c) {
    std::vector<double> e(dim, 0.0);
    e[c] = 1.0;
    std::vector<double> ne(dim, 0.0);
    ne[c] = -1.0;
    switch (own_support[c]) {
      case first_only: cs.push_back({e, 1.0, true}); break;
      case second_only: cs.push_back({e, 0.0, true}); break;
      default:
        cs.push_back({e, 1.0, false});
        cs.push_back({ne, 0.0, false});
    }
  }
  if (opponent_gain) {
    for (std::size_t c = 0; c < opponent_support->size(); ++c) {
      const auto& a = opponent_gain->coef[c];
      const double b0 = opponent_gain->base[c];
      std::vector<double> neg(a.size());
      for (std::size_t k = 0; k < a.size(); ++k) neg[k] = -a[k];
      switch ((*opponent_support)[c]) {
        case first_only: cs.push_back({neg, b0 + eps, false}); break;   // gain >= 0
        case second_only: cs.push_back({a, -b0 + eps, false}); break;   // gain <= 0
        default: cs.push_back({a, -b0, true});                          // gain == 0
      }
    }
  }
  return cs;
}

bool within(const std::vector<std::vector<double>>& vertices, const std::vector<LinearConstraint>& cs) {
  for (const auto& v : vertices)
    if (!satisfies(cs, v, 1e-7)) return false;
  return true;
}

struct SideFamily {
  std::vector<std::vector<double>> vertices;
  std::vector<LinearConstraint> constraints;
};

struct ProductFamily {
  SideFamily a, b;
  bool contained_in(const ProductFamily& o) const {
    return within(a.vertices, o.a.constraints) && within(b.vertices, o.b.constraints);
  }
};

}  // namespace

PolicyProfile BehavioralNashResult::profile_at(const CausalGame& game, const std::vector<double>& values) const {
  PolicyProfile p;
  std::map<std::string, std::vector<double>> per_decision;
  for (std::size_t k = 0; k < params.size(); ++k) per_decision[params[k].decision].push_back(values[k]);
  for (const auto& [d, first] : per_decision) p.set(binary_rule(game, d, first));
  return p;
}

BehavioralNashResult behavioral_nash_small(const CausalGame& game, double eps) {
  const auto agents = game.strategic_agents();
  if (agents.size() > 2) throw Error("unsupported size: behavioral solver handles at most two strategic agents");
  std::vector<Side> sides;
  std::size_t offset = 0;
  for (int agent : agents) {
    const auto ds = game.free_decisions_of(agent);
    if (ds.size() != 1) throw Error("unsupported size: behavioral solver needs one free decision per agent");
    if (game.cardinality(ds[0]) != 2) throw Error("unsupported size: behavioral solver needs binary decisions");
    const auto cards = game.parent_cards(ds[0]);
    std::size_t contexts = 1;
    for (auto c : cards) contexts *= c;
    if (contexts > 4) throw Error("unsupported size: behavioral solver allows at most four contexts per decision");
    sides.push_back(Side{agent, ds[0], contexts, offset});
    offset += contexts;
  }

  BehavioralNashResult result;
  result.extreme_points.mode = OutcomeMode::behavioral_support_enum;
  for (const auto& s : sides)
    for (std::size_t c = 0; c < s.contexts; ++c) {
      const auto ctx = context_label(game, s.decision, c);
      const auto& first = game.variable(s.decision).domain[0];
      result.params.push_back(
          {s.decision, c, "P(" + s.decision + "=" + first + (ctx.empty() ? "" : " | " + ctx) + ")"});
    }

  // Gains of each side, as affine functions of the other side's parameters.
  std::vector<GainForms> gains;
  for (std::size_t i = 0; i < sides.size(); ++i)
    gains.push_back(gain_forms(game, sides[i], sides.size() == 2 ? &sides[1 - i] : nullptr));

  const Side empty_side{};
  const Side& sa = sides.size() > 0 ? sides[0] : empty_side;
  const Side& sb = sides.size() > 1 ? sides[1] : empty_side;
  const auto supports_a = all_supports(sa.contexts);
  const auto supports_b = all_supports(sb.contexts);

  std::vector<ProductFamily> families;
  for (const auto& s_a : supports_a) {
    for (const auto& s_b : supports_b) {
      ProductFamily f;
      // Side a is constrained by b's optimality; b by a's.
      f.a.constraints = side_constraints(sa.contexts, s_a, sides.size() > 1 ? &gains[1] : nullptr,
                                         sides.size() > 1 ? &s_b : nullptr, 0.0);
      f.b.constraints =
          side_constraints(sb.contexts, s_b, sides.size() > 0 ? &gains[0] : nullptr, sides.size() > 0 ? &s_a : nullptr, 0.0);
      if (sides.size() == 1) {
        // A lone agent's optimality conditions are constants.
        bool ok = true;
        for (std::size_t c = 0; c < sa.contexts; ++c) {
          const double g = gains[0].base[c];
          if ((s_a[c] == first_only && g < -eps) || (s_a[c] == second_only && g > eps) ||
              (s_a[c] == both && std::abs(g) > eps))
            ok = false;
        }
        if (!ok) continue;
        f.b.constraints.clear();
      }
      f.b.vertices = polytope_vertices(sb.contexts, f.b.constraints);
      if (f.b.vertices.empty()) continue;
      f.a.vertices = polytope_vertices(sa.contexts, f.a.constraints);
      if (f.a.vertices.empty()) continue;

      bool dominated = false;
      for (const auto& g : families)
        if (f.contained_in(g)) {
          dominated = true;
          break;
        }
      if (dominated) continue;
      std::erase_if(families, [&](const ProductFamily& g) { return g.contained_in(f); });
      families.push_back(std::move(f));
    }
  }

  for (const auto& f : families) {
    BehavioralFamily out;
    for (const auto& va : f.a.vertices)
      for (const auto& vb : f.b.vertices) {
        std::vector<double> v = va;
        v.insert(v.end(), vb.begin(), vb.end());
        out.extreme_points.push_back(std::move(v));
      }
    const std::size_t n = result.params.size();
    out.lower.assign(n, std::numeric_limits<double>::infinity());
    out.upper.assign(n, -std::numeric_limits<double>::infinity());
    for (const auto& v : out.extreme_points)
      for (std::size_t k = 0; k < n; ++k) {
        out.lower[k] = std::min(out.lower[k], v[k]);
        out.upper[k] = std::max(out.upper[k], v[k]);
      }
    for (const auto& v : out.extreme_points) {
      auto p = result.profile_at(game, v);
      if (!verify_rational_outcome(game, p, eps))
        throw Error("internal error: behavioral extreme point failed verification");
      bool seen = false;
      for (const auto& q : result.extreme_points.outcomes) seen = seen || q.equivalent(p, 1e-9);
      if (!seen) result.extreme_points.outcomes.push_back(std::move(p));
    }
    result.families.push_back(std::move(out));
  }
  return result;
}

// ---------------------------------------------------------------------------
// Commitment

namespace {

// Expected utility of every agent as an affine function of the leader's rule
// entries w (the last action of each row takes the remaining mass).
struct AffineUtility {
  std::vector<double> constant;            // per agent
  std::vector<std::vector<double>> coef;   // per agent, per w entry
};

}  // namespace

CommitmentResult optimal_commitment(const CausalGame& game, int leader, CommitmentMode mode, double grid_step,
                                    double eps) {
  const auto own = game.free_decisions_of(leader);
  if (own.empty()) throw Error("agent " + std::to_string(leader) + " has no free decision to commit");
  if (own.size() > 1) throw Error("unsupported: commitment needs the leader to own a single decision");
  const std::string& d = own[0];
  const std::size_t card = game.cardinality(d);
  const std::size_t rows = TabularCpd::delta(d, 1, 0, game.parents(d), game.parent_cards(d)).rows();
  const std::size_t dim = rows * (card - 1);
  const std::size_t n_agents = static_cast<std::size_t>(game.agents()) + 1;

  const auto follower_decisions = free_decisions_except(game, leader);
  PolicySpace followers(game, follower_decisions);

  // Affine utilities for each follower profile.
  std::vector<AffineUtility> forms(followers.size);
  for (std::size_t f = 0; f < followers.size; ++f) {
    PolicyProfile base;
    followers.assign(f, base);
    std::vector<std::vector<std::vector<double>>> q(rows, std::vector<std::vector<double>>(card));
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t a = 0; a < card; ++a) {
        PolicyProfile p = base;
        p.set(one_hot(game, d, r, a));
        q[r][a] = expected_utilities(game, p);
      }
    AffineUtility& u = forms[f];
    u.constant.assign(n_agents, 0.0);
    u.coef.assign(n_agents, std::vector<double>(dim, 0.0));
    for (std::size_t j = 0; j < n_agents; ++j)
      for (std::size_t r = 0; r < rows; ++r) {
        u.constant[j] += q[r][card - 1][j];
        for (std::size_t a = 0; a + 1 < card; ++a) u.coef[j][r * (card - 1) + a] = q[r][a][j] - q[r][card - 1][j];
      }
  }

  // Deviations available to each follower agent from profile f.
  std::map<int, std::vector<std::size_t>> owned;
  for (std::size_t k = 0; k < follower_decisions.size(); ++k)
    owned[game.variable(follower_decisions[k]).agent].push_back(k);
  auto deviations = [&](std::size_t f) {
    std::vector<std::pair<int, std::size_t>> out;
    for (const auto& [agent, positions] : owned) {
      std::size_t base = f;
      std::size_t combos = 1;
      for (std::size_t k : positions) {
        base -= followers.digit(f, k) * followers.strides[k];
        combos *= followers.rules[k].size();
      }
      for (std::size_t c = 0; c < combos; ++c) {
        std::size_t rest = c;
        std::size_t g = base;
        for (std::size_t n = positions.size(); n-- > 0;) {
          const std::size_t k = positions[n];
          g += (rest % followers.rules[k].size()) * followers.strides[k];
          rest /= followers.rules[k].size();
        }
        if (g != f) out.emplace_back(agent, g);
      }
    }
    return out;
  };
  auto value = [&](const AffineUtility& u, std::size_t agent, const std::vector<double>& w) {
    double v = u.constant[agent];
    for (std::size_t k = 0; k < w.size(); ++k) v += u.coef[agent][k] * w[k];
    return v;
  };
  const std::size_t lead = static_cast<std::size_t>(leader);

  std::vector<double> best_w;
  std::size_t best_f = 0;
  double best_value = -std::numeric_limits<double>::infinity();
  auto offer = [&](const std::vector<double>& w, std::size_t f) {
    const double v = value(forms[f], lead, w);
    if (v > best_value + 1e-12) {
      best_value = v;
      best_w = w;
      best_f = f;
    }
  };

  if (mode == CommitmentMode::exact) {
    if (dim > 8) throw Error("unsupported: exact commitment handles at most eight rule parameters");
    for (std::size_t f = 0; f < followers.size; ++f) {
      std::vector<LinearConstraint> cs;
      for (std::size_t r = 0; r < rows; ++r) {
        std::vector<double> sum(dim, 0.0);
        for (std::size_t a = 0; a + 1 < card; ++a) {
          std::vector<double> e(dim, 0.0);
          e[r * (card - 1) + a] = -1.0;
          cs.push_back({e, 0.0, false});
          sum[r * (card - 1) + a] = 1.0;
        }
        cs.push_back({sum, 1.0, false});
      }
      // Follower optimality: u_j(w, g) - u_j(w, f) <= 0 for every deviation g of agent j.
      for (const auto& [agent, g] : deviations(f)) {
        const auto j = static_cast<std::size_t>(agent);
        std::vector<double> a(dim);
        for (std::size_t k = 0; k < dim; ++k) a[k] = forms[g].coef[j][k] - forms[f].coef[j][k];
        cs.push_back({a, forms[f].constant[j] - forms[g].constant[j], false});
      }
      for (const auto& w : polytope_vertices(dim, cs)) offer(w, f);
    }
  } else {
    if (card != 2) throw Error("unsupported: grid commitment needs a binary decision");
    if (grid_step <= 0.0 || grid_step > 1.0) throw Error("grid step must lie in (0, 1]");
    const auto steps = static_cast<std::size_t>(std::llround(1.0 / grid_step));
    double points = 1.0;
    for (std::size_t r = 0; r < rows; ++r) points *= static_cast<double>(steps + 1);
    if (points > 2e6) throw Error("unsupported: commitment grid too large");
    std::vector<std::size_t> idx(rows, 0);
    std::vector<double> w(rows);
    const auto devs = [&] {
      std::vector<std::vector<std::pair<int, std::size_t>>> all;
      for (std::size_t f = 0; f < followers.size; ++f) all.push_back(deviations(f));
      return all;
    }();
    while (true) {
      for (std::size_t r = 0; r < rows; ++r) w[r] = std::min(1.0, static_cast<double>(idx[r]) * grid_step);
      for (std::size_t f = 0; f < followers.size; ++f) {
        bool stable = true;
        for (const auto& [agent, g] : devs[f]) {
          const auto j = static_cast<std::size_t>(agent);
          if (value(forms[g], j, w) > value(forms[f], j, w) + eps) {
            stable = false;
            break;
          }
        }
        if (stable) offer(w, f);
      }
      std::size_t r = rows;
      while (r > 0) {
        --r;
        if (++idx[r] <= steps) break;
        idx[r] = 0;
        if (r == 0) {
          r = rows + 1;
          break;
        }
      }
      if (rows == 0 || r == rows + 1) break;
    }
  }
  if (best_w.size() != dim) throw Error("no follower response found for any commitment");

  std::vector<double> values;
  for (std::size_t r = 0; r < rows; ++r) {
    double rest = 1.0;
    for (std::size_t a = 0; a + 1 < card; ++a) {
      values.push_back(best_w[r * (card - 1) + a]);
      rest -= best_w[r * (card - 1) + a];
    }
    values.push_back(std::max(0.0, rest));
  }
  CommitmentResult out;
  out.rule = TabularCpd(d, card, game.parents(d), game.parent_cards(d), std::move(values));
  out.leader_utility = best_value;
  followers.assign(best_f, out.response);
  return out;
}

}  // namespace cgame
