#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "cgame/equilibrium.hpp"
#include "cgame/io.hpp"
#include "test_support.hpp"

using namespace cgame;
using namespace cgame::testing;

namespace {

// Every pure rule of a decision, built directly from its parent cardinalities.
std::vector<DecisionRule> oracle_rules(const CausalGame& g, const std::string& d) {
  std::size_t rows = 1;
  for (const auto& p : g.parents(d)) rows *= g.cardinality(p);
  const std::size_t card = g.cardinality(d);
  std::size_t count = 1;
  for (std::size_t r = 0; r < rows; ++r) count *= card;
  std::vector<DecisionRule> out;
  for (std::size_t idx = 0; idx < count; ++idx) {
    std::vector<double> values(rows * card, 0.0);
    std::size_t rest = idx;
    for (std::size_t r = rows; r-- > 0;) {
      values[r * card + rest % card] = 1.0;
      rest /= card;
    }
    out.emplace_back(d, card, g.parents(d), g.parent_cards(d), values);
  }
  return out;
}

// All pure profiles by brute force, with each agent's deviations checked
// through the oracle joint.
std::vector<PolicyProfile> oracle_pure_nash(const CausalGame& g) {
  const auto ds = g.free_decisions();
  std::vector<std::vector<DecisionRule>> rules;
  for (const auto& d : ds) rules.push_back(oracle_rules(g, d));
  std::vector<PolicyProfile> all;
  std::vector<std::size_t> pick(ds.size(), 0);
  while (true) {
    PolicyProfile p;
    for (std::size_t k = 0; k < ds.size(); ++k) p.set(rules[k][pick[k]]);
    all.push_back(p);
    std::size_t k = ds.size();
    while (k > 0 && ++pick[k - 1] == rules[k - 1].size()) pick[--k] = 0;
    if (k == 0) break;
  }
  std::vector<PolicyProfile> out;
  for (const auto& p : all) {
    const auto joint = oracle_joint(g, p);
    bool stable = true;
    for (int agent = 1; agent <= g.agents() && stable; ++agent) {
      const double u = oracle_eu(g, joint, agent);
      for (const auto& q : all) {
        bool same_others = true;
        for (const auto& d : ds)
          if (g.variable(d).agent != agent && !(q.at(d) == p.at(d))) same_others = false;
        if (!same_others) continue;
        if (oracle_eu(g, oracle_joint(g, q), agent) > u + 1e-9) {
          stable = false;
          break;
        }
      }
    }
    if (stable) out.push_back(p);
  }
  return out;
}

DecisionRule rule(const CausalGame& g, const std::string& d, std::vector<double> values) {
  return DecisionRule(d, g.cardinality(d), g.parents(d), g.parent_cards(d), std::move(values));
}

}  // namespace

TEST_CASE("prisoners' dilemma has a unique pure equilibrium") {
  const CausalGame g = load_fixture("prisoners_dilemma");
  const auto ne = pure_nash(g);
  REQUIRE(ne.outcomes.size() == 1);
  CHECK(ne.outcomes[0].at("D1") == constant_rule(g, "D1", g.value_index("D1", "D")));
  CHECK(ne.outcomes[0].at("D2") == constant_rule(g, "D2", g.value_index("D2", "D")));
  CHECK(expected_utility(g, ne.outcomes[0], 1) == doctest::Approx(-2));
  CHECK(verify_rational_outcome(g, ne.outcomes[0]));
}

TEST_CASE("best responses in the prisoners' dilemma") {
  const CausalGame g = load_fixture("prisoners_dilemma");
  PolicyProfile others;
  others.set(constant_rule(g, "D2", g.value_index("D2", "C")));
  const auto br = best_responses(g, 1, others);
  REQUIRE(br.size() == 1);
  CHECK(br[0].at("D1") == constant_rule(g, "D1", g.value_index("D1", "D")));
}

TEST_CASE("pure equilibria agree with brute force on random games") {
  std::mt19937_64 rng(99);
  int checked = 0;
  for (int trial = 0; trial < 150; ++trial) {
    const CausalGame g = random_game(rng, {2, 4, false, 2});
    std::size_t space = 1;
    for (const auto& d : g.free_decisions()) space *= oracle_rules(g, d).size();
    if (space > 400) continue;
    const auto expected = oracle_pure_nash(g);
    const auto got = pure_nash(g).outcomes;
    REQUIRE(got.size() == expected.size());
    for (const auto& p : expected) {
      const bool found = std::any_of(got.begin(), got.end(), [&](const PolicyProfile& q) { return q.equivalent(p); });
      CHECK(found);
    }
    for (const auto& p : got) CHECK(verify_rational_outcome(g, p));
    ++checked;
  }
  CHECK(checked > 50);
}

TEST_CASE("stackelberg simultaneous play") {
  const CausalGame g = load_fixture("stackelberg");
  const auto ne = pure_nash(g);
  REQUIRE(ne.outcomes.size() == 1);
  CHECK(ne.outcomes[0].at("D1") == constant_rule(g, "D1", 0));
  CHECK(ne.outcomes[0].at("D2") == constant_rule(g, "D2", 0));
  CHECK(expected_utility(g, ne.outcomes[0], 1) == doctest::Approx(2));
}

TEST_CASE("sampling is reproducible and covers every outcome") {
  const CausalGame g = load_fixture("effortville");
  const auto ne = pure_nash(g).outcomes;
  REQUIRE(ne.size() == 3);
  const auto a = sample_rational_outcome(g, 42);
  const auto b = sample_rational_outcome(g, 42);
  CHECK(a.equivalent(b));
  std::vector<bool> seen(ne.size(), false);
  for (std::uint64_t seed = 0; seed < 64; ++seed) {
    const auto s = sample_rational_outcome(g, seed);
    for (std::size_t k = 0; k < ne.size(); ++k)
      if (ne[k].equivalent(s)) seen[k] = true;
  }
  CHECK(std::all_of(seen.begin(), seen.end(), [](bool x) { return x; }));
}

TEST_CASE("matching pennies has only the uniform behavioral equilibrium") {
  CausalGame g(2, "pennies");
  g.add_variable(Variable::decision("A", 1, {"h", "t"}), {});
  g.add_variable(Variable::decision("B", 2, {"h", "t"}), {});
  g.add_variable(Variable::utility("UA", 1, {-1, 1}), {"A", "B"});
  g.add_variable(Variable::utility("UB", 2, {-1, 1}), {"A", "B"});
  g.set_cpd(TabularCpd("UA", 2, {"A", "B"}, {2, 2}, {0, 1, 1, 0, 1, 0, 0, 1}));
  g.set_cpd(TabularCpd("UB", 2, {"A", "B"}, {2, 2}, {1, 0, 0, 1, 0, 1, 1, 0}));
  REQUIRE(validate_game(g).empty());
  CHECK(pure_nash(g).outcomes.empty());
  const auto res = behavioral_nash_small(g);
  REQUIRE(res.families.size() == 1);
  REQUIRE(res.extreme_points.outcomes.size() == 1);
  CHECK(res.families[0].lower[0] == doctest::Approx(0.5));
  CHECK(res.families[0].lower[1] == doctest::Approx(0.5));
}

TEST_CASE("behavioral equilibria of a random 2x2 game match the indifference formulas") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 10.0);
  int mixed_found = 0;
  for (int trial = 0; trial < 40; ++trial) {
    // Distinct payoffs; utilities indexed by (a, b).
    double a[2][2], b[2][2];
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j) {
        a[i][j] = std::round(u(rng) * 4) / 4;
        b[i][j] = std::round(u(rng) * 4) / 4 + 20;
      }
    std::vector<double> av{a[0][0], a[0][1], a[1][0], a[1][1]}, bv{b[0][0], b[0][1], b[1][0], b[1][1]};
    std::sort(av.begin(), av.end());
    std::sort(bv.begin(), bv.end());
    if (std::adjacent_find(av.begin(), av.end()) != av.end() || std::adjacent_find(bv.begin(), bv.end()) != bv.end())
      continue;
    CausalGame g(2, "two_by_two");
    g.add_variable(Variable::decision("A", 1, {"a0", "a1"}), {});
    g.add_variable(Variable::decision("B", 2, {"b0", "b1"}), {});
    g.add_variable(Variable::utility("UA", 1, av), {"A", "B"});
    g.add_variable(Variable::utility("UB", 2, bv), {"A", "B"});
    std::vector<double> ta, tb;
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j) {
        const auto ia = std::find(av.begin(), av.end(), a[i][j]) - av.begin();
        const auto ib = std::find(bv.begin(), bv.end(), b[i][j]) - bv.begin();
        for (long k = 0; k < 4; ++k) ta.push_back(k == ia ? 1.0 : 0.0);
        for (long k = 0; k < 4; ++k) tb.push_back(k == ib ? 1.0 : 0.0);
      }
    g.set_cpd(TabularCpd("UA", 4, {"A", "B"}, {2, 2}, ta));
    g.set_cpd(TabularCpd("UB", 4, {"A", "B"}, {2, 2}, tb));
    REQUIRE(validate_game(g).empty());

    const auto res = behavioral_nash_small(g);
    for (const auto& p : res.extreme_points.outcomes) CHECK(verify_rational_outcome(g, p));
    // Fully mixed equilibrium from the indifference conditions, when interior.
    const double denom_q = a[0][0] - a[0][1] - a[1][0] + a[1][1];
    const double denom_p = b[0][0] - b[0][1] - b[1][0] + b[1][1];
    if (denom_q == 0 || denom_p == 0) continue;
    const double q = (a[1][1] - a[0][1]) / denom_q;  // P(b0) making A indifferent
    const double p = (b[1][1] - b[1][0]) / denom_p;  // P(a0) making B indifferent
    if (!(q > 1e-6 && q < 1 - 1e-6 && p > 1e-6 && p < 1 - 1e-6)) continue;
    const bool found = std::any_of(res.families.begin(), res.families.end(), [&](const BehavioralFamily& f) {
      return std::abs(f.lower[0] - p) < 1e-9 && std::abs(f.upper[0] - p) < 1e-9 && std::abs(f.lower[1] - q) < 1e-9 &&
             std::abs(f.upper[1] - q) < 1e-9;
    });
    CHECK(found);
    ++mixed_found;
  }
  CHECK(mixed_found > 3);
}

TEST_CASE("job market stochastic equilibrium") {
  const CausalGame g = load_fixture("job_market");
  PolicyProfile p;
  p.set(rule(g, "D1", {0.5, 0.5, 0.0, 1.0}));
  p.set(rule(g, "D2", {1.0, 0.0, 0.8, 0.2}));
  CHECK(verify_rational_outcome(g, p));
  CHECK_FALSE(verify_rational_outcome(load_fixture("job_market", {{"p", 0.3}}), p));

  const auto res = behavioral_nash_small(g);
  CHECK(res.params.size() == 4);
  CHECK(res.params[0].label == "P(D1=g | T=h)");
  const std::vector<double> point{0.5, 0.0, 1.0, 0.8};
  const bool found = std::any_of(res.families.begin(), res.families.end(), [&](const BehavioralFamily& f) {
    for (std::size_t k = 0; k < point.size(); ++k)
      if (point[k] < f.lower[k] - 1e-9 || point[k] > f.upper[k] + 1e-9) return false;
    return true;
  });
  CHECK(found);
  for (const auto& q : res.extreme_points.outcomes) CHECK(verify_rational_outcome(g, q));
}

TEST_CASE("behavioral solver rejects games outside its scope") {
  const CausalGame g = load_fixture("job_market");
  CausalGame three = g;
  three.set_agents(3);
  three.add_variable(Variable::decision("D3", 3, {"a", "b"}), {});
  three.add_variable(Variable::utility("U3", 3, {0}), {"D3"});
  three.set_cpd(TabularCpd("U3", 1, {"D3"}, {2}, {1, 1}));
  CHECK_THROWS_AS(behavioral_nash_small(three), Error);
}

TEST_CASE("optimal commitment in the leader-follower game") {
  const CausalGame g = load_fixture("stackelberg");
  // Follower prefers R iff 2(1 - p) >= p, where p = P(T); leader gets 3 + p then.
  const double p_hat = 2.0 / 3.0;
  const double value = 3.0 + p_hat;
  const auto exact = optimal_commitment(g, 1);
  CHECK(exact.rule.prob(0, 0) == doctest::Approx(p_hat).epsilon(1e-12));
  CHECK(std::abs(exact.leader_utility - value) <= 1e-9);
  CHECK(exact.response.at("D2") == constant_rule(g, "D2", 1));

  const auto grid = optimal_commitment(g, 1, CommitmentMode::grid);
  CHECK(std::abs(grid.rule.prob(0, 0) - p_hat) <= 1e-3);
  CHECK(std::abs(grid.leader_utility - value) <= 1e-3);
}

TEST_CASE("commitment payoff of a half-half rule") {
  CausalGame g = load_fixture("stackelberg");
  g.set_commitment(uniform_rule(g, "D1"));
  const auto ne = pure_nash(g);
  REQUIRE(ne.outcomes.size() == 1);
  CHECK(ne.outcomes[0].at("D2") == constant_rule(g, "D2", 1));
  CHECK(std::abs(expected_utility(g, ne.outcomes[0], 1) - 3.5) <= 1e-9);
}
