#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "cgame/core_model.hpp"
#include "cgame/io.hpp"
#include "test_support.hpp"

using namespace cgame;
using namespace cgame::testing;

TEST_CASE("row index and context are inverse") {
  TabularCpd t("X", 2, {"A", "B", "C"}, {2, 3, 2}, std::vector<double>(24, 0.5));
  for (std::size_t r = 0; r < t.rows(); ++r) CHECK(t.row_index(t.row_context(r)) == r);
  const std::vector<std::size_t> ctx{1, 2, 0};
  CHECK(t.row_index(ctx) == 1 * 6 + 2 * 2 + 0);
}

TEST_CASE("reordered tables describe the same conditional") {
  std::mt19937_64 rng(7);
  CausalGame g(0);
  g.add_variable(Variable::chance("A", {"a0", "a1"}), {});
  g.add_variable(Variable::chance("B", {"b0", "b1", "b2"}), {});
  g.add_variable(Variable::chance("X", {"x0", "x1"}), {"A", "B"});
  const auto t = random_table(rng, g, "X", {"A", "B"});
  const auto r = t.reordered({"B", "A"});
  CHECK(r.parents() == std::vector<std::string>{"B", "A"});
  for (std::size_t a = 0; a < 2; ++a)
    for (std::size_t b = 0; b < 3; ++b) {
      const std::vector<std::size_t> ab{a, b}, ba{b, a};
      for (std::size_t v = 0; v < 2; ++v) CHECK(t.prob(t.row_index(ab), v) == r.prob(r.row_index(ba), v));
    }
  CHECK(t.equivalent(r));
}

TEST_CASE("pure and fully stochastic rules") {
  CHECK(TabularCpd::delta("D", 2, 1).is_pure());
  CHECK_FALSE(TabularCpd::delta("D", 2, 1).is_fully_stochastic());
  CHECK(TabularCpd::uniform("D", 3).is_fully_stochastic());
  CHECK_FALSE(TabularCpd::uniform("D", 3).is_pure());
}

TEST_CASE("validation catches malformed games") {
  CausalGame g(1);
  g.add_variable(Variable::chance("T", {"h", "l"}), {});
  g.set_cpd(TabularCpd("T", 2, {}, {}, {0.5, 0.4}));
  g.add_variable(Variable::decision("D", 1, {"a", "b"}), {"T"});
  g.add_variable(Variable::utility("U", 1, {0, 1}), {"D"});
  g.set_cpd(TabularCpd::delta("U", 2, 0, {"D"}, {2}));
  auto report = validate_game(g);
  REQUIRE(report.size() == 1);
  CHECK(report[0].subject == "T");

  g.set_cpd(TabularCpd("T", 2, {}, {}, {0.5, 0.5}));
  CHECK(validate_game(g).empty());

  SUBCASE("utility with children") {
    g.add_variable(Variable::chance("Y", {"y"}), {"U"});
    g.set_cpd(TabularCpd("Y", 1, {"U"}, {2}, {1.0, 1.0}));
    CHECK_FALSE(validate_game(g).empty());
  }
  SUBCASE("cycle") {
    g.set_parents("T", {"D"});
    g.set_cpd(TabularCpd("T", 2, {"D"}, {2}, {0.5, 0.5, 0.5, 0.5}));
    CHECK_FALSE(validate_game(g).empty());
  }
  SUBCASE("unknown agent") {
    g.add_variable(Variable::decision("E", 3, {"a"}), {});
    CHECK_FALSE(validate_game(g).empty());
  }
  SUBCASE("reserved name") {
    g.add_variable(Variable::chance("PI_X", {"a"}), {});
    g.set_cpd(TabularCpd::delta("PI_X", 1, 0));
    CHECK_FALSE(validate_game(g).empty());
  }
}

TEST_CASE("induced joint matches a brute-force product on random games") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 100; ++trial) {
    const CausalGame g = random_game(rng);
    REQUIRE(validate_game(g).empty());
    const PolicyProfile p = random_profile(rng, g);
    const auto joint = induced_joint(g, p);
    const auto oracle = oracle_joint(g, p);
    CHECK(near(joint.total(), 1.0, 1e-12));
    for (std::size_t i = 0; i < oracle.size(); ++i) {
      std::map<std::string, std::size_t> a;
      std::size_t rest = i;
      for (std::size_t k = g.variables().size(); k-- > 0;) {
        a[g.variables()[k].name] = rest % g.variables()[k].cardinality();
        rest /= g.variables()[k].cardinality();
      }
      CHECK(near(joint.probability(a), oracle[i], 1e-12));
    }
    for (int agent = 1; agent <= g.agents(); ++agent)
      CHECK(near(expected_utility(g, p, agent), oracle_eu(g, oracle, agent), 1e-10));
    const auto all = expected_utilities(g, p);
    CHECK(near(expected_total_utility(g, p), all[1] + all[2], 1e-10));
  }
}

TEST_CASE("prisoners' dilemma payoffs") {
  const CausalGame g = load_fixture("prisoners_dilemma");
  const auto C = [&](const std::string& d) { return constant_rule(g, d, g.value_index(d, "C")); };
  const auto D = [&](const std::string& d) { return constant_rule(g, d, g.value_index(d, "D")); };
  auto profile = [](DecisionRule a, DecisionRule b) {
    PolicyProfile p;
    p.set(std::move(a));
    p.set(std::move(b));
    return p;
  };
  const std::vector<std::tuple<PolicyProfile, double, double>> table{
      {profile(C("D1"), C("D2")), -1, -1},
      {profile(C("D1"), D("D2")), -5, 0},
      {profile(D("D1"), C("D2")), 0, -5},
      {profile(D("D1"), D("D2")), -2, -2},
  };
  for (const auto& [p, u1, u2] : table) {
    CHECK(expected_utility(g, p, 1) == doctest::Approx(u1));
    CHECK(expected_utility(g, p, 2) == doctest::Approx(u2));
  }
}

TEST_CASE("pure rules are enumerated exhaustively") {
  const CausalGame g = load_fixture("job_market");
  const auto rules = enumerate_pure_rules(g, "D1");
  CHECK(rules.size() == 4);
  for (const auto& r : rules) CHECK(r.is_pure());
  for (std::size_t i = 0; i < rules.size(); ++i)
    for (std::size_t j = i + 1; j < rules.size(); ++j) CHECK_FALSE(rules[i] == rules[j]);
}

TEST_CASE("effective rule priority") {
  CausalGame g = load_fixture("stackelberg");
  PolicyProfile p;
  p.set(constant_rule(g, "D1", 0));
  CHECK(effective_rule(g, p, "D1") == constant_rule(g, "D1", 0));
  g.set_commitment(constant_rule(g, "D1", 1));
  CHECK(effective_rule(g, p, "D1") == constant_rule(g, "D1", 1));
  g.set_object_fixed(uniform_rule(g, "D1"));
  CHECK(effective_rule(g, p, "D1") == uniform_rule(g, "D1"));
  CHECK_THROWS_AS(effective_rule(g, p, "D2"), Error);
  CHECK(g.free_decisions() == std::vector<std::string>{"D2"});
}

TEST_CASE("structural equality ignores variable and parent order") {
  const CausalGame a = load_fixture("job_market");
  CausalGame b(a.agents(), a.name());
  std::vector<Variable> vars = a.variables();
  std::reverse(vars.begin(), vars.end());
  for (const auto& v : vars) {
    auto ps = a.parents(v.name);
    std::reverse(ps.begin(), ps.end());
    b.add_variable(v, ps);
    if (a.cpds().count(v.name)) b.set_cpd(a.cpd(v.name).reordered(ps));
  }
  CHECK(structurally_equal(a, b));
  CausalGame c = b;
  c.set_cpd(TabularCpd("T", 2, {}, {}, {0.3, 0.7}));
  CHECK_FALSE(structurally_equal(a, c));
  CHECK_FALSE(structural_difference(a, c).empty());
}
