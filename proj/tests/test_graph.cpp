#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <set>

#include "cgame/graph.hpp"
#include "cgame/interventions.hpp"
#include "cgame/io.hpp"
#include "test_support.hpp"

using namespace cgame;
using namespace cgame::testing;

using EdgeSet = std::set<std::pair<std::string, std::string>>;

namespace {

DiGraph make_graph(const std::vector<std::string>& nodes, const std::vector<std::pair<std::string, std::string>>& edges) {
  DiGraph g;
  for (const auto& n : nodes) g.add_node(n);
  for (const auto& [a, b] : edges) g.add_edge(a, b);
  return g;
}

EdgeSet inter_edges(const CausalGame& g) {
  const auto mg = build_mechanised_graph(g);
  return EdgeSet(mg.inter_edges.begin(), mg.inter_edges.end());
}

}  // namespace

TEST_CASE("chains, forks and colliders") {
  const auto chain = make_graph({"A", "B", "C"}, {{"A", "B"}, {"B", "C"}});
  CHECK_FALSE(d_separated(chain, {"A"}, {"C"}, {}));
  CHECK(d_separated(chain, {"A"}, {"C"}, {"B"}));

  const auto fork = make_graph({"A", "B", "C"}, {{"B", "A"}, {"B", "C"}});
  CHECK_FALSE(d_separated(fork, {"A"}, {"C"}, {}));
  CHECK(d_separated(fork, {"A"}, {"C"}, {"B"}));

  const auto collider = make_graph({"A", "B", "C", "D"}, {{"A", "B"}, {"C", "B"}, {"B", "D"}});
  CHECK(d_separated(collider, {"A"}, {"C"}, {}));
  CHECK_FALSE(d_separated(collider, {"A"}, {"C"}, {"B"}));
  CHECK_FALSE(d_separated(collider, {"A"}, {"C"}, {"D"}));
}

TEST_CASE("d-separation argument checks") {
  const auto g = make_graph({"A", "B"}, {{"A", "B"}});
  CHECK_THROWS_AS(d_separated(g, {"A"}, {"A"}, {}), Error);
  CHECK_THROWS_AS(d_separated(g, {"A"}, {"Z"}, {}), Error);
}

TEST_CASE("cyclic graphs use path enumeration") {
  const auto g = make_graph({"A", "B", "C", "W"}, {{"A", "B"}, {"B", "A"}, {"C", "A"}});
  CHECK_FALSE(g.is_acyclic());
  CHECK(d_separated(g, {"W"}, {"A"}, {}));
  CHECK_FALSE(d_separated(g, {"C"}, {"B"}, {}));
  CHECK_FALSE(d_separated(g, {"C"}, {"B"}, {"A"}));
}

TEST_CASE("active paths agree with d-separation on random DAGs") {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    const CausalGame game = random_game(rng, {2, 5, true, 3});
    const DiGraph g = object_graph(game);
    const auto& nodes = g.nodes();
    for (const auto& x : nodes)
      for (const auto& z : nodes) {
        if (x == z) continue;
        for (const auto& y : nodes) {
          if (y == x || y == z) continue;
          CHECK(d_separated(g, {x}, {z}, {y}) == active_paths(g, {x}, {z}, {y}).empty());
        }
        CHECK(d_separated(g, {x}, {z}, {}) == active_paths(g, {x}, {z}, {}).empty());
      }
  }
}

TEST_CASE("d-separation never claims a numerically visible dependence") {
  std::mt19937_64 rng(2024);
  std::size_t claims = 0, connected = 0, detected = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const CausalGame game = random_game(rng, {2, 5, true, 3});
    const DiGraph g = object_graph(game);
    const auto joint = oracle_joint(game, {});
    const auto& vars = game.variables();
    const std::size_t n = vars.size();
    for (std::size_t x = 0; x < n; ++x)
      for (std::size_t z = x + 1; z < n; ++z)
        for (std::size_t mask = 0; mask < (std::size_t{1} << n); ++mask) {
          if (mask & ((std::size_t{1} << x) | (std::size_t{1} << z))) continue;
          std::vector<std::size_t> ys;
          NodeSet yset;
          for (std::size_t k = 0; k < n; ++k)
            if (mask & (std::size_t{1} << k)) {
              ys.push_back(k);
              yset.insert(vars[k].name);
            }
          // Largest |P(x,z,y)P(y) - P(x,y)P(z,y)| over all values.
          double gap = 0.0;
          std::size_t ycount = 1;
          for (auto k : ys) ycount *= vars[k].cardinality();
          for (std::size_t yi = 0; yi < ycount; ++yi) {
            std::vector<std::pair<std::size_t, std::size_t>> yev;
            std::size_t rest = yi;
            for (auto k : ys) {
              yev.emplace_back(k, rest % vars[k].cardinality());
              rest /= vars[k].cardinality();
            }
            const double py = oracle_event(game, joint, yev);
            for (std::size_t xv = 0; xv < vars[x].cardinality(); ++xv)
              for (std::size_t zv = 0; zv < vars[z].cardinality(); ++zv) {
                auto xy = yev, zy = yev, xzy = yev;
                xy.emplace_back(x, xv);
                zy.emplace_back(z, zv);
                xzy.emplace_back(x, xv);
                xzy.emplace_back(z, zv);
                gap = std::max(gap, std::abs(oracle_event(game, joint, xzy) * py -
                                             oracle_event(game, joint, xy) * oracle_event(game, joint, zy)));
              }
          }
          if (d_separated(g, {vars[x].name}, {vars[z].name}, yset)) {
            ++claims;
            CHECK_MESSAGE(gap <= 1e-7, vars[x].name << " _|_ " << vars[z].name << " claimed, gap " << gap);
          } else {
            ++connected;
            if (gap > 1e-7) ++detected;
          }
        }
  }
  CHECK(claims > 100);
  // Random positive CPDs are faithful with probability one.
  CHECK(static_cast<double>(detected) >= 0.95 * static_cast<double>(connected));
}

TEST_CASE("job market mechanised graph") {
  const CausalGame g = load_fixture("job_market");
  const EdgeSet expected{{"THETA_T", "PI_D1"}, {"THETA_U1", "PI_D1"}, {"PI_D2", "PI_D1"},
                         {"THETA_T", "PI_D2"}, {"THETA_U2", "PI_D2"}, {"PI_D1", "PI_D2"}};
  CHECK(inter_edges(g) == expected);
  CHECK(r_relevant(g, "THETA_T", "PI_D2"));
  CHECK_FALSE(r_relevant(g, "THETA_U1", "PI_D2"));
  CHECK_FALSE(r_relevant(g, "THETA_U2", "PI_D1"));

  const auto mg = build_mechanised_graph(g);
  CHECK(mg.graph.has_edge("THETA_T", "T"));
  CHECK(mg.graph.has_edge("PI_D1", "D1"));
  CHECK_FALSE(mg.independent.has_edge("PI_D2", "PI_D1"));
  CHECK_FALSE(mg.graph.is_acyclic());
}

TEST_CASE("job market after fixing the worker's decision") {
  const CausalGame g = load_fixture("job_market");
  const CausalGame after = apply_primitive(g, make_do(g, "D1", "g"));
  const EdgeSet expected{{"THETA_T", "PI_D1"}, {"THETA_U1", "PI_D1"}, {"PI_D2", "PI_D1"},
                         {"THETA_T", "PI_D2"}, {"THETA_U2", "PI_D2"}};
  CHECK(inter_edges(after) == expected);
  CHECK_FALSE(independent_mechanised_graph(after).has_edge("PI_D1", "D1"));
}

TEST_CASE("stackelberg mechanised graph before and after commitment") {
  const CausalGame g = load_fixture("stackelberg");
  const EdgeSet before{{"PI_D2", "PI_D1"}, {"THETA_U1", "PI_D1"}, {"PI_D1", "PI_D2"}, {"THETA_U2", "PI_D2"}};
  CHECK(inter_edges(g) == before);
  const CausalGame committed = apply_primitive(g, make_commit(constant_rule(g, "D1", 1)));
  const EdgeSet after{{"PI_D1", "PI_D2"}, {"THETA_U2", "PI_D2"}};
  CHECK(inter_edges(committed) == after);
}

TEST_CASE("reachability paths witness relevance") {
  const CausalGame g = load_fixture("job_market");
  for (const auto& m : mechanism_nodes(g))
    for (const auto& target : {"PI_D1", "PI_D2"}) {
      if (m == target) continue;
      CHECK(r_relevant(g, m, target) == !reachability_paths(g, m, target).empty());
    }
  const auto paths = reachability_paths(g, "PI_D1", "PI_D2");
  REQUIRE(paths.size() == 2);
  CHECK(paths[0].to_string() == "PI_D1 -> D1 <- T -> U2");
  CHECK(paths[0].conditioning == std::vector<std::string>{"D1", "D2"});
  CHECK(paths[1].to_string() == "PI_D1 -> D1");
  CHECK(paths[1].conditioning.empty());
  for (const auto& p : paths) {
    const auto es = p.edges();
    CHECK(es.size() == p.nodes.size() - 1);
  }
}

TEST_CASE("mechanism node names") {
  const CausalGame g = load_fixture("job_market");
  CHECK(mechanism_node(g, "D1") == "PI_D1");
  CHECK(mechanism_node(g, "T") == "THETA_T");
  CHECK(mechanism_variable("THETA_U2") == "U2");
  CHECK(is_mechanism_node("PI_D2"));
  CHECK_FALSE(is_mechanism_node("D2"));
  CHECK(mechanism_nodes(g).size() == g.variables().size());
}
