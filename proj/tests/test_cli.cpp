#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "cgame/cli.hpp"
#include "cgame/io.hpp"
#include "test_support.hpp"
#include "json.hpp"

using namespace cgame;
using namespace cgame::testing;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out, err;
};

Run run(const std::vector<std::string>& args) {
  fs::current_path(CGAME_SOURCE_DIR);
  std::ostringstream out, err;
  const int code = cli_run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string read(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Compares against tests/golden/<name>.json; CGAME_UPDATE_GOLDEN=1 rewrites it.
void check_golden(const std::string& name, const std::vector<std::string>& args) {
  const Run r = run(args);
  REQUIRE_MESSAGE(r.code == kExitOk, name << ": " << r.err);
  const fs::path path = source_path("tests/golden/" + name + ".json");
  if (std::getenv("CGAME_UPDATE_GOLDEN")) {
    std::ofstream(path, std::ios::binary) << r.out;
    return;
  }
  REQUIRE_MESSAGE(fs::exists(path), path.string());
  CHECK_MESSAGE(r.out == read(path), name);
  const auto j = nlohmann::json::parse(r.out);
  CHECK(j.at("schema_version") == 1);
}

}  // namespace

TEST_CASE("golden json for every fixture") {
  for (const std::string name : {"job_market", "effortville", "prisoners_dilemma", "stackelberg"}) {
    check_golden("validate_" + name, {"validate", name, "--json"});
    check_golden("solve_" + name, {"solve", name, "--json"});
    check_golden("mech_graph_" + name, {"mech-graph", name, "--json"});
  }
  check_golden("solve_behavioral_job_market", {"solve", "job_market", "--behavioral", "--json"});
  check_golden("side_effects_job_market", {"side-effects", "job_market", "do D1 = g", "--json"});
  check_golden("min_set_job_market", {"min-set", "job_market", "--from", "PI_D1", "--to", "PI_D2", "--json"});
  check_golden("commit_stackelberg", {"commit", "stackelberg", "--leader", "1", "--json"});
  check_golden("invariant_job_market", {"invariant", "job_market", "do T = h", "--json"});
  for (const std::string s : {"rewards_hidden", "rewards_deceive", "commit_revealed", "commit_mixed", "effortville"})
    check_golden("query_" + s, {"query", "scenarios/" + s + ".scn", "--json"});
}

TEST_CASE("exit codes") {
  CHECK(run({"validate", "job_market"}).code == kExitOk);
  CHECK(run({}).code == kExitUsage);
  CHECK(run({"solve"}).code == kExitUsage);
  CHECK(run({"solve", "job_market", "--no-such-flag"}).code == kExitUsage);
  CHECK(run({"solve", "job_market", "--param", "p"}).code == kExitUsage);
  CHECK(run({"--help"}).code == kExitOk);

  const Run missing = run({"solve", "no_such_game"});
  CHECK(missing.code == kExitDomainError);
  CHECK_FALSE(missing.err.empty());
  CHECK(run({"side-effects", "job_market", "do T = x"}).code == kExitDomainError);
  CHECK(run({"min-set", "job_market", "--from", "THETA_U1", "--to", "PI_D2"}).code == kExitDomainError);
  CHECK(run({"solve", "job_market", "--param", "q=1"}).code == kExitDomainError);
}

TEST_CASE("parameters change the solved game") {
  const Run r = run({"solve", "job_market", "--param", "p=0.9", "--json"});
  REQUIRE(r.code == kExitOk);
  const auto j = nlohmann::json::parse(r.out);
  CHECK(j.at("pure_equilibria").size() >= 1);
  CHECK(r.out != run({"solve", "job_market", "--json"}).out);
}

TEST_CASE("interventions on the command line") {
  const Run r = run({"intervene", "job_market", "do D1 = g", "unfix i1"});
  REQUIRE(r.code == kExitOk);
  CHECK(r.out == serialize_game(load_fixture("job_market")));

  const Run dot = run({"mech-graph", "job_market", "-i", "do D1 = g", "--format", "dot"});
  REQUIRE(dot.code == kExitOk);
  CHECK(dot.out.rfind("digraph", 0) == 0);
  CHECK(dot.out.find("\"PI_D1\" -> \"PI_D2\"") == std::string::npos);
}

TEST_CASE("queries from the command line") {
  const Run r = run({"query", "scenarios/effortville.scn", "-q", "forall ne: P(D2=j) = 1", "--json"});
  REQUIRE(r.code == kExitOk);
  const auto j = nlohmann::json::parse(r.out);
  CHECK(j.at("results").at(0).at("verdict") == true);
  CHECK(run({"query", "scenarios/effortville.scn", "-q", "forall ne: P(D2=) = 1"}).code == kExitDomainError);

  const auto a = run({"query", "scenarios/rewards_hidden.scn", "--seed", "5", "--json"});
  const auto b = run({"query", "scenarios/rewards_hidden.scn", "--seed", "5", "--json"});
  CHECK(a.out == b.out);
}
