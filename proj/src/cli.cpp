#include "cgame/cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <optional>
#include <sstream>

#include "cgame/equilibrium.hpp"
#include "cgame/graph.hpp"
#include "cgame/interventions.hpp"
#include "cgame/io.hpp"
#include "cgame/query.hpp"
#include "util.hpp"

namespace cgame {

namespace {

using json = nlohmann::ordered_json;

constexpr int kSchemaVersion = 1;

struct Common {
  bool json = false;
  double epsilon = kEquilibriumEpsilon;
  std::vector<std::string> params;
};

ParamMap param_map(const std::vector<std::string>& items) {
  ParamMap out;
  for (const auto& item : items) {
    const auto eq = item.find('=');
    auto v = eq == std::string::npos ? std::nullopt : parse_number(trim(item.substr(eq + 1)));
    if (!v) throw CLI::ValidationError("--param", "expected NAME=VALUE, got '" + item + "'");
    out[std::string(trim(item.substr(0, eq)))] = *v;
  }
  return out;
}

std::string context_text(const CausalGame& game, const TabularCpd& t, std::size_t row) {
  const auto ctx = t.row_context(row);
  std::vector<std::string> parts;
  for (std::size_t k = 0; k < ctx.size(); ++k)
    parts.push_back(t.parents()[k] + "=" + game.variable(t.parents()[k]).domain[ctx[k]]);
  return join(parts, ",");
}

std::string rule_text(const CausalGame& game, const TabularCpd& rule) {
  const Variable& v = game.variable(rule.variable());
  std::vector<std::string> rows;
  for (std::size_t r = 0; r < rule.rows(); ++r) {
    const auto row = rule.row(r);
    std::string dist;
    auto one = std::find_if(row.begin(), row.end(), [](double x) { return std::abs(x - 1.0) <= kProbEpsilon; });
    if (one != row.end()) {
      dist = v.domain[static_cast<std::size_t>(one - row.begin())];
    } else {
      std::vector<std::string> xs;
      for (std::size_t k = 0; k < row.size(); ++k)
        if (row[k] != 0.0) xs.push_back(v.domain[k] + " " + format_number(row[k]));
      dist = join(xs, ", ");
    }
    const std::string ctx = context_text(game, rule, r);
    rows.push_back(ctx.empty() ? dist : ctx + ": " + dist);
  }
  return join(rows, "; ");
}

json rule_json(const CausalGame& game, const TabularCpd& rule) {
  const Variable& v = game.variable(rule.variable());
  json out = json::object();
  for (std::size_t r = 0; r < rule.rows(); ++r) {
    json dist = json::object();
    for (std::size_t k = 0; k < rule.card(); ++k) dist[v.domain[k]] = rule.prob(r, k);
    out[context_text(game, rule, r)] = dist;
  }
  return out;
}

json profile_json(const CausalGame& game, const PolicyProfile& p) {
  json out = json::object();
  for (const auto& v : game.variables())
    if (p.contains(v.name)) out[v.name] = rule_json(game, p.at(v.name));
  return out;
}

void print_profile(std::ostream& out, const CausalGame& game, const PolicyProfile& p, const std::string& indent) {
  for (const auto& v : game.variables())
    if (p.contains(v.name)) out << indent << v.name << ": " << rule_text(game, p.at(v.name)) << "\n";
}

std::string utilities_text(const std::vector<double>& u) {
  std::vector<std::string> xs;
  for (std::size_t a = 1; a < u.size(); ++a) xs.push_back(format_number(u[a]));
  return "(" + join(xs, ", ") + ")";
}

json utilities_json(const std::vector<double>& u) { return json(std::vector<double>(u.begin() + 1, u.end())); }

json header(const std::string& command) { return json{{"schema_version", kSchemaVersion}, {"command", command}}; }

json edges_json(const std::vector<std::pair<std::string, std::string>>& edges) {
  json out = json::array();
  for (const auto& [a, b] : edges) out.push_back(json::array({a, b}));
  return out;
}

// Resolves intervention lines against the running game.
CompoundIntervention resolve_interventions(const CausalGame& game, const std::vector<std::string>& lines,
                                           CausalGame* final_game = nullptr) {
  InterventionRunner runner(game);
  CompoundIntervention out;
  for (std::size_t k = 0; k < lines.size(); ++k) {
    const std::string label = "i" + std::to_string(k + 1);
    auto spec = parse_intervention(lines[k], runner.game());
    if (auto* u = std::get_if<UnfixSpec>(&spec)) {
      auto v = parse_number(u->label.substr(u->label.starts_with("i") ? 1 : 0));
      if (!v) throw Error("unfix takes the position of an earlier intervention, e.g. 'unfix i1'");
      spec = UnfixSpec{"i" + format_number(*v)};
    }
    PrimitiveIntervention p = runner.apply({label, spec});
    out.push_back(PrimitiveIntervention{p.payload, {}});
  }
  if (final_game) *final_game = runner.game();
  return out;
}

int cmd_validate(const Common& c, const std::string& ref, std::ostream& out) {
  const CausalGame g = resolve_game(ref, param_map(c.params));
  if (c.json) {
    json j = header("validate");
    j["game"] = g.name();
    j["valid"] = true;
    j["agents"] = g.agents();
    json vars = json::array();
    for (const auto& v : g.variables()) vars.push_back(v.name);
    j["variables"] = vars;
    out << j.dump(2) << "\n";
  } else {
    out << "ok: " << (g.name().empty() ? ref : g.name()) << " (" << g.agents() << " agents, " << g.variables().size()
        << " variables)\n";
  }
  return kExitOk;
}

int cmd_solve(const Common& c, const std::string& ref, bool behavioral, std::ostream& out) {
  const CausalGame g = resolve_game(ref, param_map(c.params));
  const auto ne = pure_nash(g, c.epsilon);
  std::optional<BehavioralNashResult> beh;
  if (behavioral) beh = behavioral_nash_small(g, c.epsilon);
  if (c.json) {
    json j = header("solve");
    j["game"] = g.name();
    json eqs = json::array();
    for (const auto& p : ne.outcomes)
      eqs.push_back(json{{"rules", profile_json(g, p)}, {"utilities", utilities_json(expected_utilities(g, p))}});
    j["pure_equilibria"] = eqs;
    if (beh) {
      json params = json::array();
      for (const auto& p : beh->params) params.push_back(p.label);
      json fams = json::array();
      for (const auto& f : beh->families)
        fams.push_back(json{{"lower", f.lower}, {"upper", f.upper}, {"extreme_points", f.extreme_points}});
      j["behavioral"] = json{{"parameters", params}, {"families", fams}};
    }
    out << j.dump(2) << "\n";
    return kExitOk;
  }
  out << "pure equilibria: " << ne.outcomes.size() << "\n";
  for (std::size_t k = 0; k < ne.outcomes.size(); ++k) {
    out << "#" << k + 1 << " utilities " << utilities_text(expected_utilities(g, ne.outcomes[k])) << "\n";
    print_profile(out, g, ne.outcomes[k], "  ");
  }
  if (beh) {
    std::vector<std::string> labels;
    for (const auto& p : beh->params) labels.push_back(p.label);
    out << "behavioral families: " << beh->families.size() << " over [" << join(labels, ", ") << "]\n";
    for (std::size_t k = 0; k < beh->families.size(); ++k) {
      const auto& f = beh->families[k];
      out << "family " << k + 1 << ":";
      for (std::size_t i = 0; i < f.lower.size(); ++i)
        out << " " << (f.lower[i] == f.upper[i] ? format_number(f.lower[i])
                                                : "[" + format_number(f.lower[i]) + ", " + format_number(f.upper[i]) + "]");
      out << "\n";
    }
  }
  return kExitOk;
}

int cmd_mech_graph(const Common& c, const std::string& ref, const std::vector<std::string>& interventions,
                   const std::string& format, const std::string& which, std::ostream& out) {
  CausalGame g = resolve_game(ref, param_map(c.params));
  if (!interventions.empty()) resolve_interventions(g, interventions, &g);
  if (format == "dot") {
    const GraphKind kind = which == "object"        ? GraphKind::object
                           : which == "independent" ? GraphKind::independent_mechanised
                                                    : GraphKind::mechanised;
    out << export_dot(g, kind);
    return kExitOk;
  }
  const auto mg = build_mechanised_graph(g);
  if (c.json) {
    json j = header("mech-graph");
    j["game"] = g.name();
    j["inter_mechanism_edges"] = edges_json(mg.inter_edges);
    out << j.dump(2) << "\n";
  } else {
    for (const auto& [a, b] : mg.inter_edges) out << a << " -> " << b << "\n";
  }
  return kExitOk;
}

int cmd_intervene(const Common& c, const std::string& ref, const std::vector<std::string>& interventions,
                  std::ostream& out) {
  const CausalGame g = resolve_game(ref, param_map(c.params));
  CausalGame after;
  const auto ps = resolve_interventions(g, interventions, &after);
  if (c.json) {
    json j = header("intervene");
    json applied = json::array();
    for (const auto& p : ps) applied.push_back(p.describe());
    j["applied"] = applied;
    j["game"] = serialize_game(after);
    out << j.dump(2) << "\n";
  } else {
    out << serialize_game(after);
  }
  return kExitOk;
}

int cmd_side_effects(const Common& c, const std::string& ref, const std::string& intervention, std::ostream& out) {
  const CausalGame g = resolve_game(ref, param_map(c.params));
  const auto ps = resolve_interventions(g, {intervention});
  const auto rep = side_effects(g, ps.front());
  if (c.json) {
    json j = header("side-effects");
    j["intervention"] = ps.front().describe();
    j["removed"] = edges_json(rep.removed);
    j["added"] = edges_json(rep.added);
    j["predicted_removed"] = edges_json(rep.predicted_removed);
    j["consistent"] = rep.consistent;
    out << j.dump(2) << "\n";
  } else {
    for (const auto& [a, b] : rep.removed) out << "removed " << a << " -> " << b << "\n";
    for (const auto& [a, b] : rep.added) out << "added " << a << " -> " << b << "\n";
    for (const auto& [a, b] : rep.predicted_removed) out << "predicted " << a << " -> " << b << "\n";
    out << "consistent " << (rep.consistent ? "yes" : "no") << "\n";
  }
  return kExitOk;
}

int cmd_min_set(const Common& c, const std::string& ref, const std::string& from, const std::string& to,
                std::ostream& out) {
  const CausalGame g = resolve_game(ref, param_map(c.params));
  const auto set = minimum_intervention_set(g, from, to);
  const auto paths = reachability_paths(g, from, to);
  const auto reqs = hitting_requirements(g, from, to);
  if (c.json) {
    json j = header("min-set");
    j["from"] = from;
    j["to"] = to;
    j["set"] = set;
    json ps = json::array();
    for (std::size_t k = 0; k < paths.size(); ++k)
      ps.push_back(json{{"path", paths[k].to_string()}, {"conditioning", paths[k].conditioning}, {"requires", reqs[k]}});
    j["paths"] = ps;
    out << j.dump(2) << "\n";
  } else {
    out << "{" << join(set, ", ") << "}\n";
    for (std::size_t k = 0; k < paths.size(); ++k)
      out << "  " << paths[k].to_string() << " | given {" << join(paths[k].conditioning, ", ") << "} needs {"
          << join(reqs[k], ", ") << "}\n";
  }
  return kExitOk;
}

int cmd_invariant(const Common& c, const std::string& ref, const std::vector<std::string>& interventions,
                  std::ostream& out) {
  const CausalGame g = resolve_game(ref, param_map(c.params));
  const auto ps = resolve_interventions(g, interventions);
  const auto changes = incentive_changes(g, ps);
  if (c.json) {
    json j = header("invariant");
    j["invariant"] = changes.empty();
    json cs = json::array();
    for (const auto& ch : changes)
      cs.push_back(json{{"mechanism", ch.mech}, {"target", ch.target}, {"before", ch.before}, {"after", ch.after}});
    j["changes"] = cs;
    out << j.dump(2) << "\n";
  } else {
    out << "invariant " << (changes.empty() ? "yes" : "no") << "\n";
    for (const auto& ch : changes)
      out << "  " << ch.mech << " -> " << ch.target << ": " << (ch.before ? "relevant" : "irrelevant") << " -> "
          << (ch.after ? "relevant" : "irrelevant") << "\n";
  }
  return kExitOk;
}

int cmd_query(const Common& c, const std::string& path, std::optional<std::uint64_t> seed,
              const std::vector<std::string>& extra, std::ostream& out) {
  const Scenario sc = load_scenario(path, param_map(c.params));
  std::vector<std::string> queries = extra.empty() ? sc.queries : extra;
  if (queries.empty()) throw Error("no query given");
  json results = json::array();
  for (const auto& text : queries) {
    QueryJob job;
    job.game = sc.game;
    job.interventions = sc.interventions;
    job.visibility = sc.visibility;
    job.decompose_options.agent_order = sc.order;
    job.stages = sc.stages;
    job.query = parse_query(text);
    job.seed = seed.value_or(sc.seed.value_or(0));
    job.equilibrium_epsilon = c.epsilon;
    const QueryResult r = evaluate_query(job);
    const Decomposition d = sc.stages ? explicit_stages(sc.game, sc.interventions, *sc.stages)
                                      : decompose(sc.game, sc.interventions, sc.visibility, job.decompose_options);
    const auto tags = classify_visibility(sc.interventions, d);

    if (c.json) {
      json jr{{"query", job.query.to_string()}, {"seed", job.seed}};
      if (r.verdict) jr["verdict"] = *r.verdict;
      if (r.value) jr["value"] = *r.value;
      json stages = json::array();
      for (const auto& t : r.trace) {
        json js{{"stage", t.index}, {"agents", t.agents}, {"steps", t.steps}, {"primitives", t.primitives},
                {"overridden", t.overridden}, {"still_choosing", t.still_choosing}, {"outcomes", t.outcomes},
                {"candidates", t.candidates.size()}};
        if (t.chosen) js["chosen"] = *t.chosen;
        stages.push_back(js);
      }
      jr["stages"] = stages;
      json leaves = json::array();
      for (const auto& l : r.leaves) {
        json jl{{"choices", l.choices}, {"rules", profile_json(r.final_game, l.profile)},
                {"utilities", utilities_json(l.utilities)}};
        if (l.verdict) jl["verdict"] = *l.verdict;
        if (l.value) jl["value"] = *l.value;
        leaves.push_back(jl);
      }
      jr["leaves"] = leaves;
      json jt = json::object();
      for (const auto& [a, tag] : tags) jt[std::to_string(a)] = to_string(tag);
      jr["visibility"] = jt;
      results.push_back(jr);
      continue;
    }
    out << "query " << job.query.to_string() << "\n";
    for (const auto& t : r.trace) {
      std::vector<std::string> agents;
      for (int a : t.agents) agents.push_back(std::to_string(a));
      out << "  stage " << t.index << " agents {" << join(agents, ", ") << "} steps [" << join(t.steps, ", ")
          << "] outcomes " << t.outcomes;
      if (t.chosen) out << " chosen " << *t.chosen;
      out << "\n";
    }
    for (const auto& [a, tag] : tags) out << "  agent " << a << " " << to_string(tag) << "\n";
    for (std::size_t k = 0; k < r.leaves.size(); ++k) {
      const auto& l = r.leaves[k];
      out << "  leaf " << k + 1 << " utilities " << utilities_text(l.utilities);
      if (l.verdict) out << " verdict " << (*l.verdict ? "true" : "false");
      if (l.value) out << " value " << format_number(*l.value);
      out << "\n";
      print_profile(out, r.final_game, l.profile, "    ");
    }
    if (r.verdict) out << "result " << (*r.verdict ? "true" : "false") << "\n";
    else if (r.value) out << "result " << format_number(*r.value) << "\n";
    else out << "result differs across outcomes\n";
  }
  if (c.json) {
    json j = header("query");
    j["scenario"] = path;
    j["results"] = results;
    out << j.dump(2) << "\n";
  }
  return kExitOk;
}

int cmd_commit(const Common& c, const std::string& ref, int leader, bool grid, double step, std::ostream& out) {
  const CausalGame g = resolve_game(ref, param_map(c.params));
  const auto res = optimal_commitment(g, leader, grid ? CommitmentMode::grid : CommitmentMode::exact, step, c.epsilon);
  if (c.json) {
    json j = header("commit");
    j["leader"] = leader;
    j["mode"] = grid ? "grid" : "exact";
    j["rule"] = rule_json(g, res.rule);
    j["leader_utility"] = res.leader_utility;
    j["response"] = profile_json(g, res.response);
    out << j.dump(2) << "\n";
  } else {
    out << "commit " << res.rule.variable() << ": " << rule_text(g, res.rule) << "\n";
    out << "leader utility " << format_number(res.leader_utility) << "\n";
    out << "response\n";
    print_profile(out, g, res.response, "  ");
  }
  return kExitOk;
}

}  // namespace

int cli_run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Causal game solver and intervention calculus", "cgame"};
  app.require_subcommand(1);
  Common c;
  app.add_flag("--json", c.json, "Machine-readable output");
  app.add_option("--epsilon", c.epsilon, "Tolerance for best-response comparisons")->check(CLI::NonNegativeNumber);
  app.add_option("--param", c.params, "Override a game parameter, NAME=VALUE")->allow_extra_args(false);

  std::string game, from, to, format = "edges", which = "mechanised", intervention;
  std::vector<std::string> interventions, queries;
  bool behavioral = false, grid = false;
  int leader = 1;
  double step = 1e-3;
  std::optional<std::uint64_t> seed;

  auto* validate = app.add_subcommand("validate", "Check a game file");
  validate->add_option("game", game, "Fixture name or game file")->required();

  auto* solve = app.add_subcommand("solve", "Enumerate rational outcomes");
  solve->add_option("game", game, "Fixture name or game file")->required();
  solve->add_flag("--behavioral", behavioral, "Also enumerate behavioral equilibria");

  auto* mech = app.add_subcommand("mech-graph", "Mechanised graph");
  mech->add_option("game", game, "Fixture name or game file")->required();
  mech->add_option("--intervention,-i", interventions, "Apply an intervention first (repeatable)");
  mech->add_option("--format", format, "edges or dot")->check(CLI::IsMember({"edges", "dot"}));
  mech->add_option("--graph", which, "Graph for dot output")->check(CLI::IsMember({"object", "mechanised", "independent"}));

  auto* intervene = app.add_subcommand("intervene", "Apply interventions and print the game");
  intervene->add_option("game", game, "Fixture name or game file")->required();
  intervene->add_option("interventions", interventions, "Interventions, e.g. 'do D1 = g'")->required();

  auto* side = app.add_subcommand("side-effects", "Mechanism-level side effects of an intervention");
  side->add_option("game", game, "Fixture name or game file")->required();
  side->add_option("intervention", intervention, "Intervention, e.g. 'do D1 = g'")->required();

  auto* minset = app.add_subcommand("min-set", "Minimum intervention set");
  minset->add_option("game", game, "Fixture name or game file")->required();
  minset->add_option("--from", from, "Mechanism node, e.g. PI_D1")->required();
  minset->add_option("--to", to, "Decision rule node, e.g. PI_D2")->required();

  auto* invariant = app.add_subcommand("invariant", "Incentive invariance of interventions");
  invariant->add_option("game", game, "Fixture name or game file")->required();
  invariant->add_option("interventions", interventions, "Interventions")->required();

  auto* query = app.add_subcommand("query", "Evaluate the queries of a scenario file");
  query->add_option("scenario", game, "Scenario file")->required();
  query->add_option("--seed", seed, "Seed for sampled queries");
  query->add_option("--query,-q", queries, "Query text replacing the scenario's queries");

  auto* commit = app.add_subcommand("commit", "Optimal commitment for a leader");
  commit->add_option("game", game, "Fixture name or game file")->required();
  commit->add_option("--leader", leader, "Leader agent")->check(CLI::PositiveNumber);
  commit->add_flag("--grid", grid, "Grid search instead of the exact solver");
  commit->add_option("--step", step, "Grid step")->check(CLI::PositiveNumber);

  for (auto* sub : app.get_subcommands({})) {
    sub->add_flag("--json", c.json, "Machine-readable output");
    sub->add_option("--epsilon", c.epsilon, "Tolerance for best-response comparisons")->check(CLI::NonNegativeNumber);
    sub->add_option("--param", c.params, "Override a game parameter, NAME=VALUE");
  }

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (validate->parsed()) return cmd_validate(c, game, out);
    if (solve->parsed()) return cmd_solve(c, game, behavioral, out);
    if (mech->parsed()) return cmd_mech_graph(c, game, interventions, format, which, out);
    if (intervene->parsed()) return cmd_intervene(c, game, interventions, out);
    if (side->parsed()) return cmd_side_effects(c, game, intervention, out);
    if (minset->parsed()) return cmd_min_set(c, game, from, to, out);
    if (invariant->parsed()) return cmd_invariant(c, game, interventions, out);
    if (query->parsed()) return cmd_query(c, game, seed, queries, out);
    if (commit->parsed()) return cmd_commit(c, game, leader, grid, step, out);
  } catch (const CLI::ValidationError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitDomainError;
  }
  return kExitUsage;
}

}  // namespace cgame
