#include "cgame/interventions.hpp"

#include <algorithm>
#include <functional>
#include <memory>
#include <numeric>
#include <set>

#include "util.hpp"

namespace cgame {

const char* to_string(PrimitiveKind kind) {
  switch (kind) {
    case PrimitiveKind::fix_object: return "fix_object";
    case PrimitiveKind::fix_mechanism: return "fix_mechanism";
    case PrimitiveKind::add_variable: return "add_var";
    case PrimitiveKind::remove_variable: return "remove_var";
  }
  return "?";
}

const std::string& PrimitiveIntervention::target() const {
  return std::visit(
      [](const auto& p) -> const std::string& {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, AddVariable>) return p.variable.name;
        else return p.target;
      },
      payload);
}

namespace {

std::string table_text(const TabularCpd& t) {
  std::vector<std::string> rows;
  for (std::size_t r = 0; r < t.rows(); ++r) {
    std::vector<std::string> xs;
    for (double x : t.row(r)) xs.push_back(format_number(x));
    rows.push_back(join(xs, " "));
  }
  return "[" + join(rows, " | ") + "]";
}

}  // namespace

std::string PrimitiveIntervention::describe() const {
  return std::visit(
      [](const auto& p) -> std::string {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, FixObject>) {
          std::string s = "fix_object " + p.target + " | " + join(p.parents, ",");
          return p.cpd ? s + " := " + table_text(*p.cpd) : s + " := decision";
        } else if constexpr (std::is_same_v<T, FixMechanism>) {
          if (!p.cpd) return "fix_mechanism " + p.target + " := best_response";
          return "fix_mechanism " + p.target + " := " + table_text(*p.cpd);
        } else if constexpr (std::is_same_v<T, AddVariable>) {
          return "add_var " + p.variable.name + " | " + join(p.parents, ",");
        } else {
          return "remove_var " + p.target;
        }
      },
      payload);
}

// ---------------------------------------------------------------------------
// Table helpers

TabularCpd add_parent_duplicated(const TabularCpd& cpd, const std::string& parent, std::size_t parent_card) {
  auto parents = cpd.parents();
  auto cards = cpd.parent_cards();
  parents.push_back(parent);
  cards.push_back(parent_card);
  std::vector<double> values;
  values.reserve(cpd.values().size() * parent_card);
  for (std::size_t r = 0; r < cpd.rows(); ++r)
    for (std::size_t k = 0; k < parent_card; ++k)
      for (double x : cpd.row(r)) values.push_back(x);
  return TabularCpd(cpd.variable(), cpd.card(), std::move(parents), std::move(cards), std::move(values));
}

namespace {

using Context = std::map<std::string, std::size_t>;
using Weights = std::function<std::vector<double>(const Context&)>;

// Integrates `dropped` out of `t`; the result has parents `order` (t's
// parents minus `dropped`, in any order).
TabularCpd marginalise(const CausalGame& game, const TabularCpd& t, const std::string& dropped,
                       const std::vector<std::string>& order, const Weights& weights) {
  std::vector<std::size_t> cards;
  for (const auto& p : order) cards.push_back(game.cardinality(p));
  TabularCpd out(t.variable(), t.card(), order, cards,
                 std::vector<double>(t.card() * std::accumulate(cards.begin(), cards.end(), std::size_t{1},
                                                                std::multiplies<>()),
                                     0.0));
  const std::size_t dcard = game.cardinality(dropped);
  std::vector<std::size_t> old_ctx(t.parents().size());
  for (std::size_t r = 0; r < out.rows(); ++r) {
    const auto ctx = out.row_context(r);
    Context named;
    for (std::size_t k = 0; k < order.size(); ++k) named[order[k]] = ctx[k];
    const auto w = weights(named);
    for (std::size_t y = 0; y < dcard; ++y) {
      if (w[y] == 0.0) continue;
      named[dropped] = y;
      for (std::size_t k = 0; k < t.parents().size(); ++k) old_ctx[k] = named.at(t.parents()[k]);
      const auto src = t.row(t.row_index(old_ctx));
      for (std::size_t v = 0; v < t.card(); ++v) out.at(r, v) += w[y] * src[v];
    }
  }
  return out;
}

// Rows of `t` with `parent` held at value `value`.
TabularCpd slice(const CausalGame& game, const TabularCpd& t, const std::string& parent, std::size_t value) {
  std::vector<std::string> order;
  for (const auto& p : t.parents())
    if (p != parent) order.push_back(p);
  const std::size_t card = game.cardinality(parent);
  return marginalise(game, t, parent, order, [card, value](const Context&) {
    std::vector<double> w(card, 0.0);
    w[value] = 1.0;
    return w;
  });
}

// The distribution governing a variable if it has one: cpd, object-level
// table, or committed rule.
const TabularCpd* governing_table(const CausalGame& game, const std::string& v) {
  if (auto it = game.cpds().find(v); it != game.cpds().end()) return &it->second;
  if (auto it = game.object_fixed().find(v); it != game.object_fixed().end()) return &it->second;
  if (auto it = game.commitments().find(v); it != game.commitments().end()) return &it->second;
  return nullptr;
}

Weights weights_from(const CausalGame& game, const std::string& var, const std::string& child) {
  const TabularCpd* t = governing_table(game, var);
  if (!t)
    throw Error("cannot integrate free decision " + var + " out of " + child + "; give a replacement distribution");
  return [t](const Context& ctx) {
    std::vector<std::size_t> pa;
    for (const auto& p : t->parents()) {
      auto it = ctx.find(p);
      if (it == ctx.end()) throw Error("internal error: missing context for " + p);
      pa.push_back(it->second);
    }
    auto row = t->row(t->row_index(pa));
    return std::vector<double>(row.begin(), row.end());
  };
}

void require_parents_cover(const CausalGame& game, const std::string& var, const std::vector<std::string>& remaining,
                           const std::string& child) {
  const TabularCpd* t = governing_table(game, var);
  if (!t) return;
  for (const auto& p : t->parents())
    if (std::find(remaining.begin(), remaining.end(), p) == remaining.end())
      throw Error("cannot integrate " + var + " out of " + child + ": " + var + " depends on " + p +
                  ", which is not a parent of " + child + "; give a replacement distribution");
}

bool same_set(std::vector<std::string> a, std::vector<std::string> b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  return a == b;
}

TabularCpd aligned(const TabularCpd& t, const std::string& var, const std::vector<std::string>& parents,
                   const CausalGame& game) {
  if (t.variable() != var) throw Error("table is for " + t.variable() + ", expected " + var);
  if (!same_set(t.parents(), parents))
    throw Error("table for " + var + " is over [" + join(t.parents(), ",") + "], expected [" + join(parents, ",") + "]");
  TabularCpd r = t.reordered(parents);
  if (r.card() != game.cardinality(var)) throw Error("table for " + var + " has the wrong cardinality");
  for (std::size_t k = 0; k < parents.size(); ++k)
    if (r.parent_cards()[k] != game.cardinality(parents[k]))
      throw Error("table for " + var + " has the wrong cardinality for parent " + parents[k]);
  return r;
}

void check_parents_exist(const CausalGame& game, const std::string& v, const std::vector<std::string>& parents) {
  std::set<std::string> seen;
  for (const auto& p : parents) {
    if (!game.has_variable(p)) throw Error("unknown parent " + p + " for " + v);
    if (p == v) throw Error(v + " cannot be its own parent");
    if (!seen.insert(p).second) throw Error("repeated parent " + p + " for " + v);
  }
}

// ---------------------------------------------------------------------------
// Primitive application

Primitive apply_fix_object(CausalGame& game, const FixObject& f) {
  const Variable& v = game.variable(f.target);
  check_parents_exist(game, f.target, f.parents);
  const auto old_parents = game.parents(f.target);
  if (v.kind != VarKind::decision) {
    if (!f.cpd) throw Error("fix_object on " + f.target + " needs a distribution");
    FixObject journal{f.target, old_parents, game.cpd(f.target)};
    TabularCpd t = aligned(*f.cpd, f.target, f.parents, game);
    game.set_parents(f.target, f.parents);
    game.set_cpd(std::move(t));
    return journal;
  }
  FixObject journal{f.target, old_parents, std::nullopt};
  if (auto it = game.object_fixed().find(f.target); it != game.object_fixed().end()) journal.cpd = it->second;
  if (f.cpd) {
    TabularCpd t = aligned(*f.cpd, f.target, f.parents, game);
    game.set_parents(f.target, f.parents);
    game.set_object_fixed(std::move(t));
  } else {
    if (auto it = game.commitments().find(f.target);
        it != game.commitments().end() && !same_set(it->second.parents(), f.parents))
      throw Error("decision " + f.target + " has a committed rule over different parents; release it first");
    game.set_parents(f.target, f.parents);
    game.clear_object_fixed(f.target);
    if (auto it = game.commitments().find(f.target); it != game.commitments().end())
      game.set_commitment(it->second.reordered(f.parents));
  }
  return journal;
}

Primitive apply_fix_mechanism(CausalGame& game, const FixMechanism& f) {
  const Variable& v = game.variable(f.target);
  const auto& parents = game.parents(f.target);
  if (v.kind != VarKind::decision) {
    if (!f.cpd) throw Error("fix_mechanism on " + f.target + " needs parameters");
    if (!same_set(f.cpd->parents(), parents))
      throw Error("fix_mechanism cannot change the parents of " + f.target + "; use fix_object");
    FixMechanism journal{f.target, game.cpd(f.target)};
    game.set_cpd(aligned(*f.cpd, f.target, parents, game));
    return journal;
  }
  FixMechanism journal{f.target, std::nullopt};
  if (auto it = game.commitments().find(f.target); it != game.commitments().end()) journal.cpd = it->second;
  if (f.cpd) {
    if (!same_set(f.cpd->parents(), parents))
      throw Error("committed rule for " + f.target + " must be over its parents [" + join(parents, ",") + "]");
    game.set_commitment(aligned(*f.cpd, f.target, parents, game));
  } else {
    game.clear_commitment(f.target);
  }
  return journal;
}

// Current per-child state, for journals.
ChildSpec child_state(const CausalGame& game, const std::string& child) {
  ChildSpec s{child, game.parents(child), std::nullopt, std::nullopt};
  if (auto it = game.cpds().find(child); it != game.cpds().end()) s.cpd = it->second;
  if (auto it = game.object_fixed().find(child); it != game.object_fixed().end()) s.cpd = it->second;
  if (auto it = game.commitments().find(child); it != game.commitments().end()) s.commitment = it->second;
  return s;
}

const ChildSpec* find_spec(const std::vector<ChildSpec>& specs, const std::string& name) {
  for (const auto& s : specs)
    if (s.name == name) return &s;
  return nullptr;
}

Primitive apply_add_variable(CausalGame& game, const AddVariable& a) {
  const std::string& y = a.variable.name;
  if (game.has_variable(y)) throw Error("variable " + y + " already exists");
  check_parents_exist(game, y, a.parents);
  std::set<std::string> child_names;
  for (const auto& c : a.children) {
    if (!game.has_variable(c.name)) throw Error("unknown child " + c.name + " for " + y);
    if (!child_names.insert(c.name).second) throw Error("repeated child " + c.name);
    if (std::find(a.parents.begin(), a.parents.end(), c.name) != a.parents.end())
      throw Error(c.name + " cannot be both parent and child of " + y);
  }

  RemoveVariable journal{y, {}};
  for (const auto& c : a.children) journal.children.push_back(child_state(game, c.name));

  game.add_variable(a.variable, a.parents, a.position);
  if (a.variable.kind != VarKind::decision) {
    if (!a.cpd) throw Error("add_var " + y + " needs a distribution");
    if (a.commitment) throw Error("only decisions can carry a committed rule");
    game.set_cpd(aligned(*a.cpd, y, a.parents, game));
  } else {
    if (a.cpd) game.set_object_fixed(aligned(*a.cpd, y, a.parents, game));
    if (a.commitment) game.set_commitment(aligned(*a.commitment, y, a.parents, game));
  }

  const std::size_t ycard = a.variable.cardinality();
  for (const auto& c : a.children) {
    const auto old = child_state(game, c.name);
    auto parents = *old.parents;
    parents.push_back(y);
    if (c.parents) {
      if (!same_set(*c.parents, parents))
        throw Error("child " + c.name + " must keep its parents and gain " + y);
      parents = *c.parents;
    }
    auto extend = [&](const std::optional<TabularCpd>& given, const std::optional<TabularCpd>& current)
        -> std::optional<TabularCpd> {
      if (given) return aligned(*given, c.name, parents, game);
      if (current) return add_parent_duplicated(*current, y, ycard).reordered(parents);
      return std::nullopt;
    };
    game.set_parents(c.name, parents);
    if (game.variable(c.name).kind != VarKind::decision) {
      game.set_cpd(*extend(c.cpd, old.cpd));
    } else {
      if (auto t = extend(c.cpd, old.cpd)) game.set_object_fixed(std::move(*t));
      if (auto t = extend(c.commitment, old.commitment)) game.set_commitment(std::move(*t));
    }
  }
  return journal;
}

Primitive apply_remove_variable(CausalGame& game, const RemoveVariable& r) {
  const std::string& y = r.target;
  const Variable var = game.variable(y);
  const auto children = game.children(y);
  for (const auto& s : r.children)
    if (std::find(children.begin(), children.end(), s.name) == children.end())
      throw Error(s.name + " is not a child of " + y);

  AddVariable journal;
  journal.variable = var;
  journal.parents = game.parents(y);
  journal.position = game.position(y);
  if (const TabularCpd* t = governing_table(game, y); t && !game.commitments().count(y)) journal.cpd = *t;
  if (game.object_fixed().count(y)) journal.cpd = game.object_fixed().at(y);
  if (auto it = game.commitments().find(y); it != game.commitments().end()) journal.commitment = it->second;
  for (const auto& c : children) journal.children.push_back(child_state(game, c));

  // Compute every replacement before touching the game.
  struct Replacement {
    std::string child;
    std::vector<std::string> parents;
    std::optional<TabularCpd> table;
    std::optional<TabularCpd> commitment;
  };
  std::vector<Replacement> reps;
  for (const auto& c : children) {
    const auto old = child_state(game, c);
    const ChildSpec* spec = find_spec(r.children, c);
    std::vector<std::string> parents;
    for (const auto& p : *old.parents)
      if (p != y) parents.push_back(p);
    if (spec && spec->parents) {
      if (!same_set(*spec->parents, parents)) throw Error("child " + c + " must keep its other parents");
      parents = *spec->parents;
    }
    auto shrink = [&](const std::optional<TabularCpd>& given,
                      const std::optional<TabularCpd>& current) -> std::optional<TabularCpd> {
      if (given) return aligned(*given, c, parents, game);
      if (!current) return std::nullopt;
      require_parents_cover(game, y, parents, c);
      return marginalise(game, *current, y, parents, weights_from(game, y, c));
    };
    Replacement rep{c, parents, shrink(spec ? spec->cpd : std::nullopt, old.cpd), std::nullopt};
    if (game.variable(c).kind == VarKind::decision)
      rep.commitment = shrink(spec ? spec->commitment : std::nullopt, old.commitment);
    reps.push_back(std::move(rep));
  }

  for (auto& rep : reps) {
    game.set_parents(rep.child, rep.parents);
    if (game.variable(rep.child).kind != VarKind::decision) {
      game.set_cpd(std::move(*rep.table));
    } else {
      if (rep.table) game.set_object_fixed(std::move(*rep.table));
      else game.clear_object_fixed(rep.child);
      if (rep.commitment) game.set_commitment(std::move(*rep.commitment));
      else game.clear_commitment(rep.child);
    }
  }
  game.remove_variable(y);
  return journal;
}

}  // namespace

Applied apply_journaled(const CausalGame& game, const PrimitiveIntervention& p) {
  CausalGame out = game;
  Primitive journal = std::visit(
      [&](const auto& payload) -> Primitive {
        using T = std::decay_t<decltype(payload)>;
        if constexpr (std::is_same_v<T, FixObject>) return apply_fix_object(out, payload);
        else if constexpr (std::is_same_v<T, FixMechanism>) return apply_fix_mechanism(out, payload);
        else if constexpr (std::is_same_v<T, AddVariable>) return apply_add_variable(out, payload);
        else return apply_remove_variable(out, payload);
      },
      p.payload);
  auto report = validate_game(out);
  if (!report.empty()) {
    std::string msg = "intervention " + p.describe() + " leaves an invalid game:";
    for (const auto& v : report) msg += "\n  " + v.subject + ": " + v.message;
    throw Error(msg);
  }
  return Applied{std::move(out), PrimitiveIntervention{p.payload, std::move(journal)}};
}

CausalGame apply_primitive(const CausalGame& game, const PrimitiveIntervention& p) {
  return apply_journaled(game, p).game;
}

PrimitiveIntervention invert(const PrimitiveIntervention& p) {
  if (!p.journal) throw Error("cannot invert " + p.describe() + ": it has not been applied");
  return PrimitiveIntervention{*p.journal, std::nullopt};
}

AppliedCompound apply_compound(const CausalGame& game, const CompoundIntervention& ps) {
  AppliedCompound out{game, {}};
  for (const auto& p : ps) {
    auto applied = apply_journaled(out.game, p);
    out.game = std::move(applied.game);
    out.primitives.push_back(std::move(applied.primitive));
  }
  return out;
}

CompoundIntervention invert(const CompoundIntervention& ps) {
  CompoundIntervention out;
  for (auto it = ps.rbegin(); it != ps.rend(); ++it) out.push_back(invert(*it));
  return out;
}

PrimitiveIntervention make_do(const CausalGame& game, const std::string& variable, const std::string& value) {
  const std::size_t v = game.value_index(variable, value);
  return PrimitiveIntervention{FixObject{variable, {}, TabularCpd::delta(variable, game.cardinality(variable), v)}, {}};
}

PrimitiveIntervention make_fix_parameters(const TabularCpd& cpd) {
  return PrimitiveIntervention{FixMechanism{cpd.variable(), cpd}, {}};
}

PrimitiveIntervention make_commit(const DecisionRule& rule) {
  return PrimitiveIntervention{FixMechanism{rule.variable(), rule}, {}};
}

PrimitiveIntervention make_release(const std::string& decision) {
  return PrimitiveIntervention{FixMechanism{decision, std::nullopt}, {}};
}

PrimitiveIntervention add_edge(const CausalGame& game, const std::string& from, const std::string& to) {
  if (!game.has_variable(from)) throw Error("unknown variable " + from);
  auto parents = game.parents(to);
  if (std::find(parents.begin(), parents.end(), from) != parents.end())
    throw Error("edge " + from + " -> " + to + " already exists");
  const std::size_t card = game.cardinality(from);
  parents.push_back(from);
  FixObject f{to, parents, std::nullopt};
  if (game.variable(to).kind != VarKind::decision) {
    f.cpd = add_parent_duplicated(game.cpd(to), from, card);
  } else if (auto it = game.object_fixed().find(to); it != game.object_fixed().end()) {
    f.cpd = add_parent_duplicated(it->second, from, card);
  }
  return PrimitiveIntervention{std::move(f), {}};
}

PrimitiveIntervention remove_edge(const CausalGame& game, const std::string& from, const std::string& to,
                                  const PolicyProfile* profile) {
  const auto& old = game.parents(to);
  if (std::find(old.begin(), old.end(), from) == old.end())
    throw Error("edge " + from + " -> " + to + " does not exist");
  std::vector<std::string> parents;
  for (const auto& p : old)
    if (p != from) parents.push_back(p);

  const TabularCpd* table = nullptr;
  if (game.variable(to).kind != VarKind::decision) table = &game.cpd(to);
  else if (auto it = game.object_fixed().find(to); it != game.object_fixed().end()) table = &it->second;
  FixObject f{to, parents, std::nullopt};
  if (!table) return PrimitiveIntervention{std::move(f), {}};

  Weights w;
  if (profile) {
    auto joint = std::make_shared<JointDistribution>(induced_joint(game, *profile));
    const auto marginal = joint->marginal(from);
    const std::size_t card = game.cardinality(from);
    w = [joint, marginal, card, from](const Context& ctx) {
      std::vector<std::pair<std::string, std::size_t>> event(ctx.begin(), ctx.end());
      const double pc = joint->event_probability(event);
      if (pc <= 0.0) return marginal;
      std::vector<double> out(card);
      event.emplace_back(from, 0);
      for (std::size_t x = 0; x < card; ++x) {
        event.back().second = x;
        out[x] = joint->event_probability(event) / pc;
      }
      return out;
    };
  } else {
    auto ancestors = game.ancestors(from);
    ancestors.push_back(from);
    for (const auto& a : ancestors)
      if (game.is_free_decision(a))
        throw Error("the distribution of " + from + " depends on free decision " + a + "; supply a policy profile");
    PolicyProfile filler;
    for (const auto& d : game.free_decisions()) filler.set(uniform_rule(game, d));
    const auto marginal = induced_joint(game, filler).marginal(from);
    w = [marginal](const Context&) { return marginal; };
  }
  f.cpd = marginalise(game, *table, from, parents, w);
  return PrimitiveIntervention{std::move(f), {}};
}

CompoundIntervention trivial_decomposition(const CausalGame& game, const FixObject& fix) {
  const std::string& x = fix.target;
  const Variable var = game.variable(x);
  RemoveVariable remove{x, {}};
  AddVariable add;
  add.variable = var;
  add.parents = fix.parents;
  add.cpd = fix.cpd;
  if (auto it = game.commitments().find(x); it != game.commitments().end()) {
    if (!same_set(it->second.parents(), fix.parents) && !fix.cpd)
      throw Error("decision " + x + " has a committed rule over different parents; release it first");
    if (same_set(it->second.parents(), fix.parents)) add.commitment = it->second.reordered(fix.parents);
  }
  add.position = game.position(x);
  for (const auto& c : game.children(x)) {
    const auto old = child_state(game, c);
    ChildSpec cut{c, std::vector<std::string>{}, std::nullopt, std::nullopt};
    for (const auto& p : *old.parents)
      if (p != x) cut.parents->push_back(p);
    if (old.cpd) cut.cpd = slice(game, *old.cpd, x, 0);
    if (old.commitment) cut.commitment = slice(game, *old.commitment, x, 0);
    remove.children.push_back(std::move(cut));
    add.children.push_back(old);
  }
  return {PrimitiveIntervention{std::move(remove), {}}, PrimitiveIntervention{std::move(add), {}}};
}

// ---------------------------------------------------------------------------
// Mechanism-level analysis

SideEffectReport side_effects(const CausalGame& game, const PrimitiveIntervention& p) {
  const auto before = build_mechanised_graph(game);
  const auto after = build_mechanised_graph(apply_primitive(game, p));
  SideEffectReport report;
  for (const auto& e : before.inter_edges)
    if (!after.has_inter_edge(e.first, e.second)) report.removed.push_back(e);
  for (const auto& e : after.inter_edges)
    if (!before.has_inter_edge(e.first, e.second)) report.added.push_back(e);

  if (const auto* fix = std::get_if<FixObject>(&p.payload)) {
    std::set<std::pair<std::string, std::string>> severed;
    for (const auto& w : game.parents(fix->target))
      if (std::find(fix->parents.begin(), fix->parents.end(), w) == fix->parents.end())
        severed.emplace(w, fix->target);
    if (game.variable(fix->target).kind == VarKind::decision && fix->cpd && !game.object_fixed().count(fix->target))
      severed.emplace(mechanism_node(game, fix->target), fix->target);
    for (const auto& [m, target] : before.inter_edges) {
      const auto paths = reachability_paths(game, m, target);
      if (paths.empty()) continue;
      const bool all_cut = std::all_of(paths.begin(), paths.end(), [&](const Path& path) {
        for (const auto& e : path.edges())
          if (severed.count(e)) return true;
        return false;
      });
      if (all_cut) report.predicted_removed.emplace_back(m, target);
    }
  }
  for (const auto& e : report.predicted_removed)
    if (std::find(report.removed.begin(), report.removed.end(), e) == report.removed.end()) report.consistent = false;
  return report;
}

std::vector<std::vector<std::string>> hitting_requirements(const CausalGame& game, const std::string& mech,
                                                           const std::string& target) {
  std::vector<std::vector<std::string>> out;
  for (const auto& path : reachability_paths(game, mech, target)) {
    std::set<std::string> heads;
    for (const auto& [from, to] : path.edges())
      if (!is_mechanism_node(to)) heads.insert(to);
    std::vector<std::string> s;
    for (const auto& v : game.variables())
      if (heads.count(v.name)) s.push_back(v.name);
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<std::string> minimum_intervention_set(const CausalGame& game, const std::string& mech,
                                                  const std::string& target) {
  const auto sets = hitting_requirements(game, mech, target);
  if (sets.empty()) throw Error("dependency already absent: no reachability path from " + mech + " to " + target);
  std::vector<std::string> candidates;
  for (const auto& v : game.variables())
    for (const auto& s : sets)
      if (std::find(s.begin(), s.end(), v.name) != s.end()) {
        candidates.push_back(v.name);
        break;
      }
  if (candidates.size() > 30) throw Error("too many candidate variables for an exact hitting set");

  // Subsets by increasing size in lexicographic (variable) order: the first
  // hitting subset found is minimum and lexicographically first.
  const std::size_t n = candidates.size();
  for (std::size_t k = 1; k <= n; ++k) {
    std::vector<std::size_t> idx(k);
    std::iota(idx.begin(), idx.end(), 0);
    while (true) {
      bool hits_all = true;
      for (const auto& s : sets) {
        bool hit = false;
        for (std::size_t i : idx) hit = hit || std::find(s.begin(), s.end(), candidates[i]) != s.end();
        if (!hit) {
          hits_all = false;
          break;
        }
      }
      if (hits_all) {
        std::vector<std::string> out;
        for (std::size_t i : idx) out.push_back(candidates[i]);
        return out;
      }
      std::size_t i = k;
      while (i > 0 && idx[i - 1] == n - k + i - 1) --i;
      if (i == 0) break;
      ++idx[i - 1];
      for (std::size_t j = i; j < k; ++j) idx[j] = idx[j - 1] + 1;
    }
  }
  throw Error("internal error: no hitting set found");
}

std::vector<IncentiveChange> incentive_changes(const CausalGame& game, const CompoundIntervention& ps) {
  const CausalGame after = apply_compound(game, ps).game;
  std::vector<IncentiveChange> out;
  for (const auto& d : game.variables()) {
    if (d.kind != VarKind::decision || !after.has_variable(d.name) ||
        after.variable(d.name).kind != VarKind::decision)
      continue;
    const std::string target = mechanism_node(game, d.name);
    for (const auto& v : game.variables()) {
      if (!after.has_variable(v.name)) continue;
      const std::string m = mechanism_node(game, v.name);
      if (m != mechanism_node(after, v.name)) continue;
      const bool before = r_relevant(game, m, target);
      const bool now = r_relevant(after, m, target);
      if (before != now) out.push_back({m, target, before, now});
    }
  }
  return out;
}

bool incentive_invariant(const CausalGame& game, const CompoundIntervention& ps) {
  return incentive_changes(game, ps).empty();
}

// ---------------------------------------------------------------------------
// Labelled interventions

PrimitiveIntervention InterventionRunner::apply(const LabelledIntervention& li) {
  PrimitiveIntervention p = std::visit(
      [&](const auto& spec) -> PrimitiveIntervention {
        using T = std::decay_t<decltype(spec)>;
        if constexpr (std::is_same_v<T, PrimitiveIntervention>) return PrimitiveIntervention{spec.payload, {}};
        else if constexpr (std::is_same_v<T, AddEdgeSpec>) return add_edge(game_, spec.from, spec.to);
        else if constexpr (std::is_same_v<T, RemoveEdgeSpec>) return remove_edge(game_, spec.from, spec.to);
        else {
          auto it = applied_.find(spec.label);
          if (it == applied_.end())
            throw Error("cannot unfix " + spec.label + ": it is not in effect when " + li.label + " is applied");
          return invert(it->second);
        }
      },
      li.spec);
  auto applied = apply_journaled(game_, p);
  game_ = std::move(applied.game);
  applied_.insert_or_assign(li.label, applied.primitive);
  return applied.primitive;
}

PrimitiveIntervention InterventionRunner::undo(const std::string& label) {
  auto it = applied_.find(label);
  if (it == applied_.end()) throw Error("cannot undo " + label + ": it is not in effect");
  auto applied = apply_journaled(game_, invert(it->second));
  game_ = std::move(applied.game);
  applied_.erase(it);
  return applied.primitive;
}

namespace {

const LabelledIntervention& find_label(const std::vector<LabelledIntervention>& is, const std::string& label) {
  for (const auto& li : is)
    if (li.label == label) return li;
  throw Error("unknown intervention label " + label);
}

std::vector<std::string> canonical(const std::vector<LabelledIntervention>& is, const std::vector<std::string>& visible) {
  std::set<std::string> want(visible.begin(), visible.end());
  for (const auto& l : want) (void)find_label(is, l);
  std::vector<std::string> out;
  for (const auto& li : is)
    if (want.count(li.label)) out.push_back(li.label);
  return out;
}

void check_labels(const std::vector<LabelledIntervention>& is) {
  std::set<std::string> seen;
  for (const auto& li : is) {
    if (li.label.empty()) throw Error("intervention without a label");
    if (!seen.insert(li.label).second) throw Error("duplicate intervention label " + li.label);
  }
}

}  // namespace

CausalGame visible_game(const CausalGame& game, const std::vector<LabelledIntervention>& interventions,
                        const std::vector<std::string>& visible) {
  InterventionRunner runner(game);
  for (const auto& l : canonical(interventions, visible)) runner.apply(find_label(interventions, l));
  return runner.game();
}

Decomposition decompose(const CausalGame& game, const std::vector<LabelledIntervention>& interventions,
                        const VisibilityMap& visibility, const DecomposeOptions& options) {
  check_labels(interventions);
  for (const auto& [agent, labels] : visibility) {
    if (agent < 1 || agent > game.agents()) throw Error("visibility for unknown agent " + std::to_string(agent));
    for (const auto& l : labels) (void)find_label(interventions, l);
  }

  std::map<int, std::vector<std::string>> lists;
  for (int i = 1; i <= game.agents(); ++i) {
    auto it = visibility.find(i);
    lists[i] = canonical(interventions, it == visibility.end() ? std::vector<std::string>{} : it->second);
  }

  auto rank = [&](int agent) -> std::size_t {
    auto it = std::find(options.agent_order.begin(), options.agent_order.end(), agent);
    if (it != options.agent_order.end()) return static_cast<std::size_t>(it - options.agent_order.begin());
    return options.agent_order.size() + static_cast<std::size_t>(agent);
  };

  struct Group {
    std::vector<std::string> labels;
    std::vector<int> agents;
  };
  std::vector<Group> groups;
  for (const auto& [agent, labels] : lists) {
    auto it = std::find_if(groups.begin(), groups.end(), [&](const Group& g) { return g.labels == labels; });
    if (options.merge && it != groups.end()) it->agents.push_back(agent);
    else groups.push_back(Group{labels, {agent}});
  }
  const bool ordered = !options.agent_order.empty();
  std::stable_sort(groups.begin(), groups.end(), [&](const Group& a, const Group& b) {
    const std::size_t ra = rank(a.agents.front()), rb = rank(b.agents.front());
    if (ordered) return ra < rb;
    if (a.labels.size() != b.labels.size()) return a.labels.size() < b.labels.size();
    return a.agents.front() < b.agents.front();
  });

  std::vector<Group> plan;
  if (!options.merge) {
    // A shared stage first, then one agent per stage.
    std::vector<std::string> common;
    if (!groups.empty()) {
      common = groups.front().labels;
      for (const auto& g : groups) {
        std::vector<std::string> keep;
        for (const auto& l : common)
          if (std::find(g.labels.begin(), g.labels.end(), l) != g.labels.end()) keep.push_back(l);
        common = keep;
      }
    }
    plan.push_back(Group{common, {}});
  }
  for (auto& g : groups) plan.push_back(std::move(g));
  std::vector<std::string> all;
  for (const auto& li : interventions) all.push_back(li.label);
  if (plan.empty() || plan.back().labels != all) plan.push_back(Group{all, {}});

  Decomposition d;
  InterventionRunner runner(game);
  std::vector<std::string> current;
  for (const auto& g : plan) {
    Stage stage;
    stage.agents = g.agents;
    std::size_t k = 0;
    while (k < current.size() && k < g.labels.size() && current[k] == g.labels[k]) ++k;
    for (std::size_t i = current.size(); i-- > k;) {
      stage.steps.push_back("undo " + current[i]);
      stage.primitives.push_back(runner.undo(current[i]));
    }
    for (std::size_t i = k; i < g.labels.size(); ++i) {
      stage.steps.push_back(g.labels[i]);
      stage.primitives.push_back(runner.apply(find_label(interventions, g.labels[i])));
    }
    stage.visible_labels = g.labels;
    current = g.labels;
    d.stages.push_back(std::move(stage));
    d.games.push_back(runner.game());
  }
  return d;
}

Decomposition explicit_stages(const CausalGame& game, const std::vector<LabelledIntervention>& interventions,
                              const std::vector<std::pair<std::vector<int>, std::vector<std::string>>>& stages) {
  check_labels(interventions);
  std::set<int> seen_agents;
  for (const auto& [agents, labels] : stages)
    for (int a : agents) {
      if (a < 1 || a > game.agents()) throw Error("stage lists unknown agent " + std::to_string(a));
      if (!seen_agents.insert(a).second) throw Error("agent " + std::to_string(a) + " appears in two stages");
    }
  Decomposition d;
  InterventionRunner runner(game);
  std::vector<std::string> in_effect;
  for (const auto& [agents, labels] : stages) {
    Stage stage;
    stage.agents = agents;
    for (const auto& l : labels) {
      stage.steps.push_back(l);
      stage.primitives.push_back(runner.apply(find_label(interventions, l)));
      in_effect.push_back(l);
    }
    stage.visible_labels = in_effect;
    d.stages.push_back(std::move(stage));
    d.games.push_back(runner.game());
  }
  return d;
}

std::string check_decomposition(const CausalGame& game, const std::vector<LabelledIntervention>& interventions,
                                const VisibilityMap& visibility, const Decomposition& d) {
  for (std::size_t j = 0; j < d.stages.size(); ++j)
    for (int agent : d.stages[j].agents) {
      auto it = visibility.find(agent);
      const auto expected =
          visible_game(game, interventions, it == visibility.end() ? std::vector<std::string>{} : it->second);
      const auto diff = structural_difference(d.games[j], expected);
      if (!diff.empty())
        return "agent " + std::to_string(agent) + " at stage " + std::to_string(j) + ": " + diff;
    }
  return {};
}

}  // namespace cgame
