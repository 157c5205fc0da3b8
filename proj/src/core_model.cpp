#include "cgame/core_model.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numeric>
#include <set>
#include <sstream>

#include "util.hpp"

namespace cgame {

const char* to_string(VarKind kind) {
  switch (kind) {
    case VarKind::chance: return "chance";
    case VarKind::decision: return "decision";
    case VarKind::utility: return "utility";
  }
  return "?";
}

// ---------------------------------------------------------------------------
// Variable

Variable Variable::chance(std::string name, std::vector<std::string> domain) {
  return Variable{std::move(name), VarKind::chance, 0, std::move(domain), {}};
}

Variable Variable::decision(std::string name, int agent, std::vector<std::string> domain) {
  return Variable{std::move(name), VarKind::decision, agent, std::move(domain), {}};
}

Variable Variable::utility(std::string name, int agent, std::vector<double> values) {
  Variable v{std::move(name), VarKind::utility, agent, {}, std::move(values)};
  for (double x : v.payoffs) v.domain.push_back(format_number(x));
  return v;
}

std::optional<std::size_t> Variable::value_index(std::string_view label) const {
  for (std::size_t i = 0; i < domain.size(); ++i)
    if (domain[i] == label) return i;
  if (kind == VarKind::utility) {
    // Utility labels also match numerically ("3" == "3.0").
    if (auto x = parse_number(label)) {
      for (std::size_t i = 0; i < payoffs.size(); ++i)
        if (payoffs[i] == *x) return i;
    }
  }
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// TabularCpd

namespace {

std::size_t product(const std::vector<std::size_t>& xs) {
  return std::accumulate(xs.begin(), xs.end(), std::size_t{1}, std::multiplies<>());
}

}  // namespace

TabularCpd::TabularCpd(std::string variable, std::size_t card, std::vector<std::string> parents,
                       std::vector<std::size_t> parent_cards, std::vector<double> values)
    : variable_(std::move(variable)),
      card_(card),
      parents_(std::move(parents)),
      parent_cards_(std::move(parent_cards)),
      values_(std::move(values)) {
  if (parents_.size() != parent_cards_.size())
    throw Error("cpd for " + variable_ + ": parent list and cardinalities differ in length");
  if (values_.size() != card_ * product(parent_cards_))
    throw Error("cpd for " + variable_ + ": expected " + std::to_string(card_ * product(parent_cards_)) +
                " entries, got " + std::to_string(values_.size()));
}

TabularCpd TabularCpd::delta(std::string variable, std::size_t card, std::size_t value,
                             std::vector<std::string> parents, std::vector<std::size_t> parent_cards) {
  if (value >= card) throw Error("delta value out of range for " + variable);
  const std::size_t rows = product(parent_cards);
  std::vector<double> values(rows * card, 0.0);
  for (std::size_t r = 0; r < rows; ++r) values[r * card + value] = 1.0;
  return TabularCpd(std::move(variable), card, std::move(parents), std::move(parent_cards), std::move(values));
}

TabularCpd TabularCpd::uniform(std::string variable, std::size_t card, std::vector<std::string> parents,
                               std::vector<std::size_t> parent_cards) {
  const std::size_t rows = product(parent_cards);
  std::vector<double> values(rows * card, 1.0 / static_cast<double>(card));
  return TabularCpd(std::move(variable), card, std::move(parents), std::move(parent_cards), std::move(values));
}

std::span<const double> TabularCpd::row(std::size_t r) const {
  return std::span<const double>(values_).subspan(r * card_, card_);
}

std::size_t TabularCpd::row_index(std::span<const std::size_t> parent_values) const {
  std::size_t r = 0;
  for (std::size_t k = 0; k < parent_cards_.size(); ++k) r = r * parent_cards_[k] + parent_values[k];
  return r;
}

std::vector<std::size_t> TabularCpd::row_context(std::size_t r) const {
  std::vector<std::size_t> ctx(parent_cards_.size());
  for (std::size_t k = parent_cards_.size(); k-- > 0;) {
    ctx[k] = r % parent_cards_[k];
    r /= parent_cards_[k];
  }
  return ctx;
}

bool TabularCpd::is_pure(double eps) const {
  return std::all_of(values_.begin(), values_.end(),
                     [eps](double x) { return std::abs(x) <= eps || std::abs(x - 1.0) <= eps; });
}

bool TabularCpd::is_fully_stochastic(double eps) const {
  return std::all_of(values_.begin(), values_.end(), [eps](double x) { return x > eps; });
}

std::vector<std::size_t> TabularCpd::bad_rows(double eps) const {
  std::vector<std::size_t> bad;
  for (std::size_t r = 0; r < rows(); ++r) {
    double sum = 0.0;
    bool negative = false;
    for (double x : row(r)) {
      sum += x;
      negative = negative || x < -eps;
    }
    if (negative || std::abs(sum - 1.0) > eps) bad.push_back(r);
  }
  return bad;
}

TabularCpd TabularCpd::reordered(const std::vector<std::string>& order) const {
  if (order == parents_) return *this;
  if (order.size() != parents_.size()) throw Error("reordered: parent set mismatch for " + variable_);
  std::vector<std::size_t> where(order.size());
  std::vector<std::size_t> cards(order.size());
  for (std::size_t k = 0; k < order.size(); ++k) {
    auto it = std::find(parents_.begin(), parents_.end(), order[k]);
    if (it == parents_.end()) throw Error("reordered: " + order[k] + " is not a parent of " + variable_);
    where[k] = static_cast<std::size_t>(it - parents_.begin());
    cards[k] = parent_cards_[where[k]];
  }
  TabularCpd out(variable_, card_, order, cards, std::vector<double>(values_.size()));
  std::vector<std::size_t> old_ctx(parents_.size());
  for (std::size_t r = 0; r < out.rows(); ++r) {
    auto ctx = out.row_context(r);
    for (std::size_t k = 0; k < ctx.size(); ++k) old_ctx[where[k]] = ctx[k];
    const std::size_t src = row_index(old_ctx);
    std::copy_n(values_.begin() + static_cast<std::ptrdiff_t>(src * card_), card_,
                out.values_.begin() + static_cast<std::ptrdiff_t>(r * card_));
  }
  return out;
}

bool TabularCpd::equivalent(const TabularCpd& other, double eps) const {
  if (variable_ != other.variable_ || card_ != other.card_) return false;
  if (std::set(parents_.begin(), parents_.end()) != std::set(other.parents_.begin(), other.parents_.end()))
    return false;
  if (parents_.size() != other.parents_.size()) return false;
  TabularCpd aligned = other.reordered(parents_);
  if (aligned.parent_cards_ != parent_cards_) return false;
  for (std::size_t i = 0; i < values_.size(); ++i)
    if (std::abs(values_[i] - aligned.values_[i]) > eps) return false;
  return true;
}

// ---------------------------------------------------------------------------
// PolicyProfile

const DecisionRule& PolicyProfile::at(const std::string& decision) const {
  auto it = rules.find(decision);
  if (it == rules.end()) throw Error("missing decision rule for " + decision);
  return it->second;
}

void PolicyProfile::set(DecisionRule rule) {
  std::string key = rule.variable();
  rules.insert_or_assign(std::move(key), std::move(rule));
}

PolicyProfile PolicyProfile::merged(const PolicyProfile& other) const {
  PolicyProfile out = *this;
  for (const auto& [k, r] : other.rules) out.rules.insert_or_assign(k, r);
  return out;
}

bool PolicyProfile::equivalent(const PolicyProfile& other, double eps) const {
  if (rules.size() != other.rules.size()) return false;
  for (const auto& [k, r] : rules) {
    auto it = other.rules.find(k);
    if (it == other.rules.end() || !r.equivalent(it->second, eps)) return false;
  }
  return true;
}

// ---------------------------------------------------------------------------
// CausalGame

bool CausalGame::has_variable(std::string_view name) const {
  return std::any_of(variables_.begin(), variables_.end(), [&](const Variable& v) { return v.name == name; });
}

std::size_t CausalGame::position(std::string_view name) const {
  for (std::size_t i = 0; i < variables_.size(); ++i)
    if (variables_[i].name == name) return i;
  throw Error("unknown variable " + std::string(name));
}

const Variable& CausalGame::variable(std::string_view name) const { return variables_[position(name)]; }

std::size_t CausalGame::value_index(std::string_view var, std::string_view label) const {
  const Variable& v = variable(var);
  if (auto i = v.value_index(label)) return *i;
  throw Error("value " + std::string(label) + " is not in the domain of " + v.name);
}

const std::vector<std::string>& CausalGame::parents(std::string_view name) const {
  auto it = parents_.find(name);
  if (it == parents_.end()) throw Error("unknown variable " + std::string(name));
  return it->second;
}

std::vector<std::string> CausalGame::children(std::string_view name) const {
  std::vector<std::string> out;
  for (const auto& v : variables_) {
    const auto& ps = parents(v.name);
    if (std::find(ps.begin(), ps.end(), name) != ps.end()) out.push_back(v.name);
  }
  return out;
}

std::vector<std::string> CausalGame::descendants(std::string_view name) const {
  std::set<std::string> seen;
  std::vector<std::string> stack = children(name);
  while (!stack.empty()) {
    std::string cur = std::move(stack.back());
    stack.pop_back();
    if (!seen.insert(cur).second) continue;
    for (auto& c : children(cur)) stack.push_back(std::move(c));
  }
  std::vector<std::string> out;
  for (const auto& v : variables_)
    if (seen.count(v.name)) out.push_back(v.name);
  return out;
}

std::vector<std::string> CausalGame::ancestors(std::string_view name) const {
  std::set<std::string> seen;
  std::vector<std::string> stack = parents(name);
  while (!stack.empty()) {
    std::string cur = std::move(stack.back());
    stack.pop_back();
    if (!seen.insert(cur).second) continue;
    for (const auto& p : parents(cur)) stack.push_back(p);
  }
  std::vector<std::string> out;
  for (const auto& v : variables_)
    if (seen.count(v.name)) out.push_back(v.name);
  return out;
}

std::vector<std::size_t> CausalGame::parent_cards(std::string_view name) const {
  std::vector<std::size_t> out;
  for (const auto& p : parents(name)) out.push_back(cardinality(p));
  return out;
}

std::vector<std::string> CausalGame::decisions() const {
  std::vector<std::string> out;
  for (const auto& v : variables_)
    if (v.kind == VarKind::decision) out.push_back(v.name);
  return out;
}

std::vector<std::string> CausalGame::decisions_of(int agent) const {
  std::vector<std::string> out;
  for (const auto& v : variables_)
    if (v.kind == VarKind::decision && v.agent == agent) out.push_back(v.name);
  return out;
}

std::vector<std::string> CausalGame::utilities_of(int agent) const {
  std::vector<std::string> out;
  for (const auto& v : variables_)
    if (v.kind == VarKind::utility && v.agent == agent) out.push_back(v.name);
  return out;
}

bool CausalGame::is_free_decision(std::string_view name) const {
  const Variable& v = variable(name);
  const std::string key(name);
  return v.kind == VarKind::decision && !object_fixed_.count(key) && !commitments_.count(key);
}

std::vector<std::string> CausalGame::free_decisions() const {
  std::vector<std::string> out;
  for (const auto& v : variables_)
    if (v.kind == VarKind::decision && is_free_decision(v.name)) out.push_back(v.name);
  return out;
}

std::vector<std::string> CausalGame::free_decisions_of(int agent) const {
  std::vector<std::string> out;
  for (const auto& v : variables_)
    if (v.kind == VarKind::decision && v.agent == agent && is_free_decision(v.name)) out.push_back(v.name);
  return out;
}

std::vector<int> CausalGame::strategic_agents() const {
  std::vector<int> out;
  for (int i = 1; i <= agents_; ++i)
    if (!free_decisions_of(i).empty()) out.push_back(i);
  return out;
}

const TabularCpd& CausalGame::cpd(std::string_view name) const {
  auto it = cpds_.find(std::string(name));
  if (it == cpds_.end()) throw Error("no cpd for " + std::string(name));
  return it->second;
}

std::vector<std::string> CausalGame::topological_order() const {
  std::map<std::string, std::size_t> indegree;
  for (const auto& v : variables_) indegree[v.name] = parents(v.name).size();
  std::vector<std::string> order;
  std::vector<bool> done(variables_.size(), false);
  while (order.size() < variables_.size()) {
    bool progressed = false;
    for (std::size_t i = 0; i < variables_.size(); ++i) {
      if (done[i] || indegree[variables_[i].name] != 0) continue;
      done[i] = true;
      progressed = true;
      order.push_back(variables_[i].name);
      for (const auto& c : children(variables_[i].name)) --indegree[c];
      break;
    }
    if (!progressed) throw Error("object-level graph contains a cycle");
  }
  return order;
}

void CausalGame::add_variable(Variable v, std::vector<std::string> parents, std::optional<std::size_t> at) {
  if (has_variable(v.name)) throw Error("variable " + v.name + " already exists");
  parents_[v.name] = std::move(parents);
  if (at && *at <= variables_.size())
    variables_.insert(variables_.begin() + static_cast<std::ptrdiff_t>(*at), std::move(v));
  else
    variables_.push_back(std::move(v));
}

void CausalGame::remove_variable(std::string_view name) {
  const std::size_t pos = position(name);
  const std::string key(name);
  variables_.erase(variables_.begin() + static_cast<std::ptrdiff_t>(pos));
  parents_.erase(parents_.find(name));
  cpds_.erase(key);
  object_fixed_.erase(key);
  commitments_.erase(key);
}

void CausalGame::set_parents(std::string_view name, std::vector<std::string> parents) {
  auto it = parents_.find(name);
  if (it == parents_.end()) throw Error("unknown variable " + std::string(name));
  it->second = std::move(parents);
}

void CausalGame::set_cpd(TabularCpd cpd) {
  std::string key = cpd.variable();
  cpds_.insert_or_assign(std::move(key), std::move(cpd));
}

void CausalGame::erase_cpd(std::string_view name) { cpds_.erase(std::string(name)); }

void CausalGame::set_object_fixed(TabularCpd cpd) {
  std::string key = cpd.variable();
  object_fixed_.insert_or_assign(std::move(key), std::move(cpd));
}

void CausalGame::clear_object_fixed(std::string_view name) { object_fixed_.erase(std::string(name)); }

void CausalGame::set_commitment(DecisionRule rule) {
  std::string key = rule.variable();
  commitments_.insert_or_assign(std::move(key), std::move(rule));
}

void CausalGame::clear_commitment(std::string_view name) { commitments_.erase(std::string(name)); }

// ---------------------------------------------------------------------------
// Validation

namespace {

void check_table(const CausalGame& game, const TabularCpd& cpd, const std::string& what, double eps,
                 std::vector<Violation>& out) {
  const std::string& v = cpd.variable();
  if (cpd.parents() != game.parents(v)) {
    out.push_back({v, what + " parents [" + join(cpd.parents(), ",") + "] differ from graph parents [" +
                          join(game.parents(v), ",") + "]"});
    return;
  }
  if (cpd.card() != game.cardinality(v) || cpd.parent_cards() != game.parent_cards(v)) {
    out.push_back({v, what + " shape does not match the variable domains"});
    return;
  }
  for (std::size_t r : cpd.bad_rows(eps)) {
    double sum = 0.0;
    for (double x : cpd.row(r)) sum += x;
    out.push_back({v, what + " row " + std::to_string(r) + " is not a distribution (sum " + format_number(sum) + ")"});
  }
}

}  // namespace

std::vector<Violation> validate_game(const CausalGame& game, double eps) {
  std::vector<Violation> out;
  if (game.agents() < 0) out.push_back({"game", "negative agent count"});
  std::set<std::string> names;
  for (const auto& v : game.variables()) {
    if (!names.insert(v.name).second) out.push_back({v.name, "duplicate variable name"});
    if (!is_identifier(v.name)) out.push_back({v.name, "invalid variable name"});
    if (v.name.rfind("PI_", 0) == 0 || v.name.rfind("THETA_", 0) == 0)
      out.push_back({v.name, "names starting with PI_ or THETA_ are reserved for mechanism nodes"});
    if (v.domain.empty()) out.push_back({v.name, "empty domain"});
    if (std::set(v.domain.begin(), v.domain.end()).size() != v.domain.size())
      out.push_back({v.name, "duplicate domain values"});
    const bool owned = v.kind != VarKind::chance;
    if (owned && (v.agent < 1 || v.agent > game.agents()))
      out.push_back({v.name, "agent index " + std::to_string(v.agent) + " outside 1.." + std::to_string(game.agents())});
    if (!owned && v.agent != 0) out.push_back({v.name, "chance variables do not belong to an agent"});
    if (v.kind == VarKind::utility) {
      if (v.payoffs.size() != v.domain.size()) out.push_back({v.name, "utility domain is not numeric"});
      else if (std::set(v.payoffs.begin(), v.payoffs.end()).size() != v.payoffs.size())
        out.push_back({v.name, "duplicate utility values"});
    }
  }
  for (const auto& v : game.variables()) {
    for (const auto& p : game.parents(v.name)) {
      if (!names.count(p)) out.push_back({v.name, "unknown parent " + p});
      else if (game.variable(p).kind == VarKind::utility)
        out.push_back({v.name, "utility variable " + p + " has a child; utilities must be leaves"});
    }
    const auto& ps = game.parents(v.name);
    if (std::set(ps.begin(), ps.end()).size() != ps.size()) out.push_back({v.name, "repeated parent"});
  }
  if (!out.empty()) return out;

  try {
    (void)game.topological_order();
  } catch (const Error&) {
    out.push_back({"graph", "object-level graph is not acyclic"});
    return out;
  }

  for (const auto& v : game.variables()) {
    const bool has_cpd = game.cpds().count(v.name) != 0;
    if (v.kind == VarKind::decision) {
      if (has_cpd) out.push_back({v.name, "decision variables carry no cpd"});
      if (auto it = game.object_fixed().find(v.name); it != game.object_fixed().end())
        check_table(game, it->second, "object-level cpd", eps, out);
      else if (auto jt = game.commitments().find(v.name); jt != game.commitments().end())
        check_table(game, jt->second, "committed rule", eps, out);
    } else {
      if (!has_cpd) out.push_back({v.name, "missing cpd"});
      else check_table(game, game.cpd(v.name), "cpd", eps, out);
    }
  }
  for (const auto& [k, cpd] : game.cpds())
    if (!names.count(k)) out.push_back({k, "cpd for unknown variable"});
  for (const auto& [k, cpd] : game.object_fixed())
    if (!names.count(k) || game.variable(k).kind != VarKind::decision)
      out.push_back({k, "object-level fix recorded for a non-decision"});
  for (const auto& [k, r] : game.commitments())
    if (!names.count(k) || game.variable(k).kind != VarKind::decision)
      out.push_back({k, "commitment recorded for a non-decision"});
  return out;
}

void require_valid(const CausalGame& game, double eps) {
  auto report = validate_game(game, eps);
  if (report.empty()) return;
  std::string msg = "invalid game:";
  for (const auto& v : report) msg += "\n  " + v.subject + ": " + v.message;
  throw Error(msg);
}

// ---------------------------------------------------------------------------
// Structural equality

std::string structural_difference(const CausalGame& a, const CausalGame& b, double eps) {
  if (a.agents() != b.agents()) return "agent counts differ";
  if (a.variables().size() != b.variables().size()) return "variable counts differ";
  for (const auto& va : a.variables()) {
    if (!b.has_variable(va.name)) return "variable " + va.name + " missing";
    const auto& vb = b.variable(va.name);
    if (!(va == vb)) return "variable " + va.name + " differs in kind, agent or domain";
    const auto& pa = a.parents(va.name);
    const auto& pb = b.parents(va.name);
    if (std::set(pa.begin(), pa.end()) != std::set(pb.begin(), pb.end())) return "parents of " + va.name + " differ";
  }
  auto compare_maps = [&](const std::map<std::string, TabularCpd>& ma, const std::map<std::string, TabularCpd>& mb,
                          const char* what) -> std::string {
    if (ma.size() != mb.size()) return std::string(what) + " entries differ";
    for (const auto& [k, t] : ma) {
      auto it = mb.find(k);
      if (it == mb.end()) return std::string(what) + " for " + k + " missing";
      if (!t.equivalent(it->second, eps)) return std::string(what) + " for " + k + " differs";
    }
    return {};
  };
  if (auto d = compare_maps(a.cpds(), b.cpds(), "cpd"); !d.empty()) return d;
  if (auto d = compare_maps(a.object_fixed(), b.object_fixed(), "object-level fix"); !d.empty()) return d;
  if (auto d = compare_maps(a.commitments(), b.commitments(), "commitment"); !d.empty()) return d;
  return {};
}

bool structurally_equal(const CausalGame& a, const CausalGame& b, double eps) {
  return structural_difference(a, b, eps).empty();
}

// ---------------------------------------------------------------------------
// JointDistribution

JointDistribution::JointDistribution(std::vector<std::string> variables, std::vector<std::size_t> cards,
                                     std::vector<double> probs)
    : variables_(std::move(variables)), cards_(std::move(cards)), probs_(std::move(probs)) {
  strides_.assign(cards_.size(), 1);
  for (std::size_t k = cards_.size(); k-- > 1;) strides_[k - 1] = strides_[k] * cards_[k];
}

double JointDistribution::total() const { return std::accumulate(probs_.begin(), probs_.end(), 0.0); }

std::vector<std::size_t> JointDistribution::instantiation(std::size_t i) const {
  std::vector<std::size_t> out(cards_.size());
  for (std::size_t k = 0; k < cards_.size(); ++k) out[k] = (i / strides_[k]) % cards_[k];
  return out;
}

std::size_t JointDistribution::position(const std::string& variable) const {
  auto it = std::find(variables_.begin(), variables_.end(), variable);
  if (it == variables_.end()) throw Error("joint has no variable " + variable);
  return static_cast<std::size_t>(it - variables_.begin());
}

double JointDistribution::probability(const std::map<std::string, std::size_t>& full_assignment) const {
  std::size_t idx = 0;
  for (std::size_t k = 0; k < variables_.size(); ++k) idx += full_assignment.at(variables_[k]) * strides_[k];
  return probs_[idx];
}

double JointDistribution::event_probability(const std::vector<std::pair<std::string, std::size_t>>& event) const {
  std::vector<std::pair<std::size_t, std::size_t>> fixed;
  for (const auto& [v, val] : event) fixed.emplace_back(position(v), val);
  double p = 0.0;
  for (std::size_t i = 0; i < probs_.size(); ++i) {
    bool match = true;
    for (const auto& [k, val] : fixed)
      if ((i / strides_[k]) % cards_[k] != val) {
        match = false;
        break;
      }
    if (match) p += probs_[i];
  }
  return p;
}

std::vector<double> JointDistribution::marginal(const std::string& variable) const {
  const std::size_t k = position(variable);
  std::vector<double> out(cards_[k], 0.0);
  for (std::size_t i = 0; i < probs_.size(); ++i) out[(i / strides_[k]) % cards_[k]] += probs_[i];
  return out;
}

bool JointDistribution::equivalent(const JointDistribution& other, double tol) const {
  if (variables_.size() != other.variables_.size() || probs_.size() != other.probs_.size()) return false;
  std::vector<std::size_t> map(variables_.size());
  for (std::size_t k = 0; k < variables_.size(); ++k) {
    auto it = std::find(other.variables_.begin(), other.variables_.end(), variables_[k]);
    if (it == other.variables_.end()) return false;
    map[k] = static_cast<std::size_t>(it - other.variables_.begin());
    if (other.cards_[map[k]] != cards_[k]) return false;
  }
  for (std::size_t i = 0; i < probs_.size(); ++i) {
    std::size_t j = 0;
    for (std::size_t k = 0; k < variables_.size(); ++k) j += ((i / strides_[k]) % cards_[k]) * other.strides_[map[k]];
    if (std::abs(probs_[i] - other.probs_[j]) > tol) return false;
  }
  return true;
}

// ---------------------------------------------------------------------------
// Induced distribution

const DecisionRule& effective_rule(const CausalGame& game, const PolicyProfile& profile, const std::string& decision) {
  if (auto it = game.object_fixed().find(decision); it != game.object_fixed().end()) return it->second;
  if (auto it = game.commitments().find(decision); it != game.commitments().end()) return it->second;
  return profile.at(decision);
}

bool profile_is_full(const CausalGame& game, const PolicyProfile& profile) {
  for (const auto& d : game.free_decisions())
    if (!profile.contains(d)) return false;
  return true;
}

namespace {

struct Factor {
  const TabularCpd* table = nullptr;
  std::size_t self = 0;
  std::vector<std::size_t> parents;  // positions in the enumeration order
};

// Resolves every variable's factor; positions refer to `order`.
std::vector<Factor> factorise(const CausalGame& game, const PolicyProfile& profile,
                              const std::vector<std::string>& order) {
  std::map<std::string, std::size_t> pos;
  for (std::size_t i = 0; i < order.size(); ++i) pos[order[i]] = i;
  std::vector<Factor> out;
  for (const auto& name : order) {
    const Variable& v = game.variable(name);
    Factor f;
    f.self = pos.at(name);
    f.table = v.kind == VarKind::decision ? &effective_rule(game, profile, name) : &game.cpd(name);
    if (f.table->parents() != game.parents(name))
      throw Error("distribution for " + name + " is over [" + join(f.table->parents(), ",") +
                  "] but the graph parents are [" + join(game.parents(name), ",") + "]");
    if (f.table->card() != v.cardinality()) throw Error("distribution for " + name + " has the wrong cardinality");
    for (const auto& p : game.parents(name)) f.parents.push_back(pos.at(p));
    out.push_back(std::move(f));
  }
  return out;
}

double factor_value(const Factor& f, const std::vector<std::size_t>& values, std::vector<std::size_t>& scratch) {
  scratch.resize(f.parents.size());
  for (std::size_t k = 0; k < f.parents.size(); ++k) scratch[k] = values[f.parents[k]];
  return f.table->prob(f.table->row_index(scratch), values[f.self]);
}

// Calls fn(values, probability) for every instantiation of `order` with
// non-zero probability, multiplying the given factors.
template <typename Fn>
void enumerate(const std::vector<std::size_t>& cards, const std::vector<Factor>& factors, Fn&& fn) {
  std::vector<std::size_t> values(cards.size(), 0);
  std::vector<std::size_t> scratch;
  for (std::size_t c : cards)
    if (c == 0) return;
  while (true) {
    double p = 1.0;
    for (const auto& f : factors) {
      p *= factor_value(f, values, scratch);
      if (p == 0.0) break;
    }
    fn(values, p);
    std::size_t k = cards.size();
    while (k > 0) {
      --k;
      if (++values[k] < cards[k]) break;
      values[k] = 0;
      if (k == 0) return;
    }
    if (cards.empty()) return;
  }
}

}  // namespace

JointDistribution induced_joint(const CausalGame& game, const PolicyProfile& profile) {
  std::vector<std::string> order;
  std::vector<std::size_t> cards;
  for (const auto& v : game.variables()) {
    order.push_back(v.name);
    cards.push_back(v.cardinality());
  }
  for (const auto& d : game.free_decisions())
    if (!profile.contains(d)) throw Error("missing decision rule for " + d);
  const auto factors = factorise(game, profile, order);
  std::vector<double> probs;
  probs.reserve(std::accumulate(cards.begin(), cards.end(), std::size_t{1}, std::multiplies<>()));
  enumerate(cards, factors, [&](const std::vector<std::size_t>&, double p) { probs.push_back(p); });
  return JointDistribution(std::move(order), std::move(cards), std::move(probs));
}

// Expected value of each agent's summed utility. Utilities are leaves, so the
// enumeration runs over the non-utility variables and takes each utility's
// conditional expectation in closed form.
std::vector<double> expected_utilities(const CausalGame& game, const PolicyProfile& profile) {
  std::vector<std::string> order;
  std::vector<std::size_t> cards;
  std::vector<std::string> utilities;
  for (const auto& v : game.variables()) {
    if (v.kind == VarKind::utility) {
      utilities.push_back(v.name);
    } else {
      order.push_back(v.name);
      cards.push_back(v.cardinality());
    }
  }
  for (const auto& d : game.free_decisions())
    if (!profile.contains(d)) throw Error("missing decision rule for " + d);
  const auto factors = factorise(game, profile, order);
  std::map<std::string, std::size_t> pos;
  for (std::size_t i = 0; i < order.size(); ++i) pos[order[i]] = i;

  struct UtilityTerm {
    const TabularCpd* table;
    const std::vector<double>* payoffs;
    std::vector<std::size_t> parents;
    int agent;
  };
  std::vector<UtilityTerm> terms;
  for (const auto& u : utilities) {
    const Variable& v = game.variable(u);
    UtilityTerm t{&game.cpd(u), &v.payoffs, {}, v.agent};
    if (t.table->parents() != game.parents(u)) throw Error("cpd parents of " + u + " differ from the graph");
    for (const auto& p : game.parents(u)) {
      auto it = pos.find(p);
      if (it == pos.end()) throw Error("utility " + u + " has a utility parent");
      t.parents.push_back(it->second);
    }
    terms.push_back(std::move(t));
  }

  std::vector<double> eu(static_cast<std::size_t>(game.agents()) + 1, 0.0);
  std::vector<std::size_t> scratch;
  enumerate(cards, factors, [&](const std::vector<std::size_t>& values, double p) {
    if (p == 0.0) return;
    for (const auto& t : terms) {
      scratch.resize(t.parents.size());
      for (std::size_t k = 0; k < t.parents.size(); ++k) scratch[k] = values[t.parents[k]];
      auto row = t.table->row(t.table->row_index(scratch));
      double e = 0.0;
      for (std::size_t k = 0; k < row.size(); ++k) e += row[k] * (*t.payoffs)[k];
      eu[static_cast<std::size_t>(t.agent)] += p * e;
    }
  });
  return eu;
}

double expected_utility(const CausalGame& game, const PolicyProfile& profile, int agent) {
  if (agent < 1 || agent > game.agents()) throw Error("unknown agent " + std::to_string(agent));
  return expected_utilities(game, profile)[static_cast<std::size_t>(agent)];
}

double expected_total_utility(const CausalGame& game, const PolicyProfile& profile) {
  auto eu = expected_utilities(game, profile);
  return std::accumulate(eu.begin(), eu.end(), 0.0);
}

// ---------------------------------------------------------------------------
// Decision rules

constexpr std::size_t kMaxPureRules = 1'000'000;

std::vector<DecisionRule> enumerate_pure_rules(const CausalGame& game, const std::string& decision) {
  const Variable& v = game.variable(decision);
  if (v.kind != VarKind::decision) throw Error(decision + " is not a decision variable");
  const auto cards = game.parent_cards(decision);
  const std::size_t contexts = std::accumulate(cards.begin(), cards.end(), std::size_t{1}, std::multiplies<>());
  const std::size_t actions = v.cardinality();
  std::size_t count = 1;
  for (std::size_t c = 0; c < contexts; ++c) {
    if (count > kMaxPureRules / actions) throw Error("decision " + decision + " has too many pure rules to enumerate");
    count *= actions;
  }

  std::vector<DecisionRule> out;
  out.reserve(count);
  std::vector<std::size_t> choice(contexts, 0);
  for (std::size_t n = 0; n < count; ++n) {
    std::vector<double> values(contexts * actions, 0.0);
    for (std::size_t c = 0; c < contexts; ++c) values[c * actions + choice[c]] = 1.0;
    out.emplace_back(decision, actions, game.parents(decision), cards, std::move(values));
    for (std::size_t c = contexts; c-- > 0;) {
      if (++choice[c] < actions) break;
      choice[c] = 0;
    }
  }
  return out;
}

DecisionRule constant_rule(const CausalGame& game, const std::string& decision, std::size_t action) {
  return TabularCpd::delta(decision, game.cardinality(decision), action, game.parents(decision),
                           game.parent_cards(decision));
}

DecisionRule uniform_rule(const CausalGame& game, const std::string& decision) {
  return TabularCpd::uniform(decision, game.cardinality(decision), game.parents(decision),
                             game.parent_cards(decision));
}

}  // namespace cgame
