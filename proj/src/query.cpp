#include "cgame/query.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <random>
#include <set>

#include "util.hpp"

namespace cgame {

const char* to_string(Quantifier q) {
  switch (q) {
    case Quantifier::forall: return "forall ne";
    case Quantifier::exists: return "exists ne";
    case Quantifier::sampled: return "sampled";
  }
  return "?";
}

const char* to_string(CmpOp op) {
  switch (op) {
    case CmpOp::lt: return "<";
    case CmpOp::le: return "<=";
    case CmpOp::eq: return "=";
    case CmpOp::ge: return ">=";
    case CmpOp::gt: return ">";
    case CmpOp::ne: return "!=";
  }
  return "?";
}

const char* to_string(VisibilityTag tag) {
  switch (tag) {
    case VisibilityTag::pre_policy: return "pre_policy";
    case VisibilityTag::post_policy: return "post_policy";
    case VisibilityTag::interleaved: return "interleaved";
  }
  return "?";
}

// ---------------------------------------------------------------------------
// Printing

namespace {

std::string print(const Expr& e);

std::string print_event(const Event& ev) {
  std::vector<std::string> xs;
  for (const auto& [var, val] : ev) xs.push_back(var + "=" + val);
  return join(xs, ", ");
}

std::string print(const Expr& e) {
  return std::visit(
      [](const auto& n) -> std::string {
        using T = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<T, ConstExpr>) return format_number(n.value);
        else if constexpr (std::is_same_v<T, ProbExpr>) return "P(" + print_event(n.event) + ")";
        else if constexpr (std::is_same_v<T, ExpectExpr>) {
          if (n.kind == ExpectExpr::Kind::agent) return "E[" + std::to_string(n.agent) + "]";
          if (n.kind == ExpectExpr::Kind::total) return "E[total]";
          return "E[" + n.variable + "]";
        } else if constexpr (std::is_same_v<T, BinaryExpr>) {
          return "(" + print(*n.lhs) + " " + n.op + " " + print(*n.rhs) + ")";
        } else {
          return "-" + print(*n.operand);
        }
      },
      e.node);
}

std::string print(const Formula& f) {
  return std::visit(
      [](const auto& n) -> std::string {
        using T = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<T, CompareFormula>)
          return print(*n.lhs) + " " + to_string(n.op) + " " + print(*n.rhs);
        else if constexpr (std::is_same_v<T, NotFormula>) return "not (" + print(*n.operand) + ")";
        else if constexpr (std::is_same_v<T, AndFormula>) return "(" + print(*n.lhs) + " and " + print(*n.rhs) + ")";
        else return "(" + print(*n.lhs) + " or " + print(*n.rhs) + ")";
      },
      f.node);
}

}  // namespace

std::string QueryAST::to_string() const {
  std::string s = cgame::to_string(quantifier);
  std::vector<std::string> ds;
  if (directives.mix_ties) ds.push_back("mix-ties");
  if (directives.behavioral) ds.push_back("behavioral");
  if (directives.epsilon != 1e-9) ds.push_back("eps=" + format_number(directives.epsilon));
  if (!ds.empty()) s += " [" + join(ds, ", ") + "]";
  s += ": ";
  if (is_formula()) s += print(*std::get<FormulaPtr>(body));
  else s += print(*std::get<ExprPtr>(body));
  return s;
}

// ---------------------------------------------------------------------------
// Parsing

namespace {

class QueryParser {
 public:
  explicit QueryParser(const std::string& text) : s_(text) {}

  QueryAST parse() {
    QueryAST q;
    const std::string mode = word();
    if (mode == "forall" || mode == "exists") {
      const std::size_t at = pos_;
      if (word() != "ne") fail("expected 'ne' after '" + mode + "'", at);
      q.quantifier = mode == "forall" ? Quantifier::forall : Quantifier::exists;
    } else if (mode == "sampled") {
      q.quantifier = Quantifier::sampled;
    } else {
      fail("expected 'forall ne', 'exists ne' or 'sampled'", 0);
    }
    if (accept('[')) {
      do {
        const std::size_t at = pos_;
        const std::string d = word(true);
        if (d == "mix-ties") q.directives.mix_ties = true;
        else if (d == "behavioral") q.directives.behavioral = true;
        else if (d == "eps") {
          expect('=');
          q.directives.epsilon = number();
          if (!(q.directives.epsilon >= 0)) fail("eps must be non-negative", at);
        } else fail("unknown directive '" + d + "'", at);
      } while (accept(','));
      expect(']');
    }
    expect(':');

    const std::size_t start = pos_;
    try {
      ExprPtr e = expr();
      skip();
      if (pos_ == s_.size()) {
        q.body = e;
        return q;
      }
    } catch (const QueryParseError&) {
    }
    pos_ = start;
    q.body = formula();
    skip();
    if (pos_ != s_.size()) fail("unexpected trailing input", pos_);
    return q;
  }

 private:
  [[noreturn]] void fail(const std::string& msg, std::size_t at) const { throw QueryParseError(msg, at + 1); }

  void skip() {
    while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
  }
  bool peek(char c) {
    skip();
    return pos_ < s_.size() && s_[pos_] == c;
  }
  bool accept(char c) {
    if (!peek(c)) return false;
    ++pos_;
    return true;
  }
  void expect(char c) {
    if (!accept(c)) fail(std::string("expected '") + c + "'", pos_);
  }
  bool accept_str(std::string_view t) {
    skip();
    if (s_.compare(pos_, t.size(), t) != 0) return false;
    pos_ += t.size();
    return true;
  }
  static bool ident_char(char c, bool hyphen) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || (hyphen && c == '-');
  }
  std::string peek_word() {
    skip();
    std::size_t e = pos_;
    while (e < s_.size() && ident_char(s_[e], false)) ++e;
    return s_.substr(pos_, e - pos_);
  }
  std::string word(bool hyphen = false) {
    skip();
    const std::size_t b = pos_;
    while (pos_ < s_.size() && ident_char(s_[pos_], hyphen)) ++pos_;
    if (b == pos_) fail("expected a word", b);
    return s_.substr(b, pos_ - b);
  }
  double number() {
    skip();
    const std::size_t b = pos_;
    if (pos_ < s_.size() && (s_[pos_] == '-' || s_[pos_] == '+')) ++pos_;
    while (pos_ < s_.size() && (std::isalnum(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '.' ||
                                ((s_[pos_] == '-' || s_[pos_] == '+') && (s_[pos_ - 1] == 'e' || s_[pos_ - 1] == 'E'))))
      ++pos_;
    auto v = parse_number(s_.substr(b, pos_ - b));
    if (!v) fail("expected a number", b);
    return *v;
  }
  // Value labels: identifiers or numbers.
  std::string value() {
    skip();
    const std::size_t b = pos_;
    if (pos_ < s_.size() && (s_[pos_] == '-' || s_[pos_] == '+')) ++pos_;
    while (pos_ < s_.size() && (ident_char(s_[pos_], false) || s_[pos_] == '.')) ++pos_;
    if (b == pos_) fail("expected a value", b);
    return s_.substr(b, pos_ - b);
  }

  static ExprPtr make(Expr e) { return std::make_shared<const Expr>(std::move(e)); }
  static FormulaPtr makef(Formula f) { return std::make_shared<const Formula>(std::move(f)); }

  ExprPtr expr() {
    ExprPtr lhs = term();
    while (true) {
      if (accept('+')) lhs = make(Expr{BinaryExpr{'+', lhs, term()}});
      else if (accept('-')) lhs = make(Expr{BinaryExpr{'-', lhs, term()}});
      else return lhs;
    }
  }
  ExprPtr term() {
    ExprPtr lhs = unary();
    while (accept('*')) lhs = make(Expr{BinaryExpr{'*', lhs, unary()}});
    return lhs;
  }
  ExprPtr unary() {
    if (accept('-')) return make(Expr{NegExpr{unary()}});
    return primary();
  }
  ExprPtr primary() {
    skip();
    const std::size_t at = pos_;
    if (accept('(')) {
      ExprPtr e = expr();
      expect(')');
      return e;
    }
    if (pos_ < s_.size() && (std::isdigit(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '.'))
      return make(Expr{ConstExpr{number()}});
    const std::string w = peek_word();
    if (w == "P") {
      word();
      expect('(');
      ProbExpr p;
      do {
        const std::string var = word();
        expect('=');
        p.event.emplace_back(var, value());
      } while (accept(','));
      expect(')');
      return make(Expr{p});
    }
    if (w == "E") {
      word();
      expect('[');
      ExpectExpr e;
      skip();
      const std::size_t b = pos_;
      const std::string inner = word();
      if (inner == "total") {
        e.kind = ExpectExpr::Kind::total;
      } else if (std::all_of(inner.begin(), inner.end(), [](char c) { return std::isdigit(static_cast<unsigned char>(c)); })) {
        e.kind = ExpectExpr::Kind::agent;
        e.agent = std::stoi(inner);
        if (e.agent < 1) fail("agents are numbered from 1", b);
      } else {
        e.kind = ExpectExpr::Kind::variable;
        e.variable = inner;
      }
      expect(']');
      return make(Expr{e});
    }
    fail("expected P(...), E[...], a number or '('", at);
  }

  std::optional<CmpOp> cmp() {
    if (accept_str("<=")) return CmpOp::le;
    if (accept_str(">=")) return CmpOp::ge;
    if (accept_str("!=")) return CmpOp::ne;
    if (accept_str("==")) return CmpOp::eq;
    if (accept_str("<")) return CmpOp::lt;
    if (accept_str(">")) return CmpOp::gt;
    if (accept_str("=")) return CmpOp::eq;
    return std::nullopt;
  }

  FormulaPtr formula() {
    FormulaPtr lhs = conj();
    while (peek_word() == "or") {
      word();
      lhs = makef(Formula{OrFormula{lhs, conj()}});
    }
    return lhs;
  }
  FormulaPtr conj() {
    FormulaPtr lhs = neg();
    while (peek_word() == "and") {
      word();
      lhs = makef(Formula{AndFormula{lhs, neg()}});
    }
    return lhs;
  }
  FormulaPtr neg() {
    if (peek_word() == "not") {
      word();
      return makef(Formula{NotFormula{neg()}});
    }
    if (peek('(')) {
      const std::size_t start = pos_;
      try {
        expect('(');
        FormulaPtr f = formula();
        expect(')');
        skip();
        const bool continues_expr =
            pos_ < s_.size() && std::string_view("+-*<>=!").find(s_[pos_]) != std::string_view::npos;
        if (!continues_expr) return f;
      } catch (const QueryParseError&) {
      }
      pos_ = start;
    }
    return atom();
  }
  FormulaPtr atom() {
    ExprPtr lhs = expr();
    skip();
    const std::size_t at = pos_;
    auto op = cmp();
    if (!op) fail("expected a comparison", at);
    return makef(Formula{CompareFormula{*op, lhs, expr()}});
  }

  const std::string& s_;
  std::size_t pos_ = 0;
};

}  // namespace

QueryAST parse_query(const std::string& text) { return QueryParser(text).parse(); }

// ---------------------------------------------------------------------------
// Evaluation

namespace {

std::vector<std::pair<std::string, std::size_t>> resolve_event(const CausalGame& game, const Event& ev) {
  std::vector<std::pair<std::string, std::size_t>> out;
  for (const auto& [var, val] : ev) {
    if (!game.has_variable(var)) throw Error("query references unknown variable " + var);
    out.emplace_back(var, game.value_index(var, val));
  }
  return out;
}

void check_expr(const Expr& e, const CausalGame& game) {
  std::visit(
      [&](const auto& n) {
        using T = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<T, ProbExpr>) {
          (void)resolve_event(game, n.event);
        } else if constexpr (std::is_same_v<T, ExpectExpr>) {
          if (n.kind == ExpectExpr::Kind::agent && (n.agent < 1 || n.agent > game.agents()))
            throw Error("query references unknown agent " + std::to_string(n.agent));
          if (n.kind == ExpectExpr::Kind::variable) {
            if (!game.has_variable(n.variable)) throw Error("query references unknown variable " + n.variable);
            if (game.variable(n.variable).kind != VarKind::utility)
              throw Error("E[" + n.variable + "] needs a utility variable");
          }
        } else if constexpr (std::is_same_v<T, BinaryExpr>) {
          check_expr(*n.lhs, game);
          check_expr(*n.rhs, game);
        } else if constexpr (std::is_same_v<T, NegExpr>) {
          check_expr(*n.operand, game);
        }
      },
      e.node);
}

void check_formula(const Formula& f, const CausalGame& game) {
  std::visit(
      [&](const auto& n) {
        using T = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<T, CompareFormula>) {
          check_expr(*n.lhs, game);
          check_expr(*n.rhs, game);
        } else if constexpr (std::is_same_v<T, NotFormula>) {
          check_formula(*n.operand, game);
        } else {
          check_formula(*n.lhs, game);
          check_formula(*n.rhs, game);
        }
      },
      f.node);
}

const JointDistribution& joint_of(const CausalGame& game, const PolicyProfile& profile,
                                  std::optional<JointDistribution>& joint) {
  if (!joint) joint.emplace(induced_joint(game, profile));
  return *joint;
}

}  // namespace

void check_query(const QueryAST& q, const CausalGame& game) {
  if (q.is_formula()) check_formula(*std::get<FormulaPtr>(q.body), game);
  else check_expr(*std::get<ExprPtr>(q.body), game);
}

double evaluate_expr(const Expr& e, const CausalGame& game, const PolicyProfile& profile,
                     std::optional<JointDistribution>& joint) {
  return std::visit(
      [&](const auto& n) -> double {
        using T = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<T, ConstExpr>) {
          return n.value;
        } else if constexpr (std::is_same_v<T, ProbExpr>) {
          const auto ev = resolve_event(game, n.event);
          return joint_of(game, profile, joint).event_probability(ev);
        } else if constexpr (std::is_same_v<T, ExpectExpr>) {
          if (n.kind == ExpectExpr::Kind::agent) {
            if (n.agent < 1 || n.agent > game.agents())
              throw Error("query references unknown agent " + std::to_string(n.agent));
            return expected_utility(game, profile, n.agent);
          }
          if (n.kind == ExpectExpr::Kind::total) return expected_total_utility(game, profile);
          const Variable& u = game.variable(n.variable);
          if (u.kind != VarKind::utility) throw Error("E[" + n.variable + "] needs a utility variable");
          const auto m = joint_of(game, profile, joint).marginal(n.variable);
          double s = 0.0;
          for (std::size_t k = 0; k < m.size(); ++k) s += m[k] * u.payoffs[k];
          return s;
        } else if constexpr (std::is_same_v<T, BinaryExpr>) {
          const double a = evaluate_expr(*n.lhs, game, profile, joint);
          const double b = evaluate_expr(*n.rhs, game, profile, joint);
          if (n.op == '+') return a + b;
          if (n.op == '-') return a - b;
          return a * b;
        } else {
          return -evaluate_expr(*n.operand, game, profile, joint);
        }
      },
      e.node);
}

bool evaluate_formula(const Formula& f, const CausalGame& game, const PolicyProfile& profile, double eps,
                      std::optional<JointDistribution>& joint) {
  return std::visit(
      [&](const auto& n) -> bool {
        using T = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<T, CompareFormula>) {
          const double a = evaluate_expr(*n.lhs, game, profile, joint);
          const double b = evaluate_expr(*n.rhs, game, profile, joint);
          switch (n.op) {
            case CmpOp::lt: return a < b - eps;
            case CmpOp::le: return a <= b + eps;
            case CmpOp::eq: return std::abs(a - b) <= eps;
            case CmpOp::ge: return a >= b - eps;
            case CmpOp::gt: return a > b + eps;
            case CmpOp::ne: return std::abs(a - b) > eps;
          }
          return false;
        } else if constexpr (std::is_same_v<T, NotFormula>) {
          return !evaluate_formula(*n.operand, game, profile, eps, joint);
        } else if constexpr (std::is_same_v<T, AndFormula>) {
          return evaluate_formula(*n.lhs, game, profile, eps, joint) &&
                 evaluate_formula(*n.rhs, game, profile, eps, joint);
        } else {
          return evaluate_formula(*n.lhs, game, profile, eps, joint) ||
                 evaluate_formula(*n.rhs, game, profile, eps, joint);
        }
      },
      f.node);
}

namespace {

constexpr std::size_t kMaxLeaves = 100000;

std::vector<PolicyProfile> rational_outcomes(const CausalGame& game, bool behavioral, double eps) {
  std::vector<PolicyProfile> out = pure_nash(game, eps).outcomes;
  if (behavioral && !game.strategic_agents().empty()) {
    for (auto& p : behavioral_nash_small(game, eps).extreme_points.outcomes) {
      const bool seen = std::any_of(out.begin(), out.end(), [&](const PolicyProfile& q) { return q.equivalent(p); });
      if (!seen) out.push_back(std::move(p));
    }
  }
  return out;
}

PolicyProfile restrict_to(const CausalGame& game, const PolicyProfile& p, const std::vector<int>& agents) {
  PolicyProfile out;
  for (int a : agents)
    for (const auto& d : game.free_decisions_of(a)) out.set(p.at(d));
  return out;
}

// Uniform mixture, per agent, over that agent's distinct rules.
PolicyProfile mix_ties(const CausalGame& game, const std::vector<PolicyProfile>& outcomes, const std::vector<int>& agents) {
  PolicyProfile out;
  for (int a : agents) {
    std::vector<PolicyProfile> distinct;
    for (const auto& p : outcomes) {
      auto r = restrict_to(game, p, {a});
      if (std::none_of(distinct.begin(), distinct.end(), [&](const PolicyProfile& q) { return q.equivalent(r); }))
        distinct.push_back(std::move(r));
    }
    for (const auto& d : game.free_decisions_of(a)) {
      DecisionRule avg = distinct.front().at(d);
      for (std::size_t k = 1; k < distinct.size(); ++k) {
        const auto& other = distinct[k].at(d);
        for (std::size_t r = 0; r < avg.rows(); ++r)
          for (std::size_t v = 0; v < avg.card(); ++v) avg.at(r, v) += other.prob(r, v);
      }
      for (std::size_t r = 0; r < avg.rows(); ++r)
        for (std::size_t v = 0; v < avg.card(); ++v) avg.at(r, v) /= static_cast<double>(distinct.size());
      out.set(std::move(avg));
    }
  }
  return out;
}

// Agent owning the decision (or decision rule) a primitive acts on, if any.
std::optional<int> acted_agent(const CausalGame& before, const CausalGame& after, const PrimitiveIntervention& p) {
  const std::string& v = p.target();
  const CausalGame& g = before.has_variable(v) ? before : after;
  if (!g.has_variable(v)) return std::nullopt;
  const Variable& var = g.variable(v);
  if (var.kind != VarKind::decision) return std::nullopt;
  return var.agent;
}

bool same_set(std::vector<std::string> a, std::vector<std::string> b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  return a == b;
}

}  // namespace

QueryResult evaluate_query(const QueryJob& job) {
  const QueryAST& q = job.query;
  const Decomposition d = job.stages ? explicit_stages(job.game, job.interventions, *job.stages)
                                     : decompose(job.game, job.interventions, job.visibility, job.decompose_options);
  QueryResult result;
  result.final_game = d.games.empty() ? job.game : d.games.back();
  check_query(q, result.final_game);

  std::set<int> staged;
  for (const auto& s : d.stages) staged.insert(s.agents.begin(), s.agents.end());

  std::mt19937_64 rng(job.seed);
  std::set<int> overridden;
  for (std::size_t j = 0; j < d.stages.size(); ++j) {
    const Stage& stage = d.stages[j];
    const CausalGame& before = j == 0 ? job.game : d.games[j - 1];
    const CausalGame& now = d.games[j];
    StageTrace t;
    t.index = j;
    t.agents = stage.agents;
    t.steps = stage.steps;

    std::set<int> remaining;
    for (std::size_t k = j; k < d.stages.size(); ++k) remaining.insert(d.stages[k].agents.begin(), d.stages[k].agents.end());
    for (int a : overridden) remaining.erase(a);
    t.still_choosing.assign(remaining.begin(), remaining.end());

    for (const auto& p : stage.primitives) {
      t.primitives.push_back(p.describe());
      if (auto a = acted_agent(before, now, p); a && overridden.insert(*a).second) t.overridden.push_back(*a);
    }

    if (stage.agents.empty()) {
      t.candidates.push_back(PolicyProfile{});
    } else {
      const auto outcomes = rational_outcomes(now, q.directives.behavioral, job.equilibrium_epsilon);
      if (outcomes.empty()) throw Error("no rational outcome found at stage " + std::to_string(j));
      t.outcomes = outcomes.size();
      if (q.directives.mix_ties) {
        t.candidates.push_back(mix_ties(now, outcomes, stage.agents));
        if (q.quantifier == Quantifier::sampled) t.chosen = 0;
      } else {
        std::vector<std::size_t> index_of(outcomes.size());
        for (std::size_t k = 0; k < outcomes.size(); ++k) {
          auto r = restrict_to(now, outcomes[k], stage.agents);
          auto it = std::find_if(t.candidates.begin(), t.candidates.end(),
                                 [&](const PolicyProfile& c) { return c.equivalent(r); });
          index_of[k] = static_cast<std::size_t>(it - t.candidates.begin());
          if (it == t.candidates.end()) t.candidates.push_back(std::move(r));
        }
        if (q.quantifier == Quantifier::sampled) {
          std::uniform_int_distribution<std::size_t> pick(0, outcomes.size() - 1);
          t.chosen = index_of[pick(rng)];
        }
      }
    }
    if (q.quantifier == Quantifier::sampled && !t.chosen) t.chosen = 0;
    result.trace.push_back(std::move(t));
  }

  for (int a = 1; a <= job.game.agents(); ++a)
    if (!staged.count(a) && !result.final_game.free_decisions_of(a).empty())
      throw Error("agent " + std::to_string(a) + " is not assigned to any stage");

  // Enumerate leaves.
  std::vector<std::vector<std::size_t>> leaves;
  if (q.quantifier == Quantifier::sampled) {
    std::vector<std::size_t> c;
    for (const auto& t : result.trace) c.push_back(*t.chosen);
    leaves.push_back(std::move(c));
  } else {
    std::size_t total = 1;
    for (const auto& t : result.trace) {
      total *= t.candidates.size();
      if (total > kMaxLeaves) throw Error("too many outcome combinations to enumerate");
    }
    for (std::size_t idx = 0; idx < total; ++idx) {
      std::vector<std::size_t> c(result.trace.size());
      std::size_t rest = idx;
      for (std::size_t k = result.trace.size(); k-- > 0;) {
        c[k] = rest % result.trace[k].candidates.size();
        rest /= result.trace[k].candidates.size();
      }
      leaves.push_back(std::move(c));
    }
  }

  const CausalGame& fin = result.final_game;
  const double eps = q.directives.epsilon;
  for (auto& choice : leaves) {
    PolicyProfile fixed;
    for (std::size_t j = 0; j < choice.size(); ++j) fixed = fixed.merged(result.trace[j].candidates[choice[j]]);
    QueryLeaf leaf;
    leaf.choices = choice;
    for (const auto& dname : fin.free_decisions()) {
      if (!fixed.contains(dname)) throw Error("no decision rule for " + dname + " in the final game");
      const auto& rule = fixed.at(dname);
      if (!same_set(rule.parents(), fin.parents(dname)))
        throw Error("the rule fixed for " + dname + " no longer matches its parents in the final game");
      leaf.profile.set(rule.reordered(fin.parents(dname)));
    }
    leaf.utilities = expected_utilities(fin, leaf.profile);
    std::optional<JointDistribution> joint;
    if (q.is_formula()) leaf.verdict = evaluate_formula(*std::get<FormulaPtr>(q.body), fin, leaf.profile, eps, joint);
    else leaf.value = evaluate_expr(*std::get<ExprPtr>(q.body), fin, leaf.profile, joint);
    result.leaves.push_back(std::move(leaf));
  }

  if (q.is_formula()) {
    if (q.quantifier == Quantifier::exists)
      result.verdict = std::any_of(result.leaves.begin(), result.leaves.end(), [](const QueryLeaf& l) { return *l.verdict; });
    else
      result.verdict = std::all_of(result.leaves.begin(), result.leaves.end(), [](const QueryLeaf& l) { return *l.verdict; });
  } else {
    const double v0 = *result.leaves.front().value;
    const bool agree = std::all_of(result.leaves.begin(), result.leaves.end(),
                                   [&](const QueryLeaf& l) { return std::abs(*l.value - v0) <= eps; });
    if (agree) result.value = v0;
  }
  return result;
}

std::map<int, VisibilityTag> classify_visibility(const std::vector<LabelledIntervention>& interventions,
                                                 const Decomposition& d) {
  std::set<std::string> effective;
  for (const auto& li : interventions)
    if (!std::holds_alternative<UnfixSpec>(li.spec)) effective.insert(li.label);
  std::map<int, VisibilityTag> out;
  std::set<std::string> seen;
  for (const auto& stage : d.stages) {
    seen.insert(stage.steps.begin(), stage.steps.end());
    const VisibilityTag tag = seen.empty()         ? VisibilityTag::post_policy
                              : seen == effective ? VisibilityTag::pre_policy
                                                  : VisibilityTag::interleaved;
    for (int a : stage.agents) out[a] = tag;
  }
  return out;
}

SpecEnvReport check_spec_env(const CausalGame& game, const CompoundIntervention& interventions, const Event& event,
                             SpecDirection direction, bool behavioral, double eps) {
  const CausalGame after = apply_compound(game, interventions).game;
  auto probabilities = [&](const CausalGame& g) {
    const auto ev = resolve_event(g, event);
    std::vector<double> ps;
    for (const auto& p : rational_outcomes(g, behavioral, kEquilibriumEpsilon))
      ps.push_back(induced_joint(g, p).event_probability(ev));
    if (ps.empty()) throw Error("no rational outcome found");
    return ps;
  };
  const auto before_ps = probabilities(game);
  const auto after_ps = probabilities(after);
  SpecEnvReport r;
  r.before_outcomes = before_ps.size();
  r.after_outcomes = after_ps.size();
  if (direction == SpecDirection::at_least) {
    r.before_extreme = *std::max_element(before_ps.begin(), before_ps.end());
    r.after_extreme = *std::min_element(after_ps.begin(), after_ps.end());
    r.holds = r.after_extreme >= r.before_extreme - eps;
  } else {
    r.before_extreme = *std::min_element(before_ps.begin(), before_ps.end());
    r.after_extreme = *std::max_element(after_ps.begin(), after_ps.end());
    r.holds = r.after_extreme <= r.before_extreme + eps;
  }
  return r;
}

}  // namespace cgame
