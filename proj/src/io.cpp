#include "cgame/io.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

#include "cgame/query.hpp"
#include "util.hpp"

namespace cgame {

ParseError::ParseError(const std::string& source, std::size_t line, std::size_t column, const std::string& message)
    : Error(source + ":" + std::to_string(line) + (column ? ":" + std::to_string(column) : std::string()) + ": " +
            message),
      line_(line),
      column_(column) {}

namespace {

struct Token {
  std::string text;
  std::size_t col = 0;
};

struct Line {
  std::size_t no = 0;
  std::string raw;
  std::vector<Token> toks;
};

std::vector<Line> lex(const std::string& text) {
  std::vector<Line> out;
  std::istringstream in(text);
  std::string raw;
  std::size_t no = 0;
  while (std::getline(in, raw)) {
    ++no;
    if (!raw.empty() && raw.back() == '\r') raw.pop_back();
    std::string body = raw.substr(0, raw.find('#'));
    Line line{no, body, {}};
    std::size_t i = 0;
    while (i < body.size()) {
      if (std::isspace(static_cast<unsigned char>(body[i]))) {
        ++i;
        continue;
      }
      // ":" and "=" are tokens of their own.
      if (body[i] == ':' || body[i] == '=') {
        line.toks.push_back({std::string(1, body[i]), i + 1});
        ++i;
        continue;
      }
      const std::size_t b = i;
      while (i < body.size() && !std::isspace(static_cast<unsigned char>(body[i])) && body[i] != ':' && body[i] != '=')
        ++i;
      line.toks.push_back({body.substr(b, i - b), b + 1});
    }
    if (!line.toks.empty()) out.push_back(std::move(line));
  }
  return out;
}

class Reader {
 public:
  Reader(std::vector<Line> lines, std::string source) : lines_(std::move(lines)), source_(std::move(source)) {}

  bool done() const { return i_ >= lines_.size(); }
  const Line& next() { return lines_[i_++]; }
  const std::string& source() const { return source_; }

  [[noreturn]] void fail(const Line& l, std::size_t col, const std::string& msg) const {
    throw ParseError(source_, l.no, col, msg);
  }
  [[noreturn]] void fail(const Line& l, const Token& t, const std::string& msg) const {
    throw ParseError(source_, l.no, t.col, msg);
  }

  /// Lines up to the matching `end`.
  std::vector<Line> block(const Line& header) {
    std::vector<Line> out;
    while (!done()) {
      const Line& l = next();
      if (l.toks[0].text == "end") {
        if (l.toks.size() != 1) fail(l, l.toks[1], "unexpected text after 'end'");
        return out;
      }
      out.push_back(l);
    }
    fail(header, 0, "block is not closed with 'end'");
  }

 private:
  std::vector<Line> lines_;
  std::string source_;
  std::size_t i_ = 0;
};

// Arithmetic over numbers and parameters: + - * / and parentheses.
class Arith {
 public:
  Arith(const std::string& s, const ParamMap& params) : s_(s), params_(params) {}
  std::optional<double> eval(std::string* error) {
    try {
      double v = sum();
      skip();
      if (pos_ != s_.size()) throw std::runtime_error("unexpected '" + s_.substr(pos_) + "'");
      return v;
    } catch (const std::runtime_error& e) {
      *error = e.what();
      return std::nullopt;
    }
  }

 private:
  void skip() {
    while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
  }
  bool accept(char c) {
    skip();
    if (pos_ < s_.size() && s_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }
  double sum() {
    double v = product();
    while (true) {
      if (accept('+')) v += product();
      else if (accept('-')) v -= product();
      else return v;
    }
  }
  double product() {
    double v = unary();
    while (true) {
      if (accept('*')) v *= unary();
      else if (accept('/')) v /= unary();
      else return v;
    }
  }
  double unary() {
    if (accept('-')) return -unary();
    if (accept('+')) return unary();
    if (accept('(')) {
      double v = sum();
      if (!accept(')')) throw std::runtime_error("expected ')'");
      return v;
    }
    skip();
    const std::size_t b = pos_;
    if (pos_ < s_.size() && (std::isalpha(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '_')) {
      while (pos_ < s_.size() && (std::isalnum(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '_')) ++pos_;
      const std::string name = s_.substr(b, pos_ - b);
      auto it = params_.find(name);
      if (it == params_.end()) throw std::runtime_error("unknown parameter '" + name + "'");
      return it->second;
    }
    while (pos_ < s_.size() && (std::isdigit(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '.' ||
                                s_[pos_] == 'e' || s_[pos_] == 'E' ||
                                ((s_[pos_] == '-' || s_[pos_] == '+') && pos_ > b &&
                                 (s_[pos_ - 1] == 'e' || s_[pos_ - 1] == 'E'))))
      ++pos_;
    auto v = parse_number(s_.substr(b, pos_ - b));
    if (!v) throw std::runtime_error("expected a number");
    return *v;
  }

  const std::string& s_;
  const ParamMap& params_;
  std::size_t pos_ = 0;
};

double eval_number(const Reader& r, const Line& l, const Token& t, const ParamMap& params) {
  std::string err;
  auto v = Arith(t.text, params).eval(&err);
  if (!v) r.fail(l, t, "bad number '" + t.text + "': " + err);
  return *v;
}

std::string rest_text(const Line& l, std::size_t from) {
  if (from >= l.toks.size()) return {};
  return std::string(trim(l.raw.substr(l.toks[from].col - 1)));
}

using VarLookup = std::function<const Variable*(const std::string&)>;

// Rows `ctx... : p1 p2 ...` or `ctx... = label`; `*` matches any parent value.
TabularCpd build_table(const Reader& r, const Line& header, const std::vector<Line>& rows, const Variable& var,
                       const std::vector<std::string>& parents, const VarLookup& lookup, const ParamMap& params) {
  std::vector<const Variable*> pvars;
  std::vector<std::size_t> cards;
  for (const auto& p : parents) {
    const Variable* pv = lookup(p);
    if (!pv) r.fail(header, 0, "table for " + var.name + " uses unknown parent " + p);
    pvars.push_back(pv);
    cards.push_back(pv->cardinality());
  }
  TabularCpd t(var.name, var.cardinality(), parents, cards,
               std::vector<double>(var.cardinality() * [&] {
                 std::size_t n = 1;
                 for (auto c : cards) n *= c;
                 return n;
               }(), 0.0));
  std::vector<int> covered(t.rows(), 0);
  for (const auto& l : rows) {
    std::size_t sep = 0;
    while (sep < l.toks.size() && l.toks[sep].text != ":" && l.toks[sep].text != "=") ++sep;
    if (sep == l.toks.size()) r.fail(l, 0, "table row needs ':' or '='");
    if (sep != parents.size())
      r.fail(l, l.toks[0], "row gives " + std::to_string(sep) + " parent values, expected " +
                               std::to_string(parents.size()) + " (" + join(parents, " ") + ")");
    std::vector<std::vector<std::size_t>> options(parents.size());
    for (std::size_t k = 0; k < parents.size(); ++k) {
      const Token& tok = l.toks[k];
      if (tok.text == "*") {
        for (std::size_t v = 0; v < cards[k]; ++v) options[k].push_back(v);
      } else {
        auto idx = pvars[k]->value_index(tok.text);
        if (!idx) r.fail(l, tok, "'" + tok.text + "' is not a value of " + parents[k]);
        options[k].push_back(*idx);
      }
    }
    std::vector<double> dist(var.cardinality(), 0.0);
    if (l.toks[sep].text == "=") {
      if (l.toks.size() != sep + 2) r.fail(l, l.toks[sep], "expected one value after '='");
      auto idx = var.value_index(l.toks[sep + 1].text);
      if (!idx) r.fail(l, l.toks[sep + 1], "'" + l.toks[sep + 1].text + "' is not a value of " + var.name);
      dist[*idx] = 1.0;
    } else {
      if (l.toks.size() - sep - 1 != var.cardinality())
        r.fail(l, l.toks[sep], "expected " + std::to_string(var.cardinality()) + " probabilities");
      double sum = 0.0;
      for (std::size_t v = 0; v < var.cardinality(); ++v) {
        dist[v] = eval_number(r, l, l.toks[sep + 1 + v], params);
        if (dist[v] < -kProbEpsilon || dist[v] > 1 + kProbEpsilon)
          r.fail(l, l.toks[sep + 1 + v], "probability " + format_number(dist[v]) + " outside [0, 1]");
        sum += dist[v];
      }
      if (std::abs(sum - 1.0) > kProbEpsilon)
        r.fail(l, l.toks[sep + 1], "probabilities sum to " + format_number(sum) + ", not 1");
    }
    // Expand wildcards.
    std::vector<std::size_t> pick(parents.size(), 0);
    while (true) {
      std::vector<std::size_t> ctx(parents.size());
      for (std::size_t k = 0; k < parents.size(); ++k) ctx[k] = options[k][pick[k]];
      const std::size_t row = t.row_index(ctx);
      if (covered[row]++) r.fail(l, l.toks[0], "context already given for " + var.name);
      for (std::size_t v = 0; v < var.cardinality(); ++v) t.at(row, v) = dist[v];
      std::size_t k = parents.size();
      while (k > 0 && ++pick[k - 1] == options[k - 1].size()) pick[--k] = 0;
      if (k == 0) break;
    }
  }
  for (std::size_t row = 0; row < t.rows(); ++row)
    if (!covered[row]) {
      std::vector<std::string> labels;
      const auto ctx = t.row_context(row);
      for (std::size_t k = 0; k < ctx.size(); ++k) labels.push_back(pvars[k]->domain[ctx[k]]);
      r.fail(header, 0, "table for " + var.name + " has no row for context (" + join(labels, ", ") + ")");
    }
  return t;
}

struct VarDecl {
  Variable var;
  std::vector<std::string> parents;
  std::optional<std::size_t> position;
  std::vector<std::string> children;
};

// NAME chance|decision A|utility A domain ... [parents ...] [position N] [children ...]
VarDecl parse_var_decl(const Reader& r, const Line& l, std::size_t at, const ParamMap& params, bool scenario) {
  const auto& t = l.toks;
  auto need = [&](std::size_t i, const std::string& what) -> const Token& {
    if (i >= t.size()) r.fail(l, 0, "expected " + what);
    return t[i];
  };
  const Token& name = need(at, "a variable name");
  if (!is_identifier(name.text)) r.fail(l, name, "'" + name.text + "' is not a valid name");
  const Token& kind = need(at + 1, "chance, decision or utility");
  std::size_t i = at + 2;
  int agent = 0;
  if (kind.text == "decision" || kind.text == "utility") {
    const Token& a = need(i++, "an agent number");
    auto v = parse_number(a.text);
    if (!v || *v != static_cast<int>(*v) || *v < 1) r.fail(l, a, "agent must be a positive integer");
    agent = static_cast<int>(*v);
  } else if (kind.text != "chance") {
    r.fail(l, kind, "unknown variable kind '" + kind.text + "'");
  }
  const Token& dom = need(i++, "'domain'");
  if (dom.text != "domain") r.fail(l, dom, "expected 'domain'");
  std::vector<Token> values;
  while (i < t.size() && t[i].text != "parents" && t[i].text != "position" && t[i].text != "children")
    values.push_back(t[i++]);
  if (values.empty()) r.fail(l, dom, "empty domain");

  VarDecl d;
  if (kind.text == "utility") {
    std::vector<double> xs;
    for (const auto& v : values) xs.push_back(eval_number(r, l, v, params));
    d.var = Variable::utility(name.text, agent, xs);
  } else {
    std::vector<std::string> labels;
    for (const auto& v : values) labels.push_back(v.text);
    d.var = kind.text == "chance" ? Variable::chance(name.text, labels) : Variable::decision(name.text, agent, labels);
  }
  while (i < t.size()) {
    const Token& kw = t[i++];
    std::vector<std::string> items;
    while (i < t.size() && t[i].text != "parents" && t[i].text != "position" && t[i].text != "children")
      items.push_back(t[i++].text);
    if (kw.text == "parents") {
      d.parents = items;
    } else if (kw.text == "position" && scenario) {
      if (items.size() != 1) r.fail(l, kw, "expected one position");
      auto v = parse_number(items[0]);
      if (!v || *v < 0 || *v != static_cast<std::size_t>(*v)) r.fail(l, kw, "position must be a non-negative integer");
      d.position = static_cast<std::size_t>(*v);
    } else if (kw.text == "children" && scenario) {
      d.children = items;
    } else {
      r.fail(l, kw, "unexpected '" + kw.text + "'");
    }
  }
  return d;
}

void collect_params(const Reader& r, const Line& l, ParamMap& params, std::set<std::string>& declared,
                    const ParamMap& overrides) {
  if (l.toks.size() < 4 || l.toks[2].text != "=") r.fail(l, 0, "expected 'param NAME = VALUE'");
  const std::string& name = l.toks[1].text;
  if (!is_identifier(name)) r.fail(l, l.toks[1], "'" + name + "' is not a valid parameter name");
  if (!declared.insert(name).second) r.fail(l, l.toks[1], "parameter " + name + " declared twice");
  if (auto it = overrides.find(name); it != overrides.end()) {
    params[name] = it->second;
    return;
  }
  Token expr{rest_text(l, 3), l.toks[3].col};
  params[name] = eval_number(r, l, expr, params);
}

void check_overrides(const ParamMap& overrides, const std::set<std::string>& declared) {
  for (const auto& [k, v] : overrides)
    if (!declared.count(k)) throw Error("unknown parameter " + k);
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

CausalGame parse_game(const std::string& text, const ParamMap& overrides, const std::string& source) {
  Reader r(lex(text), source);
  ParamMap params;
  std::set<std::string> declared_params;
  std::optional<std::string> name;
  std::optional<int> agents;
  std::vector<std::pair<VarDecl, std::size_t>> vars;  // with line
  struct RawTable {
    Line header;
    std::string var;
    bool commit = false;
    std::vector<Line> rows;
  };
  std::vector<RawTable> tables;
  std::map<std::string, std::size_t> line_of;

  while (!r.done()) {
    const Line& l = r.next();
    const std::string& kw = l.toks[0].text;
    if (kw == "game") {
      if (l.toks.size() < 2) r.fail(l, 0, "expected a game name");
      name = rest_text(l, 1);
    } else if (kw == "agents") {
      if (l.toks.size() != 2) r.fail(l, 0, "expected 'agents N'");
      auto v = parse_number(l.toks[1].text);
      if (!v || *v < 0 || *v != static_cast<int>(*v)) r.fail(l, l.toks[1], "agent count must be a non-negative integer");
      agents = static_cast<int>(*v);
    } else if (kw == "param") {
      collect_params(r, l, params, declared_params, overrides);
    } else if (kw == "var") {
      auto d = parse_var_decl(r, l, 1, params, false);
      if (line_of.count(d.var.name)) r.fail(l, l.toks[1], "variable " + d.var.name + " declared twice");
      line_of[d.var.name] = l.no;
      vars.emplace_back(std::move(d), l.no);
    } else if (kw == "cpd" || kw == "commit") {
      if (l.toks.size() != 2) r.fail(l, 0, "expected '" + kw + " VARIABLE'");
      Line header = l;
      tables.push_back({header, l.toks[1].text, kw == "commit", r.block(header)});
    } else if (kw == "rationality") {
      if (l.toks.size() != 2 || l.toks[1].text != "best_response")
        r.fail(l, 0, "only 'rationality best_response' is supported");
    } else {
      r.fail(l, l.toks[0], "unknown keyword '" + kw + "'");
    }
  }
  check_overrides(overrides, declared_params);
  if (!agents) throw ParseError(source, 1, 0, "missing 'agents' line");

  CausalGame game(*agents, name.value_or(""));
  for (auto& [d, no] : vars) game.add_variable(d.var, d.parents);
  for (const auto& [d, no] : vars)
    for (const auto& p : d.parents)
      if (!game.has_variable(p)) throw ParseError(source, no, 0, "unknown parent " + p + " of " + d.var.name);
  for (const auto& [d, no] : vars) {
    std::set<std::string> seen_from;
    std::vector<std::string> stack = game.children(d.var.name);
    while (!stack.empty()) {
      const std::string c = stack.back();
      stack.pop_back();
      if (c == d.var.name) throw ParseError(source, no, 0, d.var.name + " lies on a cycle");
      if (!seen_from.insert(c).second) continue;
      for (const auto& cc : game.children(c)) stack.push_back(cc);
    }
  }
  const VarLookup lookup = [&](const std::string& n) -> const Variable* {
    return game.has_variable(n) ? &game.variable(n) : nullptr;
  };
  std::set<std::pair<std::string, bool>> seen;
  for (const auto& t : tables) {
    if (!game.has_variable(t.var)) r.fail(t.header, t.header.toks[1], "unknown variable " + t.var);
    if (!seen.emplace(t.var, t.commit).second) r.fail(t.header, t.header.toks[0], "second table for " + t.var);
    const Variable& v = game.variable(t.var);
    if (t.commit && v.kind != VarKind::decision) r.fail(t.header, t.header.toks[1], t.var + " is not a decision");
    for (const auto& p : game.parents(t.var))
      if (!game.has_variable(p)) r.fail(t.header, 0, "unknown parent " + p + " of " + t.var);
    TabularCpd table = build_table(r, t.header, t.rows, v, game.parents(t.var), lookup, params);
    if (t.commit) game.set_commitment(std::move(table));
    else if (v.kind == VarKind::decision) game.set_object_fixed(std::move(table));
    else game.set_cpd(std::move(table));
    line_of.emplace("table " + t.var, t.header.no);
  }
  const auto report = validate_game(game);
  if (!report.empty()) {
    std::size_t line = 1;
    auto it = line_of.find(report.front().subject);
    if (it != line_of.end()) line = it->second;
    std::string msg = "invalid game: " + report.front().subject + ": " + report.front().message;
    for (std::size_t k = 1; k < report.size(); ++k) msg += "; " + report[k].subject + ": " + report[k].message;
    throw ParseError(source, line, 0, msg);
  }
  return game;
}

CausalGame load_game(const std::string& path, const ParamMap& overrides) {
  return parse_game(read_file(path), overrides, path);
}

namespace {

void write_table(std::ostringstream& out, const CausalGame& game, const TabularCpd& t, bool labels) {
  const Variable& v = game.variable(t.variable());
  for (std::size_t row = 0; row < t.rows(); ++row) {
    out << " ";
    const auto ctx = t.row_context(row);
    for (std::size_t k = 0; k < ctx.size(); ++k) out << " " << game.variable(t.parents()[k]).domain[ctx[k]];
    const auto r = t.row(row);
    const auto one = std::find(r.begin(), r.end(), 1.0);
    if (labels && one != r.end() && std::count(r.begin(), r.end(), 0.0) == static_cast<long>(r.size()) - 1) {
      out << " = " << v.domain[static_cast<std::size_t>(one - r.begin())] << "\n";
      continue;
    }
    out << " :";
    for (double x : r) out << " " << format_number(x);
    out << "\n";
  }
}

}  // namespace

std::string serialize_game(const CausalGame& game) {
  std::ostringstream out;
  if (!game.name().empty()) out << "game " << game.name() << "\n";
  out << "agents " << game.agents() << "\n\n";
  for (const auto& v : game.variables()) {
    out << "var " << v.name << " " << to_string(v.kind);
    if (v.kind != VarKind::chance) out << " " << v.agent;
    out << " domain " << join(v.domain, " ");
    const auto& ps = game.parents(v.name);
    if (!ps.empty()) out << " parents " << join(ps, " ");
    out << "\n";
  }
  for (const auto& v : game.variables()) {
    const TabularCpd* t = nullptr;
    if (auto it = game.cpds().find(v.name); it != game.cpds().end()) t = &it->second;
    if (auto it = game.object_fixed().find(v.name); it != game.object_fixed().end()) t = &it->second;
    if (t) {
      out << "\ncpd " << v.name << "\n";
      write_table(out, game, t->reordered(game.parents(v.name)), v.kind == VarKind::utility);
      out << "end\n";
    }
    if (auto it = game.commitments().find(v.name); it != game.commitments().end()) {
      out << "\ncommit " << v.name << "\n";
      write_table(out, game, it->second.reordered(game.parents(v.name)), false);
      out << "end\n";
    }
  }
  out << "\nrationality best_response\n";
  return out.str();
}

CausalGame load_fixture(const std::string& name, const ParamMap& overrides) {
  const auto& fx = fixture_sources();
  auto it = fx.find(name);
  if (it == fx.end()) throw Error("unknown fixture " + name);
  return parse_game(it->second, overrides, name);
}

CausalGame resolve_game(const std::string& ref, const ParamMap& overrides) {
  if (fixture_sources().count(ref) && !std::filesystem::exists(ref)) return load_fixture(ref, overrides);
  return load_game(ref, overrides);
}

// ---------------------------------------------------------------------------
// Scenarios

namespace {

struct ScenarioContext {
  const Reader& r;
  const CausalGame& game;
  std::map<std::string, Variable> declared;  // variables added by add_var
  std::map<std::string, std::vector<std::string>> declared_parents;
  const ParamMap& params;

  const Variable* lookup(const std::string& n) const {
    if (auto it = declared.find(n); it != declared.end()) return &it->second;
    return game.has_variable(n) ? &game.variable(n) : nullptr;
  }
  const Variable& var(const Line& l, const Token& t) const {
    const Variable* v = lookup(t.text);
    if (!v) r.fail(l, t, "unknown variable " + t.text);
    return *v;
  }
  std::vector<std::string> parents_of(const std::string& n) const {
    if (auto it = declared_parents.find(n); it != declared_parents.end()) return it->second;
    return game.has_variable(n) ? game.parents(n) : std::vector<std::string>{};
  }
  VarLookup lookup_fn() const {
    return [this](const std::string& n) { return lookup(n); };
  }
};

// Optional trailing `parents ...` clause starting at i.
std::optional<std::vector<std::string>> parents_clause(const Reader& r, const Line& l, std::size_t i,
                                                       std::size_t* end) {
  *end = i;
  if (i >= l.toks.size() || l.toks[i].text != "parents") return std::nullopt;
  std::vector<std::string> ps;
  for (++i; i < l.toks.size() && l.toks[i].text != "to_decision"; ++i) ps.push_back(l.toks[i].text);
  *end = i;
  (void)r;
  return ps;
}

bool opens_block(const Line& l, std::size_t k) {
  const std::string& kind = l.toks[k].text;
  if (kind == "fix_mechanism" || kind == "add_var") return true;
  if (kind == "fix_object") return l.toks.back().text != "to_decision";
  if (kind == "commit")
    return std::none_of(l.toks.begin() + static_cast<long>(k), l.toks.end(), [](const Token& t) { return t.text == "="; });
  return false;
}

// Tokens l.toks[k..] describe one intervention; `rows` is its table block.
InterventionSpec parse_spec(ScenarioContext& cx, const Line& l, std::size_t k, const std::vector<Line>& rows) {
  const Reader& r = cx.r;
  const auto& t = l.toks;
  const std::string& kind = t[k].text;
  auto need = [&](std::size_t i, const std::string& what) -> const Token& {
    if (i >= t.size()) r.fail(l, 0, "expected " + what);
    return t[i];
  };
  auto no_more = [&](std::size_t i) {
    if (i < t.size()) r.fail(l, t[i], "unexpected '" + t[i].text + "'");
  };

  if (kind == "do") {
    const Variable& v = cx.var(l, need(k + 1, "a variable"));
    if (need(k + 2, "'='").text != "=") r.fail(l, t[k + 2], "expected '='");
    const Token& val = need(k + 3, "a value");
    no_more(k + 4);
    auto idx = v.value_index(val.text);
    if (!idx) r.fail(l, val, "'" + val.text + "' is not a value of " + v.name);
    return PrimitiveIntervention{FixObject{v.name, {}, TabularCpd::delta(v.name, v.cardinality(), *idx)}, {}};
  }
  if (kind == "fix_object") {
    const Variable& v = cx.var(l, need(k + 1, "a variable"));
    std::size_t end = 0;
    auto ps = parents_clause(r, l, k + 2, &end).value_or(std::vector<std::string>{});
    if (end < t.size() && t[end].text == "to_decision") {
      if (v.kind != VarKind::decision) r.fail(l, t[end], v.name + " is not a decision");
      no_more(end + 1);
      cx.declared_parents[v.name] = ps;
      return PrimitiveIntervention{FixObject{v.name, ps, std::nullopt}, {}};
    }
    no_more(end);
    auto table = build_table(r, l, rows, v, ps, cx.lookup_fn(), cx.params);
    cx.declared_parents[v.name] = ps;
    return PrimitiveIntervention{FixObject{v.name, ps, std::move(table)}, {}};
  }
  if (kind == "fix_mechanism" || kind == "commit") {
    const Variable& v = cx.var(l, need(k + 1, "a variable"));
    if (kind == "commit" && v.kind != VarKind::decision) r.fail(l, t[k + 1], v.name + " is not a decision");
    std::size_t end = 0;
    auto ps = parents_clause(r, l, k + 2, &end).value_or(cx.parents_of(v.name));
    if (kind == "commit" && end < t.size() && t[end].text == "=") {
      const Token& val = need(end + 1, "a value");
      no_more(end + 2);
      auto idx = v.value_index(val.text);
      if (!idx) r.fail(l, val, "'" + val.text + "' is not a value of " + v.name);
      std::vector<std::size_t> cards;
      for (const auto& p : ps) {
        const Variable* pv = cx.lookup(p);
        if (!pv) r.fail(l, 0, "unknown parent " + p);
        cards.push_back(pv->cardinality());
      }
      return PrimitiveIntervention{FixMechanism{v.name, TabularCpd::delta(v.name, v.cardinality(), *idx, ps, cards)}, {}};
    }
    no_more(end);
    return PrimitiveIntervention{FixMechanism{v.name, build_table(r, l, rows, v, ps, cx.lookup_fn(), cx.params)}, {}};
  }
  if (kind == "release") {
    const Variable& v = cx.var(l, need(k + 1, "a decision"));
    if (v.kind != VarKind::decision) r.fail(l, t[k + 1], v.name + " is not a decision");
    no_more(k + 2);
    return PrimitiveIntervention{FixMechanism{v.name, std::nullopt}, {}};
  }
  if (kind == "add_var") {
    auto d = parse_var_decl(r, l, k + 1, cx.params, true);
    if (cx.lookup(d.var.name)) r.fail(l, t[k + 1], "variable " + d.var.name + " already exists");
    cx.declared[d.var.name] = d.var;
    cx.declared_parents[d.var.name] = d.parents;
    AddVariable a;
    a.variable = d.var;
    a.parents = d.parents;
    a.position = d.position;
    if (!rows.empty()) a.cpd = build_table(r, l, rows, d.var, d.parents, cx.lookup_fn(), cx.params);
    for (const auto& c : d.children) {
      if (!cx.lookup(c)) r.fail(l, 0, "unknown child " + c);
      a.children.push_back(ChildSpec{c, std::nullopt, std::nullopt, std::nullopt});
      auto ps = cx.parents_of(c);
      ps.push_back(d.var.name);
      cx.declared_parents[c] = ps;
    }
    return PrimitiveIntervention{std::move(a), {}};
  }
  if (kind == "remove_var") {
    const Variable& v = cx.var(l, need(k + 1, "a variable"));
    no_more(k + 2);
    return PrimitiveIntervention{RemoveVariable{v.name, {}}, {}};
  }
  if (kind == "add_edge" || kind == "del_edge") {
    const Variable& a = cx.var(l, need(k + 1, "a variable"));
    const Variable& b = cx.var(l, need(k + 2, "a variable"));
    no_more(k + 3);
    auto ps = cx.parents_of(b.name);
    if (kind == "add_edge") {
      ps.push_back(a.name);
      cx.declared_parents[b.name] = ps;
      return AddEdgeSpec{a.name, b.name};
    }
    ps.erase(std::remove(ps.begin(), ps.end(), a.name), ps.end());
    cx.declared_parents[b.name] = ps;
    return RemoveEdgeSpec{a.name, b.name};
  }
  if (kind == "unfix") {
    const Token& label = need(k + 1, "a label");
    no_more(k + 2);
    return UnfixSpec{label.text};
  }
  r.fail(l, t[k], "unknown intervention kind '" + kind + "'");
}

std::vector<int> parse_agents(const Reader& r, const Line& l, std::size_t from, std::size_t to) {
  std::vector<int> out;
  for (std::size_t i = from; i < to; ++i) {
    auto v = parse_number(l.toks[i].text);
    if (!v || *v < 1 || *v != static_cast<int>(*v)) r.fail(l, l.toks[i], "expected an agent number");
    out.push_back(static_cast<int>(*v));
  }
  return out;
}

}  // namespace

Scenario parse_scenario(const std::string& text, const std::string& base_dir, const ParamMap& overrides,
                        const std::string& source) {
  Reader r(lex(text), source);
  Scenario sc;
  ParamMap params = overrides;
  std::optional<ScenarioContext> cx;
  std::set<std::string> labels;

  while (!r.done()) {
    const Line& l = r.next();
    const std::string& kw = l.toks[0].text;
    if (kw == "game") {
      if (cx) r.fail(l, l.toks[0], "game given twice");
      if (l.toks.size() != 2) r.fail(l, 0, "expected 'game NAME-OR-PATH'");
      sc.game_ref = l.toks[1].text;
      try {
        if (fixture_sources().count(sc.game_ref)) {
          sc.game = load_fixture(sc.game_ref, overrides);
        } else {
          std::filesystem::path p(sc.game_ref);
          if (p.is_relative()) p = std::filesystem::path(base_dir) / p;
          sc.game = load_game(p.string(), overrides);
        }
      } catch (const ParseError&) {
        throw;
      } catch (const Error& e) {
        r.fail(l, l.toks[1], e.what());
      }
      cx.emplace(ScenarioContext{r, sc.game, {}, {}, params});
      continue;
    }
    if (!cx) r.fail(l, l.toks[0], "the first line must be 'game NAME-OR-PATH'");
    if (kw == "intervention") {
      if (l.toks.size() < 3) r.fail(l, 0, "expected 'intervention LABEL KIND ...'");
      const Token& label = l.toks[1];
      if (!is_identifier(label.text)) r.fail(l, label, "'" + label.text + "' is not a valid label");
      if (!labels.insert(label.text).second) r.fail(l, label, "label " + label.text + " used twice");
      std::vector<Line> rows;
      if (opens_block(l, 2)) rows = r.block(l);
      try {
        sc.interventions.push_back({label.text, parse_spec(*cx, l, 2, rows)});
      } catch (const ParseError&) {
        throw;
      } catch (const Error& e) {
        r.fail(l, 0, e.what());
      }
      if (auto* u = std::get_if<UnfixSpec>(&sc.interventions.back().spec); u && !labels.count(u->label))
        r.fail(l, l.toks[3], "unfix refers to unknown label " + u->label);
    } else if (kw == "visible") {
      if (l.toks.size() < 3 || l.toks[2].text != ":") r.fail(l, 0, "expected 'visible AGENT : LABELS'");
      const int agent = parse_agents(r, l, 1, 2).front();
      if (agent > sc.game.agents()) r.fail(l, l.toks[1], "unknown agent " + l.toks[1].text);
      auto& vis = sc.visibility[agent];
      for (std::size_t i = 3; i < l.toks.size(); ++i) {
        if (!labels.count(l.toks[i].text)) r.fail(l, l.toks[i], "unknown label " + l.toks[i].text);
        vis.push_back(l.toks[i].text);
      }
    } else if (kw == "order") {
      sc.order = parse_agents(r, l, 1, l.toks.size());
    } else if (kw == "stage") {
      std::size_t colon = 0;
      while (colon < l.toks.size() && l.toks[colon].text != ":") ++colon;
      if (l.toks.size() < 3 || l.toks[2].text != "agents" || colon == l.toks.size())
        r.fail(l, 0, "expected 'stage J agents A... : LABELS'");
      if (!sc.stages) sc.stages.emplace();
      auto j = parse_number(l.toks[1].text);
      if (!j || *j != static_cast<double>(sc.stages->size()))
        r.fail(l, l.toks[1], "stages must be numbered 0, 1, ... in order");
      auto agents = parse_agents(r, l, 3, colon);
      std::vector<std::string> ls;
      for (std::size_t i = colon + 1; i < l.toks.size(); ++i) {
        if (!labels.count(l.toks[i].text)) r.fail(l, l.toks[i], "unknown label " + l.toks[i].text);
        ls.push_back(l.toks[i].text);
      }
      sc.stages->emplace_back(std::move(agents), std::move(ls));
    } else if (kw == "query") {
      if (l.toks.size() < 2) r.fail(l, 0, "empty query");
      const std::size_t start = l.toks[1].col;
      std::string q = std::string(trim(l.raw.substr(start - 1)));
      try {
        (void)parse_query(q);
      } catch (const QueryParseError& e) {
        r.fail(l, start - 1 + e.column(), e.what());
      }
      sc.queries.push_back(q);
    } else if (kw == "seed") {
      if (l.toks.size() != 2) r.fail(l, 0, "expected 'seed N'");
      std::uint64_t s = 0;
      try {
        std::size_t used = 0;
        s = std::stoull(l.toks[1].text, &used);
        if (used != l.toks[1].text.size()) throw std::invalid_argument("seed");
      } catch (const std::exception&) {
        r.fail(l, l.toks[1], "seed must be a non-negative integer");
      }
      sc.seed = s;
    } else {
      r.fail(l, l.toks[0], "unknown keyword '" + kw + "'");
    }
  }
  if (!cx) throw ParseError(source, 1, 0, "missing 'game' line");
  return sc;
}

Scenario load_scenario(const std::string& path, const ParamMap& overrides) {
  return parse_scenario(read_file(path), std::filesystem::path(path).parent_path().string(), overrides, path);
}

InterventionSpec parse_intervention(const std::string& text, const CausalGame& game) {
  auto lines = lex(text);
  if (lines.size() != 1) throw Error("expected one intervention");
  Reader r(lines, "<intervention>");
  const Line& l = lines.front();
  if (opens_block(l, 0)) throw Error("intervention kind '" + l.toks[0].text + "' needs a table; use a scenario file");
  ParamMap params;
  ScenarioContext cx{r, game, {}, {}, params};
  return parse_spec(cx, l, 0, {});
}

}  // namespace cgame
