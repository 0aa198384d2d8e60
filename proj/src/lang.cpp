#include "wbi/lang.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <deque>
#include <limits>
#include <numeric>
#include <optional>
#include <unordered_map>

#include "wbi/error.hpp"
#include "wbi/typeck.hpp"

namespace wbi {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};

std::vector<VarId> reads(const AtomicCommand& cmd) {
  return std::visit(
      overloaded{
          [](const Sample& c) { return std::vector<VarId>{c.mean, c.variance}; },
          [](const Observe& c) { return std::vector<VarId>{c.mean, c.variance}; },
          [](const IfGt& c) {
            return std::vector<VarId>{c.lhs, c.rhs, c.then_var, c.else_var};
          },
          [](const AssignConst&) { return std::vector<VarId>{}; },
          [](const AssignVar& c) { return std::vector<VarId>{c.source}; },
          [](const Call& c) { return c.args; },
      },
      cmd);
}

bool writes(const AtomicCommand& cmd, VarId* target) {
  return std::visit(overloaded{
                        [](const Observe&) { return false; },
                        [&](const auto& c) {
                          if (target) *target = c.target;
                          return true;
                        },
                    },
                    cmd);
}

// ---------------------------------------------------------------------------
// Lexer

namespace {

enum class Tok { ident, number, symbol, newline, end };

struct Token {
  Tok kind;
  std::string text;
  double number = 0.0;
  std::size_t line = 1, col = 1;
};

class Lexer {
 public:
  explicit Lexer(std::string_view src) : src_(src) {}

  std::vector<Token> run() {
    std::vector<Token> out;
    while (true) {
      skip_blank();
      Token t{Tok::end, "", 0.0, line_, col_};
      if (pos_ >= src_.size()) {
        out.push_back(t);
        return out;
      }
      char c = src_[pos_];
      if (c == '\n') {
        advance();
        t.kind = Tok::newline;
        out.push_back(t);
      } else if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
        std::size_t start = pos_;
        while (pos_ < src_.size() &&
               (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_'))
          advance();
        t.kind = Tok::ident;
        t.text = std::string(src_.substr(start, pos_ - start));
        out.push_back(t);
      } else if (std::isdigit(static_cast<unsigned char>(c)) || c == '-' || c == '.') {
        t.kind = Tok::number;
        t.number = lex_number(t);
        out.push_back(t);
      } else if (c == ':' && pos_ + 1 < src_.size() && src_[pos_ + 1] == '=') {
        advance();
        advance();
        t.kind = Tok::symbol;
        t.text = ":=";
        out.push_back(t);
      } else if (std::string_view("~(),[];>+*").find(c) != std::string_view::npos) {
        advance();
        t.kind = Tok::symbol;
        t.text = std::string(1, c);
        out.push_back(t);
      } else {
        throw SyntaxError(std::string("unexpected character '") + c + "'", line_, col_);
      }
    }
  }

 private:
  void advance() {
    if (src_[pos_] == '\n') {
      ++line_;
      col_ = 1;
    } else {
      ++col_;
    }
    ++pos_;
  }

  void skip_blank() {
    while (pos_ < src_.size()) {
      char c = src_[pos_];
      if (c == ' ' || c == '\t' || c == '\r') {
        advance();
      } else if (c == '/' && pos_ + 1 < src_.size() && src_[pos_ + 1] == '/') {
        while (pos_ < src_.size() && src_[pos_] != '\n') advance();
      } else {
        return;
      }
    }
  }

  double lex_number(const Token& t) {
    std::size_t start = pos_;
    if (src_[pos_] == '-') advance();
    auto digits = [&] {
      while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) advance();
    };
    digits();
    if (pos_ < src_.size() && src_[pos_] == '.') {
      advance();
      digits();
    }
    if (pos_ < src_.size() && (src_[pos_] == 'e' || src_[pos_] == 'E')) {
      advance();
      if (pos_ < src_.size() && (src_[pos_] == '+' || src_[pos_] == '-')) advance();
      digits();
    }
    std::string_view text = src_.substr(start, pos_ - start);
    double value = 0.0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc() || ptr != text.data() + text.size())
      throw SyntaxError("malformed number '" + std::string(text) + "'", t.line, t.col);
    return value;
  }

  std::string_view src_;
  std::size_t pos_ = 0, line_ = 1, col_ = 1;
};

// ---------------------------------------------------------------------------
// Parser

bool is_keyword(const std::string& s) {
  return s == "normal" || s == "obs" || s == "if" || s == "else";
}

class Parser {
 public:
  Parser(std::vector<Token> toks, const ProcedureRegistry& reg)
      : toks_(std::move(toks)), reg_(reg) {}

  Program run() {
    while (peek().kind != Tok::end) {
      if (at_separator()) {
        ++pos_;
        continue;
      }
      statement();
      if (!at_separator() && peek().kind != Tok::end)
        fail("expected ';' or end of line after command");
    }
    return std::move(prog_);
  }

 private:
  const Token& peek(std::size_t ahead = 0) const {
    return toks_[std::min(pos_ + ahead, toks_.size() - 1)];
  }
  bool at_separator() const {
    return peek().kind == Tok::newline || (peek().kind == Tok::symbol && peek().text == ";");
  }
  bool at_symbol(std::string_view s) const {
    return peek().kind == Tok::symbol && peek().text == s;
  }
  [[noreturn]] void fail(const std::string& msg) const {
    throw SyntaxError(msg, peek().line, peek().col);
  }
  void expect_symbol(std::string_view s) {
    if (!at_symbol(s)) fail("expected '" + std::string(s) + "'");
    ++pos_;
  }
  void expect_word(std::string_view w) {
    if (peek().kind != Tok::ident || peek().text != w) fail("expected '" + std::string(w) + "'");
    ++pos_;
  }
  double number() {
    if (peek().kind != Tok::number) fail("expected a real literal");
    return toks_[pos_++].number;
  }
  VarId var() {
    if (peek().kind != Tok::ident || is_keyword(peek().text)) fail("expected a variable name");
    return intern(toks_[pos_++].text);
  }
  VarId intern(const std::string& name) {
    auto [it, inserted] = ids_.try_emplace(name, static_cast<std::uint32_t>(prog_.var_names.size()));
    if (inserted) prog_.var_names.push_back(name);
    return VarId{it->second};
  }

  void distribution(VarId& mean, VarId& variance) {
    expect_word("normal");
    expect_symbol("(");
    mean = var();
    expect_symbol(",");
    variance = var();
    expect_symbol(")");
  }

  void statement() {
    if (peek().kind == Tok::ident && peek().text == "obs") {
      ++pos_;
      expect_symbol("(");
      Observe o;
      distribution(o.mean, o.variance);
      expect_symbol(",");
      if (at_symbol("[")) {
        ++pos_;
        std::vector<double> values{number()};
        while (at_symbol(",")) {
          ++pos_;
          values.push_back(number());
        }
        expect_symbol("]");
        for (double v : values) {
          o.value = v;
          prog_.commands.emplace_back(o);
        }
      } else {
        o.value = number();
        prog_.commands.emplace_back(o);
      }
      expect_symbol(")");
      return;
    }

    VarId target = var();
    if (at_symbol("~")) {
      ++pos_;
      Sample s{target, {}, {}};
      distribution(s.mean, s.variance);
      prog_.commands.emplace_back(s);
      return;
    }
    expect_symbol(":=");

    if (peek().kind == Tok::number) {
      prog_.commands.emplace_back(AssignConst{target, number()});
      return;
    }
    if (peek().kind == Tok::ident && peek().text == "if") {
      ++pos_;
      IfGt c{target, {}, {}, {}, {}};
      expect_symbol("(");
      c.lhs = var();
      expect_symbol(">");
      c.rhs = var();
      expect_symbol(")");
      c.then_var = var();
      expect_word("else");
      c.else_var = var();
      prog_.commands.emplace_back(c);
      return;
    }
    if (peek().kind == Tok::ident && peek(1).kind == Tok::symbol && peek(1).text == "(") {
      const Token name_tok = toks_[pos_++];
      const Procedure* proc = reg_.find(name_tok.text);
      if (!proc)
        throw SyntaxError("unknown procedure '" + name_tok.text + "'", name_tok.line, name_tok.col);
      ++pos_;  // '('
      Call c{target, name_tok.text, {var()}};
      while (at_symbol(",")) {
        ++pos_;
        c.args.push_back(var());
      }
      expect_symbol(")");
      if (static_cast<int>(c.args.size()) != proc->arity)
        throw SyntaxError("procedure '" + name_tok.text + "' takes " +
                              std::to_string(proc->arity) + " argument(s), got " +
                              std::to_string(c.args.size()),
                          name_tok.line, name_tok.col);
      prog_.commands.emplace_back(std::move(c));
      return;
    }
    VarId source = var();
    if (at_symbol("+") || at_symbol("*")) {
      std::string proc = peek().text == "+" ? "add" : "mul";
      if (!reg_.contains(proc)) fail("procedure '" + proc + "' is not registered");
      ++pos_;
      VarId rhs = var();
      prog_.commands.emplace_back(Call{target, proc, {source, rhs}});
      return;
    }
    prog_.commands.emplace_back(AssignVar{target, source});
  }

  std::vector<Token> toks_;
  const ProcedureRegistry& reg_;
  std::size_t pos_ = 0;
  Program prog_;
  std::unordered_map<std::string, std::uint32_t> ids_;
};

}  // namespace

Program parse_syntax(std::string_view text, const ProcedureRegistry& registry) {
  return Parser(Lexer(text).run(), registry).run();
}

Program parse(std::string_view text, const ProcedureRegistry& registry) {
  Program prog = parse_syntax(text, registry);
  annotate(prog);
  return prog;
}

// ---------------------------------------------------------------------------
// Printing

std::string format_real(double x) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, x);
  std::string s(buf, ptr);
  // Keep a decimal point or exponent so the text reads as a real.
  if (s.find_first_of(".eE") == std::string::npos && s.find_first_of("ni") == std::string::npos)
    s += ".0";
  return s;
}

std::string print(const Program& prog, const AtomicCommand& cmd) {
  auto n = [&](VarId v) { return prog.name(v); };
  return std::visit(
      overloaded{
          [&](const Sample& c) {
            return n(c.target) + " ~ normal(" + n(c.mean) + ", " + n(c.variance) + ")";
          },
          [&](const Observe& c) {
            return "obs(normal(" + n(c.mean) + ", " + n(c.variance) + "), " +
                   format_real(c.value) + ")";
          },
          [&](const IfGt& c) {
            return n(c.target) + " := if (" + n(c.lhs) + " > " + n(c.rhs) + ") " +
                   n(c.then_var) + " else " + n(c.else_var);
          },
          [&](const AssignConst& c) { return n(c.target) + " := " + format_real(c.value); },
          [&](const AssignVar& c) { return n(c.target) + " := " + n(c.source); },
          [&](const Call& c) {
            std::string s = n(c.target) + " := " + c.proc + "(";
            for (std::size_t i = 0; i < c.args.size(); ++i) s += (i ? ", " : "") + n(c.args[i]);
            return s + ")";
          },
      },
      cmd);
}

std::string print(const Program& prog) {
  std::string out;
  for (const auto& cmd : prog.commands) {
    out += print(prog, cmd);
    out += '\n';
  }
  return out;
}

std::uint64_t program_hash(const Program& prog) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : print(prog)) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

// ---------------------------------------------------------------------------
// Dependency graph

bool DependencyGraph::has_edge(std::size_t from, std::size_t to) const {
  const auto& c = children.at(from);
  return std::binary_search(c.begin(), c.end(), to);
}

std::size_t DependencyGraph::edge_count() const {
  std::size_t e = 0;
  for (const auto& c : children) e += c.size();
  return e;
}

bool DependencyGraph::is_acyclic() const {
  // Kahn's algorithm.
  std::vector<std::size_t> indegree(node_count());
  for (std::size_t v = 0; v < node_count(); ++v) indegree[v] = parents[v].size();
  std::vector<std::size_t> ready;
  for (std::size_t v = 0; v < node_count(); ++v)
    if (indegree[v] == 0) ready.push_back(v);
  std::size_t seen = 0;
  while (!ready.empty()) {
    auto v = ready.back();
    ready.pop_back();
    ++seen;
    for (auto c : children[v])
      if (--indegree[c] == 0) ready.push_back(c);
  }
  return seen == node_count();
}

DependencyGraph dependency_graph(const Program& prog) {
  DependencyGraph g;
  g.var_count = prog.var_count();
  g.obs_count = static_cast<std::size_t>(
      std::count_if(prog.commands.begin(), prog.commands.end(),
                    [](const auto& c) { return kind_of(c) == CommandKind::observe; }));
  g.children.assign(g.node_count(), {});
  g.parents.assign(g.node_count(), {});
  std::size_t obs = 0;
  for (const auto& cmd : prog.commands) {
    VarId target;
    std::size_t node = writes(cmd, &target) ? target.index : g.var_count + obs++;
    for (VarId r : reads(cmd)) {
      g.children[r.index].push_back(node);
      g.parents[node].push_back(r.index);
    }
  }
  for (auto* lists : {&g.children, &g.parents})
    for (auto& l : *lists) {
      std::sort(l.begin(), l.end());
      l.erase(std::unique(l.begin(), l.end()), l.end());
    }
  return g;
}

std::vector<std::size_t> random_nodes(const Program& prog, const DependencyGraph& g) {
  std::vector<char> random(g.node_count(), 0);
  for (const auto& cmd : prog.commands)
    if (const auto* s = std::get_if<Sample>(&cmd)) random[s->target.index] = 1;
  // Propagate forward; node ids are not topologically ordered, so iterate to a
  // fixed point.
  for (bool changed = true; changed;) {
    changed = false;
    for (std::size_t v = 0; v < g.node_count(); ++v) {
      if (!random[v]) continue;
      for (auto c : g.children[v])
        if (!random[c]) random[c] = changed = 1;
    }
  }
  std::vector<std::size_t> out;
  for (std::size_t v = 0; v < g.node_count(); ++v)
    if (random[v] || v >= g.var_count) out.push_back(v);
  return out;
}

// ---------------------------------------------------------------------------
// Canonicalisation

Program canonicalise(const Program& prog) {
  const std::size_t m = prog.var_count();
  const DependencyGraph g = dependency_graph(prog);

  std::vector<std::size_t> def_index(m, std::numeric_limits<std::size_t>::max());
  std::vector<char> latent(m, 0);
  for (std::size_t i = 0; i < prog.commands.size(); ++i) {
    VarId t;
    if (writes(prog.commands[i], &t) && def_index[t.index] == std::numeric_limits<std::size_t>::max())
      def_index[t.index] = i;
    if (kind_of(prog.commands[i]) == CommandKind::sample) latent[t.index] = 1;
  }
  auto by_definition = [&](std::size_t a, std::size_t b) {
    return std::tie(def_index[a], a) < std::tie(def_index[b], b);
  };

  std::vector<std::size_t> sources;
  for (std::size_t v = 0; v < m; ++v)
    if (g.parents[v].empty()) sources.push_back(v);
  std::sort(sources.begin(), sources.end(), by_definition);

  std::vector<char> seen(m, 0);
  std::deque<std::size_t> queue;
  for (auto s : sources) {
    seen[s] = 1;
    queue.push_back(s);
  }
  std::vector<std::size_t> order;
  order.reserve(m);
  while (!queue.empty()) {
    auto v = queue.front();
    queue.pop_front();
    order.push_back(v);
    std::vector<std::size_t> next;
    for (auto c : g.children[v])
      if (c < m && !seen[c]) next.push_back(c);
    std::sort(next.begin(), next.end(), by_definition);
    for (auto c : next) {
      seen[c] = 1;
      queue.push_back(c);
    }
  }
  // Only reachable from sources in a cyclic (ill-typed) program; keep total.
  std::vector<std::size_t> rest;
  for (std::size_t v = 0; v < m; ++v)
    if (!seen[v]) rest.push_back(v);
  std::sort(rest.begin(), rest.end(), by_definition);
  order.insert(order.end(), rest.begin(), rest.end());

  const std::size_t n = static_cast<std::size_t>(std::count(latent.begin(), latent.end(), 1));
  std::vector<std::uint32_t> slot(m);
  std::vector<std::string> names(m);
  std::size_t next_latent = 0, next_other = 0;
  for (auto v : order) {
    if (latent[v]) {
      slot[v] = static_cast<std::uint32_t>(next_latent);
      names[next_latent] = "z" + std::to_string(next_latent);
      ++next_latent;
    } else {
      slot[v] = static_cast<std::uint32_t>(n + next_other);
      names[n + next_other] = "v" + std::to_string(next_other);
      ++next_other;
    }
  }

  auto map = [&](VarId v) { return VarId{slot[v.index]}; };
  Program out;
  out.var_names = std::move(names);
  out.commands.reserve(prog.commands.size());
  for (const auto& cmd : prog.commands) {
    out.commands.push_back(std::visit(
        overloaded{
            [&](const Sample& c) -> AtomicCommand {
              return Sample{map(c.target), map(c.mean), map(c.variance)};
            },
            [&](const Observe& c) -> AtomicCommand {
              return Observe{map(c.mean), map(c.variance), c.value};
            },
            [&](const IfGt& c) -> AtomicCommand {
              return IfGt{map(c.target), map(c.lhs), map(c.rhs), map(c.then_var), map(c.else_var)};
            },
            [&](const AssignConst& c) -> AtomicCommand { return AssignConst{map(c.target), c.value}; },
            [&](const AssignVar& c) -> AtomicCommand {
              return AssignVar{map(c.target), map(c.source)};
            },
            [&](const Call& c) -> AtomicCommand {
              Call r{map(c.target), c.proc, {}};
              for (auto a : c.args) r.args.push_back(map(a));
              return r;
            },
        },
        cmd));
  }
  for (auto v : prog.latent_order) out.latent_order.push_back(map(v));
  out.obs_values = prog.obs_values;
  return out;
}

std::vector<double> one_hot(VarId v, std::size_t m) {
  if (v.index >= m)
    throw ShapeError("one_hot: index " + std::to_string(v.index) + " out of range for m = " +
                     std::to_string(m));
  std::vector<double> out(m, 0.0);
  out[v.index] = 1.0;
  return out;
}

}  // namespace wbi
