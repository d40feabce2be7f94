#pragma once

// Surface syntax: lexer, parser, name resolution and the pretty-printer.
//
//   file := stmt*
//   stmt := ident ":" term "."
//         | "[" [ident ("," ident)*] "]" term "-->" term "."
//         | "#TYPE" term "." | "#REDUCE" term "." | "#CHECK" term ":" term "."
//   term := ident ":" appterm "=>" term     lambda
//         | ident ":" appterm "->" term     dependent product
//         | appterm ["->" term]             non-dependent product
//   appterm := atom atom*
//   atom := ident | number | "(" term ")"
//
// Numbers are sugar for towers of S over 0; the printer folds them back.

#include <cctype>
#include <cstdint>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include "lpm/context.hpp"
#include "lpm/term.hpp"

namespace lpm {

struct ParseError : Error {
  SourceLoc loc;
  ParseError(SourceLoc l, const std::string& msg)
      : Error(l.to_string() + ": " + msg), loc(l) {}
};

// ---------------------------------------------------------------------------
// Lexer

enum class TokKind {
  Ident, Number, LParen, RParen, LBracket, RBracket, Comma, Colon, Dot,
  Arrow, LongArrow, FatArrow, HashCmd, End,
};

struct Token {
  TokKind kind;
  std::string text;
  std::uint64_t num = 0;
  SourceLoc loc;
};

inline const char* tok_name(TokKind k) {
  switch (k) {
    case TokKind::Ident: return "identifier";
    case TokKind::Number: return "number";
    case TokKind::LParen: return "'('";
    case TokKind::RParen: return "')'";
    case TokKind::LBracket: return "'['";
    case TokKind::RBracket: return "']'";
    case TokKind::Comma: return "','";
    case TokKind::Colon: return "':'";
    case TokKind::Dot: return "'.'";
    case TokKind::Arrow: return "'->'";
    case TokKind::LongArrow: return "'-->'";
    case TokKind::FatArrow: return "'=>'";
    case TokKind::HashCmd: return "command";
    case TokKind::End: return "end of input";
  }
  return "?";
}

inline std::vector<Token> lex(const std::string& src) {
  std::vector<Token> out;
  int line = 1, col = 1;
  size_t i = 0;
  auto loc = [&] { return SourceLoc{line, col}; };
  auto advance = [&](size_t n) {
    for (size_t k = 0; k < n; ++k) {
      if (src[i + k] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    i += n;
  };
  auto is_ident_start = [](char c) {
    return std::isalpha(static_cast<unsigned char>(c)) || c == '_';
  };
  auto is_ident_char = [](char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '\'';
  };
  while (i < src.size()) {
    char c = src[i];
    if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
      advance(1);
      continue;
    }
    if (c == '/' && i + 1 < src.size() && src[i + 1] == '/') {
      while (i < src.size() && src[i] != '\n') advance(1);
      continue;
    }
    SourceLoc at = loc();
    switch (c) {
      case '(': out.push_back({TokKind::LParen, "(", 0, at}); advance(1); continue;
      case ')': out.push_back({TokKind::RParen, ")", 0, at}); advance(1); continue;
      case '[': out.push_back({TokKind::LBracket, "[", 0, at}); advance(1); continue;
      case ']': out.push_back({TokKind::RBracket, "]", 0, at}); advance(1); continue;
      case ',': out.push_back({TokKind::Comma, ",", 0, at}); advance(1); continue;
      case ':': out.push_back({TokKind::Colon, ":", 0, at}); advance(1); continue;
      case '.': out.push_back({TokKind::Dot, ".", 0, at}); advance(1); continue;
      default: break;
    }
    if (c == '-') {
      if (src.compare(i, 3, "-->") == 0) {
        out.push_back({TokKind::LongArrow, "-->", 0, at});
        advance(3);
      } else if (src.compare(i, 2, "->") == 0) {
        out.push_back({TokKind::Arrow, "->", 0, at});
        advance(2);
      } else {
        throw ParseError(at, "stray '-'");
      }
      continue;
    }
    if (c == '=') {
      if (src.compare(i, 2, "=>") == 0) {
        out.push_back({TokKind::FatArrow, "=>", 0, at});
        advance(2);
      } else {
        throw ParseError(at, "stray '='");
      }
      continue;
    }
    if (c == '#') {
      size_t j = i + 1;
      std::string name;
      while (j < src.size() && is_ident_char(src[j])) name += src[j++];
      if (name.empty()) throw ParseError(at, "expected command name after '#'");
      out.push_back({TokKind::HashCmd, name, 0, at});
      advance(1 + name.size());
      continue;
    }
    if (std::isdigit(static_cast<unsigned char>(c))) {
      size_t j = i;
      std::uint64_t v = 0;
      std::string text;
      while (j < src.size() && std::isdigit(static_cast<unsigned char>(src[j]))) {
        v = v * 10 + static_cast<std::uint64_t>(src[j] - '0');
        text += src[j++];
      }
      out.push_back({TokKind::Number, text, v, at});
      advance(text.size());
      continue;
    }
    if (is_ident_start(c)) {
      size_t j = i;
      std::string text;
      while (j < src.size() && is_ident_char(src[j])) text += src[j++];
      out.push_back({TokKind::Ident, text, 0, at});
      advance(text.size());
      continue;
    }
    throw ParseError(at, std::string("unexpected character '") + c + "'");
  }
  out.push_back({TokKind::End, "", 0, loc()});
  return out;
}

// ---------------------------------------------------------------------------
// Syntax trees (unresolved)

struct TermSyn;
using TermSynPtr = std::shared_ptr<const TermSyn>;

struct TermSyn {
  enum Kind { Name, Number, App, Lam, Pi, TypeSort, KindSort } kind;
  std::string name;  // Name; binder name for Lam/Pi
  std::uint64_t num = 0;
  TermSynPtr a, b;
  SourceLoc loc;
};

struct DeclStmt {
  std::string name;
  TermSynPtr type;
  SourceLoc loc;
};

struct RuleStmt {
  std::vector<std::string> vars;
  TermSynPtr lhs, rhs;
  SourceLoc loc;
};

enum class CmdKind { TypeOf, Reduce, Check };

struct CommandStmt {
  CmdKind cmd;
  TermSynPtr a, b;  // Check: term and expected type
  SourceLoc loc;
};

using Statement = std::variant<DeclStmt, RuleStmt, CommandStmt>;

struct SourceFile {
  std::vector<Statement> statements;
};

// ---------------------------------------------------------------------------
// Parser

class Parser {
public:
  explicit Parser(const std::string& src) : toks_(lex(src)) {}

  SourceFile parse_file() {
    SourceFile f;
    while (peek().kind != TokKind::End) f.statements.push_back(parse_statement());
    return f;
  }

  TermSynPtr parse_single_term() {
    auto t = parse_term();
    expect(TokKind::End, "end of expression");
    return t;
  }

private:
  std::vector<Token> toks_;
  size_t pos_ = 0;

  const Token& peek(size_t ahead = 0) const {
    size_t j = pos_ + ahead;
    return j < toks_.size() ? toks_[j] : toks_.back();
  }
  Token next() { return toks_[pos_ < toks_.size() - 1 ? pos_++ : pos_]; }
  Token expect(TokKind k, const std::string& what) {
    if (peek().kind != k)
      throw ParseError(peek().loc, "expected " + what + ", found " +
                                       tok_name(peek().kind) +
                                       (peek().text.empty() ? "" : " '" + peek().text + "'"));
    return next();
  }

  Statement parse_statement() {
    const Token& t = peek();
    if (t.kind == TokKind::HashCmd) {
      next();
      CommandStmt c;
      c.loc = t.loc;
      if (t.text == "TYPE") {
        c.cmd = CmdKind::TypeOf;
        c.a = parse_term();
      } else if (t.text == "REDUCE") {
        c.cmd = CmdKind::Reduce;
        c.a = parse_term();
      } else if (t.text == "CHECK") {
        c.cmd = CmdKind::Check;
        c.a = parse_term();
        expect(TokKind::Colon, "':'");
        c.b = parse_term();
      } else {
        throw ParseError(t.loc, "unknown command '#" + t.text + "'");
      }
      expect(TokKind::Dot, "'.'");
      return c;
    }
    if (t.kind == TokKind::LBracket) {
      next();
      RuleStmt r;
      r.loc = t.loc;
      if (peek().kind != TokKind::RBracket) {
        r.vars.push_back(expect(TokKind::Ident, "rule variable").text);
        while (peek().kind == TokKind::Comma) {
          next();
          r.vars.push_back(expect(TokKind::Ident, "rule variable").text);
        }
      }
      expect(TokKind::RBracket, "']'");
      r.lhs = parse_term();
      expect(TokKind::LongArrow, "'-->'");
      r.rhs = parse_term();
      expect(TokKind::Dot, "'.'");
      return r;
    }
    if (t.kind == TokKind::Ident || t.kind == TokKind::Number) {
      // Declared names may be numeric ("0 : Nat.").
      DeclStmt d;
      d.loc = t.loc;
      d.name = next().text;
      expect(TokKind::Colon, "':'");
      d.type = parse_term();
      expect(TokKind::Dot, "'.'");
      return d;
    }
    throw ParseError(t.loc, std::string("expected a statement, found ") +
                                tok_name(t.kind));
  }

  TermSynPtr parse_term() {
    // Binder: IDENT ':' appterm ('=>' | '->') term.  Backtrack otherwise.
    if (peek().kind == TokKind::Ident && peek(1).kind == TokKind::Colon) {
      size_t save = pos_;
      Token name = next();
      next();  // ':'
      bool ok = true;
      TermSynPtr annot;
      try {
        annot = parse_appterm();
      } catch (const ParseError&) {
        ok = false;
      }
      if (ok && (peek().kind == TokKind::FatArrow || peek().kind == TokKind::Arrow)) {
        bool is_lam = next().kind == TokKind::FatArrow;
        auto body = parse_term();
        auto t = std::make_shared<TermSyn>();
        t->kind = is_lam ? TermSyn::Lam : TermSyn::Pi;
        t->name = name.text;
        t->a = annot;
        t->b = body;
        t->loc = name.loc;
        return t;
      }
      pos_ = save;
    }
    auto lhs = parse_appterm();
    if (peek().kind == TokKind::Arrow) {
      Token arr = next();
      auto rhs = parse_term();
      auto t = std::make_shared<TermSyn>();
      t->kind = TermSyn::Pi;
      t->name = "";  // non-dependent
      t->a = lhs;
      t->b = rhs;
      t->loc = arr.loc;
      return t;
    }
    return lhs;
  }

  TermSynPtr parse_appterm() {
    auto t = parse_atom();
    while (starts_atom(peek().kind)) {
      auto arg = parse_atom();
      auto n = std::make_shared<TermSyn>();
      n->kind = TermSyn::App;
      n->a = t;
      n->b = arg;
      n->loc = t->loc;
      t = n;
    }
    return t;
  }

  static bool starts_atom(TokKind k) {
    return k == TokKind::Ident || k == TokKind::Number || k == TokKind::LParen;
  }

  TermSynPtr parse_atom() {
    const Token& t = peek();
    if (t.kind == TokKind::Ident) {
      next();
      auto n = std::make_shared<TermSyn>();
      n->loc = t.loc;
      if (t.text == "Type") {
        n->kind = TermSyn::TypeSort;
      } else if (t.text == "Kind") {
        n->kind = TermSyn::KindSort;
      } else {
        n->kind = TermSyn::Name;
        n->name = t.text;
      }
      return n;
    }
    if (t.kind == TokKind::Number) {
      next();
      auto n = std::make_shared<TermSyn>();
      n->kind = TermSyn::Number;
      n->num = t.num;
      n->name = t.text;
      n->loc = t.loc;
      return n;
    }
    if (t.kind == TokKind::LParen) {
      next();
      auto inner = parse_term();
      expect(TokKind::RParen, "')'");
      return inner;
    }
    throw ParseError(t.loc, std::string("expected a term, found ") +
                                tok_name(t.kind) +
                                (t.text.empty() ? "" : " '" + t.text + "'"));
  }
};

inline SourceFile parse_file(const std::string& src) {
  return Parser(src).parse_file();
}

inline TermSynPtr parse_term_syntax(const std::string& src) {
  return Parser(src).parse_single_term();
}

// ---------------------------------------------------------------------------
// Name resolution: surface trees to stratified terms.

struct ResolveEnv {
  const GlobalContext* ctx = nullptr;
  std::set<std::string> free_allowed;  // rule variables
  bool unknown_as_var = false;         // treat unknown names as free variables
  std::vector<std::string> bound;      // innermost last
};

inline TermPtr resolve(const TermSynPtr& s, ResolveEnv& env) {
  switch (s->kind) {
    case TermSyn::TypeSort:
      return type_term();
    case TermSyn::KindSort:
      return kind_term();
    case TermSyn::Name: {
      for (size_t i = 0; i < env.bound.size(); ++i) {
        size_t j = env.bound.size() - 1 - i;
        if (env.bound[j] == s->name) return bvar(static_cast<int>(i));
      }
      if (env.free_allowed.count(s->name)) return fvar(s->name);
      if (env.ctx) {
        if (auto id = env.ctx->lookup_ident(s->name)) return constant(*id);
      }
      if (env.unknown_as_var) return fvar(s->name);
      throw TypeError(TypeErrorKind::Unbound,
                      s->loc.to_string() + ": unbound identifier '" + s->name + "'");
    }
    case TermSyn::Number: {
      // A bare numeral that happens to be a declared constant name wins.
      if (env.ctx) {
        if (auto id = env.ctx->lookup_ident(s->name)) return constant(*id);
      }
      auto zero = env.ctx ? env.ctx->lookup_ident("0") : std::nullopt;
      auto succ = env.ctx ? env.ctx->lookup_ident("S") : std::nullopt;
      if (!zero || !succ)
        throw TypeError(TypeErrorKind::Unbound,
                        s->loc.to_string() +
                            ": numeral needs constants '0' and 'S' in context");
      TermPtr t = constant(*zero);
      try {
        for (std::uint64_t k = 0; k < s->num; ++k) t = app(constant(*succ), t);
      } catch (const IllFormedTerm& e) {
        throw TypeError(TypeErrorKind::SortError,
                        s->loc.to_string() + ": " + e.what());
      }
      return t;
    }
    case TermSyn::App: {
      auto f = resolve(s->a, env);
      auto a = resolve(s->b, env);
      try {
        return app(f, a);
      } catch (const IllFormedTerm& e) {
        throw TypeError(TypeErrorKind::SortError,
                        s->loc.to_string() + ": " + e.what());
      }
    }
    case TermSyn::Lam:
    case TermSyn::Pi: {
      auto annot = resolve(s->a, env);
      env.bound.push_back(s->name);
      TermPtr body;
      try {
        body = resolve(s->b, env);
      } catch (...) {
        env.bound.pop_back();
        throw;
      }
      env.bound.pop_back();
      try {
        return s->kind == TermSyn::Lam ? lam(s->name, annot, body)
                                       : pi(s->name, annot, body);
      } catch (const IllFormedTerm& e) {
        throw TypeError(TypeErrorKind::SortError,
                        s->loc.to_string() + ": " + e.what());
      }
    }
  }
  throw ParseError(s->loc, "resolve: bad node");
}

inline TermPtr parse_term(const std::string& src, ResolveEnv env) {
  auto syn = parse_term_syntax(src);
  return resolve(syn, env);
}

// ---------------------------------------------------------------------------
// Printer.  Levels: 0 atom, 1 application, 2 arrow, 3 binder body.

namespace detail {

inline void collect_used_names(const TermPtr& t, std::set<std::string>& out) {
  switch (t->kind) {
    case TermKind::FVar:
    case TermKind::Const:
      out.insert(t->ident.name);
      return;
    case TermKind::App:
    case TermKind::Lam:
    case TermKind::Pi:
      collect_used_names(t->a, out);
      collect_used_names(t->b, out);
      return;
    default:
      return;
  }
}

// Fold towers of S over 0 back into decimal numerals.
inline std::optional<std::uint64_t> as_numeral(const TermPtr& t) {
  std::uint64_t n = 0;
  TermPtr cur = t;
  while (true) {
    if (cur->kind == TermKind::Const &&
        cur->ident == Ident{"0", IdentKind::ObjectConst})
      return n;
    if (cur->kind == TermKind::App && cur->a->kind == TermKind::Const &&
        cur->a->ident == Ident{"S", IdentKind::ObjectConst}) {
      ++n;
      cur = cur->b;
      continue;
    }
    return std::nullopt;
  }
}

struct PrintState {
  std::vector<std::string> names;  // binder display names, innermost last
};

inline bool occurs_bound(const TermPtr& t, int depth) {
  switch (t->kind) {
    case TermKind::BVar: return t->index == depth;
    case TermKind::App:
      return occurs_bound(t->a, depth) || occurs_bound(t->b, depth);
    case TermKind::Lam:
    case TermKind::Pi:
      return occurs_bound(t->a, depth) || occurs_bound(t->b, depth + 1);
    default:
      return false;
  }
}

inline std::string pick_binder_name(const std::string& hint, const TermPtr& body,
                                    const PrintState& st) {
  std::string base = hint.empty() ? "x" : hint;
  auto pos = base.find('%');
  if (pos != std::string::npos) base.resize(pos);
  if (base.empty()) base = "x";
  std::set<std::string> used;
  collect_used_names(body, used);
  for (auto& n : st.names) used.insert(n);
  std::string cand = base;
  while (used.count(cand)) cand += '\'';
  return cand;
}

inline std::string print_rec(const TermPtr& t, int level, PrintState& st) {
  auto paren = [&](const std::string& s, bool need) {
    return need ? "(" + s + ")" : s;
  };
  switch (t->kind) {
    case TermKind::BVar: {
      size_t j = st.names.size();
      if (t->index >= 0 && static_cast<size_t>(t->index) < j)
        return st.names[j - 1 - static_cast<size_t>(t->index)];
      return "^" + std::to_string(t->index);  // dangling; debugging only
    }
    case TermKind::FVar:
      return t->ident.name;
    case TermKind::Const:
      return t->ident.name;
    case TermKind::Type:
      return "Type";
    case TermKind::Kind:
      return "Kind";
    case TermKind::App: {
      if (auto n = as_numeral(t)) return std::to_string(*n);
      std::string s =
          print_rec(t->a, 1, st) + " " + print_rec(t->b, 0, st);
      return paren(s, level < 1);
    }
    case TermKind::Lam: {
      std::string x = pick_binder_name(t->hint, t->b, st);
      std::string annot = print_rec(t->a, 0, st);
      st.names.push_back(x);
      std::string body = print_rec(t->b, 3, st);
      st.names.pop_back();
      return paren(x + ":" + annot + " => " + body, level < 3);
    }
    case TermKind::Pi: {
      if (!occurs_bound(t->b, 0)) {
        std::string dom = print_rec(t->a, 1, st);
        st.names.push_back("_");
        std::string cod = print_rec(t->b, 2, st);
        st.names.pop_back();
        return paren(dom + " -> " + cod, level < 2);
      }
      std::string x = pick_binder_name(t->hint, t->b, st);
      std::string dom = print_rec(t->a, 0, st);
      st.names.push_back(x);
      std::string cod = print_rec(t->b, 3, st);
      st.names.pop_back();
      return paren(x + ":" + dom + " -> " + cod, level < 3);
    }
  }
  return "?";
}

}  // namespace detail

inline std::string print_term(const TermPtr& t) {
  detail::PrintState st;
  return detail::print_rec(t, 3, st);
}

}  // namespace lpm
