#pragma once

// Terms of a dependently-typed calculus whose conversion will be extended by
// rewrite rules.  The syntax is stratified: objects, types, kinds and the
// single sort Kind live in one tree type but mixing them (say, applying a
// kind) is rejected when a node is built.  Binders are locally nameless:
// bound occurrences are de Bruijn indices, free occurrences carry an Ident.
// Alpha-equivalence is therefore plain structural equality; surface names
// are kept on binders only as printing hints.

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <memory>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace lpm {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct IllFormedTerm : Error {
  using Error::Error;
};

struct FuelExhausted : Error {
  FuelExhausted() : Error("fuel exhausted") {}
};

// One unit is spent per rewrite step; structural work is free.
struct Fuel {
  std::uint64_t left = 0;
  std::uint64_t used = 0;
  void tick() {
    if (left == 0) throw FuelExhausted();
    --left;
    ++used;
  }
};

enum class IdentKind { Variable, ObjectConst, TypeConst };

struct Ident {
  std::string name;
  IdentKind kind = IdentKind::Variable;
  friend bool operator==(const Ident&, const Ident&) = default;
  friend auto operator<=>(const Ident&, const Ident&) = default;
};

enum class Category { Object, TypeLevel, KindLevel, KindSymbol };

enum class TermKind { BVar, FVar, Const, App, Lam, Pi, Type, Kind };

class Term;
using TermPtr = std::shared_ptr<const Term>;

class Term {
public:
  TermKind kind;
  Category cat;
  int index = -1;    // BVar
  Ident ident;       // FVar, Const
  TermPtr a, b;      // App: fun/arg; Lam: annot/body; Pi: dom/cod
  std::string hint;  // Lam/Pi binder name

  Term(TermKind k, Category c) : kind(k), cat(c) {}
};

namespace detail {
inline const char* category_name(Category c) {
  switch (c) {
    case Category::Object: return "object";
    case Category::TypeLevel: return "type";
    case Category::KindLevel: return "kind";
    case Category::KindSymbol: return "Kind";
  }
  return "?";
}
}  // namespace detail

inline TermPtr bvar(int index) {
  auto t = std::make_shared<Term>(TermKind::BVar, Category::Object);
  t->index = index;
  return t;
}

inline TermPtr fvar(Ident id) {
  if (id.kind != IdentKind::Variable)
    throw IllFormedTerm("fvar: ident '" + id.name + "' is not a variable");
  auto t = std::make_shared<Term>(TermKind::FVar, Category::Object);
  t->ident = std::move(id);
  return t;
}

inline TermPtr fvar(const std::string& name) {
  return fvar(Ident{name, IdentKind::Variable});
}

inline TermPtr constant(Ident id) {
  if (id.kind == IdentKind::Variable)
    throw IllFormedTerm("constant: ident '" + id.name + "' is a variable");
  auto t = std::make_shared<Term>(
      TermKind::Const, id.kind == IdentKind::ObjectConst ? Category::Object
                                                         : Category::TypeLevel);
  t->ident = std::move(id);
  return t;
}

inline TermPtr obj_const(const std::string& name) {
  return constant(Ident{name, IdentKind::ObjectConst});
}

inline TermPtr type_const(const std::string& name) {
  return constant(Ident{name, IdentKind::TypeConst});
}

inline TermPtr type_term() {
  static const TermPtr t =
      std::make_shared<Term>(TermKind::Type, Category::KindLevel);
  return t;
}

inline TermPtr kind_term() {
  static const TermPtr t =
      std::make_shared<Term>(TermKind::Kind, Category::KindSymbol);
  return t;
}

inline TermPtr app(TermPtr fun, TermPtr arg) {
  if (arg->cat != Category::Object)
    throw IllFormedTerm(std::string("application argument must be an object, got ") +
                        detail::category_name(arg->cat));
  if (fun->cat != Category::Object && fun->cat != Category::TypeLevel)
    throw IllFormedTerm(std::string("cannot apply a ") +
                        detail::category_name(fun->cat));
  auto t = std::make_shared<Term>(TermKind::App, fun->cat);
  t->a = std::move(fun);
  t->b = std::move(arg);
  return t;
}

inline TermPtr lam(std::string hint, TermPtr annot, TermPtr body) {
  if (annot->cat != Category::TypeLevel)
    throw IllFormedTerm(std::string("binder annotation must be a type, got ") +
                        detail::category_name(annot->cat));
  if (body->cat != Category::Object && body->cat != Category::TypeLevel)
    throw IllFormedTerm(std::string("abstraction body must be an object or a type, got ") +
                        detail::category_name(body->cat));
  auto t = std::make_shared<Term>(TermKind::Lam, body->cat);
  t->hint = std::move(hint);
  t->a = std::move(annot);
  t->b = std::move(body);
  return t;
}

inline TermPtr pi(std::string hint, TermPtr dom, TermPtr cod) {
  if (dom->cat != Category::TypeLevel)
    throw IllFormedTerm(std::string("product domain must be a type, got ") +
                        detail::category_name(dom->cat));
  if (cod->cat != Category::TypeLevel && cod->cat != Category::KindLevel)
    throw IllFormedTerm(std::string("product codomain must be a type or a kind, got ") +
                        detail::category_name(cod->cat));
  auto t = std::make_shared<Term>(TermKind::Pi, cod->cat);
  t->hint = std::move(hint);
  t->a = std::move(dom);
  t->b = std::move(cod);
  return t;
}

inline Category categorize(const TermPtr& t) { return t->cat; }

inline bool is_type_sort(const TermPtr& t) { return t->kind == TermKind::Type; }
inline bool is_kind_sort(const TermPtr& t) { return t->kind == TermKind::Kind; }

// Fresh variables for opening binders.  '%' never appears in surface
// identifiers, so these cannot collide with user names.
inline Ident fresh_var(const std::string& hint) {
  static std::atomic<std::uint64_t> counter{0};
  std::string base = hint.empty() ? "x" : hint;
  auto pos = base.find('%');
  if (pos != std::string::npos) base.resize(pos);
  return Ident{base + "%" + std::to_string(counter++), IdentKind::Variable};
}

// Replace bound index `depth` by v (v must be locally closed).
inline TermPtr open_at(const TermPtr& t, int depth, const TermPtr& v) {
  switch (t->kind) {
    case TermKind::BVar:
      return t->index == depth ? v : t;
    case TermKind::FVar:
    case TermKind::Const:
    case TermKind::Type:
    case TermKind::Kind:
      return t;
    case TermKind::App: {
      auto f = open_at(t->a, depth, v);
      auto a = open_at(t->b, depth, v);
      return (f == t->a && a == t->b) ? t : app(f, a);
    }
    case TermKind::Lam: {
      auto an = open_at(t->a, depth, v);
      auto b = open_at(t->b, depth + 1, v);
      return (an == t->a && b == t->b) ? t : lam(t->hint, an, b);
    }
    case TermKind::Pi: {
      auto d = open_at(t->a, depth, v);
      auto c = open_at(t->b, depth + 1, v);
      return (d == t->a && c == t->b) ? t : pi(t->hint, d, c);
    }
  }
  throw IllFormedTerm("open_at: bad node");
}

inline TermPtr open_binder(const TermPtr& body, const TermPtr& v) {
  return open_at(body, 0, v);
}

// Abstract free variable x as bound index `depth`.
inline TermPtr close_at(const TermPtr& t, int depth, const Ident& x) {
  switch (t->kind) {
    case TermKind::FVar:
      return t->ident == x ? bvar(depth) : t;
    case TermKind::BVar:
    case TermKind::Const:
    case TermKind::Type:
    case TermKind::Kind:
      return t;
    case TermKind::App: {
      auto f = close_at(t->a, depth, x);
      auto a = close_at(t->b, depth, x);
      return (f == t->a && a == t->b) ? t : app(f, a);
    }
    case TermKind::Lam: {
      auto an = close_at(t->a, depth, x);
      auto b = close_at(t->b, depth + 1, x);
      return (an == t->a && b == t->b) ? t : lam(t->hint, an, b);
    }
    case TermKind::Pi: {
      auto d = close_at(t->a, depth, x);
      auto c = close_at(t->b, depth + 1, x);
      return (d == t->a && c == t->b) ? t : pi(t->hint, d, c);
    }
  }
  throw IllFormedTerm("close_at: bad node");
}

inline TermPtr close_binder(const TermPtr& t, const Ident& x) {
  return close_at(t, 0, x);
}

// Binder-aware helpers for building terms from opened bodies.
inline TermPtr lam_closing(const std::string& hint, const TermPtr& annot,
                           const TermPtr& open_body, const Ident& x) {
  return lam(hint, annot, close_binder(open_body, x));
}

inline TermPtr pi_closing(const std::string& hint, const TermPtr& dom,
                          const TermPtr& open_cod, const Ident& x) {
  return pi(hint, dom, close_binder(open_cod, x));
}

// Capture-avoiding substitution of a free variable.  Bound occurrences are
// indices, so no renaming is ever needed; the printer freshens binder hints
// that would shadow a free name.
inline TermPtr substitute(const TermPtr& t, const Ident& x, const TermPtr& v) {
  switch (t->kind) {
    case TermKind::FVar:
      return t->ident == x ? v : t;
    case TermKind::BVar:
    case TermKind::Const:
    case TermKind::Type:
    case TermKind::Kind:
      return t;
    case TermKind::App: {
      auto f = substitute(t->a, x, v);
      auto a = substitute(t->b, x, v);
      return (f == t->a && a == t->b) ? t : app(f, a);
    }
    case TermKind::Lam: {
      auto an = substitute(t->a, x, v);
      auto b = substitute(t->b, x, v);
      return (an == t->a && b == t->b) ? t : lam(t->hint, an, b);
    }
    case TermKind::Pi: {
      auto d = substitute(t->a, x, v);
      auto c = substitute(t->b, x, v);
      return (d == t->a && c == t->b) ? t : pi(t->hint, d, c);
    }
  }
  throw IllFormedTerm("substitute: bad node");
}

// Finite substitution on free variables, applied in parallel.
struct ObjSubstitution {
  std::vector<std::pair<Ident, TermPtr>> items;

  const TermPtr* find(const Ident& x) const {
    for (auto& [k, v] : items)
      if (k == x) return &v;
    return nullptr;
  }
  void set(const Ident& x, TermPtr v) {
    for (auto& [k, old] : items)
      if (k == x) {
        old = std::move(v);
        return;
      }
    items.emplace_back(x, std::move(v));
  }
};

inline TermPtr apply_subst(const TermPtr& t, const ObjSubstitution& s) {
  switch (t->kind) {
    case TermKind::FVar: {
      auto* v = s.find(t->ident);
      return v ? *v : t;
    }
    case TermKind::BVar:
    case TermKind::Const:
    case TermKind::Type:
    case TermKind::Kind:
      return t;
    case TermKind::App:
      return app(apply_subst(t->a, s), apply_subst(t->b, s));
    case TermKind::Lam:
      return lam(t->hint, apply_subst(t->a, s), apply_subst(t->b, s));
    case TermKind::Pi:
      return pi(t->hint, apply_subst(t->a, s), apply_subst(t->b, s));
  }
  throw IllFormedTerm("apply_subst: bad node");
}

inline bool alpha_eq(const TermPtr& s, const TermPtr& t) {
  if (s == t) return true;
  if (s->kind != t->kind) return false;
  switch (s->kind) {
    case TermKind::BVar: return s->index == t->index;
    case TermKind::FVar:
    case TermKind::Const: return s->ident == t->ident;
    case TermKind::Type:
    case TermKind::Kind: return true;
    case TermKind::App:
    case TermKind::Lam:
    case TermKind::Pi:
      return alpha_eq(s->a, t->a) && alpha_eq(s->b, t->b);
  }
  return false;
}

inline void free_vars_into(const TermPtr& t, std::set<Ident>& out) {
  switch (t->kind) {
    case TermKind::FVar: out.insert(t->ident); return;
    case TermKind::BVar:
    case TermKind::Const:
    case TermKind::Type:
    case TermKind::Kind: return;
    case TermKind::App:
    case TermKind::Lam:
    case TermKind::Pi:
      free_vars_into(t->a, out);
      free_vars_into(t->b, out);
      return;
  }
}

inline std::set<Ident> free_vars(const TermPtr& t) {
  std::set<Ident> out;
  free_vars_into(t, out);
  return out;
}

// Free variables in first-occurrence order (left to right).
inline std::vector<Ident> free_vars_ordered(const TermPtr& t) {
  std::vector<Ident> out;
  auto visit = [&](auto&& self, const TermPtr& u) -> void {
    switch (u->kind) {
      case TermKind::FVar: {
        for (auto& x : out)
          if (x == u->ident) return;
        out.push_back(u->ident);
        return;
      }
      case TermKind::App:
      case TermKind::Lam:
      case TermKind::Pi:
        self(self, u->a);
        self(self, u->b);
        return;
      default:
        return;
    }
  };
  visit(visit, t);
  return out;
}

inline bool occurs_free(const Ident& x, const TermPtr& t) {
  switch (t->kind) {
    case TermKind::FVar: return t->ident == x;
    case TermKind::App:
    case TermKind::Lam:
    case TermKind::Pi:
      return occurs_free(x, t->a) || occurs_free(x, t->b);
    default:
      return false;
  }
}

// Application spine: f a b c  ->  (f, [a, b, c]).
inline std::pair<TermPtr, std::vector<TermPtr>> spine(const TermPtr& t) {
  std::vector<TermPtr> args;
  TermPtr head = t;
  while (head->kind == TermKind::App) {
    args.push_back(head->b);
    head = head->a;
  }
  std::reverse(args.begin(), args.end());
  return {head, std::move(args)};
}

inline TermPtr app_spine(TermPtr head, const std::vector<TermPtr>& args) {
  for (auto& a : args) head = app(std::move(head), a);
  return head;
}

// A term is algebraic when it is not itself a variable and is built from
// constants, variables and applications only, with variables unapplied.
inline bool is_algebraic(const TermPtr& t) {
  if (t->kind == TermKind::FVar || t->kind == TermKind::BVar) return false;
  auto rec = [&](auto&& self, const TermPtr& u) -> bool {
    switch (u->kind) {
      case TermKind::FVar:
      case TermKind::BVar:
      case TermKind::Const:
        return true;
      case TermKind::App: {
        auto [head, args] = spine(u);
        if (head->kind != TermKind::Const) return false;
        for (auto& a : args)
          if (!self(self, a)) return false;
        return true;
      }
      default:
        return false;
    }
  };
  return rec(rec, t);
}

// Child-index paths into a term: App 0=fun 1=arg, Lam 0=annot 1=body,
// Pi 0=dom 1=cod.
using Path = std::vector<int>;

inline std::string path_to_string(const Path& p) {
  if (p.empty()) return "root";
  std::string s;
  for (size_t i = 0; i < p.size(); ++i) {
    if (i) s += '.';
    s += std::to_string(p[i]);
  }
  return s;
}

inline TermPtr child(const TermPtr& t, int i) {
  if ((t->kind == TermKind::App || t->kind == TermKind::Lam ||
       t->kind == TermKind::Pi) &&
      (i == 0 || i == 1))
    return i == 0 ? t->a : t->b;
  throw IllFormedTerm("child: no child " + std::to_string(i));
}

inline std::uint64_t term_size(const TermPtr& t) {
  switch (t->kind) {
    case TermKind::App:
    case TermKind::Lam:
    case TermKind::Pi:
      return 1 + term_size(t->a) + term_size(t->b);
    default:
      return 1;
  }
}

}  // namespace lpm
