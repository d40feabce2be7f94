#pragma once

// Shared fixtures: the worked contexts as embedded sources, seeded random
// generators for well-formed and for well-typed terms, and set helpers.

#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "lpm/lpm.hpp"

namespace lpm::testgen {

inline GlobalContext load_context(const std::string& src) {
  SourceFile sf = parse_file(src);
  DriverOptions opt;
  std::ostringstream sink;
  return run_file(sf, opt, sink, sink, nullptr);
}

inline const std::string& peano_src() {
  static const std::string s = R"(
Nat : Type.
0 : Nat.
S : Nat -> Nat.

List : Type.
Nil : List.
Cons : Nat -> List -> List.

Map : (Nat -> Nat) -> List -> List.
[f] Map f Nil --> Nil.
[f, hd, tl] Map f (Cons hd tl) --> Cons (f hd) (Map f tl).

Plus : Nat -> Nat -> Nat.
[n] Plus 0 n --> n.
[n1, n2] Plus (S n1) n2 --> S (Plus n1 n2).
)";
  return s;
}

inline const std::string& diff_src() {
  static const std::string s = R"(
R : Type.
Exp : R -> R.
Diff : (R -> R) -> R -> R.
Fmult : (R -> R) -> (R -> R) -> R -> R.

[f] Diff (x:R => Exp (f x)) --> Fmult (Diff (x:R => f x)) (x:R => Exp (f x)).
)";
  return s;
}

// Variant whose rule uses the matched function bare on the right; its
// left arity 1 and right arity 0 cannot be encoded uniformly.
inline const std::string& diff_naive_src() {
  static const std::string s = R"(
R : Type.
Exp : R -> R.
Diff : (R -> R) -> R -> R.
Fmult : (R -> R) -> (R -> R) -> R -> R.

[f] Diff (x:R => Exp (f x)) --> Fmult (Diff f) (x:R => Exp (f x)).
)";
  return s;
}

inline const std::string& linear_src() {
  static const std::string s = R"(
Nat : Type.
0 : Nat.
S : Nat -> Nat.
Plus : Nat -> Nat -> Nat.
[n] Plus 0 n --> n.
[n1, n2] Plus (S n1) n2 --> S (Plus n1 n2).

expr : Type.
mk_expr : Nat -> Nat -> expr.

expr_S : expr -> expr.
[a, b] expr_S (mk_expr a b) --> mk_expr a (S b).

expr_P : expr -> expr -> expr.
[a1, b1, a2, b2] expr_P (mk_expr a1 b1) (mk_expr a2 b2) --> mk_expr (Plus a1 a2) (Plus b1 b2).

to_expr : (Nat -> Nat) -> expr.
[] to_expr (x:Nat => 0) --> mk_expr 0 0.
[f] to_expr (x:Nat => S (f x)) --> expr_S (to_expr (x:Nat => f x)).
[] to_expr (x:Nat => x) --> mk_expr (S 0) 0.
[f, g] to_expr (x:Nat => Plus (f x) (g x)) --> expr_P (to_expr (x:Nat => f x)) (to_expr (x:Nat => g x)).

Solution : Type.
All : Solution.
One : Nat -> Nat -> Solution.
None : Solution.

solve : expr -> Solution.
[] solve (mk_expr 0 0) --> All.
[n] solve (mk_expr 0 (S n)) --> None.
[n, m] solve (mk_expr (S n) m) --> One m n.
)";
  return s;
}

inline const GlobalContext& peano_ctx() {
  static GlobalContext g = load_context(peano_src());
  return g;
}
inline const GlobalContext& diff_ctx() {
  static GlobalContext g = load_context(diff_src());
  return g;
}
inline const GlobalContext& diff_naive_ctx() {
  static GlobalContext g = load_context(diff_naive_src());
  return g;
}
inline const GlobalContext& linear_ctx() {
  static GlobalContext g = load_context(linear_src());
  return g;
}

// ---------------------------------------------------------------------------
// Random generation.

struct Rng {
  std::mt19937_64 eng;
  explicit Rng(std::uint64_t seed) : eng(seed) {}
  int below(int n) {
    return std::uniform_int_distribution<int>(0, n - 1)(eng);
  }
  bool chance(int pct) { return below(100) < pct; }
};

// Well-formed terms over a toy signature; the domain of the embedding, no
// typability intended.
inline TermPtr random_object_term(Rng& r, int depth, std::vector<Ident>& scope);

inline TermPtr random_type_term(Rng& r, int depth, std::vector<Ident>& scope) {
  if (depth <= 0 || r.chance(40))
    return type_const(r.chance(50) ? "A" : "B");
  switch (r.below(3)) {
    case 0:
      return app(type_const("P"), random_object_term(r, depth - 1, scope));
    case 1: {
      Ident x = fresh_var("x");
      TermPtr dom = random_type_term(r, depth - 1, scope);
      scope.push_back(x);
      TermPtr cod = random_type_term(r, depth - 1, scope);
      scope.pop_back();
      return pi_closing("x", dom, cod, x);
    }
    default:
      return type_const("A");
  }
}

inline TermPtr random_object_term(Rng& r, int depth, std::vector<Ident>& scope) {
  if (depth <= 0 || r.chance(30)) {
    if (!scope.empty() && r.chance(50))
      return fvar(scope[r.below((int)scope.size())]);
    if (r.chance(15)) return fvar(r.chance(50) ? "u" : "v");
    static const char* names[] = {"c", "d", "f", "g"};
    return obj_const(names[r.below(4)]);
  }
  switch (r.below(3)) {
    case 0:
      return app(random_object_term(r, depth - 1, scope),
                 random_object_term(r, depth - 1, scope));
    case 1: {
      Ident x = fresh_var("x");
      TermPtr annot = random_type_term(r, depth - 1, scope);
      scope.push_back(x);
      TermPtr body = random_object_term(r, depth - 1, scope);
      scope.pop_back();
      return lam_closing("x", annot, body, x);
    }
    default: {
      Ident x = fresh_var("x");
      TermPtr annot = random_type_term(r, depth - 1, scope);
      scope.push_back(x);
      TermPtr body = random_object_term(r, depth - 1, scope);
      scope.pop_back();
      return app(lam_closing("x", annot, body, x),
                 random_object_term(r, depth - 1, scope));
    }
  }
}

inline TermPtr random_wellformed(Rng& r, int depth = 5) {
  std::vector<Ident> scope;
  int k = r.below(10);
  if (k == 0) return type_term();
  if (k <= 2) return random_type_term(r, depth, scope);
  return random_object_term(r, depth, scope);
}

inline TermPtr numeral(int n) {
  TermPtr t = obj_const("0");
  while (n-- > 0) t = app(obj_const("S"), t);
  return t;
}

// Well-typed terms of the Peano context, built by the typing rules.
struct PeanoGen {
  Rng& r;
  std::vector<Ident> vars;  // Nat binders in scope

  TermPtr nat(int d) {
    if (d <= 0 || r.chance(35)) {
      if (!vars.empty() && r.chance(40))
        return fvar(vars[r.below((int)vars.size())]);
      return numeral(r.below(4));
    }
    switch (r.below(3)) {
      case 0:
        return app(obj_const("S"), nat(d - 1));
      case 1:
        return app(app(obj_const("Plus"), nat(d - 1)), nat(d - 1));
      default:
        return app(natfun(d - 1), nat(d - 1));
    }
  }
  TermPtr natfun(int d) {
    switch (r.below(3)) {
      case 0:
        return obj_const("S");
      case 1:
        return app(obj_const("Plus"), nat(d - 1));
      default: {
        Ident x = fresh_var("x");
        vars.push_back(x);
        TermPtr body = nat(d - 1);
        vars.pop_back();
        return lam_closing("x", type_const("Nat"), body, x);
      }
    }
  }
  TermPtr list(int d) {
    if (d <= 0 || r.chance(35)) return obj_const("Nil");
    if (r.chance(55))
      return app(app(obj_const("Cons"), nat(d - 1)), list(d - 1));
    return app(app(obj_const("Map"), natfun(d - 1)), list(d - 1));
  }
  TermPtr any(int d) {
    switch (r.below(3)) {
      case 0:
        return nat(d);
      case 1:
        return list(d);
      default:
        return natfun(d);
    }
  }
};

// Well-typed terms of the differentiation context.  The signature has no
// closed inhabitant of R, so R-typed subterms only appear under binders.
struct DiffGen {
  Rng& r;
  std::vector<Ident> vars;  // R binders in scope

  TermPtr rfun(int d) {
    if (d <= 0 || r.chance(30)) return obj_const("Exp");
    switch (r.below(3)) {
      case 0:
        return app(obj_const("Diff"), rfun(d - 1));
      case 1:
        return app(app(obj_const("Fmult"), rfun(d - 1)), rfun(d - 1));
      default: {
        Ident x = fresh_var("x");
        vars.push_back(x);
        TermPtr body = rterm(d - 1);
        vars.pop_back();
        return lam_closing("x", type_const("R"), body, x);
      }
    }
  }
  TermPtr rterm(int d) {
    if (d <= 0 || r.chance(45)) return fvar(vars[r.below((int)vars.size())]);
    return app(rfun(d - 1), rterm(d - 1));
  }
  // Biased towards sources that step modulo beta.
  TermPtr source(int d) {
    if (r.chance(50)) {
      Ident x = fresh_var("x");
      vars.push_back(x);
      TermPtr arg = rterm(d - 1);
      vars.pop_back();
      return app(obj_const("Diff"),
                 lam_closing("x", type_const("R"), app(obj_const("Exp"), arg), x));
    }
    return rfun(d);
  }
};

// Well-typed terms of the linear-equation context.
struct LinearGen {
  Rng& r;

  TermPtr poly(int d, const Ident& x) {
    if (d <= 0 || r.chance(35)) {
      switch (r.below(3)) {
        case 0:
          return obj_const("0");
        case 1:
          return fvar(x);
        default:
          return numeral(r.below(3));
      }
    }
    if (r.chance(50)) return app(obj_const("S"), poly(d - 1, x));
    return app(app(obj_const("Plus"), poly(d - 1, x)), poly(d - 1, x));
  }
  TermPtr linfun(int d) {
    Ident x = fresh_var("x");
    return lam_closing("x", type_const("Nat"), poly(d, x), x);
  }
  TermPtr expr(int d) {
    if (d <= 0 || r.chance(30))
      return app(app(obj_const("mk_expr"), numeral(r.below(3))),
                 numeral(r.below(3)));
    switch (r.below(3)) {
      case 0:
        return app(obj_const("to_expr"), linfun(d - 1));
      case 1:
        return app(obj_const("expr_S"), expr(d - 1));
      default:
        return app(app(obj_const("expr_P"), expr(d - 1)), expr(d - 1));
    }
  }
  TermPtr source(int d) {
    if (r.chance(40)) return app(obj_const("solve"), expr(d));
    return expr(d);
  }
};

// ---------------------------------------------------------------------------
// Set and reachability helpers.

inline bool term_in(const TermPtr& t, const std::vector<TermPtr>& v) {
  for (auto& u : v)
    if (alpha_eq(t, u)) return true;
  return false;
}

inline bool same_term_set(const std::vector<TermPtr>& a,
                          const std::vector<TermPtr>& b) {
  for (auto& t : a)
    if (!term_in(t, b)) return false;
  for (auto& t : b)
    if (!term_in(t, a)) return false;
  return true;
}

inline bool meta_in(const meta::PretermPtr& t,
                    const std::vector<meta::PretermPtr>& v) {
  for (auto& u : v)
    if (meta::meta_alpha_eq(t, u)) return true;
  return false;
}

inline bool same_meta_set(const std::vector<meta::PretermPtr>& a,
                          const std::vector<meta::PretermPtr>& b) {
  for (auto& t : a)
    if (!meta_in(t, b)) return false;
  for (auto& t : b)
    if (!meta_in(t, a)) return false;
  return true;
}

// Breadth-first reachability under beta steps alone.
inline bool beta_reaches(const TermPtr& from, const TermPtr& to,
                         std::size_t max_steps) {
  if (alpha_eq(from, to)) return true;
  std::vector<TermPtr> layer{from};
  for (std::size_t i = 0; i < max_steps; ++i) {
    std::vector<TermPtr> next;
    for (auto& t : layer)
      for (auto& s : beta_step(t))
        if (!term_in(s.result, next)) next.push_back(s.result);
    for (auto& t : next)
      if (alpha_eq(t, to)) return true;
    layer = std::move(next);
    if (layer.empty()) return false;
  }
  return false;
}

inline TermPtr type_of(const TermPtr& t, const GlobalContext& g,
                       std::uint64_t fuel = 100000) {
  Fuel f{fuel};
  return infer(t, g, LocalContext{}, f);
}

// Random reduction walks; both return every visited term, start included.
inline std::vector<TermPtr> random_walk_plain(TermPtr t,
                                              const GlobalContext& g, Rng& r,
                                              int maxlen) {
  std::vector<TermPtr> out{std::move(t)};
  for (int i = 0; i < maxlen; ++i) {
    auto steps = beta_gamma_step(out.back(), g);
    if (steps.empty()) break;
    out.push_back(steps[r.below((int)steps.size())].result);
  }
  return out;
}

inline std::vector<TermPtr> random_walk_modulo(TermPtr t,
                                               const GlobalContext& g, Rng& r,
                                               int maxlen) {
  std::vector<TermPtr> out{std::move(t)};
  for (int i = 0; i < maxlen; ++i) {
    auto steps = step_beta_gamma_modulo(out.back(), g);
    if (steps.empty()) break;
    out.push_back(steps[r.below((int)steps.size())].target);
  }
  return out;
}

}  // namespace lpm::testgen
