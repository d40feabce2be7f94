#include <catch2/catch_amalgamated.hpp>

#include "testgen.hpp"

using namespace lpm;

TEST_CASE("binder open and close round-trip") {
  Ident x = fresh_var("x");
  Ident y = fresh_var("y");
  TermPtr body = app(fvar(x), fvar(y));
  TermPtr t = lam_closing(
      "x", type_const("A"),
      lam_closing("y", type_const("B"), body, y), x);
  REQUIRE(t->kind == TermKind::Lam);
  REQUIRE(free_vars(t).empty());

  TermPtr outer = open_binder(t->b, fvar(x));
  REQUIRE(outer->kind == TermKind::Lam);
  TermPtr inner = open_binder(outer->b, fvar(y));
  REQUIRE(alpha_eq(inner, body));
}

TEST_CASE("alpha equivalence ignores binder hints") {
  TermPtr a = lam("x", type_const("A"), bvar(0));
  TermPtr b = lam("y", type_const("A"), bvar(0));
  REQUIRE(alpha_eq(a, b));

  TermPtr c = lam("x", type_const("B"), bvar(0));
  REQUIRE_FALSE(alpha_eq(a, c));

  REQUIRE_FALSE(alpha_eq(lam("x", type_const("A"), fvar("x")), a));
  REQUIRE(alpha_eq(type_term(), type_term()));
  REQUIRE_FALSE(alpha_eq(type_term(), kind_term()));
}

TEST_CASE("substitution cannot capture a free variable named like a binder") {
  Ident y = fvar("y")->ident;
  TermPtr t = lam("x", type_const("A"), fvar(y));
  TermPtr r = substitute(t, y, fvar("x"));
  // The free "x" must stay free: the binder occupies an index, not a name.
  TermPtr expected = lam("x", type_const("A"), fvar("x"));
  REQUIRE(alpha_eq(r, expected));
  REQUIRE(r->b->kind == TermKind::FVar);
}

TEST_CASE("substitution rewrites every free occurrence") {
  Ident n = fvar("n")->ident;
  TermPtr t = app(app(obj_const("Plus"), fvar(n)), fvar(n));
  TermPtr r = substitute(t, n, testgen::numeral(2));
  REQUIRE(alpha_eq(r, app(app(obj_const("Plus"), testgen::numeral(2)),
                          testgen::numeral(2))));
  REQUIRE(free_vars(r).empty());
}

TEST_CASE("spine decomposition inverts application") {
  TermPtr t = app(app(app(obj_const("f"), obj_const("c")), obj_const("d")),
                  fvar("u"));
  auto [head, args] = spine(t);
  REQUIRE(head->kind == TermKind::Const);
  REQUIRE(args.size() == 3);
  REQUIRE(alpha_eq(app_spine(head, args), t));
}

TEST_CASE("algebraic terms are constant-headed applicative terms") {
  TermPtr good = app(app(obj_const("Plus"), obj_const("0")), fvar("n"));
  REQUIRE(is_algebraic(good));

  REQUIRE_FALSE(is_algebraic(fvar("n")));
  REQUIRE_FALSE(is_algebraic(app(fvar("f"), obj_const("0"))));
  TermPtr with_lam =
      app(obj_const("Map"), lam("x", type_const("Nat"), bvar(0)));
  REQUIRE_FALSE(is_algebraic(with_lam));
}

TEST_CASE("free variable collection respects binders") {
  Ident x = fresh_var("x");
  TermPtr t = lam_closing("x", app(type_const("P"), fvar("u")),
                          app(fvar(x), fvar("v")), x);
  auto fv = free_vars(t);
  REQUIRE(fv.size() == 2);
  REQUIRE(fv.count(fvar("u")->ident) == 1);
  REQUIRE(fv.count(fvar("v")->ident) == 1);
  REQUIRE(fv.count(x) == 0);
  REQUIRE(occurs_free(fvar("u")->ident, t));
  REQUIRE_FALSE(occurs_free(x, t));
}

TEST_CASE("fresh variables cannot collide with surface names") {
  Ident a = fresh_var("x");
  Ident b = fresh_var("x");
  REQUIRE_FALSE(a == b);
  REQUIRE(a.name.find('%') != std::string::npos);
}

TEST_CASE("ill-formed constructions are rejected") {
  // Annotations must be type-level; arguments must be objects.
  REQUIRE_THROWS_AS(lam("x", obj_const("0"), bvar(0)), IllFormedTerm);
  REQUIRE_THROWS_AS(pi("x", obj_const("0"), type_const("A")), IllFormedTerm);
  REQUIRE_THROWS_AS(app(obj_const("f"), type_const("A")), IllFormedTerm);
  REQUIRE_THROWS_AS(app(type_term(), obj_const("c")), IllFormedTerm);
}

TEST_CASE("paths address subterms") {
  TermPtr t = app(app(obj_const("Plus"), testgen::numeral(1)),
                  testgen::numeral(2));
  REQUIRE(term_size(t) > 4);
  // App children are function (0) and argument (1).
  REQUIRE(alpha_eq(child(t, 1), testgen::numeral(2)));
  REQUIRE(alpha_eq(child(child(t, 0), 1), testgen::numeral(1)));
}

TEST_CASE("fuel counts down and throws when empty") {
  Fuel f{2};
  f.tick();
  f.tick();
  REQUIRE(f.used == 2);
  REQUIRE_THROWS_AS(f.tick(), FuelExhausted);
}
