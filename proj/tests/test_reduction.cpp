#include <catch2/catch_amalgamated.hpp>

#include "testgen.hpp"

using namespace lpm;
using testgen::numeral;
using testgen::peano_ctx;

static TermPtr parse_peano(const std::string& src) {
  ResolveEnv env{&peano_ctx()};
  return parse_term(src, env);
}

TEST_CASE("beta steps contract redexes anywhere in the term") {
  TermPtr redex = parse_peano("(x:Nat => x) 0");
  auto steps = beta_step(redex);
  REQUIRE(steps.size() == 1);
  REQUIRE(alpha_eq(steps[0].result, numeral(0)));
  REQUIRE(steps[0].trace.rule == "beta");
  REQUIRE(steps[0].trace.path.empty());

  TermPtr under = parse_peano("y:Nat => (x:Nat => x) y");
  steps = beta_step(under);
  REQUIRE(steps.size() == 1);
  REQUIRE(alpha_eq(steps[0].result, parse_peano("y:Nat => y")));
  REQUIRE_FALSE(steps[0].trace.path.empty());
}

TEST_CASE("rule steps use syntactic matching") {
  auto steps = gamma_step(parse_peano("Plus 1 1"), peano_ctx());
  REQUIRE(steps.size() == 1);
  REQUIRE(alpha_eq(steps[0].result, parse_peano("S (Plus 0 1)")));

  // The outer Plus does not match: its first argument is not 0 or S-headed.
  steps = gamma_step(parse_peano("Plus (Plus 0 1) 2"), peano_ctx());
  REQUIRE(steps.size() == 1);
  REQUIRE(alpha_eq(steps[0].result, parse_peano("Plus 1 2")));

  steps = gamma_step(parse_peano("Map S Nil"), peano_ctx());
  REQUIRE(steps.size() == 1);
  REQUIRE(alpha_eq(steps[0].result, parse_peano("Nil")));
}

TEST_CASE("combined step relation is the union of beta and rule steps") {
  TermPtr t = parse_peano("Plus ((x:Nat => x) 0) ((x:Nat => x) 1)");
  auto combined = beta_gamma_step(t, peano_ctx());
  auto betas = beta_step(t);
  auto gammas = gamma_step(t, peano_ctx());
  REQUIRE(combined.size() == betas.size() + gammas.size());
  for (auto& s : betas) {
    std::vector<TermPtr> results;
    for (auto& c : combined) results.push_back(c.result);
    REQUIRE(testgen::term_in(s.result, results));
  }
}

TEST_CASE("the first step is leftmost-outermost with beta before rules") {
  Path path;
  std::vector<Ident> opened;
  TermPtr t = parse_peano("(x:Nat => Plus 0 x) (Plus 0 1)");
  auto s = detail::find_first_step(t, peano_ctx(), path, opened);
  REQUIRE(s.has_value());
  REQUIRE(s->trace.rule == "beta");
  REQUIRE(s->trace.path.empty());
  REQUIRE(alpha_eq(s->result, parse_peano("Plus 0 (Plus 0 1)")));
}

TEST_CASE("normalization computes the map example") {
  Fuel fuel{200};
  TermPtr t = parse_peano("Map (Plus 3) (Cons 1 (Cons 2 (Cons 3 Nil)))");
  TermPtr nf = normalize_syntactic(t, peano_ctx(), fuel);
  REQUIRE(print_term(nf) == "Cons 4 (Cons 5 (Cons 6 Nil))");
  REQUIRE(fuel.used < 200);
}

TEST_CASE("normalization reports fuel exhaustion") {
  Fuel tiny{3};
  TermPtr t = parse_peano("Map (Plus 3) (Cons 1 (Cons 2 (Cons 3 Nil)))");
  REQUIRE_THROWS_AS(normalize_syntactic(t, peano_ctx(), tiny), FuelExhausted);

  GlobalContext loop = testgen::load_context(
      "Nat : Type.\n0 : Nat.\nS : Nat -> Nat.\n"
      "grow : Nat.\n[] grow --> S grow.\n");
  ResolveEnv env{&loop};
  Fuel f{50};
  REQUIRE_THROWS_AS(normalize_syntactic(parse_term("grow", env), loop, f),
                    FuelExhausted);
}

TEST_CASE("weak head normalization stops at constructors") {
  Fuel fuel{1000};
  TermPtr t = whnf(parse_peano("Plus 0 (Plus 0 1)"), peano_ctx(), fuel);
  REQUIRE(alpha_eq(t, numeral(1)));

  TermPtr keep = parse_peano("Cons (Plus 0 0) Nil");
  REQUIRE(alpha_eq(whnf(keep, peano_ctx(), 1000), keep));
}

TEST_CASE("matching may force evaluation of rule argument positions") {
  // Plus (S n1) n2 only applies after the first argument reveals its S.
  Fuel fuel{1000};
  TermPtr t = whnf(parse_peano("Plus (Plus 1 1) 5"), peano_ctx(), fuel);
  auto [head, args] = spine(t);
  REQUIRE(head->kind == TermKind::Const);
  REQUIRE(head->ident.name == "S");
}

TEST_CASE("convertibility closes typing under reduction") {
  REQUIRE(convertible(parse_peano("Plus 2 2"), numeral(4), peano_ctx(), 1000));
  REQUIRE_FALSE(convertible(numeral(3), numeral(4), peano_ctx(), 1000));
  REQUIRE(convertible(parse_peano("x:Nat => Plus 0 x"),
                      parse_peano("x:Nat => x"), peano_ctx(), 1000));
  REQUIRE(convertible(parse_peano("Map (Plus 1) Nil"), parse_peano("Nil"),
                      peano_ctx(), 1000));
}

TEST_CASE("left linearity and algebraic shape are detected") {
  auto& rules = peano_ctx().rules();
  REQUIRE(rules.size() == 4);
  for (auto& ar : rules) {
    REQUIRE(is_left_linear(ar.rule));
    REQUIRE(is_left_algebraic(ar.rule));
  }

  Ident n = fvar("n")->ident;
  RewriteRule nonlinear = RewriteRule::make(
      app(app(obj_const("Plus"), fvar(n)), fvar(n)), fvar(n), "dup");
  REQUIRE_FALSE(is_left_linear(nonlinear));
  REQUIRE(is_left_algebraic(nonlinear));
}

TEST_CASE("syntactic matching instantiates rule variables") {
  Ident n = fvar("n")->ident;
  TermPtr lhs = app(app(obj_const("Plus"), numeral(0)), fvar(n));
  auto m = syntactic_match(lhs, parse_peano("Plus 0 7"));
  REQUIRE(m.has_value());
  REQUIRE(alpha_eq(*m->find(n), numeral(7)));
  REQUIRE_FALSE(syntactic_match(lhs, parse_peano("Plus 1 7")).has_value());

  TermPtr dup = app(app(obj_const("Plus"), fvar(n)), fvar(n));
  REQUIRE(syntactic_match(dup, parse_peano("Plus 3 3")).has_value());
  REQUIRE_FALSE(syntactic_match(dup, parse_peano("Plus 3 4")).has_value());
}

TEST_CASE("recorded traces replay to the stepped term") {
  TermPtr t = parse_peano("Map (Plus 1) (Cons (Plus 0 2) Nil)");
  for (auto& s : beta_gamma_step(t, peano_ctx())) {
    TermPtr replayed = replay_step(t, s.trace, peano_ctx());
    REQUIRE(alpha_eq(replayed, s.result));
    REQUIRE_FALSE(s.trace.to_string().empty());
  }
}

TEST_CASE("random walks stay inside the step relation") {
  testgen::Rng rng(7);
  for (int i = 0; i < 50; ++i) {
    testgen::PeanoGen gen{rng};
    TermPtr t = gen.any(4);
    auto walk = testgen::random_walk_plain(t, peano_ctx(), rng, 10);
    for (size_t j = 0; j + 1 < walk.size(); ++j) {
      std::vector<TermPtr> nexts;
      for (auto& s : beta_gamma_step(walk[j], peano_ctx()))
        nexts.push_back(s.result);
      REQUIRE(testgen::term_in(walk[j + 1], nexts));
    }
  }
}
