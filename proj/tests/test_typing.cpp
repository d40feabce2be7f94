#include <catch2/catch_amalgamated.hpp>

#include "testgen.hpp"

using namespace lpm;
using testgen::numeral;
using testgen::peano_ctx;
using testgen::type_of;

static TermPtr parse_peano(const std::string& src) {
  ResolveEnv env{&peano_ctx()};
  return parse_term(src, env);
}

TEST_CASE("inference follows the declaration heads") {
  REQUIRE(alpha_eq(type_of(numeral(0), peano_ctx()), type_const("Nat")));
  REQUIRE(alpha_eq(type_of(numeral(3), peano_ctx()), type_const("Nat")));
  REQUIRE(alpha_eq(type_of(obj_const("Nil"), peano_ctx()),
                   type_const("List")));// NOLINT
  REQUIRE(alpha_eq(type_of(obj_const("S"), peano_ctx()),
                   pi("x", type_const("Nat"), type_const("Nat"))));
  REQUIRE(alpha_eq(type_of(parse_peano("x:Nat => S x"), peano_ctx()),
                   pi("x", type_const("Nat"), type_const("Nat"))));
  REQUIRE(alpha_eq(type_of(parse_peano("Plus 1"), peano_ctx()),
                   pi("x", type_const("Nat"), type_const("Nat"))));

  Fuel f{1000};
  TermPtr nat_kind = infer(type_const("Nat"), peano_ctx(), LocalContext{}, f);
  REQUIRE(nat_kind->kind == TermKind::Type);
  TermPtr arrow = pi("x", type_const("Nat"), type_const("Nat"));
  REQUIRE(infer(arrow, peano_ctx(), LocalContext{}, f)->kind == TermKind::Type);
}

TEST_CASE("checking uses conversion, not syntactic equality") {
  // A dependent family makes conversion observable in types.
  GlobalContext g = peano_ctx();
  Fuel f{10000};
  Ident n = fresh_var("n");
  declare(g, "Vec", pi("x", type_const("Nat"), type_term()), f);
  declare(g, "mkv",
          pi_closing("n", type_const("Nat"),
                     app(type_const("Vec"), fvar(n)), n),
          f);

  ResolveEnv env{&g};
  TermPtr t = parse_term("mkv (Plus 2 2)", env);
  TermPtr ty = type_of(t, g);
  REQUIRE(alpha_eq(ty, app(type_const("Vec"), parse_term("Plus 2 2", env))));
  check(t, app(type_const("Vec"), numeral(4)), g, LocalContext{}, f);

  REQUIRE_THROWS_AS(
      check(t, app(type_const("Vec"), numeral(5)), g, LocalContext{}, f),
      TypeError);
}

TEST_CASE("type errors carry their failure kind") {
  Fuel f{1000};
  try {
    type_of(fvar("loose"), peano_ctx());
    FAIL("unbound variable accepted");
  } catch (const TypeError& e) {
    REQUIRE(e.kind == TypeErrorKind::Unbound);
  }

  try {
    type_of(app(numeral(0), numeral(0)), peano_ctx());
    FAIL("application of a non-function accepted");
  } catch (const TypeError& e) {
    REQUIRE(e.kind == TypeErrorKind::NotAProduct);
  }

  try {
    check(numeral(0), type_const("List"), peano_ctx(), LocalContext{}, f);
    FAIL("0 : List accepted");
  } catch (const TypeError& e) {
    REQUIRE(e.kind == TypeErrorKind::NotConvertible);
  }

  GlobalContext g = peano_ctx();
  try {
    declare(g, "Nat", type_term(), f);
    FAIL("redeclaration accepted");
  } catch (const TypeError& e) {
    REQUIRE(e.kind == TypeErrorKind::Duplicate);
  }

  // Annotations must be types: \x:0 => x is not a binder over a sort.
  try {
    type_of(parse_peano("x:0 => x"), peano_ctx());
    FAIL("object annotation accepted");
  } catch (const TypeError& e) {
    REQUIRE(e.kind == TypeErrorKind::SortError);
  } catch (const IllFormedTerm&) {
    // equally acceptable: the annotation is rejected before typing
  }
}

TEST_CASE("conversion inside typing respects fuel") {
  GlobalContext g = peano_ctx();
  Fuel f{10000};
  Ident n = fresh_var("n");
  declare(g, "Vec", pi("x", type_const("Nat"), type_term()), f);
  declare(g, "mkv",
          pi_closing("n", type_const("Nat"),
                     app(type_const("Vec"), fvar(n)), n),
          f);
  ResolveEnv env{&g};
  TermPtr t = parse_term("mkv (Plus 2 2)", env);
  Fuel tiny{1};
  REQUIRE_THROWS_AS(
      check(t, app(type_const("Vec"), numeral(4)), g, LocalContext{}, tiny),
      FuelExhausted);
}

TEST_CASE("rule admission produces the right evidence") {
  for (auto& ar : peano_ctx().rules()) {
    REQUIRE(ar.evidence.kind == EvidenceKind::AlgebraicLhs);
    REQUIRE(std::string(evidence_name(ar.evidence.kind)) == "algebraic-lhs");
  }

  auto& diff = testgen::diff_ctx().rules()[0];
  REQUIRE(diff.evidence.kind == EvidenceKind::PatternLhs);
  REQUIRE(std::string(evidence_name(diff.evidence.kind)) == "pattern-lhs");
  // The variable's type was discovered from its argument positions.
  REQUIRE(diff.evidence.delta.items.size() == 1);
  REQUIRE(diff.evidence.delta.items[0].first.name == "f");
  REQUIRE(alpha_eq(diff.evidence.delta.items[0].second,
                   pi("x", type_const("R"), type_const("R"))));
  REQUIRE(alpha_eq(diff.evidence.common_type,
                   pi("x", type_const("R"), type_const("R"))));

  int pattern_rules = 0;
  for (auto& ar : testgen::linear_ctx().rules())
    if (ar.evidence.kind == EvidenceKind::PatternLhs) ++pattern_rules;
  REQUIRE(pattern_rules == 4);  // exactly the binder-matching rules
}

TEST_CASE("rules that escape or mistype are rejected") {
  Fuel f{10000};
  Ident n = fvar("n")->ident;

  RewriteRule escape = RewriteRule::make(
      app(app(obj_const("Plus"), numeral(0)), numeral(0)), fvar(n), "escape");
  try {
    check_rule(escape, peano_ctx(), f);
    FAIL("escaping variable admitted");
  } catch (const TypeError& e) {
    REQUIRE(e.kind == TypeErrorKind::RuleRejected);
    REQUIRE(e.reject == RuleRejectReason::FreeVarEscape);
    REQUIRE(std::string(rule_reject_name(e.reject)) == "free-var-escape");
  }

  RewriteRule mistyped = RewriteRule::make(
      app(app(obj_const("Plus"), numeral(0)), fvar(n)),
      app(app(obj_const("Cons"), fvar(n)), obj_const("Nil")), "mistyped");
  REQUIRE_THROWS_AS(check_rule(mistyped, peano_ctx(), f), TypeError);

  // A left side headed by a variable is neither algebraic nor a pattern.
  RewriteRule flex_root =
      RewriteRule::make(app(fvar("f"), numeral(0)), numeral(0), "flex");
  try {
    check_rule(flex_root, peano_ctx(), f);
    FAIL("variable-headed left side admitted");
  } catch (const TypeError& e) {
    REQUIRE(e.reject == RuleRejectReason::NotAPattern);
  }
}

TEST_CASE("pattern left sides follow the inductive definition") {
  ResolveEnv env{&testgen::diff_ctx()};
  env.free_allowed = {"f", "g"};

  REQUIRE(is_lhs_pattern(parse_term("Diff (x:R => Exp (f x))", env)));
  REQUIRE(is_lhs_pattern(parse_term("Diff (x:R => x)", env)));

  // Repeated bound arguments, constant arguments, and variables in
  // annotations all fall outside the fragment.
  REQUIRE_FALSE(is_lhs_pattern(parse_term("Diff (x:R => Exp (f x x))", env)));
  REQUIRE_FALSE(is_lhs_pattern(parse_term("Diff (f Exp)", env)));
  REQUIRE_FALSE(is_lhs_pattern(parse_term("f Exp", env)));

  // One variable must keep one arity throughout.
  REQUIRE_FALSE(
      is_lhs_pattern(parse_term("Fmult (x:R => f x) (x:R => Exp (f x x))", env)));
}

TEST_CASE("object declarations never rerun the product analysis") {
  GlobalContext g = testgen::load_context(
      "Nat : Type.\n0 : Nat.\nS : Nat -> Nat.\n");
  auto before = pc_run_counter().load();

  auto rep = process_declaration(g, "c_obj", type_const("Nat"), 100000);
  REQUIRE_FALSE(rep.pc.has_value());
  REQUIRE(pc_run_counter().load() == before);

  rep = process_declaration(g, "T_new", type_term(), 100000);
  REQUIRE(rep.pc.has_value());
  REQUIRE(pc_run_counter().load() == before + 1);

  Fuel f{10000};
  declare(g, "Plus",
          pi("x", type_const("Nat"),
             pi("y", type_const("Nat"), type_const("Nat"))),
          f);
  RewriteRule r = RewriteRule::make(
      parse_term("Plus 0 n", ResolveEnv{&g, {"n"}}),
      parse_term("n", ResolveEnv{&g, {"n"}}), "Plus#1");
  // A rule group bumps the analysis exactly once; the declaration of the
  // head symbol above did not (objects never do, Plus is one).
  auto mark = pc_run_counter().load();
  process_rule_group(g, {r}, 100000);
  REQUIRE(pc_run_counter().load() == mark + 1);
}

TEST_CASE("the product analysis grades the worked contexts") {
  PcReport peano = pc_report(peano_ctx(), 100000);
  REQUIRE(peano.verdict == PcVerdict::MuellerCriterion);
  REQUIRE(std::string(pc_verdict_name(peano.verdict)) == "mueller-criterion");
  REQUIRE(peano.flagged.empty());

  PcReport diff = pc_report(testgen::diff_ctx(), 100000);
  REQUIRE(diff.verdict == PcVerdict::PeaksJoinedModuloBeta);
  REQUIRE(diff.peak_count == 4);
  REQUIRE(diff.peaks_joined == 4);

  PcReport naive = pc_report(testgen::diff_naive_ctx(), 100000);
  REQUIRE(naive.verdict == PcVerdict::Assumed);
  REQUIRE(naive.flagged.size() == 1);
  REQUIRE(naive.flagged[0].find("arity-mismatch") != std::string::npos);

  PcReport linear = pc_report(testgen::linear_ctx(), 100000);
  REQUIRE(linear.verdict == PcVerdict::Assumed);
  REQUIRE(linear.peak_count > 0);
  REQUIRE(linear.peaks_joined < linear.peak_count);
  REQUIRE_FALSE(linear.flagged.empty());

  PcReport empty = pc_report(GlobalContext{}, 100000);
  REQUIRE(empty.verdict == PcVerdict::MuellerCriterion);
}

TEST_CASE("admission evidence survives context extension") {
  // A rule admitted early keeps its evidence when unrelated declarations
  // and rules are added afterwards.
  GlobalContext g = testgen::diff_ctx();
  auto before = g.rules()[0].evidence;

  Fuel f{10000};
  declare(g, "Extra", type_term(), f);
  declare(g, "e0", type_const("Extra"), f);

  AdmittedRule again = check_rule(g.rules()[0].rule, g, f);
  REQUIRE(again.evidence.kind == before.kind);
  REQUIRE(alpha_eq(again.evidence.common_type, before.common_type));

  PcReport rep = pc_report(g, 100000);
  REQUIRE(rep.verdict == PcVerdict::PeaksJoinedModuloBeta);
}

TEST_CASE("local contexts are checked left to right") {
  Fuel f{1000};
  Ident n = fresh_var("n");
  LocalContext good;
  good = good.extended(n, type_const("Nat"));
  check_local_context(good, peano_ctx(), f);

  LocalContext bad;
  bad = bad.extended(n, numeral(0));
  REQUIRE_THROWS_AS(check_local_context(bad, peano_ctx(), f), TypeError);
}
