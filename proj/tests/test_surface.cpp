#include <catch2/catch_amalgamated.hpp>

#include "testgen.hpp"

using namespace lpm;
using testgen::numeral;

static TermPtr parse_in_peano(const std::string& src) {
  ResolveEnv env{&testgen::peano_ctx()};
  return parse_term(src, env);
}

TEST_CASE("statements parse into declarations, rules and commands") {
  SourceFile sf = parse_file(
      "Nat : Type.\n"
      "0 : Nat.\n"
      "S : Nat -> Nat.\n"
      "Plus : Nat -> Nat -> Nat.\n"
      "[n] Plus 0 n --> n.\n"
      "#REDUCE Plus 0 0.\n"
      "#TYPE S.\n"
      "#CHECK 0 : Nat.\n");
  REQUIRE(sf.statements.size() == 8);
  REQUIRE(std::holds_alternative<DeclStmt>(sf.statements[0]));
  REQUIRE(std::holds_alternative<RuleStmt>(sf.statements[4]));
  auto& rule = std::get<RuleStmt>(sf.statements[4]);
  REQUIRE(rule.vars == std::vector<std::string>{"n"});
  REQUIRE(std::get<CommandStmt>(sf.statements[5]).cmd == CmdKind::Reduce);
  REQUIRE(std::get<CommandStmt>(sf.statements[6]).cmd == CmdKind::TypeOf);
  REQUIRE(std::get<CommandStmt>(sf.statements[7]).cmd == CmdKind::Check);
}

TEST_CASE("rule variable lists may be empty") {
  SourceFile sf = parse_file(
      "Nat : Type.\n0 : Nat.\nc : Nat.\n[] c --> 0.\n");
  auto& rule = std::get<RuleStmt>(sf.statements[3]);
  REQUIRE(rule.vars.empty());
}

TEST_CASE("parse errors carry over to the caller") {
  REQUIRE_THROWS(parse_file("Nat : Type"));        // missing period
  REQUIRE_THROWS(parse_file("[n Plus 0 n --> n.")); // unclosed var list
  REQUIRE_THROWS(parse_file(": Nat."));
  REQUIRE_THROWS(parse_in_peano("NoSuchName"));
  REQUIRE_THROWS(parse_in_peano("Plus 0 ("));
}

TEST_CASE("numerals abbreviate successor towers") {
  REQUIRE(alpha_eq(parse_in_peano("3"), numeral(3)));
  REQUIRE(alpha_eq(parse_in_peano("0"), numeral(0)));
  REQUIRE(print_term(numeral(4)) == "4");
  REQUIRE(print_term(app(obj_const("S"), fvar("n"))) == "S n");
}

TEST_CASE("binders and arrows round-trip through the printer") {
  const char* sources[] = {
      "x:Nat => Plus x 1",
      "x:Nat => y:Nat => Plus x y",
      "Map (x:Nat => S x) (Cons 1 Nil)",
      "Plus (Plus 1 2) (S 0)",
  };
  for (const char* src : sources) {
    TermPtr t = parse_in_peano(src);
    TermPtr back = parse_in_peano(print_term(t));
    INFO(src << "  printed as  " << print_term(t));
    REQUIRE(alpha_eq(t, back));
  }

  TermPtr arrow = pi("x", type_const("Nat"), type_const("Nat"));
  REQUIRE(print_term(arrow).find("->") != std::string::npos);
}

TEST_CASE("resolution distinguishes bound, rule and unknown names") {
  ResolveEnv env{&testgen::peano_ctx()};
  env.free_allowed = {"n"};
  TermPtr t = parse_term("Plus n 1", env);
  REQUIRE(free_vars(t).count(Ident{"n", IdentKind::Variable}) == 1);

  ResolveEnv strict{&testgen::peano_ctx()};
  REQUIRE_THROWS(parse_term("Plus n 1", strict));
}

TEST_CASE("printing well-typed random terms round-trips") {
  testgen::Rng rng(20260814);
  ResolveEnv env{&testgen::peano_ctx()};
  for (int i = 0; i < 300; ++i) {
    testgen::PeanoGen gen{rng};
    TermPtr t = gen.any(4);
    std::string s = print_term(t);
    INFO(s);
    TermPtr back = parse_term(s, env);
    REQUIRE(alpha_eq(t, back));
  }
}

TEST_CASE("the corpus sources parse and re-parse from their print form") {
  for (auto* src : {&testgen::peano_src(), &testgen::diff_src(),
                    &testgen::linear_src()}) {
    SourceFile sf = parse_file(*src);
    REQUIRE_FALSE(sf.statements.empty());
  }
}
