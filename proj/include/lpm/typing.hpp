#pragma once

// Type checking with conversion modulo beta and the admitted rules, rule
// admission, and the product compatibility report for a finished context.
//
// A rule is admitted when both sides share one type under a local context
// for its variables: either with an algebraic left-hand side, or with a
// left-hand side that is a pattern (every variable applied to distinct
// binder-bound variables).  The variable types are not written in source;
// a collection pass reads them off the positions the variables occupy.
//
// Declarations never consult product compatibility; the report is computed
// once per finished context (or on demand), and a counter witnesses that
// declaring an object does not run it.

#include <atomic>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "lpm/context.hpp"
#include "lpm/encoding.hpp"
#include "lpm/meta_hrs.hpp"
#include "lpm/reduction.hpp"
#include "lpm/term.hpp"

namespace lpm {

// --------------------------------------------------------------------------
// Bidirectional checking.

inline TermPtr infer(const TermPtr& t, const GlobalContext& g,
                     const LocalContext& local, Fuel& fuel);

inline void check_is_type(const TermPtr& a, const GlobalContext& g,
                          const LocalContext& local, Fuel& fuel) {
  TermPtr s = infer(a, g, local, fuel);
  if (!convertible(s, type_term(), g, fuel))
    throw TypeError(TypeErrorKind::SortError,
                    "annotation " + print_term(a) + " is not a type");
}

inline TermPtr infer(const TermPtr& t, const GlobalContext& g,
                     const LocalContext& local, Fuel& fuel) {
  switch (t->kind) {
    case TermKind::Type:
      return kind_term();
    case TermKind::Kind:
      throw TypeError(TypeErrorKind::SortError, "Kind has no type");
    case TermKind::BVar:
      throw TypeError(TypeErrorKind::SortError, "dangling bound variable");
    case TermKind::FVar: {
      if (auto* ty = local.find(t->ident)) return *ty;
      throw TypeError(TypeErrorKind::Unbound,
                      "unbound variable " + t->ident.name);
    }
    case TermKind::Const: {
      if (auto* ty = g.lookup_const(t->ident)) return *ty;
      throw TypeError(TypeErrorKind::Unbound,
                      "undeclared constant " + t->ident.name);
    }
    case TermKind::App: {
      TermPtr ft = whnf(infer(t->a, g, local, fuel), g, fuel);
      if (ft->kind != TermKind::Pi)
        throw TypeError(TypeErrorKind::NotAProduct,
                        print_term(t->a) + " : " + print_term(ft) +
                            " is applied but has no product type");
      TermPtr at = infer(t->b, g, local, fuel);
      if (!convertible(at, ft->a, g, fuel))
        throw TypeError(TypeErrorKind::NotConvertible,
                        "argument " + print_term(t->b) + " : " +
                            print_term(at) + " does not fit " +
                            print_term(ft->a));
      return open_binder(ft->b, t->b);
    }
    case TermKind::Lam: {
      check_is_type(t->a, g, local, fuel);
      Ident v = fresh_var(t->hint.empty() ? "x" : t->hint);
      TermPtr bt =
          infer(open_binder(t->b, fvar(v)), g, local.extended(v, t->a), fuel);
      return pi_closing(t->hint, t->a, bt, v);
    }
    case TermKind::Pi: {
      check_is_type(t->a, g, local, fuel);
      Ident v = fresh_var(t->hint.empty() ? "x" : t->hint);
      TermPtr bs =
          infer(open_binder(t->b, fvar(v)), g, local.extended(v, t->a), fuel);
      if (bs->kind == TermKind::Type || bs->kind == TermKind::Kind) return bs;
      throw TypeError(TypeErrorKind::SortError,
                      "product body sorts to " + print_term(bs));
    }
  }
  throw TypeError(TypeErrorKind::SortError, "unclassified term");
}

inline void check(const TermPtr& t, const TermPtr& expected,
                  const GlobalContext& g, const LocalContext& local,
                  Fuel& fuel) {
  TermPtr ty = infer(t, g, local, fuel);
  if (!convertible(ty, expected, g, fuel))
    throw TypeError(TypeErrorKind::NotConvertible,
                    print_term(t) + " has type " + print_term(ty) +
                        ", not convertible with " + print_term(expected));
}

// Each binding's type must be well-sorted under the previous bindings.
inline void check_local_context(const LocalContext& delta,
                                const GlobalContext& g, Fuel& fuel) {
  LocalContext prefix;
  for (auto& [x, ty] : delta.items) {
    TermPtr s = infer(ty, g, prefix, fuel);
    if (!convertible(s, type_term(), g, fuel) && s->kind != TermKind::Kind)
      throw TypeError(TypeErrorKind::SortError,
                      "rule variable " + x.name + " : " + print_term(ty) +
                          " is not typed by a type or kind");
    prefix = prefix.extended(x, ty);
  }
}

// --------------------------------------------------------------------------
// Declarations.  The object/type split follows the sort of the declared
// type; neither runs any product compatibility analysis.

// Returns true when the declaration introduced a type-level constant.
inline bool declare(GlobalContext& g, const std::string& name,
                    const TermPtr& type, Fuel& fuel) {
  if (g.declares(name))
    throw TypeError(TypeErrorKind::Duplicate, name + " is already declared");
  TermPtr sort = infer(type, g, LocalContext{}, fuel);
  if (sort->kind == TermKind::Kind) {
    g.push_type_unchecked(Ident{name, IdentKind::TypeConst}, type);
    return true;
  }
  if (convertible(sort, type_term(), g, fuel)) {
    g.push_object_unchecked(Ident{name, IdentKind::ObjectConst}, type);
    return false;
  }
  throw TypeError(TypeErrorKind::SortError,
                  name + " : " + print_term(type) + " sorts to " +
                      print_term(sort) + ", expected a type or kind");
}

// --------------------------------------------------------------------------
// Rule admission.

// Left-hand sides that are patterns at this level.  Pattern positions hold
// constant- or bound-variable-headed spines; rule variables appear only in
// argument position, applied to distinct bound variables at one fixed arity
// per variable; abstractions appear only in argument position and their
// annotations mention no rule variables.
inline bool is_lhs_pattern(const TermPtr& lhs) {
  std::map<Ident, std::size_t> arity;
  auto pat = [&](auto&& self, auto&& arg, const TermPtr& t,
                 const std::set<Ident>& bound) -> bool {
    auto [h, args] = spine(t);
    if (h->kind != TermKind::Const &&
        !(h->kind == TermKind::FVar && bound.count(h->ident)))
      return false;
    for (auto& a : args)
      if (!arg(self, arg, a, bound)) return false;
    return true;
  };
  auto arg = [&](auto&& pat_, auto&& self, const TermPtr& t,
                 const std::set<Ident>& bound) -> bool {
    auto [h, args] = spine(t);
    if (h->kind == TermKind::FVar && !bound.count(h->ident)) {
      std::set<Ident> seen;
      for (auto& a : args) {
        if (a->kind != TermKind::FVar || !bound.count(a->ident)) return false;
        if (!seen.insert(a->ident).second) return false;
      }
      auto [it, fresh] = arity.emplace(h->ident, args.size());
      return fresh || it->second == args.size();
    }
    if (t->kind == TermKind::Lam) {
      for (auto& v : free_vars(t->a))
        if (!bound.count(v)) return false;
      Ident v = fresh_var(t->hint.empty() ? "x" : t->hint);
      auto inner = bound;
      inner.insert(v);
      return pat_(pat_, self, open_binder(t->b, fvar(v)), inner);
    }
    return pat_(pat_, self, t, bound);
  };
  return pat(pat, arg, lhs, {});
}

namespace detail {

// Reads variable types off the positions they occupy in the lhs.  Constant
// heads drive expectations into their arguments; an applied variable over
// binder-bound arguments gets the matching product type.  Returns the type
// when one is derivable here, null when this node cannot tell.
inline TermPtr collect_var_types(const TermPtr& t, const TermPtr& expected,
                                 LocalContext& delta, const LocalContext& bound,
                                 const GlobalContext& g, Fuel& fuel) {
  auto [h, args] = spine(t);
  if (h->kind == TermKind::FVar && !bound.contains(h->ident)) {
    if (args.empty()) {
      if (auto* ty = delta.find(h->ident)) return *ty;
      if (expected) {
        delta = delta.extended(h->ident, expected);
        return expected;
      }
      return nullptr;
    }
    if (auto* ty = delta.find(h->ident)) {
      TermPtr cur = *ty;
      for (auto& a : args) {
        cur = whnf(cur, g, fuel);
        if (cur->kind != TermKind::Pi) return nullptr;
        cur = open_binder(cur->b, a);
      }
      return cur;
    }
    if (!expected) return nullptr;
    // f x1 .. xk : expected   gives   f : (x1:A1) -> .. -> (xk:Ak) -> expected
    TermPtr ty = expected;
    for (auto it = args.rbegin(); it != args.rend(); ++it) {
      if ((*it)->kind != TermKind::FVar) return nullptr;
      auto* at = bound.find((*it)->ident);
      if (!at) return nullptr;
      ty = pi_closing((*it)->ident.name, *at, ty, (*it)->ident);
    }
    delta = delta.extended(h->ident, ty);
    return expected;
  }
  switch (t->kind) {
    case TermKind::App: {
      if (h->kind == TermKind::Const) {
        auto* cty = g.lookup_const(h->ident);
        if (!cty) return nullptr;
        TermPtr cur = *cty;
        for (auto& a : args) {
          cur = whnf(cur, g, fuel);
          if (cur->kind != TermKind::Pi) return nullptr;
          collect_var_types(a, cur->a, delta, bound, g, fuel);
          cur = open_binder(cur->b, a);
        }
        return cur;
      }
      collect_var_types(t->a, nullptr, delta, bound, g, fuel);
      collect_var_types(t->b, nullptr, delta, bound, g, fuel);
      return nullptr;
    }
    case TermKind::Lam:
    case TermKind::Pi: {
      collect_var_types(t->a, t->kind == TermKind::Pi ? type_term() : nullptr,
                        delta, bound, g, fuel);
      Ident v = fresh_var(t->hint.empty() ? "x" : t->hint);
      TermPtr body_expected;
      if (expected && t->kind == TermKind::Lam) {
        TermPtr ex = whnf(expected, g, fuel);
        if (ex->kind == TermKind::Pi)
          body_expected = open_binder(ex->b, fvar(v));
      }
      collect_var_types(open_binder(t->b, fvar(v)), body_expected, delta,
                        bound.extended(v, t->a), g, fuel);
      return nullptr;
    }
    case TermKind::Const: {
      auto* cty = g.lookup_const(t->ident);
      return cty ? *cty : nullptr;
    }
    case TermKind::Type:
      return kind_term();
    default:
      return nullptr;
  }
}

}  // namespace detail

inline AdmittedRule check_rule(const RewriteRule& r, const GlobalContext& g,
                               Fuel& fuel) {
  auto lhs_vars = free_vars(r.lhs);
  for (auto& x : free_vars(r.rhs))
    if (!lhs_vars.count(x))
      throw TypeError(RuleRejectReason::FreeVarEscape,
                      "rule " + r.name + ": " + x.name +
                          " appears on the right only");

  EvidenceKind kind;
  if (is_left_algebraic(r))
    kind = EvidenceKind::AlgebraicLhs;
  else if (is_lhs_pattern(r.lhs))
    kind = EvidenceKind::PatternLhs;
  else
    throw TypeError(RuleRejectReason::NotAPattern,
                    "rule " + r.name +
                        ": left-hand side is neither algebraic nor a pattern");

  LocalContext delta;
  LocalContext bound;
  detail::collect_var_types(r.lhs, nullptr, delta, bound, g, fuel);
  for (auto& x : lhs_vars)
    if (!delta.contains(x))
      throw TypeError(RuleRejectReason::Underdetermined,
                      "rule " + r.name + ": no type found for " + x.name);
  // Keep first-occurrence order for reporting.
  LocalContext ordered;
  for (auto& x : free_vars_ordered(r.lhs)) ordered = ordered.extended(x, *delta.find(x));
  check_local_context(ordered, g, fuel);

  TermPtr tl = infer(r.lhs, g, ordered, fuel);
  TermPtr tr = infer(r.rhs, g, ordered, fuel);
  if (!convertible(tl, tr, g, fuel))
    throw TypeError(RuleRejectReason::NoCommonType,
                    "rule " + r.name + ": sides type as " + print_term(tl) +
                        " and " + print_term(tr));

  return AdmittedRule{r, AdmissionEvidence{kind, ordered, tl}};
}

// --------------------------------------------------------------------------
// Product compatibility.

enum class PcVerdict { MuellerCriterion, PeaksJoinedModuloBeta, Assumed };

inline const char* pc_verdict_name(PcVerdict v) {
  switch (v) {
    case PcVerdict::MuellerCriterion: return "mueller-criterion";
    case PcVerdict::PeaksJoinedModuloBeta: return "peaks-joined-modulo-beta";
    case PcVerdict::Assumed: return "assumed";
  }
  return "?";
}

struct PcReport {
  PcVerdict verdict = PcVerdict::Assumed;
  std::string detail;
  std::vector<std::string> flagged;  // rules outside the analyzed fragment
  size_t peak_count = 0;
  size_t peaks_joined = 0;
};

// Counts report runs; declarations must never bump it.
inline std::atomic<std::uint64_t>& pc_run_counter() {
  static std::atomic<std::uint64_t> c{0};
  return c;
}

namespace detail {

inline TermPtr fo_resolve(TermPtr t, const ObjSubstitution& s) {
  while (t->kind == TermKind::FVar) {
    auto* v = s.find(t->ident);
    if (!v) return t;
    t = *v;
  }
  return t;
}

inline bool fo_occurs(const Ident& x, const TermPtr& t,
                      const ObjSubstitution& s) {
  TermPtr r = fo_resolve(t, s);
  switch (r->kind) {
    case TermKind::FVar:
      return r->ident == x;
    case TermKind::App:
      return fo_occurs(x, r->a, s) || fo_occurs(x, r->b, s);
    default:
      return false;
  }
}

// First-order unification over algebraic terms.
inline bool fo_unify(const TermPtr& a0, const TermPtr& b0, ObjSubstitution& s) {
  TermPtr a = fo_resolve(a0, s);
  TermPtr b = fo_resolve(b0, s);
  if (a->kind == TermKind::FVar && b->kind == TermKind::FVar &&
      a->ident == b->ident)
    return true;
  if (a->kind == TermKind::FVar) {
    if (fo_occurs(a->ident, b, s)) return false;
    s.set(a->ident, b);
    return true;
  }
  if (b->kind == TermKind::FVar) return fo_unify(b, a, s);
  if (a->kind != b->kind) return false;
  switch (a->kind) {
    case TermKind::Const:
      return a->ident == b->ident;
    case TermKind::App:
      return fo_unify(a->a, b->a, s) && fo_unify(a->b, b->b, s);
    default:
      return false;  // binders are not algebraic
  }
}

inline TermPtr rename_apart(const TermPtr& t, const std::string& suffix) {
  ObjSubstitution ren;
  for (auto& x : free_vars(t))
    ren.set(x, fvar(Ident{x.name + suffix, IdentKind::Variable}));
  return apply_subst(t, ren);
}

// Any unifiable overlap of one algebraic lhs at a constant-headed position
// of another (excluding a rule at its own root).
inline bool fo_overlap_exists(const std::vector<AdmittedRule>& rules) {
  for (size_t i = 0; i < rules.size(); ++i)
    for (size_t j = 0; j < rules.size(); ++j) {
      TermPtr lj = rename_apart(rules[j].rule.lhs, "'");
      auto scan = [&](auto&& self, const TermPtr& t, bool root) -> bool {
        auto [h, args] = spine(t);
        if (h->kind != TermKind::Const) return false;  // variable position
        if (!(root && i == j)) {
          ObjSubstitution s;
          if (fo_unify(t, lj, s)) return true;
        }
        for (auto& a : args)
          if (self(self, a, false)) return true;
        return false;
      };
      if (scan(scan, rules[i].rule.lhs, true)) return true;
    }
  return false;
}

}  // namespace detail

inline PcReport pc_report(const GlobalContext& g, std::uint64_t fuel) {
  pc_run_counter().fetch_add(1);
  PcReport out;
  auto& rules = g.rules();
  if (rules.empty()) {
    out.verdict = PcVerdict::MuellerCriterion;
    out.detail = "no rewrite rules";
    return out;
  }

  bool linear_algebraic = true;
  for (auto& ar : rules)
    if (!is_left_linear(ar.rule) || !is_left_algebraic(ar.rule)) {
      linear_algebraic = false;
      out.flagged.push_back(ar.rule.name);
    }
  if (linear_algebraic && !detail::fo_overlap_exists(rules)) {
    out.verdict = PcVerdict::MuellerCriterion;
    out.detail = "all rules left-linear and algebraic, no critical overlaps";
    out.flagged.clear();
    return out;
  }
  out.flagged.clear();

  EncodedSystem sys = hrs_of_context(g, true);
  if (sys.complete()) {
    auto peaks = meta::critical_peaks(sys.rules);
    out.peak_count = peaks.size();
    size_t joined = 0;
    bool all = true;
    for (auto& pk : peaks) {
      Fuel pf{fuel};
      if (meta::joinable(pk.left, pk.right, sys.rules, pf)) {
        ++joined;
        continue;
      }
      all = false;
      out.flagged.push_back(pk.outer_rule + "/" + pk.inner_rule + " at " +
                            path_to_string(pk.pos));
    }
    out.peaks_joined = joined;
    if (all) {
      out.verdict = PcVerdict::PeaksJoinedModuloBeta;
      out.detail = std::to_string(peaks.size()) +
                   " critical peaks joined modulo beta";
      out.flagged.clear();
      return out;
    }
    out.verdict = PcVerdict::Assumed;
    out.detail = "unjoined critical peaks";
    return out;
  }

  out.verdict = PcVerdict::Assumed;
  out.detail = "rules outside the encodable fragment";
  for (auto& [name, why] : sys.unencodable)
    out.flagged.push_back(name + " (" + std::string(rule_reject_name(why)) + ")");
  return out;
}

// --------------------------------------------------------------------------
// Context construction.  Object declarations deliberately skip the
// product-compatibility diagnostic; type declarations and rule groups
// refresh it over the extended context.

struct EntryReport {
  std::string name;
  std::vector<std::string> evidence;  // admission evidence, one per rule
  std::optional<PcReport> pc;
};

inline EntryReport process_declaration(GlobalContext& g,
                                       const std::string& name,
                                       const TermPtr& type,
                                       std::uint64_t fuel) {
  Fuel f{fuel};
  bool is_type = declare(g, name, type, f);
  EntryReport out;
  out.name = name;
  if (is_type) out.pc = pc_report(g, fuel);
  return out;
}

// Rules of one group are admitted against the frozen prefix, independently
// of each other; the diagnostic then covers the whole extended context.
inline EntryReport process_rule_group(GlobalContext& g,
                                      const std::vector<RewriteRule>& rules,
                                      std::uint64_t fuel) {
  EntryReport out;
  std::vector<AdmittedRule> admitted;
  for (auto& r : rules) {
    Fuel f{fuel};
    admitted.push_back(check_rule(r, g, f));
    out.evidence.push_back(evidence_name(admitted.back().evidence.kind));
    if (!out.name.empty()) out.name += ", ";
    out.name += r.name;
  }
  g.push_rules_unchecked(std::move(admitted));
  out.pc = pc_report(g, fuel);
  return out;
}

}  // namespace lpm
