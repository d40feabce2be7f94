#pragma once

// Encoding of the dependently typed level into the simply typed meta level.
// Every term maps to the single base type: constants and variables land at
// base type, application and the two binders become structural constants.
// Binders keep their annotation as a first argument, so object beta steps
// correspond exactly to steps with the (beta) rule below and never to meta
// beta steps; images are eta-long beta-normal by construction.
//
// A rewrite rule is encodable when each of its variables is applied to the
// same number of arguments everywhere on both sides; the variable then
// becomes a metavariable of that arity, applied directly rather than
// through App_.  The left-hand side must in addition encode to a Miller
// pattern for matching to be decidable.

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "lpm/context.hpp"
#include "lpm/meta_hrs.hpp"
#include "lpm/term.hpp"

namespace lpm {

namespace enc {

using meta::PretermPtr;
using meta::STypePtr;

inline STypePtr st_term() { return meta::st_base(); }

inline const PretermPtr& con_type_sort() {
  static const PretermPtr c =
      meta::mcon("Type_", meta::ConKind::Structural, meta::st_base());
  return c;
}

inline const PretermPtr& con_kind_sort() {
  static const PretermPtr c =
      meta::mcon("Kind_", meta::ConKind::Structural, meta::st_base());
  return c;
}

inline const PretermPtr& con_app() {
  static const PretermPtr c = meta::mcon(
      "App_", meta::ConKind::Structural,
      meta::st_arrow(meta::st_base(),
                     meta::st_arrow(meta::st_base(), meta::st_base())));
  return c;
}

inline STypePtr binder_sty() {
  return meta::st_arrow(
      meta::st_base(),
      meta::st_arrow(meta::st_arrow(meta::st_base(), meta::st_base()),
                     meta::st_base()));
}

inline const PretermPtr& con_lam() {
  static const PretermPtr c =
      meta::mcon("Lam_", meta::ConKind::Structural, binder_sty());
  return c;
}

inline const PretermPtr& con_pi() {
  static const PretermPtr c =
      meta::mcon("Pi_", meta::ConKind::Structural, binder_sty());
  return c;
}

inline meta::ConKind con_kind_of(IdentKind k) {
  return k == IdentKind::TypeConst ? meta::ConKind::TypeConst
                                   : meta::ConKind::ObjectConst;
}

}  // namespace enc

// --------------------------------------------------------------------------
// Structural embedding of closed-by-context terms; free variables embed as
// free variables.  Bound indices line up because each binder introduces
// exactly one meta binder.

inline meta::PretermPtr embed(const TermPtr& t) {
  using namespace meta;
  switch (t->kind) {
    case TermKind::BVar:
      return mbvar(t->index, st_base());
    case TermKind::FVar:
      return mfvar(t->ident, st_base());
    case TermKind::Const:
      return mcon(t->ident.name, enc::con_kind_of(t->ident.kind), st_base());
    case TermKind::Type:
      return enc::con_type_sort();
    case TermKind::Kind:
      return enc::con_kind_sort();
    case TermKind::App:
      return mapp(mapp(enc::con_app(), embed(t->a)), embed(t->b));
    case TermKind::Lam:
      return mapp(mapp(enc::con_lam(), embed(t->a)),
                  mlam(t->hint, st_base(), embed(t->b)));
    case TermKind::Pi:
      return mapp(mapp(enc::con_pi(), embed(t->a)),
                  mlam(t->hint, st_base(), embed(t->b)));
  }
  throw IllFormedTerm("embed: bad node");
}

// Inverse of embed on its image; throws on anything else.
inline TermPtr unembed(const meta::PretermPtr& t) {
  using namespace meta;
  auto [h, args] = mspine(t);
  switch (h->kind) {
    case PKind::Con: {
      if (h->con_kind == ConKind::Structural) {
        if (h->name == "Type_" && args.empty()) return type_term();
        if (h->name == "Kind_" && args.empty()) return kind_term();
        if (h->name == "App_" && args.size() == 2)
          return app(unembed(args[0]), unembed(args[1]));
        if ((h->name == "Lam_" || h->name == "Pi_") && args.size() == 2) {
          if (args[1]->kind != PKind::Lam)
            throw IllFormedTerm("unembed: binder body is not an abstraction");
          auto annot = unembed(args[0]);
          auto body = unembed(args[1]->b);
          std::string hint = args[1]->hint.empty() ? "x" : args[1]->hint;
          return h->name == "Lam_" ? lam(hint, annot, body)
                                   : pi(hint, annot, body);
        }
        throw IllFormedTerm("unembed: bad structural constant use");
      }
      if (!args.empty())
        throw IllFormedTerm("unembed: applied constant outside App_");
      return constant(Ident{h->name, h->con_kind == ConKind::TypeConst
                                         ? IdentKind::TypeConst
                                         : IdentKind::ObjectConst});
    }
    case PKind::FVar:
      if (!args.empty()) throw IllFormedTerm("unembed: applied variable");
      return fvar(h->ident);
    case PKind::BVar:
      if (!args.empty()) throw IllFormedTerm("unembed: applied variable");
      return bvar(h->index);
    default:
      throw IllFormedTerm("unembed: not the image of a term");
  }
}

// --------------------------------------------------------------------------
// Rule encoding.

// Arity of every free variable occurrence, or nothing if some variable is
// applied inconsistently across the two sides.
inline std::optional<std::map<Ident, int>> uniform_arities(
    const RewriteRule& r) {
  std::map<Ident, int> arity;
  bool ok = true;
  auto walk = [&](auto&& self, const TermPtr& t) -> void {
    if (!ok) return;
    auto [h, args] = spine(t);
    if (h->kind == TermKind::FVar) {
      auto [it, inserted] = arity.emplace(h->ident, (int)args.size());
      if (!inserted && it->second != (int)args.size()) {
        ok = false;
        return;
      }
    }
    for (auto& a : args) self(self, a);
    switch (h->kind) {
      case TermKind::Lam:
      case TermKind::Pi:
        self(self, h->a);
        self(self, h->b);
        break;
      default:
        break;
    }
  };
  walk(walk, r.lhs);
  walk(walk, r.rhs);
  if (!ok) return std::nullopt;
  return arity;
}

namespace detail {

inline meta::PretermPtr embed_rule_side(const TermPtr& t,
                                        const std::map<Ident, int>& arity) {
  using namespace meta;
  auto [h, args] = spine(t);
  if (h->kind == TermKind::FVar && arity.count(h->ident)) {
    STypePtr ty = st_base();
    for (size_t i = 0; i < args.size(); ++i)
      ty = st_arrow(st_base(), ty);
    PretermPtr out = mvar(h->ident.name, ty);
    for (auto& a : args) out = mapp(out, embed_rule_side(a, arity));
    return out;
  }
  switch (t->kind) {
    case TermKind::App:
      return mapp(mapp(enc::con_app(), embed_rule_side(t->a, arity)),
                  embed_rule_side(t->b, arity));
    case TermKind::Lam:
      return mapp(mapp(enc::con_lam(), embed_rule_side(t->a, arity)),
                  mlam(t->hint, st_base(), embed_rule_side(t->b, arity)));
    case TermKind::Pi:
      return mapp(mapp(enc::con_pi(), embed_rule_side(t->a, arity)),
                  mlam(t->hint, st_base(), embed_rule_side(t->b, arity)));
    default:
      return embed(t);
  }
}

}  // namespace detail

struct RuleEncoding {
  std::optional<meta::MetaRule> rule;
  RuleRejectReason reject = RuleRejectReason::None;
};

inline RuleEncoding encode_rule(const RewriteRule& r) {
  auto lhs_vars = free_vars(r.lhs);
  for (auto& x : free_vars(r.rhs))
    if (!lhs_vars.count(x)) return {std::nullopt, RuleRejectReason::FreeVarEscape};
  auto arity = uniform_arities(r);
  if (!arity) return {std::nullopt, RuleRejectReason::ArityMismatch};
  auto lhs = meta::nf(detail::embed_rule_side(r.lhs, *arity));
  auto rhs = meta::nf(detail::embed_rule_side(r.rhs, *arity));
  if (!meta::is_pattern(lhs)) return {std::nullopt, RuleRejectReason::NotAPattern};
  return {meta::MetaRule{r.name, lhs, rhs}, RuleRejectReason::None};
}

// The beta step as a rewrite rule over the encoding:
//   App_(Lam_(X, \x. Y x), Z) --> Y Z
inline meta::MetaRule beta_rule() {
  using namespace meta;
  PretermPtr X = mvar("X", st_base());
  PretermPtr Y = mvar("Y", st_arrow(st_base(), st_base()));
  PretermPtr Z = mvar("Z", st_base());
  PretermPtr body = mlam("x", st_base(), mapp(Y, mbvar(0, st_base())));
  PretermPtr lhs =
      mapp(mapp(enc::con_app(), mapp(mapp(enc::con_lam(), X), body)), Z);
  PretermPtr rhs = mapp(Y, Z);
  return {"beta", meta::nf(lhs), meta::nf(rhs)};
}

struct EncodedSystem {
  std::vector<meta::MetaRule> rules;  // (beta) first when requested
  std::vector<std::pair<std::string, RuleRejectReason>> unencodable;

  bool complete() const { return unencodable.empty(); }
};

inline EncodedSystem hrs_of_context(const GlobalContext& ctx, bool with_beta) {
  EncodedSystem out;
  if (with_beta) out.rules.push_back(beta_rule());
  for (auto& ar : ctx.rules()) {
    auto e = encode_rule(ar.rule);
    if (e.rule)
      out.rules.push_back(*e.rule);
    else
      out.unencodable.emplace_back(ar.rule.name, e.reject);
  }
  return out;
}

inline std::string dump_hrs(const EncodedSystem& sys) {
  std::string s;
  for (auto& r : sys.rules)
    s += r.name + ": " + meta::print_meta(r.lhs) + " --> " +
         meta::print_meta(r.rhs) + "\n";
  for (auto& [name, why] : sys.unencodable)
    s += name + ": not encodable (" + rule_reject_name(why) + ")\n";
  return s;
}

}  // namespace lpm
