#pragma once

// Untyped reduction: beta steps, first-order rule matching modulo alpha,
// single-step relations, deterministic normalization and conversion.
//
// Traversals open binders with fresh variables and close them again when
// rebuilding, so matching never sees a dangling bound index.  A rule
// variable may be instantiated with a term containing variables bound by
// the surrounding context (the context closure re-captures them); it may
// not capture a binder that sits inside the rule's own left-hand side.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "lpm/context.hpp"
#include "lpm/surface.hpp"
#include "lpm/term.hpp"

namespace lpm {

struct StepTrace {
  std::string rule;           // "beta" or a rule name
  Path path;                  // position of the redex
  std::vector<Ident> opened;  // binder openings along the path, outermost first
  ObjSubstitution subst;      // matched instantiation (display; replay re-matches)

  std::string to_string() const {
    std::string s = "at " + path_to_string(path) + " by " + rule;
    if (!subst.items.empty()) {
      s += " {";
      bool first = true;
      for (auto& [x, v] : subst.items) {
        if (!first) s += ", ";
        first = false;
        s += x.name + " := " + print_term(v);
      }
      s += "}";
    }
    return s;
  }
};

struct Step {
  TermPtr result;
  StepTrace trace;
};

inline bool is_left_linear(const RewriteRule& r) {
  std::vector<Ident> seen;
  bool linear = true;
  auto visit = [&](auto&& self, const TermPtr& t) -> void {
    switch (t->kind) {
      case TermKind::FVar:
        for (auto& x : seen)
          if (x == t->ident) {
            linear = false;
            return;
          }
        seen.push_back(t->ident);
        return;
      case TermKind::App:
      case TermKind::Lam:
      case TermKind::Pi:
        self(self, t->a);
        self(self, t->b);
        return;
      default:
        return;
    }
  };
  visit(visit, r.lhs);
  return linear;
}

inline bool is_left_algebraic(const RewriteRule& r) { return is_algebraic(r.lhs); }

// ---------------------------------------------------------------------------
// First-order matching of a rule side against a subject, modulo alpha under
// binders.  `protected_vars` are the variables opened for the lhs's own
// binders during this match: an image containing one of them would require
// capture by the rule side itself, which substitution cannot express.

namespace detail {

inline bool match_rec(const TermPtr& p, const TermPtr& s, ObjSubstitution& out,
                      std::set<Ident>& protected_vars,
                      const std::set<Ident>& lhs_vars) {
  if (p->kind == TermKind::FVar && lhs_vars.count(p->ident)) {
    for (auto& x : protected_vars)
      if (occurs_free(x, s)) return false;
    if (auto* prev = out.find(p->ident)) return alpha_eq(*prev, s);
    out.set(p->ident, s);
    return true;
  }
  if (p->kind != s->kind) return false;
  switch (p->kind) {
    case TermKind::FVar:
    case TermKind::Const:
      return p->ident == s->ident;
    case TermKind::BVar:
      return p->index == s->index;  // binders are opened, so unreachable
    case TermKind::Type:
    case TermKind::Kind:
      return true;
    case TermKind::App:
      return match_rec(p->a, s->a, out, protected_vars, lhs_vars) &&
             match_rec(p->b, s->b, out, protected_vars, lhs_vars);
    case TermKind::Lam:
    case TermKind::Pi: {
      if (!match_rec(p->a, s->a, out, protected_vars, lhs_vars)) return false;
      Ident v = fresh_var(s->hint);
      protected_vars.insert(v);
      TermPtr w = fvar(v);
      bool ok = match_rec(open_binder(p->b, w), open_binder(s->b, w), out,
                          protected_vars, lhs_vars);
      protected_vars.erase(v);
      return ok;
    }
  }
  return false;
}

}  // namespace detail

inline std::optional<ObjSubstitution> syntactic_match(const TermPtr& lhs,
                                                      const TermPtr& subject) {
  ObjSubstitution out;
  std::set<Ident> prot;
  auto lhs_vars = free_vars(lhs);
  if (detail::match_rec(lhs, subject, out, prot, lhs_vars)) return out;
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Single-step relations.  Results are deduplicated per (rule, position)
// by alpha-equality of targets.

namespace detail {

struct StepCollector {
  const GlobalContext* ctx = nullptr;
  bool with_beta = false;
  bool with_rules = false;
  std::vector<Step> out;
  Path path;
  std::vector<Ident> opened;

  void at_node(const TermPtr& t) {
    if (with_beta && t->kind == TermKind::App && t->a->kind == TermKind::Lam) {
      StepTrace tr;
      tr.rule = "beta";
      tr.path = path;
      tr.opened = opened;
      tr.subst.set(Ident{t->a->hint.empty() ? "x" : t->a->hint,
                         IdentKind::Variable},
                   t->b);
      out.push_back({open_binder(t->a->b, t->b), tr});
    }
    if (with_rules && ctx) {
      for (auto& ar : ctx->rules()) {
        if (auto sub = syntactic_match(ar.rule.lhs, t)) {
          StepTrace tr;
          tr.rule = ar.rule.name;
          tr.path = path;
          tr.opened = opened;
          tr.subst = *sub;
          out.push_back({apply_subst(ar.rule.rhs, *sub), tr});
        }
      }
    }
  }

  // Collects replacements for the current subterm; the caller wraps them
  // back into the surrounding context.
  std::vector<Step> collect(const TermPtr& t) {
    std::vector<Step> here;
    size_t mark = out.size();
    at_node(t);
    here.assign(out.begin() + mark, out.end());
    out.resize(mark);

    auto wrap = [&](std::vector<Step>&& inner, auto rebuild) {
      for (auto& s : inner) {
        s.result = rebuild(s.result);
        here.push_back(std::move(s));
      }
    };
    switch (t->kind) {
      case TermKind::App: {
        path.push_back(0);
        wrap(collect(t->a), [&](const TermPtr& r) { return app(r, t->b); });
        path.back() = 1;
        wrap(collect(t->b), [&](const TermPtr& r) { return app(t->a, r); });
        path.pop_back();
        break;
      }
      case TermKind::Lam:
      case TermKind::Pi: {
        bool is_lam = t->kind == TermKind::Lam;
        path.push_back(0);
        wrap(collect(t->a), [&](const TermPtr& r) {
          return is_lam ? lam(t->hint, r, t->b) : pi(t->hint, r, t->b);
        });
        path.back() = 1;
        Ident v = fresh_var(t->hint);
        opened.push_back(v);
        auto inner = collect(open_binder(t->b, fvar(v)));
        opened.pop_back();
        wrap(std::move(inner), [&](const TermPtr& r) {
          return is_lam ? lam_closing(t->hint, t->a, r, v)
                        : pi_closing(t->hint, t->a, r, v);
        });
        path.pop_back();
        break;
      }
      default:
        break;
    }
    return here;
  }
};

inline void dedup_steps(std::vector<Step>& steps) {
  std::vector<Step> uniq;
  for (auto& s : steps) {
    bool dup = false;
    for (auto& u : uniq)
      if (u.trace.rule == s.trace.rule && u.trace.path == s.trace.path &&
          alpha_eq(u.result, s.result)) {
        dup = true;
        break;
      }
    if (!dup) uniq.push_back(std::move(s));
  }
  steps = std::move(uniq);
}

}  // namespace detail

inline std::vector<Step> beta_step(const TermPtr& t) {
  detail::StepCollector c;
  c.with_beta = true;
  auto steps = c.collect(t);
  detail::dedup_steps(steps);
  return steps;
}

inline std::vector<Step> gamma_step(const TermPtr& t, const GlobalContext& ctx) {
  detail::StepCollector c;
  c.ctx = &ctx;
  c.with_rules = true;
  auto steps = c.collect(t);
  detail::dedup_steps(steps);
  return steps;
}

inline std::vector<Step> beta_gamma_step(const TermPtr& t,
                                         const GlobalContext& ctx) {
  detail::StepCollector c;
  c.ctx = &ctx;
  c.with_beta = true;
  c.with_rules = true;
  auto steps = c.collect(t);
  detail::dedup_steps(steps);
  return steps;
}

// ---------------------------------------------------------------------------
// Weak-head normalization with on-demand argument forcing: when matching a
// rule head-on fails at a constructor mismatch, the offending subject
// subterm is weak-head reduced in place and the match retried.

namespace detail {

struct WhnfEngine {
  const GlobalContext& ctx;
  Fuel& fuel;

  TermPtr whnf(TermPtr t) {
    for (;;) {
      // Head beta.
      if (t->kind == TermKind::App) {
        TermPtr f = whnf(t->a);
        if (f->kind == TermKind::Lam) {
          fuel.tick();
          t = open_binder(f->b, t->b);
          continue;
        }
        if (f != t->a) t = app(f, t->b);
      }
      // Rules at the root, first declared first.
      bool fired = false;
      for (auto& ar : ctx.rules()) {
        auto [matched, sub, updated] = match_forcing(ar.rule.lhs, t);
        t = updated;
        if (matched) {
          fuel.tick();
          t = apply_subst(ar.rule.rhs, *sub);
          fired = true;
          break;
        }
      }
      if (!fired) return t;
    }
  }

  // Returns (matched, substitution, subject-with-forced-subterms).  The
  // root is the caller's responsibility, so forcing happens only at strict
  // subterm positions, keeping whnf and mf from re-entering each other on
  // the same term.
  std::tuple<bool, std::optional<ObjSubstitution>, TermPtr> match_forcing(
      const TermPtr& lhs, const TermPtr& subject) {
    ObjSubstitution sub;
    std::set<Ident> prot;
    auto lhs_vars = free_vars(lhs);
    TermPtr updated = subject;
    bool ok = mf(lhs, updated, sub, prot, lhs_vars, 0);
    if (ok) return {true, sub, updated};
    return {false, std::nullopt, updated};
  }

  bool mf(const TermPtr& p, TermPtr& s, ObjSubstitution& out,
          std::set<Ident>& prot, const std::set<Ident>& lhs_vars, int depth) {
    if (p->kind == TermKind::FVar && lhs_vars.count(p->ident)) {
      for (auto& x : prot)
        if (occurs_free(x, s)) return false;
      if (auto* prev = out.find(p->ident)) return alpha_eq(*prev, s);
      out.set(p->ident, s);
      return true;
    }
    if (p->kind != s->kind) {
      if (depth == 0) return false;
      TermPtr forced = whnf(s);
      if (alpha_eq(forced, s)) return false;
      s = forced;
      if (p->kind != s->kind) return false;
    }
    switch (p->kind) {
      case TermKind::FVar:
      case TermKind::Const:
        return p->ident == s->ident;
      case TermKind::BVar:
        return p->index == s->index;
      case TermKind::Type:
      case TermKind::Kind:
        return true;
      case TermKind::App: {
        TermPtr f = s->a, a = s->b;
        bool ok = mf(p->a, f, out, prot, lhs_vars, depth + 1);
        if (!ok && depth > 0 && alpha_eq(f, s->a)) {
          // Maybe the whole application reduces to the right shape.
          TermPtr forced = whnf(s);
          if (!alpha_eq(forced, s)) {
            s = forced;
            return mf(p, s, out, prot, lhs_vars, depth);
          }
          return false;
        }
        if (!ok) {
          s = app(f, a);
          return false;
        }
        bool ok2 = mf(p->b, a, out, prot, lhs_vars, depth + 1);
        s = app(f, a);
        return ok2;
      }
      case TermKind::Lam:
      case TermKind::Pi: {
        TermPtr an = s->a;
        if (!mf(p->a, an, out, prot, lhs_vars, depth + 1)) {
          s = s->kind == TermKind::Lam ? lam(s->hint, an, s->b)
                                       : pi(s->hint, an, s->b);
          return false;
        }
        Ident v = fresh_var(s->hint);
        prot.insert(v);
        TermPtr body = open_binder(s->b, fvar(v));
        bool ok =
            mf(open_binder(p->b, fvar(v)), body, out, prot, lhs_vars, depth + 1);
        prot.erase(v);
        s = s->kind == TermKind::Lam
                ? lam_closing(s->hint, an, body, v)
                : pi_closing(s->hint, an, body, v);
        return ok;
      }
    }
    return false;
  }
};

}  // namespace detail

inline TermPtr whnf(const TermPtr& t, const GlobalContext& ctx, Fuel& fuel) {
  detail::WhnfEngine e{ctx, fuel};
  return e.whnf(t);
}

inline TermPtr whnf(const TermPtr& t, const GlobalContext& ctx,
                    std::uint64_t fuel) {
  Fuel f{fuel};
  return whnf(t, ctx, f);
}

// ---------------------------------------------------------------------------
// Deterministic normalization: leftmost-outermost, beta before rules at a
// position, rules in declaration order.

namespace detail {

inline std::optional<Step> find_first_step(const TermPtr& t,
                                           const GlobalContext& ctx,
                                           Path& path,
                                           std::vector<Ident>& opened) {
  if (t->kind == TermKind::App && t->a->kind == TermKind::Lam) {
    StepTrace tr;
    tr.rule = "beta";
    tr.path = path;
    tr.opened = opened;
    tr.subst.set(Ident{t->a->hint.empty() ? "x" : t->a->hint, IdentKind::Variable},
                 t->b);
    return Step{open_binder(t->a->b, t->b), tr};
  }
  for (auto& ar : ctx.rules()) {
    if (auto sub = syntactic_match(ar.rule.lhs, t)) {
      StepTrace tr;
      tr.rule = ar.rule.name;
      tr.path = path;
      tr.opened = opened;
      tr.subst = *sub;
      return Step{apply_subst(ar.rule.rhs, *sub), tr};
    }
  }
  switch (t->kind) {
    case TermKind::App: {
      path.push_back(0);
      if (auto s = find_first_step(t->a, ctx, path, opened)) {
        path.pop_back();
        s->result = app(s->result, t->b);
        return s;
      }
      path.back() = 1;
      if (auto s = find_first_step(t->b, ctx, path, opened)) {
        path.pop_back();
        s->result = app(t->a, s->result);
        return s;
      }
      path.pop_back();
      return std::nullopt;
    }
    case TermKind::Lam:
    case TermKind::Pi: {
      bool is_lam = t->kind == TermKind::Lam;
      path.push_back(0);
      if (auto s = find_first_step(t->a, ctx, path, opened)) {
        path.pop_back();
        s->result = is_lam ? lam(t->hint, s->result, t->b)
                           : pi(t->hint, s->result, t->b);
        return s;
      }
      path.back() = 1;
      Ident v = fresh_var(t->hint);
      opened.push_back(v);
      auto inner = find_first_step(open_binder(t->b, fvar(v)), ctx, path, opened);
      opened.pop_back();
      path.pop_back();
      if (inner) {
        inner->result = is_lam ? lam_closing(t->hint, t->a, inner->result, v)
                               : pi_closing(t->hint, t->a, inner->result, v);
        return inner;
      }
      return std::nullopt;
    }
    default:
      return std::nullopt;
  }
}

}  // namespace detail

inline TermPtr normalize_syntactic(const TermPtr& t, const GlobalContext& ctx,
                                   Fuel& fuel,
                                   std::vector<StepTrace>* trace = nullptr) {
  TermPtr cur = t;
  for (;;) {
    Path path;
    std::vector<Ident> opened;
    auto s = detail::find_first_step(cur, ctx, path, opened);
    if (!s) return cur;
    fuel.tick();
    if (trace) trace->push_back(s->trace);
    cur = s->result;
  }
}

// Full normalization; the modulo-beta route is defined with the encoding
// machinery (see modulo.hpp), syntactic rewriting handles the rest.
inline TermPtr normalize(const TermPtr& t, const GlobalContext& ctx,
                         bool modulo_beta, std::uint64_t fuel,
                         std::vector<StepTrace>* trace = nullptr);

// ---------------------------------------------------------------------------
// Conversion: compare weak-head forms structurally and recurse; on a head
// mismatch fall back to bounded full normalization, so the check stays
// complete whenever both sides normalize within fuel.

namespace detail {

inline bool conv_rec(const TermPtr& t0, const TermPtr& u0,
                     const GlobalContext& ctx, Fuel& fuel) {
  if (alpha_eq(t0, u0)) return true;
  TermPtr t = whnf(t0, ctx, fuel);
  TermPtr u = whnf(u0, ctx, fuel);
  if (t->kind == u->kind) {
    switch (t->kind) {
      case TermKind::FVar:
      case TermKind::Const:
        if (t->ident == u->ident) return true;
        break;
      case TermKind::BVar:
        if (t->index == u->index) return true;
        break;
      case TermKind::Type:
      case TermKind::Kind:
        return true;
      case TermKind::App:
        if (conv_rec(t->a, u->a, ctx, fuel) && conv_rec(t->b, u->b, ctx, fuel))
          return true;
        break;
      case TermKind::Lam:
      case TermKind::Pi: {
        if (conv_rec(t->a, u->a, ctx, fuel)) {
          Ident v = fresh_var(t->hint);
          if (conv_rec(open_binder(t->b, fvar(v)), open_binder(u->b, fvar(v)),
                       ctx, fuel))
            return true;
        }
        break;
      }
    }
  }
  return alpha_eq(normalize_syntactic(t, ctx, fuel),
                  normalize_syntactic(u, ctx, fuel));
}

}  // namespace detail

inline bool convertible(const TermPtr& t, const TermPtr& u,
                        const GlobalContext& ctx, Fuel& fuel) {
  return detail::conv_rec(t, u, ctx, fuel);
}

inline bool convertible(const TermPtr& t, const TermPtr& u,
                        const GlobalContext& ctx, std::uint64_t fuel) {
  Fuel f{fuel};
  return convertible(t, u, ctx, f);
}

// ---------------------------------------------------------------------------
// Trace replay: navigate to the recorded position (re-opening binders with
// the recorded variables), re-apply the step, and rebuild.

inline TermPtr replay_step(const TermPtr& t, const StepTrace& tr,
                           const GlobalContext& ctx) {
  auto rec = [&](auto&& self, const TermPtr& cur, size_t i,
                 size_t opened_idx) -> TermPtr {
    if (i == tr.path.size()) {
      if (tr.rule == "beta") {
        if (cur->kind != TermKind::App || cur->a->kind != TermKind::Lam)
          throw Error("replay: no beta redex at " + path_to_string(tr.path));
        return open_binder(cur->a->b, cur->b);
      }
      for (auto& ar : ctx.rules()) {
        if (ar.rule.name != tr.rule) continue;
        if (auto sub = syntactic_match(ar.rule.lhs, cur))
          return apply_subst(ar.rule.rhs, *sub);
        throw Error("replay: rule " + tr.rule + " does not match at " +
                    path_to_string(tr.path));
      }
      throw Error("replay: unknown rule " + tr.rule);
    }
    int c = tr.path[i];
    if (c == 0) {
      auto r = self(self, child(cur, 0), i + 1, opened_idx);
      switch (cur->kind) {
        case TermKind::App: return app(r, cur->b);
        case TermKind::Lam: return lam(cur->hint, r, cur->b);
        case TermKind::Pi: return pi(cur->hint, r, cur->b);
        default: throw Error("replay: bad path");
      }
    }
    if (cur->kind == TermKind::App) {
      auto r = self(self, cur->b, i + 1, opened_idx);
      return app(cur->a, r);
    }
    if (cur->kind == TermKind::Lam || cur->kind == TermKind::Pi) {
      if (opened_idx >= tr.opened.size())
        throw Error("replay: missing opened variable for binder");
      Ident v = tr.opened[opened_idx];
      auto r = self(self, open_binder(cur->b, fvar(v)), i + 1, opened_idx + 1);
      return cur->kind == TermKind::Lam ? lam_closing(cur->hint, cur->a, r, v)
                                        : pi_closing(cur->hint, cur->a, r, v);
    }
    throw Error("replay: bad path");
  };
  return rec(rec, t, 0, 0);
}

}  // namespace lpm
