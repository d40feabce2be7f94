#pragma once

// Rewriting modulo beta: a subterm steps by a rule when the encoded
// left-hand side matches its embedding, so redexes hidden behind beta
// expansions are found by Miller matching.  The lifting witness turns such a
// step back into plain rewriting between beta-expanded endpoints, replayed
// here with first-order machinery only.

#include <algorithm>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "lpm/context.hpp"
#include "lpm/encoding.hpp"
#include "lpm/meta_hrs.hpp"
#include "lpm/reduction.hpp"
#include "lpm/term.hpp"
#include "lpm/typing.hpp"

namespace lpm {

struct AnnotationFailure : Error {
  explicit AnnotationFailure(const std::string& what) : Error(what) {}
};

struct ModuloStep {
  TermPtr source;
  TermPtr target;
  std::string rule;
  meta::MSubst meta_subst;    // rule variables to meta-level images
  Path path;                  // rewritten subterm position in source
  std::vector<Ident> opened;  // binder openings along the path
};

// Binder annotations are not recoverable from the encoding; this type-level
// constant stands in where no better choice is available.
inline const TermPtr& placeholder_type() {
  static const TermPtr t = type_const("_");
  return t;
}

// Rule-variable image as a term, eta-long lambdas annotated with the
// placeholder.
inline TermPtr obj_image(const meta::PretermPtr& img) {
  if (img->kind != meta::PKind::Lam) return unembed(img);
  std::string hint = img->hint.empty() ? "y" : img->hint;
  Ident z = fresh_var(hint);
  TermPtr body = obj_image(meta::mopen_binder(img->b, meta::mfvar(z, img->sty->dom)));
  return lam_closing(hint, placeholder_type(), body, z);
}

namespace detail {

// Matches every encoded rule against the embedding of every subterm.  The
// caller-facing target is rebuilt through the survived context; binder
// openings are recorded for replay and splicing.
struct ModuloCollector {
  const std::vector<meta::MetaRule>& rules;
  std::vector<ModuloStep> out;
  Path path;
  std::vector<Ident> opened;

  void at_node(const TermPtr& t) {
    for (auto& r : rules) {
      auto sub = meta::match_pattern(r.lhs, embed(t));
      if (!sub) continue;
      TermPtr tgt;
      try {
        tgt = unembed(meta::nf(meta::apply_msubst(r.rhs, *sub)));
      } catch (const IllFormedTerm&) {
        continue;  // reduct leaves the image of terms
      }
      ModuloStep s;
      s.target = tgt;
      s.rule = r.name;
      s.meta_subst = *sub;
      s.path = path;
      s.opened = opened;
      out.push_back(std::move(s));
    }
  }

  std::vector<ModuloStep> collect(const TermPtr& t) {
    std::vector<ModuloStep> here;
    size_t mark = out.size();
    at_node(t);
    here.assign(out.begin() + mark, out.end());
    out.resize(mark);

    auto wrap = [&](std::vector<ModuloStep>&& inner, auto rebuild) {
      for (auto& s : inner) {
        s.target = rebuild(s.target);
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

inline void dedup_modulo_steps(std::vector<ModuloStep>& steps) {
  std::vector<ModuloStep> uniq;
  for (auto& s : steps) {
    bool dup = false;
    for (auto& u : uniq)
      if (u.rule == s.rule && u.path == s.path && alpha_eq(u.target, s.target)) {
        dup = true;
        break;
      }
    if (!dup) uniq.push_back(std::move(s));
  }
  steps = std::move(uniq);
}

}  // namespace detail

// All single steps of the rewrite relation modulo beta.  Only encodable
// rules participate; plain rule steps are instances (arity-0 matching).
inline std::vector<ModuloStep> step_modulo_beta(const TermPtr& t,
                                                const GlobalContext& ctx) {
  EncodedSystem sys = hrs_of_context(ctx, false);
  detail::ModuloCollector c{sys.rules};
  auto steps = c.collect(t);
  for (auto& s : steps) s.source = t;
  detail::dedup_modulo_steps(steps);
  return steps;
}

// Union with plain beta steps; equals single-step rewriting in the encoded
// system extended with its beta rule (checked extensionally in the tests).
inline std::vector<ModuloStep> step_beta_gamma_modulo(const TermPtr& t,
                                                      const GlobalContext& ctx) {
  auto steps = step_modulo_beta(t, ctx);
  for (auto& b : beta_step(t)) {
    ModuloStep s;
    s.source = t;
    s.target = b.result;
    s.rule = "beta";
    s.path = b.trace.path;
    s.opened = b.trace.opened;
    steps.push_back(std::move(s));
  }
  detail::dedup_modulo_steps(steps);
  return steps;
}

// ---------------------------------------------------------------------------
// Lifting: a modulo step factors as beta-expansion, one plain rule step and
// beta-reduction.

struct LiftWitness {
  TermPtr t1_expanded;
  TermPtr t2_expanded;
  ObjSubstitution lifted_subst;  // first-order instantiation of the rule
  std::map<Ident, std::vector<TermPtr>> chosen_annotations;
  std::size_t beta_steps_source = 0;  // t1_expanded |>beta* source
  std::size_t beta_steps_target = 0;  // t2_expanded |>beta* target
};

namespace detail {

inline TermPtr subterm_at(const TermPtr& t, const Path& path,
                          const std::vector<Ident>& opened) {
  TermPtr cur = t;
  size_t oi = 0;
  for (int c : path) {
    if (c == 0) {
      cur = child(cur, 0);
      continue;
    }
    if (cur->kind == TermKind::App) {
      cur = cur->b;
    } else if (cur->kind == TermKind::Lam || cur->kind == TermKind::Pi) {
      if (oi >= opened.size()) throw Error("subterm_at: missing opened variable");
      cur = open_binder(cur->b, fvar(opened[oi++]));
    } else {
      throw Error("subterm_at: bad path");
    }
  }
  return cur;
}

inline TermPtr splice_at(const TermPtr& t, const Path& path,
                         const std::vector<Ident>& opened,
                         const TermPtr& replacement) {
  auto rec = [&](auto&& self, const TermPtr& cur, size_t i,
                 size_t oi) -> TermPtr {
    if (i == path.size()) return replacement;
    int c = path[i];
    if (c == 0) {
      auto r = self(self, child(cur, 0), i + 1, oi);
      switch (cur->kind) {
        case TermKind::App: return app(r, cur->b);
        case TermKind::Lam: return lam(cur->hint, r, cur->b);
        case TermKind::Pi: return pi(cur->hint, r, cur->b);
        default: throw Error("splice_at: bad path");
      }
    }
    if (cur->kind == TermKind::App)
      return app(cur->a, self(self, cur->b, i + 1, oi));
    if (cur->kind == TermKind::Lam || cur->kind == TermKind::Pi) {
      if (oi >= opened.size()) throw Error("splice_at: missing opened variable");
      Ident v = opened[oi];
      auto r = self(self, open_binder(cur->b, fvar(v)), i + 1, oi + 1);
      return cur->kind == TermKind::Lam ? lam_closing(cur->hint, cur->a, r, v)
                                        : pi_closing(cur->hint, cur->a, r, v);
    }
    throw Error("splice_at: bad path");
  };
  return rec(rec, t, 0, 0);
}

// Positions of applied rule-variable occurrences in a rule side; these are
// exactly where the lifted substitution introduces beta-redex stacks.
inline std::vector<std::pair<Path, int>> stack_positions(
    const TermPtr& t, const std::map<Ident, int>& arity) {
  std::vector<std::pair<Path, int>> out;
  Path path;
  std::set<Ident> bound;
  auto rec = [&](auto&& self, const TermPtr& cur) -> void {
    auto [h, args] = spine(cur);
    if (h->kind == TermKind::FVar && !bound.count(h->ident) && !args.empty()) {
      auto it = arity.find(h->ident);
      if (it != arity.end() && it->second == static_cast<int>(args.size())) {
        out.emplace_back(path, it->second);
      }
    }
    switch (cur->kind) {
      case TermKind::App:
        path.push_back(0);
        self(self, cur->a);
        path.back() = 1;
        self(self, cur->b);
        path.pop_back();
        break;
      case TermKind::Lam:
      case TermKind::Pi: {
        path.push_back(0);
        self(self, cur->a);
        path.back() = 1;
        Ident v = fresh_var(cur->hint);
        bound.insert(v);
        self(self, open_binder(cur->b, fvar(v)));
        bound.erase(v);
        path.pop_back();
        break;
      }
      default:
        break;
    }
  };
  rec(rec, t);
  return out;
}

inline TermPtr rewrite_at_fresh(const TermPtr& t, const Path& path, size_t i,
                                const std::function<TermPtr(const TermPtr&)>& f) {
  if (i == path.size()) return f(t);
  int c = path[i];
  if (c == 0) {
    auto r = rewrite_at_fresh(child(t, 0), path, i + 1, f);
    switch (t->kind) {
      case TermKind::App: return app(r, t->b);
      case TermKind::Lam: return lam(t->hint, r, t->b);
      case TermKind::Pi: return pi(t->hint, r, t->b);
      default: throw Error("rewrite_at: bad path");
    }
  }
  if (t->kind == TermKind::App)
    return app(t->a, rewrite_at_fresh(t->b, path, i + 1, f));
  if (t->kind == TermKind::Lam || t->kind == TermKind::Pi) {
    Ident v = fresh_var(t->hint);
    auto r = rewrite_at_fresh(open_binder(t->b, fvar(v)), path, i + 1, f);
    return t->kind == TermKind::Lam ? lam_closing(t->hint, t->a, r, v)
                                    : pi_closing(t->hint, t->a, r, v);
  }
  throw Error("rewrite_at: bad path");
}

inline TermPtr contract_stack(const TermPtr& t, int n) {
  if (n == 0) return t;
  if (t->kind != TermKind::App)
    throw Error("witness replay: expected an application");
  TermPtr f = contract_stack(t->a, n - 1);
  if (f->kind != TermKind::Lam)
    throw Error("witness replay: expected an abstraction");
  return open_binder(f->b, t->b);
}

// Contracts the introduced redex stacks, innermost occurrences first; each
// contraction is one beta step on the enclosing term.
inline TermPtr develop(const TermPtr& t, const TermPtr& rule_side,
                       const std::map<Ident, int>& arity, std::size_t& steps) {
  auto positions = stack_positions(rule_side, arity);
  std::stable_sort(positions.begin(), positions.end(),
                   [](const auto& a, const auto& b) {
                     return a.first.size() > b.first.size();
                   });
  TermPtr cur = t;
  for (auto& [p, n] : positions) {
    cur = rewrite_at_fresh(cur, p, 0,
                           [&](const TermPtr& s) { return contract_stack(s, n); });
    steps += static_cast<std::size_t>(n);
  }
  return cur;
}

}  // namespace detail

// Builds and replays the witness.  With a typing context the binder
// annotations are read off the rule's admission types, making the expanded
// endpoints well-typed whenever the source is; without one a placeholder
// stands in and the witness is replayable but possibly ill-typed.
inline LiftWitness lift_witness(const ModuloStep& s, const GlobalContext& ctx,
                                const std::optional<LocalContext>& typing_ctx,
                                std::uint64_t fuel = 100000) {
  const AdmittedRule* admitted = nullptr;
  for (auto& ar : ctx.rules())
    if (ar.rule.name == s.rule) {
      admitted = &ar;
      break;
    }
  if (!admitted) throw Error("lift_witness: unknown rule " + s.rule);
  const RewriteRule& rule = admitted->rule;
  auto arity = uniform_arities(rule);
  if (!arity) throw Error("lift_witness: rule not encodable: " + s.rule);

  LiftWitness w;
  Fuel f{fuel};
  for (auto& [name, img] : s.meta_subst.items) {
    Ident x;
    bool found = false;
    for (auto& v : free_vars_ordered(rule.lhs))
      if (v.name == name) {
        x = v;
        found = true;
        break;
      }
    if (!found) throw Error("lift_witness: stray binding for " + name);
    int n = 0;
    if (auto it = arity->find(x); it != arity->end()) n = it->second;
    if (n == 0) {
      w.lifted_subst.set(x, unembed(img));
      continue;
    }
    std::vector<TermPtr> annots;
    if (typing_ctx) {
      const TermPtr* xty = admitted->evidence.delta.find(x);
      if (!xty)
        throw AnnotationFailure("lift_witness: no admission type for " + name);
      // Annotations may depend on earlier binders, so the type peel and the
      // image opening share one variable per level.
      TermPtr cur = *xty;
      meta::PretermPtr body = img;
      std::vector<std::pair<std::string, Ident>> zs;
      for (int i = 0; i < n; ++i) {
        cur = whnf(cur, ctx, f);
        if (cur->kind != TermKind::Pi)
          throw AnnotationFailure("lift_witness: type of " + name +
                                  " offers no product for argument " +
                                  std::to_string(i + 1));
        if (body->kind != meta::PKind::Lam)
          throw Error("lift_witness: image of " + name + " is not eta-long");
        annots.push_back(cur->a);
        std::string hint = body->hint.empty()
                               ? (cur->hint.empty() ? "y" : cur->hint)
                               : body->hint;
        Ident z = fresh_var(hint);
        zs.emplace_back(hint, z);
        cur = open_binder(cur->b, fvar(z));
        body = meta::mopen_binder(body->b, meta::mfvar(z, body->sty->dom));
      }
      TermPtr image = unembed(body);
      for (int i = n - 1; i >= 0; --i)
        image = lam_closing(zs[i].first, annots[i], image, zs[i].second);
      w.lifted_subst.set(x, image);
    } else {
      for (int i = 0; i < n; ++i) annots.push_back(placeholder_type());
      w.lifted_subst.set(x, obj_image(img));
    }
    w.chosen_annotations.emplace(x, std::move(annots));
  }

  TermPtr t1_sub = apply_subst(rule.lhs, w.lifted_subst);
  TermPtr t2_sub = apply_subst(rule.rhs, w.lifted_subst);
  w.t1_expanded = detail::splice_at(s.source, s.path, s.opened, t1_sub);
  w.t2_expanded = detail::splice_at(s.source, s.path, s.opened, t2_sub);

  // Replay with first-order machinery: the expanded redex is a plain match,
  // and developing the introduced stacks lands exactly on the endpoints.
  auto tau = syntactic_match(rule.lhs, t1_sub);
  if (!tau || !alpha_eq(apply_subst(rule.rhs, *tau), t2_sub))
    throw Error("lift_witness: expanded step does not replay syntactically");
  TermPtr u0 = detail::subterm_at(s.source, s.path, s.opened);
  TermPtr v0 = detail::subterm_at(s.target, s.path, s.opened);
  TermPtr dev1 = detail::develop(t1_sub, rule.lhs, *arity, w.beta_steps_source);
  TermPtr dev2 = detail::develop(t2_sub, rule.rhs, *arity, w.beta_steps_target);
  if (!alpha_eq(dev1, u0))
    throw Error("lift_witness: beta development misses the source");
  if (!alpha_eq(dev2, v0))
    throw Error("lift_witness: beta development misses the target");
  return w;
}

// ---------------------------------------------------------------------------
// Deterministic normalization; the declaration lives with the plain
// strategy.  Modulo mode matches encodable rules through the encoding and
// falls back to syntactic matching for the rest, beta first at each node.

namespace detail {

struct ModuloNormalizer {
  const GlobalContext& ctx;
  std::vector<std::optional<meta::MetaRule>> enc;

  explicit ModuloNormalizer(const GlobalContext& g) : ctx(g) {
    for (auto& ar : ctx.rules()) {
      auto e = encode_rule(ar.rule);
      enc.push_back(e.rule ? std::optional<meta::MetaRule>(*e.rule)
                           : std::nullopt);
    }
  }

  std::optional<Step> at_node(const TermPtr& t, const Path& path,
                              const std::vector<Ident>& opened) {
    if (t->kind == TermKind::App && t->a->kind == TermKind::Lam) {
      StepTrace tr;
      tr.rule = "beta";
      tr.path = path;
      tr.opened = opened;
      return Step{open_binder(t->a->b, t->b), tr};
    }
    auto& ars = ctx.rules();
    for (size_t i = 0; i < ars.size(); ++i) {
      StepTrace tr;
      tr.rule = ars[i].rule.name;
      tr.path = path;
      tr.opened = opened;
      if (enc[i]) {
        auto sub = meta::match_pattern(enc[i]->lhs, embed(t));
        if (!sub) continue;
        TermPtr tgt;
        try {
          tgt = unembed(meta::nf(meta::apply_msubst(enc[i]->rhs, *sub)));
        } catch (const IllFormedTerm&) {
          continue;
        }
        for (auto& [name, img] : sub->items) {
          try {
            tr.subst.set(Ident{name, IdentKind::Variable}, obj_image(img));
          } catch (const IllFormedTerm&) {
          }
        }
        return Step{tgt, tr};
      }
      if (auto sub = syntactic_match(ars[i].rule.lhs, t)) {
        tr.subst = *sub;
        return Step{apply_subst(ars[i].rule.rhs, *sub), tr};
      }
    }
    return std::nullopt;
  }

  std::optional<Step> first(const TermPtr& t, Path& path,
                            std::vector<Ident>& opened) {
    if (auto s = at_node(t, path, opened)) return s;
    switch (t->kind) {
      case TermKind::App: {
        path.push_back(0);
        if (auto s = first(t->a, path, opened)) {
          path.pop_back();
          s->result = app(s->result, t->b);
          return s;
        }
        path.back() = 1;
        if (auto s = first(t->b, path, opened)) {
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
        if (auto s = first(t->a, path, opened)) {
          path.pop_back();
          s->result = is_lam ? lam(t->hint, s->result, t->b)
                             : pi(t->hint, s->result, t->b);
          return s;
        }
        path.back() = 1;
        Ident v = fresh_var(t->hint);
        opened.push_back(v);
        auto inner = first(open_binder(t->b, fvar(v)), path, opened);
        opened.pop_back();
        path.pop_back();
        if (inner) {
          inner->result = is_lam
                              ? lam_closing(t->hint, t->a, inner->result, v)
                              : pi_closing(t->hint, t->a, inner->result, v);
          return inner;
        }
        return std::nullopt;
      }
      default:
        return std::nullopt;
    }
  }
};

}  // namespace detail

inline TermPtr normalize(const TermPtr& t, const GlobalContext& ctx,
                         bool modulo_beta, std::uint64_t fuel,
                         std::vector<StepTrace>* trace) {
  Fuel f{fuel};
  if (!modulo_beta) return normalize_syntactic(t, ctx, f, trace);
  detail::ModuloNormalizer nz(ctx);
  TermPtr cur = t;
  for (;;) {
    Path path;
    std::vector<Ident> opened;
    auto s = nz.first(cur, path, opened);
    if (!s) return cur;
    f.tick();
    if (trace) trace->push_back(s->trace);
    cur = s->result;
  }
}

// Conversion through the congruence generated by rewriting modulo beta.
inline bool congruence_agrees(const TermPtr& t, const TermPtr& u,
                              const GlobalContext& ctx, std::uint64_t fuel) {
  return alpha_eq(normalize(t, ctx, true, fuel, nullptr),
                  normalize(u, ctx, true, fuel, nullptr));
}

}  // namespace lpm
