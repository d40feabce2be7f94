#pragma once

// Simply typed meta level: preterms over one base type with typed constants
// and metavariables, kept in eta-long beta-normal form.  Provides Miller
// pattern matching and unification, higher-order rewriting, and critical
// peak extraction.  Simple typing makes meta beta terminating, so
// normalization here needs no fuel; only rule rewriting is fueled.

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "lpm/term.hpp"

namespace lpm::meta {

// --------------------------------------------------------------------------
// Simple types over the single base type.

struct SimpleType;
using STypePtr = std::shared_ptr<const SimpleType>;

struct SimpleType {
  STypePtr dom, cod;  // both null for the base type
  bool is_base() const { return dom == nullptr; }
};

inline const STypePtr& st_base() {
  static const STypePtr b = std::make_shared<SimpleType>();
  return b;
}

inline STypePtr st_arrow(STypePtr dom, STypePtr cod) {
  auto t = std::make_shared<SimpleType>();
  const_cast<SimpleType&>(*t).dom = std::move(dom);
  const_cast<SimpleType&>(*t).cod = std::move(cod);
  return t;
}

inline bool st_equal(const STypePtr& a, const STypePtr& b) {
  if (a == b) return true;
  if (a->is_base() || b->is_base()) return a->is_base() && b->is_base();
  return st_equal(a->dom, b->dom) && st_equal(a->cod, b->cod);
}

inline int st_arity(const STypePtr& t) {
  int n = 0;
  for (auto c = t; !c->is_base(); c = c->cod) ++n;
  return n;
}

inline std::vector<STypePtr> st_args(const STypePtr& t) {
  std::vector<STypePtr> out;
  for (auto c = t; !c->is_base(); c = c->cod) out.push_back(c->dom);
  return out;
}

inline std::string st_to_string(const STypePtr& t) {
  if (t->is_base()) return "*";
  std::string d = st_to_string(t->dom);
  if (!t->dom->is_base()) d = "(" + d + ")";
  return d + " -> " + st_to_string(t->cod);
}

// --------------------------------------------------------------------------
// Preterms.  Constants carry a namespace tag so that object-level constants
// can never collide with the structural constants of an encoding.

enum class PKind { MetaVar, Con, FVar, BVar, App, Lam };
enum class ConKind { Structural, ObjectConst, TypeConst };

struct Preterm;
using PretermPtr = std::shared_ptr<const Preterm>;

struct Preterm {
  PKind kind;
  STypePtr sty;        // type of this node, cached
  std::string name;    // MetaVar, Con
  ConKind con_kind = ConKind::Structural;
  Ident ident;         // FVar
  int index = 0;       // BVar
  PretermPtr a, b;     // App: function, argument; Lam: body in b
  std::string hint;    // Lam binder name
};

namespace detail {
inline PretermPtr mk(Preterm&& t) {
  return std::make_shared<Preterm>(std::move(t));
}
}  // namespace detail

inline PretermPtr mvar(std::string name, STypePtr sty) {
  Preterm t;
  t.kind = PKind::MetaVar;
  t.name = std::move(name);
  t.sty = std::move(sty);
  return detail::mk(std::move(t));
}

inline PretermPtr mcon(std::string name, ConKind ck, STypePtr sty) {
  Preterm t;
  t.kind = PKind::Con;
  t.name = std::move(name);
  t.con_kind = ck;
  t.sty = std::move(sty);
  return detail::mk(std::move(t));
}

inline PretermPtr mfvar(Ident x, STypePtr sty) {
  Preterm t;
  t.kind = PKind::FVar;
  t.ident = std::move(x);
  t.sty = std::move(sty);
  return detail::mk(std::move(t));
}

inline PretermPtr mbvar(int index, STypePtr sty) {
  Preterm t;
  t.kind = PKind::BVar;
  t.index = index;
  t.sty = std::move(sty);
  return detail::mk(std::move(t));
}

inline PretermPtr mapp(const PretermPtr& f, const PretermPtr& a) {
  if (f->sty->is_base() || !st_equal(f->sty->dom, a->sty))
    throw IllFormedTerm("meta application type mismatch");
  Preterm t;
  t.kind = PKind::App;
  t.sty = f->sty->cod;
  t.a = f;
  t.b = a;
  return detail::mk(std::move(t));
}

inline PretermPtr mapp_spine(PretermPtr h, const std::vector<PretermPtr>& args) {
  for (auto& a : args) h = mapp(h, a);
  return h;
}

inline PretermPtr mlam(std::string hint, STypePtr dom, const PretermPtr& body) {
  Preterm t;
  t.kind = PKind::Lam;
  t.sty = st_arrow(std::move(dom), body->sty);
  t.b = body;
  t.hint = std::move(hint);
  return detail::mk(std::move(t));
}

inline std::pair<PretermPtr, std::vector<PretermPtr>> mspine(PretermPtr t) {
  std::vector<PretermPtr> args;
  while (t->kind == PKind::App) {
    args.push_back(t->b);
    t = t->a;
  }
  std::reverse(args.begin(), args.end());
  return {t, args};
}

inline PretermPtr mopen_at(const PretermPtr& t, int depth, const PretermPtr& v) {
  switch (t->kind) {
    case PKind::BVar:
      return t->index == depth ? v : t;
    case PKind::App:
      return mapp(mopen_at(t->a, depth, v), mopen_at(t->b, depth, v));
    case PKind::Lam: {
      auto b = mopen_at(t->b, depth + 1, v);
      return b == t->b ? t : mlam(t->hint, t->sty->dom, b);
    }
    default:
      return t;
  }
}

inline PretermPtr mopen_binder(const PretermPtr& body, const PretermPtr& v) {
  return mopen_at(body, 0, v);
}

inline PretermPtr mclose_at(const PretermPtr& t, int depth, const Ident& x,
                            const STypePtr& sty) {
  switch (t->kind) {
    case PKind::FVar:
      return t->ident == x ? mbvar(depth, sty) : t;
    case PKind::App:
      return mapp(mclose_at(t->a, depth, x, sty), mclose_at(t->b, depth, x, sty));
    case PKind::Lam: {
      auto b = mclose_at(t->b, depth + 1, x, sty);
      return b == t->b ? t : mlam(t->hint, t->sty->dom, b);
    }
    default:
      return t;
  }
}

inline PretermPtr mlam_closing(const std::string& hint, const STypePtr& dom,
                               const PretermPtr& body, const Ident& x) {
  return mlam(hint, dom, mclose_at(body, 0, x, dom));
}

inline bool meta_alpha_eq(const PretermPtr& a, const PretermPtr& b) {
  if (a == b) return true;
  if (a->kind != b->kind) return false;
  switch (a->kind) {
    case PKind::MetaVar:
      return a->name == b->name;
    case PKind::Con:
      return a->name == b->name && a->con_kind == b->con_kind;
    case PKind::FVar:
      return a->ident == b->ident;
    case PKind::BVar:
      return a->index == b->index;
    case PKind::App:
      return meta_alpha_eq(a->a, b->a) && meta_alpha_eq(a->b, b->b);
    case PKind::Lam:
      return st_equal(a->sty->dom, b->sty->dom) && meta_alpha_eq(a->b, b->b);
  }
  return false;
}

inline void metavars_into(const PretermPtr& t, std::set<std::string>& out) {
  switch (t->kind) {
    case PKind::MetaVar:
      out.insert(t->name);
      return;
    case PKind::App:
      metavars_into(t->a, out);
      metavars_into(t->b, out);
      return;
    case PKind::Lam:
      metavars_into(t->b, out);
      return;
    default:
      return;
  }
}

inline std::set<std::string> metavars(const PretermPtr& t) {
  std::set<std::string> out;
  metavars_into(t, out);
  return out;
}

inline void mfree_vars_into(const PretermPtr& t, std::set<Ident>& out) {
  switch (t->kind) {
    case PKind::FVar:
      out.insert(t->ident);
      return;
    case PKind::App:
      mfree_vars_into(t->a, out);
      mfree_vars_into(t->b, out);
      return;
    case PKind::Lam:
      mfree_vars_into(t->b, out);
      return;
    default:
      return;
  }
}

inline std::set<Ident> mfree_vars(const PretermPtr& t) {
  std::set<Ident> out;
  mfree_vars_into(t, out);
  return out;
}

// --------------------------------------------------------------------------
// Metavariable substitution and normal forms.

struct MSubst {
  std::vector<std::pair<std::string, PretermPtr>> items;

  const PretermPtr* find(const std::string& f) const {
    for (auto& [k, v] : items)
      if (k == f) return &v;
    return nullptr;
  }
  void set(const std::string& f, PretermPtr v) {
    for (auto& [k, old] : items)
      if (k == f) {
        old = std::move(v);
        return;
      }
    items.emplace_back(f, std::move(v));
  }
};

// Images are closed, so a plain structural walk is capture-safe.  The result
// may contain beta redexes; callers normalize.
inline PretermPtr apply_msubst(const PretermPtr& t, const MSubst& s) {
  switch (t->kind) {
    case PKind::MetaVar: {
      auto* v = s.find(t->name);
      return v ? *v : t;
    }
    case PKind::App:
      return mapp(apply_msubst(t->a, s), apply_msubst(t->b, s));
    case PKind::Lam: {
      auto b = apply_msubst(t->b, s);
      return b == t->b ? t : mlam(t->hint, t->sty->dom, b);
    }
    default:
      return t;
  }
}

inline PretermPtr beta_whnf(const PretermPtr& t) {
  if (t->kind != PKind::App) return t;
  PretermPtr f = beta_whnf(t->a);
  if (f->kind == PKind::Lam) return beta_whnf(mopen_binder(f->b, t->b));
  return f == t->a ? t : mapp(f, t->b);
}

inline PretermPtr beta_nf(const PretermPtr& t0) {
  PretermPtr t = beta_whnf(t0);
  switch (t->kind) {
    case PKind::App:
      // The head is stuck, so normalizing parts creates no new root redex.
      return mapp(beta_nf(t->a), beta_nf(t->b));
    case PKind::Lam: {
      Ident v = fresh_var(t->hint.empty() ? "x" : t->hint);
      auto body = beta_nf(mopen_binder(t->b, mfvar(v, t->sty->dom)));
      return mlam_closing(t->hint, t->sty->dom, body, v);
    }
    default:
      return t;
  }
}

// Eta-long form of a beta-normal term.
inline PretermPtr eta_long(const PretermPtr& t) {
  if (!t->sty->is_base()) {
    if (t->kind == PKind::Lam) {
      Ident v = fresh_var(t->hint.empty() ? "x" : t->hint);
      auto body = eta_long(mopen_binder(t->b, mfvar(v, t->sty->dom)));
      return mlam_closing(t->hint, t->sty->dom, body, v);
    }
    Ident v = fresh_var("x");
    auto body = eta_long(mapp(t, mfvar(v, t->sty->dom)));
    return mlam_closing("x", t->sty->dom, body, v);
  }
  auto [h, args] = mspine(t);
  PretermPtr out = h;
  for (auto& a : args) out = mapp(out, eta_long(a));
  return out;
}

inline PretermPtr nf(const PretermPtr& t) { return eta_long(beta_nf(t)); }

// --------------------------------------------------------------------------
// Miller patterns.  An argument of a flexible head must eta-contract to a
// variable; returns that variable's node if so.

inline PretermPtr eta_var(const PretermPtr& t0) {
  std::vector<Ident> lambdas;
  PretermPtr t = t0;
  while (t->kind == PKind::Lam) {
    Ident v = fresh_var("e");
    lambdas.push_back(v);
    t = mopen_binder(t->b, mfvar(v, t->sty->dom));
  }
  auto [h, args] = mspine(t);
  if (h->kind != PKind::FVar) return nullptr;
  if (args.size() != lambdas.size()) return nullptr;
  for (size_t i = 0; i < args.size(); ++i) {
    auto v = eta_var(args[i]);
    if (!v || !(v->ident == lambdas[i])) return nullptr;
  }
  for (auto& l : lambdas)
    if (h->ident == l) return nullptr;  // contracted to a local binder
  return h;
}

namespace detail {

inline bool is_pattern_rec(const PretermPtr& t) {
  switch (t->kind) {
    case PKind::Lam: {
      Ident v = fresh_var("p");
      return is_pattern_rec(mopen_binder(t->b, mfvar(v, t->sty->dom)));
    }
    case PKind::App: {
      auto [h, args] = mspine(t);
      if (h->kind == PKind::MetaVar) {
        std::set<Ident> seen;
        for (auto& a : args) {
          auto v = eta_var(a);
          if (!v) return false;
          if (!seen.insert(v->ident).second) return false;
        }
        return true;
      }
      for (auto& a : args)
        if (!is_pattern_rec(a)) return false;
      return true;
    }
    default:
      return true;
  }
}

}  // namespace detail

// t must be eta-long beta-normal.
inline bool is_pattern(const PretermPtr& t) { return detail::is_pattern_rec(t); }

// --------------------------------------------------------------------------
// Pattern matching.  Pattern metavariables are flexible; metavariables of
// the subject are treated as rigid constants.  An image may mention
// variables opened by the surrounding traversal (the context recaptures
// them) but not variables opened for binders inside the pattern itself,
// except through the flexible head's own arguments.

namespace detail {

inline bool match_meta_rec(const PretermPtr& p, const PretermPtr& s,
                           MSubst& out, std::set<Ident>& prot,
                           const std::set<std::string>& flex) {
  if (p->kind == PKind::Lam) {
    if (s->kind != PKind::Lam || !st_equal(p->sty->dom, s->sty->dom))
      return false;
    Ident v = fresh_var(s->hint.empty() ? "x" : s->hint);
    prot.insert(v);
    bool ok = match_meta_rec(mopen_binder(p->b, mfvar(v, p->sty->dom)),
                             mopen_binder(s->b, mfvar(v, s->sty->dom)), out,
                             prot, flex);
    prot.erase(v);
    return ok;
  }
  auto [h, args] = mspine(p);
  if (h->kind == PKind::MetaVar && flex.count(h->name)) {
    std::vector<PretermPtr> zs;
    std::set<Ident> zset;
    for (auto& a : args) {
      auto v = eta_var(a);
      if (!v || !zset.insert(v->ident).second) return false;
      zs.push_back(v);
    }
    for (auto& x : mfree_vars(s))
      if (prot.count(x) && !zset.count(x)) return false;
    PretermPtr image = s;
    for (auto it = zs.rbegin(); it != zs.rend(); ++it)
      image = mlam_closing((*it)->ident.name, (*it)->sty, image, (*it)->ident);
    if (auto* prev = out.find(h->name)) return meta_alpha_eq(*prev, image);
    out.set(h->name, image);
    return true;
  }
  auto [sh, sargs] = mspine(s);
  if (h->kind != sh->kind || args.size() != sargs.size()) return false;
  switch (h->kind) {
    case PKind::MetaVar:
      if (h->name != sh->name) return false;
      break;
    case PKind::Con:
      if (h->name != sh->name || h->con_kind != sh->con_kind) return false;
      break;
    case PKind::FVar:
      if (!(h->ident == sh->ident)) return false;
      break;
    default:
      return false;
  }
  for (size_t i = 0; i < args.size(); ++i)
    if (!match_meta_rec(args[i], sargs[i], out, prot, flex)) return false;
  return true;
}

}  // namespace detail

// Both sides eta-long beta-normal, same simple type.
inline std::optional<MSubst> match_pattern(const PretermPtr& pat,
                                           const PretermPtr& subject) {
  MSubst out;
  std::set<Ident> prot;
  auto flex = metavars(pat);
  if (detail::match_meta_rec(pat, subject, out, prot, flex)) return out;
  return std::nullopt;
}

// --------------------------------------------------------------------------
// Pattern unification on eta-long beta-normal terms whose flexible spines
// are Miller patterns.  Produces a most general unifier or nothing.

namespace detail {

inline std::string fresh_meta_name(const std::string& base) {
  static std::atomic<uint64_t> counter{0};
  return base + "@" + std::to_string(counter.fetch_add(1));
}

// Binds f := image, keeping the substitution idempotent.
inline void bind_meta(MSubst& sigma, const std::string& f, PretermPtr image) {
  image = nf(apply_msubst(image, sigma));
  MSubst one;
  one.set(f, image);
  for (auto& [g, im] : sigma.items) im = nf(apply_msubst(im, one));
  sigma.set(f, image);
}

// Restricts the occurrences in `s` to the variables in `allowed`, narrowing
// metavariables whose arguments mention anything else.  Fails on a rigid
// occurrence of a disallowed variable.
inline PretermPtr prune_rec(const PretermPtr& s, std::set<Ident>& allowed,
                            MSubst& sigma) {
  if (s->kind == PKind::Lam) {
    Ident v = fresh_var(s->hint.empty() ? "x" : s->hint);
    allowed.insert(v);
    auto b = prune_rec(mopen_binder(s->b, mfvar(v, s->sty->dom)), allowed, sigma);
    allowed.erase(v);
    if (!b) return nullptr;
    return mlam_closing(s->hint, s->sty->dom, b, v);
  }
  auto [h, args] = mspine(s);
  if (h->kind == PKind::FVar && !allowed.count(h->ident)) return nullptr;
  if (h->kind == PKind::MetaVar) {
    std::vector<PretermPtr> vars;
    std::vector<size_t> kept;
    for (size_t i = 0; i < args.size(); ++i) {
      auto v = eta_var(args[i]);
      if (!v) return nullptr;  // not a pattern spine
      vars.push_back(v);
      if (allowed.count(v->ident)) kept.push_back(i);
    }
    if (kept.size() == args.size()) return s;
    auto harg = st_args(h->sty);
    STypePtr nty = st_base();
    for (auto it = kept.rbegin(); it != kept.rend(); ++it)
      nty = st_arrow(harg[*it], nty);
    PretermPtr h2 = mvar(fresh_meta_name(h->name), nty);
    // h := \u1..un. h2 (kept ui)
    std::vector<std::pair<Ident, STypePtr>> us;
    for (size_t i = 0; i < harg.size(); ++i)
      us.emplace_back(fresh_var("u"), harg[i]);
    PretermPtr body = h2;
    for (auto i : kept) body = mapp(body, mfvar(us[i].first, us[i].second));
    for (auto it = us.rbegin(); it != us.rend(); ++it)
      body = mlam_closing(it->first.name, it->second, body, it->first);
    bind_meta(sigma, h->name, body);
    PretermPtr out = h2;
    for (auto i : kept) out = mapp(out, args[i]);
    return out;
  }
  PretermPtr out = h;
  for (auto& a : args) {
    auto pa = prune_rec(a, allowed, sigma);
    if (!pa) return nullptr;
    out = mapp(out, pa);
  }
  return out;
}

inline bool unify_rec(std::vector<std::pair<PretermPtr, PretermPtr>>& work,
                      MSubst& sigma) {
  while (!work.empty()) {
    auto [t0, u0] = work.back();
    work.pop_back();
    PretermPtr t = nf(apply_msubst(t0, sigma));
    PretermPtr u = nf(apply_msubst(u0, sigma));
    if (meta_alpha_eq(t, u)) continue;
    if (t->kind == PKind::Lam && u->kind == PKind::Lam) {
      if (!st_equal(t->sty->dom, u->sty->dom)) return false;
      Ident v = fresh_var(t->hint.empty() ? "x" : t->hint);
      work.emplace_back(mopen_binder(t->b, mfvar(v, t->sty->dom)),
                        mopen_binder(u->b, mfvar(v, u->sty->dom)));
      continue;
    }
    auto [th, targs] = mspine(t);
    auto [uh, uargs] = mspine(u);
    bool tflex = th->kind == PKind::MetaVar;
    bool uflex = uh->kind == PKind::MetaVar;
    if (!tflex && !uflex) {
      if (th->kind != uh->kind || targs.size() != uargs.size()) return false;
      if (th->kind == PKind::Con &&
          (th->name != uh->name || th->con_kind != uh->con_kind))
        return false;
      if (th->kind == PKind::FVar && !(th->ident == uh->ident)) return false;
      for (size_t i = 0; i < targs.size(); ++i)
        work.emplace_back(targs[i], uargs[i]);
      continue;
    }
    if (tflex && uflex && th->name == uh->name) {
      // Projection on positions where both spines carry the same variable.
      if (targs.size() != uargs.size()) return false;
      std::vector<PretermPtr> tv, uv;
      for (size_t i = 0; i < targs.size(); ++i) {
        auto a = eta_var(targs[i]);
        auto b = eta_var(uargs[i]);
        if (!a || !b) return false;
        tv.push_back(a);
        uv.push_back(b);
      }
      auto harg = st_args(th->sty);
      std::vector<size_t> kept;
      for (size_t i = 0; i < tv.size(); ++i)
        if (tv[i]->ident == uv[i]->ident) kept.push_back(i);
      if (kept.size() == tv.size()) continue;  // identical spines
      STypePtr nty = st_base();
      for (auto it = kept.rbegin(); it != kept.rend(); ++it)
        nty = st_arrow(harg[*it], nty);
      PretermPtr h2 = mvar(fresh_meta_name(th->name), nty);
      std::vector<std::pair<Ident, STypePtr>> us;
      for (size_t i = 0; i < harg.size(); ++i)
        us.emplace_back(fresh_var("u"), harg[i]);
      PretermPtr body = h2;
      for (auto i : kept) body = mapp(body, mfvar(us[i].first, us[i].second));
      for (auto it = us.rbegin(); it != us.rend(); ++it)
        body = mlam_closing(it->first.name, it->second, body, it->first);
      bind_meta(sigma, th->name, body);
      continue;
    }
    if (tflex && uflex) {
      // Different heads: bind both to a fresh head over the shared variables.
      std::vector<PretermPtr> tv, uv;
      for (auto& a : targs) {
        auto v = eta_var(a);
        if (!v) return false;
        tv.push_back(v);
      }
      for (auto& a : uargs) {
        auto v = eta_var(a);
        if (!v) return false;
        uv.push_back(v);
      }
      std::vector<PretermPtr> common;
      for (auto& z : tv)
        for (auto& w : uv)
          if (z->ident == w->ident) {
            common.push_back(z);
            break;
          }
      STypePtr nty = st_base();
      for (auto it = common.rbegin(); it != common.rend(); ++it)
        nty = st_arrow((*it)->sty, nty);
      PretermPtr h2 = mvar(fresh_meta_name(th->name), nty);
      auto make_image = [&](const PretermPtr& head,
                            const std::vector<PretermPtr>& vs) {
        auto harg = st_args(head->sty);
        std::vector<std::pair<Ident, STypePtr>> us;
        for (size_t i = 0; i < harg.size(); ++i)
          us.emplace_back(fresh_var("u"), harg[i]);
        PretermPtr body = h2;
        for (auto& c : common) {
          size_t at = vs.size();
          for (size_t i = 0; i < vs.size(); ++i)
            if (vs[i]->ident == c->ident) {
              at = i;
              break;
            }
          body = mapp(body, mfvar(us[at].first, us[at].second));
        }
        for (auto it = us.rbegin(); it != us.rend(); ++it)
          body = mlam_closing(it->first.name, it->second, body, it->first);
        return body;
      };
      bind_meta(sigma, th->name, make_image(th, tv));
      bind_meta(sigma, uh->name, make_image(uh, uv));
      continue;
    }
    // Flex against rigid.
    if (!tflex) {
      std::swap(t, u);
      std::swap(th, uh);
      std::swap(targs, uargs);
    }
    if (metavars(u).count(th->name)) return false;  // occurs check
    std::vector<PretermPtr> zs;
    std::set<Ident> allowed;
    for (auto& a : targs) {
      auto v = eta_var(a);
      if (!v || !allowed.insert(v->ident).second) return false;
      zs.push_back(v);
    }
    PretermPtr pruned = prune_rec(u, allowed, sigma);
    if (!pruned) return false;
    PretermPtr image = pruned;
    for (auto it = zs.rbegin(); it != zs.rend(); ++it)
      image = mlam_closing((*it)->ident.name, (*it)->sty, image, (*it)->ident);
    bind_meta(sigma, th->name, image);
  }
  return true;
}

}  // namespace detail

inline std::optional<MSubst> pattern_unify(const PretermPtr& t,
                                           const PretermPtr& u) {
  if (!st_equal(t->sty, u->sty)) return std::nullopt;
  std::vector<std::pair<PretermPtr, PretermPtr>> work{{t, u}};
  MSubst sigma;
  if (detail::unify_rec(work, sigma)) return sigma;
  return std::nullopt;
}

// --------------------------------------------------------------------------
// Rewriting.

struct MetaRule {
  std::string name;
  PretermPtr lhs, rhs;
};

// Renames the rule's metavariables apart so subject metavariables with the
// same base name stay rigid.
inline MetaRule freshen_rule(const MetaRule& r) {
  MSubst ren;
  for (auto& f : metavars(r.lhs)) {
    // Type of f as it occurs; find one occurrence.
    PretermPtr node;
    auto find = [&](auto&& self, const PretermPtr& t) -> void {
      if (node) return;
      if (t->kind == PKind::MetaVar && t->name == f) {
        node = t;
        return;
      }
      if (t->kind == PKind::App || t->kind == PKind::Lam) {
        if (t->a) self(self, t->a);
        if (t->b) self(self, t->b);
      }
    };
    find(find, r.lhs);
    ren.set(f, mvar(detail::fresh_meta_name(f), node->sty));
  }
  return {r.name, nf(apply_msubst(r.lhs, ren)), nf(apply_msubst(r.rhs, ren))};
}

struct MetaStep {
  PretermPtr result;
  std::string rule;
  Path path;
};

namespace detail {

struct MetaStepCollector {
  const std::vector<MetaRule>& rules;
  std::vector<MetaStep> out;
  Path path;

  std::vector<MetaStep> collect(const PretermPtr& t) {
    std::vector<MetaStep> here;
    for (auto& r0 : rules) {
      if (!st_equal(r0.lhs->sty, t->sty)) continue;
      MetaRule r = freshen_rule(r0);
      if (auto sub = match_pattern(r.lhs, t))
        here.push_back({nf(apply_msubst(r.rhs, *sub)), r0.name, path});
    }
    auto wrap = [&](std::vector<MetaStep>&& inner, auto rebuild) {
      for (auto& s : inner) {
        s.result = rebuild(s.result);
        here.push_back(std::move(s));
      }
    };
    switch (t->kind) {
      case PKind::App: {
        path.push_back(0);
        wrap(collect(t->a), [&](const PretermPtr& r) { return mapp(r, t->b); });
        path.back() = 1;
        wrap(collect(t->b), [&](const PretermPtr& r) { return mapp(t->a, r); });
        path.pop_back();
        break;
      }
      case PKind::Lam: {
        path.push_back(0);
        Ident v = fresh_var(t->hint.empty() ? "x" : t->hint);
        auto inner = collect(mopen_binder(t->b, mfvar(v, t->sty->dom)));
        wrap(std::move(inner), [&](const PretermPtr& r) {
          return mlam_closing(t->hint, t->sty->dom, r, v);
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

}  // namespace detail

inline std::vector<MetaStep> hrs_steps(const PretermPtr& t,
                                       const std::vector<MetaRule>& rules) {
  detail::MetaStepCollector c{rules};
  auto steps = c.collect(t);
  std::vector<MetaStep> uniq;
  for (auto& s : steps) {
    bool dup = false;
    for (auto& u : uniq)
      if (u.rule == s.rule && u.path == s.path &&
          meta_alpha_eq(u.result, s.result)) {
        dup = true;
        break;
      }
    if (!dup) uniq.push_back(std::move(s));
  }
  return uniq;
}

namespace detail {

inline std::optional<PretermPtr> hrs_first_step(
    const PretermPtr& t, const std::vector<MetaRule>& rules) {
  for (auto& r0 : rules) {
    if (!st_equal(r0.lhs->sty, t->sty)) continue;
    MetaRule r = freshen_rule(r0);
    if (auto sub = match_pattern(r.lhs, t))
      return nf(apply_msubst(r.rhs, *sub));
  }
  switch (t->kind) {
    case PKind::App: {
      if (auto s = hrs_first_step(t->a, rules)) return mapp(*s, t->b);
      if (auto s = hrs_first_step(t->b, rules)) return mapp(t->a, *s);
      return std::nullopt;
    }
    case PKind::Lam: {
      Ident v = fresh_var(t->hint.empty() ? "x" : t->hint);
      if (auto s = hrs_first_step(mopen_binder(t->b, mfvar(v, t->sty->dom)),
                                  rules))
        return mlam_closing(t->hint, t->sty->dom, *s, v);
      return std::nullopt;
    }
    default:
      return std::nullopt;
  }
}

}  // namespace detail

inline PretermPtr hrs_normalize(const PretermPtr& t0,
                                const std::vector<MetaRule>& rules,
                                Fuel& fuel) {
  PretermPtr t = nf(t0);
  for (;;) {
    auto s = detail::hrs_first_step(t, rules);
    if (!s) return t;
    fuel.tick();
    t = *s;
  }
}

inline PretermPtr hrs_normalize(const PretermPtr& t,
                                const std::vector<MetaRule>& rules,
                                std::uint64_t fuel) {
  Fuel f{fuel};
  return hrs_normalize(t, rules, f);
}

// Joinability of two terms.  Deterministic normalization decides most pairs;
// when the strategies diverge (possible on open terms) a breadth-first search
// for a common reduct runs until the fuel or the frontier is exhausted.
inline bool joinable(const PretermPtr& a, const PretermPtr& b,
                     const std::vector<MetaRule>& rules, Fuel& fuel) {
  try {
    if (meta_alpha_eq(hrs_normalize(a, rules, fuel),
                      hrs_normalize(b, rules, fuel)))
      return true;
  } catch (const FuelExhausted&) {
    return false;
  }
  std::vector<PretermPtr> seen[2] = {{nf(a)}, {nf(b)}};
  std::vector<PretermPtr> frontier[2] = {seen[0], seen[1]};
  auto holds = [](const std::vector<PretermPtr>& v, const PretermPtr& t) {
    for (auto& s : v)
      if (meta_alpha_eq(s, t)) return true;
    return false;
  };
  if (holds(seen[0], nf(b))) return true;
  try {
    while (!frontier[0].empty() || !frontier[1].empty()) {
      for (int side = 0; side < 2; ++side) {
        std::vector<PretermPtr> next;
        for (auto& t : frontier[side]) {
          fuel.tick();
          for (auto& s : hrs_steps(t, rules)) {
            if (holds(seen[side], s.result)) continue;
            if (holds(seen[1 - side], s.result)) return true;
            seen[side].push_back(s.result);
            next.push_back(s.result);
          }
        }
        frontier[side] = std::move(next);
      }
    }
  } catch (const FuelExhausted&) {
    return false;
  }
  return false;
}

// --------------------------------------------------------------------------
// Critical peaks.  A rewrite of rule j inside the left-hand side of rule i:
// overlap positions are the rigid spine roots of lhs_i plus its applied
// metavariable spines (there a redex can sit entirely inside an instance).
// For an overlap under binders xs the inner rule is lifted: each of its
// metavariables gains xs as extra arguments, so the unifier may use them.

struct CriticalPeak {
  PretermPtr top, left, right;
  std::string outer_rule, inner_rule;
  Path pos;
};

namespace detail {

inline MetaRule lift_rule(const MetaRule& r,
                          const std::vector<PretermPtr>& binders) {
  if (binders.empty()) return r;
  std::map<std::string, PretermPtr> lifted;
  auto walk = [&](auto&& self, const PretermPtr& t) -> PretermPtr {
    switch (t->kind) {
      case PKind::MetaVar: {
        auto it = lifted.find(t->name);
        if (it == lifted.end()) {
          STypePtr nty = t->sty;
          for (auto b = binders.rbegin(); b != binders.rend(); ++b)
            nty = st_arrow((*b)->sty, nty);
          it = lifted.emplace(t->name,
                              mvar(fresh_meta_name(t->name), nty)).first;
        }
        PretermPtr out = it->second;
        for (auto& b : binders) out = mapp(out, b);
        return out;
      }
      case PKind::App:
        return mapp(self(self, t->a), self(self, t->b));
      case PKind::Lam: {
        auto b = self(self, t->b);
        return b == t->b ? t : mlam(t->hint, t->sty->dom, b);
      }
      default:
        return t;
    }
  };
  return {r.name, nf(walk(walk, r.lhs)), nf(walk(walk, r.rhs))};
}

struct PeakScan {
  const MetaRule& outer;
  const MetaRule& inner;
  bool same_rule;
  std::vector<CriticalPeak>* out;
  Path path;
  std::vector<PretermPtr> binders;  // opened variables, outermost first

  using Rebuild = std::function<PretermPtr(const PretermPtr&)>;

  void run() {
    scan(outer.lhs, [](const PretermPtr& r) { return r; });
  }

  // `rebuild` maps a replacement for the current subterm back to the whole
  // lhs, closing any binders opened on the way down.
  void scan(const PretermPtr& t, const Rebuild& rebuild) {
    if (t->sty->is_base()) try_overlap(t, rebuild);
    switch (t->kind) {
      case PKind::App: {
        auto [h, args] = mspine(t);
        if (h->kind == PKind::MetaVar) return;  // args are variables only
        path.push_back(0);
        scan(t->a,
             [&](const PretermPtr& r) { return rebuild(mapp(r, t->b)); });
        path.back() = 1;
        scan(t->b,
             [&](const PretermPtr& r) { return rebuild(mapp(t->a, r)); });
        path.pop_back();
        return;
      }
      case PKind::Lam: {
        Ident v = fresh_var(t->hint.empty() ? "x" : t->hint);
        auto fv = mfvar(v, t->sty->dom);
        binders.push_back(fv);
        path.push_back(0);
        scan(mopen_binder(t->b, fv), [&](const PretermPtr& r) {
          return rebuild(mlam_closing(t->hint, t->sty->dom, r, v));
        });
        path.pop_back();
        binders.pop_back();
        return;
      }
      default:
        return;
    }
  }

  void try_overlap(const PretermPtr& t, const Rebuild& rebuild) {
    auto [h, args] = mspine(t);
    if (h->kind == PKind::MetaVar && args.empty()) return;  // variable position
    if (h->kind == PKind::FVar) return;                     // bound variable
    if (same_rule && path.empty()) return;  // trivial self-overlap
    MetaRule lifted = lift_rule(freshen_rule(inner), binders);
    auto sigma = pattern_unify(t, lifted.lhs);
    if (!sigma) return;
    auto replaced = rebuild(lifted.rhs);
    CriticalPeak pk;
    pk.top = nf(apply_msubst(outer.lhs, *sigma));
    pk.left = nf(apply_msubst(outer.rhs, *sigma));
    pk.right = nf(apply_msubst(replaced, *sigma));
    pk.outer_rule = outer.name;
    pk.inner_rule = inner.name;
    pk.pos = path;
    out->push_back(std::move(pk));
  }
};

}  // namespace detail

inline std::vector<CriticalPeak> critical_peaks(
    const std::vector<MetaRule>& rules) {
  std::vector<CriticalPeak> out;
  for (auto& outer : rules)
    for (auto& inner : rules) {
      detail::PeakScan scan{outer, inner, &outer == &inner, &out};
      scan.run();
    }
  return out;
}

// --------------------------------------------------------------------------
// Debug printing.

namespace detail {

// Binders display as their hint, primed on collision with an enclosing one.
inline std::string print_meta_rec(const PretermPtr& t,
                                  std::vector<std::pair<Ident, std::string>>& names) {
  switch (t->kind) {
    case PKind::MetaVar:
      return "?" + t->name;
    case PKind::Con:
      return t->name;
    case PKind::FVar: {
      for (auto& [id, shown] : names)
        if (id == t->ident) return shown;
      return t->ident.name;
    }
    case PKind::BVar:
      return "#" + std::to_string(t->index);
    case PKind::App: {
      auto [h, args] = mspine(t);
      std::string s = print_meta_rec(h, names) + "(";
      for (size_t i = 0; i < args.size(); ++i) {
        if (i) s += ", ";
        s += print_meta_rec(args[i], names);
      }
      return s + ")";
    }
    case PKind::Lam: {
      std::string shown = t->hint.empty() ? "x" : t->hint;
      auto taken = [&](const std::string& n) {
        for (auto& [id, d] : names)
          if (d == n) return true;
        return false;
      };
      while (taken(shown)) shown += '\'';
      Ident v = fresh_var(shown);
      names.emplace_back(v, shown);
      std::string body =
          print_meta_rec(mopen_binder(t->b, mfvar(v, t->sty->dom)), names);
      names.pop_back();
      return "\\" + shown + ". " + body;
    }
  }
  return "?";
}

}  // namespace detail

inline std::string print_meta(const PretermPtr& t) {
  std::vector<std::pair<Ident, std::string>> names;
  return detail::print_meta_rec(t, names);
}

}  // namespace lpm::meta
