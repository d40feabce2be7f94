#pragma once

// Global contexts (constant declarations plus admitted rewrite-rule groups),
// local contexts, and the error type shared by checking and elaboration.

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "lpm/term.hpp"

namespace lpm {

enum class RuleLevel { ObjectLevel, TypeLevelRule };

struct RewriteRule {
  TermPtr lhs;
  TermPtr rhs;
  RuleLevel level = RuleLevel::ObjectLevel;
  std::string name;  // head constant + per-head ordinal, or user-supplied

  static RewriteRule make(TermPtr lhs, TermPtr rhs, std::string name = "") {
    RuleLevel lvl;
    if (lhs->cat == Category::Object && rhs->cat == Category::Object)
      lvl = RuleLevel::ObjectLevel;
    else if (lhs->cat == Category::TypeLevel && rhs->cat == Category::TypeLevel)
      lvl = RuleLevel::TypeLevelRule;
    else
      throw IllFormedTerm("rewrite rule sides must both be objects or both be types");
    return RewriteRule{std::move(lhs), std::move(rhs), lvl, std::move(name)};
  }
};

// Ordered typing context for rule variables and binders.
struct LocalContext {
  std::vector<std::pair<Ident, TermPtr>> items;

  const TermPtr* find(const Ident& x) const {
    for (auto it = items.rbegin(); it != items.rend(); ++it)
      if (it->first == x) return &it->second;
    return nullptr;
  }
  bool contains(const Ident& x) const { return find(x) != nullptr; }
  LocalContext extended(const Ident& x, TermPtr ty) const {
    LocalContext out = *this;
    out.items.emplace_back(x, std::move(ty));
    return out;
  }
  size_t size() const { return items.size(); }
};

// Why a rule was accepted as permanently well-typed.
enum class EvidenceKind {
  AlgebraicLhs,  // algebraic left-hand side, one typing for both sides
  PatternLhs,    // pattern left-hand side, one typing for both sides
};

inline const char* evidence_name(EvidenceKind e) {
  switch (e) {
    case EvidenceKind::AlgebraicLhs: return "algebraic-lhs";
    case EvidenceKind::PatternLhs: return "pattern-lhs";
  }
  return "?";
}

struct AdmissionEvidence {
  EvidenceKind kind;
  LocalContext delta;   // types for the rule's free variables
  TermPtr common_type;  // the type both sides were given
};

struct AdmittedRule {
  RewriteRule rule;
  AdmissionEvidence evidence;
};

struct ObjectDecl {
  Ident name;
  TermPtr type;
};

struct TypeDecl {
  Ident name;
  TermPtr kind;
};

struct RuleGroupEntry {
  std::vector<AdmittedRule> rules;
};

using ContextEntry = std::variant<ObjectDecl, TypeDecl, RuleGroupEntry>;

class GlobalContext {
public:
  const std::vector<ContextEntry>& entries() const { return entries_; }
  const std::vector<AdmittedRule>& rules() const { return rules_; }

  bool declares(const std::string& name) const {
    return by_name_.count(name) != 0;
  }

  std::optional<Ident> lookup_ident(const std::string& name) const {
    auto it = by_name_.find(name);
    if (it == by_name_.end()) return std::nullopt;
    return Ident{name, it->second.first};
  }

  // Type of an object constant / kind of a type constant.
  const TermPtr* lookup_const(const Ident& id) const {
    auto it = by_name_.find(id.name);
    if (it == by_name_.end() || it->second.first != id.kind) return nullptr;
    return &it->second.second;
  }

  // Unchecked insertion; the checked path is typing's process_entry, which
  // validates before calling these.
  void push_object_unchecked(Ident name, TermPtr type) {
    by_name_[name.name] = {IdentKind::ObjectConst, type};
    entries_.push_back(ObjectDecl{std::move(name), std::move(type)});
  }
  void push_type_unchecked(Ident name, TermPtr kind) {
    by_name_[name.name] = {IdentKind::TypeConst, kind};
    entries_.push_back(TypeDecl{std::move(name), std::move(kind)});
  }
  void push_rules_unchecked(std::vector<AdmittedRule> group) {
    for (auto& r : group) {
      if (r.rule.name.empty()) r.rule.name = default_rule_name(r.rule);
      rules_.push_back(r);
    }
    entries_.push_back(RuleGroupEntry{std::move(group)});
  }

  std::string default_rule_name(const RewriteRule& r) const {
    auto [head, args] = spine(r.lhs);
    std::string base =
        head->kind == TermKind::Const ? head->ident.name : "rule";
    int n = 0;
    for (auto& ar : rules_) {
      auto [h2, a2] = spine(ar.rule.lhs);
      if (h2->kind == TermKind::Const && head->kind == TermKind::Const &&
          h2->ident == head->ident)
        ++n;
    }
    return base + "#" + std::to_string(n);
  }

private:
  std::vector<ContextEntry> entries_;
  std::vector<AdmittedRule> rules_;
  std::map<std::string, std::pair<IdentKind, TermPtr>> by_name_;
};

// ---------------------------------------------------------------------------
// Errors raised by checking, rule admission and name resolution.

enum class TypeErrorKind {
  Unbound,
  Duplicate,
  NotConvertible,
  NotAProduct,
  SortError,
  RuleRejected,
  FuelExhausted,
};

enum class RuleRejectReason {
  None,
  FreeVarEscape,     // rhs variable not free in the lhs
  NotAPattern,       // lhs neither algebraic nor a pattern
  ArityMismatch,     // a variable is applied to varying argument counts
  Underdetermined,   // no unique type found for some rule variable
  NoCommonType,      // sides do not admit one shared type
  LevelMismatch,     // sides live at different syntax levels
};

inline const char* rule_reject_name(RuleRejectReason r) {
  switch (r) {
    case RuleRejectReason::None: return "none";
    case RuleRejectReason::FreeVarEscape: return "free-var-escape";
    case RuleRejectReason::NotAPattern: return "not-a-pattern";
    case RuleRejectReason::ArityMismatch: return "arity-mismatch";
    case RuleRejectReason::Underdetermined: return "underdetermined-variable";
    case RuleRejectReason::NoCommonType: return "no-common-type";
    case RuleRejectReason::LevelMismatch: return "level-mismatch";
  }
  return "?";
}

struct SourceLoc {
  int line = 0;
  int col = 0;
  bool valid() const { return line > 0; }
  std::string to_string() const {
    return std::to_string(line) + ":" + std::to_string(col);
  }
};

struct TypeError : Error {
  TypeErrorKind kind;
  RuleRejectReason reject = RuleRejectReason::None;
  SourceLoc loc;
  TypeError(TypeErrorKind k, const std::string& msg)
      : Error(msg), kind(k) {}
  TypeError(RuleRejectReason r, const std::string& msg)
      : Error(msg), kind(TypeErrorKind::RuleRejected), reject(r) {}
};

}  // namespace lpm
