#pragma once

// File checking with inline commands, expression reduction and typing:
// everything the command-line tool does, reusable from tests.

#include <chrono>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "lpm/context.hpp"
#include "lpm/encoding.hpp"
#include "lpm/modulo.hpp"
#include "lpm/reduction.hpp"
#include "lpm/surface.hpp"
#include "lpm/term.hpp"
#include "lpm/typing.hpp"

#include "json.hpp"

namespace lpm {

struct DriverOptions {
  std::string mode;  // "check", "reduce" or "type"
  std::string file;
  std::string expr;  // reduce and type modes
  std::uint64_t fuel = 100000;
  bool modulo_beta = false;
  bool strict_pc = false;
  bool trace = false;
  bool witness = false;
  bool dump_hrs = false;
  bool report = false;
};

struct EntryRecord {
  std::string name;
  std::string status;
  std::string evidence;
  std::string pc_verdict;
  std::uint64_t steps = 0;
  double millis = 0.0;
};

namespace detail {

inline double ms_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(
             std::chrono::steady_clock::now() - t0)
      .count();
}

// Rules are unnamed in the surface syntax; they get stable names from the
// head constant of their left-hand side.
inline std::string rule_name_for(const TermPtr& lhs,
                                 std::map<std::string, int>& counts) {
  auto [h, args] = spine(lhs);
  std::string head = h->kind == TermKind::Const ? h->ident.name : "rule";
  return head + "#" + std::to_string(++counts[head]);
}

inline bool context_has_pattern_rule(const GlobalContext& g) {
  for (auto& ar : g.rules())
    if (ar.evidence.kind == EvidenceKind::PatternLhs) return true;
  return false;
}

}  // namespace detail

// Replays a file statement by statement.  Inline commands evaluate against
// the context built so far; records collect one line per statement.
inline GlobalContext run_file(const SourceFile& sf, const DriverOptions& opt,
                              std::ostream& out, std::ostream& err,
                              std::vector<EntryRecord>* records = nullptr) {
  GlobalContext g;
  std::map<std::string, int> rule_counts;
  bool reduce_hint_shown = false;

  auto record = [&](EntryRecord r) {
    if (records) records->push_back(std::move(r));
  };

  for (size_t i = 0; i < sf.statements.size(); ++i) {
    auto t0 = std::chrono::steady_clock::now();
    if (auto* d = std::get_if<DeclStmt>(&sf.statements[i])) {
      ResolveEnv env{&g};
      TermPtr type = resolve(d->type, env);
      EntryReport rep = process_declaration(g, d->name, type, opt.fuel);
      EntryRecord rec{d->name, "ok", "", "", 0, detail::ms_since(t0)};
      if (rep.pc) {
        rec.pc_verdict = pc_verdict_name(rep.pc->verdict);
        if (rep.pc->verdict == PcVerdict::Assumed) {
          if (opt.strict_pc)
            throw TypeError(TypeErrorKind::RuleRejected,
                            d->loc.to_string() +
                                ": product compatibility not established "
                                "after '" +
                                d->name + "' (" + rep.pc->detail + ")");
          err << "warning: product compatibility assumed after '" << d->name
              << "' (" << rep.pc->detail << ")\n";
        }
      }
      record(std::move(rec));
      continue;
    }
    if (std::holds_alternative<RuleStmt>(sf.statements[i])) {
      std::vector<RewriteRule> rules;
      SourceLoc loc;
      while (i < sf.statements.size()) {
        auto* r = std::get_if<RuleStmt>(&sf.statements[i]);
        if (!r) break;
        if (rules.empty()) loc = r->loc;
        ResolveEnv env{&g};
        env.free_allowed.insert(r->vars.begin(), r->vars.end());
        TermPtr lhs = resolve(r->lhs, env);
        TermPtr rhs = resolve(r->rhs, env);
        rules.push_back(
            RewriteRule::make(lhs, rhs, detail::rule_name_for(lhs, rule_counts)));
        ++i;
      }
      --i;
      EntryReport rep = process_rule_group(g, rules, opt.fuel);
      EntryRecord rec{rep.name, "ok", "", "", 0, detail::ms_since(t0)};
      for (size_t k = 0; k < rep.evidence.size(); ++k)
        rec.evidence += (k ? "," : "") + rep.evidence[k];
      if (rep.pc) {
        rec.pc_verdict = pc_verdict_name(rep.pc->verdict);
        if (rep.pc->verdict == PcVerdict::Assumed) {
          if (opt.strict_pc)
            throw TypeError(TypeErrorKind::RuleRejected,
                            loc.to_string() +
                                ": product compatibility not established "
                                "after rules (" +
                                rep.pc->detail + ")");
          err << "warning: product compatibility assumed after [" << rep.name
              << "] (" << rep.pc->detail << ")\n";
        }
      }
      record(std::move(rec));
      continue;
    }
    auto& c = std::get<CommandStmt>(sf.statements[i]);
    Fuel fuel{opt.fuel};
    ResolveEnv env{&g};
    switch (c.cmd) {
      case CmdKind::TypeOf: {
        TermPtr t = resolve(c.a, env);
        TermPtr ty = infer(t, g, LocalContext{}, fuel);
        out << print_term(t) << " : " << print_term(ty) << "\n";
        record({"#TYPE " + print_term(t), "ok", "", "", 0,
                detail::ms_since(t0)});
        break;
      }
      case CmdKind::Reduce: {
        TermPtr t = resolve(c.a, env);
        if (!reduce_hint_shown && detail::context_has_pattern_rule(g)) {
          err << "note: context has pattern rules; #REDUCE is plain, "
                 "see 'reduce --modulo-beta' for rewriting modulo beta\n";
          reduce_hint_shown = true;
        }
        std::vector<StepTrace> steps;
        TermPtr nf = normalize_syntactic(t, g, fuel,
                                         opt.trace ? &steps : nullptr);
        if (opt.trace)
          for (auto& s : steps) out << "  " << s.to_string() << "\n";
        out << print_term(nf) << "\n";
        record({"#REDUCE " + print_term(t), "ok", "", "",
                opt.fuel - fuel.left, detail::ms_since(t0)});
        break;
      }
      case CmdKind::Check: {
        TermPtr t = resolve(c.a, env);
        TermPtr ty = resolve(c.b, env);
        check(t, ty, g, LocalContext{}, fuel);
        record({"#CHECK " + print_term(t), "ok", "", "", 0,
                detail::ms_since(t0)});
        break;
      }
    }
  }
  return g;
}

// Reduction modulo beta with per-step lifting witnesses printed as the
// three segments t1' (beta-expansion), the plain rule step, and the beta
// reduction to the target.
inline TermPtr reduce_with_witness(const TermPtr& t0, const GlobalContext& g,
                                   std::uint64_t fuel_total, std::ostream& out) {
  bool typed = true;
  {
    Fuel f{fuel_total};
    try {
      infer(t0, g, LocalContext{}, f);
    } catch (const TypeError&) {
      typed = false;
    }
  }
  detail::ModuloNormalizer nz(g);
  Fuel fuel{fuel_total};
  TermPtr cur = t0;
  size_t n = 0;
  for (;;) {
    Path path;
    std::vector<Ident> opened;
    auto s = nz.first(cur, path, opened);
    if (!s) return cur;
    fuel.tick();
    ++n;
    if (s->trace.rule == "beta") {
      out << "step " << n << ": beta at " << path_to_string(s->trace.path)
          << "\n";
      cur = s->result;
      continue;
    }
    ModuloStep picked;
    bool found = false;
    for (auto& ms : step_modulo_beta(cur, g))
      if (ms.rule == s->trace.rule && ms.path == s->trace.path &&
          alpha_eq(ms.target, s->result)) {
        picked = ms;
        found = true;
        break;
      }
    if (!found) throw Error("witness: step not reproducible");
    LiftWitness w = lift_witness(
        picked, g,
        typed ? std::optional<LocalContext>(LocalContext{}) : std::nullopt,
        fuel.left);
    out << "step " << n << ": " << picked.rule << " at "
        << path_to_string(picked.path) << " modulo beta\n";
    out << "  expand " << w.beta_steps_source << " beta step(s): "
        << print_term(w.t1_expanded) << "\n";
    out << "  rewrite: " << print_term(w.t2_expanded) << "\n";
    out << "  reduce " << w.beta_steps_target << " beta step(s): "
        << print_term(picked.target) << "\n";
    cur = picked.target;
  }
}

inline int run_driver(const DriverOptions& opt, std::ostream& out,
                      std::ostream& err) {
  try {
    std::ifstream in(opt.file);
    if (!in) {
      err << "error: cannot open " << opt.file << "\n";
      return 1;
    }
    std::stringstream buf;
    buf << in.rdbuf();
    SourceFile sf = parse_file(buf.str());

    // In reduce and type modes the file is only the context; its inline
    // commands are still checked but stay silent.
    std::vector<EntryRecord> records;
    std::ostringstream command_sink;
    bool query_mode = opt.mode == "reduce" || opt.mode == "type";
    GlobalContext g =
        run_file(sf, opt, query_mode ? command_sink : out, err, &records);

    if (opt.dump_hrs) out << dump_hrs(hrs_of_context(g, true));

    if (opt.mode == "reduce" || opt.mode == "type") {
      ResolveEnv env{&g};
      TermPtr t = parse_term(opt.expr, env);
      Fuel fuel{opt.fuel};
      if (opt.mode == "type") {
        out << print_term(infer(t, g, LocalContext{}, fuel)) << "\n";
      } else if (opt.modulo_beta && opt.witness) {
        out << print_term(reduce_with_witness(t, g, opt.fuel, out)) << "\n";
      } else if (opt.modulo_beta) {
        std::vector<StepTrace> steps;
        TermPtr nf = normalize(t, g, true, opt.fuel,
                               opt.trace ? &steps : nullptr);
        if (opt.trace)
          for (auto& s : steps) out << "  " << s.to_string() << "\n";
        out << print_term(nf) << "\n";
      } else {
        if (detail::context_has_pattern_rule(g))
          err << "note: context has pattern rules; pass --modulo-beta for "
                 "rewriting modulo beta\n";
        std::vector<StepTrace> steps;
        TermPtr nf = normalize_syntactic(t, g, fuel,
                                         opt.trace ? &steps : nullptr);
        if (opt.trace)
          for (auto& s : steps) out << "  " << s.to_string() << "\n";
        out << print_term(nf) << "\n";
      }
    }

    if (opt.report) {
      nlohmann::json j = nlohmann::json::array();
      for (auto& r : records)
        j.push_back({{"name", r.name},
                     {"status", r.status},
                     {"evidence", r.evidence},
                     {"pc_verdict", r.pc_verdict},
                     {"steps", r.steps},
                     {"millis", r.millis}});
      out << j.dump(2) << "\n";
    }
    return 0;
  } catch (const FuelExhausted& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace lpm
