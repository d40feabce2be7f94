#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "lpm/lpm.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Type checker for the lambda-Pi-calculus modulo rewriting"};
  app.require_subcommand(1);

  lpm::DriverOptions opt;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("file", opt.file, "input file (.lpm)")->required();
    cmd->add_option("--fuel", opt.fuel, "step budget")->check(CLI::PositiveNumber);
    cmd->add_flag("--dump-hrs", opt.dump_hrs,
                  "print the encoded rewrite system after checking");
  };

  CLI::App* check = app.add_subcommand("check", "replay a file through the checker");
  add_common(check);
  check->add_flag("--strict-pc", opt.strict_pc,
                  "fail when product compatibility stays assumed");
  check->add_flag("--report", opt.report, "machine-readable per-statement report");

  CLI::App* reduce = app.add_subcommand("reduce", "normalize an expression");
  add_common(reduce);
  reduce->add_option("-e,--expr", opt.expr, "expression to reduce")->required();
  reduce->add_flag("--modulo-beta", opt.modulo_beta, "rewrite modulo beta");
  reduce->add_flag("--trace", opt.trace, "print every step");
  reduce->add_flag("--witness", opt.witness,
                   "print the lifting witness of every modulo step");

  CLI::App* type = app.add_subcommand("type", "infer the type of an expression");
  add_common(type);
  type->add_option("-e,--expr", opt.expr, "expression to type")->required();

  CLI11_PARSE(app, argc, argv);

  if (check->parsed()) opt.mode = "check";
  if (reduce->parsed()) opt.mode = "reduce";
  if (type->parsed()) opt.mode = "type";
  if (opt.witness) opt.modulo_beta = true;

  return lpm::run_driver(opt, std::cout, std::cerr);
}
