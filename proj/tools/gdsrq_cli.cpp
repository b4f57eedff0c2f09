#include <iostream>

#include <CLI11.hpp>

#include "gdsrq/experiment.hpp"

namespace {

void add_common(CLI::App* cmd, gdsrq::CliOptions& o, bool overrides) {
  cmd->add_option("--config", o.config, "configuration file (key = value per line)")
      ->required()
      ->check(CLI::ExistingFile);
  cmd->add_option("--out", o.out_dir, "output directory");
  cmd->add_option("--threads", o.threads, "worker threads")->check(CLI::Range(1u, 256u));
  if (!overrides) return;
  cmd->add_option("--seed", o.seed, "override the master seed");
  cmd->add_option("--bits", o.bits, "override quantization bits (0 = no quantization)");
  cmd->add_option("--iters", o.iterations, "override the iteration count");
  cmd->add_flag("--waive-validation", o.waive_validation,
                "run even if the schedule violates the convergence conditions");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Distributed subgradient method with random quantization: simulator and checks"};
  app.require_subcommand(1);

  gdsrq::CliOptions run_opts, sweep_opts, validate_opts;
  auto* run = app.add_subcommand("run", "run one experiment and write its trajectory");
  add_common(run, run_opts, true);
  auto* sweep = app.add_subcommand("sweep", "run a parameter sweep averaged over seeds");
  add_common(sweep, sweep_opts, true);
  auto* validate = app.add_subcommand("validate", "check the stepsize and weight conditions");
  add_common(validate, validate_opts, true);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : gdsrq::kExitRuntimeError;
  }

  if (run->parsed()) return gdsrq::cli_run(run_opts, std::cout, std::cerr);
  if (sweep->parsed()) return gdsrq::cli_sweep(sweep_opts, std::cout, std::cerr);
  return gdsrq::cli_validate(validate_opts, std::cout, std::cerr);
}
