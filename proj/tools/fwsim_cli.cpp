#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "fwsim/runner.hpp"

using fwsim::CommandArgs;
using fwsim::ExitCode;

int main(int argc, char** argv) {
  CLI::App app{"Flapping-wing flight dynamics workbench"};
  app.set_version_flag("--version", fwsim::kVersionStamp);
  app.require_subcommand(1);

  CommandArgs args;
  auto add_common = [&args](CLI::App* cmd, bool needs_config = true) {
    auto* opt = cmd->add_option("--config", args.config_path, "run config file");
    if (needs_config) opt->required()->check(CLI::ExistingFile);
    cmd->add_option("--seed", args.seed_override, "seed override");
    cmd->add_option("--out", args.out_dir, "output directory override");
    cmd->add_option("--stage", args.stage_override, "curriculum stage override");
    cmd->add_option("--episodes", args.episodes_override, "episode count override");
    cmd->add_option("--policy", args.policy_path, "policy checkpoint");
  };

  auto* simulate = app.add_subcommand("simulate", "run one episode and log it");
  add_common(simulate);

  auto* train = app.add_subcommand("train", "PPO training run");
  add_common(train);
  train->add_flag("--serial", args.serial, "force serial (bit-reproducible) rollouts");

  auto* evaluate = app.add_subcommand("evaluate", "tracking-error report over a trajectory");
  add_common(evaluate);

  auto* sysid = app.add_subcommand("sysid", "closed-loop LTI identification");
  add_common(sysid);
  sysid->add_option("--data", args.data_path, "io-pairs csv instead of live collection");

  auto* sweep = app.add_subcommand("sweep", "success-rate sweep over coefficients/wind");
  add_common(sweep);

  auto* analyze = app.add_subcommand("analyze", "spectrum and phase portrait of a rollout");
  add_common(analyze);
  analyze->add_option("--data", args.data_path, "rollout csv")->required();
  analyze->add_option("--joint", args.joint_name, "joint column prefix (qj1..qj5)");

  auto* export_cmd = app.add_subcommand("export", "checkpoint/trajectory conversions");
  export_cmd->add_option("--policy", args.policy_path, "checkpoint to dump as json");
  export_cmd->add_option("--data", args.data_path, "trajectory spec to sample as csv");
  export_cmd->add_option("--out", args.out_dir, "output path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    // Map CLI11's exit codes onto the documented usage code (0 stays 0 for
    // --help/--version).
    return code == 0 ? 0 : static_cast<int>(ExitCode::Usage);
  }

  ExitCode code = ExitCode::Usage;
  if (simulate->parsed()) code = fwsim::run_simulate(args);
  else if (train->parsed()) code = fwsim::run_train(args);
  else if (evaluate->parsed()) code = fwsim::run_evaluate(args);
  else if (sysid->parsed()) code = fwsim::run_sysid(args);
  else if (sweep->parsed()) code = fwsim::run_sweep(args);
  else if (analyze->parsed()) code = fwsim::run_analyze(args);
  else if (export_cmd->parsed()) code = fwsim::run_export(args);
  return static_cast<int>(code);
}
