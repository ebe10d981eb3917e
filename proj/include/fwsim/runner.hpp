#pragma once

#include <string>
#include <vector>

#include "fwsim/analysis.hpp"
#include "fwsim/io.hpp"
#include "fwsim/training.hpp"

namespace fwsim {

inline constexpr const char* kVersionStamp = "fwsim 1.0.0";

/// Distinct process exit codes, one per failure class.
enum class ExitCode : int {
  Ok = 0,
  Usage = 2,
  BadConfig = 3,
  MissingFile = 4,
  RuntimeFailure = 5,
};

/// One fully-parsed run: every experiment is determined by a single config
/// file plus the seed; artifacts always carry a snapshot of both.
struct RunConfig {
  KeyValueConfig raw;
  RobotModel model;
  TrajectorySpec trajectory;
  EnvOptions env;
  PpoConfig ppo;
  CurriculumConfig curriculum;
  ExcitationSpec excitation;
  SweepSpec sweep;
  std::uint64_t seed = 1;
  std::string out_dir = "out";
  std::string snapshot;  // canonical config text
  std::uint64_t config_hash = 0;
};

/// Parses and validates a run config; referenced files must exist.
/// Throws std::runtime_error with a message naming the offending key.
RunConfig load_run_config(const std::string& path);
RunConfig run_config_from_text(const std::string& text, const std::string& base_dir);

struct CommandArgs {
  std::string config_path;
  std::string policy_path;   // checkpoint, when a command needs one
  std::string data_path;     // csv input for sysid/analyze
  std::string out_dir;       // overrides config out_dir; env var overrides both
  std::string joint_name;    // analyze
  long seed_override = -1;
  int stage_override = -1;
  int episodes_override = -1;
  bool serial = false;
};

ExitCode run_simulate(const CommandArgs& args);
ExitCode run_train(const CommandArgs& args);
ExitCode run_evaluate(const CommandArgs& args);
ExitCode run_sysid(const CommandArgs& args);
ExitCode run_sweep(const CommandArgs& args);
ExitCode run_analyze(const CommandArgs& args);
ExitCode run_export(const CommandArgs& args);

/// Shared helpers the commands and tests build on.
Trajectory trajectory_from_config(const RunConfig& config);
Policy make_zero_policy(const RobotModel& model);
std::string io_series_to_csv(const IoSeries& series);
IoSeries io_series_from_csv(const CsvTable& table);

}  // namespace fwsim
