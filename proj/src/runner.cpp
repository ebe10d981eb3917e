#include "fwsim/runner.hpp"

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <sstream>

#include "json.hpp"

namespace fwsim {

namespace fs = std::filesystem;

namespace {

std::vector<int> parse_int_list(const std::string& text) {
  std::vector<int> out;
  std::istringstream in(text);
  int v = 0;
  while (in >> v) out.push_back(v);
  return out;
}

std::vector<double> parse_double_list(const std::string& text) {
  std::vector<double> out;
  std::istringstream in(text);
  double v = 0.0;
  while (in >> v) out.push_back(v);
  return out;
}

std::string resolve_path(const std::string& base_dir, const std::string& path) {
  if (path.empty() || fs::path(path).is_absolute() || base_dir.empty()) return path;
  return (fs::path(base_dir) / path).string();
}

std::string effective_out_dir(const RunConfig& config, const CommandArgs& args) {
  // Environment variable overrides everything, per the interface contract.
  if (const char* env = std::getenv("FWSIM_OUT_DIR"); env != nullptr && *env != '\0') return env;
  if (!args.out_dir.empty()) return args.out_dir;
  return config.out_dir;
}

void write_meta(const fs::path& dir, const std::string& command, const RunConfig& config,
                const nlohmann::json& extra) {
  nlohmann::json meta;
  meta["version"] = kVersionStamp;
  meta["command"] = command;
  meta["seed"] = config.seed;
  meta["config_hash"] = config.config_hash;
  meta["config_snapshot"] = "config_snapshot.cfg";
  meta["result"] = extra;
  write_text_file((dir / "meta.json").string(), meta.dump(2) + "\n");
  write_text_file((dir / "config_snapshot.cfg").string(), config.snapshot);
}

RunConfig apply_overrides(RunConfig config, const CommandArgs& args) {
  if (args.seed_override >= 0) config.seed = static_cast<std::uint64_t>(args.seed_override);
  if (args.stage_override > 0) {
    config.env.episode.curriculum_stage = args.stage_override;
    config.curriculum.start_stage = args.stage_override;
    if (config.curriculum.final_stage < args.stage_override) {
      config.curriculum.final_stage = args.stage_override;
    }
  }
  config.ppo.seed = config.seed;
  return config;
}

Policy load_or_zero_policy(const std::string& path, const RobotModel& model) {
  if (path.empty()) return make_zero_policy(model);
  return load_policy(path);
}

}  // namespace

Policy make_zero_policy(const RobotModel& model) {
  ObservationBuilder probe(model.num_joints());
  Policy policy(probe.observation_dim(), model.num_joints(), {8}, 0);
  policy.actor = Mlp::zeros_like(policy.actor);
  policy.critic = Mlp::zeros_like(policy.critic);
  return policy;
}

RunConfig run_config_from_text(const std::string& text, const std::string& base_dir) {
  RunConfig config;
  config.raw = KeyValueConfig::parse(text);
  const KeyValueConfig& cfg = config.raw;

  // Model.
  const std::string model_ref = cfg.get_string_or("model.file", "default");
  if (model_ref == "default") {
    config.model = build_default_model();
  } else {
    config.model = load_model_config(resolve_path(base_dir, model_ref));
  }
  const auto issues = validate_model(config.model);
  if (!issues.empty()) {
    throw std::runtime_error("model config invalid: " + issues.front().field + ": " +
                             issues.front().message);
  }

  // Trajectory: explicit file wins, otherwise a straight stage-1 command.
  if (cfg.has("trajectory.file")) {
    config.trajectory = trajectory_spec_from_config(
        read_text_file(resolve_path(base_dir, cfg.get_string("trajectory.file"))));
  } else {
    Command cmd;
    cmd.forward_speed = cfg.get_double_or("trajectory.forward_speed_mps", 3.8);
    cmd.z_velocity = cfg.get_double_or("trajectory.z_velocity_mps", 0.0);
    cmd.yaw_rate = cfg.get_double_or("trajectory.yaw_rate_rad_s", 0.0);
    cmd.duration = cfg.get_double_or("trajectory.duration_s",
                                     cfg.get_double_or("episode.max_duration_s", 30.0));
    config.trajectory.segments.emplace_back(cmd);
  }

  // Environment & episode.
  config.env.environment.fluid_density = cfg.get_double_or("env.fluid_density_kg_m3", 1.225);
  config.env.environment.kinematic_viscosity =
      cfg.get_double_or("env.kinematic_viscosity_m2_s", 1.5e-5);
  config.env.environment.wind_velocity = cfg.get_vec3_or("env.wind_mps", Vec3::Zero());
  config.env.aero_enabled = cfg.get_bool_or("sim.aero_enabled", true);
  config.env.stochastic = cfg.get_bool_or("sim.stochastic_policy", false);
  config.env.episode.max_duration = cfg.get_double_or("episode.max_duration_s", 30.0);
  config.env.episode.position_tolerance = cfg.get_double_or("episode.position_tolerance_m", 3.0);
  config.env.episode.orientation_limit =
      cfg.get_double_or("episode.orientation_limit_rad", M_PI / 2.0);
  config.env.episode.curriculum_stage = static_cast<int>(cfg.get_int_or("episode.stage", 1));

  config.env.reward_scales.sigma_pos = cfg.get_double_or("reward.sigma_pos_m", 1.0);
  config.env.reward_scales.sigma_rates = cfg.get_double_or("reward.sigma_rates_rad_s", 3.0);
  config.env.reward_scales.sigma_level = cfg.get_double_or("reward.sigma_level_rad", 0.5);
  config.env.reward_scales.sigma_energy = cfg.get_double_or("reward.sigma_energy_w", 5.0);

  PDGains gains = default_pd_gains(config.model);
  for (int j = 0; j < config.model.num_joints(); ++j) {
    const std::string name = config.model.joints[j].name;
    gains.kp(j) = cfg.get_double_or("pd.kp." + name, gains.kp(j));
    gains.kd(j) = cfg.get_double_or("pd.kd." + name, gains.kd(j));
  }
  config.env.gains = gains;

  // Randomization ranges (Table-style defaults).
  RandomizationConfig& rand = config.env.randomization;
  rand.damping_scale_lo = cfg.get_double_or("randomization.damping_scale_lo", 0.9);
  rand.damping_scale_hi = cfg.get_double_or("randomization.damping_scale_hi", 1.1);
  rand.mass_scale_lo = cfg.get_double_or("randomization.mass_scale_lo", 0.9);
  rand.mass_scale_hi = cfg.get_double_or("randomization.mass_scale_hi", 1.1);
  rand.inertia_scale_lo = cfg.get_double_or("randomization.inertia_scale_lo", 0.9);
  rand.inertia_scale_hi = cfg.get_double_or("randomization.inertia_scale_hi", 1.1);
  rand.com_offset_lo = cfg.get_double_or("randomization.com_offset_lo_m", -0.05);
  rand.com_offset_hi = cfg.get_double_or("randomization.com_offset_hi_m", 0.05);
  rand.aero_coeff_scale_lo = cfg.get_double_or("randomization.aero_scale_lo", 0.7);
  rand.aero_coeff_scale_hi = cfg.get_double_or("randomization.aero_scale_hi", 1.3);
  rand.added_mass_scale_lo = cfg.get_double_or("randomization.added_mass_scale_lo", 0.9);
  rand.added_mass_scale_hi = cfg.get_double_or("randomization.added_mass_scale_hi", 1.1);
  rand.added_inertia_scale_lo = cfg.get_double_or("randomization.added_inertia_scale_lo", 0.9);
  rand.added_inertia_scale_hi = cfg.get_double_or("randomization.added_inertia_scale_hi", 1.1);
  rand.wind_lo = cfg.get_vec3_or("randomization.wind_lo_mps", Vec3(-2.0, -2.0, -1.5));
  rand.wind_hi = cfg.get_vec3_or("randomization.wind_hi_mps", Vec3(2.0, 2.0, 1.5));
  rand.init_position_range = cfg.get_double_or("randomization.init_position_m", 0.5);
  rand.init_velocity_range = cfg.get_double_or("randomization.init_velocity_mps", 0.5);
  config.env.randomize_dynamics = cfg.get_bool_or("randomization.enabled", false);

  // PPO.
  config.ppo.num_envs = static_cast<int>(cfg.get_int_or("train.num_envs", 16));
  config.ppo.horizon = static_cast<int>(cfg.get_int_or("train.horizon", 256));
  config.ppo.epochs = static_cast<int>(cfg.get_int_or("train.epochs", 4));
  config.ppo.minibatches = static_cast<int>(cfg.get_int_or("train.minibatches", 4));
  config.ppo.learning_rate = cfg.get_double_or("train.learning_rate", 3e-4);
  config.ppo.clip = cfg.get_double_or("train.clip", 0.2);
  config.ppo.gamma = cfg.get_double_or("train.gamma", 0.99);
  config.ppo.gae_lambda = cfg.get_double_or("train.gae_lambda", 0.95);
  config.ppo.value_coef = cfg.get_double_or("train.value_coef", 0.5);
  config.ppo.entropy_coef = cfg.get_double_or("train.entropy_coef", 0.0);
  config.ppo.max_grad_norm = cfg.get_double_or("train.max_grad_norm", 0.5);
  config.ppo.normalize_advantages = cfg.get_bool_or("train.normalize_advantages", true);
  config.ppo.parallel = cfg.get_bool_or("train.parallel", true);
  config.ppo.total_steps = cfg.get_int_or("train.total_steps", 400000);
  config.ppo.hidden = parse_int_list(cfg.get_string_or("train.hidden", "256 256"));
  if (config.ppo.hidden.empty()) throw std::runtime_error("train.hidden: empty layer list");

  // Curriculum.
  config.curriculum.start_stage = static_cast<int>(cfg.get_int_or("curriculum.start_stage", 1));
  config.curriculum.final_stage = static_cast<int>(cfg.get_int_or("curriculum.final_stage", 1));
  config.curriculum.advance_fraction = cfg.get_double_or("curriculum.advance_fraction", 0.7);
  config.curriculum.advance_window =
      static_cast<int>(cfg.get_int_or("curriculum.advance_window", 50));
  config.curriculum.stage.forward_speed =
      cfg.get_double_or("curriculum.forward_speed_mps", 3.8);
  config.curriculum.stage.speed_lo = cfg.get_double_or("curriculum.speed_lo_mps", 2.5);
  config.curriculum.stage.speed_hi = cfg.get_double_or("curriculum.speed_hi_mps", 5.0);
  config.curriculum.stage.climb_lo = cfg.get_double_or("curriculum.climb_lo_mps", -1.0);
  config.curriculum.stage.climb_hi = cfg.get_double_or("curriculum.climb_hi_mps", 1.0);
  config.curriculum.stage.yaw_rate_lo = cfg.get_double_or("curriculum.yaw_rate_lo_rad_s", -0.5);
  config.curriculum.stage.yaw_rate_hi = cfg.get_double_or("curriculum.yaw_rate_hi_rad_s", 0.5);
  config.curriculum.stage.loop_probability = cfg.get_double_or("curriculum.loop_probability", 0.1);
  config.curriculum.stage.segments = static_cast<int>(cfg.get_int_or("curriculum.segments", 10));

  // System-ID excitation.
  config.excitation.segment_duration = cfg.get_double_or("sysid.segment_duration_s", 40.0);
  config.excitation.segments = static_cast<int>(cfg.get_int_or("sysid.segments", 2));
  config.excitation.settle_time = cfg.get_double_or("sysid.settle_time_s", 4.0);
  config.excitation.amplitude = cfg.get_double_or("sysid.amplitude_m", 1.0);
  config.excitation.freq_lo = cfg.get_double_or("sysid.freq_lo_hz", 0.05);
  config.excitation.freq_hi = cfg.get_double_or("sysid.freq_hi_hz", 2.0);
  config.excitation.num_sines = static_cast<int>(cfg.get_int_or("sysid.num_sines", 6));
  config.excitation.trim_speed = cfg.get_double_or("sysid.trim_speed_mps", 3.8);

  // Sweep.
  {
    std::istringstream names(cfg.get_string_or("sweep.coefficients", ""));
    std::string name;
    while (names >> name) config.sweep.coefficients.push_back(name);
    config.sweep.scales = parse_double_list(cfg.get_string_or("sweep.scales", ""));
    const auto wind_list = parse_double_list(cfg.get_string_or("sweep.winds_mps", ""));
    for (std::size_t i = 0; i + 2 < wind_list.size(); i += 3) {
      config.sweep.winds.emplace_back(wind_list[i], wind_list[i + 1], wind_list[i + 2]);
    }
    config.sweep.episodes_per_point =
        static_cast<int>(cfg.get_int_or("sweep.episodes_per_point", 100));
  }

  config.seed = static_cast<std::uint64_t>(cfg.get_int_or("seed", 1));
  config.out_dir = cfg.get_string_or("out.dir", "out");
  config.sweep.seed = config.seed;
  config.excitation.seed = config.seed;
  config.ppo.seed = config.seed;

  config.snapshot = text;
  config.config_hash = fnv1a_hash(text);
  return config;
}

RunConfig load_run_config(const std::string& path) {
  return run_config_from_text(read_text_file(path), fs::path(path).parent_path().string());
}

Trajectory trajectory_from_config(const RunConfig& config) {
  return generate(config.trajectory);
}

std::string io_series_to_csv(const IoSeries& series) {
  CsvWriter csv({"t_s", "u_x_m", "u_y_m", "u_z_m", "y_x_m", "y_y_m", "y_z_m"});
  for (int k = 0; k < series.input.rows(); ++k) {
    csv.append_row({k / series.sample_rate, series.input(k, 0), series.input(k, 1),
                    series.input(k, 2), series.output(k, 0), series.output(k, 1),
                    series.output(k, 2)});
  }
  return csv.serialize();
}

IoSeries io_series_from_csv(const CsvTable& table) {
  IoSeries series;
  const int n = static_cast<int>(table.data.rows());
  const char* const u_cols[] = {"u_x_m", "u_y_m", "u_z_m"};
  const char* const y_cols[] = {"y_x_m", "y_y_m", "y_z_m"};
  series.input.resize(n, 3);
  series.output.resize(n, 3);
  for (int axis = 0; axis < 3; ++axis) {
    const int ui = table.column_index(u_cols[axis]);
    const int yi = table.column_index(y_cols[axis]);
    if (ui < 0 || yi < 0) throw std::runtime_error("io csv: missing u/y columns");
    series.input.col(axis) = table.data.col(ui);
    series.output.col(axis) = table.data.col(yi);
  }
  const int ti = table.column_index("t_s");
  if (ti >= 0 && n > 1) {
    series.sample_rate = 1.0 / (table.data(1, ti) - table.data(0, ti));
  }
  return series;
}

ExitCode run_simulate(const CommandArgs& args) {
  RunConfig config;
  try {
    config = apply_overrides(load_run_config(args.config_path), args);
  } catch (const std::exception& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return ExitCode::BadConfig;
  }
  try {
    Policy policy;
    try {
      policy = load_or_zero_policy(args.policy_path, config.model);
    } catch (const std::exception& e) {
      std::cerr << "checkpoint error: " << e.what() << "\n";
      return ExitCode::MissingFile;
    }
    const Trajectory trajectory = trajectory_from_config(config);
    const Rollout rollout = run_episode(policy, config.model, trajectory, config.env, config.seed);

    const fs::path dir = effective_out_dir(config, args);
    fs::create_directories(dir);
    write_text_file((dir / "rollout.csv").string(), rollout_to_csv(rollout));
    nlohmann::json extra;
    extra["termination"] = termination_name(rollout.termination);
    extra["steps"] = rollout.steps.size();
    extra["duration_s"] = rollout.duration();
    extra["total_return"] = rollout.total_return;
    write_meta(dir, "simulate", config, extra);
    std::cout << "simulate: " << rollout.steps.size() << " steps, termination "
              << termination_name(rollout.termination) << ", artifacts in " << dir.string()
              << "\n";
    return ExitCode::Ok;
  } catch (const std::exception& e) {
    std::cerr << "simulate failed: " << e.what() << "\n";
    return ExitCode::RuntimeFailure;
  }
}

ExitCode run_train(const CommandArgs& args) {
  RunConfig config;
  try {
    config = apply_overrides(load_run_config(args.config_path), args);
  } catch (const std::exception& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return ExitCode::BadConfig;
  }
  try {
    if (args.serial) config.ppo.parallel = false;
    const fs::path dir = effective_out_dir(config, args);
    fs::create_directories(dir);

    TrainSetup setup;
    setup.model = config.model;
    setup.ppo = config.ppo;
    setup.env = config.env;
    setup.curriculum = config.curriculum;
    setup.out_dir = dir.string();
    setup.config_hash = config.config_hash;

    ObservationBuilder probe(config.model.num_joints());
    Policy initial;
    if (!args.policy_path.empty()) {
      try {
        initial = load_policy(args.policy_path);
      } catch (const std::exception& e) {
        std::cerr << "checkpoint error: " << e.what() << "\n";
        return ExitCode::MissingFile;
      }
    } else {
      initial = Policy(probe.observation_dim(), config.model.num_joints(), config.ppo.hidden,
                       config.seed);
    }

    const TrainResult result = ppo_train(initial, setup);
    nlohmann::json extra;
    extra["updates"] = result.curve.size();
    extra["diverged"] = result.diverged;
    extra["final_stage"] = result.final_stage;
    if (!result.curve.empty()) {
      extra["final_mean_return"] = result.curve.back().mean_return;
      extra["final_mean_length"] = result.curve.back().mean_length;
    }
    write_meta(dir, "train", config, extra);
    std::cout << "train: " << result.curve.size() << " updates, artifacts in " << dir.string()
              << "\n";
    return result.diverged ? ExitCode::RuntimeFailure : ExitCode::Ok;
  } catch (const std::exception& e) {
    std::cerr << "train failed: " << e.what() << "\n";
    return ExitCode::RuntimeFailure;
  }
}

ExitCode run_evaluate(const CommandArgs& args) {
  RunConfig config;
  try {
    config = apply_overrides(load_run_config(args.config_path), args);
  } catch (const std::exception& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return ExitCode::BadConfig;
  }
  try {
    Policy policy;
    try {
      policy = load_or_zero_policy(args.policy_path, config.model);
    } catch (const std::exception& e) {
      std::cerr << "checkpoint error: " << e.what() << "\n";
      return ExitCode::MissingFile;
    }
    const int episodes = args.episodes_override > 0 ? args.episodes_override : 20;
    const Trajectory trajectory = trajectory_from_config(config);

    CsvWriter csv({"episode", "seed", "steps", "duration_s", "total_return", "mean_error_m",
                   "max_error_m", "final_error_m", "survived"});
    double err_sum = 0.0, len_sum = 0.0;
    int survived = 0;
    for (int e = 0; e < episodes; ++e) {
      const std::uint64_t seed = config.seed + static_cast<std::uint64_t>(e) * 1013u;
      const Rollout rollout = run_episode(policy, config.model, trajectory, config.env, seed);
      double mean_err = 0.0, max_err = 0.0;
      for (const auto& step : rollout.steps) {
        const double err = (step.state.base_position - step.target_position).norm();
        mean_err += err;
        max_err = std::max(max_err, err);
      }
      if (!rollout.steps.empty()) mean_err /= static_cast<double>(rollout.steps.size());
      const bool ok = rollout.termination == TerminationReason::Timeout;
      const double final_err =
          rollout.steps.empty()
              ? 0.0
              : (rollout.steps.back().state.base_position - rollout.steps.back().target_position)
                    .norm();
      csv.append_row({static_cast<double>(e), static_cast<double>(seed),
                      static_cast<double>(rollout.steps.size()), rollout.duration(),
                      rollout.total_return, mean_err, max_err, final_err, ok ? 1.0 : 0.0});
      err_sum += mean_err;
      len_sum += rollout.duration();
      if (ok) ++survived;
    }

    const fs::path dir = effective_out_dir(config, args);
    fs::create_directories(dir);
    csv.save((dir / "evaluation.csv").string());
    nlohmann::json extra;
    extra["episodes"] = episodes;
    extra["survival_rate"] = static_cast<double>(survived) / episodes;
    extra["mean_tracking_error_m"] = err_sum / episodes;
    extra["mean_duration_s"] = len_sum / episodes;
    write_meta(dir, "evaluate", config, extra);
    std::cout << "evaluate: survival " << survived << "/" << episodes << ", mean error "
              << err_sum / episodes << " m\n";
    return ExitCode::Ok;
  } catch (const std::exception& e) {
    std::cerr << "evaluate failed: " << e.what() << "\n";
    return ExitCode::RuntimeFailure;
  }
}

ExitCode run_sysid(const CommandArgs& args) {
  RunConfig config;
  try {
    config = apply_overrides(load_run_config(args.config_path), args);
  } catch (const std::exception& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return ExitCode::BadConfig;
  }
  try {
    std::vector<IoSeries> segments;
    int discarded = 0;
    if (!args.data_path.empty()) {
      try {
        segments.push_back(io_series_from_csv(read_csv(args.data_path)));
      } catch (const std::exception& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return ExitCode::MissingFile;
      }
    } else {
      Policy policy;
      try {
        policy = load_or_zero_policy(args.policy_path, config.model);
      } catch (const std::exception& e) {
        std::cerr << "checkpoint error: " << e.what() << "\n";
        return ExitCode::MissingFile;
      }
      PolicyClosedLoop loop(policy, config.model, config.env, config.seed);
      const CollectResult collected = collect_io_pairs(loop, config.excitation);
      segments = collected.segments;
      discarded = collected.discarded_segments;
      if (segments.empty()) {
        std::cerr << "sysid failed: every excitation segment terminated early\n";
        return ExitCode::RuntimeFailure;
      }
    }
    const TransferFunctionFit fit = fit_lti(segments);
    PoleZeroReport report;
    if (fit.valid) report = poles_zeros_classify(fit);

    const fs::path dir = effective_out_dir(config, args);
    fs::create_directories(dir);
    write_text_file((dir / "sysid.json").string(), fit_report_json(fit, report) + "\n");
    if (args.data_path.empty()) {
      write_text_file((dir / "io_pairs.csv").string(), io_series_to_csv(segments.front()));
    }
    nlohmann::json extra;
    extra["segments"] = segments.size();
    extra["discarded_segments"] = discarded;
    extra["valid"] = fit.valid;
    extra["bibo_stable"] = report.bibo_stable;
    write_meta(dir, "sysid", config, extra);
    std::cout << "sysid: valid=" << fit.valid << " bibo_stable=" << report.bibo_stable
              << " mse=" << fit.mse_raw << "\n";
    return ExitCode::Ok;
  } catch (const std::exception& e) {
    std::cerr << "sysid failed: " << e.what() << "\n";
    return ExitCode::RuntimeFailure;
  }
}

ExitCode run_sweep(const CommandArgs& args) {
  RunConfig config;
  try {
    config = apply_overrides(load_run_config(args.config_path), args);
  } catch (const std::exception& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return ExitCode::BadConfig;
  }
  try {
    Policy policy;
    try {
      policy = load_or_zero_policy(args.policy_path, config.model);
    } catch (const std::exception& e) {
      std::cerr << "checkpoint error: " << e.what() << "\n";
      return ExitCode::MissingFile;
    }
    SweepSpec sweep = config.sweep;
    if (args.episodes_override > 0) sweep.episodes_per_point = args.episodes_override;
    const auto table = success_sweep(policy, config.model, config.trajectory, sweep, config.env);

    const fs::path dir = effective_out_dir(config, args);
    fs::create_directories(dir);
    write_text_file((dir / "sweep.csv").string(), sweep_to_csv(table));
    nlohmann::json extra;
    extra["points"] = table.size();
    write_meta(dir, "sweep", config, extra);
    std::cout << "sweep: " << table.size() << " points written\n";
    return ExitCode::Ok;
  } catch (const std::exception& e) {
    std::cerr << "sweep failed: " << e.what() << "\n";
    return ExitCode::RuntimeFailure;
  }
}

ExitCode run_analyze(const CommandArgs& args) {
  RunConfig config;
  try {
    config = apply_overrides(load_run_config(args.config_path), args);
  } catch (const std::exception& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return ExitCode::BadConfig;
  }
  try {
    CsvTable table;
    try {
      table = read_csv(args.data_path);
    } catch (const std::exception& e) {
      std::cerr << "data error: " << e.what() << "\n";
      return ExitCode::MissingFile;
    }
    std::string joint = args.joint_name.empty() ? "qj1" : args.joint_name;
    const int qi = table.column_index(joint + "_rad");
    const int qdi = table.column_index(joint.substr(0, 2) + "d" + joint.substr(2) + "_rad_s");
    if (qi < 0 || qdi < 0) {
      std::cerr << "analyze: joint columns for '" << joint << "' not found\n";
      return ExitCode::BadConfig;
    }
    const VecX q = table.data.col(qi);
    const VecX qd = table.data.col(qdi);

    nlohmann::json out;
    out["joint"] = joint;
    try {
      const SpectralResult spec = spectral_analysis(q, kPolicyRateHz);
      out["spectrum"]["fundamental_hz"] = spec.fundamental_hz;
      out["spectrum"]["energy_fraction"] = spec.energy_fraction;
    } catch (const std::exception& e) {
      out["spectrum"]["error"] = e.what();
    }
    try {
      const OrbitStats orbit = phase_portrait(q, qd, kPolicyRateHz);
      out["phase"]["period_s"] = orbit.period;
      out["phase"]["closure_metric"] = orbit.closure_metric;
      out["phase"]["periodic"] = orbit.periodic;
      out["phase"]["cycles"] = orbit.cycles;
      out["phase"]["position_range_rad"] = {orbit.position_min, orbit.position_max};
      out["phase"]["velocity_range_rad_s"] = {orbit.velocity_min, orbit.velocity_max};
    } catch (const std::exception& e) {
      out["phase"]["error"] = e.what();
    }

    const fs::path dir = effective_out_dir(config, args);
    fs::create_directories(dir);
    write_text_file((dir / "analysis.json").string(), out.dump(2) + "\n");
    // Phase-plane series for external plotting.
    CsvWriter phase_csv({"q_rad", "qd_rad_s"});
    for (int k = 0; k < q.size(); ++k) phase_csv.append_row({q(k), qd(k)});
    phase_csv.save((dir / "phase.csv").string());
    write_meta(dir, "analyze", config, out);
    std::cout << "analyze: wrote analysis.json for " << joint << "\n";
    return ExitCode::Ok;
  } catch (const std::exception& e) {
    std::cerr << "analyze failed: " << e.what() << "\n";
    return ExitCode::RuntimeFailure;
  }
}

ExitCode run_export(const CommandArgs& args) {
  try {
    if (!args.policy_path.empty()) {
      Policy policy;
      try {
        policy = load_policy(args.policy_path);
      } catch (const std::exception& e) {
        std::cerr << "checkpoint error: " << e.what() << "\n";
        return ExitCode::MissingFile;
      }
      const std::string out =
          args.out_dir.empty() ? args.policy_path + ".json" : args.out_dir;
      write_text_file(out, policy_to_json(policy) + "\n");
      std::cout << "export: wrote " << out << "\n";
      return ExitCode::Ok;
    }
    if (!args.data_path.empty()) {
      // Trajectory spec -> sampled CSV.
      TrajectorySpec spec;
      try {
        spec = trajectory_spec_from_config(read_text_file(args.data_path));
      } catch (const std::exception& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return ExitCode::MissingFile;
      }
      const std::string out = args.out_dir.empty() ? args.data_path + ".csv" : args.out_dir;
      write_text_file(out, trajectory_to_csv(generate(spec)));
      std::cout << "export: wrote " << out << "\n";
      return ExitCode::Ok;
    }
    std::cerr << "export: nothing to export (need --policy or --data)\n";
    return ExitCode::Usage;
  } catch (const std::exception& e) {
    std::cerr << "export failed: " << e.what() << "\n";
    return ExitCode::RuntimeFailure;
  }
}

}  // namespace fwsim
