#include <cstdlib>
#include <filesystem>

#include "doctest.h"
#include "fwsim/runner.hpp"

using namespace fwsim;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

}  // namespace

TEST_CASE("run config defaults and overrides") {
  const RunConfig config = run_config_from_text(
      "seed = 9\n"
      "trajectory.forward_speed_mps = 3.0\n"
      "train.hidden = 32 32\n"
      "episode.max_duration_s = 12\n",
      "");
  CHECK(config.seed == 9);
  CHECK(config.model.num_joints() == 5);
  CHECK(config.env.episode.max_duration == 12.0);
  CHECK(config.ppo.hidden == std::vector<int>{32, 32});
  const Trajectory traj = trajectory_from_config(config);
  CHECK(traj.duration() == doctest::Approx(12.0).epsilon(0.01));
  CHECK((traj.positions().back() - Vec3(36.0, 0.0, 0.0)).norm() < 1e-9);
}

TEST_CASE("run config rejects malformed input") {
  CHECK_THROWS(run_config_from_text("train.hidden = \n", ""));
  CHECK_THROWS(run_config_from_text("model.file = /nonexistent/model.cfg\n", ""));
  CHECK_THROWS(run_config_from_text("seed : 3\n", ""));
}

TEST_CASE("simulate command writes a reproducible artifact set") {
  TempDir dir("fwsim_runner_sim");
  const std::string cfg_path = (dir.path / "run.cfg").string();
  write_text_file(cfg_path,
                  "seed = 4\nepisode.max_duration_s = 5\nsim.stochastic_policy = true\n");
  CommandArgs args;
  args.config_path = cfg_path;
  args.out_dir = (dir.path / "out_a").string();
  REQUIRE(run_simulate(args) == ExitCode::Ok);
  args.out_dir = (dir.path / "out_b").string();
  REQUIRE(run_simulate(args) == ExitCode::Ok);
  CHECK(read_text_file((dir.path / "out_a/rollout.csv").string()) ==
        read_text_file((dir.path / "out_b/rollout.csv").string()));
  CHECK(fs::exists(dir.path / "out_a/config_snapshot.cfg"));
  CHECK(fs::exists(dir.path / "out_a/meta.json"));

  // Seed override changes the outcome.
  args.seed_override = 77;
  args.out_dir = (dir.path / "out_c").string();
  REQUIRE(run_simulate(args) == ExitCode::Ok);
  CHECK(read_text_file((dir.path / "out_a/rollout.csv").string()) !=
        read_text_file((dir.path / "out_c/rollout.csv").string()));
}

TEST_CASE("command error codes are distinct") {
  TempDir dir("fwsim_runner_err");
  CommandArgs missing_cfg;
  missing_cfg.config_path = (dir.path / "nope.cfg").string();
  CHECK(run_simulate(missing_cfg) == ExitCode::BadConfig);

  const std::string bad_cfg = (dir.path / "bad.cfg").string();
  write_text_file(bad_cfg, "this is not a config\n");
  CommandArgs bad;
  bad.config_path = bad_cfg;
  CHECK(run_simulate(bad) == ExitCode::BadConfig);

  const std::string ok_cfg = (dir.path / "ok.cfg").string();
  write_text_file(ok_cfg, "seed = 1\nepisode.max_duration_s = 2\n");
  CommandArgs missing_ckpt;
  missing_ckpt.config_path = ok_cfg;
  missing_ckpt.policy_path = (dir.path / "missing.ckpt").string();
  missing_ckpt.out_dir = (dir.path / "out").string();
  CHECK(run_simulate(missing_ckpt) == ExitCode::MissingFile);
}

TEST_CASE("sysid command works on a synthetic data file") {
  TempDir dir("fwsim_runner_sysid");
  // Synthesize paper-dynamics io pairs through the public csv path.
  const Eigen::Vector4d den(1.0, 3.554, 6.438, 2.809);
  const double nums[3][3] = {
      {49.89, 164.9, 26.27}, {-0.09798, -10.07, -24.67}, {1.006, 1.020, 3.836}};
  Eigen::Matrix3d a;
  a << -den(1), -den(2), -den(3), 1, 0, 0, 0, 1, 0;
  const Eigen::Vector3d b(1, 0, 0);
  const double fs = 50.0;
  const int samples = 2500;
  const int sub = 40;
  const double h = 1.0 / fs / sub;
  IoSeries io;
  io.input.resize(samples, 3);
  io.output.resize(samples, 3);
  Rng rng(15);
  std::array<Eigen::Vector3d, 3> state{Eigen::Vector3d::Zero(), Eigen::Vector3d::Zero(),
                                       Eigen::Vector3d::Zero()};
  std::array<std::array<double, 5>, 3> freqs, phases;
  for (int axis = 0; axis < 3; ++axis) {
    for (int s = 0; s < 5; ++s) {
      freqs[axis][s] = rng.uniform(0.05, 2.0);
      phases[axis][s] = rng.uniform(0.0, 2.0 * M_PI);
    }
  }
  for (int k = 0; k < samples; ++k) {
    for (int axis = 0; axis < 3; ++axis) {
      double u = 0.0;
      for (int s = 0; s < 5; ++s) {
        u += std::sin(2.0 * M_PI * freqs[axis][s] * k / fs + phases[axis][s]);
      }
      io.input(k, axis) = u / 2.0;
      Eigen::Vector3d x = state[axis];
      io.output(k, axis) = Eigen::Vector3d(nums[axis][0], nums[axis][1], nums[axis][2]).dot(x);
      for (int s = 0; s < sub; ++s) {
        const Eigen::Vector3d k1 = a * x + b * io.input(k, axis);
        const Eigen::Vector3d k2 = a * (x + 0.5 * h * k1) + b * io.input(k, axis);
        const Eigen::Vector3d k3 = a * (x + 0.5 * h * k2) + b * io.input(k, axis);
        const Eigen::Vector3d k4 = a * (x + h * k3) + b * io.input(k, axis);
        x += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
      }
      state[axis] = x;
    }
  }
  const std::string data_path = (dir.path / "io.csv").string();
  write_text_file(data_path, io_series_to_csv(io));

  const std::string cfg_path = (dir.path / "run.cfg").string();
  write_text_file(cfg_path, "seed = 1\n");
  CommandArgs args;
  args.config_path = cfg_path;
  args.data_path = data_path;
  args.out_dir = (dir.path / "out").string();
  REQUIRE(run_sysid(args) == ExitCode::Ok);

  const std::string report = read_text_file((dir.path / "out/sysid.json").string());
  CHECK(report.find("\"bibo_stable\": true") != std::string::npos);
  CHECK(report.find("\"valid\": true") != std::string::npos);
}

TEST_CASE("analyze command reports spectrum and phase from a rollout csv") {
  TempDir dir("fwsim_runner_analyze");
  // Synthetic rollout: clean 5.3 Hz flapping on joint 1.
  std::ostringstream csv;
  csv << "t_s,qj1_rad,qjd1_rad_s\n";
  for (int k = 0; k < 500; ++k) {
    const double t = k * 0.02;
    csv << format_double(t) << "," << format_double(0.5 * std::sin(2 * M_PI * 5.3 * t)) << ","
        << format_double(0.5 * 2 * M_PI * 5.3 * std::cos(2 * M_PI * 5.3 * t)) << "\n";
  }
  const std::string data_path = (dir.path / "rollout.csv").string();
  write_text_file(data_path, csv.str());
  const std::string cfg_path = (dir.path / "run.cfg").string();
  write_text_file(cfg_path, "seed = 1\n");

  CommandArgs args;
  args.config_path = cfg_path;
  args.data_path = data_path;
  args.joint_name = "qj1";
  args.out_dir = (dir.path / "out").string();
  REQUIRE(run_analyze(args) == ExitCode::Ok);
  const std::string json = read_text_file((dir.path / "out/analysis.json").string());
  CHECK(json.find("fundamental_hz") != std::string::npos);
  CHECK(json.find("\"periodic\": true") != std::string::npos);
  CHECK(fs::exists(dir.path / "out/phase.csv"));
}

TEST_CASE("export command converts a checkpoint to json") {
  TempDir dir("fwsim_runner_export");
  Policy policy(12, 5, {8}, 3);
  const std::string ckpt = (dir.path / "p.ckpt").string();
  save_policy(policy, ckpt);
  CommandArgs args;
  args.policy_path = ckpt;
  args.out_dir = (dir.path / "p.json").string();
  REQUIRE(run_export(args) == ExitCode::Ok);
  CHECK(read_text_file((dir.path / "p.json").string()).find("fwsim-policy-v1") !=
        std::string::npos);

  CommandArgs nothing;
  CHECK(run_export(nothing) == ExitCode::Usage);
}

TEST_CASE("io series csv round trip") {
  IoSeries io;
  io.sample_rate = 50.0;
  io.input.resize(5, 3);
  io.output.resize(5, 3);
  Rng rng(2);
  for (int k = 0; k < 5; ++k) {
    for (int axis = 0; axis < 3; ++axis) {
      io.input(k, axis) = rng.normal();
      io.output(k, axis) = rng.normal();
    }
  }
  const IoSeries back = io_series_from_csv(parse_csv(io_series_to_csv(io)));
  CHECK((back.input - io.input).cwiseAbs().maxCoeff() == 0.0);
  CHECK((back.output - io.output).cwiseAbs().maxCoeff() == 0.0);
  CHECK(back.sample_rate == doctest::Approx(50.0));
}

TEST_CASE("environment variable overrides the output directory") {
  TempDir dir("fwsim_runner_env");
  const std::string cfg_path = (dir.path / "run.cfg").string();
  write_text_file(cfg_path, "seed = 2\nepisode.max_duration_s = 2\n");
  const std::string env_out = (dir.path / "env_out").string();
  setenv("FWSIM_OUT_DIR", env_out.c_str(), 1);
  CommandArgs args;
  args.config_path = cfg_path;
  args.out_dir = (dir.path / "flag_out").string();
  const ExitCode code = run_simulate(args);
  unsetenv("FWSIM_OUT_DIR");
  REQUIRE(code == ExitCode::Ok);
  CHECK(fs::exists(fs::path(env_out) / "rollout.csv"));
  CHECK_FALSE(fs::exists(dir.path / "flag_out"));
}
