#include <cmath>
#include <cstdio>

#include "doctest.h"
#include "fwsim/control.hpp"

using namespace fwsim;

namespace {

double filter_gain_at(double f_hz) {
  LowPassFilter filter(1, kFilterCutoffHz, kPolicyRateHz);
  filter.reset();
  const int warm = 400, measure = 1000;
  VecX out(measure);
  for (int k = 0; k < warm + measure; ++k) {
    VecX u(1);
    u(0) = std::sin(2.0 * M_PI * f_hz * k / kPolicyRateHz);
    const VecX y = filter.apply(u);
    if (k >= warm) out(k - warm) = y(0);
  }
  // Phase-insensitive amplitude via quadrature projection.
  double cs = 0.0, sn = 0.0;
  for (int k = 0; k < measure; ++k) {
    const double ph = 2.0 * M_PI * f_hz * (warm + k) / kPolicyRateHz;
    cs += out(k) * std::cos(ph);
    sn += out(k) * std::sin(ph);
  }
  return 2.0 * std::hypot(cs, sn) / measure;
}

}  // namespace

TEST_CASE("low-pass filter has unit DC gain") {
  LowPassFilter filter(2, kFilterCutoffHz, kPolicyRateHz);
  filter.reset();
  VecX u(2);
  u << 0.7, -0.3;
  VecX y;
  for (int k = 0; k < 500; ++k) y = filter.apply(u);
  CHECK(y(0) == doctest::Approx(0.7).epsilon(1e-9));
  CHECK(y(1) == doctest::Approx(-0.3).epsilon(1e-9));
}

TEST_CASE("filter attenuation is about 3 dB at the cutoff") {
  const double gain = filter_gain_at(7.0);
  const double db = -20.0 * std::log10(gain);
  CHECK(db > 2.5);
  CHECK(db < 3.5);
}

TEST_CASE("filter attenuation is monotonic up to Nyquist") {
  double prev = filter_gain_at(0.5);
  for (double f = 1.0; f <= 24.5; f += 0.5) {
    const double g = filter_gain_at(f);
    CHECK(g < prev + 1e-9);
    prev = g;
  }
}

TEST_CASE("filter linearity with matched initial states") {
  LowPassFilter fa(1, 7.0, 50.0), fb(1, 7.0, 50.0), fsum(1, 7.0, 50.0);
  fa.reset();
  fb.reset();
  fsum.reset();
  Rng rng(5);
  for (int k = 0; k < 200; ++k) {
    VecX a(1), b(1);
    a(0) = rng.normal();
    b(0) = rng.normal();
    const double ya = fa.apply(a)(0);
    const double yb = fb.apply(b)(0);
    const double ys = fsum.apply(a + b)(0);
    CHECK(ys == doctest::Approx(ya + yb).epsilon(1e-12));
  }
}

TEST_CASE("action mapper converges to the mapped raw action") {
  const RobotModel model = build_default_model();
  ActionMapper mapper(model);
  mapper.reset();
  VecX raw = VecX::Zero(5);
  raw << 0.5, -1.0, 0.25, 1.0, -0.5;
  VecX target;
  for (int k = 0; k < 400; ++k) target = mapper.target_positions(raw);
  for (int j = 0; j < 5; ++j) {
    const double half = std::min(model.joints[j].pos_upper, -model.joints[j].pos_lower);
    CHECK(target(j) == doctest::Approx(raw(j) * half).epsilon(1e-6));
  }

  // Zero action after convergence = nominal pose.
  mapper.reset();
  for (int k = 0; k < 400; ++k) target = mapper.target_positions(VecX::Zero(5));
  CHECK(target.cwiseAbs().maxCoeff() < 1e-12);

  // Out-of-range input is clamped before filtering.
  mapper.reset();
  VecX big = VecX::Constant(5, 10.0);
  for (int k = 0; k < 500; ++k) target = mapper.target_positions(big);
  for (int j = 0; j < 5; ++j) {
    CHECK(target(j) <= model.joints[j].pos_upper + 1e-9);
  }
}

TEST_CASE("pd torque formula and clamping") {
  const RobotModel model = build_default_model();
  SimState s = make_initial_state(model);
  PDGains gains;
  gains.kp = VecX::Constant(5, 5.0);
  gains.kd = VecX::Zero(5);

  CHECK(pd_torque(s.joint_positions, s, gains, model).cwiseAbs().maxCoeff() == 0.0);

  VecX target = VecX::Zero(5);
  target(0) = 1.0;
  const VecX tau = pd_torque(target, s, gains, model);
  CHECK(tau(0) == doctest::Approx(5.0));

  gains.kp(1) = 1e9;
  target(1) = 1.0;
  const VecX clamped = pd_torque(target, s, gains, model);
  CHECK(clamped(1) == doctest::Approx(model.joints[1].torque_limit));

  gains.kd(2) = 2.0;
  s.joint_velocities(2) = 1.5;
  const VecX damped = pd_torque(VecX::Zero(5), s, gains, model);
  CHECK(damped(2) == doctest::Approx(-3.0));
}

TEST_CASE("pitot reads body-frame airspeed") {
  const RobotModel model = build_default_model();
  SimState s = make_initial_state(model);
  s.base_linear_velocity = Vec3(3.8, 0.0, 0.0);
  CHECK(pitot_reading(s, Vec3::Zero()) == doctest::Approx(3.8));
  CHECK(pitot_reading(s, Vec3(-2.0, 0.0, 0.0)) == doctest::Approx(5.8));
  s.base_orientation = quat_from_euler_zyx({0.0, 0.0, M_PI / 2});
  s.base_linear_velocity = Vec3(0.0, 2.5, 0.0);  // flying along +y, nose +y
  CHECK(pitot_reading(s, Vec3::Zero()) == doctest::Approx(2.5));
}

TEST_CASE("observation layout, zero padding and dimensions") {
  const RobotModel model = build_default_model();
  ObservationBuilder builder(model.num_joints());
  CHECK(builder.frame_dim() == 18);
  CHECK(builder.observation_dim() == 25 * 18 + 90);

  TrajectorySpec spec;
  spec.segments.emplace_back(Command{3.0, 0.0, 0.0, 5.0});
  const Trajectory traj = generate(spec, 0.02);

  SimState s = make_initial_state(model);
  s.base_position = traj.position_at(1.0);
  s.base_linear_velocity = Vec3(3.0, 0.0, 0.0);
  builder.push(s, Vec3::Zero(), VecX::Zero(5));
  const VecX obs = builder.assemble(traj, 1.0, s);
  REQUIRE(obs.size() == 540);

  // Frames before the first push stay zero (oldest first).
  CHECK(obs.head(24 * 18).cwiseAbs().maxCoeff() == 0.0);
  // Newest frame: quaternion w, rates, joints, pitot, prev action.
  const int off = 24 * 18;
  CHECK(obs(off + 0) == doctest::Approx(1.0));  // quat w
  CHECK(obs(off + 12) == doctest::Approx(3.0)); // pitot
  // Lookahead block: straight-ahead offsets.
  CHECK(obs(off + 18) == doctest::Approx(3.0 * 0.02).epsilon(1e-9));

  // Rolling: after 30 pushes, history holds the latest 25.
  for (int k = 0; k < 30; ++k) {
    VecX a = VecX::Constant(5, static_cast<double>(k));
    builder.push(s, Vec3::Zero(), a);
  }
  const VecX obs2 = builder.assemble(traj, 1.0, s);
  // Oldest retained frame corresponds to push k = 5 (action entries at 13..17).
  CHECK(obs2(13) == doctest::Approx(5.0));
  // Newest frame is k = 29.
  CHECK(obs2(24 * 18 + 13) == doctest::Approx(29.0));
}

TEST_CASE("normalizer round trip and clamping") {
  ObsNormalizer norm(3);
  Rng rng(9);
  std::vector<VecX> batch;
  for (int i = 0; i < 500; ++i) {
    VecX x(3);
    x << 5.0 + rng.normal(), -2.0 + 3.0 * rng.normal(), 100.0 * rng.normal();
    batch.push_back(x);
  }
  norm.update(batch);
  CHECK(norm.mean(0) == doctest::Approx(5.0).epsilon(0.1));
  for (const auto& x : batch) {
    const VecX z = norm.normalize(x);
    const VecX back = norm.denormalize(z);
    CHECK((back - x).cwiseAbs().maxCoeff() < 1e-6 * std::max(1.0, x.cwiseAbs().maxCoeff()));
  }
  // Clamp kicks in for wild outliers.
  VecX wild(3);
  wild << 1e9, 0.0, 0.0;
  CHECK(norm.normalize(wild)(0) == doctest::Approx(norm.clip));
}

TEST_CASE("mlp forward, zero weights, determinism") {
  Rng rng(17);
  Mlp net({6, 16, 16, 3}, rng);
  VecX x(6);
  x << 0.1, -0.2, 0.3, 0.7, -0.5, 0.0;
  const VecX y1 = net.forward(x);
  const VecX y2 = net.forward(x);
  CHECK((y1 - y2).norm() == 0.0);

  Mlp zeros = Mlp::zeros_like(net);
  CHECK(zeros.forward(x).cwiseAbs().maxCoeff() == 0.0);

  // Batched forward agrees with the single-sample path.
  MatX xs(6, 4);
  for (int c = 0; c < 4; ++c) xs.col(c) = x * (c + 1) * 0.2;
  const MatX ys = net.forward_batch(xs);
  for (int c = 0; c < 4; ++c) {
    CHECK((ys.col(c) - net.forward(xs.col(c))).cwiseAbs().maxCoeff() < 1e-14);
  }
}

TEST_CASE("mlp backward matches finite differences") {
  Rng rng(23);
  Mlp net({4, 8, 2}, rng);
  VecX x(4);
  x << 0.3, -0.1, 0.5, 0.2;
  VecX grad_out(2);
  grad_out << 1.0, -0.5;

  Mlp::Workspace ws;
  net.forward_cached(x, ws);
  Mlp grads = Mlp::zeros_like(net);
  const VecX grad_in = net.backward(ws, grad_out, grads);

  // Scalar objective J = grad_out . f(x); check dJ/dparams and dJ/dx.
  const double h = 1e-6;
  auto objective = [&](const Mlp& m, const VecX& xin) { return grad_out.dot(m.forward(xin)); };
  int off = 0;
  VecX flat(net.parameter_count());
  net.flatten_into(flat, off);
  off = 0;
  VecX gflat(net.parameter_count());
  grads.flatten_into(gflat, off);
  Rng pick(31);
  for (int trial = 0; trial < 40; ++trial) {
    const int idx = static_cast<int>(pick.uniform01() * net.parameter_count());
    Mlp plus = net, minus = net;
    VecX fp = flat, fm = flat;
    fp(idx) += h;
    fm(idx) -= h;
    off = 0;
    plus.unflatten_from(fp, off);
    off = 0;
    minus.unflatten_from(fm, off);
    const double fd = (objective(plus, x) - objective(minus, x)) / (2.0 * h);
    CHECK(gflat(idx) == doctest::Approx(fd).epsilon(1e-5));
  }
  for (int i = 0; i < 4; ++i) {
    VecX xp = x, xm = x;
    xp(i) += h;
    xm(i) -= h;
    const double fd = (objective(net, xp) - objective(net, xm)) / (2.0 * h);
    CHECK(grad_in(i) == doctest::Approx(fd).epsilon(1e-5));
  }
}

TEST_CASE("policy forward: squashing, determinism, dimension check") {
  Policy policy(12, 3, {16, 16}, 99);
  Rng rng(3);
  VecX obs(12);
  for (int i = 0; i < 12; ++i) obs(i) = rng.normal();
  const PolicyOutput a = policy.forward(obs);
  for (int i = 0; i < 100; ++i) {
    const PolicyOutput b = policy.forward(obs);
    CHECK((a.mean - b.mean).norm() == 0.0);
    CHECK(a.value == b.value);
  }
  CHECK(a.mean.cwiseAbs().maxCoeff() <= 1.0);
  CHECK((a.std.array() > 0.0).all());
  CHECK_THROWS_AS(policy.forward(VecX::Zero(5)), std::invalid_argument);

  // Zero weights: zero pre-squash mean, constant value.
  Policy zero = policy;
  zero.actor = Mlp::zeros_like(policy.actor);
  zero.critic = Mlp::zeros_like(policy.critic);
  const PolicyOutput z = zero.forward(obs);
  CHECK(z.mean.cwiseAbs().maxCoeff() == 0.0);
  CHECK(z.value == 0.0);
}

TEST_CASE("policy output perturbation bounded by the spectral-norm Lipschitz constant") {
  Policy policy(10, 4, {12, 12}, 7);
  // Lipschitz bound: product of layer spectral norms (tanh and the output
  // squash are 1-Lipschitz).
  double lipschitz = 1.0;
  for (const auto& layer : policy.actor.layers) {
    Eigen::JacobiSVD<MatX> svd(layer.weight);
    lipschitz *= svd.singularValues()(0);
  }
  Rng rng(13);
  VecX obs(10);
  for (int i = 0; i < 10; ++i) obs(i) = rng.normal();
  const PolicyOutput base = policy.forward(obs);
  for (int trial = 0; trial < 50; ++trial) {
    const int idx = static_cast<int>(rng.uniform01() * 10);
    const double eps = rng.uniform(1e-4, 1e-2);
    VecX pert = obs;
    pert(idx) += eps;
    const PolicyOutput out = policy.forward(pert);
    CHECK((out.mean - base.mean).norm() <= lipschitz * eps * (1.0 + 1e-9));
  }
}

TEST_CASE("policy checkpoint round trip") {
  Policy policy(8, 2, {6}, 5);
  policy.config_hash = 0xDEADBEEFCAFEBABEull;
  std::vector<VecX> batch;
  Rng rng(1);
  for (int i = 0; i < 32; ++i) {
    VecX x(8);
    for (int k = 0; k < 8; ++k) x(k) = rng.normal() * 3.0 + 1.0;
    batch.push_back(x);
  }
  policy.normalizer.update(batch);

  const std::string path = "/tmp/fwsim_test_policy.ckpt";
  save_policy(policy, path);
  const Policy back = load_policy(path);
  CHECK(back.config_hash == policy.config_hash);
  CHECK(back.obs_dim() == 8);
  CHECK(back.action_dim() == 2);
  CHECK((back.log_std - policy.log_std).norm() == 0.0);
  CHECK((back.normalizer.mean - policy.normalizer.mean).norm() == 0.0);
  CHECK(back.normalizer.count == policy.normalizer.count);
  VecX obs(8);
  for (int k = 0; k < 8; ++k) obs(k) = 0.3 * k;
  const PolicyOutput a = policy.forward(obs);
  const PolicyOutput b = back.forward(obs);
  CHECK((a.mean - b.mean).norm() == 0.0);
  CHECK(a.value == b.value);

  const std::string json = policy_to_json(back);
  CHECK(json.find("fwsim-policy-v1") != std::string::npos);
  std::remove(path.c_str());
  CHECK_THROWS(load_policy(path));
}
