#include "fwsim/control.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace fwsim {

PDGains default_pd_gains(const RobotModel& model) {
  PDGains g;
  const int nj = model.num_joints();
  g.kp = VecX::Constant(nj, 5.0);
  g.kd = VecX::Constant(nj, 0.1);
  for (int j = 0; j < nj; ++j) {
    const std::string& name = model.joints[j].name;
    if (name.rfind("flap", 0) == 0) {
      g.kp(j) = 20.0;
      g.kd(j) = 0.15;
    } else if (name.rfind("pitch", 0) == 0) {
      // Must out-stiffen the aerodynamic pitch-divergence moment on the
      // feathering axis at flight speed.
      g.kp(j) = 4.0;
      g.kd(j) = 0.02;
    } else if (name.rfind("tail", 0) == 0) {
      g.kp(j) = 4.0;
      g.kd(j) = 0.03;
    }
  }
  return g;
}

VecX pd_torque(const VecX& target_positions, const SimState& state, const PDGains& gains,
               const RobotModel& model) {
  const int nj = model.num_joints();
  if (target_positions.size() != nj) throw std::invalid_argument("pd_torque: target size mismatch");
  VecX tau(nj);
  for (int j = 0; j < nj; ++j) {
    const double raw = gains.kp(j) * (target_positions(j) - state.joint_positions(j)) -
                       gains.kd(j) * state.joint_velocities(j);
    tau(j) = std::clamp(raw, -model.joints[j].torque_limit, model.joints[j].torque_limit);
  }
  return tau;
}

LowPassFilter::LowPassFilter(int channels, double cutoff_hz, double sample_rate_hz)
    : state_(VecX::Zero(channels)) {
  if (!(cutoff_hz > 0.0) || !(sample_rate_hz > 0.0)) {
    throw std::invalid_argument("LowPassFilter: rates must be positive");
  }
  alpha_ = std::exp(-2.0 * M_PI * cutoff_hz / sample_rate_hz);
}

void LowPassFilter::reset() {
  state_.setZero();
  primed_ = true;  // zero initial state is a valid filter state
}

void LowPassFilter::reset_to(const VecX& value) {
  state_ = value;
  primed_ = true;
}

VecX LowPassFilter::apply(const VecX& input) {
  if (input.size() != state_.size()) throw std::invalid_argument("LowPassFilter: size mismatch");
  state_ = alpha_ * state_ + (1.0 - alpha_) * input;
  return state_;
}

ActionMapper::ActionMapper(const RobotModel& model, double cutoff_hz, double sample_rate_hz)
    : filter_(model.num_joints(), cutoff_hz, sample_rate_hz) {
  const int nj = model.num_joints();
  center_ = VecX::Zero(nj);  // nominal pose: wings and tail flat
  half_range_ = VecX::Zero(nj);
  for (int j = 0; j < nj; ++j) {
    half_range_(j) = std::min(model.joints[j].pos_upper - center_(j),
                              center_(j) - model.joints[j].pos_lower);
  }
}

void ActionMapper::reset() { filter_.reset(); }

VecX ActionMapper::map_only(const VecX& filtered_action) const {
  return center_ + half_range_.cwiseProduct(filtered_action);
}

VecX ActionMapper::target_positions(const VecX& raw_action) {
  const VecX clamped = raw_action.cwiseMax(-1.0).cwiseMin(1.0);
  return map_only(filter_.apply(clamped));
}

double pitot_reading(const SimState& state, const Vec3& wind) {
  const Vec3 v_air_world = state.base_linear_velocity - wind;
  return (state.base_orientation.normalized().toRotationMatrix().transpose() * v_air_world).x();
}

ObservationBuilder::ObservationBuilder(int num_joints)
    : num_joints_(num_joints), frame_dim_(4 + 3 + num_joints + 1 + num_joints) {}

int ObservationBuilder::observation_dim() const {
  return kHistorySteps * frame_dim_ + 3 * kLookaheadSteps;
}

void ObservationBuilder::reset() { frames_.clear(); }

void ObservationBuilder::push(const SimState& state, const Vec3& wind, const VecX& prev_action) {
  if (prev_action.size() != num_joints_) {
    throw std::invalid_argument("ObservationBuilder: action size mismatch");
  }
  VecX frame(frame_dim_);
  const Quat q = state.base_orientation.normalized();
  frame(0) = q.w();
  frame(1) = q.x();
  frame(2) = q.y();
  frame(3) = q.z();
  frame.segment<3>(4) = state.base_angular_velocity;
  frame.segment(7, num_joints_) = state.joint_positions;
  frame(7 + num_joints_) = pitot_reading(state, wind);
  frame.segment(8 + num_joints_, num_joints_) = prev_action;
  frames_.push_back(std::move(frame));
  while (frames_.size() > static_cast<std::size_t>(kHistorySteps)) frames_.pop_front();
}

VecX ObservationBuilder::assemble(const Trajectory& trajectory, double t,
                                  const SimState& state) const {
  VecX obs = VecX::Zero(observation_dim());
  // History block, oldest first; missing leading frames stay zero.
  const int missing = kHistorySteps - static_cast<int>(frames_.size());
  for (std::size_t i = 0; i < frames_.size(); ++i) {
    obs.segment((missing + static_cast<int>(i)) * frame_dim_, frame_dim_) = frames_[i];
  }
  const auto points = lookahead_window(trajectory, t, state);
  for (int k = 0; k < kLookaheadSteps; ++k) {
    obs.segment(kHistorySteps * frame_dim_ + 3 * k, 3) = points[static_cast<std::size_t>(k)];
  }
  return obs;
}

VecX ObsNormalizer::normalize(const VecX& raw) const {
  if (count <= 0.0) return raw.cwiseMax(-clip).cwiseMin(clip);
  const VecX sd = var.cwiseMax(1e-8).cwiseSqrt();
  return ((raw - mean).cwiseQuotient(sd)).cwiseMax(-clip).cwiseMin(clip);
}

VecX ObsNormalizer::denormalize(const VecX& normalized) const {
  if (count <= 0.0) return normalized;
  const VecX sd = var.cwiseMax(1e-8).cwiseSqrt();
  return normalized.cwiseProduct(sd) + mean;
}

void ObsNormalizer::update(const std::vector<VecX>& batch) {
  for (const VecX& x : batch) {
    count += 1.0;
    const VecX delta = x - mean;
    mean += delta / count;
    const VecX delta2 = x - mean;
    // Running population variance via Welford's M2 recurrence.
    var = ((count - 1.0) * var + delta.cwiseProduct(delta2)) / count;
  }
}

Mlp::Mlp(const std::vector<int>& sizes, Rng& rng, double output_scale) {
  if (sizes.size() < 2) throw std::invalid_argument("Mlp: need at least input and output sizes");
  for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
    MlpLayer layer;
    layer.weight.resize(sizes[l + 1], sizes[l]);
    const double scale = std::sqrt(2.0 / static_cast<double>(sizes[l]));
    for (int r = 0; r < layer.weight.rows(); ++r) {
      for (int c = 0; c < layer.weight.cols(); ++c) layer.weight(r, c) = scale * rng.normal();
    }
    if (l + 2 == sizes.size()) layer.weight *= output_scale;
    layer.bias = VecX::Zero(sizes[l + 1]);
    layers.push_back(std::move(layer));
  }
}

VecX Mlp::forward(const VecX& input) const {
  VecX x = input;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    x = layers[l].weight * x + layers[l].bias;
    if (l + 1 < layers.size()) x = x.array().tanh().matrix();
  }
  return x;
}

VecX Mlp::forward_cached(const VecX& input, Workspace& ws) const {
  ws.inputs.assign(layers.size(), VecX());
  VecX x = input;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    ws.inputs[l] = x;
    x = layers[l].weight * x + layers[l].bias;
    if (l + 1 < layers.size()) x = x.array().tanh().matrix();
  }
  return x;
}

VecX Mlp::backward(const Workspace& ws, const VecX& grad_output, Mlp& grads) const {
  VecX g = grad_output;
  for (int l = static_cast<int>(layers.size()) - 1; l >= 0; --l) {
    const auto lu = static_cast<std::size_t>(l);
    if (lu + 1 < layers.size()) {
      // g arrives w.r.t. tanh output; ws.inputs[l+1] holds that output.
      const VecX& act = ws.inputs[lu + 1];
      g = g.cwiseProduct((1.0 - act.array().square()).matrix());
    }
    grads.layers[lu].weight.noalias() += g * ws.inputs[lu].transpose();
    grads.layers[lu].bias += g;
    g = layers[lu].weight.transpose() * g;
  }
  return g;
}

MatX Mlp::forward_batch(const MatX& inputs) const {
  MatX x = inputs;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    x = (layers[l].weight * x).colwise() + layers[l].bias;
    if (l + 1 < layers.size()) x = x.array().tanh().matrix();
  }
  return x;
}

MatX Mlp::forward_batch_cached(const MatX& inputs, BatchWorkspace& ws) const {
  ws.inputs.assign(layers.size(), MatX());
  MatX x = inputs;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    ws.inputs[l] = x;
    x = (layers[l].weight * x).colwise() + layers[l].bias;
    if (l + 1 < layers.size()) x = x.array().tanh().matrix();
  }
  return x;
}

MatX Mlp::backward_batch(const BatchWorkspace& ws, const MatX& grad_outputs, Mlp& grads) const {
  MatX g = grad_outputs;
  for (int l = static_cast<int>(layers.size()) - 1; l >= 0; --l) {
    const auto lu = static_cast<std::size_t>(l);
    if (lu + 1 < layers.size()) {
      const MatX& act = ws.inputs[lu + 1];
      g = g.cwiseProduct((1.0 - act.array().square()).matrix());
    }
    grads.layers[lu].weight.noalias() += g * ws.inputs[lu].transpose();
    grads.layers[lu].bias += g.rowwise().sum();
    g = layers[lu].weight.transpose() * g;
  }
  return g;
}

Mlp Mlp::zeros_like(const Mlp& other) {
  Mlp z;
  z.layers.reserve(other.layers.size());
  for (const auto& layer : other.layers) {
    MlpLayer zl;
    zl.weight = MatX::Zero(layer.weight.rows(), layer.weight.cols());
    zl.bias = VecX::Zero(layer.bias.size());
    z.layers.push_back(std::move(zl));
  }
  return z;
}

int Mlp::parameter_count() const {
  int n = 0;
  for (const auto& layer : layers) {
    n += static_cast<int>(layer.weight.size() + layer.bias.size());
  }
  return n;
}

void Mlp::flatten_into(VecX& out, int& offset) const {
  for (const auto& layer : layers) {
    Eigen::Map<const VecX> w(layer.weight.data(), layer.weight.size());
    out.segment(offset, w.size()) = w;
    offset += static_cast<int>(w.size());
    out.segment(offset, layer.bias.size()) = layer.bias;
    offset += static_cast<int>(layer.bias.size());
  }
}

void Mlp::unflatten_from(const VecX& in, int& offset) {
  for (auto& layer : layers) {
    Eigen::Map<VecX> w(layer.weight.data(), layer.weight.size());
    w = in.segment(offset, w.size());
    offset += static_cast<int>(w.size());
    layer.bias = in.segment(offset, layer.bias.size());
    offset += static_cast<int>(layer.bias.size());
  }
}

Policy::Policy(int obs_dim, int action_dim, const std::vector<int>& hidden, std::uint64_t seed)
    : obs_dim_(obs_dim), action_dim_(action_dim) {
  Rng rng(seed);
  std::vector<int> actor_sizes{obs_dim};
  actor_sizes.insert(actor_sizes.end(), hidden.begin(), hidden.end());
  actor_sizes.push_back(action_dim);
  actor = Mlp(actor_sizes, rng, 0.01);

  std::vector<int> critic_sizes{obs_dim};
  critic_sizes.insert(critic_sizes.end(), hidden.begin(), hidden.end());
  critic_sizes.push_back(1);
  critic = Mlp(critic_sizes, rng, 1.0);

  log_std = VecX::Constant(action_dim, std::log(0.5));
  normalizer = ObsNormalizer(obs_dim);
}

PolicyOutput Policy::forward(const VecX& raw_observation) const {
  if (raw_observation.size() != obs_dim_) {
    throw std::invalid_argument("Policy::forward: observation dimension mismatch");
  }
  const VecX obs = normalizer.normalize(raw_observation);
  PolicyOutput out;
  out.mean = actor.forward(obs).array().tanh().matrix();
  out.std = log_std.array().exp().matrix();
  out.value = critic.forward(obs)(0);
  return out;
}

VecX Policy::sample_action(const VecX& raw_observation, Rng& rng) const {
  const PolicyOutput out = forward(raw_observation);
  VecX a(action_dim_);
  for (int i = 0; i < action_dim_; ++i) a(i) = out.mean(i) + out.std(i) * rng.normal();
  return a;
}

namespace {

constexpr std::uint32_t kCheckpointMagic = 0x4657434bu;  // "FWCK"
constexpr std::uint32_t kCheckpointVersion = 1;

void write_u32(std::ostream& out, std::uint32_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}
void write_u64(std::ostream& out, std::uint64_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}
void write_vec(std::ostream& out, const VecX& v) {
  write_u32(out, static_cast<std::uint32_t>(v.size()));
  out.write(reinterpret_cast<const char*>(v.data()),
            static_cast<std::streamsize>(sizeof(double) * v.size()));
}
void write_mlp(std::ostream& out, const Mlp& mlp) {
  write_u32(out, static_cast<std::uint32_t>(mlp.layers.size()));
  for (const auto& layer : mlp.layers) {
    write_u32(out, static_cast<std::uint32_t>(layer.weight.rows()));
    write_u32(out, static_cast<std::uint32_t>(layer.weight.cols()));
    out.write(reinterpret_cast<const char*>(layer.weight.data()),
              static_cast<std::streamsize>(sizeof(double) * layer.weight.size()));
    write_vec(out, layer.bias);
  }
}

std::uint32_t read_u32(std::istream& in) {
  std::uint32_t v = 0;
  in.read(reinterpret_cast<char*>(&v), sizeof(v));
  return v;
}
std::uint64_t read_u64(std::istream& in) {
  std::uint64_t v = 0;
  in.read(reinterpret_cast<char*>(&v), sizeof(v));
  return v;
}
VecX read_vec(std::istream& in) {
  const auto n = read_u32(in);
  VecX v(n);
  in.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(sizeof(double) * n));
  return v;
}
Mlp read_mlp(std::istream& in) {
  Mlp mlp;
  const auto n_layers = read_u32(in);
  for (std::uint32_t l = 0; l < n_layers; ++l) {
    MlpLayer layer;
    const auto rows = read_u32(in);
    const auto cols = read_u32(in);
    layer.weight.resize(rows, cols);
    in.read(reinterpret_cast<char*>(layer.weight.data()),
            static_cast<std::streamsize>(sizeof(double) * layer.weight.size()));
    layer.bias = read_vec(in);
    mlp.layers.push_back(std::move(layer));
  }
  return mlp;
}

}  // namespace

void save_policy(const Policy& policy, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write checkpoint: " + path);
  write_u32(out, kCheckpointMagic);
  write_u32(out, kCheckpointVersion);
  write_u64(out, policy.config_hash);
  write_u32(out, static_cast<std::uint32_t>(policy.obs_dim()));
  write_u32(out, static_cast<std::uint32_t>(policy.action_dim()));
  write_mlp(out, policy.actor);
  write_mlp(out, policy.critic);
  write_vec(out, policy.log_std);
  write_vec(out, policy.normalizer.mean);
  write_vec(out, policy.normalizer.var);
  out.write(reinterpret_cast<const char*>(&policy.normalizer.count), sizeof(double));
  out.write(reinterpret_cast<const char*>(&policy.normalizer.clip), sizeof(double));
}

Policy load_policy(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint: " + path);
  if (read_u32(in) != kCheckpointMagic) throw std::runtime_error("bad checkpoint magic: " + path);
  if (read_u32(in) != kCheckpointVersion) {
    throw std::runtime_error("unsupported checkpoint version: " + path);
  }
  const std::uint64_t hash = read_u64(in);
  const int obs_dim = static_cast<int>(read_u32(in));
  const int action_dim = static_cast<int>(read_u32(in));
  Policy policy(obs_dim, action_dim, {1}, 0);
  policy.actor = read_mlp(in);
  policy.critic = read_mlp(in);
  policy.log_std = read_vec(in);
  policy.normalizer = ObsNormalizer(obs_dim);
  policy.normalizer.mean = read_vec(in);
  policy.normalizer.var = read_vec(in);
  in.read(reinterpret_cast<char*>(&policy.normalizer.count), sizeof(double));
  in.read(reinterpret_cast<char*>(&policy.normalizer.clip), sizeof(double));
  if (!in) throw std::runtime_error("truncated checkpoint: " + path);
  policy.config_hash = hash;
  return policy;
}

std::string policy_to_json(const Policy& policy) {
  nlohmann::json j;
  j["schema"] = "fwsim-policy-v1";
  j["config_hash"] = policy.config_hash;
  j["obs_dim"] = policy.obs_dim();
  j["action_dim"] = policy.action_dim();
  auto mlp_json = [](const Mlp& mlp) {
    nlohmann::json layers = nlohmann::json::array();
    for (const auto& layer : mlp.layers) {
      nlohmann::json jl;
      jl["rows"] = layer.weight.rows();
      jl["cols"] = layer.weight.cols();
      jl["weight"] = std::vector<double>(layer.weight.data(),
                                         layer.weight.data() + layer.weight.size());
      jl["bias"] = std::vector<double>(layer.bias.data(), layer.bias.data() + layer.bias.size());
      layers.push_back(jl);
    }
    return layers;
  };
  j["actor"] = mlp_json(policy.actor);
  j["critic"] = mlp_json(policy.critic);
  j["log_std"] = std::vector<double>(policy.log_std.data(),
                                     policy.log_std.data() + policy.log_std.size());
  j["normalizer"]["mean"] = std::vector<double>(policy.normalizer.mean.data(),
                                                policy.normalizer.mean.data() +
                                                    policy.normalizer.mean.size());
  j["normalizer"]["var"] = std::vector<double>(policy.normalizer.var.data(),
                                               policy.normalizer.var.data() +
                                                   policy.normalizer.var.size());
  j["normalizer"]["count"] = policy.normalizer.count;
  return j.dump(2);
}

}  // namespace fwsim
