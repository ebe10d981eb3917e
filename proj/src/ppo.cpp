#include <algorithm>
#include <cmath>
#include <deque>
#include <filesystem>
#include <numeric>
#include <thread>

#include "fwsim/io.hpp"
#include "fwsim/training.hpp"

namespace fwsim {

namespace {

constexpr double kLog2Pi = 1.8378770664093453;

std::uint64_t mix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

std::uint64_t episode_seed(std::uint64_t base, int env_idx, std::int64_t episode) {
  return mix64(base ^ mix64(static_cast<std::uint64_t>(env_idx + 1)) ^
               mix64(static_cast<std::uint64_t>(episode + 1) * 0x9FB21C651E98DF25ull));
}

double gaussian_log_prob(const VecX& action, const VecX& mean, const VecX& log_std) {
  double lp = 0.0;
  for (int i = 0; i < action.size(); ++i) {
    const double z = (action(i) - mean(i)) * std::exp(-log_std(i));
    lp += -0.5 * z * z - log_std(i) - 0.5 * kLog2Pi;
  }
  return lp;
}

/// Gradient layout used for the whole optimizer state:
/// [actor params..., log_std..., critic params...].
struct FlatSpec {
  int actor_count = 0;
  int logstd_count = 0;
  int critic_count = 0;
  int total() const { return actor_count + logstd_count + critic_count; }
};

FlatSpec flat_spec(const Policy& p) {
  return {p.actor.parameter_count(), static_cast<int>(p.log_std.size()),
          p.critic.parameter_count()};
}

VecX flatten_all(const Policy& p) {
  const FlatSpec spec = flat_spec(p);
  VecX out(spec.total());
  int off = 0;
  p.actor.flatten_into(out, off);
  out.segment(off, spec.logstd_count) = p.log_std;
  off += spec.logstd_count;
  p.critic.flatten_into(out, off);
  return out;
}

void unflatten_all(Policy& p, const VecX& flat) {
  const FlatSpec spec = flat_spec(p);
  int off = 0;
  p.actor.unflatten_from(flat, off);
  p.log_std = flat.segment(off, spec.logstd_count);
  off += spec.logstd_count;
  p.critic.unflatten_from(flat, off);
}

struct Adam {
  VecX m, v;
  double lr, beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  std::int64_t t = 0;

  Adam(int n, double lr_in) : m(VecX::Zero(n)), v(VecX::Zero(n)), lr(lr_in) {}

  void step(VecX& params, const VecX& grad) {
    ++t;
    m = beta1 * m + (1.0 - beta1) * grad;
    v = beta2 * v + (1.0 - beta2) * grad.cwiseProduct(grad);
    const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(t));
    const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(t));
    params -= (lr / bc1) * m.cwiseQuotient(((v / bc2).cwiseSqrt().array() + eps).matrix());
  }
};

struct RolloutBuffer {
  MatX obs;          // batch x obs_dim, raw
  MatX actions;      // batch x act_dim (raw Gaussian samples)
  VecX log_prob;
  VecX value;
  VecX reward;
  std::vector<std::uint8_t> terminal;   // true terminal (not truncation)
  std::vector<std::uint8_t> done_any;   // terminal or truncation
  VecX truncation_value;                // V(s_final) when truncated, else 0
  VecX env_bootstrap;                   // V at end of horizon per env

  void resize(int batch, int obs_dim, int act_dim, int num_envs) {
    obs.resize(batch, obs_dim);
    actions.resize(batch, act_dim);
    log_prob.resize(batch);
    value.resize(batch);
    reward.resize(batch);
    terminal.assign(static_cast<std::size_t>(batch), 0);
    done_any.assign(static_cast<std::size_t>(batch), 0);
    truncation_value = VecX::Zero(batch);
    env_bootstrap = VecX::Zero(num_envs);
  }
};

struct EpisodeStat {
  double ret = 0.0;
  int length = 0;
  TerminationReason reason = TerminationReason::None;
};

void write_metrics_csv(const std::vector<UpdateMetrics>& curve, const std::string& path) {
  CsvWriter csv({"update", "steps", "stage", "mean_return", "mean_length", "policy_loss",
                 "value_loss", "entropy", "clip_fraction", "mean_std", "reward_pos",
                 "reward_rates", "reward_level", "reward_energy", "term_position",
                 "term_orientation", "term_timeout", "term_nonfinite", "advantage_norm"});
  for (const auto& m : curve) {
    csv.append_row({static_cast<double>(m.update), static_cast<double>(m.steps),
                    static_cast<double>(m.stage), m.mean_return, m.mean_length, m.policy_loss,
                    m.value_loss, m.entropy, m.clip_fraction, m.mean_std, m.reward_pos,
                    m.reward_rates, m.reward_level, m.reward_energy,
                    static_cast<double>(m.term_position), static_cast<double>(m.term_orientation),
                    static_cast<double>(m.term_timeout), static_cast<double>(m.term_nonfinite),
                    m.advantage_normalization ? 1.0 : 0.0});
  }
  csv.save(path);
}

struct EnvSlot {
  std::unique_ptr<FlightEnv> env;
  VecX obs;
  double episode_return = 0.0;
  int episode_length = 0;
  std::int64_t episode_counter = 0;
  std::vector<EpisodeStat> finished;  // merged in env order per update
  RewardBreakdown reward_accum;       // running sums for metrics
  std::int64_t reward_steps = 0;
};

}  // namespace

VecX policy_actor_params(const Policy& policy) {
  const FlatSpec spec = flat_spec(policy);
  VecX out(spec.actor_count + spec.logstd_count);
  int off = 0;
  policy.actor.flatten_into(out, off);
  out.segment(off, spec.logstd_count) = policy.log_std;
  return out;
}

void set_policy_actor_params(Policy& policy, const VecX& flat) {
  const FlatSpec spec = flat_spec(policy);
  if (flat.size() != spec.actor_count + spec.logstd_count) {
    throw std::invalid_argument("set_policy_actor_params: size mismatch");
  }
  int off = 0;
  policy.actor.unflatten_from(flat, off);
  policy.log_std = flat.segment(off, spec.logstd_count);
}

double ppo_clipped_surrogate(const Policy& policy, const PpoBatch& batch, double clip,
                             VecX* grad) {
  const int n = static_cast<int>(batch.observations.rows());
  const int act_dim = static_cast<int>(batch.actions.cols());
  if (n == 0) throw std::invalid_argument("ppo_clipped_surrogate: empty batch");

  Mlp actor_grads = Mlp::zeros_like(policy.actor);
  VecX logstd_grad = VecX::Zero(act_dim);

  Mlp::BatchWorkspace ws;
  const MatX obs_t = batch.observations.transpose();
  const MatX pre = policy.actor.forward_batch_cached(obs_t, ws);  // act_dim x n
  const MatX mean = pre.array().tanh().matrix();
  const VecX inv_var = (-2.0 * policy.log_std).array().exp().matrix();

  double objective = 0.0;
  MatX dpre = MatX::Zero(act_dim, n);
  for (int s = 0; s < n; ++s) {
    const VecX a = batch.actions.row(s).transpose();
    const VecX mu = mean.col(s);
    double lp = 0.0;
    for (int i = 0; i < act_dim; ++i) {
      const double d = a(i) - mu(i);
      lp += -0.5 * d * d * inv_var(i) - policy.log_std(i) - 0.5 * kLog2Pi;
    }
    const double ratio = std::exp(lp - batch.old_log_prob(s));
    const double adv = batch.advantages(s);
    const double unclipped = ratio * adv;
    const double clipped = std::clamp(ratio, 1.0 - clip, 1.0 + clip) * adv;
    objective += std::min(unclipped, clipped);

    if (grad != nullptr) {
      // d surrogate / d logp: the active min branch; the clipped branch has
      // zero slope outside the clip window.
      double dobj_dlp = 0.0;
      if (unclipped <= clipped) {
        dobj_dlp = unclipped;
      } else if (ratio > 1.0 - clip && ratio < 1.0 + clip) {
        dobj_dlp = ratio * adv;
      }
      dobj_dlp /= static_cast<double>(n);
      for (int i = 0; i < act_dim; ++i) {
        const double d = a(i) - mu(i);
        const double dlp_dmu = d * inv_var(i);
        const double dlp_dlogstd = d * d * inv_var(i) - 1.0;
        dpre(i, s) = dobj_dlp * dlp_dmu * (1.0 - mu(i) * mu(i));
        logstd_grad(i) += dobj_dlp * dlp_dlogstd;
      }
    }
  }
  objective /= static_cast<double>(n);

  if (grad != nullptr) {
    policy.actor.backward_batch(ws, dpre, actor_grads);
    grad->resize(policy.actor.parameter_count() + act_dim);
    int off = 0;
    actor_grads.flatten_into(*grad, off);
    grad->segment(off, act_dim) = logstd_grad;
  }
  return objective;
}

TrainResult ppo_train(const Policy& initial, const TrainSetup& setup) {
  const PpoConfig& cfg = setup.ppo;
  TrainResult result;
  result.policy = initial;
  Policy& policy = result.policy;
  policy.config_hash = setup.config_hash;

  const int obs_dim = policy.obs_dim();
  const int act_dim = policy.action_dim();
  const int batch = cfg.num_envs * cfg.horizon;

  int stage = setup.curriculum.start_stage;

  // Environments with deterministic per-env seeding.
  std::vector<EnvSlot> slots(static_cast<std::size_t>(cfg.num_envs));
  auto make_env_options = [&](int stage_now) {
    EnvOptions opts = setup.env;
    opts.stochastic = true;
    opts.episode.curriculum_stage = stage_now;
    opts.randomize_dynamics = stage_now >= 4;
    return opts;
  };
  auto new_trajectory = [&](std::uint64_t seed) {
    Rng traj_rng(mix64(seed ^ 0x7261616A65637479ull));
    return generate(sample_stage_trajectory(stage, setup.curriculum.stage, traj_rng));
  };

  for (int e = 0; e < cfg.num_envs; ++e) {
    auto& slot = slots[static_cast<std::size_t>(e)];
    const std::uint64_t seed = episode_seed(cfg.seed, e, 0);
    slot.env = std::make_unique<FlightEnv>(setup.model, new_trajectory(seed),
                                           make_env_options(stage));
    slot.obs = slot.env->reset(seed);
    slot.episode_counter = 1;
  }

  RolloutBuffer buf;
  buf.resize(batch, obs_dim, act_dim, cfg.num_envs);

  const FlatSpec spec = flat_spec(policy);
  Adam adam(spec.total(), cfg.learning_rate);
  Rng shuffle_rng(mix64(cfg.seed ^ 0x5348554646ull));

  std::deque<double> recent_returns;
  const double stage_max_step_reward =
      kRewardWeightPos + kRewardWeightRates + kRewardWeightLevel + kRewardWeightEnergy;

  const int num_updates = static_cast<int>(cfg.total_steps / batch);
  std::vector<UpdateMetrics> curve;
  double last_mean_return = 0.0;
  double last_mean_length = 0.0;

  std::filesystem::path out_dir;
  if (!setup.out_dir.empty()) {
    out_dir = setup.out_dir;
    std::filesystem::create_directories(out_dir);
  }

  auto collect_range = [&](int e_begin, int e_end) {
    for (int e = e_begin; e < e_end; ++e) {
      auto& slot = slots[static_cast<std::size_t>(e)];
      FlightEnv& env = *slot.env;
      for (int t = 0; t < cfg.horizon; ++t) {
        const int idx = e * cfg.horizon + t;
        buf.obs.row(idx) = slot.obs.transpose();
        const PolicyOutput out = policy.forward(slot.obs);
        VecX action(act_dim);
        for (int i = 0; i < act_dim; ++i) action(i) = out.mean(i) + out.std(i) * env.rng().normal();
        buf.actions.row(idx) = action.transpose();
        buf.log_prob(idx) = gaussian_log_prob(action, out.mean, policy.log_std);
        buf.value(idx) = out.value;

        const auto step_out = env.step(action);
        buf.reward(idx) = step_out.reward.total;
        slot.episode_return += step_out.reward.total;
        slot.episode_length += 1;
        slot.reward_accum.r_pos += step_out.reward.r_pos;
        slot.reward_accum.r_rates += step_out.reward.r_rates;
        slot.reward_accum.r_level += step_out.reward.r_level;
        slot.reward_accum.r_energy += step_out.reward.r_energy;
        slot.reward_steps += 1;

        if (step_out.done) {
          const bool truncated = step_out.reason == TerminationReason::Timeout;
          buf.done_any[static_cast<std::size_t>(idx)] = 1;
          buf.terminal[static_cast<std::size_t>(idx)] = truncated ? 0 : 1;
          if (truncated) {
            buf.truncation_value(idx) = policy.forward(step_out.observation).value;
          }
          slot.finished.push_back({slot.episode_return, slot.episode_length, step_out.reason});
          slot.episode_return = 0.0;
          slot.episode_length = 0;
          const std::uint64_t seed = episode_seed(cfg.seed, e, slot.episode_counter);
          ++slot.episode_counter;
          env.set_trajectory(new_trajectory(seed));
          slot.obs = env.reset(seed);
        } else {
          slot.obs = step_out.observation;
        }
      }
      buf.env_bootstrap(e) = policy.forward(slot.obs).value;
    }
  };

  for (int update = 0; update < num_updates; ++update) {
    // -- rollout --
    if (cfg.parallel && cfg.num_envs > 1) {
      const int n_threads = std::min<int>(cfg.num_envs,
                                          std::max(1u, std::thread::hardware_concurrency()));
      std::vector<std::thread> threads;
      const int per = (cfg.num_envs + n_threads - 1) / n_threads;
      for (int k = 0; k < n_threads; ++k) {
        const int b = k * per;
        const int e = std::min(cfg.num_envs, b + per);
        if (b >= e) break;
        threads.emplace_back(collect_range, b, e);
      }
      for (auto& th : threads) th.join();
    } else {
      collect_range(0, cfg.num_envs);
    }

    // -- GAE --
    VecX advantages(batch), returns(batch);
    for (int e = 0; e < cfg.num_envs; ++e) {
      double gae = 0.0;
      for (int t = cfg.horizon - 1; t >= 0; --t) {
        const int idx = e * cfg.horizon + t;
        const bool done = buf.done_any[static_cast<std::size_t>(idx)] != 0;
        const bool term = buf.terminal[static_cast<std::size_t>(idx)] != 0;
        double next_value;
        if (done) {
          next_value = term ? 0.0 : buf.truncation_value(idx);
        } else {
          next_value = (t == cfg.horizon - 1) ? buf.env_bootstrap(e) : buf.value(idx + 1);
        }
        const double delta = buf.reward(idx) + cfg.gamma * next_value - buf.value(idx);
        gae = delta + (done ? 0.0 : cfg.gamma * cfg.gae_lambda * gae);
        advantages(idx) = gae;
        returns(idx) = gae + buf.value(idx);
      }
    }
    VecX norm_adv = advantages;
    if (cfg.normalize_advantages) {
      const double mean = advantages.mean();
      const double sd = std::sqrt((advantages.array() - mean).square().mean() + 1e-8);
      norm_adv = ((advantages.array() - mean) / sd).matrix();
    }

    // Normalized observations with the stats used at collection time.
    MatX obs_norm(batch, obs_dim);
    for (int i = 0; i < batch; ++i) {
      obs_norm.row(i) = policy.normalizer.normalize(buf.obs.row(i).transpose()).transpose();
    }

    // -- optimize --
    double policy_loss_sum = 0.0, value_loss_sum = 0.0, entropy_sum = 0.0, clip_sum = 0.0;
    int loss_batches = 0;
    bool bad_loss = false;

    std::vector<int> order(static_cast<std::size_t>(batch));
    std::iota(order.begin(), order.end(), 0);
    const int mb_size = batch / cfg.minibatches;

    for (int epoch = 0; epoch < cfg.epochs && !bad_loss; ++epoch) {
      // Fisher-Yates with the deterministic rng.
      for (int i = batch - 1; i > 0; --i) {
        const int j = static_cast<int>(shuffle_rng.uniform01() * (i + 1));
        std::swap(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(j)]);
      }
      for (int mb = 0; mb < cfg.minibatches && !bad_loss; ++mb) {
        const int lo = mb * mb_size;
        const int hi = (mb == cfg.minibatches - 1) ? batch : lo + mb_size;
        const int m = hi - lo;

        MatX mb_obs(obs_dim, m);
        MatX mb_act(act_dim, m);
        VecX mb_old_lp(m), mb_adv(m), mb_ret(m);
        for (int k = 0; k < m; ++k) {
          const int idx = order[static_cast<std::size_t>(lo + k)];
          mb_obs.col(k) = obs_norm.row(idx).transpose();
          mb_act.col(k) = buf.actions.row(idx).transpose();
          mb_old_lp(k) = buf.log_prob(idx);
          mb_adv(k) = norm_adv(idx);
          mb_ret(k) = returns(idx);
        }

        Mlp::BatchWorkspace actor_ws, critic_ws;
        const MatX pre = policy.actor.forward_batch_cached(mb_obs, actor_ws);
        const MatX mean = pre.array().tanh().matrix();
        const MatX values = policy.critic.forward_batch_cached(mb_obs, critic_ws);
        const VecX inv_var = (-2.0 * policy.log_std).array().exp().matrix();

        MatX dpre = MatX::Zero(act_dim, m);
        MatX dvalue = MatX::Zero(1, m);
        VecX logstd_grad = VecX::Zero(act_dim);
        double p_loss = 0.0, v_loss = 0.0, clip_frac = 0.0;

        for (int k = 0; k < m; ++k) {
          double lp = 0.0;
          for (int i = 0; i < act_dim; ++i) {
            const double d = mb_act(i, k) - mean(i, k);
            lp += -0.5 * d * d * inv_var(i) - policy.log_std(i) - 0.5 * kLog2Pi;
          }
          const double ratio = std::exp(lp - mb_old_lp(k));
          const double adv = mb_adv(k);
          const double unclipped = ratio * adv;
          const double clipped = std::clamp(ratio, 1.0 - cfg.clip, 1.0 + cfg.clip) * adv;
          p_loss -= std::min(unclipped, clipped);
          if (std::abs(ratio - 1.0) > cfg.clip) clip_frac += 1.0;

          double dloss_dlp = 0.0;  // of the negated surrogate
          if (unclipped <= clipped) {
            dloss_dlp = -unclipped;
          } else if (ratio > 1.0 - cfg.clip && ratio < 1.0 + cfg.clip) {
            dloss_dlp = -ratio * adv;
          }
          dloss_dlp /= static_cast<double>(m);
          for (int i = 0; i < act_dim; ++i) {
            const double d = mb_act(i, k) - mean(i, k);
            dpre(i, k) = dloss_dlp * d * inv_var(i) * (1.0 - mean(i, k) * mean(i, k));
            logstd_grad(i) += dloss_dlp * (d * d * inv_var(i) - 1.0);
          }

          const double verr = values(0, k) - mb_ret(k);
          v_loss += 0.5 * verr * verr;
          dvalue(0, k) = cfg.value_coef * verr / static_cast<double>(m);
        }
        p_loss /= static_cast<double>(m);
        v_loss /= static_cast<double>(m);
        clip_frac /= static_cast<double>(m);
        const double entropy =
            policy.log_std.sum() + 0.5 * act_dim * (kLog2Pi + 1.0);
        logstd_grad.array() -= cfg.entropy_coef;  // d(-c_e * H)/dlog_std = -c_e

        const double total_loss = p_loss + cfg.value_coef * v_loss - cfg.entropy_coef * entropy;
        if (!std::isfinite(total_loss)) {
          bad_loss = true;
          break;
        }

        Mlp actor_grads = Mlp::zeros_like(policy.actor);
        Mlp critic_grads = Mlp::zeros_like(policy.critic);
        policy.actor.backward_batch(actor_ws, dpre, actor_grads);
        policy.critic.backward_batch(critic_ws, dvalue, critic_grads);

        VecX grad(spec.total());
        int off = 0;
        actor_grads.flatten_into(grad, off);
        grad.segment(off, act_dim) = logstd_grad;
        off += act_dim;
        critic_grads.flatten_into(grad, off);

        const double gnorm = grad.norm();
        if (cfg.max_grad_norm > 0.0 && gnorm > cfg.max_grad_norm) {
          grad *= cfg.max_grad_norm / gnorm;
        }
        VecX params = flatten_all(policy);
        adam.step(params, grad);
        unflatten_all(policy, params);

        policy_loss_sum += p_loss;
        value_loss_sum += v_loss;
        entropy_sum += entropy;
        clip_sum += clip_frac;
        ++loss_batches;
      }
    }

    // -- normalizer update for the next batch --
    std::vector<VecX> raw_batch;
    raw_batch.reserve(static_cast<std::size_t>(batch));
    for (int i = 0; i < batch; ++i) raw_batch.push_back(buf.obs.row(i).transpose());
    policy.normalizer.update(raw_batch);

    // -- metrics --
    UpdateMetrics met;
    met.update = update;
    met.steps = static_cast<std::int64_t>(update + 1) * batch;
    met.stage = stage;
    met.advantage_normalization = cfg.normalize_advantages;
    double ret_sum = 0.0, len_sum = 0.0;
    int n_eps = 0;
    for (auto& slot : slots) {
      for (const auto& st : slot.finished) {
        ret_sum += st.ret;
        len_sum += st.length;
        ++n_eps;
        recent_returns.push_back(st.ret);
        while (recent_returns.size() > static_cast<std::size_t>(setup.curriculum.advance_window)) {
          recent_returns.pop_front();
        }
        switch (st.reason) {
          case TerminationReason::PositionError: ++met.term_position; break;
          case TerminationReason::Orientation: ++met.term_orientation; break;
          case TerminationReason::Timeout: ++met.term_timeout; break;
          case TerminationReason::NonFinite: ++met.term_nonfinite; break;
          default: break;
        }
      }
      slot.finished.clear();
      if (slot.reward_steps > 0) {
        met.reward_pos += slot.reward_accum.r_pos / static_cast<double>(slot.reward_steps);
        met.reward_rates += slot.reward_accum.r_rates / static_cast<double>(slot.reward_steps);
        met.reward_level += slot.reward_accum.r_level / static_cast<double>(slot.reward_steps);
        met.reward_energy += slot.reward_accum.r_energy / static_cast<double>(slot.reward_steps);
      }
      slot.reward_accum = RewardBreakdown{};
      slot.reward_steps = 0;
    }
    met.reward_pos /= cfg.num_envs;
    met.reward_rates /= cfg.num_envs;
    met.reward_level /= cfg.num_envs;
    met.reward_energy /= cfg.num_envs;
    if (n_eps > 0) {
      last_mean_return = ret_sum / n_eps;
      last_mean_length = len_sum / n_eps;
    }
    met.mean_return = last_mean_return;
    met.mean_length = last_mean_length;
    met.policy_loss = loss_batches ? policy_loss_sum / loss_batches : 0.0;
    met.value_loss = loss_batches ? value_loss_sum / loss_batches : 0.0;
    met.entropy = loss_batches ? entropy_sum / loss_batches : 0.0;
    met.clip_fraction = loss_batches ? clip_sum / loss_batches : 0.0;
    met.mean_std = policy.log_std.array().exp().mean();
    curve.push_back(met);

    // Flush artifacts periodically so long runs are observable/resumable.
    if (!out_dir.empty() && (update % 5 == 4 || update == num_updates - 1)) {
      write_metrics_csv(curve, (out_dir / "metrics.csv").string());
      save_policy(policy, (out_dir / "policy_latest.ckpt").string());
    }

    if (bad_loss) {
      result.diverged = true;
      if (!out_dir.empty()) save_policy(policy, (out_dir / "policy_diverged.ckpt").string());
      break;
    }

    // -- curriculum advance --
    if (stage < setup.curriculum.final_stage &&
        recent_returns.size() == static_cast<std::size_t>(setup.curriculum.advance_window)) {
      const double mean_recent =
          std::accumulate(recent_returns.begin(), recent_returns.end(), 0.0) /
          static_cast<double>(recent_returns.size());
      const double ceiling = stage_max_step_reward *
                             setup.env.episode.max_steps() * setup.curriculum.advance_fraction;
      if (mean_recent >= ceiling) {
        if (!out_dir.empty()) {
          save_policy(policy, (out_dir / ("policy_stage" + std::to_string(stage) + ".ckpt")).string());
        }
        ++stage;
        recent_returns.clear();
        for (int e = 0; e < cfg.num_envs; ++e) {
          auto& slot = slots[static_cast<std::size_t>(e)];
          slot.env = std::make_unique<FlightEnv>(setup.model, slot.env->trajectory(),
                                                 make_env_options(stage));
          const std::uint64_t seed = episode_seed(cfg.seed, e, slot.episode_counter);
          ++slot.episode_counter;
          slot.env->set_trajectory(new_trajectory(seed));
          slot.obs = slot.env->reset(seed);
          slot.episode_return = 0.0;
          slot.episode_length = 0;
        }
      }
    }
  }

  result.curve = std::move(curve);
  result.final_stage = stage;

  if (!out_dir.empty()) {
    save_policy(policy, (out_dir / "policy.ckpt").string());
    write_metrics_csv(result.curve, (out_dir / "metrics.csv").string());
  }
  return result;
}

}  // namespace fwsim
