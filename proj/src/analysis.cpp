#include "fwsim/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "fwsim/io.hpp"
#include "json.hpp"

namespace fwsim {

namespace {

/// Cubic Hermite interpolation of a uniformly sampled series with
/// finite-difference slopes; t in sample units.
double hermite_interp(const VecX& y, double t) {
  const int n = static_cast<int>(y.size());
  if (t <= 0.0) return y(0);
  if (t >= n - 1) return y(n - 1);
  const int i = static_cast<int>(t);
  const double u = t - i;
  const double y0 = y(i);
  const double y1 = y(i + 1);
  const double m0 = i > 0 ? 0.5 * (y(i + 1) - y(i - 1)) : y(1) - y(0);
  const double m1 = i + 2 < n ? 0.5 * (y(i + 2) - y(i)) : y(n - 1) - y(n - 2);
  const double u2 = u * u, u3 = u2 * u;
  return (2 * u3 - 3 * u2 + 1) * y0 + (u3 - 2 * u2 + u) * m0 + (-2 * u3 + 3 * u2) * y1 +
         (u3 - u2) * m1;
}

/// Refines an upward crossing of `level` between samples i and i+1 by
/// bisection on the Hermite interpolant.
double refine_crossing(const VecX& y, int i, double level) {
  double lo = i, hi = i + 1;
  for (int it = 0; it < 60; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (hermite_interp(y, mid) < level) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

}  // namespace

PolicyClosedLoop::PolicyClosedLoop(Policy policy, RobotModel model, EnvOptions options,
                                   std::uint64_t seed)
    : policy_(std::move(policy)), model_(std::move(model)), options_(std::move(options)),
      seed_(seed) {}

bool PolicyClosedLoop::run(const Trajectory& commanded, MatX* measured, int* steps_done) {
  EnvOptions opts = options_;
  opts.stochastic = false;
  opts.episode.max_duration = commanded.duration();
  FlightEnv env(model_, commanded, opts);
  VecX obs = env.reset(seed_ + (++episode_) * 0x9E3779B97F4A7C15ull);
  const int steps = static_cast<int>(commanded.duration() * kPolicyRateHz);
  measured->resize(steps, 3);
  *steps_done = 0;
  for (int k = 0; k < steps; ++k) {
    const auto out = env.step(policy_.forward(obs).mean);
    measured->row(k) = env.state().base_position.transpose();
    *steps_done = k + 1;
    obs = out.observation;
    if (out.done && out.reason != TerminationReason::Timeout) return false;
    if (out.done) break;
  }
  return *steps_done == steps;
}

CollectResult collect_io_pairs(ClosedLoopSystem& system, const ExcitationSpec& exc) {
  CollectResult result;
  Rng rng(exc.seed);
  const double dt = 1.0 / kPolicyRateHz;

  for (int seg = 0; seg < exc.segments; ++seg) {
    // Per-axis multisine on top of the straight trim path.
    std::array<std::vector<double>, 3> freqs, phases;
    for (int axis = 0; axis < 3; ++axis) {
      for (int s = 0; s < exc.num_sines; ++s) {
        freqs[axis].push_back(rng.uniform(exc.freq_lo, exc.freq_hi));
        phases[axis].push_back(rng.uniform(0.0, 2.0 * M_PI));
      }
    }
    const auto steps = static_cast<int>(exc.segment_duration * kPolicyRateHz);
    std::vector<Vec3> commanded(static_cast<std::size_t>(steps) + 1);
    MatX trim(steps + 1, 3);
    for (int k = 0; k <= steps; ++k) {
      const double t = k * dt;
      const Vec3 trim_pos(exc.trim_speed * t, 0.0, 0.0);
      Vec3 dev = Vec3::Zero();
      const double ramp = std::min(1.0, t / std::max(exc.settle_time, 1e-9));
      for (int axis = 0; axis < 3; ++axis) {
        double v = 0.0;
        for (int s = 0; s < exc.num_sines; ++s) {
          v += std::sin(2.0 * M_PI * freqs[axis][static_cast<std::size_t>(s)] * t +
                        phases[axis][static_cast<std::size_t>(s)]);
        }
        dev(axis) = ramp * exc.amplitude * v / exc.num_sines;
      }
      commanded[static_cast<std::size_t>(k)] = trim_pos + dev;
      trim.row(k) = trim_pos.transpose();
    }
    const Trajectory path(commanded, dt);

    MatX measured;
    int steps_done = 0;
    const bool ok = system.run(path, &measured, &steps_done);
    if (!ok) {
      ++result.discarded_segments;
      continue;
    }
    const int settle = static_cast<int>(exc.settle_time * kPolicyRateHz);
    const int n = steps_done - settle;
    if (n <= 0) {
      ++result.discarded_segments;
      continue;
    }
    IoSeries series;
    series.sample_rate = kPolicyRateHz;
    series.input.resize(n, 3);
    series.output.resize(n, 3);
    for (int k = 0; k < n; ++k) {
      const int src = settle + k;
      // measured[k] is the position after step k+1, i.e. at t=(src+1)dt.
      series.input.row(k) =
          (commanded[static_cast<std::size_t>(src + 1)] -
           Vec3(exc.trim_speed * (src + 1) * dt, 0.0, 0.0))
              .transpose();
      series.output.row(k) = measured.row(src) - trim.row(src + 1);
    }
    result.segments.push_back(std::move(series));
  }
  return result;
}

TransferFunctionFit fit_lti(const IoSeries& series, const FitOptions& options) {
  return fit_lti(std::vector<IoSeries>{series}, options);
}

TransferFunctionFit fit_lti(const std::vector<IoSeries>& segments, const FitOptions& options) {
  TransferFunctionFit fit;
  if (segments.empty()) throw std::invalid_argument("fit_lti: no data");
  const double fs = segments.front().sample_rate;
  fit.sample_rate = fs;
  double total_seconds = 0.0;
  for (const auto& s : segments) {
    if (s.input.rows() != s.output.rows() || s.input.cols() != 3 || s.output.cols() != 3) {
      throw std::invalid_argument("fit_lti: malformed io series");
    }
    total_seconds += static_cast<double>(s.input.rows()) / fs;
  }
  if (total_seconds < 30.0) throw std::invalid_argument("fit_lti: need at least 30 s of data");

  // Split each segment into train/holdout tails.
  struct Rows {
    const MatX* u;
    const MatX* y;
    int lo, hi;  // k range (k >= 3)
  };
  std::vector<Rows> train, holdout;
  for (const auto& s : segments) {
    const int n = static_cast<int>(s.input.rows());
    const int split = n - static_cast<int>(options.holdout_fraction * n);
    train.push_back({&s.input, &s.output, 3, split});
    holdout.push_back({&s.input, &s.output, std::max(3, split), n});
  }

  // Unknowns per axis: shared or per-axis denominator a1..a3, a strictly
  // proper numerator b1..b3 (no direct feedthrough at the sample instant),
  // and an intercept absorbing trim offsets.
  const int n_axes = 3;
  const int den_count = options.common_denominator ? 3 : 9;
  const int cols = den_count + n_axes * 4;  // + (b1, b2, b3, intercept) per axis
  int rows = 0;
  for (const auto& r : train) rows += std::max(0, r.hi - r.lo) * n_axes;
  if (rows < cols) throw std::invalid_argument("fit_lti: not enough samples");

  // Delta-operator regressors: at 50 Hz the shift-form lags are nearly
  // collinear (discrete poles cluster at z = 1) and the plain ARX normal
  // equations lose the dynamics; first differences restore conditioning.
  // Shift coefficients are recovered from the delta ones afterwards.
  const double ts = 1.0 / fs;
  MatX reg = MatX::Zero(rows, cols);
  VecX rhs = VecX::Zero(rows);
  int row = 0;
  for (const auto& r : train) {
    for (int k = r.lo; k < r.hi; ++k) {
      for (int axis = 0; axis < n_axes; ++axis) {
        const int den_off = options.common_denominator ? 0 : 3 * axis;
        const double y1 = (*r.y)(k - 1, axis), y2 = (*r.y)(k - 2, axis), y3 = (*r.y)(k - 3, axis);
        reg(row, den_off + 0) = y1;
        reg(row, den_off + 1) = (y1 - y2) / ts;
        reg(row, den_off + 2) = (y1 - 2.0 * y2 + y3) / (ts * ts);
        const int boff = den_count + 4 * axis;
        const double u1 = (*r.u)(k - 1, axis), u2 = (*r.u)(k - 2, axis), u3 = (*r.u)(k - 3, axis);
        reg(row, boff + 0) = u1;
        reg(row, boff + 1) = (u1 - u2) / ts;
        reg(row, boff + 2) = (u1 - 2.0 * u2 + u3) / (ts * ts);
        reg(row, boff + 3) = 1.0;
        rhs(row) = (*r.y)(k, axis);
        ++row;
      }
    }
  }

  Eigen::ColPivHouseholderQR<MatX> qr(reg);
  qr.setThreshold(1e-10);
  if (qr.rank() < cols) {
    fit.rank_deficient = true;
    return fit;
  }
  const VecX theta_delta = qr.solve(rhs);

  // Back to shift form: y[k] = -a1 y1 - a2 y2 - a3 y3 + b1 u1 + b2 u2 + b3 u3 + c.
  VecX theta = VecX::Zero(cols);
  auto delta_to_shift = [&](double p1, double p2, double p3, double sign) {
    // sign +1 for the u block, -1 for the y block (a-coefficients).
    Eigen::Vector3d shift;
    shift(0) = sign * (p1 + p2 / ts + p3 / (ts * ts));
    shift(1) = sign * (-p2 / ts - 2.0 * p3 / (ts * ts));
    shift(2) = sign * (p3 / (ts * ts));
    return shift;
  };
  for (int d = 0; d < den_count; d += 3) {
    theta.segment<3>(d) =
        delta_to_shift(theta_delta(d), theta_delta(d + 1), theta_delta(d + 2), -1.0);
  }
  for (int axis = 0; axis < n_axes; ++axis) {
    const int boff = den_count + 4 * axis;
    theta.segment<3>(boff) =
        delta_to_shift(theta_delta(boff), theta_delta(boff + 1), theta_delta(boff + 2), 1.0);
    theta(boff + 3) = theta_delta(boff + 3);
  }

  // Held-out one-step prediction error.
  double sse_raw = 0.0, sse_norm = 0.0;
  std::int64_t count = 0;
  Vec3 ystd = Vec3::Zero();
  {
    Vec3 sum = Vec3::Zero(), sum2 = Vec3::Zero();
    std::int64_t n = 0;
    for (const auto& r : holdout) {
      for (int k = r.lo; k < r.hi; ++k) {
        for (int axis = 0; axis < 3; ++axis) {
          sum(axis) += (*r.y)(k, axis);
          sum2(axis) += (*r.y)(k, axis) * (*r.y)(k, axis);
        }
        ++n;
      }
    }
    if (n > 0) {
      for (int axis = 0; axis < 3; ++axis) {
        const double mean = sum(axis) / static_cast<double>(n);
        ystd(axis) = std::sqrt(std::max(sum2(axis) / static_cast<double>(n) - mean * mean, 1e-12));
      }
    }
  }
  for (const auto& r : holdout) {
    for (int k = r.lo; k < r.hi; ++k) {
      for (int axis = 0; axis < 3; ++axis) {
        const int den_off = options.common_denominator ? 0 : 3 * axis;
        const int boff = den_count + 4 * axis;
        double pred = theta(boff + 3);
        for (int j = 1; j <= 3; ++j) pred -= theta(den_off + j - 1) * (*r.y)(k - j, axis);
        for (int j = 1; j <= 3; ++j) pred += theta(boff + j - 1) * (*r.u)(k - j, axis);
        const double err = (*r.y)(k, axis) - pred;
        sse_raw += err * err;
        sse_norm += (err / ystd(axis)) * (err / ystd(axis));
        ++count;
      }
    }
  }
  fit.mse_raw = count ? sse_raw / static_cast<double>(count) : 0.0;
  fit.mse_normalized = count ? sse_norm / static_cast<double>(count) : 0.0;
  fit.poor_fit = fit.mse_normalized > options.poor_fit_threshold;

  // Exact zero-order-hold inverse: controller-canonical discrete state
  // space, matrix logarithm for A_c, B_c from the ZOH input integral, and
  // Faddeev-LeVerrier for the continuous numerator coefficients. This maps
  // a strictly proper sampled plant to a strictly proper (2, 3) continuous
  // model without any discretization truncation.
  const double ts_log = 1.0 / fs;
  for (int axis = 0; axis < 3; ++axis) {
    const int den_off = options.common_denominator ? 0 : 3 * axis;
    const Eigen::Vector3d alpha = theta.segment<3>(den_off);
    const int boff = den_count + 4 * axis;
    const Eigen::Vector3d beta = theta.segment<3>(boff);

    Eigen::Matrix3d a_d;
    a_d << -alpha(0), -alpha(1), -alpha(2), 1, 0, 0, 0, 1, 0;
    const Eigen::Vector3d b_d(1, 0, 0);

    const Eigen::EigenSolver<Eigen::Matrix3d> eig(a_d);
    if (eig.info() != Eigen::Success) {
      fit.rank_deficient = true;
      return fit;
    }
    Eigen::Vector3cd log_eigs;
    for (int i = 0; i < 3; ++i) {
      const std::complex<double> z = eig.eigenvalues()(i);
      // A discrete pole on the negative real axis or at the origin has no
      // real sampled-data preimage at this rate; flag instead of guessing.
      if (std::abs(z) < 1e-9 || (z.imag() == 0.0 && z.real() < 0.0)) {
        fit.rank_deficient = true;
        return fit;
      }
      log_eigs(i) = std::log(z) / ts_log;
    }
    const Eigen::Matrix3cd v = eig.eigenvectors();
    const Eigen::Matrix3cd a_c_complex = v * log_eigs.asDiagonal() * v.inverse();
    const Eigen::Matrix3d a_c = a_c_complex.real();

    // B_d = A_c^{-1} (A_d - I) B_c  =>  B_c = A_c (A_d - I)^{-1} B_d.
    const Eigen::Matrix3d ad_minus_i = a_d - Eigen::Matrix3d::Identity();
    if (std::abs(ad_minus_i.determinant()) < 1e-12) {
      fit.rank_deficient = true;  // discrete pole at z = 1 (integrator)
      return fit;
    }
    const Eigen::Vector3d b_c = a_c * ad_minus_i.inverse() * b_d;

    // Denominator from the continuous eigenvalues.
    const VecX den = polynomial_from_roots(
        {log_eigs(0), log_eigs(1), log_eigs(2)});
    // adj(sI - A) = I s^2 + (A + d2 I) s + (A^2 + d2 A + d1 I).
    const double d2 = den(1), d1 = den(2);
    const Eigen::RowVector3d c = beta.transpose();
    const double n2 = c * b_c;
    const double n1 = c * (a_c + d2 * Eigen::Matrix3d::Identity()) * b_c;
    const double n0 = c * (a_c * a_c + d2 * a_c + d1 * Eigen::Matrix3d::Identity()) * b_c;

    fit.numerators.row(axis) << n2, n1, n0;
    if (axis == 0 || !options.common_denominator) {
      fit.denominator << den(0), den(1), den(2), den(3);
    }
  }
  fit.valid = true;
  return fit;
}

std::vector<std::complex<double>> polynomial_roots(const VecX& coeffs_descending) {
  int lead = 0;
  const double scale = coeffs_descending.cwiseAbs().maxCoeff();
  if (coeffs_descending.size() == 0 || scale == 0.0) {
    throw std::invalid_argument("polynomial_roots: zero polynomial");
  }
  while (lead < coeffs_descending.size() && std::abs(coeffs_descending(lead)) < 1e-14 * scale) {
    ++lead;
  }
  const int degree = static_cast<int>(coeffs_descending.size()) - 1 - lead;
  if (degree <= 0) return {};
  VecX c = coeffs_descending.tail(degree + 1) / coeffs_descending(lead);
  MatX companion = MatX::Zero(degree, degree);
  for (int i = 0; i < degree; ++i) companion(0, i) = -c(i + 1);
  for (int i = 1; i < degree; ++i) companion(i, i - 1) = 1.0;
  Eigen::EigenSolver<MatX> eig(companion);
  std::vector<std::complex<double>> roots;
  for (int i = 0; i < degree; ++i) roots.push_back(eig.eigenvalues()(i));
  std::sort(roots.begin(), roots.end(), [](const auto& a, const auto& b) {
    if (a.real() != b.real()) return a.real() < b.real();
    return a.imag() < b.imag();
  });
  return roots;
}

VecX polynomial_from_roots(const std::vector<std::complex<double>>& roots) {
  std::vector<std::complex<double>> coeffs{1.0};
  for (const auto& r : roots) {
    std::vector<std::complex<double>> next(coeffs.size() + 1, 0.0);
    for (std::size_t i = 0; i < coeffs.size(); ++i) {
      next[i] += coeffs[i];
      next[i + 1] -= coeffs[i] * r;
    }
    coeffs = std::move(next);
  }
  VecX out(static_cast<Eigen::Index>(coeffs.size()));
  for (std::size_t i = 0; i < coeffs.size(); ++i) out(static_cast<Eigen::Index>(i)) = coeffs[i].real();
  return out;
}

namespace {

/// Strictly-left-half-plane test with a snap tolerance: an eigenvalue that
/// is zero up to companion-matrix rounding must not count as stable.
bool strictly_lhp(const std::complex<double>& root) {
  const double snap = 1e-12 * std::max(1.0, std::abs(root));
  return root.real() < -snap;
}

}  // namespace

PoleZeroReport poles_zeros_classify(const TransferFunctionFit& fit) {
  if (!fit.valid) throw std::invalid_argument("poles_zeros_classify: invalid fit");
  PoleZeroReport report;
  report.poles = polynomial_roots(fit.denominator);
  report.bibo_stable = !report.poles.empty();
  for (const auto& p : report.poles) {
    if (!strictly_lhp(p)) report.bibo_stable = false;
  }
  for (int axis = 0; axis < 3; ++axis) {
    report.zeros[static_cast<std::size_t>(axis)] =
        polynomial_roots(fit.numerators.row(axis).transpose());
    bool mp = true;
    for (const auto& z : report.zeros[static_cast<std::size_t>(axis)]) {
      if (!strictly_lhp(z)) mp = false;
    }
    report.minimum_phase[static_cast<std::size_t>(axis)] = mp;
  }
  return report;
}

std::string fit_report_json(const TransferFunctionFit& fit, const PoleZeroReport& report) {
  nlohmann::json j;
  j["schema"] = "fwsim-sysid-v1";
  j["valid"] = fit.valid;
  j["rank_deficient"] = fit.rank_deficient;
  j["poor_fit"] = fit.poor_fit;
  j["sample_rate_hz"] = fit.sample_rate;
  j["mse_raw"] = fit.mse_raw;
  j["mse_normalized"] = fit.mse_normalized;
  j["denominator"] = {fit.denominator(0), fit.denominator(1), fit.denominator(2),
                      fit.denominator(3)};
  const char* axes[] = {"x", "y", "z"};
  for (int axis = 0; axis < 3; ++axis) {
    j["numerator"][axes[axis]] = {fit.numerators(axis, 0), fit.numerators(axis, 1),
                                  fit.numerators(axis, 2)};
  }
  auto cplx = [](const std::vector<std::complex<double>>& v) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& c : v) arr.push_back({{"re", c.real()}, {"im", c.imag()}});
    return arr;
  };
  j["poles"] = cplx(report.poles);
  j["bibo_stable"] = report.bibo_stable;
  for (int axis = 0; axis < 3; ++axis) {
    j["zeros"][axes[axis]] = cplx(report.zeros[static_cast<std::size_t>(axis)]);
    j["minimum_phase"][axes[axis]] = report.minimum_phase[static_cast<std::size_t>(axis)];
  }
  return j.dump(2);
}

SpectralResult spectral_analysis(const VecX& series, double sample_rate) {
  const int n = static_cast<int>(series.size());
  if (!(sample_rate > 0.0)) throw std::invalid_argument("spectral_analysis: bad sample rate");
  if (static_cast<double>(n) / sample_rate < 2.0) {
    throw std::invalid_argument("spectral_analysis: series shorter than 2 s");
  }
  const double mean = series.mean();
  VecX x(n);
  for (int k = 0; k < n; ++k) {
    const double w = 0.5 - 0.5 * std::cos(2.0 * M_PI * k / (n - 1));  // Hann
    x(k) = (series(k) - mean) * w;
  }
  const double ac_rms = std::sqrt((series.array() - mean).square().mean());
  if (ac_rms < 1e-12 * std::max(1.0, std::abs(mean))) {
    throw std::invalid_argument("spectral_analysis: no AC content (constant signal)");
  }

  const int half = n / 2;
  VecX power(half + 1);
  for (int k = 0; k <= half; ++k) {
    double re = 0.0, im = 0.0;
    const double w = 2.0 * M_PI * k / n;
    for (int m = 0; m < n; ++m) {
      re += x(m) * std::cos(w * m);
      im -= x(m) * std::sin(w * m);
    }
    power(k) = re * re + im * im;
  }

  const double df = sample_rate / n;
  const int k_lo = std::max(1, static_cast<int>(std::ceil(1.0 / df)));
  const int k_hi = std::min(half, static_cast<int>(std::floor(20.0 / df)));
  if (k_lo > k_hi) throw std::invalid_argument("spectral_analysis: no bins in the 1-20 Hz band");
  int k_peak = k_lo;
  for (int k = k_lo; k <= k_hi; ++k) {
    if (power(k) > power(k_peak)) k_peak = k;
  }

  SpectralResult result;
  // Parabolic refinement on the log spectrum.
  double delta = 0.0;
  if (k_peak > 1 && k_peak < half && power(k_peak) > 0.0) {
    const double eps = 1e-300;
    const double l0 = std::log(power(k_peak - 1) + eps);
    const double l1 = std::log(power(k_peak) + eps);
    const double l2 = std::log(power(k_peak + 1) + eps);
    const double denom = l0 - 2.0 * l1 + l2;
    if (std::abs(denom) > 1e-12) delta = std::clamp(0.5 * (l0 - l2) / denom, -0.5, 0.5);
  }
  result.fundamental_hz = (k_peak + delta) * df;

  double total = 0.0;
  for (int k = 1; k <= half; ++k) total += power(k);
  double band = power(k_peak);
  if (k_peak - 1 >= 1) band += power(k_peak - 1);
  if (k_peak + 1 <= half) band += power(k_peak + 1);
  result.band_power = band;
  result.total_ac_power = total;
  result.energy_fraction = total > 0.0 ? band / total : 0.0;
  return result;
}

OrbitStats phase_portrait(const VecX& position, const VecX& velocity, double sample_rate,
                          double closure_threshold) {
  if (position.size() != velocity.size()) {
    throw std::invalid_argument("phase_portrait: series size mismatch");
  }
  const int n = static_cast<int>(position.size());
  if (n < 8) throw std::invalid_argument("phase_portrait: series too short");

  const double level = position.mean();
  std::vector<double> crossings;
  for (int i = 0; i + 1 < n; ++i) {
    if (position(i) < level && position(i + 1) >= level) {
      crossings.push_back(refine_crossing(position, i, level));
    }
  }
  if (crossings.size() < 3) {
    throw std::invalid_argument("phase_portrait: fewer than two full cycles");
  }

  OrbitStats stats;
  stats.cycles = static_cast<int>(crossings.size()) - 1;
  double period_sum = 0.0;
  for (std::size_t c = 0; c + 1 < crossings.size(); ++c) period_sum += crossings[c + 1] - crossings[c];
  stats.period = period_sum / static_cast<double>(stats.cycles) / sample_rate;

  constexpr int kPhasePoints = 64;
  std::vector<MatX> cycles;  // each 2 x kPhasePoints
  for (std::size_t c = 0; c + 1 < crossings.size(); ++c) {
    MatX orbit(2, kPhasePoints);
    for (int p = 0; p < kPhasePoints; ++p) {
      const double t = crossings[c] +
                       (crossings[c + 1] - crossings[c]) * p / static_cast<double>(kPhasePoints);
      orbit(0, p) = hermite_interp(position, t);
      orbit(1, p) = hermite_interp(velocity, t);
    }
    cycles.push_back(std::move(orbit));
  }

  double qmin = 1e300, qmax = -1e300, vmin = 1e300, vmax = -1e300;
  for (const auto& orbit : cycles) {
    qmin = std::min(qmin, orbit.row(0).minCoeff());
    qmax = std::max(qmax, orbit.row(0).maxCoeff());
    vmin = std::min(vmin, orbit.row(1).minCoeff());
    vmax = std::max(vmax, orbit.row(1).maxCoeff());
  }
  stats.position_min = qmin;
  stats.position_max = qmax;
  stats.velocity_min = vmin;
  stats.velocity_max = vmax;

  const double q_range = std::max(qmax - qmin, 1e-12);
  const double v_range = std::max(vmax - vmin, 1e-12);
  double dist_sum = 0.0;
  int dist_count = 0;
  for (std::size_t c = 0; c + 1 < cycles.size(); ++c) {
    for (int p = 0; p < kPhasePoints; ++p) {
      const double dq = (cycles[c + 1](0, p) - cycles[c](0, p)) / q_range;
      const double dv = (cycles[c + 1](1, p) - cycles[c](1, p)) / v_range;
      dist_sum += std::sqrt(dq * dq + dv * dv);
      ++dist_count;
    }
  }
  // Normalized orbit diameter is the unit-square diagonal.
  stats.closure_metric = dist_count ? dist_sum / dist_count / std::sqrt(2.0) : 0.0;
  stats.periodic = stats.closure_metric < closure_threshold;
  return stats;
}

OrbitStats phase_portrait(const Rollout& rollout, int joint_id, double closure_threshold) {
  const int n = static_cast<int>(rollout.steps.size());
  if (n == 0) throw std::invalid_argument("phase_portrait: empty rollout");
  if (joint_id < 0 || joint_id >= rollout.steps[0].state.joint_positions.size()) {
    throw std::invalid_argument("phase_portrait: bad joint id");
  }
  VecX q(n), qd(n);
  for (int k = 0; k < n; ++k) {
    q(k) = rollout.steps[static_cast<std::size_t>(k)].state.joint_positions(joint_id);
    qd(k) = rollout.steps[static_cast<std::size_t>(k)].state.joint_velocities(joint_id);
  }
  return phase_portrait(q, qd, kPolicyRateHz, closure_threshold);
}

std::vector<SweepPoint> success_sweep(const Policy& policy, const RobotModel& model,
                                      const TrajectorySpec& trajectory, const SweepSpec& sweep,
                                      const EnvOptions& options) {
  std::vector<SweepPoint> table;
  if (sweep.episodes_per_point <= 0) return table;
  const Trajectory path = generate(trajectory);

  auto run_point = [&](const RobotModel& m, const Environment& env_in, SweepPoint point) {
    EnvOptions opts = options;
    opts.environment = env_in;
    opts.stochastic = false;
    opts.episode.max_duration = path.duration();
    const Vec3 final_target = path.positions().back();
    for (int e = 0; e < sweep.episodes_per_point; ++e) {
      const Rollout rollout =
          run_episode(policy, m, path, opts, sweep.seed + static_cast<std::uint64_t>(e) * 7919u);
      const bool survived = rollout.termination == TerminationReason::Timeout;
      const bool close = !rollout.steps.empty() &&
                         (rollout.steps.back().state.base_position - final_target).norm() <=
                             opts.episode.position_tolerance;
      if (survived && close) ++point.successes;
      ++point.episodes;
    }
    point.success_rate = static_cast<double>(point.successes) / point.episodes;
    table.push_back(point);
  };

  for (const auto& name : sweep.coefficients) {
    for (const double scale : sweep.scales) {
      RobotModel m = model;
      auto& c = m.coefficients;
      if (name == "c_d_blunt" || name == "all") c.c_d_blunt *= scale;
      if (name == "c_d_slender" || name == "all") c.c_d_slender *= scale;
      if (name == "c_d_angular" || name == "all") c.c_d_angular *= scale;
      if (name == "c_kutta" || name == "all") c.c_kutta *= scale;
      if (name == "c_magnus" || name == "all") c.c_magnus *= scale;
      SweepPoint point;
      point.parameter = name;
      point.scale = scale;
      run_point(m, options.environment, point);
    }
  }
  for (const Vec3& wind : sweep.winds) {
    Environment env = options.environment;
    env.wind_velocity = wind;
    SweepPoint point;
    point.parameter = "wind";
    point.wind = wind;
    run_point(model, env, point);
  }
  return table;
}

std::string sweep_to_csv(const std::vector<SweepPoint>& table) {
  std::ostringstream out;
  out << "parameter,scale,wind_x_mps,wind_y_mps,wind_z_mps,episodes,successes,success_rate\n";
  for (const auto& p : table) {
    out << p.parameter << "," << format_double(p.scale) << "," << format_double(p.wind.x()) << ","
        << format_double(p.wind.y()) << "," << format_double(p.wind.z()) << "," << p.episodes
        << "," << p.successes << "," << format_double(p.success_rate) << "\n";
  }
  return out.str();
}

}  // namespace fwsim
