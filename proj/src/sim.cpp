#include "sim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace releqf {

void ScenarioConfig::validate() const {
  if (!(duration > 0.0)) {
    throw std::invalid_argument("duration must be positive");
  }
  if (!(predict_rate > 0.0) || !(measure_rate > 0.0)) {
    throw std::invalid_argument("rates must be positive");
  }
  if (update_iterations < 1) {
    throw std::invalid_argument("update_iterations must be >= 1");
  }
  if (!(sigma_theta >= 0.0)) {
    throw std::invalid_argument("sigma_theta must be non-negative");
  }
  if (!(omega_T_range >= 0.0) || !(u_range >= 0.0)) {
    throw std::invalid_argument("sampling ranges must be non-negative");
  }
  refs();  // throws DegenerateDirections on collinear references
}

ManifoldState Scenario::initial_state() const {
  ManifoldState x;
  x.R = R0;
  x.omega = R0.transposed() * omega_T;
  return x;
}

ManifoldState Scenario::truth_at(double t) const {
  return flow_constant_inputs(initial_state(), u, t);
}

Scenario generate_scenario(const ScenarioConfig& cfg) {
  cfg.validate();
  Scenario sc;
  sc.cfg = cfg;
  sc.predict_period_ns = std::llround(1e9 / cfg.predict_rate);
  sc.measure_period_ns = std::llround(1e9 / cfg.measure_rate);
  sc.duration_ns = std::llround(1e9 * cfg.duration);

  Rng rng(cfg.seed);
  sc.R0 = random_rotation(rng);
  for (int i = 0; i < 3; ++i) {
    sc.omega_T[i] = rng.uniform(-cfg.omega_T_range, cfg.omega_T_range);
  }
  for (int i = 0; i < 3; ++i) {
    sc.u[i] = rng.uniform(-cfg.u_range, cfg.u_range);
  }

  const ReferenceDirections refs = cfg.refs();
  const int64_t count = sc.duration_ns / sc.measure_period_ns;
  sc.measurement_times_ns.reserve(static_cast<size_t>(count));
  sc.measurements.reserve(static_cast<size_t>(count));
  for (int64_t m = 1; m <= count; ++m) {
    const int64_t t_ns = m * sc.measure_period_ns;
    const double t = 1e-9 * static_cast<double>(t_ns);
    Measurement y = measure(sc.truth_at(t), refs, t);
    y = apply_noise(y, cfg.sigma_theta, rng);
    sc.measurement_times_ns.push_back(t_ns);
    sc.measurements.push_back(y);
  }
  return sc;
}

void EqfDriver::initialize(const ManifoldState& x0) {
  f_.set_state(embed_state(x0));
}

void EqfDriver::predict(const Vector3d& u, double dt) { f_.predict(u, dt); }

void EqfDriver::update(const Measurement& y, double gap, int iterations) {
  f_.update(y, gap, iterations);
  delta_Q_ = f_.last_correction().delta_Q;
  delta_q_ = f_.last_correction().delta_q;
}

void EkfDriver::initialize(const ManifoldState& x0) {
  EkfState s = f_.state();
  s.x.head<9>() = vect(x0.R.matrix());
  s.x.tail<3>() = x0.omega;
  f_.set_state(s);
}

void EkfDriver::predict(const Vector3d& u, double dt) { f_.predict(u, dt); }

void EkfDriver::update(const Measurement& y, double gap, int /*iterations*/) {
  const ManifoldState before = f_.state_estimate();
  f_.update(y, gap);
  const ManifoldState after = f_.state_estimate();
  delta_Q_ = (after.R * before.R.transposed()).log();
  delta_q_ = after.omega - before.omega;
}

namespace {

LogRow make_row(int64_t t_ns, const ManifoldState& truth,
                const FilterDriver& filter) {
  LogRow row;
  row.t_ns = t_ns;
  row.estimate = filter.estimate();
  row.truth = truth;
  row.err_Q = (truth.R.matrix() * row.estimate.R.matrix().transpose() -
               Matrix3d::Identity())
                  .norm();
  row.err_q = (truth.omega - row.estimate.omega).norm();
  row.delta_Q = filter.last_delta_Q();
  row.delta_q = filter.last_delta_q();
  row.sigma_trace = filter.covariance_trace();
  return row;
}

}  // namespace

RunLog run_filter(const Scenario& sc, FilterDriver& filter) {
  RunLog log;
  const int64_t ticks = sc.duration_ns / sc.predict_period_ns;
  log.rows.reserve(static_cast<size_t>(ticks) + 1);
  log.rows.push_back(make_row(0, sc.truth_at(0.0), filter));
  filter.clear_correction();

  const double dt = 1e-9 * static_cast<double>(sc.predict_period_ns);
  size_t m = 0;
  int64_t last_meas_ns = 0;
  const auto apply_measurement = [&] {
    const double gap =
        1e-9 * static_cast<double>(sc.measurement_times_ns[m] - last_meas_ns);
    filter.update(sc.measurements[m], gap, sc.cfg.update_iterations);
    last_meas_ns = sc.measurement_times_ns[m];
    ++m;
  };
  for (int64_t k = 1; k <= ticks; ++k) {
    const int64_t t_ns = k * sc.predict_period_ns;
    while (m < sc.measurements.size() && sc.measurement_times_ns[m] < t_ns) {
      apply_measurement();
    }
    filter.predict(sc.u, dt);
    while (m < sc.measurements.size() && sc.measurement_times_ns[m] == t_ns) {
      apply_measurement();
    }
    log.rows.push_back(
        make_row(t_ns, sc.truth_at(1e-9 * static_cast<double>(t_ns)), filter));
    filter.clear_correction();
  }
  return log;
}

std::optional<double> convergence_time(const RunLog& log,
                                       double attitude_threshold,
                                       double rate_threshold) {
  const auto ok = [&](const LogRow& r) {
    return r.err_Q < attitude_threshold && r.err_q < rate_threshold;
  };
  size_t idx = log.rows.size();
  while (idx > 0 && ok(log.rows[idx - 1])) {
    --idx;
  }
  if (idx == log.rows.size()) {
    return std::nullopt;  // still violating at the end (or empty log)
  }
  return log.rows[idx].t();
}

Vector3d euler_zyx(const Matrix3d& R) {
  const double pitch = std::asin(std::clamp(-R(2, 0), -1.0, 1.0));
  const double roll = std::atan2(R(2, 1), R(2, 2));
  const double yaw = std::atan2(R(1, 0), R(0, 0));
  return Vector3d(roll, pitch, yaw);
}

RunMetrics metrics(const RunLog& log, double convergence_time) {
  RunMetrics out;
  const double nan = std::numeric_limits<double>::quiet_NaN();
  if (!log.has_truth) {
    out.mean_attitude_error = nan;
    out.mean_rate_error = nan;
    out.mean_euler_abs_error.setConstant(nan);
    out.rate_norm = nan;
    out.relative_rate_error = nan;
    return out;
  }
  double sum_att = 0.0;
  double sum_rate = 0.0;
  Vector3d sum_euler = Vector3d::Zero();
  for (const LogRow& row : log.rows) {
    if (row.t() <= convergence_time) {
      continue;
    }
    sum_att += row.err_Q;
    sum_rate += row.err_q;
    const Matrix3d err_rot =
        row.truth.R.matrix() * row.estimate.R.matrix().transpose();
    sum_euler += euler_zyx(err_rot).cwiseAbs();
    ++out.n_samples;
  }
  if (out.n_samples == 0) {
    out.mean_attitude_error = nan;
    out.mean_rate_error = nan;
    out.mean_euler_abs_error.setConstant(nan);
    out.relative_rate_error = nan;
    out.rate_norm = log.rows.empty() ? nan : log.rows.front().truth.omega.norm();
    return out;
  }
  out.mean_attitude_error = sum_att / out.n_samples;
  out.mean_rate_error = sum_rate / out.n_samples;
  out.mean_euler_abs_error = sum_euler / out.n_samples;
  out.rate_norm = log.rows.front().truth.omega.norm();
  out.relative_rate_error =
      out.rate_norm > 0.0 ? out.mean_rate_error / out.rate_norm : nan;
  return out;
}

MonteCarloStats monte_carlo(const ScenarioConfig& cfg, int n_runs,
                            const SuccessCriterion& crit,
                            const GainConfig& gains) {
  if (n_runs < 1) {
    throw std::invalid_argument("monte_carlo: n_runs must be >= 1");
  }
  MonteCarloStats stats;
  stats.n_runs = n_runs;
  stats.convergence_times.reserve(static_cast<size_t>(n_runs));
  double sum_att = 0.0;
  double sum_rate = 0.0;
  int n_success = 0;
  for (int i = 0; i < n_runs; ++i) {
    ScenarioConfig run_cfg = cfg;
    run_cfg.seed = split_seed(cfg.seed, static_cast<uint64_t>(i));
    const Scenario sc = generate_scenario(run_cfg);
    EqfDriver driver(gains, sc.refs());
    const RunLog log = run_filter(sc, driver);
    const auto t_conv =
        convergence_time(log, crit.attitude_threshold, crit.rate_threshold);
    const bool success = t_conv.has_value() && *t_conv < crit.deadline;
    if (success) {
      stats.convergence_times.push_back(*t_conv);
      const RunMetrics m = metrics(log, crit.metrics_start);
      sum_att += m.mean_attitude_error;
      sum_rate += m.mean_rate_error;
      ++n_success;
    } else {
      stats.convergence_times.push_back(
          std::numeric_limits<double>::quiet_NaN());
      ++stats.n_failures;
    }
  }
  stats.success_rate =
      1.0 - static_cast<double>(stats.n_failures) / stats.n_runs;
  if (n_success > 0) {
    stats.mean_attitude_error = sum_att / n_success;
    stats.mean_rate_error = sum_rate / n_success;
  } else {
    stats.mean_attitude_error = std::numeric_limits<double>::quiet_NaN();
    stats.mean_rate_error = std::numeric_limits<double>::quiet_NaN();
  }
  return stats;
}

}  // namespace releqf
