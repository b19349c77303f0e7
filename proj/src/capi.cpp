#include "releqf/releqf.h"

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <stdexcept>
#include <string>

#include "errors.hpp"
#include "sim.hpp"

using releqf::Matrix3d;
using releqf::Matrix6d;
using releqf::Vector3d;

struct releqf_filter {
  releqf::Eqf impl;
};

struct releqf_ekf {
  releqf::Ekf impl;
};

struct releqf_scenario {
  releqf::Scenario impl;
};

struct releqf_run {
  releqf::RunLog impl;
};

namespace {

thread_local std::string g_last_error;

releqf_status fail(releqf_status status, const char* what) {
  g_last_error = what;
  return status;
}

// Runs fn, translating the library's exception taxonomy to status codes.
template <typename Fn>
releqf_status guarded(Fn&& fn) {
  try {
    fn();
    return RELEQF_OK;
  } catch (const releqf::NonSkewInput& e) {
    return fail(RELEQF_ERR_NON_SKEW, e.what());
  } catch (const releqf::NearPiSingularity& e) {
    return fail(RELEQF_ERR_NEAR_PI, e.what());
  } catch (const releqf::LostPositivity& e) {
    return fail(RELEQF_ERR_LOST_POSITIVITY, e.what());
  } catch (const releqf::DegenerateDirections& e) {
    return fail(RELEQF_ERR_DEGENERATE_DIRECTIONS, e.what());
  } catch (const releqf::NumericError& e) {
    return fail(RELEQF_ERR_NUMERIC, e.what());
  } catch (const std::invalid_argument& e) {
    return fail(RELEQF_ERR_INVALID_ARGUMENT, e.what());
  } catch (const std::exception& e) {
    return fail(RELEQF_ERR_INTERNAL, e.what());
  } catch (...) {
    return fail(RELEQF_ERR_INTERNAL, "unknown exception");
  }
}

releqf_status null_arg(const char* where) {
  return fail(RELEQF_ERR_INVALID_ARGUMENT,
              (std::string(where) + ": null pointer").c_str());
}

using RowMat3 = Eigen::Matrix<double, 3, 3, Eigen::RowMajor>;
using RowMat6 = Eigen::Matrix<double, 6, 6, Eigen::RowMajor>;

Matrix3d mat3_from(const double m[9]) {
  return Eigen::Map<const RowMat3>(m);
}

void mat3_to(const Matrix3d& src, double out[9]) {
  Eigen::Map<RowMat3>{out} = src;
}

Matrix6d mat6_from(const double m[36]) {
  return Eigen::Map<const RowMat6>(m);
}

void mat6_to(const Matrix6d& src, double out[36]) {
  Eigen::Map<RowMat6>{out} = src;
}

Vector3d vec3_from(const double v[3]) {
  return Eigen::Map<const Vector3d>(v);
}

void vec3_to(const Vector3d& src, double out[3]) {
  Eigen::Map<Vector3d>{out} = src;
}

releqf::GainConfig to_gain_config(const releqf_gains& g) {
  releqf::GainConfig out;
  out.sigma0 = mat6_from(g.sigma0);
  out.M = mat6_from(g.m_gain);
  out.N = mat6_from(g.n_gain);
  out.scale_update_damping = g.scale_update_damping != 0;
  return out;
}

releqf::ScenarioConfig to_scenario_config(const releqf_scenario_config& c) {
  releqf::ScenarioConfig out;
  out.seed = c.seed;
  out.duration = c.duration_s;
  out.predict_rate = c.predict_rate_hz;
  out.measure_rate = c.measure_rate_hz;
  out.update_iterations = c.update_iterations;
  out.sigma_theta = c.sigma_theta_rad;
  out.d1 = vec3_from(c.d1);
  out.d2 = vec3_from(c.d2);
  out.omega_T_range = c.omega_t_range;
  out.u_range = c.u_range;
  return out;
}

releqf::SuccessCriterion to_criterion(const releqf_success_criterion& c) {
  releqf::SuccessCriterion out;
  out.attitude_threshold = c.attitude_threshold;
  out.rate_threshold = c.rate_threshold;
  out.deadline = c.deadline_s;
  out.metrics_start = c.metrics_start_s;
  return out;
}

// Inverse of the estimate read-out: the internal pair tracking attitude R
// and rate omega is (Q, q) = (R, -R omega).
releqf::GroupElement group_from_estimate(const double rotation[9],
                                         const double omega[3]) {
  const releqf::Rotation Q = releqf::Rotation::from_matrix(mat3_from(rotation));
  const Vector3d w = vec3_from(omega);
  return releqf::GroupElement{Q, -(Q * w)};
}

void write_estimate(const releqf::ManifoldState& x, double rotation[9],
                    double omega[3]) {
  mat3_to(x.R.matrix(), rotation);
  vec3_to(x.omega, omega);
}

}  // namespace

const char* releqf_status_name(releqf_status status) {
  switch (status) {
    case RELEQF_OK:
      return "RELEQF_OK";
    case RELEQF_ERR_INVALID_ARGUMENT:
      return "RELEQF_ERR_INVALID_ARGUMENT";
    case RELEQF_ERR_NON_SKEW:
      return "RELEQF_ERR_NON_SKEW";
    case RELEQF_ERR_NEAR_PI:
      return "RELEQF_ERR_NEAR_PI";
    case RELEQF_ERR_LOST_POSITIVITY:
      return "RELEQF_ERR_LOST_POSITIVITY";
    case RELEQF_ERR_DEGENERATE_DIRECTIONS:
      return "RELEQF_ERR_DEGENERATE_DIRECTIONS";
    case RELEQF_ERR_NUMERIC:
      return "RELEQF_ERR_NUMERIC";
    case RELEQF_ERR_INTERNAL:
      return "RELEQF_ERR_INTERNAL";
  }
  return "RELEQF_ERR_UNKNOWN";
}

const char* releqf_last_error(void) { return g_last_error.c_str(); }

const char* releqf_version(void) { return "1.0.0"; }

void releqf_gains_default(releqf_gains* out) {
  if (out == nullptr) return;
  const releqf::GainConfig defaults;
  mat6_to(defaults.sigma0, out->sigma0);
  mat6_to(defaults.M, out->m_gain);
  mat6_to(defaults.N, out->n_gain);
  out->scale_update_damping = defaults.scale_update_damping ? 1 : 0;
}

void releqf_scenario_config_default(releqf_scenario_config* out) {
  if (out == nullptr) return;
  const releqf::ScenarioConfig defaults;
  out->seed = defaults.seed;
  out->duration_s = defaults.duration;
  out->predict_rate_hz = defaults.predict_rate;
  out->measure_rate_hz = defaults.measure_rate;
  out->update_iterations = defaults.update_iterations;
  out->sigma_theta_rad = defaults.sigma_theta;
  vec3_to(defaults.d1, out->d1);
  vec3_to(defaults.d2, out->d2);
  out->omega_t_range = defaults.omega_T_range;
  out->u_range = defaults.u_range;
}

void releqf_success_criterion_default(releqf_success_criterion* out) {
  if (out == nullptr) return;
  const releqf::SuccessCriterion defaults;
  out->attitude_threshold = defaults.attitude_threshold;
  out->rate_threshold = defaults.rate_threshold;
  out->deadline_s = defaults.deadline;
  out->metrics_start_s = defaults.metrics_start;
}

/* ------------------------------------------------------------------ */
/* Equivariant filter                                                  */
/* ------------------------------------------------------------------ */

releqf_status releqf_filter_create(const releqf_gains* gains,
                                   const double d1[3], const double d2[3],
                                   releqf_filter** out) {
  if (gains == nullptr || d1 == nullptr || d2 == nullptr || out == nullptr) {
    return null_arg("releqf_filter_create");
  }
  return guarded([&] {
    const releqf::ReferenceDirections refs(vec3_from(d1), vec3_from(d2));
    *out = new releqf_filter{releqf::Eqf(to_gain_config(*gains), refs)};
  });
}

void releqf_filter_destroy(releqf_filter* filter) { delete filter; }

releqf_status releqf_filter_set_estimate(releqf_filter* filter,
                                         const double rotation[9],
                                         const double omega[3]) {
  if (filter == nullptr || rotation == nullptr || omega == nullptr) {
    return null_arg("releqf_filter_set_estimate");
  }
  return guarded(
      [&] { filter->impl.set_state(group_from_estimate(rotation, omega)); });
}

releqf_status releqf_filter_predict(releqf_filter* filter, const double u[3],
                                    double dt_s) {
  if (filter == nullptr || u == nullptr) {
    return null_arg("releqf_filter_predict");
  }
  return guarded([&] { filter->impl.predict(vec3_from(u), dt_s); });
}

releqf_status releqf_filter_update(releqf_filter* filter, const double d1[3],
                                   const double d2[3], double gap_s,
                                   int iterations) {
  if (filter == nullptr || d1 == nullptr || d2 == nullptr) {
    return null_arg("releqf_filter_update");
  }
  return guarded([&] {
    releqf::Measurement y;
    y.d1 = vec3_from(d1);
    y.d2 = vec3_from(d2);
    filter->impl.update(y, gap_s, iterations);
  });
}

releqf_status releqf_filter_estimate(const releqf_filter* filter,
                                     double rotation[9], double omega[3]) {
  if (filter == nullptr || rotation == nullptr || omega == nullptr) {
    return null_arg("releqf_filter_estimate");
  }
  return guarded(
      [&] { write_estimate(filter->impl.state_estimate(), rotation, omega); });
}

releqf_status releqf_filter_covariance(const releqf_filter* filter,
                                       double sigma[36]) {
  if (filter == nullptr || sigma == nullptr) {
    return null_arg("releqf_filter_covariance");
  }
  return guarded([&] { mat6_to(filter->impl.state().Sigma, sigma); });
}

releqf_status releqf_filter_last_correction(const releqf_filter* filter,
                                            double delta_attitude[3],
                                            double delta_rate[3]) {
  if (filter == nullptr || delta_attitude == nullptr || delta_rate == nullptr) {
    return null_arg("releqf_filter_last_correction");
  }
  return guarded([&] {
    const releqf::Correction& c = filter->impl.last_correction();
    vec3_to(c.delta_Q, delta_attitude);
    vec3_to(c.delta_q, delta_rate);
  });
}

/* ------------------------------------------------------------------ */
/* Baseline Kalman filter                                              */
/* ------------------------------------------------------------------ */

releqf_status releqf_ekf_create(const releqf_gains* gains, const double d1[3],
                                const double d2[3], releqf_ekf** out) {
  if (gains == nullptr || d1 == nullptr || d2 == nullptr || out == nullptr) {
    return null_arg("releqf_ekf_create");
  }
  return guarded([&] {
    const releqf::ReferenceDirections refs(vec3_from(d1), vec3_from(d2));
    releqf::EkfConfig config;
    config.N = mat6_from(gains->n_gain);
    *out = new releqf_ekf{releqf::Ekf(config, refs)};
  });
}

void releqf_ekf_destroy(releqf_ekf* filter) { delete filter; }

releqf_status releqf_ekf_set_estimate(releqf_ekf* filter,
                                      const double rotation[9],
                                      const double omega[3]) {
  if (filter == nullptr || rotation == nullptr || omega == nullptr) {
    return null_arg("releqf_ekf_set_estimate");
  }
  return guarded([&] {
    const Matrix3d R = mat3_from(rotation);
    (void)releqf::Rotation::from_matrix(R);  // validates orthonormality
    releqf::EkfState s = filter->impl.state();
    s.x.head<9>() = releqf::vect(R);
    s.x.tail<3>() = vec3_from(omega);
    filter->impl.set_state(s);
  });
}

releqf_status releqf_ekf_predict(releqf_ekf* filter, const double u[3],
                                 double dt_s) {
  if (filter == nullptr || u == nullptr) {
    return null_arg("releqf_ekf_predict");
  }
  return guarded([&] { filter->impl.predict(vec3_from(u), dt_s); });
}

releqf_status releqf_ekf_update(releqf_ekf* filter, const double d1[3],
                                const double d2[3], double gap_s) {
  if (filter == nullptr || d1 == nullptr || d2 == nullptr) {
    return null_arg("releqf_ekf_update");
  }
  return guarded([&] {
    releqf::Measurement y;
    y.d1 = vec3_from(d1);
    y.d2 = vec3_from(d2);
    filter->impl.update(y, gap_s);
  });
}

releqf_status releqf_ekf_estimate(const releqf_ekf* filter, double rotation[9],
                                  double omega[3]) {
  if (filter == nullptr || rotation == nullptr || omega == nullptr) {
    return null_arg("releqf_ekf_estimate");
  }
  return guarded(
      [&] { write_estimate(filter->impl.state_estimate(), rotation, omega); });
}

releqf_status releqf_ekf_covariance_trace(const releqf_ekf* filter,
                                          double* trace) {
  if (filter == nullptr || trace == nullptr) {
    return null_arg("releqf_ekf_covariance_trace");
  }
  return guarded([&] { *trace = filter->impl.state().P.trace(); });
}

/* ------------------------------------------------------------------ */
/* Scenarios                                                           */
/* ------------------------------------------------------------------ */

releqf_status releqf_scenario_create(const releqf_scenario_config* config,
                                     releqf_scenario** out) {
  if (config == nullptr || out == nullptr) {
    return null_arg("releqf_scenario_create");
  }
  return guarded([&] {
    *out = new releqf_scenario{
        releqf::generate_scenario(to_scenario_config(*config))};
  });
}

void releqf_scenario_destroy(releqf_scenario* scenario) { delete scenario; }

releqf_status releqf_scenario_gyro(const releqf_scenario* scenario,
                                   double u[3]) {
  if (scenario == nullptr || u == nullptr) {
    return null_arg("releqf_scenario_gyro");
  }
  vec3_to(scenario->impl.u, u);
  return RELEQF_OK;
}

int64_t releqf_scenario_predict_period_ns(const releqf_scenario* scenario) {
  return scenario == nullptr ? 0 : scenario->impl.predict_period_ns;
}

int64_t releqf_scenario_measure_period_ns(const releqf_scenario* scenario) {
  return scenario == nullptr ? 0 : scenario->impl.measure_period_ns;
}

int64_t releqf_scenario_duration_ns(const releqf_scenario* scenario) {
  return scenario == nullptr ? 0 : scenario->impl.duration_ns;
}

size_t releqf_scenario_measurement_count(const releqf_scenario* scenario) {
  return scenario == nullptr ? 0 : scenario->impl.measurements.size();
}

releqf_status releqf_scenario_measurement(const releqf_scenario* scenario,
                                          size_t index, int64_t* t_ns,
                                          double d1[3], double d2[3]) {
  if (scenario == nullptr || t_ns == nullptr || d1 == nullptr ||
      d2 == nullptr) {
    return null_arg("releqf_scenario_measurement");
  }
  if (index >= scenario->impl.measurements.size()) {
    return fail(RELEQF_ERR_INVALID_ARGUMENT,
                "releqf_scenario_measurement: index out of range");
  }
  *t_ns = scenario->impl.measurement_times_ns[index];
  vec3_to(scenario->impl.measurements[index].d1, d1);
  vec3_to(scenario->impl.measurements[index].d2, d2);
  return RELEQF_OK;
}

releqf_status releqf_scenario_truth(const releqf_scenario* scenario,
                                    double t_s, double rotation[9],
                                    double omega[3]) {
  if (scenario == nullptr || rotation == nullptr || omega == nullptr) {
    return null_arg("releqf_scenario_truth");
  }
  return guarded(
      [&] { write_estimate(scenario->impl.truth_at(t_s), rotation, omega); });
}

/* ------------------------------------------------------------------ */
/* Closed-loop runs                                                    */
/* ------------------------------------------------------------------ */

releqf_status releqf_simulate(const releqf_scenario_config* config,
                              const releqf_gains* gains, releqf_run** out) {
  if (config == nullptr || gains == nullptr || out == nullptr) {
    return null_arg("releqf_simulate");
  }
  return guarded([&] {
    const releqf::Scenario sc =
        releqf::generate_scenario(to_scenario_config(*config));
    releqf::EqfDriver driver(to_gain_config(*gains), sc.refs());
    *out = new releqf_run{releqf::run_filter(sc, driver)};
  });
}

releqf_status releqf_simulate_ekf(const releqf_scenario_config* config,
                                  const releqf_gains* gains,
                                  releqf_run** out) {
  if (config == nullptr || gains == nullptr || out == nullptr) {
    return null_arg("releqf_simulate_ekf");
  }
  return guarded([&] {
    const releqf::Scenario sc =
        releqf::generate_scenario(to_scenario_config(*config));
    releqf::EkfConfig ekf_config;
    ekf_config.N = mat6_from(gains->n_gain);
    releqf::EkfDriver driver(ekf_config, sc.refs());
    *out = new releqf_run{releqf::run_filter(sc, driver)};
  });
}

void releqf_run_destroy(releqf_run* run) { delete run; }

size_t releqf_run_row_count(const releqf_run* run) {
  return run == nullptr ? 0 : run->impl.rows.size();
}

releqf_status releqf_run_row(const releqf_run* run, size_t index,
                             releqf_log_row* out) {
  if (run == nullptr || out == nullptr) {
    return null_arg("releqf_run_row");
  }
  if (index >= run->impl.rows.size()) {
    return fail(RELEQF_ERR_INVALID_ARGUMENT,
                "releqf_run_row: index out of range");
  }
  const releqf::LogRow& row = run->impl.rows[index];
  out->t_ns = row.t_ns;
  out->t_s = row.t();
  mat3_to(row.estimate.R.matrix(), out->r_est);
  vec3_to(row.estimate.omega, out->omega_est);
  mat3_to(row.truth.R.matrix(), out->r_true);
  vec3_to(row.truth.omega, out->omega_true);
  out->err_attitude = row.err_Q;
  out->err_rate = row.err_q;
  vec3_to(row.delta_Q, out->delta_attitude);
  vec3_to(row.delta_q, out->delta_rate);
  out->sigma_trace = row.sigma_trace;
  return RELEQF_OK;
}

releqf_status releqf_run_convergence_time(const releqf_run* run,
                                          double attitude_threshold,
                                          double rate_threshold, double* out) {
  if (run == nullptr || out == nullptr) {
    return null_arg("releqf_run_convergence_time");
  }
  return guarded([&] {
    const std::optional<double> t =
        releqf::convergence_time(run->impl, attitude_threshold, rate_threshold);
    *out = t.has_value() ? *t : std::numeric_limits<double>::quiet_NaN();
  });
}

releqf_status releqf_run_metrics_compute(const releqf_run* run,
                                         double window_start_s,
                                         releqf_run_metrics* out) {
  if (run == nullptr || out == nullptr) {
    return null_arg("releqf_run_metrics_compute");
  }
  return guarded([&] {
    const releqf::RunMetrics m = releqf::metrics(run->impl, window_start_s);
    out->n_samples = m.n_samples;
    out->mean_attitude_error = m.mean_attitude_error;
    out->mean_rate_error = m.mean_rate_error;
    vec3_to(m.mean_euler_abs_error, out->mean_euler_abs_error);
    out->rate_norm = m.rate_norm;
    out->relative_rate_error = m.relative_rate_error;
  });
}

/* ------------------------------------------------------------------ */
/* Monte Carlo                                                         */
/* ------------------------------------------------------------------ */

releqf_status releqf_monte_carlo(const releqf_scenario_config* config,
                                 const releqf_gains* gains, int n_runs,
                                 const releqf_success_criterion* criterion,
                                 releqf_mc_stats* out,
                                 double* convergence_times) {
  if (config == nullptr || gains == nullptr || criterion == nullptr ||
      out == nullptr) {
    return null_arg("releqf_monte_carlo");
  }
  return guarded([&] {
    const releqf::MonteCarloStats stats =
        releqf::monte_carlo(to_scenario_config(*config), n_runs,
                            to_criterion(*criterion), to_gain_config(*gains));
    out->n_runs = stats.n_runs;
    out->n_failures = stats.n_failures;
    out->success_rate = stats.success_rate;
    out->mean_attitude_error = stats.mean_attitude_error;
    out->mean_rate_error = stats.mean_rate_error;
    if (convergence_times != nullptr) {
      std::copy(stats.convergence_times.begin(), stats.convergence_times.end(),
                convergence_times);
    }
  });
}

/* ------------------------------------------------------------------ */
/* Observability diagnostic                                            */
/* ------------------------------------------------------------------ */

releqf_status releqf_observability(const double rotation[9],
                                   const double omega[3], const double u[3],
                                   const double d1[3], const double d2[3],
                                   int expanded, int n_lie,
                                   releqf_observability_result* out) {
  if (rotation == nullptr || omega == nullptr || u == nullptr ||
      d1 == nullptr || d2 == nullptr || out == nullptr) {
    return null_arg("releqf_observability");
  }
  return guarded([&] {
    releqf::ManifoldState x;
    x.R = releqf::Rotation::from_matrix(mat3_from(rotation));
    x.omega = vec3_from(omega);
    releqf::SystemInput in;
    in.u = vec3_from(u);
    const releqf::ReferenceDirections refs(vec3_from(d1), vec3_from(d2));
    const releqf::Observability obs =
        releqf::observability_rank(x, in, refs, expanded != 0, n_lie);
    out->rank = obs.rank;
    out->state_dim = obs.state_dim;
    const int n = std::min<int>(12, static_cast<int>(obs.singular_values.size()));
    for (int i = 0; i < 12; ++i) {
      out->singular_values[i] = i < n ? obs.singular_values(i) : 0.0;
    }
    out->reference_residual = obs.reference_residual;
    out->reference_angle = obs.reference_angle;
  });
}
