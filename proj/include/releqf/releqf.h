#ifndef RELEQF_H
#define RELEQF_H

/*
 * C interface to the relative-attitude equivariant filter library.
 *
 * The filter estimates the attitude of a target frame relative to a chaser
 * frame, plus the target's angular velocity, from chaser gyro samples and two
 * body-fixed direction measurements. All rotation matrices cross this
 * interface in row-major order; vectors are xyz triples; angles are radians,
 * rates rad/s, times seconds unless a _ns suffix says nanoseconds.
 *
 * Every fallible call returns a releqf_status. On failure the out parameters
 * are untouched and releqf_last_error() describes the problem for the calling
 * thread.
 */

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum releqf_status {
  RELEQF_OK = 0,
  RELEQF_ERR_INVALID_ARGUMENT = 1,  /* null pointer or bad config value */
  RELEQF_ERR_NON_SKEW = 2,          /* matrix expected to be skew is not */
  RELEQF_ERR_NEAR_PI = 3,           /* rotation log at the pi branch cut */
  RELEQF_ERR_LOST_POSITIVITY = 4,   /* covariance no longer SPD */
  RELEQF_ERR_DEGENERATE_DIRECTIONS = 5, /* reference directions collinear */
  RELEQF_ERR_NUMERIC = 6,           /* other numeric failure */
  RELEQF_ERR_INTERNAL = 7           /* unexpected exception */
} releqf_status;

/* Stable identifier string for a status code, e.g. "RELEQF_ERR_NEAR_PI". */
const char* releqf_status_name(releqf_status status);

/* Message for the most recent failure on the calling thread ("" if none). */
const char* releqf_last_error(void);

/* Library version as "major.minor.patch". */
const char* releqf_version(void);

/* ------------------------------------------------------------------ */
/* Gains and configuration                                             */
/* ------------------------------------------------------------------ */

/* Filter gain matrices, 6x6 row-major. sigma0 is the initial covariance, m
 * the state gain (covariance growth), n the output gain. When
 * scale_update_damping is nonzero the covariance contraction in an iterated
 * update uses the sub-step period; zero uses the full measurement gap. */
typedef struct releqf_gains {
  double sigma0[36];
  double m_gain[36];
  double n_gain[36];
  int scale_update_damping;
} releqf_gains;

/* sigma0 = I, m = I, n = 0.1 I, scale_update_damping = 1. */
void releqf_gains_default(releqf_gains* out);

typedef struct releqf_scenario_config {
  uint64_t seed;
  double duration_s;
  double predict_rate_hz;
  double measure_rate_hz;
  int update_iterations;
  double sigma_theta_rad;   /* direction noise angle sigma */
  double d1[3];             /* reference directions, normalized on use */
  double d2[3];
  double omega_t_range;     /* per-axis uniform bound on the target rate */
  double u_range;           /* per-axis uniform bound on the gyro input */
} releqf_scenario_config;

/* seed 42, 10 s, 100 Hz predict and measure, 1 iteration, sigma 0.1 rad,
 * d1 = [1,0,0], d2 = [0,1,0], ranges 1.5 rad/s. */
void releqf_scenario_config_default(releqf_scenario_config* out);

typedef struct releqf_success_criterion {
  double attitude_threshold;  /* on ||Q~ - I||_F */
  double rate_threshold;      /* on the rate error norm, rad/s */
  double deadline_s;          /* convergence must occur before this */
  double metrics_start_s;     /* post-convergence averaging window start */
} releqf_success_criterion;

/* 0.1, 0.1, 10 s, 4 s. */
void releqf_success_criterion_default(releqf_success_criterion* out);

/* ------------------------------------------------------------------ */
/* Equivariant filter handle                                           */
/* ------------------------------------------------------------------ */

typedef struct releqf_filter releqf_filter;

releqf_status releqf_filter_create(const releqf_gains* gains,
                                   const double d1[3], const double d2[3],
                                   releqf_filter** out);
void releqf_filter_destroy(releqf_filter* filter);

/* Warm start from an attitude/rate pair; covariance untouched. */
releqf_status releqf_filter_set_estimate(releqf_filter* filter,
                                         const double rotation[9],
                                         const double omega[3]);

releqf_status releqf_filter_predict(releqf_filter* filter, const double u[3],
                                    double dt_s);

/* Iterated measurement update: gap_s is the time since the previous update
 * (used to discretize the correction), iterations >= 1 splits it. */
releqf_status releqf_filter_update(releqf_filter* filter, const double d1[3],
                                   const double d2[3], double gap_s,
                                   int iterations);

releqf_status releqf_filter_estimate(const releqf_filter* filter,
                                     double rotation[9], double omega[3]);

releqf_status releqf_filter_covariance(const releqf_filter* filter,
                                       double sigma[36]);

/* Correction terms applied by the last update (zeros before any update). */
releqf_status releqf_filter_last_correction(const releqf_filter* filter,
                                            double delta_attitude[3],
                                            double delta_rate[3]);

/* ------------------------------------------------------------------ */
/* Baseline 12-state Kalman filter handle                              */
/* ------------------------------------------------------------------ */

typedef struct releqf_ekf releqf_ekf;

/* Uses gains->n_gain for the output covariance; the 12x12 initial covariance
 * and state gain are identity (mirroring the default filter tuning). */
releqf_status releqf_ekf_create(const releqf_gains* gains, const double d1[3],
                                const double d2[3], releqf_ekf** out);
void releqf_ekf_destroy(releqf_ekf* filter);

releqf_status releqf_ekf_set_estimate(releqf_ekf* filter,
                                      const double rotation[9],
                                      const double omega[3]);

releqf_status releqf_ekf_predict(releqf_ekf* filter, const double u[3],
                                 double dt_s);

/* Single Kalman update; the measurement covariance is n_gain / gap_s. */
releqf_status releqf_ekf_update(releqf_ekf* filter, const double d1[3],
                                const double d2[3], double gap_s);

releqf_status releqf_ekf_estimate(const releqf_ekf* filter, double rotation[9],
                                  double omega[3]);

releqf_status releqf_ekf_covariance_trace(const releqf_ekf* filter,
                                          double* trace);

/* ------------------------------------------------------------------ */
/* Scenarios                                                           */
/* ------------------------------------------------------------------ */

typedef struct releqf_scenario releqf_scenario;

/* Samples a scenario from the config's seed: random initial attitude,
 * constant target rate and gyro input, noisy direction measurements on the
 * measurement schedule. Equal configs give bitwise-equal scenarios. */
releqf_status releqf_scenario_create(const releqf_scenario_config* config,
                                     releqf_scenario** out);
void releqf_scenario_destroy(releqf_scenario* scenario);

releqf_status releqf_scenario_gyro(const releqf_scenario* scenario,
                                   double u[3]);
int64_t releqf_scenario_predict_period_ns(const releqf_scenario* scenario);
int64_t releqf_scenario_measure_period_ns(const releqf_scenario* scenario);
int64_t releqf_scenario_duration_ns(const releqf_scenario* scenario);
size_t releqf_scenario_measurement_count(const releqf_scenario* scenario);

releqf_status releqf_scenario_measurement(const releqf_scenario* scenario,
                                          size_t index, int64_t* t_ns,
                                          double d1[3], double d2[3]);

/* Ground truth at an arbitrary time (closed-form flow). */
releqf_status releqf_scenario_truth(const releqf_scenario* scenario,
                                    double t_s, double rotation[9],
                                    double omega[3]);

/* ------------------------------------------------------------------ */
/* Closed-loop runs                                                    */
/* ------------------------------------------------------------------ */

typedef struct releqf_log_row {
  int64_t t_ns;          /* exact event time */
  double t_s;            /* t_ns in seconds */
  double r_est[9];       /* row-major estimated attitude */
  double omega_est[3];
  double r_true[9];
  double omega_true[3];
  double err_attitude;   /* ||R_true R_est^T - I||_F */
  double err_rate;       /* ||omega_true - omega_est|| */
  double delta_attitude[3];  /* correction since the previous row */
  double delta_rate[3];
  double sigma_trace;
} releqf_log_row;

typedef struct releqf_run releqf_run;

/* Runs the equivariant filter (identity-initialized) over the scenario
 * sampled from the config; one row per prediction tick plus the initial row. */
releqf_status releqf_simulate(const releqf_scenario_config* config,
                              const releqf_gains* gains, releqf_run** out);

/* Same closed loop driven by the baseline 12-state filter. */
releqf_status releqf_simulate_ekf(const releqf_scenario_config* config,
                                  const releqf_gains* gains, releqf_run** out);

void releqf_run_destroy(releqf_run* run);
size_t releqf_run_row_count(const releqf_run* run);
releqf_status releqf_run_row(const releqf_run* run, size_t index,
                             releqf_log_row* out);

/* Earliest time from which both error norms stay below the thresholds to the
 * end of the run; NaN if the final row still violates them. */
releqf_status releqf_run_convergence_time(const releqf_run* run,
                                          double attitude_threshold,
                                          double rate_threshold, double* out);

typedef struct releqf_run_metrics {
  int n_samples;
  double mean_attitude_error;
  double mean_rate_error;
  double mean_euler_abs_error[3]; /* |roll|, |pitch|, |yaw| means, ZYX, rad */
  double rate_norm;               /* ||omega_T|| of the scenario */
  double relative_rate_error;     /* mean_rate_error / rate_norm */
} releqf_run_metrics;

/* Error means over rows with t > window_start_s. */
releqf_status releqf_run_metrics_compute(const releqf_run* run,
                                         double window_start_s,
                                         releqf_run_metrics* out);

/* ------------------------------------------------------------------ */
/* Monte Carlo                                                         */
/* ------------------------------------------------------------------ */

typedef struct releqf_mc_stats {
  int n_runs;
  int n_failures;
  double success_rate;
  double mean_attitude_error;  /* over successful runs, post-window */
  double mean_rate_error;
} releqf_mc_stats;

/* n_runs independent runs with sub-seeds derived from config->seed.
 * convergence_times (nullable) receives n_runs entries, NaN for failures. */
releqf_status releqf_monte_carlo(const releqf_scenario_config* config,
                                 const releqf_gains* gains, int n_runs,
                                 const releqf_success_criterion* criterion,
                                 releqf_mc_stats* out,
                                 double* convergence_times);

/* ------------------------------------------------------------------ */
/* Observability diagnostic                                            */
/* ------------------------------------------------------------------ */

typedef struct releqf_observability_result {
  int rank;
  int state_dim;               /* 12 */
  double singular_values[12];  /* descending */
  /* Diagnostics for the analytically unobserved direction: residual of the
   * stacked gradient matrix on it and its principal angle to the numeric
   * null space (0 when fully contained; NaN at full rank). */
  double reference_residual;
  double reference_angle;
} releqf_observability_result;

/* Rank of the stacked output-derivative gradients at the given state and
 * gyro input, up to Lie-derivative order n_lie (>= 2). Nonzero expanded
 * appends the orthonormality outputs that restore full rank. */
releqf_status releqf_observability(const double rotation[9],
                                   const double omega[3], const double u[3],
                                   const double d1[3], const double d2[3],
                                   int expanded, int n_lie,
                                   releqf_observability_result* out);

#ifdef __cplusplus
}
#endif

#endif /* RELEQF_H */
