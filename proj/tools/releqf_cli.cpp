// Command-line front end for the relative-attitude filter library. Talks to
// the library exclusively through the C interface.
//
// Subcommands: simulate, montecarlo, replay, observability, bench,
// compare-ekf. Exit codes: 0 success, 1 usage or configuration error,
// 2 malformed input data, 3 numeric failure.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <ctime>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "releqf/releqf.h"

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitNumeric = 3;

[[noreturn]] void die(int code, const std::string& message) {
  std::fprintf(stderr, "releqf: %s\n", message.c_str());
  std::exit(code);
}

// Maps a library failure to an exit code: configuration problems are usage
// errors, everything else is a numeric failure.
[[noreturn]] void die_status(releqf_status status, const std::string& where) {
  const int code = (status == RELEQF_ERR_INVALID_ARGUMENT ||
                    status == RELEQF_ERR_DEGENERATE_DIRECTIONS)
                       ? kExitUsage
                       : kExitNumeric;
  die(code, where + ": " + releqf_status_name(status) + ": " +
                releqf_last_error());
}

void check(releqf_status status, const std::string& where) {
  if (status != RELEQF_OK) die_status(status, where);
}

/* ------------------------------------------------------------------ */
/* Configuration                                                       */
/* ------------------------------------------------------------------ */

// Scalar gain knobs expanded into the full matrices on use: sigma0 and the
// state gain are scaled identities, the output gain is (1/k_n) I.
struct GainKnobs {
  double sigma0_scale = 1.0;
  double m_scale = 1.0;
  double k_n = 10.0;
  int scale_update_damping = 1;
};

struct Options {
  releqf_scenario_config sim;
  GainKnobs knobs;
  releqf_success_criterion success;

  Options() {
    releqf_scenario_config_default(&sim);
    releqf_success_criterion_default(&success);
  }

  releqf_gains gains() const {
    releqf_gains g;
    std::memset(&g, 0, sizeof g);
    for (int i = 0; i < 6; ++i) {
      g.sigma0[7 * i] = knobs.sigma0_scale;
      g.m_gain[7 * i] = knobs.m_scale;
      g.n_gain[7 * i] = 1.0 / knobs.k_n;
    }
    g.scale_update_damping = knobs.scale_update_damping;
    return g;
  }
};

bool parse_double(const std::string& text, double* out) {
  const char* p = text.c_str();
  char* end = nullptr;
  *out = std::strtod(p, &end);
  return end != p && *end == '\0';
}

bool parse_i64(const std::string& text, int64_t* out) {
  const char* p = text.c_str();
  char* end = nullptr;
  *out = std::strtoll(p, &end, 10);
  return end != p && *end == '\0';
}

bool parse_u64(const std::string& text, uint64_t* out) {
  const char* p = text.c_str();
  char* end = nullptr;
  *out = std::strtoull(p, &end, 10);
  return end != p && *end == '\0';
}

bool parse_triple(const std::string& text, double out[3]) {
  std::string part;
  std::istringstream in(text);
  for (int i = 0; i < 3; ++i) {
    if (!std::getline(in, part, ',')) return false;
    if (!parse_double(part, &out[i])) return false;
  }
  return !std::getline(in, part, ',');  // no fourth component
}

std::string trim(const std::string& s) {
  const size_t a = s.find_first_not_of(" \t");
  if (a == std::string::npos) return "";
  const size_t b = s.find_last_not_of(" \t");
  return s.substr(a, b - a + 1);
}

// Applies one dotted key. Unknown keys and unparsable values are usage
// errors naming the key.
void apply_key(Options& opts, const std::string& key,
               const std::string& value) {
  const auto bad = [&]() -> void {
    die(kExitUsage, "bad value for key '" + key + "': '" + value + "'");
  };
  const auto as_double = [&](double* out) {
    if (!parse_double(value, out)) bad();
  };
  if (key == "sim.seed") {
    uint64_t v;
    if (!parse_u64(value, &v)) bad();
    opts.sim.seed = v;
  } else if (key == "sim.duration") {
    as_double(&opts.sim.duration_s);
  } else if (key == "sim.predict_rate") {
    as_double(&opts.sim.predict_rate_hz);
  } else if (key == "sim.measure_rate") {
    as_double(&opts.sim.measure_rate_hz);
  } else if (key == "sim.update_iterations") {
    int64_t v;
    if (!parse_i64(value, &v)) bad();
    opts.sim.update_iterations = static_cast<int>(v);
  } else if (key == "sim.sigma_theta") {
    as_double(&opts.sim.sigma_theta_rad);
  } else if (key == "sim.d1") {
    if (!parse_triple(value, opts.sim.d1)) bad();
  } else if (key == "sim.d2") {
    if (!parse_triple(value, opts.sim.d2)) bad();
  } else if (key == "sim.omega_t_range") {
    as_double(&opts.sim.omega_t_range);
  } else if (key == "sim.u_range") {
    as_double(&opts.sim.u_range);
  } else if (key == "filter.sigma0_scale") {
    as_double(&opts.knobs.sigma0_scale);
  } else if (key == "filter.m_scale") {
    as_double(&opts.knobs.m_scale);
  } else if (key == "filter.k_n") {
    as_double(&opts.knobs.k_n);
  } else if (key == "filter.scale_update_damping") {
    int64_t v;
    if (!parse_i64(value, &v) || (v != 0 && v != 1)) bad();
    opts.knobs.scale_update_damping = static_cast<int>(v);
  } else if (key == "success.attitude_threshold") {
    as_double(&opts.success.attitude_threshold);
  } else if (key == "success.rate_threshold") {
    as_double(&opts.success.rate_threshold);
  } else if (key == "success.deadline") {
    as_double(&opts.success.deadline_s);
  } else if (key == "success.metrics_start") {
    as_double(&opts.success.metrics_start_s);
  } else {
    die(kExitUsage, "unknown configuration key '" + key + "'");
  }
}

void apply_assignment(Options& opts, const std::string& text,
                      const std::string& origin) {
  const size_t eq = text.find('=');
  if (eq == std::string::npos) {
    die(kExitUsage, origin + ": expected key=value, got '" + text + "'");
  }
  apply_key(opts, trim(text.substr(0, eq)), trim(text.substr(eq + 1)));
}

void apply_config_file(Options& opts, const std::string& path) {
  std::ifstream in(path);
  if (!in) die(kExitUsage, "cannot open config file '" + path + "'");
  std::string line;
  int ln = 0;
  while (std::getline(in, line)) {
    ++ln;
    const size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    apply_assignment(opts, line, path + ":" + std::to_string(ln));
  }
}

// Shared --config/--set plumbing; assignments apply after the file so
// command-line keys win.
struct CommonArgs {
  std::string config_path;
  std::vector<std::string> sets;

  void attach(CLI::App* cmd) {
    cmd->add_option("--config", config_path,
                    "Configuration file with key = value lines");
    cmd->add_option("--set", sets, "Override one key, e.g. sim.seed=7")
        ->take_all();
  }

  Options resolve() const {
    Options opts;
    if (!config_path.empty()) apply_config_file(opts, config_path);
    for (const std::string& s : sets) apply_assignment(opts, s, "--set");
    return opts;
  }
};

/* ------------------------------------------------------------------ */
/* Formatting                                                          */
/* ------------------------------------------------------------------ */

// Seconds with nine fractional digits, exact for integer nanoseconds.
std::string format_time_ns(int64_t t_ns) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%lld.%09lld",
                static_cast<long long>(t_ns / 1000000000),
                static_cast<long long>(t_ns % 1000000000));
  return buf;
}

// Shortest-round-trip decimal rendering of a double.
std::string format_value(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

// Parses "seconds.fraction" to integer nanoseconds without a double detour.
bool parse_time_ns(const std::string& text, int64_t* out) {
  const size_t dot = text.find('.');
  const std::string secs = dot == std::string::npos ? text : text.substr(0, dot);
  std::string frac = dot == std::string::npos ? "" : text.substr(dot + 1);
  if (secs.empty() || secs[0] == '-' || frac.size() > 9) return false;
  int64_t s = 0;
  if (!parse_i64(secs, &s)) return false;
  while (frac.size() < 9) frac.push_back('0');
  int64_t f = 0;
  if (!frac.empty() && !parse_i64(frac, &f)) return false;
  if (f < 0) return false;
  *out = s * 1000000000 + f;
  return true;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, ',')) out.push_back(trim(field));
  if (!line.empty() && line.back() == ',') out.push_back("");
  return out;
}

struct OutputFile {
  FILE* f = nullptr;
  bool owned = false;

  explicit OutputFile(const std::string& path) {
    if (path == "-") {
      f = stdout;
    } else {
      f = std::fopen(path.c_str(), "w");
      if (f == nullptr) die(kExitUsage, "cannot open output file '" + path + "'");
      owned = true;
    }
  }
  ~OutputFile() {
    if (owned) std::fclose(f);
  }
  OutputFile(const OutputFile&) = delete;
  OutputFile& operator=(const OutputFile&) = delete;
};

const char* const kFullHeader =
    "t,est_r11,est_r12,est_r13,est_r21,est_r22,est_r23,est_r31,est_r32,"
    "est_r33,est_wx,est_wy,est_wz,true_r11,true_r12,true_r13,true_r21,"
    "true_r22,true_r23,true_r31,true_r32,true_r33,true_wx,true_wy,true_wz,"
    "err_att,err_rate,delta_att_x,delta_att_y,delta_att_z,delta_rate_x,"
    "delta_rate_y,delta_rate_z";

const char* const kBareHeader =
    "t,est_r11,est_r12,est_r13,est_r21,est_r22,est_r23,est_r31,est_r32,"
    "est_r33,est_wx,est_wy,est_wz,delta_att_x,delta_att_y,delta_att_z,"
    "delta_rate_x,delta_rate_y,delta_rate_z";

void write_fields(FILE* f, const double* values, int count) {
  for (int i = 0; i < count; ++i) {
    std::fprintf(f, ",%s", format_value(values[i]).c_str());
  }
}

void write_run_csv(FILE* f, const releqf_run* run) {
  std::fprintf(f, "%s\n", kFullHeader);
  const size_t n = releqf_run_row_count(run);
  for (size_t i = 0; i < n; ++i) {
    releqf_log_row row;
    check(releqf_run_row(run, i, &row), "run row");
    std::fputs(format_time_ns(row.t_ns).c_str(), f);
    write_fields(f, row.r_est, 9);
    write_fields(f, row.omega_est, 3);
    write_fields(f, row.r_true, 9);
    write_fields(f, row.omega_true, 3);
    write_fields(f, &row.err_attitude, 1);
    write_fields(f, &row.err_rate, 1);
    write_fields(f, row.delta_attitude, 3);
    write_fields(f, row.delta_rate, 3);
    std::fputc('\n', f);
  }
}

// Sensor log: one record per line, global timestamp order, ties resolved as
// gyro, dir, truth. Truth records accompany t = 0 and every gyro tick.
void export_sensor_log(FILE* f, const releqf_scenario* sc) {
  double u[3];
  check(releqf_scenario_gyro(sc, u), "scenario gyro");
  const int64_t pp = releqf_scenario_predict_period_ns(sc);
  const int64_t duration = releqf_scenario_duration_ns(sc);
  const int64_t ticks = duration / pp;
  const size_t n_meas = releqf_scenario_measurement_count(sc);

  const auto write_truth = [&](int64_t t_ns) {
    double r[9], w[3];
    check(releqf_scenario_truth(sc, 1e-9 * static_cast<double>(t_ns), r, w),
          "scenario truth");
    std::fprintf(f, "truth,%s", format_time_ns(t_ns).c_str());
    write_fields(f, r, 9);
    write_fields(f, w, 3);
    std::fputc('\n', f);
  };
  const auto write_dir = [&](size_t index) {
    int64_t t_ns;
    double d1[3], d2[3];
    check(releqf_scenario_measurement(sc, index, &t_ns, d1, d2),
          "scenario measurement");
    std::fprintf(f, "dir,%s", format_time_ns(t_ns).c_str());
    write_fields(f, d1, 3);
    write_fields(f, d2, 3);
    std::fputc('\n', f);
  };

  write_truth(0);
  size_t m = 0;
  const auto meas_time = [&](size_t i) {
    int64_t t_ns;
    double d1[3], d2[3];
    check(releqf_scenario_measurement(sc, i, &t_ns, d1, d2),
          "scenario measurement");
    return t_ns;
  };
  for (int64_t k = 1; k <= ticks; ++k) {
    const int64_t t_ns = k * pp;
    while (m < n_meas && meas_time(m) < t_ns) write_dir(m++);
    std::fprintf(f, "gyro,%s", format_time_ns(t_ns).c_str());
    write_fields(f, u, 3);
    std::fputc('\n', f);
    while (m < n_meas && meas_time(m) == t_ns) write_dir(m++);
    write_truth(t_ns);
  }
  while (m < n_meas) write_dir(m++);
}

void print_metrics(FILE* f, const char* prefix, const releqf_run_metrics& m) {
  std::fprintf(f, "%sn_samples=%d\n", prefix, m.n_samples);
  std::fprintf(f, "%smean_attitude_error=%.6g\n", prefix,
               m.mean_attitude_error);
  std::fprintf(f, "%smean_rate_error=%.6g\n", prefix, m.mean_rate_error);
  std::fprintf(f, "%smean_euler_abs_error=%.6g,%.6g,%.6g\n", prefix,
               m.mean_euler_abs_error[0], m.mean_euler_abs_error[1],
               m.mean_euler_abs_error[2]);
  std::fprintf(f, "%srate_norm=%.6g\n", prefix, m.rate_norm);
  std::fprintf(f, "%srelative_rate_error=%.6g\n", prefix,
               m.relative_rate_error);
}

/* ------------------------------------------------------------------ */
/* simulate                                                            */
/* ------------------------------------------------------------------ */

int cmd_simulate(const CommonArgs& common, const std::string& output,
                 const std::string& export_path) {
  const Options opts = common.resolve();
  const releqf_gains gains = opts.gains();

  releqf_run* run = nullptr;
  check(releqf_simulate(&opts.sim, &gains, &run), "simulate");

  {
    OutputFile out(output);
    write_run_csv(out.f, run);
  }
  if (!export_path.empty()) {
    releqf_scenario* sc = nullptr;
    check(releqf_scenario_create(&opts.sim, &sc), "scenario");
    OutputFile out(export_path);
    export_sensor_log(out.f, sc);
    releqf_scenario_destroy(sc);
  }

  double t_conv;
  check(releqf_run_convergence_time(run, opts.success.attitude_threshold,
                                    opts.success.rate_threshold, &t_conv),
        "convergence time");
  releqf_run_metrics m;
  check(releqf_run_metrics_compute(run, opts.success.metrics_start_s, &m),
        "metrics");
  std::fprintf(stderr, "rows=%zu\nconvergence_time=%.6g\n",
               releqf_run_row_count(run), t_conv);
  print_metrics(stderr, "", m);
  releqf_run_destroy(run);
  return 0;
}

/* ------------------------------------------------------------------ */
/* montecarlo                                                          */
/* ------------------------------------------------------------------ */

int cmd_montecarlo(const CommonArgs& common, int runs,
                   const std::string& output_path) {
  const Options opts = common.resolve();
  const releqf_gains gains = opts.gains();
  if (runs < 1) die(kExitUsage, "--runs must be >= 1");

  std::vector<double> times(static_cast<size_t>(runs));
  releqf_mc_stats stats;
  check(releqf_monte_carlo(&opts.sim, &gains, runs, &opts.success, &stats,
                           times.data()),
        "monte carlo");

  std::printf("runs=%d\nfailures=%d\nsuccess_rate=%.6g\n", stats.n_runs,
              stats.n_failures, stats.success_rate);
  std::printf("mean_attitude_error=%.6g\nmean_rate_error=%.6g\n",
              stats.mean_attitude_error, stats.mean_rate_error);

  if (!output_path.empty()) {
    OutputFile out(output_path);
    std::fprintf(out.f, "run,t_conv\n");
    for (int i = 0; i < runs; ++i) {
      std::fprintf(out.f, "%d,%s\n", i,
                   format_value(times[static_cast<size_t>(i)]).c_str());
    }
    std::fprintf(out.f, "# runs=%d\n# failures=%d\n# success_rate=%s\n",
                 stats.n_runs, stats.n_failures,
                 format_value(stats.success_rate).c_str());
    std::fprintf(out.f, "# mean_attitude_error=%s\n# mean_rate_error=%s\n",
                 format_value(stats.mean_attitude_error).c_str(),
                 format_value(stats.mean_rate_error).c_str());
  }
  return 0;
}

/* ------------------------------------------------------------------ */
/* replay                                                              */
/* ------------------------------------------------------------------ */

enum class RecordType { kGyro, kDir, kTruth };

struct Record {
  RecordType type;
  int line;
  int64_t t_ns;
  double v[12];
};

std::vector<Record> read_sensor_log(const std::string& path) {
  std::ifstream in(path);
  if (!in) die(kExitUsage, "cannot open input file '" + path + "'");
  std::vector<Record> records;
  int64_t last_t[3] = {-1, -1, -1};
  std::string line;
  int ln = 0;
  while (std::getline(in, line)) {
    ++ln;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty() || trim(line)[0] == '#') continue;
    const std::vector<std::string> fields = split_csv(line);
    Record rec;
    rec.line = ln;
    size_t n_values = 0;
    if (fields[0] == "gyro") {
      rec.type = RecordType::kGyro;
      n_values = 3;
    } else if (fields[0] == "dir") {
      rec.type = RecordType::kDir;
      n_values = 6;
    } else if (fields[0] == "truth") {
      rec.type = RecordType::kTruth;
      n_values = 12;
    } else {
      die(kExitData, path + ":" + std::to_string(ln) +
                         ": unknown record type '" + fields[0] + "'");
    }
    if (fields.size() != n_values + 2) {
      die(kExitData, path + ":" + std::to_string(ln) + ": expected " +
                         std::to_string(n_values + 2) + " fields, got " +
                         std::to_string(fields.size()));
    }
    if (!parse_time_ns(fields[1], &rec.t_ns)) {
      die(kExitData, path + ":" + std::to_string(ln) + ": bad timestamp '" +
                         fields[1] + "'");
    }
    const int stream = static_cast<int>(rec.type);
    if (rec.t_ns < last_t[stream]) {
      die(kExitData, path + ":" + std::to_string(ln) + ": " + fields[0] +
                         " timestamps must be non-decreasing");
    }
    last_t[stream] = rec.t_ns;
    for (size_t i = 0; i < n_values; ++i) {
      if (!parse_double(fields[i + 2], &rec.v[i])) {
        die(kExitData, path + ":" + std::to_string(ln) + ": bad value '" +
                           fields[i + 2] + "'");
      }
    }
    records.push_back(rec);
  }
  return records;
}

// Unit-norm policy for replayed directions: values within 1e-9 of unit norm
// pass through verbatim (preserving exact round trips), anything else is
// normalized, with a warning when the deviation exceeds 1e-3.
void condition_direction(double d[3], const std::string& path, int line) {
  const double norm = std::sqrt(d[0] * d[0] + d[1] * d[1] + d[2] * d[2]);
  if (std::abs(norm - 1.0) <= 1e-9) return;
  if (!(norm > 0.0)) {
    die(kExitData,
        path + ":" + std::to_string(line) + ": zero direction vector");
  }
  if (std::abs(norm - 1.0) > 1e-3) {
    std::fprintf(stderr, "releqf: %s:%d: direction norm %.6g, normalizing\n",
                 path.c_str(), line, norm);
  }
  for (int i = 0; i < 3; ++i) d[i] /= norm;
}

int cmd_replay(const CommonArgs& common, const std::string& input,
               const std::string& output) {
  const Options opts = common.resolve();
  const releqf_gains gains = opts.gains();
  const std::vector<Record> records = read_sensor_log(input);

  std::map<int64_t, const Record*> truth_by_time;
  bool has_truth = false;
  for (const Record& rec : records) {
    if (rec.type == RecordType::kTruth) {
      truth_by_time[rec.t_ns] = &rec;
      has_truth = true;
    }
  }

  releqf_filter* filter = nullptr;
  check(releqf_filter_create(&gains, opts.sim.d1, opts.sim.d2, &filter),
        "filter create");

  OutputFile out(output);
  std::fprintf(out.f, "%s\n", has_truth ? kFullHeader : kBareHeader);

  double pending_att[3] = {0, 0, 0};
  double pending_rate[3] = {0, 0, 0};
  const auto emit_row = [&](int64_t t_ns) {
    double r_est[9], w_est[3];
    check(releqf_filter_estimate(filter, r_est, w_est), "estimate");
    std::fputs(format_time_ns(t_ns).c_str(), out.f);
    write_fields(out.f, r_est, 9);
    write_fields(out.f, w_est, 3);
    if (has_truth) {
      const double nan = std::nan("");
      double r_true[9] = {nan, nan, nan, nan, nan, nan, nan, nan, nan};
      double w_true[3] = {nan, nan, nan};
      double err_att = nan;
      double err_rate = nan;
      const auto it = truth_by_time.find(t_ns);
      if (it != truth_by_time.end()) {
        for (int i = 0; i < 9; ++i) r_true[i] = it->second->v[i];
        for (int i = 0; i < 3; ++i) w_true[i] = it->second->v[9 + i];
        double acc = 0.0;
        for (int r = 0; r < 3; ++r) {
          for (int c = 0; c < 3; ++c) {
            double e = 0.0;
            for (int k = 0; k < 3; ++k) e += r_true[3 * r + k] * r_est[3 * c + k];
            if (r == c) e -= 1.0;
            acc += e * e;
          }
        }
        err_att = std::sqrt(acc);
        err_rate = std::sqrt(
            (w_true[0] - w_est[0]) * (w_true[0] - w_est[0]) +
            (w_true[1] - w_est[1]) * (w_true[1] - w_est[1]) +
            (w_true[2] - w_est[2]) * (w_true[2] - w_est[2]));
      }
      write_fields(out.f, r_true, 9);
      write_fields(out.f, w_true, 3);
      write_fields(out.f, &err_att, 1);
      write_fields(out.f, &err_rate, 1);
    }
    write_fields(out.f, pending_att, 3);
    write_fields(out.f, pending_rate, 3);
    std::fputc('\n', out.f);
    for (int i = 0; i < 3; ++i) pending_att[i] = pending_rate[i] = 0.0;
  };

  emit_row(0);

  int64_t last_gyro_ns = 0;
  int64_t last_update_ns = 0;
  size_t i = 0;
  while (i < records.size()) {
    size_t j = i;
    while (j < records.size() && records[j].t_ns == records[i].t_ns) ++j;
    bool had_gyro = false;
    for (size_t k = i; k < j; ++k) {
      const Record& rec = records[k];
      const std::string where = input + ":" + std::to_string(rec.line);
      if (rec.type == RecordType::kGyro) {
        const double dt =
            1e-9 * static_cast<double>(rec.t_ns - last_gyro_ns);
        const releqf_status st = releqf_filter_predict(filter, rec.v, dt);
        if (st != RELEQF_OK) die_status(st, where);
        last_gyro_ns = rec.t_ns;
        had_gyro = true;
      } else if (rec.type == RecordType::kDir) {
        double d1[3] = {rec.v[0], rec.v[1], rec.v[2]};
        double d2[3] = {rec.v[3], rec.v[4], rec.v[5]};
        condition_direction(d1, input, rec.line);
        condition_direction(d2, input, rec.line);
        const double gap =
            1e-9 * static_cast<double>(rec.t_ns - last_update_ns);
        const releqf_status st = releqf_filter_update(
            filter, d1, d2, gap, opts.sim.update_iterations);
        if (st != RELEQF_OK) die_status(st, where);
        last_update_ns = rec.t_ns;
        check(releqf_filter_last_correction(filter, pending_att, pending_rate),
              "last correction");
      }
    }
    if (had_gyro) emit_row(records[i].t_ns);
    i = j;
  }

  releqf_filter_destroy(filter);
  return 0;
}

/* ------------------------------------------------------------------ */
/* observability                                                       */
/* ------------------------------------------------------------------ */

int cmd_observability(const CommonArgs& common, int samples, int n_lie) {
  const Options opts = common.resolve();
  if (samples < 1) die(kExitUsage, "--samples must be >= 1");

  std::printf(
      "sample,seed,expanded,rank,state_dim,sv_min,sv_max,"
      "reference_residual,reference_angle\n");
  for (int s = 0; s < samples; ++s) {
    releqf_scenario_config cfg = opts.sim;
    cfg.seed = opts.sim.seed + static_cast<uint64_t>(s);
    releqf_scenario* sc = nullptr;
    check(releqf_scenario_create(&cfg, &sc), "scenario");
    double r[9], w[3], u[3];
    check(releqf_scenario_truth(sc, 0.0, r, w), "scenario truth");
    check(releqf_scenario_gyro(sc, u), "scenario gyro");
    releqf_scenario_destroy(sc);

    for (int expanded = 0; expanded <= 1; ++expanded) {
      releqf_observability_result obs;
      check(releqf_observability(r, w, u, opts.sim.d1, opts.sim.d2, expanded,
                                 n_lie, &obs),
            "observability");
      std::printf("%d,%llu,%d,%d,%d,%.6g,%.6g,%.6g,%.6g\n", s,
                  static_cast<unsigned long long>(cfg.seed), expanded,
                  obs.rank, obs.state_dim, obs.singular_values[11],
                  obs.singular_values[0], obs.reference_residual,
                  obs.reference_angle);
      if (obs.rank < obs.state_dim) {
        /* The invisible direction: rotating both bodies about the plane
         * normal of the two references leaves every output unchanged.  In
         * flattened coordinates that is the outer product n (R^T n)^T with
         * zero rate part. */
        double n[3] = {opts.sim.d1[1] * opts.sim.d2[2] -
                           opts.sim.d1[2] * opts.sim.d2[1],
                       opts.sim.d1[2] * opts.sim.d2[0] -
                           opts.sim.d1[0] * opts.sim.d2[2],
                       opts.sim.d1[0] * opts.sim.d2[1] -
                           opts.sim.d1[1] * opts.sim.d2[0]};
        const double nn = std::sqrt(n[0] * n[0] + n[1] * n[1] + n[2] * n[2]);
        for (double& c : n) c /= nn;
        double rtn[3];
        for (int c = 0; c < 3; ++c) {
          rtn[c] = r[c] * n[0] + r[3 + c] * n[1] + r[6 + c] * n[2];
        }
        double dir[12] = {0};
        for (int c = 0; c < 3; ++c) {
          for (int row = 0; row < 3; ++row) dir[3 * c + row] = n[row] * rtn[c];
        }
        double dn = 0;
        for (double c : dir) dn += c * c;
        dn = std::sqrt(dn);
        std::printf("# unobserved_direction=");
        for (int k = 0; k < 12; ++k) {
          std::printf("%s%.6g", k ? ";" : "", dir[k] / dn);
        }
        std::printf(" angle_to_null_space=%.6g\n", obs.reference_angle);
      }
    }
  }
  return 0;
}

/* ------------------------------------------------------------------ */
/* bench                                                               */
/* ------------------------------------------------------------------ */

double percentile_us(std::vector<int64_t>& ns, double q) {
  const size_t idx = std::min(
      ns.size() - 1, static_cast<size_t>(q * static_cast<double>(ns.size())));
  std::nth_element(ns.begin(), ns.begin() + static_cast<ptrdiff_t>(idx),
                   ns.end());
  return 1e-3 * static_cast<double>(ns[idx]);
}

int cmd_bench(const CommonArgs& common, int64_t steps) {
  const Options opts = common.resolve();
  const releqf_gains gains = opts.gains();
  if (steps < 1) die(kExitUsage, "--steps must be >= 1");

  releqf_filter* filter = nullptr;
  check(releqf_filter_create(&gains, opts.sim.d1, opts.sim.d2, &filter),
        "filter create");

  const double u[3] = {0.3, -0.2, 0.5};
  const double dt = 1.0 / opts.sim.predict_rate_hz;
  const double gap = 1.0 / opts.sim.measure_rate_hz;
  double d1[3] = {opts.sim.d1[0], opts.sim.d1[1], opts.sim.d1[2]};
  double d2[3] = {opts.sim.d2[0], opts.sim.d2[1], opts.sim.d2[2]};
  condition_direction(d1, "bench", 0);
  condition_direction(d2, "bench", 0);

  std::vector<int64_t> predict_ns(static_cast<size_t>(steps));
  std::vector<int64_t> update_ns(static_cast<size_t>(steps));
  const auto now = [] {
    timespec ts;
    clock_gettime(CLOCK_MONOTONIC, &ts);
    return int64_t{ts.tv_sec} * 1000000000 + ts.tv_nsec;
  };
  for (int64_t k = 0; k < steps; ++k) {
    int64_t t0 = now();
    releqf_status st = releqf_filter_predict(filter, u, dt);
    int64_t t1 = now();
    if (st != RELEQF_OK) die_status(st, "bench predict");
    predict_ns[static_cast<size_t>(k)] = t1 - t0;

    t0 = now();
    st = releqf_filter_update(filter, d1, d2, gap,
                              opts.sim.update_iterations);
    t1 = now();
    if (st != RELEQF_OK) die_status(st, "bench update");
    update_ns[static_cast<size_t>(k)] = t1 - t0;
  }
  releqf_filter_destroy(filter);

  std::printf("op,steps,median_us,p99_us\n");
  std::printf("predict,%lld,%.3f,%.3f\n", static_cast<long long>(steps),
              percentile_us(predict_ns, 0.5), percentile_us(predict_ns, 0.99));
  std::printf("update,%lld,%.3f,%.3f\n", static_cast<long long>(steps),
              percentile_us(update_ns, 0.5), percentile_us(update_ns, 0.99));
  return 0;
}

/* ------------------------------------------------------------------ */
/* compare-ekf                                                         */
/* ------------------------------------------------------------------ */

int cmd_compare_ekf(const CommonArgs& common, const std::string& output) {
  const Options opts = common.resolve();
  const releqf_gains gains = opts.gains();

  releqf_run* run_eqf = nullptr;
  releqf_run* run_ekf = nullptr;
  check(releqf_simulate(&opts.sim, &gains, &run_eqf), "simulate");
  check(releqf_simulate_ekf(&opts.sim, &gains, &run_ekf), "simulate ekf");

  const size_t n = releqf_run_row_count(run_eqf);
  {
    OutputFile out(output);
    std::fprintf(out.f,
                 "t,eqf_err_att,eqf_err_rate,eqf_sigma_trace,ekf_err_att,"
                 "ekf_err_rate,ekf_p_trace\n");
    for (size_t i = 0; i < n; ++i) {
      releqf_log_row a, b;
      check(releqf_run_row(run_eqf, i, &a), "run row");
      check(releqf_run_row(run_ekf, i, &b), "run row");
      std::fprintf(out.f, "%s,%s,%s,%s,%s,%s,%s\n",
                   format_time_ns(a.t_ns).c_str(),
                   format_value(a.err_attitude).c_str(),
                   format_value(a.err_rate).c_str(),
                   format_value(a.sigma_trace).c_str(),
                   format_value(b.err_attitude).c_str(),
                   format_value(b.err_rate).c_str(),
                   format_value(b.sigma_trace).c_str());
    }
  }

  for (const auto& [name, run] :
       {std::pair<const char*, releqf_run*>{"eqf.", run_eqf},
        {"ekf.", run_ekf}}) {
    double t_conv;
    check(releqf_run_convergence_time(run, opts.success.attitude_threshold,
                                      opts.success.rate_threshold, &t_conv),
          "convergence time");
    releqf_run_metrics m;
    check(releqf_run_metrics_compute(run, opts.success.metrics_start_s, &m),
          "metrics");
    std::fprintf(stderr, "%sconvergence_time=%.6g\n", name, t_conv);
    print_metrics(stderr, name, m);
  }
  releqf_run_destroy(run_eqf);
  releqf_run_destroy(run_ekf);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Relative-attitude equivariant filter tool"};
  app.set_version_flag("--version", releqf_version());
  app.require_subcommand(1);

  CommonArgs common;
  int exit_code = 0;

  auto* sim_cmd = app.add_subcommand(
      "simulate", "Run the filter on a sampled scenario, write a CSV log");
  common.attach(sim_cmd);
  std::string sim_output = "-";
  std::string sim_export;
  sim_cmd->add_option("-o,--output", sim_output, "Run log CSV ('-' = stdout)");
  sim_cmd->add_option("--export-log", sim_export,
                      "Also write the sensor stream for replay");
  sim_cmd->callback(
      [&] { exit_code = cmd_simulate(common, sim_output, sim_export); });

  auto* mc_cmd = app.add_subcommand(
      "montecarlo", "Aggregate success statistics over many seeds");
  common.attach(mc_cmd);
  int mc_runs = 100;
  std::string mc_output;
  mc_cmd->add_option("--runs", mc_runs, "Number of runs");
  mc_cmd->add_option("-o,--output", mc_output,
                     "Per-run convergence times plus aggregate block");
  mc_cmd->callback(
      [&] { exit_code = cmd_montecarlo(common, mc_runs, mc_output); });

  auto* replay_cmd = app.add_subcommand(
      "replay", "Re-run the filter over an exported sensor stream");
  common.attach(replay_cmd);
  std::string replay_input;
  std::string replay_output = "-";
  replay_cmd->add_option("-i,--input", replay_input, "Sensor log file")
      ->required();
  replay_cmd->add_option("-o,--output", replay_output,
                         "Run log CSV ('-' = stdout)");
  replay_cmd->callback(
      [&] { exit_code = cmd_replay(common, replay_input, replay_output); });

  auto* obs_cmd = app.add_subcommand(
      "observability", "Rank diagnostics at randomly sampled states");
  common.attach(obs_cmd);
  int obs_samples = 10;
  int obs_n_lie = 2;
  obs_cmd->add_option("--samples", obs_samples, "Number of sampled states");
  obs_cmd->add_option("--n-lie", obs_n_lie, "Highest output derivative order");
  obs_cmd->callback(
      [&] { exit_code = cmd_observability(common, obs_samples, obs_n_lie); });

  auto* bench_cmd =
      app.add_subcommand("bench", "Time predict and update steps");
  common.attach(bench_cmd);
  int64_t bench_steps = 100000;
  bench_cmd->add_option("--steps", bench_steps, "Steps to time");
  bench_cmd->callback([&] { exit_code = cmd_bench(common, bench_steps); });

  auto* cmp_cmd = app.add_subcommand(
      "compare-ekf", "Run both filters on one scenario, write paired errors");
  common.attach(cmp_cmd);
  std::string cmp_output = "-";
  cmp_cmd->add_option("-o,--output", cmp_output,
                      "Paired error CSV ('-' = stdout)");
  cmp_cmd->callback([&] { exit_code = cmd_compare_ekf(common, cmp_output); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }
  return exit_code;
}
