#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "sgs/coupling.hpp"
#include "sgs/discretize.hpp"
#include "sgs/io.hpp"
#include "sgs/nls.hpp"
#include "sgs/propagator.hpp"

namespace sgs {

enum class ExperimentKind {
  check_coupling,
  spectrum,
  propagate,
  decay_scan,
  strichartz,
  nls,
  regularize_test,
};

const char* to_string(ExperimentKind kind);
/// Throws ConfigError for unknown names.
ExperimentKind experiment_kind_from_string(const std::string& name);
std::vector<std::string> experiment_names();

enum class InitialFamily { gaussian, sech, exponential, csv };

/// Per-edge profile amplitudes[j] * f((x - center) / width), with
/// f = exp(-s^2), sech(s) or exp(-|s|); or samples read from a CSV file.
struct InitialData {
  InitialFamily family = InitialFamily::gaussian;
  double center = 0.0;
  double width = 1.0;
  std::vector<Complex> amplitudes;  // empty: all ones
  std::filesystem::path path;
};

GraphFunction make_initial(const InitialData& data, const StarGrid& grid);

struct DecaySettings {
  double t_min = 1.0;
  double t_max = 100.0;
  int count = 20;
  /// true: evolve with propagate_ac; false: with propagate_full, keeping
  /// the bound-state part of the data.
  bool project = true;
  /// Slope window; the fit passes when slope_min <= slope <= slope_max.
  double slope_min = -0.55;
  double slope_max = -0.45;
};

struct StrichartzSettings {
  std::vector<AdmissiblePair> pairs;
  double T = 50.0;
  double early_end = 2.0;
  double early_step = 0.02;
  int late_points = 150;
  double stability = 0.1;
  double l2_tolerance = 1e-4;
};

struct RegularizeSettings {
  std::vector<double> eps{0.2, 0.1, 0.05, 0.025};
  int probes = 8;
};

struct PropagateSettings {
  std::vector<double> times{1.0};
  bool project = false;  // true: propagate_ac, false: propagate_full
  std::optional<double> oracle_dt;
  double oracle_tol = 1e-3;
  double norm_tol = 1e-4;
};

struct NlsSettings {
  NlsParams params;
  double t_final = 1.0;
  long checkpoint_every = 0;
};

struct ExperimentConfig {
  ExperimentKind kind = ExperimentKind::check_coupling;
  Json raw;  // the document as read, with the effective seed
  CouplingPair coupling{Matrix::Zero(2, 2), Matrix::Identity(2, 2)};
  std::optional<double> grid_h;
  std::optional<double> grid_L;
  InitialData initial;
  PlanOptions plan;
  std::optional<double> k_max;  // bound-state search window
  PropagateSettings propagate;
  DecaySettings decay;
  StrichartzSettings strichartz;
  NlsSettings nls;
  RegularizeSettings regularize;
  std::uint64_t seed = 42;
  std::filesystem::path output = "sgs_out";

  /// Throws ConfigError when h or L is missing.
  StarGrid grid() const;
};

/// Parses one JSON document. Relative CSV paths resolve against base_dir.
/// A kind given here overrides (and must agree with) an "experiment" field.
/// Throws ConfigError for malformed or non-positive entries.
ExperimentConfig parse_config(const Json& doc, std::optional<ExperimentKind> kind = {},
                              const std::filesystem::path& base_dir = {});

ExperimentConfig load_config(const std::filesystem::path& path,
                             std::optional<ExperimentKind> kind = {});

/// Relative L^2 mass of u on the outer 10% of every edge.
double boundary_mass(const GraphFunction& u);

/// Throws DomainError when boundary_mass(u0) >= 1e-8.
void require_truncation(const GraphFunction& u0);

/// Least-squares slope and intercept of y against x.
std::pair<double, double> fit_line(std::span<const double> x, std::span<const double> y);

/// n times t_min (t_max/t_min)^{i/(n-1)}.
std::vector<double> log_times(double t_min, double t_max, int count);

struct DecayScan {
  std::vector<double> times;
  std::vector<double> sup_norm;
  std::vector<double> l2_norm;
  double slope = 0.0;
  double intercept = 0.0;
  /// sup_t sqrt(t) |u(t)|_inf / |u0|_1 with u0 the AC part of the data.
  double dispersive_constant = 0.0;
  double max_boundary_mass = 0.0;
};

/// Throws WindowEscape when more than 1e-6 of the mass reaches the outer
/// 10% of the window at any scan time.
DecayScan decay_scan(const ExperimentConfig& config);

struct StrichartzRow {
  AdmissiblePair pair;
  double ratio_T = 0.0;   // |u|_{L^q(0,T; L^r)} / |u0|_2
  double ratio_2T = 0.0;  // same over (0, 2T)
  double relative_change = 0.0;
};

/// Times 0..early_end at early_step, then geometric to T and on to 2T.
std::vector<double> strichartz_times(const StrichartzSettings& settings);

/// Mixed norms of e^{it Delta} P_ac u0 on the windows (0, T) and (0, 2T).
/// Throws DomainError for a non-admissible pair and WindowEscape as
/// decay_scan does.
std::vector<StrichartzRow> strichartz_table(const ExperimentConfig& config,
                                            const std::vector<AdmissiblePair>& pairs);

/// |u|_{p+1}^{p+1} / (|u'|_2^{(p-1)/2} |u|_2^{(p+3)/2}).
double gagliardo_nirenberg_ratio(const GraphFunction& u, double p);

/// Largest ratio over `count` random sums of Gaussians on `grid`.
double gagliardo_nirenberg_probe(const StarGrid& grid, double p, int count, std::uint64_t seed);

struct Check {
  std::string name;
  bool pass = false;
  double value = 0.0;
  double threshold = 0.0;
};

struct Report {
  std::string experiment;
  std::string status = "ok";  // ok | failed | aborted | error
  Json config;
  std::uint64_t seed = 42;
  Json metrics = Json::object();
  std::vector<Check> checks;
  std::vector<std::string> notes;
  std::string error;

  void add_check(std::string name, bool pass, double value, double threshold);
  bool all_pass() const;
};

Json to_json(const Report& report);

/// Runs the experiment, writing report.json and CSV files into
/// config.output. Returns 0 when every check passes, 1 when one fails and
/// 3 on a numerical abort; errors in the inputs return 2.
int run(const ExperimentConfig& config);

/// run() after load_config, with optional seed and output overrides. Parse
/// failures return 2 (and still leave a report when the output directory
/// is known).
int run_file(ExperimentKind kind, const std::filesystem::path& config_path,
             std::optional<std::uint64_t> seed, std::optional<std::filesystem::path> out);

}  // namespace sgs
