#include "sgs/harness.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include "sgs/error.hpp"
#include "sgs/spectrum.hpp"

namespace sgs {

namespace fs = std::filesystem;

namespace {

constexpr double kTruncationTol = 1e-8;
constexpr double kEscapeTol = 1e-6;
constexpr double kUnitarityTol = 1e-10;
constexpr double kVertexTol = 1e-8;

const std::pair<ExperimentKind, const char*> kKinds[] = {
    {ExperimentKind::check_coupling, "check-coupling"},
    {ExperimentKind::spectrum, "spectrum"},
    {ExperimentKind::propagate, "propagate"},
    {ExperimentKind::decay_scan, "decay-scan"},
    {ExperimentKind::strichartz, "strichartz"},
    {ExperimentKind::nls, "nls"},
    {ExperimentKind::regularize_test, "regularize-test"},
};

// --- JSON field helpers ------------------------------------------------------

const Json* field(const Json& obj, const char* key) {
  auto it = obj.find(key);
  return it == obj.end() ? nullptr : &*it;
}

double get_number(const Json& obj, const char* key, double fallback) {
  const Json* v = field(obj, key);
  if (!v) return fallback;
  if (!v->is_number()) throw ConfigError(std::string("\"") + key + "\" must be a number");
  const double x = v->get<double>();
  if (!std::isfinite(x)) throw ConfigError(std::string("\"") + key + "\" must be finite");
  return x;
}

double get_positive(const Json& obj, const char* key, double fallback) {
  const double x = get_number(obj, key, fallback);
  if (!(x > 0.0)) throw ConfigError(std::string("\"") + key + "\" must be positive");
  return x;
}

std::optional<double> get_optional_positive(const Json& obj, const char* key) {
  if (!field(obj, key)) return std::nullopt;
  return get_positive(obj, key, 1.0);
}

long get_count(const Json& obj, const char* key, long fallback) {
  const Json* v = field(obj, key);
  if (!v) return fallback;
  if (!v->is_number_integer() || v->get<long>() <= 0) {
    throw ConfigError(std::string("\"") + key + "\" must be a positive integer");
  }
  return v->get<long>();
}

bool get_bool(const Json& obj, const char* key, bool fallback) {
  const Json* v = field(obj, key);
  if (!v) return fallback;
  if (!v->is_boolean()) throw ConfigError(std::string("\"") + key + "\" must be true or false");
  return v->get<bool>();
}

const Json& section(const Json& doc, const char* key) {
  static const Json empty = Json::object();
  const Json* v = field(doc, key);
  if (!v) return empty;
  if (!v->is_object()) throw ConfigError(std::string("\"") + key + "\" must be an object");
  return *v;
}

std::vector<double> positive_list(const Json& j, const char* what) {
  if (!j.is_array() || j.empty()) throw ConfigError(std::string(what) + " must be a non-empty array");
  std::vector<double> out;
  for (const auto& v : j) {
    if (!v.is_number() || !(v.get<double>() > 0.0) || !std::isfinite(v.get<double>())) {
      throw ConfigError(std::string(what) + " entries must be positive numbers");
    }
    out.push_back(v.get<double>());
  }
  return out;
}

Exponent exponent_from_json(const Json& j) {
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "inf" || s == "infinity") return Exponent::infinite();
    throw ConfigError("exponent strings must be \"inf\"");
  }
  if (!j.is_number()) throw ConfigError("exponents must be numbers or \"inf\"");
  const double v = j.get<double>();
  if (std::isinf(v)) return Exponent::infinite();
  return Exponent::from_double(v);
}

InitialFamily family_from_string(const std::string& name) {
  if (name == "gaussian") return InitialFamily::gaussian;
  if (name == "sech") return InitialFamily::sech;
  if (name == "exponential") return InitialFamily::exponential;
  if (name == "csv") return InitialFamily::csv;
  throw ConfigError("unknown initial family \"" + name + "\"");
}

std::string pair_label(const AdmissiblePair& p) {
  auto one = [](const Exponent& e) {
    if (e.is_infinite()) return std::string("inf");
    std::ostringstream os;
    os << e.value();
    return os.str();
  };
  return "(" + one(p.q) + "," + one(p.r) + ")";
}

// --- numerics helpers --------------------------------------------------------

double max_unitarity_residual(const CouplingPair& pair, std::span<const double> ks) {
  double worst = 0.0;
  const Matrix I = Matrix::Identity(pair.n(), pair.n());
  for (const double k : ks) {
    const Matrix G = scattering_matrix(pair, k).G;
    worst = std::max(worst, (G * G.adjoint() - I).cwiseAbs().maxCoeff());
  }
  return worst;
}

// Gram matrix of the analytic eigenfunctions c e^{-kx} on the infinite star.
double bound_state_gram_residual(const Spectrum& spec) {
  const auto& bs = spec.bound_states;
  double worst = 0.0;
  for (std::size_t a = 0; a < bs.size(); ++a) {
    for (std::size_t b = 0; b < bs.size(); ++b) {
      const Complex g = bs[b].amplitudes.dot(bs[a].amplitudes) / (bs[a].k + bs[b].k);
      worst = std::max(worst, std::abs(g - (a == b ? 1.0 : 0.0)));
    }
  }
  return worst;
}

double vertex_residual(const CouplingPair& pair, const Vector& value, const Vector& slope,
                       double scale) {
  const double norm = pair.A().norm() + pair.B().norm();
  return (pair.A() * value + pair.B() * slope).norm() / (norm * std::max(1.0, scale));
}

GraphFunction random_gaussian_sum(const StarGrid& grid, std::mt19937_64& rng, double width_min,
                                  double width_max, double center_max) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> normal;
  const int n = grid.n();
  struct Bump {
    int edge;
    double center, width;
    Complex amp;
  };
  std::vector<Bump> bumps;
  for (int j = 0; j < n; ++j) {
    const int count = 1 + static_cast<int>(unit(rng) * 3.0);
    for (int b = 0; b < count; ++b) {
      bumps.push_back({j, center_max * unit(rng),
                       width_min + (width_max - width_min) * unit(rng),
                       Complex(normal(rng), normal(rng))});
    }
  }
  return GraphFunction::sample(grid, [&](int edge, double x) {
    Complex v = 0.0;
    for (const auto& b : bumps) {
      if (b.edge != edge) continue;
      const double s = (x - b.center) / b.width;
      v += b.amp * std::exp(-s * s);
    }
    return v;
  });
}

void write_snapshots(const fs::path& file, std::span<const double> times,
                     std::span<const GraphFunction> snaps) {
  std::ofstream os(file);
  if (!os) throw Error("cannot write " + file.string());
  for (std::size_t i = 0; i < snaps.size(); ++i) write_csv(os, snaps[i], times[i], i == 0);
}

void check_escape(const GraphFunction& u, double t) {
  const double bm = boundary_mass(u);
  if (bm > kEscapeTol) {
    std::ostringstream os;
    os << "mass fraction " << bm << " reached the outer 10% of the window at t = " << t
       << "; enlarge L";
    throw WindowEscape(os.str());
  }
}

PlanOptions plan_options(const ExperimentConfig& config) { return config.plan; }

// --- experiments -------------------------------------------------------------

void run_check_coupling(const ExperimentConfig& config, Report& report) {
  const auto& pair = config.coupling;
  const ValidityReport vr = validate(pair);
  report.metrics["validity"] = to_json(vr);
  const double sigma_n = vr.singular_values.size() >= pair.n()
                             ? vr.singular_values(pair.n() - 1)
                             : 0.0;
  report.add_check("h1_rank", vr.h1_ok, sigma_n, 0.0);
  report.add_check("h2_hermitian", vr.h2_ok, vr.h2_residual, 1e-12);
  if (!vr.valid()) return;

  const auto dec = projector_decomposition(pair);
  Eigen::SelfAdjointEigenSolver<Matrix> eig(0.5 * (dec.Lambda + dec.Lambda.adjoint()));
  std::vector<double> lambda_eigs;
  for (Eigen::Index i = 0; i < eig.eigenvalues().size(); ++i) {
    if (std::abs(eig.eigenvalues()(i)) > 1e-12) lambda_eigs.push_back(eig.eigenvalues()(i));
  }
  report.metrics["decomposition"] = Json{{"dim_dirichlet", dec.dim_dirichlet},
                                         {"dim_neumann", dec.dim_neumann},
                                         {"dim_robin", dec.dim_robin},
                                         {"lambda_eigenvalues", lambda_eigs}};
  report.metrics["n_plus"] = count_negative_eigenvalues(pair);
  report.metrics["G_at_1"] = to_json(scattering_matrix(pair, 1.0).G);
  const double ks[] = {0.25, 0.5, 1.0, 2.0, 5.0, 10.0};
  const double res = max_unitarity_residual(pair, ks);
  report.add_check("scattering_unitary", res < kUnitarityTol, res, kUnitarityTol);
}

void run_spectrum(const ExperimentConfig& config, Report& report) {
  require_valid(config.coupling);
  const Spectrum spec = find_bound_states(config.coupling, config.k_max);
  const Json sj = to_json(spec);
  report.metrics["spectrum"] = sj;
  std::ofstream(config.output / "spectrum.json") << sj.dump(2) << '\n';
  report.add_check("multiplicity_matches_n_plus", spec.total_multiplicity() == spec.n_plus,
                   spec.total_multiplicity(), spec.n_plus);
  const double gram = bound_state_gram_residual(spec);
  report.add_check("bound_states_orthonormal", gram < 1e-10, gram, 1e-10);
}

void run_propagate(const ExperimentConfig& config, Report& report) {
  const auto& pair = config.coupling;
  require_valid(pair);
  const StarGrid grid = config.grid();
  const GraphFunction u0 = make_initial(config.initial, grid);
  require_truncation(u0);
  const auto& ps = config.propagate;
  const PropagatorPlan plan = make_plan(pair, grid, plan_options(config));
  const Spectrum spec = find_bound_states(pair, config.k_max);
  const PlanDiagnostics diag = diagnose(plan, half_line_transform(plan, u0));
  report.metrics["plan"] = to_json(plan);
  report.metrics["diagnostics"] = Json{{"damping_bias", diag.damping_bias},
                                       {"truncation_tail", diag.truncation_tail},
                                       {"k_significant", diag.k_significant}};
  report.metrics["bound_states"] = spec.total_multiplicity();

  const auto snaps = ps.project ? propagate_ac(plan, spec, u0, ps.times)
                                : propagate_full(plan, spec, u0, ps.times);
  const double ref = lp_norm(ps.project ? project_ac(spec, u0) : u0, 2.0);
  double norm_dev = 0.0, vertex = 0.0;
  Json per_time = Json::array();
  for (std::size_t i = 0; i < snaps.size(); ++i) {
    const double l2 = lp_norm(snaps[i], 2.0);
    norm_dev = std::max(norm_dev, ref > 0.0 ? std::abs(l2 - ref) / ref : l2);
    const auto [v0, v1] = propagate_full_traces(plan, spec, u0, ps.times[i]);
    const double vr = vertex_residual(pair, v0, v1, lp_norm(u0, kInfinity));
    vertex = std::max(vertex, vr);
    per_time.push_back(Json{{"t", ps.times[i]},
                            {"l2", l2},
                            {"sup", lp_norm(snaps[i], kInfinity)},
                            {"vertex_residual", vr}});
  }
  report.metrics["snapshots"] = per_time;
  report.metrics["reference_l2"] = ref;
  write_snapshots(config.output / "snapshots.csv", ps.times, snaps);
  report.add_check("norm_conservation", norm_dev < ps.norm_tol, norm_dev, ps.norm_tol);
  report.add_check("vertex_condition", vertex < kVertexTol, vertex, kVertexTol);

  if (ps.oracle_dt) {
    const double t = ps.times.back();
    const GraphFunction cn = crank_nicolson_oracle(pair, u0, t, *ps.oracle_dt);
    const double err = lp_norm(snaps.back() - cn, 2.0) / lp_norm(u0, 2.0);
    report.metrics["oracle"] = Json{{"t", t}, {"dt", *ps.oracle_dt}, {"relative_l2", err}};
    report.add_check("crank_nicolson_agreement", err < ps.oracle_tol, err, ps.oracle_tol);
  }
}

void run_decay_scan(const ExperimentConfig& config, Report& report) {
  const DecayScan scan = decay_scan(config);
  report.metrics["slope"] = scan.slope;
  report.metrics["intercept"] = scan.intercept;
  report.metrics["dispersive_constant"] = scan.dispersive_constant;
  report.metrics["max_boundary_mass"] = scan.max_boundary_mass;
  report.metrics["projected"] = config.decay.project;
  std::ofstream os(config.output / "decay.csv");
  os << std::setprecision(17) << "t,sup,l2\n";
  for (std::size_t i = 0; i < scan.times.size(); ++i) {
    os << scan.times[i] << ',' << scan.sup_norm[i] << ',' << scan.l2_norm[i] << '\n';
  }
  const auto& d = config.decay;
  const bool in_window = scan.slope >= d.slope_min && scan.slope <= d.slope_max;
  report.add_check("slope_min", scan.slope >= d.slope_min, scan.slope, d.slope_min);
  report.add_check("slope_max", scan.slope <= d.slope_max, scan.slope, d.slope_max);
  report.metrics["slope_in_window"] = in_window;
  report.add_check("dispersive_constant_finite", std::isfinite(scan.dispersive_constant),
                   scan.dispersive_constant, 0.0);
}

void run_strichartz(const ExperimentConfig& config, Report& report) {
  const auto& st = config.strichartz;
  const auto rows = strichartz_table(config, st.pairs);
  std::ofstream os(config.output / "strichartz.csv");
  os << std::setprecision(17) << "q,r,ratio_T,ratio_2T,relative_change\n";
  Json table = Json::array();
  for (const auto& row : rows) {
    const std::string label = pair_label(row.pair);
    auto ex = [](const Exponent& e) { return e.is_infinite() ? std::string("inf") : std::to_string(e.value()); };
    os << ex(row.pair.q) << ',' << ex(row.pair.r) << ',' << row.ratio_T << ',' << row.ratio_2T
       << ',' << row.relative_change << '\n';
    table.push_back(Json{{"pair", label},
                         {"ratio_T", row.ratio_T},
                         {"ratio_2T", row.ratio_2T},
                         {"relative_change", row.relative_change}});
    const bool finite = std::isfinite(row.ratio_T) && std::isfinite(row.ratio_2T);
    report.add_check("finite " + label, finite, row.ratio_2T, 0.0);
    if (row.pair.q.is_infinite()) {
      const double dev = std::max(std::abs(row.ratio_T - 1.0), std::abs(row.ratio_2T - 1.0));
      report.add_check("unit_ratio " + label, dev < st.l2_tolerance, dev, st.l2_tolerance);
    } else {
      report.add_check("window_doubling " + label, row.relative_change < st.stability,
                       row.relative_change, st.stability);
    }
  }
  report.metrics["table"] = table;
  report.metrics["T"] = st.T;
  report.notes.push_back(
      "Stability under window doubling (T to 2T) is an operational proxy for finiteness of the "
      "global-in-time norm.");
}

void run_nls(const ExperimentConfig& config, Report& report) {
  require_valid(config.coupling);
  const StarGrid grid = config.grid();
  const GraphFunction u0 = make_initial(config.initial, grid);
  require_truncation(u0);
  const auto& ns = config.nls;
  const NlsResult result = nls_solve(config.coupling, u0, ns.params, ns.t_final, ns.checkpoint_every);
  const auto& log = result.log;
  {
    std::ofstream os(config.output / "conservation.csv");
    os << std::setprecision(17) << "t,mass,energy\n";
    for (std::size_t i = 0; i < log.times.size(); ++i) {
      os << log.times[i] << ',' << log.mass[i] << ',';
      if (result.energy_logged) os << log.energy[i];
      os << '\n';
    }
  }
  for (std::size_t i = 0; i < result.checkpoints.size(); ++i) {
    std::ostringstream name;
    name << "checkpoint_" << std::setw(4) << std::setfill('0') << i << ".csv";
    std::ofstream os(config.output / name.str());
    write_csv(os, result.checkpoints[i], result.checkpoint_times[i]);
  }
  report.metrics["checkpoints"] = result.checkpoint_times;
  report.metrics["steps"] = static_cast<long>(log.times.size()) - 1;
  report.metrics["mass_drift"] = log.max_mass_drift();
  report.metrics["energy_logged"] = result.energy_logged;
  if (result.energy_logged) {
    report.metrics["energy_initial"] = log.energy.front();
    report.metrics["energy_drift"] = log.max_energy_drift();
    report.metrics["energy_warning"] = result.energy_warning;
    if (result.energy_warning) report.notes.push_back("energy drift exceeds energy_tol");
  } else {
    report.notes.push_back("initial data outside the form domain; energy not logged");
  }
  report.metrics["final_l2"] = lp_norm(result.u, 2.0);
  report.metrics["final_sup"] = lp_norm(result.u, kInfinity);
  report.add_check("mass_conservation", log.max_mass_drift() < ns.params.mass_tol,
                   log.max_mass_drift(), ns.params.mass_tol);
}

void run_regularize(const ExperimentConfig& config, Report& report) {
  const auto& pair = config.coupling;
  require_valid(pair);
  const StarGrid grid = config.grid();
  const GraphFunction u0 = make_initial(config.initial, grid);
  require_truncation(u0);
  std::vector<double> eps = config.regularize.eps;
  std::sort(eps.rbegin(), eps.rend());

  std::mt19937_64 rng(config.seed);
  std::vector<GraphFunction> probes;
  for (int i = 0; i < config.regularize.probes; ++i) {
    probes.push_back(random_gaussian_sum(grid, rng, 0.2, 2.0, i % 2 == 0 ? 0.0 : 0.25 * grid.L()));
  }

  const double lambda = config.nls.params.lambda, p = config.nls.params.p;
  const GraphFunction g0 = pointwise_nonlinearity(u0, lambda, p);
  double g_sup = 0.0, l1_worst = 0.0, linf_worst = 0.0;
  std::vector<double> diffs, gdiffs;
  Json rows = Json::array();
  for (const double e : eps) {
    const Matrix G = scattering_matrix(pair, Complex(0.0, 1.0 / e)).G;
    g_sup = std::max(g_sup, G.cwiseAbs().maxCoeff());
    const GraphFunction v = regularizer_apply(pair, u0, e);
    diffs.push_back(lp_norm(v - u0, 2.0));
    const GraphFunction gv = regularized_nonlinearity(pair, u0, e * e, lambda, p);
    gdiffs.push_back(lp_norm(gv - g0, 2.0));
    double l1 = 0.0, linf = 0.0;
    for (const auto& probe : probes) {
      const GraphFunction jp = regularizer_apply(pair, probe, e);
      l1 = std::max(l1, lp_norm(jp, 1.0) / lp_norm(probe, 1.0));
      linf = std::max(linf, lp_norm(jp, kInfinity) / lp_norm(probe, kInfinity));
    }
    l1_worst = std::max(l1_worst, l1);
    linf_worst = std::max(linf_worst, linf);
    rows.push_back(Json{{"eps", e},
                        {"l2_distance", diffs.back()},
                        {"nonlinearity_l2_distance", gdiffs.back()},
                        {"l1_ratio", l1},
                        {"linf_ratio", linf}});
  }
  const double bound = 1.0 + pair.n() * g_sup;
  report.metrics["table"] = rows;
  report.metrics["operator_bound"] = bound;
  report.metrics["threshold"] = regularizer_threshold(pair) ? Json(*regularizer_threshold(pair))
                                                            : Json(nullptr);
  auto worst_ratio = [](const std::vector<double>& d) {
    double worst = 0.0;
    for (std::size_t i = 1; i < d.size(); ++i) worst = std::max(worst, d[i] / d[i - 1]);
    return worst;
  };
  const double mono = worst_ratio(diffs), gmono = worst_ratio(gdiffs);
  report.add_check("l2_convergence_monotone", mono < 1.0, mono, 1.0);
  report.add_check("nonlinearity_convergence_monotone", gmono < 1.0, gmono, 1.0);
  report.add_check("l1_operator_bound", l1_worst <= bound, l1_worst, bound);
  report.add_check("linf_operator_bound", linf_worst <= bound, linf_worst, bound);
}

int status_code(Report& report) {
  if (report.all_pass()) return 0;
  report.status = "failed";
  return 1;
}

void write_report(const fs::path& dir, const Report& report) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  std::ofstream os(dir / "report.json");
  if (os) os << to_json(report).dump(2) << '\n';
}

bool is_input_error(const std::exception& e) {
  return dynamic_cast<const ConfigError*>(&e) || dynamic_cast<const StructuralError*>(&e) ||
         dynamic_cast<const PreconditionError*>(&e) || dynamic_cast<const DomainError*>(&e) ||
         dynamic_cast<const FormDomainError*>(&e) || dynamic_cast<const Json::exception*>(&e);
}

}  // namespace

const char* to_string(ExperimentKind kind) {
  for (const auto& [k, name] : kKinds) {
    if (k == kind) return name;
  }
  return "unknown";
}

ExperimentKind experiment_kind_from_string(const std::string& name) {
  for (const auto& [k, n] : kKinds) {
    if (name == n) return k;
  }
  throw ConfigError("unknown experiment \"" + name + "\"");
}

std::vector<std::string> experiment_names() {
  std::vector<std::string> out;
  for (const auto& entry : kKinds) out.emplace_back(entry.second);
  return out;
}

GraphFunction make_initial(const InitialData& data, const StarGrid& grid) {
  if (data.family == InitialFamily::csv) {
    std::ifstream is(data.path);
    if (!is) throw ConfigError("cannot open initial data file " + data.path.string());
    GraphFunction u = read_csv(is);
    if (!(u.grid() == grid)) {
      throw ConfigError("initial data grid does not match the configured grid");
    }
    return u;
  }
  const int n = grid.n();
  if (!data.amplitudes.empty() && static_cast<int>(data.amplitudes.size()) != n) {
    throw ConfigError("initial amplitudes need one entry per edge");
  }
  return GraphFunction::sample(grid, [&](int edge, double x) -> Complex {
    const Complex a = data.amplitudes.empty() ? Complex(1.0) : data.amplitudes[edge];
    const double s = (x - data.center) / data.width;
    switch (data.family) {
      case InitialFamily::gaussian: return a * std::exp(-s * s);
      case InitialFamily::sech: return a / std::cosh(s);
      case InitialFamily::exponential: return a * std::exp(-std::abs(s));
      case InitialFamily::csv: break;
    }
    return 0.0;
  });
}

StarGrid ExperimentConfig::grid() const {
  if (!grid_h || !grid_L) throw ConfigError("this experiment needs \"grid\": {\"h\", \"L\"}");
  return StarGrid::covering(coupling.n(), *grid_h, *grid_L);
}

ExperimentConfig parse_config(const Json& doc, std::optional<ExperimentKind> kind,
                              const fs::path& base_dir) {
  if (!doc.is_object()) throw ConfigError("configuration must be a JSON object");
  static const std::set<std::string> known{"experiment", "description", "seed",   "output",
                                           "coupling",   "grid",        "initial", "plan",
                                           "spectrum",   "propagate",   "decay",  "strichartz",
                                           "nls",        "regularize"};
  for (const auto& [key, value] : doc.items()) {
    if (!known.count(key)) throw ConfigError("unknown configuration key \"" + key + "\"");
  }

  ExperimentConfig c;
  if (const Json* e = field(doc, "experiment")) {
    if (!e->is_string()) throw ConfigError("\"experiment\" must be a string");
    const auto named = experiment_kind_from_string(e->get<std::string>());
    if (kind && *kind != named) {
      throw ConfigError(std::string("configuration is for \"") + to_string(named) +
                        "\", not \"" + to_string(*kind) + "\"");
    }
    c.kind = named;
  } else if (kind) {
    c.kind = *kind;
  } else {
    throw ConfigError("no experiment named");
  }

  if (const Json* s = field(doc, "seed")) {
    if (!s->is_number_unsigned()) throw ConfigError("\"seed\" must be a nonnegative integer");
    c.seed = s->get<std::uint64_t>();
  }
  if (const Json* o = field(doc, "output")) {
    if (!o->is_string()) throw ConfigError("\"output\" must be a string");
    c.output = o->get<std::string>();
  }

  const Json* cj = field(doc, "coupling");
  if (!cj) throw ConfigError("configuration needs a \"coupling\"");
  try {
    c.coupling = coupling_from_json(*cj);
  } catch (const StructuralError& e) {
    throw ConfigError(std::string("coupling: ") + e.what());
  }

  const Json& grid = section(doc, "grid");
  c.grid_h = get_optional_positive(grid, "h");
  c.grid_L = get_optional_positive(grid, "L");
  if (c.grid_h && c.grid_L && *c.grid_L < 2.0 * *c.grid_h) {
    throw ConfigError("grid length must span at least two cells");
  }

  const Json& init = section(doc, "initial");
  if (const Json* f = field(init, "family")) {
    if (!f->is_string()) throw ConfigError("\"family\" must be a string");
    c.initial.family = family_from_string(f->get<std::string>());
  }
  c.initial.center = get_number(init, "center", 0.0);
  c.initial.width = get_positive(init, "width", 1.0);
  if (const Json* a = field(init, "amplitudes")) {
    if (!a->is_array()) throw ConfigError("\"amplitudes\" must be an array");
    for (const auto& v : *a) c.initial.amplitudes.push_back(complex_from_json(v));
    if (static_cast<int>(c.initial.amplitudes.size()) != c.coupling.n()) {
      throw ConfigError("initial amplitudes need one entry per edge");
    }
  }
  if (c.initial.family == InitialFamily::csv) {
    const Json* p = field(init, "path");
    if (!p || !p->is_string()) throw ConfigError("csv initial data needs a \"path\"");
    fs::path path = p->get<std::string>();
    c.initial.path = path.is_relative() ? base_dir / path : path;
  }

  const Json& plan = section(doc, "plan");
  c.plan.epsilon = get_number(plan, "epsilon", 0.0);
  if (c.plan.epsilon < 0.0) throw ConfigError("\"epsilon\" must be nonnegative");
  if (field(plan, "N_k")) c.plan.N_k = get_count(plan, "N_k", 1);
  c.plan.x_max = get_optional_positive(plan, "x_max");

  c.k_max = get_optional_positive(section(doc, "spectrum"), "k_max");

  const Json& prop = section(doc, "propagate");
  if (const Json* ts = field(prop, "times")) {
    c.propagate.times = positive_list(*ts, "\"times\"");
  } else if (field(prop, "t_final")) {
    c.propagate.times = {get_positive(prop, "t_final", 1.0)};
  }
  c.propagate.project = get_bool(prop, "project", false);
  if (field(prop, "oracle_dt")) {
    if (c.propagate.project) throw ConfigError("the Crank-Nicolson oracle needs project = false");
    c.propagate.oracle_dt = get_positive(prop, "oracle_dt", 1e-3);
  }
  c.propagate.oracle_tol = get_positive(prop, "oracle_tol", c.propagate.oracle_tol);
  c.propagate.norm_tol = get_positive(prop, "norm_tol", c.propagate.norm_tol);

  const Json& dec = section(doc, "decay");
  auto& d = c.decay;
  d.t_min = get_positive(dec, "t_min", d.t_min);
  d.t_max = get_positive(dec, "t_max", d.t_max);
  d.count = static_cast<int>(get_count(dec, "count", d.count));
  d.project = get_bool(dec, "project", d.project);
  d.slope_min = get_number(dec, "slope_min", d.slope_min);
  d.slope_max = get_number(dec, "slope_max", d.slope_max);
  if (!(d.t_max > d.t_min) || d.count < 2) throw ConfigError("decay scan needs t_max > t_min and count >= 2");
  if (d.slope_min > d.slope_max) throw ConfigError("decay slope window is empty");

  const Json& str = section(doc, "strichartz");
  auto& s = c.strichartz;
  if (const Json* pairs = field(str, "pairs")) {
    if (!pairs->is_array() || pairs->empty()) throw ConfigError("\"pairs\" must be a non-empty array");
    for (const auto& pj : *pairs) {
      if (!pj.is_array() || pj.size() != 2) throw ConfigError("each pair must be [q, r]");
      AdmissiblePair ap{exponent_from_json(pj[0]), exponent_from_json(pj[1])};
      if (!is_admissible(ap)) throw ConfigError("pair " + pair_label(ap) + " is not admissible");
      s.pairs.push_back(ap);
    }
  } else {
    s.pairs = {{Exponent(8), Exponent(4)}, {Exponent(12), Exponent(3)},
               {Exponent::infinite(), Exponent(2)}};
  }
  s.T = get_positive(str, "T", s.T);
  s.early_end = get_positive(str, "early_end", s.early_end);
  s.early_step = get_positive(str, "early_step", s.early_step);
  s.late_points = static_cast<int>(get_count(str, "late_points", s.late_points));
  s.stability = get_positive(str, "stability", s.stability);
  s.l2_tolerance = get_positive(str, "l2_tolerance", s.l2_tolerance);
  if (!(s.T > s.early_end)) throw ConfigError("strichartz T must exceed early_end");

  const Json& nls = section(doc, "nls");
  auto& np = c.nls.params;
  np.lambda = get_number(nls, "lambda", np.lambda);
  np.p = get_number(nls, "p", np.p);
  np.dt = get_positive(nls, "dt", np.dt);
  np.mass_tol = get_positive(nls, "mass_tol", np.mass_tol);
  np.energy_tol = get_positive(nls, "energy_tol", np.energy_tol);
  c.nls.t_final = get_positive(nls, "t_final", c.nls.t_final);
  c.nls.checkpoint_every = field(nls, "checkpoint_every") ? get_count(nls, "checkpoint_every", 1) : 0;
  try {
    validate(np);
  } catch (const DomainError& e) {
    throw ConfigError(std::string("nls: ") + e.what());
  }

  const Json& reg = section(doc, "regularize");
  if (const Json* es = field(reg, "eps")) c.regularize.eps = positive_list(*es, "\"eps\"");
  c.regularize.probes = static_cast<int>(get_count(reg, "probes", c.regularize.probes));

  c.raw = doc;
  c.raw["seed"] = c.seed;
  c.raw["experiment"] = to_string(c.kind);
  return c;
}

ExperimentConfig load_config(const fs::path& path, std::optional<ExperimentKind> kind) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open configuration " + path.string());
  Json doc;
  try {
    doc = Json::parse(is);
  } catch (const Json::parse_error& e) {
    throw ConfigError(std::string("malformed JSON: ") + e.what());
  }
  return parse_config(doc, kind, path.parent_path());
}

double boundary_mass(const GraphFunction& u) {
  const auto& g = u.grid();
  const int start = static_cast<int>(std::floor(0.9 * (g.m() - 1)));
  const auto w = quadrature_weights(g.m(), g.h());
  double outer = 0.0, total = 0.0;
  for (int j = 0; j < g.n(); ++j) {
    for (int i = 0; i < g.m(); ++i) {
      const double a = w(i) * std::norm(u(j, i));
      total += a;
      if (i >= start) outer += a;
    }
  }
  return total > 0.0 ? outer / total : 0.0;
}

void require_truncation(const GraphFunction& u0) {
  const double r = std::sqrt(boundary_mass(u0));
  if (!(r < kTruncationTol)) {
    std::ostringstream os;
    os << "initial data does not vanish near x = L (relative norm " << r
       << " on the outer 10%); enlarge L";
    throw DomainError(os.str());
  }
}

std::pair<double, double> fit_line(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) throw DomainError("line fit needs two or more points");
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  if (sxx == 0.0) throw DomainError("line fit needs distinct abscissae");
  const double slope = sxy / sxx;
  return {slope, my - slope * mx};
}

std::vector<double> log_times(double t_min, double t_max, int count) {
  if (!(t_min > 0.0) || !(t_max > t_min) || count < 2) {
    throw DomainError("log_times needs 0 < t_min < t_max and count >= 2");
  }
  std::vector<double> t(count);
  const double ratio = std::log(t_max / t_min);
  for (int i = 0; i < count; ++i) t[i] = t_min * std::exp(ratio * i / (count - 1));
  t.back() = t_max;
  return t;
}

DecayScan decay_scan(const ExperimentConfig& config) {
  const auto& pair = config.coupling;
  require_valid(pair);
  const StarGrid grid = config.grid();
  const GraphFunction u0 = make_initial(config.initial, grid);
  require_truncation(u0);
  const auto& d = config.decay;
  const PropagatorPlan plan = make_plan(pair, grid, plan_options(config));
  const Spectrum spec = find_bound_states(pair, config.k_max);

  DecayScan scan;
  scan.times = log_times(d.t_min, d.t_max, d.count);
  const auto snaps = d.project ? propagate_ac(plan, spec, u0, scan.times)
                               : propagate_full(plan, spec, u0, scan.times);
  const double l1 = lp_norm(d.project ? project_ac(spec, u0) : u0, 1.0);
  std::vector<double> lx, ly;
  for (std::size_t i = 0; i < snaps.size(); ++i) {
    const double t = scan.times[i];
    check_escape(snaps[i], t);
    scan.max_boundary_mass = std::max(scan.max_boundary_mass, boundary_mass(snaps[i]));
    const double sup = lp_norm(snaps[i], kInfinity);
    scan.sup_norm.push_back(sup);
    scan.l2_norm.push_back(lp_norm(snaps[i], 2.0));
    scan.dispersive_constant = std::max(scan.dispersive_constant, std::sqrt(t) * sup / l1);
    lx.push_back(std::log(t));
    ly.push_back(std::log(sup));
  }
  std::tie(scan.slope, scan.intercept) = fit_line(lx, ly);
  return scan;
}

std::vector<double> strichartz_times(const StrichartzSettings& s) {
  std::vector<double> t;
  const long early = std::max(1L, std::lround(s.early_end / s.early_step));
  for (long i = 0; i <= early; ++i) t.push_back(s.early_end * i / early);
  const double ratio = std::log(s.T / s.early_end);
  for (int i = 1; i <= s.late_points; ++i) {
    t.push_back(s.early_end * std::exp(ratio * i / s.late_points));
  }
  t.back() = s.T;
  // Same geometric spacing from T to 2T.
  const int doubling =
      std::max(2, static_cast<int>(std::ceil(s.late_points * std::log(2.0) / ratio)));
  for (int i = 1; i <= doubling; ++i) t.push_back(s.T * std::exp(std::log(2.0) * i / doubling));
  t.back() = 2.0 * s.T;
  return t;
}

std::vector<StrichartzRow> strichartz_table(const ExperimentConfig& config,
                                            const std::vector<AdmissiblePair>& pairs) {
  for (const auto& p : pairs) require_admissible(p);
  const auto& pair = config.coupling;
  require_valid(pair);
  const StarGrid grid = config.grid();
  const GraphFunction u0 = make_initial(config.initial, grid);
  require_truncation(u0);
  const auto& s = config.strichartz;
  const PropagatorPlan plan = make_plan(pair, grid, plan_options(config));
  const Spectrum spec = find_bound_states(pair, config.k_max);
  const double ref = lp_norm(project_ac(spec, u0), 2.0);

  const auto times = strichartz_times(s);
  const std::size_t split = static_cast<std::size_t>(
      std::find(times.begin(), times.end(), s.T) - times.begin());
  // norms[p][i] = |u(t_i)|_{r_p}; evaluated in chunks to bound memory.
  std::vector<std::vector<double>> norms(pairs.size(), std::vector<double>(times.size()));
  constexpr std::size_t kChunk = 16;
  for (std::size_t start = 0; start < times.size(); start += kChunk) {
    const std::size_t len = std::min(kChunk, times.size() - start);
    const auto snaps = propagate_ac(plan, spec, u0, std::span(times).subspan(start, len));
    for (std::size_t i = 0; i < len; ++i) {
      check_escape(snaps[i], times[start + i]);
      for (std::size_t p = 0; p < pairs.size(); ++p) {
        const Exponent& r = pairs[p].r;
        norms[p][start + i] = lp_norm(snaps[i], r.is_infinite() ? kInfinity : r.value());
      }
    }
  }

  auto time_norm = [&](const std::vector<double>& v, const Exponent& q, std::size_t end) {
    if (q.is_infinite()) return *std::max_element(v.begin(), v.begin() + end + 1);
    const double qv = q.value();
    double acc = 0.0;
    for (std::size_t i = 0; i < end; ++i) {
      acc += 0.5 * (times[i + 1] - times[i]) * (std::pow(v[i], qv) + std::pow(v[i + 1], qv));
    }
    return std::pow(acc, 1.0 / qv);
  };

  std::vector<StrichartzRow> rows;
  for (std::size_t p = 0; p < pairs.size(); ++p) {
    StrichartzRow row{pairs[p]};
    row.ratio_T = time_norm(norms[p], pairs[p].q, split) / ref;
    row.ratio_2T = time_norm(norms[p], pairs[p].q, times.size() - 1) / ref;
    row.relative_change = std::abs(row.ratio_2T - row.ratio_T) / row.ratio_T;
    rows.push_back(row);
  }
  return rows;
}

double gagliardo_nirenberg_ratio(const GraphFunction& u, double p) {
  const double l2 = lp_norm(u, 2.0);
  const double d2 = lp_norm(derivative(u), 2.0);
  const double lp = lp_norm(u, p + 1.0);
  return std::pow(lp, p + 1.0) / (std::pow(d2, 0.5 * (p - 1.0)) * std::pow(l2, 0.5 * (p + 3.0)));
}

double gagliardo_nirenberg_probe(const StarGrid& grid, double p, int count, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  double worst = 0.0;
  for (int i = 0; i < count; ++i) {
    const GraphFunction u = random_gaussian_sum(grid, rng, 0.3, 3.0, 0.4 * grid.L());
    worst = std::max(worst, gagliardo_nirenberg_ratio(u, p));
  }
  return worst;
}

void Report::add_check(std::string name, bool pass, double value, double threshold) {
  checks.push_back({std::move(name), pass, value, threshold});
}

bool Report::all_pass() const {
  return std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.pass; });
}

Json to_json(const Report& report) {
  Json checks = Json::array();
  for (const auto& c : report.checks) {
    checks.push_back(
        Json{{"name", c.name}, {"pass", c.pass}, {"value", c.value}, {"threshold", c.threshold}});
  }
  Json out{{"experiment", report.experiment},
           {"status", report.status},
           {"seed", report.seed},
           {"config", report.config},
           {"metrics", report.metrics},
           {"checks", checks},
           {"notes", report.notes}};
  if (!report.error.empty()) out["error"] = report.error;
  return out;
}

int run(const ExperimentConfig& config) {
  Report report;
  report.experiment = to_string(config.kind);
  report.config = config.raw;
  report.seed = config.seed;
  int code = 0;
  try {
    std::error_code ec;
    fs::create_directories(config.output, ec);
    if (ec) throw ConfigError("cannot create output directory " + config.output.string());
    switch (config.kind) {
      case ExperimentKind::check_coupling: run_check_coupling(config, report); break;
      case ExperimentKind::spectrum: run_spectrum(config, report); break;
      case ExperimentKind::propagate: run_propagate(config, report); break;
      case ExperimentKind::decay_scan: run_decay_scan(config, report); break;
      case ExperimentKind::strichartz: run_strichartz(config, report); break;
      case ExperimentKind::nls: run_nls(config, report); break;
      case ExperimentKind::regularize_test: run_regularize(config, report); break;
    }
    code = status_code(report);
  } catch (const std::exception& e) {
    report.error = e.what();
    if (is_input_error(e)) {
      report.status = "error";
      code = 2;
    } else {
      report.status = "aborted";
      code = 3;
    }
    if (const auto* pe = dynamic_cast<const PlanError*>(&e)) {
      report.metrics["suggested_K"] = pe->suggested_K();
      report.metrics["suggested_N_k"] = pe->suggested_Nk();
    }
    std::cerr << "sgs " << report.experiment << ": " << e.what() << '\n';
  }
  write_report(config.output, report);
  for (const auto& c : report.checks) {
    std::cout << (c.pass ? "PASS " : "FAIL ") << c.name << " value=" << c.value
              << " threshold=" << c.threshold << '\n';
  }
  std::cout << "status: " << report.status << '\n';
  return code;
}

int run_file(ExperimentKind kind, const fs::path& config_path, std::optional<std::uint64_t> seed,
             std::optional<fs::path> out) {
  ExperimentConfig config;
  try {
    config = load_config(config_path, kind);
  } catch (const std::exception& e) {
    std::cerr << "sgs " << to_string(kind) << ": " << e.what() << '\n';
    if (out) {
      Report report;
      report.experiment = to_string(kind);
      report.status = "error";
      report.error = e.what();
      write_report(*out, report);
    }
    return 2;
  }
  if (seed) {
    config.seed = *seed;
    config.raw["seed"] = *seed;
  }
  if (out) {
    config.output = *out;
    config.raw["output"] = out->string();
  }
  return run(config);
}

}  // namespace sgs
