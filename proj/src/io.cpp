#include "sgs/io.hpp"

#include "sgs/error.hpp"

namespace sgs {

namespace {

double number(const Json& j, const char* what) {
  if (!j.is_number()) throw ConfigError(std::string("expected a number for ") + what);
  return j.get<double>();
}

}  // namespace

Complex complex_from_json(const Json& j) {
  if (j.is_number()) return {j.get<double>(), 0.0};
  if (j.is_array() && j.size() == 2) return {number(j[0], "re"), number(j[1], "im")};
  if (j.is_object()) {
    const double re = j.contains("re") ? number(j.at("re"), "re") : 0.0;
    const double im = j.contains("im") ? number(j.at("im"), "im") : 0.0;
    return {re, im};
  }
  throw ConfigError("complex entries must be numbers, [re, im] or {\"re\", \"im\"}");
}

Json to_json(Complex z) { return Json{{"re", z.real()}, {"im", z.imag()}}; }

Matrix matrix_from_json(const Json& j, int n) {
  if (!j.is_array() || static_cast<int>(j.size()) != n) {
    throw ConfigError("matrix must have " + std::to_string(n) + " rows");
  }
  Matrix m(n, n);
  for (int r = 0; r < n; ++r) {
    const auto& row = j[r];
    if (!row.is_array() || static_cast<int>(row.size()) != n) {
      throw ConfigError("matrix row " + std::to_string(r) + " must have " + std::to_string(n) +
                        " entries");
    }
    for (int c = 0; c < n; ++c) m(r, c) = complex_from_json(row[c]);
  }
  return m;
}

Json to_json(const Matrix& m) {
  Json rows = Json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    Json row = Json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(to_json(m(r, c)));
    rows.push_back(row);
  }
  return rows;
}

CouplingPair coupling_from_json(const Json& j) {
  if (!j.is_object()) throw ConfigError("coupling must be a JSON object");
  if (!j.contains("n") || !j.at("n").is_number_integer()) {
    throw ConfigError("coupling needs an integer edge count \"n\"");
  }
  const int n = j.at("n").get<int>();
  if (n < 2) throw ConfigError("coupling needs n >= 2");
  if (j.contains("preset")) {
    if (!j.at("preset").is_string()) throw ConfigError("preset must be a string");
    Preset p;
    try {
      p.kind = preset_kind_from_string(j.at("preset").get<std::string>());
    } catch (const StructuralError& e) {
      throw ConfigError(e.what());
    }
    if (p.kind == PresetKind::delta) p.strength = number(j.value("alpha", Json(0.0)), "alpha");
    if (p.kind == PresetKind::delta_prime) {
      if (!j.contains("beta")) throw ConfigError("delta_prime preset needs \"beta\"");
      p.strength = number(j.at("beta"), "beta");
    }
    return preset(p, n);
  }
  if (!j.contains("A") || !j.contains("B")) {
    throw ConfigError("coupling needs either \"preset\" or both \"A\" and \"B\"");
  }
  return CouplingPair(matrix_from_json(j.at("A"), n), matrix_from_json(j.at("B"), n));
}

Json to_json(const CouplingPair& pair) {
  return Json{{"n", pair.n()}, {"A", to_json(pair.A())}, {"B", to_json(pair.B())}};
}

Json to_json(const ValidityReport& report) {
  std::vector<double> sv(report.singular_values.data(),
                         report.singular_values.data() + report.singular_values.size());
  return Json{{"h1", report.h1_ok},
              {"h2", report.h2_ok},
              {"rank", report.rank},
              {"singular_values", sv},
              {"h2_residual", report.h2_residual}};
}

Json to_json(const Spectrum& spec) {
  Json states = Json::array();
  for (const auto& bs : spec.bound_states) {
    Json amps = Json::array();
    for (Eigen::Index i = 0; i < bs.amplitudes.size(); ++i) amps.push_back(to_json(bs.amplitudes(i)));
    states.push_back(Json{{"k", bs.k},
                          {"eigenvalue", bs.eigenvalue},
                          {"amplitudes", amps},
                          {"multiplicity_index", bs.multiplicity_index}});
  }
  Json out{{"n_plus", spec.n_plus},
           {"bound_states", states},
           {"rho", spec.rho ? Json(*spec.rho) : Json(nullptr)},
           {"rho_max", spec.rho_max ? Json(*spec.rho_max) : Json(nullptr)},
           {"zero_energy_flag", spec.zero_energy_flag}};
  return out;
}

Json to_json(const StarGrid& grid) {
  return Json{{"n", grid.n()}, {"h", grid.h()}, {"m", grid.m()}, {"L", grid.L()}};
}

Json to_json(const PropagatorPlan& plan) {
  return Json{{"K", plan.K},
              {"N_k", plan.N_k},
              {"h_k", plan.h_k},
              {"epsilon", plan.epsilon},
              {"delta_cap", plan.delta_cap ? Json(*plan.delta_cap) : Json(nullptr)},
              {"grid", to_json(plan.grid)}};
}

}  // namespace sgs
