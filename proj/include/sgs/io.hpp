#pragma once

#include "json.hpp"

#include "sgs/coupling.hpp"
#include "sgs/propagator.hpp"
#include "sgs/spectrum.hpp"

namespace sgs {

using Json = nlohmann::json;

/// Accepts {"re": x, "im": y}, [x, y] or a bare number.
Complex complex_from_json(const Json& j);
Json to_json(Complex z);

Matrix matrix_from_json(const Json& j, int n);
Json to_json(const Matrix& m);

/// {"n": 3, "A": [[...]], "B": [[...]]} or {"preset": "delta", "n": 3,
/// "alpha": -1}; delta_prime takes "beta". Throws ConfigError.
CouplingPair coupling_from_json(const Json& j);
/// Explicit-matrix form.
Json to_json(const CouplingPair& pair);

Json to_json(const ValidityReport& report);
Json to_json(const Spectrum& spec);
Json to_json(const StarGrid& grid);
Json to_json(const PropagatorPlan& plan);

}  // namespace sgs
