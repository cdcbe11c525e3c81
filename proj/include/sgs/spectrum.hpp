#pragma once

#include <optional>
#include <vector>

#include "sgs/coupling.hpp"
#include "sgs/discretize.hpp"

namespace sgs {

/// Eigenfunction c_j e^{-k x} on edge j with eigenvalue -k^2, normalized in
/// L^2 of the infinite star: sum_j |c_j|^2 / (2k) = 1.
struct BoundState {
  double k = 0.0;
  double eigenvalue = 0.0;
  Vector amplitudes;
  int multiplicity_index = 0;

  Complex value(int edge, double x) const;
  GraphFunction sample(const StarGrid& grid) const;
};

struct Spectrum {
  std::vector<BoundState> bound_states;
  int n_plus = 0;
  /// Smallest nonzero |kappa| with det(A - kappa B) = 0, i.e. the smallest
  /// nonzero root of det(A + ikB), which lies on the imaginary axis.
  std::optional<double> rho;
  /// Largest such |kappa| (radius of the disk holding every root).
  std::optional<double> rho_max;
  /// det(A) numerically singular: k = 0 is a root (threshold state).
  bool zero_energy_flag = false;

  int total_multiplicity() const noexcept { return static_cast<int>(bound_states.size()); }
};

/// n_+(AB^dagger): eigenvalues of the Hermitian part of AB^dagger above
/// 1e-10 |AB^dagger|.
int count_negative_eigenvalues(const CouplingPair& pair);

/// 10 (1 + |A| / max(|B|, 1e-30)).
double default_k_max(const CouplingPair& pair);

/// Bound states at the positive real roots k <= k_max of det(A - kB), taken
/// from the eigenvalues of the shifted pencil and polished by golden-section
/// search on sigma_min(A - kB). The window is widened twice (x100 each)
/// before giving up with SearchFailure when the multiplicity does not
/// reach n_+.
Spectrum find_bound_states(const CouplingPair& pair, std::optional<double> k_max = {});

/// Sampled eigenfunctions phi_a together with the coefficients c of the
/// point projection sum_a c_a phi_a. c solves the Gram system, so the
/// projection is exact for the discrete inner product.
struct PointComponents {
  std::vector<GraphFunction> phi;
  Vector coefficients;
};
PointComponents point_components(const Spectrum& spec, const GraphFunction& u);

/// Sum_j <u, phi_j> phi_j, realized as the orthogonal projection onto the
/// sampled eigenfunctions in the trapezoidal inner product.
GraphFunction project_point(const Spectrum& spec, const GraphFunction& u);

/// u - project_point(spec, u).
GraphFunction project_ac(const Spectrum& spec, const GraphFunction& u);

/// Both extreme nonzero root moduli {rho, rho_max}; empty when det(A + ikB)
/// has no nonzero root.
struct StripRoots {
  std::optional<double> smallest;
  std::optional<double> largest;
};
StripRoots strip_roots(const CouplingPair& pair);

std::optional<double> strip_radius(const CouplingPair& pair);

/// Real roots kappa > 0 of det(A - kappa B) on (0, k_max], found by the
/// sampled minimum search. Exposed for diagnostics and tests.
std::vector<double> pencil_roots(const Matrix& A, const Matrix& B, double k_max, int samples);

}  // namespace sgs
