#pragma once

#include <functional>
#include <vector>

#include "sgs/coupling.hpp"
#include "sgs/discretize.hpp"
#include "sgs/propagator.hpp"

namespace sgs {

enum class Splitting { strang };

/// i u_t + Delta(A,B) u + lambda |u|^{p-1} u = 0.
struct NlsParams {
  double lambda = 1.0;
  double p = 3.0;
  double dt = 1e-3;
  Splitting splitting = Splitting::strang;
  /// Relative L^2 drift that aborts the run.
  double mass_tol = 1e-8;
  /// Relative energy drift reported as a warning; never aborts.
  double energy_tol = 1e-2;
};

/// Throws DomainError unless 1 < p < 5, dt > 0 and tolerances are positive.
void validate(const NlsParams& params);

struct ConservationLog {
  std::vector<double> times;
  std::vector<double> mass;    // |u(t)|_2
  std::vector<double> energy;  // discrete Hamiltonian; empty without a form domain

  double max_mass_drift() const;    // relative to mass[0]
  double max_energy_drift() const;  // |E - E0| / (1 + |E0|)
};

struct NlsResult {
  GraphFunction u;
  std::vector<double> checkpoint_times;
  std::vector<GraphFunction> checkpoints;
  ConservationLog log;
  bool energy_logged = false;
  bool energy_warning = false;
};

/// Exact pointwise flow u <- exp(i lambda |u|^{p-1} dt) u.
GraphFunction nonlinear_step(const GraphFunction& u, double lambda, double p, double dt);

/// Strang splitting on the Crank-Nicolson unknowns: half nonlinear step,
/// one CN step, half nonlinear step. In the vertex coordinates a
/// (u(0) = W a) the nonlinear substep is a <- exp(i lambda tau W^dagger
/// diag(|W a|^{p-1}) W) a, which reduces to the pointwise flow whenever
/// range(W) is spanned by coordinate-blind vectors (Kirchhoff, delta,
/// delta', Neumann) and keeps the discrete mass exact in general.
///
/// The logged energy is the discrete Hamiltonian s^dagger K s -
/// 2 lambda/(p+1) sum_i w_i |u_i|^{p+1}, the quantity the flow conserves
/// (see hamiltonian()). It is recorded only when u0 lies in the form domain.
/// Aborts with NumericalAbort when the relative mass drift exceeds mass_tol
/// or the state stops being finite.
///
/// checkpoint_every > 0 stores the solution every that many steps
/// (including t = 0 and t_final).
NlsResult nls_solve(const CouplingPair& pair, const GraphFunction& u0, const NlsParams& params,
                    double t_final, long checkpoint_every = 0);

/// g(u) = lambda |u|^{p-1} u, pointwise.
GraphFunction pointwise_nonlinearity(const GraphFunction& u, double lambda, double p);

/// J_eps g(J_eps u) with J_eps = (I + eps H)^{-1}, i.e. regularizer_apply
/// at parameter sqrt(eps).
GraphFunction regularized_nonlinearity(const CouplingPair& pair, const GraphFunction& u,
                                       double eps, double lambda, double p);

}  // namespace sgs
