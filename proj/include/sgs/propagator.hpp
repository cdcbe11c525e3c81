#pragma once

#include <optional>
#include <span>
#include <vector>

#include <Eigen/SparseCore>
#include <Eigen/SparseLU>

#include "sgs/coupling.hpp"
#include "sgs/discretize.hpp"
#include "sgs/spectrum.hpp"

namespace sgs {

/// A point (edge, coordinate) of the star graph.
struct GraphPoint {
  int edge = 0;
  double x = 0.0;
};

/// r_{jj'}(x, y, k) = (i/2k)[delta_{jj'} e^{ik|x-y|} + e^{ik(x+y)} G_{jj'}(k)].
/// Requires Im k >= 0, k != 0 and k not a pole of G.
Complex kernel_eval(const CouplingPair& pair, GraphPoint x, GraphPoint y, Complex k);

/// k r_{jj'}(x, y, k); regular as k -> 0 along the real axis (k = 0 itself
/// is evaluated as that limit).
Complex k_kernel_eval(const CouplingPair& pair, GraphPoint x, GraphPoint y, Complex k);

/// (-Delta(A,B) - k^2)^{-1} u for Im k > 0. Convolutions are evaluated by
/// product integration of the piecewise-linear interpolant of u with exact
/// exponential weights, so the cost is O(n m).
GraphFunction resolvent_apply(const CouplingPair& pair, const GraphFunction& u, Complex k);

/// Vertex traces (v(0), v'(0)) of resolvent_apply, from the closed form
/// v(0) = (i/2k)(I+G)w, v'(0) = (I-G)w/2 with w = int e^{iky} u(y) dy.
std::pair<Vector, Vector> resolvent_traces(const CouplingPair& pair, const GraphFunction& u,
                                           Complex k);

/// Largest root modulus of det(A + ikB) on the imaginary axis, or none.
/// (I + eps^2 H)^{-1} is defined by its kernel for 1/eps above this value.
std::optional<double> regularizer_threshold(const CouplingPair& pair);

/// (I + eps^2 H)^{-1} u, H = -Delta(A,B). Throws StripViolation unless
/// 1/eps exceeds regularizer_threshold(pair).
GraphFunction regularizer_apply(const CouplingPair& pair, const GraphFunction& u, double eps);

struct PlanOptions {
  /// Gaussian damping e^{-eps k^2} in the k-integral.
  double epsilon = 0.0;
  /// Overrides the automatic FFT length (rounded up to a power of two).
  std::optional<long> N_k;
  /// Largest target coordinate; defaults to the grid length.
  std::optional<double> x_max;
};

/// Quadrature plan for the k-integral on a midpoint grid
/// k_m = (m - N_k/2 + 1/2) h_k, m = 0..N_k-1, with h_k h = 2 pi / N_k and
/// K = pi/h; G(k) is cached at every node.
struct PropagatorPlan {
  PropagatorPlan(CouplingPair pair, StarGrid grid) : pair(std::move(pair)), grid(grid) {}

  CouplingPair pair;
  StarGrid grid;
  double K = 0.0;
  long N_k = 0;
  double h_k = 0.0;
  double epsilon = 0.0;
  std::optional<double> delta_cap;
  std::vector<Matrix> G;

  double k(long m) const noexcept { return (m - N_k / 2 + 0.5) * h_k; }
  /// Period of the discrete k-sum in x.
  double period() const noexcept { return N_k * grid.h(); }
};

PropagatorPlan make_plan(const CouplingPair& pair, const StarGrid& grid,
                         const PlanOptions& options = {});

/// Edge-wise half-line Fourier transforms u_hat_j(k_m) = int_0^L e^{-i k_m y} u_j(y) dy.
struct SpectralData {
  int n = 0;
  long N = 0;
  Matrix U;  // n x N
};

SpectralData half_line_transform(const PropagatorPlan& plan, const GraphFunction& u);

struct PlanDiagnostics {
  /// max over the significant band of |e^{-eps k^2} - 1|.
  double damping_bias = 0.0;
  /// L^2 mass of F beyond 0.9 K relative to the input, F(k) = u_hat(k) + G(k) u_hat(-k).
  double truncation_tail = 0.0;
  /// Cutoff beyond which F carries less than 1e-4 of the input L^2 norm.
  double k_significant = 0.0;
};

PlanDiagnostics diagnose(const PropagatorPlan& plan, const SpectralData& data);

/// Throws PlanError when the k-grid does not resolve the data at time t:
/// spectral L^2 tail above 1e-4, or the fastest significant wave wraps around the
/// period within |t|.
void check_resolution(const PropagatorPlan& plan, const SpectralData& data, double t);

/// e^{it Delta} P_ac u0. The k-integral runs over the real axis only, so
/// bound-state components of u0 are removed by the formula itself and u0
/// need not be projected beforehand.
GraphFunction propagate_ac(const PropagatorPlan& plan, const Spectrum& spec,
                           const GraphFunction& u0, double t);

/// propagate_ac at several times sharing one forward transform.
std::vector<GraphFunction> propagate_ac(const PropagatorPlan& plan, const Spectrum& spec,
                                        const GraphFunction& u0, std::span<const double> times);

/// e^{it Delta} P_ac u0 plus sum_j e^{i k_j^2 t} <u0, phi_j> phi_j.
/// The AC part is computed from u0 or from project_ac(u0), whichever has
/// the smaller spectral tail: the two agree in the continuum, but the
/// discrete k-sum resolves a sampled eigenfunction only to O(h^2), so
/// eigenstate data is projected while smooth data is used as is.
GraphFunction propagate_full(const PropagatorPlan& plan, const Spectrum& spec,
                             const GraphFunction& u0, double t);

std::vector<GraphFunction> propagate_full(const PropagatorPlan& plan, const Spectrum& spec,
                                          const GraphFunction& u0,
                                          std::span<const double> times);

/// Vertex traces (u(t,0), u_x(t,0)) of propagate_full, evaluated from the
/// same spectral sums and the bound-state closed forms.
std::pair<Vector, Vector> propagate_full_traces(const PropagatorPlan& plan, const Spectrum& spec,
                                                const GraphFunction& u0, double t);

/// Crank-Nicolson stepper for i u_t = H u on the truncated star.
///
/// Unknowns are the vertex coordinates a in range(I - P_D) and the interior
/// samples of every edge; u = 0 at x = L. The operator comes from the
/// quadratic form sum |u_{i+1} - u_i|^2 / h + <Lambda u(0), u(0)> with lumped
/// mass (h/2 at the vertex, h inside), so it is Hermitian and each step
/// preserves the trapezoidal L^2 norm exactly.
class CrankNicolson {
 public:
  CrankNicolson(const CouplingPair& pair, const StarGrid& grid, double dt);

  const StarGrid& grid() const noexcept { return grid_; }
  double dt() const noexcept { return dt_; }
  int vertex_dim() const noexcept { return static_cast<int>(W_.cols()); }
  long size() const noexcept { return static_cast<long>(mass_.size()); }

  /// Orthonormal basis of range(I - P_D) (vertex values are W a).
  const Matrix& vertex_basis() const noexcept { return W_; }
  const Eigen::VectorXd& mass() const noexcept { return mass_; }
  const Eigen::SparseMatrix<Complex>& stiffness() const noexcept { return K_; }

  Vector pack(const GraphFunction& u) const;
  GraphFunction unpack(const Vector& state) const;

  void step(Vector& state) const;

  /// state^dagger M state.
  double mass_norm2(const Vector& state) const;
  /// state^dagger K state (real part; the imaginary part is roundoff).
  double stiffness_energy(const Vector& state) const;

 private:
  StarGrid grid_;
  double dt_;
  Matrix W_;
  Eigen::VectorXd mass_;
  Eigen::SparseMatrix<Complex> K_;
  Eigen::SparseMatrix<Complex> rhs_;
  Eigen::SparseLU<Eigen::SparseMatrix<Complex>> lu_;
};

/// CN evolution to t_final with round(t_final/dt) steps of equal size.
GraphFunction crank_nicolson_oracle(const CouplingPair& pair, const GraphFunction& u0,
                                    double t_final, double dt);

}  // namespace sgs
