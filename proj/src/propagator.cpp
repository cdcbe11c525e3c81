#include "sgs/propagator.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>

#include "sgs/error.hpp"
#include "sgs/parallel.hpp"

namespace sgs {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr long kMaxFftLength = 1L << 20;
// Relative L^2 content of F allowed beyond 0.9 K, and allowed to wrap around
// the period of the k-sum.
constexpr double kTailTol = 1e-4;
constexpr double kWrapTol = 1e-4;
// Required e-foldings of the slowest pole contribution across one period.
constexpr double kAliasDecay = 36.0;

long next_pow2(double v) {
  long n = 2;
  while (static_cast<double>(n) < v) n *= 2;
  return n;
}

// FFTW plans are created once per length and shared; execution through the
// new-array interface is thread safe.
class Fft {
 public:
  explicit Fft(long n) : n_(n) {
    auto* tmp_in = static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * n));
    auto* tmp_out = static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * n));
    const unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
    fwd_ = fftw_plan_dft_1d(static_cast<int>(n), tmp_in, tmp_out, FFTW_FORWARD, flags);
    bwd_ = fftw_plan_dft_1d(static_cast<int>(n), tmp_in, tmp_out, FFTW_BACKWARD, flags);
    fftw_free(tmp_in);
    fftw_free(tmp_out);
  }
  Fft(const Fft&) = delete;
  Fft& operator=(const Fft&) = delete;
  ~Fft() {
    fftw_destroy_plan(fwd_);
    fftw_destroy_plan(bwd_);
  }

  void forward(std::vector<Complex>& in, std::vector<Complex>& out) const {
    fftw_execute_dft(fwd_, as_fftw(in), as_fftw(out));
  }
  void backward(std::vector<Complex>& in, std::vector<Complex>& out) const {
    fftw_execute_dft(bwd_, as_fftw(in), as_fftw(out));
  }
  long size() const noexcept { return n_; }

 private:
  static fftw_complex* as_fftw(std::vector<Complex>& v) {
    return reinterpret_cast<fftw_complex*>(v.data());
  }
  long n_;
  fftw_plan fwd_;
  fftw_plan bwd_;
};

std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

const Fft& fft_for(long n) {
  static std::map<long, std::unique_ptr<Fft>> cache;
  std::lock_guard lock(planner_mutex());
  auto& slot = cache[n];
  if (!slot) slot = std::make_unique<Fft>(n);
  return *slot;
}

// I0 = (e^z - 1)/z and I1 = (e^z - 1 - z)/z^2.
std::pair<Complex, Complex> exp_moments(Complex z) {
  if (std::abs(z) < 0.5) {
    Complex i0 = 0.0, i1 = 0.0;
    double fact = 1.0;  // (n+1)!
    Complex zn = 1.0;
    for (int n = 0; n < 18; ++n) {
      fact *= (n + 1);
      i0 += zn / fact;
      i1 += zn / (fact * (n + 2));
      zn *= z;
    }
    return {i0, i1};
  }
  const Complex ez = std::exp(z);
  return {(ez - 1.0) / z, (ez - 1.0 - z) / (z * z)};
}

struct Convolutions {
  Matrix left;   // int_0^x e^{ik(x-y)} u(y) dy
  Matrix right;  // int_x^L e^{ik(y-x)} u(y) dy
};

Convolutions exponential_convolutions(const GraphFunction& u, Complex k) {
  const int n = u.grid().n();
  const int m = u.grid().m();
  const double h = u.grid().h();
  const Complex z(-k.imag() * h, k.real() * h);  // ikh
  const Complex ez = std::exp(z);
  const auto [i0, i1] = exp_moments(z);
  const Complex near = h * (i0 - i1);
  const Complex far = h * i1;

  Convolutions c{Matrix::Zero(n, m), Matrix::Zero(n, m)};
  const Matrix& v = u.values();
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i + 1 < m; ++i) {
      c.left(j, i + 1) = ez * c.left(j, i) + near * v(j, i) + far * v(j, i + 1);
    }
    for (int i = m - 2; i >= 0; --i) {
      c.right(j, i) = ez * c.right(j, i + 1) + far * v(j, i) + near * v(j, i + 1);
    }
  }
  return c;
}

void require_upper(Complex k) {
  if (!(k.imag() > 0.0)) throw DomainError("resolvent needs Im k > 0");
}

// lim_{k->0} G(k): -I on range(P_D) and on the nonzero spectrum of Lambda,
// +I on range(P_N) and on ker(Lambda) within range(P_R).
Matrix scattering_at_zero(const CouplingPair& pair) {
  const auto dec = projector_decomposition(pair);
  const int n = pair.n();
  Matrix Q = dec.P_D;
  if (dec.dim_robin > 0) {
    Eigen::SelfAdjointEigenSolver<Matrix> eig(dec.Lambda);
    const auto& ev = eig.eigenvalues();
    const double tol = 1e-12 * std::max(1.0, ev.cwiseAbs().maxCoeff());
    for (int i = 0; i < n; ++i) {
      if (std::abs(ev(i)) > tol) Q += eig.eigenvectors().col(i) * eig.eigenvectors().col(i).adjoint();
    }
  }
  return Matrix::Identity(n, n) - 2.0 * Q;
}

void check_point(const CouplingPair& pair, GraphPoint p) {
  if (p.edge < 0 || p.edge >= pair.n()) throw StructuralError("edge index out of range");
  if (!(p.x >= 0.0)) throw DomainError("edge coordinate must be nonnegative");
}

Complex unit_phase(double angle) { return {std::cos(angle), std::sin(angle)}; }

// Evaluation of the continuous part for one time from precomputed transforms.
struct Evolved {
  Matrix Y;  // n x N, e^{-(it+eps)k^2} [u_hat(k) + G(k) u_hat(-k)]
};

Evolved evolve_spectrum(const PropagatorPlan& plan, const SpectralData& data, double t) {
  const long N = plan.N_k;
  Evolved e{Matrix(data.n, N)};
  for (long m = 0; m < N; ++m) {
    const double k = plan.k(m);
    const double k2 = k * k;
    const Complex ph = std::exp(-plan.epsilon * k2) * unit_phase(-t * k2);
    e.Y.col(m) = ph * (data.U.col(m) + plan.G[m] * data.U.col(N - 1 - m));
  }
  return e;
}

GraphFunction synthesize(const PropagatorPlan& plan, const Evolved& e) {
  const long N = plan.N_k;
  const int n = plan.grid.n();
  const int m = plan.grid.m();
  const double scale = 1.0 / (N * plan.grid.h());
  const Fft& fft = fft_for(N);
  std::vector<Complex> in(N), out(N);
  GraphFunction u(plan.grid);
  for (int j = 0; j < n; ++j) {
    for (long q = 0; q < N; ++q) in[q] = e.Y(j, q);
    fft.backward(in, out);
    for (int i = 0; i < m; ++i) {
      const double sign = (i % 2 == 0) ? 1.0 : -1.0;
      u(j, i) = scale * sign * unit_phase(kPi * i / N) * out[i];
    }
  }
  return u;
}

std::pair<Vector, Vector> spectral_traces(const PropagatorPlan& plan, const Evolved& e) {
  const int n = plan.grid.n();
  const double scale = 1.0 / (plan.N_k * plan.grid.h());
  Vector value = Vector::Zero(n), slope = Vector::Zero(n);
  for (long q = 0; q < plan.N_k; ++q) {
    value += e.Y.col(q);
    slope += Complex(0.0, plan.k(q)) * e.Y.col(q);
  }
  return {scale * value, scale * slope};
}

GraphFunction remove_point_part(const GraphFunction& u0, const PointComponents& pc) {
  GraphFunction ac = u0;
  for (std::size_t a = 0; a < pc.phi.size(); ++a) {
    ac.values() -= pc.coefficients(static_cast<Eigen::Index>(a)) * pc.phi[a].values();
  }
  return ac;
}

// Transform for the AC part of u0. u0 and u0 - sum c phi give the same
// real-axis integral, but F(phi) decays only like 1/k, so the raw data is
// better resolved unless the point part dominates.
SpectralData ac_spectral_data(const PropagatorPlan& plan, const GraphFunction& u0,
                              const PointComponents& pc) {
  SpectralData projected = half_line_transform(plan, remove_point_part(u0, pc));
  if (pc.phi.empty()) return projected;
  SpectralData raw = half_line_transform(plan, u0);
  const double tail_raw = diagnose(plan, raw).truncation_tail;
  const double tail_projected = diagnose(plan, projected).truncation_tail;
  return tail_raw < tail_projected ? raw : projected;
}

void require_plan_grid(const PropagatorPlan& plan, const GraphFunction& u) {
  if (!(plan.grid == u.grid())) throw StructuralError("function grid differs from plan grid");
}

}  // namespace

Complex kernel_eval(const CouplingPair& pair, GraphPoint x, GraphPoint y, Complex k) {
  if (k == Complex(0.0)) throw DomainError("kernel is singular at k = 0; use k_kernel_eval");
  return k_kernel_eval(pair, x, y, k) / k;
}

Complex k_kernel_eval(const CouplingPair& pair, GraphPoint x, GraphPoint y, Complex k) {
  check_point(pair, x);
  check_point(pair, y);
  if (k.imag() < 0.0) throw DomainError("kernel branch needs Im k >= 0");
  const Matrix G = k == Complex(0.0) ? scattering_at_zero(pair) : scattering_matrix(pair, k).G;
  const Complex ik(-k.imag(), k.real());
  Complex value = std::exp(ik * (x.x + y.x)) * G(x.edge, y.edge);
  if (x.edge == y.edge) value += std::exp(ik * std::abs(x.x - y.x));
  return Complex(0.0, 0.5) * value;
}

GraphFunction resolvent_apply(const CouplingPair& pair, const GraphFunction& u, Complex k) {
  require_upper(k);
  if (u.grid().n() != pair.n()) throw StructuralError("edge count differs from coupling");
  const Matrix G = scattering_matrix(pair, k).G;
  const auto conv = exponential_convolutions(u, k);
  const Vector Gw = G * conv.right.col(0);
  const Complex ik(-k.imag(), k.real());
  const Complex pre = Complex(0.0, 0.5) / k;

  GraphFunction v(u.grid());
  for (int i = 0; i < u.grid().m(); ++i) {
    const Complex e = std::exp(ik * u.grid().x(i));
    v.values().col(i) = pre * (conv.left.col(i) + conv.right.col(i) + e * Gw);
  }
  return v;
}

std::pair<Vector, Vector> resolvent_traces(const CouplingPair& pair, const GraphFunction& u,
                                           Complex k) {
  require_upper(k);
  if (u.grid().n() != pair.n()) throw StructuralError("edge count differs from coupling");
  const Matrix G = scattering_matrix(pair, k).G;
  const Vector w = exponential_convolutions(u, k).right.col(0);
  const Matrix I = Matrix::Identity(pair.n(), pair.n());
  return {(Complex(0.0, 0.5) / k) * (I + G) * w, 0.5 * (I - G) * w};
}

std::optional<double> regularizer_threshold(const CouplingPair& pair) {
  return strip_roots(pair).largest;
}

GraphFunction regularizer_apply(const CouplingPair& pair, const GraphFunction& u, double eps) {
  if (!(eps > 0.0)) throw DomainError("regularization parameter must be positive");
  const auto bound = regularizer_threshold(pair);
  if (bound && !(1.0 / eps > *bound)) {
    throw StripViolation("1/eps = " + std::to_string(1.0 / eps) +
                         " must exceed the root radius " + std::to_string(*bound));
  }
  GraphFunction v = resolvent_apply(pair, u, Complex(0.0, 1.0 / eps));
  v *= Complex(1.0 / (eps * eps));
  return v;
}

PropagatorPlan make_plan(const CouplingPair& pair, const StarGrid& grid,
                         const PlanOptions& options) {
  require_valid(pair);
  if (grid.n() != pair.n()) throw StructuralError("grid edge count differs from coupling");
  if (!(options.epsilon >= 0.0)) throw DomainError("damping epsilon must be nonnegative");

  PropagatorPlan plan(pair, grid);
  const double h = grid.h();
  const double L = grid.L();
  const double x_max = options.x_max.value_or(L);
  plan.epsilon = options.epsilon;
  plan.K = kPi / h;
  plan.delta_cap = strip_radius(pair);

  double need = 4.0 * (L + x_max) / h;
  if (plan.delta_cap) need = std::max(need, (2.0 * L + kAliasDecay / *plan.delta_cap) / h);
  long N = options.N_k ? next_pow2(static_cast<double>(*options.N_k))
                       : std::min(next_pow2(need), kMaxFftLength);
  N = std::max(N, next_pow2(grid.m()));
  plan.N_k = N;
  plan.h_k = 2.0 * kPi / (N * h);

  plan.G.resize(N);
  for (long m = 0; m < N / 2; ++m) {
    const double k = plan.k(m);
    plan.G[m] = scattering_matrix(pair, Complex(k, 0.0)).G;
    // G(-k) = G(k)^{-1} = G(k)^dagger for real k
    plan.G[N - 1 - m] = plan.G[m].adjoint();
  }
  return plan;
}

SpectralData half_line_transform(const PropagatorPlan& plan, const GraphFunction& u) {
  require_plan_grid(plan, u);
  const long N = plan.N_k;
  const int n = u.grid().n();
  const int m = u.grid().m();
  const Eigen::VectorXd w = quadrature_weights(m, u.grid().h());
  const Fft& fft = fft_for(N);
  SpectralData d{n, N, Matrix(n, N)};
  std::vector<Complex> in(N), out(N);
  for (int j = 0; j < n; ++j) {
    std::fill(in.begin(), in.end(), Complex(0.0));
    for (int l = 0; l < m; ++l) {
      const double sign = (l % 2 == 0) ? 1.0 : -1.0;
      in[l] = w(l) * sign * unit_phase(-kPi * l / N) * u(j, l);
    }
    fft.forward(in, out);
    for (long q = 0; q < N; ++q) d.U(j, q) = out[q];
  }
  return d;
}

PlanDiagnostics diagnose(const PropagatorPlan& plan, const SpectralData& data) {
  // The propagated density is F(k) = u_hat(k) + G(k) u_hat(-k); a single
  // half-line transform decays only like 1/k when u(0) != 0. F is measured
  // against the input scale because it can vanish (pure bound states).
  PlanDiagnostics diag;
  Eigen::VectorXd mag(data.N);
  double input_energy = 0.0;
  for (long q = 0; q < data.N; ++q) {
    mag(q) = (data.U.col(q) + plan.G[q] * data.U.col(data.N - 1 - q)).norm();
    input_energy += data.U.col(q).squaredNorm();
  }
  if (input_energy == 0.0) return diag;
  // |F|^2 <= 2 (|u_hat(k)|^2 + |u_hat(-k)|^2), so 4 * input_energy bounds sum |F|^2.
  const double scale = 4.0 * input_energy;
  double tail = 0.0, outer = 0.0;
  bool found = false;
  for (long q = 0; q < data.N / 2; ++q) {
    const double k = std::abs(plan.k(q));
    const double both = mag(q) * mag(q) + mag(data.N - 1 - q) * mag(data.N - 1 - q);
    if (k > 0.9 * plan.K) tail += both;
    outer += both;
    if (!found && outer > kWrapTol * kWrapTol * scale) {
      diag.k_significant = k;
      found = true;
    }
  }
  diag.truncation_tail = std::sqrt(tail / scale);
  diag.damping_bias = -std::expm1(-plan.epsilon * diag.k_significant * diag.k_significant);
  return diag;
}

void check_resolution(const PropagatorPlan& plan, const SpectralData& data, double t) {
  const auto diag = diagnose(plan, data);
  const double L = plan.grid.L();
  if (diag.truncation_tail > kTailTol) {
    throw PlanError("data is under-resolved: spectral tail " + std::to_string(diag.truncation_tail) +
                        " beyond 0.9 K; refine h",
                    2.0 * plan.K, 2 * plan.N_k);
  }
  const double travel = 2.0 * diag.k_significant * std::abs(t);
  if (travel + 2.0 * L > plan.period()) {
    const long suggested = next_pow2((travel + 2.0 * L) / plan.grid.h() * 1.05);
    throw PlanError("k-grid too coarse for t = " + std::to_string(t) +
                        ": waves wrap around the period " + std::to_string(plan.period()),
                    plan.K, suggested);
  }
}

std::vector<GraphFunction> propagate_ac(const PropagatorPlan& plan, const Spectrum& spec,
                                        const GraphFunction& u0, std::span<const double> times) {
  require_plan_grid(plan, u0);
  (void)spec;  // the real-axis k-integral annihilates the point spectrum by itself
  const SpectralData data = half_line_transform(plan, u0);
  for (const double t : times) check_resolution(plan, data, t);
  std::vector<GraphFunction> out(times.size(), GraphFunction(plan.grid));
  parallel_for(times.size(), [&](std::size_t i) {
    out[i] = synthesize(plan, evolve_spectrum(plan, data, times[i]));
  });
  return out;
}

GraphFunction propagate_ac(const PropagatorPlan& plan, const Spectrum& spec,
                           const GraphFunction& u0, double t) {
  const double times[] = {t};
  return std::move(propagate_ac(plan, spec, u0, times).front());
}

std::vector<GraphFunction> propagate_full(const PropagatorPlan& plan, const Spectrum& spec,
                                          const GraphFunction& u0,
                                          std::span<const double> times) {
  require_plan_grid(plan, u0);
  const PointComponents pc = point_components(spec, u0);
  const SpectralData data = ac_spectral_data(plan, u0, pc);
  for (const double t : times) check_resolution(plan, data, t);
  std::vector<GraphFunction> out(times.size(), GraphFunction(plan.grid));
  parallel_for(times.size(), [&](std::size_t i) {
    const double t = times[i];
    GraphFunction u = synthesize(plan, evolve_spectrum(plan, data, t));
    for (std::size_t a = 0; a < pc.phi.size(); ++a) {
      const double k = spec.bound_states[a].k;
      u.values() += unit_phase(k * k * t) * pc.coefficients(static_cast<Eigen::Index>(a)) *
                    pc.phi[a].values();
    }
    out[i] = std::move(u);
  });
  return out;
}

GraphFunction propagate_full(const PropagatorPlan& plan, const Spectrum& spec,
                             const GraphFunction& u0, double t) {
  const double times[] = {t};
  return std::move(propagate_full(plan, spec, u0, times).front());
}

std::pair<Vector, Vector> propagate_full_traces(const PropagatorPlan& plan, const Spectrum& spec,
                                                const GraphFunction& u0, double t) {
  require_plan_grid(plan, u0);
  const PointComponents pc = point_components(spec, u0);
  const SpectralData data = ac_spectral_data(plan, u0, pc);
  check_resolution(plan, data, t);
  auto [value, slope] = spectral_traces(plan, evolve_spectrum(plan, data, t));
  for (std::size_t a = 0; a < pc.phi.size(); ++a) {
    const auto& bs = spec.bound_states[a];
    const Complex c = unit_phase(bs.k * bs.k * t) * pc.coefficients(static_cast<Eigen::Index>(a));
    value += c * bs.amplitudes;
    slope -= bs.k * c * bs.amplitudes;
  }
  return {value, slope};
}

CrankNicolson::CrankNicolson(const CouplingPair& pair, const StarGrid& grid, double dt)
    : grid_(grid), dt_(dt) {
  if (!(dt > 0.0)) throw DomainError("time step must be positive");
  if (grid.n() != pair.n()) throw StructuralError("grid edge count differs from coupling");
  if (grid.m() < 3) throw StructuralError("grid needs at least 3 samples per edge");
  const auto dec = projector_decomposition(pair);
  const int n = pair.n();
  const int m = grid.m();
  const double h = grid.h();

  {
    const Matrix keep = Matrix::Identity(n, n) - dec.P_D;
    Eigen::SelfAdjointEigenSolver<Matrix> eig(0.5 * (keep + keep.adjoint()));
    std::vector<int> cols;
    for (int i = 0; i < n; ++i) {
      if (eig.eigenvalues()(i) > 0.5) cols.push_back(i);
    }
    W_.resize(n, static_cast<Eigen::Index>(cols.size()));
    for (std::size_t c = 0; c < cols.size(); ++c) W_.col(c) = eig.eigenvectors().col(cols[c]);
  }
  const int r = static_cast<int>(W_.cols());
  const int inner = m - 2;
  const long size = r + static_cast<long>(n) * inner;
  auto node = [&](int j, int i) { return r + static_cast<long>(j) * inner + (i - 1); };

  mass_.resize(size);
  mass_.head(r).setConstant(0.5 * h);
  mass_.tail(size - r).setConstant(h);

  std::vector<Eigen::Triplet<Complex>> trip;
  trip.reserve(static_cast<std::size_t>(3 * size + 2 * r * n + r * r));
  const Matrix vertex = Matrix::Identity(r, r) / h + W_.adjoint() * dec.Lambda * W_;
  for (int a = 0; a < r; ++a) {
    for (int b = 0; b < r; ++b) trip.emplace_back(a, b, vertex(a, b));
    for (int j = 0; j < n; ++j) {
      if (W_(j, a) == Complex(0.0)) continue;
      trip.emplace_back(a, node(j, 1), -std::conj(W_(j, a)) / h);
      trip.emplace_back(node(j, 1), a, -W_(j, a) / h);
    }
  }
  for (int j = 0; j < n; ++j) {
    for (int i = 1; i <= inner; ++i) {
      trip.emplace_back(node(j, i), node(j, i), 2.0 / h);
      if (i > 1) trip.emplace_back(node(j, i), node(j, i - 1), -1.0 / h);
      if (i < inner) trip.emplace_back(node(j, i), node(j, i + 1), -1.0 / h);
    }
  }
  K_.resize(size, size);
  K_.setFromTriplets(trip.begin(), trip.end());

  Eigen::SparseMatrix<Complex> M(size, size);
  M.reserve(Eigen::VectorXi::Constant(size, 1));
  for (long i = 0; i < size; ++i) M.insert(i, i) = mass_(i);
  const Complex half_step(0.0, 0.5 * dt);
  const Eigen::SparseMatrix<Complex> lhs = M + half_step * K_;
  rhs_ = M - half_step * K_;
  lu_.compute(lhs);
  if (lu_.info() != Eigen::Success) throw NumericalAbort("Crank-Nicolson factorization failed");
}

Vector CrankNicolson::pack(const GraphFunction& u) const {
  if (!(u.grid() == grid_)) throw StructuralError("function grid differs from stepper grid");
  const int r = vertex_dim();
  const int n = grid_.n();
  const int inner = grid_.m() - 2;
  Vector s(size());
  s.head(r) = W_.adjoint() * u.vertex_values();
  for (int j = 0; j < n; ++j) {
    s.segment(r + static_cast<long>(j) * inner, inner) = u.values().row(j).segment(1, inner).transpose();
  }
  return s;
}

GraphFunction CrankNicolson::unpack(const Vector& state) const {
  const int r = vertex_dim();
  const int n = grid_.n();
  const int inner = grid_.m() - 2;
  GraphFunction u(grid_);
  u.values().col(0) = W_ * state.head(r);
  for (int j = 0; j < n; ++j) {
    u.values().row(j).segment(1, inner) = state.segment(r + static_cast<long>(j) * inner, inner).transpose();
  }
  return u;
}

void CrankNicolson::step(Vector& state) const {
  const Vector b = rhs_ * state;
  state = lu_.solve(b);
}

double CrankNicolson::mass_norm2(const Vector& state) const {
  return (mass_.array() * state.array().abs2()).sum();
}

double CrankNicolson::stiffness_energy(const Vector& state) const {
  return state.dot(K_ * state).real();
}

GraphFunction crank_nicolson_oracle(const CouplingPair& pair, const GraphFunction& u0,
                                    double t_final, double dt) {
  if (!(dt > 0.0)) throw DomainError("time step must be positive");
  if (!(t_final >= 0.0)) throw DomainError("final time must be nonnegative");
  if (t_final == 0.0) return u0;
  const long steps = std::max(1L, std::lround(t_final / dt));
  const CrankNicolson cn(pair, u0.grid(), t_final / steps);
  Vector s = cn.pack(u0);
  for (long i = 0; i < steps; ++i) cn.step(s);
  return cn.unpack(s);
}

}  // namespace sgs
