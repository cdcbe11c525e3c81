#include "sgs/spectrum.hpp"

#include <algorithm>
#include <cmath>

#include "sgs/error.hpp"

namespace sgs {

namespace {

constexpr double kRootAccept = 1e-8;  // sigma_min / scale at an accepted root
constexpr double kKernelTol = 1e-8;   // singular values counted as zero at a root

double spectral_norm(const Matrix& m) {
  Eigen::JacobiSVD<Matrix> svd(m);
  return svd.singularValues()(0);
}

struct PencilProbe {
  const Matrix& A;
  const Matrix& B;
  double normA;
  double normB;

  double operator()(double kappa) const {
    Eigen::JacobiSVD<Matrix> svd(A - kappa * B);
    const auto& s = svd.singularValues();
    return s(s.size() - 1) / (normA + std::abs(kappa) * normB);
  }
};

double golden_minimize(const PencilProbe& f, double lo, double hi) {
  constexpr double g = 0.6180339887498949;
  double a = lo, b = hi;
  double c = b - g * (b - a);
  double d = a + g * (b - a);
  double fc = f(c), fd = f(d);
  for (int it = 0; it < 200 && (b - a) > 1e-14 * std::max(1.0, std::abs(b)); ++it) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - g * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + g * (b - a);
      fd = f(d);
    }
  }
  return fc < fd ? c : d;
}

Matrix kernel_at(const Matrix& A, const Matrix& B, double kappa) {
  const Matrix M = A - kappa * B;
  Eigen::JacobiSVD<Matrix> svd(M, Eigen::ComputeFullV);
  const auto& s = svd.singularValues();
  const double scale = std::max(spectral_norm(A), kappa * spectral_norm(B));
  int rank = 0;
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    if (s(i) > kKernelTol * scale) ++rank;
  }
  return svd.matrixV().rightCols(M.cols() - rank);
}

// Nonzero real roots kappa of det(A - kappa B), both signs, ascending. With
// sigma = i |A|/|B| (a real wavenumber, where A + ikB is invertible) the
// finite roots are sigma + 1/mu over the nonzero eigenvalues mu of
// (A - sigma B)^{-1} B. Each candidate is polished by golden section and
// kept only if sigma_min(A - kappa B) vanishes there.
std::vector<double> pencil_real_roots(const Matrix& A, const Matrix& B) {
  const PencilProbe f{A, B, std::max(spectral_norm(A), 1e-300), spectral_norm(B)};
  if (f.normB == 0.0) return {};
  const Complex sigma(0.0, std::max(f.normA, 1e-300) / f.normB);
  const Matrix X = (A - sigma * B).partialPivLu().solve(B);
  Eigen::ComplexEigenSolver<Matrix> eig(X, false);
  const double xnorm = X.cwiseAbs().maxCoeff();

  std::vector<double> roots;
  for (Eigen::Index i = 0; i < eig.eigenvalues().size(); ++i) {
    const Complex mu = eig.eigenvalues()(i);
    if (std::abs(mu) <= 1e-13 * xnorm) continue;  // infinite root (ker B)
    const Complex kappa = sigma + 1.0 / mu;
    const double r = kappa.real();
    if (std::abs(kappa.imag()) > 1e-6 * std::abs(kappa) || std::abs(r) < 1e-12 * std::abs(sigma)) continue;
    // det(A - kappa B) for kappa < 0 is det(A - |kappa| (-B))
    const Matrix Bs = r > 0 ? B : Matrix(-B);
    const PencilProbe g{A, Bs, f.normA, f.normB};
    const double a = std::abs(r);
    const double polished = golden_minimize(g, a * (1.0 - 1e-6), a * (1.0 + 1e-6));
    const double best = g(polished) < g(a) ? polished : a;
    if (g(best) >= kRootAccept) continue;
    roots.push_back(r > 0 ? best : -best);
  }
  std::sort(roots.begin(), roots.end());
  std::vector<double> out;
  for (const double r : roots) {
    if (!out.empty() && std::abs(out.back() - r) < 1e-7 * std::abs(r)) continue;
    out.push_back(r);
  }
  return out;
}

}  // namespace

Complex BoundState::value(int edge, double x) const {
  return amplitudes(edge) * std::exp(-k * x);
}

GraphFunction BoundState::sample(const StarGrid& grid) const {
  return GraphFunction::sample(grid, [this](int j, double x) { return value(j, x); });
}

int count_negative_eigenvalues(const CouplingPair& pair) {
  require_valid(pair);
  const Matrix ABd = pair.A() * pair.B().adjoint();
  const Matrix herm = 0.5 * (ABd + ABd.adjoint());
  Eigen::SelfAdjointEigenSolver<Matrix> eig(herm);
  const auto& ev = eig.eigenvalues();
  const double norm = ev.cwiseAbs().maxCoeff();
  if (norm == 0.0) return 0;
  int count = 0;
  for (Eigen::Index i = 0; i < ev.size(); ++i) {
    if (ev(i) > 1e-10 * norm) ++count;
  }
  return count;
}

double default_k_max(const CouplingPair& pair) {
  return 10.0 * (1.0 + spectral_norm(pair.A()) / std::max(spectral_norm(pair.B()), 1e-30));
}

std::vector<double> pencil_roots(const Matrix& A, const Matrix& B, double k_max, int samples) {
  const PencilProbe f{A, B, std::max(spectral_norm(A), 1e-300), spectral_norm(B)};
  if (f.normB == 0.0) return {};

  std::vector<double> grid;
  grid.reserve(2 * samples);
  const double log_lo = std::log(k_max * 1e-8);
  const double log_hi = std::log(k_max);
  for (int i = 0; i < samples; ++i) {
    grid.push_back(std::exp(log_lo + (log_hi - log_lo) * i / (samples - 1)));
    grid.push_back(k_max * (i + 1) / samples);
  }
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());

  std::vector<double> vals(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) vals[i] = f(grid[i]);

  std::vector<double> roots;
  for (std::size_t i = 1; i + 1 < grid.size(); ++i) {
    if (!(vals[i] < vals[i - 1] && vals[i] <= vals[i + 1])) continue;
    const double kappa = golden_minimize(f, grid[i - 1], grid[i + 1]);
    if (f(kappa) >= kRootAccept) continue;
    if (!roots.empty() && std::abs(roots.back() - kappa) < 1e-9 * std::max(1.0, kappa)) continue;
    roots.push_back(kappa);
  }
  return roots;
}

Spectrum find_bound_states(const CouplingPair& pair, std::optional<double> k_max) {
  Spectrum spec;
  spec.n_plus = count_negative_eigenvalues(pair);

  {
    Eigen::JacobiSVD<Matrix> svd(pair.A());
    const auto& s = svd.singularValues();
    const double scale = std::max(s(0), spectral_norm(pair.B()));
    spec.zero_energy_flag = s(s.size() - 1) <= 1e-10 * scale;
  }
  const auto strip = strip_roots(pair);
  spec.rho = strip.smallest;
  spec.rho_max = strip.largest;

  if (spec.n_plus == 0) return spec;

  const double base = k_max.value_or(default_k_max(pair));
  if (!(base > 0.0)) throw DomainError("k_max must be positive");
  const auto roots = pencil_real_roots(pair.A(), pair.B());
  double window = base;
  for (int attempt = 0; attempt < 3; ++attempt) {
    spec.bound_states.clear();
    for (const double kappa : roots) {
      if (kappa <= 0.0 || kappa > window) continue;
      const Matrix ker = kernel_at(pair.A(), pair.B(), kappa);
      for (Eigen::Index c = 0; c < ker.cols(); ++c) {
        BoundState bs;
        bs.k = kappa;
        bs.eigenvalue = -kappa * kappa;
        bs.amplitudes = std::sqrt(2.0 * kappa) * ker.col(c);
        bs.multiplicity_index = static_cast<int>(c);
        spec.bound_states.push_back(std::move(bs));
      }
    }
    if (spec.total_multiplicity() == spec.n_plus) return spec;
    if (k_max) break;  // caller fixed the window
    window *= 100.0;
  }
  throw SearchFailure("bound-state search found multiplicity " +
                      std::to_string(spec.total_multiplicity()) + " but n_+(AB^+) = " +
                      std::to_string(spec.n_plus) + "; increase k_max or refine the scan");
}

PointComponents point_components(const Spectrum& spec, const GraphFunction& u) {
  PointComponents out;
  const auto nb = spec.bound_states.size();
  out.coefficients = Vector::Zero(static_cast<Eigen::Index>(nb));
  if (nb == 0) return out;

  out.phi.reserve(nb);
  for (const auto& bs : spec.bound_states) {
    if (bs.amplitudes.size() != u.grid().n()) {
      throw StructuralError("bound state and function have different edge counts");
    }
    out.phi.push_back(bs.sample(u.grid()));
  }
  Matrix gram(nb, nb);
  Vector rhs(nb);
  for (std::size_t a = 0; a < nb; ++a) {
    rhs(a) = inner_product(u, out.phi[a]);
    for (std::size_t b = 0; b < nb; ++b) gram(a, b) = inner_product(out.phi[b], out.phi[a]);
  }
  out.coefficients = gram.ldlt().solve(rhs);
  return out;
}

GraphFunction project_point(const Spectrum& spec, const GraphFunction& u) {
  GraphFunction out(u.grid());
  const auto pc = point_components(spec, u);
  for (std::size_t a = 0; a < pc.phi.size(); ++a) {
    out.values() += pc.coefficients(static_cast<Eigen::Index>(a)) * pc.phi[a].values();
  }
  return out;
}

GraphFunction project_ac(const Spectrum& spec, const GraphFunction& u) {
  return u - project_point(spec, u);
}

StripRoots strip_roots(const CouplingPair& pair) {
  require_valid(pair);
  StripRoots out;
  for (const double r : pencil_real_roots(pair.A(), pair.B())) {
    const double a = std::abs(r);
    out.smallest = std::min(out.smallest.value_or(a), a);
    out.largest = std::max(out.largest.value_or(a), a);
  }
  return out;
}

std::optional<double> strip_radius(const CouplingPair& pair) { return strip_roots(pair).smallest; }

}  // namespace sgs
