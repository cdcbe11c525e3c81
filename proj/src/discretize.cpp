#include "sgs/discretize.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <istream>
#include <map>
#include <numeric>
#include <ostream>
#include <sstream>
#include <string>

#include "sgs/error.hpp"

namespace sgs {

StarGrid::StarGrid(int n, double h, int m) : n_(n), h_(h), m_(m) {
  if (n < 2) throw StructuralError("star graph needs at least 2 edges");
  if (!(h > 0.0) || !std::isfinite(h)) throw StructuralError("grid spacing must be positive");
  if (m < 3) throw StructuralError("grid needs at least 3 samples per edge");
}

StarGrid StarGrid::covering(int n, double h, double L) {
  if (!(L > 0.0)) throw StructuralError("truncation length must be positive");
  return StarGrid(n, h, static_cast<int>(std::lround(L / h)) + 1);
}

GraphFunction::GraphFunction(const StarGrid& grid)
    : grid_(grid), values_(Matrix::Zero(grid.n(), grid.m())) {}

GraphFunction::GraphFunction(const StarGrid& grid, Matrix values)
    : grid_(grid), values_(std::move(values)) {
  if (values_.rows() != grid_.n() || values_.cols() != grid_.m()) {
    throw StructuralError("sample array does not match the grid");
  }
}

GraphFunction GraphFunction::sample(const StarGrid& grid,
                                    const std::function<Complex(int, double)>& f) {
  GraphFunction u(grid);
  for (int j = 0; j < grid.n(); ++j) {
    for (int i = 0; i < grid.m(); ++i) u(j, i) = f(j, grid.x(i));
  }
  return u;
}

bool GraphFunction::all_finite() const { return values_.allFinite(); }

void require_same_grid(const GraphFunction& a, const GraphFunction& b) {
  if (!(a.grid() == b.grid())) throw StructuralError("functions live on different grids");
}

GraphFunction& GraphFunction::operator+=(const GraphFunction& other) {
  require_same_grid(*this, other);
  values_ += other.values_;
  return *this;
}

GraphFunction& GraphFunction::operator-=(const GraphFunction& other) {
  require_same_grid(*this, other);
  values_ -= other.values_;
  return *this;
}

GraphFunction& GraphFunction::operator*=(Complex s) {
  values_ *= s;
  return *this;
}

GraphFunction operator+(GraphFunction a, const GraphFunction& b) { return a += b; }
GraphFunction operator-(GraphFunction a, const GraphFunction& b) { return a -= b; }
GraphFunction operator*(Complex s, GraphFunction a) { return a *= s; }

Eigen::VectorXd quadrature_weights(int m, double h, Quadrature rule) {
  Eigen::VectorXd w = Eigen::VectorXd::Constant(m, h);
  if (rule == Quadrature::gregory && m >= 8) {
    static constexpr double end[4] = {17.0 / 48.0, 59.0 / 48.0, 43.0 / 48.0, 49.0 / 48.0};
    for (int i = 0; i < 4; ++i) {
      w(i) = end[i] * h;
      w(m - 1 - i) = end[i] * h;
    }
  } else {
    w(0) = 0.5 * h;
    w(m - 1) = 0.5 * h;
  }
  return w;
}

double lp_norm(const GraphFunction& u, double p) {
  if (!(p >= 1.0)) throw DomainError("L^p norm needs p >= 1");
  const Eigen::MatrixXd mod = u.values().cwiseAbs();
  if (std::isinf(p)) return mod.size() ? mod.maxCoeff() : 0.0;
  const Eigen::VectorXd w = quadrature_weights(u.grid().m(), u.grid().h());
  const Eigen::MatrixXd powed = mod.array().pow(p).matrix();
  const double total = (powed * w).sum();
  return std::pow(total, 1.0 / p);
}

Complex inner_product(const GraphFunction& u, const GraphFunction& v, Quadrature rule) {
  require_same_grid(u, v);
  const Eigen::VectorXd w = quadrature_weights(u.grid().m(), u.grid().h(), rule);
  Complex total = 0.0;
  for (int j = 0; j < u.grid().n(); ++j) {
    for (int i = 0; i < u.grid().m(); ++i) total += w(i) * u(j, i) * std::conj(v(j, i));
  }
  return total;
}

GraphFunction derivative(const GraphFunction& u) {
  const auto& g = u.grid();
  const int m = g.m();
  const double inv2h = 0.5 / g.h();
  GraphFunction d(g);
  const Matrix& v = u.values();
  Matrix& out = d.values();
  for (int j = 0; j < g.n(); ++j) {
    out(j, 0) = (-3.0 * v(j, 0) + 4.0 * v(j, 1) - v(j, 2)) * inv2h;
    for (int i = 1; i + 1 < m; ++i) out(j, i) = (v(j, i + 1) - v(j, i - 1)) * inv2h;
    out(j, m - 1) = (3.0 * v(j, m - 1) - 4.0 * v(j, m - 2) + v(j, m - 3)) * inv2h;
  }
  return d;
}

Vector vertex_derivatives(const GraphFunction& u) {
  const double inv2h = 0.5 / u.grid().h();
  const Matrix& v = u.values();
  return (-3.0 * v.col(0) + 4.0 * v.col(1) - v.col(2)) * inv2h;
}

Exponent::Exponent(std::int64_t num, std::int64_t den) : num_(num), den_(den) {
  if (den <= 0) throw DomainError("exponent denominator must be positive");
  const std::int64_t g = std::gcd(num_, den_);
  if (g > 1) {
    num_ /= g;
    den_ /= g;
  }
  if (num_ < den_) throw DomainError("Lebesgue exponent must be >= 1");
}

Exponent Exponent::from_double(double value) {
  if (std::isinf(value) && value > 0) return infinite();
  if (!(value >= 1.0) || !std::isfinite(value)) throw DomainError("Lebesgue exponent must be >= 1");
  // continued fraction expansion
  constexpr std::int64_t kMaxDen = 1000000;
  std::int64_t h0 = 0, h1 = 1, k0 = 1, k1 = 0;
  double x = value;
  for (int iter = 0; iter < 64; ++iter) {
    const double a = std::floor(x);
    const auto ai = static_cast<std::int64_t>(a);
    const std::int64_t h2 = ai * h1 + h0;
    const std::int64_t k2 = ai * k1 + k0;
    if (k2 > kMaxDen) break;
    h0 = h1;
    h1 = h2;
    k0 = k1;
    k1 = k2;
    const double frac = x - a;
    if (frac < 1e-12) break;
    x = 1.0 / frac;
  }
  return Exponent(h1, k1);
}

double Exponent::value() const noexcept {
  return infinite_ ? std::numeric_limits<double>::infinity()
                   : static_cast<double>(num_) / static_cast<double>(den_);
}

std::pair<std::int64_t, std::int64_t> Exponent::reciprocal() const noexcept {
  if (infinite_) return {0, 1};
  return {den_, num_};
}

bool Exponent::operator==(const Exponent& other) const noexcept {
  if (infinite_ || other.infinite_) return infinite_ == other.infinite_;
  return num_ == other.num_ && den_ == other.den_;
}

bool is_admissible(const AdmissiblePair& pair) {
  const auto ge2 = [](const Exponent& e) {
    return e.is_infinite() || e.num() >= 2 * e.den();
  };
  if (!ge2(pair.q) || !ge2(pair.r)) return false;
  // a/b = 1/4 - c/(2d)  <=>  4 a d = b (d - 2c)
  const auto [a, b] = pair.q.reciprocal();
  const auto [c, d] = pair.r.reciprocal();
  const __int128 lhs = static_cast<__int128>(4) * a * d;
  const __int128 rhs = static_cast<__int128>(b) * (d - 2 * c);
  return lhs == rhs;
}

void require_admissible(const AdmissiblePair& pair) {
  if (!is_admissible(pair)) {
    std::ostringstream os;
    os << "exponent pair (" << pair.q.value() << ", " << pair.r.value()
       << ") is not 1/2-admissible";
    throw DomainError(os.str());
  }
}

AdmissiblePair admissible_pair_for(double p) {
  if (!(p > 1.0 && p < 5.0)) throw DomainError("nonlinearity exponent must lie in (1,5)");
  const Exponent pe = Exponent::from_double(p);
  // p = a/b: q = 4(a+b)/(a-b), r = (a+b)/b
  const std::int64_t a = pe.num();
  const std::int64_t b = pe.den();
  AdmissiblePair pair{Exponent(4 * (a + b), a - b), Exponent(a + b, b)};
  require_admissible(pair);
  return pair;
}

double mixed_norm(std::span<const GraphFunction> snapshots, std::span<const double> times,
                  const AdmissiblePair& pair) {
  if (snapshots.size() < 2) throw DomainError("mixed norm needs at least two snapshots");
  if (snapshots.size() != times.size()) throw StructuralError("times and snapshots differ in length");
  for (std::size_t i = 1; i < times.size(); ++i) {
    if (!(times[i] > times[i - 1])) throw DomainError("snapshot times must be increasing");
  }
  const double r = pair.r.value();
  if (pair.q.is_infinite()) {
    double best = 0.0;
    for (const auto& u : snapshots) best = std::max(best, lp_norm(u, r));
    return best;
  }
  const double q = pair.q.value();
  std::vector<double> f(snapshots.size());
  for (std::size_t i = 0; i < snapshots.size(); ++i) f[i] = std::pow(lp_norm(snapshots[i], r), q);
  double total = 0.0;
  for (std::size_t i = 1; i < f.size(); ++i) total += 0.5 * (times[i] - times[i - 1]) * (f[i] + f[i - 1]);
  return std::pow(total, 1.0 / q);
}

EnergyForm make_energy_form(const CouplingPair& pair, const StarGrid& grid) {
  EnergyForm form;
  form.decomposition = projector_decomposition(pair);

  double c_tr = 0.0;
  for (const double a : {0.125, 0.25, 0.5, 1.0, 2.0, 4.0, 8.0}) {
    if (a * grid.h() > 0.5 || a * grid.L() < 20.0) continue;
    const auto u = GraphFunction::sample(grid, [a](int, double x) { return Complex(std::exp(-a * x)); });
    const double l2 = lp_norm(u, 2.0);
    const double d2 = lp_norm(derivative(u), 2.0);
    const double trace2 = u.vertex_values().squaredNorm();
    c_tr = std::max(c_tr, trace2 / (l2 * l2 + d2 * d2));
  }
  if (c_tr == 0.0) c_tr = 1.0;  // analytic half-line value
  form.trace_constant = c_tr;

  double lambda_norm = 0.0;
  if (form.decomposition.dim_robin > 0) {
    Eigen::SelfAdjointEigenSolver<Matrix> eig(form.decomposition.Lambda);
    lambda_norm = eig.eigenvalues().cwiseAbs().maxCoeff();
  }
  form.M = 1.0 + 2.0 * lambda_norm * c_tr;
  return form;
}

double form_domain_residual(const EnergyForm& form, const GraphFunction& u) {
  return (form.decomposition.P_D * u.vertex_values()).norm();
}

Complex quadratic_energy_complex(const EnergyForm& form, const GraphFunction& u) {
  const GraphFunction du = derivative(u);
  const double kinetic = std::pow(lp_norm(du, 2.0), 2);
  const Vector pr = form.decomposition.P_R * u.vertex_values();
  const Complex vertex = pr.dot(form.decomposition.Lambda * pr);  // (P_R u)^dagger Lambda P_R u
  return kinetic + vertex;
}

double quadratic_energy(const EnergyForm& form, const GraphFunction& u) {
  const double resid = form_domain_residual(form, u);
  if (resid >= 1e-8 * std::max(1.0, lp_norm(u, kInfinity))) {
    throw FormDomainError("function is outside the form domain: |P_D u(0)| = " +
                          std::to_string(resid));
  }
  return quadratic_energy_complex(form, u).real();
}

double energy(const EnergyForm& form, const GraphFunction& u, double lambda, double p) {
  const double quad = quadratic_energy(form, u);
  if (lambda == 0.0) return quad;
  return quad - lambda / (p + 1.0) * std::pow(lp_norm(u, p + 1.0), p + 1.0);
}

double hamiltonian(const EnergyForm& form, const GraphFunction& u, double lambda, double p) {
  const double quad = quadratic_energy(form, u);
  if (lambda == 0.0) return quad;
  return quad - 2.0 * lambda / (p + 1.0) * std::pow(lp_norm(u, p + 1.0), p + 1.0);
}

void write_csv(std::ostream& os, const GraphFunction& u, std::optional<double> t, bool header) {
  const auto& g = u.grid();
  os << std::setprecision(17);
  if (header) os << (t ? "t,edge,x,re,im\n" : "edge,x,re,im\n");
  for (int j = 0; j < g.n(); ++j) {
    for (int i = 0; i < g.m(); ++i) {
      if (t) os << *t << ',';
      os << j << ',' << g.x(i) << ',' << u(j, i).real() << ',' << u(j, i).imag() << '\n';
    }
  }
}

GraphFunction read_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw StructuralError("empty CSV input");
  std::vector<std::string> header;
  {
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
      header.push_back(cell);
    }
  }
  int offset = 0;
  if (header.size() == 5 && header[0] == "t") offset = 1;
  if (header.size() != static_cast<std::size_t>(4 + offset) || header[offset] != "edge" ||
      header[offset + 1] != "x" || header[offset + 2] != "re" || header[offset + 3] != "im") {
    throw StructuralError("CSV header must be 'edge,x,re,im'");
  }

  std::map<int, std::vector<std::pair<double, Complex>>> rows;
  int lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<double> vals;
    while (std::getline(ss, cell, ',')) {
      try {
        vals.push_back(std::stod(cell));
      } catch (const std::exception&) {
        throw StructuralError("CSV line " + std::to_string(lineno) + ": bad number '" + cell + "'");
      }
    }
    if (vals.size() != header.size()) {
      throw StructuralError("CSV line " + std::to_string(lineno) + ": wrong column count");
    }
    const double edge = vals[offset];
    if (edge < 0 || edge != std::floor(edge)) {
      throw StructuralError("CSV line " + std::to_string(lineno) + ": bad edge index");
    }
    rows[static_cast<int>(edge)].push_back({vals[offset + 1], {vals[offset + 2], vals[offset + 3]}});
  }
  if (rows.empty()) throw StructuralError("CSV has no samples");
  const int n = rows.rbegin()->first + 1;
  if (static_cast<int>(rows.size()) != n) throw StructuralError("CSV edge indices are not contiguous");

  auto& first = rows.begin()->second;
  std::sort(first.begin(), first.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  const int m = static_cast<int>(first.size());
  if (m < 3) throw StructuralError("CSV needs at least 3 samples per edge");
  const double h = (first.back().first - first.front().first) / (m - 1);
  if (!(h > 0.0)) throw StructuralError("CSV grid spacing must be positive");

  const StarGrid grid(n, h, m);
  GraphFunction u(grid);
  for (auto& [edge, samples] : rows) {
    if (static_cast<int>(samples.size()) != m) throw StructuralError("CSV edges have different sample counts");
    std::sort(samples.begin(), samples.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    for (int i = 0; i < m; ++i) {
      if (std::abs(samples[i].first - i * h) > 1e-9 * std::max(1.0, i * h)) {
        throw StructuralError("CSV grid is not uniform starting at x = 0");
      }
      u(edge, i) = samples[i].second;
    }
  }
  return u;
}

}  // namespace sgs
