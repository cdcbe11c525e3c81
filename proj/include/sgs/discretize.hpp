#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "sgs/coupling.hpp"

namespace sgs {

/// Uniform grid x_i = i h, i = 0..m-1, replicated on each of the n edges.
class StarGrid {
 public:
  StarGrid(int n, double h, int m);

  /// Grid with spacing h covering [0, L]; m = round(L/h) + 1.
  static StarGrid covering(int n, double h, double L);

  int n() const noexcept { return n_; }
  double h() const noexcept { return h_; }
  int m() const noexcept { return m_; }
  double L() const noexcept { return (m_ - 1) * h_; }
  double x(int i) const noexcept { return i * h_; }

  bool operator==(const StarGrid& other) const noexcept {
    return n_ == other.n_ && m_ == other.m_ && h_ == other.h_;
  }

 private:
  int n_;
  double h_;
  int m_;
};

/// Complex function sampled on a StarGrid; values(j, i) = u_j(i h).
class GraphFunction {
 public:
  explicit GraphFunction(const StarGrid& grid);
  GraphFunction(const StarGrid& grid, Matrix values);

  static GraphFunction sample(const StarGrid& grid,
                              const std::function<Complex(int edge, double x)>& f);

  const StarGrid& grid() const noexcept { return grid_; }
  const Matrix& values() const noexcept { return values_; }
  Matrix& values() noexcept { return values_; }

  Complex operator()(int edge, int i) const { return values_(edge, i); }
  Complex& operator()(int edge, int i) { return values_(edge, i); }

  /// u(0) as an n-vector.
  Vector vertex_values() const { return values_.col(0); }

  bool all_finite() const;

  GraphFunction& operator+=(const GraphFunction& other);
  GraphFunction& operator-=(const GraphFunction& other);
  GraphFunction& operator*=(Complex s);

 private:
  StarGrid grid_;
  Matrix values_;
};

GraphFunction operator+(GraphFunction a, const GraphFunction& b);
GraphFunction operator-(GraphFunction a, const GraphFunction& b);
GraphFunction operator*(Complex s, GraphFunction a);

void require_same_grid(const GraphFunction& a, const GraphFunction& b);

enum class Quadrature {
  trapezoid,
  gregory,  // trapezoid with 4th-order end corrections
};

/// Quadrature weights on m nodes with spacing h.
Eigen::VectorXd quadrature_weights(int m, double h, Quadrature rule = Quadrature::trapezoid);

constexpr double kInfinity = std::numeric_limits<double>::infinity();

/// Sum over edges of the trapezoidal L^p norms; p = kInfinity gives the max.
double lp_norm(const GraphFunction& u, double p);

/// <u, v> = sum_j int u_j conj(v_j).
Complex inner_product(const GraphFunction& u, const GraphFunction& v,
                      Quadrature rule = Quadrature::trapezoid);

/// First derivative: central differences inside, second-order one-sided at
/// both ends.
GraphFunction derivative(const GraphFunction& u);

/// u'(0+) per edge from the second-order one-sided stencil.
Vector vertex_derivatives(const GraphFunction& u);

/// Lebesgue exponent in [1, inf], stored exactly as a rational or infinity.
class Exponent {
 public:
  Exponent(std::int64_t num, std::int64_t den = 1);
  static Exponent infinite() noexcept { return Exponent(); }
  /// Best rational approximation with denominator <= 10^6.
  static Exponent from_double(double value);

  bool is_infinite() const noexcept { return infinite_; }
  std::int64_t num() const noexcept { return num_; }
  std::int64_t den() const noexcept { return den_; }
  double value() const noexcept;

  /// 1/p as (numerator, denominator); (0, 1) for infinity.
  std::pair<std::int64_t, std::int64_t> reciprocal() const noexcept;

  bool operator==(const Exponent& other) const noexcept;

 private:
  Exponent() noexcept : infinite_(true), num_(1), den_(0) {}
  bool infinite_ = false;
  std::int64_t num_;
  std::int64_t den_;
};

struct AdmissiblePair {
  Exponent q;
  Exponent r;
};

/// 2 <= q, r <= inf and 1/q = (1/2)(1/2 - 1/r), evaluated in exact
/// integer arithmetic.
bool is_admissible(const AdmissiblePair& pair);

/// Throws DomainError when the pair is not 1/2-admissible.
void require_admissible(const AdmissiblePair& pair);

/// (4(p+1)/(p-1), p+1) for 1 < p < 5.
AdmissiblePair admissible_pair_for(double p);

/// L^q in time of the L^r norm in space; trapezoid in time, max for q = inf.
double mixed_norm(std::span<const GraphFunction> snapshots, std::span<const double> times,
                  const AdmissiblePair& pair);

/// Quadratic form data: the vertex splitting plus the form-norm shift M.
struct EnergyForm {
  ProjectorDecomposition decomposition;
  double M = 1.0;
  double trace_constant = 0.0;
};

/// M = 1 + 2 |Lambda| C_tr with C_tr = max |u(0)|^2 / |u|_{H^1}^2 over a
/// fixed probe family sampled on `grid`.
EnergyForm make_energy_form(const CouplingPair& pair, const StarGrid& grid);

/// |P_D u(0)|.
double form_domain_residual(const EnergyForm& form, const GraphFunction& u);

/// sum_j int |u_j'|^2 + <Lambda P_R u(0), P_R u(0)>, returned with its
/// (roundoff-level) imaginary part.
Complex quadratic_energy_complex(const EnergyForm& form, const GraphFunction& u);

/// Real part of quadratic_energy_complex. Throws FormDomainError when
/// |P_D u(0)| >= 1e-8 max(1, |u|_inf).
double quadratic_energy(const EnergyForm& form, const GraphFunction& u);

/// quadratic_energy(u) - lambda/(p+1) int |u|^{p+1}.
double energy(const EnergyForm& form, const GraphFunction& u, double lambda, double p);

/// quadratic_energy(u) - 2 lambda/(p+1) int |u|^{p+1}: the functional
/// conserved by i u_t + Delta u + lambda |u|^{p-1} u = 0. energy() uses the
/// factor lambda/(p+1), which matches this only at lambda = 0.
double hamiltonian(const EnergyForm& form, const GraphFunction& u, double lambda, double p);

/// CSV with header `edge,x,re,im` (or `t,edge,x,re,im` when t is given).
/// header = false appends rows only, for multi-snapshot files.
void write_csv(std::ostream& os, const GraphFunction& u, std::optional<double> t = {},
               bool header = true);

/// Reads the format written by write_csv (an optional leading t column is
/// ignored). The grid is inferred from the data; non-uniform or ragged
/// samples raise StructuralError.
GraphFunction read_csv(std::istream& is);

}  // namespace sgs
