#include <cmath>
#include <numbers>
#include <random>

#include "doctest.h"
#include "oracles.hpp"
#include "sgs/error.hpp"
#include "sgs/nls.hpp"

using namespace sgs;

namespace {

GraphFunction gaussian(const StarGrid& g, double c, double w) {
  return GraphFunction::sample(g, [=](int j, double x) {
    const double s = (x - c) / w;
    return Complex(1.0, 0.2 * j) * std::exp(-s * s);
  });
}

}  // namespace

TEST_SUITE("nls") {

TEST_CASE("pointwise nonlinear step") {
  const StarGrid g(2, 0.1, 5);
  GraphFunction u(g, Matrix::Constant(2, 5, Complex(2.0, 0.0)));
  const auto v = nonlinear_step(u, 1.0, 3.0, std::numbers::pi / 4.0);
  CHECK(lp_norm(v - Complex(-1.0) * u, kInfinity) < 1e-14);
  const auto w = GraphFunction::sample(g, [](int j, double x) { return Complex(x + j, 1.0 - x); });
  const auto r = nonlinear_step(w, -2.0, 2.5, 0.3);
  CHECK((r.values().cwiseAbs() - w.values().cwiseAbs()).cwiseAbs().maxCoeff() < 1e-14);
  CHECK(lp_norm(nonlinear_step(w, 0.0, 3.0, 0.3) - w, kInfinity) == 0.0);
}

TEST_CASE("parameter validation") {
  NlsParams p;
  p.p = 5.0;
  CHECK_THROWS_AS(validate(p), DomainError);
  p.p = 3.0;
  p.dt = 0.0;
  CHECK_THROWS_AS(validate(p), DomainError);
  p.dt = 1e-3;
  CHECK_NOTHROW(validate(p));
}

TEST_CASE("linear limit coincides with crank-nicolson") {
  const StarGrid g = StarGrid::covering(3, 0.05, 30.0);
  const auto u0 = gaussian(g, 8.0, 1.5);
  NlsParams p;
  p.lambda = 0.0;
  p.dt = 1e-2;
  const auto r = nls_solve(delta(3, 1.0), u0, p, 0.5);
  const auto cn = crank_nicolson_oracle(delta(3, 1.0), u0, 0.5, 1e-2);
  CHECK(lp_norm(r.u - cn, kInfinity) == 0.0);
}

TEST_CASE("line soliton stays stationary") {
  const StarGrid g = StarGrid::covering(2, 0.02, 30.0);
  const auto u0 = GraphFunction::sample(g, [](int, double x) { return Complex(oracle::soliton_modulus(x)); });
  NlsParams p;
  p.lambda = 1.0;
  p.p = 3.0;
  p.dt = 1e-3;
  const auto r = nls_solve(kirchhoff(2), u0, p, 1.0);
  GraphFunction diff(g);
  diff.values() = (r.u.values().cwiseAbs() - u0.values().cwiseAbs()).cast<Complex>();
  CHECK(lp_norm(diff, 2.0) < 1e-3);
  // the phase advances as e^{it}
  const Complex ph = r.u(0, 0) / u0(0, 0);
  CHECK(std::abs(ph - Complex(std::cos(1.0), std::sin(1.0))) < 1e-2);
}

TEST_CASE("mass is conserved and energy is logged in the form domain") {
  const StarGrid g = StarGrid::covering(3, 0.05, 30.0);
  NlsParams p;
  p.lambda = -1.0;
  p.dt = 1e-3;
  const auto r = nls_solve(delta(3, -1.0), gaussian(g, 8.0, 1.5), p, 1.0);
  CHECK(r.log.times.size() == 1001);
  CHECK(r.log.max_mass_drift() < 1e-8);
  CHECK(r.energy_logged);
  CHECK(r.log.energy.size() == r.log.times.size());
  CHECK(r.log.max_energy_drift() < 1e-3);

  // nonzero vertex value under Dirichlet: mass only
  const auto u = GraphFunction::sample(g, [](int, double x) { return Complex(std::exp(-x * x)); });
  const auto rd = nls_solve(dirichlet(3), u, p, 0.1);
  CHECK_FALSE(rd.energy_logged);
  CHECK(rd.log.energy.empty());
}

TEST_CASE("energy drift shrinks at second order") {
  const StarGrid g = StarGrid::covering(3, 0.05, 30.0);
  const auto u0 = gaussian(g, 8.0, 1.5);
  std::vector<double> drift;
  for (const double dt : {0.02, 0.01}) {
    NlsParams p;
    p.dt = dt;
    drift.push_back(nls_solve(kirchhoff(3), u0, p, 1.0).log.max_energy_drift());
  }
  CHECK(drift[0] / drift[1] > 3.5);
  CHECK(drift[0] / drift[1] < 4.5);
}

TEST_CASE("checkpoints") {
  const StarGrid g = StarGrid::covering(3, 0.1, 30.0);
  NlsParams p;
  p.dt = 0.01;
  const auto r = nls_solve(kirchhoff(3), gaussian(g, 8.0, 1.5), p, 0.1, 4);
  REQUIRE(r.checkpoint_times.size() == 4);  // 0, 0.04, 0.08, 0.1
  CHECK(r.checkpoint_times.front() == 0.0);
  CHECK(r.checkpoint_times.back() == doctest::Approx(0.1));
}

TEST_CASE("abort on mass drift") {
  const StarGrid g = StarGrid::covering(3, 0.1, 30.0);
  NlsParams p;
  p.dt = 0.01;
  p.mass_tol = 1e-300;
  CHECK_THROWS_AS(nls_solve(kirchhoff(3), gaussian(g, 8.0, 1.5), p, 0.5), NumericalAbort);
}

TEST_CASE("regularized nonlinearity") {
  const StarGrid g = StarGrid::covering(3, 2e-3, 20.0);
  const auto pair = delta(3, -1.0);
  const auto u = gaussian(g, 5.0, 1.0);
  CHECK(lp_norm(regularized_nonlinearity(pair, u, 0.01, 0.0, 3.0), kInfinity) == 0.0);
  const auto gu = pointwise_nonlinearity(u, 1.0, 3.0);
  double prev = kInfinity;
  for (const double eps : {0.04, 0.01, 0.0025, 0.000625}) {
    const double d = lp_norm(regularized_nonlinearity(pair, u, eps, 1.0, 3.0) - gu, 2.0);
    CHECK(d < prev);
    prev = d;
  }
  CHECK(prev < 0.05 * lp_norm(gu, 2.0));
  CHECK_THROWS_AS(regularized_nonlinearity(pair, u, 16.0, 1.0, 3.0), StripViolation);
}

TEST_CASE("regularized nonlinearity restores the form domain") {
  // u_1(0) = 2 u_2(0), 2 u_1'(0) + u_2'(0) = 0; |u|^2 u breaks the first condition.
  Matrix A(2, 2), B(2, 2);
  A << 1, -2, 0, 0;
  B << 0, 0, 2, 1;
  const CouplingPair pair(A, B);
  require_valid(pair);
  const StarGrid g = StarGrid::covering(2, 2e-3, 20.0);
  const auto u = GraphFunction::sample(g, [](int j, double x) {
    return Complex(j == 0 ? 2.0 : 1.0) * std::exp(-x * x) * (1.0 + x);
  });
  const auto form = make_energy_form(pair, g);
  CHECK(form_domain_residual(form, u) < 1e-12);
  CHECK(form_domain_residual(form, pointwise_nonlinearity(u, 1.0, 3.0)) > 1.0);
  const auto ge = regularized_nonlinearity(pair, u, 0.01, 1.0, 3.0);
  CHECK(form_domain_residual(form, ge) < 1e-8);
}

TEST_CASE("regularized nonlinearity is Lipschitz on bounded sets") {
  // |g_e(v) - g_e(w)| <= |J| p max(|Jv|_inf, |Jw|_inf)^{p-1} |Jv - Jw|, |J| the L^2 bound of J.
  const auto pair = delta(3, -1.0);
  const double eps = 0.05, p = 3.0;
  const double k = 1.0 / 3.0;
  const double j_norm = 1.0 / (1.0 - eps * k * k);  // spectrum of H starts at -k^2
  const StarGrid g = StarGrid::covering(3, 5e-3, 20.0);
  std::mt19937_64 rng(42);
  std::uniform_real_distribution<double> c(1.0, 8.0), w(0.5, 2.0), a(-2.0, 2.0);
  const double root = std::sqrt(eps);
  for (int trial = 0; trial < 10; ++trial) {
    const double c1 = c(rng), w1 = w(rng), a1 = a(rng), c2 = c(rng), w2 = w(rng), a2 = a(rng);
    const auto v = GraphFunction::sample(g, [=](int, double x) { return Complex(a1 * std::exp(-(x - c1) * (x - c1) / w1)); });
    const auto z = GraphFunction::sample(g, [=](int, double x) { return Complex(a2 * std::exp(-(x - c2) * (x - c2) / w2)); });
    const double lhs = lp_norm(regularized_nonlinearity(pair, v, eps, 1.0, p) -
                                   regularized_nonlinearity(pair, z, eps, 1.0, p), 2.0);
    const auto jv = regularizer_apply(pair, v, root);
    const auto jz = regularizer_apply(pair, z, root);
    const double m = std::max(lp_norm(jv, kInfinity), lp_norm(jz, kInfinity));
    const double rhs = j_norm * p * std::pow(m, p - 1.0) * lp_norm(jv - jz, 2.0);
    CHECK(lhs <= rhs * (1.0 + 1e-3));
    CHECK(lp_norm(jv - jz, 2.0) <= j_norm * lp_norm(v - z, 2.0) * (1.0 + 1e-3));
  }
}

}  // TEST_SUITE
