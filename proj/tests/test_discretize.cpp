#include <cmath>
#include <sstream>
#include <vector>

#include "doctest.h"
#include "sgs/discretize.hpp"
#include "sgs/error.hpp"

using namespace sgs;

namespace {

GraphFunction exp_decay(const StarGrid& grid, double a = 1.0) {
  return GraphFunction::sample(grid, [a](int, double x) { return Complex(std::exp(-a * x)); });
}

}  // namespace

TEST_SUITE("discretize") {

TEST_CASE("grid construction") {
  const StarGrid g = StarGrid::covering(3, 0.1, 2.0);
  CHECK(g.m() == 21);
  CHECK(g.L() == doctest::Approx(2.0));
  CHECK_THROWS_AS(StarGrid(3, 0.1, 2), StructuralError);
  CHECK_THROWS_AS(StarGrid(3, -0.1, 10), StructuralError);
  CHECK_THROWS_AS(StarGrid(1, 0.1, 10), StructuralError);
  CHECK_THROWS_AS(GraphFunction(g, Matrix::Zero(3, 5)), StructuralError);
  CHECK_THROWS_AS(GraphFunction(g) + GraphFunction(StarGrid(3, 0.1, 5)), StructuralError);
}

TEST_CASE("lp norms of simple functions") {
  const StarGrid g = StarGrid::covering(3, 1e-3, 40.0);
  CHECK(lp_norm(GraphFunction(g), 2.0) == 0.0);
  CHECK(lp_norm(GraphFunction(g), 1.0) == 0.0);
  CHECK(lp_norm(GraphFunction(g), kInfinity) == 0.0);
  const auto u = exp_decay(g);
  CHECK(std::abs(lp_norm(u, 2.0) - std::sqrt(1.5)) < 1e-6);
  CHECK(lp_norm(u, kInfinity) == 1.0);
  CHECK(std::abs(lp_norm(u, 1.0) - 3.0) < 1e-6);
  CHECK_THROWS_AS(lp_norm(u, 0.5), DomainError);
}

TEST_CASE("lp norm converges at second order") {
  auto err = [](double h) {
    const StarGrid g = StarGrid::covering(2, h, 30.0);
    const auto u = GraphFunction::sample(g, [](int, double x) { return Complex(std::exp(-x) * (1.0 + x)); });
    const double exact_one_edge = 0.25 + 4.0 / 16.0 + 6.0 * 2.0 / 64.0 + 4.0 * 6.0 / 256.0 + 24.0 / 1024.0;
    return std::abs(std::pow(lp_norm(u, 4.0), 4.0) - 2.0 * exact_one_edge);
  };
  const double e1 = err(0.02), e2 = err(0.01);
  CHECK(e1 / e2 > 3.5);
}

TEST_CASE("derivative is second order") {
  auto err = [](double h) {
    const StarGrid g = StarGrid::covering(2, h, 6.0);
    const auto u = GraphFunction::sample(g, [](int j, double x) { return Complex(std::sin(x + j)); });
    const auto du = derivative(u);
    double worst = 0.0;
    for (int j = 0; j < 2; ++j)
      for (int i = 0; i < g.m(); ++i) worst = std::max(worst, std::abs(du(j, i) - std::cos(g.x(i) + j)));
    return worst;
  };
  CHECK(err(0.02) / err(0.01) > 3.5);
  const StarGrid g = StarGrid::covering(2, 0.01, 6.0);
  const auto v = vertex_derivatives(GraphFunction::sample(g, [](int, double x) { return Complex(std::exp(-2.0 * x)); }));
  CHECK(std::abs(v(0) + 2.0) < 1e-3);
}

TEST_CASE("admissible pairs") {
  const auto p3 = admissible_pair_for(3.0);
  CHECK(p3.q == Exponent(8));
  CHECK(p3.r == Exponent(4));
  const auto p2 = admissible_pair_for(2.0);
  CHECK(p2.q == Exponent(12));
  CHECK(p2.r == Exponent(3));
  CHECK(is_admissible({Exponent::infinite(), Exponent(2)}));
  CHECK_FALSE(is_admissible({Exponent(4), Exponent(4)}));
  CHECK_THROWS_AS(require_admissible({Exponent(4), Exponent(4)}), DomainError);
  CHECK_THROWS_AS(admissible_pair_for(5.0), DomainError);
  CHECK_THROWS_AS(admissible_pair_for(1.0), DomainError);
  // p = 7/3 gives (10, 10/3)
  const auto p73 = admissible_pair_for(7.0 / 3.0);
  CHECK(p73.q == Exponent(10));
  CHECK(p73.r == Exponent(10, 3));
  CHECK(Exponent(6, 4) == Exponent(3, 2));
}

TEST_CASE("mixed norms") {
  const StarGrid g = StarGrid::covering(2, 0.01, 20.0);
  const auto u = exp_decay(g);
  std::vector<GraphFunction> snaps{u, u};
  std::vector<double> times{0.0, 1.0};
  CHECK(mixed_norm(snaps, times, {Exponent::infinite(), Exponent(2)}) == doctest::Approx(lp_norm(u, 2.0)));
  CHECK(mixed_norm(snaps, times, {Exponent(8), Exponent(4)}) == doctest::Approx(lp_norm(u, 4.0)));

  std::vector<GraphFunction> decay;
  std::vector<double> ts;
  for (int i = 0; i <= 2000; ++i) {
    const double t = 10.0 * i / 2000.0;
    ts.push_back(t);
    decay.push_back(Complex(std::exp(-t)) * u);
  }
  const double expected = std::pow((1.0 - std::exp(-80.0)) / 8.0, 1.0 / 8.0) * lp_norm(u, 4.0);
  CHECK(std::abs(mixed_norm(decay, ts, {Exponent(8), Exponent(4)}) / expected - 1.0) < 0.02);

  std::vector<double> bad{0.0, 0.0};
  CHECK_THROWS_AS(mixed_norm(snaps, bad, {Exponent(8), Exponent(4)}), DomainError);
}

TEST_CASE("energy of e^{-x} under delta(-1)") {
  const StarGrid g = StarGrid::covering(3, 1e-3, 30.0);
  const auto form = make_energy_form(delta(3, -1.0), g);
  const auto u = exp_decay(g);
  CHECK(std::abs(energy(form, u, 0.0, 3.0) - 0.5) < 1e-4);
  CHECK(std::abs(energy(form, u, 1.0, 3.0) - 0.3125) < 1e-4);
  CHECK(std::abs(hamiltonian(form, u, 1.0, 3.0) - 0.125) < 1e-4);
  CHECK(energy(form, GraphFunction(g), 1.0, 3.0) == 0.0);
}

TEST_CASE("form domain and realness") {
  const StarGrid g = StarGrid::covering(3, 0.01, 30.0);
  const auto dir = make_energy_form(dirichlet(3), g);
  CHECK_THROWS_AS(quadratic_energy(dir, exp_decay(g)), FormDomainError);
  const auto vanishing = GraphFunction::sample(g, [](int, double x) { return Complex(x * std::exp(-x)); });
  CHECK(quadratic_energy(dir, vanishing) > 0.0);

  const auto form = make_energy_form(delta(3, -1.0), g);
  const auto u = GraphFunction::sample(g, [](int j, double x) {
    return Complex(std::cos(0.3 * j * x), std::sin(x) + 1.0) * std::exp(-x);
  });
  const Complex q = quadratic_energy_complex(form, u);
  CHECK(std::abs(q.imag()) < 1e-12 * std::abs(q.real()));
}

TEST_CASE("form-norm shift keeps the shifted form nonnegative") {
  const StarGrid g = StarGrid::covering(3, 0.01, 30.0);
  const auto form = make_energy_form(delta(3, -2.0), g);
  CHECK(form.M >= 1.0);
  for (const double a : {0.1, 0.5, 1.0, 2.0, 5.0}) {
    const auto u = exp_decay(g, a);
    const double l2 = lp_norm(u, 2.0);
    CHECK(form.M * l2 * l2 + quadratic_energy(form, u) >= 0.0);
  }
}

TEST_CASE("CSV round trip") {
  const StarGrid g = StarGrid::covering(2, 0.5, 3.0);
  const auto u = GraphFunction::sample(g, [](int j, double x) { return Complex(x + j, -x * j); });
  std::stringstream ss;
  write_csv(ss, u);
  const auto v = read_csv(ss);
  CHECK(v.grid() == g);
  CHECK(lp_norm(u - v, kInfinity) == 0.0);
  std::stringstream st;
  write_csv(st, u, 1.5);
  CHECK(st.str().rfind("t,edge,x,re,im", 0) == 0);
  const auto w = read_csv(st);
  CHECK(lp_norm(u - w, kInfinity) == 0.0);
  std::stringstream bad("edge,x,re,im\n0,0,1,0\n0,0.5,1,0\n0,1.7,1,0\n");
  CHECK_THROWS_AS(read_csv(bad), StructuralError);
}

}  // TEST_SUITE
