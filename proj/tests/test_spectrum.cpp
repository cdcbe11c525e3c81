#include <cmath>
#include <random>

#include "doctest.h"
#include "sgs/error.hpp"
#include "sgs/spectrum.hpp"

using namespace sgs;

TEST_SUITE("spectrum") {

TEST_CASE("n_plus for presets") {
  CHECK(count_negative_eigenvalues(kirchhoff(3)) == 0);
  CHECK(count_negative_eigenvalues(dirichlet(3)) == 0);
  CHECK(count_negative_eigenvalues(delta(3, -1.0)) == 1);
  CHECK(count_negative_eigenvalues(delta(3, 1.0)) == 0);
  CHECK(count_negative_eigenvalues(delta_prime(3, -3.0)) == 1);
  CHECK_THROWS_AS(count_negative_eigenvalues(CouplingPair(Matrix::Zero(2, 2), Matrix::Zero(2, 2))),
                  PreconditionError);
}

TEST_CASE("delta(-1) bound state") {
  const auto spec = find_bound_states(delta(3, -1.0));
  REQUIRE(spec.total_multiplicity() == 1);
  const auto& bs = spec.bound_states.front();
  CHECK(std::abs(bs.k - 1.0 / 3.0) < 1e-10);
  CHECK(std::abs(bs.eigenvalue + 1.0 / 9.0) < 1e-10);
  // equal amplitudes, normalized: 3 |c|^2 / (2k) = 1
  for (int j = 1; j < 3; ++j) CHECK(std::abs(bs.amplitudes(j) - bs.amplitudes(0)) < 1e-10);
  CHECK(std::abs(bs.amplitudes.squaredNorm() / (2.0 * bs.k) - 1.0) < 1e-12);
  const auto pair = delta(3, -1.0);
  CHECK((pair.A() * bs.amplitudes - bs.k * pair.B() * bs.amplitudes).norm() < 1e-10);
}

TEST_CASE("delta-prime bound state at k = n / |beta|") {
  const auto spec = find_bound_states(delta_prime(3, -3.0));
  REQUIRE(spec.total_multiplicity() == 1);
  CHECK(std::abs(spec.bound_states.front().k - 1.0) < 1e-10);
}

TEST_CASE("no bound states") {
  CHECK(find_bound_states(kirchhoff(3)).bound_states.empty());
  CHECK(find_bound_states(delta(3, 1.0)).bound_states.empty());
  CHECK(find_bound_states(dirichlet(4)).bound_states.empty());
}

TEST_CASE("multiplicity matches n_plus on random couplings") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 40; ++trial) {
    const int n = 2 + trial % 5;
    const auto p = random_valid_pair(rng, n);
    const auto spec = find_bound_states(p);
    CHECK(spec.total_multiplicity() == spec.n_plus);
    for (const auto& bs : spec.bound_states) {
      CHECK(bs.k > 0.0);
      CHECK((p.A() * bs.amplitudes - bs.k * p.B() * bs.amplitudes).norm() < 1e-8);
      CHECK(std::abs(bs.amplitudes.squaredNorm() / (2.0 * bs.k) - 1.0) < 1e-12);
    }
    // exact orthonormality of the analytic eigenfunctions
    for (std::size_t a = 0; a < spec.bound_states.size(); ++a) {
      for (std::size_t b = 0; b < spec.bound_states.size(); ++b) {
        const auto& x = spec.bound_states[a];
        const auto& y = spec.bound_states[b];
        const Complex g = y.amplitudes.dot(x.amplitudes) / (x.k + y.k);
        CHECK(std::abs(g - (a == b ? 1.0 : 0.0)) < 1e-8);
      }
    }
  }
}

TEST_CASE("degenerate bound states get orthogonal amplitudes") {
  // Two decoupled Robin conditions u_j + u_j' = 0 share k = 1.
  const CouplingPair robin(Matrix::Identity(2, 2), Matrix::Identity(2, 2));
  const auto spec = find_bound_states(robin);
  REQUIRE(spec.total_multiplicity() == 2);
  const auto& s0 = spec.bound_states[0];
  const auto& s1 = spec.bound_states[1];
  CHECK(std::abs(s0.k - 1.0) < 1e-10);
  CHECK(std::abs(s1.k - 1.0) < 1e-10);
  CHECK(std::abs(s0.amplitudes.dot(s1.amplitudes)) < 1e-10);
  CHECK(s0.multiplicity_index != s1.multiplicity_index);
}

TEST_CASE("strip radius") {
  CHECK_FALSE(strip_radius(dirichlet(3)).has_value());
  CHECK_FALSE(strip_radius(kirchhoff(3)).has_value());
  const auto rho = strip_radius(delta(3, -1.0));
  REQUIRE(rho.has_value());
  CHECK(std::abs(*rho - 1.0 / 3.0) < 1e-10);
  // alpha > 0: the root sits at -i alpha/n, still on the imaginary axis
  const auto rho_plus = strip_radius(delta(3, 1.5));
  REQUIRE(rho_plus.has_value());
  CHECK(std::abs(*rho_plus - 0.5) < 1e-10);
}

TEST_CASE("point and AC projections") {
  const auto spec = find_bound_states(delta(3, -1.0));
  const StarGrid grid = StarGrid::covering(3, 0.01, 80.0);
  const GraphFunction phi = spec.bound_states.front().sample(grid);
  CHECK(lp_norm(project_point(spec, phi) - phi, 2.0) < 1e-6);
  CHECK(lp_norm(project_ac(spec, phi), 2.0) < 1e-6);

  // orthogonal to (1,1,1): odd across edges
  const GraphFunction odd = GraphFunction::sample(grid, [](int j, double x) {
    const double w[] = {1.0, -1.0, 0.0};
    return Complex(w[j] * std::exp(-(x - 3.0) * (x - 3.0)));
  });
  CHECK(lp_norm(project_point(spec, odd), 2.0) < 1e-8);

  std::mt19937_64 rng(9);
  std::normal_distribution<double> g;
  const GraphFunction u = GraphFunction::sample(grid, [&](int j, double x) {
    return Complex(1.0 + 0.5 * j, 0.3 * j) * std::exp(-(x - 2.0) * (x - 2.0) / (1.0 + j));
  });
  const GraphFunction v = GraphFunction::sample(grid, [&](int j, double x) {
    return Complex(0.7, -0.2 * j) * std::exp(-0.5 * x) * std::cos(x + j);
  });
  CHECK(lp_norm(project_point(spec, project_ac(spec, u)), 2.0) < 1e-8);
  const GraphFunction pu = project_point(spec, u);
  CHECK(lp_norm(project_point(spec, pu) - pu, 2.0) < 1e-8);
  CHECK(std::abs(inner_product(pu, v) - inner_product(u, project_point(spec, v))) < 1e-8);

  const auto empty = find_bound_states(kirchhoff(3));
  CHECK(lp_norm(project_point(empty, u), 2.0) == 0.0);
  CHECK(lp_norm(project_ac(empty, u) - u, 2.0) == 0.0);
}

TEST_CASE("sampled eigenfunction satisfies -u'' = -k^2 u inside") {
  const auto spec = find_bound_states(delta(3, -1.0));
  const double k = spec.bound_states.front().k;
  for (const double h : {0.02, 0.01}) {
    const StarGrid grid = StarGrid::covering(3, h, 40.0);
    const GraphFunction phi = spec.bound_states.front().sample(grid);
    double worst = 0.0, scale = 0.0;
    for (int j = 0; j < 3; ++j) {
      for (int i = 1; i + 1 < grid.m(); ++i) {
        const Complex lap = (phi(j, i + 1) - 2.0 * phi(j, i) + phi(j, i - 1)) / (h * h);
        worst = std::max(worst, std::abs(-lap + k * k * phi(j, i)));
        scale = std::max(scale, std::abs(k * k * phi(j, i)));
      }
    }
    CHECK(worst / scale < h * h);
  }
}

TEST_CASE("pencil roots") {
  const auto p = delta(3, -1.0);
  const auto roots = pencil_roots(p.A(), p.B(), 10.0, 4000);
  REQUIRE(roots.size() == 1);
  CHECK(std::abs(roots.front() - 1.0 / 3.0) < 1e-10);
}

}  // TEST_SUITE
