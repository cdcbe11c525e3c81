#pragma once

// Closed-form reference values computed independently of the library.

#include <cmath>
#include <complex>

#include <Eigen/Dense>

namespace oracle {

using C = std::complex<double>;

/// Solution of i u_t + u_xx = 0 on the line with u(0, x) = exp(-a (x - x0)^2).
inline C free_gaussian(double t, double x, double x0, double a = 1.0) {
  const C d = 1.0 + C(0.0, 4.0 * a * t);
  return std::exp(-a * (x - x0) * (x - x0) / d) / std::sqrt(d);
}

/// Dirichlet half-line solution by odd reflection.
inline C dirichlet_image(double t, double x, double x0, double a = 1.0) {
  return free_gaussian(t, x, x0, a) - free_gaussian(t, -x, x0, a);
}

/// Neumann half-line solution by even reflection.
inline C neumann_image(double t, double x, double x0, double a = 1.0) {
  return free_gaussian(t, x, x0, a) + free_gaussian(t, -x, x0, a);
}

inline Eigen::MatrixXcd ones(int n) { return Eigen::MatrixXcd::Ones(n, n); }
inline Eigen::MatrixXcd eye(int n) { return Eigen::MatrixXcd::Identity(n, n); }

/// Continuity plus sum of derivatives = alpha u(0), from the plane-wave ansatz
/// e^{-ikx} e_j + e^{ikx} G e_j.
inline Eigen::MatrixXcd delta_G(int n, double alpha, C k) {
  return (2.0 / (static_cast<double>(n) + C(0.0, 1.0) * alpha / k)) * ones(n) - eye(n);
}

/// Continuous derivative plus sum of values = beta u'(0).
inline Eigen::MatrixXcd delta_prime_G(int n, double beta, C k) {
  return eye(n) - (2.0 / (static_cast<double>(n) - C(0.0, 1.0) * k * beta)) * ones(n);
}

/// v - eps^2 v'' = e^{-x} on the half-line with v(0) = 0.
inline double dirichlet_regularized_exp(double x, double eps) {
  return (std::exp(-x) - std::exp(-x / eps)) / (1.0 - eps * eps);
}

/// sqrt(2) sech(x) e^{it} solves i u_t + u_xx + |u|^2 u = 0.
inline double soliton_modulus(double x) { return std::sqrt(2.0) / std::cosh(x); }

}  // namespace oracle
