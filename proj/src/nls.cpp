#include "sgs/nls.hpp"

#include <algorithm>
#include <cmath>

#include "sgs/error.hpp"

namespace sgs {

namespace {

Complex phase(double angle) { return {std::cos(angle), std::sin(angle)}; }

// Nonlinear substep on the CN state vector.
class NonlinearFlow {
 public:
  NonlinearFlow(const CrankNicolson& cn, double lambda, double p)
      : W_(cn.vertex_basis()), r_(cn.vertex_dim()), lambda_(lambda), p_(p) {}

  void apply(Vector& s, double tau) const {
    if (lambda_ == 0.0) return;
    if (r_ > 0) {
      const Vector v = W_ * s.head(r_);
      const Eigen::VectorXd weight = v.cwiseAbs().array().pow(p_ - 1.0).matrix();
      const Matrix hv = W_.adjoint() * weight.asDiagonal() * W_;
      Eigen::SelfAdjointEigenSolver<Matrix> eig(0.5 * (hv + hv.adjoint()));
      Vector rot(r_);
      for (int i = 0; i < r_; ++i) rot(i) = phase(lambda_ * tau * eig.eigenvalues()(i));
      s.head(r_) = eig.eigenvectors() * rot.asDiagonal() * (eig.eigenvectors().adjoint() * s.head(r_));
    }
    for (Eigen::Index i = r_; i < s.size(); ++i) {
      s(i) *= phase(lambda_ * tau * std::pow(std::abs(s(i)), p_ - 1.0));
    }
  }

 private:
  const Matrix& W_;
  int r_;
  double lambda_;
  double p_;
};

double potential_term(const CrankNicolson& cn, const Vector& s, double p) {
  const int r = cn.vertex_dim();
  const double h = cn.grid().h();
  double total = 0.0;
  if (r > 0) {
    const Vector v = cn.vertex_basis() * s.head(r);
    total += 0.5 * h * v.cwiseAbs().array().pow(p + 1.0).sum();
  }
  const auto& m = cn.mass();
  for (Eigen::Index i = r; i < s.size(); ++i) total += m(i) * std::pow(std::abs(s(i)), p + 1.0);
  return total;
}

double discrete_energy(const CrankNicolson& cn, const Vector& s, double lambda, double p) {
  return cn.stiffness_energy(s) - 2.0 * lambda / (p + 1.0) * potential_term(cn, s, p);
}

}  // namespace

void validate(const NlsParams& params) {
  if (!(params.p > 1.0 && params.p < 5.0)) throw DomainError("nonlinearity exponent must lie in (1, 5)");
  if (!(params.dt > 0.0)) throw DomainError("time step must be positive");
  if (!std::isfinite(params.lambda)) throw DomainError("lambda must be finite");
  if (!(params.mass_tol > 0.0) || !(params.energy_tol > 0.0)) {
    throw DomainError("conservation tolerances must be positive");
  }
}

double ConservationLog::max_mass_drift() const {
  if (mass.empty() || mass.front() == 0.0) return 0.0;
  double worst = 0.0;
  for (const double m : mass) worst = std::max(worst, std::abs(m - mass.front()) / mass.front());
  return worst;
}

double ConservationLog::max_energy_drift() const {
  if (energy.empty()) return 0.0;
  double worst = 0.0;
  const double e0 = energy.front();
  for (const double e : energy) worst = std::max(worst, std::abs(e - e0) / (1.0 + std::abs(e0)));
  return worst;
}

GraphFunction nonlinear_step(const GraphFunction& u, double lambda, double p, double dt) {
  GraphFunction out = u;
  if (lambda == 0.0) return out;
  out.values() = u.values().unaryExpr([&](Complex z) {
    return z * phase(lambda * dt * std::pow(std::abs(z), p - 1.0));
  });
  return out;
}

GraphFunction pointwise_nonlinearity(const GraphFunction& u, double lambda, double p) {
  GraphFunction out = u;
  out.values() = u.values().unaryExpr(
      [&](Complex z) { return lambda * std::pow(std::abs(z), p - 1.0) * z; });
  return out;
}

NlsResult nls_solve(const CouplingPair& pair, const GraphFunction& u0, const NlsParams& params,
                    double t_final, long checkpoint_every) {
  validate(params);
  if (!(t_final >= 0.0)) throw DomainError("final time must be nonnegative");
  if (!u0.all_finite()) throw DomainError("initial data has non-finite samples");

  const long steps = t_final == 0.0 ? 0 : std::max(1L, std::lround(t_final / params.dt));
  const double dt = steps == 0 ? params.dt : t_final / steps;
  const CrankNicolson cn(pair, u0.grid(), dt);
  const NonlinearFlow flow(cn, params.lambda, params.p);

  const auto dec = projector_decomposition(pair);
  const double pd = (dec.P_D * u0.vertex_values()).norm();
  const double scale = std::max(1.0, lp_norm(u0, kInfinity));

  NlsResult result{u0, {}, {}, {}, pd < 1e-8 * scale, false};
  Vector s = cn.pack(u0);
  auto record = [&](double t) {
    result.log.times.push_back(t);
    result.log.mass.push_back(std::sqrt(cn.mass_norm2(s)));
    if (result.energy_logged) result.log.energy.push_back(discrete_energy(cn, s, params.lambda, params.p));
  };
  auto checkpoint = [&](double t) {
    result.checkpoint_times.push_back(t);
    result.checkpoints.push_back(cn.unpack(s));
  };

  record(0.0);
  if (checkpoint_every > 0) checkpoint(0.0);
  const double m0 = result.log.mass.front();
  for (long n = 1; n <= steps; ++n) {
    flow.apply(s, 0.5 * dt);
    cn.step(s);
    flow.apply(s, 0.5 * dt);
    const double t = n * dt;
    record(t);
    const double m = result.log.mass.back();
    if (!std::isfinite(m)) {
      throw NumericalAbort("solution became non-finite at t = " + std::to_string(t));
    }
    if (m0 > 0.0 && std::abs(m - m0) / m0 > params.mass_tol) {
      throw NumericalAbort("relative mass drift " + std::to_string(std::abs(m - m0) / m0) +
                           " exceeds tolerance at t = " + std::to_string(t));
    }
    if (checkpoint_every > 0 && (n % checkpoint_every == 0 || n == steps)) checkpoint(t);
  }
  result.u = cn.unpack(s);
  result.energy_warning = result.log.max_energy_drift() > params.energy_tol;
  return result;
}

GraphFunction regularized_nonlinearity(const CouplingPair& pair, const GraphFunction& u,
                                       double eps, double lambda, double p) {
  if (!(eps > 0.0)) throw DomainError("regularization parameter must be positive");
  const double root = std::sqrt(eps);
  const GraphFunction inner = regularizer_apply(pair, u, root);
  return regularizer_apply(pair, pointwise_nonlinearity(inner, lambda, p), root);
}

}  // namespace sgs
