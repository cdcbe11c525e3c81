#include "sgs/coupling.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "sgs/error.hpp"

namespace sgs {

namespace {

constexpr double kRankTol = 1e-10;
constexpr double kH2Tol = 1e-12;
constexpr double kPoleTol = 1e-12;
constexpr double kEquivTol = 1e-10;

double max_abs(const Matrix& m) {
  return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff();
}

double spectral_norm(const Matrix& m) {
  if (m.size() == 0) return 0.0;
  Eigen::JacobiSVD<Matrix> svd(m);
  return svd.singularValues()(0);
}

// Orthonormal basis of the numerical kernel of m; `scale` sets the zero
// threshold kRankTol * scale.
Matrix kernel_basis(const Matrix& m, double scale) {
  Eigen::JacobiSVD<Matrix> svd(m, Eigen::ComputeFullV);
  const auto& s = svd.singularValues();
  const double tol = kRankTol * scale;
  int rank = 0;
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    if (s(i) > tol) ++rank;
  }
  const int n = static_cast<int>(m.cols());
  return svd.matrixV().rightCols(n - rank);
}

}  // namespace

CouplingPair::CouplingPair(Matrix A, Matrix B) : A_(std::move(A)), B_(std::move(B)) {
  if (A_.rows() != A_.cols() || B_.rows() != B_.cols()) {
    throw StructuralError("coupling matrices must be square");
  }
  if (A_.rows() != B_.rows()) {
    throw StructuralError("coupling matrices must have the same size");
  }
  if (A_.rows() < 2) {
    throw StructuralError("star graph needs at least 2 edges");
  }
}

ValidityReport validate(const CouplingPair& pair) {
  const int n = pair.n();
  ValidityReport report;

  Matrix AB(n, 2 * n);
  AB << pair.A(), pair.B();
  Eigen::JacobiSVD<Matrix> svd(AB);
  report.singular_values = svd.singularValues();
  const double smax = report.singular_values(0);
  report.rank = 0;
  if (smax > 0.0) {
    for (Eigen::Index i = 0; i < report.singular_values.size(); ++i) {
      if (report.singular_values(i) > kRankTol * smax) ++report.rank;
    }
  }
  report.h1_ok = report.rank == n;

  const Matrix ABd = pair.A() * pair.B().adjoint();
  report.h2_residual = max_abs(ABd - ABd.adjoint());
  const double scale = std::max(1.0, max_abs(pair.A()) * max_abs(pair.B()) * n);
  report.h2_ok = report.h2_residual <= kH2Tol * scale;
  return report;
}

void require_valid(const CouplingPair& pair) {
  const auto report = validate(pair);
  if (!report.h1_ok) {
    throw PreconditionError("coupling violates (H1): rank(A,B) = " +
                            std::to_string(report.rank) + " < n = " +
                            std::to_string(pair.n()));
  }
  if (!report.h2_ok) {
    throw PreconditionError("coupling violates (H2): |AB^+ - BA^+|_max = " +
                            std::to_string(report.h2_residual));
  }
}

CouplingPair preset(const Preset& p, int n) {
  if (n < 2) throw StructuralError("star graph needs at least 2 edges");
  if (!std::isfinite(p.strength)) throw DomainError("coupling strength must be finite");

  Matrix A = Matrix::Zero(n, n);
  Matrix B = Matrix::Zero(n, n);
  switch (p.kind) {
    case PresetKind::dirichlet:
      A.setIdentity();
      break;
    case PresetKind::neumann:
      B.setIdentity();
      break;
    case PresetKind::kirchhoff:
    case PresetKind::delta:
      // continuity rows u_i(0) - u_{i+1}(0) = 0, then sum u'_j(0) = alpha u_1(0)
      for (int i = 0; i + 1 < n; ++i) {
        A(i, i) = 1.0;
        A(i, i + 1) = -1.0;
      }
      A(n - 1, 0) = -p.strength;
      B.row(n - 1).setOnes();
      break;
    case PresetKind::delta_prime:
      // u'_i(0) - u'_{i+1}(0) = 0, then sum u_j(0) = beta u'_1(0)
      for (int i = 0; i + 1 < n; ++i) {
        B(i, i) = 1.0;
        B(i, i + 1) = -1.0;
      }
      B(n - 1, 0) = -p.strength;
      A.row(n - 1).setOnes();
      break;
  }
  return CouplingPair(std::move(A), std::move(B));
}

const char* to_string(PresetKind kind) {
  switch (kind) {
    case PresetKind::kirchhoff: return "kirchhoff";
    case PresetKind::dirichlet: return "dirichlet";
    case PresetKind::neumann: return "neumann";
    case PresetKind::delta: return "delta";
    case PresetKind::delta_prime: return "delta_prime";
  }
  return "unknown";
}

PresetKind preset_kind_from_string(const std::string& name) {
  if (name == "kirchhoff") return PresetKind::kirchhoff;
  if (name == "dirichlet") return PresetKind::dirichlet;
  if (name == "neumann") return PresetKind::neumann;
  if (name == "delta") return PresetKind::delta;
  if (name == "delta_prime" || name == "delta-prime") return PresetKind::delta_prime;
  throw StructuralError("unknown coupling preset '" + name + "'");
}

ScatteringSample scattering_matrix(const CouplingPair& pair, Complex k) {
  const Complex ik(-k.imag(), k.real());
  const Matrix plus = pair.A() + ik * pair.B();
  const Matrix minus = pair.A() - ik * pair.B();

  Eigen::JacobiSVD<Matrix> svd(plus);
  const auto& s = svd.singularValues();
  const double smax = s(0);
  const double smin = s(s.size() - 1);
  if (smax == 0.0 || smin <= kPoleTol * smax) {
    const double det = std::abs(plus.determinant());
    throw PoleError("A + ikB is singular at k = (" + std::to_string(k.real()) + ", " +
                        std::to_string(k.imag()) + ")",
                    det);
  }
  return {k, -plus.partialPivLu().solve(minus)};
}

bool equivalent(const CouplingPair& p1, const CouplingPair& p2) {
  require_valid(p1);
  require_valid(p2);
  if (p1.n() != p2.n()) throw PreconditionError("couplings act on different edge counts");
  const auto g1 = scattering_matrix(p1, Complex(1.0, 0.0)).G;
  const auto g2 = scattering_matrix(p2, Complex(1.0, 0.0)).G;
  return max_abs(g1 - g2) < kEquivTol;
}

ProjectorDecomposition projector_decomposition(const CouplingPair& pair) {
  require_valid(pair);
  const int n = pair.n();
  const double scale = std::max(spectral_norm(pair.A()), spectral_norm(pair.B()));

  ProjectorDecomposition out;
  const Matrix ker_b = kernel_basis(pair.B(), scale);
  const Matrix ker_a = kernel_basis(pair.A(), scale);
  out.dim_dirichlet = static_cast<int>(ker_b.cols());
  out.dim_neumann = static_cast<int>(ker_a.cols());
  out.P_D = ker_b * ker_b.adjoint();
  out.P_N = ker_a * ker_a.adjoint();

  if (max_abs(out.P_D * out.P_N) > 1e-8) {
    throw DegeneracyError("ker(A) and ker(B) are not orthogonal", out.dim_dirichlet,
                          out.dim_neumann, n - out.dim_dirichlet - out.dim_neumann);
  }

  out.P_R = Matrix::Identity(n, n) - out.P_D - out.P_N;
  const Matrix herm = 0.5 * (out.P_R + out.P_R.adjoint());
  Eigen::SelfAdjointEigenSolver<Matrix> eig(herm);
  std::vector<Eigen::Index> cols;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (eig.eigenvalues()(i) > 0.5) cols.push_back(i);
  }
  out.dim_robin = static_cast<int>(cols.size());
  if (out.dim_robin != n - out.dim_dirichlet - out.dim_neumann) {
    throw DegeneracyError("Robin projector has unexpected rank", out.dim_dirichlet,
                          out.dim_neumann, out.dim_robin);
  }
  out.robin_basis.resize(n, out.dim_robin);
  for (int c = 0; c < out.dim_robin; ++c) {
    out.robin_basis.col(c) = eig.eigenvectors().col(cols[c]);
  }

  out.Lambda = Matrix::Zero(n, n);
  if (out.dim_robin == 0) return out;

  // Robin boundary values f = R a, f' = R Lambda_r a + (Dirichlet part in ker B)
  // must satisfy A f + B f' = 0, i.e. A R + B R Lambda_r = 0.
  const Matrix& R = out.robin_basis;
  const Matrix AR = pair.A() * R;
  const Matrix BR = pair.B() * R;
  Eigen::JacobiSVD<Matrix> svd(BR, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& s = svd.singularValues();
  if (s(s.size() - 1) <= kRankTol * std::max(scale, 1e-300)) {
    throw DegeneracyError("B restricted to the Robin subspace is rank deficient",
                          out.dim_dirichlet, out.dim_neumann, out.dim_robin);
  }
  Matrix lambda_r = -svd.solve(AR);
  const double resid = max_abs(AR + BR * lambda_r);
  const double lscale = std::max(1.0, max_abs(lambda_r));
  if (resid > 1e-8 * std::max(scale, 1.0) * lscale) {
    throw DegeneracyError("Robin block is inconsistent with A f + B f' = 0",
                          out.dim_dirichlet, out.dim_neumann, out.dim_robin);
  }
  if (max_abs(lambda_r - lambda_r.adjoint()) > 1e-8 * lscale) {
    throw DegeneracyError("Robin block Lambda is not Hermitian", out.dim_dirichlet,
                          out.dim_neumann, out.dim_robin);
  }
  lambda_r = 0.5 * (lambda_r + lambda_r.adjoint()).eval();
  out.Lambda = R * lambda_r * R.adjoint();
  return out;
}

Matrix random_unitary(std::mt19937_64& rng, int n) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix z(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) z(i, j) = Complex(normal(rng), normal(rng));
  }
  Eigen::HouseholderQR<Matrix> qr(z);
  Matrix q = qr.householderQ();
  const Matrix r = qr.matrixQR().triangularView<Eigen::Upper>();
  // Fix the phases so that the distribution is Haar.
  for (int j = 0; j < n; ++j) {
    const Complex d = r(j, j);
    const double ad = std::abs(d);
    if (ad > 0.0) q.col(j) *= d / ad;
  }
  return q;
}

CouplingPair random_valid_pair(std::mt19937_64& rng, int n) {
  if (n < 2) throw StructuralError("star graph needs at least 2 edges");
  std::normal_distribution<double> normal(0.0, 1.0);
  const Matrix I = Matrix::Identity(n, n);
  for (;;) {
    const Matrix U = random_unitary(rng, n);
    Matrix C(n, n);
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) C(i, j) = Complex(normal(rng), normal(rng));
    }
    C += 2.0 * I;
    Eigen::JacobiSVD<Matrix> svd(C);
    const auto& s = svd.singularValues();
    if (s(n - 1) < 1e-3 * s(0)) continue;

    CouplingPair pair(C * (I - U) * 0.5, Complex(0.0, -0.5) * C * (I + U));
    if (validate(pair).valid()) return pair;
  }
}

}  // namespace sgs
