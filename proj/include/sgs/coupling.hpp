#pragma once

#include <complex>
#include <random>

#include <Eigen/Dense>

namespace sgs {

using Complex = std::complex<double>;
using Matrix = Eigen::MatrixXcd;
using Vector = Eigen::VectorXcd;

/// Vertex coupling A u(0) + B u'(0) = 0 on an n-edge star graph.
///
/// Construction only checks shapes. Self-adjointness conditions (H1: rank
/// of (A,B) is n; H2: AB^dagger Hermitian) are reported by validate() and
/// enforced by the operations that need them.
class CouplingPair {
 public:
  CouplingPair(Matrix A, Matrix B);

  int n() const noexcept { return static_cast<int>(A_.rows()); }
  const Matrix& A() const noexcept { return A_; }
  const Matrix& B() const noexcept { return B_; }

 private:
  Matrix A_;
  Matrix B_;
};

struct ValidityReport {
  bool h1_ok = false;
  bool h2_ok = false;
  int rank = 0;
  Eigen::VectorXd singular_values;  // of the n x 2n matrix (A,B), descending
  double h2_residual = 0.0;         // max |AB^dagger - BA^dagger|

  bool valid() const noexcept { return h1_ok && h2_ok; }
};

/// Never throws on failed conditions; reports them.
ValidityReport validate(const CouplingPair& pair);

/// Throws PreconditionError if the pair fails (H1) or (H2).
void require_valid(const CouplingPair& pair);

enum class PresetKind { kirchhoff, dirichlet, neumann, delta, delta_prime };

struct Preset {
  PresetKind kind = PresetKind::kirchhoff;
  double strength = 0.0;  // alpha for delta, beta for delta_prime
};

CouplingPair preset(const Preset& p, int n);

inline CouplingPair kirchhoff(int n) { return preset({PresetKind::kirchhoff, 0.0}, n); }
inline CouplingPair dirichlet(int n) { return preset({PresetKind::dirichlet, 0.0}, n); }
inline CouplingPair neumann(int n) { return preset({PresetKind::neumann, 0.0}, n); }
inline CouplingPair delta(int n, double alpha) { return preset({PresetKind::delta, alpha}, n); }
inline CouplingPair delta_prime(int n, double beta) {
  return preset({PresetKind::delta_prime, beta}, n);
}

const char* to_string(PresetKind kind);
PresetKind preset_kind_from_string(const std::string& name);

struct ScatteringSample {
  Complex k;
  Matrix G;
};

/// G(k) = -(A + ikB)^{-1} (A - ikB). Throws PoleError when A + ikB is
/// numerically singular.
ScatteringSample scattering_matrix(const CouplingPair& pair, Complex k);

/// Same operator? Decided by comparing G(1) entrywise within 1e-10.
bool equivalent(const CouplingPair& p1, const CouplingPair& p2);

/// Dirichlet / Neumann / Robin splitting of the vertex space.
struct ProjectorDecomposition {
  Matrix P_D;
  Matrix P_N;
  Matrix P_R;
  Matrix Lambda;       // n x n, supported on range(P_R)
  Matrix robin_basis;  // n x dim_robin, orthonormal columns spanning range(P_R)
  int dim_dirichlet = 0;
  int dim_neumann = 0;
  int dim_robin = 0;
};

ProjectorDecomposition projector_decomposition(const CouplingPair& pair);

/// Haar-distributed unitary of size n.
Matrix random_unitary(std::mt19937_64& rng, int n);

/// A = C(I - U)/2, B = -iC(I + U)/2 with U Haar unitary and C a random
/// well-conditioned invertible matrix. Redraws until validate() passes.
CouplingPair random_valid_pair(std::mt19937_64& rng, int n);

}  // namespace sgs
