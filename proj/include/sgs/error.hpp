#pragma once

#include <stdexcept>
#include <string>

namespace sgs {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed or incomplete configuration / serialized input.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Inputs of the wrong shape (non-square matrices, n < 2, mismatched grids).
class StructuralError : public Error {
 public:
  using Error::Error;
};

/// An operation was called on an input that violates its precondition,
/// e.g. an invalid coupling passed to a routine that requires (H1)/(H2).
class PreconditionError : public Error {
 public:
  using Error::Error;
};

/// Argument outside the mathematical domain of the operation.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// A + ikB is singular at the requested wavenumber.
class PoleError : public Error {
 public:
  PoleError(const std::string& what, double det_modulus)
      : Error(what), det_modulus_(det_modulus) {}
  double det_modulus() const noexcept { return det_modulus_; }

 private:
  double det_modulus_;
};

/// The Robin block of a coupling could not be extracted.
class DegeneracyError : public Error {
 public:
  DegeneracyError(const std::string& what, int dim_dirichlet, int dim_neumann,
                  int dim_robin)
      : Error(what),
        dim_dirichlet_(dim_dirichlet),
        dim_neumann_(dim_neumann),
        dim_robin_(dim_robin) {}
  int dim_dirichlet() const noexcept { return dim_dirichlet_; }
  int dim_neumann() const noexcept { return dim_neumann_; }
  int dim_robin() const noexcept { return dim_robin_; }

 private:
  int dim_dirichlet_;
  int dim_neumann_;
  int dim_robin_;
};

/// Bound-state search did not recover n_+(AB^dagger) states.
class SearchFailure : public Error {
 public:
  using Error::Error;
};

/// A propagator plan is under-resolved for the requested evaluation.
class PlanError : public Error {
 public:
  PlanError(const std::string& what, double suggested_K, long suggested_Nk)
      : Error(what), suggested_K_(suggested_K), suggested_Nk_(suggested_Nk) {}
  double suggested_K() const noexcept { return suggested_K_; }
  long suggested_Nk() const noexcept { return suggested_Nk_; }

 private:
  double suggested_K_;
  long suggested_Nk_;
};

/// Regularization parameter too large: 1/eps falls inside the root disk of
/// det(A + ikB).
class StripViolation : public Error {
 public:
  using Error::Error;
};

/// A function handed to the energy form has P_D u(0) != 0.
class FormDomainError : public Error {
 public:
  using Error::Error;
};

/// A time integration aborted (mass drift, boundary residual growth).
class NumericalAbort : public Error {
 public:
  using Error::Error;
};

/// Solution mass reached the edge of the computational window.
class WindowEscape : public Error {
 public:
  using Error::Error;
};

}  // namespace sgs
