#ifndef BLOCKGP_COMMON_HPP
#define BLOCKGP_COMMON_HPP

#include <stdexcept>
#include <string>

namespace blockgp {

// Diagonal regularization scale. Every factorization of (a sub-block of) a
// dataset's correlation matrix uses delta = kJitterPerDim * n with n the full
// dataset size, so that block decompositions and the dense path regularize the
// same matrix and the k<=2 chain-rule identities survive in floating point.
inline constexpr double kJitterPerDim = 1e-10;

inline double dataset_jitter(int n_dataset) { return kJitterPerDim * n_dataset; }
inline double matrix_jitter(int dim) { return kJitterPerDim * dim; }

// Floor for profiled process variance estimates.
inline constexpr double kSigma2Floor = 1e-12;

/// Numerical failure (factorization breakdown, non-positive pivot, ...) with
/// enough context to name the offending block or term.
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

/// Thrown when a profile system is singular (unidentifiable basis).
class IdentifiabilityError : public NumericalError {
 public:
  explicit IdentifiabilityError(const std::string& what) : NumericalError(what) {}
};

}  // namespace blockgp

#endif  // BLOCKGP_COMMON_HPP
