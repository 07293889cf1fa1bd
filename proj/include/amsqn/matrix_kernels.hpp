#pragma once

#include "amsqn/types.hpp"

#include <cstdint>
#include <functional>

namespace amsqn::kernels {

/// Full SVD A = U * diag(sigma) * V^T, sigma nonincreasing and nonnegative.
struct SvdResult {
  Matrix u;
  Vector sigma;
  Matrix v;
};

/// Condition-estimate threshold above which solve() rejects a system.
inline constexpr double kSolveCondLimit = 1e12;

/// Largest dimension handled by the dense symmetric eigensolver before
/// eig_min_sym_auto switches to the Lanczos path.
inline constexpr Index kDenseEigMaxDim = 512;

SvdResult svd(const Matrix& a);

/// Smallest eigenvalue of a symmetric matrix. Rejects inputs whose
/// asymmetry exceeds 1e-8 * ||A||_F.
double eig_min_sym(const Matrix& a);

/// Full symmetric eigendecomposition (ascending eigenvalues).
struct EigSymResult {
  Vector values;
  Matrix vectors;
};
EigSymResult eig_sym(const Matrix& a);

/// Solves A X = B for square A. Throws SingularSystem when the 1-norm
/// condition estimate exceeds kSolveCondLimit or the factorization breaks.
Matrix solve(const Matrix& a, const Matrix& b);

using MatVec = std::function<Vector(const Vector&)>;

struct LanczosReport {
  bool converged = false;
  int iterations = 0;
  bool dense_fallback = false;
};

/// Smallest eigenvalue of the symmetric operator `apply` of size n, by
/// Lanczos with full reorthogonalization. On non-convergence within
/// max_iter steps the operator is materialized and the dense path is used
/// (flagged in the report).
double eig_min_sym_iterative(const MatVec& apply, Index n,
                             LanczosReport* report = nullptr,
                             int max_iter = 300);

/// Dense path for n <= kDenseEigMaxDim, Lanczos above.
double eig_min_sym_auto(const Matrix& a);

/// Per-thread accounting of kernel calls, used to assert structural cost
/// bounds (e.g. compute_mu never eig-decomposes an n x n matrix).
struct OpStats {
  std::uint64_t svd_calls = 0;
  std::uint64_t eig_calls = 0;
  std::uint64_t solve_calls = 0;
  Index max_svd_dim = 0;
  Index max_eig_dim = 0;
  Index max_solve_dim = 0;
};

OpStats& op_stats();
void reset_op_stats();

} // namespace amsqn::kernels
