#pragma once

#include "amsqn/types.hpp"

#include <cstdint>
#include <iosfwd>
#include <string>

namespace amsqn::problems {

enum class ProblemKind { logreg, porder, xent, quadratic, mlp_binary };
enum class SignalRegime { high, low };

std::string to_string(ProblemKind k);
std::string to_string(SignalRegime r);
ProblemKind problem_kind_from_string(const std::string& s);
SignalRegime regime_from_string(const std::string& s);

/// One generated test objective. Instances are immutable after generation;
/// evaluation is pure and thread-safe.
struct ProblemInstance {
  ProblemKind kind = ProblemKind::quadratic;
  Matrix a;        // m x n data matrix
  Vector b;        // labels: +-1 (logreg/mlp), class index 1..n_classes (xent),
                   // real targets (porder/quadratic)
  double p = 2.0;  // porder exponent
  int n_classes = 1;
  int hidden = 0;  // mlp hidden width

  // generation metadata
  std::uint64_t seed = 0;
  double cbar = 0.0;
  double omega = 0.0;
  double sigma = 0.0;
  SignalRegime regime = SignalRegime::low;
  std::string grad_normalization = "1/m";
  Vector planted; // planted solution where the construction uses one

  Index sample_count() const { return a.rows(); }
  Index feature_count() const { return a.cols(); }
  /// Dimension of the optimization variable.
  Index dimension() const;
};

/// c_j = exp(-cbar * j / n), 1-based j.
double data_decay(double cbar, Index j, Index n);

ProblemInstance gen_logreg(Index m, Index n, double cbar, double omega,
                           SignalRegime regime, std::uint64_t seed);
ProblemInstance gen_porder(Index m, Index n, double p, double cbar, double sigma,
                           std::uint64_t seed);
ProblemInstance gen_xent(Index m, Index n, int n_classes, double cbar, double sigma,
                         std::uint64_t seed);
ProblemInstance gen_quadratic(Index m, Index n, double cbar, double sigma,
                              std::uint64_t seed);
ProblemInstance gen_mlp(Index n_in, int hidden, Index m, std::uint64_t seed);

double eval_f(const ProblemInstance& p, const Vector& x);
Vector eval_grad(const ProblemInstance& p, const Vector& x);
/// Dense Hessian; supported for logreg, porder with p >= 2, quadratic, xent.
Matrix eval_hess(const ProblemInstance& p, const Vector& x);
bool supports_hessian(const ProblemInstance& p);

/// Default start point: zeros for the convex objectives, small seeded random
/// weights for the MLP (zero weights sit on a saddle there).
Vector default_start(const ProblemInstance& p);

/// Spectral norm by power iteration on M^T M.
double power_iteration_norm(const Matrix& m, int max_iter = 5000, double tol = 1e-12);

/// Plain single-threaded evaluation, kept as the reference implementation
/// for the parallel kernels.
namespace reference {
double eval_f(const ProblemInstance& p, const Vector& x);
Vector eval_grad(const ProblemInstance& p, const Vector& x);
} // namespace reference

/// Instance <-> JSON document (replayable runs).
std::string save_instance_json(const ProblemInstance& p);
ProblemInstance load_instance_json(const std::string& text);
void save_instance_file(const ProblemInstance& p, const std::string& path);
ProblemInstance load_instance_file(const std::string& path);

} // namespace amsqn::problems
