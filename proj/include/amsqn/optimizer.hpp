#pragma once

#include "amsqn/ms_updates.hpp"
#include "amsqn/problems.hpp"
#include "amsqn/psd_shift.hpp"
#include "amsqn/secant_history.hpp"
#include "amsqn/types.hpp"

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace amsqn {

enum class BaseMethod { broyden, psb, dfp, bfgs, gd, newton };
enum class Perturbation { none, symmetric_only, ours, psd_projection };
enum class GammaMode { constant, self_scaling };

std::string to_string(BaseMethod m);
std::string to_string(Perturbation p);

struct SolverConfig {
  BaseMethod method = BaseMethod::bfgs;
  HessianMode mode = HessianMode::inverse;
  int q = 5;
  std::optional<double> alpha;            // default: 1 (QN/Newton), curvature-based (GD)
  SecantMode secants = SecantMode::curve;
  Perturbation perturbation = Perturbation::none;
  bool rejection = false;
  double rejection_eps = 0.01;
  bool literal_reject_rule = false;
  bool mu_scaling = false;
  int correction_period = 0;              // nu; 0 disables mu-correction
  double eps_tol = 1e-4;
  long max_iter = 10000;
  std::uint64_t seed = 0;
  ShiftParams shift;

  // limited-memory extras (run_lms_bfgs only)
  int memory = 1;                         // L
  double gamma = 1.0;
  GammaMode gamma_mode = GammaMode::constant;

  std::optional<Vector> start;            // overrides the per-problem default
};

enum class RunStatus { converged, max_iterations, diverged };

struct IterationRecord {
  long iter = 0;
  double f = 0.0;
  double grad_norm = 0.0;
  double grad_ratio = 0.0;
  double mu = 0.0;
  double alpha_eff = 0.0;
  int secants_kept = 0;
  double time_ms = 0.0;
  // not part of the CSV schema, used by diagnostics and tests
  double descent_dot = 0.0;   // g^T d
  bool update_skipped = false;
  double gamma = 0.0;         // limited-memory only
  int memory_blocks = 0;      // limited-memory only
};

struct RunResult {
  RunStatus status = RunStatus::max_iterations;
  long iterations = 0;      // iterations until the stopping rule fired
  Vector x;
  double final_f = 0.0;
  double final_grad_ratio = 0.0;
  long skipped_updates = 0;
  double mu_sum = 0.0;
  std::vector<IterationRecord> trace;
};

/// Per-iteration inspection hook for tests and diagnostics. Called after the
/// estimate update and direction computation, before the step is taken.
struct IterationView {
  long iter;
  const HessianState* estimate; // null for gd/newton/limited-memory
  const Vector* x;
  const Vector* gradient;
  const Vector* direction;
  double mu;
};
using IterationObserver = std::function<void(const IterationView&)>;

/// d = -B^{-1} g for the current mode.
Vector step_direction(const HessianState& h, const Vector& g);

RunResult run_amsqn(const problems::ProblemInstance& p, const SolverConfig& cfg,
                    const IterationObserver& observer = {});
RunResult run_gd(const problems::ProblemInstance& p, const SolverConfig& cfg,
                 const IterationObserver& observer = {});
RunResult run_newton(const problems::ProblemInstance& p, const SolverConfig& cfg,
                     const IterationObserver& observer = {});

/// 1 / lambda_max(hessian at x0) estimated by power iteration on
/// finite-difference Hessian-vector products.
double default_gd_alpha(const problems::ProblemInstance& p, const Vector& x0);

/// Trace CSV: iter,f,grad_norm,grad_ratio,mu,alpha_eff,secants_kept,time_ms
/// (+ L,gamma columns when `limited` is set).
void write_trace_csv(const RunResult& result, const std::string& path,
                     bool limited = false);
std::string trace_csv_string(const RunResult& result, bool limited = false);

} // namespace amsqn
