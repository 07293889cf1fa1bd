#include "amsqn/optimizer.hpp"

#include "amsqn/matrix_kernels.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace amsqn {

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(const Clock::time_point& t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

bool finite(const Vector& v) { return v.allFinite(); }

constexpr double kDivergenceRatio = 1e6;

struct LoopState {
  RunResult result;
  Vector x;
  Vector g;
  double f = 0.0;
  double g0_norm = 0.0;
  long iter = 0;
};

/// Shared stopping/divergence logic. Returns true when the run is over.
bool check_stop(LoopState& st, double eps_tol, long max_iter) {
  const double gn = st.g.norm();
  const double ratio = st.g0_norm > 0 ? gn / st.g0_norm : 0.0;
  st.result.final_grad_ratio = ratio;
  st.result.final_f = st.f;
  if (!std::isfinite(st.f) || !finite(st.g) || !finite(st.x) ||
      ratio > kDivergenceRatio) {
    st.result.status = RunStatus::diverged;
    st.result.iterations = st.iter;
    return true;
  }
  if (ratio <= eps_tol) {
    st.result.status = RunStatus::converged;
    st.result.iterations = st.iter;
    return true;
  }
  if (st.iter >= max_iter) {
    st.result.status = RunStatus::max_iterations;
    st.result.iterations = st.iter;
    return true;
  }
  return false;
}

QnMethod qn_method(BaseMethod m) {
  switch (m) {
    case BaseMethod::broyden: return QnMethod::broyden;
    case BaseMethod::psb: return QnMethod::psb;
    case BaseMethod::dfp: return QnMethod::dfp;
    case BaseMethod::bfgs: return QnMethod::bfgs;
    default: throw std::invalid_argument("not a quasi-Newton method");
  }
}

} // namespace

std::string to_string(BaseMethod m) {
  switch (m) {
    case BaseMethod::broyden: return "broyden";
    case BaseMethod::psb: return "psb";
    case BaseMethod::dfp: return "dfp";
    case BaseMethod::bfgs: return "bfgs";
    case BaseMethod::gd: return "gd";
    case BaseMethod::newton: return "newton";
  }
  return "?";
}

std::string to_string(Perturbation p) {
  switch (p) {
    case Perturbation::none: return "none";
    case Perturbation::symmetric_only: return "symmetric-only";
    case Perturbation::ours: return "ours";
    case Perturbation::psd_projection: return "psd-projection";
  }
  return "?";
}

Vector step_direction(const HessianState& h, const Vector& g) {
  if (h.mode == HessianMode::direct) return -kernels::solve(h.m, g);
  return -(h.m * g);
}

double default_gd_alpha(const problems::ProblemInstance& p, const Vector& x0) {
  // power iteration with FD Hessian-vector products, so it also covers kinds
  // without an analytic Hessian
  const Index n = x0.size();
  const double fd_h = 1e-6 * (1.0 + x0.norm());
  Vector v = Vector::Constant(n, 1.0 / std::sqrt(double(n)));
  double lam = 1.0;
  for (int it = 0; it < 60; ++it) {
    const Vector hv =
        (problems::eval_grad(p, x0 + fd_h * v) - problems::eval_grad(p, x0 - fd_h * v)) /
        (2.0 * fd_h);
    const double nv = hv.norm();
    if (!(nv > 0) || !hv.allFinite()) break;
    const double next = nv;
    v = hv / nv;
    if (std::abs(next - lam) <= 1e-3 * next && it > 3) {
      lam = next;
      break;
    }
    lam = next;
  }
  return lam > 0 ? 1.0 / lam : 1.0;
}

RunResult run_amsqn(const problems::ProblemInstance& p, const SolverConfig& cfg,
                    const IterationObserver& observer) {
  if (cfg.method == BaseMethod::gd || cfg.method == BaseMethod::newton)
    throw std::invalid_argument("run_amsqn: expects a quasi-Newton method");
  if (cfg.q < 1) throw std::invalid_argument("run_amsqn: q must be >= 1");
  const QnMethod method = qn_method(cfg.method);
  const double alpha = cfg.alpha.value_or(1.0);

  LoopState st;
  st.x = cfg.start.value_or(problems::default_start(p));
  st.g = problems::eval_grad(p, st.x);
  st.f = problems::eval_f(p, st.x);
  st.g0_norm = st.g.norm();

  HessianState h = HessianState::identity(st.x.size(), cfg.mode);
  SecantHistory history(cfg.q, cfg.secants);
  MuLedger ledger;
  ledger.period = cfg.correction_period;
  ledger.surplus = 1.0; // lambda_min of B_0 = I, known without an eigensolve

  while (true) {
    if (check_stop(st, cfg.eps_tol, cfg.max_iter)) break;
    const auto t0 = Clock::now();

    history.push(st.x, st.g);

    IterationRecord rec;
    rec.iter = st.iter;
    rec.f = st.f;
    rec.grad_norm = st.g.norm();
    rec.grad_ratio = st.g0_norm > 0 ? rec.grad_norm / st.g0_norm : 0.0;

    double mu_t = 0.0;
    if (history.size() >= 2) {
      SecantBlock blk = history.assemble();
      if (cfg.rejection)
        blk = reject(blk, cfg.rejection_eps, cfg.literal_reject_rule);
      try {
        const LowRankFactors f = update_factors(method, h, blk.s, blk.y);
        // an exploding estimate overflows the factor products long before
        // the iterates or gradients turn non-finite (bounded-gradient
        // objectives never trip the ratio test); skip rather than corrupt H
        if (!f.d1.allFinite() || !f.d2.allFinite() || !f.w.allFinite())
          throw SingularSystem("update factors overflowed",
                               std::numeric_limits<double>::infinity());
        switch (cfg.perturbation) {
          case Perturbation::none:
            h = apply_factors(h, f);
            break;
          case Perturbation::symmetric_only:
            h = apply_symmetrized(h, f, 0.0);
            break;
          case Perturbation::ours: {
            const HessianState hs = apply_symmetrized(h, f, 0.0);
            const double mu_tilde = compute_mu(f.d1, f.d2, f.w, cfg.shift);
            if (cfg.correction_period > 0) {
              CorrectedMu c = correct_mu(std::move(ledger), mu_tilde, hs, st.iter);
              mu_t = c.mu;
              ledger = std::move(c.ledger);
            } else {
              mu_t = mu_tilde;
            }
            h = hs;
            if (mu_t > 0)
              h.m += mu_t * Matrix::Identity(h.m.rows(), h.m.cols());
            break;
          }
          case Perturbation::psd_projection:
            h = psd_projection(apply_symmetrized(h, f, 0.0));
            break;
        }
        rec.secants_kept = static_cast<int>(blk.cols());
      } catch (const SingularSystem&) {
        rec.update_skipped = true;
        st.result.skipped_updates++;
      } catch (const std::runtime_error&) {
        // compute_mu exhausted its doubling budget; skip this update
        rec.update_skipped = true;
        st.result.skipped_updates++;
      }
    }

    Vector d;
    try {
      d = step_direction(h, st.g);
    } catch (const SingularSystem&) {
      d = -st.g; // gradient step fallback
      rec.update_skipped = true;
      st.result.skipped_updates++;
    }

    const double alpha_eff = mu_scaled_alpha(alpha, mu_t, cfg.mu_scaling, cfg.mode);
    rec.mu = mu_t;
    rec.alpha_eff = alpha_eff;
    rec.descent_dot = st.g.dot(d);
    st.result.mu_sum += mu_t;

    if (observer) {
      IterationView view{st.iter, &h, &st.x, &st.g, &d, mu_t};
      observer(view);
    }

    st.x += alpha_eff * d;
    st.g = problems::eval_grad(p, st.x);
    st.f = problems::eval_f(p, st.x);
    st.iter++;

    rec.time_ms = ms_since(t0);
    st.result.trace.push_back(std::move(rec));
  }

  st.result.x = std::move(st.x);
  return st.result;
}

RunResult run_gd(const problems::ProblemInstance& p, const SolverConfig& cfg,
                 const IterationObserver& observer) {
  LoopState st;
  st.x = cfg.start.value_or(problems::default_start(p));
  st.g = problems::eval_grad(p, st.x);
  st.f = problems::eval_f(p, st.x);
  st.g0_norm = st.g.norm();
  const double alpha = cfg.alpha ? *cfg.alpha : default_gd_alpha(p, st.x);

  while (true) {
    if (check_stop(st, cfg.eps_tol, cfg.max_iter)) break;
    const auto t0 = Clock::now();
    IterationRecord rec;
    rec.iter = st.iter;
    rec.f = st.f;
    rec.grad_norm = st.g.norm();
    rec.grad_ratio = st.g0_norm > 0 ? rec.grad_norm / st.g0_norm : 0.0;
    rec.alpha_eff = alpha;
    const Vector d = -st.g;
    rec.descent_dot = st.g.dot(d);
    if (observer) {
      IterationView view{st.iter, nullptr, &st.x, &st.g, &d, 0.0};
      observer(view);
    }
    st.x += alpha * d;
    st.g = problems::eval_grad(p, st.x);
    st.f = problems::eval_f(p, st.x);
    st.iter++;
    rec.time_ms = ms_since(t0);
    st.result.trace.push_back(std::move(rec));
  }
  st.result.x = std::move(st.x);
  return st.result;
}

RunResult run_newton(const problems::ProblemInstance& p, const SolverConfig& cfg,
                     const IterationObserver& observer) {
  if (!problems::supports_hessian(p))
    throw std::invalid_argument("run_newton: problem kind lacks a Hessian");
  LoopState st;
  st.x = cfg.start.value_or(problems::default_start(p));
  st.g = problems::eval_grad(p, st.x);
  st.f = problems::eval_f(p, st.x);
  st.g0_norm = st.g.norm();
  const double alpha = cfg.alpha.value_or(1.0);

  while (true) {
    if (check_stop(st, cfg.eps_tol, cfg.max_iter)) break;
    const auto t0 = Clock::now();
    IterationRecord rec;
    rec.iter = st.iter;
    rec.f = st.f;
    rec.grad_norm = st.g.norm();
    rec.grad_ratio = st.g0_norm > 0 ? rec.grad_norm / st.g0_norm : 0.0;
    rec.alpha_eff = alpha;
    Vector d;
    try {
      d = -kernels::solve(problems::eval_hess(p, st.x), st.g);
    } catch (const SingularSystem&) {
      st.result.status = RunStatus::diverged;
      st.result.iterations = st.iter;
      st.result.trace.push_back(std::move(rec));
      break;
    }
    rec.descent_dot = st.g.dot(d);
    if (observer) {
      IterationView view{st.iter, nullptr, &st.x, &st.g, &d, 0.0};
      observer(view);
    }
    st.x += alpha * d;
    st.g = problems::eval_grad(p, st.x);
    st.f = problems::eval_f(p, st.x);
    st.iter++;
    rec.time_ms = ms_since(t0);
    st.result.trace.push_back(std::move(rec));
  }
  st.result.x = std::move(st.x);
  return st.result;
}

std::string trace_csv_string(const RunResult& result, bool limited) {
  std::ostringstream os;
  os << "iter,f,grad_norm,grad_ratio,mu,alpha_eff,secants_kept,time_ms";
  if (limited) os << ",L,gamma";
  os << "\n";
  char buf[512];
  for (const auto& r : result.trace) {
    std::snprintf(buf, sizeof buf, "%ld,%.17g,%.17g,%.17g,%.17g,%.17g,%d,%.3f",
                  r.iter, r.f, r.grad_norm, r.grad_ratio, r.mu, r.alpha_eff,
                  r.secants_kept, r.time_ms);
    os << buf;
    if (limited) {
      std::snprintf(buf, sizeof buf, ",%d,%.17g", r.memory_blocks, r.gamma);
      os << buf;
    }
    os << "\n";
  }
  return os.str();
}

void write_trace_csv(const RunResult& result, const std::string& path, bool limited) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for write: " + path);
  out << trace_csv_string(result, limited);
}

} // namespace amsqn
