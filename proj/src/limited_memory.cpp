#include "amsqn/limited_memory.hpp"

#include "amsqn/matrix_kernels.hpp"

#include <chrono>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace amsqn {

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(const Clock::time_point& t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

constexpr double kDivergenceRatio = 1e6;

} // namespace

bool TwoLoopCache::push_block(const Matrix& s, const Matrix& y) {
  if (s.rows() != y.rows() || s.cols() != y.cols())
    throw std::invalid_argument("push_block: S and Y must have equal shape");
  Block b;
  b.sty_lu.compute(s.transpose() * y);
  if (!(b.sty_lu.rcond() > 1.0 / kernels::kSolveCondLimit)) return false;
  b.s = s;
  b.y = y;
  // R = S (S^T Y)^{-1}  via  R^T = (S^T Y)^{-T} S^T
  const Matrix rt = b.sty_lu.transpose().solve(Matrix(s.transpose()));
  b.r = rt.transpose();
  if (!b.r.allFinite()) return false;
  blocks_.push_back(std::move(b));
  while (static_cast<int>(blocks_.size()) > capacity_) blocks_.pop_front();
  return true;
}

void TwoLoopCache::set_gamma(double g) {
  if (!(g > 0)) throw std::invalid_argument("TwoLoopCache: gamma must be > 0");
  gamma_ = g;
}

long TwoLoopCache::stored_scalars() const {
  long total = 0;
  for (const auto& b : blocks_) {
    total += b.s.size() + b.y.size() + b.r.size();
    total += b.sty_lu.matrixLU().size();
  }
  return total;
}

Vector TwoLoopCache::apply_inverse(const Vector& g) const {
  if (blocks_.empty()) return gamma_ * g;
  const int count = static_cast<int>(blocks_.size());

  // first loop, newest -> oldest: a_i = S_i^T q saved before q <- (I - V_i) q
  std::vector<Vector> a(count);
  Vector q = g;
  for (int i = count - 1; i >= 0; --i) {
    const Block& b = blocks_[i];
    a[i] = b.s.transpose() * q;
    q -= b.y * b.sty_lu.solve(a[i]); // (I - Y (S^T Y)^{-1} S^T) q
  }

  // second loop, oldest -> newest: u <- (I - V_i^T) u + R_i a_i
  Vector u = gamma_ * q;
  for (int i = 0; i < count; ++i) {
    const Block& b = blocks_[i];
    const Vector vt = b.sty_lu.transpose().solve(Vector(b.y.transpose() * u));
    u -= b.s * vt;
    u += b.r * a[i];
  }
  return u;
}

GammaChoice gamma_select(GammaMode mode, const Matrix& s, const Matrix& y,
                         const kernels::MatVec& h_apply, double constant_value,
                         double previous) {
  if (mode == GammaMode::constant) return GammaChoice{constant_value, false};
  const double num = (y.transpose() * s).trace();
  double den = 0.0;
  for (Index c = 0; c < s.cols(); ++c) den += s.col(c).dot(h_apply(s.col(c)));
  const double gamma = num / den;
  if (!std::isfinite(gamma) || !(gamma > 0)) return GammaChoice{previous, true};
  return GammaChoice{gamma, false};
}

RunResult run_lms_bfgs(const problems::ProblemInstance& p, const SolverConfig& cfg,
                       const IterationObserver& observer) {
  if (cfg.memory < 1) throw std::invalid_argument("run_lms_bfgs: L must be >= 1");
  if (cfg.q < 1) throw std::invalid_argument("run_lms_bfgs: q must be >= 1");
  if (cfg.perturbation == Perturbation::psd_projection)
    throw std::invalid_argument("run_lms_bfgs: psd-projection is not supported here");
  const double alpha = cfg.alpha.value_or(1.0);
  const bool tail_shift = cfg.perturbation == Perturbation::ours;

  RunResult result;
  Vector x = cfg.start.value_or(problems::default_start(p));
  Vector g = problems::eval_grad(p, x);
  double f = problems::eval_f(p, x);
  const double g0_norm = g.norm();

  SecantHistory history(cfg.q, cfg.secants);
  TwoLoopCache cache(cfg.memory, cfg.gamma);
  double gamma = cfg.gamma;
  long iter = 0;

  while (true) {
    const double gn = g.norm();
    const double ratio = g0_norm > 0 ? gn / g0_norm : 0.0;
    result.final_f = f;
    result.final_grad_ratio = ratio;
    if (!std::isfinite(f) || !g.allFinite() || !x.allFinite() ||
        ratio > kDivergenceRatio) {
      result.status = RunStatus::diverged;
      result.iterations = iter;
      break;
    }
    if (ratio <= cfg.eps_tol) {
      result.status = RunStatus::converged;
      result.iterations = iter;
      break;
    }
    if (iter >= cfg.max_iter) {
      result.status = RunStatus::max_iterations;
      result.iterations = iter;
      break;
    }
    const auto t0 = Clock::now();

    history.push(x, g);

    IterationRecord rec;
    rec.iter = iter;
    rec.f = f;
    rec.grad_norm = gn;
    rec.grad_ratio = ratio;

    double mu_t = 0.0;
    if (history.size() >= 2) {
      SecantBlock blk = history.assemble();
      if (cfg.rejection)
        blk = reject(blk, cfg.rejection_eps, cfg.literal_reject_rule);
      if (cache.push_block(blk.s, blk.y))
        rec.secants_kept = static_cast<int>(blk.cols());
      else
        rec.update_skipped = true;

      if (cfg.gamma_mode == GammaMode::self_scaling) {
        const GammaChoice gc = gamma_select(
            cfg.gamma_mode, blk.s, blk.y,
            [](const Vector& v) -> Vector { return v; }, cfg.gamma, gamma);
        gamma = gc.gamma;
        cache.set_gamma(gamma);
      }

      if (tail_shift && rec.secants_kept > 0) {
        try {
          mu_t = compute_mu(blk.s, blk.s, Matrix(-(blk.s.transpose() * blk.y)),
                            cfg.shift);
        } catch (const SingularSystem&) {
          rec.update_skipped = true;
          result.skipped_updates++;
        } catch (const std::runtime_error&) {
          rec.update_skipped = true;
          result.skipped_updates++;
        }
      }
    }
    if (rec.update_skipped && rec.secants_kept == 0) result.skipped_updates++;

    const Vector d = cache.apply_inverse(g);
    const Vector combined = d + mu_t * g;
    const double alpha_eff =
        mu_scaled_alpha(alpha, mu_t, cfg.mu_scaling, HessianMode::inverse);

    rec.mu = mu_t;
    rec.alpha_eff = alpha_eff;
    rec.descent_dot = g.dot(-combined);
    rec.gamma = cache.gamma();
    rec.memory_blocks = cache.size();
    result.mu_sum += mu_t;

    if (observer) {
      const Vector dir = -combined;
      IterationView view{iter, nullptr, &x, &g, &dir, mu_t};
      observer(view);
    }

    x -= alpha_eff * combined;
    g = problems::eval_grad(p, x);
    f = problems::eval_f(p, x);
    iter++;

    rec.time_ms = ms_since(t0);
    result.trace.push_back(std::move(rec));
  }

  result.x = std::move(x);
  return result;
}

} // namespace amsqn
