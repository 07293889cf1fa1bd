#include "amsqn/ms_updates.hpp"

#include "amsqn/matrix_kernels.hpp"

#include <Eigen/LU>

#include <limits>
#include <stdexcept>

namespace amsqn {

namespace {

using kernels::solve;

Matrix symmetrize(const Matrix& m) { return 0.5 * (m + m.transpose()); }

} // namespace

HessianState direct_update(QnMethod method, const HessianState& b,
                           const Matrix& s, const Matrix& y) {
  if (b.mode != HessianMode::direct)
    throw std::invalid_argument("direct_update: state must be in direct mode");
  const Matrix& bm = b.m;
  const Matrix resid = y - bm * s; // Y - B S
  HessianState out = b;
  switch (method) {
    case QnMethod::broyden: {
      out.m += resid * solve(s.transpose() * s, s.transpose());
      return out;
    }
    case QnMethod::psb: {
      const Matrix sts = s.transpose() * s;
      const Matrix ps = solve(sts, s.transpose());        // (S^T S)^{-1} S^T
      const Matrix k = resid.transpose() * s;             // (Y - BS)^T S
      out.m += resid * ps + ps.transpose() * resid.transpose() -
               ps.transpose() * k * ps;
      return out;
    }
    case QnMethod::dfp: {
      const Matrix yts = y.transpose() * s;
      const Matrix py = solve(yts, y.transpose());        // (Y^T S)^{-1} Y^T
      const Matrix pr = solve(yts, resid.transpose());    // (Y^T S)^{-1} (Y - BS)^T
      out.m += resid * py + y * pr - y * solve(yts, Matrix(resid.transpose() * s)) * py;
      return out;
    }
    case QnMethod::bfgs: {
      const Matrix bs = bm * s;
      out.m += y * solve(y.transpose() * s, y.transpose()) -
               bs * solve(s.transpose() * bs, bs.transpose());
      return out;
    }
  }
  throw std::logic_error("direct_update: unreachable");
}

namespace {

LowRankFactors direct_factors(QnMethod method, const Matrix& bm, const Matrix& s,
                              const Matrix& y) {
  const Index q = s.cols();
  const Matrix resid = y - bm * s;
  LowRankFactors f;
  f.method = method;
  switch (method) {
    case QnMethod::broyden:
      f.d1 = resid;
      f.w = s.transpose() * s;
      f.d2 = s;
      return f;
    case QnMethod::psb: {
      f.d1.resize(s.rows(), 2 * q);
      f.d1 << resid, s;
      f.d2 = f.d1;
      f.w.resize(2 * q, 2 * q);
      f.w << resid.transpose() * s, s.transpose() * s,
             s.transpose() * s, Matrix::Zero(q, q);
      return f;
    }
    case QnMethod::dfp: {
      f.d1.resize(s.rows(), 2 * q);
      f.d1 << resid, y;
      f.d2 = f.d1;
      f.w.resize(2 * q, 2 * q);
      f.w << resid.transpose() * s, y.transpose() * s,
             y.transpose() * s, Matrix::Zero(q, q);
      return f;
    }
    case QnMethod::bfgs: {
      const Matrix bs = bm * s;
      f.d1.resize(s.rows(), 2 * q);
      f.d1 << y, bs;
      f.d2 = f.d1;
      f.w = Matrix::Zero(2 * q, 2 * q);
      f.w.topLeftCorner(q, q) = y.transpose() * s;
      f.w.bottomRightCorner(q, q) = -(s.transpose() * bs);
      return f;
    }
  }
  throw std::logic_error("direct_factors: unreachable");
}

LowRankFactors inverse_factors(QnMethod method, const Matrix& h, const Matrix& s,
                               const Matrix& y) {
  const Index q = s.cols();
  LowRankFactors f;
  f.method = method;
  switch (method) {
    case QnMethod::broyden:
      f.d1 = h * y - s;
      f.w = -(s.transpose() * h * y);
      f.d2 = h.transpose() * s;
      return f;
    case QnMethod::bfgs: {
      const Matrix hy = h * y;
      const Matrix yts = y.transpose() * s;
      f.d1.resize(s.rows(), 2 * q);
      f.d1 << hy, s;
      f.d2.resize(s.rows(), 2 * q);
      f.d2 << h.transpose() * y, s;
      f.w.resize(2 * q, 2 * q);
      f.w << yts + y.transpose() * hy, yts,
             s.transpose() * y, Matrix::Zero(q, q);
      f.w = -f.w;
      return f;
    }
    case QnMethod::psb: {
      // Woodbury mirror of the symmetrized-direct PSB update; the S^T B S
      // terms cancel, leaving a 2q x 2q middle matrix in H only.
      const Matrix hy = h * y;
      const Matrix hs = h * s;
      const Matrix yts = y.transpose() * s;
      f.d1.resize(s.rows(), 2 * q);
      f.d1 << hy - s, hs;
      f.d2.resize(s.rows(), 2 * q);
      f.d2 << h.transpose() * y - s, h.transpose() * s;
      f.w.resize(2 * q, 2 * q);
      f.w << y.transpose() * hy - 0.5 * (yts + yts.transpose()), y.transpose() * hs,
             s.transpose() * hy, s.transpose() * hs;
      f.w = -f.w;
      return f;
    }
    case QnMethod::dfp: {
      const Matrix hy = h * y;
      const Matrix yts = y.transpose() * s;
      const Matrix sbs = sbs_from_inverse(h, s);
      const Matrix t = y.transpose() * hy;
      const Matrix k = yts - sbs; // (Y - BS)^T S
      const Matrix yts_inv = solve(yts, Matrix::Identity(q, q));
      const Matrix sty_inv = yts_inv.transpose();
      const Matrix t3 =
          -0.5 * (yts_inv * k * yts_inv + sty_inv * k.transpose() * sty_inv);
      const Matrix j = 0.5 * (yts_inv + sty_inv);
      const Matrix jinv = solve(j, Matrix::Identity(q, q));
      Matrix ninv(2 * q, 2 * q);
      ninv << -jinv * t3 * jinv, jinv,
              jinv, Matrix::Zero(q, q);
      Matrix uthu(2 * q, 2 * q);
      uthu << t - yts - yts.transpose() + sbs, t - yts.transpose(),
              t - yts, t;
      f.d1.resize(s.rows(), 2 * q);
      f.d1 << hy - s, hy;
      f.d2.resize(s.rows(), 2 * q);
      f.d2 << h.transpose() * y - s, h.transpose() * y;
      f.w = -(ninv + uthu);
      return f;
    }
  }
  throw std::logic_error("inverse_factors: unreachable");
}

} // namespace

LowRankFactors update_factors(QnMethod method, const HessianState& h,
                              const Matrix& s, const Matrix& y) {
  if (s.rows() != y.rows() || s.cols() != y.cols())
    throw std::invalid_argument("update_factors: S and Y must have equal shape");
  if (s.rows() != h.m.rows())
    throw std::invalid_argument("update_factors: S/Y rows must match state");
  return h.mode == HessianMode::direct ? direct_factors(method, h.m, s, y)
                                       : inverse_factors(method, h.m, s, y);
}

HessianState apply_symmetrized(const HessianState& h, const LowRankFactors& f,
                               double mu) {
  if (mu < 0) throw std::invalid_argument("apply_symmetrized: mu must be >= 0");
  HessianState out = h;
  if (f.rank() > 0) {
    const Matrix u = f.d1 * solve(f.w, Matrix(f.d2.transpose()));
    out.m += 0.5 * (u + u.transpose());
  }
  if (mu > 0) out.m += mu * Matrix::Identity(h.m.rows(), h.m.cols());
  out.m = symmetrize(out.m);
  return out;
}

HessianState apply_factors(const HessianState& h, const LowRankFactors& f) {
  HessianState out = h;
  if (f.rank() > 0)
    out.m += f.d1 * solve(f.w, Matrix(f.d2.transpose()));
  return out;
}

Matrix sbs_from_inverse(const Matrix& hinv, const Matrix& s) {
  // S^T (Hinv^{-1}) S without forming the inverse. A rank-deficient S shows
  // up as a singular S^T S.
  const Matrix sts = s.transpose() * s;
  Eigen::PartialPivLU<Matrix> lu(sts);
  if (!(lu.rcond() > 1.0 / kernels::kSolveCondLimit))
    throw SingularSystem("sbs_from_inverse: rank-deficient S",
                         lu.rcond() > 0 ? 1.0 / lu.rcond()
                                        : std::numeric_limits<double>::infinity());
  const Matrix x = kernels::solve(hinv, s);
  return symmetrize(s.transpose() * x);
}

} // namespace amsqn
