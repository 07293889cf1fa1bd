#pragma once

#include "amsqn/matrix_kernels.hpp"
#include "amsqn/optimizer.hpp"
#include "amsqn/types.hpp"

#include <Eigen/LU>

#include <deque>

namespace amsqn {

/// Bounded window of multisecant blocks enabling the two-loop product
/// H g = B^{-1} g with the implicit seed B^{-1}_{t-L} = gamma I. Applying
/// the cache never forms an n x n matrix: O(L q n) products only.
class TwoLoopCache {
public:
  explicit TwoLoopCache(int capacity, double gamma = 1.0)
      : capacity_(capacity), gamma_(gamma) {}

  /// Stores (S, Y) with the factorization of S^T Y and R = S (S^T Y)^{-1}.
  /// Returns false (cache unchanged) when S^T Y fails the invertibility
  /// check; evicts the oldest block at capacity.
  bool push_block(const Matrix& s, const Matrix& y);

  /// Two-loop recursion; empty cache returns gamma * g.
  Vector apply_inverse(const Vector& g) const;

  int size() const { return static_cast<int>(blocks_.size()); }
  double gamma() const { return gamma_; }
  void set_gamma(double g);

  /// Stored doubles across all blocks (memory accounting).
  long stored_scalars() const;

  const Matrix& block_s(int i) const { return blocks_[i].s; }
  const Matrix& block_y(int i) const { return blocks_[i].y; }
  const Matrix& block_r(int i) const { return blocks_[i].r; }

private:
  struct Block {
    Matrix s;
    Matrix y;
    Eigen::PartialPivLU<Matrix> sty_lu; // factorization of S^T Y
    Matrix r;                            // S (S^T Y)^{-1}
  };
  int capacity_;
  double gamma_;
  std::deque<Block> blocks_;
};

/// gamma selection: constant, or multisecant self-scaling
/// tr(Y^T S) / tr(S^T H S) with H applied column-wise.
struct GammaChoice {
  double gamma;
  bool fallback; // selection failed, previous value kept
};
GammaChoice gamma_select(GammaMode mode, const Matrix& s, const Matrix& y,
                         const kernels::MatVec& h_apply, double constant_value,
                         double previous);

/// Limited-memory multisecant BFGS driver with the tail-term diagonal shift:
/// d_t from the two-loop, mu_t certifying the newest block's tail term, step
/// x_{t+1} = x_t - alpha (d_t + mu_t g_t).
RunResult run_lms_bfgs(const problems::ProblemInstance& p, const SolverConfig& cfg,
                       const IterationObserver& observer = {});

} // namespace amsqn
