#pragma once

#include "amsqn/types.hpp"

#include <deque>
#include <utility>

namespace amsqn {

enum class SecantMode {
  curve,    // s_i = x_{i+1} - x_i
  anchored, // s_i = x_latest - x_i
};

/// Paired secant blocks; columns ordered oldest -> newest.
struct SecantBlock {
  Matrix s;
  Matrix y;
  Index cols() const { return s.cols(); }
};

/// Window of past (x, gradient) pairs, capacity q+1, oldest evicted first.
class SecantHistory {
public:
  SecantHistory(Index q, SecantMode mode) : capacity_(q + 1), mode_(mode) {}

  void push(const Vector& x, const Vector& g);
  Index size() const { return static_cast<Index>(window_.size()); }
  SecantMode mode() const { return mode_; }
  const std::pair<Vector, Vector>& entry(Index i) const { return window_[i]; }

  /// Builds (S, Y) from the current window; requires at least two entries.
  SecantBlock assemble() const;

private:
  Index capacity_;
  SecantMode mode_;
  std::deque<std::pair<Vector, Vector>> window_;
};

/// Drops near-parallel columns, scanning newest -> oldest and keeping a
/// column only if its cosine with every kept column stays <= 1 - eps in
/// magnitude. The newest column always survives. `literal_rule` switches to
/// the inner-product rule as printed (reject when |cos| <= eps), kept for
/// comparison.
SecantBlock reject(const SecantBlock& blk, double eps, bool literal_rule = false);

} // namespace amsqn
