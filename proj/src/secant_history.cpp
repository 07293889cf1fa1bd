#include "amsqn/secant_history.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

namespace amsqn {

void SecantHistory::push(const Vector& x, const Vector& g) {
  if (!window_.empty() && (x.size() != window_.front().first.size() ||
                           g.size() != window_.front().second.size()))
    throw std::invalid_argument("SecantHistory::push: dimension mismatch");
  window_.emplace_back(x, g);
  while (static_cast<Index>(window_.size()) > capacity_) window_.pop_front();
}

SecantBlock SecantHistory::assemble() const {
  const Index w = size();
  if (w < 2)
    throw std::logic_error("SecantHistory::assemble: need at least two entries");
  const Index n = window_.front().first.size();
  const Index r = w - 1;
  SecantBlock blk;
  blk.s.resize(n, r);
  blk.y.resize(n, r);
  if (mode_ == SecantMode::curve) {
    for (Index i = 0; i < r; ++i) {
      blk.s.col(i) = window_[i + 1].first - window_[i].first;
      blk.y.col(i) = window_[i + 1].second - window_[i].second;
    }
  } else {
    const auto& latest = window_[w - 1];
    for (Index i = 0; i < r; ++i) {
      blk.s.col(i) = latest.first - window_[i].first;
      blk.y.col(i) = latest.second - window_[i].second;
    }
  }
  return blk;
}

SecantBlock reject(const SecantBlock& blk, double eps, bool literal_rule) {
  if (!(eps > 0.0 && eps < 1.0))
    throw std::invalid_argument("reject: eps must lie in (0, 1)");
  const Index r = blk.cols();
  if (r <= 1) return blk;

  std::vector<Index> kept;
  kept.reserve(r);
  for (Index c = r - 1; c >= 0; --c) { // newest first
    const double nc = blk.s.col(c).norm();
    if (kept.empty()) {
      kept.push_back(c); // newest always survives
      continue;
    }
    if (nc == 0.0) continue; // degenerate zero step
    bool ok = true;
    for (Index k : kept) {
      const double nk = blk.s.col(k).norm();
      if (nk == 0.0) continue;
      const double cosv = std::abs(blk.s.col(c).dot(blk.s.col(k))) / (nc * nk);
      const bool rejected = literal_rule ? (cosv <= eps) : (cosv > 1.0 - eps);
      if (rejected) {
        ok = false;
        break;
      }
    }
    if (ok) kept.push_back(c);
  }

  SecantBlock out;
  out.s.resize(blk.s.rows(), static_cast<Index>(kept.size()));
  out.y.resize(blk.y.rows(), static_cast<Index>(kept.size()));
  // restore oldest -> newest order
  Index col = 0;
  for (auto it = kept.rbegin(); it != kept.rend(); ++it, ++col) {
    out.s.col(col) = blk.s.col(*it);
    out.y.col(col) = blk.y.col(*it);
  }
  return out;
}

} // namespace amsqn
