#pragma once

#include <Eigen/Core>

#include <stdexcept>
#include <string>

namespace amsqn {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

/// Thrown by solve() and friends when a system is singular or the 1-norm
/// condition estimate exceeds the rejection threshold. Callers in the
/// optimizer interpret this as "skip this secant block".
class SingularSystem : public std::runtime_error {
public:
  SingularSystem(const std::string& what, double condition_estimate)
      : std::runtime_error(what), cond_(condition_estimate) {}

  double condition() const { return cond_; }

private:
  double cond_;
};

} // namespace amsqn
