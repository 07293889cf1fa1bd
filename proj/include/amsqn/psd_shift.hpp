#pragma once

#include "amsqn/ms_updates.hpp"
#include "amsqn/types.hpp"

#include <vector>

namespace amsqn {

struct ShiftParams {
  double c = 0.5;           // off-diagonal contraction, must lie in (0, 1)
  double mu0 = 1e-3;        // first shift candidate
  double lambda_tol = 1e-15;
  double doubling = 2.0;
  int max_doublings = 60;
};

/// Shift bookkeeping for mu-correction: the "surplus PSD" estimate and the
/// history of applied shifts.
struct MuLedger {
  double surplus = 0.0;          // mu_hat >= 0
  int period = 0;                // nu; 0 disables correction
  std::vector<double> applied;   // per-iteration applied mu_t
};

/// The 2r x 2r test matrix whose PSD-ness is equivalent to PSD-ness of
/// Delta + mu I, where Delta = (D1 W^{-1} D2^T + transpose)/2. Never touches
/// an n x n matrix beyond the 2r x 2r Gram of [D1 D2].
Matrix h2_matrix(const Matrix& d1, const Matrix& d2, const Matrix& w, double mu,
                 const ShiftParams& params = {});

/// Doubling search for mu with Delta + mu I PSD, starting at params.mu0.
double compute_mu(const Matrix& d1, const Matrix& d2, const Matrix& w,
                  const ShiftParams& params = {});

struct CorrectedMu {
  double mu;        // applied shift
  MuLedger ledger;  // updated bookkeeping
  bool refreshed;   // surplus was re-estimated this iteration
};

/// Consumes surplus PSD to taper the applied shift; every `ledger.period`
/// iterations the surplus is re-estimated from the current estimate.
CorrectedMu correct_mu(MuLedger ledger, double mu_tilde, const HessianState& h,
                       long iter);

/// min(alpha, 1/mu) in inverse mode when enabled, alpha otherwise.
double mu_scaled_alpha(double alpha, double mu, bool enabled, HessianMode mode);

/// Clamps negative eigenvalues to zero (Frobenius-nearest PSD matrix).
HessianState psd_projection(const HessianState& h);

} // namespace amsqn
