#pragma once

#include "amsqn/types.hpp"

namespace amsqn {

enum class QnMethod { broyden, psb, dfp, bfgs };
enum class HessianMode { direct, inverse };

/// Dense symmetric n x n estimate; in inverse mode the matrix is read as
/// B^{-1}.
struct HessianState {
  Matrix m;
  HessianMode mode = HessianMode::direct;

  static HessianState identity(Index n, HessianMode mode) {
    return HessianState{Matrix::Identity(n, n), mode};
  }
};

/// One low-rank update H + D1 W^{-1} D2^T, before symmetrization. The rank r
/// is q for Broyden and 2q for PSB/DFP/BFGS.
struct LowRankFactors {
  Matrix d1;
  Matrix d2;
  Matrix w;
  QnMethod method = QnMethod::bfgs;
  Index rank() const { return w.rows(); }
};

/// Applies the multisecant update densely in direct mode. Satisfies the
/// multisecant condition B_new S = Y for all four methods.
HessianState direct_update(QnMethod method, const HessianState& b,
                           const Matrix& s, const Matrix& y);

/// Update factors for the current mode. In direct mode these reproduce the
/// direct_update term; in inverse mode they are the Woodbury mirror such
/// that symmetrize(H + D1 W^{-1} D2^T) equals the dense inverse of the
/// (Broyden/BFGS) direct update or of the symmetrized-direct (PSB/DFP)
/// update.
LowRankFactors update_factors(QnMethod method, const HessianState& h,
                              const Matrix& s, const Matrix& y);

/// H' = H + (D1 W^{-1} D2^T + transpose)/2 + mu I, exactly symmetric.
HessianState apply_symmetrized(const HessianState& h, const LowRankFactors& f,
                               double mu);

/// H' = H + D1 W^{-1} D2^T, no symmetrization (vanilla update path).
HessianState apply_factors(const HessianState& h, const LowRankFactors& f);

/// S^T B S evaluated from the stored inverse (B = Hinv^{-1}) via one linear
/// solve, without forming B.
Matrix sbs_from_inverse(const Matrix& hinv, const Matrix& s);

} // namespace amsqn
