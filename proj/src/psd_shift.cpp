#include "amsqn/psd_shift.hpp"

#include "amsqn/matrix_kernels.hpp"

#include <limits>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace amsqn {

namespace {

void check_params(const ShiftParams& p) {
  if (!(p.c > 0.0 && p.c < 1.0))
    throw std::invalid_argument("ShiftParams: c must lie in (0, 1)");
  if (!(p.mu0 > 0.0)) throw std::invalid_argument("ShiftParams: mu0 must be > 0");
  if (!(p.doubling > 1.0))
    throw std::invalid_argument("ShiftParams: doubling factor must be > 1");
}

// mu-independent pieces of the test matrix, built once per compute_mu call.
struct H2Workspace {
  Matrix k;    // [[cI, F], [F^T, cI]]
  Matrix cinv; // exact closed form, PD
  Matrix g;    // Gram of [D1 D2]
  Index r;
};

H2Workspace build_workspace(const Matrix& d1, const Matrix& d2, const Matrix& w,
                            const ShiftParams& params) {
  if (w.rows() != w.cols()) throw std::invalid_argument("h2_matrix: W must be square");
  if (d1.cols() != w.rows() || d2.cols() != w.rows())
    throw std::invalid_argument("h2_matrix: D1/D2 column count must match W");
  if (d1.rows() != d2.rows())
    throw std::invalid_argument("h2_matrix: D1/D2 row count mismatch");

  const Index r = w.rows();
  const double c = params.c;
  const auto dec = kernels::svd(w);
  const double sig_max = dec.sigma.size() > 0 ? dec.sigma[0] : 0.0;
  if (!(sig_max > 0) || dec.sigma[r - 1] <= 1e-14 * sig_max)
    throw SingularSystem("h2_matrix: W is singular",
                         sig_max > 0 ? sig_max / dec.sigma[r - 1]
                                     : std::numeric_limits<double>::infinity());

  // Singular values of F: s_i = (-1 + sqrt(1 + 4 c^2 / sigma_i^2)) / (2 / sigma_i),
  // always < c, which keeps [[cI, F],[F^T, cI]] PSD for c < 1.
  Vector sf(r);
  for (Index i = 0; i < r; ++i) {
    const double inv_sigma = 1.0 / dec.sigma[i];
    sf[i] = (-1.0 + std::sqrt(1.0 + 4.0 * c * c * inv_sigma * inv_sigma)) /
            (2.0 * inv_sigma);
    if (!(sf[i] <= c))
      throw std::logic_error("h2_matrix: S_ii <= c violated");
  }
  const Matrix f = dec.v * sf.asDiagonal() * dec.u.transpose();

  H2Workspace ws;
  ws.r = r;
  ws.k.resize(2 * r, 2 * r);
  ws.k << c * Matrix::Identity(r, r), f,
          f.transpose(), c * Matrix::Identity(r, r);

  // C from the theorem block-diagonalizes exactly in the [V 0; 0 U] basis
  // with eigenvalue c / (c^2 - s_i^2) twice per i, so C^{-1} is available in
  // closed form.
  Vector dinv(r);
  for (Index i = 0; i < r; ++i) dinv[i] = (c * c - sf[i] * sf[i]) / c;
  ws.cinv.resize(2 * r, 2 * r);
  ws.cinv.topLeftCorner(r, r) = dec.v * dinv.asDiagonal() * dec.v.transpose();
  ws.cinv.topRightCorner(r, r).setZero();
  ws.cinv.bottomLeftCorner(r, r).setZero();
  ws.cinv.bottomRightCorner(r, r) = dec.u * dinv.asDiagonal() * dec.u.transpose();

  Matrix j(d1.rows(), 2 * r);
  j << d1, d2;
  ws.g = j.transpose() * j;
  return ws;
}

Matrix h2_eval(const H2Workspace& ws, double mu) {
  if (!(mu > 0)) throw std::invalid_argument("h2_matrix: mu must be > 0");
  const Matrix m = 2.0 * mu * ws.cinv + ws.g;
  const Matrix x = kernels::solve(m, ws.g);
  Matrix h2 = ws.k - (ws.g - ws.g * x) / (2.0 * mu);
  return 0.5 * (h2 + h2.transpose());
}

} // namespace

Matrix h2_matrix(const Matrix& d1, const Matrix& d2, const Matrix& w, double mu,
                 const ShiftParams& params) {
  check_params(params);
  return h2_eval(build_workspace(d1, d2, w, params), mu);
}

double compute_mu(const Matrix& d1, const Matrix& d2, const Matrix& w,
                  const ShiftParams& params) {
  check_params(params);
  const H2Workspace ws = build_workspace(d1, d2, w, params);
  double mu = params.mu0;
  for (int k = 0; k <= params.max_doublings; ++k) {
    if (kernels::eig_min_sym(h2_eval(ws, mu)) >= params.lambda_tol) return mu;
    mu *= params.doubling;
  }
  std::ostringstream os;
  os << "compute_mu: no PSD certificate after " << params.max_doublings
     << " doublings from mu0 = " << params.mu0 << " (reached mu = " << mu
     << ", rank " << ws.r << ")";
  throw std::runtime_error(os.str());
}

CorrectedMu correct_mu(MuLedger ledger, double mu_tilde, const HessianState& h,
                       long iter) {
  if (mu_tilde < 0)
    throw std::invalid_argument("correct_mu: mu_tilde must be >= 0");
  bool refreshed = false;
  if (ledger.period > 0 && iter % ledger.period == 0) {
    const Matrix sym = 0.5 * (h.m + h.m.transpose());
    ledger.surplus = std::max(0.0, kernels::eig_min_sym_auto(sym));
    refreshed = true;
  }
  const double delta = std::min(mu_tilde, ledger.surplus);
  const double mu = mu_tilde - delta;
  ledger.surplus -= delta;
  ledger.applied.push_back(mu);
  return CorrectedMu{mu, std::move(ledger), refreshed};
}

double mu_scaled_alpha(double alpha, double mu, bool enabled, HessianMode mode) {
  if (!(alpha > 0)) throw std::invalid_argument("mu_scaled_alpha: alpha must be > 0");
  if (!enabled || mode == HessianMode::direct || mu <= 0) return alpha;
  return std::min(alpha, 1.0 / mu);
}

HessianState psd_projection(const HessianState& h) {
  const Matrix sym = 0.5 * (h.m + h.m.transpose());
  const auto eig = kernels::eig_sym(sym);
  Vector clamped = eig.values.cwiseMax(0.0);
  HessianState out = h;
  out.m = eig.vectors * clamped.asDiagonal() * eig.vectors.transpose();
  out.m = (0.5 * (out.m + out.m.transpose())).eval();
  return out;
}

} // namespace amsqn
