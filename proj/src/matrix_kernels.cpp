#include "amsqn/matrix_kernels.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <limits>
#include <cmath>
#include <random>
#include <sstream>
#include <vector>

namespace amsqn::kernels {

namespace {

thread_local OpStats g_stats;

void require_finite(const Matrix& a, const char* who) {
  if (!a.allFinite()) {
    std::ostringstream os;
    os << who << ": input has non-finite entries (" << a.rows() << "x"
       << a.cols() << ")";
    throw std::invalid_argument(os.str());
  }
}

} // namespace

OpStats& op_stats() { return g_stats; }

void reset_op_stats() { g_stats = OpStats{}; }

SvdResult svd(const Matrix& a) {
  require_finite(a, "svd");
  g_stats.svd_calls++;
  g_stats.max_svd_dim = std::max(g_stats.max_svd_dim, std::max(a.rows(), a.cols()));
  Eigen::JacobiSVD<Matrix> dec(a, Eigen::ComputeFullU | Eigen::ComputeFullV);
  return SvdResult{dec.matrixU(), dec.singularValues(), dec.matrixV()};
}

double eig_min_sym(const Matrix& a) {
  require_finite(a, "eig_min_sym");
  if (a.rows() != a.cols())
    throw std::invalid_argument("eig_min_sym: matrix must be square");
  const double nrm = a.norm();
  const double asym = (a - a.transpose()).norm();
  if (asym > 1e-8 * std::max(1.0, nrm)) {
    std::ostringstream os;
    os << "eig_min_sym: asymmetry " << asym << " exceeds 1e-8 * ||A||_F";
    throw std::invalid_argument(os.str());
  }
  g_stats.eig_calls++;
  g_stats.max_eig_dim = std::max(g_stats.max_eig_dim, a.rows());
  Eigen::SelfAdjointEigenSolver<Matrix> es(a, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

EigSymResult eig_sym(const Matrix& a) {
  require_finite(a, "eig_sym");
  g_stats.eig_calls++;
  g_stats.max_eig_dim = std::max(g_stats.max_eig_dim, a.rows());
  Eigen::SelfAdjointEigenSolver<Matrix> es(a);
  return EigSymResult{es.eigenvalues(), es.eigenvectors()};
}

Matrix solve(const Matrix& a, const Matrix& b) {
  require_finite(a, "solve");
  require_finite(b, "solve");
  if (a.rows() != a.cols())
    throw std::invalid_argument("solve: A must be square");
  if (a.rows() != b.rows())
    throw std::invalid_argument("solve: dimension mismatch");
  g_stats.solve_calls++;
  g_stats.max_solve_dim = std::max(g_stats.max_solve_dim, a.rows());

  Eigen::PartialPivLU<Matrix> lu(a);
  const double rcond = lu.rcond();
  if (!(rcond > 1.0 / kSolveCondLimit)) {
    std::ostringstream os;
    os << "solve: system rejected, 1-norm condition estimate "
       << (rcond > 0 ? 1.0 / rcond : std::numeric_limits<double>::infinity());
    throw SingularSystem(os.str(),
                         rcond > 0 ? 1.0 / rcond
                                   : std::numeric_limits<double>::infinity());
  }
  Matrix x = lu.solve(b);
  if (!x.allFinite())
    // the estimator can be fooled by exact singularity; the solve cannot
    throw SingularSystem("solve: non-finite solution",
                         std::numeric_limits<double>::infinity());
  return x;
}

namespace {

double dense_eig_min_of_operator(const MatVec& apply, Index n) {
  Matrix a(n, n);
  Vector e = Vector::Zero(n);
  for (Index j = 0; j < n; ++j) {
    e[j] = 1.0;
    a.col(j) = apply(e);
    e[j] = 0.0;
  }
  return eig_min_sym(0.5 * (a + a.transpose()));
}

} // namespace

double eig_min_sym_iterative(const MatVec& apply, Index n, LanczosReport* report,
                             int max_iter) {
  LanczosReport local;
  LanczosReport& rep = report ? *report : local;
  rep = LanczosReport{};

  if (n == 1) {
    Vector e(1);
    e[0] = 1.0;
    rep.converged = true;
    rep.iterations = 1;
    return apply(e)[0];
  }

  max_iter = static_cast<int>(std::min<Index>(n, max_iter));
  // deterministic start vector
  std::mt19937_64 eng(0x2545F4914F6CDD1DULL);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  Vector v(n);
  for (Index i = 0; i < n; ++i) v[i] = unif(eng);
  v.normalize();

  std::vector<Vector> basis;
  basis.reserve(max_iter);
  std::vector<double> alpha, beta;
  alpha.reserve(max_iter);
  beta.reserve(max_iter);

  double theta = 0.0;
  for (int k = 0; k < max_iter; ++k) {
    basis.push_back(v);
    Vector w = apply(v);
    const double a_k = v.dot(w);
    alpha.push_back(a_k);
    w -= a_k * v;
    if (k > 0) w -= beta[k - 1] * basis[k - 1];
    // full reorthogonalization, twice
    for (int pass = 0; pass < 2; ++pass)
      for (const Vector& q : basis) w -= q.dot(w) * q;
    const double b_k = w.norm();

    // Ritz values of the current tridiagonal
    const int m = k + 1;
    Matrix t = Matrix::Zero(m, m);
    for (int i = 0; i < m; ++i) {
      t(i, i) = alpha[i];
      if (i + 1 < m) t(i, i + 1) = t(i + 1, i) = beta[i];
    }
    Eigen::SelfAdjointEigenSolver<Matrix> es(t);
    theta = es.eigenvalues()[0];
    const double resid = b_k * std::abs(es.eigenvectors()(m - 1, 0));
    const double scale =
        std::max(std::abs(es.eigenvalues()[0]), std::abs(es.eigenvalues()[m - 1]));
    rep.iterations = m;
    if (resid <= 1e-10 * std::max(1.0, scale)) {
      rep.converged = true;
      return theta;
    }
    if (b_k <= 1e-14 * std::max(1.0, scale)) {
      // invariant subspace found
      rep.converged = true;
      return theta;
    }
    beta.push_back(b_k);
    v = w / b_k;
  }

  if (static_cast<Index>(max_iter) >= n) {
    // Krylov space exhausted: the tridiagonal spectrum is exact
    rep.converged = true;
    return theta;
  }
  rep.dense_fallback = true;
  return dense_eig_min_of_operator(apply, n);
}

double eig_min_sym_auto(const Matrix& a) {
  if (a.rows() <= kDenseEigMaxDim) return eig_min_sym(a);
  return eig_min_sym_iterative(
      [&a](const Vector& x) -> Vector { return a.selfadjointView<Eigen::Lower>() * x; },
      a.rows());
}

} // namespace amsqn::kernels
