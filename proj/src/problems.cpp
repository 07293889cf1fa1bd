#include "amsqn/problems.hpp"

#include "amsqn/matrix_kernels.hpp"
#include "amsqn/rng.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace amsqn::problems {

namespace {

double softplus(double u) {
  // log(1 + e^u), stable on both tails
  if (u > 0) return u + std::log1p(std::exp(-u));
  return std::log1p(std::exp(u));
}

double sigmoid(double u) {
  if (u >= 0) return 1.0 / (1.0 + std::exp(-u));
  const double e = std::exp(u);
  return e / (1.0 + e);
}

void check_dim(const ProblemInstance& p, const Vector& x, const char* who) {
  if (x.size() != p.dimension()) {
    std::ostringstream os;
    os << who << ": dimension mismatch, expected " << p.dimension() << ", got "
       << x.size();
    throw std::invalid_argument(os.str());
  }
}

struct MlpShape {
  Index n_in;
  Index hidden;
  Index w1_size() const { return n_in * hidden; }
  Index total() const { return n_in * hidden + hidden + hidden + 1; }
};

MlpShape mlp_shape(const ProblemInstance& p) {
  return MlpShape{p.a.cols(), p.hidden};
}

// Parameter layout: [W1 (hidden x n_in, column-major), b1, w2, b2].
struct MlpView {
  Eigen::Map<const Matrix> w1;
  Eigen::Map<const Vector> b1;
  Eigen::Map<const Vector> w2;
  double b2;
};

MlpView mlp_view(const MlpShape& s, const Vector& x) {
  const double* d = x.data();
  return MlpView{Eigen::Map<const Matrix>(d, s.hidden, s.n_in),
                 Eigen::Map<const Vector>(d + s.w1_size(), s.hidden),
                 Eigen::Map<const Vector>(d + s.w1_size() + s.hidden, s.hidden),
                 x[s.total() - 1]};
}

} // namespace

std::string to_string(ProblemKind k) {
  switch (k) {
    case ProblemKind::logreg: return "logreg";
    case ProblemKind::porder: return "porder";
    case ProblemKind::xent: return "xent";
    case ProblemKind::quadratic: return "quadratic";
    case ProblemKind::mlp_binary: return "mlp-binary";
  }
  return "?";
}

std::string to_string(SignalRegime r) {
  return r == SignalRegime::high ? "high" : "low";
}

ProblemKind problem_kind_from_string(const std::string& s) {
  if (s == "logreg") return ProblemKind::logreg;
  if (s == "porder") return ProblemKind::porder;
  if (s == "xent") return ProblemKind::xent;
  if (s == "quadratic") return ProblemKind::quadratic;
  if (s == "mlp-binary" || s == "mlp") return ProblemKind::mlp_binary;
  throw std::invalid_argument("unknown problem kind: " + s);
}

SignalRegime regime_from_string(const std::string& s) {
  if (s == "high") return SignalRegime::high;
  if (s == "low") return SignalRegime::low;
  throw std::invalid_argument("unknown signal regime: " + s);
}

Index ProblemInstance::dimension() const {
  switch (kind) {
    case ProblemKind::xent: return a.cols() * n_classes;
    case ProblemKind::mlp_binary: {
      const Index h = hidden;
      return a.cols() * h + h + h + 1;
    }
    default: return a.cols();
  }
}

double data_decay(double cbar, Index j, Index n) {
  return std::exp(-cbar * static_cast<double>(j) / static_cast<double>(n));
}

double power_iteration_norm(const Matrix& m, int max_iter, double tol) {
  if (m.size() == 0) return 0.0;
  Vector v = Vector::Constant(m.cols(), 1.0 / std::sqrt(double(m.cols())));
  double est = 0.0;
  for (int it = 0; it < max_iter; ++it) {
    Vector w = m.transpose() * (m * v);
    const double nw = w.norm();
    if (nw == 0.0) return 0.0;
    w /= nw;
    const double next = std::sqrt((m * w).squaredNorm());
    if (std::abs(next - est) <= tol * std::max(1.0, next) && it > 2) return next;
    est = next;
    v = w;
  }
  return est;
}

namespace {

double spectral_norm(const Matrix& m) {
  if (std::max(m.rows(), m.cols()) <= 512) {
    const auto dec = kernels::svd(m);
    return dec.sigma.size() > 0 ? dec.sigma[0] : 0.0;
  }
  return power_iteration_norm(m);
}

Vector balanced_labels(Index m, Rng& rng) {
  Vector b(m);
  const Index pos = (m + 1) / 2;
  for (Index i = 0; i < m; ++i) b[i] = i < pos ? 1.0 : -1.0;
  for (Index i = m - 1; i > 0; --i) {
    const Index j = static_cast<Index>(rng.bounded(static_cast<std::uint64_t>(i + 1)));
    std::swap(b[i], b[j]);
  }
  return b;
}

Matrix standard_normal_matrix(Index m, Index n, Rng& rng) {
  // row-major fill order, fixed for reproducibility
  Matrix z(m, n);
  for (Index i = 0; i < m; ++i)
    for (Index j = 0; j < n; ++j) z(i, j) = rng.normal();
  return z;
}

} // namespace

ProblemInstance gen_logreg(Index m, Index n, double cbar, double omega,
                           SignalRegime regime, std::uint64_t seed) {
  if (m < 1 || n < 1) throw std::invalid_argument("gen_logreg: m, n >= 1 required");
  if (!(cbar > 0)) throw std::invalid_argument("gen_logreg: cbar > 0 required");
  Rng zr(seed, Rng::kMatrix);
  Rng lr(seed, Rng::kLabels);
  const Matrix z = standard_normal_matrix(m, n, zr);
  const Vector b = balanced_labels(m, lr);

  ProblemInstance p;
  p.kind = ProblemKind::logreg;
  p.a.resize(m, n);
  for (Index j = 0; j < n; ++j) {
    const double cj = data_decay(cbar, j + 1, n);
    for (Index i = 0; i < m; ++i) {
      const double zij = z(i, j);
      p.a(i, j) = regime == SignalRegime::high
                      ? b[i] * zij + omega * zij * cj
                      : b[i] * zij * (1.0 - cj) + omega * zij * cj;
    }
  }
  p.b = b;
  p.seed = seed;
  p.cbar = cbar;
  p.omega = omega;
  p.regime = regime;
  return p;
}

namespace {

ProblemInstance gen_regression(ProblemKind kind, Index m, Index n, double p_exp,
                               double cbar, double sigma, std::uint64_t seed) {
  Rng zr(seed, Rng::kMatrix);
  Rng xr(seed, Rng::kPlanted);
  Rng nr(seed, Rng::kNoise);

  Matrix a = standard_normal_matrix(m, n, zr);
  for (Index j = 0; j < n; ++j) a.col(j) *= data_decay(cbar, j + 1, n);
  a /= spectral_norm(a);

  Vector x(n);
  for (Index j = 0; j < n; ++j) x[j] = xr.normal();
  Vector noise(m);
  for (Index i = 0; i < m; ++i) noise[i] = nr.normal();

  Vector b = a * x + sigma * noise;
  b /= b.norm();

  ProblemInstance p;
  p.kind = kind;
  p.a = std::move(a);
  p.b = std::move(b);
  p.p = p_exp;
  p.seed = seed;
  p.cbar = cbar;
  p.sigma = sigma;
  p.planted = x;
  return p;
}

} // namespace

ProblemInstance gen_porder(Index m, Index n, double p, double cbar, double sigma,
                           std::uint64_t seed) {
  if (!(p > 1)) throw std::invalid_argument("gen_porder: p > 1 required");
  return gen_regression(ProblemKind::porder, m, n, p, cbar, sigma, seed);
}

ProblemInstance gen_quadratic(Index m, Index n, double cbar, double sigma,
                              std::uint64_t seed) {
  return gen_regression(ProblemKind::quadratic, m, n, 2.0, cbar, sigma, seed);
}

ProblemInstance gen_xent(Index m, Index n, int n_classes, double cbar, double sigma,
                         std::uint64_t seed) {
  if (n_classes < 2) throw std::invalid_argument("gen_xent: n_classes >= 2 required");
  Rng zr(seed, Rng::kMatrix);
  Rng xr(seed, Rng::kPlanted);
  Rng nr(seed, Rng::kNoise);

  Matrix a = standard_normal_matrix(m, n, zr);
  for (Index j = 0; j < n; ++j) a.col(j) *= data_decay(cbar, j + 1, n);
  a /= spectral_norm(a);

  Matrix x(n, n_classes);
  for (Index k = 0; k < n_classes; ++k)
    for (Index j = 0; j < n; ++j) x(j, k) = xr.normal();

  ProblemInstance p;
  p.kind = ProblemKind::xent;
  p.b.resize(m);
  for (Index i = 0; i < m; ++i) {
    Index best = 0;
    double best_v = -std::numeric_limits<double>::infinity();
    for (Index k = 0; k < n_classes; ++k) {
      const double v = a.row(i).dot(x.col(k)) + sigma * nr.normal();
      if (v > best_v) {
        best_v = v;
        best = k;
      }
    }
    p.b[i] = static_cast<double>(best + 1);
  }
  p.a = std::move(a);
  p.n_classes = n_classes;
  p.seed = seed;
  p.cbar = cbar;
  p.sigma = sigma;
  p.planted = Eigen::Map<const Vector>(x.data(), x.size());
  return p;
}

ProblemInstance gen_mlp(Index n_in, int hidden, Index m, std::uint64_t seed) {
  if (n_in < 1 || hidden < 1 || m < 1)
    throw std::invalid_argument("gen_mlp: sizes >= 1 required");
  ProblemInstance data = gen_logreg(m, n_in, 10.0, 10.0, SignalRegime::low, seed);
  ProblemInstance p;
  p.kind = ProblemKind::mlp_binary;
  p.a = std::move(data.a);
  p.b = std::move(data.b);
  p.hidden = hidden;
  p.seed = seed;
  p.cbar = data.cbar;
  p.omega = data.omega;
  p.regime = data.regime;
  return p;
}

Vector default_start(const ProblemInstance& p) {
  if (p.kind == ProblemKind::mlp_binary) {
    Rng ir(p.seed, Rng::kInit);
    Vector x(p.dimension());
    for (Index i = 0; i < x.size(); ++i) x[i] = 0.1 * ir.normal();
    return x;
  }
  return Vector::Zero(p.dimension());
}

// ---------------------------------------------------------------------------
// Serial reference evaluation
// ---------------------------------------------------------------------------

namespace reference {

double eval_f(const ProblemInstance& p, const Vector& x) {
  check_dim(p, x, "eval_f");
  const Index m = p.sample_count();
  switch (p.kind) {
    case ProblemKind::logreg: {
      const Vector t = p.a * x;
      double acc = 0.0;
      for (Index i = 0; i < m; ++i) acc += softplus(-p.b[i] * t[i]);
      return acc / double(m);
    }
    case ProblemKind::porder: {
      const Vector r = p.a * x - p.b;
      double acc = 0.0;
      for (Index i = 0; i < m; ++i) acc += std::pow(std::abs(r[i]), p.p);
      return acc / (2.0 * double(m));
    }
    case ProblemKind::quadratic:
      return (p.a * x - p.b).squaredNorm() / (2.0 * double(m));
    case ProblemKind::xent: {
      Eigen::Map<const Matrix> xm(x.data(), p.a.cols(), p.n_classes);
      double acc = 0.0;
      for (Index i = 0; i < m; ++i) {
        const Vector z = xm.transpose() * p.a.row(i).transpose();
        const double zmax = z.maxCoeff();
        double lse = 0.0;
        for (Index k = 0; k < z.size(); ++k) lse += std::exp(z[k] - zmax);
        lse = zmax + std::log(lse);
        acc += -z[static_cast<Index>(p.b[i]) - 1] + lse;
      }
      return acc;
    }
    case ProblemKind::mlp_binary: {
      const MlpShape s = mlp_shape(p);
      const MlpView v = mlp_view(s, x);
      double acc = 0.0;
      for (Index i = 0; i < m; ++i) {
        const Vector h = (v.w1 * p.a.row(i).transpose() + v.b1).array().tanh();
        const double z = v.w2.dot(h) + v.b2;
        acc += softplus(-p.b[i] * z);
      }
      return acc / double(m);
    }
  }
  throw std::logic_error("eval_f: unreachable");
}

Vector eval_grad(const ProblemInstance& p, const Vector& x) {
  check_dim(p, x, "eval_grad");
  const Index m = p.sample_count();
  switch (p.kind) {
    case ProblemKind::logreg: {
      const Vector t = p.a * x;
      Vector coef(m);
      for (Index i = 0; i < m; ++i) coef[i] = -p.b[i] * sigmoid(-p.b[i] * t[i]);
      return (p.a.transpose() * coef) / double(m);
    }
    case ProblemKind::porder: {
      const Vector r = p.a * x - p.b;
      Vector coef(m);
      for (Index i = 0; i < m; ++i) {
        const double ar = std::abs(r[i]);
        coef[i] = ar == 0.0 ? 0.0
                            : std::pow(ar, p.p - 1.0) * (r[i] > 0 ? 1.0 : -1.0);
      }
      return (p.p / (2.0 * double(m))) * (p.a.transpose() * coef);
    }
    case ProblemKind::quadratic:
      return (p.a.transpose() * (p.a * x - p.b)) / double(m);
    case ProblemKind::xent: {
      const Index n = p.a.cols();
      Eigen::Map<const Matrix> xm(x.data(), n, p.n_classes);
      Matrix g = Matrix::Zero(n, p.n_classes);
      for (Index i = 0; i < m; ++i) {
        Vector z = xm.transpose() * p.a.row(i).transpose();
        const double zmax = z.maxCoeff();
        Vector prob = (z.array() - zmax).exp();
        prob /= prob.sum();
        prob[static_cast<Index>(p.b[i]) - 1] -= 1.0;
        g += p.a.row(i).transpose() * prob.transpose();
      }
      return Eigen::Map<const Vector>(g.data(), g.size());
    }
    case ProblemKind::mlp_binary: {
      const MlpShape s = mlp_shape(p);
      const MlpView v = mlp_view(s, x);
      Vector grad = Vector::Zero(x.size());
      Eigen::Map<Matrix> gw1(grad.data(), s.hidden, s.n_in);
      Eigen::Map<Vector> gb1(grad.data() + s.w1_size(), s.hidden);
      Eigen::Map<Vector> gw2(grad.data() + s.w1_size() + s.hidden, s.hidden);
      double& gb2 = grad[s.total() - 1];
      for (Index i = 0; i < m; ++i) {
        const Vector ai = p.a.row(i).transpose();
        const Vector h = (v.w1 * ai + v.b1).array().tanh();
        const double z = v.w2.dot(h) + v.b2;
        const double dz = -p.b[i] * sigmoid(-p.b[i] * z);
        gw2 += dz * h;
        gb2 += dz;
        const Vector dh = (dz * v.w2.array() * (1.0 - h.array().square())).matrix();
        gw1 += dh * ai.transpose();
        gb1 += dh;
      }
      grad /= double(m);
      return grad;
    }
  }
  throw std::logic_error("eval_grad: unreachable");
}

} // namespace reference

// ---------------------------------------------------------------------------
// Parallel evaluation kernels (per-sample loops, OpenMP reductions)
// ---------------------------------------------------------------------------

namespace {

struct RowChunk {
  Index lo;
  Index len;
};

// static row partition over the current team; whole range when serial
RowChunk thread_chunk(Index m) {
#ifdef _OPENMP
  const Index nth = omp_get_num_threads();
  const Index tid = omp_get_thread_num();
  const Index base = m / nth, rem = m % nth;
  const Index lo = tid * base + std::min<Index>(tid, rem);
  return RowChunk{lo, base + (tid < rem ? 1 : 0)};
#else
  return RowChunk{0, m};
#endif
}

} // namespace

double eval_f(const ProblemInstance& p, const Vector& x) {
  check_dim(p, x, "eval_f");
  const Index m = p.sample_count();
  switch (p.kind) {
    case ProblemKind::logreg:
    case ProblemKind::porder:
    case ProblemKind::quadratic: {
      double acc = 0.0;
#pragma omp parallel reduction(+ : acc)
      {
        const RowChunk c = thread_chunk(m);
        if (c.len > 0) {
          const Vector t = p.a.middleRows(c.lo, c.len) * x;
          for (Index k = 0; k < c.len; ++k) {
            const Index i = c.lo + k;
            if (p.kind == ProblemKind::logreg)
              acc += softplus(-p.b[i] * t[k]);
            else if (p.kind == ProblemKind::quadratic)
              acc += 0.5 * (t[k] - p.b[i]) * (t[k] - p.b[i]);
            else
              acc += 0.5 * std::pow(std::abs(t[k] - p.b[i]), p.p);
          }
        }
      }
      return acc / double(m);
    }
    case ProblemKind::xent: {
      Eigen::Map<const Matrix> xm(x.data(), p.a.cols(), p.n_classes);
      double acc = 0.0;
#pragma omp parallel for reduction(+ : acc) schedule(static)
      for (Index i = 0; i < m; ++i) {
        const Vector z = xm.transpose() * p.a.row(i).transpose();
        const double zmax = z.maxCoeff();
        const double lse = zmax + std::log((z.array() - zmax).exp().sum());
        acc += -z[static_cast<Index>(p.b[i]) - 1] + lse;
      }
      return acc;
    }
    case ProblemKind::mlp_binary: {
      const MlpShape s = mlp_shape(p);
      const MlpView v = mlp_view(s, x);
      double acc = 0.0;
#pragma omp parallel for reduction(+ : acc) schedule(static)
      for (Index i = 0; i < m; ++i) {
        const Vector h = (v.w1 * p.a.row(i).transpose() + v.b1).array().tanh();
        acc += softplus(-p.b[i] * (v.w2.dot(h) + v.b2));
      }
      return acc / double(m);
    }
  }
  throw std::logic_error("eval_f: unreachable");
}

Vector eval_grad(const ProblemInstance& p, const Vector& x) {
  check_dim(p, x, "eval_grad");
  const Index m = p.sample_count();
  switch (p.kind) {
    case ProblemKind::logreg:
    case ProblemKind::porder:
    case ProblemKind::quadratic: {
      Vector g = Vector::Zero(x.size());
#pragma omp parallel
      {
        const RowChunk c = thread_chunk(m);
        if (c.len > 0) {
          const auto rows = p.a.middleRows(c.lo, c.len);
          Vector coef = rows * x;
          for (Index k = 0; k < c.len; ++k) {
            const Index i = c.lo + k;
            if (p.kind == ProblemKind::logreg) {
              coef[k] = -p.b[i] * sigmoid(-p.b[i] * coef[k]);
            } else if (p.kind == ProblemKind::quadratic) {
              coef[k] -= p.b[i];
            } else {
              const double r = coef[k] - p.b[i];
              const double ar = std::abs(r);
              coef[k] = ar == 0.0 ? 0.0
                                  : 0.5 * p.p * std::pow(ar, p.p - 1.0) *
                                        (r > 0 ? 1.0 : -1.0);
            }
          }
          const Vector local = rows.transpose() * coef;
#pragma omp critical
          g += local;
        }
      }
      return g / double(m);
    }
    case ProblemKind::xent: {
      const Index n = p.a.cols();
      Eigen::Map<const Matrix> xm(x.data(), n, p.n_classes);
      Matrix g = Matrix::Zero(n, p.n_classes);
#pragma omp parallel
      {
        Matrix local = Matrix::Zero(n, p.n_classes);
#pragma omp for schedule(static) nowait
        for (Index i = 0; i < m; ++i) {
          Vector z = xm.transpose() * p.a.row(i).transpose();
          const double zmax = z.maxCoeff();
          Vector prob = (z.array() - zmax).exp();
          prob /= prob.sum();
          prob[static_cast<Index>(p.b[i]) - 1] -= 1.0;
          local += p.a.row(i).transpose() * prob.transpose();
        }
#pragma omp critical
        g += local;
      }
      return Eigen::Map<const Vector>(g.data(), g.size());
    }
    case ProblemKind::mlp_binary: {
      const MlpShape s = mlp_shape(p);
      const MlpView v = mlp_view(s, x);
      Vector grad = Vector::Zero(x.size());
#pragma omp parallel
      {
        Vector local = Vector::Zero(x.size());
        Eigen::Map<Matrix> gw1(local.data(), s.hidden, s.n_in);
        Eigen::Map<Vector> gb1(local.data() + s.w1_size(), s.hidden);
        Eigen::Map<Vector> gw2(local.data() + s.w1_size() + s.hidden, s.hidden);
#pragma omp for schedule(static) nowait
        for (Index i = 0; i < m; ++i) {
          const Vector ai = p.a.row(i).transpose();
          const Vector h = (v.w1 * ai + v.b1).array().tanh();
          const double z = v.w2.dot(h) + v.b2;
          const double dz = -p.b[i] * sigmoid(-p.b[i] * z);
          gw2 += dz * h;
          local[s.total() - 1] += dz;
          const Vector dh = (dz * v.w2.array() * (1.0 - h.array().square())).matrix();
          gw1 += dh * ai.transpose();
          gb1 += dh;
        }
#pragma omp critical
        grad += local;
      }
      return grad / double(m);
    }
  }
  throw std::logic_error("eval_grad: unreachable");
}

bool supports_hessian(const ProblemInstance& p) {
  switch (p.kind) {
    case ProblemKind::logreg:
    case ProblemKind::quadratic:
    case ProblemKind::xent: return true;
    case ProblemKind::porder: return p.p >= 2.0;
    case ProblemKind::mlp_binary: return false;
  }
  return false;
}

Matrix eval_hess(const ProblemInstance& p, const Vector& x) {
  check_dim(p, x, "eval_hess");
  if (!supports_hessian(p))
    throw std::invalid_argument("eval_hess: unsupported for kind " +
                                to_string(p.kind) +
                                (p.kind == ProblemKind::porder ? " with p < 2" : ""));
  const Index m = p.sample_count();
  switch (p.kind) {
    case ProblemKind::logreg: {
      const Vector t = p.a * x;
      Vector d(m);
      for (Index i = 0; i < m; ++i) {
        const double s = sigmoid(p.b[i] * t[i]);
        d[i] = s * (1.0 - s);
      }
      return (p.a.transpose() * d.asDiagonal() * p.a) / double(m);
    }
    case ProblemKind::quadratic:
      return (p.a.transpose() * p.a) / double(m);
    case ProblemKind::porder: {
      const Vector r = p.a * x - p.b;
      Vector d(m);
      for (Index i = 0; i < m; ++i)
        d[i] = p.p == 2.0 ? 1.0 : std::pow(std::abs(r[i]), p.p - 2.0);
      return (p.p * (p.p - 1.0) / (2.0 * double(m))) *
             (p.a.transpose() * d.asDiagonal() * p.a);
    }
    case ProblemKind::xent: {
      const Index n = p.a.cols();
      const Index nc = p.n_classes;
      Eigen::Map<const Matrix> xm(x.data(), n, nc);
      Matrix h = Matrix::Zero(n * nc, n * nc);
      for (Index i = 0; i < m; ++i) {
        Vector z = xm.transpose() * p.a.row(i).transpose();
        const double zmax = z.maxCoeff();
        Vector prob = (z.array() - zmax).exp();
        prob /= prob.sum();
        const Matrix outer = p.a.row(i).transpose() * p.a.row(i);
        for (Index k = 0; k < nc; ++k)
          for (Index l = 0; l < nc; ++l) {
            const double w = prob[k] * ((k == l ? 1.0 : 0.0) - prob[l]);
            if (w != 0.0) h.block(k * n, l * n, n, n) += w * outer;
          }
      }
      return h;
    }
    default: break;
  }
  throw std::logic_error("eval_hess: unreachable");
}

} // namespace amsqn::problems
