#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "amsqn/psd_shift.hpp"
#include "amsqn/matrix_kernels.hpp"
#include "amsqn/rng.hpp"
#include "oracles.hpp"

#include <cmath>

using namespace amsqn;

namespace {

struct Triple {
  Matrix d1, d2, w;
};

Triple random_triple(Index n, Index r, Rng& rng) {
  for (;;) {
    Triple t{oracles::random_matrix(n, r, rng), oracles::random_matrix(n, r, rng),
             oracles::random_matrix(r, r, rng)};
    Eigen::JacobiSVD<Matrix> dec(t.w);
    if (dec.singularValues()(r - 1) > 1e-6 * dec.singularValues()(0)) return t;
  }
}

} // namespace

TEST_CASE("the F singular value formula evaluates to the known constant") {
  // c = 0.5 and a singular value of 2 give (-1 + sqrt(1.25)) / 1
  Matrix w = Matrix::Constant(1, 1, 2.0);
  Matrix d = Matrix::Zero(4, 1);
  const Matrix h2 = h2_matrix(d, d, w, 1.0);
  // with D = 0 the test matrix is [[cI, F], [F^T, cI]]
  CHECK(h2(0, 0) == doctest::Approx(0.5));
  CHECK(std::abs(h2(0, 1)) == doctest::Approx((-1.0 + std::sqrt(1.25))));
  CHECK(std::abs(h2(0, 1)) <= 0.5); // S_ii <= c
}

TEST_CASE("zero factors give a PSD test matrix for any mu") {
  Rng rng(1, Rng::kMatrix);
  const Matrix w = oracles::random_matrix(3, 3, rng) + 4.0 * Matrix::Identity(3, 3);
  const Matrix d = Matrix::Zero(6, 3);
  for (double mu : {1e-6, 1e-2, 1.0, 100.0}) {
    const Matrix h2 = h2_matrix(d, d, w, mu);
    CHECK(kernels::eig_min_sym(h2) >= -1e-12);
  }
}

TEST_CASE("h2 verdict agrees with the dense verdict on Delta + mu I") {
  Rng rng(2, Rng::kMatrix);
  int tested = 0;
  while (tested < 100) {
    const Index n = 3 + static_cast<Index>(rng.bounded(38));
    const Index r = 1 + static_cast<Index>(rng.bounded(std::min<Index>(10, n)));
    const auto t = random_triple(n, r, rng);
    const Matrix delta = oracles::dense_delta(t.d1, t.d2, t.w);
    const double lmin = oracles::eig_min_dense(delta);
    const double mu = tested % 2 == 0 ? std::max(1e-3, -lmin * 1.5 + 0.1)
                                      : std::max(1e-3, -lmin * 0.5);
    const double margin =
        oracles::eig_min_dense(delta + mu * Matrix::Identity(n, n));
    if (std::abs(margin) <= 1e-9 * std::max(1.0, delta.norm())) continue;
    const bool dense_psd = margin > 0;
    const Matrix h2 = h2_matrix(t.d1, t.d2, t.w, mu);
    const bool h2_psd = kernels::eig_min_sym(h2) >= -1e-9 * std::max(1.0, h2.norm());
    CHECK(h2_psd == dense_psd);
    tested++;
  }
}

TEST_CASE("h2 construction stays small: no n x n kernel calls") {
  Rng rng(3, Rng::kMatrix);
  const Index n = 400;
  const Index r = 4;
  const auto t = random_triple(n, r, rng);
  kernels::reset_op_stats();
  const double mu = compute_mu(t.d1, t.d2, t.w);
  CHECK(mu > 0);
  const auto& stats = kernels::op_stats();
  CHECK(stats.max_svd_dim <= 2 * r);
  CHECK(stats.max_eig_dim <= 2 * r);
  CHECK(stats.max_solve_dim <= 2 * r);
}

TEST_CASE("compute_mu returns mu0 when the first test passes") {
  ShiftParams params;
  const Matrix w = Matrix::Identity(2, 2);
  const Matrix d = Matrix::Zero(5, 2);
  CHECK(compute_mu(d, d, w, params) == params.mu0);
}

TEST_CASE("compute_mu reproduces the hand-derived doubling schedule") {
  // Delta = (e1 e2^T + e2 e1^T)/4 has lambda_min = -1/4; from 1e-3 the first
  // doubling point at or above 0.25 is 0.256
  Matrix d1 = Matrix::Zero(3, 1);
  d1(0, 0) = 1.0;
  Matrix d2 = Matrix::Zero(3, 1);
  d2(1, 0) = 1.0;
  const Matrix w = Matrix::Constant(1, 1, 2.0);
  const Matrix delta = oracles::dense_delta(d1, d2, w);
  CHECK(oracles::eig_min_dense(delta) == doctest::Approx(-0.25));
  CHECK(compute_mu(d1, d2, w) == doctest::Approx(0.256).epsilon(1e-14));
}

TEST_CASE("compute_mu is sound and within a doubling of tight") {
  Rng rng(4, Rng::kMatrix);
  for (int trial = 0; trial < 200; ++trial) {
    const Index n = 3 + static_cast<Index>(rng.bounded(38));
    const Index r = 1 + static_cast<Index>(rng.bounded(std::min<Index>(10, n)));
    const auto t = random_triple(n, r, rng);
    const double mu = compute_mu(t.d1, t.d2, t.w);
    const Matrix delta = oracles::dense_delta(t.d1, t.d2, t.w);
    const double lmin = oracles::eig_min_dense(delta + mu * Matrix::Identity(n, n));
    CHECK(lmin >= -1e-10 * (1.0 + delta.norm()));
    const double mu_star = std::max(0.0, -oracles::eig_min_dense(delta));
    CHECK(mu <= 2.0 * std::max(1e-3, mu_star) * (1.0 + 1e-12));
  }
}

TEST_CASE("compute_mu rejects singular W") {
  Matrix w = Matrix::Zero(2, 2);
  w(0, 0) = 1.0;
  const Matrix d = Matrix::Ones(4, 2);
  CHECK_THROWS_AS(compute_mu(d, d, w), SingularSystem);
}

TEST_CASE("correct_mu consumes surplus per the update rules") {
  const auto h = HessianState::identity(4, HessianMode::inverse);
  SUBCASE("surplus smaller than the shift") {
    MuLedger ledger;
    ledger.surplus = 0.3;
    const auto out = correct_mu(ledger, 0.5, h, 1);
    CHECK(out.mu == doctest::Approx(0.2));
    CHECK(out.ledger.surplus == doctest::Approx(0.0));
    CHECK(out.ledger.applied.back() == doctest::Approx(0.2));
  }
  SUBCASE("surplus larger than the shift") {
    MuLedger ledger;
    ledger.surplus = 0.5;
    const auto out = correct_mu(ledger, 0.1, h, 1);
    CHECK(out.mu == doctest::Approx(0.0));
    CHECK(out.ledger.surplus == doctest::Approx(0.4));
  }
}

TEST_CASE("correct_mu refreshes the surplus every period") {
  HessianState h{3.0 * Matrix::Identity(4, 4), HessianMode::inverse};
  MuLedger ledger;
  ledger.period = 2;
  ledger.surplus = 0.0;
  auto out = correct_mu(ledger, 1.0, h, 1); // 1 % 2 != 0: no refresh
  CHECK(!out.refreshed);
  CHECK(out.mu == doctest::Approx(1.0));
  out = correct_mu(out.ledger, 1.0, h, 2); // refresh: surplus = 3
  CHECK(out.refreshed);
  CHECK(out.mu == doctest::Approx(0.0));
  CHECK(out.ledger.surplus == doctest::Approx(2.0));
}

TEST_CASE("surplus refresh clamps negative eigenvalues at zero") {
  Matrix m = Matrix::Identity(3, 3);
  m(2, 2) = -5.0;
  HessianState h{m, HessianMode::inverse};
  MuLedger ledger;
  ledger.period = 1;
  const auto out = correct_mu(ledger, 0.7, h, 3);
  CHECK(out.ledger.surplus == 0.0);
  CHECK(out.mu == doctest::Approx(0.7));
}

TEST_CASE("mu_scaled_alpha") {
  CHECK(mu_scaled_alpha(1.0, 4.0, true, HessianMode::inverse) == doctest::Approx(0.25));
  CHECK(mu_scaled_alpha(1.0, 0.0, true, HessianMode::inverse) == 1.0);
  CHECK(mu_scaled_alpha(1.0, 4.0, false, HessianMode::inverse) == 1.0);
  CHECK(mu_scaled_alpha(1.0, 4.0, true, HessianMode::direct) == 1.0);
  CHECK(mu_scaled_alpha(0.1, 4.0, true, HessianMode::inverse) == doctest::Approx(0.1));
  CHECK_THROWS_AS(mu_scaled_alpha(0.0, 1.0, true, HessianMode::inverse),
                  std::invalid_argument);
}

TEST_CASE("psd_projection clamps negative eigenvalues") {
  Matrix m = Matrix::Zero(2, 2);
  m(0, 0) = 2.0;
  m(1, 1) = -3.0;
  const auto out = psd_projection(HessianState{m, HessianMode::direct});
  CHECK(out.m(0, 0) == doctest::Approx(2.0));
  CHECK(out.m(1, 1) == doctest::Approx(0.0));

  Rng rng(5, Rng::kMatrix);
  const Matrix spd = oracles::random_spd(5, rng);
  const auto same = psd_projection(HessianState{spd, HessianMode::direct});
  CHECK((same.m - spd).norm() <= 1e-10 * spd.norm());
}

TEST_CASE("psd_projection is the Frobenius-nearest PSD matrix") {
  Rng rng(6, Rng::kMatrix);
  for (int trial = 0; trial < 10; ++trial) {
    Matrix m = oracles::random_matrix(6, 6, rng);
    m = (0.5 * (m + m.transpose())).eval();
    const auto out = psd_projection(HessianState{m, HessianMode::direct});
    Eigen::SelfAdjointEigenSolver<Matrix> es(m);
    const Matrix want = es.eigenvectors() *
                        es.eigenvalues().cwiseMax(0.0).asDiagonal() *
                        es.eigenvectors().transpose();
    CHECK((out.m - want).norm() <= 1e-10 * std::max(1.0, want.norm()));
    CHECK(oracles::eig_min_dense(out.m) >= -1e-12 * std::max(1.0, out.m.norm()));
  }
}

TEST_CASE("shift params are validated") {
  ShiftParams bad;
  bad.c = 1.5;
  const Matrix w = Matrix::Identity(1, 1);
  const Matrix d = Matrix::Zero(2, 1);
  CHECK_THROWS_AS(compute_mu(d, d, w, bad), std::invalid_argument);
  CHECK_THROWS_AS(h2_matrix(d, d, w, 0.0), std::invalid_argument); // mu must be > 0
}

TEST_CASE("scaled steps stay within (0, alpha]") {
  Rng rng(7, Rng::kMatrix);
  for (int k = 0; k < 200; ++k) {
    const double alpha = 0.01 + 2.0 * rng.uniform();
    const double mu = rng.uniform() < 0.3 ? 0.0 : 100.0 * rng.uniform();
    const bool enabled = rng.uniform() < 0.5;
    const auto mode = rng.uniform() < 0.5 ? HessianMode::direct : HessianMode::inverse;
    const double out = mu_scaled_alpha(alpha, mu, enabled, mode);
    CHECK(out > 0.0);
    CHECK(out <= alpha);
  }
}
