#include "test_support.hpp"

#include <gtest/gtest.h>

using namespace laic;
using namespace laic::diag;
using laic::testing::random_matrix;
using laic::testing::random_spd;

namespace {

LinearGaussianSystem two_dim_system(RngStream& rng) {
  LinearGaussianSystem s;
  s.M = 0.5 * random_matrix(2, 2, rng) + 0.4 * Matrix::Identity(2, 2);
  s.H = Matrix::Identity(2, 2);
  s.Qs = random_spd(2, rng, 0.3);
  s.R = random_spd(2, rng, 0.3);
  return s;
}

/// Scalar steady-state Riccati root: P^2 + P (r - m^2 r - q) - q r = 0.
double scalar_riccati(double m, double q, double r) {
  const double b = r - m * m * r - q;
  return 0.5 * (-b + std::sqrt(b * b + 4.0 * q * r));
}

/// Direct simulation of the cycle recursion
///   eps^f_{n+1} = M ((I - KH) eps^f_n + K eps^o_n) + eps^q_n + eta_n,
///   dx_n = K (eps^o_n - H eps^f_n),
/// returning increments at cycles burn, burn+1, ..., burn+kmax per replicate.
std::vector<std::vector<Vector>> simulate(const LinearGaussianSystem& s, const Matrix& K, double rho,
                                          const Matrix& ar_noise, int replicates, int burn, int kmax,
                                          std::uint64_t seed) {
  const Eigen::Index d = s.M.rows();
  const RealizedCovariance Q(s.Qs), R(s.R);
  const bool ar = ar_noise.size() > 0;
  std::optional<RealizedCovariance> W;
  if (ar) W.emplace(ar_noise);
  RngStream rng(seed);
  std::vector<std::vector<Vector>> out(static_cast<std::size_t>(kmax) + 1);
  const Matrix I = Matrix::Identity(d, d);
  for (int r = 0; r < replicates; ++r) {
    Vector ef = Vector::Zero(d);
    Vector eta = ar ? Vector(W->sample(rng) / std::sqrt(1.0 - rho * rho)) : Vector(Vector::Zero(d));
    for (int n = 0; n <= burn + kmax; ++n) {
      const Vector eo = R.sample(rng);
      const Vector dx = K * (eo - s.H * ef);
      if (n >= burn) out[static_cast<std::size_t>(n - burn)].push_back(dx);
      const Vector mean = s.forcing.mean_at(n, d);
      ef = s.M * ((I - K * s.H) * ef + K * eo) + Q.sample(rng) + eta + mean;
      if (ar) eta = rho * eta + W->sample(rng);
    }
  }
  return out;
}

}  // namespace

TEST(Oracle, OptimalGainWhiteErrorLagsVanish) {
  RngStream rng(1);
  for (int trial = 0; trial < 5; ++trial) {
    LinearGaussianSystem s;
    s.M = 0.4 * random_matrix(4, 4, rng);
    s.H = trial % 2 ? Matrix(Matrix::Identity(4, 4)) : random_matrix(2, 4, rng);
    s.Qs = random_spd(4, rng);
    s.R = random_spd(static_cast<int>(s.H.rows()), rng);
    const auto res = moment_oracle(s, 4);
    for (int k = 1; k <= 4; ++k) EXPECT_LE(res.lag_covariance[k].norm(), 1e-12 * res.lag_covariance[0].norm());
  }
}

TEST(Oracle, SuboptimalGainLagsDoNotVanish) {
  RngStream rng(2);
  auto s = two_dim_system(rng);
  const Matrix K = da::steady_state_kalman(s.M, s.H, s.Qs, s.R).K;
  s.gain = 0.5 * K;
  const auto res = moment_oracle(s, 1);
  EXPECT_GT(res.lag_covariance[1].norm(), 1e-3 * res.lag_covariance[0].norm());
}

TEST(Oracle, ScalarConstantBiasClosedForm) {
  const double m = 0.9, q = 0.2, r = 0.5, c = 0.3;
  LinearGaussianSystem s;
  s.M = Matrix::Constant(1, 1, m);
  s.H = Matrix::Identity(1, 1);
  s.Qs = Matrix::Constant(1, 1, q);
  s.R = Matrix::Constant(1, 1, r);
  s.forcing.constant = Vector::Constant(1, c);
  const auto res = moment_oracle(s, 2);
  const double P = scalar_riccati(m, q, r);
  const double K = P / (P + r);
  EXPECT_NEAR(res.gain(0, 0), K, 1e-12);
  // Mean forecast error solves mu = m (1 - K) mu + c; the increment mean is -K mu.
  const double expected = -K * c / (1.0 - m * (1.0 - K));
  ASSERT_EQ(res.period(), 1);
  EXPECT_NEAR(res.phase_mean_increment[0][0], expected, 1e-12);
  // Stationary forecast variance equals the Riccati root and lag-0 is K^2 (P + r).
  EXPECT_NEAR(res.forecast_error_cov(0, 0), P, 1e-12);
  EXPECT_NEAR(res.lag_covariance[0](0, 0), K * K * (P + r), 1e-12);
  EXPECT_NEAR(std::abs(res.lag_covariance[1](0, 0)), 0.0, 1e-12);
}

TEST(Oracle, DiurnalSignStructure) {
  LinearGaussianSystem s;
  s.M = Matrix::Constant(1, 1, 0.8);
  s.H = Matrix::Identity(1, 1);
  s.Qs = Matrix::Constant(1, 1, 0.01);
  s.R = Matrix::Constant(1, 1, 0.05);
  s.forcing.periodic = {Vector::Constant(1, 1.0), Vector::Constant(1, -1.0)};
  const auto res = moment_oracle(s, 2);
  ASSERT_EQ(res.period(), 2);
  EXPECT_LT(res.time_mean_lag_covariance[1](0, 0), 0.0);
  EXPECT_GT(res.time_mean_lag_covariance[2](0, 0), 0.0);
  EXPECT_LT(res.phase_mean_increment[0][0] * res.phase_mean_increment[1][0], 0.0);
  EXPECT_NEAR(res.phase_mean_increment[0][0], -res.phase_mean_increment[1][0], 1e-12);
}

TEST(Oracle, NonContractingRecursionReportsRadius) {
  LinearGaussianSystem s;
  s.M = Matrix::Constant(1, 1, 2.0);
  s.H = Matrix::Identity(1, 1);
  s.Qs = Matrix::Identity(1, 1);
  s.R = Matrix::Identity(1, 1);
  s.gain = Matrix::Zero(1, 1);
  try {
    moment_oracle(s, 1);
    FAIL() << "expected a numerical error";
  } catch (const NumericalError& e) {
    EXPECT_NE(std::string(e.what()).find("spectral radius"), std::string::npos);
  }
}

TEST(Oracle, ShapeChecks) {
  LinearGaussianSystem s;
  s.M = Matrix::Identity(2, 2);
  s.H = Matrix::Identity(1, 2);
  s.Qs = Matrix::Identity(2, 2);
  s.R = Matrix::Identity(2, 2);
  EXPECT_THROW(moment_oracle(s, 1), DimensionError);
}

TEST(Oracle, Ar1LeadingTermWithinBound) {
  LinearGaussianSystem s;
  s.M = 0.9 * laic::testing::circulant({0.25, 0.5, 0.25}, 4);
  s.H = Matrix::Identity(4, 4);
  s.Qs = Matrix::Identity(4, 4);
  s.R = 0.05 * Matrix::Identity(4, 4);
  s.forcing.ar1.push_back({0.8, 0.036 * Matrix::Identity(4, 4)});
  const auto res = moment_oracle(s, 3);
  EXPECT_LE(spectral_radius(res.contraction), 0.7);
  const auto dec = decompose_lag1(s, res);
  EXPECT_LT(dec.relative_error(), dec.relative_bound());
  EXPECT_LT(dec.relative_error(), 0.15);

  std::vector<Matrix> eta;
  for (int j = 0; j <= 3; ++j) eta.push_back(s.forcing.lag_moment(j, 4));
  const Matrix one = theoretical_lagk_laic(res.gain, s.H, s.M, eta, 2, 1);
  const Matrix two = theoretical_lagk_laic(res.gain, s.H, s.M, eta, 2, 2);
  EXPECT_LT((res.lag_covariance[2] - two).norm(), (res.lag_covariance[2] - one).norm());
}

TEST(Oracle, DecompositionNeedsZeroMean) {
  LinearGaussianSystem s;
  s.M = Matrix::Constant(1, 1, 0.5);
  s.H = s.Qs = s.R = Matrix::Identity(1, 1);
  s.forcing.constant = Vector::Ones(1);
  const auto res = moment_oracle(s, 1);
  EXPECT_THROW(decompose_lag1(s, res), Error);
}

TEST(Oracle, MatchesMonteCarloAr1) {
  RngStream rng(3);
  auto s = two_dim_system(rng);
  const double rho = 0.8;
  const Matrix noise = random_spd(2, rng, 0.2) * 0.3;
  s.forcing.ar1.push_back({rho, noise / (1.0 - rho * rho)});
  s.forcing.constant = Vector::Constant(2, 0.1);
  const int kmax = 3;
  const auto res = moment_oracle(s, kmax);
  const int N = 100000;
  const auto samples = simulate(s, res.gain, rho, noise, N, 60, kmax, 17);
  for (int k = 0; k <= kmax; ++k) {
    const auto est = laic_ensemble(samples[static_cast<std::size_t>(k)], samples[0], k);
    const Matrix& exact = res.lag_covariance[static_cast<std::size_t>(k)];
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j)
        EXPECT_LE(std::abs(est.matrix(i, j) - exact(i, j)), 5.0 * est.standard_error(i, j)) << "lag " << k;
    if (k <= 1) EXPECT_LE((est.matrix - exact).norm(), 0.05 * exact.norm()) << "lag " << k;
  }
  Vector mean = Vector::Zero(2);
  for (const auto& v : samples[0]) mean += v;
  mean /= N;
  const Vector se = (res.lag_covariance[0].diagonal() / N).cwiseSqrt();
  for (int i = 0; i < 2; ++i) EXPECT_LE(std::abs(mean[i] - res.phase_mean_increment[0][i]), 5.0 * se[i]);
}

TEST(Oracle, MatchesMonteCarloDiurnalPhaseMeans) {
  RngStream rng(4);
  auto s = two_dim_system(rng);
  s.forcing.periodic = {Vector::Constant(2, 0.5), Vector::Constant(2, -0.5)};
  const auto res = moment_oracle(s, 2);
  const int N = 20000;
  const auto samples = simulate(s, res.gain, 0.0, Matrix(), N, 60, 1, 5);
  for (int ph = 0; ph < 2; ++ph) {
    Vector mean = Vector::Zero(2);
    for (const auto& v : samples[static_cast<std::size_t>(ph)]) mean += v;
    mean /= N;
    const Vector se = (res.lag_covariance[0].diagonal() / N).cwiseSqrt();
    // Cycle 60 is phase 0 of the forcing.
    for (int i = 0; i < 2; ++i)
      EXPECT_LE(std::abs(mean[i] - res.phase_mean_increment[static_cast<std::size_t>(ph)][i]), 5.0 * se[i]);
  }
}
