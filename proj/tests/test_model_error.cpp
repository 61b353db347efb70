#include "test_support.hpp"

#include <gtest/gtest.h>

using namespace laic;

namespace {

ModelErrorGenerator make(std::vector<ModelErrorTerm> terms, int d, std::uint64_t seed = 1) {
  return ModelErrorGenerator(ModelErrorProcess{std::move(terms), std::nullopt}, Grid{d, 1.0}, RngStream(seed));
}

}  // namespace

TEST(ModelError, ZeroIsExactlyZero) {
  auto gen = make({ZeroError{}}, 5);
  for (long n = 0; n < 50; ++n) EXPECT_EQ(sample_model_error(gen, n), Vector::Zero(5));
}

TEST(ModelError, DiurnalPeriodTwoFlipsSign) {
  const Vector a = Vector::LinSpaced(3, 1.0, 3.0);
  auto gen = make({DiurnalError{a, 2, 0}}, 3);
  EXPECT_EQ(gen.sample(0), a);
  EXPECT_EQ(gen.sample(1), -a);
  EXPECT_EQ(gen.sample(2), a);
}

TEST(ModelError, DiurnalPhaseAndLongerPeriod) {
  const Vector a = Vector::Ones(2);
  auto gen = make({DiurnalError{a, 4, 1}}, 2);
  EXPECT_EQ(gen.sample(0), Vector::Zero(2));
  EXPECT_EQ(gen.sample(1), a);
  EXPECT_EQ(gen.sample(2), Vector::Zero(2));
  EXPECT_EQ(gen.sample(3), -a);
  auto six = make({DiurnalError{a, 6, 0}}, 2);
  six.sample(0);
  EXPECT_NEAR(six.sample(1)[0], 0.5, 1e-15);
}

TEST(ModelError, CompositeSums) {
  const Vector b = Vector::Constant(2, 0.3), a = Vector::Constant(2, 1.0);
  auto gen = make({ConstantBias{b}, DiurnalError{a, 2, 0}}, 2);
  EXPECT_EQ(gen.sample(0), b + a);
  EXPECT_EQ(gen.sample(1), b - a);
}

TEST(ModelError, SequentialAccessEnforced) {
  auto gen = make({ZeroError{}}, 2);
  gen.sample(0);
  EXPECT_THROW(gen.sample(2), Error);
}

TEST(ModelError, Ar1LagOneAutocorrelation) {
  auto gen = make({AR1Error{0.8, diagonal_covariance(1, 1.0)}}, 1, 99);
  const int N = 100000;
  std::vector<double> y(N);
  for (int n = 0; n < N; ++n) y[static_cast<std::size_t>(n)] = gen.sample(n)[0];
  // Direct lag-1 sample correlation, computed independently of the diagnostics module.
  double mu = 0.0;
  for (double v : y) mu += v;
  mu /= N;
  double c0 = 0.0, c1 = 0.0;
  for (int i = 0; i < N; ++i) c0 += (y[i] - mu) * (y[i] - mu);
  for (int i = 0; i + 1 < N; ++i) c1 += (y[i] - mu) * (y[i + 1] - mu);
  EXPECT_NEAR(c1 / c0, 0.8, 0.01);
}

TEST(ModelError, Ar1StationaryMoments) {
  // Stationary variance noise / (1 - rho^2); independent replicate chains
  // give i.i.d. samples at a fixed cycle, including cycle 0.
  const double rho = 0.6, noise = 0.5;
  const double var = noise / (1.0 - rho * rho);
  const int R = 20000;
  for (long cycle : {0L, 7L}) {
    double s = 0.0, ss = 0.0;
    for (int r = 0; r < R; ++r) {
      auto gen = make({AR1Error{rho, diagonal_covariance(1, noise)}}, 1, 1000 + r);
      double v = 0.0;
      for (long n = 0; n <= cycle; ++n) v = gen.sample(n)[0];
      s += v;
      ss += v * v;
    }
    const double mean = s / R, sample_var = ss / R - mean * mean;
    EXPECT_LT(std::abs(mean), 4.0 * std::sqrt(var / R));
    // Var of the sample variance is 2 var^2 / R for Gaussian data.
    EXPECT_LT(std::abs(sample_var - var), 4.0 * var * std::sqrt(2.0 / R));
  }
}

TEST(ModelError, Ar1Deterministic) {
  auto a = make({AR1Error{0.8, diagonal_covariance(3, 1.0)}}, 3, 5);
  auto b = make({AR1Error{0.8, diagonal_covariance(3, 1.0)}}, 3, 5);
  for (long n = 0; n < 20; ++n) EXPECT_EQ(a.sample(n), b.sample(n));
}

TEST(ModelError, ValidationRejectsBadParameters) {
  const Grid g{3, 1.0};
  EXPECT_THROW(validate_model_error({{AR1Error{1.0, diagonal_covariance(3, 1.0)}}, std::nullopt}, g), ConfigError);
  EXPECT_THROW(validate_model_error({{DiurnalError{Vector::Ones(3), 1, 0}}, std::nullopt}, g), ConfigError);
  EXPECT_THROW(validate_model_error({{ConstantBias{Vector::Ones(2)}}, std::nullopt}, g), ConfigError);
}

TEST(Covariance, DiagonalOnesIsIdentity) {
  const auto c = realize_covariance(diagonal_covariance(4, 1.0), Grid{4, 1.0});
  EXPECT_EQ(c.matrix(), Matrix::Identity(4, 4));
}

TEST(Covariance, ZeroLengthIsotropicIsDiagonal) {
  const auto c = realize_covariance(IsotropicCovariance{2.5, 0.0, Kernel::gaussian}, Grid{6, 1.0});
  EXPECT_EQ(c.matrix(), 2.5 * Matrix::Identity(6, 6));
  const auto s = realize_covariance(IsotropicCovariance{2.5, 0.0, Kernel::soar}, Grid{6, 1.0});
  EXPECT_EQ(s.matrix(), 2.5 * Matrix::Identity(6, 6));
}

TEST(Covariance, IsotropicIsSymmetricCirculant) {
  const Matrix c = covariance_matrix(IsotropicCovariance{1.0, 3.0, Kernel::soar}, Grid{40, 1.0});
  EXPECT_EQ(c, c.transpose());
  for (int i = 0; i < 40; ++i)
    for (int j = 0; j < 40; ++j) EXPECT_EQ(c(i, j), c((i + 1) % 40, (j + 1) % 40));
  EXPECT_DOUBLE_EQ(c(0, 3), (1.0 + 1.0) * std::exp(-1.0));
}

TEST(Covariance, SampleCovarianceConverges) {
  const Grid g{8, 1.0};
  const auto c = realize_covariance(IsotropicCovariance{2.0, 1.0, Kernel::gaussian}, g);
  RngStream rng(77);
  const int N = 100000;
  Matrix acc = Matrix::Zero(8, 8);
  for (int i = 0; i < N; ++i) {
    const Vector z = c.sample(rng);
    acc += z * z.transpose();
  }
  acc /= N;
  EXPECT_LT((acc - c.matrix()).norm(), 0.05 * c.matrix().norm());
}

TEST(Covariance, NonPsdRejected) {
  Matrix m(2, 2);
  m << 1.0, 2.0, 2.0, 1.0;
  EXPECT_THROW(RealizedCovariance{m}, ConfigError);
}

TEST(Covariance, SolveAndFactor) {
  RngStream rng(3);
  const Matrix a = laic::testing::random_spd(5, rng);
  const RealizedCovariance c(a);
  EXPECT_LT((c.factor() * c.factor().transpose() - a).norm(), 1e-12);
  const Vector v = rng.standard_normal(5);
  EXPECT_LT((a * c.solve(v) - v).norm(), 1e-12);
}

TEST(Covariance, EfoldingDistance) {
  EXPECT_NEAR(kernel_value(Kernel::gaussian, kernel_efolding_distance(Kernel::gaussian, 5.0), 5.0), std::exp(-1.0),
              1e-14);
  EXPECT_NEAR(kernel_value(Kernel::soar, kernel_efolding_distance(Kernel::soar, 2.0), 2.0), std::exp(-1.0), 1e-14);
}
