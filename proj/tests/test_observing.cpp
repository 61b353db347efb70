#include "test_support.hpp"

#include <gtest/gtest.h>

using namespace laic;
using namespace laic::obs;

TEST(ApplyH, EveryOtherComponent) {
  Vector x(4);
  x << 1.0, 2.0, 3.0, 4.0;
  Vector expected(2);
  expected << 1.0, 3.0;
  EXPECT_EQ(apply_H(EveryKth{2, 0}, x), expected);
}

TEST(ApplyH, IndexSetAndFull) {
  Vector x(4);
  x << 1.0, 2.0, 3.0, 4.0;
  Vector expected(2);
  expected << 4.0, 2.0;
  EXPECT_EQ(apply_H(IndexSet{{3, 1}}, x), expected);
  EXPECT_EQ(apply_H(Full{}, x), x);
}

TEST(ApplyH, AdjointDuality) {
  RngStream rng(4);
  const ObservationOperator H(EveryKth{3, 1}, 10);
  for (int t = 0; t < 10; ++t) {
    const Vector x = rng.standard_normal(10), y = rng.standard_normal(H.obs_dim());
    EXPECT_NEAR(H.apply(x).dot(y), x.dot(H.adjoint(y)), 1e-14);
  }
  EXPECT_EQ(H.matrix() * Vector::Ones(10), H.apply(Vector::Ones(10)));
}

TEST(ApplyH, NonExpansive) {
  RngStream rng(6);
  const ObservationOperator H(EveryKth{2, 1}, 9);
  for (int t = 0; t < 20; ++t) {
    const Vector x = rng.standard_normal(9);
    EXPECT_LE(H.apply(x).norm(), x.norm());
  }
}

TEST(ApplyH, RejectsOutOfRangeIndex) {
  EXPECT_THROW(ObservationOperator(IndexSet{{0, 4}}, 4), ConfigError);
  EXPECT_THROW(ObservationOperator(IndexSet{{-1}}, 4), ConfigError);
  EXPECT_THROW(ObservationOperator(EveryKth{0, 0}, 4), ConfigError);
  EXPECT_THROW(ObservationOperator(IndexSet{{}}, 4), ConfigError);
  const ObservationOperator H(Full{}, 3);
  EXPECT_THROW(H.apply(Vector::Zero(4)), DimensionError);
}

namespace {

Trajectory ramp_trajectory(int d, int steps) {
  Trajectory t;
  for (int j = 0; j <= steps; ++j) t.states.push_back(Vector::LinSpaced(d, 0.0, 1.0) * (j + 1));
  return t;
}

}  // namespace

TEST(GenerateObservations, ZeroErrorIsExact) {
  const ObservationOperator H(EveryKth{2, 0}, 6);
  const RealizedCovariance R(Matrix::Zero(3, 3));
  RngStream rng(1);
  const auto traj = ramp_trajectory(6, 4);
  const auto batches = generate_observations(traj, H, R, {2, 4}, 11, rng);
  ASSERT_EQ(batches.size(), 2u);
  EXPECT_EQ(batches[0].cycle_index, 11);
  EXPECT_EQ(batches[0].time_within_window, 2);
  EXPECT_EQ(batches[0].values, H.apply(traj.states[2]));
  EXPECT_EQ(batches[1].values, H.apply(traj.states[4]));
}

TEST(GenerateObservations, Deterministic) {
  const ObservationOperator H(Full{}, 4);
  const RealizedCovariance R(Matrix::Identity(4, 4));
  const auto traj = ramp_trajectory(4, 2);
  RngStream a(9), b(9);
  const auto ya = generate_observations(traj, H, R, {1, 2}, 0, a);
  const auto yb = generate_observations(traj, H, R, {1, 2}, 0, b);
  for (std::size_t i = 0; i < ya.size(); ++i) EXPECT_EQ(ya[i].values, yb[i].values);
}

TEST(GenerateObservations, RejectsTimeOutsideWindow) {
  const ObservationOperator H(Full{}, 2);
  const RealizedCovariance R(Matrix::Identity(2, 2));
  RngStream rng(1);
  EXPECT_THROW(generate_observations(ramp_trajectory(2, 2), H, R, {3}, 0, rng), DimensionError);
  const RealizedCovariance R3(Matrix::Identity(3, 3));
  EXPECT_THROW(generate_observations(ramp_trajectory(2, 2), H, R3, {1}, 0, rng), DimensionError);
}

TEST(GenerateObservations, ErrorStatistics) {
  const Grid g{5, 1.0};
  const ObservationOperator H(Full{}, 5);
  const RealizedCovariance R = H.observation_covariance(IsotropicCovariance{0.3, 1.0, Kernel::soar}, g);
  const Trajectory traj = ramp_trajectory(5, 1);
  RngStream rng(21);
  const int N = 100000;
  Matrix acc = Matrix::Zero(5, 5);
  std::vector<double> first(N);
  for (int n = 0; n < N; ++n) {
    const auto b = generate_observations(traj, H, R, {1}, n, rng);
    const Vector e = b[0].values - H.apply(traj.states[1]);
    acc += e * e.transpose();
    first[static_cast<std::size_t>(n)] = e[0];
  }
  acc /= N;
  EXPECT_LT((acc - R.matrix()).norm(), 0.05 * R.matrix().norm());
  // Errors are independent across cycles.
  double c0 = 0.0, c1 = 0.0;
  for (int n = 0; n < N; ++n) c0 += first[n] * first[n];
  for (int n = 0; n + 1 < N; ++n) c1 += first[n] * first[n + 1];
  EXPECT_LT(std::abs(c1 / c0), 4.0 / std::sqrt(static_cast<double>(N)));
}

TEST(ObservationCovariance, RestrictsToObservedPoints) {
  const Grid g{6, 1.0};
  const ObservationOperator H(EveryKth{2, 1}, 6);
  const Matrix full = covariance_matrix(IsotropicCovariance{1.0, 1.0, Kernel::soar}, g);
  const RealizedCovariance R = H.observation_covariance(IsotropicCovariance{1.0, 1.0, Kernel::soar}, g);
  const Matrix h = H.matrix();
  EXPECT_LT((R.matrix() - h * full * h.transpose()).norm(), 1e-15);
}
