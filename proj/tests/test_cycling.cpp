#include "test_support.hpp"

#include <gtest/gtest.h>

using namespace laic;
using namespace laic::da;

namespace {

constexpr int kDim = 4;
constexpr int kSteps = 4;

AssimilationSetup setup_for(SchemeSpec scheme, std::vector<int> obs_times = {2, 4}) {
  AssimilationSetup s;
  s.scheme = std::move(scheme);
  s.dynamics = LinearDynamics{laic::testing::circulant({0.05, 0.8, 0.1}, kDim), kSteps};
  s.grid = Grid{kDim, 1.0};
  s.H = obs::ObservationOperator(obs::Full{}, kDim);
  s.R = std::make_shared<RealizedCovariance>(0.1 * Matrix::Identity(kDim, kDim));
  s.B = std::make_shared<RealizedCovariance>(Matrix::Identity(kDim, kDim));
  s.Qs_step = Matrix::Zero(kDim, kDim);
  s.obs_times = std::move(obs_times);
  return s;
}

WeakConstraintScheme wc(CyclingStrategy strategy) {
  WeakConstraintScheme w;
  w.strategy = strategy;
  w.active_mask.assign(kDim, true);
  w.Q = diagonal_covariance(kDim, 0.01);
  return w;
}

/// Truth with a period-2 tendency and noisy observations, fully determined by `seed`.
struct World {
  Vector x = Vector::LinSpaced(kDim, -1.0, 1.0);
  RngStream rng;
  double noise;
  explicit World(std::uint64_t seed, double obs_noise = 0.3) : rng(seed), noise(obs_noise) {}

  std::pair<Trajectory, std::vector<obs::ObservationBatch>> next(const AssimilationSetup& s, long n,
                                                                 const Vector& eta) {
    Trajectory t = integrate(x, s.dynamics, eta, kSteps);
    x = t.back();
    std::vector<obs::ObservationBatch> b;
    for (int time : s.obs_times) {
      obs::ObservationBatch ob;
      ob.cycle_index = n;
      ob.time_within_window = time;
      ob.values = s.H.apply(t.states[static_cast<std::size_t>(time)]) + noise * rng.standard_normal(s.H.obs_dim());
      b.push_back(ob);
    }
    return {t, b};
  }
};

std::vector<AssimilationCycleRecord> run(const SchemeSpec& scheme, int cycles, std::uint64_t seed,
                                         double obs_noise = 0.3, double amplitude = 0.1) {
  const auto s = setup_for(scheme);
  CycleAssimilator a(s, Vector::Constant(kDim, 0.5));
  World w(seed, obs_noise);
  std::vector<AssimilationCycleRecord> out;
  for (long n = 0; n < cycles; ++n) {
    const Vector eta = Vector::Constant(kDim, n % 2 == 0 ? amplitude : -amplitude);
    auto [traj, batches] = w.next(s, n, eta);
    out.push_back(a.run_cycle(n, traj, batches));
  }
  return out;
}

}  // namespace

TEST(ModelErrorBackground, Rules) {
  const std::vector<Vector> hist{Vector::Constant(2, 1.0), Vector::Constant(2, 2.0), Vector::Constant(2, 3.0)};
  EXPECT_EQ(model_error_background(CyclingStrategy::restarted, hist, 3, 2), Vector::Zero(2));
  EXPECT_EQ(model_error_background(CyclingStrategy::cycled, hist, 3, 2), hist[2]);
  EXPECT_EQ(model_error_background(CyclingStrategy::diurnally_cycled, hist, 3, 2), hist[1]);
  EXPECT_EQ(model_error_background(CyclingStrategy::diurnally_cycled, hist, 3, 2, 3), hist[0]);
}

TEST(ModelErrorBackground, ColdStartIsZero) {
  const std::vector<Vector> empty;
  EXPECT_EQ(model_error_background(CyclingStrategy::cycled, empty, 0, 3), Vector::Zero(3));
  const std::vector<Vector> one{Vector::Ones(3)};
  EXPECT_EQ(model_error_background(CyclingStrategy::diurnally_cycled, one, 1, 3), Vector::Zero(3));
}

TEST(Cycling, RestartedBackgroundIsAlwaysZero) {
  for (const auto& r : run(wc(CyclingStrategy::restarted), 20, 1)) EXPECT_EQ(r.eta_b, Vector::Zero(kDim));
}

TEST(Cycling, CycledCarriesPreviousAnalysis) {
  const auto recs = run(wc(CyclingStrategy::cycled), 20, 2);
  EXPECT_EQ(recs[0].eta_b, Vector::Zero(kDim));
  for (std::size_t n = 1; n < recs.size(); ++n) EXPECT_EQ(recs[n].eta_b, recs[n - 1].eta_a);
}

TEST(Cycling, DiurnalCarriesLagTwoAnalysis) {
  const auto recs = run(wc(CyclingStrategy::diurnally_cycled), 20, 3);
  EXPECT_EQ(recs[0].eta_b, Vector::Zero(kDim));
  EXPECT_EQ(recs[1].eta_b, Vector::Zero(kDim));
  for (std::size_t n = 2; n < recs.size(); ++n) EXPECT_EQ(recs[n].eta_b, recs[n - 2].eta_a);
}

TEST(Cycling, PerfectModelConverges) {
  for (const SchemeSpec& scheme : {SchemeSpec{StrongConstraintScheme{}}, SchemeSpec{wc(CyclingStrategy::cycled)}}) {
    const auto recs = run(scheme, 60, 4, 0.0, 0.0);
    for (std::size_t n = 40; n < recs.size(); ++n) EXPECT_LE(recs[n].increment.norm(), 1e-6) << scheme_name(scheme);
    // Noiseless observations: both departure sets vanish after spin-up.
    const auto omb = diag::departure_statistics(std::span(recs).subspan(40), diag::DepartureSplit::o_minus_b);
    const auto oma = diag::departure_statistics(std::span(recs).subspan(40), diag::DepartureSplit::o_minus_a);
    EXPECT_LE(omb.mean.cwiseAbs().maxCoeff() + omb.stddev.maxCoeff(), 1e-6);
    EXPECT_LE(oma.mean.cwiseAbs().maxCoeff() + oma.stddev.maxCoeff(), 1e-6);
    EXPECT_GT(recs[0].increment.norm(), 0.1);
  }
}

TEST(Cycling, KalmanPerfectModelConverges) {
  const auto s = setup_for(KalmanFilterScheme{}, {kSteps});
  CycleAssimilator a(s, Vector::Constant(kDim, 0.5));
  World w(5, 0.0);
  double last = 0.0;
  for (long n = 0; n < 30; ++n) {
    auto [traj, batches] = w.next(s, n, Vector::Zero(kDim));
    last = a.run_cycle(n, traj, batches).increment.norm();
  }
  EXPECT_LE(last, 1e-6);
}

TEST(Cycling, Deterministic) {
  const auto a = run(wc(CyclingStrategy::diurnally_cycled), 15, 6);
  const auto b = run(wc(CyclingStrategy::diurnally_cycled), 15, 6);
  for (std::size_t n = 0; n < a.size(); ++n) {
    EXPECT_EQ(a[n].xa, b[n].xa);
    EXPECT_EQ(a[n].eta_a, b[n].eta_a);
  }
}

TEST(Cycling, RecordsAreConsistent) {
  const auto recs = run(wc(CyclingStrategy::cycled), 10, 7);
  for (std::size_t n = 0; n < recs.size(); ++n) {
    const auto& r = recs[n];
    EXPECT_EQ(r.cycle_index, static_cast<long>(n));
    EXPECT_TRUE(r.consistent());
    ASSERT_EQ(r.departures.size(), 2u);
    EXPECT_EQ(r.departures[0].time_within_window, 2);
    EXPECT_EQ(r.departures[0].o_minus_b.size(), kDim);
  }
}

TEST(Cycling, StrongConstraintHasNoModelError) {
  for (const auto& r : run(StrongConstraintScheme{}, 10, 8)) {
    EXPECT_EQ(r.eta_a, Vector::Zero(kDim));
    EXPECT_EQ(r.eta_b, Vector::Zero(kDim));
  }
}

TEST(Cycling, AnalysisFitsObservationsBetterThanBackground) {
  const auto recs = run(wc(CyclingStrategy::cycled), 200, 9);
  double omb = 0.0, oma = 0.0;
  for (const auto& r : recs)
    for (const auto& d : r.departures) {
      omb += d.o_minus_b.squaredNorm();
      oma += d.o_minus_a.squaredNorm();
    }
  EXPECT_LT(oma, omb);
}

TEST(Cycling, ConfigurationErrors) {
  auto bad = wc(CyclingStrategy::cycled);
  bad.active_mask.assign(kDim - 1, true);
  EXPECT_THROW(CycleAssimilator(setup_for(bad), Vector::Zero(kDim)), ConfigError);
  bad.active_mask.assign(kDim, false);
  EXPECT_THROW(CycleAssimilator(setup_for(bad), Vector::Zero(kDim)), ConfigError);
  EXPECT_THROW(CycleAssimilator(setup_for(KalmanFilterScheme{}, {2, 4}), Vector::Zero(kDim)), ConfigError);
  EXPECT_THROW(CycleAssimilator(setup_for(StrongConstraintScheme{}), Vector::Zero(kDim + 1)), DimensionError);
}
