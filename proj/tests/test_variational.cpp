#include "test_support.hpp"

#include <gtest/gtest.h>

using namespace laic;
using namespace laic::da;
using laic::testing::random_matrix;
using laic::testing::random_spd;

namespace {

std::shared_ptr<const RealizedCovariance> cov(const Matrix& m) { return std::make_shared<RealizedCovariance>(m); }

obs::ObservationBatch batch(int t, const Vector& v) {
  obs::ObservationBatch b;
  b.time_within_window = t;
  b.values = v;
  return b;
}

WindowProblem scalar_problem(double y) {
  WindowProblem p;
  const Matrix one = Matrix::Identity(1, 1);
  p.dynamics = LinearDynamics{one, 1};
  p.x0b = Vector::Zero(1);
  p.B = cov(one);
  p.H = obs::ObservationOperator(obs::Full{}, 1);
  p.R = cov(one);
  p.batches = {batch(1, Vector::Constant(1, y))};
  p.active = {0};
  p.etab = Vector::Zero(1);
  p.Q = cov(one);
  return p;
}

/// Random weak-constraint window on a d-dimensional grid.
WindowProblem random_problem(RngStream& rng, bool lorenz, bool weak) {
  const int d = lorenz ? 12 : 6;
  WindowProblem p;
  Vector x0;
  if (lorenz) {
    p.dynamics = Lorenz96Dynamics{8.0, 0.05, 4};
    x0 = step_model(Vector::Constant(d, 8.0) + 0.01 * rng.standard_normal(d), p.dynamics, Vector::Zero(d), 500);
  } else {
    p.dynamics = LinearDynamics{0.5 * random_matrix(d, d, rng) / std::sqrt(static_cast<double>(d)) +
                                    0.7 * Matrix::Identity(d, d),
                                4};
    x0 = rng.standard_normal(d);
  }
  p.x0b = x0 + 0.3 * rng.standard_normal(d);
  p.B = cov(random_spd(d, rng));
  p.H = obs::ObservationOperator(obs::EveryKth{2, static_cast<int>(rng.uniform() * 2)}, d);
  p.R = cov(random_spd(p.H.obs_dim(), rng));
  const Trajectory truth = integrate(x0, p.dynamics, Vector::Zero(d), 4);
  for (int t : {2, 4}) p.batches.push_back(batch(t, p.H.apply(truth.states[t]) + 0.2 * rng.standard_normal(p.H.obs_dim())));
  p.etab = Vector::Zero(d);
  if (weak) {
    for (int i = 0; i < d; i += 2) p.active.push_back(i);
    p.Q = cov(0.1 * random_spd(p.n_active(), rng));
    p.etab = p.scatter(0.05 * rng.standard_normal(p.n_active()));
  }
  return p;
}

double relative_fd_error(const WindowProblem& p, const Vector& x0, const Vector& eta, RngStream& rng) {
  const int d = p.dim();
  const CostGradient cg = wc4dvar_cost_grad(p, x0, eta);
  const Vector dx = rng.standard_normal(d);
  const Vector de = p.weak() ? p.scatter(rng.standard_normal(p.n_active())) : Vector(Vector::Zero(d));
  const double h = 1e-5;
  const double jp = wc4dvar_cost_grad(p, x0 + h * dx, eta + h * de).cost;
  const double jm = wc4dvar_cost_grad(p, x0 - h * dx, eta - h * de).cost;
  const double fd = (jp - jm) / (2.0 * h);
  const double an = cg.grad_x0.dot(dx) + cg.grad_eta.dot(de);
  return std::abs(fd - an) / std::max(std::abs(an), 1e-12);
}

}  // namespace

TEST(Cost, ScalarTermsAtBackground) {
  const auto p = scalar_problem(3.0);
  const auto cg = wc4dvar_cost_grad(p, Vector::Zero(1), Vector::Zero(1));
  EXPECT_DOUBLE_EQ(cg.cost_background, 0.0);
  EXPECT_DOUBLE_EQ(cg.cost_observations, 4.5);
  EXPECT_DOUBLE_EQ(cg.cost_model_error, 0.0);
  EXPECT_DOUBLE_EQ(cg.cost, 4.5);
  EXPECT_DOUBLE_EQ(cg.grad_x0[0], -3.0);
  EXPECT_DOUBLE_EQ(cg.grad_eta[0], -3.0);
}

TEST(Cost, ScalarTermsAwayFromBackground) {
  const auto p = scalar_problem(3.0);
  const auto cg = wc4dvar_cost_grad(p, Vector::Constant(1, 1.0), Vector::Constant(1, 2.0));
  EXPECT_DOUBLE_EQ(cg.cost_background, 0.5);
  EXPECT_DOUBLE_EQ(cg.cost_observations, 0.0);
  EXPECT_DOUBLE_EQ(cg.cost_model_error, 2.0);
}

TEST(Cost, RejectsEtaOutsideMask) {
  RngStream rng(1);
  const auto p = random_problem(rng, false, true);
  Vector eta = Vector::Zero(p.dim());
  eta[1] = 1.0;
  EXPECT_THROW(wc4dvar_cost_grad(p, p.x0b, eta), DimensionError);
  const auto sc = random_problem(rng, false, false);
  EXPECT_THROW(wc4dvar_cost_grad(sc, sc.x0b, Vector::Ones(sc.dim())), DimensionError);
}

TEST(Gradient, FiniteDifferenceLinear) {
  RngStream rng(100);
  for (int trial = 0; trial < 20; ++trial) {
    const auto p = random_problem(rng, false, trial % 4 != 0);
    const Vector x0 = p.x0b + rng.standard_normal(p.dim());
    const Vector eta = p.weak() ? p.scatter(0.1 * rng.standard_normal(p.n_active())) : Vector(Vector::Zero(p.dim()));
    EXPECT_LT(relative_fd_error(p, x0, eta, rng), 1e-6) << "trial " << trial;
  }
}

TEST(Gradient, FiniteDifferenceLorenz) {
  RngStream rng(200);
  for (int trial = 0; trial < 20; ++trial) {
    const auto p = random_problem(rng, true, trial % 4 != 0);
    const Vector x0 = p.x0b + 0.1 * rng.standard_normal(p.dim());
    const Vector eta = p.weak() ? p.scatter(0.01 * rng.standard_normal(p.n_active())) : Vector(Vector::Zero(p.dim()));
    EXPECT_LT(relative_fd_error(p, x0, eta, rng), 1e-4) << "trial " << trial;
  }
}

TEST(Gradient, MaskedComponentsHaveZeroGradient) {
  RngStream rng(3);
  const auto p = random_problem(rng, false, true);
  const auto cg = wc4dvar_cost_grad(p, p.x0b, p.etab);
  for (int i = 1; i < p.dim(); i += 2) EXPECT_EQ(cg.grad_eta[i], 0.0);
  EXPECT_GT(cg.grad_eta.norm(), 0.0);
}

TEST(Solve, ScalarClosedForm) {
  const auto an = wc4dvar_solve(scalar_problem(3.0));
  EXPECT_NEAR(an.x0a[0], 1.0, 1e-10);
  EXPECT_NEAR(an.eta_a[0], 1.0, 1e-10);
}

TEST(Solve, StrongConstraintMidpoint) {
  const auto an = sc4dvar_solve(scalar_problem(2.0));
  EXPECT_NEAR(an.x0a[0], 1.0, 1e-10);
  EXPECT_EQ(an.eta_a, Vector::Zero(1));
}

TEST(Solve, NoObservationsReturnsBackground) {
  RngStream rng(4);
  auto p = random_problem(rng, false, true);
  p.batches.clear();
  const auto an = wc4dvar_solve(p);
  EXPECT_EQ(an.x0a, p.x0b);
  EXPECT_EQ(an.eta_a, p.etab);
}

TEST(Solve, TinyModelErrorVarianceFreezesEta) {
  RngStream rng(5);
  auto p = random_problem(rng, false, true);
  p.Q = cov(1e-12 * Matrix::Identity(p.n_active(), p.n_active()));
  const auto an = wc4dvar_solve(p);
  EXPECT_LE((an.eta_a - p.etab).norm(), 1e-6);
}

TEST(Solve, StrongConstraintEqualsKalmanAtObservationTime) {
  // One batch at the end of the window: M x0a is the KF analysis with
  // Pf = M B M^T and no model noise.
  RngStream rng(6);
  auto p = random_problem(rng, false, false);
  p.batches.erase(p.batches.begin());
  const auto an = sc4dvar_solve(p);
  const Matrix M = tangent_linear_matrix(integrate(p.x0b, p.dynamics, Vector::Zero(p.dim()), 4), p.dynamics);
  const Vector xf = M * p.x0b;
  const Matrix Pf = M * p.B->matrix() * M.transpose();
  const auto kf = kf_analysis_update(xf, Pf, p.batches[0].values, p.H, p.R->matrix());
  EXPECT_LT((M * an.x0a - kf.xa).norm(), 1e-10 * std::max(1.0, kf.xa.norm()));
}

TEST(Solve, StrongConstraintIgnoresWeakSettings) {
  RngStream rng(7);
  const auto p = random_problem(rng, false, true);
  WindowProblem plain = p;
  plain.active.clear();
  plain.Q.reset();
  plain.etab = Vector::Zero(p.dim());
  const auto a = sc4dvar_solve(p);
  const auto b = wc4dvar_solve(plain);
  EXPECT_LT((a.x0a - b.x0a).norm(), 1e-10);
  EXPECT_EQ(a.eta_a, Vector::Zero(p.dim()));
}

TEST(Solve, ActiveMaskRespected) {
  RngStream rng(8);
  const auto p = random_problem(rng, false, true);
  const auto an = wc4dvar_solve(p);
  for (int i = 1; i < p.dim(); i += 2) EXPECT_EQ(an.eta_a[i], 0.0);
}

TEST(Solve, LinearGradientReduction) {
  RngStream rng(9);
  for (int trial = 0; trial < 5; ++trial) {
    const auto p = random_problem(rng, false, true);
    const auto an = wc4dvar_solve(p);
    EXPECT_LE(an.stats.final_cost, an.stats.initial_cost);
    EXPECT_LE(an.stats.final_gradient_norm, 1e-8 * an.stats.initial_gradient_norm);
    // Independent check at the returned point.
    const auto cg = wc4dvar_cost_grad(p, an.x0a, an.eta_a);
    EXPECT_LE(std::hypot(cg.grad_x0.norm(), cg.grad_eta.norm()), 1e-8 * an.stats.initial_gradient_norm);
  }
}

TEST(Solve, LorenzCostDecreases) {
  RngStream rng(10);
  for (int trial = 0; trial < 5; ++trial) {
    const auto p = random_problem(rng, true, true);
    const auto an = wc4dvar_solve(p);
    EXPECT_LT(an.stats.final_cost, an.stats.initial_cost);
    EXPECT_LT(an.stats.final_gradient_norm, an.stats.initial_gradient_norm);
  }
}

TEST(Solve, DimensionChecks) {
  auto p = scalar_problem(1.0);
  p.Q = cov(Matrix::Identity(2, 2));
  EXPECT_THROW(wc4dvar_solve(p), DimensionError);
}
