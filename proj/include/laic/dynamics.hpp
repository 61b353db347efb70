#pragma once

#include "laic/core.hpp"

#include <functional>
#include <variant>

namespace laic {

/// x_{j+1} = M x_j + eta.
struct LinearDynamics {
  Matrix M;
  int steps_per_window = 1;
};

/// dx_i/dt = (x_{i+1} - x_{i-2}) x_{i-1} - x_i + F, classical RK4 with the
/// model-error tendency added once after each RK4 increment.
struct Lorenz96Dynamics {
  double forcing = 8.0;
  double dt = 0.05;
  int steps_per_window = 12;
};

using DynamicsSpec = std::variant<LinearDynamics, Lorenz96Dynamics>;

inline bool is_linear(const DynamicsSpec& dyn) {
  return std::holds_alternative<LinearDynamics>(dyn);
}

inline int steps_per_window(const DynamicsSpec& dyn) {
  return std::visit([](const auto& d) { return d.steps_per_window; }, dyn);
}

inline void validate_dynamics(const DynamicsSpec& dyn, int dim) {
  if (const auto* lin = std::get_if<LinearDynamics>(&dyn)) {
    if (lin->M.rows() != lin->M.cols()) throw ConfigError("linear dynamics: M must be square");
    if (lin->M.rows() != dim) throw ConfigError("linear dynamics: M does not match dimension");
    if (!lin->M.allFinite()) throw ConfigError("linear dynamics: M has non-finite entries");
    if (lin->steps_per_window < 1) throw ConfigError("steps_per_window must be >= 1");
  } else {
    const auto& l96 = std::get<Lorenz96Dynamics>(dyn);
    if (dim < 4) throw ConfigError("lorenz96 requires dimension >= 4");
    if (!(l96.dt > 0.0)) throw ConfigError("lorenz96: dt must be > 0");
    if (l96.steps_per_window < 1) throw ConfigError("steps_per_window must be >= 1");
  }
}

/// States x_0 .. x_n of one integration.
struct Trajectory {
  std::vector<Vector> states;

  [[nodiscard]] int steps() const { return static_cast<int>(states.size()) - 1; }
  [[nodiscard]] const Vector& front() const { return states.front(); }
  [[nodiscard]] const Vector& back() const { return states.back(); }
};

namespace l96 {

inline int wrap(int i, int n) { return ((i % n) + n) % n; }

inline Vector tendency(const Vector& x, double forcing) {
  const int n = static_cast<int>(x.size());
  Vector f(n);
  for (int i = 0; i < n; ++i) {
    f[i] = (x[wrap(i + 1, n)] - x[wrap(i - 2, n)]) * x[wrap(i - 1, n)] - x[i] + forcing;
  }
  return f;
}

/// Jacobian of the tendency at x applied to dx.
inline Vector tendency_tl(const Vector& x, const Vector& dx) {
  const int n = static_cast<int>(x.size());
  Vector df(n);
  for (int i = 0; i < n; ++i) {
    const int ip = wrap(i + 1, n), im = wrap(i - 1, n), im2 = wrap(i - 2, n);
    df[i] = (dx[ip] - dx[im2]) * x[im] + (x[ip] - x[im2]) * dx[im] - dx[i];
  }
  return df;
}

inline Vector tendency_ad(const Vector& x, const Vector& a) {
  const int n = static_cast<int>(x.size());
  Vector ad = Vector::Zero(n);
  for (int i = 0; i < n; ++i) {
    const int ip = wrap(i + 1, n), im = wrap(i - 1, n), im2 = wrap(i - 2, n);
    ad[ip] += x[im] * a[i];
    ad[im2] -= x[im] * a[i];
    ad[im] += (x[ip] - x[im2]) * a[i];
    ad[i] -= a[i];
  }
  return ad;
}

struct Stages {
  Vector x1, x2, x3;
};

inline Stages rk4_stages(const Vector& x, const Lorenz96Dynamics& p) {
  const double h = p.dt;
  Stages s;
  const Vector k1 = tendency(x, p.forcing);
  s.x1 = x + 0.5 * h * k1;
  const Vector k2 = tendency(s.x1, p.forcing);
  s.x2 = x + 0.5 * h * k2;
  const Vector k3 = tendency(s.x2, p.forcing);
  s.x3 = x + h * k3;
  return s;
}

inline Vector rk4(const Vector& x, const Lorenz96Dynamics& p) {
  const double h = p.dt;
  const Vector k1 = tendency(x, p.forcing);
  const Vector k2 = tendency(x + 0.5 * h * k1, p.forcing);
  const Vector k3 = tendency(x + 0.5 * h * k2, p.forcing);
  const Vector k4 = tendency(x + h * k3, p.forcing);
  return x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

inline Vector rk4_tl(const Vector& x, const Lorenz96Dynamics& p, const Vector& dx) {
  const double h = p.dt;
  const Stages s = rk4_stages(x, p);
  const Vector dk1 = tendency_tl(x, dx);
  const Vector dk2 = tendency_tl(s.x1, dx + 0.5 * h * dk1);
  const Vector dk3 = tendency_tl(s.x2, dx + 0.5 * h * dk2);
  const Vector dk4 = tendency_tl(s.x3, dx + h * dk3);
  return dx + (h / 6.0) * (dk1 + 2.0 * dk2 + 2.0 * dk3 + dk4);
}

inline Vector rk4_ad(const Vector& x, const Lorenz96Dynamics& p, const Vector& ay) {
  const double h = p.dt;
  const Stages s = rk4_stages(x, p);
  Vector ax = ay;
  Vector adk1 = (h / 6.0) * ay;
  Vector adk2 = (h / 3.0) * ay;
  Vector adk3 = (h / 3.0) * ay;
  const Vector adk4 = (h / 6.0) * ay;

  const Vector adx3 = tendency_ad(s.x3, adk4);
  ax += adx3;
  adk3 += h * adx3;
  const Vector adx2 = tendency_ad(s.x2, adk3);
  ax += adx2;
  adk2 += 0.5 * h * adx2;
  const Vector adx1 = tendency_ad(s.x1, adk2);
  ax += adx1;
  adk1 += 0.5 * h * adx1;
  ax += tendency_ad(x, adk1);
  return ax;
}

}  // namespace l96

/// One model step without the additive tendency.
inline Vector propagate_once(const DynamicsSpec& dyn, const Vector& x) {
  if (const auto* lin = std::get_if<LinearDynamics>(&dyn)) return lin->M * x;
  return l96::rk4(x, std::get<Lorenz96Dynamics>(dyn));
}

/// Per-step stochastic forcing hook; receives the step index within the call.
using StepNoise = std::function<Vector(int step)>;

/// Integrates n_steps with the constant tendency `eta` added every step and
/// returns the full trajectory.
inline Trajectory integrate(const Vector& x0, const DynamicsSpec& dyn, const Vector& eta,
                            int n_steps, const StepNoise& noise = {}) {
  require_dim(eta, x0.size(), "model-error tendency");
  if (n_steps < 0) throw DimensionError("integrate: negative step count");
  Trajectory traj;
  traj.states.reserve(static_cast<std::size_t>(n_steps) + 1);
  traj.states.push_back(x0);
  for (int j = 0; j < n_steps; ++j) {
    Vector next = propagate_once(dyn, traj.states.back()) + eta;
    if (noise) next += noise(j);
    if (!next.allFinite()) throw IntegrationBlowup(j + 1);
    traj.states.push_back(std::move(next));
  }
  return traj;
}

inline StateVector step_model(const StateVector& x, const DynamicsSpec& dyn,
                              const StateVector& eta_tendency, int n_steps) {
  if (n_steps < 1) throw DimensionError("step_model: n_steps must be >= 1");
  require_dim(eta_tendency, x.size(), "model-error tendency");
  Vector state = x;
  for (int j = 0; j < n_steps; ++j) {
    state = propagate_once(dyn, state) + eta_tendency;
    if (!state.allFinite()) throw IntegrationBlowup(j + 1);
  }
  return state;
}

/// Tangent linear of a single step about `x`.
inline Vector tangent_linear_once(const DynamicsSpec& dyn, const Vector& x, const Vector& dx) {
  if (const auto* lin = std::get_if<LinearDynamics>(&dyn)) return lin->M * dx;
  return l96::rk4_tl(x, std::get<Lorenz96Dynamics>(dyn), dx);
}

inline Vector adjoint_once(const DynamicsSpec& dyn, const Vector& x, const Vector& dy) {
  if (const auto* lin = std::get_if<LinearDynamics>(&dyn)) return lin->M.transpose() * dy;
  return l96::rk4_ad(x, std::get<Lorenz96Dynamics>(dyn), dy);
}

inline void check_trajectory(const Trajectory& traj, const Vector& v) {
  if (traj.states.empty()) throw DimensionError("empty trajectory");
  for (const auto& s : traj.states) require_dim(s, v.size(), "trajectory state");
}

/// Linearisation of the whole recorded trajectory applied to dx. A constant
/// tendency perturbation `deta` enters every step, as in the forward model.
inline StateVector tangent_linear_step(const Trajectory& x_traj, const DynamicsSpec& dyn,
                                       const StateVector& dx) {
  check_trajectory(x_traj, dx);
  Vector out = dx;
  for (int j = 0; j < x_traj.steps(); ++j) out = tangent_linear_once(dyn, x_traj.states[j], out);
  return out;
}

inline StateVector tangent_linear_step(const Trajectory& x_traj, const DynamicsSpec& dyn,
                                       const StateVector& dx, const StateVector& deta) {
  check_trajectory(x_traj, dx);
  require_dim(deta, dx.size(), "tendency perturbation");
  Vector out = dx;
  for (int j = 0; j < x_traj.steps(); ++j)
    out = tangent_linear_once(dyn, x_traj.states[j], out) + deta;
  return out;
}

inline StateVector adjoint_step(const Trajectory& x_traj, const DynamicsSpec& dyn,
                                const StateVector& dy) {
  check_trajectory(x_traj, dy);
  Vector out = dy;
  for (int j = x_traj.steps() - 1; j >= 0; --j) out = adjoint_once(dyn, x_traj.states[j], out);
  return out;
}

/// Explicit window-integrated TLM matrix along the trajectory.
inline Matrix tangent_linear_matrix(const Trajectory& x_traj, const DynamicsSpec& dyn) {
  const Eigen::Index d = x_traj.front().size();
  if (const auto* lin = std::get_if<LinearDynamics>(&dyn)) {
    Matrix m = Matrix::Identity(d, d);
    for (int j = 0; j < x_traj.steps(); ++j) m = lin->M * m;
    return m;
  }
  Matrix m(d, d);
  for (Eigen::Index c = 0; c < d; ++c)
    m.col(c) = tangent_linear_step(x_traj, dyn, Vector::Unit(d, c));
  return m;
}

/// P_{j+1} = M_j P_j M_j^T + Qs along the trajectory (Qs is per step).
inline Matrix propagate_covariance(const Trajectory& x_traj, const DynamicsSpec& dyn,
                                   const Matrix& P, const Matrix& Qs_step) {
  const Eigen::Index d = P.rows();
  Matrix cur = P;
  for (int j = 0; j < x_traj.steps(); ++j) {
    Matrix mp(d, d);
    for (Eigen::Index c = 0; c < d; ++c)
      mp.col(c) = tangent_linear_once(dyn, x_traj.states[j], cur.col(c));
    Matrix next(d, d);
    for (Eigen::Index r = 0; r < d; ++r)
      next.row(r) = tangent_linear_once(dyn, x_traj.states[j], mp.row(r).transpose()).transpose();
    cur = symmetrized(next + Qs_step);
  }
  return cur;
}

}  // namespace laic
