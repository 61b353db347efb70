#pragma once

#include "laic/core.hpp"
#include "laic/covariance.hpp"
#include "laic/dynamics.hpp"
#include "laic/observing.hpp"

#include <map>
#include <memory>

namespace laic::da {

/// One assimilation window for strong- or weak-constraint 4D-Var. The model
/// error control is a constant tendency eta on the `active` components,
/// added every model step.
struct WindowProblem {
  DynamicsSpec dynamics;
  Vector x0b;
  std::shared_ptr<const RealizedCovariance> B;
  obs::ObservationOperator H;
  std::shared_ptr<const RealizedCovariance> R;
  std::vector<obs::ObservationBatch> batches;

  std::vector<int> active;  // empty: strong constraint
  Vector etab;              // full dimension, zero outside `active`
  std::shared_ptr<const RealizedCovariance> Q;  // on `active` only

  [[nodiscard]] int dim() const { return static_cast<int>(x0b.size()); }
  [[nodiscard]] int n_active() const { return static_cast<int>(active.size()); }
  [[nodiscard]] bool weak() const { return !active.empty(); }

  [[nodiscard]] int last_obs_step() const {
    int last = 0;
    for (const auto& b : batches) last = std::max(last, b.time_within_window);
    return last;
  }

  [[nodiscard]] Vector gather(const Vector& full) const {
    Vector out(n_active());
    for (int i = 0; i < n_active(); ++i) out[i] = full[active[i]];
    return out;
  }

  [[nodiscard]] Vector scatter(const Vector& part) const {
    Vector out = Vector::Zero(dim());
    for (int i = 0; i < n_active(); ++i) out[active[i]] = part[i];
    return out;
  }
};

inline void validate_window(const WindowProblem& p) {
  const int d = p.dim();
  if (!p.B || p.B->dim() != d) throw DimensionError("background covariance size mismatch");
  if (!p.R || p.R->dim() != p.H.obs_dim()) throw DimensionError("R size mismatch");
  if (p.H.state_dim() != d) throw DimensionError("observation operator dimension mismatch");
  for (const auto& b : p.batches) require_dim(b.values, p.H.obs_dim(), "observation batch");
  if (p.weak()) {
    if (!p.Q || p.Q->dim() != p.n_active()) throw DimensionError("Q size mismatch");
    require_dim(p.etab, d, "eta background");
  }
}

inline Vector masked_eta(const WindowProblem& p, const Vector& eta) {
  if (!p.weak()) return Vector::Zero(p.dim());
  return p.scatter(p.gather(eta));
}

struct CostGradient {
  double cost = 0.0;
  double cost_background = 0.0;
  double cost_observations = 0.0;
  double cost_model_error = 0.0;
  Vector grad_x0;
  Vector grad_eta;  // full dimension, zero outside active
  Trajectory trajectory;
};

namespace detail {

inline std::multimap<int, const obs::ObservationBatch*> batches_by_step(const WindowProblem& p) {
  std::multimap<int, const obs::ObservationBatch*> m;
  for (const auto& b : p.batches) m.emplace(b.time_within_window, &b);
  return m;
}

}  // namespace detail

/// J = 1/2 |x0 - x0b|^2_{B^-1} + 1/2 sum_k |H x_k - y_k|^2_{R^-1}
///   + 1/2 |eta - etab|^2_{Q^-1}, with gradients from one adjoint sweep.
inline CostGradient wc4dvar_cost_grad(const WindowProblem& p, const Vector& x0,
                                      const Vector& eta) {
  validate_window(p);
  const int d = p.dim();
  require_dim(x0, d, "x0");
  require_dim(eta, d, "eta");
  if (!p.weak() && eta.squaredNorm() != 0.0) {
    throw DimensionError("eta must be zero in a strong-constraint window");
  }
  if (p.weak() && (eta - masked_eta(p, eta)).squaredNorm() != 0.0) {
    throw DimensionError("eta must be zero outside the active mask");
  }

  CostGradient out;
  const int nsteps = p.last_obs_step();
  out.trajectory = integrate(x0, p.dynamics, eta, nsteps);
  const auto by_step = detail::batches_by_step(p);

  // Observation term and its adjoint forcing per step.
  std::vector<Vector> forcing(static_cast<std::size_t>(nsteps) + 1, Vector::Zero(d));
  for (const auto& [step, batch] : by_step) {
    const Vector resid = p.H.apply(out.trajectory.states[step]) - batch->values;
    const Vector w = p.R->solve(resid);
    out.cost_observations += 0.5 * resid.dot(w);
    forcing[step] += p.H.adjoint(w);
  }

  const Vector dxb = x0 - p.x0b;
  const Vector bdx = p.B->solve(dxb);
  out.cost_background = 0.5 * dxb.dot(bdx);

  Vector lambda = Vector::Zero(d);
  Vector eta_acc = Vector::Zero(d);
  for (int j = nsteps; j >= 0; --j) {
    lambda += forcing[j];
    if (j > 0) {
      eta_acc += lambda;
      lambda = adjoint_once(p.dynamics, out.trajectory.states[j - 1], lambda);
    }
  }
  out.grad_x0 = lambda + bdx;

  out.grad_eta = Vector::Zero(d);
  if (p.weak()) {
    const Vector de = p.gather(eta) - p.gather(p.etab);
    const Vector qde = p.Q->solve(de);
    out.cost_model_error = 0.5 * de.dot(qde);
    out.grad_eta = p.scatter(p.gather(eta_acc) + qde);
  }
  out.cost = out.cost_background + out.cost_observations + out.cost_model_error;
  if (!std::isfinite(out.cost)) throw NumericalError("non-finite 4D-Var cost (trajectory blow-up)");
  return out;
}

struct SolverOptions {
  int outer_loops = 3;
  int max_inner = 0;  // 0: 10 x control dimension + 50
  double inner_tolerance = 1e-10;
  double gradient_tolerance = 1e-12;
  int max_step_halvings = 10;
};

struct SolverStats {
  int outer_iterations = 0;
  int inner_iterations = 0;
  double initial_cost = 0.0;
  double final_cost = 0.0;
  double initial_gradient_norm = 0.0;
  double final_gradient_norm = 0.0;
};

struct WindowAnalysis {
  Vector x0a;
  Vector eta_a;  // full dimension
  SolverStats stats;
};

namespace detail {

/// Gauss-Newton Hessian applied to a control increment (dx0, deta_active)
/// about a fixed trajectory.
class GaussNewtonHessian {
 public:
  GaussNewtonHessian(const WindowProblem& p, const Trajectory& traj) : p_(p), traj_(traj) {
    for (const auto& b : p.batches) obs_steps_.push_back(b.time_within_window);
    nsteps_ = p.last_obs_step();
  }

  [[nodiscard]] Vector apply(const Vector& v) const {
    const int d = p_.dim();
    const Vector dx0 = v.head(d);
    const Vector deta = p_.weak() ? p_.scatter(v.tail(p_.n_active())) : Vector::Zero(d);

    std::vector<Vector> forcing(static_cast<std::size_t>(nsteps_) + 1, Vector::Zero(d));
    Vector dx = dx0;
    for (int j = 0; j <= nsteps_; ++j) {
      if (j > 0) dx = tangent_linear_once(p_.dynamics, traj_.states[j - 1], dx) + deta;
      for (int s : obs_steps_) {
        if (s == j) forcing[j] += p_.H.adjoint(p_.R->solve(p_.H.apply(dx)));
      }
    }
    Vector lambda = Vector::Zero(d);
    Vector eta_acc = Vector::Zero(d);
    for (int j = nsteps_; j >= 0; --j) {
      lambda += forcing[j];
      if (j > 0) {
        eta_acc += lambda;
        lambda = adjoint_once(p_.dynamics, traj_.states[j - 1], lambda);
      }
    }
    Vector out(v.size());
    out.head(d) = lambda + p_.B->solve(dx0);
    if (p_.weak()) {
      out.tail(p_.n_active()) = p_.gather(eta_acc) + p_.Q->solve(v.tail(p_.n_active()));
    }
    return out;
  }

  /// Prior covariance blockdiag(B, Q) as preconditioner.
  [[nodiscard]] Vector precondition(const Vector& r) const {
    const int d = p_.dim();
    Vector z(r.size());
    z.head(d) = p_.B->matrix() * r.head(d);
    if (p_.weak()) z.tail(p_.n_active()) = p_.Q->matrix() * r.tail(p_.n_active());
    return z;
  }

 private:
  const WindowProblem& p_;
  const Trajectory& traj_;
  std::vector<int> obs_steps_;
  int nsteps_ = 0;
};

struct CgResult {
  Vector x;
  int iterations = 0;
};

/// Preconditioned CG on A x = b. Stops when the raw residual falls below
/// tol * |b|, or the preconditioned residual reaches round-off.
template <class Op>
CgResult preconditioned_cg(const Op& op, const Vector& b, double tol, int max_iter) {
  CgResult res;
  res.x = Vector::Zero(b.size());
  const double b_norm = b.norm();
  if (b_norm == 0.0) return res;
  Vector r = b;
  Vector z = op.precondition(r);
  Vector p = z;
  double rz = r.dot(z);
  const double rz0 = rz;
  for (int it = 1; it <= max_iter; ++it) {
    const Vector Ap = op.apply(p);
    const double pAp = p.dot(Ap);
    if (!(pAp > 0.0)) throw SolverError("CG: Hessian not positive definite", r.norm());
    const double alpha = rz / pAp;
    res.x += alpha * p;
    r -= alpha * Ap;
    res.iterations = it;
    z = op.precondition(r);
    const double rz_new = r.dot(z);
    if (r.norm() <= tol * b_norm || std::abs(rz_new) <= 1e-28 * rz0) return res;
    p = z + (rz_new / rz) * p;
    rz = rz_new;
  }
  throw SolverError("CG did not converge in " + std::to_string(max_iter) + " iterations",
                    r.norm());
}

}  // namespace detail

/// Gauss-Newton minimisation of the window cost; the inner quadratic
/// problem is solved by CG linearised about the current trajectory. For
/// linear dynamics the first outer iteration is the exact minimiser.
inline WindowAnalysis wc4dvar_solve(const WindowProblem& p, const SolverOptions& opt = {}) {
  validate_window(p);
  const int d = p.dim();
  const int na = p.n_active();
  const int n_control = d + na;
  const int max_inner = opt.max_inner > 0 ? opt.max_inner : 10 * n_control + 50;

  Vector x0 = p.x0b;
  Vector eta_part = p.weak() ? p.gather(p.etab) : Vector();
  auto full_eta = [&](const Vector& part) { return p.weak() ? p.scatter(part) : Vector::Zero(d); };

  CostGradient cg = wc4dvar_cost_grad(p, x0, full_eta(eta_part));
  WindowAnalysis out;
  auto control_grad = [&](const CostGradient& c) {
    Vector g(n_control);
    g.head(d) = c.grad_x0;
    if (p.weak()) g.tail(na) = p.gather(c.grad_eta);
    return g;
  };
  Vector g = control_grad(cg);
  out.stats.initial_cost = cg.cost;
  out.stats.initial_gradient_norm = g.norm();

  const int outer = is_linear(p.dynamics) ? std::min(opt.outer_loops, 1) : opt.outer_loops;
  for (int k = 0; k < outer; ++k) {
    if (g.norm() <= opt.gradient_tolerance * out.stats.initial_gradient_norm || g.norm() == 0.0)
      break;
    const detail::GaussNewtonHessian hess(p, cg.trajectory);
    const auto step = detail::preconditioned_cg(hess, -g, opt.inner_tolerance, max_inner);
    out.stats.inner_iterations += step.iterations;
    ++out.stats.outer_iterations;

    bool accepted = false;
    double scale = 1.0;
    for (int h = 0; h <= opt.max_step_halvings; ++h, scale *= 0.5) {
      const Vector x_try = x0 + scale * step.x.head(d);
      const Vector e_try = p.weak() ? Vector(eta_part + scale * step.x.tail(na)) : Vector();
      CostGradient trial = wc4dvar_cost_grad(p, x_try, full_eta(e_try));
      if (trial.cost <= cg.cost || is_linear(p.dynamics)) {
        x0 = x_try;
        eta_part = e_try;
        cg = std::move(trial);
        g = control_grad(cg);
        accepted = true;
        break;
      }
    }
    if (!accepted) break;
  }
  out.x0a = x0;
  out.eta_a = full_eta(eta_part);
  out.stats.final_cost = cg.cost;
  out.stats.final_gradient_norm = g.norm();
  return out;
}

/// Strong constraint: eta frozen at zero, no Q term.
inline WindowAnalysis sc4dvar_solve(WindowProblem p, const SolverOptions& opt = {}) {
  p.active.clear();
  p.Q.reset();
  p.etab = Vector::Zero(p.dim());
  return wc4dvar_solve(p, opt);
}

}  // namespace laic::da
