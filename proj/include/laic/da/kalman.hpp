#pragma once

#include "laic/core.hpp"
#include "laic/dynamics.hpp"
#include "laic/observing.hpp"

namespace laic::da {

struct GainMatrix {
  Matrix K;  // d x p
};

/// K = Pf H^T (H Pf H^T + R)^{-1} through a symmetric solve.
inline GainMatrix kalman_gain(const Matrix& Pf, const Matrix& H, const Matrix& R) {
  require_shape(Pf, H.cols(), H.cols(), "forecast covariance");
  require_shape(R, H.rows(), H.rows(), "observation error covariance");
  const Matrix PHt = Pf * H.transpose();
  const Matrix S = symmetrized(H * PHt + R);
  Eigen::LLT<Matrix> llt(S);
  if (llt.info() != Eigen::Success || !S.allFinite()) {
    throw NumericalError("innovation covariance H Pf H^T + R is singular");
  }
  GainMatrix g;
  g.K = llt.solve(PHt.transpose()).transpose();
  if (!g.K.allFinite()) throw NumericalError("non-finite Kalman gain");
  return g;
}

inline GainMatrix kalman_gain(const Matrix& Pf, const obs::ObservationOperator& H,
                              const Matrix& R) {
  return kalman_gain(Pf, H.matrix(), R);
}

struct KfAnalysis {
  Vector xa;
  Matrix Pa;
  GainMatrix gain;
};

/// Joseph form: Pa = (I - KH) Pf (I - KH)^T + K R K^T, symmetrised.
inline Matrix joseph_update(const Matrix& Pf, const Matrix& K, const Matrix& H, const Matrix& R) {
  const Eigen::Index d = Pf.rows();
  const Matrix IKH = Matrix::Identity(d, d) - K * H;
  return symmetrized(IKH * Pf * IKH.transpose() + K * R * K.transpose());
}

inline KfAnalysis kf_analysis_update(const Vector& xf, const Matrix& Pf, const Vector& y,
                                     const obs::ObservationOperator& H, const Matrix& R) {
  require_dim(xf, H.state_dim(), "forecast state");
  require_dim(y, H.obs_dim(), "observation batch");
  const Matrix h = H.matrix();
  KfAnalysis out;
  out.gain = kalman_gain(Pf, h, R);
  out.xa = xf + out.gain.K * (y - H.apply(xf));
  out.Pa = joseph_update(Pf, out.gain.K, h, R);
  return out;
}

struct KfForecast {
  Vector xf;
  Matrix Pf;
  Trajectory trajectory;
};

/// Forecast over one window. The covariance follows the tangent linear model
/// step by step with Qs added each step; eta_applied is whatever tendency the
/// forecast model carries (zero for a filter that is blind to model error).
inline KfForecast kf_forecast_update(const Vector& xa, const Matrix& Pa, const DynamicsSpec& dyn,
                                     const Matrix& Qs_step, const Vector& eta_applied,
                                     int n_steps) {
  require_shape(Pa, xa.size(), xa.size(), "analysis covariance");
  require_shape(Qs_step, xa.size(), xa.size(), "stochastic model error covariance");
  KfForecast out;
  out.trajectory = integrate(xa, dyn, eta_applied, n_steps);
  out.xf = out.trajectory.back();
  out.Pf = propagate_covariance(out.trajectory, dyn, Pa, Qs_step);
  return out;
}

/// Steady-state gain of the filter recursion Pf <- M (I - KH) Pf M^T + Q
/// (cycle-level M and Q). Iterates until the relative change in Pf drops
/// below `tol`.
struct SteadyStateFilter {
  Matrix Pf;
  Matrix Pa;
  Matrix K;
  int iterations = 0;
};

inline SteadyStateFilter steady_state_kalman(const Matrix& M, const Matrix& H, const Matrix& Q,
                                             const Matrix& R, double tol = 1e-15,
                                             int max_iter = 100000) {
  const Eigen::Index d = M.rows();
  SteadyStateFilter s;
  s.Pf = Q + Matrix::Identity(d, d);
  for (int it = 1; it <= max_iter; ++it) {
    const Matrix K = kalman_gain(s.Pf, H, R).K;
    const Matrix Pa = joseph_update(s.Pf, K, H, R);
    const Matrix next = symmetrized(M * Pa * M.transpose() + Q);
    const double change = (next - s.Pf).norm() / std::max(next.norm(), 1e-300);
    s.Pf = next;
    if (change <= tol) {
      s.iterations = it;
      s.K = kalman_gain(s.Pf, H, R).K;
      s.Pa = joseph_update(s.Pf, s.K, H, R);
      return s;
    }
  }
  throw NumericalError("steady-state Kalman recursion did not converge");
}

}  // namespace laic::da
