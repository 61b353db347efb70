#pragma once

#include "laic/core.hpp"
#include "laic/da/kalman.hpp"
#include "laic/diag/autocorrelation.hpp"
#include "laic/diag/laic.hpp"

#include <optional>

namespace laic::diag {

/// Cycle-level forcing of the forecast error,
///   eps^f_{n+1} = M eps^a_n + eps^q_n + eta_n,
/// with eta_n = constant + periodic[n mod P] + sum of AR(1) terms.
struct CycleForcing {
  struct Ar1 {
    double rho = 0.0;
    Matrix stationary_cov;
  };

  Vector constant;               // empty means zero
  std::vector<Vector> periodic;  // one entry per phase; empty means none
  std::vector<Ar1> ar1;

  [[nodiscard]] int period() const { return periodic.empty() ? 1 : static_cast<int>(periodic.size()); }

  [[nodiscard]] Vector mean_at(long n, Eigen::Index d) const {
    Vector m = constant.size() ? constant : Vector::Zero(d);
    if (!periodic.empty()) m += periodic[static_cast<std::size_t>(n % period())];
    return m;
  }

  [[nodiscard]] bool zero_mean() const {
    if (constant.size() && constant.squaredNorm() != 0.0) return false;
    for (const auto& p : periodic)
      if (p.squaredNorm() != 0.0) return false;
    return true;
  }

  /// Phase-averaged raw moment <eta_{n+j} eta_n^T>.
  [[nodiscard]] Matrix lag_moment(int j, Eigen::Index d) const {
    Matrix c = Matrix::Zero(d, d);
    for (const auto& a : ar1) c += std::pow(a.rho, j) * a.stationary_cov;
    const int P = period();
    Matrix mm = Matrix::Zero(d, d);
    for (int p = 0; p < P; ++p) mm += mean_at(p + j, d) * mean_at(p, d).transpose();
    return c + mm / P;
  }
};

/// Linear-Gaussian cycling system analysed with a fixed gain. When `gain`
/// is empty the steady-state Kalman gain of the filter that knows only Qs
/// and R is used.
struct LinearGaussianSystem {
  Matrix M;
  Matrix H;
  Matrix Qs;
  Matrix R;
  std::optional<Matrix> gain;
  CycleForcing forcing;
};

struct OracleOptions {
  double tolerance = 1e-16;  // relative size of the last doubling update
  int max_doublings = 17;    // 2^17 plain iterations
};

struct MomentOracleResult {
  Matrix gain;
  Matrix contraction;           // M (I - K H)
  Matrix forecast_error_cov;    // covariance of eps^f (stationary)
  Matrix analysis_increment_cross;  // Cov(eps^a, dx)
  std::vector<Matrix> lag_covariance;            // Cov(dx_{n+k}, dx_n), k = 0..kmax
  std::vector<Matrix> time_mean_lag_covariance;  // with the periodic means, overall mean removed
  std::vector<Matrix> lag_second_moment;         // raw, phase averaged
  std::vector<Vector> phase_mean_increment;
  int iterations = 0;

  [[nodiscard]] int period() const { return static_cast<int>(phase_mean_increment.size()); }

  /// Trace-normalised lag series of the time-mean covariance.
  [[nodiscard]] LagCovarianceSeries time_mean_trace_series() const {
    LagCovarianceSeries s;
    s.kind = LagKind::oracle;
    for (std::size_t k = 0; k < time_mean_lag_covariance.size(); ++k) {
      s.lags.push_back(static_cast<int>(k));
      s.values.push_back(time_mean_lag_covariance[k].trace());
    }
    return s;
  }
};

inline double spectral_radius(const Matrix& A) {
  if (A.size() == 0) return 0.0;
  return Eigen::EigenSolver<Matrix>(A, false).eigenvalues().cwiseAbs().maxCoeff();
}

/// Exact first and second moments of the analysis increments from the joint
/// recursion of (eps^f_n, AR(1) states): stationary covariance and the
/// periodic orbit of the mean.
inline MomentOracleResult moment_oracle(const LinearGaussianSystem& sys, int kmax,
                                        const OracleOptions& opt = {}) {
  const Eigen::Index d = sys.M.rows();
  const Eigen::Index p = sys.H.rows();
  require_shape(sys.M, d, d, "oracle M");
  require_shape(sys.H, p, d, "oracle H");
  require_shape(sys.Qs, d, d, "oracle Qs");
  require_shape(sys.R, p, p, "oracle R");
  if (kmax < 0) throw DimensionError("oracle kmax must be >= 0");

  MomentOracleResult out;
  if (sys.gain) {
    require_shape(*sys.gain, d, p, "oracle gain");
    out.gain = *sys.gain;
  } else {
    out.gain = da::steady_state_kalman(sys.M, sys.H, sys.Qs, sys.R).K;
  }
  const Matrix& K = out.gain;
  const Matrix I = Matrix::Identity(d, d);
  out.contraction = sys.M * (I - K * sys.H);

  const auto n_ar = static_cast<Eigen::Index>(sys.forcing.ar1.size());
  const Eigen::Index m = d * (1 + n_ar);
  const Eigen::Index nw = p + d + d * n_ar;

  Matrix A = Matrix::Zero(m, m);
  A.topLeftCorner(d, d) = out.contraction;
  Matrix G = Matrix::Zero(m, nw);
  G.block(0, 0, d, p) = sys.M * K;
  G.block(0, p, d, d) = I;
  Matrix W = Matrix::Zero(nw, nw);
  W.block(0, 0, p, p) = sys.R;
  W.block(p, p, d, d) = sys.Qs;
  for (Eigen::Index a = 0; a < n_ar; ++a) {
    const auto& ar = sys.forcing.ar1[static_cast<std::size_t>(a)];
    require_shape(ar.stationary_cov, d, d, "AR(1) covariance");
    const Eigen::Index off = d * (1 + a);
    A.block(0, off, d, d) = I;
    A.block(off, off, d, d) = ar.rho * I;
    G.block(off, p + d + d * a, d, d) = I;
    W.block(p + d + d * a, p + d + d * a, d, d) = (1.0 - ar.rho * ar.rho) * ar.stationary_cov;
  }
  Matrix Psi = Matrix::Zero(d, m);
  Psi.leftCols(d) = -K * sys.H;
  Matrix Lambda = Matrix::Zero(d, nw);
  Lambda.leftCols(p) = K;
  Matrix Ea = Matrix::Zero(d, m);
  Ea.leftCols(d) = I - K * sys.H;

  const double rad = spectral_radius(A);
  if (!(rad < 1.0)) {
    throw NumericalError("moment oracle recursion is not contracting; spectral radius " +
                         std::to_string(rad));
  }

  // Stationary covariance by doubling: S <- S + A_j S A_j^T, A_j <- A_j^2.
  Matrix Sigma = G * W * G.transpose();
  Matrix Aj = A;
  bool converged = false;
  int it = 0;
  for (; it < opt.max_doublings; ++it) {
    const Matrix add = Aj * Sigma * Aj.transpose();
    Sigma = symmetrized(Sigma + add);
    if (!Sigma.allFinite()) break;
    if (add.norm() <= opt.tolerance * Sigma.norm()) {
      converged = true;
      break;
    }
    Aj = Aj * Aj;
  }
  if (!converged) {
    throw NumericalError("moment oracle did not converge; spectral radius of the recursion is " +
                         std::to_string(rad));
  }

  // Periodic orbit of the mean: mu_0 = A^P mu_0 + sum_ph A^{P-1-ph} b_ph.
  const int P = sys.forcing.period();
  std::vector<Vector> mu(static_cast<std::size_t>(P), Vector::Zero(m));
  if (!sys.forcing.zero_mean()) {
    Matrix AP = Matrix::Identity(m, m);
    Vector c = Vector::Zero(m);
    for (int ph = 0; ph < P; ++ph) {
      Vector b = Vector::Zero(m);
      b.head(d) = sys.forcing.mean_at(ph, d);
      c = A * c + b;
      AP = A * AP;
    }
    mu[0] = (Matrix::Identity(m, m) - AP).partialPivLu().solve(c);
    for (int ph = 1; ph < P; ++ph) {
      Vector b = Vector::Zero(m);
      b.head(d) = sys.forcing.mean_at(ph - 1, d);
      mu[static_cast<std::size_t>(ph)] = A * mu[static_cast<std::size_t>(ph - 1)] + b;
    }
  }
  out.iterations = it;

  out.forecast_error_cov = Sigma.topLeftCorner(d, d);
  out.analysis_increment_cross = Ea * Sigma * Psi.transpose() + K * sys.R * K.transpose();

  Matrix cross = A * Sigma * Psi.transpose() + G * W * Lambda.transpose();  // Cov(s_{n+1}, dx_n)
  out.lag_covariance.push_back(symmetrized(Psi * Sigma * Psi.transpose() +
                                           Lambda * W * Lambda.transpose()));
  for (int k = 1; k <= kmax; ++k) {
    out.lag_covariance.push_back(Psi * cross);
    cross = A * cross;
  }

  for (int ph = 0; ph < P; ++ph) out.phase_mean_increment.push_back(Psi * mu[static_cast<std::size_t>(ph)]);
  Vector overall = Vector::Zero(d);
  for (const auto& v : out.phase_mean_increment) overall += v;
  overall /= P;
  for (int k = 0; k <= kmax; ++k) {
    Matrix centred = Matrix::Zero(d, d), raw = Matrix::Zero(d, d);
    for (int ph = 0; ph < P; ++ph) {
      const Vector& later = out.phase_mean_increment[static_cast<std::size_t>((ph + k) % P)];
      const Vector& earlier = out.phase_mean_increment[static_cast<std::size_t>(ph)];
      centred += (later - overall) * (earlier - overall).transpose();
      raw += later * earlier.transpose();
    }
    out.time_mean_lag_covariance.push_back(out.lag_covariance[k] + centred / P);
    out.lag_second_moment.push_back(out.lag_covariance[k] + raw / P);
  }
  return out;
}

/// Split of the exact lag-1 increment covariance into the leading model-error
/// term, the gain-suboptimality term -K H M <eps^a dx^T>, and a norm bound on
/// everything the leading term leaves out.
struct Lag1Decomposition {
  Matrix exact;
  Matrix leading;
  Matrix suboptimality;
  double remainder_bound = 0.0;  // Frobenius bound on exact - leading

  [[nodiscard]] double relative_error() const {
    return (exact - leading).norm() / exact.norm();
  }
  [[nodiscard]] double relative_bound() const { return remainder_bound / exact.norm(); }
};

inline Lag1Decomposition decompose_lag1(const LinearGaussianSystem& sys,
                                        const MomentOracleResult& oracle) {
  if (!sys.forcing.zero_mean()) throw Error("lag-1 decomposition needs zero-mean forcing");
  if (oracle.lag_covariance.size() < 2) throw DimensionError("oracle needs kmax >= 1");
  const Eigen::Index d = sys.M.rows();
  const Matrix& K = oracle.gain;
  Lag1Decomposition out;
  out.exact = oracle.lag_covariance[1];
  out.leading = theoretical_lag1_laic(K, sys.H, sys.forcing.lag_moment(1, d), K);
  out.suboptimality = -K * sys.H * sys.M * oracle.analysis_increment_cross;

  const double kh = (K * sys.H).operatorNorm();
  const double phi = oracle.contraction.operatorNorm();
  double bound = out.suboptimality.norm();
  double phi_pow = phi;
  for (int j = 2; j < 100000; ++j) {
    const double term = kh * sys.forcing.lag_moment(j, d).norm() * phi_pow * kh;
    bound += term;
    if (term <= 1e-17 * bound) break;
    phi_pow *= phi;
    if (!std::isfinite(bound)) break;
  }
  out.remainder_bound = bound;
  return out;
}

}  // namespace laic::diag
