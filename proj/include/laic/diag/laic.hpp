#pragma once

#include "laic/core.hpp"
#include "laic/diag/autocorrelation.hpp"

namespace laic::diag {

enum class LaicEstimator { ensemble_mean, time_mean };

/// Lagged analysis increment covariance <dx_{n+k} dx_n^T> (mean removed).
struct LAICMatrix {
  int lag = 0;
  Matrix matrix;
  Matrix standard_error;  // per-entry Monte Carlo standard error
  LaicEstimator estimator = LaicEstimator::ensemble_mean;
  int samples = 0;
};

/// Ensemble estimator: `later[r]` and `earlier[r]` are the increments of
/// replicate r at cycles n+k and n.
inline LAICMatrix laic_ensemble(const std::vector<Vector>& later, const std::vector<Vector>& earlier,
                                int lag) {
  if (later.size() != earlier.size()) throw DimensionError("laic: sample counts differ");
  if (later.size() < 2) throw Error("laic: at least two samples required");
  const auto n = static_cast<Eigen::Index>(later.size());
  const Eigen::Index d = later.front().size();
  Vector mean_a = Vector::Zero(d), mean_b = Vector::Zero(d);
  for (Eigen::Index r = 0; r < n; ++r) {
    require_dim(later[r], d, "laic sample");
    require_dim(earlier[r], d, "laic sample");
    mean_a += later[r];
    mean_b += earlier[r];
  }
  mean_a /= static_cast<double>(n);
  mean_b /= static_cast<double>(n);

  Matrix sum = Matrix::Zero(d, d), sumsq = Matrix::Zero(d, d);
  for (Eigen::Index r = 0; r < n; ++r) {
    const Matrix prod = (later[r] - mean_a) * (earlier[r] - mean_b).transpose();
    sum += prod;
    sumsq += prod.cwiseProduct(prod);
  }
  LAICMatrix out;
  out.lag = lag;
  out.samples = static_cast<int>(n);
  out.estimator = LaicEstimator::ensemble_mean;
  out.matrix = sum / static_cast<double>(n);
  const Matrix var = (sumsq / static_cast<double>(n) - out.matrix.cwiseProduct(out.matrix))
                         .cwiseMax(0.0) *
                     (static_cast<double>(n) / static_cast<double>(n - 1));
  out.standard_error = (var / static_cast<double>(n)).cwiseSqrt();
  return out;
}

/// Time-mean estimator under weak stationarity: overall mean removed,
/// averaged over the N - k available pairs.
inline LAICMatrix laic_time_mean(const IncrementSeries& s, int lag) {
  s.validate();
  const int n = s.length();
  if (lag < 0 || lag >= n) throw DimensionError("laic: lag out of range");
  const int d = s.dim();
  Vector mu = Vector::Zero(d);
  for (const auto& v : s.values) mu += v;
  mu /= n;
  Matrix sum = Matrix::Zero(d, d), sumsq = Matrix::Zero(d, d);
  for (int i = 0; i + lag < n; ++i) {
    const Matrix prod = (s.values[i + lag] - mu) * (s.values[i] - mu).transpose();
    sum += prod;
    sumsq += prod.cwiseProduct(prod);
  }
  const double pairs = n - lag;
  LAICMatrix out;
  out.lag = lag;
  out.samples = static_cast<int>(pairs);
  out.estimator = LaicEstimator::time_mean;
  out.matrix = sum / pairs;
  // Serial correlation makes this a lower bound on the true sampling error.
  out.standard_error =
      ((sumsq / pairs - out.matrix.cwiseProduct(out.matrix)).cwiseMax(0.0) / pairs).cwiseSqrt();
  return out;
}

/// Leading term of the lag-1 expansion: K_{n+1} H <eta_n eta_{n-1}^T> H^T K_n^T.
inline Matrix theoretical_lag1_laic(const Matrix& K_next, const Matrix& H, const Matrix& C_eta_lag1,
                                    const Matrix& K_curr) {
  if (K_next.cols() != H.rows() || K_curr.cols() != H.rows() || C_eta_lag1.rows() != H.cols() ||
      C_eta_lag1.cols() != H.cols()) {
    throw DimensionError("theoretical_lag1_laic: shape mismatch");
  }
  return K_next * H * C_eta_lag1 * H.transpose() * K_curr.transpose();
}

/// Truncated lag-k expansion with a stationary gain K and window model M.
/// `eta_lag[j]` = <eta_{n+j} eta_n^T>. One term: K H C_k H^T K^T. Two terms
/// add K H M (I - K H) C_{k-1} H^T K^T for k >= 2; for k = 1 the second term
/// of the lag-1 series, K H C_2 ((I - K H)^T M^T) H^T K^T, is used instead.
inline Matrix theoretical_lagk_laic(const Matrix& K, const Matrix& H, const Matrix& M,
                                    const std::vector<Matrix>& eta_lag, int k, int n_terms) {
  if (n_terms != 1 && n_terms != 2) throw DimensionError("n_terms must be 1 or 2");
  if (k < 1) throw DimensionError("lag must be >= 1");
  const Eigen::Index d = M.rows();
  if (K.rows() != d || K.cols() != H.rows() || H.cols() != d || M.cols() != d) {
    throw DimensionError("theoretical_lagk_laic: shape mismatch");
  }
  const int need = (n_terms == 2 && k == 1) ? 2 : k;
  if (static_cast<int>(eta_lag.size()) <= need) throw DimensionError("not enough eta lag moments");
  for (const auto& c : eta_lag) require_shape(c, d, d, "eta lag moment");

  const Matrix KH = K * H;
  const Matrix tail = H.transpose() * K.transpose();
  Matrix out = KH * eta_lag[static_cast<std::size_t>(k)] * tail;
  if (n_terms == 2) {
    const Matrix phi = M * (Matrix::Identity(d, d) - KH);
    if (k >= 2) {
      out += KH * phi * eta_lag[static_cast<std::size_t>(k - 1)] * tail;
    } else {
      out += KH * eta_lag[2] * phi.transpose() * tail;
    }
  }
  return out;
}

}  // namespace laic::diag
