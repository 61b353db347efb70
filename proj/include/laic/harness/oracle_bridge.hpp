#pragma once

#include "laic/diag/laic.hpp"
#include "laic/diag/moment_oracle.hpp"
#include "laic/harness/experiment.hpp"

#include <numeric>

namespace laic::harness {

class UnsupportedConfig : public ConfigError {
 public:
  explicit UnsupportedConfig(const std::string& why) : ConfigError("unsupported config for the oracle: " + why) {}
};

/// Window-level linear-Gaussian system equivalent to a step-level linear
/// Kalman-filter experiment observed once per window at step 0 or S.
///   M_c = M^S, G = sum_{j<S} M^j, Q_c = sum_j M^j Q_s M^jT,
/// and the cycle forcing is -G eta^t_{n+delta} (delta = 1 when observing at S).
inline diag::LinearGaussianSystem oracle_system(const ExperimentConfig& c) {
  const auto* lin = std::get_if<LinearDynamics>(&c.dynamics);
  if (!lin) throw UnsupportedConfig("dynamics must be linear");
  const auto* kf = std::get_if<da::KalmanFilterScheme>(&c.scheme);
  if (!kf) throw UnsupportedConfig("scheme must be kf");
  const auto times = c.effective_obs_times();
  const int S = lin->steps_per_window;
  if (times.size() != 1 || (times.front() != 0 && times.front() != S)) {
    throw UnsupportedConfig("exactly one observation time at step 0 or step " + std::to_string(S) + " is required");
  }
  const int delta = times.front() == S ? 1 : 0;
  const int d = c.dimension;
  const Grid g = c.grid();

  const Matrix Qs = stochastic_step_covariance(c);
  Matrix Mc = Matrix::Identity(d, d), G = Matrix::Zero(d, d), Qc = Matrix::Zero(d, d);
  for (int j = 0; j < S; ++j) {
    G += Mc;
    Qc += Mc * Qs * Mc.transpose();
    Mc = lin->M * Mc;
  }

  diag::LinearGaussianSystem sys;
  sys.M = Mc;
  const obs::ObservationOperator H(c.obs_network, d);
  sys.H = H.matrix();
  sys.Qs = symmetrized(Qc);
  sys.R = H.observation_covariance(c.R, g).matrix();
  sys.gain = da::steady_state_kalman(sys.M, sys.H, kf->q_inflation * sys.Qs, sys.R).K;

  int period = 1;
  for (const auto& t : c.truth_error.terms)
    if (const auto* di = std::get_if<DiurnalError>(&t)) period = std::lcm(period, di->period_windows);
  Vector constant = Vector::Zero(d);
  bool has_periodic = false;
  for (const auto& t : c.truth_error.terms) {
    if (const auto* b = std::get_if<ConstantBias>(&t)) constant -= G * b->bias;
    if (std::holds_alternative<DiurnalError>(t)) has_periodic = true;
    if (const auto* ar = std::get_if<AR1Error>(&t)) {
      const Matrix stat = covariance_matrix(ar->noise_cov, g) / (1.0 - ar->rho * ar->rho);
      sys.forcing.ar1.push_back({ar->rho, G * stat * G.transpose()});
    }
  }
  sys.forcing.constant = constant;
  if (has_periodic) {
    for (int p = 0; p < period; ++p) {
      Vector v = Vector::Zero(d);
      for (const auto& t : c.truth_error.terms)
        if (const auto* di = std::get_if<DiurnalError>(&t)) v -= G * (diurnal_factor(*di, p + delta) * di->amplitude);
      sys.forcing.periodic.push_back(v);
    }
  }
  return sys;
}

struct OracleTables {
  diag::LinearGaussianSystem system;
  diag::MomentOracleResult result;
  std::optional<diag::Lag1Decomposition> lag1;
};

inline OracleTables run_oracle(const ExperimentConfig& c, int kmax) {
  OracleTables out;
  out.system = oracle_system(c);
  out.result = diag::moment_oracle(out.system, std::max(kmax, 1));
  if (out.system.forcing.zero_mean()) out.lag1 = diag::decompose_lag1(out.system, out.result);
  return out;
}

/// Ensemble (across replicates) LAIC at lags 0..kmax between cycles
/// `start + k` and `start`. Only the needed increments are kept.
inline std::vector<diag::LAICMatrix> ensemble_laic(const ExperimentConfig& base, long start, int kmax,
                                                   int threads = 1) {
  ExperimentConfig c = base;
  c.cycles = static_cast<int>(start) + kmax + 1;
  const int R = c.replicates;
  const int d = c.dimension;
  std::vector<Matrix> captured(static_cast<std::size_t>(kmax) + 1, Matrix::Zero(d, R));
  parallel_for(R, threads, [&](int r) {
    run_replicate(c, r, [&](const WindowData&, const da::AssimilationCycleRecord& rec) {
      const long k = rec.cycle_index - start;
      if (k >= 0 && k <= kmax) captured[static_cast<std::size_t>(k)].col(r) = rec.increment;
    });
  });
  auto columns = [&](int k) {
    std::vector<Vector> v;
    v.reserve(static_cast<std::size_t>(R));
    for (int r = 0; r < R; ++r) v.emplace_back(captured[static_cast<std::size_t>(k)].col(r));
    return v;
  };
  const auto earlier = columns(0);
  std::vector<diag::LAICMatrix> out;
  for (int k = 0; k <= kmax; ++k) out.push_back(diag::laic_ensemble(columns(k), earlier, k));
  return out;
}

}  // namespace laic::harness
