#pragma once

#include "laic/core.hpp"
#include "laic/covariance.hpp"
#include "laic/da/kalman.hpp"
#include "laic/da/variational.hpp"
#include "laic/dynamics.hpp"
#include "laic/observing.hpp"

#include <optional>
#include <variant>

namespace laic::da {

/// Rule producing the model-error background for the next window.
enum class CyclingStrategy {
  restarted,         // eta^b = 0
  cycled,            // eta^b = eta^a_{n-1}
  diurnally_cycled,  // eta^b = eta^a_{n-lag}, lag = 2 by default
};

/// `history[i]` is eta^a of cycle i. Missing history yields zero.
inline Vector model_error_background(CyclingStrategy strategy, const std::vector<Vector>& history,
                                     long n, int dim, int diurnal_lag = 2) {
  long source = -1;
  switch (strategy) {
    case CyclingStrategy::restarted:
      return Vector::Zero(dim);
    case CyclingStrategy::cycled:
      source = n - 1;
      break;
    case CyclingStrategy::diurnally_cycled:
      source = n - diurnal_lag;
      break;
  }
  if (source < 0 || source >= static_cast<long>(history.size())) return Vector::Zero(dim);
  return history[static_cast<std::size_t>(source)];
}

struct KalmanFilterScheme {
  double q_inflation = 1.0;  // multiplies the true stochastic Q_s in the filter
};

struct StrongConstraintScheme {};

struct WeakConstraintScheme {
  CyclingStrategy strategy = CyclingStrategy::cycled;
  int diurnal_lag = 2;
  std::vector<bool> active_mask;
  CovarianceSpec Q;
};

using SchemeSpec = std::variant<KalmanFilterScheme, StrongConstraintScheme, WeakConstraintScheme>;

inline std::string scheme_name(const SchemeSpec& s) {
  if (std::holds_alternative<KalmanFilterScheme>(s)) return "kf";
  if (std::holds_alternative<StrongConstraintScheme>(s)) return "sc4dvar";
  switch (std::get<WeakConstraintScheme>(s).strategy) {
    case CyclingStrategy::restarted:
      return "wc4dvar-restarted";
    case CyclingStrategy::cycled:
      return "wc4dvar-cycled";
    case CyclingStrategy::diurnally_cycled:
      return "wc4dvar-diurnal";
  }
  return "wc4dvar";
}

struct Departures {
  int time_within_window = 0;
  Vector o_minus_b;
  Vector o_minus_a;
};

/// Everything recorded for one forecast-analysis cycle.
struct AssimilationCycleRecord {
  long cycle_index = 0;
  Vector xb;
  Vector xa;
  Vector increment;
  Vector eta_a;
  Vector eta_b;
  Vector truth;  // truth at the analysis time
  std::vector<Departures> departures;
  SolverStats stats;

  [[nodiscard]] bool consistent(double tol = 0.0) const {
    return (increment - (xa - xb)).cwiseAbs().maxCoeff() <= tol;
  }
};

/// Static description of the assimilation system shared across cycles.
struct AssimilationSetup {
  SchemeSpec scheme;
  DynamicsSpec dynamics;
  Grid grid;
  obs::ObservationOperator H;
  std::shared_ptr<const RealizedCovariance> R;
  std::shared_ptr<const RealizedCovariance> B;
  Matrix Qs_step;  // true per-step stochastic covariance (zero if none)
  std::vector<int> obs_times;
  SolverOptions solver;
};

/// Sequential forecast-analysis cycling for one replicate. Consumes the
/// truth trajectory and observations of each window and keeps all scheme
/// state (background, covariance, eta history) experiment-local.
class CycleAssimilator {
 public:
  CycleAssimilator(AssimilationSetup setup, Vector initial_perturbation)
      : s_(std::move(setup)), perturbation_(std::move(initial_perturbation)) {
    const int d = s_.grid.dim;
    require_dim(perturbation_, d, "initial background perturbation");
    if (const auto* wc = std::get_if<WeakConstraintScheme>(&s_.scheme)) {
      if (static_cast<int>(wc->active_mask.size()) != d) {
        throw ConfigError("model-error mask length does not match dimension");
      }
      for (int i = 0; i < d; ++i)
        if (wc->active_mask[static_cast<std::size_t>(i)]) active_.push_back(i);
      if (active_.empty()) throw ConfigError("weak-constraint scheme needs an active component");
      Q_ = std::make_shared<const RealizedCovariance>(
          realize_covariance(wc->Q, s_.grid).restricted(active_));
    }
    if (std::holds_alternative<KalmanFilterScheme>(s_.scheme)) {
      if (s_.obs_times.size() != 1) {
        throw ConfigError("Kalman filter scheme needs exactly one observation time per window");
      }
      P_ = s_.B->matrix();
    }
  }

  [[nodiscard]] const std::vector<Vector>& eta_history() const { return eta_history_; }
  [[nodiscard]] const std::optional<Matrix>& covariance() const { return P_; }
  [[nodiscard]] const AssimilationSetup& setup() const { return s_; }

  /// One full cycle for window n.
  AssimilationCycleRecord run_cycle(long n, const Trajectory& truth_window,
                                    const std::vector<obs::ObservationBatch>& batches) {
    if (std::holds_alternative<KalmanFilterScheme>(s_.scheme)) {
      return kf_cycle(n, truth_window, batches);
    }
    return var_cycle(n, truth_window, batches);
  }

 private:
  int steps() const { return steps_per_window(s_.dynamics); }

  AssimilationCycleRecord kf_cycle(long n, const Trajectory& truth_window,
                                   const std::vector<obs::ObservationBatch>& batches) {
    const auto& kf = std::get<KalmanFilterScheme>(s_.scheme);
    const int d = s_.grid.dim;
    const int t0 = s_.obs_times.front();
    AssimilationCycleRecord rec;
    rec.cycle_index = n;
    rec.truth = truth_window.states[static_cast<std::size_t>(t0)];
    if (!background_) background_ = rec.truth + perturbation_;

    const auto& batch = batches.front();
    const auto an = kf_analysis_update(*background_, *P_, batch.values, s_.H, s_.R->matrix());
    rec.xb = *background_;
    rec.xa = an.xa;
    rec.increment = rec.xa - rec.xb;
    rec.eta_a = Vector::Zero(d);
    rec.eta_b = Vector::Zero(d);
    rec.departures.push_back(
        {t0, batch.values - s_.H.apply(rec.xb), batch.values - s_.H.apply(rec.xa)});

    const auto fc = kf_forecast_update(an.xa, an.Pa, s_.dynamics, kf.q_inflation * s_.Qs_step,
                                       Vector::Zero(d), steps());
    background_ = fc.xf;
    P_ = fc.Pf;
    eta_history_.push_back(rec.eta_a);
    return rec;
  }

  AssimilationCycleRecord var_cycle(long n, const Trajectory& truth_window,
                                    const std::vector<obs::ObservationBatch>& batches) {
    const int d = s_.grid.dim;
    AssimilationCycleRecord rec;
    rec.cycle_index = n;
    rec.truth = truth_window.front();
    if (!background_) background_ = rec.truth + perturbation_;

    WindowProblem p;
    p.dynamics = s_.dynamics;
    p.x0b = *background_;
    p.B = s_.B;
    p.H = s_.H;
    p.R = s_.R;
    p.batches = batches;
    p.etab = Vector::Zero(d);
    if (const auto* wc = std::get_if<WeakConstraintScheme>(&s_.scheme)) {
      p.active = active_;
      p.Q = Q_;
      p.etab = model_error_background(wc->strategy, eta_history_, n, d, wc->diurnal_lag);
    }
    const WindowAnalysis an = wc4dvar_solve(p, s_.solver);

    rec.xb = p.x0b;
    rec.xa = an.x0a;
    rec.increment = rec.xa - rec.xb;
    rec.eta_b = p.etab;
    rec.eta_a = an.eta_a;
    rec.stats = an.stats;

    const int horizon = std::max(steps(), p.last_obs_step());
    const Trajectory bg = integrate(p.x0b, s_.dynamics, p.etab, p.last_obs_step());
    const Trajectory analysis = integrate(an.x0a, s_.dynamics, an.eta_a, horizon);
    for (const auto& b : batches) {
      const auto t = static_cast<std::size_t>(b.time_within_window);
      rec.departures.push_back({b.time_within_window, b.values - s_.H.apply(bg.states[t]),
                                b.values - s_.H.apply(analysis.states[t])});
    }
    // The cycling forecast carries the analysed tendency through the window.
    background_ = analysis.states[static_cast<std::size_t>(steps())];
    eta_history_.push_back(rec.eta_a);
    return rec;
  }

  AssimilationSetup s_;
  Vector perturbation_;
  std::optional<Vector> background_;
  std::optional<Matrix> P_;
  std::vector<int> active_;
  std::shared_ptr<const RealizedCovariance> Q_;
  std::vector<Vector> eta_history_;
};

}  // namespace laic::da
