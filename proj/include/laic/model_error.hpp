#pragma once

#include "laic/core.hpp"
#include "laic/covariance.hpp"
#include "laic/rng.hpp"

#include <numbers>
#include <optional>
#include <variant>

namespace laic {

struct ZeroError {};

struct ConstantBias {
  Vector bias;  // tendency per model step
};

/// eta_{n+1} = rho eta_n + xi_n, xi_n ~ N(0, noise_cov).
struct AR1Error {
  double rho = 0.0;
  CovarianceSpec noise_cov;
};

/// amplitude * cos(2 pi (n - phase) / period_windows).
struct DiurnalError {
  Vector amplitude;
  int period_windows = 2;
  int phase = 0;
};

using ModelErrorTerm = std::variant<ZeroError, ConstantBias, AR1Error, DiurnalError>;

/// Systematic model error injected into the truth run: a sum of terms (a
/// single term is the common case, several make a composite) plus an
/// optional white per-step stochastic forcing with covariance Q_s.
struct ModelErrorProcess {
  std::vector<ModelErrorTerm> terms;
  std::optional<CovarianceSpec> stochastic;

  [[nodiscard]] bool is_zero() const {
    for (const auto& t : terms)
      if (!std::holds_alternative<ZeroError>(t)) return false;
    return true;
  }
};

inline double diurnal_factor(const DiurnalError& d, long n) {
  const long shifted = n - d.phase;
  const long period = d.period_windows;
  const long r = ((shifted % period) + period) % period;
  // Exact values at the quarter points keep period-2 and period-4 signals clean.
  if (r == 0) return 1.0;
  if (2 * r == period) return -1.0;
  if (4 * r == period || 4 * r == 3 * period) return 0.0;
  return std::cos(2.0 * std::numbers::pi * static_cast<double>(r) / static_cast<double>(period));
}

inline void validate_model_error(const ModelErrorProcess& proc, const Grid& grid) {
  std::vector<std::string> problems;
  for (const auto& term : proc.terms) {
    std::visit(
        [&](const auto& t) {
          using T = std::decay_t<decltype(t)>;
          if constexpr (std::is_same_v<T, ConstantBias>) {
            if (t.bias.size() != grid.dim) problems.push_back("constant bias: dimension mismatch");
          } else if constexpr (std::is_same_v<T, AR1Error>) {
            if (!(t.rho >= 0.0 && t.rho < 1.0)) problems.push_back("ar1: rho must lie in [0, 1)");
          } else if constexpr (std::is_same_v<T, DiurnalError>) {
            if (t.amplitude.size() != grid.dim) problems.push_back("diurnal: dimension mismatch");
            if (t.period_windows < 2) problems.push_back("diurnal: period_windows must be >= 2");
          }
        },
        term);
  }
  if (!problems.empty()) throw ConfigError(problems);
}

/// Deterministic part (constant + periodic terms) of eta_n.
inline Vector deterministic_model_error(const ModelErrorProcess& proc, long n, int dim) {
  Vector out = Vector::Zero(dim);
  for (const auto& term : proc.terms) {
    if (const auto* c = std::get_if<ConstantBias>(&term)) out += c->bias;
    if (const auto* p = std::get_if<DiurnalError>(&term)) out += diurnal_factor(*p, n) * p->amplitude;
  }
  return out;
}

/// Sequential sampler of eta_n. AR(1) terms start from their stationary
/// distribution; cycles must be requested in order 0, 1, 2, ...
class ModelErrorGenerator {
 public:
  ModelErrorGenerator(ModelErrorProcess proc, const Grid& grid, RngStream rng)
      : proc_(std::move(proc)), grid_(grid), rng_(std::move(rng)) {
    validate_model_error(proc_, grid_);
    for (const auto& term : proc_.terms) {
      if (const auto* ar = std::get_if<AR1Error>(&term)) {
        Ar1State st;
        st.rho = ar->rho;
        st.noise = realize_covariance(ar->noise_cov, grid_);
        st.value = st.noise.factor() * rng_.standard_normal(grid_.dim) /
                   std::sqrt(1.0 - ar->rho * ar->rho);
        ar1_.push_back(std::move(st));
      }
    }
    if (proc_.stochastic) stochastic_ = realize_covariance(*proc_.stochastic, grid_);
  }

  /// eta_n; n must equal next_cycle().
  Vector sample(long n) {
    if (n != next_) {
      throw Error("model-error generator: cycle " + std::to_string(n) + " requested, expected " +
                  std::to_string(next_));
    }
    Vector eta = deterministic_model_error(proc_, n, grid_.dim);
    for (auto& st : ar1_) {
      eta += st.value;
      st.value = st.rho * st.value + st.noise.sample(rng_);
    }
    ++next_;
    return eta;
  }

  [[nodiscard]] long next_cycle() const { return next_; }
  [[nodiscard]] bool has_stochastic() const { return stochastic_.has_value(); }
  [[nodiscard]] const ModelErrorProcess& process() const { return proc_; }

  /// One draw of the white stochastic term (zero if none configured).
  Vector stochastic_draw(RngStream& rng) const {
    if (!stochastic_) return Vector::Zero(grid_.dim);
    return stochastic_->sample(rng);
  }

 private:
  struct Ar1State {
    double rho = 0.0;
    RealizedCovariance noise;
    Vector value;
  };

  ModelErrorProcess proc_;
  Grid grid_;
  RngStream rng_;
  std::vector<Ar1State> ar1_;
  std::optional<RealizedCovariance> stochastic_;
  long next_ = 0;
};

/// Convenience wrapper matching the one-call form: advances `gen` to cycle n.
inline StateVector sample_model_error(ModelErrorGenerator& gen, long n) {
  return gen.sample(n);
}

/// Stationary covariance of the AR(1) terms combined: sum of noise/(1 - rho^2).
inline Matrix ar1_stationary_covariance(const ModelErrorProcess& proc, const Grid& grid) {
  Matrix c = Matrix::Zero(grid.dim, grid.dim);
  for (const auto& term : proc.terms)
    if (const auto* ar = std::get_if<AR1Error>(&term))
      c += covariance_matrix(ar->noise_cov, grid) / (1.0 - ar->rho * ar->rho);
  return c;
}

}  // namespace laic
