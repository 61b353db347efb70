#pragma once

#include "laic/core.hpp"

#include <span>

namespace laic::diag {

enum class LagKind { empirical, theoretical, oracle };

/// Covariance or correlation as a function of lag, lags 0..kmax.
struct LagCovarianceSeries {
  std::vector<int> lags;
  std::vector<double> values;
  LagKind kind = LagKind::empirical;

  [[nodiscard]] double at(int k) const { return values.at(static_cast<std::size_t>(k)); }
  [[nodiscard]] int kmax() const { return static_cast<int>(lags.size()) - 1; }
};

class DegenerateSeries : public Error {
 public:
  DegenerateSeries() : Error("degenerate series: zero variance") {}
};

/// Per-cycle vectors (analysis increments or eta estimates) with their cycle
/// indices, used for the time-series diagnostics.
struct IncrementSeries {
  std::vector<long> cycles;
  std::vector<Vector> values;

  [[nodiscard]] int length() const { return static_cast<int>(values.size()); }
  [[nodiscard]] int dim() const { return values.empty() ? 0 : static_cast<int>(values.front().size()); }

  [[nodiscard]] std::vector<double> component(int i) const {
    std::vector<double> out;
    out.reserve(values.size());
    for (const auto& v : values) out.push_back(v[i]);
    return out;
  }

  void validate() const {
    if (values.size() < 2) throw Error("increment series needs at least two cycles");
    if (cycles.size() != values.size()) throw DimensionError("cycle labels do not match series");
    for (const auto& v : values) require_dim(v, dim(), "increment series entry");
  }
};

/// R_k = (1/N) sum_{i=1}^{N-k} (y_i - mu)(y_{i+k} - mu) / sigma^2 with the
/// overall mean and (1/N) variance. With normalized=false the division by
/// sigma^2 is skipped.
inline LagCovarianceSeries lagged_autocorrelation(std::span<const double> y, int kmax,
                                                  bool normalized = true) {
  const auto n = static_cast<int>(y.size());
  if (kmax < 0 || n <= kmax) throw DimensionError("lagged_autocorrelation: need N > kmax >= 0");
  double mu = 0.0;
  for (double v : y) mu += v;
  mu /= n;
  double var = 0.0;
  for (double v : y) var += (v - mu) * (v - mu);
  var /= n;
  if (!(var > 0.0)) throw DegenerateSeries();

  LagCovarianceSeries out;
  for (int k = 0; k <= kmax; ++k) {
    double acc = 0.0;
    for (int i = 0; i + k < n; ++i) acc += (y[i] - mu) * (y[i + k] - mu);
    acc /= n;
    out.lags.push_back(k);
    out.values.push_back(normalized ? acc / var : acc);
  }
  return out;
}

/// Average of the per-component R_k over the selected components
/// (all components when `components` is empty). Degenerate components are
/// skipped; if every component is degenerate the series is degenerate.
inline LagCovarianceSeries component_mean_autocorrelation(const IncrementSeries& s, int kmax,
                                                          const std::vector<int>& components = {}) {
  s.validate();
  std::vector<int> comps = components;
  if (comps.empty())
    for (int i = 0; i < s.dim(); ++i) comps.push_back(i);
  LagCovarianceSeries out;
  out.values.assign(static_cast<std::size_t>(kmax) + 1, 0.0);
  for (int k = 0; k <= kmax; ++k) out.lags.push_back(k);
  int used = 0;
  for (int c : comps) {
    const auto y = s.component(c);
    try {
      const auto r = lagged_autocorrelation(y, kmax);
      for (int k = 0; k <= kmax; ++k) out.values[k] += r.values[k];
      ++used;
    } catch (const DegenerateSeries&) {
    }
  }
  if (used == 0) throw DegenerateSeries();
  for (double& v : out.values) v /= used;
  return out;
}

/// Mean over components of |R_k|.
inline LagCovarianceSeries component_mean_abs_autocorrelation(const IncrementSeries& s, int kmax,
                                                              const std::vector<int>& components) {
  s.validate();
  LagCovarianceSeries out;
  out.values.assign(static_cast<std::size_t>(kmax) + 1, 0.0);
  for (int k = 0; k <= kmax; ++k) out.lags.push_back(k);
  int used = 0;
  for (int c : components) {
    try {
      const auto r = lagged_autocorrelation(s.component(c), kmax);
      for (int k = 0; k <= kmax; ++k) out.values[k] += std::abs(r.values[k]);
      ++used;
    } catch (const DegenerateSeries&) {
    }
  }
  if (used == 0) throw DegenerateSeries();
  for (double& v : out.values) v /= used;
  return out;
}

struct WhitenessResult {
  std::vector<double> autocorrelation;  // R_1..R_kmax
  std::vector<bool> flagged;            // |R_k| > z / sqrt(N)
  double band = 0.0;
  double ljung_box = 0.0;  // N(N+2) sum R_k^2/(N-k), compare to chi^2(kmax)
  int degrees_of_freedom = 0;

  [[nodiscard]] int flag_count() const {
    int c = 0;
    for (bool f : flagged) c += f ? 1 : 0;
    return c;
  }
};

inline WhitenessResult whiteness_test(std::span<const double> y, int kmax, double z = 1.96) {
  const auto n = static_cast<int>(y.size());
  if (n < 30) throw DimensionError("whiteness_test needs at least 30 samples");
  const auto r = lagged_autocorrelation(y, kmax);
  WhitenessResult out;
  out.band = z / std::sqrt(static_cast<double>(n));
  out.degrees_of_freedom = kmax;
  for (int k = 1; k <= kmax; ++k) {
    const double rk = r.values[k];
    out.autocorrelation.push_back(rk);
    out.flagged.push_back(std::abs(rk) > out.band);
    out.ljung_box += rk * rk / static_cast<double>(n - k);
  }
  out.ljung_box *= static_cast<double>(n) * (n + 2);
  return out;
}

}  // namespace laic::diag
