#pragma once

#include "laic/core.hpp"
#include "laic/da/cycling.hpp"
#include "laic/diag/autocorrelation.hpp"

#include <optional>
#include <span>

namespace laic::diag {

enum class Variable { increment, eta_a };

inline std::string variable_name(Variable v) { return v == Variable::increment ? "increment" : "eta_a"; }

inline IncrementSeries series_from_records(std::span<const da::AssimilationCycleRecord> records,
                                           Variable v = Variable::increment) {
  IncrementSeries s;
  for (const auto& r : records) {
    s.cycles.push_back(r.cycle_index);
    s.values.push_back(v == Variable::increment ? r.increment : r.eta_a);
  }
  return s;
}

struct PhaseMeans {
  int period = 1;
  std::vector<Vector> mean;
  std::vector<Vector> standard_error;
  std::vector<int> count;
};

/// Means grouped by cycle index mod period.
inline PhaseMeans mean_increment_by_phase(const IncrementSeries& s, int period) {
  if (period < 1) throw DimensionError("phase period must be >= 1");
  if (s.length() < period) throw DimensionError("series shorter than the phase period");
  const int d = s.dim();
  PhaseMeans out;
  out.period = period;
  out.mean.assign(static_cast<std::size_t>(period), Vector::Zero(d));
  out.standard_error.assign(static_cast<std::size_t>(period), Vector::Zero(d));
  out.count.assign(static_cast<std::size_t>(period), 0);
  std::vector<Vector> sq(static_cast<std::size_t>(period), Vector::Zero(d));
  for (int i = 0; i < s.length(); ++i) {
    const long c = s.cycles.empty() ? i : s.cycles[static_cast<std::size_t>(i)];
    const auto ph = static_cast<std::size_t>(((c % period) + period) % period);
    out.mean[ph] += s.values[static_cast<std::size_t>(i)];
    sq[ph] += s.values[static_cast<std::size_t>(i)].cwiseAbs2();
    ++out.count[ph];
  }
  for (std::size_t ph = 0; ph < out.mean.size(); ++ph) {
    const int n = out.count[ph];
    if (n == 0) continue;
    out.mean[ph] /= n;
    if (n > 1) {
      const Vector var = ((sq[ph] / n - out.mean[ph].cwiseAbs2()) * (double(n) / (n - 1))).cwiseMax(0.0);
      out.standard_error[ph] = (var / n).cwiseSqrt();
    }
  }
  return out;
}

struct MomentProfile {
  Vector mean;
  Vector stddev;
  int samples = 0;
};

inline MomentProfile moment_profile(const std::vector<Vector>& xs) {
  if (xs.empty()) throw Error("moment profile of an empty sample");
  const Eigen::Index d = xs.front().size();
  MomentProfile out;
  out.samples = static_cast<int>(xs.size());
  out.mean = Vector::Zero(d);
  for (const auto& x : xs) out.mean += x;
  out.mean /= static_cast<double>(xs.size());
  out.stddev = Vector::Zero(d);
  for (const auto& x : xs) out.stddev += (x - out.mean).cwiseAbs2();
  out.stddev = (out.stddev / static_cast<double>(xs.size())).cwiseSqrt();
  return out;
}

enum class DepartureSplit { o_minus_b, o_minus_a };

/// Per observed component mean and standard deviation of the departures,
/// pooled over all batches of all cycles.
inline MomentProfile departure_statistics(std::span<const da::AssimilationCycleRecord> records,
                                          DepartureSplit split) {
  std::vector<Vector> xs;
  for (const auto& r : records)
    for (const auto& dep : r.departures)
      xs.push_back(split == DepartureSplit::o_minus_b ? dep.o_minus_b : dep.o_minus_a);
  return moment_profile(xs);
}

inline Vector increment_stddev(std::span<const da::AssimilationCycleRecord> records) {
  std::vector<Vector> xs;
  for (const auto& r : records) xs.push_back(r.increment);
  return moment_profile(xs).stddev;
}

struct StddevComparison {
  Vector sigma_a;
  Vector sigma_b;
  Vector relative_percent;  // 100 (sigma_a - sigma_b) / sigma_b
};

inline StddevComparison increment_stddev_profile(std::span<const da::AssimilationCycleRecord> a,
                                                 std::span<const da::AssimilationCycleRecord> b) {
  if (a.size() != b.size()) throw DimensionError("experiments differ in cycle count");
  StddevComparison out;
  out.sigma_a = increment_stddev(a);
  out.sigma_b = increment_stddev(b);
  if (out.sigma_a.size() != out.sigma_b.size()) throw DimensionError("experiments differ in grid");
  if ((out.sigma_b.array() == 0.0).any()) throw Error("reference increment stddev is zero");
  out.relative_percent = 100.0 * (out.sigma_a - out.sigma_b).cwiseQuotient(out.sigma_b);
  return out;
}

/// Mean |value| per component.
inline Vector mean_abs_profile(const IncrementSeries& s) {
  if (s.values.empty()) throw Error("mean |x| of an empty series");
  Vector out = Vector::Zero(s.dim());
  for (const auto& v : s.values) out += v.cwiseAbs();
  return out / s.length();
}

/// Circular spatial autocorrelation of the mean-removed field for
/// separations 0..d/2.
inline std::vector<double> circular_autocorrelation(const Vector& field) {
  const auto d = static_cast<int>(field.size());
  const Vector f = field.array() - field.mean();
  const double c0 = f.squaredNorm() / d;
  std::vector<double> out;
  if (!(c0 > 0.0)) return out;
  for (int r = 0; r <= d / 2; ++r) {
    double acc = 0.0;
    for (int i = 0; i < d; ++i) acc += f[i] * f[(i + r) % d];
    out.push_back(acc / d / c0);
  }
  return out;
}

/// Separation (grid units) where the circular autocorrelation first drops
/// below 1/e, linearly interpolated. Empty for a zero-variance field or if
/// no crossing occurs within half the domain.
inline std::optional<double> spatial_length_scale(const Vector& field) {
  if (field.size() < 8) throw DimensionError("length scale needs d >= 8");
  const auto c = circular_autocorrelation(field);
  if (c.empty()) return std::nullopt;
  const double level = std::exp(-1.0);
  for (std::size_t r = 1; r < c.size(); ++r) {
    if (c[r] < level) {
      const double frac = (c[r - 1] - level) / (c[r - 1] - c[r]);
      return static_cast<double>(r - 1) + frac;
    }
  }
  return std::nullopt;
}

struct LengthScaleSeries {
  std::vector<std::optional<double>> per_snapshot;
  double time_mean = 0.0;
  int used = 0;
};

inline LengthScaleSeries spatial_length_scales(const std::vector<Vector>& fields) {
  LengthScaleSeries out;
  double acc = 0.0;
  for (const auto& f : fields) {
    out.per_snapshot.push_back(spatial_length_scale(f));
    if (out.per_snapshot.back()) {
      acc += *out.per_snapshot.back();
      ++out.used;
    }
  }
  out.time_mean = out.used ? acc / out.used : std::numeric_limits<double>::quiet_NaN();
  return out;
}

}  // namespace laic::diag
