#pragma once

#include "laic/core.hpp"
#include "laic/covariance.hpp"
#include "laic/dynamics.hpp"
#include "laic/rng.hpp"

#include <variant>

namespace laic::obs {

struct EveryKth {
  int stride = 1;
  int offset = 0;
};

struct IndexSet {
  std::vector<int> indices;
};

struct Full {};

using ObservationOperatorSpec = std::variant<EveryKth, IndexSet, Full>;

/// Selection operator: row r of H picks grid point indices()[r].
class ObservationOperator {
 public:
  ObservationOperator() = default;

  ObservationOperator(const ObservationOperatorSpec& spec, int dim) : dim_(dim) {
    std::visit(
        [&](const auto& s) {
          using T = std::decay_t<decltype(s)>;
          if constexpr (std::is_same_v<T, Full>) {
            for (int i = 0; i < dim; ++i) indices_.push_back(i);
          } else if constexpr (std::is_same_v<T, EveryKth>) {
            if (s.stride < 1) throw ConfigError("observation stride must be >= 1");
            if (s.offset < 0 || s.offset >= dim) throw ConfigError("observation offset out of range");
            for (int i = s.offset; i < dim; i += s.stride) indices_.push_back(i);
          } else {
            indices_ = s.indices;
          }
        },
        spec);
    if (indices_.empty()) throw ConfigError("observation operator selects no components");
    for (int i : indices_) {
      if (i < 0 || i >= dim) {
        throw ConfigError("observation index " + std::to_string(i) + " outside [0, " +
                          std::to_string(dim) + ")");
      }
    }
  }

  [[nodiscard]] int state_dim() const { return dim_; }
  [[nodiscard]] int obs_dim() const { return static_cast<int>(indices_.size()); }
  [[nodiscard]] const std::vector<int>& indices() const { return indices_; }

  [[nodiscard]] Vector apply(const Vector& x) const {
    require_dim(x, dim_, "apply_H");
    Vector y(obs_dim());
    for (int r = 0; r < obs_dim(); ++r) y[r] = x[indices_[r]];
    return y;
  }

  /// H^T y: scatter-add into state space.
  [[nodiscard]] Vector adjoint(const Vector& y) const {
    require_dim(y, obs_dim(), "apply_H adjoint");
    Vector x = Vector::Zero(dim_);
    for (int r = 0; r < obs_dim(); ++r) x[indices_[r]] += y[r];
    return x;
  }

  [[nodiscard]] Matrix matrix() const {
    Matrix h = Matrix::Zero(obs_dim(), dim_);
    for (int r = 0; r < obs_dim(); ++r) h(r, indices_[r]) = 1.0;
    return h;
  }

  /// Observation-space covariance from a grid covariance spec, restricted to
  /// the observed points.
  [[nodiscard]] RealizedCovariance observation_covariance(const CovarianceSpec& spec,
                                                          const Grid& grid) const {
    return RealizedCovariance(covariance_matrix(spec, grid)).restricted(indices_);
  }

 private:
  int dim_ = 0;
  std::vector<int> indices_;
};

inline Vector apply_H(const ObservationOperatorSpec& spec, const Vector& x) {
  return ObservationOperator(spec, static_cast<int>(x.size())).apply(x);
}

struct ObservationBatch {
  long cycle_index = 0;
  int time_within_window = 0;
  Vector values;
};

/// y = H x^t + eps^o at each requested step of the truth trajectory; errors
/// independent across batches.
inline std::vector<ObservationBatch> generate_observations(const Trajectory& truth_traj,
                                                           const ObservationOperator& H,
                                                           const RealizedCovariance& R,
                                                           const std::vector<int>& obs_times,
                                                           long cycle_index, RngStream& rng) {
  if (R.dim() != H.obs_dim()) throw DimensionError("observation error covariance size mismatch");
  std::vector<ObservationBatch> out;
  out.reserve(obs_times.size());
  for (int t : obs_times) {
    if (t < 0 || t > truth_traj.steps()) {
      throw DimensionError("observation time " + std::to_string(t) + " outside the window");
    }
    ObservationBatch b;
    b.cycle_index = cycle_index;
    b.time_within_window = t;
    b.values = H.apply(truth_traj.states[static_cast<std::size_t>(t)]) + R.sample(rng);
    out.push_back(std::move(b));
  }
  return out;
}

}  // namespace laic::obs
