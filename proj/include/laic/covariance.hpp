#pragma once

#include "laic/core.hpp"
#include "laic/rng.hpp"

#include <optional>
#include <variant>

namespace laic {

enum class Kernel { gaussian, soar };

struct DiagonalCovariance {
  Vector variances;
};

/// Homogeneous covariance on the periodic grid: variance * rho(r / L) with r
/// the periodic separation in length units.
struct IsotropicCovariance {
  double variance = 1.0;
  double correlation_length = 0.0;
  Kernel kernel = Kernel::gaussian;
};

using CovarianceSpec = std::variant<DiagonalCovariance, IsotropicCovariance>;

inline double kernel_value(Kernel kernel, double r, double length) {
  if (length <= 0.0) return r == 0.0 ? 1.0 : 0.0;
  const double s = r / length;
  switch (kernel) {
    case Kernel::gaussian:
      return std::exp(-0.5 * s * s);
    case Kernel::soar:
      return (1.0 + s) * std::exp(-s);
  }
  return 0.0;
}

/// Distance at which the kernel first drops to 1/e, in length units.
inline double kernel_efolding_distance(Kernel kernel, double length) {
  switch (kernel) {
    case Kernel::gaussian:
      return std::sqrt(2.0) * length;
    case Kernel::soar: {
      // (1 + s) e^{-s} = e^{-1}; Newton from s = 2.
      double s = 2.0;
      for (int i = 0; i < 50; ++i) {
        const double f = std::log1p(s) - s + 1.0;
        const double df = 1.0 / (1.0 + s) - 1.0;
        s -= f / df;
      }
      return s * length;
    }
  }
  return 0.0;
}

/// Dense covariance together with a square-root factor (C = F F^T) for
/// sampling and, when definite, a Cholesky factor for solves.
class RealizedCovariance {
 public:
  RealizedCovariance() = default;

  explicit RealizedCovariance(Matrix cov) : matrix_(symmetrized(cov)) {
    const Eigen::Index n = matrix_.rows();
    if (n == 0) return;
    if (!matrix_.allFinite()) throw ConfigError("covariance has non-finite entries");
    Eigen::SelfAdjointEigenSolver<Matrix> eig(matrix_);
    const Vector& lambda = eig.eigenvalues();
    const double top = std::max(lambda.cwiseAbs().maxCoeff(), 1e-300);
    if (lambda.minCoeff() < -1e-8 * top) {
      throw ConfigError("covariance is not positive semi-definite (min eigenvalue " +
                        std::to_string(lambda.minCoeff()) + ")");
    }
    factor_ = eig.eigenvectors() * lambda.cwiseMax(0.0).cwiseSqrt().asDiagonal();
    Eigen::LLT<Matrix> llt(matrix_);
    if (llt.info() == Eigen::Success && lambda.minCoeff() > 1e-14 * top) llt_ = std::move(llt);
  }

  [[nodiscard]] const Matrix& matrix() const { return matrix_; }
  [[nodiscard]] const Matrix& factor() const { return factor_; }
  [[nodiscard]] Eigen::Index dim() const { return matrix_.rows(); }
  [[nodiscard]] bool definite() const { return llt_.has_value(); }

  /// C^{-1} v.
  [[nodiscard]] Vector solve(const Vector& v) const {
    if (!llt_) throw NumericalError("covariance is singular; cannot apply its inverse");
    return llt_->solve(v);
  }

  [[nodiscard]] Matrix inverse() const {
    if (!llt_) throw NumericalError("covariance is singular; cannot apply its inverse");
    return llt_->solve(Matrix::Identity(dim(), dim()));
  }

  [[nodiscard]] Vector sample(RngStream& rng) const {
    return factor_ * rng.standard_normal(factor_.cols());
  }

  /// Sub-covariance on the given indices.
  [[nodiscard]] RealizedCovariance restricted(const std::vector<int>& idx) const {
    Matrix sub(idx.size(), idx.size());
    for (std::size_t i = 0; i < idx.size(); ++i)
      for (std::size_t j = 0; j < idx.size(); ++j) sub(i, j) = matrix_(idx[i], idx[j]);
    return RealizedCovariance(sub);
  }

  [[nodiscard]] RealizedCovariance scaled(double s) const { return RealizedCovariance(s * matrix_); }

 private:
  Matrix matrix_;
  Matrix factor_;
  std::optional<Eigen::LLT<Matrix>> llt_;
};

inline Matrix covariance_matrix(const CovarianceSpec& spec, const Grid& grid) {
  const int d = grid.dim;
  return std::visit(
      [&](const auto& s) -> Matrix {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, DiagonalCovariance>) {
          require_dim(s.variances, d, "diagonal covariance");
          if ((s.variances.array() < 0.0).any()) throw ConfigError("negative variance");
          return s.variances.asDiagonal();
        } else {
          if (s.variance < 0.0) throw ConfigError("negative variance");
          if (s.correlation_length < 0.0) throw ConfigError("negative correlation length");
          Matrix c(d, d);
          for (int i = 0; i < d; ++i)
            for (int j = 0; j < d; ++j)
              c(i, j) = s.variance * kernel_value(s.kernel,
                                                  grid.periodic_offset(i, j) * grid.spacing,
                                                  s.correlation_length);
          return c;
        }
      },
      spec);
}

inline RealizedCovariance realize_covariance(const CovarianceSpec& spec, const Grid& grid) {
  return RealizedCovariance(covariance_matrix(spec, grid));
}

inline CovarianceSpec diagonal_covariance(int d, double variance) {
  return DiagonalCovariance{Vector::Constant(d, variance)};
}

}  // namespace laic
