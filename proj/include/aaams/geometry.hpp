#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>

#include <Eigen/Core>
#include <Eigen/Eigenvalues>

namespace aaams {

enum class KernelFamily { kGaussian, kEpanechnikov };

/// Radially symmetric kernel profile evaluated on squared Mahalanobis
/// distances. `value` is K(t), `weight` is |K'(t)| (the mean-shift weight);
/// both vanish beyond the truncation cutoff.
struct KernelProfile {
  KernelFamily family = KernelFamily::kGaussian;
  double support_radius = 3.0;  // Mahalanobis cutoff, dimensionless

  /// Squared-distance cutoff. The Epanechnikov profile's own support
  /// ends at t = 1, which caps the truncation radius.
  double cutoff_sq() const {
    const double r2 = support_radius * support_radius;
    return family == KernelFamily::kEpanechnikov ? std::min(1.0, r2) : r2;
  }

  double value(double t) const {
    if (t < 0.0) throw std::invalid_argument("kernel argument must be >= 0");
    if (t > cutoff_sq()) return 0.0;
    switch (family) {
      case KernelFamily::kGaussian:
        return std::exp(-0.5 * t);
      case KernelFamily::kEpanechnikov:
        return 1.0 - t;
    }
    return 0.0;
  }

  double weight(double t) const {
    if (t < 0.0) throw std::invalid_argument("kernel argument must be >= 0");
    if (t > cutoff_sq()) return 0.0;
    switch (family) {
      case KernelFamily::kGaussian:
        return 0.5 * std::exp(-0.5 * t);
      case KernelFamily::kEpanechnikov:
        return 1.0;
    }
    return 0.0;
  }
};

inline double kernel_value(double t, const KernelProfile& profile) {
  return profile.value(t);
}

inline double kernel_weight(double t, const KernelProfile& profile) {
  return profile.weight(t);
}

namespace detail {

inline void check_symmetric(const Eigen::MatrixXd& m, const char* what) {
  if (m.rows() != m.cols())
    throw std::invalid_argument(std::string(what) + ": matrix is not square");
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  const double asym = (m - m.transpose()).cwiseAbs().maxCoeff();
  if (asym > 1e-12 * scale)
    throw std::invalid_argument(std::string(what) + ": matrix is not symmetric");
}

}  // namespace detail

/// Symmetric positive-definite matrix with its inverse, log-determinant and
/// eigendecomposition computed at construction. Immutable, so instances are
/// safe to share across threads.
class SpdMatrix {
 public:
  SpdMatrix() = default;

  explicit SpdMatrix(const Eigen::MatrixXd& m) {
    detail::check_symmetric(m, "SpdMatrix");
    Eigen::MatrixXd sym = 0.5 * (m + m.transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(sym);
    if (solver.info() != Eigen::Success)
      throw std::runtime_error("SpdMatrix: eigendecomposition failed");
    init(sym, solver.eigenvectors(), solver.eigenvalues());
  }

  /// sigma_sq * I.
  static SpdMatrix isotropic(int dim, double sigma_sq) {
    if (dim < 1 || sigma_sq <= 0.0)
      throw std::invalid_argument("SpdMatrix::isotropic: bad arguments");
    SpdMatrix s;
    s.init(sigma_sq * Eigen::MatrixXd::Identity(dim, dim),
           Eigen::MatrixXd::Identity(dim, dim),
           Eigen::VectorXd::Constant(dim, sigma_sq));
    return s;
  }

  /// Reassemble from a known eigensystem (eigenvalues must be positive).
  static SpdMatrix from_eigensystem(const Eigen::MatrixXd& vectors,
                                    const Eigen::VectorXd& values) {
    SpdMatrix s;
    Eigen::MatrixXd m = vectors * values.asDiagonal() * vectors.transpose();
    s.init(0.5 * (m + m.transpose()), vectors, values);
    return s;
  }

  int dim() const { return static_cast<int>(matrix_.rows()); }
  const Eigen::MatrixXd& matrix() const { return matrix_; }
  const Eigen::MatrixXd& inverse() const { return inverse_; }
  double log_det() const { return log_det_; }
  const Eigen::VectorXd& eigenvalues() const { return eigenvalues_; }
  const Eigen::MatrixXd& eigenvectors() const { return eigenvectors_; }
  double min_eigenvalue() const { return eigenvalues_.minCoeff(); }

 private:
  void init(Eigen::MatrixXd m, Eigen::MatrixXd vectors, Eigen::VectorXd values) {
    if (values.minCoeff() <= 0.0)
      throw std::invalid_argument("SpdMatrix: matrix is not positive definite");
    matrix_ = std::move(m);
    eigenvectors_ = std::move(vectors);
    eigenvalues_ = std::move(values);
    inverse_ = eigenvectors_ * eigenvalues_.cwiseInverse().asDiagonal() *
               eigenvectors_.transpose();
    inverse_ = 0.5 * (inverse_ + inverse_.transpose()).eval();
    log_det_ = eigenvalues_.array().log().sum();
  }

  Eigen::MatrixXd matrix_;
  Eigen::MatrixXd inverse_;
  Eigen::MatrixXd eigenvectors_;
  Eigen::VectorXd eigenvalues_;
  double log_det_ = 0.0;
};

/// Squared Mahalanobis distance (x-y)' s^-1 (x-y).
inline double mahalanobis_sq(const Eigen::Ref<const Eigen::VectorXd>& x,
                             const Eigen::Ref<const Eigen::VectorXd>& y,
                             const SpdMatrix& s) {
  if (x.size() != y.size() || x.size() != s.dim())
    throw std::invalid_argument("mahalanobis_sq: dimension mismatch");
  const Eigen::VectorXd d = x - y;
  return std::max(0.0, d.dot(s.inverse() * d));
}

/// Eigenvalue floor: eigenvalues of `m` below `floor` are replaced by it.
/// The result is assembled straight from the clamped spectrum, so
/// min_eigenvalue() honors the floor exactly.
inline SpdMatrix clamp_spd(const Eigen::MatrixXd& m, double floor) {
  if (floor <= 0.0) throw std::invalid_argument("clamp_spd: floor must be > 0");
  detail::check_symmetric(m, "clamp_spd");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(0.5 * (m + m.transpose()));
  if (solver.info() != Eigen::Success)
    throw std::runtime_error("clamp_spd: eigendecomposition failed");
  Eigen::VectorXd values = solver.eigenvalues().cwiseMax(floor);
  return SpdMatrix::from_eigensystem(solver.eigenvectors(), values);
}

}  // namespace aaams
