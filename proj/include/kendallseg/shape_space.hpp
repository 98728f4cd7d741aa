#pragma once

// Kendall pre-shape geometry for planar point trajectories: centering and
// scale removal, optimal SO(2) alignment, and the Procrustes distance.

#include <cmath>
#include <cstdint>
#include <utility>

#include <Eigen/Dense>

#include "kendallseg/error.hpp"

namespace kseg {

/// N x 2 point configuration; row i is the (x, y) position in frame i.
using Config = Eigen::Matrix<double, Eigen::Dynamic, 2>;

inline constexpr double kDegenerateNorm = 1e-12;

/// A point track over the contiguous frames [start_frame, start_frame + N).
struct Trajectory {
  std::int64_t id = 0;
  int start_frame = 0;
  Config points;

  int length() const { return static_cast<int>(points.rows()); }
  int end_frame() const { return start_frame + length(); }
  bool covers(int frame) const { return frame >= start_frame && frame < end_frame(); }
};

/// Planar rotation, a member of SO(2).
class Rotation2D {
 public:
  Rotation2D() : matrix_(Eigen::Matrix2d::Identity()) {}

  /// The caller guarantees `m` is orthogonal with determinant +1.
  explicit Rotation2D(const Eigen::Matrix2d& m) : matrix_(m) {}

  static Rotation2D identity() { return Rotation2D(); }

  /// Counter-clockwise rotation by `theta` radians acting on column vectors.
  static Rotation2D from_angle(double theta) {
    Eigen::Matrix2d m;
    const double c = std::cos(theta);
    const double s = std::sin(theta);
    m << c, -s, s, c;
    return Rotation2D(m);
  }

  const Eigen::Matrix2d& matrix() const { return matrix_; }

  /// Angle in (-pi, pi].
  double angle() const { return std::atan2(matrix_(1, 0), matrix_(0, 0)); }

  Rotation2D operator*(const Rotation2D& other) const {
    return Rotation2D(matrix_ * other.matrix_);
  }

  Rotation2D transpose() const { return Rotation2D(matrix_.transpose()); }

 private:
  Eigen::Matrix2d matrix_;
};

/// Centered, unit Frobenius norm configuration. Only constructible through
/// to_preshape / project_to_preshape, so the invariants always hold.
class PreShape {
 public:
  const Config& config() const { return config_; }
  int n_frames() const { return static_cast<int>(config_.rows()); }

 private:
  explicit PreShape(Config c) : config_(std::move(c)) {}
  friend PreShape project_to_preshape(const Config& config);

  Config config_;
};

inline Config center_rows(const Config& config) {
  Config centered = config;
  centered.rowwise() -= config.colwise().mean();
  return centered;
}

/// Re-centers and re-normalizes an arbitrary configuration onto the
/// pre-shape sphere. Idempotent on valid pre-shapes.
inline PreShape project_to_preshape(const Config& config) {
  if (config.rows() < 2) {
    throw Error(ErrorCode::DegenerateTrajectory, "a configuration needs at least 2 points");
  }
  Config centered = center_rows(config);
  const double norm = centered.norm();
  if (!(norm >= kDegenerateNorm)) {
    throw Error(ErrorCode::DegenerateTrajectory,
                "centered configuration has (near) zero norm; shape undefined");
  }
  centered /= norm;
  return PreShape(std::move(centered));
}

inline PreShape to_preshape(const Trajectory& traj) {
  if (traj.points.rows() < 2) {
    throw Error(ErrorCode::DegenerateTrajectory,
                "trajectory " + std::to_string(traj.id) + " has fewer than 2 points");
  }
  try {
    return project_to_preshape(traj.points);
  } catch (const Error&) {
    throw Error(ErrorCode::DegenerateTrajectory,
                "trajectory " + std::to_string(traj.id) + " has all points identical");
  }
}

namespace detail {

// Rotation R in SO(2) minimizing ||a - b R||_F. With M = b^T a = U S V^T
// this is U diag(1, det(U V^T)) V^T; in 2-D that polar factor has the closed
// form R = [[p+s, q-r], [r-q, p+s]] / h for M = [[p, q], [r, s]]. Summing M by
// hand keeps it exactly symmetric when a == b, so identical shapes give the
// identity exactly.
inline Rotation2D rotation_aligning(const Config& a, const Config& b) {
  double p = 0.0, q = 0.0, r = 0.0, s = 0.0;
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    p += b(i, 0) * a(i, 0);
    q += b(i, 0) * a(i, 1);
    r += b(i, 1) * a(i, 0);
    s += b(i, 1) * a(i, 1);
  }
  const double c = p + s;
  const double t = r - q;
  const double h = std::hypot(c, t);
  if (h == 0.0) return Rotation2D::identity();  // every rotation is optimal
  Eigen::Matrix2d m;
  m << c / h, -t / h, t / h, c / h;
  return Rotation2D(m);
}

inline void require_same_frames(int a, int b) {
  if (a != b) {
    throw Error(ErrorCode::ShapeMismatch, "pre-shapes have " + std::to_string(a) + " and " +
                                              std::to_string(b) + " frames");
  }
}

}  // namespace detail

/// Rotation R minimizing ||a - b R||_F, i.e. the rotation that carries b onto a.
inline Rotation2D optimal_rotation(const PreShape& a, const PreShape& b) {
  detail::require_same_frames(a.n_frames(), b.n_frames());
  return detail::rotation_aligning(a.config(), b.config());
}

/// Residual after optimal rotational alignment; lies in [0, 2].
inline double procrustes_distance(const PreShape& a, const PreShape& b) {
  const Rotation2D r = optimal_rotation(a, b);
  return (a.config() - b.config() * r.matrix()).norm();
}

}  // namespace kseg
