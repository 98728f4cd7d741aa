#pragma once

// Per-cluster Generalized Procrustes Analysis (Frechet mean estimate),
// Jacobi stabilization of the mean, and back-transformation of the
// stabilized mean onto each member's frame.

#include <cmath>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "kendallseg/error.hpp"
#include "kendallseg/shape_space.hpp"

namespace kseg {

inline constexpr double kDefaultLambda = 0.2;
inline constexpr double kHighJitterLambda = 0.6;
inline constexpr int kDefaultJacobiIters = 5;

struct GpaResult {
  std::vector<Rotation2D> rotations;  // one per member, in member order
  Config mean;                        // (1/K) sum_j Z_j R_j
  double objective = 0.0;             // (1/K) sum_i ||Z_i R_i - mean||^2
  std::vector<double> history;        // objective after each accepted sweep
};

struct StabilizedMean {
  Config config;
  double lambda = kDefaultLambda;
  int jacobi_iters = kDefaultJacobiIters;
};

namespace detail {

// Running mean; identical inputs reproduce the input bit-for-bit.
inline Config rotated_mean(std::span<const PreShape> shapes, std::span<const int> members,
                           std::span<const Rotation2D> rotations) {
  Config mean = Config::Zero(shapes[members[0]].n_frames(), 2);
  for (std::size_t k = 0; k < members.size(); ++k) {
    const Config rotated = shapes[members[k]].config() * rotations[k].matrix();
    mean += (rotated - mean) / static_cast<double>(k + 1);
  }
  return mean;
}

inline double gpa_objective(std::span<const PreShape> shapes, std::span<const int> members,
                            std::span<const Rotation2D> rotations, const Config& mean) {
  double total = 0.0;
  for (std::size_t k = 0; k < members.size(); ++k) {
    total += (shapes[members[k]].config() * rotations[k].matrix() - mean).squaredNorm();
  }
  return total / static_cast<double>(members.size());
}

}  // namespace detail

/// Alternating GPA: rotations start at identity; each sweep re-solves every
/// member's rotation against the current mean and recomputes the mean. A
/// sweep is only kept if it does not increase the objective; iteration stops
/// once the decrease falls below 1e-10 or after 50 sweeps. The rotational
/// gauge is fixed by making the first member's rotation the identity.
inline GpaResult gpa_align(std::span<const PreShape> shapes, std::span<const int> members) {
  constexpr double kTol = 1e-10;
  constexpr int kMaxSweeps = 50;

  if (members.empty()) throw Error(ErrorCode::EmptyCluster, "gpa_align on an empty cluster");
  for (int idx : members) {
    if (idx < 0 || static_cast<std::size_t>(idx) >= shapes.size()) {
      throw Error(ErrorCode::InvalidParameter, "member index out of range");
    }
    detail::require_same_frames(shapes[members[0]].n_frames(), shapes[idx].n_frames());
  }

  GpaResult result;
  result.rotations.assign(members.size(), Rotation2D::identity());
  result.mean = detail::rotated_mean(shapes, members, result.rotations);
  result.objective = detail::gpa_objective(shapes, members, result.rotations, result.mean);
  result.history.push_back(result.objective);

  for (int sweep = 0; sweep < kMaxSweeps; ++sweep) {
    std::vector<Rotation2D> next(members.size());
    for (std::size_t k = 0; k < members.size(); ++k) {
      next[k] = detail::rotation_aligning(result.mean, shapes[members[k]].config());
    }
    Config next_mean = detail::rotated_mean(shapes, members, next);
    const double next_obj = detail::gpa_objective(shapes, members, next, next_mean);
    if (next_obj > result.objective) break;
    const double decrease = result.objective - next_obj;
    result.rotations = std::move(next);
    result.mean = std::move(next_mean);
    result.objective = next_obj;
    result.history.push_back(next_obj);
    if (decrease < kTol) break;
  }

  const Rotation2D gauge = result.rotations.front().transpose();
  if (!gauge.matrix().isIdentity(0.0)) {
    for (auto& r : result.rotations) r = r * gauge;
    result.rotations.front() = Rotation2D::identity();
    result.mean = detail::rotated_mean(shapes, members, result.rotations);
    result.objective = detail::gpa_objective(shapes, members, result.rotations, result.mean);
  }
  return result;
}

namespace detail {

inline void validate_stabilizer(const Config& mean, double lambda) {
  if (mean.rows() < 2) throw Error(ErrorCode::InvalidParameter, "mean needs at least 2 rows");
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
    throw Error(ErrorCode::InvalidParameter, "lambda must be a finite number >= 0");
  }
}

// One simultaneous Jacobi sweep of
//   x_r <- alpha * mean_r + beta * sum_{i != r} x_i,
//   alpha = 1 / (1 + lambda - lambda / N),  beta = (lambda / N) * alpha.
// Since alpha + (N - 1) beta = 1 this equals
//   x_r <- mean_r + beta * sum_{i != r} (x_i - mean_r),
// the form used here: it reproduces mean exactly when lambda = 0 and leaves a
// constant-row input exactly fixed.
inline Config jacobi_sweep(const Config& mean, const Config& current, double beta) {
  const Eigen::Index n = mean.rows();
  Config next(n, 2);
  for (Eigen::Index r = 0; r < n; ++r) {
    Eigen::RowVector2d acc = Eigen::RowVector2d::Zero();
    for (Eigen::Index i = 0; i < n; ++i) {
      if (i != r) acc += current.row(i) - mean.row(r);
    }
    next.row(r) = mean.row(r) + beta * acc;
  }
  return next;
}

inline double jacobi_beta(Eigen::Index n, double lambda) {
  const double nd = static_cast<double>(n);
  const double alpha = 1.0 / (1.0 + lambda - lambda / nd);
  return (lambda / nd) * alpha;
}

}  // namespace detail

/// Runs exactly `t` Jacobi sweeps starting from the input mean.
inline StabilizedMean stabilize_mean(const Config& mean, double lambda = kDefaultLambda,
                                     int t = kDefaultJacobiIters) {
  detail::validate_stabilizer(mean, lambda);
  if (t < 1) throw Error(ErrorCode::InvalidParameter, "jacobi iteration count must be >= 1");
  const double beta = detail::jacobi_beta(mean.rows(), lambda);
  Config x = mean;
  for (int i = 0; i < t; ++i) x = detail::jacobi_sweep(mean, x, beta);
  return StabilizedMean{std::move(x), lambda, t};
}

/// Test-only convergence mode: sweeps until the max-abs change between
/// iterates is <= tol, or `max_iters` sweeps have run.
inline StabilizedMean stabilize_mean_converged(const Config& mean, double lambda, double tol = 1e-10,
                                               int max_iters = 100000) {
  detail::validate_stabilizer(mean, lambda);
  const double beta = detail::jacobi_beta(mean.rows(), lambda);
  Config x = mean;
  int iters = 0;
  while (iters < max_iters) {
    Config next = detail::jacobi_sweep(mean, x, beta);
    ++iters;
    const double change = (next - x).cwiseAbs().maxCoeff();
    x = std::move(next);
    if (change <= tol) break;
  }
  return StabilizedMean{std::move(x), lambda, iters};
}

/// Member k receives stab.config * rotations[k]^T.
inline std::vector<Config> back_transform(const StabilizedMean& stab,
                                          std::span<const Rotation2D> rotations) {
  std::vector<Config> out;
  out.reserve(rotations.size());
  for (const auto& r : rotations) out.emplace_back(stab.config * r.matrix().transpose());
  return out;
}

}  // namespace kseg
