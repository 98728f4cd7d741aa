#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "kendallseg/error.hpp"
#include "kendallseg/shape_space.hpp"

namespace kseg {

inline constexpr double kDefaultOmega = 0.02;
inline constexpr int kDefaultClusters = 2;

/// K x K matrix of exp(-d_proc(i, j) / omega).
struct AffinityMatrix {
  Eigen::MatrixXd values;
  double omega = kDefaultOmega;

  Eigen::Index size() const { return values.rows(); }
};

struct ClusterAssignment {
  std::vector<int> labels;
  int m = kDefaultClusters;

  std::vector<int> members(int cluster) const {
    std::vector<int> out;
    for (int i = 0; i < static_cast<int>(labels.size()); ++i) {
      if (labels[i] == cluster) out.push_back(i);
    }
    return out;
  }
};

inline AffinityMatrix build_affinity(std::span<const PreShape> shapes,
                                     double omega = kDefaultOmega) {
  if (!(omega > 0.0) || !std::isfinite(omega)) {
    throw Error(ErrorCode::InvalidParameter, "omega must be a positive finite number");
  }
  if (shapes.size() < 2) {
    throw Error(ErrorCode::InvalidParameter, "affinity needs at least 2 shapes");
  }
  const auto k = static_cast<Eigen::Index>(shapes.size());
  for (const auto& s : shapes) detail::require_same_frames(shapes.front().n_frames(), s.n_frames());

  AffinityMatrix afy{Eigen::MatrixXd::Ones(k, k), omega};
  for (Eigen::Index i = 0; i < k; ++i) {
    for (Eigen::Index j = i + 1; j < k; ++j) {
      const double d = procrustes_distance(shapes[i], shapes[j]);
      const double v = std::exp(-d / omega);
      afy.values(i, j) = v;
      afy.values(j, i) = v;
    }
  }
  return afy;
}

namespace detail {

// Flip each column so its first component above `eps` in magnitude is positive.
inline void canonicalize_signs(Eigen::MatrixXd& vectors, double eps = 1e-12) {
  for (Eigen::Index c = 0; c < vectors.cols(); ++c) {
    for (Eigen::Index r = 0; r < vectors.rows(); ++r) {
      if (std::abs(vectors(r, c)) > eps) {
        if (vectors(r, c) < 0.0) vectors.col(c) *= -1.0;
        break;
      }
    }
  }
}

inline int nearest_center(const Eigen::MatrixXd& points, Eigen::Index row,
                          const Eigen::MatrixXd& centers) {
  int best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (Eigen::Index c = 0; c < centers.rows(); ++c) {
    const double d = (points.row(row) - centers.row(c)).squaredNorm();
    if (d < best_d) {
      best_d = d;
      best = static_cast<int>(c);
    }
  }
  return best;
}

// Farthest-first initialization: the first center is a seed-chosen row, each
// next center is the row farthest from its nearest chosen center (lowest
// index on ties). Lloyd iterations run until assignments stop changing.
// Returns an empty vector if some cluster ends up with no members.
inline std::vector<int> kmeans(const Eigen::MatrixXd& points, int m, std::uint64_t seed,
                               int max_iters = 100) {
  const Eigen::Index n = points.rows();
  std::mt19937_64 rng(seed);
  const auto first = static_cast<Eigen::Index>(rng() % static_cast<std::uint64_t>(n));

  Eigen::MatrixXd centers(m, points.cols());
  centers.row(0) = points.row(first);
  Eigen::VectorXd nearest_d2(n);
  for (Eigen::Index i = 0; i < n; ++i) nearest_d2(i) = (points.row(i) - centers.row(0)).squaredNorm();
  for (int c = 1; c < m; ++c) {
    Eigen::Index pick = 0;
    double far = -1.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (nearest_d2(i) > far) {
        far = nearest_d2(i);
        pick = i;
      }
    }
    centers.row(c) = points.row(pick);
    for (Eigen::Index i = 0; i < n; ++i) {
      nearest_d2(i) = std::min(nearest_d2(i), (points.row(i) - centers.row(c)).squaredNorm());
    }
  }

  std::vector<int> labels(static_cast<std::size_t>(n), -1);
  for (int iter = 0; iter < max_iters; ++iter) {
    bool changed = false;
    for (Eigen::Index i = 0; i < n; ++i) {
      const int c = nearest_center(points, i, centers);
      if (c != labels[i]) {
        labels[i] = c;
        changed = true;
      }
    }
    std::vector<int> counts(static_cast<std::size_t>(m), 0);
    centers.setZero();
    for (Eigen::Index i = 0; i < n; ++i) {
      centers.row(labels[i]) += points.row(i);
      ++counts[labels[i]];
    }
    for (int c = 0; c < m; ++c) {
      if (counts[c] == 0) return {};
      centers.row(c) /= counts[c];
    }
    if (!changed) break;
  }
  return labels;
}

}  // namespace detail

/// Normalized-symmetric spectral clustering: eigenvectors of the m smallest
/// eigenvalues of I - D^-1/2 A D^-1/2, rows scaled to unit length, then
/// k-means. Deterministic in (afy, m, seed).
inline ClusterAssignment spectral_cluster(const AffinityMatrix& afy, int m = kDefaultClusters,
                                          std::uint64_t seed = 0) {
  const Eigen::Index k = afy.size();
  if (m < 2) throw Error(ErrorCode::InvalidParameter, "need at least 2 clusters");
  if (m > k) {
    throw Error(ErrorCode::InvalidParameter, "cannot form " + std::to_string(m) +
                                                 " clusters from " + std::to_string(k) + " items");
  }

  const Eigen::VectorXd inv_sqrt_degree = afy.values.rowwise().sum().cwiseSqrt().cwiseInverse();
  Eigen::MatrixXd laplacian = -(inv_sqrt_degree.asDiagonal() * afy.values * inv_sqrt_degree.asDiagonal());
  laplacian.diagonal().array() += 1.0;
  laplacian = 0.5 * (laplacian + laplacian.transpose()).eval();

  // Eigen returns eigenvalues in ascending order.
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(laplacian);
  Eigen::MatrixXd embedding = eig.eigenvectors().leftCols(m);
  detail::canonicalize_signs(embedding);
  for (Eigen::Index r = 0; r < k; ++r) {
    const double n = embedding.row(r).norm();
    if (n > 0.0) embedding.row(r) /= n;
  }

  constexpr int kRestarts = 5;
  for (int attempt = 0; attempt < kRestarts; ++attempt) {
    auto labels = detail::kmeans(embedding, m, seed + static_cast<std::uint64_t>(attempt));
    if (!labels.empty()) return ClusterAssignment{std::move(labels), m};
  }
  throw Error(ErrorCode::ClusterCollapse,
              "k-means left a cluster empty after " + std::to_string(kRestarts) + " restarts");
}

}  // namespace kseg
