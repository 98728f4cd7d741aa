#pragma once

// Sparse segmentation of a trajectory set into two motion clusters:
// block partitioning, representative selection, the iterated
// cluster / align / stabilize loop, straggler labeling and fusion of the
// per-block labels into one global labeling.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <limits>
#include <map>
#include <set>
#include <string>
#include <thread>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <Eigen/Dense>

#include "kendallseg/alignment.hpp"
#include "kendallseg/clustering.hpp"
#include "kendallseg/error.hpp"
#include "kendallseg/shape_space.hpp"

namespace kseg {

using TrajectoryId = std::int64_t;
using LabelMap = std::map<TrajectoryId, int>;

struct FrameSize {
  int width = 640;
  int height = 360;
};

struct TrajectoryStore {
  std::vector<Trajectory> trajectories;
  int n_frames_total = 0;
  FrameSize frame_size;
};

/// Throws BoundsError / DuplicateId when the store's invariants are broken.
inline void validate_store(const TrajectoryStore& store) {
  if (store.n_frames_total < 1) throw Error(ErrorCode::BoundsError, "store has no frames");
  if (store.frame_size.width <= 0 || store.frame_size.height <= 0) {
    throw Error(ErrorCode::BoundsError, "frame size must be positive");
  }
  std::unordered_set<TrajectoryId> seen;
  for (const auto& t : store.trajectories) {
    const std::string name = "trajectory " + std::to_string(t.id);
    if (!seen.insert(t.id).second) throw Error(ErrorCode::DuplicateId, name + " appears twice");
    if (t.start_frame < 0 || t.end_frame() > store.n_frames_total) {
      throw Error(ErrorCode::BoundsError, name + " lies outside [0, " +
                                              std::to_string(store.n_frames_total) + ")");
    }
    if (t.length() < 2) throw Error(ErrorCode::BoundsError, name + " has fewer than 2 points");
    for (Eigen::Index i = 0; i < t.points.rows(); ++i) {
      const double x = t.points(i, 0);
      const double y = t.points(i, 1);
      if (!(x >= 0.0 && x < store.frame_size.width && y >= 0.0 && y < store.frame_size.height)) {
        throw Error(ErrorCode::BoundsError,
                    name + " leaves the frame at frame " + std::to_string(t.start_frame + i));
      }
    }
  }
}

struct Block {
  int start = 0;  // frame range [start, end)
  int end = 0;
  std::vector<TrajectoryId> spanning_ids;
  std::vector<TrajectoryId> partial_ids;

  int length() const { return end - start; }
};

struct SegmenterParams {
  double omega = kDefaultOmega;
  double lambda = kDefaultLambda;
  int outer_iters = 3;
  int jacobi_iters = kDefaultJacobiIters;
  int m = kDefaultClusters;
  double span_threshold = 0.7;
  double min_span_fraction = 0.1;
  int grid_cells = 16;
  int max_block_len = 60;
  int min_block_len = 10;
  std::uint64_t seed = 0;

  void validate() const {
    auto bad = [](const std::string& what) { throw Error(ErrorCode::InvalidParameter, what); };
    if (!(omega > 0.0) || !std::isfinite(omega)) bad("omega must be > 0");
    if (!(lambda >= 0.0) || !std::isfinite(lambda)) bad("lambda must be >= 0");
    if (outer_iters < 1) bad("outer_iters must be >= 1");
    if (jacobi_iters < 1) bad("jacobi_iters must be >= 1");
    if (m != 2) bad("the segmenter separates exactly 2 clusters");
    if (!(span_threshold > 0.0 && span_threshold <= 1.0)) bad("span_threshold must be in (0, 1]");
    if (!(min_span_fraction > 0.0 && min_span_fraction <= 1.0)) {
      bad("min_span_fraction must be in (0, 1]");
    }
    if (grid_cells < 1) bad("grid_cells must be >= 1");
    if (min_block_len < 2) bad("min_block_len must be >= 2");
    if (max_block_len < min_block_len) bad("max_block_len must be >= min_block_len");
  }
};

struct BlockResult {
  Block block;
  LabelMap labels;
  std::vector<StabilizedMean> means;         // per cluster, final outer iteration
  std::vector<TrajectoryId> representatives;
  std::vector<Rotation2D> rotations;         // per representative, same order
  std::map<TrajectoryId, Eigen::Vector2d> anchors;  // spanning members' first-frame positions
};

struct FusedLabels {
  LabelMap labels;
  std::vector<bool> flipped;  // per block: whether its cluster ids were swapped
  std::vector<std::string> warnings;
  static constexpr int foreground_cluster = 1;
};

struct SegmentationResult {
  std::vector<BlockResult> blocks;
  FusedLabels fused;
};

namespace detail {

inline const Trajectory& find_trajectory(const TrajectoryStore& store, TrajectoryId id) {
  for (const auto& t : store.trajectories) {
    if (t.id == id) return t;
  }
  throw Error(ErrorCode::UnknownId, "no trajectory with id " + std::to_string(id));
}

inline std::unordered_map<TrajectoryId, const Trajectory*> index_store(const TrajectoryStore& store) {
  std::unordered_map<TrajectoryId, const Trajectory*> index;
  for (const auto& t : store.trajectories) index.emplace(t.id, &t);
  return index;
}

inline bool spans(const Trajectory& t, int start, int end) {
  return t.start_frame <= start && t.end_frame() >= end;
}

inline int overlap(const Trajectory& t, int start, int end) {
  return std::max(0, std::min(end, t.end_frame()) - std::max(start, t.start_frame));
}

inline std::size_t spanning_count(const TrajectoryStore& store, int start, int end) {
  return static_cast<std::size_t>(std::count_if(
      store.trajectories.begin(), store.trajectories.end(),
      [&](const Trajectory& t) { return spans(t, start, end); }));
}

inline bool block_valid(const TrajectoryStore& store, int start, int end, double min_fraction) {
  const double needed = min_fraction * static_cast<double>(store.trajectories.size());
  return static_cast<double>(spanning_count(store, start, end)) >= needed;
}

/// Rows of `t` for frames [from, to); the caller ensures `t` covers them.
inline Config crop(const Trajectory& t, int from, int to) {
  return t.points.middleRows(from - t.start_frame, to - from);
}

inline bool is_degenerate(const Config& c) {
  return c.rows() < 2 || center_rows(c).norm() < kDegenerateNorm;
}

inline Block describe_block(const TrajectoryStore& store, int start, int end, double span_threshold) {
  Block b{start, end, {}, {}};
  const int len = end - start;
  for (const auto& t : store.trajectories) {
    if (spans(t, start, end)) {
      b.spanning_ids.push_back(t.id);
    } else if (overlap(t, start, end) >= span_threshold * len - 1e-9) {
      b.partial_ids.push_back(t.id);
    }
  }
  std::sort(b.spanning_ids.begin(), b.spanning_ids.end());
  std::sort(b.partial_ids.begin(), b.partial_ids.end());
  return b;
}

}  // namespace detail

/// Greedy tiling of [0, n_frames_total): each block starts at the first
/// uncovered frame and is extended while at least min_span_fraction of all
/// trajectories span it and its length stays <= max_block_len. Blocks are at
/// least min(min_block_len, remaining) frames long and never shorter than 2;
/// a single leftover frame is merged into the previous block.
inline std::vector<Block> partition_blocks(const TrajectoryStore& store, const SegmenterParams& params) {
  if (store.trajectories.empty()) throw Error(ErrorCode::NoValidBlock, "store has no trajectories");
  params.validate();
  const int total = store.n_frames_total;
  std::vector<std::pair<int, int>> ranges;
  int start = 0;
  while (start < total) {
    const int remaining = total - start;
    if (remaining == 1) {
      if (ranges.empty() ||
          !detail::block_valid(store, ranges.back().first, total, params.min_span_fraction)) {
        throw Error(ErrorCode::NoValidBlock, "cannot place the final frame in a valid block");
      }
      ranges.back().second = total;
      break;
    }
    const int min_len = std::max(2, std::min(params.min_block_len, remaining));
    int end = start + min_len;
    if (!detail::block_valid(store, start, end, params.min_span_fraction)) {
      throw Error(ErrorCode::NoValidBlock,
                  "fewer than " + std::to_string(params.min_span_fraction * 100.0) +
                      "% of trajectories span frames [" + std::to_string(start) + ", " +
                      std::to_string(end) + ")");
    }
    const int limit = std::min(total, start + params.max_block_len);
    while (end < limit && detail::block_valid(store, start, end + 1, params.min_span_fraction)) ++end;
    ranges.emplace_back(start, end);
    start = end;
  }
  std::vector<Block> blocks;
  blocks.reserve(ranges.size());
  for (auto [s, e] : ranges) blocks.push_back(detail::describe_block(store, s, e, params.span_threshold));
  return blocks;
}

/// One spanning trajectory per occupied cell of a grid_cells x grid_cells
/// grid over the block's first frame: the one nearest the cell center, lowest
/// id on ties. Trajectories that are static over the block have no shape and
/// are skipped. Returned ids are ascending.
inline std::vector<TrajectoryId> select_representatives(const TrajectoryStore& store, const Block& block,
                                                        const SegmenterParams& params) {
  const double cell_w = static_cast<double>(store.frame_size.width) / params.grid_cells;
  const double cell_h = static_cast<double>(store.frame_size.height) / params.grid_cells;
  const auto index = detail::index_store(store);

  struct Best {
    TrajectoryId id;
    double d2;
  };
  std::map<std::pair<int, int>, Best> cells;
  for (TrajectoryId id : block.spanning_ids) {
    const Trajectory& t = *index.at(id);
    const Config window = detail::crop(t, block.start, block.end);
    if (detail::is_degenerate(window)) continue;
    const Eigen::RowVector2d p = window.row(0);
    const int cx = std::clamp(static_cast<int>(std::floor(p.x() / cell_w)), 0, params.grid_cells - 1);
    const int cy = std::clamp(static_cast<int>(std::floor(p.y() / cell_h)), 0, params.grid_cells - 1);
    const Eigen::RowVector2d center((cx + 0.5) * cell_w, (cy + 0.5) * cell_h);
    const double d2 = (p - center).squaredNorm();
    auto [it, inserted] = cells.try_emplace({cx, cy}, Best{id, d2});
    if (!inserted && (d2 < it->second.d2 || (d2 == it->second.d2 && id < it->second.id))) {
      it->second = Best{id, d2};
    }
  }
  std::vector<TrajectoryId> reps;
  reps.reserve(cells.size());
  for (const auto& [cell, best] : cells) reps.push_back(best.id);
  std::sort(reps.begin(), reps.end());
  if (static_cast<int>(reps.size()) < params.m + 1) {
    throw Error(ErrorCode::TooFewRepresentatives,
                "block [" + std::to_string(block.start) + ", " + std::to_string(block.end) + ") has " +
                    std::to_string(reps.size()) + " representatives, need " +
                    std::to_string(params.m + 1));
  }
  return reps;
}

/// Labels every still-unlabeled trajectory covering at least span_threshold
/// of the block with the cluster whose stabilized mean is nearest in
/// Procrustes distance. Mean and trajectory are both cropped to the frames
/// they share and re-projected to pre-shapes first; near-ties go to cluster 0.
inline void assign_stragglers(BlockResult& result, const TrajectoryStore& store, const Block& block,
                              const SegmenterParams& params) {
  const int len = block.length();
  for (const auto& t : store.trajectories) {
    if (result.labels.contains(t.id)) continue;
    const int shared = detail::overlap(t, block.start, block.end);
    if (shared < params.span_threshold * len - 1e-9 || shared < 2) continue;
    const int from = std::max(block.start, t.start_frame);
    const int to = std::min(block.end, t.end_frame());
    const Config window = detail::crop(t, from, to);
    if (detail::is_degenerate(window)) continue;
    const PreShape z = project_to_preshape(window);

    int best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (int c = 0; c < static_cast<int>(result.means.size()); ++c) {
      const Config mean_window = result.means[c].config.middleRows(from - block.start, to - from);
      if (detail::is_degenerate(mean_window)) continue;
      const double d = procrustes_distance(project_to_preshape(mean_window), z);
      if (d < best_d - 1e-12) {
        best_d = d;
        best = c;
      }
    }
    if (std::isfinite(best_d)) result.labels[t.id] = best;
  }
}

/// Runs outer_iters rounds of affinity -> spectral clustering -> per-cluster
/// GPA -> Jacobi stabilization -> back-transform -> re-projection on the
/// block's representatives, then labels stragglers once.
inline BlockResult segment_block(const TrajectoryStore& store, const Block& block,
                                 const SegmenterParams& params) {
  params.validate();
  const auto index = detail::index_store(store);

  BlockResult result;
  result.block = block;
  result.representatives = select_representatives(store, block, params);

  std::vector<PreShape> shapes;
  shapes.reserve(result.representatives.size());
  for (TrajectoryId id : result.representatives) {
    shapes.push_back(project_to_preshape(detail::crop(*index.at(id), block.start, block.end)));
  }

  ClusterAssignment assignment;
  result.rotations.assign(shapes.size(), Rotation2D::identity());
  for (int iter = 0; iter < params.outer_iters; ++iter) {
    const AffinityMatrix afy = build_affinity(shapes, params.omega);
    assignment = spectral_cluster(afy, params.m, params.seed);

    std::vector<PreShape> next = shapes;
    result.means.clear();
    for (int c = 0; c < params.m; ++c) {
      const std::vector<int> members = assignment.members(c);
      const GpaResult gpa = gpa_align(shapes, members);
      StabilizedMean stab = stabilize_mean(gpa.mean, params.lambda, params.jacobi_iters);
      const std::vector<Config> stabilized = back_transform(stab, gpa.rotations);
      for (std::size_t k = 0; k < members.size(); ++k) {
        next[members[k]] = project_to_preshape(stabilized[k]);
        result.rotations[members[k]] = gpa.rotations[k];
      }
      result.means.push_back(std::move(stab));
    }
    shapes = std::move(next);
  }

  for (std::size_t k = 0; k < result.representatives.size(); ++k) {
    result.labels[result.representatives[k]] = assignment.labels[k];
  }
  assign_stragglers(result, store, block, params);

  for (TrajectoryId id : block.spanning_ids) {
    if (result.labels.contains(id)) {
      result.anchors[id] = index.at(id)->points.row(block.start - index.at(id)->start_frame).transpose();
    }
  }
  return result;
}

namespace detail {

inline double bounding_box_area(const BlockResult& r, int cluster, bool flip) {
  Eigen::Vector2d lo = Eigen::Vector2d::Constant(std::numeric_limits<double>::infinity());
  Eigen::Vector2d hi = -lo;
  bool any = false;
  for (const auto& [id, p] : r.anchors) {
    const int label = r.labels.at(id);
    if ((flip ? 1 - label : label) != cluster) continue;
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
    any = true;
  }
  return any ? (hi - lo).prod() : std::numeric_limits<double>::infinity();
}

// True when cluster 0 is the tighter one and should be reported as 1.
inline bool foreground_needs_flip(const BlockResult& r) {
  return bounding_box_area(r, 0, false) < bounding_box_area(r, 1, false);
}

}  // namespace detail

/// Aligns cluster ids across consecutive blocks by majority vote over shared
/// labeled trajectories, then takes a per-trajectory majority (ties go to the
/// earliest block). Cluster 1 is the one with the smaller first-frame
/// bounding box in the first block; a block sharing no trajectories with its
/// predecessor starts a new segment oriented by the same rule.
inline FusedLabels fuse_blocks(const std::vector<BlockResult>& results) {
  if (results.empty()) throw Error(ErrorCode::InvalidParameter, "no block results to fuse");
  FusedLabels fused;
  fused.flipped.assign(results.size(), false);
  fused.flipped[0] = detail::foreground_needs_flip(results[0]);
  for (std::size_t b = 1; b < results.size(); ++b) {
    const auto& prev = results[b - 1];
    const auto& cur = results[b];
    std::size_t shared = 0;
    std::size_t agree = 0;
    for (const auto& [id, label] : cur.labels) {
      auto it = prev.labels.find(id);
      if (it == prev.labels.end()) continue;
      ++shared;
      const int prev_aligned = fused.flipped[b - 1] ? 1 - it->second : it->second;
      if (prev_aligned == label) ++agree;
    }
    if (shared == 0) {
      fused.warnings.push_back("NoSharedTrajectories: blocks " + std::to_string(b - 1) + " and " +
                               std::to_string(b) + " share no labeled trajectory; block " +
                               std::to_string(b) + " oriented by bounding box");
      fused.flipped[b] = detail::foreground_needs_flip(cur);
    } else {
      fused.flipped[b] = 2 * agree < shared;
    }
  }

  struct Vote {
    int ones = 0;
    int total = 0;
    int first = -1;
  };
  std::map<TrajectoryId, Vote> votes;
  for (std::size_t b = 0; b < results.size(); ++b) {
    for (const auto& [id, label] : results[b].labels) {
      const int aligned = fused.flipped[b] ? 1 - label : label;
      Vote& v = votes[id];
      if (v.first < 0) v.first = aligned;
      v.ones += aligned;
      ++v.total;
    }
  }
  for (const auto& [id, v] : votes) {
    const int zeros = v.total - v.ones;
    fused.labels[id] = v.ones > zeros ? 1 : (zeros > v.ones ? 0 : v.first);
  }
  return fused;
}

/// Full pipeline. Blocks are segmented on up to `threads` worker threads;
/// the output does not depend on the thread count.
inline SegmentationResult segment_store(const TrajectoryStore& store, const SegmenterParams& params,
                                        unsigned threads = 1) {
  params.validate();
  validate_store(store);
  const std::vector<Block> blocks = partition_blocks(store, params);

  SegmentationResult out;
  out.blocks.resize(blocks.size());
  std::vector<std::exception_ptr> errors(blocks.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < blocks.size(); i = next++) {
      try {
        out.blocks[i] = segment_block(store, blocks[i], params);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const unsigned n_workers = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(blocks.size())));
  if (n_workers == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned w = 0; w < n_workers; ++w) pool.emplace_back(worker);
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  out.fused = fuse_blocks(out.blocks);
  return out;
}

}  // namespace kseg
