#pragma once

// Synthetic jittery scenes with ground truth, and the sparse-label metrics
// used to score a segmentation against them.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "kendallseg/error.hpp"
#include "kendallseg/segmenter.hpp"
#include "kendallseg/shape_space.hpp"

namespace kseg {

inline constexpr int kBackground = 0;
inline constexpr int kForeground = 1;

struct SceneParams {
  int n_bg = 60;
  int n_fg = 20;
  int n_frames = 30;
  double sigma = 0.05;
  FrameSize frame_size{640, 360};
  double camera_speed = 3.0;     // px/frame along the smooth camera path
  double camera_rotation = 0.01; // total smooth camera roll over the sequence, rad
  double camera_zoom = 0.01;     // total smooth log-scale change over the sequence
  double camera_bend = 1.0;      // end-of-sequence sideways offset, fraction of the straight drift
  double object_speed = 2.0;     // px/frame of independent foreground motion
  double object_sway = 6.0;      // amplitude of the foreground's sinusoidal sway, px
  double object_radius = 40.0;   // foreground points lie within this disk, px
  int n_partial = 0;             // extra tracks covering only part of the sequence
  double partial_coverage = 0.75;
  std::uint64_t seed = 0;

  void validate() const {
    auto bad = [](const std::string& what) { throw Error(ErrorCode::InvalidParameter, what); };
    if (n_bg < 1 || n_fg < 1) bad("scene needs at least one background and one foreground track");
    if (n_frames < 2) bad("scene needs at least 2 frames");
    if (!(sigma >= 0.0) || !std::isfinite(sigma)) bad("sigma must be >= 0");
    if (frame_size.width <= 0 || frame_size.height <= 0) bad("frame size must be positive");
    if (!(camera_speed >= 0.0) || !(object_speed >= 0.0)) bad("speeds must be >= 0");
    if (!(object_radius > 0.0)) bad("object_radius must be > 0");
    if (n_partial < 0) bad("n_partial must be >= 0");
    if (!(partial_coverage > 0.0 && partial_coverage <= 1.0)) bad("partial_coverage must be in (0, 1]");
  }
};

struct LabeledScene {
  TrajectoryStore store;
  LabelMap ground_truth;
};

struct Metrics {
  double accuracy = 0.0;
  std::array<std::array<int, 2>, 2> confusion{};  // [ground truth][predicted]
  int n_labeled = 0;
  int n_unlabeled = 0;
};

/// Similarity x -> center + scale * R(angle) * (x - center) + shift.
struct Similarity2D {
  double angle = 0.0;
  double log_scale = 0.0;
  Eigen::Vector2d shift = Eigen::Vector2d::Zero();

  Eigen::Vector2d apply(const Eigen::Vector2d& x, const Eigen::Vector2d& center) const {
    return center + std::exp(log_scale) * (Rotation2D::from_angle(angle).matrix() * (x - center)) + shift;
  }
};

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline Eigen::Vector2d frame_center(const FrameSize& fs) {
  return {0.5 * fs.width, 0.5 * fs.height};
}

inline bool inside(const Eigen::Vector2d& p, const FrameSize& fs, double margin) {
  return p.x() >= margin && p.x() < fs.width - margin && p.y() >= margin && p.y() < fs.height - margin;
}

}  // namespace detail

/// Jitter of one frame; depends only on (sigma, seed, frame, frame size).
inline Similarity2D jitter_at(int frame, double sigma, std::uint64_t seed, const FrameSize& fs) {
  std::mt19937_64 rng(detail::splitmix64(seed ^ detail::splitmix64(static_cast<std::uint64_t>(frame))));
  std::normal_distribution<double> unit(0.0, 1.0);
  Similarity2D j;
  j.angle = 0.05 * sigma * unit(rng);
  j.shift.x() = 0.02 * sigma * std::min(fs.width, fs.height) * unit(rng);
  j.shift.y() = 0.02 * sigma * std::min(fs.width, fs.height) * unit(rng);
  j.log_scale = 0.02 * sigma * unit(rng);
  return j;
}

/// Applies one random similarity per frame to every point of that frame.
/// sigma = 0 returns the input unchanged.
inline TrajectoryStore fuse_jitter(const TrajectoryStore& store, double sigma, std::uint64_t seed) {
  if (sigma == 0.0) return store;
  TrajectoryStore out = store;
  const Eigen::Vector2d center = detail::frame_center(store.frame_size);
  std::vector<Similarity2D> per_frame;
  per_frame.reserve(static_cast<std::size_t>(store.n_frames_total));
  for (int f = 0; f < store.n_frames_total; ++f) {
    per_frame.push_back(jitter_at(f, sigma, seed, store.frame_size));
  }
  for (auto& t : out.trajectories) {
    for (Eigen::Index i = 0; i < t.points.rows(); ++i) {
      const int f = t.start_frame + static_cast<int>(i);
      const Similarity2D& j = f < static_cast<int>(per_frame.size())
                                  ? per_frame[f]
                                  : jitter_at(f, sigma, seed, store.frame_size);
      t.points.row(i) = j.apply(t.points.row(i).transpose(), center).transpose();
    }
  }
  return out;
}

namespace detail {

struct CameraPath {
  Eigen::Vector2d direction;  // unit
  Eigen::Vector2d bend;       // unit, perpendicular to direction
  const SceneParams* p;

  Similarity2D at(int t) const {
    const double u = p->n_frames > 1 ? static_cast<double>(t) / (p->n_frames - 1) : 0.0;
    Similarity2D s;
    s.angle = p->camera_rotation * u;
    s.log_scale = p->camera_zoom * u;
    const double tt = static_cast<double>(t);
    s.shift = p->camera_speed * (tt * direction + p->camera_bend * tt * u * bend);
    return s;
  }
};

struct ObjectPath {
  Eigen::Vector2d origin;
  Eigen::Vector2d direction;
  const SceneParams* p;

  Eigen::Vector2d at(int t) const {
    const Eigen::Vector2d perp(-direction.y(), direction.x());
    const double sway = p->object_sway * std::sin(2.0 * std::numbers::pi * static_cast<double>(t) / p->n_frames);
    return origin + p->object_speed * t * direction + sway * perp;
  }
};

}  // namespace detail

/// Background points are static world points seen through a smooth
/// similarity camera path; foreground points ride an object that drifts at
/// object_speed with a sinusoidal sway. Per-frame jitter is fused on top.
/// Positions are rejection-sampled so every jittered track stays in frame.
/// Throws DegenerateTrajectory if the configuration yields static tracks.
inline LabeledScene generate_scene(const SceneParams& params) {
  params.validate();
  const FrameSize fs = params.frame_size;
  const Eigen::Vector2d center = detail::frame_center(fs);
  const double margin = 2.0;
  std::mt19937_64 rng(detail::splitmix64(params.seed ^ 0x5eedc0ffeeULL));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto random_direction = [&] {
    const double a = 2.0 * std::numbers::pi * unit(rng);
    return Eigen::Vector2d(std::cos(a), std::sin(a));
  };

  detail::CameraPath camera{random_direction(), {}, &params};
  camera.bend = Eigen::Vector2d(-camera.direction.y(), camera.direction.x());
  if (unit(rng) < 0.5) camera.bend = -camera.bend;

  std::vector<Similarity2D> view(static_cast<std::size_t>(params.n_frames));
  std::vector<Similarity2D> shake(static_cast<std::size_t>(params.n_frames));
  for (int f = 0; f < params.n_frames; ++f) {
    view[f] = camera.at(f);
    shake[f] = jitter_at(f, params.sigma, params.seed, fs);
  }
  auto image = [&](const Eigen::Vector2d& world, int f) {
    const Eigen::Vector2d stable = view[f].apply(world, center);
    return params.sigma == 0.0 ? stable : shake[f].apply(stable, center);
  };
  auto fits = [&](auto&& world_at) {
    for (int f = 0; f < params.n_frames; ++f) {
      if (!detail::inside(image(world_at(f), f), fs, margin)) return false;
    }
    return true;
  };
  constexpr int kMaxTries = 10000;
  auto no_fit = [] {
    throw Error(ErrorCode::InvalidParameter, "scene motion does not fit inside the frame");
  };
  auto random_point = [&] { return Eigen::Vector2d(fs.width * unit(rng), fs.height * unit(rng)); };

  LabeledScene scene;
  scene.store.n_frames_total = params.n_frames;
  scene.store.frame_size = fs;
  auto emit = [&](const auto& world_at, int label) {
    Config pts(params.n_frames, 2);
    for (int f = 0; f < params.n_frames; ++f) pts.row(f) = image(world_at(f), f).transpose();
    const auto id = static_cast<TrajectoryId>(scene.store.trajectories.size());
    scene.store.trajectories.push_back(Trajectory{id, 0, std::move(pts)});
    scene.ground_truth[id] = label;
  };

  auto sample_background = [&] {
    for (int tries = 0; tries < kMaxTries; ++tries) {
      const Eigen::Vector2d w = random_point();
      auto at = [&](int) { return w; };
      if (fits(at)) return w;
    }
    no_fit();
    return Eigen::Vector2d(Eigen::Vector2d::Zero());
  };
  for (int i = 0; i < params.n_bg; ++i) {
    const Eigen::Vector2d w = sample_background();
    emit([&](int) { return w; }, kBackground);
  }

  detail::ObjectPath object{{}, random_direction(), &params};
  bool placed = false;
  for (int tries = 0; tries < kMaxTries && !placed; ++tries) {
    object.origin = random_point();
    placed = fits([&](int f) { return object.at(f); });
  }
  if (!placed) no_fit();
  auto sample_offset = [&] {
    for (int tries = 0; tries < kMaxTries; ++tries) {
      const double r = params.object_radius * std::sqrt(unit(rng));
      const double a = 2.0 * std::numbers::pi * unit(rng);
      const Eigen::Vector2d off(r * std::cos(a), r * std::sin(a));
      if (fits([&](int f) { return Eigen::Vector2d(object.at(f) + off); })) return off;
    }
    no_fit();
    return Eigen::Vector2d(Eigen::Vector2d::Zero());
  };
  for (int i = 0; i < params.n_fg; ++i) {
    const Eigen::Vector2d off = sample_offset();
    emit([&](int f) { return Eigen::Vector2d(object.at(f) + off); }, kForeground);
  }

  const int partial_len =
      std::max(2, static_cast<int>(std::floor(params.partial_coverage * params.n_frames)));
  for (int i = 0; i < params.n_partial; ++i) {
    const int label = i % 2 == 0 ? kBackground : kForeground;
    const int start = static_cast<int>(std::floor(unit(rng) * (params.n_frames - partial_len + 1)));
    if (label == kBackground) {
      const Eigen::Vector2d w = sample_background();
      emit([&](int) { return w; }, label);
    } else {
      const Eigen::Vector2d off = sample_offset();
      emit([&](int f) { return Eigen::Vector2d(object.at(f) + off); }, label);
    }
    Trajectory& t = scene.store.trajectories.back();
    t.points = Config(t.points.middleRows(start, partial_len));
    t.start_frame = start;
  }

  for (const auto& t : scene.store.trajectories) {
    if (detail::is_degenerate(t.points)) {
      throw Error(ErrorCode::DegenerateTrajectory,
                  "scene produces static tracks (no camera or object motion); trajectory " +
                      std::to_string(t.id) + " has no shape");
    }
  }
  return scene;
}

/// Accuracy is the better of the two label permutations over labeled ids;
/// ids absent from `predicted` count as unlabeled.
inline Metrics evaluate(const LabelMap& predicted, const LabelMap& ground_truth) {
  Metrics m;
  for (const auto& [id, label] : predicted) {
    auto it = ground_truth.find(id);
    if (it == ground_truth.end()) {
      throw Error(ErrorCode::UnknownId, "predicted id " + std::to_string(id) + " not in ground truth");
    }
    if ((label != 0 && label != 1) || (it->second != 0 && it->second != 1)) {
      throw Error(ErrorCode::InvalidParameter, "labels must be 0 or 1");
    }
    ++m.confusion[it->second][label];
    ++m.n_labeled;
  }
  m.n_unlabeled = static_cast<int>(ground_truth.size()) - m.n_labeled;
  if (m.n_labeled > 0) {
    const int same = m.confusion[0][0] + m.confusion[1][1];
    const int swapped = m.confusion[0][1] + m.confusion[1][0];
    m.accuracy = static_cast<double>(std::max(same, swapped)) / m.n_labeled;
  }
  return m;
}

inline Metrics evaluate(const LabelMap& predicted, const LabeledScene& scene) {
  return evaluate(predicted, scene.ground_truth);
}

}  // namespace kseg
