#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "kendallseg/synth.hpp"
#include "oracles.hpp"

namespace kseg {
namespace {

SceneParams translation_params(std::uint64_t seed) {
  SceneParams sp;
  sp.sigma = 0.0;
  sp.camera_rotation = 0.0;
  sp.camera_zoom = 0.0;
  sp.seed = seed;
  return sp;
}

bool same_store(const TrajectoryStore& a, const TrajectoryStore& b) {
  if (a.trajectories.size() != b.trajectories.size() || a.n_frames_total != b.n_frames_total) return false;
  for (std::size_t i = 0; i < a.trajectories.size(); ++i) {
    const auto& x = a.trajectories[i];
    const auto& y = b.trajectories[i];
    if (x.id != y.id || x.start_frame != y.start_frame || !(x.points == y.points)) return false;
  }
  return true;
}

double mean_displacement(const TrajectoryStore& a, const TrajectoryStore& b) {
  double total = 0.0;
  int n = 0;
  for (std::size_t i = 0; i < a.trajectories.size(); ++i) {
    total += (a.trajectories[i].points - b.trajectories[i].points).rowwise().norm().sum();
    n += static_cast<int>(a.trajectories[i].points.rows());
  }
  return total / n;
}

TEST(GenerateScene, CountsLabelsAndBounds) {
  SceneParams sp;
  sp.seed = 3;
  sp.n_partial = 6;
  const LabeledScene scene = generate_scene(sp);
  EXPECT_EQ(scene.store.trajectories.size(), 86u);
  EXPECT_EQ(scene.ground_truth.size(), 86u);
  int fg = 0;
  for (const auto& [id, label] : scene.ground_truth) fg += label;
  EXPECT_EQ(fg, 20 + 3);
  EXPECT_NO_THROW(validate_store(scene.store));
  for (const auto& t : scene.store.trajectories) {
    if (t.id >= 80) {
      EXPECT_EQ(t.length(), 22);  // floor(0.75 * 30)
    }
  }
}

TEST(GenerateScene, TranslationCameraMakesBackgroundShapeIdentical) {
  const LabeledScene scene = generate_scene(translation_params(4));
  std::vector<PreShape> bg;
  std::vector<PreShape> fg;
  for (const auto& t : scene.store.trajectories) {
    (scene.ground_truth.at(t.id) == kBackground ? bg : fg).push_back(to_preshape(t));
  }
  double max_bg = 0.0;
  for (std::size_t i = 0; i < bg.size(); ++i) {
    for (std::size_t j = i + 1; j < bg.size(); ++j) max_bg = std::max(max_bg, procrustes_distance(bg[i], bg[j]));
  }
  double min_cross = 1e9;
  for (const auto& f : fg) {
    for (const auto& b : bg) min_cross = std::min(min_cross, procrustes_distance(f, b));
  }
  EXPECT_LE(max_bg, 1e-9);
  EXPECT_GT(min_cross, 0.0);
  EXPECT_GT(min_cross, max_bg);
}

TEST(GenerateScene, StaticSceneIsFlaggedDegenerate) {
  SceneParams sp = translation_params(5);
  sp.camera_speed = 0.0;
  sp.object_speed = 0.0;
  sp.object_sway = 0.0;
  try {
    generate_scene(sp);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::DegenerateTrajectory);
  }
}

TEST(GenerateScene, DeterministicPerSeed) {
  SceneParams sp;
  sp.sigma = 0.15;
  sp.seed = 21;
  EXPECT_TRUE(same_store(generate_scene(sp).store, generate_scene(sp).store));
  SceneParams other = sp;
  other.seed = 22;
  EXPECT_FALSE(same_store(generate_scene(sp).store, generate_scene(other).store));
}

TEST(GenerateScene, RejectsMalformedParams) {
  SceneParams sp;
  sp.n_fg = 0;
  EXPECT_THROW(generate_scene(sp), Error);
  sp = SceneParams{};
  sp.sigma = -1.0;
  EXPECT_THROW(generate_scene(sp), Error);
  sp = SceneParams{};
  sp.n_frames = 1;
  EXPECT_THROW(generate_scene(sp), Error);
}

TEST(FuseJitter, ZeroSigmaIsIdentityBitForBit) {
  const LabeledScene scene = generate_scene(translation_params(6));
  EXPECT_TRUE(same_store(fuse_jitter(scene.store, 0.0, 99), scene.store));
}

TEST(FuseJitter, PerturbationDependsOnlyOnSeedAndFrame) {
  TrajectoryStore a;
  a.n_frames_total = 10;
  a.trajectories.push_back({0, 0, Config::Constant(10, 2, 100.0)});
  TrajectoryStore b = a;
  b.trajectories[0] = {7, 3, Config::Constant(7, 2, 100.0)};
  b.trajectories.push_back({8, 0, Config::Constant(10, 2, 250.0)});
  const TrajectoryStore ja = fuse_jitter(a, 0.15, 42);
  const TrajectoryStore jb = fuse_jitter(b, 0.15, 42);
  for (int f = 3; f < 10; ++f) {
    EXPECT_TRUE(ja.trajectories[0].points.row(f) == jb.trajectories[0].points.row(f - 3));
  }
  EXPECT_FALSE(ja.trajectories[0].points.row(0) == a.trajectories[0].points.row(0));
}

TEST(FuseJitter, LargerSigmaShakesMore) {
  const LabeledScene scene = generate_scene(translation_params(7));
  double low = 0.0;
  double high = 0.0;
  int strictly = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const double l = mean_displacement(fuse_jitter(scene.store, 0.05, seed), scene.store);
    const double h = mean_displacement(fuse_jitter(scene.store, 0.25, seed), scene.store);
    low += l;
    high += h;
    strictly += h > l;
  }
  EXPECT_GT(high, low);
  EXPECT_EQ(strictly, 20);
}

TEST(Evaluate, PermutationMaximizedAccuracy) {
  const LabelMap truth{{0, 0}, {1, 0}, {2, 1}, {3, 1}};
  EXPECT_EQ(evaluate(truth, truth).accuracy, 1.0);
  const LabelMap flipped{{0, 1}, {1, 1}, {2, 0}, {3, 0}};
  EXPECT_EQ(evaluate(flipped, truth).accuracy, 1.0);
  const LabelMap half{{0, 0}, {1, 1}, {2, 0}, {3, 1}};
  EXPECT_EQ(evaluate(half, truth).accuracy, 0.5);
}

TEST(Evaluate, CountsUnlabeledAndConfusion) {
  const LabelMap truth{{0, 0}, {1, 0}, {2, 1}, {3, 1}, {4, 1}};
  const LabelMap pred{{0, 0}, {2, 1}, {3, 0}};
  const Metrics m = evaluate(pred, truth);
  EXPECT_EQ(m.n_labeled, 3);
  EXPECT_EQ(m.n_unlabeled, 2);
  EXPECT_EQ(m.confusion[0][0], 1);
  EXPECT_EQ(m.confusion[1][1], 1);
  EXPECT_EQ(m.confusion[1][0], 1);
  EXPECT_NEAR(m.accuracy, 2.0 / 3.0, 1e-15);
  EXPECT_GE(m.accuracy, 0.5);
}

TEST(Evaluate, UnknownIdThrows) {
  try {
    evaluate(LabelMap{{99, 1}}, LabelMap{{0, 0}});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::UnknownId);
  }
}

}  // namespace
}  // namespace kseg
