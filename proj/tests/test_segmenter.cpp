#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "kendallseg/segmenter.hpp"
#include "kendallseg/synth.hpp"
#include "oracles.hpp"

namespace kseg {
namespace {

// A track that wanders smoothly inside the frame, so it is never degenerate.
Trajectory wander(std::mt19937_64& rng, TrajectoryId id, int start, int len, const FrameSize& fs) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double x0 = 40 + (fs.width - 80) * u(rng);
  const double y0 = 40 + (fs.height - 80) * u(rng);
  const double fx = 0.05 + 0.3 * u(rng);
  const double fy = 0.05 + 0.3 * u(rng);
  Trajectory t{id, start, Config(len, 2)};
  for (int i = 0; i < len; ++i) {
    t.points(i, 0) = x0 + 20.0 * std::sin(fx * (start + i));
    t.points(i, 1) = y0 + 20.0 * std::cos(fy * (start + i));
  }
  return t;
}

TrajectoryStore staggered_store(std::uint64_t seed, int n, int frames) {
  std::mt19937_64 rng(seed);
  TrajectoryStore store;
  store.n_frames_total = frames;
  store.frame_size = {640, 360};
  std::uniform_int_distribution<int> start(0, frames - 2);
  std::bernoulli_distribution from_first(0.35);
  std::bernoulli_distribution to_last(0.35);
  for (int i = 0; i < n; ++i) {
    const int s = from_first(rng) ? 0 : start(rng);
    std::uniform_int_distribution<int> len(2, frames - s);
    const int l = to_last(rng) ? frames - s : len(rng);
    store.trajectories.push_back(wander(rng, i, s, l, store.frame_size));
  }
  return store;
}

LabeledScene translation_scene(std::uint64_t seed) {
  SceneParams sp;
  sp.sigma = 0.0;
  sp.camera_rotation = 0.0;
  sp.camera_zoom = 0.0;
  sp.seed = seed;
  return generate_scene(sp);
}

TEST(PartitionBlocks, SingleBlockWhenEveryTrackSpans) {
  std::mt19937_64 rng(1);
  TrajectoryStore store;
  store.n_frames_total = 40;
  for (int i = 0; i < 10; ++i) store.trajectories.push_back(wander(rng, i, 0, 40, store.frame_size));
  SegmenterParams p;
  p.max_block_len = 40;
  const auto blocks = partition_blocks(store, p);
  ASSERT_EQ(blocks.size(), 1u);
  EXPECT_EQ(blocks[0].start, 0);
  EXPECT_EQ(blocks[0].end, 40);
  EXPECT_EQ(blocks[0].spanning_ids.size(), 10u);
  EXPECT_TRUE(blocks[0].partial_ids.empty());
}

TEST(PartitionBlocks, TenPercentRuleForcesABoundary) {
  std::mt19937_64 rng(2);
  TrajectoryStore store;
  store.n_frames_total = 40;
  TrajectoryId id = 0;
  for (int i = 0; i < 95; ++i) store.trajectories.push_back(wander(rng, id++, 0, 20, store.frame_size));
  for (int i = 0; i < 5; ++i) store.trajectories.push_back(wander(rng, id++, 0, 40, store.frame_size));
  for (int i = 0; i < 20; ++i) store.trajectories.push_back(wander(rng, id++, 20, 20, store.frame_size));
  const auto blocks = partition_blocks(store, SegmenterParams{});
  ASSERT_GE(blocks.size(), 2u);
  EXPECT_LE(blocks[0].end, 20);
}

TEST(PartitionBlocks, NoValidBlockWhenTracksAreTooShort) {
  std::mt19937_64 rng(3);
  TrajectoryStore store;
  store.n_frames_total = 40;
  for (int i = 0; i < 20; ++i) store.trajectories.push_back(wander(rng, i, 2 * i, 2, store.frame_size));
  try {
    partition_blocks(store, SegmenterParams{});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NoValidBlock);
  }
}

TEST(PartitionBlocks, MatchesExhaustiveBoundarySearchAndTiles) {
  int compared = 0;
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    const TrajectoryStore store = staggered_store(seed, 60, 50);
    SegmenterParams p;
    p.min_block_len = 4;
    p.max_block_len = 25;
    p.min_span_fraction = 0.1;
    const auto expected = testing::exhaustive_blocks(store, p);
    if (expected.empty()) {
      EXPECT_THROW(partition_blocks(store, p), Error);
      continue;
    }
    const auto blocks = partition_blocks(store, p);
    ASSERT_EQ(blocks.size(), expected.size()) << "seed " << seed;
    int cursor = 0;
    for (std::size_t b = 0; b < blocks.size(); ++b) {
      EXPECT_EQ(blocks[b].start, expected[b].first);
      EXPECT_EQ(blocks[b].end, expected[b].second);
      EXPECT_EQ(blocks[b].start, cursor);
      cursor = blocks[b].end;
      EXPECT_GE(blocks[b].spanning_ids.size(), 0.1 * 60);
      for (auto id : blocks[b].partial_ids) {
        EXPECT_EQ(std::count(blocks[b].spanning_ids.begin(), blocks[b].spanning_ids.end(), id), 0);
      }
    }
    EXPECT_EQ(cursor, 50);
    ++compared;
  }
  EXPECT_GT(compared, 20);
}

TEST(SelectRepresentatives, OneTrackPerCellAreAllSelected) {
  TrajectoryStore store;
  store.n_frames_total = 10;
  store.frame_size = {400, 400};
  TrajectoryId id = 0;
  for (int cx = 0; cx < 4; ++cx) {
    for (int cy = 0; cy < 4; ++cy) {
      Trajectory t{id++, 0, Config(10, 2)};
      for (int f = 0; f < 10; ++f) t.points.row(f) << 100 * cx + 30 + f, 100 * cy + 40 + 0.1 * f * f;
      store.trajectories.push_back(t);
    }
  }
  SegmenterParams p;
  p.grid_cells = 4;
  const Block block = partition_blocks(store, p).front();
  EXPECT_EQ(select_representatives(store, block, p).size(), 16u);
}

TEST(SelectRepresentatives, NearestToCellCenterWins) {
  TrajectoryStore store;
  store.n_frames_total = 10;
  store.frame_size = {200, 200};
  auto line = [](TrajectoryId id, double x, double y) {
    Trajectory t{id, 0, Config(10, 2)};
    for (int f = 0; f < 10; ++f) t.points.row(f) << x + f, y + 0.2 * f * f;
    return t;
  };
  store.trajectories = {line(0, 10, 10), line(1, 50, 50), line(2, 150, 20), line(3, 20, 150)};
  SegmenterParams p;
  p.grid_cells = 2;
  const Block block = partition_blocks(store, p).front();
  const auto reps = select_representatives(store, block, p);
  EXPECT_EQ(reps, (std::vector<TrajectoryId>{1, 2, 3}));
}

TEST(SelectRepresentatives, MatchesReferenceRule) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    std::mt19937_64 rng(seed);
    TrajectoryStore store;
    store.n_frames_total = 20;
    for (int i = 0; i < 300; ++i) store.trajectories.push_back(wander(rng, 1000 - i, 0, 20, store.frame_size));
    SegmenterParams p;
    p.grid_cells = 8;
    const Block block = partition_blocks(store, p).front();
    EXPECT_EQ(select_representatives(store, block, p), testing::reference_representatives(store, block, 8));
  }
}

TEST(SelectRepresentatives, TooFewRepresentatives) {
  std::mt19937_64 rng(4);
  TrajectoryStore store;
  store.n_frames_total = 20;
  for (int i = 0; i < 5; ++i) store.trajectories.push_back(wander(rng, i, 0, 20, store.frame_size));
  SegmenterParams p;
  p.grid_cells = 1;
  const Block block = partition_blocks(store, p).front();
  try {
    select_representatives(store, block, p);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::TooFewRepresentatives);
  }
}

TEST(SegmentBlock, ZeroJitterTranslationSceneIsSeparatedPerfectly) {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const LabeledScene scene = translation_scene(seed);
    for (int iters : {1, 2, 3}) {
      SegmenterParams p;
      p.outer_iters = iters;
      const auto block = partition_blocks(scene.store, p).front();
      const BlockResult r = segment_block(scene.store, block, p);
      EXPECT_EQ(evaluate(r.labels, scene).accuracy, 1.0) << "seed " << seed << " iters " << iters;
      EXPECT_EQ(r.labels.size(), scene.store.trajectories.size());
    }
  }
}

TEST(SegmentBlock, ModerateJitterScene) {
  SceneParams sp;
  sp.sigma = 0.15;
  sp.seed = 7;
  const LabeledScene scene = generate_scene(sp);
  const SegmenterParams p;
  const BlockResult r = segment_block(scene.store, partition_blocks(scene.store, p).front(), p);
  EXPECT_GE(evaluate(r.labels, scene).accuracy, 0.9);
  ASSERT_EQ(r.means.size(), 2u);
  EXPECT_EQ(r.rotations.size(), r.representatives.size());
  int ones = 0;
  for (auto id : r.representatives) ones += r.labels.at(id);
  EXPECT_GT(ones, 0);
  EXPECT_LT(ones, static_cast<int>(r.representatives.size()));
}

TEST(SegmentBlock, MoreOuterIterationsDoNotHurt) {
  double acc1 = 0.0;
  double acc3 = 0.0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    SceneParams sp;
    sp.sigma = 0.25;
    sp.seed = seed;
    const LabeledScene scene = generate_scene(sp);
    SegmenterParams p;
    p.lambda = kHighJitterLambda;
    const Block block = partition_blocks(scene.store, p).front();
    p.outer_iters = 1;
    acc1 += evaluate(segment_block(scene.store, block, p).labels, scene).accuracy / 20.0;
    p.outer_iters = 3;
    acc3 += evaluate(segment_block(scene.store, block, p).labels, scene).accuracy / 20.0;
  }
  EXPECT_GE(acc3, acc1 - 0.02);
}

TEST(AssignStragglers, CropOfAHomogeneousClusterMemberJoinsThatCluster) {
  LabeledScene scene = translation_scene(5);
  const Trajectory source = scene.store.trajectories.front();  // background
  Trajectory crop{9999, 4, Config(source.points.middleRows(4, 24))};
  crop.points.col(0).array() += 3.0;
  scene.store.trajectories.push_back(crop);
  const SegmenterParams p;
  const Block block = partition_blocks(scene.store, p).front();
  ASSERT_EQ(std::count(block.partial_ids.begin(), block.partial_ids.end(), 9999), 1);
  const BlockResult r = segment_block(scene.store, block, p);
  ASSERT_TRUE(r.labels.contains(9999));
  EXPECT_EQ(r.labels.at(9999), r.labels.at(source.id));
  const int c = r.labels.at(source.id);
  const PreShape mean = project_to_preshape(r.means[c].config.middleRows(4, 24));
  EXPECT_LE(procrustes_distance(mean, to_preshape(crop)), 1e-6);
}

TEST(AssignStragglers, CoverageThresholdIsRespected) {
  std::mt19937_64 rng(6);
  TrajectoryStore store;
  store.n_frames_total = 100;
  for (int i = 0; i < 40; ++i) store.trajectories.push_back(wander(rng, i, 0, 100, store.frame_size));
  store.trajectories.push_back(wander(rng, 500, 10, 69, store.frame_size));
  store.trajectories.push_back(wander(rng, 501, 30, 70, store.frame_size));
  SegmenterParams p;
  p.max_block_len = 100;
  const auto blocks = partition_blocks(store, p);
  ASSERT_EQ(blocks.size(), 1u);
  const BlockResult r = segment_block(store, blocks.front(), p);
  EXPECT_FALSE(r.labels.contains(500));
  EXPECT_TRUE(r.labels.contains(501));
  for (const auto& t : store.trajectories) {
    if (r.labels.contains(t.id)) {
      EXPECT_GE(detail::overlap(t, 0, 100), 70);
    }
  }
}

TEST(AssignStragglers, SyntheticPartialsAreMostlyCorrect) {
  int correct = 0;
  int total = 0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    SceneParams sp;
    sp.sigma = 0.15;
    sp.seed = seed;
    sp.n_partial = 20;
    const LabeledScene scene = generate_scene(sp);
    const SegmenterParams p;
    const BlockResult r = segment_block(scene.store, partition_blocks(scene.store, p).front(), p);
    // Fix the permutation on the full-length tracks, then score the partials.
    LabelMap full;
    for (const auto& t : scene.store.trajectories) {
      if (t.length() == sp.n_frames) full[t.id] = r.labels.at(t.id);
    }
    const Metrics m = evaluate(full, scene);
    const bool swapped = m.confusion[0][1] + m.confusion[1][0] > m.confusion[0][0] + m.confusion[1][1];
    for (const auto& t : scene.store.trajectories) {
      if (t.length() == sp.n_frames) continue;
      ++total;
      auto it = r.labels.find(t.id);
      if (it != r.labels.end() && (swapped ? 1 - it->second : it->second) == scene.ground_truth.at(t.id)) {
        ++correct;
      }
    }
  }
  EXPECT_EQ(total, 100);
  EXPECT_GE(static_cast<double>(correct) / total, 0.85);
}

BlockResult fake_block(int start, int end, const std::vector<std::tuple<TrajectoryId, int, double, double>>& members) {
  BlockResult r;
  r.block.start = start;
  r.block.end = end;
  for (auto [id, label, x, y] : members) {
    r.labels[id] = label;
    r.anchors[id] = Eigen::Vector2d(x, y);
  }
  return r;
}

TEST(FuseBlocks, SingleBlockReportsSmallerBoxAsForeground) {
  // cluster 0 is tight, so it becomes cluster 1
  const BlockResult r = fake_block(0, 10, {{1, 0, 10, 10}, {2, 0, 12, 11}, {3, 1, 0, 0}, {4, 1, 300, 200}, {5, 1, 100, 50}});
  const FusedLabels f = fuse_blocks({r});
  EXPECT_EQ(f.labels.at(1), 1);
  EXPECT_EQ(f.labels.at(2), 1);
  EXPECT_EQ(f.labels.at(3), 0);
  EXPECT_EQ(f.labels.at(4), 0);
  EXPECT_TRUE(f.flipped[0]);
  EXPECT_TRUE(f.warnings.empty());
}

TEST(FuseBlocks, FlipsABlockThatDisagreesOnSharedTracks) {
  const BlockResult a = fake_block(0, 10, {{1, 1, 10, 10}, {2, 1, 12, 11}, {3, 0, 0, 0}, {4, 0, 300, 200}});
  const BlockResult b = fake_block(10, 20, {{1, 0, 10, 10}, {2, 0, 12, 11}, {3, 1, 0, 0}, {4, 1, 300, 200}, {5, 1, 7, 7}});
  const FusedLabels f = fuse_blocks({a, b});
  EXPECT_FALSE(f.flipped[0]);
  EXPECT_TRUE(f.flipped[1]);
  EXPECT_EQ(f.labels.at(1), 1);
  EXPECT_EQ(f.labels.at(3), 0);
  EXPECT_EQ(f.labels.at(5), 0);
}

TEST(FuseBlocks, MajorityAcrossBlocksWithTiesToTheEarliest) {
  const BlockResult a = fake_block(0, 10, {{1, 1, 10, 10}, {2, 1, 11, 11}, {3, 0, 0, 0}, {4, 0, 300, 200}});
  const BlockResult b = fake_block(10, 20, {{1, 1, 10, 10}, {2, 1, 11, 11}, {3, 0, 0, 0}, {4, 1, 300, 200}});
  const FusedLabels f = fuse_blocks({a, b});
  EXPECT_FALSE(f.flipped[1]);
  EXPECT_EQ(f.labels.at(4), 0);  // 1 vote each; block 0 said 0
}

TEST(FuseBlocks, NoSharedTracksFallsBackToBoundingBoxesWithWarning) {
  const BlockResult a = fake_block(0, 10, {{1, 1, 10, 10}, {2, 1, 12, 11}, {3, 0, 0, 0}, {4, 0, 300, 200}});
  const BlockResult b = fake_block(10, 20, {{5, 0, 10, 10}, {6, 0, 12, 11}, {7, 1, 0, 0}, {8, 1, 300, 200}});
  const FusedLabels f = fuse_blocks({a, b});
  ASSERT_EQ(f.warnings.size(), 1u);
  EXPECT_NE(f.warnings[0].find("NoSharedTrajectories"), std::string::npos);
  EXPECT_EQ(f.labels.at(5), 1);
  EXPECT_EQ(f.labels.at(7), 0);
}

TEST(FuseBlocks, GlobalRelabelingDoesNotChangeTheResult) {
  SceneParams sp;
  sp.sigma = 0.15;
  sp.seed = 3;
  const LabeledScene scene = generate_scene(sp);
  SegmenterParams p;
  p.max_block_len = 12;
  p.min_block_len = 6;
  SegmentationResult r = segment_store(scene.store, p);
  ASSERT_GE(r.blocks.size(), 2u);
  for (auto& b : r.blocks) {
    for (auto& [id, label] : b.labels) label = 1 - label;
  }
  EXPECT_EQ(fuse_blocks(r.blocks).labels, r.fused.labels);
}

TEST(FuseBlocks, ThreeBlockSceneMatchesGroundTruth) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    SceneParams sp;
    sp.sigma = 0.15;
    sp.seed = seed;
    // Short blocks carry little camera curvature, so the object has to move
    // clearly relative to the camera for each block to separate on its own.
    sp.n_frames = 45;
    sp.camera_speed = 1.0;
    sp.object_speed = 4.0;
    sp.object_sway = 10.0;
    const LabeledScene scene = generate_scene(sp);
    SegmenterParams p;
    p.max_block_len = 15;
    const SegmentationResult r = segment_store(scene.store, p);
    EXPECT_EQ(r.blocks.size(), 3u);
    EXPECT_GE(evaluate(r.fused.labels, scene).accuracy, 0.9) << "seed " << seed;
  }
}

TEST(SegmentStore, ThreadCountDoesNotChangeOutput) {
  SceneParams sp;
  sp.sigma = 0.15;
  sp.seed = 11;
  const LabeledScene scene = generate_scene(sp);
  SegmenterParams p;
  p.max_block_len = 10;
  const SegmentationResult a = segment_store(scene.store, p, 1);
  const SegmentationResult b = segment_store(scene.store, p, 3);
  ASSERT_EQ(a.blocks.size(), b.blocks.size());
  for (std::size_t i = 0; i < a.blocks.size(); ++i) {
    EXPECT_EQ(a.blocks[i].labels, b.blocks[i].labels);
    for (std::size_t c = 0; c < a.blocks[i].means.size(); ++c) {
      EXPECT_TRUE(a.blocks[i].means[c].config == b.blocks[i].means[c].config);
    }
  }
  EXPECT_EQ(a.fused.labels, b.fused.labels);
}

TEST(SegmentStore, ValidatesStoreAndParams) {
  LabeledScene scene = translation_scene(1);
  SegmenterParams bad;
  bad.omega = 0.0;
  EXPECT_THROW(segment_store(scene.store, bad), Error);
  scene.store.trajectories.push_back(scene.store.trajectories.front());
  try {
    segment_store(scene.store, SegmenterParams{});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::DuplicateId);
  }
}

}  // namespace
}  // namespace kseg
