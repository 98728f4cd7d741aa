#pragma once

// `kendallseg segment | synth | eval`. Exit codes: 0 ok, 1 pipeline error,
// 2 usage error.

#include <iostream>
#include <ostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "kendallseg/error.hpp"
#include "kendallseg/io.hpp"
#include "kendallseg/segmenter.hpp"
#include "kendallseg/synth.hpp"

namespace kseg {

inline constexpr int kExitOk = 0;
inline constexpr int kExitPipeline = 1;
inline constexpr int kExitUsage = 2;

inline json params_to_json(const SegmenterParams& p) {
  return json{{"omega", p.omega},
              {"lambda", p.lambda},
              {"outer_iters", p.outer_iters},
              {"jacobi_iters", p.jacobi_iters},
              {"m", p.m},
              {"span_threshold", p.span_threshold},
              {"min_span_fraction", p.min_span_fraction},
              {"grid", p.grid_cells},
              {"max_block_len", p.max_block_len},
              {"min_block_len", p.min_block_len},
              {"seed", p.seed}};
}

inline json scene_to_json(const SceneParams& p) {
  return json{{"n_bg", p.n_bg},
              {"n_fg", p.n_fg},
              {"frames", p.n_frames},
              {"sigma", p.sigma},
              {"width", p.frame_size.width},
              {"height", p.frame_size.height},
              {"camera_speed", p.camera_speed},
              {"camera_rotation", p.camera_rotation},
              {"camera_zoom", p.camera_zoom},
              {"camera_bend", p.camera_bend},
              {"object_speed", p.object_speed},
              {"object_sway", p.object_sway},
              {"object_radius", p.object_radius},
              {"n_partial", p.n_partial},
              {"partial_coverage", p.partial_coverage},
              {"seed", p.seed}};
}

/// Packs a segmentation into the label-file layout. Per-block labels are
/// written after cross-block alignment, so they agree with the fused ids.
inline LabelFile to_label_file(const SegmentationResult& result, const SegmenterParams& params) {
  LabelFile file;
  file.header = json{{"tool", "kendallseg"}, {"command", "segment"}, {"params", params_to_json(params)}};
  for (std::size_t b = 0; b < result.blocks.size(); ++b) {
    const auto& r = result.blocks[b];
    BlockLabels bl{r.block.start, r.block.end, {}};
    for (const auto& [id, label] : r.labels) bl.labels[id] = result.fused.flipped[b] ? 1 - label : label;
    file.blocks.push_back(std::move(bl));
  }
  file.fused = result.fused.labels;
  file.warnings = result.fused.warnings;
  return file;
}

inline json metrics_to_json(const Metrics& m) {
  return json{{"accuracy", m.accuracy},
              {"confusion", {{m.confusion[0][0], m.confusion[0][1]}, {m.confusion[1][0], m.confusion[1][1]}}},
              {"n_labeled", m.n_labeled},
              {"n_unlabeled", m.n_unlabeled}};
}

inline int run_cli(const std::vector<std::string>& args, std::ostream& out = std::cout,
                   std::ostream& err = std::cerr) {
  CLI::App app{"Sparse moving-object segmentation of jittery point trajectories in Kendall shape space",
               "kendallseg"};
  app.require_subcommand(1);
  app.set_config("--config", "", "TOML/INI file with the same keys as the long flags");

  SegmenterParams sp;
  unsigned threads = 1;
  std::string input;
  std::string output;
  auto* segment = app.add_subcommand("segment", "Segment a trajectory file into foreground/background");
  segment->add_option("--input", input, "Trajectory file")->required();
  segment->add_option("--output", output, "Label file to write")->required();
  segment->add_option("--omega", sp.omega, "Affinity bandwidth")->check(CLI::PositiveNumber)->capture_default_str();
  segment->add_option("--lambda", sp.lambda, "Stabilization weight (0.2 low jitter, 0.6 high jitter)")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  segment->add_option("--outer-iters", sp.outer_iters, "Cluster/stabilize rounds")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  segment->add_option("--jacobi-iters", sp.jacobi_iters, "Jacobi sweeps per stabilization")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  segment->add_option("--span-threshold", sp.span_threshold, "Minimum block coverage for stragglers")
      ->check(CLI::Range(0.0, 1.0))
      ->capture_default_str();
  segment->add_option("--min-span-fraction", sp.min_span_fraction, "Fraction of tracks that must span a block")
      ->check(CLI::Range(0.0, 1.0))
      ->capture_default_str();
  segment->add_option("--grid", sp.grid_cells, "Representative grid cells per axis")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  segment->add_option("--max-block-len", sp.max_block_len, "Longest block, frames")
      ->check(CLI::Range(2, 1 << 30))
      ->capture_default_str();
  segment->add_option("--min-block-len", sp.min_block_len, "Shortest block, frames")
      ->check(CLI::Range(2, 1 << 30))
      ->capture_default_str();
  segment->add_option("--seed", sp.seed, "Clustering seed")->capture_default_str();
  segment->add_option("--threads", threads, "Blocks segmented in parallel")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();

  SceneParams scene;
  std::string traj_out;
  std::string gt_out;
  auto* synth = app.add_subcommand("synth", "Generate a labeled synthetic jittery scene");
  synth->add_option("--sigma", scene.sigma, "Jitter level")->required()->check(CLI::NonNegativeNumber);
  synth->add_option("--n-bg", scene.n_bg, "Background tracks")->required()->check(CLI::PositiveNumber);
  synth->add_option("--n-fg", scene.n_fg, "Foreground tracks")->required()->check(CLI::PositiveNumber);
  synth->add_option("--frames", scene.n_frames, "Frame count")->required()->check(CLI::Range(2, 1 << 30));
  synth->add_option("--seed", scene.seed, "Scene seed")->required();
  synth->add_option("--out", traj_out, "Trajectory file to write")->required();
  synth->add_option("--gt", gt_out, "Ground-truth label file to write")->required();
  synth->add_option("--width", scene.frame_size.width, "Frame width")->check(CLI::PositiveNumber)->capture_default_str();
  synth->add_option("--height", scene.frame_size.height, "Frame height")->check(CLI::PositiveNumber)->capture_default_str();
  synth->add_option("--camera-speed", scene.camera_speed, "Camera drift, px/frame")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  synth->add_option("--camera-rotation", scene.camera_rotation, "Total smooth camera roll, rad")->capture_default_str();
  synth->add_option("--camera-zoom", scene.camera_zoom, "Total smooth camera log-zoom")->capture_default_str();
  synth->add_option("--camera-bend", scene.camera_bend, "Curvature of the camera path")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  synth->add_option("--object-speed", scene.object_speed, "Foreground drift, px/frame")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  synth->add_option("--object-sway", scene.object_sway, "Foreground sway amplitude, px")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  synth->add_option("--n-partial", scene.n_partial, "Extra partial-coverage tracks")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  synth->add_option("--partial-coverage", scene.partial_coverage, "Coverage of partial tracks")
      ->check(CLI::Range(0.0, 1.0))
      ->capture_default_str();

  std::string pred_path;
  std::string gt_path;
  auto* eval = app.add_subcommand("eval", "Score predicted labels against ground truth");
  eval->add_option("--pred", pred_path, "Predicted label file")->required();
  eval->add_option("--gt", gt_path, "Ground-truth label file")->required();

  std::vector<const char*> argv{"kendallseg"};
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "kendallseg: usage error: " << e.what() << "\n";
    return kExitUsage;
  }

  std::string stage = "setup";
  try {
    if (*segment) {
      try {
        sp.validate();
      } catch (const Error& e) {
        err << "kendallseg segment: usage error: " << e.what() << "\n";
        return kExitUsage;
      }
      stage = "parse_trajectories";
      const TrajectoryStore store = parse_trajectories(input);
      stage = "segment";
      const SegmentationResult result = segment_store(store, sp, threads);
      stage = "write_labels";
      write_labels(output, to_label_file(result, sp));
      for (const auto& w : result.fused.warnings) err << "kendallseg segment: warning: " << w << "\n";
    } else if (*synth) {
      stage = "generate_scene";
      const LabeledScene labeled = generate_scene(scene);
      stage = "write_trajectories";
      write_trajectories(traj_out, labeled.store);
      LabelFile gt;
      gt.header = json{{"tool", "kendallseg"}, {"command", "synth"}, {"scene", scene_to_json(scene)}};
      gt.fused = labeled.ground_truth;
      stage = "write_labels";
      write_labels(gt_out, gt);
    } else if (*eval) {
      stage = "parse_labels";
      const LabelFile pred = parse_labels(pred_path);
      const LabelFile truth = parse_labels(gt_path);
      stage = "evaluate";
      out << metrics_to_json(evaluate(pred.fused, truth.fused)).dump() << "\n";
    }
  } catch (const std::exception& e) {
    err << "kendallseg: " << stage << " failed: " << e.what() << "\n";
    return kExitPipeline;
  }
  return kExitOk;
}

inline int run_cli(int argc, const char* const* argv, std::ostream& out = std::cout,
                   std::ostream& err = std::cerr) {
  return run_cli(std::vector<std::string>(argv + 1, argv + argc), out, err);
}

}  // namespace kseg
