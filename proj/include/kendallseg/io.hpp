#pragma once

// Line-delimited JSON carriers for trajectories and labels.
//
// Trajectory file:
//   {"frames": 30, "width": 640, "height": 360}
//   {"id": 0, "start": 0, "points": [[x, y], ...]}
//   ...
//
// Label file:
//   {"kind": "header", ...effective parameters...}
//   {"kind": "block", "range": [start, end], "labels": {"<id>": 0|1, ...}}
//   {"kind": "fused", "labels": {...}, "foreground_cluster": 1, "warnings": [...]}

#include <filesystem>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "kendallseg/error.hpp"
#include "kendallseg/segmenter.hpp"

namespace kseg {

using nlohmann::json;

struct BlockLabels {
  int start = 0;
  int end = 0;
  LabelMap labels;
};

struct LabelFile {
  json header = json::object();
  std::vector<BlockLabels> blocks;
  LabelMap fused;
  std::vector<std::string> warnings;
};

namespace detail {

template <typename T>
T require_field(const json& record, const char* key, std::size_t line) {
  auto it = record.find(key);
  if (it == record.end()) throw ParseError(line, std::string("missing field '") + key + "'");
  try {
    if constexpr (std::is_integral_v<T>) {
      if (!it->is_number_integer()) throw ParseError(line, std::string("'") + key + "' must be an integer");
    }
    return it->get<T>();
  } catch (const json::exception& e) {
    throw ParseError(line, std::string("bad field '") + key + "': " + e.what());
  }
}

inline json parse_line(const std::string& text, std::size_t line) {
  try {
    json record = json::parse(text);
    if (!record.is_object()) throw ParseError(line, "record is not a JSON object");
    return record;
  } catch (const json::parse_error& e) {
    throw ParseError(line, e.what());
  }
}

inline bool blank(const std::string& s) {
  return s.find_first_not_of(" \t\r") == std::string::npos;
}

inline std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::ParseError, "cannot open " + path.string());
  return in;
}

inline std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::ParseError, "cannot write " + path.string());
  return out;
}

inline json labels_to_json(const LabelMap& labels) {
  json obj = json::object();
  for (const auto& [id, label] : labels) obj[std::to_string(id)] = label;
  return obj;
}

inline LabelMap labels_from_json(const json& obj, std::size_t line) {
  if (!obj.is_object()) throw ParseError(line, "'labels' must be an object");
  LabelMap labels;
  for (const auto& [key, value] : obj.items()) {
    std::size_t used = 0;
    TrajectoryId id = 0;
    try {
      id = std::stoll(key, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != key.size() || key.empty()) throw ParseError(line, "label key '" + key + "' is not an id");
    if (!value.is_number_integer() || (value.get<int>() != 0 && value.get<int>() != 1)) {
      throw ParseError(line, "label for id " + key + " must be 0 or 1");
    }
    labels[id] = value.get<int>();
  }
  return labels;
}

}  // namespace detail

inline TrajectoryStore parse_trajectories(std::istream& in) {
  TrajectoryStore store;
  bool have_header = false;
  std::unordered_set<TrajectoryId> ids;
  std::string text;
  std::size_t line = 0;
  while (std::getline(in, text)) {
    ++line;
    if (detail::blank(text)) continue;
    const json record = detail::parse_line(text, line);
    if (!have_header) {
      if (!record.contains("frames")) throw ParseError(line, "first record must be the header");
      store.n_frames_total = detail::require_field<int>(record, "frames", line);
      store.frame_size.width = detail::require_field<int>(record, "width", line);
      store.frame_size.height = detail::require_field<int>(record, "height", line);
      if (store.n_frames_total < 1 || store.frame_size.width < 1 || store.frame_size.height < 1) {
        throw ParseError(line, "header values must be positive");
      }
      have_header = true;
      continue;
    }
    Trajectory t;
    t.id = detail::require_field<TrajectoryId>(record, "id", line);
    t.start_frame = detail::require_field<int>(record, "start", line);
    const auto pts = detail::require_field<std::vector<std::vector<double>>>(record, "points", line);
    t.points.resize(static_cast<Eigen::Index>(pts.size()), 2);
    for (std::size_t i = 0; i < pts.size(); ++i) {
      if (pts[i].size() != 2) throw ParseError(line, "each point must be an [x, y] pair");
      t.points(static_cast<Eigen::Index>(i), 0) = pts[i][0];
      t.points(static_cast<Eigen::Index>(i), 1) = pts[i][1];
    }
    if (!ids.insert(t.id).second) {
      throw Error(ErrorCode::DuplicateId, "line " + std::to_string(line) + ": id " + std::to_string(t.id));
    }
    TrajectoryStore one{{t}, store.n_frames_total, store.frame_size};
    try {
      validate_store(one);
    } catch (const Error& e) {
      throw Error(e.code(), "line " + std::to_string(line) + ": " + e.what());
    }
    store.trajectories.push_back(std::move(t));
  }
  if (!have_header) throw ParseError(line + 1, "missing header record");
  return store;
}

inline TrajectoryStore parse_trajectories(const std::filesystem::path& path) {
  auto in = detail::open_input(path);
  return parse_trajectories(in);
}

inline void write_trajectories(std::ostream& out, const TrajectoryStore& store) {
  out << json{{"frames", store.n_frames_total},
              {"width", store.frame_size.width},
              {"height", store.frame_size.height}}
             .dump()
      << '\n';
  for (const auto& t : store.trajectories) {
    json points = json::array();
    for (Eigen::Index i = 0; i < t.points.rows(); ++i) points.push_back({t.points(i, 0), t.points(i, 1)});
    out << json{{"id", t.id}, {"start", t.start_frame}, {"points", std::move(points)}}.dump() << '\n';
  }
}

inline void write_trajectories(const std::filesystem::path& path, const TrajectoryStore& store) {
  auto out = detail::open_output(path);
  write_trajectories(out, store);
}

inline void write_labels(std::ostream& out, const LabelFile& file) {
  json header = file.header;
  header["kind"] = "header";
  out << header.dump() << '\n';
  for (const auto& b : file.blocks) {
    out << json{{"kind", "block"}, {"range", {b.start, b.end}}, {"labels", detail::labels_to_json(b.labels)}}
               .dump()
        << '\n';
  }
  out << json{{"kind", "fused"},
              {"labels", detail::labels_to_json(file.fused)},
              {"foreground_cluster", FusedLabels::foreground_cluster},
              {"warnings", file.warnings}}
             .dump()
      << '\n';
}

inline void write_labels(const std::filesystem::path& path, const LabelFile& file) {
  auto out = detail::open_output(path);
  write_labels(out, file);
}

inline LabelFile parse_labels(std::istream& in) {
  LabelFile file;
  bool have_header = false;
  bool have_fused = false;
  std::string text;
  std::size_t line = 0;
  while (std::getline(in, text)) {
    ++line;
    if (detail::blank(text)) continue;
    json record = detail::parse_line(text, line);
    const auto kind = detail::require_field<std::string>(record, "kind", line);
    if (kind == "header") {
      record.erase("kind");
      file.header = std::move(record);
      have_header = true;
    } else if (!have_header) {
      throw ParseError(line, "first record must be the header");
    } else if (kind == "block") {
      const auto range = detail::require_field<std::vector<int>>(record, "range", line);
      if (range.size() != 2) throw ParseError(line, "'range' must be [start, end]");
      if (!record.contains("labels")) throw ParseError(line, "missing field 'labels'");
      file.blocks.push_back({range[0], range[1], detail::labels_from_json(record.at("labels"), line)});
    } else if (kind == "fused") {
      if (!record.contains("labels")) throw ParseError(line, "missing field 'labels'");
      file.fused = detail::labels_from_json(record.at("labels"), line);
      if (record.contains("warnings")) file.warnings = record.at("warnings").get<std::vector<std::string>>();
      have_fused = true;
    } else {
      throw ParseError(line, "unknown record kind '" + kind + "'");
    }
  }
  if (!have_fused) throw ParseError(line + 1, "missing fused record");
  return file;
}

inline LabelFile parse_labels(const std::filesystem::path& path) {
  auto in = detail::open_input(path);
  return parse_labels(in);
}

}  // namespace kseg
