#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "xplore/cluster.hpp"
#include "xplore/keyframe.hpp"
#include "xplore/modelclient.hpp"
#include "xplore/util.hpp"

namespace xplore::pipeline {

inline constexpr std::array<std::string_view, 6> kStages = {"ingest", "keyframe", "sequence",
                                                            "cluster", "graph", "qa"};

struct ModelConfig {
  std::string backend = "mock"; // mock | remote | none
  std::string url;              // remote only; falls back to XPLORE_MODEL_URL
  std::optional<std::filesystem::path> fixtures;
  std::optional<std::filesystem::path> cache_dir; // falls back to XPLORE_CACHE_DIR, then <out>/cache
  int timeout_seconds = 60;
  int max_in_flight = 4;
};

struct PipelineConfig {
  std::filesystem::path manifest;
  std::optional<std::filesystem::path> trace;
  std::optional<std::filesystem::path> qa;
  keyframe::SegmenterConfig segmenter;
  cluster::Method cluster_method = cluster::Method::rule;
  cluster::RuleClusterConfig cluster;
  ModelConfig model;
  std::size_t prompt_budget = 4096;
  std::filesystem::path out_dir = "out";
  std::uint64_t seed = 0;
  int parallelism = 4;

  // Errc::invalid_config for out-of-range values, Errc::missing_file for
  // referenced inputs that do not exist.
  void validate() const;
};

// Parses a small TOML subset: `[section]` headers, `key = value` pairs with
// quoted strings, integers, floats and booleans, and `#` comments. Relative
// paths resolve against base_dir.
PipelineConfig parse_config(std::string_view text, const std::filesystem::path &base_dir);
PipelineConfig load_config(const std::filesystem::path &path);
json to_json(const PipelineConfig &cfg);

std::shared_ptr<model::Backend> make_backend(const ModelConfig &cfg);

struct StageReport {
  std::string name;
  bool cached = false;
  double seconds = 0.0;
  std::string input_hash;
  json counts = json::object();
};

struct RunReport {
  std::vector<StageReport> stages;
  model::ClientStats model_stats;
  std::uint64_t seed = 0;
  std::optional<std::string> failed_stage;
  std::string error;

  const StageReport *stage(std::string_view name) const;
};

json to_json(const RunReport &r);

// Artifacts live under <out>/artifacts, the stage index in <out>/index.json
// and the run report in <out>/report.json. A stage runs when its input hash
// changed, one of its artifacts is missing, or an upstream stage ran.
// Failures are rethrown as StageError after the report is written.
RunReport run_pipeline(const PipelineConfig &cfg);

std::filesystem::path artifact_dir(const PipelineConfig &cfg);

} // namespace xplore::pipeline
