#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "xplore/graph.hpp"
#include "xplore/ingest.hpp"
#include "xplore/sequence.hpp"
#include "xplore/tasks.hpp"
#include "xplore/vh.hpp"

namespace xplore::simulate {

struct Element {
  std::string element_id;
  vh::Bounds bounds;
  bool clickable = false;
  std::string text;

  bool operator==(const Element &) const = default;
};

struct Screen {
  int screen_id = 0;
  std::string description;
  std::vector<Element> elements;

  bool operator==(const Screen &) const = default;
};

// Declarative app: screens, tap transitions keyed by (screen, element), and a
// static back map standing in for the Android back stack.
struct AppModel {
  std::string app_description;
  int width = 144;
  int height = 256;
  std::vector<Screen> screens;
  std::map<std::pair<int, std::string>, int> transitions;
  int home = 0;
  std::map<int, int> back_map;

  // Throws Errc::invalid_model on dangling references, duplicate ids or
  // screens unreachable from home.
  void validate() const;
  const Screen &screen(int id) const;
  bool has_screen(int id) const;

  bool operator==(const AppModel &) const = default;
};

json to_json(const AppModel &model);
AppModel app_model_from_json(const json &doc);
AppModel load_app_model(const std::filesystem::path &path);

// Seeded generator: n_screens screens (n >= 1), every screen reachable from
// home through a spanning tree, back map pointing at tree parents, no
// self-transitions, and resource ids prefixed by the screen so distinct
// screens never share VH signatures.
AppModel random_app_model(std::uint64_t seed, int n_screens, int width = 144, int height = 256);

tasks::AppGroundTruth ground_truth(const AppModel &model);

enum class PolicyKind { dfs, random };

struct ExplorationPolicy {
  PolicyKind kind = PolicyKind::dfs;
  std::uint64_t seed = 0;
  int max_steps = 200;
};

PolicyKind policy_from_name(std::string_view name);

struct SimEvent {
  int pre_screen = 0;
  int post_screen = 0;
  Action action;
  vh::ViewHierarchy pre_vh;
  vh::ViewHierarchy post_vh;

  bool operator==(const SimEvent &) const = default;
};

using SimTrace = std::vector<SimEvent>;

vh::ViewHierarchy screen_vh(const AppModel &model, int screen_id);

// dfs: clicks the first untried clickable element of the current screen;
// once a screen is exhausted it walks (preferring back) along known moves to
// the nearest screen with untried elements. random: uniform over the
// current screen's taps plus back. Stops at max_steps or exhaustion.
SimTrace explore(const AppModel &model, const ExplorationPolicy &policy);

// Graph over the screens and transitions the trace exercised. Node ids follow
// first appearance (home is 0); each node's single member is its screen id.
graph::GuiTransitionGraph gt_graph(const AppModel &model, const SimTrace &trace);

// Screen id behind every gt_graph node, indexed by node id.
std::vector<int> gt_node_screens(const AppModel &model, const SimTrace &trace);

struct RenderConfig {
  int width = 144;
  int height = 256;
  int static_run = 4;
  int transition_run = 3;
  double fps = 10.0;

  void validate() const;
};

// Flat background shade, injective for screen ids in [0, 200).
std::uint8_t background_shade(int screen_id);

// Settled frame of one screen.
ingest::LumaPlane render_screen(const AppModel &model, int screen_id, const RenderConfig &cfg);

struct Rendering {
  std::vector<ingest::LumaPlane> frames;
  sequence::Trace trace; // frame = first blend frame of each event
  double fps = 10.0;
};

// static_run settled frames, then per event transition_run blend frames and
// static_run settled frames of the next screen.
Rendering render(const AppModel &model, const SimTrace &trace, const RenderConfig &cfg);

sequence::Trace to_trace(const SimTrace &trace, const std::vector<std::size_t> &frames);

struct CorpusPaths {
  std::filesystem::path manifest;
  std::filesystem::path trace;
  std::filesystem::path app_model;
  std::filesystem::path gt_graph;
  std::filesystem::path qa;
};

struct CorpusOptions {
  std::string source_id = "synthetic";
  RenderConfig render;
  std::uint64_t qa_seed = 0;
  int qa_per_task = 2;
};

// Writes frames/*.pgm, manifest.json, trace.jsonl, appmodel.json,
// gt_graph.json and qa.jsonl under dir.
CorpusPaths write_corpus(const std::filesystem::path &dir, const AppModel &model, const SimTrace &trace,
                         const CorpusOptions &opts = {});

} // namespace xplore::simulate
