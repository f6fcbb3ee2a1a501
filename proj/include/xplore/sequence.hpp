#pragma once

#include <cstddef>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "xplore/action.hpp"
#include "xplore/ingest.hpp"
#include "xplore/keyframe.hpp"
#include "xplore/modelclient.hpp"
#include "xplore/vh.hpp"

namespace xplore::sequence {

enum class Source { ground_truth, generated };

std::string_view source_name(Source s) noexcept;
Source source_from_name(std::string_view name);

struct ScreenRecord {
  std::size_t keyframe_index = 0;
  // Not serialized; reattached from the frame sequence on load.
  std::shared_ptr<const ingest::LumaPlane> luma;
  vh::SimplifiedVh vh;
  Source vh_source = Source::generated;
  // Ground-truth screen label when the trace provides one (synthetic corpora).
  std::optional<std::string> label;

  bool operator==(const ScreenRecord &o) const {
    return keyframe_index == o.keyframe_index && vh == o.vh && vh_source == o.vh_source && label == o.label;
  }
};

struct ExplorationStep {
  ScreenRecord pre;
  Action action;
  ScreenRecord post;
  Source action_source = Source::generated;

  bool operator==(const ExplorationStep &) const = default;
};

struct ExplorationSequence {
  std::string source_id;
  std::vector<ExplorationStep> steps;

  bool operator==(const ExplorationSequence &) const = default;
};

// One line of trace.jsonl. pre_screen/post_screen are optional ground-truth
// screen labels written by the simulator.
struct TraceEvent {
  std::size_t frame = 0;
  Action action;
  std::optional<vh::ViewHierarchy> pre_vh;
  std::optional<vh::ViewHierarchy> post_vh;
  std::optional<std::string> pre_screen;
  std::optional<std::string> post_screen;

  bool operator==(const TraceEvent &) const = default;
};

using Trace = std::vector<TraceEvent>;

json to_json(const TraceEvent &event);
TraceEvent trace_event_from_json(const json &doc);
Trace parse_trace(std::string_view jsonl);
Trace load_trace(const std::filesystem::path &path);
std::string trace_to_jsonl(const Trace &trace);

struct TraceAlignment {
  // Per segment, the index of the matched trace event.
  std::vector<std::optional<std::size_t>> segment_event;
  // Events whose frame falls outside every burst.
  std::vector<std::size_t> unmatched_events;
  // Events inside a burst already claimed by an earlier event.
  std::vector<std::size_t> surplus_events;
  std::vector<std::size_t> unmatched_segments;
};

// Event e matches segment s iff change_start <= e.frame <= change_end; the
// first event in a burst wins.
TraceAlignment align_trace(const std::vector<keyframe::ActionSegment> &segments, const Trace &trace);

struct BuildOptions {
  // Concurrent client requests across segments.
  int parallelism = 4;
};

struct SequenceBuild {
  ExplorationSequence sequence;
  // Trace events that could not be aligned (unmatched or surplus), reported
  // and otherwise ignored.
  std::vector<std::size_t> dropped_events;
};

// One step per segment. VH and action come from the aligned trace event when
// there is one, otherwise from the client. client may be null when the trace
// covers everything; a needed but failing client raises
// Errc::client_unavailable.
SequenceBuild build_sequence(const ingest::FrameSequence &seq, const std::vector<keyframe::ActionSegment> &segments,
                             const Trace *gt_trace, model::ModelClient *client, const BuildOptions &opts = {});

json to_json(const ExplorationSequence &seq);
// When frames is given, each record's luma is reattached by keyframe index.
ExplorationSequence sequence_from_json(const json &doc, const ingest::FrameSequence *frames = nullptr);

// Distinct screen records of the sequence, ordered by keyframe index.
std::vector<ScreenRecord> screens_of(const ExplorationSequence &seq);

// sha256 of the luma samples; identifies a screenshot in requests.
std::string luma_digest(const ingest::LumaPlane &plane);

} // namespace xplore::sequence
