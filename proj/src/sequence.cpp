#include "xplore/sequence.hpp"

#include <algorithm>
#include <future>
#include <map>
#include <sstream>

#include "xplore/error.hpp"

namespace xplore::sequence {

std::string_view source_name(Source s) noexcept {
  return s == Source::ground_truth ? "ground_truth" : "generated";
}

Source source_from_name(std::string_view name) {
  if (name == "ground_truth")
    return Source::ground_truth;
  if (name == "generated")
    return Source::generated;
  throw Error(Errc::schema_violation, "unknown source '" + std::string(name) + "'");
}

std::string luma_digest(const ingest::LumaPlane &plane) { return sha256_hex(std::span(plane.samples)); }

json to_json(const TraceEvent &event) {
  json out{{"frame", event.frame}, {"action", to_json(event.action)}};
  out["pre_vh"] = event.pre_vh ? vh::to_json(*event.pre_vh) : json(nullptr);
  out["post_vh"] = event.post_vh ? vh::to_json(*event.post_vh) : json(nullptr);
  if (event.pre_screen)
    out["pre_screen"] = *event.pre_screen;
  if (event.post_screen)
    out["post_screen"] = *event.post_screen;
  return out;
}

TraceEvent trace_event_from_json(const json &doc) {
  try {
    TraceEvent ev;
    ev.frame = doc.at("frame").get<std::size_t>();
    ev.action = action_from_json(doc.at("action"));
    if (auto it = doc.find("pre_vh"); it != doc.end() && !it->is_null())
      ev.pre_vh = vh::parse_vh(*it);
    if (auto it = doc.find("post_vh"); it != doc.end() && !it->is_null())
      ev.post_vh = vh::parse_vh(*it);
    if (auto it = doc.find("pre_screen"); it != doc.end() && !it->is_null())
      ev.pre_screen = it->get<std::string>();
    if (auto it = doc.find("post_screen"); it != doc.end() && !it->is_null())
      ev.post_screen = it->get<std::string>();
    return ev;
  } catch (const json::exception &e) {
    throw Error(Errc::schema_violation, std::string("trace event: ") + e.what());
  }
}

Trace parse_trace(std::string_view jsonl) {
  Trace out;
  std::istringstream in{std::string(jsonl)};
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos)
      continue;
    try {
      out.push_back(trace_event_from_json(json::parse(line)));
    } catch (const json::parse_error &e) {
      throw Error(Errc::schema_violation, "trace line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

Trace load_trace(const std::filesystem::path &path) { return parse_trace(read_text(path)); }

std::string trace_to_jsonl(const Trace &trace) {
  std::string out;
  for (const auto &ev : trace) {
    out += to_json(ev).dump();
    out += '\n';
  }
  return out;
}

TraceAlignment align_trace(const std::vector<keyframe::ActionSegment> &segments, const Trace &trace) {
  TraceAlignment out;
  out.segment_event.assign(segments.size(), std::nullopt);
  for (std::size_t e = 0; e < trace.size(); ++e) {
    const auto frame = trace[e].frame;
    // Segments are ordered and disjoint: find the first burst ending at or after frame.
    auto it = std::lower_bound(segments.begin(), segments.end(), frame,
                               [](const keyframe::ActionSegment &s, std::size_t f) { return s.change_end < f; });
    if (it == segments.end() || it->change_start > frame) {
      out.unmatched_events.push_back(e);
      continue;
    }
    auto s = static_cast<std::size_t>(it - segments.begin());
    if (out.segment_event[s])
      out.surplus_events.push_back(e);
    else
      out.segment_event[s] = e;
  }
  for (std::size_t s = 0; s < segments.size(); ++s)
    if (!out.segment_event[s])
      out.unmatched_segments.push_back(s);
  return out;
}

namespace {

std::shared_ptr<const ingest::LumaPlane> share_luma(const ingest::FrameSequence &seq, std::size_t index) {
  if (index >= seq.lumas.size())
    throw Error(Errc::index_out_of_range, "keyframe " + std::to_string(index) + " outside sequence");
  // Aliasing constructor: the record refers into the sequence without copying.
  return std::shared_ptr<const ingest::LumaPlane>(std::shared_ptr<const void>(), &seq.lumas[index]);
}

model::InferenceResponse call_client(model::ModelClient *client, model::Endpoint endpoint, json payload) {
  if (!client)
    throw Error(Errc::client_unavailable,
                std::string("no ground truth and no model client for ") + std::string(model::endpoint_name(endpoint)));
  try {
    return client->invoke(endpoint, std::move(payload));
  } catch (const Error &e) {
    if (is_backend_error(e.code()))
      throw Error(Errc::client_unavailable, std::string("model client failed: ") + e.what());
    throw;
  }
}

vh::SimplifiedVh generate_vh(model::ModelClient *client, const std::string &source_id, std::size_t frame,
                             const ingest::LumaPlane &luma) {
  json payload{{"source_id", source_id}, {"frame", frame}, {"luma_digest", luma_digest(luma)}};
  auto res = call_client(client, model::Endpoint::vh_generate, std::move(payload));
  vh::SimplifiedVh out;
  for (const auto &l : res.body["vh_lines"]) {
    auto line = l.get<std::string>();
    try {
      vh::parse_line(line);
    } catch (const Error &e) {
      throw Error(Errc::client_unavailable, std::string("generated VH unusable: ") + e.what());
    }
    out.lines.push_back(std::move(line));
  }
  return out;
}

Action generate_action(model::ModelClient *client, const ScreenRecord &pre, const ScreenRecord &post) {
  json payload{{"pre_frame", pre.keyframe_index},
               {"post_frame", post.keyframe_index},
               {"pre_vh_lines", pre.vh.lines},
               {"post_vh_lines", post.vh.lines},
               {"pre_luma_digest", luma_digest(*pre.luma)},
               {"post_luma_digest", luma_digest(*post.luma)}};
  auto res = call_client(client, model::Endpoint::action_generate, std::move(payload));
  try {
    return action_from_json(res.body["action"]);
  } catch (const Error &e) {
    throw Error(Errc::client_unavailable, std::string("generated action unusable: ") + e.what());
  }
}

ScreenRecord make_record(const ingest::FrameSequence &seq, std::size_t frame,
                         const std::optional<vh::ViewHierarchy> &gt_vh, const std::optional<std::string> &label,
                         model::ModelClient *client) {
  ScreenRecord r;
  r.keyframe_index = frame;
  r.luma = share_luma(seq, frame);
  r.label = label;
  if (gt_vh) {
    r.vh = vh::simplify(*gt_vh);
    r.vh_source = Source::ground_truth;
  } else {
    r.vh = generate_vh(client, seq.manifest.source_id, frame, *r.luma);
    r.vh_source = Source::generated;
  }
  return r;
}

json record_to_json(const ScreenRecord &r) {
  json out{{"frame", r.keyframe_index}, {"vh_lines", r.vh.lines}, {"vh_source", source_name(r.vh_source)}};
  if (r.label)
    out["label"] = *r.label;
  return out;
}

ScreenRecord record_from_json(const json &doc, const ingest::FrameSequence *frames) {
  ScreenRecord r;
  r.keyframe_index = doc.at("frame").get<std::size_t>();
  r.vh.lines = doc.at("vh_lines").get<std::vector<std::string>>();
  r.vh_source = source_from_name(doc.at("vh_source").get<std::string>());
  if (auto it = doc.find("label"); it != doc.end() && !it->is_null())
    r.label = it->get<std::string>();
  if (frames)
    r.luma = share_luma(*frames, r.keyframe_index);
  return r;
}

} // namespace

SequenceBuild build_sequence(const ingest::FrameSequence &seq, const std::vector<keyframe::ActionSegment> &segments,
                             const Trace *gt_trace, model::ModelClient *client, const BuildOptions &opts) {
  SequenceBuild out;
  out.sequence.source_id = seq.manifest.source_id;
  TraceAlignment alignment;
  alignment.segment_event.assign(segments.size(), std::nullopt);
  if (gt_trace) {
    alignment = align_trace(segments, *gt_trace);
    out.dropped_events = alignment.unmatched_events;
    out.dropped_events.insert(out.dropped_events.end(), alignment.surplus_events.begin(),
                              alignment.surplus_events.end());
    std::sort(out.dropped_events.begin(), out.dropped_events.end());
  }

  auto build_step = [&](std::size_t i) {
    const auto &seg = segments[i];
    const TraceEvent *ev = alignment.segment_event[i] ? &(*gt_trace)[*alignment.segment_event[i]] : nullptr;
    static const std::optional<vh::ViewHierarchy> none;
    static const std::optional<std::string> no_label;
    ExplorationStep step;
    step.pre = make_record(seq, seg.pre_keyframe, ev ? ev->pre_vh : none, ev ? ev->pre_screen : no_label, client);
    step.post = make_record(seq, seg.post_keyframe, ev ? ev->post_vh : none, ev ? ev->post_screen : no_label, client);
    if (ev) {
      step.action = ev->action;
      step.action_source = Source::ground_truth;
    } else {
      step.action = generate_action(client, step.pre, step.post);
      step.action_source = Source::generated;
    }
    return step;
  };

  const auto width = static_cast<std::size_t>(std::max(1, opts.parallelism));
  out.sequence.steps.reserve(segments.size());
  for (std::size_t begin = 0; begin < segments.size(); begin += width) {
    const auto end = std::min(segments.size(), begin + width);
    if (width == 1 || end - begin == 1) {
      for (auto i = begin; i < end; ++i)
        out.sequence.steps.push_back(build_step(i));
      continue;
    }
    std::vector<std::future<ExplorationStep>> batch;
    for (auto i = begin; i < end; ++i)
      batch.push_back(std::async(std::launch::async, build_step, i));
    for (auto &f : batch)
      out.sequence.steps.push_back(f.get());
  }
  return out;
}

json to_json(const ExplorationSequence &seq) {
  json steps = json::array();
  for (const auto &s : seq.steps)
    steps.push_back({{"pre", record_to_json(s.pre)},
                     {"action", to_json(s.action)},
                     {"action_source", source_name(s.action_source)},
                     {"post", record_to_json(s.post)}});
  return json{{"source_id", seq.source_id}, {"steps", std::move(steps)}};
}

ExplorationSequence sequence_from_json(const json &doc, const ingest::FrameSequence *frames) {
  try {
    ExplorationSequence out;
    out.source_id = doc.at("source_id").get<std::string>();
    for (const auto &s : doc.at("steps")) {
      ExplorationStep step;
      step.pre = record_from_json(s.at("pre"), frames);
      step.post = record_from_json(s.at("post"), frames);
      step.action = action_from_json(s.at("action"));
      step.action_source = source_from_name(s.at("action_source").get<std::string>());
      out.steps.push_back(std::move(step));
    }
    return out;
  } catch (const json::exception &e) {
    throw Error(Errc::schema_violation, std::string("sequence document: ") + e.what());
  }
}

std::vector<ScreenRecord> screens_of(const ExplorationSequence &seq) {
  std::map<std::size_t, const ScreenRecord *> by_frame;
  for (const auto &s : seq.steps) {
    by_frame.emplace(s.pre.keyframe_index, &s.pre);
    by_frame.emplace(s.post.keyframe_index, &s.post);
  }
  std::vector<ScreenRecord> out;
  out.reserve(by_frame.size());
  for (const auto &[_, r] : by_frame)
    out.push_back(*r);
  return out;
}

} // namespace xplore::sequence
