#include <gtest/gtest.h>

#include "support.hpp"
#include "xplore/error.hpp"
#include "xplore/sequence.hpp"

using namespace xplore;
using namespace xplore::sequence;
using keyframe::ActionSegment;
using testing_support::tap;

namespace {

ingest::FrameSequence frames(std::size_t n) {
  ingest::FrameSequence seq;
  seq.manifest.source_id = "rec";
  seq.manifest.fps = 10;
  for (std::size_t i = 0; i < n; ++i)
    seq.lumas.emplace_back(4, 4, static_cast<std::uint8_t>(i * 10));
  return seq;
}

vh::ViewHierarchy screen_vh(const std::string &name) {
  return vh::parse_vh(json{{"screen", {4, 4}},
                           {"root", {{"class", "Screen"}, {"id", name}, {"bounds", {0, 0, 4, 4}}}}});
}

TraceEvent event(std::size_t frame, const std::string &id, const std::string &from, const std::string &to) {
  TraceEvent ev;
  ev.frame = frame;
  ev.action = tap(id);
  ev.pre_vh = screen_vh(from);
  ev.post_vh = screen_vh(to);
  ev.pre_screen = from;
  ev.post_screen = to;
  return ev;
}

Errc code_of(const std::function<void()> &fn) {
  try {
    fn();
  } catch (const Error &e) {
    return e.code();
  }
  ADD_FAILURE() << "expected an xplore::Error";
  return Errc::io_error;
}

class FailingBackend : public model::Backend {
public:
  model::BackendKind kind() const noexcept override { return model::BackendKind::remote; }
  json call(const model::InferenceRequest &) override { throw Error(Errc::backend_timeout, "slow"); }
};

} // namespace

TEST(Align, EventsInsideBursts) {
  std::vector<ActionSegment> segs{{1, 2, 3, 4}, {6, 7, 9, 10}};
  Trace trace{event(2, "a", "A", "B"), event(3, "x", "A", "B"), event(5, "y", "B", "B"), event(9, "b", "B", "C")};
  auto al = align_trace(segs, trace);
  EXPECT_EQ(al.segment_event[0], 0u);
  EXPECT_EQ(al.segment_event[1], 3u);
  EXPECT_EQ(al.surplus_events, std::vector<std::size_t>{1});
  EXPECT_EQ(al.unmatched_events, std::vector<std::size_t>{2});
  EXPECT_TRUE(al.unmatched_segments.empty());
}

TEST(Align, UnmatchedSegment) {
  std::vector<ActionSegment> segs{{1, 2, 3, 4}, {6, 7, 9, 10}};
  auto al = align_trace(segs, {event(8, "b", "B", "C")});
  EXPECT_FALSE(al.segment_event[0]);
  EXPECT_EQ(al.unmatched_segments, std::vector<std::size_t>{0});
}

TEST(Trace, JsonlRoundTrip) {
  Trace trace{event(2, "a", "A", "B"), event(9, "b", "B", "C")};
  trace[1].pre_vh.reset();
  trace[1].pre_screen.reset();
  auto text = trace_to_jsonl(trace);
  EXPECT_EQ(parse_trace(text), trace);
  EXPECT_EQ(parse_trace("\n" + text + "\n\n"), trace);
  EXPECT_EQ(code_of([] { parse_trace("{\"frame\": 1}\n"); }), Errc::schema_violation);
  EXPECT_EQ(code_of([] { parse_trace("nope\n"); }), Errc::schema_violation);
}

TEST(Build, FullyCoveredByTrace) {
  auto seq = frames(12);
  std::vector<ActionSegment> segs{{1, 2, 3, 4}, {6, 7, 9, 10}};
  Trace trace{event(2, "a", "A", "B"), event(8, "b", "B", "C")};
  auto built = build_sequence(seq, segs, &trace, nullptr);
  ASSERT_EQ(built.sequence.steps.size(), 2u);
  const auto &s0 = built.sequence.steps[0];
  EXPECT_EQ(s0.pre.keyframe_index, 1u);
  EXPECT_EQ(s0.post.keyframe_index, 4u);
  EXPECT_EQ(s0.action, tap("a"));
  EXPECT_EQ(s0.action_source, Source::ground_truth);
  EXPECT_EQ(s0.pre.vh_source, Source::ground_truth);
  EXPECT_EQ(s0.pre.vh, vh::simplify(screen_vh("A")));
  EXPECT_EQ(s0.post.label, "B");
  EXPECT_EQ(s0.pre.luma.get(), &seq.lumas[1]);
  EXPECT_TRUE(built.dropped_events.empty());
  EXPECT_EQ(built.sequence.source_id, "rec");
}

TEST(Build, GapsAreFilledByTheClient) {
  auto seq = frames(12);
  std::vector<ActionSegment> segs{{1, 2, 3, 4}, {6, 7, 9, 10}};
  Trace trace{event(8, "b", "B", "C"), event(11, "z", "C", "C")};
  model::ModelClient client(model::mock_backend());
  auto built = build_sequence(seq, segs, &trace, &client, {1});
  const auto &s0 = built.sequence.steps[0];
  EXPECT_EQ(s0.action_source, Source::generated);
  EXPECT_EQ(s0.pre.vh_source, Source::generated);
  EXPECT_EQ(s0.action.kind, ActionKind::tap);
  EXPECT_EQ(built.sequence.steps[1].action, tap("b"));
  EXPECT_EQ(built.dropped_events, std::vector<std::size_t>{1});
  // Different screenshots give different generated VHs.
  EXPECT_NE(s0.pre.vh, s0.post.vh);
}

TEST(Build, MissingClientOrBackendFailure) {
  auto seq = frames(6);
  std::vector<ActionSegment> segs{{1, 2, 3, 4}};
  EXPECT_EQ(code_of([&] { build_sequence(seq, segs, nullptr, nullptr); }), Errc::client_unavailable);
  model::ModelClient client(std::make_shared<FailingBackend>());
  EXPECT_EQ(code_of([&] { build_sequence(seq, segs, nullptr, &client); }), Errc::client_unavailable);
}

TEST(Build, ParallelismDoesNotChangeResult) {
  auto seq = frames(40);
  std::vector<ActionSegment> segs;
  for (std::size_t s = 1; s + 3 < 40; s += 4)
    segs.push_back({s, s + 1, s + 2, s + 3});
  Trace trace;
  for (std::size_t k = 0; k < segs.size(); k += 2)
    trace.push_back(event(segs[k].change_start, "e" + std::to_string(k), "A", "B"));
  model::ModelClient c1(model::mock_backend()), c8(model::mock_backend());
  auto serial = build_sequence(seq, segs, &trace, &c1, {1});
  auto parallel = build_sequence(seq, segs, &trace, &c8, {8});
  EXPECT_EQ(serial.sequence, parallel.sequence);
  ASSERT_EQ(serial.sequence.steps.size(), segs.size());
  for (std::size_t i = 0; i < segs.size(); ++i) {
    EXPECT_EQ(serial.sequence.steps[i].pre.keyframe_index, segs[i].pre_keyframe);
    EXPECT_EQ(serial.sequence.steps[i].post.keyframe_index, segs[i].post_keyframe);
  }
}

TEST(Build, KeyframeOutOfRange) {
  auto seq = frames(4);
  Trace trace{event(2, "a", "A", "B")};
  EXPECT_EQ(code_of([&] { build_sequence(seq, {{1, 2, 3, 4}}, &trace, nullptr); }), Errc::index_out_of_range);
}

TEST(Document, RoundTripReattachesLuma) {
  auto seq = frames(12);
  Trace trace{event(2, "a", "A", "B"), event(8, "b", "B", "C")};
  auto built = build_sequence(seq, {{1, 2, 3, 4}, {6, 7, 9, 10}}, &trace, nullptr).sequence;
  auto back = sequence_from_json(to_json(built), &seq);
  EXPECT_EQ(back, built);
  EXPECT_EQ(back.steps[1].post.luma.get(), &seq.lumas[10]);
  EXPECT_EQ(code_of([] { sequence_from_json(json{{"steps", json::array()}}); }), Errc::schema_violation);
}

TEST(Screens, DistinctByKeyframe) {
  auto seq = frames(12);
  Trace trace{event(2, "a", "A", "B"), event(5, "b", "B", "C")};
  auto built = build_sequence(seq, {{1, 2, 3, 4}, {4, 5, 6, 7}}, &trace, nullptr).sequence;
  auto screens = screens_of(built);
  ASSERT_EQ(screens.size(), 3u);
  EXPECT_EQ(screens[0].keyframe_index, 1u);
  EXPECT_EQ(screens[1].keyframe_index, 4u);
  EXPECT_EQ(screens[2].keyframe_index, 7u);
}

TEST(LumaDigest, ContentAddressed) {
  EXPECT_EQ(luma_digest(ingest::LumaPlane(2, 2, 1)), luma_digest(ingest::LumaPlane(2, 2, 1)));
  EXPECT_NE(luma_digest(ingest::LumaPlane(2, 2, 1)), luma_digest(ingest::LumaPlane(2, 2, 2)));
}
