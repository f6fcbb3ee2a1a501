#include <gtest/gtest.h>

#include <random>

#include "support.hpp"
#include "xplore/error.hpp"
#include "xplore/keyframe.hpp"

using namespace xplore;
using namespace xplore::keyframe;
using ingest::LumaPlane;

namespace {

std::vector<double> diffs_of(std::initializer_list<double> v) { return std::vector<double>(v); }

ActionSegment seg(std::size_t pre, std::size_t start, std::size_t end, std::size_t post) {
  return ActionSegment{pre, start, end, post};
}

} // namespace

TEST(YDiff, IdenticalFrames) {
  EXPECT_EQ(compute_ydiff({LumaPlane(3, 3, 9), LumaPlane(3, 3, 9)}).values, std::vector<double>{0.0});
}

TEST(YDiff, BlackToWhite) {
  EXPECT_EQ(compute_ydiff({LumaPlane(4, 2, 0), LumaPlane(4, 2, 255)}).values, std::vector<double>{1.0});
}

TEST(YDiff, OnePixelOfTwo) {
  LumaPlane a(2, 1, 0), b(2, 1, 0);
  b.samples[1] = 255;
  EXPECT_EQ(compute_ydiff({a, b}).values, std::vector<double>{0.5});
}

TEST(YDiff, Errors) {
  try {
    compute_ydiff(std::vector<LumaPlane>{LumaPlane(2, 2)});
    FAIL();
  } catch (const Error &e) {
    EXPECT_EQ(e.code(), Errc::too_few_frames);
  }
  try {
    compute_ydiff({LumaPlane(2, 2), LumaPlane(2, 3)});
    FAIL();
  } catch (const Error &e) {
    EXPECT_EQ(e.code(), Errc::dimension_mismatch);
  }
}

TEST(YDiff, LengthRangeAndSwapSymmetry) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<LumaPlane> frames;
    const int n = 2 + int(rng() % 6);
    for (int i = 0; i < n; ++i) {
      LumaPlane p(5, 4);
      for (auto &s : p.samples)
        s = static_cast<std::uint8_t>(rng() % 256);
      frames.push_back(p);
    }
    auto d = compute_ydiff(frames).values;
    ASSERT_EQ(d.size(), frames.size() - 1);
    for (double x : d) {
      EXPECT_GE(x, 0.0);
      EXPECT_LE(x, 1.0);
    }
    std::size_t i = rng() % d.size();
    auto swapped = frames;
    std::swap(swapped[i], swapped[i + 1]);
    EXPECT_DOUBLE_EQ(compute_ydiff(swapped).values[i], d[i]);
  }
}

TEST(Segmenter, ConstantVideo) { EXPECT_TRUE(segment_actions({diffs_of({0, 0, 0, 0})}).empty()); }

TEST(Segmenter, SingleBurstExample) {
  auto s = segment_actions({diffs_of({0, 0, 0.5, 0.5, 0, 0})});
  ASSERT_EQ(s.size(), 1u);
  EXPECT_EQ(s[0], seg(1, 2, 3, 4));
}

TEST(Segmenter, TwoBurstsSeparatedByThreeStatic) {
  auto s = segment_actions({diffs_of({0, 0, 0.4, 0, 0, 0, 0.3, 0.3, 0, 0})});
  ASSERT_EQ(s.size(), 2u);
  EXPECT_EQ(s[0], seg(1, 2, 2, 3));
  EXPECT_EQ(s[1], seg(5, 6, 7, 8));
}

TEST(Segmenter, HysteresisKeepsMidValuesInsideBurst) {
  // 0.005 is above theta_low but below theta_high: it extends an open burst
  // but cannot open one.
  auto s = segment_actions({diffs_of({0, 0, 0.5, 0.005, 0.005, 0.2, 0, 0, 0.005, 0, 0})});
  ASSERT_EQ(s.size(), 1u);
  EXPECT_EQ(s[0], seg(1, 2, 5, 6));
}

TEST(Segmenter, ShortGapDoesNotSplit) {
  // One quiet diff with min_static = 2 keeps the burst open.
  auto s = segment_actions({diffs_of({0, 0, 0.5, 0, 0.5, 0, 0})});
  ASSERT_EQ(s.size(), 1u);
  EXPECT_EQ(s[0], seg(1, 2, 4, 5));
}

TEST(Segmenter, BurstOpenAtEndClosesAtLastFrame) {
  auto s = segment_actions({diffs_of({0, 0, 0.5, 0.5})});
  ASSERT_EQ(s.size(), 1u);
  EXPECT_EQ(s[0].post_keyframe, 4u);
  EXPECT_EQ(s[0].change_end, 3u);
}

TEST(Segmenter, ConfigValidation) {
  EXPECT_THROW(segment_actions({diffs_of({0})}, SegmenterConfig{0.001, 0.01, 2}), Error);
  EXPECT_THROW(segment_actions({diffs_of({0})}, SegmenterConfig{0.01, 0.003, 0}), Error);
  EXPECT_THROW(segment_actions({diffs_of({0})}, SegmenterConfig{1.5, 0.003, 2}), Error);
}

// Alternating static / burst blocks: exact boundaries, checked against the
// reference segmenter as well.
TEST(Segmenter, AlternatingBlocksProperty) {
  std::mt19937_64 rng(2024);
  const SegmenterConfig cfg;
  for (int trial = 0; trial < 500; ++trial) {
    std::vector<double> v;
    std::vector<ActionSegment> expected;
    const int k = int(rng() % 6);
    for (int i = 0; i < k; ++i) {
      int quiet = cfg.min_static + 1 + int(rng() % 4);
      for (int q = 0; q < quiet; ++q)
        v.push_back(double(rng() % 3) * 0.001);
      int burst = 1 + int(rng() % 5);
      std::size_t start = v.size();
      for (int b = 0; b < burst; ++b)
        v.push_back(0.011 + double(rng() % 1000) / 1000.0 * 0.9);
      expected.push_back(seg(start - 1, start, v.size() - 1, v.size()));
    }
    for (int q = 0; q < cfg.min_static + 1; ++q)
      v.push_back(0.0);
    auto got = segment_actions({v}, cfg);
    EXPECT_EQ(got, expected) << "trial " << trial;
    EXPECT_EQ(testing_support::segmenter_oracle(v, cfg), got) << "trial " << trial;
  }
}

// Arbitrary noisy series: the state machine and the reference agree.
TEST(Segmenter, AgreesWithReferenceOnRandomSeries) {
  std::mt19937_64 rng(7);
  const double levels[] = {0.0, 0.002, 0.003, 0.005, 0.01, 0.02, 0.5};
  for (int trial = 0; trial < 3000; ++trial) {
    SegmenterConfig cfg{0.01, 0.003, 1 + int(rng() % 3)};
    std::vector<double> v(1 + rng() % 30);
    for (auto &x : v)
      x = levels[rng() % std::size(levels)];
    auto got = segment_actions({v}, cfg);
    ASSERT_EQ(got, testing_support::segmenter_oracle(v, cfg)) << "trial " << trial;
    for (std::size_t i = 0; i + 1 < got.size(); ++i)
      EXPECT_LT(got[i].change_end, got[i + 1].change_start);
  }
}

TEST(Keyframes, Examples) {
  EXPECT_TRUE(extract_keyframes(10, {}).empty());
  EXPECT_EQ(extract_keyframes(10, {seg(1, 2, 3, 4)}), (std::vector<std::size_t>{1, 4}));
  EXPECT_EQ(extract_keyframes(10, {seg(1, 2, 3, 4), seg(4, 5, 8, 9)}), (std::vector<std::size_t>{1, 4, 9}));
}

TEST(Keyframes, OutOfRange) {
  try {
    extract_keyframes(4, {seg(1, 2, 3, 4)});
    FAIL();
  } catch (const Error &e) {
    EXPECT_EQ(e.code(), Errc::index_out_of_range);
  }
}

TEST(Keyframes, AtMostTwoPerSegmentAndStatic) {
  std::mt19937_64 rng(5);
  const SegmenterConfig cfg;
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<double> v(3 + rng() % 40);
    for (auto &x : v)
      x = rng() % 4 == 0 ? 0.3 : 0.0;
    auto segs = segment_actions({v}, cfg);
    auto kfs = extract_keyframes(v.size() + 1, segs);
    EXPECT_LE(kfs.size(), 2 * segs.size());
    EXPECT_TRUE(std::is_sorted(kfs.begin(), kfs.end()));
    for (const auto &s : segs) {
      // Outside neighbours of the burst are quiet.
      if (s.change_start > 0)
        EXPECT_LE(v[s.change_start - 1], cfg.theta_low);
      if (s.pre_keyframe > 0)
        EXPECT_LE(v[s.pre_keyframe - 1], cfg.theta_low);
      if (s.post_keyframe < v.size())
        EXPECT_LE(v[s.post_keyframe], cfg.theta_low);
    }
  }
}

TEST(KeyframesDocument, RoundTrip) {
  SegmenterConfig cfg{0.02, 0.004, 3};
  std::vector<ActionSegment> segs{seg(1, 2, 3, 4), seg(6, 7, 7, 8)};
  auto doc = keyframes_document("rec", cfg, segs, {1, 4, 6, 8});
  EXPECT_EQ(doc["segments"][0], (json{{"pre", 1}, {"change_start", 2}, {"change_end", 3}, {"post", 4}}));
  auto back = parse_keyframes_document(doc);
  EXPECT_EQ(back.source_id, "rec");
  EXPECT_EQ(back.segments, segs);
  EXPECT_EQ(back.keyframes, (std::vector<std::size_t>{1, 4, 6, 8}));
  EXPECT_EQ(back.config.min_static, 3);
  EXPECT_DOUBLE_EQ(back.config.theta_high, 0.02);
}
