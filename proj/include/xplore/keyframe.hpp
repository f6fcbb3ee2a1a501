#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "xplore/ingest.hpp"
#include "xplore/util.hpp"

namespace xplore::keyframe {

// values[i] is the normalized mean absolute luma difference between frame i
// and frame i + 1.
struct YDiffSeries {
  std::vector<double> values;
};

struct SegmenterConfig {
  double theta_high = 0.01;
  double theta_low = 0.003;
  int min_static = 2;

  // Throws Errc::invalid_config unless 0 <= low <= high <= 1 and min_static >= 1.
  void validate() const;
};

// Indices: change_start/change_end index the diff series, pre/post index frames.
struct ActionSegment {
  std::size_t pre_keyframe = 0;
  std::size_t change_start = 0;
  std::size_t change_end = 0;
  std::size_t post_keyframe = 0;

  bool operator==(const ActionSegment &) const = default;
};

// Sum of |a - b| over all pixels divided by 255 * pixel count. Planes must
// share dimensions (Errc::dimension_mismatch otherwise).
double normalized_luma_difference(const ingest::LumaPlane &a, const ingest::LumaPlane &b);

YDiffSeries compute_ydiff(const ingest::FrameSequence &seq);
YDiffSeries compute_ydiff(const std::vector<ingest::LumaPlane> &frames);

// Hysteresis scan. A burst opens on the first value above theta_high once at
// least min_static consecutive values <= theta_low have been seen (the
// sequence start counts as settled), and closes at the last value above
// theta_low before min_static quiet values. A burst still open at the end
// closes on the final frame.
std::vector<ActionSegment> segment_actions(const YDiffSeries &diffs, const SegmenterConfig &cfg = {});

// Sorted, deduplicated union of the pre/post keyframes.
std::vector<std::size_t> extract_keyframes(const ingest::FrameSequence &seq,
                                           const std::vector<ActionSegment> &segments);
std::vector<std::size_t> extract_keyframes(std::size_t frame_count,
                                           const std::vector<ActionSegment> &segments);

json to_json(const SegmenterConfig &cfg);
SegmenterConfig segmenter_config_from_json(const json &doc);
json to_json(const ActionSegment &seg);
ActionSegment segment_from_json(const json &doc);

// keyframes.json document.
json keyframes_document(const std::string &source_id, const SegmenterConfig &cfg,
                        const std::vector<ActionSegment> &segments,
                        const std::vector<std::size_t> &keyframes);

struct KeyframeDocument {
  std::string source_id;
  SegmenterConfig config;
  std::vector<ActionSegment> segments;
  std::vector<std::size_t> keyframes;
};
KeyframeDocument parse_keyframes_document(const json &doc);

} // namespace xplore::keyframe
