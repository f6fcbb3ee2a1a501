#include "xplore/keyframe.hpp"

#include <algorithm>
#include <cstdlib>

#include "xplore/error.hpp"

namespace xplore::keyframe {

void SegmenterConfig::validate() const {
  if (!(theta_low >= 0.0 && theta_low <= theta_high && theta_high <= 1.0))
    throw Error(Errc::invalid_config, "segmenter thresholds must satisfy 0 <= low <= high <= 1");
  if (min_static < 1)
    throw Error(Errc::invalid_config, "min_static must be >= 1");
}

double normalized_luma_difference(const ingest::LumaPlane &a, const ingest::LumaPlane &b) {
  if (a.width != b.width || a.height != b.height || a.samples.size() != b.samples.size())
    throw Error(Errc::dimension_mismatch, "luma planes differ in size");
  if (a.samples.empty())
    throw Error(Errc::empty_frame, "luma plane has no pixels");
  std::uint64_t total = 0;
  for (std::size_t i = 0; i < a.samples.size(); ++i)
    total += static_cast<std::uint64_t>(std::abs(int(a.samples[i]) - int(b.samples[i])));
  return static_cast<double>(total) / (255.0 * static_cast<double>(a.samples.size()));
}

YDiffSeries compute_ydiff(const std::vector<ingest::LumaPlane> &frames) {
  if (frames.size() < 2)
    throw Error(Errc::too_few_frames, "Y-Diff needs at least two frames");
  YDiffSeries out;
  out.values.reserve(frames.size() - 1);
  for (std::size_t i = 0; i + 1 < frames.size(); ++i)
    out.values.push_back(normalized_luma_difference(frames[i], frames[i + 1]));
  return out;
}

YDiffSeries compute_ydiff(const ingest::FrameSequence &seq) { return compute_ydiff(seq.lumas); }

std::vector<ActionSegment> segment_actions(const YDiffSeries &diffs, const SegmenterConfig &cfg) {
  cfg.validate();
  const auto &v = diffs.values;
  const auto min_static = static_cast<std::size_t>(cfg.min_static);
  std::vector<ActionSegment> out;

  bool armed = true; // sequence start counts as settled
  bool active = false;
  std::size_t quiet = 0;
  std::size_t start = 0, last_active = 0;

  auto close = [&](std::size_t post) {
    ActionSegment seg;
    seg.change_start = start;
    seg.change_end = last_active;
    seg.pre_keyframe = start == 0 ? 0 : start - 1;
    seg.post_keyframe = post;
    out.push_back(seg);
  };

  for (std::size_t i = 0; i < v.size(); ++i) {
    const double x = v[i];
    if (!active) {
      if (x <= cfg.theta_low) {
        if (++quiet >= min_static)
          armed = true;
      } else {
        quiet = 0;
        if (armed && x > cfg.theta_high) {
          active = true;
          armed = false;
          start = last_active = i;
        }
      }
      continue;
    }
    if (x > cfg.theta_low) {
      last_active = i;
      quiet = 0;
    } else if (++quiet >= min_static) {
      close(last_active + 1);
      active = false;
      armed = true;
    }
  }
  if (active)
    close(v.size()); // last frame index == number of diffs
  return out;
}

std::vector<std::size_t> extract_keyframes(std::size_t frame_count,
                                           const std::vector<ActionSegment> &segments) {
  std::vector<std::size_t> out;
  out.reserve(2 * segments.size());
  for (const auto &seg : segments) {
    if (seg.pre_keyframe >= frame_count || seg.post_keyframe >= frame_count)
      throw Error(Errc::index_out_of_range,
                  "segment keyframe " + std::to_string(std::max(seg.pre_keyframe, seg.post_keyframe)) +
                      " outside sequence of " + std::to_string(frame_count) + " frames");
    out.push_back(seg.pre_keyframe);
    out.push_back(seg.post_keyframe);
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

std::vector<std::size_t> extract_keyframes(const ingest::FrameSequence &seq,
                                           const std::vector<ActionSegment> &segments) {
  return extract_keyframes(seq.size(), segments);
}

json to_json(const SegmenterConfig &cfg) {
  return json{{"theta_high", cfg.theta_high}, {"theta_low", cfg.theta_low}, {"min_static", cfg.min_static}};
}

SegmenterConfig segmenter_config_from_json(const json &doc) {
  SegmenterConfig cfg;
  cfg.theta_high = doc.value("theta_high", cfg.theta_high);
  cfg.theta_low = doc.value("theta_low", cfg.theta_low);
  cfg.min_static = doc.value("min_static", cfg.min_static);
  cfg.validate();
  return cfg;
}

json to_json(const ActionSegment &seg) {
  return json{{"pre", seg.pre_keyframe},
              {"change_start", seg.change_start},
              {"change_end", seg.change_end},
              {"post", seg.post_keyframe}};
}

ActionSegment segment_from_json(const json &doc) {
  ActionSegment seg;
  seg.pre_keyframe = doc.at("pre").get<std::size_t>();
  seg.change_start = doc.at("change_start").get<std::size_t>();
  seg.change_end = doc.at("change_end").get<std::size_t>();
  seg.post_keyframe = doc.at("post").get<std::size_t>();
  return seg;
}

json keyframes_document(const std::string &source_id, const SegmenterConfig &cfg,
                        const std::vector<ActionSegment> &segments,
                        const std::vector<std::size_t> &keyframes) {
  json segs = json::array();
  for (const auto &s : segments)
    segs.push_back(to_json(s));
  return json{{"source_id", source_id}, {"config", to_json(cfg)}, {"segments", std::move(segs)},
              {"keyframes", keyframes}};
}

KeyframeDocument parse_keyframes_document(const json &doc) {
  try {
    KeyframeDocument out;
    out.source_id = doc.at("source_id").get<std::string>();
    out.config = segmenter_config_from_json(doc.at("config"));
    for (const auto &s : doc.at("segments"))
      out.segments.push_back(segment_from_json(s));
    out.keyframes = doc.at("keyframes").get<std::vector<std::size_t>>();
    return out;
  } catch (const json::exception &e) {
    throw Error(Errc::io_error, std::string("keyframes document: ") + e.what());
  }
}

} // namespace xplore::keyframe
