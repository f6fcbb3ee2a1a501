#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "xplore/util.hpp"

namespace xplore::ingest {

struct FrameManifest {
  std::string source_id;
  double fps = 0.0;
  int width = 0;
  int height = 0;
  // Absolute (resolved) paths, in playback order.
  std::vector<std::filesystem::path> frame_paths;
};

// 8-bit luminance samples, row-major.
struct LumaPlane {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> samples;

  LumaPlane() = default;
  LumaPlane(int w, int h, std::uint8_t fill = 0)
      : width(w), height(h), samples(static_cast<std::size_t>(w) * h, fill) {}

  std::size_t size() const noexcept { return samples.size(); }
  std::uint8_t at(int x, int y) const { return samples[static_cast<std::size_t>(y) * width + x]; }
  std::uint8_t &at(int x, int y) { return samples[static_cast<std::size_t>(y) * width + x]; }

  bool operator==(const LumaPlane &) const = default;
};

// Decoded image with 1 (gray) or 3 (RGB) interleaved 8-bit channels.
struct Image {
  int width = 0;
  int height = 0;
  int channels = 3;
  std::vector<std::uint8_t> data;
};

struct FrameSequence {
  FrameManifest manifest;
  std::vector<LumaPlane> lumas;

  std::size_t size() const noexcept { return lumas.size(); }
};

// Parses and validates manifest.json; frame paths are resolved against the
// manifest's directory and every frame header is checked against the
// declared size.
FrameManifest load_manifest(const std::filesystem::path &path);

// Validation without touching the frames themselves.
FrameManifest parse_manifest(const json &doc, const std::filesystem::path &base_dir);

// Manifest document with frame paths written relative to base_dir.
json manifest_to_json(const FrameManifest &manifest, const std::filesystem::path &base_dir);

// BT.601 full-range luma, Y = round(0.299 R + 0.587 G + 0.114 B). Gray
// images pass through unchanged.
LumaPlane to_luma(const Image &image);

Image read_image(const std::filesystem::path &path);

struct ImageSize {
  int width = 0;
  int height = 0;
};
ImageSize read_image_size(const std::filesystem::path &path);

// Decodes every frame of the manifest, in order.
FrameSequence load_sequence(const FrameManifest &manifest);
FrameSequence load_sequence(const std::filesystem::path &manifest_path);

void write_pgm(const std::filesystem::path &path, const LumaPlane &plane);
void write_png(const std::filesystem::path &path, const Image &image);

} // namespace xplore::ingest
