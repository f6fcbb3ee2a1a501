#include "xplore/ingest.hpp"

#include <cctype>
#include <cmath>
#include <fstream>

#include <png.h>

#include "xplore/error.hpp"

namespace fs = std::filesystem;

namespace xplore::ingest {

namespace {

[[noreturn]] void malformed(const std::string &what) {
  throw Error(Errc::malformed_manifest, "manifest: " + what);
}

bool has_extension(const fs::path &path, std::string_view ext) {
  auto e = path.extension().string();
  for (auto &c : e)
    c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return e == ext;
}

// Netpbm header tokenizer; skips whitespace and '#' comments.
class PgmHeader {
public:
  explicit PgmHeader(std::istream &in) : in_(in) {}

  std::string token() {
    std::string out;
    int c = in_.get();
    while (c != EOF) {
      if (c == '#') {
        while (c != EOF && c != '\n')
          c = in_.get();
      } else if (std::isspace(c)) {
        c = in_.get();
      } else {
        break;
      }
    }
    while (c != EOF && !std::isspace(c)) {
      out.push_back(static_cast<char>(c));
      c = in_.get();
    }
    return out;
  }

  int number(const fs::path &path) {
    auto tok = token();
    try {
      std::size_t used = 0;
      int v = std::stoi(tok, &used);
      if (used == tok.size())
        return v;
    } catch (const std::exception &) {
    }
    throw Error(Errc::io_error, path.string() + ": bad PGM header");
  }

private:
  std::istream &in_;
};

struct PgmInfo {
  int width = 0;
  int height = 0;
  int maxval = 0;
};

PgmInfo read_pgm_header(std::istream &in, const fs::path &path) {
  PgmHeader header(in);
  if (header.token() != "P5")
    throw Error(Errc::io_error, path.string() + ": only binary PGM (P5) is supported");
  PgmInfo info;
  info.width = header.number(path);
  info.height = header.number(path);
  info.maxval = header.number(path);
  if (info.width < 1 || info.height < 1 || info.maxval < 1 || info.maxval > 255)
    throw Error(Errc::io_error, path.string() + ": unsupported PGM geometry or depth");
  return info;
}

Image read_pgm(const fs::path &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw Error(Errc::missing_file, "cannot open " + path.string());
  auto info = read_pgm_header(in, path);
  Image img{info.width, info.height, 1, {}};
  img.data.resize(static_cast<std::size_t>(info.width) * info.height);
  in.read(reinterpret_cast<char *>(img.data.data()), static_cast<std::streamsize>(img.data.size()));
  if (in.gcount() != static_cast<std::streamsize>(img.data.size()))
    throw Error(Errc::io_error, path.string() + ": truncated PGM data");
  if (info.maxval != 255) {
    for (auto &v : img.data)
      v = static_cast<std::uint8_t>((v * 255 + info.maxval / 2) / info.maxval);
  }
  return img;
}

// RAII holder for the libpng simplified API.
struct PngReader {
  png_image image{};
  PngReader() { image.version = PNG_IMAGE_VERSION; }
  ~PngReader() { png_image_free(&image); }
  PngReader(const PngReader &) = delete;
  PngReader &operator=(const PngReader &) = delete;
};

Image read_png(const fs::path &path) {
  if (!fs::exists(path))
    throw Error(Errc::missing_file, "cannot open " + path.string());
  PngReader reader;
  if (!png_image_begin_read_from_file(&reader.image, path.c_str()))
    throw Error(Errc::io_error, path.string() + ": " + reader.image.message);
  bool gray = (reader.image.format & PNG_FORMAT_FLAG_COLOR) == 0;
  reader.image.format = gray ? PNG_FORMAT_GRAY : PNG_FORMAT_RGB;
  Image img{static_cast<int>(reader.image.width), static_cast<int>(reader.image.height),
            gray ? 1 : 3, {}};
  img.data.resize(PNG_IMAGE_SIZE(reader.image));
  if (!png_image_finish_read(&reader.image, nullptr, img.data.data(), 0, nullptr))
    throw Error(Errc::io_error, path.string() + ": " + reader.image.message);
  return img;
}

} // namespace

FrameManifest parse_manifest(const json &doc, const fs::path &base_dir) {
  if (!doc.is_object())
    malformed("document must be an object");
  for (const char *key : {"source_id", "fps", "width", "height", "frames"})
    if (!doc.contains(key))
      malformed(std::string("missing field '") + key + "'");

  FrameManifest m;
  if (!doc["source_id"].is_string())
    malformed("source_id must be a string");
  m.source_id = doc["source_id"].get<std::string>();

  if (!doc["fps"].is_number())
    malformed("fps must be a number");
  m.fps = doc["fps"].get<double>();
  if (!(m.fps > 0.0) || !std::isfinite(m.fps))
    malformed("fps must be positive");

  for (const char *key : {"width", "height"}) {
    if (!doc[key].is_number_integer() || doc[key].get<long long>() < 1 ||
        doc[key].get<long long>() > (1 << 16))
      malformed(std::string(key) + " must be a positive integer");
  }
  m.width = doc["width"].get<int>();
  m.height = doc["height"].get<int>();

  const auto &frames = doc["frames"];
  if (!frames.is_array() || frames.empty())
    malformed("frames must be a non-empty array");
  for (const auto &f : frames) {
    if (!f.is_string() || f.get_ref<const std::string &>().empty())
      malformed("frame entries must be non-empty relative paths");
    fs::path rel(f.get<std::string>());
    if (rel.is_absolute())
      malformed("frame path must be relative: " + rel.string());
    m.frame_paths.push_back((base_dir / rel).lexically_normal());
  }
  return m;
}

FrameManifest load_manifest(const fs::path &path) {
  if (!fs::exists(path))
    throw Error(Errc::missing_file, "manifest not found: " + path.string());
  json doc;
  try {
    doc = json::parse(read_text(path));
  } catch (const json::parse_error &e) {
    malformed(e.what());
  }
  auto manifest = parse_manifest(doc, path.parent_path());
  for (std::size_t i = 0; i < manifest.frame_paths.size(); ++i) {
    const auto &frame = manifest.frame_paths[i];
    if (!fs::exists(frame))
      throw Error(Errc::missing_file, "frame " + std::to_string(i) + " not found: " + frame.string());
    auto size = read_image_size(frame);
    if (size.width != manifest.width || size.height != manifest.height)
      throw Error(Errc::dimension_mismatch,
                  "frame " + std::to_string(i) + " is " + std::to_string(size.width) + "x" +
                      std::to_string(size.height) + ", manifest declares " +
                      std::to_string(manifest.width) + "x" + std::to_string(manifest.height));
  }
  return manifest;
}

json manifest_to_json(const FrameManifest &manifest, const fs::path &base_dir) {
  json frames = json::array();
  for (const auto &p : manifest.frame_paths)
    frames.push_back(p.lexically_relative(base_dir).generic_string());
  return json{{"source_id", manifest.source_id},
              {"fps", manifest.fps},
              {"width", manifest.width},
              {"height", manifest.height},
              {"frames", std::move(frames)}};
}

LumaPlane to_luma(const Image &image) {
  if (image.width < 1 || image.height < 1 || image.data.empty())
    throw Error(Errc::empty_frame, "frame has no pixels");
  const std::size_t pixels = static_cast<std::size_t>(image.width) * image.height;
  if (image.channels != 1 && image.channels != 3)
    throw Error(Errc::io_error, "unsupported channel count " + std::to_string(image.channels));
  if (image.data.size() != pixels * image.channels)
    throw Error(Errc::io_error, "pixel buffer does not match geometry");

  LumaPlane out(image.width, image.height);
  if (image.channels == 1) {
    out.samples = image.data;
    return out;
  }
  // Integer weights are exact: gray (g,g,g) maps to g and the weights sum to 1000.
  for (std::size_t i = 0; i < pixels; ++i) {
    unsigned r = image.data[3 * i], g = image.data[3 * i + 1], b = image.data[3 * i + 2];
    out.samples[i] = static_cast<std::uint8_t>((299 * r + 587 * g + 114 * b + 500) / 1000);
  }
  return out;
}

Image read_image(const fs::path &path) {
  if (has_extension(path, ".png"))
    return read_png(path);
  return read_pgm(path);
}

ImageSize read_image_size(const fs::path &path) {
  if (has_extension(path, ".png")) {
    PngReader reader;
    if (!png_image_begin_read_from_file(&reader.image, path.c_str()))
      throw Error(Errc::io_error, path.string() + ": " + reader.image.message);
    return {static_cast<int>(reader.image.width), static_cast<int>(reader.image.height)};
  }
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw Error(Errc::missing_file, "cannot open " + path.string());
  auto info = read_pgm_header(in, path);
  return {info.width, info.height};
}

FrameSequence load_sequence(const FrameManifest &manifest) {
  FrameSequence seq;
  seq.manifest = manifest;
  seq.lumas.reserve(manifest.frame_paths.size());
  for (std::size_t i = 0; i < manifest.frame_paths.size(); ++i) {
    auto luma = to_luma(read_image(manifest.frame_paths[i]));
    if (luma.width != manifest.width || luma.height != manifest.height)
      throw Error(Errc::dimension_mismatch, "frame " + std::to_string(i) + " does not match manifest size");
    seq.lumas.push_back(std::move(luma));
  }
  return seq;
}

FrameSequence load_sequence(const fs::path &manifest_path) {
  return load_sequence(load_manifest(manifest_path));
}

void write_pgm(const fs::path &path, const LumaPlane &plane) {
  if (path.has_parent_path())
    fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out)
    throw Error(Errc::io_error, "cannot write " + path.string());
  out << "P5\n" << plane.width << " " << plane.height << "\n255\n";
  out.write(reinterpret_cast<const char *>(plane.samples.data()),
            static_cast<std::streamsize>(plane.samples.size()));
}

void write_png(const fs::path &path, const Image &image) {
  if (path.has_parent_path())
    fs::create_directories(path.parent_path());
  png_image out{};
  out.version = PNG_IMAGE_VERSION;
  out.width = static_cast<png_uint_32>(image.width);
  out.height = static_cast<png_uint_32>(image.height);
  out.format = image.channels == 1 ? PNG_FORMAT_GRAY : PNG_FORMAT_RGB;
  if (!png_image_write_to_file(&out, path.c_str(), 0, image.data.data(), 0, nullptr))
    throw Error(Errc::io_error, path.string() + ": " + out.message);
}

} // namespace xplore::ingest
