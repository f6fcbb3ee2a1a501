#include "xplore/util.hpp"

#include <atomic>
#include <cctype>
#include <fstream>
#include <sstream>
#include <thread>

#include <openssl/evp.h>

#include "xplore/error.hpp"

namespace xplore {

namespace {

std::string digest_hex(const void *data, std::size_t size) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data, size, md, &len, EVP_sha256(), nullptr) != 1)
    throw Error(Errc::io_error, "sha256 digest failed");
  static constexpr char hex[] = "0123456789abcdef";
  std::string out;
  out.reserve(len * 2);
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(hex[md[i] >> 4]);
    out.push_back(hex[md[i] & 0xf]);
  }
  return out;
}

} // namespace

std::string sha256_hex(std::string_view data) {
  return digest_hex(data.data(), data.size());
}

std::string sha256_hex(std::span<const std::uint8_t> data) {
  return digest_hex(data.data(), data.size());
}

std::string canonical_dump(const json &doc) {
  // nlohmann::json stores objects in a std::map, so keys come out sorted.
  return doc.dump(-1, ' ', false, json::error_handler_t::strict);
}

std::string read_text(const std::filesystem::path &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw Error(Errc::missing_file, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

json read_json(const std::filesystem::path &path) {
  auto text = read_text(path);
  try {
    return json::parse(text);
  } catch (const json::parse_error &e) {
    throw Error(Errc::io_error, path.string() + ": " + e.what());
  }
}

void write_text_atomic(const std::filesystem::path &path, std::string_view text) {
  static std::atomic<unsigned> counter{0};
  if (path.has_parent_path())
    std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp." + std::to_string(std::hash<std::thread::id>{}(std::this_thread::get_id())) +
         "." + std::to_string(counter.fetch_add(1));
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out)
      throw Error(Errc::io_error, "cannot write " + tmp.string());
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!out)
      throw Error(Errc::io_error, "short write to " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

void write_json(const std::filesystem::path &path, const json &doc) {
  write_text_atomic(path, doc.dump(2) + "\n");
}

std::size_t count_words(std::string_view text) {
  std::size_t words = 0;
  bool in_word = false;
  for (unsigned char c : text) {
    if (std::isspace(c)) {
      in_word = false;
    } else if (!in_word) {
      in_word = true;
      ++words;
    }
  }
  return words;
}

std::size_t count_json_words(const json &doc) {
  switch (doc.type()) {
  case json::value_t::string:
    return count_words(std::string_view(doc.get_ref<const std::string &>()));
  case json::value_t::object:
  case json::value_t::array: {
    std::size_t total = 0;
    for (const auto &child : doc)
      total += count_json_words(child);
    return total;
  }
  case json::value_t::null:
    return 0;
  default:
    return 1;
  }
}

} // namespace xplore
