#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>

#include <json.hpp>

namespace xplore {

using json = nlohmann::json;

// Lowercase hex SHA-256.
std::string sha256_hex(std::string_view data);
std::string sha256_hex(std::span<const std::uint8_t> data);

// Canonical text of a JSON document: sorted keys, no whitespace.
std::string canonical_dump(const json &doc);

std::string read_text(const std::filesystem::path &path);
json read_json(const std::filesystem::path &path);

// Write via a temporary sibling and rename, so readers never observe a
// partially written file.
void write_text_atomic(const std::filesystem::path &path, std::string_view text);
void write_json(const std::filesystem::path &path, const json &doc);

// Whitespace-delimited word count; used as the token-cost proxy.
std::size_t count_words(std::string_view text);

// Word count summed over every string leaf of a document; numbers and
// booleans count one each.
std::size_t count_json_words(const json &doc);

} // namespace xplore
