#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "xplore/ingest.hpp"
#include "xplore/util.hpp"

namespace xplore::vh {

struct Bounds {
  int left = 0;
  int top = 0;
  int right = 0;
  int bottom = 0;

  int width() const noexcept { return right - left; }
  int height() const noexcept { return bottom - top; }
  long long area() const noexcept { return static_cast<long long>(width()) * height(); }

  bool operator==(const Bounds &) const = default;
  auto operator<=>(const Bounds &) const = default;
};

struct VhNode {
  std::string class_name;
  std::optional<std::string> resource_id;
  std::optional<std::string> text;
  Bounds bounds;
  bool clickable = false;
  // Child bounds are not required to nest inside the parent; real dumps
  // violate that routinely.
  std::vector<VhNode> children;

  bool operator==(const VhNode &) const = default;
};

struct ViewHierarchy {
  VhNode root;
  int screen_width = 1;
  int screen_height = 1;

  bool operator==(const ViewHierarchy &) const = default;
};

// One line per retained node: "depth|class_name|resource_id|text|clickable".
struct SimplifiedVh {
  std::vector<std::string> lines;

  bool operator==(const SimplifiedVh &) const = default;
};

inline constexpr std::size_t kMaxTextLength = 32;

ViewHierarchy parse_vh(std::string_view doc);
ViewHierarchy parse_vh(const json &doc);

// Canonical text: keys in schema order, children in document order.
std::string serialize_vh(const ViewHierarchy &vh);
json to_json(const ViewHierarchy &vh);

// Preorder node list.
std::vector<const VhNode *> preorder(const ViewHierarchy &vh);

SimplifiedVh simplify(const ViewHierarchy &vh);

// Rebuilds a tree from simplified lines (bounds become a unit box), so a
// generated VH can be compared or re-simplified like a real dump.
ViewHierarchy from_simplified(const SimplifiedVh &svh);

using Signature = std::pair<std::string, std::string>; // (class_name, resource_id)
using SignatureBag = std::map<Signature, int>;

SignatureBag signatures(const ViewHierarchy &vh);
SignatureBag signatures(const SimplifiedVh &svh);

// Multiset Jaccard; 1.0 when both bags are empty.
double bag_similarity(const SignatureBag &a, const SignatureBag &b);

double vh_similarity(const ViewHierarchy &a, const ViewHierarchy &b);
double vh_similarity(const SimplifiedVh &a, const SimplifiedVh &b);

// 1 - normalized mean absolute luma difference.
double screenshot_similarity(const ingest::LumaPlane &a, const ingest::LumaPlane &b);

struct SimplifiedLine {
  int depth = 0;
  std::string class_name;
  std::string resource_id;
  std::string text;
  bool clickable = false;
};
SimplifiedLine parse_line(std::string_view line);

} // namespace xplore::vh
