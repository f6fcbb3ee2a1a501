#include "xplore/vh.hpp"

#include <algorithm>

#include "xplore/error.hpp"
#include "xplore/keyframe.hpp"

namespace xplore::vh {

namespace {

constexpr int kMaxDepth = 512;

[[noreturn]] void malformed(const std::string &what) { throw Error(Errc::malformed_vh, "vh: " + what); }
[[noreturn]] void schema(const std::string &what) { throw Error(Errc::schema_violation, "vh: " + what); }

std::optional<std::string> optional_string(const json &node, const char *key) {
  auto it = node.find(key);
  if (it == node.end() || it->is_null())
    return std::nullopt;
  if (!it->is_string())
    malformed(std::string("'") + key + "' must be a string or null");
  return it->get<std::string>();
}

Bounds parse_bounds(const json &b) {
  if (!b.is_array() || b.size() != 4)
    schema("bounds must be [left, top, right, bottom]");
  for (const auto &v : b)
    if (!v.is_number_integer())
      schema("bounds must be integers");
  Bounds out{b[0].get<int>(), b[1].get<int>(), b[2].get<int>(), b[3].get<int>()};
  if (out.left > out.right || out.top > out.bottom)
    schema("reversed bounds [" + std::to_string(out.left) + "," + std::to_string(out.top) + "," +
           std::to_string(out.right) + "," + std::to_string(out.bottom) + "]");
  return out;
}

VhNode parse_node(const json &node, int depth) {
  if (depth > kMaxDepth)
    malformed("tree deeper than " + std::to_string(kMaxDepth));
  if (!node.is_object())
    malformed("node must be an object");
  VhNode out;
  auto cls = node.find("class");
  if (cls == node.end() || !cls->is_string())
    malformed("node needs a string 'class'");
  out.class_name = cls->get<std::string>();
  out.resource_id = optional_string(node, "id");
  out.text = optional_string(node, "text");
  auto b = node.find("bounds");
  if (b == node.end())
    schema("node '" + out.class_name + "' has no bounds");
  out.bounds = parse_bounds(*b);
  if (auto c = node.find("clickable"); c != node.end() && !c->is_null()) {
    if (!c->is_boolean())
      malformed("'clickable' must be a boolean");
    out.clickable = c->get<bool>();
  }
  if (auto ch = node.find("children"); ch != node.end() && !ch->is_null()) {
    if (!ch->is_array())
      malformed("'children' must be an array");
    out.children.reserve(ch->size());
    for (const auto &c : *ch)
      out.children.push_back(parse_node(c, depth + 1));
  }
  return out;
}

nlohmann::ordered_json node_to_ordered(const VhNode &n) {
  nlohmann::ordered_json out;
  out["class"] = n.class_name;
  out["id"] = n.resource_id ? nlohmann::ordered_json(*n.resource_id) : nlohmann::ordered_json(nullptr);
  out["text"] = n.text ? nlohmann::ordered_json(*n.text) : nlohmann::ordered_json(nullptr);
  out["bounds"] = {n.bounds.left, n.bounds.top, n.bounds.right, n.bounds.bottom};
  out["clickable"] = n.clickable;
  auto children = nlohmann::ordered_json::array();
  for (const auto &c : n.children)
    children.push_back(node_to_ordered(c));
  out["children"] = std::move(children);
  return out;
}

nlohmann::ordered_json vh_to_ordered(const ViewHierarchy &vh) {
  nlohmann::ordered_json out;
  out["screen"] = {vh.screen_width, vh.screen_height};
  out["root"] = node_to_ordered(vh.root);
  return out;
}

// Field text for a simplified line: separators and line breaks become spaces.
std::string sanitize(std::string_view s) {
  std::string out(s);
  for (auto &c : out)
    if (c == '|' || c == '\n' || c == '\r')
      c = ' ';
  return out;
}

// Truncates to at most n code points without splitting a UTF-8 sequence.
std::string truncate_utf8(std::string_view s, std::size_t n) {
  std::size_t count = 0, i = 0;
  while (i < s.size()) {
    if (count == n)
      break;
    auto c = static_cast<unsigned char>(s[i]);
    std::size_t len = c < 0x80 ? 1 : (c >> 5) == 0x6 ? 2 : (c >> 4) == 0xe ? 3 : (c >> 3) == 0x1e ? 4 : 1;
    i = std::min(s.size(), i + len);
    ++count;
  }
  return std::string(s.substr(0, i));
}

bool informative(const VhNode &n) {
  return n.resource_id.has_value() || (n.text && !n.text->empty()) || n.clickable;
}

// Children with zero-area nodes replaced by their own effective children.
void effective_children(const VhNode &n, std::vector<const VhNode *> &out) {
  for (const auto &c : n.children) {
    if (c.bounds.area() == 0)
      effective_children(c, out);
    else
      out.push_back(&c);
  }
}

void emit(const VhNode &n, int depth, std::vector<std::string> &lines) {
  std::vector<const VhNode *> kids;
  effective_children(n, kids);
  if (kids.size() == 1 && !informative(n)) {
    emit(*kids.front(), depth, lines);
    return;
  }
  std::string line = std::to_string(depth);
  line += '|';
  line += sanitize(n.class_name);
  line += '|';
  line += sanitize(n.resource_id.value_or(""));
  line += '|';
  line += sanitize(truncate_utf8(n.text.value_or(""), kMaxTextLength));
  line += '|';
  line += n.clickable ? '1' : '0';
  lines.push_back(std::move(line));
  for (const auto *c : kids)
    emit(*c, depth + 1, lines);
}

void collect(const VhNode &n, SignatureBag &bag) {
  ++bag[{n.class_name, n.resource_id.value_or("")}];
  for (const auto &c : n.children)
    collect(c, bag);
}

} // namespace

ViewHierarchy parse_vh(const json &doc) {
  if (!doc.is_object())
    malformed("document must be an object");
  ViewHierarchy out;
  auto screen = doc.find("screen");
  if (screen == doc.end() || !screen->is_array() || screen->size() != 2 || !(*screen)[0].is_number_integer() ||
      !(*screen)[1].is_number_integer())
    schema("'screen' must be [width, height]");
  out.screen_width = (*screen)[0].get<int>();
  out.screen_height = (*screen)[1].get<int>();
  if (out.screen_width < 1 || out.screen_height < 1)
    schema("screen dimensions must be >= 1");
  auto root = doc.find("root");
  if (root == doc.end() || root->is_null())
    malformed("missing root");
  out.root = parse_node(*root, 0);
  return out;
}

ViewHierarchy parse_vh(std::string_view doc) {
  json parsed;
  try {
    parsed = json::parse(doc);
  } catch (const json::parse_error &e) {
    malformed(e.what());
  }
  return parse_vh(parsed);
}

std::string serialize_vh(const ViewHierarchy &vh) { return vh_to_ordered(vh).dump(); }

json to_json(const ViewHierarchy &vh) { return json::parse(serialize_vh(vh)); }

std::vector<const VhNode *> preorder(const ViewHierarchy &vh) {
  std::vector<const VhNode *> out;
  std::vector<const VhNode *> stack{&vh.root};
  while (!stack.empty()) {
    const auto *n = stack.back();
    stack.pop_back();
    out.push_back(n);
    for (auto it = n->children.rbegin(); it != n->children.rend(); ++it)
      stack.push_back(&*it);
  }
  return out;
}

SimplifiedVh simplify(const ViewHierarchy &vh) {
  SimplifiedVh out;
  if (vh.root.bounds.area() == 0) {
    std::vector<const VhNode *> kids;
    effective_children(vh.root, kids);
    for (const auto *c : kids)
      emit(*c, 0, out.lines);
  } else {
    emit(vh.root, 0, out.lines);
  }
  return out;
}

SimplifiedLine parse_line(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= line.size(); ++i) {
    if (i == line.size() || line[i] == '|') {
      fields.push_back(line.substr(start, i - start));
      start = i + 1;
    }
  }
  if (fields.size() != 5)
    malformed("simplified line needs 5 fields: " + std::string(line));
  SimplifiedLine out;
  try {
    std::size_t used = 0;
    out.depth = std::stoi(std::string(fields[0]), &used);
    if (used != fields[0].size() || out.depth < 0)
      throw std::invalid_argument("depth");
  } catch (const std::exception &) {
    malformed("bad depth in simplified line: " + std::string(line));
  }
  out.class_name = fields[1];
  out.resource_id = fields[2];
  out.text = fields[3];
  if (fields[4] != "0" && fields[4] != "1")
    malformed("clickable flag must be 0 or 1: " + std::string(line));
  out.clickable = fields[4] == "1";
  return out;
}

ViewHierarchy from_simplified(const SimplifiedVh &svh) {
  ViewHierarchy out;
  out.root.class_name = "root";
  // path[d] is the most recent node at depth d - 1 below the synthetic root.
  std::vector<VhNode *> path{&out.root};
  for (const auto &raw : svh.lines) {
    auto line = parse_line(raw);
    if (static_cast<std::size_t>(line.depth) + 1 > path.size())
      malformed("simplified depth jumps at: " + raw);
    path.resize(static_cast<std::size_t>(line.depth) + 1);
    VhNode node;
    node.class_name = line.class_name;
    if (!line.resource_id.empty())
      node.resource_id = line.resource_id;
    if (!line.text.empty())
      node.text = line.text;
    node.clickable = line.clickable;
    node.bounds = {0, 0, 1, 1};
    auto &siblings = path.back()->children;
    siblings.push_back(std::move(node));
    path.push_back(&siblings.back());
  }
  // A single top-level line is the tree itself; otherwise the synthetic root
  // keeps zero area so simplify() hoists its children back to depth 0.
  if (out.root.children.size() == 1) {
    VhNode top = std::move(out.root.children.front());
    out.root = std::move(top);
  }
  return out;
}

SignatureBag signatures(const ViewHierarchy &vh) {
  SignatureBag bag;
  collect(vh.root, bag);
  return bag;
}

SignatureBag signatures(const SimplifiedVh &svh) {
  SignatureBag bag;
  for (const auto &raw : svh.lines) {
    auto line = parse_line(raw);
    ++bag[{line.class_name, line.resource_id}];
  }
  return bag;
}

double bag_similarity(const SignatureBag &a, const SignatureBag &b) {
  long long inter = 0, uni = 0;
  auto ia = a.begin(), ib = b.begin();
  while (ia != a.end() || ib != b.end()) {
    if (ib == b.end() || (ia != a.end() && ia->first < ib->first)) {
      uni += ia->second;
      ++ia;
    } else if (ia == a.end() || ib->first < ia->first) {
      uni += ib->second;
      ++ib;
    } else {
      inter += std::min(ia->second, ib->second);
      uni += std::max(ia->second, ib->second);
      ++ia;
      ++ib;
    }
  }
  if (uni == 0)
    return 1.0;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

double vh_similarity(const ViewHierarchy &a, const ViewHierarchy &b) {
  return bag_similarity(signatures(a), signatures(b));
}

double vh_similarity(const SimplifiedVh &a, const SimplifiedVh &b) {
  return bag_similarity(signatures(a), signatures(b));
}

double screenshot_similarity(const ingest::LumaPlane &a, const ingest::LumaPlane &b) {
  return 1.0 - keyframe::normalized_luma_difference(a, b);
}

} // namespace xplore::vh
