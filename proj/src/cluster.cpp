#include "xplore/cluster.hpp"

#include <algorithm>

#include "xplore/error.hpp"

namespace xplore::cluster {

std::string_view method_name(Method m) noexcept { return m == Method::rule ? "rule" : "model"; }

Method method_from_name(std::string_view name) {
  if (name == "rule")
    return Method::rule;
  if (name == "model")
    return Method::model;
  throw Error(Errc::invalid_config, "unknown cluster method '" + std::string(name) + "'");
}

int ClusterAssignment::node_of(std::size_t keyframe) const {
  auto it = assignment.find(keyframe);
  if (it == assignment.end())
    throw Error(Errc::unassigned_keyframe, "keyframe " + std::to_string(keyframe) + " has no cluster");
  return it->second;
}

void RuleClusterConfig::validate() const {
  if (!(tau_vh >= 0.0 && tau_vh <= 1.0 && tau_img >= 0.0 && tau_img <= 1.0))
    throw Error(Errc::invalid_config, "cluster thresholds must lie in [0, 1]");
}

std::string describe_screen(const vh::SimplifiedVh &svh, std::size_t keyframe) {
  std::vector<std::string> texts;
  std::string fallback;
  for (const auto &raw : svh.lines) {
    auto line = vh::parse_line(raw);
    if (line.text.empty())
      continue;
    if (fallback.empty())
      fallback = line.text;
    if (line.clickable && texts.size() < 3)
      texts.push_back(line.text);
  }
  if (texts.empty())
    return fallback.empty() ? "screen@" + std::to_string(keyframe) : fallback;
  std::string out = texts.front();
  for (std::size_t i = 1; i < texts.size(); ++i)
    out += " / " + texts[i];
  return out;
}

namespace {

void add_member(ClusterAssignment &out, int node, std::size_t keyframe) {
  out.nodes[static_cast<std::size_t>(node)].members.push_back(keyframe);
  out.assignment[keyframe] = node;
}

int open_node(ClusterAssignment &out, std::size_t keyframe, std::string description) {
  ScreenNode n;
  n.node_id = static_cast<int>(out.nodes.size());
  n.description = std::move(description);
  n.representative = keyframe;
  out.nodes.push_back(std::move(n));
  add_member(out, out.nodes.back().node_id, keyframe);
  return out.nodes.back().node_id;
}

void check_unique(const std::vector<sequence::ScreenRecord> &screens) {
  std::vector<std::size_t> frames;
  for (const auto &s : screens)
    frames.push_back(s.keyframe_index);
  std::sort(frames.begin(), frames.end());
  if (std::adjacent_find(frames.begin(), frames.end()) != frames.end())
    throw Error(Errc::invalid_config, "screen list repeats a keyframe");
}

} // namespace

ClusterAssignment cluster_rule(const std::vector<sequence::ScreenRecord> &screens, const RuleClusterConfig &cfg) {
  cfg.validate();
  check_unique(screens);
  ClusterAssignment out;
  out.method = Method::rule;
  std::vector<vh::SignatureBag> rep_bags;
  std::vector<const ingest::LumaPlane *> rep_lumas;

  for (const auto &s : screens) {
    if (!s.luma)
      throw Error(Errc::invalid_config, "rule clustering needs the screenshot of keyframe " +
                                            std::to_string(s.keyframe_index));
    auto bag = vh::signatures(s.vh);
    int joined = -1;
    for (std::size_t n = 0; n < out.nodes.size() && joined < 0; ++n) {
      if (vh::bag_similarity(bag, rep_bags[n]) >= cfg.tau_vh &&
          vh::screenshot_similarity(*s.luma, *rep_lumas[n]) >= cfg.tau_img)
        joined = static_cast<int>(n);
    }
    if (joined >= 0) {
      add_member(out, joined, s.keyframe_index);
    } else {
      open_node(out, s.keyframe_index, describe_screen(s.vh, s.keyframe_index));
      rep_bags.push_back(std::move(bag));
      rep_lumas.push_back(s.luma.get());
    }
  }
  return out;
}

ClusterAssignment cluster_model(const std::vector<sequence::ScreenRecord> &screens, model::ModelClient &client,
                                const ModelClusterOptions &opts) {
  check_unique(screens);
  ClusterAssignment out;
  out.method = Method::model;
  for (const auto &s : screens) {
    json nodes = json::array();
    for (const auto &n : out.nodes)
      nodes.push_back({{"id", n.node_id}, {"description", n.description}});
    json payload{{"frame", s.keyframe_index}, {"vh_lines", s.vh.lines}, {"nodes", std::move(nodes)}};
    if (s.luma)
      payload["screenshot"] = sequence::luma_digest(*s.luma);
    if (opts.send_labels && s.label)
      payload["hidden_label"] = *s.label;

    model::InferenceResponse res;
    try {
      res = client.invoke(model::Endpoint::cluster_decide, std::move(payload));
    } catch (const Error &e) {
      if (is_backend_error(e.code()))
        throw Error(Errc::client_unavailable, std::string("cluster_decide failed: ") + e.what());
      throw;
    }

    if (res.body.contains("match")) {
      auto id = res.body["match"].get<long long>();
      if (id >= 0 && id < static_cast<long long>(out.nodes.size())) {
        add_member(out, static_cast<int>(id), s.keyframe_index);
        continue;
      }
      out.warnings.push_back("keyframe " + std::to_string(s.keyframe_index) + ": reply named unknown node " +
                             std::to_string(id) + ", opened a new node");
      open_node(out, s.keyframe_index, describe_screen(s.vh, s.keyframe_index));
      continue;
    }
    auto description = res.body["new"].get<std::string>();
    if (description.empty())
      description = describe_screen(s.vh, s.keyframe_index);
    open_node(out, s.keyframe_index, std::move(description));
  }
  return out;
}

Quality assignment_quality(const ClusterAssignment &pred, const Partition &gt) {
  if (pred.assignment.size() != gt.size())
    throw Error(Errc::universe_mismatch, "predicted and reference partitions cover different keyframes");
  std::vector<int> p;
  std::vector<const std::string *> g;
  auto it = gt.begin();
  for (const auto &[kf, node] : pred.assignment) {
    if (it->first != kf)
      throw Error(Errc::universe_mismatch, "keyframe " + std::to_string(kf) + " missing from reference");
    p.push_back(node);
    g.push_back(&it->second);
    ++it;
  }
  const std::size_t n = p.size();
  if (n < 2)
    return {1.0, true};
  std::size_t agree = 0, pairs = 0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      ++pairs;
      if ((p[i] == p[j]) == (*g[i] == *g[j]))
        ++agree;
    }
  return {static_cast<double>(agree) / static_cast<double>(pairs), agree == pairs};
}

json to_json(const ScreenNode &n) {
  return json{{"id", n.node_id}, {"description", n.description}, {"representative", n.representative},
              {"members", n.members}};
}

ScreenNode screen_node_from_json(const json &doc) {
  ScreenNode n;
  n.node_id = doc.at("id").get<int>();
  n.description = doc.at("description").get<std::string>();
  n.representative = doc.at("representative").get<std::size_t>();
  n.members = doc.at("members").get<std::vector<std::size_t>>();
  if (n.members.empty() || n.members.front() != n.representative)
    throw Error(Errc::schema_violation, "node " + std::to_string(n.node_id) + ": representative must be the first member");
  return n;
}

json to_json(const ClusterAssignment &a) {
  json nodes = json::array();
  for (const auto &n : a.nodes)
    nodes.push_back(to_json(n));
  json assignment = json::object();
  for (const auto &[kf, node] : a.assignment)
    assignment[std::to_string(kf)] = node;
  return json{{"method", method_name(a.method)}, {"nodes", std::move(nodes)}, {"assignment", std::move(assignment)}};
}

ClusterAssignment assignment_from_json(const json &doc) {
  try {
    ClusterAssignment a;
    a.method = method_from_name(doc.at("method").get<std::string>());
    for (const auto &n : doc.at("nodes"))
      a.nodes.push_back(screen_node_from_json(n));
    for (std::size_t i = 0; i < a.nodes.size(); ++i)
      if (a.nodes[i].node_id != static_cast<int>(i))
        throw Error(Errc::schema_violation, "node ids must be dense from 0");
    for (const auto &[key, node] : doc.at("assignment").items()) {
      auto id = node.get<int>();
      if (id < 0 || id >= static_cast<int>(a.nodes.size()))
        throw Error(Errc::schema_violation, "assignment references unknown node " + std::to_string(id));
      a.assignment[std::stoull(key)] = id;
    }
    return a;
  } catch (const json::exception &e) {
    throw Error(Errc::schema_violation, std::string("clusters document: ") + e.what());
  }
}

} // namespace xplore::cluster
