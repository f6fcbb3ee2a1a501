#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include "xplore/modelclient.hpp"
#include "xplore/sequence.hpp"

namespace xplore::cluster {

struct ScreenNode {
  int node_id = 0;
  std::string description;
  std::size_t representative = 0; // == members.front()
  std::vector<std::size_t> members;

  bool operator==(const ScreenNode &) const = default;
};

enum class Method { rule, model };

std::string_view method_name(Method m) noexcept;
Method method_from_name(std::string_view name);

struct ClusterAssignment {
  std::vector<ScreenNode> nodes;
  std::map<std::size_t, int> assignment; // keyframe index -> node id
  Method method = Method::rule;
  // Non-fatal oddities (e.g. a model reply naming a node that does not
  // exist). Not serialized.
  std::vector<std::string> warnings;

  int node_of(std::size_t keyframe) const;

  bool operator==(const ClusterAssignment &o) const {
    return nodes == o.nodes && assignment == o.assignment && method == o.method;
  }
};

struct RuleClusterConfig {
  double tau_vh = 0.8;
  double tau_img = 0.9;

  void validate() const;
};

// Sequential scan: each screen joins the lowest-id node whose representative
// passes both thresholds, else opens a new node.
ClusterAssignment cluster_rule(const std::vector<sequence::ScreenRecord> &screens, const RuleClusterConfig &cfg = {});

struct ModelClusterOptions {
  // Adds each record's ground-truth label to the request as "hidden_label".
  // Only meant for the label-echo mock used in tests and synthetic runs.
  bool send_labels = false;
};

// One cluster_decide request per screen carrying its simplified VH and the
// current node list.
ClusterAssignment cluster_model(const std::vector<sequence::ScreenRecord> &screens, model::ModelClient &client,
                                const ModelClusterOptions &opts = {});

// Node description derived from a simplified VH: up to three clickable texts.
std::string describe_screen(const vh::SimplifiedVh &svh, std::size_t keyframe);

using Partition = std::map<std::size_t, std::string>; // keyframe index -> label

struct Quality {
  double rand_index = 0.0;
  bool exact = false;
};

Quality assignment_quality(const ClusterAssignment &pred, const Partition &gt);

json to_json(const ClusterAssignment &a);
ClusterAssignment assignment_from_json(const json &doc);

json to_json(const ScreenNode &n);
ScreenNode screen_node_from_json(const json &doc);

} // namespace xplore::cluster
