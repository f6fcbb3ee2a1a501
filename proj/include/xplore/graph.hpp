#pragma once

#include <cstddef>
#include <limits>
#include <set>
#include <string>
#include <vector>

#include "xplore/action.hpp"
#include "xplore/cluster.hpp"
#include "xplore/sequence.hpp"

namespace xplore::graph {

using NodeId = int;

struct Edge {
  NodeId src = 0;
  NodeId dst = 0;
  Action action;
  int occurrences = 1;
  std::size_t first_step = 0;

  bool operator==(const Edge &) const = default;
};

// Directed multigraph over screen clusters. Edges are kept sorted by
// (src, dst, action) and are unique on that key.
struct GuiTransitionGraph {
  std::vector<cluster::ScreenNode> nodes;
  std::vector<Edge> edges;
  NodeId home = 0;

  std::size_t node_count() const noexcept { return nodes.size(); }
  bool has_node(NodeId id) const noexcept { return id >= 0 && static_cast<std::size_t>(id) < nodes.size(); }

  // Throws Errc::schema_violation on dangling ids, duplicate edge keys or a
  // missing home.
  void validate() const;

  bool operator==(const GuiTransitionGraph &) const = default;
};

// Adds or merges one edge per step; self-loops are kept.
GuiTransitionGraph build_graph(const sequence::ExplorationSequence &seq, const cluster::ClusterAssignment &clusters);

// Sorts edges and merges equal (src, dst, action) keys, summing occurrences
// and keeping the earliest first_step.
void normalize_edges(GuiTransitionGraph &g);

struct ReachabilitySet {
  NodeId node_id = 0;
  std::set<NodeId> reachable; // always contains node_id

  bool operator==(const ReachabilitySet &) const = default;
};

std::vector<ReachabilitySet> reachability(const GuiTransitionGraph &g);

// Dense reflexive-transitive closure for repeated queries.
class ReachabilityIndex {
public:
  explicit ReachabilityIndex(const GuiTransitionGraph &g);
  bool reaches(NodeId from, NodeId to) const;
  std::size_t size() const noexcept { return n_; }

private:
  std::size_t n_ = 0;
  std::vector<char> closure_;
};

// e2.src is reachable from e1.dst and e1.src is not reachable from e2.dst.
// Edges are indices into g.edges (Errc::edge_not_in_graph otherwise).
bool strict_precedes(const GuiTransitionGraph &g, std::size_t e1, std::size_t e2);
bool strict_precedes(const GuiTransitionGraph &g, const ReachabilityIndex &reach, std::size_t e1, std::size_t e2);

struct PrecedenceTriple {
  std::size_t a = 0;
  std::size_t b = 0;
  std::size_t c = 0;

  bool operator==(const PrecedenceTriple &) const = default;
};

inline constexpr std::size_t kNoLimit = std::numeric_limits<std::size_t>::max();

// All (a, b, c) with a before b before c, in lexicographic edge order, at
// most `limit` of them.
std::vector<PrecedenceTriple> extract_triples(const GuiTransitionGraph &g, std::size_t limit = kNoLimit);

struct UsagePath {
  std::vector<NodeId> nodes; // home ... target
  std::vector<std::size_t> edges;
  std::vector<Action> actions;
};

// Shortest home -> target path; ties go to the lexicographically smallest
// node sequence, parallel edges to the lowest edge index.
UsagePath usage_path(const GuiTransitionGraph &g, NodeId target);

struct PromptContext {
  std::vector<std::string> node_lines;
  std::vector<std::string> edge_lines;
  std::size_t budget = 0;
  std::size_t token_estimate = 0;
  std::size_t dropped_edges = 0;

  bool truncated() const noexcept { return dropped_edges > 0; }
  std::string text() const;
};

std::string node_line(const cluster::ScreenNode &n);
std::string edge_line(const Edge &e);

// Node lines, then edge lines. When the word-count estimate exceeds budget,
// edges are dropped lowest-occurrence first (earlier lines first on ties).
PromptContext prompt_context(const GuiTransitionGraph &g, std::size_t budget);

std::string export_dot(const GuiTransitionGraph &g);
json export_json(const GuiTransitionGraph &g);
GuiTransitionGraph import_json(const json &doc);

} // namespace xplore::graph
