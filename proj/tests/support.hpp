#pragma once

// Helpers and independent reference implementations shared by the unit tests
// and the acceptance binary. Nothing here calls the algorithm it checks.

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "xplore/graph.hpp"
#include "xplore/keyframe.hpp"

namespace testing_support {

class TempDir {
public:
  explicit TempDir(const std::string &tag = "xplore");
  ~TempDir();
  TempDir(const TempDir &) = delete;
  TempDir &operator=(const TempDir &) = delete;

  const std::filesystem::path &path() const { return path_; }
  std::filesystem::path operator/(const std::string &rel) const { return path_ / rel; }

private:
  std::filesystem::path path_;
};

xplore::Action tap(const std::string &id);

// Graph with nodes 0..n-1 ("screen i") and one tap edge per (src, dst) pair
// given, each with a distinct target id.
xplore::graph::GuiTransitionGraph make_graph(int n, const std::vector<std::pair<int, int>> &edges, int home = 0);

xplore::graph::GuiTransitionGraph random_graph(std::mt19937_64 &rng, int max_nodes, int max_edges);

// Floyd-Warshall style reflexive transitive closure.
std::vector<std::vector<bool>> closure_oracle(const xplore::graph::GuiTransitionGraph &g);

bool strict_precedes_oracle(const xplore::graph::GuiTransitionGraph &g, const std::vector<std::vector<bool>> &reach,
                            std::size_t e1, std::size_t e2);

// Every ordered 3-tuple of distinct edges filtered by the predicate.
std::vector<xplore::graph::PrecedenceTriple> triples_oracle(const xplore::graph::GuiTransitionGraph &g);

// Shortest distances from src by Bellman-Ford relaxation; -1 = unreachable.
std::vector<int> distance_oracle(const xplore::graph::GuiTransitionGraph &g, int src);

// Maximal runs above theta_low, merged across gaps shorter than min_static,
// kept when they contain a value above theta_high.
std::vector<xplore::keyframe::ActionSegment> segmenter_oracle(const std::vector<double> &diffs,
                                                              const xplore::keyframe::SegmenterConfig &cfg);

// Bijection on node ids that maps home to home and preserves every
// (src, dst, action, occurrences) edge. Descriptions are ignored.
bool isomorphic(const xplore::graph::GuiTransitionGraph &a, const xplore::graph::GuiTransitionGraph &b);

} // namespace testing_support
