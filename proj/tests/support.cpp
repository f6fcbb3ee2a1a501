#include "support.hpp"

#include <algorithm>
#include <atomic>
#include <map>
#include <unistd.h>

namespace fs = std::filesystem;
using namespace xplore;

namespace testing_support {

TempDir::TempDir(const std::string &tag) {
  static std::atomic<int> counter{0};
  path_ = fs::temp_directory_path() /
          (tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter.fetch_add(1)));
  fs::remove_all(path_);
  fs::create_directories(path_);
}

TempDir::~TempDir() {
  std::error_code ec;
  fs::remove_all(path_, ec);
}

Action tap(const std::string &id) {
  Action a;
  a.kind = ActionKind::tap;
  a.target = ElementRef{id, std::nullopt};
  return a;
}

graph::GuiTransitionGraph make_graph(int n, const std::vector<std::pair<int, int>> &edges, int home) {
  graph::GuiTransitionGraph g;
  for (int i = 0; i < n; ++i) {
    cluster::ScreenNode node;
    node.node_id = i;
    node.description = "screen " + std::to_string(i);
    node.representative = static_cast<std::size_t>(i);
    node.members = {static_cast<std::size_t>(i)};
    g.nodes.push_back(node);
  }
  for (std::size_t k = 0; k < edges.size(); ++k) {
    graph::Edge e;
    e.src = edges[k].first;
    e.dst = edges[k].second;
    char id[16];
    std::snprintf(id, sizeof id, "e%03zu", k);
    e.action = tap(id);
    e.first_step = k;
    g.edges.push_back(e);
  }
  g.home = home;
  graph::normalize_edges(g);
  g.validate();
  return g;
}

graph::GuiTransitionGraph random_graph(std::mt19937_64 &rng, int max_nodes, int max_edges) {
  int n = 1 + static_cast<int>(rng() % static_cast<std::uint64_t>(max_nodes));
  int m = static_cast<int>(rng() % static_cast<std::uint64_t>(max_edges + 1));
  std::vector<std::pair<int, int>> edges;
  for (int k = 0; k < m; ++k)
    edges.emplace_back(static_cast<int>(rng() % static_cast<std::uint64_t>(n)),
                       static_cast<int>(rng() % static_cast<std::uint64_t>(n)));
  return make_graph(n, edges, static_cast<int>(rng() % static_cast<std::uint64_t>(n)));
}

std::vector<std::vector<bool>> closure_oracle(const graph::GuiTransitionGraph &g) {
  const std::size_t n = g.nodes.size();
  std::vector<std::vector<bool>> r(n, std::vector<bool>(n, false));
  for (std::size_t i = 0; i < n; ++i)
    r[i][i] = true;
  for (const auto &e : g.edges)
    r[static_cast<std::size_t>(e.src)][static_cast<std::size_t>(e.dst)] = true;
  for (std::size_t k = 0; k < n; ++k)
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        if (r[i][k] && r[k][j])
          r[i][j] = true;
  return r;
}

bool strict_precedes_oracle(const graph::GuiTransitionGraph &g, const std::vector<std::vector<bool>> &reach,
                            std::size_t e1, std::size_t e2) {
  const auto &a = g.edges[e1];
  const auto &b = g.edges[e2];
  return reach[static_cast<std::size_t>(a.dst)][static_cast<std::size_t>(b.src)] &&
         !reach[static_cast<std::size_t>(b.dst)][static_cast<std::size_t>(a.src)];
}

std::vector<graph::PrecedenceTriple> triples_oracle(const graph::GuiTransitionGraph &g) {
  auto reach = closure_oracle(g);
  std::vector<graph::PrecedenceTriple> out;
  const std::size_t m = g.edges.size();
  for (std::size_t a = 0; a < m; ++a)
    for (std::size_t b = 0; b < m; ++b)
      for (std::size_t c = 0; c < m; ++c) {
        if (a == b || b == c || a == c)
          continue;
        if (strict_precedes_oracle(g, reach, a, b) && strict_precedes_oracle(g, reach, b, c))
          out.push_back({a, b, c});
      }
  return out;
}

std::vector<int> distance_oracle(const graph::GuiTransitionGraph &g, int src) {
  const int inf = 1 << 29;
  std::vector<int> d(g.nodes.size(), inf);
  d[static_cast<std::size_t>(src)] = 0;
  for (std::size_t round = 0; round < g.nodes.size(); ++round)
    for (const auto &e : g.edges) {
      auto s = static_cast<std::size_t>(e.src), t = static_cast<std::size_t>(e.dst);
      if (d[s] != inf && d[s] + 1 < d[t])
        d[t] = d[s] + 1;
    }
  for (auto &x : d)
    if (x == inf)
      x = -1;
  return d;
}

std::vector<keyframe::ActionSegment> segmenter_oracle(const std::vector<double> &v,
                                                      const keyframe::SegmenterConfig &cfg) {
  const std::size_t n = v.size();
  const auto ms = static_cast<std::size_t>(cfg.min_static);
  std::vector<keyframe::ActionSegment> out;
  std::size_t from = 0;
  while (true) {
    std::size_t s = from;
    while (s < n && !(v[s] > cfg.theta_high))
      ++s;
    if (s >= n)
      break;
    // Smallest active e >= s followed by min_static quiet values.
    std::optional<std::size_t> end;
    for (std::size_t e = s; e < n && !end; ++e) {
      if (!(v[e] > cfg.theta_low))
        continue;
      if (e + ms >= n)
        break;
      bool settled = true;
      for (std::size_t k = 1; k <= ms; ++k)
        settled = settled && v[e + k] <= cfg.theta_low;
      if (settled)
        end = e;
    }
    keyframe::ActionSegment seg;
    seg.change_start = s;
    seg.pre_keyframe = s == 0 ? 0 : s - 1;
    if (end) {
      seg.change_end = *end;
      seg.post_keyframe = *end + 1;
      out.push_back(seg);
      from = *end + 1;
    } else {
      std::size_t last = s;
      for (std::size_t e = s; e < n; ++e)
        if (v[e] > cfg.theta_low)
          last = e;
      seg.change_end = last;
      seg.post_keyframe = n;
      out.push_back(seg);
      break;
    }
  }
  return out;
}

namespace {

using Labels = std::map<std::pair<int, int>, std::vector<std::string>>;

Labels labels_of(const graph::GuiTransitionGraph &g) {
  Labels out;
  for (const auto &e : g.edges)
    out[{e.src, e.dst}].push_back(to_json(e.action).dump() + "#" + std::to_string(e.occurrences));
  for (auto &[_, v] : out)
    std::sort(v.begin(), v.end());
  return out;
}

const std::vector<std::string> &at(const Labels &l, int a, int b) {
  static const std::vector<std::string> none;
  auto it = l.find({a, b});
  return it == l.end() ? none : it->second;
}

struct Matcher {
  const graph::GuiTransitionGraph &a, &b;
  Labels la, lb;
  std::vector<int> fwd, bwd, order;

  bool compatible(int u, int v) const {
    if (at(la, u, u) != at(lb, v, v))
      return false;
    for (int w = 0; w < static_cast<int>(fwd.size()); ++w) {
      int fw = fwd[static_cast<std::size_t>(w)];
      if (fw < 0)
        continue;
      if (at(la, u, w) != at(lb, v, fw) || at(la, w, u) != at(lb, fw, v))
        return false;
    }
    return true;
  }

  bool extend(std::size_t k) {
    if (k == order.size())
      return true;
    int u = order[k];
    for (int v = 0; v < static_cast<int>(b.nodes.size()); ++v) {
      if (bwd[static_cast<std::size_t>(v)] >= 0 || !compatible(u, v))
        continue;
      fwd[static_cast<std::size_t>(u)] = v;
      bwd[static_cast<std::size_t>(v)] = u;
      if (extend(k + 1))
        return true;
      fwd[static_cast<std::size_t>(u)] = -1;
      bwd[static_cast<std::size_t>(v)] = -1;
    }
    return false;
  }
};

} // namespace

bool isomorphic(const graph::GuiTransitionGraph &a, const graph::GuiTransitionGraph &b) {
  if (a.nodes.size() != b.nodes.size() || a.edges.size() != b.edges.size())
    return false;
  if (a.nodes.empty())
    return true;
  Matcher m{a, b, labels_of(a), labels_of(b), {}, {}, {}};
  m.fwd.assign(a.nodes.size(), -1);
  m.bwd.assign(b.nodes.size(), -1);
  if (!m.compatible(a.home, b.home))
    return false;
  m.fwd[static_cast<std::size_t>(a.home)] = b.home;
  m.bwd[static_cast<std::size_t>(b.home)] = a.home;
  // Breadth-first order from home keeps every new node adjacent to a mapped one.
  std::vector<char> seen(a.nodes.size(), 0);
  std::vector<int> queue{a.home};
  seen[static_cast<std::size_t>(a.home)] = 1;
  for (std::size_t i = 0; i < queue.size(); ++i)
    for (const auto &e : a.edges)
      for (int w : {e.src == queue[i] ? e.dst : -1, e.dst == queue[i] ? e.src : -1})
        if (w >= 0 && !seen[static_cast<std::size_t>(w)]) {
          seen[static_cast<std::size_t>(w)] = 1;
          queue.push_back(w);
        }
  for (int u = 0; u < static_cast<int>(a.nodes.size()); ++u)
    if (!seen[static_cast<std::size_t>(u)])
      queue.push_back(u);
  m.order.assign(queue.begin() + 1, queue.end());
  return m.extend(0);
}

} // namespace testing_support
