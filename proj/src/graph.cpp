#include "xplore/graph.hpp"

#include <algorithm>
#include <deque>
#include <numeric>
#include <sstream>
#include <tuple>

#include "xplore/error.hpp"

namespace xplore::graph {

namespace {

bool edge_key_less(const Edge &a, const Edge &b) {
  if (a.src != b.src)
    return a.src < b.src;
  if (a.dst != b.dst)
    return a.dst < b.dst;
  return action_less(a.action, b.action);
}

bool same_key(const Edge &a, const Edge &b) { return a.src == b.src && a.dst == b.dst && a.action == b.action; }

std::vector<std::vector<std::size_t>> out_edges(const GuiTransitionGraph &g) {
  std::vector<std::vector<std::size_t>> adj(g.nodes.size());
  for (std::size_t i = 0; i < g.edges.size(); ++i)
    adj[static_cast<std::size_t>(g.edges[i].src)].push_back(i);
  return adj;
}

void check_edge(const GuiTransitionGraph &g, std::size_t e) {
  if (e >= g.edges.size())
    throw Error(Errc::edge_not_in_graph, "edge " + std::to_string(e) + " not in graph");
}

std::string dot_escape(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
    case '"': out += "\\\""; break;
    case '\\': out += "\\\\"; break;
    case '\n': out += "\\n"; break;
    case '\r': break;
    default: out += c;
    }
  }
  return out;
}

} // namespace

void GuiTransitionGraph::validate() const {
  for (std::size_t i = 0; i < nodes.size(); ++i)
    if (nodes[i].node_id != static_cast<int>(i))
      throw Error(Errc::schema_violation, "node ids must be dense from 0");
  if (!nodes.empty() && !has_node(home))
    throw Error(Errc::schema_violation, "home node " + std::to_string(home) + " does not exist");
  for (std::size_t i = 0; i < edges.size(); ++i) {
    const auto &e = edges[i];
    if (!has_node(e.src) || !has_node(e.dst))
      throw Error(Errc::schema_violation, "edge references unknown node");
    if (e.occurrences < 1)
      throw Error(Errc::schema_violation, "edge occurrences must be positive");
    if (i > 0 && !edge_key_less(edges[i - 1], e))
      throw Error(Errc::schema_violation, "edges must be sorted and unique by (src, dst, action)");
  }
}

void normalize_edges(GuiTransitionGraph &g) {
  std::stable_sort(g.edges.begin(), g.edges.end(), edge_key_less);
  std::vector<Edge> merged;
  for (auto &e : g.edges) {
    if (!merged.empty() && same_key(merged.back(), e)) {
      merged.back().occurrences += e.occurrences;
      merged.back().first_step = std::min(merged.back().first_step, e.first_step);
    } else {
      merged.push_back(std::move(e));
    }
  }
  g.edges = std::move(merged);
}

GuiTransitionGraph build_graph(const sequence::ExplorationSequence &seq, const cluster::ClusterAssignment &clusters) {
  GuiTransitionGraph g;
  g.nodes = clusters.nodes;
  for (std::size_t i = 0; i < seq.steps.size(); ++i) {
    const auto &step = seq.steps[i];
    Edge e;
    e.src = clusters.node_of(step.pre.keyframe_index);
    e.dst = clusters.node_of(step.post.keyframe_index);
    e.action = step.action;
    e.occurrences = 1;
    e.first_step = i;
    g.edges.push_back(std::move(e));
  }
  if (!seq.steps.empty())
    g.home = clusters.node_of(seq.steps.front().pre.keyframe_index);
  else if (!clusters.assignment.empty())
    g.home = clusters.assignment.begin()->second;
  normalize_edges(g);
  g.validate();
  return g;
}

std::vector<ReachabilitySet> reachability(const GuiTransitionGraph &g) {
  const auto adj = out_edges(g);
  std::vector<ReachabilitySet> out;
  out.reserve(g.nodes.size());
  for (std::size_t s = 0; s < g.nodes.size(); ++s) {
    ReachabilitySet r;
    r.node_id = static_cast<NodeId>(s);
    std::vector<char> seen(g.nodes.size(), 0);
    std::deque<std::size_t> queue{s};
    seen[s] = 1;
    while (!queue.empty()) {
      auto u = queue.front();
      queue.pop_front();
      r.reachable.insert(static_cast<NodeId>(u));
      for (auto ei : adj[u]) {
        auto v = static_cast<std::size_t>(g.edges[ei].dst);
        if (!seen[v]) {
          seen[v] = 1;
          queue.push_back(v);
        }
      }
    }
    out.push_back(std::move(r));
  }
  return out;
}

ReachabilityIndex::ReachabilityIndex(const GuiTransitionGraph &g) : n_(g.nodes.size()), closure_(n_ * n_, 0) {
  for (const auto &r : reachability(g))
    for (auto v : r.reachable)
      closure_[static_cast<std::size_t>(r.node_id) * n_ + static_cast<std::size_t>(v)] = 1;
}

bool ReachabilityIndex::reaches(NodeId from, NodeId to) const {
  if (from < 0 || to < 0 || static_cast<std::size_t>(from) >= n_ || static_cast<std::size_t>(to) >= n_)
    return false;
  return closure_[static_cast<std::size_t>(from) * n_ + static_cast<std::size_t>(to)] != 0;
}

bool strict_precedes(const GuiTransitionGraph &g, const ReachabilityIndex &reach, std::size_t e1, std::size_t e2) {
  check_edge(g, e1);
  check_edge(g, e2);
  const auto &a = g.edges[e1];
  const auto &b = g.edges[e2];
  return reach.reaches(a.dst, b.src) && !reach.reaches(b.dst, a.src);
}

bool strict_precedes(const GuiTransitionGraph &g, std::size_t e1, std::size_t e2) {
  check_edge(g, e1);
  check_edge(g, e2);
  return strict_precedes(g, ReachabilityIndex(g), e1, e2);
}

std::vector<PrecedenceTriple> extract_triples(const GuiTransitionGraph &g, std::size_t limit) {
  std::vector<PrecedenceTriple> out;
  if (limit == 0)
    return out;
  const ReachabilityIndex reach(g);
  const std::size_t m = g.edges.size();
  // after[a] lists every b with a strictly before b, ascending.
  std::vector<std::vector<std::size_t>> after(m);
  for (std::size_t a = 0; a < m; ++a)
    for (std::size_t b = 0; b < m; ++b)
      if (strict_precedes(g, reach, a, b))
        after[a].push_back(b);
  for (std::size_t a = 0; a < m; ++a)
    for (auto b : after[a])
      for (auto c : after[b]) {
        out.push_back({a, b, c});
        if (out.size() >= limit)
          return out;
      }
  return out;
}

UsagePath usage_path(const GuiTransitionGraph &g, NodeId target) {
  if (!g.has_node(target))
    throw Error(Errc::index_out_of_range, "target node " + std::to_string(target) + " does not exist");
  const std::size_t n = g.nodes.size();
  constexpr auto inf = std::numeric_limits<std::size_t>::max();

  // Distances to target over reversed edges.
  std::vector<std::vector<std::size_t>> in(n);
  for (std::size_t i = 0; i < g.edges.size(); ++i)
    in[static_cast<std::size_t>(g.edges[i].dst)].push_back(i);
  std::vector<std::size_t> dist(n, inf);
  std::deque<std::size_t> queue{static_cast<std::size_t>(target)};
  dist[static_cast<std::size_t>(target)] = 0;
  while (!queue.empty()) {
    auto v = queue.front();
    queue.pop_front();
    for (auto ei : in[v]) {
      auto u = static_cast<std::size_t>(g.edges[ei].src);
      if (dist[u] == inf) {
        dist[u] = dist[v] + 1;
        queue.push_back(u);
      }
    }
  }
  if (dist[static_cast<std::size_t>(g.home)] == inf)
    throw Error(Errc::unreachable, "node " + std::to_string(target) + " is unreachable from home");

  const auto adj = out_edges(g);
  UsagePath path;
  auto u = static_cast<std::size_t>(g.home);
  path.nodes.push_back(g.home);
  while (dist[u] > 0) {
    // Smallest next node on a shortest path; edges are sorted by (src, dst,
    // action) so the first hit is also the lowest edge index.
    std::size_t best = inf;
    for (auto ei : adj[u]) {
      auto v = static_cast<std::size_t>(g.edges[ei].dst);
      if (dist[v] + 1 == dist[u] && (best == inf || v < static_cast<std::size_t>(g.edges[best].dst)))
        best = ei;
    }
    path.edges.push_back(best);
    path.actions.push_back(g.edges[best].action);
    u = static_cast<std::size_t>(g.edges[best].dst);
    path.nodes.push_back(static_cast<NodeId>(u));
  }
  return path;
}

std::string node_line(const cluster::ScreenNode &n) {
  return "Node " + std::to_string(n.node_id) + ": " + n.description;
}

std::string edge_line(const Edge &e) {
  return "Node " + std::to_string(e.src) + " --[" + e.action.describe() + "]--> Node " + std::to_string(e.dst);
}

std::string PromptContext::text() const {
  std::string out;
  for (const auto &l : node_lines)
    out += l + "\n";
  for (const auto &l : edge_lines)
    out += l + "\n";
  return out;
}

PromptContext prompt_context(const GuiTransitionGraph &g, std::size_t budget) {
  if (budget == 0)
    throw Error(Errc::invalid_config, "prompt budget must be positive");
  PromptContext ctx;
  ctx.budget = budget;
  std::size_t node_tokens = 0;
  for (const auto &n : g.nodes) {
    ctx.node_lines.push_back(node_line(n));
    node_tokens += count_words(ctx.node_lines.back());
  }
  if (node_tokens > budget)
    throw Error(Errc::budget_too_small_for_nodes, "node list needs " + std::to_string(node_tokens) +
                                                      " tokens, budget is " + std::to_string(budget));

  std::vector<std::string> lines;
  std::vector<std::size_t> cost;
  std::size_t total = node_tokens;
  for (const auto &e : g.edges) {
    lines.push_back(edge_line(e));
    cost.push_back(count_words(lines.back()));
    total += cost.back();
  }
  std::vector<char> keep(lines.size(), 1);
  if (total > budget) {
    std::vector<std::size_t> order(lines.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return g.edges[a].occurrences < g.edges[b].occurrences; });
    for (auto i : order) {
      if (total <= budget)
        break;
      keep[i] = 0;
      total -= cost[i];
      ++ctx.dropped_edges;
    }
  }
  for (std::size_t i = 0; i < lines.size(); ++i)
    if (keep[i])
      ctx.edge_lines.push_back(std::move(lines[i]));
  ctx.token_estimate = total;
  return ctx;
}

std::string export_dot(const GuiTransitionGraph &g) {
  std::ostringstream out;
  out << "digraph gui_transition_graph {\n";
  for (const auto &n : g.nodes) {
    out << "  " << n.node_id << " [label=\"" << dot_escape(n.description) << "\"";
    if (n.node_id == g.home)
      out << ", peripheries=2";
    out << "];\n";
  }
  for (const auto &e : g.edges) {
    out << "  " << e.src << " -> " << e.dst << " [label=\"" << dot_escape(e.action.describe());
    if (e.occurrences > 1)
      out << " x" << e.occurrences;
    out << "\"];\n";
  }
  out << "}\n";
  return out.str();
}

json export_json(const GuiTransitionGraph &g) {
  json nodes = json::array();
  for (const auto &n : g.nodes)
    nodes.push_back(cluster::to_json(n));
  json edges = json::array();
  for (const auto &e : g.edges)
    edges.push_back({{"src", e.src},
                     {"dst", e.dst},
                     {"action", to_json(e.action)},
                     {"occurrences", e.occurrences},
                     {"first_step", e.first_step}});
  return json{{"home", g.home}, {"nodes", std::move(nodes)}, {"edges", std::move(edges)}};
}

GuiTransitionGraph import_json(const json &doc) {
  try {
    GuiTransitionGraph g;
    g.home = doc.at("home").get<NodeId>();
    for (const auto &n : doc.at("nodes"))
      g.nodes.push_back(cluster::screen_node_from_json(n));
    for (const auto &e : doc.at("edges")) {
      Edge edge;
      edge.src = e.at("src").get<NodeId>();
      edge.dst = e.at("dst").get<NodeId>();
      edge.action = action_from_json(e.at("action"));
      edge.occurrences = e.at("occurrences").get<int>();
      edge.first_step = e.value("first_step", std::size_t{0});
      g.edges.push_back(std::move(edge));
    }
    normalize_edges(g);
    g.validate();
    return g;
  } catch (const json::exception &e) {
    throw Error(Errc::schema_violation, std::string("graph document: ") + e.what());
  }
}

} // namespace xplore::graph
