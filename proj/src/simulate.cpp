#include "xplore/simulate.hpp"

#include <algorithm>
#include <bit>
#include <cstdio>
#include <deque>
#include <random>
#include <set>

#include "xplore/error.hpp"

namespace fs = std::filesystem;

namespace xplore::simulate {

namespace {

[[noreturn]] void invalid(const std::string &what) { throw Error(Errc::invalid_model, "app model: " + what); }

std::string resource_id(int screen, const std::string &element) {
  return "s" + std::to_string(screen) + "/" + element;
}

json bounds_json(const vh::Bounds &b) { return json::array({b.left, b.top, b.right, b.bottom}); }

vh::Bounds bounds_from(const json &b) {
  if (!b.is_array() || b.size() != 4)
    invalid("bounds must be [l, t, r, b]");
  vh::Bounds out{b[0].get<int>(), b[1].get<int>(), b[2].get<int>(), b[3].get<int>()};
  if (out.left > out.right || out.top > out.bottom)
    invalid("reversed element bounds");
  return out;
}

// Taps available on a screen, in element order.
std::vector<std::pair<std::string, int>> taps(const AppModel &m, int screen) {
  std::vector<std::pair<std::string, int>> out;
  for (const auto &e : m.screen(screen).elements) {
    if (!e.clickable)
      continue;
    if (auto it = m.transitions.find({screen, e.element_id}); it != m.transitions.end())
      out.emplace_back(e.element_id, it->second);
  }
  return out;
}

Action tap_action(const AppModel &m, int screen, const std::string &element) {
  Action a;
  a.kind = ActionKind::tap;
  ElementRef ref;
  ref.resource_id = resource_id(screen, element);
  for (const auto &e : m.screen(screen).elements)
    if (e.element_id == element)
      ref.bounds = e.bounds;
  a.target = std::move(ref);
  return a;
}

Action back_action() {
  Action a;
  a.kind = ActionKind::back;
  return a;
}

} // namespace

bool AppModel::has_screen(int id) const {
  return std::any_of(screens.begin(), screens.end(), [&](const Screen &s) { return s.screen_id == id; });
}

const Screen &AppModel::screen(int id) const {
  for (const auto &s : screens)
    if (s.screen_id == id)
      return s;
  invalid("unknown screen " + std::to_string(id));
}

void AppModel::validate() const {
  if (width < 1 || height < 1)
    invalid("screen size must be positive");
  if (screens.empty())
    invalid("no screens");
  std::set<int> ids;
  for (const auto &s : screens) {
    if (s.screen_id < 0)
      invalid("screen ids must be non-negative");
    if (!ids.insert(s.screen_id).second)
      invalid("duplicate screen id " + std::to_string(s.screen_id));
    std::set<std::string> elements;
    for (const auto &e : s.elements)
      if (!elements.insert(e.element_id).second)
        invalid("duplicate element '" + e.element_id + "' on screen " + std::to_string(s.screen_id));
  }
  if (!ids.count(home))
    invalid("home screen " + std::to_string(home) + " does not exist");
  for (const auto &[key, target] : transitions) {
    const auto &[screen_id, element] = key;
    if (!ids.count(screen_id) || !ids.count(target))
      invalid("transition references unknown screen");
    const auto &els = screen(screen_id).elements;
    if (std::none_of(els.begin(), els.end(), [&](const Element &e) { return e.element_id == element; }))
      invalid("transition references unknown element '" + element + "'");
  }
  for (const auto &[from, to] : back_map)
    if (!ids.count(from) || !ids.count(to))
      invalid("back map references unknown screen");

  std::set<int> seen{home};
  std::deque<int> queue{home};
  while (!queue.empty()) {
    int s = queue.front();
    queue.pop_front();
    std::vector<int> next;
    for (const auto &[key, target] : transitions)
      if (key.first == s)
        next.push_back(target);
    if (auto it = back_map.find(s); it != back_map.end())
      next.push_back(it->second);
    for (int t : next)
      if (seen.insert(t).second)
        queue.push_back(t);
  }
  if (seen.size() != ids.size())
    invalid(std::to_string(ids.size() - seen.size()) + " screen(s) unreachable from home");
}

json to_json(const AppModel &m) {
  json screens = json::array();
  for (const auto &s : m.screens) {
    json elements = json::array();
    for (const auto &e : s.elements)
      elements.push_back(
          {{"id", e.element_id}, {"bounds", bounds_json(e.bounds)}, {"clickable", e.clickable}, {"text", e.text}});
    screens.push_back({{"id", s.screen_id}, {"description", s.description}, {"elements", std::move(elements)}});
  }
  json transitions = json::array();
  for (const auto &[key, target] : m.transitions)
    transitions.push_back({{"screen", key.first}, {"element", key.second}, {"target", target}});
  json back = json::array();
  for (const auto &[from, to] : m.back_map)
    back.push_back({{"screen", from}, {"target", to}});
  return json{{"app_description", m.app_description},
              {"screen_size", {m.width, m.height}},
              {"home", m.home},
              {"screens", std::move(screens)},
              {"transitions", std::move(transitions)},
              {"back", std::move(back)}};
}

AppModel app_model_from_json(const json &doc) {
  try {
    AppModel m;
    m.app_description = doc.value("app_description", std::string());
    if (auto size = doc.find("screen_size"); size != doc.end()) {
      m.width = (*size).at(0).get<int>();
      m.height = (*size).at(1).get<int>();
    }
    m.home = doc.at("home").get<int>();
    for (const auto &s : doc.at("screens")) {
      Screen screen;
      screen.screen_id = s.at("id").get<int>();
      screen.description = s.value("description", std::string());
      for (const auto &e : s.value("elements", json::array())) {
        Element el;
        el.element_id = e.at("id").get<std::string>();
        el.bounds = bounds_from(e.at("bounds"));
        el.clickable = e.value("clickable", false);
        el.text = e.value("text", std::string());
        screen.elements.push_back(std::move(el));
      }
      m.screens.push_back(std::move(screen));
    }
    for (const auto &t : doc.value("transitions", json::array()))
      m.transitions[{t.at("screen").get<int>(), t.at("element").get<std::string>()}] = t.at("target").get<int>();
    for (const auto &b : doc.value("back", json::array()))
      m.back_map[b.at("screen").get<int>()] = b.at("target").get<int>();
    m.validate();
    return m;
  } catch (const json::exception &e) {
    invalid(e.what());
  }
}

AppModel load_app_model(const fs::path &path) { return app_model_from_json(read_json(path)); }

AppModel random_app_model(std::uint64_t seed, int n_screens, int width, int height) {
  if (n_screens < 1 || n_screens > 200)
    invalid("random models support 1..200 screens");
  static const char *kinds[] = {"Login",   "Settings", "Profile", "Search",  "Cart",    "Checkout", "Feed",
                                "Detail",  "Gallery",  "Inbox",   "Chat",    "Map",     "Calendar", "Player",
                                "Library", "Help",     "About",   "Billing", "Friends", "Alerts"};
  static const char *apps[] = {"shopping", "social", "travel", "music", "finance", "health"};
  constexpr int kMaxButtons = 8;

  std::mt19937_64 rng(seed);
  auto below = [&](std::uint64_t n) { return static_cast<int>(rng() % n); };

  AppModel m;
  m.width = width;
  m.height = height;
  m.home = 0;
  m.app_description = std::string("A ") + apps[below(std::size(apps))] + " app with " + std::to_string(n_screens) +
                      " screens (synthetic #" + std::to_string(seed) + ")";

  auto scale_x = [&](int x) { return x * width / 144; };
  auto scale_y = [&](int y) { return y * height / 256; };

  std::vector<int> buttons(static_cast<std::size_t>(n_screens));
  for (int i = 0; i < n_screens; ++i) {
    Screen s;
    s.screen_id = i;
    s.description = std::string(kinds[i % std::size(kinds)]) + " page " + std::to_string(i);
    Element title;
    title.element_id = "title";
    title.bounds = {scale_x(8), scale_y(8), scale_x(136), scale_y(20)};
    title.text = s.description;
    s.elements.push_back(std::move(title));
    m.screens.push_back(std::move(s));
    buttons[static_cast<std::size_t>(i)] = n_screens == 1 ? 0 : 2 + below(4);
  }

  // Spanning tree so every screen is reachable; back returns to the tree parent.
  std::vector<std::vector<int>> targets(static_cast<std::size_t>(n_screens));
  for (int i = 1; i < n_screens; ++i) {
    int parent = below(static_cast<std::uint64_t>(i));
    for (int probe = 0; probe < i && static_cast<int>(targets[static_cast<std::size_t>(parent)].size()) >= kMaxButtons;
         ++probe)
      parent = (parent + 1) % i;
    targets[static_cast<std::size_t>(parent)].push_back(i);
    m.back_map[i] = parent;
  }
  for (int i = 0; i < n_screens; ++i) {
    auto &t = targets[static_cast<std::size_t>(i)];
    int want = std::min(kMaxButtons, std::max(buttons[static_cast<std::size_t>(i)], static_cast<int>(t.size())));
    while (n_screens > 1 && static_cast<int>(t.size()) < want) {
      int target = below(static_cast<std::uint64_t>(n_screens - 1));
      if (target >= i)
        ++target; // never a self-transition
      t.push_back(target);
    }
    auto &screen = m.screens[static_cast<std::size_t>(i)];
    for (std::size_t j = 0; j < t.size(); ++j) {
      Element b;
      b.element_id = "btn" + std::to_string(j);
      int top = 40 + 24 * static_cast<int>(j);
      b.bounds = {scale_x(20), scale_y(top), scale_x(124), scale_y(top + 10)};
      b.clickable = true;
      b.text = "Open " + m.screens[static_cast<std::size_t>(t[j])].description;
      screen.elements.push_back(b);
      m.transitions[{i, b.element_id}] = t[j];
    }
  }
  m.validate();
  return m;
}

tasks::AppGroundTruth ground_truth(const AppModel &model) { return {model.app_description}; }

PolicyKind policy_from_name(std::string_view name) {
  if (name == "dfs")
    return PolicyKind::dfs;
  if (name == "random")
    return PolicyKind::random;
  throw Error(Errc::invalid_config, "unknown exploration policy '" + std::string(name) + "'");
}

vh::ViewHierarchy screen_vh(const AppModel &model, int screen_id) {
  const auto &s = model.screen(screen_id);
  vh::ViewHierarchy out;
  out.screen_width = model.width;
  out.screen_height = model.height;
  out.root.class_name = "android.widget.FrameLayout";
  out.root.resource_id = resource_id(screen_id, "root");
  out.root.bounds = {0, 0, model.width, model.height};
  for (const auto &e : s.elements) {
    vh::VhNode n;
    n.class_name = e.clickable ? "android.widget.Button" : "android.widget.TextView";
    n.resource_id = resource_id(screen_id, e.element_id);
    if (!e.text.empty())
      n.text = e.text;
    n.bounds = e.bounds;
    n.clickable = e.clickable;
    out.root.children.push_back(std::move(n));
  }
  return out;
}

SimTrace explore(const AppModel &model, const ExplorationPolicy &policy) {
  model.validate();
  if (policy.max_steps < 1)
    throw Error(Errc::invalid_config, "max_steps must be >= 1");
  SimTrace trace;
  int cur = model.home;

  auto emit = [&](const Action &a, int next) {
    SimEvent ev;
    ev.pre_screen = cur;
    ev.post_screen = next;
    ev.action = a;
    ev.pre_vh = screen_vh(model, cur);
    ev.post_vh = screen_vh(model, next);
    trace.push_back(std::move(ev));
    cur = next;
  };
  auto back_of = [&](int s) -> std::optional<int> {
    auto it = model.back_map.find(s);
    return it == model.back_map.end() ? std::nullopt : std::optional<int>(it->second);
  };

  if (policy.kind == PolicyKind::random) {
    std::mt19937_64 rng(policy.seed);
    while (static_cast<int>(trace.size()) < policy.max_steps) {
      auto options = taps(model, cur);
      auto back = back_of(cur);
      std::size_t n = options.size() + (back ? 1 : 0);
      if (n == 0)
        break;
      auto pick = static_cast<std::size_t>(rng() % n);
      if (pick < options.size())
        emit(tap_action(model, cur, options[pick].first), options[pick].second);
      else
        emit(back_action(), *back);
    }
    return trace;
  }

  std::set<std::pair<int, std::string>> tried;
  std::size_t total = 0;
  for (const auto &s : model.screens)
    total += taps(model, s.screen_id).size();

  auto untried = [&](int s) -> std::optional<std::pair<std::string, int>> {
    for (const auto &t : taps(model, s))
      if (!tried.count({s, t.first}))
        return t;
    return std::nullopt;
  };

  while (static_cast<int>(trace.size()) < policy.max_steps) {
    if (auto t = untried(cur)) {
      tried.insert({cur, t->first});
      emit(tap_action(model, cur, t->first), t->second);
      continue;
    }
    if (tried.size() == total)
      break;
    // BFS over known moves (back first, then already-tried taps) to the
    // nearest screen that still has untried elements; take its first move.
    struct Move {
      int from;
      std::optional<std::string> element; // nullopt = back
    };
    std::map<int, Move> via;
    std::deque<int> queue{cur};
    via.emplace(cur, Move{cur, std::nullopt});
    std::optional<int> goal;
    while (!queue.empty() && !goal) {
      int s = queue.front();
      queue.pop_front();
      std::vector<std::pair<std::optional<std::string>, int>> moves;
      if (auto b = back_of(s))
        moves.emplace_back(std::nullopt, *b);
      for (const auto &t : taps(model, s))
        if (tried.count({s, t.first}))
          moves.emplace_back(t.first, t.second);
      for (const auto &[element, next] : moves) {
        if (via.count(next))
          continue;
        via.emplace(next, Move{s, element});
        if (untried(next)) {
          goal = next;
          break;
        }
        queue.push_back(next);
      }
    }
    if (!goal)
      break;
    int step = *goal;
    while (via.at(step).from != cur)
      step = via.at(step).from;
    const auto &move = via.at(step);
    if (move.element)
      emit(tap_action(model, cur, *move.element), step);
    else
      emit(back_action(), step);
  }
  return trace;
}

std::vector<int> gt_node_screens(const AppModel &model, const SimTrace &trace) {
  std::vector<int> order{model.home};
  auto add = [&](int s) {
    if (std::find(order.begin(), order.end(), s) == order.end())
      order.push_back(s);
  };
  for (const auto &ev : trace) {
    add(ev.pre_screen);
    add(ev.post_screen);
  }
  return order;
}

graph::GuiTransitionGraph gt_graph(const AppModel &model, const SimTrace &trace) {
  auto screens = gt_node_screens(model, trace);
  std::map<int, graph::NodeId> node_of;
  graph::GuiTransitionGraph g;
  for (std::size_t i = 0; i < screens.size(); ++i) {
    cluster::ScreenNode n;
    n.node_id = static_cast<int>(i);
    n.description = model.screen(screens[i]).description;
    n.representative = static_cast<std::size_t>(screens[i]);
    n.members = {static_cast<std::size_t>(screens[i])};
    g.nodes.push_back(std::move(n));
    node_of[screens[i]] = static_cast<graph::NodeId>(i);
  }
  g.home = 0;
  for (std::size_t i = 0; i < trace.size(); ++i) {
    graph::Edge e;
    e.src = node_of.at(trace[i].pre_screen);
    e.dst = node_of.at(trace[i].post_screen);
    e.action = trace[i].action;
    e.first_step = i;
    g.edges.push_back(std::move(e));
  }
  graph::normalize_edges(g);
  g.validate();
  return g;
}

void RenderConfig::validate() const {
  const keyframe::SegmenterConfig defaults;
  if (width < 1 || height < 1)
    throw Error(Errc::invalid_config, "render size must be positive");
  if (static_run < defaults.min_static + 1)
    throw Error(Errc::invalid_config, "static_run must be >= min_static + 1");
  if (transition_run < 1)
    throw Error(Errc::invalid_config, "transition_run must be >= 1");
  if (!(fps > 0.0))
    throw Error(Errc::invalid_config, "fps must be positive");
}

std::uint8_t background_shade(int screen_id) {
  // 53 is coprime with 200, so ids 0..199 map to distinct shades.
  return static_cast<std::uint8_t>((static_cast<long long>(screen_id) * 53) % 200);
}

ingest::LumaPlane render_screen(const AppModel &model, int screen_id, const RenderConfig &cfg) {
  const auto &s = model.screen(screen_id);
  const std::uint8_t shade = background_shade(screen_id);
  // A 16x16 grid of tiles carries the Walsh-Hadamard codeword of the screen
  // id: any two ids below 256 differ on exactly half the tiles, which keeps
  // transitions between distinct screens well above the Y-Diff thresholds.
  const unsigned code = static_cast<unsigned>(screen_id) & 0xffu;
  ingest::LumaPlane plane(cfg.width, cfg.height);
  for (int y = 0; y < cfg.height; ++y) {
    const unsigned ty = static_cast<unsigned>(y * 16 / cfg.height);
    for (int x = 0; x < cfg.width; ++x) {
      const unsigned tx = static_cast<unsigned>(x * 16 / cfg.width);
      const bool bit = std::popcount(code & (ty * 16 + tx)) & 1;
      plane.at(x, y) = bit ? 255 : shade;
    }
  }
  for (const auto &e : s.elements) {
    const int l = std::clamp(e.bounds.left * cfg.width / model.width, 0, cfg.width);
    const int r = std::clamp(e.bounds.right * cfg.width / model.width, 0, cfg.width);
    const int t = std::clamp(e.bounds.top * cfg.height / model.height, 0, cfg.height);
    const int b = std::clamp(e.bounds.bottom * cfg.height / model.height, 0, cfg.height);
    const std::uint8_t fill = e.clickable ? 24 : 232;
    for (int y = t; y < b; ++y)
      for (int x = l; x < r; ++x)
        plane.at(x, y) = fill;
  }
  return plane;
}

sequence::Trace to_trace(const SimTrace &trace, const std::vector<std::size_t> &frames) {
  sequence::Trace out;
  for (std::size_t i = 0; i < trace.size(); ++i) {
    sequence::TraceEvent ev;
    ev.frame = frames.at(i);
    ev.action = trace[i].action;
    ev.pre_vh = trace[i].pre_vh;
    ev.post_vh = trace[i].post_vh;
    ev.pre_screen = std::to_string(trace[i].pre_screen);
    ev.post_screen = std::to_string(trace[i].post_screen);
    out.push_back(std::move(ev));
  }
  return out;
}

Rendering render(const AppModel &model, const SimTrace &trace, const RenderConfig &cfg) {
  cfg.validate();
  for (std::size_t i = 1; i < trace.size(); ++i)
    if (trace[i].pre_screen != trace[i - 1].post_screen)
      throw Error(Errc::invalid_model, "trace is not contiguous at event " + std::to_string(i));

  Rendering out;
  out.fps = cfg.fps;
  std::map<int, ingest::LumaPlane> cache;
  auto settled = [&](int screen) -> const ingest::LumaPlane & {
    auto it = cache.find(screen);
    if (it == cache.end())
      it = cache.emplace(screen, render_screen(model, screen, cfg)).first;
    return it->second;
  };

  const int first = trace.empty() ? model.home : trace.front().pre_screen;
  for (int k = 0; k < cfg.static_run; ++k)
    out.frames.push_back(settled(first));

  std::vector<std::size_t> event_frames;
  const int steps = cfg.transition_run + 1;
  for (const auto &ev : trace) {
    event_frames.push_back(out.frames.size());
    const auto &a = settled(ev.pre_screen);
    const auto &b = settled(ev.post_screen);
    // Progressive blend; for an odd transition_run the middle frame is 50/50.
    for (int k = 1; k <= cfg.transition_run; ++k) {
      ingest::LumaPlane blend(cfg.width, cfg.height);
      for (std::size_t p = 0; p < blend.samples.size(); ++p)
        blend.samples[p] =
            static_cast<std::uint8_t>((a.samples[p] * (steps - k) + b.samples[p] * k + steps / 2) / steps);
      out.frames.push_back(std::move(blend));
    }
    for (int k = 0; k < cfg.static_run; ++k)
      out.frames.push_back(b);
  }
  out.trace = to_trace(trace, event_frames);
  return out;
}

CorpusPaths write_corpus(const fs::path &dir, const AppModel &model, const SimTrace &trace,
                         const CorpusOptions &opts) {
  auto rendering = render(model, trace, opts.render);
  fs::create_directories(dir / "frames");

  ingest::FrameManifest manifest;
  manifest.source_id = opts.source_id;
  manifest.fps = rendering.fps;
  manifest.width = opts.render.width;
  manifest.height = opts.render.height;
  for (std::size_t i = 0; i < rendering.frames.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "frame_%05zu.pgm", i);
    auto path = dir / "frames" / name;
    ingest::write_pgm(path, rendering.frames[i]);
    manifest.frame_paths.push_back(path);
  }

  CorpusPaths paths{dir / "manifest.json", dir / "trace.jsonl", dir / "appmodel.json", dir / "gt_graph.json",
                    dir / "qa.jsonl"};
  write_json(paths.manifest, ingest::manifest_to_json(manifest, dir));
  write_text_atomic(paths.trace, sequence::trace_to_jsonl(rendering.trace));
  write_json(paths.app_model, to_json(model));
  auto gt = gt_graph(model, trace);
  write_json(paths.gt_graph, graph::export_json(gt));

  tasks::QaCounts counts;
  for (auto t : tasks::kAllTasks)
    counts[t] = opts.qa_per_task;
  auto qa = tasks::generate_available_qa(gt, ground_truth(model), counts, opts.qa_seed, opts.source_id);
  write_text_atomic(paths.qa, tasks::qa_to_jsonl(qa));
  return paths;
}

} // namespace xplore::simulate
