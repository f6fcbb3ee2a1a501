#include "xplore/tasks.hpp"

#include <algorithm>
#include <cctype>
#include <random>
#include <set>
#include <sstream>

#include "xplore/error.hpp"

namespace xplore::tasks {

std::string_view task_name(Task t) noexcept {
  switch (t) {
  case Task::overview: return "overview";
  case Task::page_analysis: return "page_analysis";
  case Task::usage: return "usage";
  case Task::action_recall: return "action_recall";
  case Task::seq_verify: return "seq_verify";
  }
  return "overview";
}

Task task_from_name(std::string_view name) {
  for (auto t : kAllTasks)
    if (task_name(t) == name)
      return t;
  throw Error(Errc::malformed_qa, "unknown task '" + std::string(name) + "'");
}

json to_json(const QaItem &item) {
  return json{{"task", task_name(item.task)}, {"question", item.question}, {"options", item.options},
              {"gt", item.gt_index},          {"source_id", item.source_id}, {"meta", item.meta}};
}

QaItem qa_item_from_json(const json &doc) {
  if (!doc.is_object())
    throw Error(Errc::malformed_qa, "qa item must be an object");
  QaItem item;
  try {
    item.task = task_from_name(doc.at("task").get<std::string>());
    item.question = doc.at("question").get<std::string>();
    item.source_id = doc.value("source_id", std::string());
    item.meta = doc.value("meta", json::object());
    if (item.meta.is_null())
      item.meta = json::object();
  } catch (const json::exception &e) {
    throw Error(Errc::malformed_qa, std::string("qa item: ") + e.what());
  }
  auto opts = doc.find("options");
  if (opts == doc.end() || !opts->is_array())
    throw Error(Errc::malformed_qa, "qa item needs an options array");
  if (opts->size() != kOptionCount)
    throw Error(Errc::bad_option_count,
                "expected " + std::to_string(kOptionCount) + " options, got " + std::to_string(opts->size()));
  for (std::size_t i = 0; i < kOptionCount; ++i) {
    if (!(*opts)[i].is_string())
      throw Error(Errc::malformed_qa, "options must be strings");
    item.options[i] = (*opts)[i].get<std::string>();
  }
  std::set<std::string> distinct(item.options.begin(), item.options.end());
  if (distinct.size() != kOptionCount)
    throw Error(Errc::malformed_qa, "duplicate options in: " + item.question);
  auto gt = doc.find("gt");
  if (gt == doc.end() || !gt->is_number_integer())
    throw Error(Errc::malformed_qa, "qa item needs an integer gt");
  auto g = gt->get<long long>();
  if (g < 0 || g >= kOptionCount)
    throw Error(Errc::bad_gt_index, "gt index " + std::to_string(g) + " outside [0, 4]");
  item.gt_index = static_cast<int>(g);
  return item;
}

namespace {

template <typename F> auto parse_lines(std::string_view jsonl, F &&parse_one) {
  std::vector<decltype(parse_one(json()))> out;
  std::istringstream in{std::string(jsonl)};
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos)
      continue;
    json doc;
    try {
      doc = json::parse(line);
    } catch (const json::parse_error &e) {
      throw Error(Errc::malformed_qa, "line " + std::to_string(lineno) + ": " + e.what());
    }
    out.push_back(parse_one(doc));
  }
  return out;
}

} // namespace

std::vector<QaItem> parse_qa(std::string_view jsonl) { return parse_lines(jsonl, qa_item_from_json); }

std::vector<QaItem> load_qa(const std::filesystem::path &path) { return parse_qa(read_text(path)); }

std::string qa_to_jsonl(const std::vector<QaItem> &items) {
  std::string out;
  for (const auto &i : items)
    out += to_json(i).dump() + "\n";
  return out;
}

json to_json(const PredictionRecord &pred) {
  auto doc = to_json(pred.item);
  doc["chosen"] = pred.chosen_index ? json(*pred.chosen_index) : json(nullptr);
  doc["raw_reply"] = pred.raw_reply;
  return doc;
}

PredictionRecord prediction_from_json(const json &doc) {
  PredictionRecord p;
  p.item = qa_item_from_json(doc);
  if (auto c = doc.find("chosen"); c != doc.end() && !c->is_null()) {
    if (!c->is_number_integer() || c->get<long long>() < 0 || c->get<long long>() >= kOptionCount)
      throw Error(Errc::bad_gt_index, "chosen index outside [0, 4]");
    p.chosen_index = c->get<int>();
  }
  p.raw_reply = doc.value("raw_reply", std::string());
  return p;
}

std::vector<PredictionRecord> parse_predictions(std::string_view jsonl) {
  return parse_lines(jsonl, prediction_from_json);
}

std::string predictions_to_jsonl(const std::vector<PredictionRecord> &preds) {
  std::string out;
  for (const auto &p : preds)
    out += to_json(p).dump() + "\n";
  return out;
}

std::string compose_prompt(const QaItem &item, const graph::PromptContext &ctx) {
  std::string out = "GUI transition graph of the app.\nNodes:\n";
  for (const auto &l : ctx.node_lines)
    out += l + "\n";
  out += "Edges:\n";
  for (const auto &l : ctx.edge_lines)
    out += l + "\n";
  out += "\nQuestion: " + item.question + "\n";
  for (int i = 0; i < kOptionCount; ++i)
    out += std::string(1, static_cast<char>('A' + i)) + ". " + item.options[static_cast<std::size_t>(i)] + "\n";
  out += "Answer with a single letter (A-E).\n";
  return out;
}

std::optional<int> parse_choice(std::string_view reply) {
  auto alpha = [](char c) { return std::isalpha(static_cast<unsigned char>(c)) != 0; };
  for (std::size_t i = 0; i < reply.size(); ++i) {
    char c = reply[i];
    if (c < 'A' || c > 'E')
      continue;
    bool left_ok = i == 0 || !alpha(reply[i - 1]);
    bool right_ok = i + 1 == reply.size() || !alpha(reply[i + 1]);
    if (left_ok && right_ok)
      return c - 'A';
  }
  return std::nullopt;
}

PredictionRecord answer_item(const QaItem &item, const graph::PromptContext &ctx, model::ModelClient &client) {
  json payload{{"task", task_name(item.task)},
               {"question", item.question},
               {"options", item.options},
               {"prompt", compose_prompt(item, ctx)}};
  model::InferenceResponse res;
  try {
    res = client.invoke(model::Endpoint::qa_answer, std::move(payload));
  } catch (const Error &e) {
    if (is_backend_error(e.code()))
      throw Error(Errc::client_unavailable, std::string("qa_answer failed: ") + e.what());
    throw;
  }
  PredictionRecord p;
  p.item = item;
  p.raw_reply = res.body["reply"].get<std::string>();
  p.chosen_index = parse_choice(p.raw_reply);
  return p;
}

std::vector<model::Fixture> oracle_fixtures(const std::vector<QaItem> &items) {
  std::vector<model::Fixture> out;
  for (const auto &item : items) {
    model::Fixture fx;
    fx.endpoint = model::Endpoint::qa_answer;
    fx.match = json{{"question", item.question}, {"options", item.options}};
    fx.body = json{{"reply", std::string(1, static_cast<char>('A' + item.gt_index))}};
    out.push_back(std::move(fx));
  }
  return out;
}

TaskMetrics score_mc(const std::vector<PredictionRecord> &preds) {
  TaskMetrics m;
  for (const auto &p : preds) {
    auto &s = m.per_task[p.item.task];
    ++s.total;
    ++m.total;
    if (p.correct()) {
      ++s.correct;
      ++m.correct;
    }
  }
  double sum = 0.0;
  for (auto &[_, s] : m.per_task) {
    s.accuracy = s.total ? static_cast<double>(s.correct) / static_cast<double>(s.total) : 0.0;
    sum += s.accuracy;
  }
  m.macro = m.per_task.empty() ? 0.0 : sum / static_cast<double>(m.per_task.size());
  return m;
}

json to_json(const TaskMetrics &m) {
  json per = json::object();
  for (const auto &[task, s] : m.per_task)
    per[std::string(task_name(task))] = {{"correct", s.correct}, {"total", s.total}, {"accuracy", s.accuracy}};
  return json{{"tasks", std::move(per)}, {"macro", m.macro}, {"correct", m.correct}, {"total", m.total}};
}

double iou(const vh::Bounds &a, const vh::Bounds &b) {
  const long long ix = std::max(0, std::min(a.right, b.right) - std::max(a.left, b.left));
  const long long iy = std::max(0, std::min(a.bottom, b.bottom) - std::max(a.top, b.top));
  const long long inter = ix * iy;
  const long long uni = a.area() + b.area() - inter;
  return uni > 0 ? static_cast<double>(inter) / static_cast<double>(uni) : 0.0;
}

bool element_matches(const ElementRef &gt, const ElementRef &pred, double iou_threshold) {
  if (gt.resource_id && pred.resource_id)
    return *gt.resource_id == *pred.resource_id;
  if (gt.bounds && pred.bounds)
    return iou(*gt.bounds, *pred.bounds) >= iou_threshold;
  return false;
}

AutomationScores score_automation(const std::vector<AutomationStep> &steps, double iou_threshold) {
  AutomationScores s;
  s.steps = steps.size();
  if (steps.empty())
    return s;
  std::size_t ele = 0, op = 0, both = 0;
  for (const auto &st : steps) {
    bool e = st.pred_element && element_matches(st.gt_element, *st.pred_element, iou_threshold);
    bool o = st.pred_operation && *st.pred_operation == st.gt_operation;
    ele += e;
    op += o;
    both += e && o;
  }
  const auto n = static_cast<double>(steps.size());
  s.ele_acc = static_cast<double>(ele) / n;
  s.op_acc = static_cast<double>(op) / n;
  s.step_sr = static_cast<double>(both) / n;
  return s;
}

json to_json(const AutomationScores &s) {
  return json{{"ele_acc", s.ele_acc}, {"op_acc", s.op_acc}, {"step_sr", s.step_sr}, {"steps", s.steps}};
}

// ---------------------------------------------------------------------------
// QA generation

namespace {

const std::vector<std::string> &app_description_pool() {
  static const std::vector<std::string> pool = {
      "A weather forecast app with hourly and weekly views",
      "A recipe browser with saved favourites and shopping lists",
      "A fitness tracker that logs workouts and daily steps",
      "A banking app for balances, transfers and card controls",
      "A podcast player with subscriptions and download queue",
      "A note-taking app with folders, tags and search",
      "A ride-hailing app for booking and tracking trips",
      "A language-learning app with lessons and quizzes",
      "A photo gallery with albums, editing and sharing",
      "A news reader with topic feeds and bookmarks",
      "A food delivery app with restaurant menus and cart",
      "A calendar app for events, reminders and invitations",
  };
  return pool;
}

const std::vector<std::string> &screen_description_pool() {
  static const std::vector<std::string> pool = {
      "Sign-in form asking for email and password", "Settings list with toggles for notifications",
      "Search page with a query box and recent searches", "Shopping cart listing selected items",
      "User profile showing avatar and account details", "Help centre with frequently asked questions",
      "Onboarding carousel introducing the app",          "Map view centred on the current location",
  };
  return pool;
}

class Sampler {
public:
  explicit Sampler(std::uint64_t seed) : rng_(seed) {}

  std::size_t below(std::size_t n) { return n == 0 ? 0 : static_cast<std::size_t>(rng_() % n); }

  template <typename T> void shuffle(std::vector<T> &v) {
    for (std::size_t i = v.size(); i > 1; --i)
      std::swap(v[i - 1], v[below(i)]);
  }

  // Up to k distinct candidates not equal to `exclude`, in sampled order.
  std::vector<std::string> pick_distinct(std::vector<std::string> candidates, const std::string &exclude,
                                         std::size_t k) {
    std::sort(candidates.begin(), candidates.end());
    candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());
    candidates.erase(std::remove(candidates.begin(), candidates.end(), exclude), candidates.end());
    shuffle(candidates);
    if (candidates.size() > k)
      candidates.resize(k);
    return candidates;
  }

private:
  std::mt19937_64 rng_;
};

[[noreturn]] void insufficient(Task t, const std::string &why) {
  throw Error(Errc::insufficient_material, std::string(task_name(t)) + ": " + why);
}

QaItem place(Task task, std::string question, const std::string &correct, const std::vector<std::string> &distractors,
             Sampler &rng, const std::string &source_id, json meta) {
  if (distractors.size() < kOptionCount - 1)
    insufficient(task, "not enough distinct distractors");
  QaItem item;
  item.task = task;
  item.question = std::move(question);
  item.source_id = source_id;
  item.gt_index = static_cast<int>(rng.below(kOptionCount));
  std::size_t d = 0;
  for (int i = 0; i < kOptionCount; ++i)
    item.options[static_cast<std::size_t>(i)] = i == item.gt_index ? correct : distractors[d++];
  item.meta = std::move(meta);
  return item;
}

std::string join_actions(const std::vector<Action> &actions) {
  if (actions.empty())
    return "(no operation)";
  std::string out;
  for (std::size_t i = 0; i < actions.size(); ++i) {
    if (i)
      out += " -> ";
    out += actions[i].describe();
  }
  return out;
}

std::string quoted(const std::string &s) { return "'" + s + "'"; }

std::string edge_phrase(const graph::GuiTransitionGraph &g, const graph::Edge &e) {
  return e.action.describe() + " on " + quoted(g.nodes[static_cast<std::size_t>(e.src)].description) + " to " +
         quoted(g.nodes[static_cast<std::size_t>(e.dst)].description);
}

std::vector<graph::NodeId> usage_targets(const graph::GuiTransitionGraph &g) {
  std::vector<graph::NodeId> out;
  if (g.nodes.size() < 2)
    return out;
  graph::ReachabilityIndex reach(g);
  for (std::size_t n = 0; n < g.nodes.size(); ++n)
    if (static_cast<graph::NodeId>(n) != g.home && reach.reaches(g.home, static_cast<graph::NodeId>(n)))
      out.push_back(static_cast<graph::NodeId>(n));
  return out;
}

QaItem make_overview(const graph::GuiTransitionGraph &, const AppGroundTruth &gt, Sampler &rng,
                     const std::string &source_id) {
  if (gt.app_description.empty())
    insufficient(Task::overview, "no app description");
  auto distractors = rng.pick_distinct(app_description_pool(), gt.app_description, kOptionCount - 1);
  return place(Task::overview, "Which description best summarizes this app?", gt.app_description, distractors, rng,
               source_id, json::object());
}

QaItem make_page_analysis(const graph::GuiTransitionGraph &g, Sampler &rng, const std::string &source_id) {
  if (g.nodes.empty())
    insufficient(Task::page_analysis, "graph has no nodes");
  std::vector<graph::NodeId> candidates = usage_targets(g);
  candidates.push_back(g.home);
  std::sort(candidates.begin(), candidates.end());
  auto node = candidates[rng.below(candidates.size())];
  const auto &correct = g.nodes[static_cast<std::size_t>(node)].description;

  std::vector<std::string> others;
  for (const auto &n : g.nodes)
    others.push_back(n.description);
  auto distractors = rng.pick_distinct(others, correct, kOptionCount - 1);
  if (distractors.size() < kOptionCount - 1) {
    auto extra = rng.pick_distinct(screen_description_pool(), correct, kOptionCount - 1);
    for (auto &e : extra)
      if (distractors.size() < kOptionCount - 1 && std::find(distractors.begin(), distractors.end(), e) == distractors.end())
        distractors.push_back(e);
  }
  std::string where = node == g.home ? std::string("the home screen")
                                     : "the screen reached from home by " +
                                           join_actions(graph::usage_path(g, node).actions);
  return place(Task::page_analysis, "What is the function of " + where + "?", correct, distractors, rng, source_id,
               json{{"node", node}});
}

QaItem make_usage(const graph::GuiTransitionGraph &g, Sampler &rng, const std::string &source_id) {
  auto targets = usage_targets(g);
  if (targets.empty())
    insufficient(Task::usage, "no screen other than home is reachable");
  auto target = targets[rng.below(targets.size())];
  auto path = graph::usage_path(g, target);
  const auto correct = join_actions(path.actions);

  std::vector<Action> all;
  for (const auto &e : g.edges)
    all.push_back(e.action);

  std::vector<std::string> variants;
  auto add = [&](const std::vector<Action> &seq) {
    auto s = join_actions(seq);
    if (s != correct && std::find(variants.begin(), variants.end(), s) == variants.end())
      variants.push_back(std::move(s));
  };
  auto reversed = path.actions;
  std::reverse(reversed.begin(), reversed.end());
  add(reversed);
  if (path.actions.size() > 1)
    add({path.actions.begin(), path.actions.end() - 1});
  for (int attempt = 0; attempt < 8 && !all.empty(); ++attempt) {
    auto changed = path.actions;
    changed[rng.below(changed.size())] = all[rng.below(all.size())];
    add(changed);
    auto longer = path.actions;
    longer.push_back(all[rng.below(all.size())]);
    add(longer);
  }
  // Guaranteed-distinct fallbacks: repeat the final operation k extra times.
  for (std::size_t k = 1; variants.size() < kOptionCount - 1; ++k) {
    auto repeated = path.actions;
    repeated.insert(repeated.end(), k, path.actions.back());
    add(repeated);
  }
  rng.shuffle(variants);
  variants.resize(kOptionCount - 1);
  const auto &desc = g.nodes[static_cast<std::size_t>(target)].description;
  return place(Task::usage, "Starting from the home screen, which operation sequence opens " + quoted(desc) + "?",
               correct, variants, rng, source_id,
               json{{"target", target}, {"path_length", path.actions.size()}, {"path_nodes", path.nodes}});
}

QaItem make_action_recall(const graph::GuiTransitionGraph &g, Sampler &rng, const std::string &source_id) {
  if (g.edges.size() < kOptionCount)
    insufficient(Task::action_recall, "needs at least 5 distinct operations");
  auto e = rng.below(g.edges.size());
  const auto &edge = g.edges[e];
  std::vector<std::string> phrases;
  for (const auto &other : g.edges)
    phrases.push_back(edge_phrase(g, other));
  const auto correct = edge_phrase(g, edge);
  auto distractors = rng.pick_distinct(phrases, correct, kOptionCount - 1);
  return place(Task::action_recall,
               "Which operation was performed at step " + std::to_string(edge.first_step + 1) + " of the exploration?",
               correct, distractors, rng, source_id, json{{"step", edge.first_step}, {"edge", e}});
}

QaItem make_seq_verify(const graph::GuiTransitionGraph &g, const std::vector<graph::PrecedenceTriple> &triples,
                       Sampler &rng, const std::string &source_id) {
  if (triples.empty())
    insufficient(Task::seq_verify, "graph has no precedence triples");
  const auto t = triples[rng.below(triples.size())];
  const std::array<std::size_t, 3> edges{t.a, t.b, t.c};
  std::array<std::string, 3> phrase;
  for (std::size_t i = 0; i < 3; ++i)
    phrase[i] = edge_phrase(g, g.edges[edges[i]]);
  if (phrase[0] == phrase[1] || phrase[1] == phrase[2] || phrase[0] == phrase[2]) {
    for (std::size_t i = 0; i < 3; ++i)
      phrase[i] += " [edge " + std::to_string(edges[i]) + "]";
  }

  auto render = [&](const std::array<int, 3> &perm) {
    return "1) " + phrase[static_cast<std::size_t>(perm[0])] + "; 2) " + phrase[static_cast<std::size_t>(perm[1])] +
           "; 3) " + phrase[static_cast<std::size_t>(perm[2])];
  };
  std::vector<std::array<int, 3>> wrong = {{0, 2, 1}, {1, 0, 2}, {1, 2, 0}, {2, 0, 1}, {2, 1, 0}};
  wrong.erase(wrong.begin() + static_cast<std::ptrdiff_t>(rng.below(wrong.size())));
  std::vector<std::string> distractors;
  for (const auto &p : wrong)
    distractors.push_back(render(p));

  auto item = place(Task::seq_verify, "In which order must these operations be performed?", render({0, 1, 2}),
                    distractors, rng, source_id, json::object());
  // Record the edge order behind each option so it can be checked later.
  json orders = json::array();
  std::size_t d = 0;
  for (int i = 0; i < kOptionCount; ++i) {
    std::array<int, 3> perm = i == item.gt_index ? std::array<int, 3>{0, 1, 2} : wrong[d++];
    orders.push_back({edges[static_cast<std::size_t>(perm[0])], edges[static_cast<std::size_t>(perm[1])],
                      edges[static_cast<std::size_t>(perm[2])]});
  }
  item.meta = json{{"triple", {t.a, t.b, t.c}}, {"option_orders", std::move(orders)}};
  return item;
}

std::vector<QaItem> generate(const graph::GuiTransitionGraph &g, const AppGroundTruth &gt, const QaCounts &counts,
                             std::uint64_t seed, const std::string &source_id, bool skip_insufficient) {
  g.validate();
  std::vector<QaItem> out;
  std::vector<graph::PrecedenceTriple> triples;
  bool have_triples = false;
  for (auto task : kAllTasks) {
    auto it = counts.find(task);
    if (it == counts.end() || it->second <= 0)
      continue;
    // Each task draws from its own stream so adding one task leaves the others unchanged.
    Sampler rng(seed * 1000003ULL + static_cast<std::uint64_t>(task) + 1);
    std::vector<QaItem> batch;
    try {
      for (int k = 0; k < it->second; ++k) {
        switch (task) {
        case Task::overview: batch.push_back(make_overview(g, gt, rng, source_id)); break;
        case Task::page_analysis: batch.push_back(make_page_analysis(g, rng, source_id)); break;
        case Task::usage: batch.push_back(make_usage(g, rng, source_id)); break;
        case Task::action_recall: batch.push_back(make_action_recall(g, rng, source_id)); break;
        case Task::seq_verify:
          if (!have_triples) {
            triples = graph::extract_triples(g, 4096);
            have_triples = true;
          }
          batch.push_back(make_seq_verify(g, triples, rng, source_id));
          break;
        }
      }
    } catch (const Error &e) {
      if (!skip_insufficient || e.code() != Errc::insufficient_material)
        throw;
      continue;
    }
    out.insert(out.end(), batch.begin(), batch.end());
  }
  return out;
}

} // namespace

std::vector<QaItem> generate_qa_from_graph(const graph::GuiTransitionGraph &g, const AppGroundTruth &gt,
                                           const QaCounts &counts, std::uint64_t seed, const std::string &source_id) {
  return generate(g, gt, counts, seed, source_id, false);
}

std::vector<QaItem> generate_available_qa(const graph::GuiTransitionGraph &g, const AppGroundTruth &gt,
                                          const QaCounts &counts, std::uint64_t seed, const std::string &source_id) {
  return generate(g, gt, counts, seed, source_id, true);
}

} // namespace xplore::tasks
