#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "xplore/action.hpp"
#include "xplore/graph.hpp"
#include "xplore/modelclient.hpp"

namespace xplore::tasks {

enum class Task { overview, page_analysis, usage, action_recall, seq_verify };

inline constexpr std::array<Task, 5> kAllTasks = {Task::overview, Task::page_analysis, Task::usage,
                                                  Task::action_recall, Task::seq_verify};
inline constexpr int kOptionCount = 5;

std::string_view task_name(Task t) noexcept;
Task task_from_name(std::string_view name);

struct QaItem {
  Task task = Task::overview;
  std::string question;
  std::array<std::string, kOptionCount> options;
  int gt_index = 0;
  std::string source_id;
  json meta = json::object();

  bool operator==(const QaItem &) const = default;
};

struct PredictionRecord {
  QaItem item;
  std::optional<int> chosen_index; // nullopt = abstain
  std::string raw_reply;

  bool correct() const noexcept { return chosen_index && *chosen_index == item.gt_index; }
};

json to_json(const QaItem &item);
// Throws Errc::malformed_qa, Errc::bad_option_count or Errc::bad_gt_index.
QaItem qa_item_from_json(const json &doc);
std::vector<QaItem> parse_qa(std::string_view jsonl);
std::vector<QaItem> load_qa(const std::filesystem::path &path);
std::string qa_to_jsonl(const std::vector<QaItem> &items);

json to_json(const PredictionRecord &pred);
PredictionRecord prediction_from_json(const json &doc);
std::vector<PredictionRecord> parse_predictions(std::string_view jsonl);
std::string predictions_to_jsonl(const std::vector<PredictionRecord> &preds);

// Context lines, the question and the options lettered A-E.
std::string compose_prompt(const QaItem &item, const graph::PromptContext &ctx);

// First standalone capital letter A-E in the reply; nullopt when none.
std::optional<int> parse_choice(std::string_view reply);

PredictionRecord answer_item(const QaItem &item, const graph::PromptContext &ctx, model::ModelClient &client);

// qa_answer fixtures that reply with each item's correct letter.
std::vector<model::Fixture> oracle_fixtures(const std::vector<QaItem> &items);

struct TaskScore {
  std::size_t correct = 0;
  std::size_t total = 0;
  double accuracy = 0.0;
};

struct TaskMetrics {
  std::map<Task, TaskScore> per_task;
  double macro = 0.0; // unweighted mean over tasks present
  std::size_t correct = 0;
  std::size_t total = 0;
};

// Abstentions count as wrong.
TaskMetrics score_mc(const std::vector<PredictionRecord> &preds);
json to_json(const TaskMetrics &m);

struct AutomationStep {
  ElementRef gt_element;
  ActionKind gt_operation = ActionKind::tap;
  std::optional<std::string> gt_params;
  std::optional<ElementRef> pred_element;
  std::optional<ActionKind> pred_operation;
};

struct AutomationScores {
  double ele_acc = 0.0;
  double op_acc = 0.0;
  double step_sr = 0.0;
  std::size_t steps = 0;
};

double iou(const vh::Bounds &a, const vh::Bounds &b);

// Resource ids decide when both sides carry one; otherwise bounds must
// overlap with IoU >= iou_threshold.
bool element_matches(const ElementRef &gt, const ElementRef &pred, double iou_threshold = 0.5);

AutomationScores score_automation(const std::vector<AutomationStep> &steps, double iou_threshold = 0.5);
json to_json(const AutomationScores &s);

// Facts about the app that the graph alone does not carry.
struct AppGroundTruth {
  std::string app_description;
};

using QaCounts = std::map<Task, int>;

// Five-way items grounded in a ground-truth graph. Distractors and answer
// positions come from a generator seeded with `seed`, so output is
// reproducible. Errc::insufficient_material when a requested task cannot be
// built from this graph.
std::vector<QaItem> generate_qa_from_graph(const graph::GuiTransitionGraph &g, const AppGroundTruth &gt,
                                           const QaCounts &counts, std::uint64_t seed,
                                           const std::string &source_id = "");

// Same, but tasks without enough material are skipped instead of failing.
std::vector<QaItem> generate_available_qa(const graph::GuiTransitionGraph &g, const AppGroundTruth &gt,
                                          const QaCounts &counts, std::uint64_t seed,
                                          const std::string &source_id = "");

} // namespace xplore::tasks
