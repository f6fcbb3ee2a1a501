#include <CLI11.hpp>

#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>

#include "xplore/cluster.hpp"
#include "xplore/error.hpp"
#include "xplore/graph.hpp"
#include "xplore/ingest.hpp"
#include "xplore/keyframe.hpp"
#include "xplore/modelclient.hpp"
#include "xplore/pipeline.hpp"
#include "xplore/sequence.hpp"
#include "xplore/simulate.hpp"
#include "xplore/tasks.hpp"

namespace fs = std::filesystem;
using namespace xplore;

namespace {

void emit(const std::string &out, const std::string &text) {
  if (out.empty() || out == "-")
    std::cout << text;
  else
    write_text_atomic(out, text);
}

void emit_json(const std::string &out, const json &doc) { emit(out, doc.dump(2) + "\n"); }

std::optional<fs::path> cache_dir_or_env(const std::string &flag) {
  if (!flag.empty())
    return fs::path(flag);
  if (const char *env = std::getenv("XPLORE_CACHE_DIR"); env && *env)
    return fs::path(env);
  return std::nullopt;
}

struct BackendFlags {
  std::string backend = "mock";
  std::string url;
  std::string fixtures;
  std::string cache_dir;

  void add(CLI::App *cmd) {
    cmd->add_option("--backend", backend, "Model backend")->check(CLI::IsMember({"mock", "remote", "none"}));
    cmd->add_option("--model-url", url, "Remote inference URL (default: XPLORE_MODEL_URL)");
    cmd->add_option("--fixtures", fixtures, "Mock fixture file")->check(CLI::ExistingFile);
    cmd->add_option("--cache-dir", cache_dir, "Response cache directory (default: XPLORE_CACHE_DIR)");
  }

  pipeline::ModelConfig model_config() const {
    pipeline::ModelConfig m;
    m.backend = backend;
    m.url = url;
    if (!fixtures.empty())
      m.fixtures = fixtures;
    if (!cache_dir.empty())
      m.cache_dir = cache_dir;
    return m;
  }

  model::ModelClient client() const {
    return model::ModelClient(pipeline::make_backend(model_config()), cache_dir_or_env(cache_dir));
  }
};

} // namespace

int main(int argc, char **argv) {
  CLI::App app{"Build GUI transition graphs from exploration videos and answer questions about them"};
  app.require_subcommand(1);

  // run
  auto *run = app.add_subcommand("run", "Run the full pipeline");
  std::string config_path, run_manifest, run_trace, run_qa, run_out, run_method;
  std::optional<std::uint64_t> run_seed;
  std::optional<std::size_t> run_budget;
  BackendFlags run_backend;
  run->add_option("--config", config_path, "Pipeline config file")->check(CLI::ExistingFile);
  run->add_option("--manifest", run_manifest, "Frame manifest");
  run->add_option("--trace", run_trace, "Ground-truth exploration trace (JSONL)");
  run->add_option("--qa", run_qa, "QA items to answer (JSONL)");
  run->add_option("--out", run_out, "Output directory");
  run->add_option("--seed", run_seed, "Seed");
  run->add_option("--budget", run_budget, "Prompt budget in words");
  run->add_option("--cluster-method", run_method, "rule or model")->check(CLI::IsMember({"rule", "model"}));
  run_backend.add(run);

  // extract-keyframes
  auto *ek = app.add_subcommand("extract-keyframes", "Detect action segments and keyframes");
  std::string ek_manifest, ek_out;
  keyframe::SegmenterConfig ek_cfg;
  ek->add_option("--manifest", ek_manifest, "Frame manifest")->required();
  ek->add_option("--theta-high", ek_cfg.theta_high, "Burst opening threshold");
  ek->add_option("--theta-low", ek_cfg.theta_low, "Burst activity threshold");
  ek->add_option("--min-static", ek_cfg.min_static, "Quiet frames that close a burst");
  ek->add_option("--out", ek_out, "Output file (default stdout)");

  // build-sequence
  auto *bs = app.add_subcommand("build-sequence", "Build the exploration sequence");
  std::string bs_manifest, bs_keyframes, bs_trace, bs_out;
  int bs_parallelism = 4;
  BackendFlags bs_backend;
  bs->add_option("--manifest", bs_manifest, "Frame manifest")->required();
  bs->add_option("--keyframes", bs_keyframes, "keyframes.json")->required()->check(CLI::ExistingFile);
  bs->add_option("--trace", bs_trace, "Ground-truth trace (JSONL)")->check(CLI::ExistingFile);
  bs->add_option("--parallelism", bs_parallelism, "Concurrent model requests")->check(CLI::PositiveNumber);
  bs->add_option("--out", bs_out, "Output file (default stdout)");
  bs_backend.add(bs);

  // cluster
  auto *cl = app.add_subcommand("cluster", "Group keyframes into screen nodes");
  std::string cl_manifest, cl_sequence, cl_out, cl_method = "rule";
  cluster::RuleClusterConfig cl_cfg;
  BackendFlags cl_backend;
  cl->add_option("--manifest", cl_manifest, "Frame manifest")->required();
  cl->add_option("--sequence", cl_sequence, "sequence.json")->required()->check(CLI::ExistingFile);
  cl->add_option("--method", cl_method, "rule or model")->check(CLI::IsMember({"rule", "model"}));
  cl->add_option("--tau-vh", cl_cfg.tau_vh, "VH similarity threshold");
  cl->add_option("--tau-img", cl_cfg.tau_img, "Screenshot similarity threshold");
  cl->add_option("--out", cl_out, "Output file (default stdout)");
  cl_backend.add(cl);

  // build-graph
  auto *bg = app.add_subcommand("build-graph", "Build the GUI transition graph");
  std::string bg_sequence, bg_clusters, bg_out;
  bg->add_option("--sequence", bg_sequence, "sequence.json")->required()->check(CLI::ExistingFile);
  bg->add_option("--clusters", bg_clusters, "clusters.json")->required()->check(CLI::ExistingFile);
  bg->add_option("--out", bg_out, "Output file (default stdout)");

  // export-dot
  auto *ed = app.add_subcommand("export-dot", "Render graph.json as Graphviz DOT");
  std::string ed_graph, ed_out;
  ed->add_option("graph", ed_graph, "graph.json")->required()->check(CLI::ExistingFile);
  ed->add_option("--out", ed_out, "Output file (default stdout)");

  // gen-qa
  auto *gq = app.add_subcommand("gen-qa", "Generate five-way QA items from a ground-truth graph");
  std::string gq_graph, gq_app_model, gq_description, gq_source, gq_out;
  int gq_per_task = 2;
  std::uint64_t gq_seed = 0;
  gq->add_option("--graph", gq_graph, "Ground-truth graph.json")->required()->check(CLI::ExistingFile);
  gq->add_option("--app-model", gq_app_model, "appmodel.json supplying the app description")
      ->check(CLI::ExistingFile);
  gq->add_option("--app-description", gq_description, "App description");
  gq->add_option("--source-id", gq_source, "Source id stamped on every item");
  gq->add_option("--per-task", gq_per_task, "Items per task")->check(CLI::NonNegativeNumber);
  gq->add_option("--seed", gq_seed, "Seed");
  gq->add_option("--out", gq_out, "Output file (default stdout)");

  // answer
  auto *an = app.add_subcommand("answer", "Answer QA items against a graph");
  std::string an_graph, an_qa, an_out;
  std::size_t an_budget = 4096;
  BackendFlags an_backend;
  an->add_option("--graph", an_graph, "graph.json")->required()->check(CLI::ExistingFile);
  an->add_option("--qa", an_qa, "QA items (JSONL)")->required()->check(CLI::ExistingFile);
  an->add_option("--budget", an_budget, "Prompt budget in words")->check(CLI::PositiveNumber);
  an->add_option("--out", an_out, "Output file (default stdout)");
  an_backend.add(an);

  // score
  auto *sc = app.add_subcommand("score", "Score predictions");
  std::string sc_predictions, sc_automation, sc_out;
  sc->add_option("--predictions", sc_predictions, "predictions.jsonl")->check(CLI::ExistingFile);
  sc->add_option("--automation", sc_automation, "Automation steps (JSON array)")->check(CLI::ExistingFile);
  sc->add_option("--out", sc_out, "Also write metrics JSON here");

  // simulate
  auto *sm = app.add_subcommand("simulate", "Explore and render a synthetic app into a corpus");
  std::string sm_model, sm_policy = "dfs", sm_out;
  int sm_random_app = 0, sm_max_steps = 200, sm_qa_per_task = 2;
  std::uint64_t sm_seed = 0;
  sm->add_option("--model", sm_model, "appmodel.json")->check(CLI::ExistingFile);
  sm->add_option("--random-app", sm_random_app, "Generate a random app with N screens")->check(CLI::Range(1, 200));
  sm->add_option("--seed", sm_seed, "Seed for the generator, random policy and QA");
  sm->add_option("--policy", sm_policy, "dfs or random")->check(CLI::IsMember({"dfs", "random"}));
  sm->add_option("--max-steps", sm_max_steps, "Exploration step limit")->check(CLI::PositiveNumber);
  sm->add_option("--qa-per-task", sm_qa_per_task, "QA items per task")->check(CLI::NonNegativeNumber);
  sm->add_option("--out", sm_out, "Corpus directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError &e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    if (*run) {
      pipeline::PipelineConfig cfg;
      if (!config_path.empty())
        cfg = pipeline::load_config(config_path);
      if (!run_manifest.empty())
        cfg.manifest = run_manifest;
      if (!run_trace.empty())
        cfg.trace = fs::path(run_trace);
      if (!run_qa.empty())
        cfg.qa = fs::path(run_qa);
      if (!run_out.empty())
        cfg.out_dir = run_out;
      if (run_seed)
        cfg.seed = *run_seed;
      if (run_budget)
        cfg.prompt_budget = *run_budget;
      if (!run_method.empty())
        cfg.cluster_method = cluster::method_from_name(run_method);
      if (run->count("--backend"))
        cfg.model.backend = run_backend.backend;
      if (!run_backend.url.empty())
        cfg.model.url = run_backend.url;
      if (!run_backend.fixtures.empty())
        cfg.model.fixtures = fs::path(run_backend.fixtures);
      if (!run_backend.cache_dir.empty())
        cfg.model.cache_dir = fs::path(run_backend.cache_dir);
      auto report = pipeline::run_pipeline(cfg);
      for (const auto &s : report.stages)
        std::cout << s.name << (s.cached ? "  cached  " : "  ran     ") << s.counts.dump() << "\n";
      std::cout << "report: " << (cfg.out_dir / "report.json").string() << "\n";
    } else if (*ek) {
      auto seq = ingest::load_sequence(fs::path(ek_manifest));
      auto segs = keyframe::segment_actions(keyframe::compute_ydiff(seq), ek_cfg);
      auto kfs = keyframe::extract_keyframes(seq, segs);
      emit_json(ek_out, keyframe::keyframes_document(seq.manifest.source_id, ek_cfg, segs, kfs));
    } else if (*bs) {
      auto seq = ingest::load_sequence(fs::path(bs_manifest));
      auto kd = keyframe::parse_keyframes_document(read_json(bs_keyframes));
      std::optional<sequence::Trace> trace;
      if (!bs_trace.empty())
        trace = sequence::load_trace(bs_trace);
      auto client = bs_backend.client();
      auto built = sequence::build_sequence(seq, kd.segments, trace ? &*trace : nullptr, &client,
                                            sequence::BuildOptions{bs_parallelism});
      emit_json(bs_out, sequence::to_json(built.sequence));
      if (!built.dropped_events.empty())
        std::cerr << built.dropped_events.size() << " trace event(s) did not match a segment\n";
    } else if (*cl) {
      auto seq = ingest::load_sequence(fs::path(cl_manifest));
      auto es = sequence::sequence_from_json(read_json(cl_sequence), &seq);
      auto screens = sequence::screens_of(es);
      cluster::ClusterAssignment a;
      if (cluster::method_from_name(cl_method) == cluster::Method::rule) {
        a = cluster::cluster_rule(screens, cl_cfg);
      } else {
        auto client = cl_backend.client();
        a = cluster::cluster_model(screens, client, cluster::ModelClusterOptions{cl_backend.backend == "mock"});
      }
      for (const auto &w : a.warnings)
        std::cerr << "warning: " << w << "\n";
      emit_json(cl_out, cluster::to_json(a));
    } else if (*bg) {
      auto es = sequence::sequence_from_json(read_json(bg_sequence));
      auto a = cluster::assignment_from_json(read_json(bg_clusters));
      emit_json(bg_out, graph::export_json(graph::build_graph(es, a)));
    } else if (*ed) {
      emit(ed_out, graph::export_dot(graph::import_json(read_json(ed_graph))));
    } else if (*gq) {
      auto g = graph::import_json(read_json(gq_graph));
      tasks::AppGroundTruth gt{gq_description};
      if (!gq_app_model.empty())
        gt = simulate::ground_truth(simulate::load_app_model(gq_app_model));
      tasks::QaCounts counts;
      for (auto t : tasks::kAllTasks)
        counts[t] = gq_per_task;
      emit(gq_out, tasks::qa_to_jsonl(tasks::generate_available_qa(g, gt, counts, gq_seed, gq_source)));
    } else if (*an) {
      auto g = graph::import_json(read_json(an_graph));
      auto items = tasks::load_qa(an_qa);
      auto ctx = graph::prompt_context(g, an_budget);
      auto client = an_backend.client();
      std::vector<tasks::PredictionRecord> preds;
      for (const auto &item : items)
        preds.push_back(tasks::answer_item(item, ctx, client));
      emit(an_out, tasks::predictions_to_jsonl(preds));
    } else if (*sc) {
      if (sc_predictions.empty() && sc_automation.empty())
        throw Error(Errc::invalid_config, "score needs --predictions and/or --automation");
      json out = json::object();
      if (!sc_predictions.empty()) {
        auto m = tasks::score_mc(tasks::parse_predictions(read_text(sc_predictions)));
        for (const auto &[task, s] : m.per_task)
          std::cout << tasks::task_name(task) << " " << s.accuracy << " (" << s.correct << "/" << s.total << ")\n";
        std::cout << "macro " << m.macro << "\n";
        out["mc"] = tasks::to_json(m);
      }
      if (!sc_automation.empty()) {
        std::vector<tasks::AutomationStep> steps;
        auto doc = read_json(sc_automation);
        try {
          for (const auto &s : doc) {
            tasks::AutomationStep step;
            step.gt_element = action_from_json(s.at("gt")).target.value_or(ElementRef{});
            step.gt_operation = action_kind_from_name(s.at("gt").at("kind").get<std::string>());
            if (auto p = s.find("pred"); p != s.end() && !p->is_null()) {
              auto pred = action_from_json(*p);
              step.pred_operation = pred.kind;
              step.pred_element = pred.target;
            }
            steps.push_back(std::move(step));
          }
        } catch (const json::exception &e) {
          throw Error(Errc::schema_violation, std::string("automation steps: ") + e.what());
        }
        auto a = tasks::score_automation(steps);
        std::cout << "ele_acc " << a.ele_acc << "\nop_acc " << a.op_acc << "\nstep_sr " << a.step_sr << "\n";
        out["automation"] = tasks::to_json(a);
      }
      if (!sc_out.empty())
        write_json(sc_out, out);
    } else if (*sm) {
      if (sm_model.empty() == (sm_random_app == 0))
        throw Error(Errc::invalid_config, "simulate needs exactly one of --model or --random-app");
      auto model = sm_model.empty() ? simulate::random_app_model(sm_seed, sm_random_app)
                                    : simulate::load_app_model(sm_model);
      simulate::ExplorationPolicy policy{simulate::policy_from_name(sm_policy), sm_seed, sm_max_steps};
      auto trace = simulate::explore(model, policy);
      simulate::CorpusOptions opts;
      opts.qa_seed = sm_seed;
      opts.qa_per_task = sm_qa_per_task;
      auto paths = simulate::write_corpus(sm_out, model, trace, opts);
      std::cout << trace.size() << " events\nmanifest: " << paths.manifest.string() << "\n";
    }
  } catch (const Error &e) {
    std::cerr << "error [" << errc_name(e.code()) << "]: " << e.what() << "\n";
    return is_backend_error(e.code()) ? 2 : 1;
  } catch (const std::exception &e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
