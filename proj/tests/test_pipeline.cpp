#include <gtest/gtest.h>

#include <cstdio>
#include <fstream>
#include <sys/wait.h>

#include "support.hpp"
#include "xplore/error.hpp"
#include "xplore/graph.hpp"
#include "xplore/pipeline.hpp"
#include "xplore/simulate.hpp"
#include "xplore/tasks.hpp"

namespace fs = std::filesystem;
using namespace xplore;
using namespace xplore::pipeline;
using testing_support::TempDir;

namespace {

Errc code_of(const std::function<void()> &fn) {
  try {
    fn();
  } catch (const Error &e) {
    return e.code();
  }
  ADD_FAILURE() << "expected an xplore::Error";
  return Errc::io_error;
}

struct Corpus {
  TempDir dir;
  simulate::AppModel model;
  simulate::SimTrace trace;
  simulate::CorpusPaths paths;

  explicit Corpus(int screens = 5, std::uint64_t seed = 3) {
    model = simulate::random_app_model(seed, screens);
    trace = simulate::explore(model, {simulate::PolicyKind::dfs, seed, 200});
    paths = simulate::write_corpus(dir / "corpus", model, trace);
  }

  PipelineConfig config(bool with_trace = true, bool with_qa = true) const {
    PipelineConfig cfg;
    cfg.manifest = paths.manifest;
    if (with_trace)
      cfg.trace = paths.trace;
    if (with_qa)
      cfg.qa = paths.qa;
    cfg.out_dir = dir / "out";
    cfg.model.cache_dir = dir / "cache";
    return cfg;
  }
};

std::map<std::string, std::string> tree(const fs::path &root) {
  std::map<std::string, std::string> out;
  for (const auto &e : fs::recursive_directory_iterator(root))
    if (e.is_regular_file())
      out[fs::relative(e.path(), root).string()] = read_text(e.path());
  return out;
}

#ifdef XPLORE_CLI_PATH
struct CliResult {
  int status = -1;
  std::string output;
};

CliResult cli(const std::string &args) {
  CliResult r;
  std::string cmd = std::string(XPLORE_CLI_PATH) + " " + args + " 2>&1";
  FILE *pipe = ::popen(cmd.c_str(), "r");
  if (!pipe)
    return r;
  char buf[4096];
  std::size_t n;
  while ((n = std::fread(buf, 1, sizeof buf, pipe)) > 0)
    r.output.append(buf, n);
  int raw = ::pclose(pipe);
  r.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  return r;
}
#endif

} // namespace

TEST(Config, ParsesSubset) {
  TempDir dir;
  auto cfg = parse_config(R"(# pipeline
manifest = "corpus/manifest.json"
trace = "/abs/trace.jsonl"   # absolute stays put
seed = 7
prompt_budget = 2_048
parallelism = 2

[segmenter]
theta_high = 0.02
theta_low = 0.004
min_static = 3

[cluster]
method = "model"
tau_vh = 0.7

[model]
backend = "none"
timeout_seconds = 5
)",
                          dir.path());
  EXPECT_EQ(cfg.manifest, dir / "corpus/manifest.json");
  EXPECT_EQ(cfg.trace, fs::path("/abs/trace.jsonl"));
  EXPECT_EQ(cfg.seed, 7u);
  EXPECT_EQ(cfg.prompt_budget, 2048u);
  EXPECT_EQ(cfg.parallelism, 2);
  EXPECT_DOUBLE_EQ(cfg.segmenter.theta_high, 0.02);
  EXPECT_EQ(cfg.segmenter.min_static, 3);
  EXPECT_EQ(cfg.cluster_method, cluster::Method::model);
  EXPECT_DOUBLE_EQ(cfg.cluster.tau_vh, 0.7);
  EXPECT_DOUBLE_EQ(cfg.cluster.tau_img, 0.9);
  EXPECT_EQ(cfg.model.backend, "none");
  EXPECT_EQ(cfg.model.timeout_seconds, 5);
  EXPECT_EQ(cfg.out_dir, dir / "out");
  EXPECT_EQ(to_json(cfg)["segmenter"]["min_static"], 3);
}

TEST(Config, EmptyPathsStayUnset) {
  TempDir dir;
  auto cfg = parse_config("[model]\nfixtures = \"\"\ncache_dir = \"\"\n", dir.path());
  EXPECT_FALSE(cfg.model.fixtures);
  EXPECT_FALSE(cfg.model.cache_dir);
}

TEST(Config, Errors) {
  TempDir dir;
  for (const char *text : {"bogus = 1", "seed = \"x\"", "seed = -1", "[segmenter\ntheta_high = 1",
                           "manifest = \"unterminated", "just words", "prompt_budget = 0", "seed = 1.5",
                           "[cluster]\nmethod = \"magic\""})
    EXPECT_EQ(code_of([&] { parse_config(text, dir.path()); }), Errc::invalid_config) << text;
}

TEST(Config, Validate) {
  Corpus c(2);
  auto cfg = c.config();
  EXPECT_NO_THROW(cfg.validate());
  auto bad = cfg;
  bad.manifest = c.dir / "missing.json";
  EXPECT_EQ(code_of([&] { bad.validate(); }), Errc::missing_file);
  bad = cfg;
  bad.model.backend = "carrier-pigeon";
  EXPECT_EQ(code_of([&] { bad.validate(); }), Errc::invalid_config);
  bad = cfg;
  bad.segmenter.theta_low = 0.5;
  EXPECT_EQ(code_of([&] { bad.validate(); }), Errc::invalid_config);
}

TEST(Run, RecoversGroundTruthGraph) {
  Corpus c(6);
  auto report = run_pipeline(c.config());
  for (auto name : kStages) {
    ASSERT_NE(report.stage(name), nullptr) << name;
    EXPECT_FALSE(report.stage(name)->cached) << name;
  }
  auto art = c.dir / "out/artifacts";
  auto g = graph::import_json(read_json(art / "graph.json"));
  EXPECT_TRUE(testing_support::isomorphic(g, simulate::gt_graph(c.model, c.trace)));
  EXPECT_TRUE(fs::exists(art / "graph.dot"));
  EXPECT_TRUE(fs::exists(c.dir / "out/index.json"));
  auto saved = read_json(c.dir / "out/report.json");
  EXPECT_EQ(saved["stages"].size(), kStages.size());
  EXPECT_FALSE(saved.contains("failed_stage"));
  EXPECT_EQ(report.stage("sequence")->counts["steps"], c.trace.size());
}

TEST(Run, SecondRunIsCachedAndIdentical) {
  Corpus c(4);
  auto cfg = c.config();
  run_pipeline(cfg);
  auto before = tree(c.dir / "out/artifacts");
  auto again = run_pipeline(cfg);
  for (const auto &s : again.stages)
    EXPECT_TRUE(s.cached) << s.name;
  EXPECT_EQ(tree(c.dir / "out/artifacts"), before);
}

TEST(Run, ChangedSettingRerunsDownstreamOnly) {
  Corpus c(4);
  auto cfg = c.config();
  run_pipeline(cfg);
  cfg.cluster.tau_vh = 0.75;
  auto r = run_pipeline(cfg);
  EXPECT_TRUE(r.stage("ingest")->cached);
  EXPECT_TRUE(r.stage("keyframe")->cached);
  EXPECT_TRUE(r.stage("sequence")->cached);
  EXPECT_FALSE(r.stage("cluster")->cached);
  EXPECT_FALSE(r.stage("graph")->cached);
  EXPECT_FALSE(r.stage("qa")->cached);
}

TEST(Run, SkipsQaWithoutItems) {
  Corpus c(3);
  auto r = run_pipeline(c.config(true, false));
  EXPECT_EQ(r.stage("qa"), nullptr);
  EXPECT_NE(r.stage("graph"), nullptr);
}

TEST(Run, CorruptManifestFailsInIngest) {
  Corpus c(3);
  auto cfg = c.config();
  write_text_atomic(c.paths.manifest, "{ this is not json");
  try {
    run_pipeline(cfg);
    FAIL();
  } catch (const StageError &e) {
    EXPECT_EQ(e.stage(), "ingest");
    EXPECT_EQ(e.code(), Errc::malformed_manifest);
  }
  auto saved = read_json(c.dir / "out/report.json");
  EXPECT_EQ(saved["failed_stage"], "ingest");
}

TEST(Run, NoTraceAndNoBackendFailsInSequence) {
  Corpus c(3);
  auto cfg = c.config(false, false);
  cfg.model.backend = "none";
  try {
    run_pipeline(cfg);
    FAIL();
  } catch (const StageError &e) {
    EXPECT_EQ(e.stage(), "sequence");
    EXPECT_TRUE(is_backend_error(e.code())) << errc_name(e.code());
  }
}

TEST(Run, MockWithoutTraceStillBuildsAGraph) {
  Corpus c(3);
  auto cfg = c.config(false, false);
  auto r = run_pipeline(cfg);
  EXPECT_GT(r.model_stats.total_calls(), 0u);
  auto g = graph::import_json(read_json(c.dir / "out/artifacts/graph.json"));
  EXPECT_EQ(g.edges.empty(), c.trace.empty());
}

TEST(Run, ModelClusteringWithLabelEcho) {
  Corpus c(5);
  auto cfg = c.config();
  cfg.cluster_method = cluster::Method::model;
  run_pipeline(cfg);
  auto g = graph::import_json(read_json(c.dir / "out/artifacts/graph.json"));
  EXPECT_TRUE(testing_support::isomorphic(g, simulate::gt_graph(c.model, c.trace)));
}

#ifdef XPLORE_CLI_PATH

TEST(Cli, SimulateRunAndScore) {
  TempDir dir;
  auto sim = cli("simulate --random-app 4 --seed 2 --qa-per-task 2 --out " + (dir / "corpus").string());
  ASSERT_EQ(sim.status, 0) << sim.output;
  auto run = cli("run --manifest " + (dir / "corpus/manifest.json").string() + " --trace " +
                 (dir / "corpus/trace.jsonl").string() + " --out " + (dir / "out").string());
  ASSERT_EQ(run.status, 0) << run.output;
  EXPECT_TRUE(fs::exists(dir / "out/artifacts/graph.json"));

  auto items = tasks::load_qa(dir / "corpus/qa.jsonl");
  ASSERT_FALSE(items.empty());
  std::vector<tasks::PredictionRecord> preds;
  for (const auto &i : items)
    preds.push_back({i, i.gt_index, ""});
  write_text_atomic(dir / "preds.jsonl", tasks::predictions_to_jsonl(preds));
  auto score = cli("score --predictions " + (dir / "preds.jsonl").string());
  EXPECT_EQ(score.status, 0) << score.output;
  EXPECT_NE(score.output.find("macro 1"), std::string::npos) << score.output;

  auto dot = cli("export-dot " + (dir / "out/artifacts/graph.json").string());
  EXPECT_EQ(dot.status, 0);
  EXPECT_EQ(dot.output.rfind("digraph", 0), 0u) << dot.output;
}

TEST(Cli, ExitCodes) {
  TempDir dir;
  ASSERT_EQ(cli("simulate --random-app 3 --seed 1 --out " + (dir / "c").string()).status, 0);
  auto g = simulate::gt_graph(simulate::load_app_model(dir / "c/appmodel.json"),
                              simulate::explore(simulate::load_app_model(dir / "c/appmodel.json"), {}));
  write_json(dir / "g.json", graph::export_json(g));
  auto qa = dir / "c/qa.jsonl";

  // Backend failure.
  auto none = cli("answer --backend none --graph " + (dir / "g.json").string() + " --qa " + qa.string());
  EXPECT_EQ(none.status, 2) << none.output;
  // Bad input.
  write_text_atomic(dir / "bad.jsonl", "{\"task\": \"usage\"}\n");
  auto bad = cli("answer --graph " + (dir / "g.json").string() + " --qa " + (dir / "bad.jsonl").string());
  EXPECT_EQ(bad.status, 1) << bad.output;
  // Unknown flag.
  EXPECT_EQ(cli("run --no-such-flag").status, 1);
  EXPECT_EQ(cli("score").status, 1);
}

#endif
