#include "xplore/pipeline.hpp"

#include <charconv>
#include <chrono>
#include <cstdlib>
#include <functional>
#include <map>

#include "xplore/error.hpp"
#include "xplore/graph.hpp"
#include "xplore/ingest.hpp"
#include "xplore/sequence.hpp"
#include "xplore/tasks.hpp"

namespace fs = std::filesystem;

namespace xplore::pipeline {

namespace {

[[noreturn]] void bad_config(const std::string &what) { throw Error(Errc::invalid_config, "config: " + what); }

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos)
    return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

// Drops a trailing comment while respecting quoted strings.
std::string_view strip_comment(std::string_view line) {
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '"' && (i == 0 || line[i - 1] != '\\'))
      quoted = !quoted;
    else if (line[i] == '#' && !quoted)
      return line.substr(0, i);
  }
  return line;
}

json parse_scalar(std::string_view raw, std::size_t lineno) {
  auto where = " on line " + std::to_string(lineno);
  if (raw.empty())
    bad_config("missing value" + where);
  if (raw.front() == '"') {
    if (raw.size() < 2 || raw.back() != '"')
      bad_config("unterminated string" + where);
    std::string out;
    for (std::size_t i = 1; i + 1 < raw.size(); ++i) {
      char c = raw[i];
      if (c == '\\' && i + 2 < raw.size()) {
        char n = raw[++i];
        out += n == 'n' ? '\n' : n == 't' ? '\t' : n;
      } else {
        out += c;
      }
    }
    return out;
  }
  if (raw == "true")
    return true;
  if (raw == "false")
    return false;
  std::string digits;
  for (char c : raw)
    if (c != '_')
      digits += c;
  long long i = 0;
  if (auto [p, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), i);
      ec == std::errc() && p == digits.data() + digits.size())
    return i;
  char *end = nullptr;
  double d = std::strtod(digits.c_str(), &end);
  if (end == digits.c_str() + digits.size() && !digits.empty())
    return d;
  bad_config("cannot parse value '" + std::string(raw) + "'" + where);
}

double number(const json &v, const std::string &key) {
  if (!v.is_number())
    bad_config("'" + key + "' must be a number");
  return v.get<double>();
}

long long integer(const json &v, const std::string &key) {
  if (!v.is_number_integer())
    bad_config("'" + key + "' must be an integer");
  return v.get<long long>();
}

std::string string(const json &v, const std::string &key) {
  if (!v.is_string())
    bad_config("'" + key + "' must be a string");
  return v.get<std::string>();
}

fs::path resolve(const fs::path &base, const std::string &p) {
  fs::path path(p);
  return path.is_absolute() ? path : base / path;
}

std::string file_hash(const fs::path &p) { return sha256_hex(read_text(p)); }

std::string combine(const std::vector<std::string> &parts) {
  std::string joined;
  for (const auto &p : parts) {
    joined += p;
    joined += '\n';
  }
  return sha256_hex(joined);
}

std::string backend_identity(const ModelConfig &m) {
  json id{{"backend", m.backend}};
  if (m.backend == "remote")
    id["url"] = m.url;
  if (m.fixtures)
    id["fixtures"] = file_hash(*m.fixtures);
  return canonical_dump(id);
}

fs::path cache_dir_for(const PipelineConfig &cfg) {
  if (cfg.model.cache_dir)
    return *cfg.model.cache_dir;
  if (const char *env = std::getenv("XPLORE_CACHE_DIR"); env && *env)
    return env;
  return cfg.out_dir / "cache";
}

struct IndexEntry {
  std::string input_hash;
  std::vector<std::string> artifacts;
  json counts = json::object();
};

std::map<std::string, IndexEntry> read_index(const fs::path &path) {
  std::map<std::string, IndexEntry> out;
  if (!fs::exists(path))
    return out;
  try {
    auto doc = read_json(path);
    for (const auto &[stage, e] : doc.at("stages").items()) {
      IndexEntry entry;
      entry.input_hash = e.at("input_hash").get<std::string>();
      entry.artifacts = e.at("artifacts").get<std::vector<std::string>>();
      entry.counts = e.value("counts", json::object());
      out[stage] = std::move(entry);
    }
  } catch (const std::exception &) {
    // An unreadable index just means nothing is reusable.
    out.clear();
  }
  return out;
}

void write_index(const fs::path &path, const std::map<std::string, IndexEntry> &index) {
  json stages = json::object();
  for (const auto &[stage, e] : index)
    stages[stage] = {{"input_hash", e.input_hash}, {"artifacts", e.artifacts}, {"counts", e.counts}};
  write_json(path, json{{"stages", std::move(stages)}});
}

} // namespace

void PipelineConfig::validate() const {
  segmenter.validate();
  cluster.validate();
  if (manifest.empty())
    bad_config("manifest path is required");
  if (!fs::exists(manifest))
    throw Error(Errc::missing_file, "manifest not found: " + manifest.string());
  if (trace && !fs::exists(*trace))
    throw Error(Errc::missing_file, "trace not found: " + trace->string());
  if (qa && !fs::exists(*qa))
    throw Error(Errc::missing_file, "qa file not found: " + qa->string());
  if (model.fixtures && !fs::exists(*model.fixtures))
    throw Error(Errc::missing_file, "fixtures not found: " + model.fixtures->string());
  if (model.backend != "mock" && model.backend != "remote" && model.backend != "none")
    bad_config("model backend must be mock, remote or none");
  if (model.timeout_seconds < 1 || model.max_in_flight < 1)
    bad_config("model timeout and max_in_flight must be positive");
  if (prompt_budget == 0)
    bad_config("prompt_budget must be positive");
  if (parallelism < 1)
    bad_config("parallelism must be >= 1");
  if (out_dir.empty())
    bad_config("out directory is required");
}

PipelineConfig parse_config(std::string_view text, const fs::path &base_dir) {
  PipelineConfig cfg;
  cfg.out_dir = base_dir / "out";
  std::string section;
  std::size_t lineno = 0;
  while (!text.empty()) {
    auto nl = text.find('\n');
    auto line = trim(strip_comment(text.substr(0, nl)));
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++lineno;
    if (line.empty())
      continue;
    if (line.front() == '[') {
      if (line.back() != ']')
        bad_config("bad section header on line " + std::to_string(lineno));
      section = std::string(trim(line.substr(1, line.size() - 2)));
      continue;
    }
    auto eq = line.find('=');
    if (eq == std::string_view::npos)
      bad_config("expected key = value on line " + std::to_string(lineno));
    std::string key(trim(line.substr(0, eq)));
    json v = parse_scalar(trim(line.substr(eq + 1)), lineno);
    std::string full = section.empty() ? key : section + "." + key;
    // empty path means unset
    if (v.is_string() && v.get<std::string>().empty() &&
        (full == "manifest" || full == "trace" || full == "qa" || full == "out" || full == "model.url" ||
         full == "model.fixtures" || full == "model.cache_dir"))
      continue;

    if (full == "manifest")
      cfg.manifest = resolve(base_dir, string(v, full));
    else if (full == "trace")
      cfg.trace = resolve(base_dir, string(v, full));
    else if (full == "qa")
      cfg.qa = resolve(base_dir, string(v, full));
    else if (full == "out")
      cfg.out_dir = resolve(base_dir, string(v, full));
    else if (full == "seed") {
      auto s = integer(v, full);
      if (s < 0)
        bad_config("seed must be non-negative");
      cfg.seed = static_cast<std::uint64_t>(s);
    } else if (full == "prompt_budget") {
      auto b = integer(v, full);
      if (b <= 0)
        bad_config("prompt_budget must be positive");
      cfg.prompt_budget = static_cast<std::size_t>(b);
    } else if (full == "parallelism")
      cfg.parallelism = static_cast<int>(integer(v, full));
    else if (full == "segmenter.theta_high")
      cfg.segmenter.theta_high = number(v, full);
    else if (full == "segmenter.theta_low")
      cfg.segmenter.theta_low = number(v, full);
    else if (full == "segmenter.min_static")
      cfg.segmenter.min_static = static_cast<int>(integer(v, full));
    else if (full == "cluster.method")
      cfg.cluster_method = cluster::method_from_name(string(v, full));
    else if (full == "cluster.tau_vh")
      cfg.cluster.tau_vh = number(v, full);
    else if (full == "cluster.tau_img")
      cfg.cluster.tau_img = number(v, full);
    else if (full == "model.backend")
      cfg.model.backend = string(v, full);
    else if (full == "model.url")
      cfg.model.url = string(v, full);
    else if (full == "model.fixtures")
      cfg.model.fixtures = resolve(base_dir, string(v, full));
    else if (full == "model.cache_dir")
      cfg.model.cache_dir = resolve(base_dir, string(v, full));
    else if (full == "model.timeout_seconds")
      cfg.model.timeout_seconds = static_cast<int>(integer(v, full));
    else if (full == "model.max_in_flight")
      cfg.model.max_in_flight = static_cast<int>(integer(v, full));
    else
      bad_config("unknown key '" + full + "' on line " + std::to_string(lineno));
  }
  return cfg;
}

PipelineConfig load_config(const fs::path &path) {
  return parse_config(read_text(path), path.has_parent_path() ? path.parent_path() : fs::path("."));
}

json to_json(const PipelineConfig &cfg) {
  json m{{"backend", cfg.model.backend},
         {"url", cfg.model.url},
         {"timeout_seconds", cfg.model.timeout_seconds},
         {"max_in_flight", cfg.model.max_in_flight}};
  m["fixtures"] = cfg.model.fixtures ? json(cfg.model.fixtures->string()) : json(nullptr);
  m["cache_dir"] = cfg.model.cache_dir ? json(cfg.model.cache_dir->string()) : json(nullptr);
  return json{{"manifest", cfg.manifest.string()},
              {"trace", cfg.trace ? json(cfg.trace->string()) : json(nullptr)},
              {"qa", cfg.qa ? json(cfg.qa->string()) : json(nullptr)},
              {"segmenter", keyframe::to_json(cfg.segmenter)},
              {"cluster",
               {{"method", cluster::method_name(cfg.cluster_method)},
                {"tau_vh", cfg.cluster.tau_vh},
                {"tau_img", cfg.cluster.tau_img}}},
              {"model", std::move(m)},
              {"prompt_budget", cfg.prompt_budget},
              {"out", cfg.out_dir.string()},
              {"seed", cfg.seed},
              {"parallelism", cfg.parallelism}};
}

std::shared_ptr<model::Backend> make_backend(const ModelConfig &cfg) {
  if (cfg.backend == "none")
    return nullptr;
  if (cfg.backend == "mock")
    return model::mock_backend(cfg.fixtures ? model::load_fixtures(*cfg.fixtures) : std::vector<model::Fixture>{});
  if (cfg.backend == "remote") {
    std::string url = cfg.url;
    if (url.empty())
      if (const char *env = std::getenv("XPLORE_MODEL_URL"))
        url = env;
    if (url.empty())
      throw Error(Errc::no_backend, "remote backend selected but no url given (set XPLORE_MODEL_URL)");
    return model::remote_backend(
        model::RemoteOptions{url, std::chrono::seconds(cfg.timeout_seconds), cfg.max_in_flight});
  }
  bad_config("unknown backend '" + cfg.backend + "'");
}

const StageReport *RunReport::stage(std::string_view name) const {
  for (const auto &s : stages)
    if (s.name == name)
      return &s;
  return nullptr;
}

json to_json(const RunReport &r) {
  json stages = json::array();
  for (const auto &s : r.stages)
    stages.push_back({{"name", s.name},
                      {"cached", s.cached},
                      {"seconds", s.seconds},
                      {"input_hash", s.input_hash},
                      {"counts", s.counts}});
  json out{{"stages", std::move(stages)},
           {"model", model::to_json(r.model_stats)},
           {"tokens", r.model_stats.total_tokens()},
           {"seed", r.seed}};
  if (r.failed_stage) {
    out["failed_stage"] = *r.failed_stage;
    out["error"] = r.error;
  }
  return out;
}

fs::path artifact_dir(const PipelineConfig &cfg) { return cfg.out_dir / "artifacts"; }

RunReport run_pipeline(const PipelineConfig &cfg) {
  RunReport report;
  report.seed = cfg.seed;
  const fs::path art = artifact_dir(cfg);
  const fs::path index_path = cfg.out_dir / "index.json";

  std::shared_ptr<model::ModelClient> client;
  auto get_client = [&]() -> model::ModelClient & {
    if (!client)
      client = std::make_shared<model::ModelClient>(make_backend(cfg.model), cache_dir_for(cfg));
    return *client;
  };

  std::optional<ingest::FrameSequence> frames;
  auto get_frames = [&]() -> const ingest::FrameSequence & {
    if (!frames)
      frames = ingest::load_sequence(cfg.manifest);
    return *frames;
  };

  auto write_report = [&] {
    if (client)
      report.model_stats = client->stats();
    write_json(cfg.out_dir / "report.json", to_json(report));
  };

  std::string current = "ingest";
  try {
    cfg.validate();
    fs::create_directories(art);
    auto index = read_index(index_path);
    bool upstream_ran = false;

    // Runs `body` unless the index shows the same input hash, all artifacts
    // are present and nothing upstream was recomputed.
    auto stage = [&](const std::string &name, const std::string &input_hash, const std::vector<std::string> &outputs,
                     const std::function<json()> &body) {
      current = name;
      StageReport sr;
      sr.name = name;
      sr.input_hash = input_hash;
      auto t0 = std::chrono::steady_clock::now();
      auto it = index.find(name);
      bool fresh = !upstream_ran && it != index.end() && it->second.input_hash == input_hash &&
                   it->second.artifacts == outputs;
      for (const auto &o : outputs)
        fresh = fresh && fs::exists(art / o);
      if (fresh) {
        sr.cached = true;
        sr.counts = it->second.counts;
      } else {
        upstream_ran = true;
        index.erase(name);
        write_index(index_path, index);
        sr.counts = body();
        index[name] = IndexEntry{input_hash, outputs, sr.counts};
        write_index(index_path, index);
      }
      sr.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      report.stages.push_back(std::move(sr));
    };

    // ingest: content hash of the manifest and every frame file.
    {
      auto manifest = ingest::load_manifest(cfg.manifest);
      std::vector<std::string> parts{"ingest/1", file_hash(cfg.manifest)};
      for (const auto &p : manifest.frame_paths)
        parts.push_back(file_hash(p));
      stage("ingest", combine(parts), {"ingest.json"}, [&] {
        const auto &seq = get_frames();
        json list = json::array();
        for (std::size_t i = 0; i < seq.size(); ++i)
          list.push_back({{"index", i}, {"luma", sequence::luma_digest(seq.lumas[i])}});
        write_json(art / "ingest.json", json{{"source_id", seq.manifest.source_id},
                                             {"fps", seq.manifest.fps},
                                             {"width", seq.manifest.width},
                                             {"height", seq.manifest.height},
                                             {"frames", std::move(list)}});
        return json{{"frames", seq.size()}};
      });
    }

    const std::string ingest_hash = file_hash(art / "ingest.json");
    stage("keyframe", combine({"keyframe/1", ingest_hash, canonical_dump(keyframe::to_json(cfg.segmenter))}),
          {"keyframes.json"}, [&] {
            const auto &seq = get_frames();
            auto segs = keyframe::segment_actions(keyframe::compute_ydiff(seq), cfg.segmenter);
            auto kfs = keyframe::extract_keyframes(seq, segs);
            write_json(art / "keyframes.json",
                       keyframe::keyframes_document(seq.manifest.source_id, cfg.segmenter, segs, kfs));
            return json{{"segments", segs.size()}, {"keyframes", kfs.size()}};
          });

    const std::string keyframe_hash = file_hash(art / "keyframes.json");
    const std::string trace_hash = cfg.trace ? file_hash(*cfg.trace) : "no-trace";
    stage("sequence",
          combine({"sequence/1", ingest_hash, keyframe_hash, trace_hash, backend_identity(cfg.model)}),
          {"sequence.json"}, [&] {
            const auto &seq = get_frames();
            auto kd = keyframe::parse_keyframes_document(read_json(art / "keyframes.json"));
            std::optional<sequence::Trace> trace;
            if (cfg.trace)
              trace = sequence::load_trace(*cfg.trace);
            // Ground-truth traces cover every VH and action, so the model is
            // only needed without one.
            model::ModelClient *mc = trace ? nullptr : &get_client();
            auto built = sequence::build_sequence(seq, kd.segments, trace ? &*trace : nullptr, mc,
                                                  sequence::BuildOptions{cfg.parallelism});
            write_json(art / "sequence.json", sequence::to_json(built.sequence));
            return json{{"steps", built.sequence.steps.size()}, {"dropped_events", built.dropped_events.size()}};
          });

    const std::string sequence_hash = file_hash(art / "sequence.json");
    json cluster_cfg{{"method", cluster::method_name(cfg.cluster_method)}};
    if (cfg.cluster_method == cluster::Method::rule)
      cluster_cfg.update({{"tau_vh", cfg.cluster.tau_vh}, {"tau_img", cfg.cluster.tau_img}});
    else
      cluster_cfg["backend"] = backend_identity(cfg.model);
    stage("cluster", combine({"cluster/1", sequence_hash, canonical_dump(cluster_cfg)}), {"clusters.json"}, [&] {
      auto es = sequence::sequence_from_json(read_json(art / "sequence.json"), &get_frames());
      auto screens = sequence::screens_of(es);
      cluster::ClusterAssignment a =
          cfg.cluster_method == cluster::Method::rule
              ? cluster::cluster_rule(screens, cfg.cluster)
              : cluster::cluster_model(screens, get_client(),
                                       cluster::ModelClusterOptions{cfg.model.backend == "mock"});
      write_json(art / "clusters.json", cluster::to_json(a));
      return json{{"nodes", a.nodes.size()}, {"keyframes", a.assignment.size()}, {"warnings", a.warnings.size()}};
    });

    const std::string cluster_hash = file_hash(art / "clusters.json");
    stage("graph", combine({"graph/1", sequence_hash, cluster_hash}), {"graph.json", "graph.dot"}, [&] {
      auto es = sequence::sequence_from_json(read_json(art / "sequence.json"));
      auto a = cluster::assignment_from_json(read_json(art / "clusters.json"));
      auto g = graph::build_graph(es, a);
      write_json(art / "graph.json", graph::export_json(g));
      write_text_atomic(art / "graph.dot", graph::export_dot(g));
      return json{{"nodes", g.nodes.size()}, {"edges", g.edges.size()}};
    });

    if (cfg.qa) {
      const std::string graph_hash = file_hash(art / "graph.json");
      stage("qa",
            combine({"qa/1", graph_hash, file_hash(*cfg.qa), std::to_string(cfg.prompt_budget),
                     backend_identity(cfg.model), std::to_string(cfg.seed)}),
            {"predictions.jsonl", "metrics.json"}, [&] {
              auto g = graph::import_json(read_json(art / "graph.json"));
              auto items = tasks::load_qa(*cfg.qa);
              auto ctx = graph::prompt_context(g, cfg.prompt_budget);
              auto &mc = get_client();
              std::vector<tasks::PredictionRecord> preds;
              preds.reserve(items.size());
              for (const auto &item : items)
                preds.push_back(tasks::answer_item(item, ctx, mc));
              auto metrics = tasks::score_mc(preds);
              write_text_atomic(art / "predictions.jsonl", tasks::predictions_to_jsonl(preds));
              write_json(art / "metrics.json", tasks::to_json(metrics));
              return json{{"items", preds.size()},
                          {"macro", metrics.macro},
                          {"prompt_tokens", ctx.token_estimate},
                          {"dropped_edges", ctx.dropped_edges}};
            });
    }
  } catch (const Error &e) {
    report.failed_stage = current;
    report.error = e.what();
    try {
      fs::create_directories(cfg.out_dir);
      write_report();
    } catch (const std::exception &) {
    }
    throw StageError(current, e);
  } catch (const std::exception &e) {
    report.failed_stage = current;
    report.error = e.what();
    throw StageError(current, Error(Errc::io_error, e.what()));
  }
  write_report();
  return report;
}

} // namespace xplore::pipeline
