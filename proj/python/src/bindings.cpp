#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "xplore/cluster.hpp"
#include "xplore/error.hpp"
#include "xplore/graph.hpp"
#include "xplore/ingest.hpp"
#include "xplore/keyframe.hpp"
#include "xplore/pipeline.hpp"
#include "xplore/sequence.hpp"
#include "xplore/simulate.hpp"
#include "xplore/tasks.hpp"
#include "xplore/vh.hpp"

namespace py = pybind11;
using namespace pybind11::literals;
using namespace xplore;

// Structured values cross the boundary as JSON text; the Python package
// decodes them.
namespace {

ingest::LumaPlane plane_from(const py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast> &a) {
  if (a.ndim() != 2)
    throw Error(Errc::dimension_mismatch, "luma frames must be 2-D uint8 arrays");
  ingest::LumaPlane p(static_cast<int>(a.shape(1)), static_cast<int>(a.shape(0)));
  std::copy(a.data(), a.data() + a.size(), p.samples.begin());
  return p;
}

py::array_t<std::uint8_t> plane_to(const ingest::LumaPlane &p) {
  py::array_t<std::uint8_t> out({p.height, p.width});
  std::copy(p.samples.begin(), p.samples.end(), out.mutable_data());
  return out;
}

graph::GuiTransitionGraph graph_from(const std::string &text) { return graph::import_json(json::parse(text)); }

keyframe::SegmenterConfig segmenter(double high, double low, int min_static) {
  keyframe::SegmenterConfig cfg{high, low, min_static};
  cfg.validate();
  return cfg;
}

} // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "GUI transition graphs from exploration videos";

  static py::exception<Error> error(m, "XploreError");
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p)
        std::rethrow_exception(p);
    } catch (const Error &e) {
      py::object exc = error;
      py::object instance = exc(e.what());
      instance.attr("code") = std::string(errc_name(e.code()));
      if (auto *se = dynamic_cast<const StageError *>(&e))
        instance.attr("stage") = se->stage();
      PyErr_SetObject(exc.ptr(), instance.ptr());
    } catch (const json::exception &e) {
      PyErr_SetString(PyExc_ValueError, e.what());
    }
  });

  m.def("normalized_luma_difference",
        [](py::array_t<std::uint8_t> a, py::array_t<std::uint8_t> b) {
          return keyframe::normalized_luma_difference(plane_from(a), plane_from(b));
        },
        "a"_a, "b"_a);

  m.def("compute_ydiff",
        [](const std::vector<py::array_t<std::uint8_t>> &frames) {
          std::vector<ingest::LumaPlane> planes;
          for (const auto &f : frames)
            planes.push_back(plane_from(f));
          return keyframe::compute_ydiff(planes).values;
        },
        "frames"_a);

  m.def("segment_actions",
        [](std::vector<double> values, double high, double low, int min_static) {
          std::vector<std::array<std::size_t, 4>> out;
          for (const auto &s : keyframe::segment_actions({std::move(values)}, segmenter(high, low, min_static)))
            out.push_back({s.pre_keyframe, s.change_start, s.change_end, s.post_keyframe});
          return out;
        },
        "ydiff"_a, "theta_high"_a = 0.01, "theta_low"_a = 0.003, "min_static"_a = 2,
        "Segments as (pre_keyframe, change_start, change_end, post_keyframe) tuples.");

  m.def("extract_keyframes",
        [](std::size_t frame_count, const std::vector<std::array<std::size_t, 4>> &segs) {
          std::vector<keyframe::ActionSegment> s;
          for (const auto &t : segs)
            s.push_back({t[0], t[1], t[2], t[3]});
          return keyframe::extract_keyframes(frame_count, s);
        },
        "frame_count"_a, "segments"_a);

  m.def("load_frames",
        [](const std::string &manifest) {
          std::vector<py::array_t<std::uint8_t>> out;
          for (const auto &p : ingest::load_sequence(std::filesystem::path(manifest)).lumas)
            out.push_back(plane_to(p));
          return out;
        },
        "manifest"_a);

  m.def("simplify_vh",
        [](const std::string &vh_json) { return vh::simplify(vh::parse_vh(std::string_view(vh_json))).lines; }, "vh_json"_a);

  m.def("vh_similarity",
        [](const std::string &a, const std::string &b) {
          return vh::vh_similarity(vh::simplify(vh::parse_vh(std::string_view(a))), vh::simplify(vh::parse_vh(std::string_view(b))));
        },
        "a"_a, "b"_a);

  m.def("random_app_model",
        [](std::uint64_t seed, int screens) { return simulate::to_json(simulate::random_app_model(seed, screens)).dump(); },
        "seed"_a, "screens"_a);

  m.def("explore",
        [](const std::string &model_json, const std::string &policy, std::uint64_t seed, int max_steps) {
          auto model = simulate::app_model_from_json(json::parse(model_json));
          auto trace = simulate::explore(model, {simulate::policy_from_name(policy), seed, max_steps});
          json out = json::array();
          for (const auto &ev : trace)
            out.push_back({{"pre", ev.pre_screen}, {"post", ev.post_screen}, {"action", to_json(ev.action)}});
          return out.dump();
        },
        "model_json"_a, "policy"_a = "dfs", "seed"_a = 0, "max_steps"_a = 200);

  m.def("simulate_corpus",
        [](const std::string &out_dir, const std::string &model_json, const std::string &policy, std::uint64_t seed,
           int max_steps, int qa_per_task) {
          auto model = simulate::app_model_from_json(json::parse(model_json));
          auto trace = simulate::explore(model, {simulate::policy_from_name(policy), seed, max_steps});
          simulate::CorpusOptions opts;
          opts.qa_seed = seed;
          opts.qa_per_task = qa_per_task;
          auto paths = simulate::write_corpus(out_dir, model, trace, opts);
          return py::dict("manifest"_a = paths.manifest.string(), "trace"_a = paths.trace.string(),
                          "app_model"_a = paths.app_model.string(), "gt_graph"_a = paths.gt_graph.string(),
                          "qa"_a = paths.qa.string());
        },
        "out_dir"_a, "model_json"_a, "policy"_a = "dfs", "seed"_a = 0, "max_steps"_a = 200, "qa_per_task"_a = 2);

  m.def("run_pipeline",
        [](const std::string &config_path) {
          py::gil_scoped_release release;
          return to_json(pipeline::run_pipeline(pipeline::load_config(config_path))).dump();
        },
        "config_path"_a);

  m.def("reachability",
        [](const std::string &graph_json) {
          std::vector<std::vector<int>> out;
          for (const auto &r : graph::reachability(graph_from(graph_json)))
            out.emplace_back(r.reachable.begin(), r.reachable.end());
          return out;
        },
        "graph_json"_a);

  m.def("extract_triples",
        [](const std::string &graph_json, std::size_t limit) {
          std::vector<std::array<std::size_t, 3>> out;
          for (const auto &t : graph::extract_triples(graph_from(graph_json), limit))
            out.push_back({t.a, t.b, t.c});
          return out;
        },
        "graph_json"_a, "limit"_a = graph::kNoLimit);

  m.def("usage_path",
        [](const std::string &graph_json, int target) { return graph::usage_path(graph_from(graph_json), target).nodes; },
        "graph_json"_a, "target"_a);

  m.def("prompt_context",
        [](const std::string &graph_json, std::size_t budget) {
          return graph::prompt_context(graph_from(graph_json), budget).text();
        },
        "graph_json"_a, "budget"_a);

  m.def("export_dot", [](const std::string &graph_json) { return graph::export_dot(graph_from(graph_json)); },
        "graph_json"_a);

  m.def("score_mc",
        [](const std::string &predictions_jsonl) {
          return tasks::to_json(tasks::score_mc(tasks::parse_predictions(predictions_jsonl))).dump();
        },
        "predictions_jsonl"_a);

  m.def("parse_choice", &tasks::parse_choice, "reply"_a);
}
