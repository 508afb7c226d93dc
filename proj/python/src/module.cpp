#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "microworld/breakpoints.hpp"
#include "microworld/dataset.hpp"
#include "microworld/errors.hpp"
#include "microworld/eval.hpp"
#include "microworld/session.hpp"
#include "microworld/taskgen.hpp"

namespace py = pybind11;
using nlohmann::json;
using nlohmann::ordered_json;

namespace {

std::vector<mw::Story> stories_from(const std::string& jsonl) {
  std::istringstream in(jsonl);
  return mw::read_jsonl(in);
}

std::string stories_to(const std::vector<mw::Story>& stories) {
  std::ostringstream out;
  mw::write_jsonl(out, stories);
  return out.str();
}

std::vector<mw::TaskSpec> specs_from(const std::string& text, const char* where) {
  const auto doc = json::parse(text);
  std::vector<mw::TaskSpec> out;
  for (std::size_t i = 0; i < doc.size(); ++i) {
    out.push_back(mw::TaskSpec::from_json(doc.at(i), std::string(where) + "[" +
                                                         std::to_string(i) + "]"));
  }
  return out;
}

std::vector<mw::BreakpointAnnotation> grids_from(const std::string& jsonl) {
  std::vector<mw::BreakpointAnnotation> out;
  std::istringstream in(jsonl);
  for (std::string line; std::getline(in, line);) {
    if (!line.empty()) out.push_back(mw::breakpoints_from_json(json::parse(line)));
  }
  return out;
}

ordered_json label_metrics_json(const mw::BreakpointMetrics& m) {
  ordered_json per = ordered_json::object();
  for (const auto& [label, lm] : m.per_label) {
    per[std::string(1, mw::label_code(label))] = {{"precision", lm.precision},
                                                  {"recall", lm.recall},
                                                  {"f1", lm.f1},
                                                  {"support", lm.support}};
  }
  return {{"cells", m.cells}, {"accuracy", m.accuracy}, {"macro_f1", m.macro_f1},
          {"per_label", per}};
}

ordered_json outcome_json(const mw::CommandOutcome& o) {
  ordered_json j = {{"ok", o.ok},
                    {"observation", o.observation},
                    {"delta", o.delta},
                    {"goal_reached", o.goal_reached}};
  if (o.ok) {
    j["step"] = o.step;
  } else {
    j["error"] = {{"kind", o.error_kind}, {"message", o.error}};
    j["hints"] = o.hints;
  }
  return j;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Native core of the microworld package; all structured values cross as JSON text.";

  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const json::exception& e) {
      PyErr_SetString(PyExc_ValueError, e.what());
    }
  });
  // Translators run newest first, so concrete types are registered after the base.
  auto& error = py::register_exception<mw::Error>(m, "Error");
#define MW_REGISTER(T) py::register_exception<mw::T>(m, #T, error.ptr());
  MW_REGISTER(InvalidStatement) MW_REGISTER(PreconditionViolation) MW_REGISTER(Contradiction)
  MW_REGISTER(InstanceTooLarge) MW_REGISTER(PolicyReturnedIllegalAction)
  MW_REGISTER(MissingTemplate) MW_REGISTER(ParseError) MW_REGISTER(UnknownEntity)
  MW_REGISTER(UnresolvedPronoun) MW_REGISTER(GenerationExhausted) MW_REGISTER(Unanswerable)
  MW_REGISTER(SignatureOverlap) MW_REGISTER(NoInjectionSite) MW_REGISTER(ShapeMismatch)
  MW_REGISTER(UnresolvedId) MW_REGISTER(DuplicatePrediction) MW_REGISTER(ConstantColumn)
  MW_REGISTER(TooFewModels) MW_REGISTER(SessionNotFound) MW_REGISTER(InvalidConfig)
#undef MW_REGISTER

  m.def("sample_story", [](const std::string& spec, std::uint64_t seed) {
    return mw::story_to_json(mw::sample_story(mw::TaskSpec::from_json(json::parse(spec)), seed))
        .dump();
  });

  m.def(
      "generate",
      [](const std::string& spec, std::size_t n, std::uint64_t seed, const std::string& prefix,
         unsigned threads) {
        py::gil_scoped_release release;
        return stories_to(mw::sample_stories(mw::TaskSpec::from_json(json::parse(spec)), n, seed,
                                             prefix, threads));
      },
      py::arg("spec"), py::arg("n"), py::arg("seed"), py::arg("id_prefix") = "s",
      py::arg("threads") = 1);

  m.def(
      "compose",
      [](const std::string& train_specs, const std::string& test_specs, const std::string& mode,
         std::size_t train_size, std::size_t test_size, std::uint64_t seed, unsigned threads) {
        const auto train = specs_from(train_specs, "train");
        const auto test = specs_from(test_specs, "test");
        if (mode != "iid" && mode != "compositional") {
          throw mw::InvalidConfig("mode: expected iid or compositional");
        }
        const auto split_mode =
            mode == "iid" ? mw::SplitMode::Iid : mw::SplitMode::Compositional;
        py::gil_scoped_release release;
        const auto splits =
            mw::compose_splits(train, test, split_mode, {train_size, test_size}, seed, threads);
        return std::make_pair(stories_to(splits.train), stories_to(splits.test));
      },
      py::arg("train_specs"), py::arg("test_specs"), py::arg("mode"), py::arg("train_size"),
      py::arg("test_size"), py::arg("seed"), py::arg("threads") = 1);

  m.def("answer", [](const std::string& story_text, const std::string& question_text) {
    const auto story = mw::story_from_json(json::parse(story_text));
    const auto q = json::parse(question_text);
    const auto type_name = q.at("qtype").get<std::string>();
    const auto type = mw::question_type_from_string(type_name);
    if (!type) throw mw::InvalidConfig("qtype: unknown question type " + type_name);
    mw::Question question;
    question.query = mw::query_from_json(story.entities, *type, q.value("query", json::object()));
    question.position = q.at("position").get<int>();
    const auto a = mw::answer_question(story, question);
    return ordered_json{{"answer", a.text}, {"supporting", a.supporting}}.dump();
  });

  m.def("to_babi", [](const std::string& jsonl) {
    const auto stories = stories_from(jsonl);
    std::ostringstream out;
    mw::write_babi(out, stories);
    return out.str();
  });

  m.def("annotate", [](const std::string& story) {
    return mw::breakpoints_to_json(mw::annotate(mw::story_from_json(json::parse(story)))).dump();
  });

  m.def("inject", [](const std::string& story, std::uint64_t seed) {
    return mw::plausibility_to_json(
               mw::inject_implausibility(mw::story_from_json(json::parse(story)), seed))
        .dump();
  });

  m.def("detect_conflict", [](const std::vector<std::string>& sentences,
                              const std::string& entities) {
    const auto decl = mw::declaration_from_json(json::parse(entities));
    const auto r = mw::detect_conflict(sentences, mw::Lexicon::default_english(), decl);
    ordered_json j = {{"plausible", r.plausible}, {"degenerate", r.degenerate}};
    j["conflict_pair"] = r.conflict_pair
                             ? ordered_json{r.conflict_pair->first, r.conflict_pair->second}
                             : ordered_json(nullptr);
    j["reason"] = r.reason;
    return j.dump();
  });

  m.def("score", [](const std::string& dataset, const std::string& predictions) {
    const auto stories = stories_from(dataset);
    std::istringstream in(predictions);
    const auto preds = mw::read_predictions(in);
    const auto r = mw::score(stories, preds);
    ordered_json per = ordered_json::object();
    for (const auto& [type, acc] : r.per_type) {
      per[std::string(mw::to_string(type))] = {
          {"correct", acc.correct}, {"total", acc.total}, {"accuracy", acc.value()}};
    }
    ordered_json j = {{"accuracy", r.overall.value()},
                      {"correct", r.overall.correct},
                      {"total", r.overall.total},
                      {"missing", r.missing},
                      {"per_type", per}};
    if (r.supporting) {
      j["supporting"] = {{"precision", r.supporting->precision},
                         {"recall", r.supporting->recall},
                         {"f1", r.supporting->f1},
                         {"questions", r.supporting->questions}};
    }
    return j.dump();
  });

  m.def("score_breakpoints", [](const std::string& gold, const std::string& predicted) {
    const auto g = grids_from(gold);
    const auto p = grids_from(predicted);
    return label_metrics_json(mw::score_breakpoints(g, p)).dump();
  });

  m.def(
      "concurrence",
      [](const std::vector<double>& a, const std::vector<double>& b, const std::string& method) {
        if (method != "kendall" && method != "pearson") {
          throw mw::InvalidConfig("method: expected kendall or pearson");
        }
        return mw::concurrence(a, b,
                               method == "pearson" ? mw::Correlation::Pearson
                                                   : mw::Correlation::KendallTauB);
      },
      py::arg("a"), py::arg("b"), py::arg("method") = "kendall");

  py::class_<mw::SessionManager>(m, "SessionManager")
      .def(py::init([](std::optional<std::string> data_dir) {
             std::optional<std::filesystem::path> dir;
             if (data_dir) dir = *data_dir;
             return std::make_unique<mw::SessionManager>(dir);
           }),
           py::arg("data_dir") = py::none())
      .def("create",
           [](mw::SessionManager& s, const std::string& config) {
             return s.create(json::parse(config));
           })
      .def(
          "execute",
          [](mw::SessionManager& s, const std::string& id, const std::string& text,
             std::optional<int> segment) {
            return outcome_json(s.execute(id, text, segment)).dump();
          },
          py::arg("id"), py::arg("text"), py::arg("segment") = py::none())
      .def("state", [](const mw::SessionManager& s,
                       const std::string& id) { return s.get(id)->state_json().dump(); })
      .def("legal", [](const mw::SessionManager& s,
                       const std::string& id) { return s.get(id)->legal_json().dump(); })
      .def("export",
           [](const mw::SessionManager& s, const std::string& id, const std::string& format) {
             const auto f = mw::export_format_from_string(format);
             if (!f) throw mw::InvalidConfig("format: unknown export format " + format);
             return s.get(id)->export_trace(*f);
           })
      .def("ids", &mw::SessionManager::ids)
      .def_property_readonly("recovered", &mw::SessionManager::recovered);
}
