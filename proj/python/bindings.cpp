// Copyright 2026 The Selex Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <map>
#include <memory>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "selex/classifier.hpp"
#include "selex/corpus.hpp"
#include "selex/error.hpp"
#include "selex/explainer.hpp"
#include "selex/selector.hpp"
#include "selex/service.hpp"
#include "selex/study.hpp"
#include "selex/synthetic.hpp"

namespace py = pybind11;
using json = nlohmann::json;

namespace {

using namespace selex;

// Wraps a Python callable mapping a list of texts to positive-class
// probabilities.
class CallableClassifier final : public BlackBoxClassifier {
 public:
  explicit CallableClassifier(py::function fn) : fn_(std::move(fn)) {}
  ~CallableClassifier() override {
    py::gil_scoped_acquire gil;
    fn_ = py::function();
  }
  std::vector<double> predict_proba(std::span<const std::string> texts) const override {
    py::gil_scoped_acquire gil;
    auto out = fn_(std::vector<std::string>(texts.begin(), texts.end()))
                   .cast<std::vector<double>>();
    if (out.size() != texts.size()) {
      throw ClassifierError("classifier returned " + std::to_string(out.size()) +
                            " probabilities for " + std::to_string(texts.size()) + " texts");
    }
    return out;
  }

 private:
  py::function fn_;
};

std::shared_ptr<const BlackBoxClassifier> as_classifier(const py::object& obj) {
  if (py::isinstance<ReferenceClassifier>(obj)) {
    return obj.cast<std::shared_ptr<ReferenceClassifier>>();
  }
  if (py::isinstance<py::function>(obj)) {
    return std::make_shared<CallableClassifier>(obj.cast<py::function>());
  }
  throw py::type_error("classifier must be a ReferenceClassifier or a callable");
}

Label label_arg(const std::string& text) {
  auto l = parse_label(text);
  if (!l) throw py::value_error("unknown label '" + text + "'");
  return *l;
}

Document document_arg(const py::dict& d) {
  return Document{d["id"].cast<std::string>(), d["text"].cast<std::string>(),
                  label_arg(d["label"].cast<std::string>())};
}

py::dict document_dict(const Document& d) {
  py::dict out;
  out["id"] = d.id;
  out["text"] = d.text;
  out["label"] = std::string(label_name(d.label));
  return out;
}

py::dict explanation_dict(const Explanation& e) {
  py::list attrs;
  for (const auto& a : e.attributions) attrs.append(py::make_tuple(a.word, a.weight));
  py::dict out;
  out["doc_id"] = e.doc_id;
  out["label"] = std::string(label_name(e.prediction.label));
  out["prob_positive"] = e.prediction.prob_positive;
  out["attributions"] = attrs;
  out["surrogate_r2"] = e.surrogate_r2;
  out["seed"] = e.seed;
  return out;
}

Explanation explanation_arg(const py::dict& d) {
  Explanation e;
  e.doc_id = d["doc_id"].cast<std::string>();
  for (auto item : d["attributions"]) {
    auto pair = item.cast<std::pair<std::string, double>>();
    e.attributions.push_back({pair.first, pair.second});
  }
  return e;
}

// Round-trips through JSON text so nested results arrive as plain Python
// containers.
py::object to_python(const json& j) {
  return py::module_::import("json").attr("loads")(j.dump());
}

json from_python(const py::object& obj) {
  return json::parse(py::module_::import("json").attr("dumps")(obj).cast<std::string>());
}

}  // namespace

PYBIND11_MODULE(_selex, m) {
  m.doc() = "Selective explanations: LIME, SP-LIME, belief models and study utilities";

  py::register_exception<Error>(m, "SelexError");

  m.def("tokenize", [](const std::string& text) {
    std::vector<std::tuple<std::string, std::size_t, std::size_t>> out;
    for (const auto& t : tokenize(text)) out.emplace_back(t.word, t.span.start, t.span.end);
    return out;
  }, py::arg("text"), "Lower-cased word tokens with their byte spans.");

  m.def("generate_reviews", [](std::size_t n_docs, std::uint64_t seed) {
    py::list out;
    for (const auto& d : synthetic::generate_reviews(n_docs, seed)) out.append(document_dict(d));
    return out;
  }, py::arg("n_docs"), py::arg("seed") = 1);

  m.def("sentiment_lexicon", &synthetic::sentiment_lexicon);

  py::class_<ReferenceClassifier, std::shared_ptr<ReferenceClassifier>>(m, "ReferenceClassifier")
      .def_static("train", [](const std::vector<py::dict>& docs, double reg_strength,
                              std::uint64_t seed) {
        std::vector<TokenizedReview> train;
        for (const auto& d : docs) train.push_back(tokenize_document(document_arg(d)));
        py::gil_scoped_release release;
        return std::make_shared<ReferenceClassifier>(train_reference(train, reg_strength, seed));
      }, py::arg("docs"), py::arg("reg_strength") = 1.0, py::arg("seed") = 0)
      .def_static("load", [](const std::filesystem::path& path) {
        return std::make_shared<ReferenceClassifier>(ReferenceClassifier::load(path));
      })
      .def("save", &ReferenceClassifier::save)
      .def("predict_proba", [](const ReferenceClassifier& c, const std::vector<std::string>& texts) {
        return c.predict_proba(texts);
      })
      .def("coefficient", &ReferenceClassifier::coefficient)
      .def_property_readonly("bias", &ReferenceClassifier::bias)
      .def_property_readonly("vocabulary", &ReferenceClassifier::vocabulary);

  m.def("accuracy", [](const ReferenceClassifier& c, const std::vector<py::dict>& docs) {
    std::vector<Document> ds;
    for (const auto& d : docs) ds.push_back(document_arg(d));
    return evaluate_accuracy(c, ds);
  });

  m.def("explain", [](const py::object& classifier, const std::string& doc_id,
                      const std::string& text, std::size_t n_samples, std::uint64_t seed,
                      double kernel_width) {
    const auto clf = as_classifier(classifier);
    LimeParams params;
    params.n_samples = n_samples;
    params.seed = seed;
    params.kernel_width = kernel_width;
    const auto review = tokenize_document(Document{doc_id, text, Label::kNegative});
    Explanation e;
    {
      py::gil_scoped_release release;
      e = lime_explain(*clf, review, params);
    }
    return explanation_dict(e);
  }, py::arg("classifier"), py::arg("doc_id"), py::arg("text"), py::arg("n_samples") = 1000,
     py::arg("seed") = 0, py::arg("kernel_width") = 0.25);

  m.def("splime_select", [](const std::vector<py::dict>& pool, std::size_t k) {
    std::vector<Explanation> es;
    for (const auto& d : pool) es.push_back(explanation_arg(d));
    return splime_select(es, k);
  }, py::arg("pool"), py::arg("k") = kKeywordCount);

  m.def("coverage", [](const std::vector<py::dict>& pool, const std::vector<std::string>& ids) {
    std::vector<Explanation> es;
    for (const auto& d : pool) es.push_back(explanation_arg(d));
    return coverage_value(es, ids);
  });

  m.def("render_original", [](const py::dict& explanation, const std::string& text) {
    const auto e = explanation_arg(explanation);
    const auto review = tokenize_document(Document{e.doc_id, text, Label::kNegative});
    return to_python(rendering_to_json(render_states(e, review, nullptr, EmbeddingTable{}), review));
  }, "Wire-format rendering with every keyword highlighted.");

  m.def("compute_metrics", [](const py::object& decisions) {
    std::vector<Decision> ds;
    for (const auto& d : from_python(decisions)) ds.push_back(decision_from_json(d));
    return to_python(metrics_to_json(compute_metrics(ds)));
  }, py::arg("decisions"));

  m.def("survey_schema", [] { return to_python(survey_schema()); });

  m.def("config_hash", [](const py::object& config, const std::filesystem::path& base_dir) {
    return StudyConfig::from_json(from_python(config), base_dir).hash();
  }, py::arg("config"), py::arg("base_dir") = std::filesystem::path("."));
}
