#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "atomcal/cli.hpp"
#include "atomcal/confidence.hpp"
#include "atomcal/error.hpp"
#include "atomcal/gateway.hpp"
#include "atomcal/query_gen.hpp"
#include "atomcal/reformulation.hpp"
#include "atomcal/stats.hpp"

namespace py = pybind11;
using namespace atomcal;

namespace {

template <class T>
T parse_enum(std::optional<T> value, const std::string& name, const char* what) {
  if (!value) throw py::value_error(std::string("unknown ") + what + " '" + name + "'");
  return *value;
}

Answer parse_answer(const std::string& s) {
  const Answer a = normalize_answer(s);
  return a;
}

py::dict test_dict(const stats::TestResult& r) {
  py::dict d;
  d["statistic"] = r.statistic;
  d["df"] = r.degrees_of_freedom ? py::cast(*r.degrees_of_freedom) : py::none();
  d["p_value"] = r.p_value;
  d["method"] = std::string(to_string(r.method));
  d["exact"] = r.exact;
  return d;
}

}  // namespace

PYBIND11_MODULE(_atomcal, m) {
  m.doc() = "Bindings for the atomcal calibration library";

  static py::exception<Error> error(m, "AtomcalError");
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::object exc = py::handle(error)(e.what());
      exc.attr("code") = std::string(to_string(e.code()));
      PyErr_SetObject(error.ptr(), exc.ptr());
    }
  });

  m.def(
      "run_cli",
      [](const std::vector<std::string>& args) {
        std::ostringstream out, err;
        int code = 0;
        {
          py::gil_scoped_release release;
          code = cli::run(args, out, err);
        }
        return py::make_tuple(code, out.str(), err.str());
      },
      py::arg("args"), "Run the command-line tool in-process. Returns (exit_code, stdout, stderr).");

  m.def(
      "select_answer",
      [](const std::vector<std::string>& answers, std::optional<std::vector<double>> probabilities,
         const std::string& estimator, const std::string& aggregator, std::optional<std::string> original) {
        if (probabilities && probabilities->size() != answers.size()) {
          throw py::value_error("probabilities must match answers in length");
        }
        std::vector<AnswerSample> samples;
        for (std::size_t i = 0; i < answers.size(); ++i) {
          AnswerSample s;
          s.question_index = static_cast<int>(i);
          s.answer = parse_answer(answers[i]);
          if (probabilities) s.probability = (*probabilities)[i];
          samples.push_back(s);
        }
        std::optional<Answer> orig;
        if (original) orig = parse_answer(*original);
        const auto r = select_answer(samples, parse_enum(estimator_from_string(estimator), estimator, "estimator"),
                                     parse_enum(aggregator_from_string(aggregator), aggregator, "aggregator"), orig);
        py::dict d;
        d["answer"] = std::string(to_string(r.majority));
        d["score"] = r.score;
        d["n_effective"] = r.n_effective;
        return d;
      },
      py::arg("answers"), py::arg("probabilities") = py::none(), py::arg("estimator") = "self_consistency",
      py::arg("aggregator") = "mean", py::arg("original") = py::none());

  m.def(
      "cache_key",
      [](const std::string& backend_id, const std::string& model_name, const std::string& prompt,
         std::optional<std::string> image_ref, double temperature, int max_tokens, std::optional<std::int64_t> seed,
         bool want_probabilities) {
        ModelRequest r{backend_id, model_name, prompt, image_ref, temperature, max_tokens, seed, want_probabilities};
        validate_request(r);
        return cache_key(r).digest;
      },
      py::arg("backend_id"), py::arg("model_name"), py::arg("prompt"), py::arg("image_ref") = py::none(),
      py::arg("temperature") = 0.0, py::arg("max_tokens") = 1, py::arg("seed") = py::none(),
      py::arg("want_probabilities") = false);

  m.def(
      "parse_tuples",
      [](const std::string& text) {
        std::vector<std::string> out;
        for (const auto& t : parse_tuples(text)) out.push_back(render_tuple(t));
        return out;
      },
      py::arg("text"));
  m.def(
      "parse_questions",
      [](const std::string& text) {
        std::vector<std::pair<int, std::string>> out;
        for (const auto& q : parse_questions(text)) out.emplace_back(q.id, q.text);
        return out;
      },
      py::arg("text"));
  m.def("parse_paraphrases", &parse_paraphrases, py::arg("text"), py::arg("n"));
  m.def(
      "validate_question",
      [](const std::string& q) {
        std::vector<std::string> out;
        for (const auto& v : validate_atomic_query(q)) out.emplace_back(to_string(v.rule));
        return out;
      },
      py::arg("question"), "Names of the rules the question violates; empty when it is acceptable.");

  m.def(
      "welch_t", [](const std::vector<double>& a, const std::vector<double>& b) { return test_dict(stats::welch_t(a, b)); },
      py::arg("a"), py::arg("b"));
  m.def(
      "mann_whitney_u",
      [](const std::vector<double>& a, const std::vector<double>& b) { return test_dict(stats::mann_whitney_u(a, b)); },
      py::arg("a"), py::arg("b"));
  m.def(
      "point_biserial",
      [](const std::vector<int>& binary, const std::vector<double>& values) {
        return test_dict(stats::point_biserial(binary, values));
      },
      py::arg("binary"), py::arg("values"));
}
