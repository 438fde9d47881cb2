#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "dars/corpus.hpp"
#include "dars/dataset_builder.hpp"
#include "dars/errors.hpp"
#include "dars/evaluation.hpp"
#include "dars/jsonl.hpp"
#include "dars/llm_gateway.hpp"
#include "dars/loop.hpp"
#include "dars/reflection.hpp"
#include "dars/thought_tree.hpp"

namespace py = pybind11;
using namespace dars;

namespace {

DecisionVector bits_from_string(const std::string& bits) { return decision_vector_from_string(bits); }

DifferenceVector diff_bits(const std::string& chosen, const std::string& rejected) {
    PreferencePair pair;
    pair.chosen.decisions = bits_from_string(chosen);
    pair.rejected.decisions = bits_from_string(rejected);
    return diff(pair);
}

std::vector<ElementJudgment> judgments_from_string(const std::string& plausible) {
    std::vector<ElementJudgment> out;
    for (std::size_t i = 0; i < plausible.size(); ++i) {
        ElementJudgment j;
        j.element_index = static_cast<int>(i);
        switch (plausible[i]) {
            case '0': j.plausible = Plausible::Absent; break;
            case '1': j.plausible = Plausible::Present; break;
            case '?': j.plausible = Plausible::Either; break;
            default:
                throw ValidationError("plausibility string: expected only '0', '1', or '?', got '" +
                                      std::string(1, plausible[i]) + "'");
        }
        out.push_back(j);
    }
    return out;
}

std::vector<LabeledPair> zip_pairs(const std::vector<int>& gold, const std::vector<int>& predicted) {
    if (gold.size() != predicted.size())
        throw ValidationError("gold and predicted lists must have the same length");
    std::vector<LabeledPair> pairs;
    pairs.reserve(gold.size());
    for (std::size_t i = 0; i < gold.size(); ++i)
        pairs.push_back({gold[i], predicted[i], "item" + std::to_string(i), ""});
    return pairs;
}

py::dict trajectory_to_dict(const Trajectory& t) {
    py::dict d;
    d["answer_id"] = t.answer_id;
    d["terminated_by"] = std::string(to_string(t.terminated_by));
    d["iterations_used"] = t.iterations_used;
    d["scores"] = t.scores;
    d["error"] = t.error;
    py::list turns;
    for (const auto& turn : t.turns) {
        py::dict tj;
        tj["actor"] = std::string(to_string(turn.actor));
        tj["iteration"] = turn.iteration_index;
        tj["text"] = turn.text;
        turns.append(tj);
    }
    d["turns"] = turns;
    return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "score-assessment pipeline core: thought trees, reflections, refinement loop, metrics";

    // Translators run newest-first, so the base class must be registered
    // before its children or it would shadow them.
    py::register_exception<Error>(m, "PipelineError", PyExc_RuntimeError);
    py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);
    py::register_exception<ParseError>(m, "ParseError", PyExc_ValueError);
    py::register_exception<GuidanceError>(m, "GuidanceError", PyExc_ValueError);
    py::register_exception<ExtractionError>(m, "ExtractionError", PyExc_ValueError);

    py::class_<ScoreRange>(m, "ScoreRange")
        .def(py::init<>())
        .def_readwrite("lo", &ScoreRange::lo)
        .def_readwrite("hi", &ScoreRange::hi)
        .def("__repr__", [](const ScoreRange& r) {
            return "ScoreRange(" + std::to_string(r.lo) + ", " + std::to_string(r.hi) + ")";
        });

    py::class_<RubricBand>(m, "RubricBand")
        .def(py::init<>())
        .def_readwrite("min_count", &RubricBand::min_count)
        .def_readwrite("max_count", &RubricBand::max_count)
        .def_readwrite("score", &RubricBand::score);

    py::class_<Rubric>(m, "Rubric")
        .def(py::init<>())
        .def_readwrite("bands", &Rubric::bands)
        .def_readwrite("default_score", &Rubric::default_score);

    py::class_<QuestionContext>(m, "QuestionContext")
        .def(py::init<>())
        .def_readwrite("id", &QuestionContext::id)
        .def_readwrite("prompt", &QuestionContext::prompt)
        .def_readwrite("key_elements", &QuestionContext::key_elements)
        .def_readwrite("rubric", &QuestionContext::rubric)
        .def_readwrite("score_range", &QuestionContext::score_range)
        .def("element_count", &QuestionContext::element_count);

    py::class_<StudentAnswer>(m, "StudentAnswer")
        .def(py::init<>())
        .def_readwrite("id", &StudentAnswer::id)
        .def_readwrite("question_id", &StudentAnswer::question_id)
        .def_readwrite("text", &StudentAnswer::text)
        .def_readwrite("gold_score", &StudentAnswer::gold_score)
        .def_property(
            "split", [](const StudentAnswer& a) { return std::string(to_string(a.split)); },
            [](StudentAnswer& a, const std::string& v) { a.split = split_from_string(v); });

    m.def("load_question_context", &load_question_context, py::arg("path"));
    m.def("load_answers", &load_answers, py::arg("path"), py::arg("context"));

    m.def(
        "apply_rubric",
        [](const Rubric& rubric, int count, int element_count) {
            return apply_rubric(rubric, count, element_count);
        },
        py::arg("rubric"), py::arg("count"), py::arg("element_count"),
        "Score a coverage count through the rubric bands.");

    m.def(
        "enumerate_paths",
        [](const QuestionContext& ctx, const std::string& plausible, int path_cap) {
            std::vector<TreePath> paths = enumerate_paths(judgments_from_string(plausible), ctx, path_cap);
            py::list out;
            for (const auto& p : paths) out.append(py::make_tuple(to_string(p.decisions), p.derived_score));
            return out;
        },
        py::arg("context"), py::arg("plausible"), py::arg("path_cap") = 64,
        "Decision vectors consistent with a '0'/'1'/'?' plausibility string, with derived scores.");

    m.def(
        "preference_pairs",
        [](const QuestionContext& ctx, const std::string& plausible, int gold_score, int path_cap,
           int pairs_cap) {
            std::vector<TreePath> paths = enumerate_paths(judgments_from_string(plausible), ctx, path_cap);
            PartitionedPaths part = partition_paths(paths, gold_score);
            std::vector<PreferencePair> pairs =
                make_preference_pairs(part.chosen, part.rejected, "answer", pairs_cap);
            py::list out;
            for (const auto& p : pairs)
                out.append(py::make_tuple(to_string(p.chosen.decisions), to_string(p.rejected.decisions)));
            return out;
        },
        py::arg("context"), py::arg("plausible"), py::arg("gold_score"), py::arg("path_cap") = 64,
        py::arg("pairs_cap") = 4,
        "Hamming-nearest (chosen, rejected) decision-vector pairs for an answer.");

    m.def(
        "hamming_distance",
        [](const std::string& a, const std::string& b) {
            return hamming_distance(bits_from_string(a), bits_from_string(b));
        },
        py::arg("a"), py::arg("b"));

    m.def(
        "difference_vector",
        [](const std::string& chosen, const std::string& rejected) {
            DifferenceVector d = diff_bits(chosen, rejected);
            return std::vector<int>(d.deltas.begin(), d.deltas.end());
        },
        py::arg("chosen"), py::arg("rejected"), "Per-element chosen minus rejected, in -1/0/+1.");

    m.def(
        "render_hint",
        [](const QuestionContext& ctx, const std::string& chosen, const std::string& rejected) {
            StructuralHint hint = render_hint(diff_bits(chosen, rejected), ctx);
            py::dict out;
            out["lines"] = hint.lines;
            out["rendered"] = hint.rendered;
            return out;
        },
        py::arg("context"), py::arg("chosen"), py::arg("rejected"),
        "Discrepancy hint lines for a chosen/rejected pair.");

    m.def("parse_guidance", &parse_guidance, py::arg("reply"),
          "The \"guidance\" string from the first JSON object in a reply.");

    m.def(
        "extract_score",
        [](const std::string& text, int lo, int hi) {
            ScoreRange r;
            r.lo = lo;
            r.hi = hi;
            return extract_score(text, r);
        },
        py::arg("text"), py::arg("lo"), py::arg("hi"),
        "First in-range score asserted by a rationale, by the ordered pattern list.");

    m.def("detect_stop", &detect_stop, py::arg("critic_text"), py::arg("stop_token") = "[STOP]");

    m.def(
        "accuracy",
        [](const std::vector<int>& gold, const std::vector<int>& predicted) {
            return accuracy(zip_pairs(gold, predicted));
        },
        py::arg("gold"), py::arg("predicted"));

    m.def(
        "macro_f1",
        [](const std::vector<int>& gold, const std::vector<int>& predicted, int lo, int hi,
           bool exclude_absent) {
            ScoreRange r;
            r.lo = lo;
            r.hi = hi;
            return macro_f1(zip_pairs(gold, predicted), r, exclude_absent);
        },
        py::arg("gold"), py::arg("predicted"), py::arg("lo"), py::arg("hi"),
        py::arg("exclude_absent") = false);

    m.def(
        "qwk",
        [](const std::vector<int>& gold, const std::vector<int>& predicted, int lo, int hi) {
            ScoreRange r;
            r.lo = lo;
            r.hi = hi;
            return qwk(zip_pairs(gold, predicted), r);
        },
        py::arg("gold"), py::arg("predicted"), py::arg("lo"), py::arg("hi"),
        "Quadratic-weighted agreement between gold and predicted scores.");

    m.def("one_tailed_t_test", &one_tailed_t_test, py::arg("a"), py::arg("b"),
          "One-tailed Welch p-value for mean(a) > mean(b).");
    m.def("paired_one_tailed_t_test", &paired_one_tailed_t_test, py::arg("a"), py::arg("b"));

    m.def(
        "completion_curve",
        [](const std::vector<py::dict>& trajectories, int max_iterations) {
            std::vector<Trajectory> ts;
            for (const auto& d : trajectories) {
                Trajectory t;
                t.terminated_by = termination_from_string(d["terminated_by"].cast<std::string>());
                t.iterations_used = d["iterations_used"].cast<int>();
                ts.push_back(std::move(t));
            }
            return completion_curve(ts, max_iterations);
        },
        py::arg("trajectories"), py::arg("max_iterations"),
        "Fraction stopped at or before each iteration count.");

    m.def(
        "run_scripted_trajectory",
        [](const QuestionContext& ctx, const StudentAnswer& answer, const std::string& reasoner_script,
           const std::string& critic_script, int max_iterations, bool baseline_critic) {
            auto reasoner_backend = ScriptedBackend::from_json(json::parse(reasoner_script));
            auto critic_backend = ScriptedBackend::from_json(json::parse(critic_script));
            ChatGateway reasoner(reasoner_backend);
            ChatGateway critic(critic_backend);
            LoopConfig cfg;
            cfg.max_iterations = max_iterations;
            cfg.reasoner_profile = profiles::eval("scripted");
            cfg.critic_profile = profiles::eval("scripted");
            cfg.baseline_critic = baseline_critic;
            return trajectory_to_dict(run_trajectory(answer, ctx, reasoner, critic, cfg));
        },
        py::arg("context"), py::arg("answer"), py::arg("reasoner_script"), py::arg("critic_script"),
        py::arg("max_iterations") = 8, py::arg("baseline_critic") = false,
        "Reasoner/critic refinement against scripted backends; scripts are the JSON "
        "schema used by the scripted endpoint config.");
}
