#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "bridge/behavior.hpp"
#include "bridge/cot.hpp"
#include "bridge/dataset.hpp"
#include "bridge/errors.hpp"
#include "bridge/igsm.hpp"
#include "bridge/influence.hpp"
#include "bridge/worked_examples.hpp"
#include "bridge/promptbench.hpp"
#include "bridge/rl.hpp"
#include "bridge/toy_policy.hpp"

namespace py = pybind11;
using namespace bridge;

namespace {

// Tasks cross the boundary as their dataset JSON text.
std::string dump(const Task& t) { return to_json(t).dump(); }
Task load(const std::string& s) { return task_from_json(nlohmann::json::parse(s)); }

std::vector<GradView> views(const std::vector<std::vector<double>>& v) { return {v.begin(), v.end()}; }

}  // namespace

PYBIND11_MODULE(_bridge, m) {
  m.doc() = "Behavior-injection data tools: task generation, CoT augmentation, GRPO objective and influence";

  py::register_exception<VerificationError>(m, "VerificationError", PyExc_ValueError);
  py::register_exception<GenerationError>(m, "GenerationError", PyExc_RuntimeError);
  py::register_exception<ExtractError>(m, "ExtractError", PyExc_ValueError);
  py::register_exception<ParseError>(m, "ParseError", PyExc_ValueError);

  m.def(
      "generate_igsm",
      [](std::uint64_t seed, std::int64_t op_lo, std::int64_t op_hi) {
        IgsmConfig cfg;
        cfg.op_range = {op_lo, op_hi};
        return dump(generate_igsm(cfg, default_igsm_world(), seed));
      },
      py::arg("seed"), py::arg("op_lo") = 15, py::arg("op_hi") = 20);
  m.def(
      "generate_pb",
      [](std::uint64_t seed, int depth, std::int64_t red_lo, std::int64_t red_hi) {
        PbConfig cfg;
        cfg.depth = depth;
        cfg.redundancy_range = {red_lo, red_hi};
        return dump(generate_pb(cfg, seed));
      },
      py::arg("seed"), py::arg("depth") = 4, py::arg("redundancy_lo") = 0, py::arg("redundancy_hi") = 0);
  m.def("worked_task", [](const std::string& which) {
    if (which == "igsm") return dump(igsm_worked_task());
    if (which == "igsm-bridge") return dump(igsm_worked_bridge_task());
    if (which == "pb") return dump(pb_worked_task());
    throw std::invalid_argument("worked_task: expected igsm, igsm-bridge or pb");
  });

  m.def("render_query", [](const std::string& t) { return render_query_text(load(t)); });
  m.def("render_answer", [](const std::string& t) { return render_answer(load(t)); });
  m.def(
      "render_sft_record", [](const std::string& t, const std::string& family) { return render_sft_record(load(t), family); },
      py::arg("task"), py::arg("template_family") = "qwen");
  m.def("cot_problem", [](const std::string& t) { return cot_problem(load(t)); });
  m.def("verify_cot", [](const std::string& t) { return verify_cot(load(t)); });
  m.def("round_trips", [](const std::string& t) {
    const Task task = load(t);
    return same_structure(extract_dag(task), task.dag);
  });
  m.def(
      "bridge_augment",
      [](const std::string& t, double p, std::uint64_t seed) { return dump(bridge_augment(load(t), {p, true, {}, seed})); },
      py::arg("task"), py::arg("p") = 0.1, py::arg("seed") = 0);
  m.def("pp_aug", [](const std::string& t, std::size_t copies, std::uint64_t seed) {
    std::vector<std::string> out;
    for (const Task& x : pp_aug(load(t), copies, seed)) out.push_back(dump(x));
    return out;
  });
  m.def("rc_aug", [](const std::string& t, std::size_t copies, std::uint64_t seed) {
    std::vector<std::string> out;
    for (const Task& x : rc_aug(load(t), copies, seed)) out.push_back(dump(x));
    return out;
  });
  m.def("rejection_filter", &rejection_filter);

  m.def(
      "outcome_reward", [](const std::string& text, std::int64_t gold, bool bonus) { return outcome_reward(text, gold, bonus); },
      py::arg("text"), py::arg("gold"), py::arg("format_bonus") = false);
  m.def(
      "group_advantages",
      [](const std::vector<double>& r, const std::string& v) { return group_advantages(r, parse_variant(v)); },
      py::arg("rewards"), py::arg("variant") = "grpo");
  m.def("closed_form_advantages", &closed_form_advantages);
  m.def(
      "info_coefficient", [](double alpha, const std::string& v) { return info_coefficient(alpha, parse_variant(v)); },
      py::arg("alpha"), py::arg("variant") = "grpo");
  m.def(
      "per_step_influence",
      [](const std::vector<std::vector<double>>& train, const std::vector<bool>& correct,
         const std::vector<std::vector<double>>& target, const std::vector<double>& target_adv, double eta,
         const std::string& v) {
        return per_step_influence(views(train), correct, views(target), target_adv, eta, parse_variant(v));
      },
      py::arg("train_grads"), py::arg("train_correct"), py::arg("target_grads"), py::arg("target_adv"),
      py::arg("eta") = 1.0, py::arg("variant") = "grpo");
  m.def(
      "per_step_influence_raw",
      [](const std::vector<std::vector<double>>& train, const std::vector<double>& adv,
         const std::vector<std::vector<double>>& target, const std::vector<double>& target_adv, double eta) {
        return per_step_influence_raw(views(train), adv, views(target), target_adv, eta);
      },
      py::arg("train_grads"), py::arg("train_adv"), py::arg("target_grads"), py::arg("target_adv"), py::arg("eta") = 1.0);

  m.def(
      "project",
      [](const std::vector<double>& g, std::uint64_t seed, std::size_t out_dim) {
        GradVector v;
        v.values = g;
        return project(v, ProjectionSpec{seed, g.size(), out_dim}).values;
      },
      py::arg("grad"), py::arg("seed"), py::arg("out_dim"));

  py::class_<ToyPolicy>(m, "ToyPolicy")
      .def(py::init<int, int>(), py::arg("vocab"), py::arg("eos") = -1)
      .def_static("random", &ToyPolicy::random, py::arg("vocab"), py::arg("scale"), py::arg("seed"), py::arg("eos") = -1)
      .def_property_readonly("vocab", &ToyPolicy::vocab)
      .def_property_readonly("num_params", &ToyPolicy::num_params)
      .def_property_readonly("theta", [](const ToyPolicy& p) { return p.theta(); })
      .def("probs", &ToyPolicy::probs, py::arg("row"), py::arg("temperature") = 1.0)
      .def("logprob", [](const ToyPolicy& p, const Tokens& q, const Tokens& o) { return logprob(p, q, o); })
      .def("grad_logprob", [](const ToyPolicy& p, const Tokens& q, const Tokens& o) { return grad_logprob(p, q, o); })
      .def("sample", &sample_group, py::arg("prompt"), py::arg("n"), py::arg("temperature"), py::arg("max_len"),
           py::arg("seed"))
      .def("sft_step", &sft_step, py::arg("batch"), py::arg("lr"));
}
