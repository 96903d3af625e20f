#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "bmilearn/artifacts.hpp"
#include "bmilearn/config.hpp"
#include "bmilearn/feedforward.hpp"
#include "bmilearn/pipeline.hpp"
#include "bmilearn/stats.hpp"
#include "bmilearn/sweep.hpp"

namespace py = pybind11;
using namespace bmilearn;

namespace {

py::array_t<double> to_numpy(const Matrix& m) {
  py::array_t<double> a({m.rows(), m.cols()});
  auto v = m.values();
  std::copy(v.begin(), v.end(), a.mutable_data());
  return a;
}

py::dict analysis_dict(const AnalysisRow& r) {
  py::dict d;
  d["rule_trained"] = r.rule_trained;
  d["hypothesis"] = r.hypothesis;
  d["alignment"] = r.alignment;
  d["seed"] = r.seed;
  d["ffcc"] = r.ffcc;
  d["skipped_terms"] = r.skipped_terms;
  d["learned"] = r.learned;
  d["window"] = r.window;
  return d;
}

py::list analysis_list(const std::vector<AnalysisRow>& rows) {
  py::list out;
  for (const auto& r : rows) out.append(analysis_dict(r));
  return out;
}

ExperimentConfig config_from(const py::object& cfg) {
  if (py::isinstance<py::str>(cfg)) {
    const auto s = cfg.cast<std::string>();
    for (const auto& name : preset_names())
      if (name == s) return preset(s);
    return parse_config(s);
  }
  if (py::isinstance<py::dict>(cfg)) {
    auto json = py::module_::import("json");
    return parse_config(json.attr("dumps")(cfg).cast<std::string>());
  }
  throw py::type_error("config must be a preset name, a JSON string or a dict");
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "BMI learning simulations and flow-field learning-rule inference";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<DivergenceError>(m, "DivergenceError", PyExc_ArithmeticError);

  m.def("preset_names", &preset_names);
  m.def(
      "preset", [](const std::string& name) { return config_to_json(preset(name)); }, py::arg("name"),
      "Preset config as a JSON string");
  m.def(
      "normalize_config", [](const py::object& cfg) { return config_to_json(config_from(cfg)); }, py::arg("config"),
      "Validate a config and return it as JSON with every field filled in");

  m.def(
      "run_experiment",
      [](const py::object& cfg_obj, std::optional<std::uint64_t> seed, std::optional<std::string> out) {
        const ExperimentConfig cfg = config_from(cfg_obj);
        const std::uint64_t s = seed.value_or(cfg.seed);
        RunOutput run;
        {
          py::gil_scoped_release release;
          run = run_experiment(cfg, s);
          if (out) write_run_artifact(*out, cfg, s, run);
        }
        py::dict d;
        d["seed"] = s;
        d["pretrain_initial_loss"] = run.pre.initial_loss;
        d["pretrain_final_loss"] = run.pre.final_loss;
        d["pretrain_learned"] = run.pre.learned;
        d["early_loss"] = run.post.early_loss;
        d["late_loss"] = run.post.late_loss;
        d["learned"] = run.post.obs.learned;
        d["trials_to_criterion"] = run.post.trials_to_criterion;
        d["m_alignment"] = run.post.m_alignment;
        d["w_bmi"] = to_numpy(run.post.obs.w_bmi);
        d["m"] = to_numpy(run.post.obs.m);
        d["analysis"] = analysis_list(run.rows);
        return d;
      },
      py::arg("config"), py::arg("seed") = py::none(), py::arg("out") = py::none(),
      "Pretrain, retrain and analyze one seed; optionally write the run directory");

  m.def(
      "analyze_run",
      [](const std::string& dir) { return analysis_list(analyze(load_observables(dir))); }, py::arg("run_dir"),
      "FFCC rows recomputed from a run directory");

  m.def(
      "feedforward",
      [](const std::string& rule, std::uint64_t seed) {
        ff::FfRule r;
        if (rule == "sl") r = ff::FfRule::sl;
        else if (rule == "rl") r = ff::FfRule::rl;
        else throw py::value_error("rule must be 'sl' or 'rl'");
        const auto res = ff::run_ff_experiment(ff::FfExperiment::standard(r), r, seed);
        py::dict d;
        d["sim_m"] = res.sim_m;
        d["corr_sl_pred"] = res.corr_sl_pred;
        d["corr_rl_pred"] = res.corr_rl_pred;
        d["initial_loss"] = res.initial_loss;
        d["final_loss"] = res.final_loss;
        return d;
      },
      py::arg("rule"), py::arg("seed") = 0);

  m.def(
      "welch_t",
      [](const std::vector<double>& a, const std::vector<double>& b) {
        const auto t = two_sample_t(a, b);
        return py::make_tuple(t.t, t.df, t.p, to_string(t.stars));
      },
      py::arg("a"), py::arg("b"), "Welch two-sided t-test: (t, df, p, stars)");

  m.def("plan_names", &plan_names);
  m.def(
      "sweep",
      [](const std::string& plan_name, const std::string& out, std::size_t jobs,
         std::optional<std::vector<std::uint64_t>> seeds, const py::object& base) {
        const auto plan = plan_from_string(plan_name);
        if (!plan) throw py::value_error("unknown plan: " + plan_name);
        std::optional<ExperimentConfig> b;
        if (!base.is_none()) b = config_from(base);
        SweepOptions opt;
        opt.jobs = jobs;
        opt.seeds = seeds;
        py::gil_scoped_release release;
        const auto rows = run_sweep(*plan, plan_cells(*plan, b), opt);
        const std::filesystem::path dir(out);
        write_sweep_csv(dir / (plan_name + ".csv"), rows);
        write_summary_csv(dir / (plan_name + "_summary.csv"), summarize(rows));
        return rows.size();
      },
      py::arg("plan"), py::arg("out"), py::arg("jobs") = 1, py::arg("seeds") = py::none(),
      py::arg("config") = py::none(), "Run a sweep plan and write its CSVs; returns the row count");

  m.attr("__version__") = BMILEARN_VERSION;
}
