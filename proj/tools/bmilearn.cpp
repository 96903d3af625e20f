#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "bmilearn/artifacts.hpp"
#include "bmilearn/config.hpp"
#include "bmilearn/feedforward.hpp"
#include "bmilearn/pipeline.hpp"
#include "bmilearn/stats.hpp"
#include "bmilearn/sweep.hpp"

namespace fs = std::filesystem;
using namespace bmilearn;

namespace {

enum Exit { kOk = 0, kUsage = 1, kConfig = 2, kDivergence = 3 };

struct Options {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::size_t jobs = 1;
  std::string plan;
  std::optional<std::size_t> replicates;
};

// A path wins; otherwise the name of a shipped preset is accepted.
ExperimentConfig resolve_config(const std::string& what) {
  if (fs::exists(what)) return load_config(what);
  for (const auto& name : preset_names())
    if (name == what) return preset(name);
  throw ConfigError("config file not found: " + what, "config");
}

std::uint64_t pick_seed(const Options& o, const ExperimentConfig& cfg) { return o.seed.value_or(cfg.seed); }

int cmd_pretrain(const Options& o) {
  const ExperimentConfig cfg = resolve_config(o.config);
  const std::uint64_t seed = pick_seed(o, cfg);
  const PretrainResult pre = pretrain(cfg, seed);
  write_pretrain_artifact(o.out, cfg, seed, pre);
  std::cout << "pretrain loss " << pre.initial_loss << " -> " << pre.final_loss
            << (pre.learned ? " (learned)" : " (not learned)") << "\n";
  return kOk;
}

int cmd_retrain(const Options& o) {
  const ExperimentConfig cfg = resolve_config(o.config);
  const std::uint64_t seed = pick_seed(o, cfg);
  const RunOutput run = run_experiment(cfg, seed);
  write_run_artifact(o.out, cfg, seed, run);
  std::cout << "retrain loss " << run.post.early_loss << " -> " << run.post.late_loss
            << (run.post.obs.learned ? " (learned)" : " (not learned)") << "\n";
  for (const auto& r : run.rows)
    if (r.window < 0) std::cout << "  ffcc " << r.hypothesis << " " << r.ffcc << "\n";
  return kOk;
}

int cmd_analyze(const Options& o) {
  const Observables obs = load_observables(o.out);
  const auto rows = analyze(obs);
  write_analysis(fs::path(o.out) / "analysis.csv", rows);
  for (const auto& r : rows) {
    std::cout << r.hypothesis;
    if (r.window >= 0) std::cout << " window " << r.window;
    std::cout << " " << r.ffcc << "\n";
  }
  return kOk;
}

int cmd_sweep(const Options& o) {
  const auto plan = plan_from_string(o.plan);
  if (!plan) {
    std::cerr << "unknown plan '" << o.plan << "'\n";
    return kUsage;
  }
  std::optional<ExperimentConfig> base;
  if (!o.config.empty()) base = resolve_config(o.config);
  SweepOptions opt;
  opt.jobs = o.jobs;
  opt.ff_replicates = o.replicates;
  if (o.seed) opt.seeds = std::vector<std::uint64_t>{*o.seed};
  const auto cells = plan_cells(*plan, base);
  const auto rows = run_sweep(*plan, cells, opt);
  const auto summary = summarize(rows);
  write_sweep_csv(fs::path(o.out) / (o.plan + ".csv"), rows);
  write_summary_csv(fs::path(o.out) / (o.plan + "_summary.csv"), summary);

  std::size_t failed = 0;
  for (const auto& r : rows)
    if (r.status != "ok") ++failed;
  for (const auto& s : summary) {
    std::cout << s.cell;
    if (s.window >= 0) std::cout << " w" << s.window;
    std::cout << " " << s.hypothesis << " mean " << s.mean << " sem " << s.sem << " (n=" << s.n << "/" << s.n_runs
              << ")";
    if (s.test) std::cout << " p " << s.test->p << " " << to_string(s.test->stars);
    std::cout << "\n";
  }
  if (failed) std::cout << failed << " run(s) failed; see the status column\n";
  return kOk;
}

int cmd_feedforward(const Options& o) {
  const std::size_t reps = o.replicates.value_or(100);
  const std::uint64_t first = o.seed.value_or(0);
  fs::create_directories(o.out);
  std::ofstream out(fs::path(o.out) / "feedforward.csv");
  out << "rule,seed,sim_m,corr_sl_pred,corr_rl_pred,initial_loss,final_loss\n";
  for (ff::FfRule rule : {ff::FfRule::sl, ff::FfRule::rl}) {
    ff::FfExperiment exp = ff::FfExperiment::standard(rule);
    std::vector<double> correct, wrong;
    for (std::size_t i = 0; i < reps; ++i) {
      const ff::FfResult r = ff::run_ff_experiment(exp, rule, first + i);
      const bool sl = rule == ff::FfRule::sl;
      out << (sl ? "sl" : "rl") << ',' << r.seed << ',' << format_double(r.sim_m) << ','
          << format_double(r.corr_sl_pred) << ',' << format_double(r.corr_rl_pred) << ','
          << format_double(r.initial_loss) << ',' << format_double(r.final_loss) << '\n';
      correct.push_back(sl ? r.corr_sl_pred : r.corr_rl_pred);
      wrong.push_back(sl ? r.corr_rl_pred : r.corr_sl_pred);
    }
    const TTestResult t = two_sample_t(correct, wrong);
    std::cout << (rule == ff::FfRule::sl ? "sl" : "rl") << "-trained: correct " << mean(correct) << " wrong "
              << mean(wrong) << " p " << t.p << " " << to_string(t.stars) << "\n";
  }
  return kOk;
}

int cmd_report(const Options& o) {
  for (const auto& p : write_report(o.out)) std::cout << p.string() << "\n";
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Simulate BMI learning and infer the learning rule from flow-field changes"};
  app.require_subcommand(1);
  Options o;

  auto* pre = app.add_subcommand("pretrain", "Pretrain a network and write its weights");
  auto* re = app.add_subcommand("retrain", "Pretrain, switch decoder, retrain and analyze one seed");
  auto* an = app.add_subcommand("analyze", "Recompute analysis.csv from a run directory's observables");
  auto* sw = app.add_subcommand("sweep", "Run a parameter sweep over seeds");
  auto* fw = app.add_subcommand("feedforward", "Feedforward SL/RL discrimination over replicate networks");
  auto* rp = app.add_subcommand("report", "Turn sweep CSVs into long-format tables");

  for (auto* sub : {pre, re}) {
    sub->add_option("--config", o.config, "Config JSON file or preset name")->required();
    sub->add_option("--out", o.out, "Run directory")->required();
    sub->add_option("--seed", o.seed, "Seed (default: the config's seed)");
  }
  an->add_option("--out", o.out, "Run directory written by retrain")->required();
  sw->add_option("--plan", o.plan, "Sweep plan")->required()->check(CLI::IsMember(plan_names()));
  sw->add_option("--config", o.config, "Template config replacing the plan's presets");
  sw->add_option("--out", o.out, "Output directory")->required();
  sw->add_option("--jobs", o.jobs, "Parallel runs")->check(CLI::PositiveNumber);
  sw->add_option("--seed", o.seed, "Run this single seed instead of each config's list");
  sw->add_option("--replicates", o.replicates, "Feedforward replicates per cell")->check(CLI::PositiveNumber);
  fw->add_option("--out", o.out, "Output directory")->required();
  fw->add_option("--seed", o.seed, "First replicate seed");
  fw->add_option("--replicates", o.replicates, "Replicate networks per rule")->check(CLI::PositiveNumber);
  rp->add_option("--out", o.out, "Directory holding sweep CSVs")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kOk : kUsage;
  }

  try {
    if (*pre) return cmd_pretrain(o);
    if (*re) return cmd_retrain(o);
    if (*an) return cmd_analyze(o);
    if (*sw) return cmd_sweep(o);
    if (*fw) return cmd_feedforward(o);
    if (*rp) return cmd_report(o);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfig;
  } catch (const DivergenceError& e) {
    std::cerr << "divergence: " << e.what() << "\n";
    return kDivergence;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  }
  return kUsage;
}
