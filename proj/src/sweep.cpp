#include "bmilearn/sweep.hpp"

#include <algorithm>
#include <atomic>
#include <fstream>
#include <map>
#include <sstream>
#include <thread>

#include "bmilearn/artifacts.hpp"
#include "bmilearn/pipeline.hpp"

namespace bmilearn {

namespace fs = std::filesystem;

namespace {

const std::vector<std::pair<Plan, std::string>>& plan_table() {
  static const std::vector<std::pair<Plan, std::string>> t = {
      {Plan::alignment, "alignment"},
      {Plan::noise_scale, "noise_scale"},
      {Plan::network_size, "network_size"},
      {Plan::feedback_gain, "feedback_gain"},
      {Plan::noise_rank, "noise_rank"},
      {Plan::decoder_similarity, "decoder_similarity"},
      {Plan::subset_readout, "subset_readout"},
      {Plan::bptt, "bptt"},
      {Plan::linear, "linear"},
      {Plan::velocity, "velocity"},
      {Plan::feedforward, "feedforward"},
      {Plan::mirror, "mirror"},
  };
  return t;
}

std::string num(double v) {
  std::ostringstream s;
  s << v;
  return s.str();
}

std::string clean(std::string s) {
  for (char& c : s)
    if (c == ',' || c == '\n' || c == '\r') c = ';';
  return s;
}

}  // namespace

std::string to_string(Plan p) {
  for (const auto& [plan, name] : plan_table())
    if (plan == p) return name;
  return "?";
}

std::optional<Plan> plan_from_string(const std::string& s) {
  for (const auto& [plan, name] : plan_table())
    if (name == s) return plan;
  return std::nullopt;
}

std::vector<std::string> plan_names() {
  std::vector<std::string> out;
  for (const auto& e : plan_table()) out.push_back(e.second);
  return out;
}

std::string reference_hypothesis(const std::string& rule_trained) {
  return rule_trained == "rl" ? "rl" : "sl_true_m";
}

std::vector<SweepCell> plan_cells(Plan plan, const std::optional<ExperimentConfig>& base) {
  std::vector<SweepCell> cells;
  // `pick` chooses the plan's own preset unless a template was supplied.
  auto pick = [&](const std::string& preset_name, TrainRule rule) {
    ExperimentConfig c = base ? *base : preset(preset_name);
    c.rule = rule;
    return c;
  };
  auto add = [&](ExperimentConfig c, const std::string& param, double value) {
    c.validate();
    SweepCell cell;
    cell.label = to_string(c.rule) + "/" + param + "=" + num(value);
    cell.param = param;
    cell.value = value;
    cell.cfg = std::move(c);
    cells.push_back(std::move(cell));
  };
  const std::pair<std::string, TrainRule> sl_rl[] = {{"main_sl", TrainRule::sl_rflo}, {"main_rl", TrainRule::rl}};

  switch (plan) {
    case Plan::alignment:
      for (const auto& [name, rule] : sl_rl)
        for (double a : {0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0}) {
          ExperimentConfig c = pick(name, rule);
          c.alignment = a;
          add(c, "alignment", a);
        }
      break;
    case Plan::noise_scale:
      for (const auto& [name, rule] : sl_rl)
        for (double s : {0.05, 0.1, 0.25, 0.5}) {
          ExperimentConfig c = pick(name, rule);
          c.sigma2_rec = s;
          add(c, "sigma2_rec", s);
        }
      break;
    case Plan::network_size:
      for (const auto& [name, rule] : sl_rl)
        for (std::size_t n : {25, 50, 100, 200}) {
          ExperimentConfig c = pick(name, rule);
          c.n = n;
          add(c, "n", static_cast<double>(n));
        }
      break;
    case Plan::feedback_gain:
      for (const auto& [name, rule] :
           {std::pair{std::string("feedback_sl"), TrainRule::sl_rflo}, {"feedback_rl", TrainRule::rl}})
        for (double g : {0.0, 0.5, 1.0, 2.0, 5.0}) {
          ExperimentConfig c = pick(name, rule);
          c.feedback_gain = g;
          if (!base && rule == TrainRule::rl) c.seeds = {0, 1, 2, 3, 4, 5, 6, 7};
          add(c, "feedback_gain", g);
        }
      break;
    case Plan::noise_rank:
      for (const auto& [name, rule] :
           {std::pair{std::string("low_rank_sl"), TrainRule::sl_rflo}, {"low_rank_rl", TrainRule::rl}})
        for (std::size_t d : {5, 10, 25, 50}) {
          ExperimentConfig c = pick(name, rule);
          c.noise_rank = d;
          add(c, "noise_rank", static_cast<double>(d));
        }
      break;
    case Plan::decoder_similarity:
      for (const auto& [name, rule] : sl_rl)
        for (double s : {0.2, 0.5, 0.8}) {
          ExperimentConfig c = pick(name, rule);
          c.decoder_similarity = s;
          add(c, "decoder_similarity", s);
        }
      break;
    case Plan::subset_readout:
      for (const auto& [name, rule] :
           {std::pair{std::string("subset_readout_sl"), TrainRule::sl_rflo}, {"subset_readout_rl", TrainRule::rl}})
        for (std::size_t u : {25, 100, 200}) {
          ExperimentConfig c = pick(name, rule);
          c.readout_units = u;
          add(c, "readout_units", static_cast<double>(u));
        }
      break;
    case Plan::bptt:
      for (double a : {0.5, 1.0}) {
        ExperimentConfig c = pick("bptt", TrainRule::sl_bptt);
        c.alignment = a;
        add(c, "alignment", a);
      }
      break;
    case Plan::linear:
      for (const auto& [name, rule] :
           {std::pair{std::string("linear_sl"), TrainRule::sl_rflo}, {"linear_rl", TrainRule::rl}}) {
        ExperimentConfig c = pick(name, rule);
        c.activation = Activation::linear;
        add(c, "alignment", c.alignment);
      }
      break;
    case Plan::velocity:
      for (const auto& [name, rule] :
           {std::pair{std::string("velocity_sl"), TrainRule::sl_rflo}, {"velocity_rl", TrainRule::rl}}) {
        ExperimentConfig c = pick(name, rule);
        c.readout_mode = ReadoutMode::velocity;
        add(c, "alignment", c.alignment);
      }
      break;
    case Plan::mirror: {
      ExperimentConfig c = pick("mirror", TrainRule::sl_rflo);
      if (c.eta_wm <= 0.0) c.eta_wm = preset("mirror").eta_wm;
      add(c, "eta_wm", c.eta_wm);
      break;
    }
    case Plan::feedforward:
      for (ff::FfRule rule : {ff::FfRule::sl, ff::FfRule::rl})
        for (double s : {0.1, 0.3, 0.6, 1.0}) {
          SweepCell cell;
          cell.label = std::string(rule == ff::FfRule::sl ? "sl" : "rl") + "/sim_m=" + num(s);
          cell.param = "sim_m";
          cell.value = s;
          cell.ff_rule = rule;
          cell.ff = ff::FfExperiment::standard(rule);
          cell.ff->sim_m = s;
          cells.push_back(std::move(cell));
        }
      break;
  }
  return cells;
}

namespace {

struct Job {
  std::size_t cell;
  std::uint64_t seed;
};

std::vector<SweepRow> run_job(Plan plan, const SweepCell& cell, std::uint64_t seed) {
  SweepRow base;
  base.plan = to_string(plan);
  base.cell = cell.label;
  base.param = cell.param;
  base.value = cell.value;
  base.seed = seed;
  std::vector<SweepRow> rows;
  try {
    if (cell.ff) {
      base.rule_trained = cell.ff_rule == ff::FfRule::sl ? "sl" : "rl";
      const ff::FfResult r = ff::run_ff_experiment(*cell.ff, cell.ff_rule, seed);
      base.alignment = r.sim_m;
      base.pre_initial = r.initial_loss;
      base.pre_final = r.final_loss;
      base.early_loss = r.initial_loss;
      base.late_loss = r.final_loss;
      base.learned = r.final_loss < r.initial_loss;
      for (const auto& [hyp, v] : {std::pair{"sl_true_m", r.corr_sl_pred}, {"rl", r.corr_rl_pred}}) {
        SweepRow row = base;
        row.hypothesis = hyp;
        row.ffcc = v;
        rows.push_back(std::move(row));
      }
      return rows;
    }
    base.rule_trained = to_string(cell.cfg.rule);
    base.alignment = cell.cfg.alignment;
    const RunOutput out = run_experiment(cell.cfg, seed);
    base.pre_initial = out.pre.initial_loss;
    base.pre_final = out.pre.final_loss;
    base.early_loss = out.post.early_loss;
    base.late_loss = out.post.late_loss;
    base.trials_to_criterion =
        out.post.trials_to_criterion ? static_cast<long>(*out.post.trials_to_criterion) : -1L;
    base.final_m_alignment = out.post.m_alignment.empty() ? 0.0 : out.post.m_alignment.back();
    base.learned = out.post.obs.learned;
    for (const AnalysisRow& a : out.rows) {
      SweepRow row = base;
      row.hypothesis = a.hypothesis;
      row.window = a.window;
      row.alignment = a.alignment;
      row.ffcc = a.ffcc;
      row.skipped_terms = a.skipped_terms;
      rows.push_back(std::move(row));
    }
  } catch (const DivergenceError& e) {
    rows.clear();
    base.status = "diverged";
    base.error = clean(e.what());
    rows.push_back(base);
  } catch (const std::exception& e) {
    rows.clear();
    base.status = "failed";
    base.error = clean(e.what());
    rows.push_back(base);
  }
  return rows;
}

}  // namespace

std::vector<SweepRow> run_sweep(Plan plan, const std::vector<SweepCell>& cells, const SweepOptions& opt) {
  std::vector<Job> jobs;
  for (std::size_t c = 0; c < cells.size(); ++c) {
    std::vector<std::uint64_t> seeds;
    if (opt.seeds) {
      seeds = *opt.seeds;
    } else if (cells[c].ff) {
      for (std::uint64_t s = 0; s < opt.ff_replicates.value_or(100); ++s) seeds.push_back(s);
    } else {
      seeds = cells[c].cfg.seeds;
    }
    for (std::uint64_t s : seeds) jobs.push_back({c, s});
  }

  std::vector<std::vector<SweepRow>> results(jobs.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < jobs.size(); i = next++)
      results[i] = run_job(plan, cells[jobs[i].cell], jobs[i].seed);
  };
  const std::size_t n_threads = std::clamp<std::size_t>(opt.jobs, 1, std::max<std::size_t>(jobs.size(), 1));
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < n_threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();

  std::vector<SweepRow> rows;
  for (auto& r : results) rows.insert(rows.end(), r.begin(), r.end());
  return rows;
}

std::vector<SummaryRow> summarize(const std::vector<SweepRow>& rows) {
  // Keys keep first-appearance order so the summary follows the grid.
  using Key = std::tuple<std::string, int, std::string>;
  std::vector<Key> order;
  std::map<Key, std::vector<double>> values;
  std::map<Key, std::size_t> runs;
  std::map<Key, const SweepRow*> proto;
  for (const SweepRow& r : rows) {
    if (r.status != "ok") continue;
    const Key k{r.cell, r.window, r.hypothesis};
    if (!proto.count(k)) {
      order.push_back(k);
      proto[k] = &r;
      values[k];
    }
    ++runs[k];
    if (r.learned) values[k].push_back(r.ffcc);
  }

  std::vector<SummaryRow> out;
  for (const Key& k : order) {
    const SweepRow& p = *proto[k];
    SummaryRow s;
    s.plan = p.plan;
    s.cell = p.cell;
    s.param = p.param;
    s.value = p.value;
    s.rule_trained = p.rule_trained;
    s.window = p.window;
    s.hypothesis = p.hypothesis;
    const auto& v = values[k];
    s.n = v.size();
    s.n_runs = runs[k];
    if (!v.empty()) s.mean = mean(v);
    if (v.size() >= 2) s.sem = sem(v);
    s.reference = reference_hypothesis(p.rule_trained);
    const Key ref{p.cell, p.window, s.reference};
    if (s.hypothesis != s.reference && values.count(ref)) {
      const auto& rv = values[ref];
      if (rv.size() >= 2 && v.size() >= 2) {
        try {
          s.test = two_sample_t(rv, v);
        } catch (const std::exception&) {
        }
      }
    }
    out.push_back(std::move(s));
  }
  return out;
}

namespace {

const char* kSweepHeader =
    "plan,cell,param,value,rule_trained,seed,hypothesis,window,alignment,ffcc,skipped_terms,learned,status,error,"
    "pre_initial_loss,pre_final_loss,early_loss,late_loss,trials_to_criterion,final_m_alignment";

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ArtifactError("cannot write " + path.string());
  return out;
}

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out(1);
  for (char c : line) {
    if (c == ',') out.emplace_back();
    else out.back() += c;
  }
  return out;
}

}  // namespace

void write_sweep_csv(const fs::path& path, const std::vector<SweepRow>& rows) {
  std::ofstream out = open_out(path);
  out << kSweepHeader << '\n';
  for (const SweepRow& r : rows) {
    out << r.plan << ',' << r.cell << ',' << r.param << ',' << format_double(r.value) << ',' << r.rule_trained << ','
        << r.seed << ',' << r.hypothesis << ',' << r.window << ',' << format_double(r.alignment) << ','
        << format_double(r.ffcc) << ',' << r.skipped_terms << ',' << (r.learned ? 1 : 0) << ',' << r.status << ','
        << r.error << ',' << format_double(r.pre_initial) << ',' << format_double(r.pre_final) << ','
        << format_double(r.early_loss) << ',' << format_double(r.late_loss) << ',' << r.trials_to_criterion << ','
        << format_double(r.final_m_alignment) << '\n';
  }
}

std::vector<SweepRow> read_sweep_csv(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ArtifactError("cannot read " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != kSweepHeader) throw ArtifactError(path.string() + ": not a sweep CSV");
  std::vector<SweepRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto c = split_line(line);
    if (c.size() != 20) throw ArtifactError(path.string() + ": wrong number of columns");
    SweepRow r;
    r.plan = c[0];
    r.cell = c[1];
    r.param = c[2];
    r.value = parse_double(c[3]);
    r.rule_trained = c[4];
    r.seed = std::stoull(c[5]);
    r.hypothesis = c[6];
    r.window = std::stoi(c[7]);
    r.alignment = parse_double(c[8]);
    r.ffcc = parse_double(c[9]);
    r.skipped_terms = std::stoull(c[10]);
    r.learned = c[11] == "1";
    r.status = c[12];
    r.error = c[13];
    r.pre_initial = parse_double(c[14]);
    r.pre_final = parse_double(c[15]);
    r.early_loss = parse_double(c[16]);
    r.late_loss = parse_double(c[17]);
    r.trials_to_criterion = std::stol(c[18]);
    r.final_m_alignment = parse_double(c[19]);
    rows.push_back(std::move(r));
  }
  return rows;
}

void write_summary_csv(const fs::path& path, const std::vector<SummaryRow>& rows) {
  std::ofstream out = open_out(path);
  out << "plan,cell,param,value,rule_trained,window,hypothesis,n_learned,n_runs,mean_ffcc,sem_ffcc,reference,t,df,p,"
         "stars\n";
  for (const SummaryRow& s : rows) {
    out << s.plan << ',' << s.cell << ',' << s.param << ',' << format_double(s.value) << ',' << s.rule_trained << ','
        << s.window << ',' << s.hypothesis << ',' << s.n << ',' << s.n_runs << ',' << format_double(s.mean) << ','
        << format_double(s.sem) << ',' << s.reference << ',';
    if (s.test) {
      out << format_double(s.test->t) << ',' << format_double(s.test->df) << ',' << format_double(s.test->p) << ','
          << to_string(s.test->stars);
    } else {
      out << ",,,";
    }
    out << '\n';
  }
}

std::vector<fs::path> write_report(const fs::path& dir) {
  std::vector<fs::path> sources;
  if (fs::is_directory(dir))
    for (const auto& e : fs::directory_iterator(dir)) {
      const fs::path& p = e.path();
      if (p.extension() != ".csv") continue;
      const std::string stem = p.stem().string();
      if (stem.size() >= 8 && stem.ends_with("_summary")) continue;
      if (!plan_from_string(stem)) continue;
      sources.push_back(p);
    }
  std::sort(sources.begin(), sources.end());
  if (sources.empty()) throw ArtifactError("no sweep CSVs in " + dir.string());

  std::vector<fs::path> written;
  for (const fs::path& src : sources) {
    const auto rows = read_sweep_csv(src);
    const std::string stem = src.stem().string();

    const fs::path runs_path = dir / "report" / (stem + "_runs_long.csv");
    {
      std::ofstream out = open_out(runs_path);
      out << "plan,cell,param,param_value,rule_trained,seed,window,hypothesis,measure,value\n";
      auto line = [&](const SweepRow& r, const std::string& hyp, const std::string& measure, double v) {
        out << r.plan << ',' << r.cell << ',' << r.param << ',' << format_double(r.value) << ',' << r.rule_trained
            << ',' << r.seed << ',' << r.window << ',' << hyp << ',' << measure << ',' << format_double(v) << '\n';
      };
      std::string last_run;
      for (const SweepRow& r : rows) {
        const std::string run = r.cell + "#" + std::to_string(r.seed);
        if (run != last_run) {
          last_run = run;
          line(r, "", "ok", r.status == "ok" ? 1.0 : 0.0);
          if (r.status == "ok") {
            line(r, "", "learned", r.learned ? 1.0 : 0.0);
            line(r, "", "pre_initial_loss", r.pre_initial);
            line(r, "", "pre_final_loss", r.pre_final);
            line(r, "", "early_loss", r.early_loss);
            line(r, "", "late_loss", r.late_loss);
            if (r.trials_to_criterion >= 0)
              line(r, "", "trials_to_criterion", static_cast<double>(r.trials_to_criterion));
            line(r, "", "final_m_alignment", r.final_m_alignment);
          }
        }
        if (r.status == "ok") line(r, r.hypothesis, "ffcc", r.ffcc);
      }
    }
    written.push_back(runs_path);

    const fs::path sum_path = dir / "report" / (stem + "_summary_long.csv");
    {
      std::ofstream out = open_out(sum_path);
      out << "plan,cell,param,param_value,rule_trained,window,hypothesis,statistic,value,stars\n";
      for (const SummaryRow& s : summarize(rows)) {
        auto line = [&](const std::string& stat, double v, const std::string& stars = "") {
          out << s.plan << ',' << s.cell << ',' << s.param << ',' << format_double(s.value) << ',' << s.rule_trained
              << ',' << s.window << ',' << s.hypothesis << ',' << stat << ',' << format_double(v) << ',' << stars
              << '\n';
        };
        line("n_learned", static_cast<double>(s.n));
        line("mean_ffcc", s.mean);
        line("sem_ffcc", s.sem);
        if (s.test) {
          line("t_vs_" + s.reference, s.test->t);
          line("df_vs_" + s.reference, s.test->df);
          line("p_vs_" + s.reference, s.test->p, to_string(s.test->stars));
        }
      }
    }
    written.push_back(sum_path);
  }
  return written;
}

}  // namespace bmilearn
