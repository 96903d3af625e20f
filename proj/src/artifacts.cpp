#include "bmilearn/artifacts.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "json.hpp"

#ifndef BMILEARN_VERSION
#define BMILEARN_VERSION "0.0.0"
#endif

namespace bmilearn {

namespace fs = std::filesystem;
using json = nlohmann::json;

std::string code_version() { return BMILEARN_VERSION; }

std::string format_double(double v) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, r.ptr);
}

double parse_double(const std::string& s) {
  double v = 0.0;
  const char* b = s.data();
  const char* e = s.data() + s.size();
  if (!s.empty() && *b == '+') ++b;
  const auto r = std::from_chars(b, e, v);
  if (r.ec != std::errc() || r.ptr != e) throw ArtifactError("not a number: '" + s + "'");
  return v;
}

namespace {

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ArtifactError("cannot write " + path.string());
  return out;
}

std::ifstream open_in(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ArtifactError("cannot read " + path.string());
  return in;
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

json read_json(const fs::path& path) {
  std::ifstream in = open_in(path);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ArtifactError(path.string() + ": " + e.what());
  }
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out = open_out(path);
  out << text;
}

std::size_t to_index(const std::string& s) {
  std::size_t v = 0;
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size()) throw ArtifactError("not an index: '" + s + "'");
  return v;
}

}  // namespace

void write_matrix(const fs::path& path, const Matrix& m, const std::string& meta_json) {
  {
    std::ofstream out = open_out(path);
    for (std::size_t r = 0; r < m.rows(); ++r) {
      for (std::size_t c = 0; c < m.cols(); ++c) {
        if (c) out << ',';
        out << format_double(m(r, c));
      }
      out << '\n';
    }
  }
  json meta = json::parse(meta_json);
  meta["rows"] = m.rows();
  meta["cols"] = m.cols();
  meta["layout"] = "row-major";
  write_text(fs::path(path.string() + ".json"), meta.dump(2) + "\n");
}

Matrix read_matrix(const fs::path& path) {
  const json meta = read_json(fs::path(path.string() + ".json"));
  const std::size_t rows = meta.at("rows").get<std::size_t>();
  const std::size_t cols = meta.at("cols").get<std::size_t>();
  Matrix m(rows, cols);
  std::ifstream in = open_in(path);
  std::string line;
  std::size_t r = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto cells = split(line);
    if (r >= rows || cells.size() != cols) throw ArtifactError(path.string() + ": shape does not match its sidecar");
    for (std::size_t c = 0; c < cols; ++c) m(r, c) = parse_double(cells[c]);
    ++r;
  }
  if (r != rows) throw ArtifactError(path.string() + ": expected " + std::to_string(rows) + " rows");
  return m;
}

void write_trials(const fs::path& path, std::span<const std::vector<ObservedTrial>* const> blocks,
                  std::span<const std::string> labels) {
  if (blocks.size() != labels.size()) throw std::invalid_argument("write_trials: one label per block");
  std::size_t n = 0, ny = 0;
  for (const auto* b : blocks)
    if (b && !b->empty()) {
      n = b->front().h.cols();
      ny = b->front().y.cols();
      break;
    }
  std::ofstream out = open_out(path);
  out << "block,trial,target,t";
  for (std::size_t i = 0; i < n; ++i) out << ",h" << i;
  for (const char* name : {"y", "eps", "cursor"})
    for (std::size_t k = 0; k < ny; ++k) out << ',' << name << k;
  out << '\n';
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    const auto& block = *blocks[b];
    for (std::size_t n_trial = 0; n_trial < block.size(); ++n_trial) {
      const ObservedTrial& tr = block[n_trial];
      for (std::size_t t = 0; t < tr.h.rows(); ++t) {
        out << labels[b] << ',' << n_trial << ',' << tr.target_id << ',' << t;
        for (double v : tr.h.row(t)) out << ',' << format_double(v);
        for (const Matrix* m : {&tr.y, &tr.eps, &tr.cursor})
          for (double v : m->row(t)) out << ',' << format_double(v);
        out << '\n';
      }
    }
  }
}

std::vector<std::pair<std::string, std::vector<ObservedTrial>>> read_trials(const fs::path& path) {
  std::ifstream in = open_in(path);
  std::string line;
  if (!std::getline(in, line)) throw ArtifactError(path.string() + ": empty file");
  const auto header = split(line);
  std::size_t n = 0, ny = 0;
  for (const auto& h : header) {
    if (h.size() > 1 && h[0] == 'h') ++n;
    if (h.size() > 1 && h[0] == 'y') ++ny;
  }
  if (header.size() != 4 + n + 3 * ny) throw ArtifactError(path.string() + ": malformed header");

  struct Rows {
    std::size_t target;
    std::vector<std::vector<double>> steps;
  };
  std::vector<std::pair<std::string, std::vector<Rows>>> raw;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto cells = split(line);
    if (cells.size() != header.size()) throw ArtifactError(path.string() + ": wrong number of columns");
    const std::string& label = cells[0];
    const std::size_t trial = to_index(cells[1]);
    const std::size_t target = to_index(cells[2]);
    if (raw.empty() || raw.back().first != label) raw.push_back({label, {}});
    auto& trials = raw.back().second;
    if (trial == trials.size()) trials.push_back({target, {}});
    if (trial + 1 != trials.size()) throw ArtifactError(path.string() + ": trials out of order");
    std::vector<double> vals;
    vals.reserve(cells.size() - 4);
    for (std::size_t c = 4; c < cells.size(); ++c) vals.push_back(parse_double(cells[c]));
    trials.back().steps.push_back(std::move(vals));
  }

  std::vector<std::pair<std::string, std::vector<ObservedTrial>>> out;
  for (auto& [label, trials] : raw) {
    std::vector<ObservedTrial> block;
    for (auto& r : trials) {
      const std::size_t t_len = r.steps.size();
      ObservedTrial tr{r.target, Matrix(t_len, n), Matrix(t_len, ny), Matrix(t_len, ny), Matrix(t_len, ny)};
      for (std::size_t t = 0; t < t_len; ++t) {
        const auto& v = r.steps[t];
        for (std::size_t i = 0; i < n; ++i) tr.h(t, i) = v[i];
        for (std::size_t k = 0; k < ny; ++k) {
          tr.y(t, k) = v[n + k];
          tr.eps(t, k) = v[n + ny + k];
          tr.cursor(t, k) = v[n + 2 * ny + k];
        }
      }
      block.push_back(std::move(tr));
    }
    out.push_back({label, std::move(block)});
  }
  return out;
}

void write_metrics(const fs::path& path, std::span<const MetricRow> rows) {
  std::ofstream out = open_out(path);
  out << "phase,trial,target,loss\n";
  for (const auto& r : rows) out << r.phase << ',' << r.trial << ',' << r.target << ',' << format_double(r.loss) << '\n';
}

std::vector<MetricRow> read_metrics(const fs::path& path) {
  std::ifstream in = open_in(path);
  std::string line;
  std::getline(in, line);
  std::vector<MetricRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto c = split(line);
    if (c.size() != 4) throw ArtifactError(path.string() + ": wrong number of columns");
    rows.push_back({c[0], to_index(c[1]), to_index(c[2]), parse_double(c[3])});
  }
  return rows;
}

void write_analysis(const fs::path& path, std::span<const AnalysisRow> rows) {
  std::ofstream out = open_out(path);
  out << "rule_trained,hypothesis,alignment,seed,window,ffcc,skipped_terms,learned\n";
  for (const auto& r : rows)
    out << r.rule_trained << ',' << r.hypothesis << ',' << format_double(r.alignment) << ',' << r.seed << ','
        << r.window << ',' << format_double(r.ffcc) << ',' << r.skipped_terms << ',' << (r.learned ? 1 : 0) << '\n';
}

std::vector<AnalysisRow> read_analysis(const fs::path& path) {
  std::ifstream in = open_in(path);
  std::string line;
  std::getline(in, line);
  std::vector<AnalysisRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto c = split(line);
    if (c.size() != 8) throw ArtifactError(path.string() + ": wrong number of columns");
    AnalysisRow r;
    r.rule_trained = c[0];
    r.hypothesis = c[1];
    r.alignment = parse_double(c[2]);
    r.seed = std::stoull(c[3]);
    r.window = std::stoi(c[4]);
    r.ffcc = parse_double(c[5]);
    r.skipped_terms = to_index(c[6]);
    r.learned = c[7] == "1";
    rows.push_back(std::move(r));
  }
  return rows;
}

void write_run_config(const fs::path& dir, const ExperimentConfig& cfg, std::uint64_t seed) {
  ExperimentConfig c = cfg;
  c.seed = seed;
  json doc = json::parse(config_to_json(c));
  doc["code_version"] = code_version();
  write_text(dir / "config.json", doc.dump(2) + "\n");
}

namespace {

std::string meta(const std::string& name, const std::string& phase) {
  return json{{"name", name}, {"phase", phase}}.dump();
}

void write_pretrain_parts(const fs::path& dir, const PretrainResult& pre) {
  write_matrix(dir / "weights" / "pretrained.csv", pre.params.w_rec, meta("w_rec", "pretrained"));
  write_matrix(dir / "weights" / "w_in.csv", pre.params.w_in, meta("w_in", "fixed"));
  write_matrix(dir / "weights" / "w_bmi0.csv", pre.params.w_bmi, meta("w_bmi", "pretraining decoder"));
  write_matrix(dir / "weights" / "m0.csv", pre.m0, meta("m", "pretraining credit map"));
  if (pre.m_hat) {
    json j{{"name", "m_hat"},
           {"phase", "estimated after pretraining"},
           {"k", pre.m_hat->k},
           {"effective_rank", pre.m_hat->effective_rank},
           {"ridge", 1e-8}};
    write_matrix(dir / "weights" / "m_hat.csv", pre.m_hat->m_hat, j.dump());
  }
}

std::string pretrain_log(const PretrainResult& pre) {
  std::ostringstream log;
  log << "pretrain initial_loss " << format_double(pre.initial_loss) << "\n";
  log << "pretrain final_loss " << format_double(pre.final_loss) << "\n";
  log << "pretrain learned " << (pre.learned ? "yes" : "no") << "\n";
  return log.str();
}

}  // namespace

void write_pretrain_artifact(const fs::path& dir, const ExperimentConfig& cfg, std::uint64_t seed,
                             const PretrainResult& pre) {
  fs::create_directories(dir);
  write_run_config(dir, cfg, seed);
  write_pretrain_parts(dir, pre);
  write_metrics(dir / "metrics.csv", pre.metrics);
  write_text(dir / "log.txt", "code_version " + code_version() + "\nseed " + std::to_string(seed) + "\n" +
                                  pretrain_log(pre));
}

void write_run_artifact(const fs::path& dir, const ExperimentConfig& cfg, std::uint64_t seed, const RunOutput& run) {
  fs::create_directories(dir);
  write_run_config(dir, cfg, seed);
  write_pretrain_parts(dir, run.pre);
  write_matrix(dir / "weights" / "retrained.csv", run.post.params.w_rec, meta("w_rec", "retrained"));
  write_matrix(dir / "weights" / "w_fb.csv", run.post.params.w_fb, meta("w_fb", "retraining"));

  const Observables& obs = run.post.obs;
  const fs::path od = dir / "observables";
  write_matrix(od / "w_bmi.csv", obs.w_bmi, meta("w_bmi", "retraining decoder"));
  write_matrix(od / "sigma.csv", obs.sigma, meta("sigma", "recurrent noise covariance"));
  write_matrix(od / "m.csv", obs.m, meta("m", "true credit map (oracle)"));
  write_matrix(od / "m_random.csv", obs.m_random, meta("m_random", "random credit map"));
  if (obs.m_estimated) write_matrix(od / "m_estimated.csv", *obs.m_estimated, meta("m_hat", "estimated"));
  for (std::size_t w = 0; w < obs.windows.size(); ++w)
    write_matrix(od / ("window_" + std::to_string(w) + "_m.csv"), obs.windows[w].m, meta("m", "window mean"));
  json om{{"rule", to_string(obs.rule)},
          {"alignment", obs.alignment},
          {"seed", obs.seed},
          {"learned", obs.learned},
          {"windows", obs.windows.size()},
          {"has_m_estimated", obs.m_estimated.has_value()}};
  write_text(od / "meta.json", om.dump(2) + "\n");

  const fs::path td = dir / "trials";
  {
    const std::vector<ObservedTrial>* b[] = {&obs.early};
    const std::string l[] = {"early"};
    write_trials(td / "early.csv", b, l);
  }
  {
    const std::vector<ObservedTrial>* b[] = {&obs.mid_train, &obs.mid_test};
    const std::string l[] = {"train", "test"};
    write_trials(td / "mid.csv", b, l);
  }
  {
    const std::vector<ObservedTrial>* b[] = {&obs.late};
    const std::string l[] = {"late"};
    write_trials(td / "late.csv", b, l);
  }
  for (std::size_t w = 0; w < obs.windows.size(); ++w) {
    const auto& win = obs.windows[w];
    const std::vector<ObservedTrial>* b[] = {&win.early, &win.train, &win.test, &win.late};
    const std::string l[] = {"early", "train", "test", "late"};
    write_trials(td / ("window_" + std::to_string(w) + ".csv"), b, l);
  }

  std::vector<MetricRow> metrics = run.pre.metrics;
  metrics.insert(metrics.end(), run.post.metrics.begin(), run.post.metrics.end());
  write_metrics(dir / "metrics.csv", metrics);
  write_analysis(dir / "analysis.csv", run.rows);
  {
    std::ofstream out = open_out(dir / "m_alignment.csv");
    out << "trial,sim_m_bmi\n";
    for (std::size_t i = 0; i < run.post.m_alignment.size(); ++i)
      out << i << ',' << format_double(run.post.m_alignment[i]) << '\n';
  }

  std::ostringstream log;
  log << "code_version " << code_version() << "\nseed " << seed << "\nrule " << to_string(cfg.rule) << "\n";
  log << pretrain_log(run.pre);
  log << "retrain early_loss " << format_double(run.post.early_loss) << "\n";
  log << "retrain late_loss " << format_double(run.post.late_loss) << "\n";
  log << "retrain trials_to_criterion "
      << (run.post.trials_to_criterion ? std::to_string(*run.post.trials_to_criterion) : std::string("none")) << "\n";
  log << "learned " << (obs.learned ? "yes" : "no") << "\n";
  for (const auto& r : run.rows)
    log << "ffcc " << r.hypothesis << (r.window >= 0 ? " window " + std::to_string(r.window) : std::string()) << " "
        << format_double(r.ffcc) << "\n";
  write_text(dir / "log.txt", log.str());
}

Observables load_observables(const fs::path& dir) {
  const fs::path od = dir / "observables";
  const json om = read_json(od / "meta.json");
  Observables obs;
  const auto rule = train_rule_from_string(om.at("rule").get<std::string>());
  if (!rule) throw ArtifactError("observables/meta.json: unknown rule");
  obs.rule = *rule;
  obs.alignment = om.at("alignment").get<double>();
  obs.seed = om.at("seed").get<std::uint64_t>();
  obs.learned = om.at("learned").get<bool>();
  obs.w_bmi = read_matrix(od / "w_bmi.csv");
  obs.sigma = read_matrix(od / "sigma.csv");
  obs.m = read_matrix(od / "m.csv");
  obs.m_random = read_matrix(od / "m_random.csv");
  if (om.at("has_m_estimated").get<bool>()) obs.m_estimated = read_matrix(od / "m_estimated.csv");

  auto single = [&](const char* file, const char* label) {
    auto blocks = read_trials(dir / "trials" / file);
    if (blocks.size() != 1 || blocks[0].first != label) throw ArtifactError(std::string(file) + ": expected one block");
    return std::move(blocks[0].second);
  };
  obs.early = single("early.csv", "early");
  obs.late = single("late.csv", "late");
  for (auto& [label, trials] : read_trials(dir / "trials" / "mid.csv")) {
    if (label == "train") obs.mid_train = std::move(trials);
    else if (label == "test") obs.mid_test = std::move(trials);
    else throw ArtifactError("mid.csv: unknown block '" + label + "'");
  }
  const std::size_t n_windows = om.at("windows").get<std::size_t>();
  for (std::size_t w = 0; w < n_windows; ++w) {
    ObservedWindow win;
    win.m = read_matrix(od / ("window_" + std::to_string(w) + "_m.csv"));
    for (auto& [label, trials] : read_trials(dir / "trials" / ("window_" + std::to_string(w) + ".csv"))) {
      if (label == "early") win.early = std::move(trials);
      else if (label == "train") win.train = std::move(trials);
      else if (label == "test") win.test = std::move(trials);
      else if (label == "late") win.late = std::move(trials);
      else throw ArtifactError("window file: unknown block '" + label + "'");
    }
    obs.windows.push_back(std::move(win));
  }
  return obs;
}

}  // namespace bmilearn
