#include "bmilearn/config.hpp"

#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "json.hpp"

namespace bmilearn {

using nlohmann::json;

std::string to_string(TrainRule r) {
  switch (r) {
    case TrainRule::sl_rflo: return "sl_rflo";
    case TrainRule::sl_bptt: return "sl_bptt";
    case TrainRule::rl: return "rl";
  }
  return "?";
}

std::optional<TrainRule> train_rule_from_string(const std::string& s) {
  if (s == "sl_rflo") return TrainRule::sl_rflo;
  if (s == "sl_bptt") return TrainRule::sl_bptt;
  if (s == "rl") return TrainRule::rl;
  return std::nullopt;
}

bool is_supervised(TrainRule r) { return r != TrainRule::rl; }

std::size_t ExperimentConfig::effective_train_trials() const {
  if (train_trials) return *train_trials;
  return rule == TrainRule::rl ? 15000 : 1500;
}

NoiseModel ExperimentConfig::noise_model() const {
  NoiseModel m = NoiseModel::isotropic(sigma2_rec);
  m.sigma2_in = sigma2_in;
  m.sigma2_bmi = sigma2_bmi;
  m.gain = noise_gain;
  return m;
}

TaskSpec ExperimentConfig::task() const {
  TaskSpec t = TaskSpec::center_out(trial_len, input_mode, readout_mode, target_radius);
  return t;
}

namespace {

std::size_t line_of_offset(const std::string& text, std::size_t offset) {
  offset = std::min(offset, text.size());
  return 1 + static_cast<std::size_t>(std::count(text.begin(), text.begin() + static_cast<long>(offset), '\n'));
}

std::size_t line_of_key(const std::string& text, const std::string& key) {
  const std::string quoted = "\"" + key + "\"";
  std::size_t pos = 0;
  while ((pos = text.find(quoted, pos)) != std::string::npos) {
    std::size_t after = pos + quoted.size();
    while (after < text.size() && std::isspace(static_cast<unsigned char>(text[after]))) ++after;
    if (after < text.size() && text[after] == ':') return line_of_offset(text, pos);
    pos = after;
  }
  return 0;
}

[[noreturn]] void fail(const std::string& text, const std::string& key, const std::string& msg) {
  const std::size_t line = line_of_key(text, key);
  std::string where = line ? "line " + std::to_string(line) + ": " : "";
  throw ConfigError(where + "field '" + key + "': " + msg, key, line);
}

template <class E>
struct EnumTable {
  std::vector<std::pair<std::string, E>> entries;
  std::string label(E v) const {
    for (const auto& [k, e] : entries)
      if (e == v) return k;
    return "?";
  }
  std::optional<E> parse(const std::string& s) const {
    for (const auto& [k, e] : entries)
      if (k == s) return e;
    return std::nullopt;
  }
  std::string choices() const {
    std::string out;
    for (const auto& [k, e] : entries) out += (out.empty() ? "" : ", ") + k;
    return out;
  }
};

const EnumTable<TrainRule> kRules{{{"sl_rflo", TrainRule::sl_rflo}, {"sl_bptt", TrainRule::sl_bptt}, {"rl", TrainRule::rl}}};
const EnumTable<Activation> kActivations{{{"tanh", Activation::tanh}, {"linear", Activation::linear}}};
const EnumTable<ReadoutMode> kReadouts{{{"position", ReadoutMode::position}, {"velocity", ReadoutMode::velocity}}};
const EnumTable<InputMode> kInputs{{{"step", InputMode::step_20pct}, {"constant", InputMode::constant_full}}};

// One entry per JSON key: how to read it into a config and how to write it back.
struct Field {
  std::function<void(const json&, ExperimentConfig&, const std::string& text, const std::string& key)> read;
  std::function<json(const ExperimentConfig&)> write;
};

double read_number(const json& v, const std::string& text, const std::string& key) {
  if (!v.is_number()) fail(text, key, "expected a number");
  const double d = v.get<double>();
  if (!std::isfinite(d)) fail(text, key, "must be finite");
  return d;
}

std::uint64_t read_uint(const json& v, const std::string& text, const std::string& key) {
  if (!v.is_number_integer()) fail(text, key, "expected a non-negative integer");
  if (v.is_number_unsigned()) return v.get<std::uint64_t>();
  const auto i = v.get<std::int64_t>();
  if (i < 0) fail(text, key, "expected a non-negative integer");
  return static_cast<std::uint64_t>(i);
}

bool read_bool(const json& v, const std::string& text, const std::string& key) {
  if (!v.is_boolean()) fail(text, key, "expected true or false");
  return v.get<bool>();
}

template <class E>
E read_enum(const json& v, const EnumTable<E>& table, const std::string& text, const std::string& key) {
  if (!v.is_string()) fail(text, key, "expected one of: " + table.choices());
  const auto e = table.parse(v.get<std::string>());
  if (!e) fail(text, key, "unknown value '" + v.get<std::string>() + "' (expected one of: " + table.choices() + ")");
  return *e;
}

#define BMI_NUM(name) \
  { #name, {[](const json& v, ExperimentConfig& c, const std::string& t, const std::string& k) { c.name = read_number(v, t, k); }, \
            [](const ExperimentConfig& c) { return json(c.name); }} }
#define BMI_UINT(name) \
  { #name, {[](const json& v, ExperimentConfig& c, const std::string& t, const std::string& k) { c.name = static_cast<decltype(c.name)>(read_uint(v, t, k)); }, \
            [](const ExperimentConfig& c) { return json(c.name); }} }
#define BMI_BOOL(name) \
  { #name, {[](const json& v, ExperimentConfig& c, const std::string& t, const std::string& k) { c.name = read_bool(v, t, k); }, \
            [](const ExperimentConfig& c) { return json(c.name); }} }
#define BMI_ENUM(name, table) \
  { #name, {[](const json& v, ExperimentConfig& c, const std::string& t, const std::string& k) { c.name = read_enum(v, table, t, k); }, \
            [](const ExperimentConfig& c) { return json(table.label(c.name)); }} }

const std::map<std::string, Field>& fields() {
  static const std::map<std::string, Field> table = {
      {"schema_version",
       {[](const json& v, ExperimentConfig& c, const std::string& t, const std::string& k) {
          const auto ver = read_uint(v, t, k);
          if (ver != static_cast<std::uint64_t>(kSchemaVersion))
            fail(t, k, "unsupported version " + std::to_string(ver) + " (expected " + std::to_string(kSchemaVersion) + ")");
          c.schema_version = kSchemaVersion;
        },
        [](const ExperimentConfig& c) { return json(c.schema_version); }}},
      BMI_ENUM(rule, kRules),
      BMI_UINT(seed),
      {"seeds",
       {[](const json& v, ExperimentConfig& c, const std::string& t, const std::string& k) {
          if (!v.is_array() || v.empty()) fail(t, k, "expected a non-empty array of seeds");
          c.seeds.clear();
          for (const auto& s : v) c.seeds.push_back(read_uint(s, t, k));
        },
        [](const ExperimentConfig& c) { return json(c.seeds); }}},
      BMI_UINT(n_in),
      BMI_UINT(n),
      BMI_UINT(n_out),
      BMI_NUM(tau),
      BMI_NUM(tau_r),
      BMI_NUM(g),
      BMI_ENUM(activation, kActivations),
      BMI_ENUM(readout_mode, kReadouts),
      BMI_UINT(readout_units),
      BMI_NUM(sigma2_in),
      BMI_NUM(sigma2_rec),
      BMI_NUM(sigma2_bmi),
      BMI_NUM(noise_gain),
      BMI_UINT(noise_rank),
      BMI_UINT(trial_len),
      BMI_ENUM(input_mode, kInputs),
      BMI_NUM(target_radius),
      BMI_NUM(eta_rec),
      {"pretrain_eta",
       {[](const json& v, ExperimentConfig& c, const std::string& t, const std::string& k) {
          if (v.is_null()) {
            c.pretrain_eta.reset();
          } else {
            c.pretrain_eta = read_number(v, t, k);
          }
        },
        [](const ExperimentConfig& c) { return c.pretrain_eta ? json(*c.pretrain_eta) : json(nullptr); }}},
      BMI_NUM(tau_e),
      BMI_NUM(baseline_decay),
      BMI_UINT(pretrain_trials),
      {"train_trials",
       {[](const json& v, ExperimentConfig& c, const std::string& t, const std::string& k) {
          if (v.is_null()) {
            c.train_trials.reset();
          } else {
            c.train_trials = static_cast<std::size_t>(read_uint(v, t, k));
          }
        },
        [](const ExperimentConfig& c) { return c.train_trials ? json(*c.train_trials) : json(nullptr); }}},
      BMI_UINT(block_size),
      BMI_NUM(mid_begin),
      BMI_NUM(mid_end),
      BMI_NUM(pretrain_fraction),
      BMI_NUM(recovery_fraction),
      BMI_NUM(pretrain_alignment),
      BMI_NUM(alignment),
      BMI_NUM(decoder_similarity),
      BMI_NUM(feedback_gain),
      BMI_BOOL(reuse_pretrain_m),
      BMI_NUM(m_hat_alignment),
      BMI_UINT(estimate_m_k),
      BMI_NUM(eta_wm),
      BMI_UINT(mirror_windows),
      BMI_UINT(mirror_steps),
  };
  return table;
}

#undef BMI_NUM
#undef BMI_UINT
#undef BMI_BOOL
#undef BMI_ENUM

void check(bool ok, const std::string& key, const std::string& msg, const std::string& text) {
  if (!ok) fail(text, key, msg);
}

void validate_impl(const ExperimentConfig& c, const std::string& text) {
  check(c.n_in == 4, "n_in", "must equal the number of targets (4)", text);
  check(c.n >= 2, "n", "must be >= 2", text);
  check(c.n_out == 2, "n_out", "the center-out task has 2 output dimensions", text);
  check(c.tau >= 1.0, "tau", "must be >= 1", text);
  check(c.tau_r >= 1.0, "tau_r", "must be >= 1", text);
  check(c.g > 0.0, "g", "must be positive", text);
  check(c.readout_units <= c.n, "readout_units", "cannot exceed n", text);
  check(c.sigma2_in >= 0.0, "sigma2_in", "must be >= 0", text);
  check(c.sigma2_rec >= 0.0, "sigma2_rec", "must be >= 0", text);
  check(c.sigma2_bmi >= 0.0, "sigma2_bmi", "must be >= 0", text);
  check(c.noise_gain > 0.0, "noise_gain", "must be positive", text);
  check(c.noise_rank <= c.n, "noise_rank", "cannot exceed n", text);
  check(c.noise_rank == 0 || c.noise_rank >= c.n_out, "noise_rank", "must be 0 or >= n_out", text);
  check(c.trial_len >= 2, "trial_len", "must be >= 2", text);
  check(c.target_radius > 0.0, "target_radius", "must be positive", text);
  check(c.eta_rec > 0.0, "eta_rec", "must be positive", text);
  check(c.effective_pretrain_eta() > 0.0, "pretrain_eta", "must be positive", text);
  check(c.tau_e >= 1.0, "tau_e", "must be >= 1", text);
  check(c.baseline_decay > 0.0 && c.baseline_decay <= 1.0, "baseline_decay", "must lie in (0, 1]", text);
  check(c.block_size >= 2, "block_size", "must be >= 2", text);
  check(c.effective_train_trials() >= 6, "train_trials", "must be >= 6", text);
  check(c.mid_begin >= 0.0 && c.mid_begin < c.mid_end && c.mid_end <= 1.0, "mid_end", "need 0 <= mid_begin < mid_end <= 1", text);
  check(static_cast<double>(c.effective_train_trials()) * (c.mid_end - c.mid_begin) >= 4.0, "mid_end", "mid window holds fewer than 4 trials", text);
  auto unit = [&](double v, const char* key) { check(v > 0.0 && v <= 1.0, key, "must lie in (0, 1]", text); };
  unit(c.pretrain_alignment, "pretrain_alignment");
  unit(c.pretrain_fraction, "pretrain_fraction");
  unit(c.recovery_fraction, "recovery_fraction");
  unit(c.alignment, "alignment");
  unit(c.decoder_similarity, "decoder_similarity");
  unit(c.m_hat_alignment, "m_hat_alignment");
  check(c.feedback_gain >= 0.0, "feedback_gain", "must be >= 0", text);
  check(c.estimate_m_k <= c.n, "estimate_m_k", "cannot exceed n", text);
  check(c.eta_wm >= 0.0, "eta_wm", "must be >= 0", text);
  check(c.eta_wm == 0.0 || is_supervised(c.rule), "eta_wm", "weight mirroring needs a supervised rule", text);
  check(c.mirror_windows >= 1, "mirror_windows", "must be >= 1", text);
  check(c.mirror_steps >= 1, "mirror_steps", "must be >= 1", text);
  check(!c.seeds.empty(), "seeds", "must not be empty", text);
}

}  // namespace

void ExperimentConfig::validate() const { validate_impl(*this, std::string{}); }

ExperimentConfig parse_config(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    const std::size_t line = line_of_offset(text, e.byte == 0 ? 0 : e.byte - 1);
    throw ConfigError("line " + std::to_string(line) + ": malformed JSON: " + e.what(), {}, line);
  }
  if (!doc.is_object()) throw ConfigError("config must be a JSON object", {}, 1);
  for (const char* required : {"schema_version", "rule"})
    if (!doc.contains(required))
      throw ConfigError(std::string("missing required field '") + required + "'", required, 0);

  ExperimentConfig cfg;
  const auto& table = fields();
  for (const auto& [key, value] : doc.items()) {
    if (key == "code_version") {
      if (!value.is_string()) fail(text, key, "must be a string");
      continue;
    }
    const auto it = table.find(key);
    if (it == table.end()) fail(text, key, "unknown field");
    it->second.read(value, cfg, text, key);
  }
  validate_impl(cfg, text);
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string config_to_json(const ExperimentConfig& cfg, int indent) {
  json doc = json::object();
  for (const auto& [key, field] : fields()) doc[key] = field.write(cfg);
  return doc.dump(indent);
}

std::vector<std::string> preset_names() {
  return {"main_sl",          "main_rl",          "main_rl_short",    "mirror",      "feedback_sl",
          "feedback_rl", "estimate_m_sl", "estimate_m_rl", "low_rank_sl",          "low_rank_rl",
          "bptt",             "linear_sl",        "linear_rl",        "velocity_sl",      "velocity_rl",
          "subset_readout_sl", "subset_readout_rl"};
}

ExperimentConfig preset(const std::string& name) {
  ExperimentConfig c;
  auto rl = [&] { c.rule = TrainRule::rl; };
  if (name == "main_sl") {
  } else if (name == "main_rl") {
    rl();
  } else if (name == "main_rl_short") {
    rl();
    c.train_trials = 5000;
  } else if (name == "mirror") {
    c.eta_rec = 0.05;
    c.eta_wm = 0.001;
    c.train_trials = 6000;
  } else if (name == "feedback_sl" || name == "feedback_rl") {
    if (name == "feedback_rl") rl();
    c.sigma2_rec = 0.1;
    c.feedback_gain = 1.0;
    c.train_trials = c.rule == TrainRule::rl ? 10000 : 5000;
  } else if (name == "estimate_m_sl" || name == "estimate_m_rl") {
    if (name == "estimate_m_rl") rl();
    c.input_mode = InputMode::constant_full;
    c.feedback_gain = 5.0;
    c.eta_rec = 1.0;
    c.sigma2_rec = 0.2;
    c.reuse_pretrain_m = true;
    c.estimate_m_k = 5;
    if (c.rule == TrainRule::rl) {
      c.pretrain_eta = 1.0;
      c.eta_rec = 0.1;
    } else {
      c.train_trials = 1000;
    }
  } else if (name == "low_rank_sl" || name == "low_rank_rl") {
    c.alignment = 0.6;
    c.noise_rank = 10;
    c.seeds = {0, 1, 2};
    c.eta_rec = 0.2;
    if (name == "low_rank_rl") {
      rl();
    } else {
      c.train_trials = 1000;
    }
  } else if (name == "bptt") {
    c.rule = TrainRule::sl_bptt;
    c.train_trials = 10000;
  } else if (name == "linear_sl" || name == "linear_rl") {
    c.activation = Activation::linear;
    c.g = 0.8;
    c.eta_rec = 0.01;
    if (name == "linear_rl") {
      rl();
      c.pretrain_eta = 0.01;
      c.eta_rec = 0.0003;
    }
  } else if (name == "velocity_sl" || name == "velocity_rl") {
    if (name == "velocity_rl") rl();
    c.readout_mode = ReadoutMode::velocity;
  } else if (name == "subset_readout_sl" || name == "subset_readout_rl") {
    c.n = 200;
    c.readout_units = 25;
    if (name == "subset_readout_rl") {
      rl();
      c.noise_rank = 50;
    }
  } else {
    throw ConfigError("unknown preset '" + name + "'", "preset");
  }
  c.validate();
  return c;
}

}  // namespace bmilearn
