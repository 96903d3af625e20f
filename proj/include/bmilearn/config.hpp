#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "bmilearn/rnn.hpp"
#include "bmilearn/task.hpp"

namespace bmilearn {

inline constexpr int kSchemaVersion = 1;

/// Invalid or unreadable configuration. `field` names the offending key and
/// `line` is 1-based (0 when unknown).
class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& what, std::string field = {}, std::size_t line = 0)
      : std::runtime_error(what), field(std::move(field)), line(line) {}
  std::string field;
  std::size_t line;
};

enum class TrainRule { sl_rflo, sl_bptt, rl };

std::string to_string(TrainRule r);
std::optional<TrainRule> train_rule_from_string(const std::string& s);
bool is_supervised(TrainRule r);

struct ExperimentConfig {
  int schema_version = kSchemaVersion;
  TrainRule rule = TrainRule::sl_rflo;
  std::uint64_t seed = 0;
  std::vector<std::uint64_t> seeds{0, 1, 2, 3};

  // network
  std::size_t n_in = 4;
  std::size_t n = 50;
  std::size_t n_out = 2;
  double tau = 10.0;
  double tau_r = 10.0;
  double g = 1.5;
  Activation activation = Activation::tanh;
  ReadoutMode readout_mode = ReadoutMode::position;
  std::size_t readout_units = 0;  ///< 0 = every unit drives the decoder

  // noise
  double sigma2_in = 0.0;
  double sigma2_rec = 0.25;
  double sigma2_bmi = 0.01;
  double noise_gain = 1.0;  ///< multiplies every recurrent draw
  std::size_t noise_rank = 0;  ///< 0 = isotropic

  // task
  std::size_t trial_len = 20;
  InputMode input_mode = InputMode::step_20pct;
  double target_radius = 1.0;

  // learning
  double eta_rec = 0.1;
  std::optional<double> pretrain_eta;  ///< defaults to eta_rec
  double tau_e = 10.0;
  double baseline_decay = 0.1;
  std::size_t pretrain_trials = 2500;
  std::optional<std::size_t> train_trials;  ///< defaults to 1500 (SL) or 15000 (RL)
  std::size_t block_size = 500;
  double mid_begin = 1.0 / 3.0;  ///< fraction of the learning phase where prediction trials start
  double mid_end = 2.0 / 3.0;
  double pretrain_fraction = 0.75;  ///< pretraining counts as learned when final < this × initial loss
  double recovery_fraction = 0.5;   ///< retraining must remove this share of the switch-induced excess loss

  // credit assignment and decoder switch
  double pretrain_alignment = 0.5;
  double alignment = 0.5;
  double decoder_similarity = 0.5;
  double feedback_gain = 0.0;
  bool reuse_pretrain_m = false;
  double m_hat_alignment = 0.5;
  std::size_t estimate_m_k = 0;  ///< 0 = no M̂ estimate
  double eta_wm = 0.0;           ///< 0 = no weight mirroring
  std::size_t mirror_windows = 5;
  std::size_t mirror_steps = 1;  ///< mirror updates per trial

  std::size_t effective_train_trials() const;
  double effective_pretrain_eta() const { return pretrain_eta.value_or(eta_rec); }
  NoiseModel noise_model() const;
  TaskSpec task() const;
  void validate() const;
};

/// Parses JSON text. Unknown keys, wrong types and out-of-range values raise
/// ConfigError naming the field and its line.
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::string& path);
std::string config_to_json(const ExperimentConfig& cfg, int indent = 2);

/// Names of the shipped preset configurations.
std::vector<std::string> preset_names();
ExperimentConfig preset(const std::string& name);

}  // namespace bmilearn
