#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "bmilearn/config.hpp"
#include "bmilearn/credit.hpp"
#include "bmilearn/matrix.hpp"
#include "bmilearn/rnn.hpp"

namespace bmilearn {

/// A run produced non-finite activity or loss.
class DivergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct MetricRow {
  std::string phase;  ///< pretrain, early, train, late
  std::size_t trial = 0;
  std::size_t target = 0;
  double loss = 0.0;
};

struct PretrainResult {
  RnnParams params;  ///< after pretraining, decoder W_bmi0
  Matrix m0;         ///< credit map used for pretraining
  double initial_loss = 0.0;  ///< frozen evaluation before training
  double final_loss = 0.0;    ///< frozen evaluation after training
  bool learned = false;       ///< final < pretrain_fraction × initial
  std::vector<MetricRow> metrics;
  std::optional<EstimatedCreditMap> m_hat;  ///< from a frozen block after pretraining
};

/// One frozen-analysis window of the learning phase.
struct ObservedWindow {
  std::vector<ObservedTrial> early, train, test, late;
  Matrix m;  ///< credit map averaged over the window (oracle)
};

/// Everything the analysis may read. W_rec is deliberately absent.
struct Observables {
  TrainRule rule = TrainRule::sl_rflo;
  double alignment = 0.0;
  std::uint64_t seed = 0;
  bool learned = false;
  Matrix w_bmi;     ///< W_bmi1
  Matrix sigma;     ///< recurrent noise covariance
  Matrix m;         ///< true credit map (oracle)
  Matrix m_random;  ///< random M̂ at m_hat_alignment
  std::optional<Matrix> m_estimated;
  std::vector<ObservedTrial> early, mid_train, mid_test, late;
  std::vector<ObservedWindow> windows;  ///< only with weight mirroring
};

struct RetrainResult {
  RnnParams params;  ///< retrained
  Observables obs;
  std::vector<MetricRow> metrics;
  double early_loss = 0.0;
  double late_loss = 0.0;
  std::vector<double> m_alignment;  ///< sim(M, W_bmi1ᵀ) after each training trial
  std::optional<std::size_t> trials_to_criterion;
};

struct AnalysisRow {
  std::string rule_trained;
  std::string hypothesis;  ///< sl_true_m, sl_random_m, sl_estimated_m, rl, rl_isotropic
  double alignment = 0.0;
  std::uint64_t seed = 0;
  double ffcc = 0.0;
  std::size_t skipped_terms = 0;
  bool learned = false;
  int window = -1;  ///< −1 for the early/late block analysis
};

/// Frozen-weight trials cycling through targets.
std::vector<ObservedTrial> observe_block(const RnnParams& params, const NoiseModel& noise, const TaskSpec& task,
                                         std::size_t n_trials, RandomSource& rng);

PretrainResult pretrain(const ExperimentConfig& cfg, std::uint64_t seed);
RetrainResult retrain(const ExperimentConfig& cfg, const PretrainResult& pre, std::uint64_t seed);

/// FFCC of every available hypothesis. Reads only `obs`.
std::vector<AnalysisRow> analyze(const Observables& obs);

/// First learning trial whose 50-trial mean loss has removed 75% of the
/// excess over the pretrained loss.
std::optional<std::size_t> trials_to_criterion(const std::vector<MetricRow>& metrics, double pretrained_loss,
                                               double early_loss);

/// FNV-1a over the bytes of a matrix.
std::uint64_t weight_hash(const Matrix& m);

struct RunOutput {
  PretrainResult pre;
  RetrainResult post;
  std::vector<AnalysisRow> rows;
};

RunOutput run_experiment(const ExperimentConfig& cfg, std::uint64_t seed);

}  // namespace bmilearn
