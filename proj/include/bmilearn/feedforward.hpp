#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "bmilearn/matrix.hpp"
#include "bmilearn/random.hpp"
#include "bmilearn/rnn.hpp"

namespace bmilearn::ff {

/// Linear network h = W x + ξ, y = W_bmi h, trained on W only.
struct FfNet {
  Matrix w;      ///< hidden×input
  Matrix w_bmi;  ///< output×hidden
  Matrix m;      ///< hidden×output credit map
  NoiseModel sigma;

  std::size_t n_in() const { return w.cols(); }
  std::size_t n_hidden() const { return w.rows(); }
  std::size_t n_out() const { return w_bmi.rows(); }
};

/// Random pattern-association task: T binary patterns and Gaussian targets.
struct PatternSet {
  Matrix x;       ///< T×input, entries ±1
  Matrix y_star;  ///< T×output, entries ~ N(0, 1)
  std::size_t size() const { return x.rows(); }
};

PatternSet make_patterns(std::size_t n_patterns, std::size_t n_in, std::size_t n_out, RandomSource& rng);

struct FfStep {
  Vector h;
  Vector y;
  Vector eps;
  Vector xi;
};

FfStep ff_forward(const FfNet& net, std::span<const double> x, std::span<const double> y_star, RandomSource& rng);
/// Deterministic forward pass for a given noise draw.
FfStep ff_forward_with_noise(const FfNet& net, std::span<const double> x, std::span<const double> y_star,
                             std::span<const double> xi);

/// One pass over every pattern.
struct FfTrial {
  Matrix h;    ///< T×hidden
  Matrix eps;  ///< T×output
  Matrix xi;   ///< T×hidden
  Vector reward;  ///< R^t = −|ε^t|²/T
  double loss = 0.0;  ///< Σ_t |ε^t|²/T
};

FfTrial ff_run_trial(const FfNet& net, const PatternSet& patterns, RandomSource& rng);

/// ΔW = η Σ_t (M ε^t) x^tᵀ.
Matrix ff_sl_update(const FfNet& net, const PatternSet& patterns, const FfTrial& trial, double eta);

/// ΔW = η Σ_t (R^t − R̄^t) ξ^t x^tᵀ.
Matrix ff_rl_update(const FfNet& net, const PatternSet& patterns, const FfTrial& trial,
                    std::span<const double> baseline, double eta);

enum class Hypothesis { sl, rl };

/// Predicted Δh per pattern (T×hidden): SL → M⟨ε^t⟩, RL → Σ W_bmiᵀ⟨ε^t⟩.
Matrix ff_predict_dh(const FfNet& net, const Matrix& mean_eps, Hypothesis hypothesis);

/// Mean late activity minus mean early activity, per pattern.
Matrix ff_observe_dh(std::span<const Matrix> early_h, std::span<const Matrix> late_h);

/// Pearson correlation across hidden units, averaged over patterns.
double ff_corr(const Matrix& dh_obs, const Matrix& dh_pred);

enum class FfRule { sl, rl };

struct FfExperiment {
  std::size_t n_in = 20;
  std::size_t n_hidden = 20;
  std::size_t n_out = 2;
  std::size_t n_patterns = 5;
  std::size_t n_trials = 500;
  std::size_t n_early = 10;
  std::size_t n_late = 10;
  double eta = 0.001;
  double sigma = 0.1;  ///< noise standard deviation
  double sim_m = 0.3;  ///< sim(M, W_bmiᵀ)
  std::size_t baseline_window = 50;

  /// Standard settings for each training rule.
  static FfExperiment standard(FfRule rule);
};

struct FfResult {
  FfRule rule = FfRule::sl;
  double sim_m = 0.0;
  double corr_sl_pred = 0.0;
  double corr_rl_pred = 0.0;
  double initial_loss = 0.0;  ///< mean over the early block
  double final_loss = 0.0;    ///< mean over the late block
  std::uint64_t seed = 0;
};

/// Trains one network and scores the observed Δh against both hypotheses.
FfResult run_ff_experiment(const FfExperiment& exp, FfRule rule, std::uint64_t seed);

}  // namespace bmilearn::ff
