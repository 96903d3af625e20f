#pragma once

#include <span>
#include <vector>

#include "bmilearn/matrix.hpp"
#include "bmilearn/random.hpp"
#include "bmilearn/rnn.hpp"

namespace bmilearn {

// ---------------------------------------------------------------------------
// Supervised rules with a credit-assignment map M (N×N_y).

enum class SlRule { rflo, biased_bptt };

struct SlConfig {
  Matrix m;
  double eta = 0.1;
  SlRule rule = SlRule::rflo;
};

/// RFLO eligibility p_ij, zero at trial start.
struct EligibilityP {
  Matrix p;
  explicit EligibilityP(std::size_t n) : p(n, n) {}
};

/// p ← (1 − 1/τ) p + (1/τ) φ′(u) h_prevᵀ;  accum_ij += [M ε]_i p_ij.
void rflo_step(const SlConfig& cfg, double tau, Activation act, EligibilityP& p, std::span<const double> u_t,
               std::span<const double> h_prev, std::span<const double> eps_t, Matrix& accum);

/// Runs rflo_step over a logged trial and returns the (η-free) accumulator.
Matrix rflo_accumulate(const SlConfig& cfg, const RnnParams& params, const TrialRecord& trial);

/// w_rec += η·accum; accum is reset to zero.
void rflo_apply(const SlConfig& cfg, Matrix& accum, Matrix& w_rec);

/// Backpropagation through time with Mε injected in place of W_bmiᵀε:
///   z^t = Mε^t + (1 − 1/τ) z^{t+1} + (1/τ) W_recᵀ (φ′(u^{t+1}) ∘ z^{t+1}),  z^{T+1} = 0
///   ΔW_ab = η/(τT) Σ_t z_a^t φ′(u_a^t) h_b^{t−1}
Matrix biased_bptt_update(const SlConfig& cfg, const TrialRecord& trial, const RnnParams& params);

struct MirrorConfig {
  double eta_wm = 0.001;
};

/// Draws ξ ~ N(0, σ²I), y = W_bmi ξ and applies M += η_wm ξ yᵀ.
Matrix weight_mirror_step(const Matrix& m, const MirrorConfig& mirror, RandomSource& rng, const Matrix& w_bmi,
                          double sigma2_rec);

// ---------------------------------------------------------------------------
// Node-perturbation reinforcement rule.

struct RlConfig {
  double eta = 0.1;
  double tau_e = 10.0;
  double baseline_decay = 0.1;
};

struct EligibilityQ {
  Matrix q;
  explicit EligibilityQ(std::size_t n) : q(n, n) {}
};

/// q ← (1 − 1/τ_e) q + (1/τ_e) (ξ ∘ φ′(u)) h_prevᵀ;  accum += (R − R̄) q.
void rl_step(const RlConfig& cfg, Activation act, EligibilityQ& q, std::span<const double> xi_t,
             std::span<const double> u_t, std::span<const double> h_prev, double r_t, double rbar_t, Matrix& accum);

void rl_apply(const RlConfig& cfg, Matrix& accum, Matrix& w_rec);

/// Per-(target, timestep) running reward estimate. A cell is seeded with the
/// first reward it observes.
class RewardBaseline {
 public:
  RewardBaseline() = default;
  RewardBaseline(std::size_t n_targets, std::size_t trial_len);

  bool has(std::size_t target, std::size_t t) const { return seen_[index(target, t)]; }
  double at(std::size_t target, std::size_t t) const { return values_[index(target, t)]; }
  /// R̄ for a step; an unseen cell predicts the reward itself (zero RPE).
  double predict(std::size_t target, std::size_t t, double reward) const;
  void update(std::size_t target, std::span<const double> rewards, double decay);

  std::size_t n_targets() const { return n_targets_; }
  std::size_t trial_len() const { return trial_len_; }

 private:
  std::size_t index(std::size_t target, std::size_t t) const;
  std::size_t n_targets_ = 0;
  std::size_t trial_len_ = 0;
  std::vector<double> values_;
  std::vector<bool> seen_;
};

/// b ← (1 − λ) b + λ R per cell.
RewardBaseline baseline_update(RewardBaseline b, std::size_t target_id, std::span<const double> rewards,
                               double decay);

/// Runs rl_step over a logged trial against the current baseline (the
/// baseline itself is not modified).
Matrix rl_accumulate(const RlConfig& cfg, const RnnParams& params, const TrialRecord& trial,
                     const RewardBaseline& baseline);

}  // namespace bmilearn
