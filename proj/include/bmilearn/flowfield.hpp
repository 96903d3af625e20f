#pragma once

#include <optional>
#include <span>

#include "bmilearn/matrix.hpp"
#include "bmilearn/rnn.hpp"

namespace bmilearn {

enum class Block { early, late };

/// Autoregressive fit h^{t+1} ≈ A h^t over one frozen-weight block.
struct ArFit {
  Matrix a;
  Block block = Block::early;
  std::size_t n_trials_used = 0;
  double ridge = 0.0;
};

/// A change of flow field ΔF(h) = delta · h (up to the 1/τ prefactor).
struct FlowFieldDelta {
  Matrix delta;
  bool scale_free = false;
};

/// Pools consecutive pairs within each trial, never across trial boundaries.
/// With no ridge given, the default 1e−6·trace(XXᵀ)/N is used.
ArFit fit_autoregression(std::span<const ObservedTrial> trials, std::optional<double> ridge = std::nullopt,
                         Block block = Block::early);

/// A_late − A_early.
FlowFieldDelta delta_f_observed(const ArFit& early, const ArFit& late);

/// Σ_{n,t} ε^{n,t} (h^{n,t})ᵀ, the N_y×N statistic both predictions are built from.
Matrix error_activity_moment(std::span<const ObservedTrial> trials);

/// ΔW ∝ Σ_{n,t} M ε hᵀ (direction only).
FlowFieldDelta predict_dw_sl(std::span<const ObservedTrial> mid_trials, const Matrix& m);
FlowFieldDelta predict_dw_sl_from_moment(const Matrix& moment, const Matrix& m);

/// ΔW ∝ Σ_{n,t} Σ W_bmiᵀ ε hᵀ (direction only).
FlowFieldDelta predict_dw_rl(std::span<const ObservedTrial> mid_trials, const Matrix& w_bmi, const Matrix& sigma);
FlowFieldDelta predict_dw_rl_from_moment(const Matrix& moment, const Matrix& w_bmi, const Matrix& sigma);

struct FfccResult {
  double value = 0.0;
  std::size_t terms = 0;
  std::size_t skipped = 0;
};

/// Mean cosine between obs·h and pred·h over every test activity point.
/// Points where either vector has norm below 1e−12 are skipped and counted.
FfccResult ffcc(const FlowFieldDelta& obs, const FlowFieldDelta& pred, std::span<const ObservedTrial> test_trials);

}  // namespace bmilearn
