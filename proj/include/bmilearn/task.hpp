#pragma once

#include <vector>

#include "bmilearn/matrix.hpp"
#include "bmilearn/rnn.hpp"

namespace bmilearn {

enum class InputMode { step_20pct, constant_full };

/// Center-out cursor task: one input channel per target.
struct TaskSpec {
  std::vector<Vector> targets;
  std::size_t trial_len = 20;
  InputMode input_mode = InputMode::step_20pct;
  ReadoutMode readout_mode = ReadoutMode::position;

  std::size_t n_targets() const { return targets.size(); }
  std::size_t input_dim() const { return targets.size(); }
  std::size_t output_dim() const { return targets.empty() ? 0 : targets.front().size(); }
  /// Steps for which the step_20pct cue is on: ceil(0.2 T).
  std::size_t cue_steps() const;
  void validate() const;

  /// Four targets at `radius` on the axes: (r,0), (0,r), (−r,0), (0,−r).
  static TaskSpec center_out(std::size_t trial_len = 20, InputMode input = InputMode::step_20pct,
                             ReadoutMode readout = ReadoutMode::position, double radius = 1.0);
};

Vector input_at(const TaskSpec& spec, std::size_t target_id, std::size_t t);

/// Position mode: r*. Velocity mode: r* − cursor.
Vector target_output(const TaskSpec& spec, std::size_t target_id, std::size_t t, const RnnState& state);

struct LossReward {
  double loss = 0.0;
  Vector reward;
};

/// L = (1/2T) Σ_t |ε^t|², R^t = −|ε^t|².
LossReward loss_and_reward(const Matrix& eps);
LossReward loss_and_reward(const TrialRecord& trial);

}  // namespace bmilearn
