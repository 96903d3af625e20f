#include "bmilearn/task.hpp"

#include <stdexcept>

namespace bmilearn {

std::size_t TaskSpec::cue_steps() const { return (trial_len + 4) / 5; }

void TaskSpec::validate() const {
  if (targets.empty()) throw std::invalid_argument("task: at least one target required");
  if (trial_len < 1) throw std::invalid_argument("task: trial_len must be >= 1");
  for (const auto& t : targets)
    if (t.size() != output_dim()) throw ShapeError("task: targets must share one dimension");
}

TaskSpec TaskSpec::center_out(std::size_t trial_len, InputMode input, ReadoutMode readout, double radius) {
  TaskSpec spec;
  spec.targets = {{radius, 0.0}, {0.0, radius}, {-radius, 0.0}, {0.0, -radius}};
  spec.trial_len = trial_len;
  spec.input_mode = input;
  spec.readout_mode = readout;
  return spec;
}

Vector input_at(const TaskSpec& spec, std::size_t target_id, std::size_t t) {
  if (target_id >= spec.n_targets()) throw std::out_of_range("input_at: target id out of range");
  if (t >= spec.trial_len) throw std::out_of_range("input_at: timestep out of range");
  Vector x(spec.input_dim(), 0.0);
  if (spec.input_mode == InputMode::constant_full || t < spec.cue_steps()) x[target_id] = 1.0;
  return x;
}

Vector target_output(const TaskSpec& spec, std::size_t target_id, std::size_t /*t*/, const RnnState& state) {
  if (target_id >= spec.n_targets()) throw std::out_of_range("target_output: target id out of range");
  Vector y_star = spec.targets[target_id];
  if (spec.readout_mode == ReadoutMode::velocity) {
    for (std::size_t k = 0; k < y_star.size(); ++k) y_star[k] -= state.cursor[k];
  }
  return y_star;
}

LossReward loss_and_reward(const Matrix& eps) {
  LossReward out;
  out.reward.resize(eps.rows());
  double total = 0.0;
  for (std::size_t t = 0; t < eps.rows(); ++t) {
    const double e2 = dot(eps.row(t), eps.row(t));
    out.reward[t] = -e2;
    total += e2;
  }
  out.loss = eps.rows() == 0 ? 0.0 : total / (2.0 * static_cast<double>(eps.rows()));
  return out;
}

LossReward loss_and_reward(const TrialRecord& trial) { return loss_and_reward(trial.eps); }

}  // namespace bmilearn
