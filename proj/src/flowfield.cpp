#include "bmilearn/flowfield.hpp"

#include <cmath>
#include <stdexcept>

#include "bmilearn/linalg.hpp"

namespace bmilearn {

ArFit fit_autoregression(std::span<const ObservedTrial> trials, std::optional<double> ridge, Block block) {
  if (trials.empty()) throw std::invalid_argument("fit_autoregression: no trials");
  const std::size_t n = trials.front().h.cols();
  Matrix xx(n, n), yx(n, n);
  std::size_t pairs = 0;
  for (const auto& tr : trials) {
    if (tr.h.cols() != n) throw ShapeError("fit_autoregression: trials disagree on N");
    for (std::size_t t = 0; t + 1 < tr.h.rows(); ++t) {
      add_outer(xx, 1.0, tr.h.row(t), tr.h.row(t));
      add_outer(yx, 1.0, tr.h.row(t + 1), tr.h.row(t));
      ++pairs;
    }
  }
  if (pairs == 0) throw std::invalid_argument("fit_autoregression: insufficient data (no consecutive pairs)");
  ArFit fit;
  fit.block = block;
  fit.n_trials_used = trials.size();
  fit.ridge = ridge.value_or(default_ridge(xx));
  fit.a = least_squares_from_moments(xx, yx, fit.ridge);
  return fit;
}

FlowFieldDelta delta_f_observed(const ArFit& early, const ArFit& late) {
  require_same_shape(early.a, late.a, "delta_f_observed");
  return {late.a - early.a, false};
}

Matrix error_activity_moment(std::span<const ObservedTrial> trials) {
  if (trials.empty()) throw std::invalid_argument("prediction: empty mid set");
  Matrix moment(trials.front().eps.cols(), trials.front().h.cols());
  for (const auto& tr : trials)
    for (std::size_t t = 0; t < tr.h.rows(); ++t) add_outer(moment, 1.0, tr.eps.row(t), tr.h.row(t));
  return moment;
}

FlowFieldDelta predict_dw_sl_from_moment(const Matrix& moment, const Matrix& m) {
  return {matmul(m, moment), true};
}

FlowFieldDelta predict_dw_sl(std::span<const ObservedTrial> mid_trials, const Matrix& m) {
  return predict_dw_sl_from_moment(error_activity_moment(mid_trials), m);
}

FlowFieldDelta predict_dw_rl_from_moment(const Matrix& moment, const Matrix& w_bmi, const Matrix& sigma) {
  return {matmul(sigma, matmul(w_bmi.transposed(), moment)), true};
}

FlowFieldDelta predict_dw_rl(std::span<const ObservedTrial> mid_trials, const Matrix& w_bmi, const Matrix& sigma) {
  return predict_dw_rl_from_moment(error_activity_moment(mid_trials), w_bmi, sigma);
}

FfccResult ffcc(const FlowFieldDelta& obs, const FlowFieldDelta& pred, std::span<const ObservedTrial> test_trials) {
  require_same_shape(obs.delta, pred.delta, "ffcc");
  FfccResult out;
  double sum = 0.0;
  for (const auto& tr : test_trials) {
    for (std::size_t t = 0; t < tr.h.rows(); ++t) {
      const Vector a = matvec(obs.delta, tr.h.row(t));
      const Vector b = matvec(pred.delta, tr.h.row(t));
      const double na = norm2(a);
      const double nb = norm2(b);
      if (na < 1e-12 || nb < 1e-12) {
        ++out.skipped;
        continue;
      }
      sum += dot(a, b) / (na * nb);
      ++out.terms;
    }
  }
  if (out.terms == 0) throw std::invalid_argument("ffcc: every term is degenerate");
  out.value = sum / static_cast<double>(out.terms);
  return out;
}

}  // namespace bmilearn
