#include "bmilearn/feedforward.hpp"

#include <cmath>
#include <deque>
#include <stdexcept>

#include "bmilearn/credit.hpp"
#include "bmilearn/linalg.hpp"

namespace bmilearn::ff {

PatternSet make_patterns(std::size_t n_patterns, std::size_t n_in, std::size_t n_out, RandomSource& rng) {
  PatternSet p{Matrix(n_patterns, n_in), Matrix(n_patterns, n_out)};
  for (double& v : p.x.values()) v = (rng.next_u64() >> 63) ? 1.0 : -1.0;
  for (double& v : p.y_star.values()) v = rng.gaussian();
  return p;
}

FfStep ff_forward_with_noise(const FfNet& net, std::span<const double> x, std::span<const double> y_star,
                             std::span<const double> xi) {
  FfStep s;
  s.h = matvec(net.w, x);
  s.xi.assign(xi.begin(), xi.end());
  axpy(1.0, xi, s.h);
  s.y = matvec(net.w_bmi, s.h);
  s.eps.resize(s.y.size());
  for (std::size_t k = 0; k < s.y.size(); ++k) s.eps[k] = y_star[k] - s.y[k];
  return s;
}

FfStep ff_forward(const FfNet& net, std::span<const double> x, std::span<const double> y_star, RandomSource& rng) {
  const Vector xi = sample_noise(net.sigma, net.n_hidden(), rng);
  return ff_forward_with_noise(net, x, y_star, xi);
}

FfTrial ff_run_trial(const FfNet& net, const PatternSet& patterns, RandomSource& rng) {
  const std::size_t t_len = patterns.size();
  FfTrial tr{Matrix(t_len, net.n_hidden()), Matrix(t_len, net.n_out()), Matrix(t_len, net.n_hidden()),
             Vector(t_len), 0.0};
  for (std::size_t t = 0; t < t_len; ++t) {
    const FfStep s = ff_forward(net, patterns.x.row(t), patterns.y_star.row(t), rng);
    tr.h.set_row(t, s.h);
    tr.eps.set_row(t, s.eps);
    tr.xi.set_row(t, s.xi);
    const double lt = dot(s.eps, s.eps) / static_cast<double>(t_len);
    tr.reward[t] = -lt;
    tr.loss += lt;
  }
  return tr;
}

Matrix ff_sl_update(const FfNet& net, const PatternSet& patterns, const FfTrial& trial, double eta) {
  Matrix dw(net.n_hidden(), net.n_in());
  for (std::size_t t = 0; t < patterns.size(); ++t)
    add_outer(dw, eta, matvec(net.m, trial.eps.row(t)), patterns.x.row(t));
  return dw;
}

Matrix ff_rl_update(const FfNet& net, const PatternSet& patterns, const FfTrial& trial,
                    std::span<const double> baseline, double eta) {
  if (baseline.size() != patterns.size()) throw ShapeError("ff_rl_update: baseline length");
  Matrix dw(net.n_hidden(), net.n_in());
  for (std::size_t t = 0; t < patterns.size(); ++t)
    add_outer(dw, eta * (trial.reward[t] - baseline[t]), trial.xi.row(t), patterns.x.row(t));
  return dw;
}

Matrix ff_predict_dh(const FfNet& net, const Matrix& mean_eps, Hypothesis hypothesis) {
  Matrix map;
  if (hypothesis == Hypothesis::sl) {
    map = net.m;
  } else {
    map = matmul(net.sigma.covariance(net.n_hidden()), net.w_bmi.transposed());
  }
  Matrix out(mean_eps.rows(), net.n_hidden());
  for (std::size_t t = 0; t < mean_eps.rows(); ++t) out.set_row(t, matvec(map, mean_eps.row(t)));
  return out;
}

Matrix ff_observe_dh(std::span<const Matrix> early_h, std::span<const Matrix> late_h) {
  if (early_h.empty() || late_h.empty()) throw std::invalid_argument("ff_observe_dh: empty block");
  Matrix out(early_h.front().rows(), early_h.front().cols());
  for (const auto& h : late_h) axpy(1.0 / static_cast<double>(late_h.size()), h.values(), out.values());
  for (const auto& h : early_h) axpy(-1.0 / static_cast<double>(early_h.size()), h.values(), out.values());
  return out;
}

double ff_corr(const Matrix& dh_obs, const Matrix& dh_pred) {
  require_same_shape(dh_obs, dh_pred, "ff_corr");
  double sum = 0.0;
  for (std::size_t t = 0; t < dh_obs.rows(); ++t) sum += pearson(dh_obs.row(t), dh_pred.row(t));
  return sum / static_cast<double>(dh_obs.rows());
}

FfExperiment FfExperiment::standard(FfRule rule) {
  FfExperiment e;
  if (rule == FfRule::rl) {
    e.eta = 0.003;
    e.n_trials = 5000;
    e.n_early = 100;
    e.n_late = 100;
  }
  return e;
}

FfResult run_ff_experiment(const FfExperiment& exp, FfRule rule, std::uint64_t seed) {
  if (exp.n_early + exp.n_late > exp.n_trials) throw std::invalid_argument("ff experiment: blocks exceed trial count");
  RandomSource root(seed);
  RandomSource init_rng = root.child("ff-init");
  RandomSource noise_rng = root.child("ff-noise");

  FfNet net;
  net.w = gaussian_matrix(exp.n_hidden, exp.n_in, 0.0, 1.0 / std::sqrt(static_cast<double>(exp.n_in)), init_rng);
  net.w_bmi =
      gaussian_matrix(exp.n_out, exp.n_hidden, 0.0, 1.0 / std::sqrt(static_cast<double>(exp.n_hidden)), init_rng);
  net.m = make_aligned_matrix(AlignmentTarget{net.w_bmi.transposed(), exp.sim_m, 0.02}, init_rng);
  net.sigma = NoiseModel::isotropic(exp.sigma * exp.sigma);
  const PatternSet patterns = make_patterns(exp.n_patterns, exp.n_in, exp.n_out, init_rng);

  const std::size_t t_len = patterns.size();
  std::vector<Matrix> early_h, late_h;
  Matrix eps_sum(t_len, exp.n_out);
  std::deque<Vector> recent_rewards;
  Vector reward_sum(t_len, 0.0);
  FfResult res;
  res.rule = rule;
  res.sim_m = cosine_similarity_flat(net.m, net.w_bmi.transposed());
  res.seed = seed;

  for (std::size_t n = 0; n < exp.n_trials; ++n) {
    const FfTrial trial = ff_run_trial(net, patterns, noise_rng);
    if (n < exp.n_early) {
      early_h.push_back(trial.h);
      res.initial_loss += trial.loss / static_cast<double>(exp.n_early);
    }
    if (n >= exp.n_trials - exp.n_late) {
      late_h.push_back(trial.h);
      res.final_loss += trial.loss / static_cast<double>(exp.n_late);
    }
    eps_sum += trial.eps;

    if (rule == FfRule::sl) {
      net.w += ff_sl_update(net, patterns, trial, exp.eta);
    } else {
      Vector baseline(t_len);
      for (std::size_t t = 0; t < t_len; ++t)
        baseline[t] = recent_rewards.empty() ? trial.reward[t] : reward_sum[t] / static_cast<double>(recent_rewards.size());
      net.w += ff_rl_update(net, patterns, trial, baseline, exp.eta);
      recent_rewards.push_back(trial.reward);
      axpy(1.0, trial.reward, reward_sum);
      if (recent_rewards.size() > exp.baseline_window) {
        axpy(-1.0, recent_rewards.front(), reward_sum);
        recent_rewards.pop_front();
      }
    }
  }

  const Matrix mean_eps = eps_sum * (1.0 / static_cast<double>(exp.n_trials));
  const Matrix dh_obs = ff_observe_dh(early_h, late_h);
  res.corr_sl_pred = ff_corr(dh_obs, ff_predict_dh(net, mean_eps, Hypothesis::sl));
  res.corr_rl_pred = ff_corr(dh_obs, ff_predict_dh(net, mean_eps, Hypothesis::rl));
  return res;
}

}  // namespace bmilearn::ff
