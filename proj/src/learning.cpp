#include "bmilearn/learning.hpp"

#include <cmath>
#include <stdexcept>

namespace bmilearn {

void rflo_step(const SlConfig& cfg, double tau, Activation act, EligibilityP& p, std::span<const double> u_t,
               std::span<const double> h_prev, std::span<const double> eps_t, Matrix& accum) {
  const std::size_t n = p.p.rows();
  if (u_t.size() != n || h_prev.size() != n || cfg.m.rows() != n || cfg.m.cols() != eps_t.size())
    throw ShapeError("rflo_step: shape mismatch");
  const double keep = 1.0 - 1.0 / tau;
  const Vector credit = matvec(cfg.m, eps_t);
  for (std::size_t i = 0; i < n; ++i) {
    const double post = activation_derivative(act, u_t[i]) / tau;
    auto prow = p.p.row(i);
    auto arow = accum.row(i);
    for (std::size_t j = 0; j < n; ++j) {
      prow[j] = keep * prow[j] + post * h_prev[j];
      arow[j] += credit[i] * prow[j];
    }
  }
}

Matrix rflo_accumulate(const SlConfig& cfg, const RnnParams& params, const TrialRecord& trial) {
  const std::size_t n = params.n();
  EligibilityP p(n);
  Matrix accum(n, n);
  for (std::size_t t = 0; t < trial.steps(); ++t)
    rflo_step(cfg, params.tau, params.activation, p, trial.u.row(t), trial.h_prev(t), trial.eps.row(t), accum);
  return accum;
}

void rflo_apply(const SlConfig& cfg, Matrix& accum, Matrix& w_rec) {
  require_same_shape(accum, w_rec, "rflo_apply");
  axpy(cfg.eta, accum.values(), w_rec.values());
  accum.fill(0.0);
}

Matrix biased_bptt_update(const SlConfig& cfg, const TrialRecord& trial, const RnnParams& params) {
  const std::size_t n = params.n();
  const std::size_t t_len = trial.steps();
  if (trial.u.rows() != t_len || trial.u.cols() != n)
    throw std::invalid_argument("biased_bptt_update: trial is missing logged pre-activations");
  if (cfg.m.rows() != n || cfg.m.cols() != trial.eps.cols()) throw ShapeError("biased_bptt_update: M shape");

  const double tau = params.tau;
  const double keep = 1.0 - 1.0 / tau;
  Matrix dphi(t_len, n);
  for (std::size_t t = 0; t < t_len; ++t)
    for (std::size_t i = 0; i < n; ++i) dphi(t, i) = activation_derivative(params.activation, trial.u(t, i));

  Matrix dw(n, n);
  Vector z_next(n, 0.0);
  for (std::size_t t = t_len; t-- > 0;) {
    Vector z = matvec(cfg.m, trial.eps.row(t));
    if (t + 1 < t_len) {
      Vector gated(n);
      for (std::size_t j = 0; j < n; ++j) gated[j] = dphi(t + 1, j) * z_next[j];
      const Vector back = matvec_transposed(params.w_rec, gated);
      for (std::size_t i = 0; i < n; ++i) z[i] += keep * z_next[i] + back[i] / tau;
    }
    Vector post(n);
    for (std::size_t a = 0; a < n; ++a) post[a] = z[a] * dphi(t, a);
    add_outer(dw, 1.0, post, trial.h_prev(t));
    z_next = std::move(z);
  }
  dw *= cfg.eta / (tau * static_cast<double>(t_len));
  return dw;
}

Matrix weight_mirror_step(const Matrix& m, const MirrorConfig& mirror, RandomSource& rng, const Matrix& w_bmi,
                          double sigma2_rec) {
  if (mirror.eta_wm < 0.0) throw std::invalid_argument("weight_mirror_step: eta_wm must be >= 0");
  if (m.rows() != w_bmi.cols() || m.cols() != w_bmi.rows()) throw ShapeError("weight_mirror_step: M shape");
  const double sd = std::sqrt(sigma2_rec);
  Vector xi(w_bmi.cols());
  for (double& v : xi) v = sd * rng.gaussian();
  const Vector y = matvec(w_bmi, xi);
  Matrix out = m;
  add_outer(out, mirror.eta_wm, xi, y);
  return out;
}

void rl_step(const RlConfig& cfg, Activation act, EligibilityQ& q, std::span<const double> xi_t,
             std::span<const double> u_t, std::span<const double> h_prev, double r_t, double rbar_t, Matrix& accum) {
  const std::size_t n = q.q.rows();
  if (xi_t.size() != n || u_t.size() != n || h_prev.size() != n) throw ShapeError("rl_step: shape mismatch");
  const double keep = 1.0 - 1.0 / cfg.tau_e;
  const double rpe = r_t - rbar_t;
  for (std::size_t i = 0; i < n; ++i) {
    const double post = xi_t[i] * activation_derivative(act, u_t[i]) / cfg.tau_e;
    auto qrow = q.q.row(i);
    auto arow = accum.row(i);
    for (std::size_t j = 0; j < n; ++j) {
      qrow[j] = keep * qrow[j] + post * h_prev[j];
      arow[j] += rpe * qrow[j];
    }
  }
}

void rl_apply(const RlConfig& cfg, Matrix& accum, Matrix& w_rec) {
  require_same_shape(accum, w_rec, "rl_apply");
  axpy(cfg.eta, accum.values(), w_rec.values());
  accum.fill(0.0);
}

RewardBaseline::RewardBaseline(std::size_t n_targets, std::size_t trial_len)
    : n_targets_(n_targets),
      trial_len_(trial_len),
      values_(n_targets * trial_len, 0.0),
      seen_(n_targets * trial_len, false) {}

std::size_t RewardBaseline::index(std::size_t target, std::size_t t) const {
  if (target >= n_targets_ || t >= trial_len_) throw std::out_of_range("RewardBaseline: cell out of range");
  return target * trial_len_ + t;
}

double RewardBaseline::predict(std::size_t target, std::size_t t, double reward) const {
  return has(target, t) ? at(target, t) : reward;
}

void RewardBaseline::update(std::size_t target, std::span<const double> rewards, double decay) {
  if (rewards.size() != trial_len_) throw ShapeError("RewardBaseline: reward sequence length");
  if (!(decay > 0.0 && decay <= 1.0)) throw std::invalid_argument("RewardBaseline: decay must lie in (0, 1]");
  for (std::size_t t = 0; t < trial_len_; ++t) {
    const std::size_t i = index(target, t);
    if (!seen_[i]) {
      values_[i] = rewards[t];
      seen_[i] = true;
    } else {
      values_[i] = (1.0 - decay) * values_[i] + decay * rewards[t];
    }
  }
}

RewardBaseline baseline_update(RewardBaseline b, std::size_t target_id, std::span<const double> rewards,
                               double decay) {
  b.update(target_id, rewards, decay);
  return b;
}

Matrix rl_accumulate(const RlConfig& cfg, const RnnParams& params, const TrialRecord& trial,
                     const RewardBaseline& baseline) {
  const std::size_t n = params.n();
  EligibilityQ q(n);
  Matrix accum(n, n);
  for (std::size_t t = 0; t < trial.steps(); ++t) {
    const double r = trial.reward[t];
    rl_step(cfg, params.activation, q, trial.xi.row(t), trial.u.row(t), trial.h_prev(t), r,
            baseline.predict(trial.target_id, t, r), accum);
  }
  return accum;
}

}  // namespace bmilearn
