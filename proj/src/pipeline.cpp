#include "bmilearn/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "bmilearn/flowfield.hpp"
#include "bmilearn/learning.hpp"
#include "bmilearn/linalg.hpp"
#include "bmilearn/task.hpp"

namespace bmilearn {

std::uint64_t weight_hash(const Matrix& m) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (double v : m.values()) {
    unsigned char bytes[sizeof(double)];
    std::memcpy(bytes, &v, sizeof(double));
    for (unsigned char b : bytes) {
      h ^= b;
      h *= 0x100000001b3ULL;
    }
  }
  return h;
}

namespace {

constexpr std::size_t kEvalTrials = 100;
constexpr std::size_t kCriterionWindow = 50;

void check_finite(const TrialRecord& tr, const char* phase, std::size_t n) {
  if (!std::isfinite(tr.loss))
    throw DivergenceError(std::string("non-finite loss in ") + phase + " trial " + std::to_string(n));
}

// Frozen-weight block; the hash check guards against accidental updates.
std::vector<ObservedTrial> frozen_block(const RnnParams& params, const NoiseModel& noise, const TaskSpec& task,
                                        std::size_t n_trials, RandomSource& rng, const char* phase,
                                        std::vector<MetricRow>* metrics, double* mean_loss) {
  const std::uint64_t before = weight_hash(params.w_rec);
  std::vector<ObservedTrial> out;
  out.reserve(n_trials);
  double sum = 0.0;
  for (std::size_t n = 0; n < n_trials; ++n) {
    const std::size_t target = n % task.n_targets();
    TrialRecord tr = run_trial(params, noise, task, target, rng);
    check_finite(tr, phase, n);
    if (metrics) metrics->push_back({phase, n, target, tr.loss});
    sum += tr.loss;
    out.push_back(tr.observed());
  }
  if (weight_hash(params.w_rec) != before) throw std::logic_error("weights changed inside a frozen block");
  if (mean_loss) *mean_loss = n_trials ? sum / static_cast<double>(n_trials) : 0.0;
  return out;
}

RnnParams fresh_params(const ExperimentConfig& cfg, RandomSource& root) {
  RandomSource init_rng = root.child("init");
  RnnParams p = init_params(cfg.n_in, cfg.n, cfg.n_out, cfg.g, init_rng);
  p.tau = cfg.tau;
  p.tau_r = cfg.tau_r;
  p.activation = cfg.activation;
  p.readout_mode = cfg.readout_mode;
  if (cfg.readout_units > 0 && cfg.readout_units < cfg.n) {
    RandomSource readout_rng = root.child("readout");
    p.w_bmi = restrict_readout(p.w_bmi, cfg.readout_units, readout_rng);
  }
  return p;
}

// Flattened N×N_y indices of the rows that belong to readout units.
std::vector<std::size_t> readout_entries(const Matrix& w_bmi) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < w_bmi.cols(); ++i) {
    bool used = false;
    for (std::size_t k = 0; k < w_bmi.rows(); ++k) used = used || w_bmi(k, i) != 0.0;
    if (!used) continue;
    for (std::size_t k = 0; k < w_bmi.rows(); ++k) out.push_back(i * w_bmi.rows() + k);
  }
  return out;
}

}  // namespace

std::vector<ObservedTrial> observe_block(const RnnParams& params, const NoiseModel& noise, const TaskSpec& task,
                                         std::size_t n_trials, RandomSource& rng) {
  return frozen_block(params, noise, task, n_trials, rng, "observe", nullptr, nullptr);
}

PretrainResult pretrain(const ExperimentConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  RandomSource root(seed);
  PretrainResult res;
  res.params = fresh_params(cfg, root);
  {
    RandomSource m_rng = root.child("pretrain-m");
    const auto eligible = readout_entries(res.params.w_bmi);
    res.m0 = make_aligned_matrix({res.params.w_bmi.transposed(), cfg.pretrain_alignment, 0.02}, eligible, m_rng);
  }
  res.params.w_fb = res.m0 * cfg.feedback_gain;

  const NoiseModel noise = cfg.noise_model();
  const TaskSpec task = cfg.task();
  const SlConfig sl{res.m0, cfg.effective_pretrain_eta(), SlRule::rflo};
  RandomSource eval_rng = root.child("pretrain-eval");
  frozen_block(res.params, noise, task, kEvalTrials, eval_rng, "pretrain-eval", nullptr, &res.initial_loss);
  RandomSource noise_rng = root.child("pretrain-noise");
  res.metrics.reserve(cfg.pretrain_trials);
  for (std::size_t n = 0; n < cfg.pretrain_trials; ++n) {
    const std::size_t target = n % task.n_targets();
    const TrialRecord tr = run_trial(res.params, noise, task, target, noise_rng);
    check_finite(tr, "pretrain", n);
    res.metrics.push_back({"pretrain", n, target, tr.loss});
    Matrix accum = rflo_accumulate(sl, res.params, tr);
    rflo_apply(sl, accum, res.params.w_rec);
  }
  frozen_block(res.params, noise, task, kEvalTrials, eval_rng, "pretrain-eval", nullptr, &res.final_loss);
  res.learned = res.final_loss < cfg.pretrain_fraction * res.initial_loss;

  if (cfg.estimate_m_k > 0) {
    RandomSource obs_rng = root.child("m-hat-observe");
    const auto block = observe_block(res.params, noise, task, cfg.block_size, obs_rng);
    res.m_hat = estimate_credit_map(block, cfg.estimate_m_k, 1e-8);
  }
  return res;
}

RetrainResult retrain(const ExperimentConfig& cfg, const PretrainResult& pre, std::uint64_t seed) {
  cfg.validate();
  RandomSource root(seed);
  RetrainResult res;
  RnnParams params = pre.params;

  RandomSource decoder_rng = root.child("decoder");
  const Matrix w_bmi1 = perturb_decoder(pre.params.w_bmi, cfg.decoder_similarity, decoder_rng);
  const Matrix w_bmi1_t = w_bmi1.transposed();
  const auto eligible = readout_entries(w_bmi1);
  Matrix m;
  if (cfg.reuse_pretrain_m) {
    m = pre.m0;
  } else {
    RandomSource m_rng = root.child("m");
    m = make_aligned_matrix({w_bmi1_t, cfg.alignment, 0.02}, eligible, m_rng);
  }
  RandomSource m_hat_rng = root.child("m-hat");
  const Matrix m_random = make_aligned_matrix({w_bmi1_t, cfg.m_hat_alignment, 0.02}, eligible, m_hat_rng);

  params.w_bmi = w_bmi1;
  params.w_fb = m * cfg.feedback_gain;

  NoiseModel noise = cfg.noise_model();
  if (cfg.noise_rank > 0) {
    RandomSource basis_rng = root.child("noise-basis");
    const Matrix& preferred = is_supervised(cfg.rule) ? m : w_bmi1_t;
    NoiseModel low = NoiseModel::low_rank(cfg.sigma2_rec, build_low_rank_basis(preferred, cfg.noise_rank, cfg.n, basis_rng));
    low.sigma2_in = noise.sigma2_in;
    low.sigma2_bmi = noise.sigma2_bmi;
    low.gain = noise.gain;
    noise = std::move(low);
  }
  const TaskSpec task = cfg.task();

  Observables& obs = res.obs;
  obs.rule = cfg.rule;
  obs.alignment = cfg.reuse_pretrain_m ? cosine_similarity_flat(m, w_bmi1_t) : cfg.alignment;
  obs.seed = seed;
  obs.w_bmi = w_bmi1;
  obs.sigma = noise.covariance(cfg.n);
  obs.m = m;
  obs.m_random = m_random;
  if (pre.m_hat) obs.m_estimated = pre.m_hat->m_hat;

  RandomSource early_rng = root.child("early-noise");
  obs.early = frozen_block(params, noise, task, cfg.block_size, early_rng, "early", &res.metrics, &res.early_loss);

  const std::size_t n_train = cfg.effective_train_trials();
  const auto mid_begin = static_cast<std::size_t>(cfg.mid_begin * static_cast<double>(n_train));
  const auto mid_end = static_cast<std::size_t>(cfg.mid_end * static_cast<double>(n_train));
  const bool mirror = cfg.eta_wm > 0.0;
  const std::size_t win_len = mirror ? n_train / cfg.mirror_windows : 0;
  if (mirror) {
    if (win_len < 8) throw ConfigError("train_trials too small for the requested mirror windows", "mirror_windows");
    obs.windows.resize(cfg.mirror_windows);
    for (auto& w : obs.windows) w.m = Matrix(m.rows(), m.cols());
  }

  SlConfig sl{m, cfg.eta_rec, cfg.rule == TrainRule::sl_bptt ? SlRule::biased_bptt : SlRule::rflo};
  const MirrorConfig mirror_cfg{cfg.eta_wm};
  RlConfig rl;
  rl.eta = cfg.eta_rec;
  rl.tau_e = cfg.tau_e;
  rl.baseline_decay = cfg.baseline_decay;
  RewardBaseline baseline(task.n_targets(), task.trial_len);

  RandomSource train_rng = root.child("train-noise");
  RandomSource mirror_rng = root.child("mirror");
  res.m_alignment.reserve(n_train);
  for (std::size_t n = 0; n < n_train; ++n) {
    const std::size_t target = n % task.n_targets();
    const TrialRecord tr = run_trial(params, noise, task, target, train_rng);
    check_finite(tr, "train", n);
    res.metrics.push_back({"train", n, target, tr.loss});

    // Whole target cycles alternate so both sets see every target.
    const bool train_cycle = (n / task.n_targets()) % 2 == 0;
    if (n >= mid_begin && n < mid_end) (train_cycle ? obs.mid_train : obs.mid_test).push_back(tr.observed());
    if (mirror) {
      const std::size_t w = n / win_len;
      if (w < cfg.mirror_windows) {
        ObservedWindow& win = obs.windows[w];
        const std::size_t pos = n - w * win_len;
        const std::size_t quarter = win_len / 4;
        if (pos < quarter) {
          win.early.push_back(tr.observed());
        } else if (pos >= win_len - quarter) {
          win.late.push_back(tr.observed());
        } else {
          (train_cycle ? win.train : win.test).push_back(tr.observed());
        }
        win.m += sl.m * (1.0 / static_cast<double>(win_len));
      }
    }

    switch (cfg.rule) {
      case TrainRule::sl_rflo: {
        Matrix accum = rflo_accumulate(sl, params, tr);
        rflo_apply(sl, accum, params.w_rec);
        break;
      }
      case TrainRule::sl_bptt:
        params.w_rec += biased_bptt_update(sl, tr, params);
        break;
      case TrainRule::rl: {
        Matrix accum = rl_accumulate(rl, params, tr, baseline);
        rl_apply(rl, accum, params.w_rec);
        baseline.update(target, tr.reward, rl.baseline_decay);
        break;
      }
    }
    if (mirror) {
      for (std::size_t k = 0; k < cfg.mirror_steps; ++k)
        sl.m = weight_mirror_step(sl.m, mirror_cfg, mirror_rng, w_bmi1, cfg.sigma2_rec);
      if (cfg.feedback_gain > 0.0) params.w_fb = sl.m * cfg.feedback_gain;
    }
    res.m_alignment.push_back(cosine_similarity_flat(sl.m, w_bmi1_t));
  }

  RandomSource late_rng = root.child("late-noise");
  obs.late = frozen_block(params, noise, task, cfg.block_size, late_rng, "late", &res.metrics, &res.late_loss);

  obs.learned = pre.learned &&
                res.late_loss - pre.final_loss < (1.0 - cfg.recovery_fraction) * (res.early_loss - pre.final_loss);
  res.trials_to_criterion = trials_to_criterion(res.metrics, pre.final_loss, res.early_loss);
  res.params = std::move(params);
  return res;
}

std::optional<std::size_t> trials_to_criterion(const std::vector<MetricRow>& metrics, double pretrained_loss,
                                               double early_loss) {
  const double threshold = pretrained_loss + 0.25 * (early_loss - pretrained_loss);
  std::vector<double> train;
  for (const auto& r : metrics)
    if (r.phase == "train") train.push_back(r.loss);
  double sum = 0.0;
  for (std::size_t i = 0; i < train.size(); ++i) {
    sum += train[i];
    if (i >= kCriterionWindow) sum -= train[i - kCriterionWindow];
    if (i + 1 >= kCriterionWindow && sum / static_cast<double>(kCriterionWindow) <= threshold) return i + 1;
  }
  return std::nullopt;
}

namespace {

void add_rows(std::vector<AnalysisRow>& out, const Observables& obs, const std::vector<ObservedTrial>& early,
              const std::vector<ObservedTrial>& late, const std::vector<ObservedTrial>& train,
              const std::vector<ObservedTrial>& test, const Matrix& m_true, int window) {
  if (early.empty() || late.empty()) throw std::invalid_argument("analyze: missing early or late block");
  if (train.empty() || test.empty()) throw std::invalid_argument("analyze: missing learning-phase trials");
  const FlowFieldDelta observed =
      delta_f_observed(fit_autoregression(early, std::nullopt, Block::early), fit_autoregression(late, std::nullopt, Block::late));
  const Matrix moment = error_activity_moment(train);
  const std::size_t n = obs.w_bmi.cols();

  auto emit = [&](const std::string& name, const FlowFieldDelta& pred) {
    const FfccResult r = ffcc(observed, pred, test);
    out.push_back({to_string(obs.rule), name, obs.alignment, obs.seed, r.value, r.skipped, obs.learned, window});
  };
  emit("sl_true_m", predict_dw_sl_from_moment(moment, m_true));
  if (window >= 0) {
    emit("rl", predict_dw_rl_from_moment(moment, obs.w_bmi, obs.sigma));
    return;
  }
  emit("sl_random_m", predict_dw_sl_from_moment(moment, obs.m_random));
  if (obs.m_estimated) emit("sl_estimated_m", predict_dw_sl_from_moment(moment, *obs.m_estimated));
  emit("rl", predict_dw_rl_from_moment(moment, obs.w_bmi, obs.sigma));
  const Matrix iso = Matrix::identity(n);
  const double scale = trace(obs.sigma) / static_cast<double>(n);
  if (max_abs(obs.sigma - iso * scale) > 1e-12 * std::max(scale, 1e-300))
    emit("rl_isotropic", predict_dw_rl_from_moment(moment, obs.w_bmi, iso));
}

}  // namespace

std::vector<AnalysisRow> analyze(const Observables& obs) {
  std::vector<AnalysisRow> rows;
  add_rows(rows, obs, obs.early, obs.late, obs.mid_train, obs.mid_test, obs.m, -1);
  for (std::size_t w = 0; w < obs.windows.size(); ++w) {
    const ObservedWindow& win = obs.windows[w];
    add_rows(rows, obs, win.early, win.late, win.train, win.test, win.m, static_cast<int>(w));
  }
  return rows;
}

RunOutput run_experiment(const ExperimentConfig& cfg, std::uint64_t seed) {
  RunOutput out;
  out.pre = pretrain(cfg, seed);
  out.post = retrain(cfg, out.pre, seed);
  out.rows = analyze(out.post.obs);
  return out;
}

}  // namespace bmilearn
