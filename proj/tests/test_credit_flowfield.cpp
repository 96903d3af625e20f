#include <cmath>

#include "bmilearn/credit.hpp"
#include "bmilearn/flowfield.hpp"
#include "bmilearn/linalg.hpp"
#include "bmilearn/rnn.hpp"
#include "bmilearn/task.hpp"
#include "doctest.h"
#include "helpers.hpp"

using namespace bmilearn;

TEST_CASE("aligned matrices hit the requested similarity") {
  RandomSource rng(1);
  const Matrix base = gaussian_matrix(50, 2, 0.0, 1.0, rng);
  for (double alpha : {0.3, 0.5, 0.8, 1.0}) {
    const Matrix m = make_aligned_matrix({base, alpha, 0.02}, rng);
    CHECK(std::abs(cosine_similarity_flat(m, base) - alpha) <= 0.02);
  }
  CHECK_THROWS(make_aligned_matrix({base, 0.0, 0.02}, rng));
}

TEST_CASE("restricted alignment leaves ineligible entries alone") {
  RandomSource rng(2);
  Matrix base = gaussian_matrix(10, 2, 0.0, 1.0, rng);
  std::vector<std::size_t> eligible;
  for (std::size_t r = 0; r < 5; ++r)
    for (std::size_t c = 0; c < 2; ++c) eligible.push_back(r * 2 + c);
  const Matrix m = make_aligned_matrix({base, 0.6, 0.02}, eligible, rng);
  for (std::size_t r = 5; r < 10; ++r)
    for (std::size_t c = 0; c < 2; ++c) CHECK(m(r, c) == base(r, c));
  CHECK(std::abs(cosine_similarity_flat(m, base) - 0.6) <= 0.02);
}

TEST_CASE("decoder perturbation and subset readout") {
  RandomSource rng(3);
  const RnnParams p = init_params(4, 40, 2, 1.5, rng);
  const Matrix w1 = perturb_decoder(p.w_bmi, 0.5, rng);
  CHECK(std::abs(cosine_similarity_flat(w1, p.w_bmi) - 0.5) <= 0.02);
  const Matrix sub = restrict_readout(p.w_bmi, 10, rng);
  std::size_t live = 0;
  for (std::size_t c = 0; c < 40; ++c)
    if (sub(0, c) != 0.0 || sub(1, c) != 0.0) ++live;
  CHECK(live == 10);
  const Matrix w2 = perturb_decoder(sub, 0.7, rng);
  for (std::size_t c = 0; c < 40; ++c)
    if (sub(0, c) == 0.0 && sub(1, c) == 0.0) CHECK((w2(0, c) == 0.0 && w2(1, c) == 0.0));
}

TEST_CASE("credit-map estimate recovers a decoder inside the activity subspace") {
  RandomSource rng(4);
  const std::size_t n = 12, k = 4;
  const Matrix basis = orthonormal_columns(gaussian_matrix(n, k, 0.0, 1.0, rng));
  // Decoder rows lie in the span of the activity.
  const Matrix decoder = matmul(gaussian_matrix(2, k, 0.0, 1.0, rng), basis.transposed());
  std::vector<ObservedTrial> trials;
  for (int tr = 0; tr < 30; ++tr) {
    ObservedTrial o{0, Matrix(10, n), Matrix(10, 2), Matrix(10, 2), Matrix(10, 2)};
    for (std::size_t t = 0; t < 10; ++t) {
      const Vector h = matvec(basis, gaussian_vector(k, rng));
      o.h.set_row(t, h);
      o.cursor.set_row(t, matvec(decoder, h));
    }
    trials.push_back(std::move(o));
  }
  const EstimatedCreditMap est = estimate_credit_map(trials, k, 0.0);
  CHECK(est.effective_rank == k);
  CHECK(testing::rel_err(est.m_hat, decoder.transposed()) < 1e-8);
  CHECK_THROWS(estimate_credit_map(trials, k + 1, 0.0));
}

namespace {

// Noise-free linear network with silent inputs started from random states.
std::vector<ObservedTrial> linear_block(const RnnParams& p, std::size_t n_trials, RandomSource& rng) {
  const TaskSpec task = TaskSpec::center_out(15);
  std::vector<ObservedTrial> out;
  for (std::size_t i = 0; i < n_trials; ++i) {
    RnnState s = RnnState::zeros(p);
    s.h = gaussian_vector(p.n(), rng);
    RandomSource noise(0);
    out.push_back(run_trial_from(p, NoiseModel::isotropic(0.0), task, i % 4, s, noise).observed());
  }
  return out;
}

RnnParams silent_linear(std::size_t n, std::uint64_t seed) {
  RandomSource rng(seed);
  RnnParams p = init_params(4, n, 2, 0.8, rng);
  p.activation = Activation::linear;
  p.w_in = Matrix(n, 4);
  return p;
}

}  // namespace

TEST_CASE("autoregression recovers the closed-form propagator") {
  const RnnParams p = silent_linear(8, 5);
  RandomSource rng(6);
  const auto block = linear_block(p, 10, rng);
  const ArFit fit = fit_autoregression(block, 0.0);
  const Matrix a = Matrix::identity(8) * (1.0 - 1.0 / p.tau) + p.w_rec * (1.0 / p.tau);
  CHECK(testing::rel_err(fit.a, a) < 1e-8);
  CHECK(fit.n_trials_used == 10);
}

TEST_CASE("observed flow-field change recovers a planted weight change") {
  RnnParams p = silent_linear(8, 7);
  RandomSource rng(8);
  const auto early = linear_block(p, 10, rng);
  const Matrix d = gaussian_matrix(8, 8, 0.0, 0.05, rng);
  p.w_rec += d;
  const auto late = linear_block(p, 10, rng);
  const FlowFieldDelta obs =
      delta_f_observed(fit_autoregression(early, 0.0, Block::early), fit_autoregression(late, 0.0, Block::late));
  CHECK(testing::rel_err(obs.delta, d * (1.0 / p.tau)) < 1e-8);
}

TEST_CASE("AR pairs never cross trial boundaries") {
  // Two one-dimensional trials with different constant ratios: a fit that
  // linked the last step of trial 1 to the first of trial 2 would be biased.
  ObservedTrial a{0, Matrix{{1.0}, {0.5}, {0.25}}, Matrix(3, 1), Matrix(3, 1), Matrix(3, 1)};
  ObservedTrial b{0, Matrix{{10.0}, {5.0}, {2.5}}, Matrix(3, 1), Matrix(3, 1), Matrix(3, 1)};
  const std::vector<ObservedTrial> trials{a, b};
  CHECK(fit_autoregression(trials, 0.0).a(0, 0) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("predictions from trials and from the moment agree") {
  RandomSource rng(9);
  std::vector<ObservedTrial> trials;
  for (int i = 0; i < 5; ++i)
    trials.push_back({0, gaussian_matrix(6, 7, 0.0, 1.0, rng), Matrix(6, 2), gaussian_matrix(6, 2, 0.0, 1.0, rng),
                      Matrix(6, 2)});
  Matrix moment(2, 7);
  for (const auto& t : trials) moment += matmul(t.eps.transposed(), t.h);
  CHECK(testing::rel_err(error_activity_moment(trials), moment) < 1e-14);

  const Matrix m = gaussian_matrix(7, 2, 0.0, 1.0, rng);
  CHECK(testing::rel_err(predict_dw_sl(trials, m).delta, matmul(m, moment)) < 1e-12);
  const Matrix w_bmi = gaussian_matrix(2, 7, 0.0, 1.0, rng);
  const Matrix sigma = Matrix::identity(7) * 0.3;
  CHECK(testing::rel_err(predict_dw_rl(trials, w_bmi, sigma).delta,
                         matmul(matmul(sigma, w_bmi.transposed()), moment)) < 1e-12);
  CHECK(testing::rel_err(predict_dw_rl_from_moment(moment, w_bmi, sigma).delta,
                         predict_dw_rl(trials, w_bmi, sigma).delta) < 1e-12);
}

TEST_CASE("FFCC identities") {
  RandomSource rng(10);
  std::vector<ObservedTrial> test;
  for (int i = 0; i < 4; ++i)
    test.push_back({0, gaussian_matrix(5, 6, 0.0, 1.0, rng), Matrix(5, 2), Matrix(5, 2), Matrix(5, 2)});
  for (int trial = 0; trial < 5; ++trial) {
    const FlowFieldDelta x{gaussian_matrix(6, 6, 0.0, 1.0, rng), false};
    CHECK(ffcc(x, x, test).value == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(ffcc(x, FlowFieldDelta{-x.delta, false}, test).value == doctest::Approx(-1.0).epsilon(1e-12));
    const FlowFieldDelta y{gaussian_matrix(6, 6, 0.0, 1.0, rng), false};
    const double base = ffcc(x, y, test).value;
    CHECK(ffcc(x, FlowFieldDelta{y.delta * 7.5, false}, test).value == doctest::Approx(base).epsilon(1e-12));
    CHECK(ffcc(x, FlowFieldDelta{y.delta * 1e-3, false}, test).value == doctest::Approx(base).epsilon(1e-12));
    CHECK(std::abs(base) <= 1.0);
  }
}

TEST_CASE("FFCC skips and counts degenerate points") {
  ObservedTrial t{0, Matrix{{1, 0}, {0, 0}, {0, 1}}, Matrix(3, 2), Matrix(3, 2), Matrix(3, 2)};
  const std::vector<ObservedTrial> test{t};
  const FlowFieldDelta obs{Matrix::identity(2), false};
  const FfccResult r = ffcc(obs, obs, test);
  CHECK(r.skipped == 1);
  CHECK(r.terms == 2);
  CHECK(r.value == doctest::Approx(1.0));
}
