#include <cmath>

#include "bmilearn/feedforward.hpp"
#include "bmilearn/linalg.hpp"
#include "doctest.h"
#include "helpers.hpp"

using namespace bmilearn;
using namespace bmilearn::ff;

namespace {

FfNet random_net(RandomSource& rng) {
  FfNet net;
  net.w = gaussian_matrix(20, 20, 0.0, 1.0 / std::sqrt(20.0), rng);
  net.w_bmi = gaussian_matrix(2, 20, 0.0, 1.0 / std::sqrt(20.0), rng);
  net.m = net.w_bmi.transposed();
  net.sigma = NoiseModel::isotropic(0.01);
  return net;
}

// ½ Σ_t |ε^t|² for a fixed noise draw.
double half_sq_error(const FfNet& net, const PatternSet& pats, const Matrix& xi) {
  double l = 0;
  for (std::size_t t = 0; t < pats.size(); ++t) {
    const FfStep s = ff_forward_with_noise(net, pats.x.row(t), pats.y_star.row(t), xi.row(t));
    l += 0.5 * dot(s.eps, s.eps);
  }
  return l;
}

}  // namespace

TEST_CASE("SL update with the true decoder equals the negative gradient") {
  RandomSource rng(1);
  for (int trial = 0; trial < 10; ++trial) {
    FfNet net = random_net(rng);
    const PatternSet pats = make_patterns(5, 20, 2, rng);
    const Matrix xi = gaussian_matrix(5, 20, 0.0, 0.1, rng);
    FfTrial tr{Matrix(5, 20), Matrix(5, 2), xi, Vector(5), 0.0};
    for (std::size_t t = 0; t < 5; ++t)
      tr.eps.set_row(t, ff_forward_with_noise(net, pats.x.row(t), pats.y_star.row(t), xi.row(t)).eps);
    const Matrix dw = ff_sl_update(net, pats, tr, 1.0);

    Matrix grad(20, 20);
    const double h = 1e-6;
    for (std::size_t i = 0; i < 20; ++i)
      for (std::size_t j = 0; j < 20; ++j) {
        FfNet plus = net, minus = net;
        plus.w(i, j) += h;
        minus.w(i, j) -= h;
        grad(i, j) = (half_sq_error(plus, pats, xi) - half_sq_error(minus, pats, xi)) / (2 * h);
      }
    CHECK(testing::rel_err(dw, -grad) < 1e-6);
  }
}

TEST_CASE("forward pass") {
  RandomSource rng(2);
  FfNet net = random_net(rng);
  const Vector x(20, 1.0), y_star{0.5, -0.5}, xi(20, 0.0);
  const FfStep s = ff_forward_with_noise(net, x, y_star, xi);
  const Vector h = matvec(net.w, x);
  const Vector y = matvec(net.w_bmi, h);
  CHECK(s.h[3] == doctest::Approx(h[3]));
  CHECK(s.eps[0] == doctest::Approx(0.5 - y[0]));
  CHECK(s.eps[1] == doctest::Approx(-0.5 - y[1]));
}

TEST_CASE("patterns are binary with Gaussian targets") {
  RandomSource rng(3);
  const PatternSet p = make_patterns(5, 20, 2, rng);
  for (double v : p.x.values()) CHECK(std::abs(v) == 1.0);
  CHECK(p.y_star.rows() == 5);
}

TEST_CASE("RL update is the reward-weighted noise") {
  RandomSource rng(4);
  FfNet net = random_net(rng);
  const PatternSet pats = make_patterns(3, 20, 2, rng);
  const FfTrial tr = ff_run_trial(net, pats, rng);
  const Vector baseline{0.0, 0.0, 0.0};
  const Matrix dw = ff_rl_update(net, pats, tr, baseline, 2.0);
  Matrix want(20, 20);
  for (std::size_t t = 0; t < 3; ++t) add_outer(want, 2.0 * tr.reward[t], tr.xi.row(t), pats.x.row(t));
  CHECK(testing::rel_err(dw, want) < 1e-12);
  const Matrix zero = ff_rl_update(net, pats, tr, tr.reward, 2.0);
  CHECK(max_abs(zero) == 0.0);
}

TEST_CASE("predictions follow the two hypotheses") {
  RandomSource rng(5);
  FfNet net = random_net(rng);
  net.m = gaussian_matrix(20, 2, 0.0, 1.0, rng);
  const Matrix mean_eps = gaussian_matrix(5, 2, 0.0, 1.0, rng);
  const Matrix sl = ff_predict_dh(net, mean_eps, Hypothesis::sl);
  const Matrix rl = ff_predict_dh(net, mean_eps, Hypothesis::rl);
  const Vector want_sl = matvec(net.m, mean_eps.row(1));
  CHECK(sl(1, 4) == doctest::Approx(want_sl[4]));
  CHECK(cosine_similarity_flat(rl, matmul(mean_eps, net.w_bmi)) == doctest::Approx(1.0));
  CHECK(ff_corr(sl, sl) == doctest::Approx(1.0));
}

TEST_CASE("single experiments learn and favour the training rule") {
  const FfResult sl = run_ff_experiment(FfExperiment::standard(FfRule::sl), FfRule::sl, 1);
  CHECK(sl.final_loss < sl.initial_loss);
  CHECK(std::abs(sl.sim_m - 0.3) <= 0.02);
  const FfResult again = run_ff_experiment(FfExperiment::standard(FfRule::sl), FfRule::sl, 1);
  CHECK(again.corr_sl_pred == sl.corr_sl_pred);
}
