#include <boost/math/distributions/students_t.hpp>
#include <boost/math/special_functions/beta.hpp>
#include <cmath>

#include "bmilearn/random.hpp"
#include "bmilearn/stats.hpp"
#include "doctest.h"

using namespace bmilearn;

namespace {

// Welch's test written independently, with Boost supplying the t tail.
TTestResult reference_welch(const std::vector<double>& a, const std::vector<double>& b) {
  auto mv = [](const std::vector<double>& x) {
    double m = 0;
    for (double v : x) m += v;
    m /= static_cast<double>(x.size());
    double s = 0;
    for (double v : x) s += (v - m) * (v - m);
    return std::pair{m, s / static_cast<double>(x.size() - 1)};
  };
  const auto [ma, va] = mv(a);
  const auto [mb, vb] = mv(b);
  const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
  const double se2 = va / na + vb / nb;
  TTestResult r;
  r.t = (ma - mb) / std::sqrt(se2);
  r.df = se2 * se2 / ((va / na) * (va / na) / (na - 1) + (vb / nb) * (vb / nb) / (nb - 1));
  boost::math::students_t dist(r.df);
  r.p = 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(r.t)));
  return r;
}

}  // namespace

TEST_CASE("Welch t-test matches a reference on randomized cases") {
  RandomSource rng(2024);
  for (int c = 0; c < 20; ++c) {
    const std::size_t na = 3 + rng.index(20), nb = 3 + rng.index(20);
    const double shift = rng.uniform(-1.5, 1.5), scale = rng.uniform(0.2, 3.0);
    std::vector<double> a, b;
    for (std::size_t i = 0; i < na; ++i) a.push_back(rng.gaussian());
    for (std::size_t i = 0; i < nb; ++i) b.push_back(shift + scale * rng.gaussian());
    const TTestResult got = two_sample_t(a, b);
    const TTestResult want = reference_welch(a, b);
    CHECK(got.t == doctest::Approx(want.t).epsilon(1e-10));
    CHECK(got.df == doctest::Approx(want.df).epsilon(1e-10));
    CHECK(std::abs(got.p - want.p) < 1e-6);
    CHECK(got.p >= 0.0);
    CHECK(got.p <= 1.0);
  }
}

TEST_CASE("swapping samples negates t and keeps p") {
  const std::vector<double> a{1.0, 2.0, 3.5, 2.2}, b{0.1, 0.5, -0.3, 0.9, 0.4};
  const TTestResult ab = two_sample_t(a, b), ba = two_sample_t(b, a);
  CHECK(ab.t == doctest::Approx(-ba.t));
  CHECK(ab.p == doctest::Approx(ba.p));
}

TEST_CASE("incomplete beta agrees with Boost") {
  for (double a : {0.5, 1.0, 2.5, 10.0})
    for (double b : {0.5, 3.0, 7.0})
      for (double x : {0.01, 0.3, 0.5, 0.77, 0.99})
        CHECK(std::abs(incomplete_beta(a, b, x) - boost::math::ibeta(a, b, x)) < 1e-10);
  CHECK(incomplete_beta(2, 3, 0.0) == 0.0);
  CHECK(incomplete_beta(2, 3, 1.0) == 1.0);
}

TEST_CASE("t tail probabilities") {
  for (double df : {1.0, 2.5, 5.0, 30.0})
    for (double t : {0.0, 0.5, 2.0, 6.0}) {
      boost::math::students_t dist(df);
      CHECK(std::abs(student_t_two_sided_p(t, df) - 2.0 * boost::math::cdf(boost::math::complement(dist, t))) < 1e-10);
    }
}

TEST_CASE("significance stars") {
  CHECK(stars_for(0.2) == Stars::ns);
  CHECK(stars_for(0.04) == Stars::one);
  CHECK(stars_for(0.009) == Stars::two);
  CHECK(stars_for(0.0009) == Stars::three);
  CHECK(to_string(Stars::two) == "**");
}

TEST_CASE("descriptive statistics") {
  const std::vector<double> x{2, 4, 4, 4, 5, 5, 7, 9};
  CHECK(mean(x) == doctest::Approx(5.0));
  CHECK(sample_std(x) == doctest::Approx(std::sqrt(32.0 / 7.0)));
  CHECK(sem(x) == doctest::Approx(std::sqrt(32.0 / 7.0) / std::sqrt(8.0)));
}

TEST_CASE("covariance overlap") {
  RandomSource rng(3);
  std::vector<ObservedTrial> a, b, c;
  for (int i = 0; i < 20; ++i) {
    a.push_back({0, gaussian_matrix(20, 6, 0.0, 1.0, rng), Matrix(20, 2), Matrix(20, 2), Matrix(20, 2)});
    c.push_back({0, gaussian_matrix(20, 6, 0.0, 1.0, rng), Matrix(20, 2), Matrix(20, 2), Matrix(20, 2)});
  }
  CHECK(covariance_overlap(a, a) == doctest::Approx(1.0));
  // Independent isotropic sets share only the diagonal structure.
  CHECK(covariance_overlap(a, c) < 0.99);
  const Matrix cov = activity_covariance(a);
  CHECK(cov.rows() == 6);
  CHECK(cov(2, 3) == doctest::Approx(cov(3, 2)));
}

TEST_CASE("weight update correlation and PCA spread") {
  RandomSource rng(4);
  const Matrix pred = gaussian_matrix(4, 4, 0.0, 1.0, rng);
  std::vector<Matrix> same(5, pred);
  for (double r : weight_update_correlation(same, pred, UpdateCorrelationMode::per_trial))
    CHECK(r == doctest::Approx(1.0));
  std::vector<Matrix> collinear;
  for (int i = 1; i <= 6; ++i) collinear.push_back(pred * static_cast<double>(i % 3 + 1));
  CHECK(pca_spread(collinear, 2)[0] == doctest::Approx(1.0).epsilon(1e-9));
  std::vector<Matrix> noisy;
  for (int i = 0; i < 200; ++i) noisy.push_back(pred + gaussian_matrix(4, 4, 0.0, 5.0, rng));
  const auto per = weight_update_correlation(noisy, pred, UpdateCorrelationMode::per_trial);
  const auto cum = weight_update_correlation(noisy, pred, UpdateCorrelationMode::cumulative_mean);
  // Averaging cancels the noise that dominates single updates.
  CHECK(cum.size() == 200);
  CHECK(mean(per) < 0.5);
  CHECK(cum.back() > 0.8);
}
