#include "bmilearn/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "bmilearn/linalg.hpp"

namespace bmilearn {

std::string to_string(Stars s) {
  switch (s) {
    case Stars::one: return "*";
    case Stars::two: return "**";
    case Stars::three: return "***";
    case Stars::ns: break;
  }
  return "ns";
}

Stars stars_for(double p) {
  if (p < 0.001) return Stars::three;
  if (p < 0.01) return Stars::two;
  if (p < 0.05) return Stars::one;
  return Stars::ns;
}

namespace {

// Continued fraction for I_x(a, b), modified Lentz, converged to 1e−12.
double beta_continued_fraction(double a, double b, double x) {
  constexpr double tiny = 1e-300;
  constexpr double eps = 1e-12;
  const double qab = a + b;
  const double qap = a + 1.0;
  const double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::abs(d) < tiny) d = tiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= 10000; ++m) {
    const double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < tiny) d = tiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < tiny) d = tiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < eps) return h;
  }
  throw std::runtime_error("incomplete_beta: continued fraction did not converge");
}

}  // namespace

double incomplete_beta(double a, double b, double x) {
  if (!(a > 0.0) || !(b > 0.0)) throw std::invalid_argument("incomplete_beta: a and b must be positive");
  if (x < 0.0 || x > 1.0) throw std::invalid_argument("incomplete_beta: x must lie in [0, 1]");
  if (x == 0.0) return 0.0;
  if (x == 1.0) return 1.0;
  const double log_front =
      std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) + b * std::log1p(-x);
  const double front = std::exp(log_front);
  if (x < (a + 1.0) / (a + b + 2.0)) return front * beta_continued_fraction(a, b, x) / a;
  return 1.0 - front * beta_continued_fraction(b, a, 1.0 - x) / b;
}

double student_t_two_sided_p(double t, double df) {
  if (!(df > 0.0)) throw std::invalid_argument("student_t_two_sided_p: df must be positive");
  if (!std::isfinite(t)) return 0.0;
  const double x = df / (df + t * t);
  return std::clamp(incomplete_beta(0.5 * df, 0.5, x), 0.0, 1.0);
}

double mean(std::span<const double> x) {
  if (x.empty()) throw std::invalid_argument("mean: empty sequence");
  return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
}

double sample_std(std::span<const double> x) {
  if (x.size() < 2) throw std::invalid_argument("sample_std: need at least two values");
  const double m = mean(x);
  double ss = 0.0;
  for (double v : x) ss += (v - m) * (v - m);
  return std::sqrt(ss / static_cast<double>(x.size() - 1));
}

double sem(std::span<const double> x) {
  if (x.size() < 2) throw std::invalid_argument("sem: need at least two values");
  return sample_std(x) / std::sqrt(static_cast<double>(x.size()));
}

TTestResult two_sample_t(std::span<const double> a, std::span<const double> b) {
  if (a.size() < 2 || b.size() < 2) throw std::invalid_argument("two_sample_t: each sample needs >= 2 values");
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  const double va = std::pow(sample_std(a), 2) / na;
  const double vb = std::pow(sample_std(b), 2) / nb;
  if (va == 0.0 && vb == 0.0) throw std::invalid_argument("two_sample_t: zero variance in both samples");
  TTestResult r;
  r.t = (mean(a) - mean(b)) / std::sqrt(va + vb);
  r.df = (va + vb) * (va + vb) / (va * va / (na - 1.0) + vb * vb / (nb - 1.0));
  r.p = student_t_two_sided_p(r.t, r.df);
  r.stars = stars_for(r.p);
  return r;
}

Matrix activity_covariance(std::span<const ObservedTrial> trials) {
  if (trials.empty()) throw std::invalid_argument("activity_covariance: no trials");
  const std::size_t n = trials.front().h.cols();
  Vector mu(n, 0.0);
  std::size_t samples = 0;
  for (const auto& tr : trials)
    for (std::size_t t = 0; t < tr.h.rows(); ++t, ++samples) axpy(1.0, tr.h.row(t), mu);
  if (samples < 2) throw std::invalid_argument("activity_covariance: need at least two samples");
  for (double& v : mu) v /= static_cast<double>(samples);
  Matrix cov(n, n);
  Vector c(n);
  for (const auto& tr : trials)
    for (std::size_t t = 0; t < tr.h.rows(); ++t) {
      for (std::size_t i = 0; i < n; ++i) c[i] = tr.h(t, i) - mu[i];
      add_outer(cov, 1.0, c, c);
    }
  return cov * (1.0 / static_cast<double>(samples - 1));
}

double covariance_overlap(std::span<const ObservedTrial> a, std::span<const ObservedTrial> b) {
  const Matrix ca = activity_covariance(a);
  const Matrix cb = activity_covariance(b);
  require_same_shape(ca, cb, "covariance_overlap");
  try {
    return pearson(ca.values(), cb.values());
  } catch (const NumericalError&) {
    throw NumericalError("covariance_overlap: degenerate covariance");
  }
}

std::vector<double> weight_update_correlation(std::span<const Matrix> dw_obs, const Matrix& dw_pred,
                                              UpdateCorrelationMode mode) {
  std::vector<double> out;
  out.reserve(dw_obs.size());
  Matrix running(dw_pred.rows(), dw_pred.cols());
  for (std::size_t i = 0; i < dw_obs.size(); ++i) {
    require_same_shape(dw_obs[i], dw_pred, "weight_update_correlation");
    if (mode == UpdateCorrelationMode::per_trial) {
      out.push_back(pearson(dw_obs[i].values(), dw_pred.values()));
    } else {
      running += dw_obs[i];
      out.push_back(pearson(running.values(), dw_pred.values()));
    }
  }
  return out;
}

std::vector<double> pca_spread(std::span<const Matrix> dw_obs, std::size_t k) {
  const std::size_t n = dw_obs.size();
  if (n < k || k == 0) throw std::invalid_argument("pca_spread: fewer samples than k");
  const std::size_t dim = dw_obs.front().size();
  Vector mu(dim, 0.0);
  for (const auto& m : dw_obs) {
    if (m.size() != dim) throw ShapeError("pca_spread: updates differ in shape");
    axpy(1.0, m.values(), mu);
  }
  for (double& v : mu) v /= static_cast<double>(n);

  // Eigenvalues of XXᵀ and XᵀX agree, so decompose the smaller Gram matrix.
  Matrix x(n, dim);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < dim; ++j) x(i, j) = dw_obs[i].values()[j] - mu[j];
  const Matrix gram = n <= dim ? matmul_transposed(x, x) : matmul(x.transposed(), x);
  const double total = trace(gram);
  if (!(total > 0.0)) throw NumericalError("pca_spread: updates have zero variance");
  const std::size_t kk = std::min(k, gram.rows());
  const EigenPairs eig = sym_eig_topk(gram, kk);
  std::vector<double> frac(k, 0.0);
  for (std::size_t i = 0; i < kk; ++i) frac[i] = std::max(eig.values[i], 0.0) / total;
  return frac;
}

}  // namespace bmilearn
