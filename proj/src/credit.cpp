#include "bmilearn/credit.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "bmilearn/linalg.hpp"

namespace bmilearn {

namespace {

constexpr int kResamplesPerSize = 50;

struct EntryFit {
  double mean = 0.0;
  double std = 0.0;
};

EntryFit fit_entries(const Matrix& base, std::span<const std::size_t> eligible) {
  EntryFit fit;
  if (eligible.empty()) return fit;
  for (std::size_t i : eligible) fit.mean += base.values()[i];
  fit.mean /= static_cast<double>(eligible.size());
  double ss = 0.0;
  for (std::size_t i : eligible) ss += (base.values()[i] - fit.mean) * (base.values()[i] - fit.mean);
  fit.std = eligible.size() > 1 ? std::sqrt(ss / static_cast<double>(eligible.size() - 1)) : std::abs(fit.mean);
  return fit;
}

Matrix replace_subset(const Matrix& base, std::span<const std::size_t> eligible, std::size_t count,
                      const EntryFit& fit, RandomSource& rng) {
  // Partial Fisher–Yates picks `count` distinct eligible entries.
  std::vector<std::size_t> pool(eligible.begin(), eligible.end());
  Matrix out = base;
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t j = i + rng.index(pool.size() - i);
    std::swap(pool[i], pool[j]);
    out.values()[pool[i]] = rng.gaussian(fit.mean, fit.std);
  }
  return out;
}

}  // namespace

Matrix make_aligned_matrix(const AlignmentTarget& t, std::span<const std::size_t> eligible, RandomSource& rng) {
  if (!(t.alpha > 0.0 && t.alpha <= 1.0)) throw std::invalid_argument("make_aligned_matrix: alpha must lie in (0, 1]");
  if (frobenius_norm(t.base) == 0.0) throw std::invalid_argument("make_aligned_matrix: base is zero");
  if (1.0 - t.alpha <= t.tol) return t.base;

  const EntryFit fit = fit_entries(t.base, eligible);
  double best_sim = 1.0;
  std::size_t lo = 0;
  std::size_t hi = eligible.size();
  while (lo <= hi) {
    const std::size_t mid = lo + (hi - lo) / 2;
    double sim_sum = 0.0;
    for (int r = 0; r < kResamplesPerSize; ++r) {
      Matrix cand = replace_subset(t.base, eligible, mid, fit, rng);
      if (frobenius_norm(cand) == 0.0) continue;
      const double sim = cosine_similarity_flat(cand, t.base);
      if (std::abs(sim - t.alpha) < std::abs(best_sim - t.alpha)) best_sim = sim;
      if (std::abs(sim - t.alpha) <= t.tol) return cand;
      sim_sum += sim;
    }
    const double mean_sim = sim_sum / kResamplesPerSize;
    if (mean_sim > t.alpha) {
      lo = mid + 1;
    } else {
      if (mid == 0) break;
      hi = mid - 1;
    }
  }
  throw AlignmentError("make_aligned_matrix: no matrix within tolerance of alpha = " + std::to_string(t.alpha) +
                           " (best similarity " + std::to_string(best_sim) + ")",
                       best_sim);
}

Matrix make_aligned_matrix(const AlignmentTarget& t, RandomSource& rng) {
  std::vector<std::size_t> all(t.base.size());
  std::iota(all.begin(), all.end(), 0);
  return make_aligned_matrix(t, all, rng);
}

Matrix perturb_decoder(const Matrix& w_bmi0, double alpha, RandomSource& rng, double tol,
                       std::optional<std::vector<bool>> readout_mask) {
  std::vector<bool> mask;
  if (readout_mask) {
    if (readout_mask->size() != w_bmi0.cols()) throw ShapeError("perturb_decoder: mask length must equal N");
    mask = *readout_mask;
  } else {
    mask.assign(w_bmi0.cols(), false);
    for (std::size_t c = 0; c < w_bmi0.cols(); ++c)
      for (std::size_t r = 0; r < w_bmi0.rows(); ++r)
        if (w_bmi0(r, c) != 0.0) mask[c] = true;
  }
  std::vector<std::size_t> eligible;
  for (std::size_t r = 0; r < w_bmi0.rows(); ++r)
    for (std::size_t c = 0; c < w_bmi0.cols(); ++c)
      if (mask[c]) eligible.push_back(r * w_bmi0.cols() + c);
  return make_aligned_matrix(AlignmentTarget{w_bmi0, alpha, tol}, eligible, rng);
}

Matrix restrict_readout(const Matrix& w_bmi, std::size_t units, RandomSource& rng) {
  const std::size_t n = w_bmi.cols();
  if (units == 0 || units > n) throw std::invalid_argument("restrict_readout: units must lie in [1, N]");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t i = 0; i < units; ++i) std::swap(order[i], order[i + rng.index(n - i)]);
  std::vector<bool> keep(n, false);
  for (std::size_t i = 0; i < units; ++i) keep[order[i]] = true;
  Matrix out = w_bmi;
  for (std::size_t r = 0; r < out.rows(); ++r)
    for (std::size_t c = 0; c < n; ++c)
      if (!keep[c]) out(r, c) = 0.0;
  return out;
}

EstimatedCreditMap estimate_credit_map(std::span<const ObservedTrial> trials, std::size_t k, double ridge) {
  if (trials.empty()) throw std::invalid_argument("estimate_credit_map: no trials");
  const std::size_t n = trials.front().h.cols();
  const std::size_t ny = trials.front().cursor.cols();
  if (k < 1 || k > n) throw std::invalid_argument("estimate_credit_map: k must lie in [1, N]");

  std::size_t samples = 0;
  Vector mean_h(n, 0.0), mean_c(ny, 0.0);
  for (const auto& tr : trials) {
    for (std::size_t t = 0; t < tr.h.rows(); ++t) {
      axpy(1.0, tr.h.row(t), mean_h);
      axpy(1.0, tr.cursor.row(t), mean_c);
      ++samples;
    }
  }
  if (samples < 2) throw std::invalid_argument("estimate_credit_map: need at least two samples");
  for (double& v : mean_h) v /= static_cast<double>(samples);
  for (double& v : mean_c) v /= static_cast<double>(samples);

  Matrix cov(n, n);
  Vector centered(n);
  for (const auto& tr : trials) {
    for (std::size_t t = 0; t < tr.h.rows(); ++t) {
      for (std::size_t i = 0; i < n; ++i) centered[i] = tr.h(t, i) - mean_h[i];
      add_outer(cov, 1.0, centered, centered);
    }
  }
  cov *= 1.0 / static_cast<double>(samples - 1);

  const EigenPairs full = sym_eig_topk(cov, n);
  const double top = std::max(full.values.front(), 0.0);
  std::size_t rank = 0;
  for (double v : full.values)
    if (v > 1e-10 * top && v > 0.0) ++rank;
  if (k > rank)
    throw std::invalid_argument("estimate_credit_map: k = " + std::to_string(k) + " exceeds activity rank " +
                                std::to_string(rank));

  EstimatedCreditMap out;
  out.k = k;
  out.effective_rank = rank;
  out.components = Matrix(k, n);
  for (std::size_t r = 0; r < k; ++r) out.components.set_row(r, full.vectors.row(r));

  // Second moments of (scores, cursor) for the regression.
  Matrix ss(k, k), cs(ny, k);
  Vector cc(ny);
  for (const auto& tr : trials) {
    for (std::size_t t = 0; t < tr.h.rows(); ++t) {
      for (std::size_t i = 0; i < n; ++i) centered[i] = tr.h(t, i) - mean_h[i];
      const Vector score = matvec(out.components, centered);
      for (std::size_t j = 0; j < ny; ++j) cc[j] = tr.cursor(t, j) - mean_c[j];
      add_outer(ss, 1.0, score, score);
      add_outer(cs, 1.0, cc, score);
    }
  }
  out.coefficients = least_squares_from_moments(ss, cs, ridge);
  out.m_hat = matmul(out.coefficients, out.components).transposed();
  return out;
}

}  // namespace bmilearn
