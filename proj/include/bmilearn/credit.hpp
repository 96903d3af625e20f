#pragma once

#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "bmilearn/matrix.hpp"
#include "bmilearn/random.hpp"
#include "bmilearn/rnn.hpp"

namespace bmilearn {

struct AlignmentTarget {
  Matrix base;
  double alpha = 0.5;
  double tol = 0.02;
};

/// Raised when no matrix within tolerance was found.
class AlignmentError : public std::runtime_error {
 public:
  AlignmentError(const std::string& what, double best) : std::runtime_error(what), best_similarity(best) {}
  double best_similarity;
};

/// Returns a copy of `t.base` with a random subset of entries replaced by
/// fresh draws from a Gaussian fitted to the base entries, such that
/// |sim(M, base) − alpha| ≤ tol. The subset size is found by binary search
/// with up to 50 resamples per size.
Matrix make_aligned_matrix(const AlignmentTarget& t, RandomSource& rng);

/// Same construction restricted to `eligible` entries (flattened row-major
/// indices); other entries are copied from `t.base` untouched.
Matrix make_aligned_matrix(const AlignmentTarget& t, std::span<const std::size_t> eligible, RandomSource& rng);

/// New decoder with sim(w_bmi0, w_bmi1) = alpha ± tol. Only readout columns
/// (nonzero columns of w_bmi0, or `readout_mask` when given) are touched.
Matrix perturb_decoder(const Matrix& w_bmi0, double alpha, RandomSource& rng, double tol = 0.02,
                       std::optional<std::vector<bool>> readout_mask = std::nullopt);

/// Zeroes every decoder column outside a random set of `units` readout units.
Matrix restrict_readout(const Matrix& w_bmi, std::size_t units, RandomSource& rng);

struct EstimatedCreditMap {
  Matrix m_hat;         ///< N×N_y
  Matrix components;    ///< k×N principal axes
  Matrix coefficients;  ///< N_y×k cursor regression on PC scores
  std::size_t k = 0;
  std::size_t effective_rank = 0;
};

/// PCA on pooled activity, ridge regression of cursor position on the top-k
/// scores, M̂ = (D C)ᵀ.
EstimatedCreditMap estimate_credit_map(std::span<const ObservedTrial> trials, std::size_t k, double ridge);

}  // namespace bmilearn
