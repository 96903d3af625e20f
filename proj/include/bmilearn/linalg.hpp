#pragma once

#include <span>
#include <stdexcept>

#include "bmilearn/matrix.hpp"

namespace bmilearn {

/// Raised for singular or otherwise unusable systems.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Cosine similarity of the flattened matrices. Throws on a zero-norm input.
double cosine_similarity_flat(const Matrix& a, const Matrix& b);

double pearson(std::span<const double> x, std::span<const double> y);

/// Lower-triangular Cholesky factor of a symmetric positive-definite matrix.
Matrix cholesky(const Matrix& s);

/// Ridge least squares with samples as columns: returns A minimising
/// ‖Y − A X‖² + ridge‖A‖², i.e. A = Y Xᵀ (X Xᵀ + ridge I)⁻¹.
Matrix least_squares(const Matrix& x, const Matrix& y, double ridge);

/// Least squares from precomputed second moments: A = yx (xx + ridge I)⁻¹.
Matrix least_squares_from_moments(const Matrix& xx, const Matrix& yx, double ridge);

/// 1e−6 · trace(X Xᵀ)/d, the library-wide default AR regulariser.
double default_ridge(const Matrix& xx);

struct EigenPairs {
  Matrix vectors;  ///< k×d, one orthonormal eigenvector per row
  Vector values;   ///< descending
};

/// Top-k eigenpairs of a symmetric matrix via cyclic Jacobi rotations.
EigenPairs sym_eig_topk(const Matrix& s, std::size_t k);

/// Orthonormalises the columns of `a` (modified Gram–Schmidt, two passes).
/// Columns that collapse below `tol` are dropped.
Matrix orthonormal_columns(const Matrix& a, double tol = 1e-10);

}  // namespace bmilearn
