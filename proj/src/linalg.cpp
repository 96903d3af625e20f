#include "bmilearn/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace bmilearn {

double cosine_similarity_flat(const Matrix& a, const Matrix& b) {
  require_same_shape(a, b, "cosine_similarity_flat");
  const double na = frobenius_norm(a);
  const double nb = frobenius_norm(b);
  if (na == 0.0 || nb == 0.0) throw NumericalError("cosine_similarity_flat: zero-norm input");
  return std::clamp(frobenius_dot(a, b) / (na * nb), -1.0, 1.0);
}

double pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw ShapeError("pearson: length mismatch");
  if (x.size() < 2) throw std::invalid_argument("pearson: need at least two samples");
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) throw NumericalError("pearson: zero variance");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

Matrix cholesky(const Matrix& s) {
  if (s.rows() != s.cols()) throw ShapeError("cholesky: matrix not square");
  const std::size_t n = s.rows();
  Matrix l(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    double d = s(j, j);
    for (std::size_t k = 0; k < j; ++k) d -= l(j, k) * l(j, k);
    if (!(d > 0.0)) throw NumericalError("cholesky: matrix not positive definite at pivot " + std::to_string(j));
    const double ljj = std::sqrt(d);
    l(j, j) = ljj;
    for (std::size_t i = j + 1; i < n; ++i) {
      double v = s(i, j);
      for (std::size_t k = 0; k < j; ++k) v -= l(i, k) * l(j, k);
      l(i, j) = v / ljj;
    }
  }
  return l;
}

namespace {

// Solves (L Lᵀ) x = b in place.
void cholesky_solve(const Matrix& l, std::span<double> b) {
  const std::size_t n = l.rows();
  for (std::size_t i = 0; i < n; ++i) {
    double v = b[i];
    for (std::size_t k = 0; k < i; ++k) v -= l(i, k) * b[k];
    b[i] = v / l(i, i);
  }
  for (std::size_t i = n; i-- > 0;) {
    double v = b[i];
    for (std::size_t k = i + 1; k < n; ++k) v -= l(k, i) * b[k];
    b[i] = v / l(i, i);
  }
}

}  // namespace

Matrix least_squares_from_moments(const Matrix& xx, const Matrix& yx, double ridge) {
  if (ridge < 0.0) throw std::invalid_argument("least_squares: ridge must be >= 0");
  if (xx.rows() != xx.cols() || yx.cols() != xx.rows())
    throw ShapeError("least_squares: moments " + shape_string(xx) + " / " + shape_string(yx));
  Matrix g = xx;
  for (std::size_t i = 0; i < g.rows(); ++i) g(i, i) += ridge;
  Matrix l;
  try {
    l = cholesky(g);
  } catch (const NumericalError&) {
    throw NumericalError("least_squares: singular normal matrix (ridge = " + std::to_string(ridge) + ")");
  }
  // G is symmetric, so each row a of A solves G aᵀ = (row of Y Xᵀ)ᵀ.
  Matrix a = yx;
  for (std::size_t r = 0; r < a.rows(); ++r) cholesky_solve(l, a.row(r));
  return a;
}

Matrix least_squares(const Matrix& x, const Matrix& y, double ridge) {
  if (x.cols() != y.cols())
    throw ShapeError("least_squares: sample counts differ (" + shape_string(x) + " vs " + shape_string(y) + ")");
  return least_squares_from_moments(matmul_transposed(x, x), matmul_transposed(y, x), ridge);
}

double default_ridge(const Matrix& xx) {
  if (xx.rows() == 0) return 0.0;
  return 1e-6 * trace(xx) / static_cast<double>(xx.rows());
}

EigenPairs sym_eig_topk(const Matrix& s, std::size_t k) {
  if (s.rows() != s.cols()) throw ShapeError("sym_eig_topk: matrix not square");
  const std::size_t d = s.rows();
  if (k < 1 || k > d) throw std::invalid_argument("sym_eig_topk: k must lie in [1, d]");
  const double scale = std::max(max_abs(s), 1e-300);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = i + 1; j < d; ++j)
      if (std::abs(s(i, j) - s(j, i)) > 1e-9 * scale)
        throw std::invalid_argument("sym_eig_topk: matrix is not symmetric");

  Matrix a = s;
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = i + 1; j < d; ++j) a(i, j) = a(j, i) = 0.5 * (s(i, j) + s(j, i));
  Matrix v = Matrix::identity(d);  // columns accumulate eigenvectors

  const double fro = frobenius_norm(a);
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = i + 1; j < d; ++j) off += a(i, j) * a(i, j);
    if (std::sqrt(off) <= 1e-15 * fro) break;

    for (std::size_t p = 0; p < d; ++p) {
      for (std::size_t q = p + 1; q < d; ++q) {
        const double apq = a(p, q);
        if (std::abs(apq) <= 1e-300) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t = (theta >= 0.0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double sn = t * c;
        for (std::size_t r = 0; r < d; ++r) {
          const double arp = a(r, p);
          const double arq = a(r, q);
          a(r, p) = c * arp - sn * arq;
          a(r, q) = sn * arp + c * arq;
        }
        for (std::size_t r = 0; r < d; ++r) {
          const double apr = a(p, r);
          const double aqr = a(q, r);
          a(p, r) = c * apr - sn * aqr;
          a(q, r) = sn * apr + c * aqr;
        }
        a(p, q) = a(q, p) = 0.0;
        for (std::size_t r = 0; r < d; ++r) {
          const double vrp = v(r, p);
          const double vrq = v(r, q);
          v(r, p) = c * vrp - sn * vrq;
          v(r, q) = sn * vrp + c * vrq;
        }
      }
    }
  }

  std::vector<std::size_t> order(d);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return a(i, i) > a(j, j); });

  EigenPairs out{Matrix(k, d), Vector(k)};
  for (std::size_t r = 0; r < k; ++r) {
    const std::size_t idx = order[r];
    out.values[r] = a(idx, idx);
    for (std::size_t c = 0; c < d; ++c) out.vectors(r, c) = v(c, idx);
  }
  return out;
}

Matrix orthonormal_columns(const Matrix& a, double tol) {
  std::vector<Vector> kept;
  for (std::size_t c = 0; c < a.cols(); ++c) {
    Vector v = a.col(c);
    const double original = norm2(v);
    if (original == 0.0) continue;
    for (int pass = 0; pass < 2; ++pass)
      for (const auto& q : kept) axpy(-dot(q, v), q, v);
    const double n = norm2(v);
    if (n <= tol * original) continue;
    for (double& x : v) x /= n;
    kept.push_back(std::move(v));
  }
  Matrix q(a.rows(), kept.size());
  for (std::size_t c = 0; c < kept.size(); ++c) q.set_col(c, kept[c]);
  return q;
}

}  // namespace bmilearn
