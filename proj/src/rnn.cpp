#include "bmilearn/rnn.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "bmilearn/linalg.hpp"
#include "bmilearn/task.hpp"

namespace bmilearn {

double activate(Activation a, double u) { return a == Activation::tanh ? std::tanh(u) : u; }

double activation_derivative(Activation a, double u) {
  if (a == Activation::linear) return 1.0;
  const double th = std::tanh(u);
  return 1.0 - th * th;
}

void RnnParams::validate() const {
  const std::size_t nn = n();
  if (w_rec.cols() != nn) throw ShapeError("w_rec must be square, got " + shape_string(w_rec));
  if (w_in.rows() != nn) throw ShapeError("w_in rows must equal N, got " + shape_string(w_in));
  if (w_bmi.cols() != nn) throw ShapeError("w_bmi cols must equal N, got " + shape_string(w_bmi));
  if (w_fb.rows() != nn || w_fb.cols() != w_bmi.rows())
    throw ShapeError("w_fb must be N×N_y, got " + shape_string(w_fb));
  if (!(tau >= 1.0)) throw std::invalid_argument("tau must be >= 1");
  if (!(tau_r >= 1.0)) throw std::invalid_argument("tau_r must be >= 1");
}

NoiseModel NoiseModel::isotropic(double sigma2) {
  NoiseModel m;
  m.kind = NoiseKind::isotropic;
  m.sigma2 = sigma2;
  return m;
}

NoiseModel NoiseModel::low_rank(double sigma2, Matrix basis) {
  NoiseModel m;
  m.kind = NoiseKind::low_rank;
  m.sigma2 = sigma2;
  m.basis = std::move(basis);
  return m;
}

Matrix NoiseModel::covariance(std::size_t n) const {
  const double v = gain * gain * sigma2;
  if (kind == NoiseKind::isotropic) return Matrix::identity(n) * v;
  return matmul_transposed(basis, basis) * v;
}

void NoiseModel::validate(std::size_t n) const {
  if (!(sigma2 >= 0.0) || !(sigma2_in >= 0.0) || !(sigma2_bmi >= 0.0))
    throw std::invalid_argument("noise variances must be >= 0");
  if (!(gain > 0.0) || !std::isfinite(gain)) throw std::invalid_argument("noise gain must be positive");
  if (kind == NoiseKind::low_rank) {
    if (basis.rows() != n) throw ShapeError("noise basis must have N rows, got " + shape_string(basis));
    const Matrix gram = matmul(basis.transposed(), basis);
    if (max_abs(gram - Matrix::identity(basis.cols())) > 1e-10)
      throw std::invalid_argument("noise basis columns are not orthonormal");
  }
}

RnnState RnnState::zeros(const RnnParams& params) {
  return {Vector(params.n(), 0.0), Vector(params.n_out(), 0.0), Vector(params.n_out(), 0.0)};
}

Vector sample_noise(const NoiseModel& noise, std::size_t n, RandomSource& rng) {
  Vector xi(n, 0.0);
  if (noise.sigma2 == 0.0) return xi;
  const double sd = noise.gain * std::sqrt(noise.sigma2);
  if (noise.kind == NoiseKind::isotropic) {
    for (double& v : xi) v = sd * rng.gaussian();
    return xi;
  }
  const std::size_t d = noise.basis.cols();
  for (std::size_t c = 0; c < d; ++c) {
    const double z = sd * rng.gaussian();
    for (std::size_t r = 0; r < n; ++r) xi[r] += z * noise.basis(r, c);
  }
  return xi;
}

StepOutput step(const RnnParams& params, const RnnState& state, std::span<const double> x,
                const NoiseModel& noise, RandomSource& rng) {
  const std::size_t n = params.n();
  if (state.h.size() != n || x.size() != params.n_in() || state.y_prev.size() != params.n_out())
    throw ShapeError("step: state/input dimensions do not match params");

  StepOutput out;
  Vector x_noisy(x.begin(), x.end());
  if (noise.sigma2_in > 0.0) {
    const double sd = std::sqrt(noise.sigma2_in);
    for (double& v : x_noisy) v += sd * rng.gaussian();
  }

  out.u = matvec(params.w_rec, state.h);
  const Vector drive = matvec(params.w_in, x_noisy);
  axpy(1.0, drive, out.u);
  const Vector fb = matvec(params.w_fb, state.y_prev);
  axpy(1.0, fb, out.u);

  out.xi = sample_noise(noise, n, rng);

  const double leak = 1.0 - 1.0 / params.tau;
  out.state.h.resize(n);
  for (std::size_t i = 0; i < n; ++i)
    out.state.h[i] = leak * state.h[i] + activate(params.activation, out.u[i]) / params.tau + out.xi[i];

  out.y = matvec(params.w_bmi, out.state.h);
  if (noise.sigma2_bmi > 0.0) {
    const double sd = std::sqrt(noise.sigma2_bmi);
    for (double& v : out.y) v += sd * rng.gaussian();
  }

  if (params.readout_mode == ReadoutMode::position) {
    out.state.cursor = out.y;
  } else {
    out.state.cursor = state.cursor;
    const double keep = 1.0 - 1.0 / params.tau_r;
    for (std::size_t k = 0; k < out.y.size(); ++k)
      out.state.cursor[k] = keep * state.cursor[k] + out.y[k] / params.tau_r;
  }
  out.state.y_prev = out.y;
  return out;
}

Matrix build_low_rank_basis(const Matrix& preferred, std::size_t d, std::size_t n, RandomSource& rng) {
  if (d > n) throw std::invalid_argument("build_low_rank_basis: d exceeds N");
  if (d == 0) throw std::invalid_argument("build_low_rank_basis: d must be positive");
  Matrix directions;
  if (preferred.rows() == n) {
    directions = preferred;
  } else if (preferred.cols() == n) {
    directions = preferred.transposed();
  } else {
    throw ShapeError("build_low_rank_basis: preferred map " + shape_string(preferred) + " has no N-sized axis");
  }
  Matrix lead = orthonormal_columns(directions);
  const std::size_t n_lead = std::min(lead.cols(), d);

  std::vector<Vector> cols;
  for (std::size_t c = 0; c < n_lead; ++c) cols.push_back(lead.col(c));
  while (cols.size() < d) {
    Vector v = gaussian_vector(n, rng);
    for (int pass = 0; pass < 2; ++pass)
      for (const auto& q : cols) axpy(-dot(q, v), q, v);
    const double nv = norm2(v);
    if (nv < 1e-8) continue;
    for (double& x : v) x /= nv;
    cols.push_back(std::move(v));
  }
  Matrix basis(n, d);
  for (std::size_t c = 0; c < d; ++c) basis.set_col(c, cols[c]);
  return basis;
}

ObservedTrial TrialRecord::observed() const { return {target_id, h, y, eps, cursor}; }

TrialRecord run_trial(const RnnParams& params, const NoiseModel& noise, const TaskSpec& task,
                      std::size_t target_id, RandomSource& rng, const StepObserver& observer) {
  return run_trial_from(params, noise, task, target_id, RnnState::zeros(params), rng, observer);
}

TrialRecord run_trial_from(const RnnParams& params, const NoiseModel& noise, const TaskSpec& task,
                           std::size_t target_id, const RnnState& initial, RandomSource& rng,
                           const StepObserver& observer) {
  if (task.input_dim() != params.n_in() || task.output_dim() != params.n_out())
    throw ShapeError("run_trial: task dimensions do not match network");
  if (target_id >= task.n_targets()) throw std::out_of_range("run_trial: target id out of range");

  const std::size_t t_len = task.trial_len;
  const std::size_t n = params.n();
  const std::size_t ny = params.n_out();
  TrialRecord rec;
  rec.target_id = target_id;
  rec.h0 = initial.h;
  rec.x = Matrix(t_len, params.n_in());
  rec.h = Matrix(t_len, n);
  rec.u = Matrix(t_len, n);
  rec.xi = Matrix(t_len, n);
  rec.y = Matrix(t_len, ny);
  rec.y_star = Matrix(t_len, ny);
  rec.eps = Matrix(t_len, ny);
  rec.cursor = Matrix(t_len, ny);
  rec.reward.assign(t_len, 0.0);

  RnnState state = initial;
  double sq_sum = 0.0;
  for (std::size_t t = 0; t < t_len; ++t) {
    const Vector x = input_at(task, target_id, t);
    StepOutput out = step(params, state, x, noise, rng);
    const Vector y_star = target_output(task, target_id, t, out.state);

    rec.x.set_row(t, x);
    rec.h.set_row(t, out.state.h);
    rec.u.set_row(t, out.u);
    rec.xi.set_row(t, out.xi);
    rec.y.set_row(t, out.y);
    rec.y_star.set_row(t, y_star);
    rec.cursor.set_row(t, out.state.cursor);
    double e2 = 0.0;
    for (std::size_t k = 0; k < ny; ++k) {
      const double e = y_star[k] - out.y[k];
      rec.eps(t, k) = e;
      e2 += e * e;
    }
    rec.reward[t] = -e2;
    sq_sum += e2;

    if (observer) {
      observer(StepView{t, rec.u.row(t), rec.xi.row(t), rec.h_prev(t), rec.h.row(t), rec.eps.row(t), rec.reward[t]});
    }
    state = std::move(out.state);
  }
  rec.loss = sq_sum / (2.0 * static_cast<double>(t_len));
  return rec;
}

RnnParams init_params(std::size_t n_in, std::size_t n, std::size_t n_out, double g, RandomSource& rng) {
  RnnParams p;
  const double sqrt_n = std::sqrt(static_cast<double>(n));
  p.w_rec = gaussian_matrix(n, n, 0.0, g / sqrt_n, rng);
  p.w_in = uniform_matrix(n, n_in, -2.0, 2.0, rng);
  p.w_bmi = uniform_matrix(n_out, n, -2.0 / sqrt_n, 2.0 / sqrt_n, rng);
  p.w_fb = Matrix(n, n_out);
  return p;
}

}  // namespace bmilearn
