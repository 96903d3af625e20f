#pragma once

#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "bmilearn/matrix.hpp"
#include "bmilearn/random.hpp"

namespace bmilearn {

enum class Activation { tanh, linear };
enum class ReadoutMode { position, velocity };
enum class NoiseKind { isotropic, low_rank };

double activate(Activation a, double u);
/// φ′(u); for tanh computed as 1 − tanh²(u).
double activation_derivative(Activation a, double u);

/// Weights of the leaky rate network plus its time constants.
struct RnnParams {
  Matrix w_rec;  ///< N×N
  Matrix w_in;   ///< N×N_x
  Matrix w_fb;   ///< N×N_y
  Matrix w_bmi;  ///< N_y×N
  double tau = 10.0;
  Activation activation = Activation::tanh;
  ReadoutMode readout_mode = ReadoutMode::position;
  double tau_r = 10.0;

  std::size_t n() const { return w_rec.rows(); }
  std::size_t n_in() const { return w_in.cols(); }
  std::size_t n_out() const { return w_bmi.rows(); }
  void validate() const;
};

/// Recurrent noise ξ ~ N(0, Σ) plus optional input/readout channel noise.
struct NoiseModel {
  NoiseKind kind = NoiseKind::isotropic;
  double sigma2 = 0.0;  ///< per-dimension recurrent variance
  Matrix basis;         ///< N×d orthonormal columns (low_rank only)
  double sigma2_in = 0.0;
  double sigma2_bmi = 0.0;
  /// Multiplies every recurrent draw; 1/τ places the noise inside the leaky drive.
  double gain = 1.0;

  static NoiseModel isotropic(double sigma2);
  static NoiseModel low_rank(double sigma2, Matrix basis);

  /// Σ = g²σ²I or g²σ²·B Bᵀ.
  Matrix covariance(std::size_t n) const;
  void validate(std::size_t n) const;
};

struct RnnState {
  Vector h;
  Vector cursor;
  Vector y_prev;

  static RnnState zeros(const RnnParams& params);
};

struct StepOutput {
  RnnState state;
  Vector u;
  Vector xi;
  Vector y;
};

/// One update of the leaky network:
///   u = W_rec h + W_in x + W_fb y_prev
///   h ← (1 − 1/τ) h + φ(u)/τ + ξ
///   y = W_bmi h
StepOutput step(const RnnParams& params, const RnnState& state, std::span<const double> x,
                const NoiseModel& noise, RandomSource& rng);

/// Zero-mean draw with covariance Σ.
Vector sample_noise(const NoiseModel& noise, std::size_t n, RandomSource& rng);

/// Orthonormal N×d basis whose first columns span the directions of
/// `preferred` (taken as columns when it has N rows, otherwise as rows) and
/// whose remaining columns are random and orthogonal to those.
Matrix build_low_rank_basis(const Matrix& preferred, std::size_t d, std::size_t n, RandomSource& rng);

/// What an experimenter can record from a trial. Analyses consume only this.
struct ObservedTrial {
  std::size_t target_id = 0;
  Matrix h;       ///< T×N
  Matrix y;       ///< T×N_y
  Matrix eps;     ///< T×N_y
  Matrix cursor;  ///< T×N_y
};

/// Full per-trial log. Row t of each matrix holds timestep t (t = 0..T−1); the
/// state before the first step is `h0`.
struct TrialRecord {
  std::size_t target_id = 0;
  Vector h0;
  Matrix x;
  Matrix h;
  Matrix u;
  Matrix xi;
  Matrix y;
  Matrix y_star;
  Matrix eps;
  Matrix cursor;
  Vector reward;
  double loss = 0.0;

  std::size_t steps() const { return h.rows(); }
  /// h^{t−1}: `h0` at t = 0.
  std::span<const double> h_prev(std::size_t t) const { return t == 0 ? std::span<const double>(h0) : h.row(t - 1); }
  ObservedTrial observed() const;
};

struct StepView {
  std::size_t t;
  std::span<const double> u;
  std::span<const double> xi;
  std::span<const double> h_prev;
  std::span<const double> h;
  std::span<const double> eps;
  double reward;
};

using StepObserver = std::function<void(const StepView&)>;

struct TaskSpec;

/// Rolls one trial from h = 0, cursor = 0, y_prev = 0.
TrialRecord run_trial(const RnnParams& params, const NoiseModel& noise, const TaskSpec& task,
                      std::size_t target_id, RandomSource& rng, const StepObserver& observer = {});

/// Same, from an arbitrary initial state.
TrialRecord run_trial_from(const RnnParams& params, const NoiseModel& noise, const TaskSpec& task,
                           std::size_t target_id, const RnnState& initial, RandomSource& rng,
                           const StepObserver& observer = {});

/// W_rec ~ N(0, g²/N) entrywise, W_in ~ U[−2, 2], W_bmi ~ U[−2/√N, 2/√N], W_fb = 0.
RnnParams init_params(std::size_t n_in, std::size_t n, std::size_t n_out, double g, RandomSource& rng);

}  // namespace bmilearn
