#pragma once

#include <span>
#include <string>
#include <vector>

#include "bmilearn/matrix.hpp"
#include "bmilearn/rnn.hpp"

namespace bmilearn {

enum class Stars { ns, one, two, three };

std::string to_string(Stars s);
Stars stars_for(double p);

struct TTestResult {
  double t = 0.0;
  double df = 0.0;
  double p = 1.0;
  Stars stars = Stars::ns;
};

/// Regularised incomplete beta I_x(a, b) via Lentz's continued fraction.
double incomplete_beta(double a, double b, double x);

/// Two-sided p-value of a Student t statistic with `df` degrees of freedom.
double student_t_two_sided_p(double t, double df);

/// Welch's unequal-variance t-test (two-sided).
TTestResult two_sample_t(std::span<const double> a, std::span<const double> b);

double mean(std::span<const double> x);
/// Sample standard deviation (n − 1 denominator).
double sample_std(std::span<const double> x);
double sem(std::span<const double> x);

/// Sample covariance of pooled activity (N×N).
Matrix activity_covariance(std::span<const ObservedTrial> trials);

/// Pearson r between the flattened activity covariances of two trial sets.
double covariance_overlap(std::span<const ObservedTrial> a, std::span<const ObservedTrial> b);

enum class UpdateCorrelationMode { per_trial, cumulative_mean };

/// Pearson r of each observed update (or of the running mean of updates)
/// against a fixed predicted update.
std::vector<double> weight_update_correlation(std::span<const Matrix> dw_obs, const Matrix& dw_pred,
                                              UpdateCorrelationMode mode);

/// Top-k explained-variance fractions of the flattened updates.
std::vector<double> pca_spread(std::span<const Matrix> dw_obs, std::size_t k);

}  // namespace bmilearn
