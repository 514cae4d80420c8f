#pragma once

#include <span>
#include <vector>

namespace mfbose {

/// A Monte Carlo or numerical estimate with its one-sigma uncertainty.
struct Estimate {
  double value = 0.0;
  double stderr_ = 0.0;
};

double logsumexp(std::span<const double> x);
double logaddexp(double a, double b);

/// Diagnostics of a set of importance log-weights.
struct WeightSummary {
  double ess = 0.0;           // (sum w)^2 / sum w^2
  double max_fraction = 0.0;  // largest single normalized weight
  double log_sum = 0.0;       // log sum w
  int n_positive = 0;
};

WeightSummary summarize_log_weights(std::span<const double> log_weights);

/// exp(lw - max) / sum, so the result sums to one. All -inf yields all zeros.
std::vector<double> normalized_weights(std::span<const double> log_weights);

/// Self-normalized weighted mean with a batch-means standard error.
///
/// `weights` need not be normalized. The error uses the linearized ratio
/// residuals r_b = sum_{i in b} w_i (x_i - mean) over `n_batches` contiguous
/// batches, which stays defined when a batch carries no weight.
Estimate weighted_mean(std::span<const double> values, std::span<const double> weights, int n_batches = 20);

/// Unweighted mean with a batch-means standard error (correlated chains).
Estimate batch_mean(std::span<const double> values, int n_batches = 20);

/// Upper 95% bound 3/n for an event never observed in n trials.
double rule_of_three(long n);

/// Gauss-Legendre nodes and weights on [a, b], ascending. n in {5, 8, 10, 16, 20, 32}.
void gauss_legendre(int n, double a, double b, std::vector<double>& nodes, std::vector<double>& weights);

/// Ordinary least squares y = a + b x; returns {a, b}.
struct LinearFit {
  double intercept = 0.0;
  double slope = 0.0;
};
LinearFit fit_line(std::span<const double> x, std::span<const double> y);

}  // namespace mfbose
