#include "mfbose/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <boost/math/quadrature/gauss.hpp>

#include "mfbose/error.hpp"

namespace mfbose {

double logsumexp(std::span<const double> x) {
  double hi = -std::numeric_limits<double>::infinity();
  for (double v : x) hi = std::max(hi, v);
  if (!std::isfinite(hi)) return hi;
  double s = 0.0;
  for (double v : x) s += std::exp(v - hi);
  return hi + std::log(s);
}

double logaddexp(double a, double b) {
  if (a == -std::numeric_limits<double>::infinity()) return b;
  if (b == -std::numeric_limits<double>::infinity()) return a;
  const double hi = std::max(a, b);
  return hi + std::log1p(std::exp(-std::abs(a - b)));
}

WeightSummary summarize_log_weights(std::span<const double> log_weights) {
  WeightSummary out;
  out.log_sum = logsumexp(log_weights);
  if (!std::isfinite(out.log_sum)) return out;
  double s2 = 0.0;
  for (double lw : log_weights) {
    if (lw == -std::numeric_limits<double>::infinity()) continue;
    const double w = std::exp(lw - out.log_sum);
    s2 += w * w;
    out.max_fraction = std::max(out.max_fraction, w);
    ++out.n_positive;
  }
  out.ess = 1.0 / s2;
  return out;
}

std::vector<double> normalized_weights(std::span<const double> log_weights) {
  const double ls = logsumexp(log_weights);
  std::vector<double> w(log_weights.size(), 0.0);
  if (!std::isfinite(ls)) return w;
  for (std::size_t i = 0; i < w.size(); ++i) w[i] = std::exp(log_weights[i] - ls);
  return w;
}

Estimate weighted_mean(std::span<const double> values, std::span<const double> weights, int n_batches) {
  detail::require(values.size() == weights.size(), "values and weights differ in length");
  detail::require(!values.empty(), "weighted mean of an empty sample");
  double sw = 0.0, swx = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    sw += weights[i];
    swx += weights[i] * values[i];
  }
  detail::require(sw > 0.0, "all weights vanish");
  Estimate e;
  e.value = swx / sw;
  const auto n = values.size();
  const int b = static_cast<int>(std::min<std::size_t>(static_cast<std::size_t>(std::max(n_batches, 2)), n));
  if (b < 2) return e;
  double ss = 0.0;
  for (int k = 0; k < b; ++k) {
    const std::size_t lo = n * k / b, hi = n * (k + 1) / b;
    double r = 0.0;
    for (std::size_t i = lo; i < hi; ++i) r += weights[i] * (values[i] - e.value);
    ss += r * r;
  }
  e.stderr_ = std::sqrt(ss * b / (b - 1.0)) / sw;
  return e;
}

Estimate batch_mean(std::span<const double> values, int n_batches) {
  std::vector<double> ones(values.size(), 1.0);
  return weighted_mean(values, ones, n_batches);
}

double rule_of_three(long n) { return 3.0 / static_cast<double>(std::max(n, 1L)); }

namespace {

template <unsigned N>
void gauss_table(double a, double b, std::vector<double>& nodes, std::vector<double>& weights) {
  using rule = boost::math::quadrature::gauss<double, N>;
  const auto& x = rule::abscissa();
  const auto& w = rule::weights();
  const double half = 0.5 * (b - a), mid = 0.5 * (a + b);
  nodes.clear();
  weights.clear();
  // Boost stores the nonnegative half of the symmetric rule.
  for (std::size_t i = x.size(); i-- > 0;) {
    if (x[i] == 0.0) continue;
    nodes.push_back(mid - half * x[i]);
    weights.push_back(half * w[i]);
  }
  for (std::size_t i = 0; i < x.size(); ++i) {
    nodes.push_back(mid + half * x[i]);
    weights.push_back(half * w[i]);
  }
}

}  // namespace

void gauss_legendre(int n, double a, double b, std::vector<double>& nodes, std::vector<double>& weights) {
  switch (n) {
    case 5: return gauss_table<5>(a, b, nodes, weights);
    case 8: return gauss_table<8>(a, b, nodes, weights);
    case 10: return gauss_table<10>(a, b, nodes, weights);
    case 16: return gauss_table<16>(a, b, nodes, weights);
    case 20: return gauss_table<20>(a, b, nodes, weights);
    case 32: return gauss_table<32>(a, b, nodes, weights);
    default: throw PreconditionError("Gauss-Legendre order must be one of 5, 8, 10, 16, 20, 32");
  }
}

LinearFit fit_line(std::span<const double> x, std::span<const double> y) {
  detail::require(x.size() == y.size() && x.size() >= 2, "line fit needs two or more points");
  const double n = static_cast<double>(x.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) mx += x[i], my += y[i];
  mx /= n;
  my /= n;
  double sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  LinearFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  return f;
}

}  // namespace mfbose
