#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>

#include "mfbose/error.hpp"
#include "mfbose/massdist.hpp"
#include "mfbose/rng.hpp"
#include "mfbose/stats.hpp"

using namespace mfbose;

namespace {

const double kPi2 = std::numbers::pi * std::numbers::pi;

std::vector<double> box_rates(int lo, int hi) {
  std::vector<double> r;
  for (int j = lo; j <= hi; ++j) r.push_back(j * j * kPi2);
  return r;
}

const SpectralBasis& box40() {
  static const SpectralBasis b = solve_spectrum(kInfinity, {1.0, 1024, Scheme::fd4}, 40);
  return b;
}

// Composite Gauss-Legendre integral of the closed-form pdf on [0, x_max].
double integrate_pdf(const std::vector<double>& rates, double x_max) {
  std::vector<double> x, w;
  double total = 0.0;
  const int panels = 400;
  for (int p = 0; p < panels; ++p) {
    gauss_legendre(20, x_max * p / panels, x_max * (p + 1) / panels, x, w);
    for (std::size_t i = 0; i < x.size(); ++i) total += w[i] * hypoexponential_pdf(rates, x[i]);
  }
  return total;
}

}  // namespace

TEST(CharFunction, SingleRate) {
  const std::vector<double> r{3.0};
  const std::vector<double> s{0.0, 0.5, 2.0, 30.0};
  const auto phi = char_function(r, s);
  EXPECT_EQ(phi[0], std::complex<double>(1.0, 0.0));
  for (std::size_t i = 0; i < s.size(); ++i) {
    EXPECT_NEAR(std::norm(phi[i]), 1.0 / (1.0 + s[i] * s[i] / 9.0), 1e-14);
    const auto exact = 1.0 / std::complex<double>(1.0, -s[i] / 3.0);
    EXPECT_NEAR(std::abs(phi[i] - exact), 0.0, 1e-14);
  }
}

TEST(CharFunction, TwoRatesMatchMonteCarlo) {
  const std::vector<double> r{1.5, 4.0};
  const std::vector<double> s{0.3, 1.0, 2.5, 6.0};
  const auto phi = char_function(r, s);
  Philox rng(3, 0);
  const int n = 200000;
  std::vector<std::complex<double>> mc(s.size());
  for (int i = 0; i < n; ++i) {
    const double x = -std::log(rng.uniform()) / r[0] - std::log(rng.uniform()) / r[1];
    for (std::size_t k = 0; k < s.size(); ++k) mc[k] += std::polar(1.0, s[k] * x);
  }
  for (std::size_t k = 0; k < s.size(); ++k) {
    mc[k] /= n;
    EXPECT_NEAR(mc[k].real(), phi[k].real(), 4.0 / std::sqrt(2.0 * n));
    EXPECT_NEAR(mc[k].imag(), phi[k].imag(), 4.0 / std::sqrt(2.0 * n));
    EXPECT_LE(std::abs(phi[k]), 1.0);
  }
}

TEST(ClosedForm, ExponentialAndPair) {
  const EtaGrid g{10.0, 1001};
  const auto e = density_closed_form(std::vector<double>{2.5}, g);
  for (int i = 0; i < g.points; ++i) EXPECT_NEAR(e.values[i], 2.5 * std::exp(-2.5 * e.eta(i)), 1e-14);

  const auto p = density_closed_form(std::vector<double>{1.0, 2.0}, g);
  for (int i = 0; i < g.points; ++i) {
    const double x = p.eta(i);
    EXPECT_NEAR(p.values[i], 2.0 * (std::exp(-x) - std::exp(-2.0 * x)), 1e-14);
  }
  // numerical convolution of the two exponentials agrees to trapezoid order
  const EtaGrid fine{20.0, 20001};
  const auto c = convolve(density_closed_form(std::vector<double>{1.0}, fine),
                          density_closed_form(std::vector<double>{2.0}, fine));
  for (int i = 0; i < fine.points; i += 50) {
    const double x = c.eta(i);
    EXPECT_NEAR(c.values[i], 2.0 * (std::exp(-x) - std::exp(-2.0 * x)), 5e-6);
  }
}

TEST(ClosedForm, NormalizedAndNonnegative) {
  Philox rng(5, 1);
  for (int t = 0; t < 20; ++t) {
    const int k = 1 + static_cast<int>(rng.below(6));
    std::vector<double> r;
    for (int j = 0; j < k; ++j) r.push_back(0.5 + 10.0 * rng.uniform());
    const double rmin = *std::min_element(r.begin(), r.end());
    EXPECT_NEAR(integrate_pdf(r, 80.0 / rmin), 1.0, 1e-10);
    for (double x = 0.0; x < 10.0; x += 0.01) EXPECT_GE(hypoexponential_pdf(r, x), 0.0);
  }
  EXPECT_THROW(density_closed_form(std::vector<double>{1.0, 1.0 + 1e-9}, EtaGrid{}), PreconditionError);
  EXPECT_THROW(density_closed_form(box_rates(1, 21), EtaGrid{}), PreconditionError);
}

TEST(Inversion, MatchesClosedFormOnDistinctRateSets) {
  const EtaGrid g{6.0, 1201};
  for (double lam : {1.0, 3.0, 10.0}) {
    const std::vector<double> r{lam, 2 * lam};
    const EtaGrid gl{30.0 / lam, 1201};
    const auto a = density_from_cf(r, gl);
    const auto b = density_closed_form(r, gl);
    double err = 0.0;
    for (int i = 0; i < gl.points; ++i) err = std::max(err, std::abs(a.values[i] - b.values[i]));
    EXPECT_LT(err, 1e-4) << lam;
  }
  Philox rng(9, 0);
  for (int t = 0; t < 16; ++t) {
    const int k = 2 + static_cast<int>(rng.below(5));
    std::vector<double> r;
    for (int j = 0; j < k; ++j) r.push_back(2.0 + 20.0 * rng.uniform());
    const auto a = density_from_cf(r, g);
    const auto b = density_closed_form(r, g);
    double err = 0.0;
    for (int i = 0; i < g.points; ++i) err = std::max(err, std::abs(a.values[i] - b.values[i]));
    EXPECT_LT(err, 1e-4) << t;
    EXPECT_NEAR(a.integral(), 1.0, 1e-3);
    double mean = 0.0;
    for (double x : r) mean += 1.0 / x;
    EXPECT_NEAR(a.mean(), mean, 1e-3);
    EXPECT_LE(a.clipped_mass, 1e-3);
  }
}

TEST(Inversion, Preconditions) {
  const EtaGrid g{6.0, 601};
  const std::vector<double> r{1.0, 2.0};
  EXPECT_THROW(density_from_cf(std::vector<double>{1.0}, g), PreconditionError);
  EXPECT_THROW(density_from_cf(r, g, 100.0, 1000), PreconditionError);  // |phi(100)| ~ 2e-4
  const auto p = choose_inversion(r, g);
  EXPECT_THROW(density_from_cf(r, g, p.s_max, p.n_s / 50), PreconditionError);  // aliasing
  EXPECT_NO_THROW(density_from_cf(r, EtaGrid{40.0, 1001}, p.s_max, p.n_s * 2));
  // grid too short to hold the mass
  EXPECT_THROW(density_from_cf(r, EtaGrid{1.0, 1001}), DiagnosticError);
}

TEST(Convolution, DeltaIdentityAndGridCheck) {
  const EtaGrid g{5.0, 501};
  const auto b = density_closed_form(std::vector<double>{1.0, 3.0}, g);
  const auto c = convolve(numerical_delta(g, 0), b);
  for (int i = 1; i < g.points; ++i) EXPECT_NEAR(c.values[i], b.values[i], 1e-14);
  EXPECT_THROW(convolve(b, numerical_delta(EtaGrid{5.0, 502}, 0)), PreconditionError);
}

TEST(MassDensities, BoxConvolutionIdentityAndMeans) {
  const auto& basis = box40();
  const EtaGrid g{3.0, 6001};
  const auto f0 = mass_density(basis, DensityKind::all_modes_f0, g);
  double mean = 0.0;
  for (double l : basis.eigenvalues) mean += 1.0 / l;
  EXPECT_NEAR(f0.mean(), mean, 1e-3);
  for (int split : {1, 3, 7}) {
    const double cut = basis.eigenvalues[split - 1];
    const auto gl = mass_density(basis, DensityKind::low_modes_g, g, cut);
    const auto fl = mass_density(basis, DensityKind::high_modes_f, g, cut);
    const auto c = convolve(gl, fl);
    double l1 = 0.0;
    for (int i = 0; i < g.points; ++i) l1 += std::abs(c.values[i] - f0.values[i]) * g.step();
    EXPECT_LE(l1, 1e-2) << split;
  }
  // F_j: leaving out mode j removes 1/lambda_j from the mean
  const auto f2 = mass_density(basis, DensityKind::leave_one_out_F, g, 0.0, 1);
  EXPECT_NEAR(f2.mean(), mean - 1.0 / basis.eigenvalues[1], 1e-3);
  // f_0 > 0 in the interior of its support
  for (double m : {0.05, 0.2, 0.5, 1.0, 1.5}) EXPECT_GT(f0.at(m), 0.0) << m;
}

TEST(MassDensities, GLambdaApproachesF0) {
  const auto& basis = box40();
  const EtaGrid g{3.0, 3001};
  const auto f0 = mass_density(basis, DensityKind::all_modes_f0, g);
  double prev = 1e300;
  for (int split : {2, 4, 8, 16, 32}) {
    const auto gl = mass_density(basis, DensityKind::low_modes_g, g, basis.eigenvalues[split - 1]);
    double sup = 0.0;
    for (int i = 0; i < g.points; ++i) sup = std::max(sup, std::abs(gl.values[i] - f0.values[i]));
    EXPECT_LT(sup, prev) << split;
    prev = sup;
  }
}

TEST(MassDensities, HighModeSupGrowsAtMostLinearly) {
  const auto& basis = box40();
  const EtaGrid g{3.0, 6001};
  std::vector<double> lx, ly;
  for (int split = 1; split <= 10; ++split) {
    const double cut = basis.eigenvalues[split - 1];
    const auto fl = mass_density(basis, DensityKind::high_modes_f, g, cut);
    lx.push_back(std::log(cut));
    ly.push_back(std::log(fl.sup()));
  }
  EXPECT_LE(fit_line(lx, ly).slope, 1.0);
}

TEST(TailProbability, MatchesHighPrecisionOracles) {
  // Oracle values from an 80-digit evaluation of the hypoexponential closed form.
  EXPECT_NEAR(log_tail_probability(box_rates(4, 40), 0.05), -4.10428447999671, 1e-8);
  EXPECT_NEAR(log_tail_probability(box_rates(11, 40), 0.05), -49.270025457229, 1e-7);
  EXPECT_NEAR(log_tail_probability(box_rates(1, 40), 1.0), -9.20114983311991, 1e-8);
  const std::vector<double> r{1.0, 2.0};
  for (double d : {0.5, 5.0, 30.0}) {
    EXPECT_NEAR(log_tail_probability(r, d), std::log(2 * std::exp(-d) - std::exp(-2 * d)), 1e-12);
  }
  EXPECT_EQ(log_tail_probability(r, 0.0), 0.0);
}

TEST(TailProbability, AgreesWithTabulatedMassAbove) {
  const auto rates = box_rates(3, 40);
  const auto f = density_from_cf(rates, EtaGrid{3.0, 12001});
  // the tabulated route carries the trapezoid error of a peaked density (~1e-5 here)
  for (double d : {0.02, 0.05, 0.1}) {
    EXPECT_NEAR(std::exp(log_tail_probability(rates, d)), f.mass_above(d), 5e-5) << d;
  }
}

TEST(PenalizedPartition, SaturationDeltaAndResolution) {
  const auto& basis = box40();
  const EtaGrid g{3.0, 6001};
  const auto f0 = mass_density(basis, DensityKind::all_modes_f0, g);
  double prev = 0.0;
  for (double eps : {0.01, 0.1, 1.0, 10.0, 100.0, 1e4}) {
    const double z = penalized_partition(f0, 0.5, eps);
    EXPECT_GT(z, prev);
    EXPECT_LE(z, f0.integral() + 1e-12);
    prev = z;
  }
  EXPECT_NEAR(prev, 1.0, 1e-3);

  const auto delta = numerical_delta(g, 1000);
  EXPECT_NEAR(penalized_partition(delta, delta.eta(1000), 1e-3), 1.0, 1e-12);

  EXPECT_THROW(penalized_partition(f0, 0.5, 1e-6), PreconditionError);
  EXPECT_THROW(penalized_partition(f0, 4.0, 1e-2), PreconditionError);
}
