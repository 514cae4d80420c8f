#pragma once

#include <complex>
#include <span>
#include <vector>

#include "mfbose/spectral.hpp"

namespace mfbose {

enum class DensityKind { low_modes_g, high_modes_f, all_modes_f0, leave_one_out_F, custom };

const char* density_kind_name(DensityKind kind);

/// Uniform grid 0 = eta_0 < ... < eta_{points-1} = eta_max.
struct EtaGrid {
  double eta_max = 4.0;
  int points = 4001;
  double step() const { return eta_max / (points - 1); }
};

/// Tabulated density of sum_j |alpha_j|^2 over a rate set, where each
/// |alpha_j|^2 is exponential with rate lambda_j.
struct MassDensity {
  EtaGrid grid;
  std::vector<double> values;
  std::vector<double> rates;
  DensityKind kind = DensityKind::custom;
  double tail_cutoff = 0.0;     // largest rate included
  double clipped_mass = 0.0;    // negative ringing removed by clipping
  double truncated_mass = 0.0;  // mass beyond eta_max (convolution support loss)

  double step() const { return grid.step(); }
  double eta(int i) const { return i * grid.step(); }
  /// Trapezoid integral over the grid.
  double integral() const;
  double mean() const;
  /// Linear interpolation; 0 outside the grid.
  double at(double eta) const;
  /// Trapezoid mass on [delta, eta_max] (linear interpolation at delta).
  double mass_above(double delta) const;
  double sup() const;
};

/// prod_j 1 / (1 - i s / lambda_j), computed in the log domain.
std::vector<std::complex<double>> char_function(std::span<const double> rates, std::span<const double> s_grid);

/// Parameters of the uniform s-grid used for Fourier inversion.
struct InversionParams {
  double s_max = 0.0;
  int n_s = 0;
};

/// s_max where |phi| < 0.5e-8 and the truncated part of the inversion integral is
/// bounded by `err_tol` (pointwise), and the count n_s such that the s-step does
/// not alias the density tail onto [0, eta_max].
InversionParams choose_inversion(std::span<const double> rates, const EtaGrid& grid, double err_tol = 1e-7);

/// f(x) = (1/pi) Re int_0^s_max e^{-isx} phi(s) ds by the trapezoid rule.
MassDensity density_from_cf(std::span<const double> rates, const EtaGrid& grid, double s_max, int n_s);
MassDensity density_from_cf(std::span<const double> rates, const EtaGrid& grid);

/// Pointwise hypoexponential density sum_j (prod_{k!=j} l_k/(l_k - l_j)) l_j e^{-l_j x}.
double hypoexponential_pdf(std::span<const double> rates, double x);
MassDensity density_closed_form(std::span<const double> rates, const EtaGrid& grid);

/// Same density for rates that may repeat, in phase-type form: lambda_d [exp(Q x)]_{1,d}
/// with Q the bidiagonal generator -lambda_i on the diagonal, lambda_i above it.
double phase_type_pdf(std::span<const double> rates, double x);

/// E[X_j | S = m] and E[X_j X_k | S = m] for independent X_i ~ Exp(rate_i), S = sum X_i
/// (0-based j, k). Uses x^a e^{-l x} = a! / l^(a+1) Gamma(a+1, l) to express each
/// moment as a ratio of phase-type densities with repeated rates.
double conditional_mean(std::span<const double> rates, double m, int j);
double conditional_second_moment(std::span<const double> rates, double m, int j, int k);
/// E[X_j] under the law of (X_i) tilted by exp(-(S - m)^2 / eps), by composite
/// Gauss-Legendre quadrature over S of the same phase-type densities.
double penalized_mean(std::span<const double> rates, double m, double eps, int j);

/// Trapezoid-rule density with all mass at eta = eta(index).
MassDensity numerical_delta(const EtaGrid& grid, int index = 0);

/// (a * b)(x) = int_0^x a(y) b(x - y) dy by the trapezoid rule.
MassDensity convolve(const MassDensity& a, const MassDensity& b);

/// z = int_0^inf exp(-(eta - m)^2 / eps) f0(eta) d eta.
double penalized_partition(const MassDensity& f0, double m, double eps);

/// log P(sum_j X_j > delta) for independent X_j ~ Exp(rate_j).
///
/// Uses the closed form when it is well conditioned and otherwise a Fourier
/// inversion of the exponentially tilted law (rates lambda_j - theta), so the
/// result keeps its relative accuracy deep in the tail where a tabulated density
/// only resolves the inversion noise floor.
double log_tail_probability(std::span<const double> rates, double delta);

/// Rates lambda_j with lambda_j <= split (low) or > split (high).
std::vector<double> rates_up_to(const SpectralBasis& basis, double split, int max_modes = -1);
std::vector<double> rates_above(const SpectralBasis& basis, double split, int max_modes = -1);

/// Mass densities built from a basis truncated to its first `n_modes` modes
/// (all when negative):
///   low_modes_g     g_Lambda, modes with lambda <= split
///   high_modes_f    f_Lambda, modes with lambda > split
///   all_modes_f0    f_0, every mode
///   leave_one_out_F F_j, every mode except `leave_out` (0-based)
/// Inversion parameters are chosen automatically; one rate uses the closed form
/// and an empty rate set gives the numerical delta at 0.
MassDensity mass_density(const SpectralBasis& basis, DensityKind kind, const EtaGrid& grid, double split = 0.0,
                         int leave_out = -1, int n_modes = -1);

MassDensity density_for_rates(std::span<const double> rates, const EtaGrid& grid, DensityKind kind);

}  // namespace mfbose
