#pragma once

#include <complex>
#include <cstdint>
#include <initializer_list>
#include <limits>
#include <span>
#include <string>
#include <vector>

namespace mfbose {

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

enum class Scheme { fd2, fd4 };

std::string scheme_name(Scheme scheme);
Scheme parse_scheme(const std::string& name);

struct GridSpec {
  double half_width = 6.0;  // ignored for the s = inf box, which lives on [0, 1]
  int n_points = 2048;      // interior nodes; the walls carry u = 0
  Scheme scheme = Scheme::fd4;
};

/// Eigenpairs of h = -d^2/dx^2 + |x|^s on a hard-wall grid (the unit box for s = inf).
///
/// Eigenfunctions are stored row-major, one grid function per mode, normalized so
/// that sum_i w_i u_j(x_i)^2 = 1 with the uniform quadrature weights w_i = spacing.
struct SpectralBasis {
  double s = kInfinity;
  GridSpec grid;
  std::vector<double> x;
  std::vector<double> quad_weights;
  std::vector<double> eigenvalues;
  std::vector<double> eigenfunctions;
  std::vector<double> eigenvalue_error;  // two-grid estimate, 0 when not computed
  double max_relative_residual = 0.0;

  int n_modes() const { return static_cast<int>(eigenvalues.size()); }
  int n_grid() const { return static_cast<int>(x.size()); }
  bool is_box() const { return s == kInfinity; }
  double spacing() const;
  std::span<const double> mode(int j) const;  // 0-based
  double lambda_max() const { return eigenvalues.back(); }
  /// Number of modes with eigenvalue <= cutoff.
  int count_below(double cutoff) const;
  /// Potential |x|^s at grid node i (0 inside the box).
  double potential(int i) const;
};

struct SolveOptions {
  bool two_grid_estimate = true;
};

SpectralBasis solve_spectrum(double s, const GridSpec& grid, int n_modes, const SolveOptions& options = {});

/// Weyl exponent 1/2 + 1/s of the counting function (1/2 for the box).
double weyl_exponent(double s);

struct CountingFit {
  double slope = 0.0;
  double intercept = 0.0;
  int n_points = 0;
};

/// Least-squares fit of log #{lambda_j <= Lambda} against log Lambda, evaluated at
/// Lambda = lambda_j for j in [first, last) (0-based).
CountingFit fit_counting_law(const SpectralBasis& basis, int first, int last);

struct TailSum {
  double resolved = 0.0;   // sum over resolved lambda_j > cutoff of lambda_j^-power
  double remainder = 0.0;  // Weyl extrapolation beyond lambda_K
  double total() const { return resolved + remainder; }
};

TailSum tail_sum(const SpectralBasis& basis, double cutoff, double power);

using Complex = std::complex<double>;

/// Finite set of expansion coefficients alpha_j of u = sum_j alpha_j u_j.
struct Field {
  std::vector<Complex> coeffs;

  Field() = default;
  explicit Field(std::vector<Complex> c) : coeffs(std::move(c)) {}
  Field(std::initializer_list<Complex> c) : coeffs(c) {}
  int size() const { return static_cast<int>(coeffs.size()); }
  double mass() const;
};

/// Real and imaginary parts of a synthesized grid function.
struct GridField {
  std::vector<double> re;
  std::vector<double> im;
};

/// u(x_i) = sum_j alpha_j u_j(x_i) on every grid node.
GridField synthesize(const SpectralBasis& basis, const Field& field);

/// u on the selected grid nodes (all nodes when `points` is empty).
std::vector<Complex> evaluate_field(const SpectralBasis& basis, const Field& field, std::span<const int> points = {});

/// |u(x_i)|^2 on every grid node, written to `rho` (resized).
void field_density(const SpectralBasis& basis, const Field& field, std::vector<double>& rho);

/// <u, h u> = sum_j lambda_j |alpha_j|^2.
double kinetic_form(const SpectralBasis& basis, const Field& field);

/// Versioned binary container. Throws IoError on malformed or corrupted input.
void save_basis(const SpectralBasis& basis, const std::string& path);
SpectralBasis load_basis(const std::string& path);
std::vector<std::uint8_t> serialize_basis(const SpectralBasis& basis);
SpectralBasis deserialize_basis(std::span<const std::uint8_t> bytes);

/// CSV with columns j, lambda_j (1-based j).
void export_eigenvalues_csv(const SpectralBasis& basis, const std::string& path);

}  // namespace mfbose
