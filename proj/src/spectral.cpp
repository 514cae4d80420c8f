#include "mfbose/spectral.hpp"

#include <lapacke.h>

#include <algorithm>
#include <cmath>

#include "mfbose/error.hpp"
#include "mfbose/rng.hpp"
#include "mfbose/simd/kernels.hpp"

namespace mfbose {

std::string scheme_name(Scheme scheme) { return scheme == Scheme::fd2 ? "fd2" : "fd4"; }

Scheme parse_scheme(const std::string& name) {
  if (name == "fd2" || name == "finite_difference_order2") return Scheme::fd2;
  if (name == "fd4" || name == "finite_difference_order4") return Scheme::fd4;
  throw PreconditionError("unknown discretization scheme '" + name + "'");
}

double SpectralBasis::spacing() const {
  const double n1 = static_cast<double>(grid.n_points + 1);
  return is_box() ? 1.0 / n1 : 2.0 * grid.half_width / n1;
}

std::span<const double> SpectralBasis::mode(int j) const {
  const auto n = static_cast<std::size_t>(n_grid());
  return {eigenfunctions.data() + static_cast<std::size_t>(j) * n, n};
}

int SpectralBasis::count_below(double cutoff) const {
  return static_cast<int>(std::upper_bound(eigenvalues.begin(), eigenvalues.end(), cutoff) - eigenvalues.begin());
}

double SpectralBasis::potential(int i) const { return is_box() ? 0.0 : std::pow(std::abs(x[i]), s); }

double weyl_exponent(double s) { return s == kInfinity ? 0.5 : 0.5 + 1.0 / s; }

namespace {

struct RawSolve {
  std::vector<double> x;
  std::vector<double> values;
  std::vector<double> vectors;  // column-major n x k
  std::vector<double> diag;
  double h = 0.0;
  int kd = 0;
  std::vector<double> band;  // band[(kd + i - j) + j * (kd + 1)] = A(i, j), upper storage
};

RawSolve solve_raw(double s, const GridSpec& grid, int n_modes) {
  const int n = grid.n_points;
  const bool box = s == kInfinity;
  RawSolve out;
  out.h = box ? 1.0 / (n + 1) : 2.0 * grid.half_width / (n + 1);
  out.x.resize(n);
  for (int i = 0; i < n; ++i) out.x[i] = box ? (i + 1) * out.h : -grid.half_width + (i + 1) * out.h;

  const int kd = grid.scheme == Scheme::fd2 ? 1 : 2;
  out.kd = kd;
  const int ldab = kd + 1;
  out.band.assign(static_cast<std::size_t>(ldab) * n, 0.0);
  const double h2 = out.h * out.h;
  auto at = [&](int i, int j) -> double& { return out.band[(kd + i - j) + static_cast<std::size_t>(j) * ldab]; };
  out.diag.resize(n);
  for (int i = 0; i < n; ++i) {
    const double v = box ? 0.0 : std::pow(std::abs(out.x[i]), s);
    double d;
    if (kd == 1) {
      d = 2.0 / h2;
    } else {
      // Odd reflection through the wall folds u_{-2} = -u_0 into the first and last rows.
      d = (i == 0 || i == n - 1) ? 29.0 / (12.0 * h2) : 30.0 / (12.0 * h2);
    }
    at(i, i) = d + v;
    out.diag[i] = v;
    if (kd == 1) {
      if (i + 1 < n) at(i, i + 1) = -1.0 / h2;
    } else {
      if (i + 1 < n) at(i, i + 1) = -16.0 / (12.0 * h2);
      if (i + 2 < n) at(i, i + 2) = 1.0 / (12.0 * h2);
    }
  }

  // Eigenvalues only (the Q accumulation of the banded reduction is O(n^3)),
  // then eigenvectors by shifted inverse iteration on the band.
  std::vector<double> ab = out.band;
  std::vector<double> q(1);
  out.values.assign(n, 0.0);
  std::vector<lapack_int> ifail(n);
  lapack_int found = 0;
  const double abstol = 2.0 * LAPACKE_dlamch('S');
  const lapack_int info = LAPACKE_dsbevx(LAPACK_COL_MAJOR, 'N', 'I', 'U', n, kd, ab.data(), ldab, q.data(), 1, 0.0,
                                         0.0, 1, n_modes, abstol, &found, out.values.data(), nullptr, 1, ifail.data());
  if (info < 0) throw InternalError("dsbevx rejected argument " + std::to_string(-info));
  if (info > 0 || found != n_modes) {
    throw ConvergenceError("banded eigenvalue solver failed for " + std::to_string(info) + " eigenvalues",
                           static_cast<double>(info));
  }
  out.values.resize(n_modes);
  out.vectors.assign(static_cast<std::size_t>(n) * n_modes, 0.0);

  const int ldlu = 3 * kd + 1;
  std::vector<double> lu(static_cast<std::size_t>(ldlu) * n);
  std::vector<lapack_int> ipiv(n);
  for (int j = 0; j < n_modes; ++j) {
    const double lambda = out.values[j];
    // A tiny offset keeps the factorization nonsingular; one or two solves then
    // amplify the target eigenvector by ~1e10 per step.
    const double shift = lambda * (1.0 + 1e-13) + 1e-300;
    std::fill(lu.begin(), lu.end(), 0.0);
    for (int c = 0; c < n; ++c) {
      for (int r = std::max(0, c - kd); r <= std::min(n - 1, c + kd); ++r) {
        const int lo = std::min(r, c), hi = std::max(r, c);
        double a = out.band[(kd + lo - hi) + static_cast<std::size_t>(hi) * ldab];
        if (r == c) a -= shift;
        lu[(2 * kd + r - c) + static_cast<std::size_t>(c) * ldlu] = a;
      }
    }
    lapack_int f = LAPACKE_dgbtrf(LAPACK_COL_MAJOR, n, n, kd, kd, lu.data(), ldlu, ipiv.data());
    if (f < 0) throw InternalError("dgbtrf rejected argument " + std::to_string(-f));
    double* v = out.vectors.data() + static_cast<std::size_t>(j) * n;
    Philox rng(0x5eed, static_cast<std::uint64_t>(j));
    for (int i = 0; i < n; ++i) v[i] = rng.uniform(-1.0, 1.0);
    for (int it = 0; it < 3; ++it) {
      const lapack_int st = LAPACKE_dgbtrs(LAPACK_COL_MAJOR, 'N', n, kd, kd, 1, lu.data(), ldlu, ipiv.data(), v, n);
      if (st != 0) throw InternalError("dgbtrs failed");
      double norm = 0.0;
      for (int i = 0; i < n; ++i) norm += v[i] * v[i];
      norm = std::sqrt(norm);
      if (!(norm > 0.0) || !std::isfinite(norm)) {
        throw ConvergenceError("inverse iteration broke down for mode " + std::to_string(j + 1), norm);
      }
      for (int i = 0; i < n; ++i) v[i] /= norm;
    }
  }
  return out;
}

// Residual ||A v - lambda v|| / lambda for a unit vector v (Euclidean norm).
double relative_residual(const RawSolve& raw, const double* v, double lambda) {
  const int n = static_cast<int>(raw.x.size());
  const int kd = raw.kd;
  const int ldab = kd + 1;
  double r2 = 0.0;
  for (int i = 0; i < n; ++i) {
    double av = 0.0;
    for (int j = std::max(0, i - kd); j <= std::min(n - 1, i + kd); ++j) {
      const int r = std::min(i, j);
      const int c = std::max(i, j);
      av += raw.band[(kd + r - c) + static_cast<std::size_t>(c) * ldab] * v[j];
    }
    const double d = av - lambda * v[i];
    r2 += d * d;
  }
  return std::sqrt(r2) / lambda;
}

}  // namespace

SpectralBasis solve_spectrum(double s, const GridSpec& grid, int n_modes, const SolveOptions& options) {
  detail::require(s == kInfinity || s >= 2.0, "s exponent must be at least 2 (or infinite)");
  detail::require(grid.n_points >= 64, "grid needs at least 64 points");
  detail::require(s == kInfinity || grid.half_width > 0.0, "domain half width must be positive");
  detail::require(n_modes >= 1, "need at least one mode");
  detail::require(n_modes <= grid.n_points / 4, "n_modes exceeds n_points/4; refine the grid");

  RawSolve raw = solve_raw(s, grid, n_modes);
  const int n = grid.n_points;
  const auto& k = simd::kernels();

  SpectralBasis basis;
  basis.s = s;
  basis.grid = grid;
  basis.x = raw.x;
  basis.quad_weights.assign(n, raw.h);
  basis.eigenvalues = raw.values;

  // Modified Gram-Schmidt in the Euclidean inner product, then rescale to the
  // quadrature norm. LAPACK already returns orthonormal vectors; this only
  // guards against near-ties.
  for (int j = 0; j < n_modes; ++j) {
    double* v = raw.vectors.data() + static_cast<std::size_t>(j) * n;
    for (int i = 0; i < j; ++i) {
      const double* w = raw.vectors.data() + static_cast<std::size_t>(i) * n;
      k.axpy(-k.dot(w, v, n), w, v, n);
    }
    const double norm = std::sqrt(k.dot(v, v, n));
    for (int i = 0; i < n; ++i) v[i] /= norm;
    basis.max_relative_residual = std::max(basis.max_relative_residual, relative_residual(raw, v, raw.values[j]));
  }

  basis.eigenfunctions.resize(static_cast<std::size_t>(n) * n_modes);
  const double scale = 1.0 / std::sqrt(raw.h);
  for (int j = 0; j < n_modes; ++j) {
    const double* v = raw.vectors.data() + static_cast<std::size_t>(j) * n;
    double vmax = 0.0;
    for (int i = 0; i < n; ++i) vmax = std::max(vmax, std::abs(v[i]));
    double sign = 1.0;
    for (int i = 0; i < n; ++i) {
      if (std::abs(v[i]) > 1e-3 * vmax) {
        sign = v[i] > 0 ? 1.0 : -1.0;
        break;
      }
    }
    double* u = basis.eigenfunctions.data() + static_cast<std::size_t>(j) * n;
    for (int i = 0; i < n; ++i) u[i] = sign * scale * v[i];
  }

  basis.eigenvalue_error.assign(n_modes, 0.0);
  const GridSpec coarse{grid.half_width, (n - 1) / 2, grid.scheme};
  if (options.two_grid_estimate && coarse.n_points >= 64 && n_modes <= coarse.n_points / 2) {
    // Coarse grid with h_c = 2 h; Richardson factor 2^p - 1 for scheme order p.
    const RawSolve c = solve_raw(s, coarse, n_modes);
    const double factor = grid.scheme == Scheme::fd2 ? 3.0 : 15.0;
    for (int j = 0; j < n_modes; ++j) basis.eigenvalue_error[j] = std::abs(raw.values[j] - c.values[j]) / factor;
  }
  return basis;
}

CountingFit fit_counting_law(const SpectralBasis& basis, int first, int last) {
  detail::require(0 <= first && first < last && last <= basis.n_modes() && last - first >= 2,
                  "counting-law window must hold at least two resolved modes");
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const int m = last - first;
  for (int j = first; j < last; ++j) {
    const double lx = std::log(basis.eigenvalues[j]);
    const double ly = std::log(static_cast<double>(basis.count_below(basis.eigenvalues[j])));
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  CountingFit fit;
  fit.n_points = m;
  fit.slope = (m * sxy - sx * sy) / (m * sxx - sx * sx);
  fit.intercept = (sy - fit.slope * sx) / m;
  return fit;
}

TailSum tail_sum(const SpectralBasis& basis, double cutoff, double power) {
  detail::require(power >= 1.0, "tail power must be at least 1");
  const double lk = basis.lambda_max();
  detail::require(cutoff <= lk, "cutoff lies above the resolved spectrum");
  const double gamma = weyl_exponent(basis.s);
  detail::require(power > gamma, "tail power must exceed the Weyl exponent");
  TailSum out;
  for (int j = basis.count_below(cutoff); j < basis.n_modes(); ++j) out.resolved += std::pow(basis.eigenvalues[j], -power);
  // N(lambda) ~ c lambda^gamma with c matched at lambda_K:
  // int_{lambda_K}^inf lambda^-p dN = K gamma lambda_K^-p / (p - gamma).
  out.remainder = basis.n_modes() * gamma * std::pow(lk, -power) / (power - gamma);
  return out;
}

double Field::mass() const {
  double m = 0.0;
  for (const auto& a : coeffs) m += std::norm(a);
  return m;
}

GridField synthesize(const SpectralBasis& basis, const Field& field) {
  detail::require(field.size() <= basis.n_modes(), "field has more coefficients than the basis has modes");
  const auto n = static_cast<std::size_t>(basis.n_grid());
  GridField g{std::vector<double>(n, 0.0), std::vector<double>(n, 0.0)};
  const auto& k = simd::kernels();
  for (int j = 0; j < field.size(); ++j) {
    const Complex a = field.coeffs[j];
    if (a == Complex{}) continue;
    k.complex_axpy(a.real(), a.imag(), basis.mode(j).data(), g.re.data(), g.im.data(), n);
  }
  return g;
}

std::vector<Complex> evaluate_field(const SpectralBasis& basis, const Field& field, std::span<const int> points) {
  const GridField g = synthesize(basis, field);
  std::vector<Complex> out;
  if (points.empty()) {
    out.resize(g.re.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = {g.re[i], g.im[i]};
    return out;
  }
  out.reserve(points.size());
  for (int p : points) {
    detail::require(p >= 0 && p < basis.n_grid(), "grid point index out of range");
    out.emplace_back(g.re[p], g.im[p]);
  }
  return out;
}

void field_density(const SpectralBasis& basis, const Field& field, std::vector<double>& rho) {
  const GridField g = synthesize(basis, field);
  rho.resize(g.re.size());
  simd::kernels().abs2(g.re.data(), g.im.data(), rho.data(), rho.size());
}

double kinetic_form(const SpectralBasis& basis, const Field& field) {
  detail::require(field.size() <= basis.n_modes(), "field has more coefficients than the basis has modes");
  double e = 0.0;
  for (int j = 0; j < field.size(); ++j) e += basis.eigenvalues[j] * std::norm(field.coeffs[j]);
  return e;
}

}  // namespace mfbose
