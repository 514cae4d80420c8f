#include "mfbose/massdist.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

#include "mfbose/error.hpp"
#include "mfbose/simd/kernels.hpp"
#include "mfbose/stats.hpp"

namespace mfbose {

const char* density_kind_name(DensityKind kind) {
  switch (kind) {
    case DensityKind::low_modes_g:
      return "low_modes_g";
    case DensityKind::high_modes_f:
      return "high_modes_f";
    case DensityKind::all_modes_f0:
      return "all_modes_f0";
    case DensityKind::leave_one_out_F:
      return "leave_one_out_F";
    case DensityKind::custom:
      return "custom";
  }
  return "custom";
}

double MassDensity::integral() const {
  const int n = static_cast<int>(values.size());
  if (n < 2) return 0.0;
  double s = 0.5 * (values.front() + values.back());
  for (int i = 1; i + 1 < n; ++i) s += values[i];
  return s * step();
}

double MassDensity::mean() const {
  const int n = static_cast<int>(values.size());
  if (n < 2) return 0.0;
  double s = 0.5 * eta(n - 1) * values.back();
  for (int i = 1; i + 1 < n; ++i) s += eta(i) * values[i];
  return s * step();
}

double MassDensity::at(double x) const {
  const double h = step();
  if (x < 0.0 || x > grid.eta_max) return 0.0;
  const double u = x / h;
  const int i = std::min(static_cast<int>(u), grid.points - 2);
  const double t = u - i;
  return (1.0 - t) * values[i] + t * values[i + 1];
}

double MassDensity::mass_above(double delta) const {
  if (delta <= 0.0) return integral();
  if (delta >= grid.eta_max) return 0.0;
  const double h = step();
  const int i0 = static_cast<int>(delta / h) + 1;
  const double fd = at(delta);
  // partial cell [delta, eta(i0)] then full cells
  double s = 0.5 * (fd + values[i0]) * (eta(i0) - delta);
  for (int i = i0; i + 1 < grid.points; ++i) s += 0.5 * h * (values[i] + values[i + 1]);
  return s;
}

double MassDensity::sup() const { return values.empty() ? 0.0 : *std::max_element(values.begin(), values.end()); }

namespace {

void check_rates(std::span<const double> rates) {
  detail::require(!rates.empty(), "rate set is empty");
  for (double r : rates) detail::require(std::isfinite(r) && r > 0.0, "rates must be finite and positive");
}

void check_grid(const EtaGrid& g) {
  detail::require(g.points >= 2 && g.eta_max > 0.0, "eta grid needs eta_max > 0 and at least two points");
}

double log_abs_cf(std::span<const double> rates, double s) {
  double l = 0.0;
  for (double r : rates) l -= 0.5 * std::log1p((s / r) * (s / r));
  return l;
}

// Distance beyond which the density is below ~1e-15 of its peak.
double tail_extent(std::span<const double> rates) {
  double mean = 0.0, var = 0.0, rmin = rates[0];
  for (double r : rates) {
    mean += 1.0 / r;
    var += 1.0 / (r * r);
    rmin = std::min(rmin, r);
  }
  return mean + 6.0 * std::sqrt(var) + 36.0 / rmin;
}

double required_period(std::span<const double> rates, const EtaGrid& grid) {
  return std::max(1.0001 * grid.eta_max, tail_extent(rates));
}

MassDensity make_density(std::span<const double> rates, const EtaGrid& grid, DensityKind kind) {
  MassDensity d;
  d.grid = grid;
  d.rates.assign(rates.begin(), rates.end());
  d.kind = kind;
  d.tail_cutoff = rates.empty() ? 0.0 : *std::max_element(rates.begin(), rates.end());
  d.values.assign(grid.points, 0.0);
  return d;
}

double clip_negative(MassDensity& d) {
  double clipped = 0.0;
  const double h = d.step();
  for (int i = 0; i < d.grid.points; ++i) {
    if (d.values[i] < 0.0) {
      const double w = (i == 0 || i == d.grid.points - 1) ? 0.5 * h : h;
      clipped -= w * d.values[i];
      d.values[i] = 0.0;
    }
  }
  return clipped;
}

}  // namespace

std::vector<std::complex<double>> char_function(std::span<const double> rates, std::span<const double> s_grid) {
  check_rates(rates);
  std::vector<std::complex<double>> out;
  out.reserve(s_grid.size());
  for (double s : s_grid) {
    // log(1 - i t) = log(1 + t^2)/2 - i atan(t)
    double re = 0.0, im = 0.0;
    for (double r : rates) {
      const double t = s / r;
      re -= 0.5 * std::log1p(t * t);
      im += std::atan(t);
    }
    out.push_back(std::polar(std::exp(re), im));
  }
  return out;
}

namespace {

// Small rate sets invert (phi - phi_ref) where phi_ref is the Gamma(k, mu) law with
// mu the geometric mean of the rates. Both share the leading large-s behaviour
// prod(lambda) (i/s)^k, so the remainder decays one power faster, and the Gamma
// density is added back analytically.
constexpr std::size_t kSubtractMax = 6;

double geometric_mean(std::span<const double> rates) {
  double l = 0.0;
  for (double r : rates) l += std::log(r);
  return std::exp(l / static_cast<double>(rates.size()));
}

std::complex<double> cf_value(std::span<const double> rates, double s) {
  double re = 0.0, im = 0.0;
  for (double r : rates) {
    const double t = s / r;
    re -= 0.5 * std::log1p(t * t);
    im += std::atan(t);
  }
  return std::polar(std::exp(re), im);
}

std::complex<double> gamma_cf(double k, double mu, double s) {
  const double t = s / mu;
  return std::polar(std::exp(-0.5 * k * std::log1p(t * t)), k * std::atan(t));
}

double gamma_pdf(double k, double mu, double x) {
  if (x <= 0.0) return 0.0;
  return std::exp(k * std::log(mu) + (k - 1.0) * std::log(x) - mu * x - std::lgamma(k));
}

// Bound on (1/pi) int_S^inf |integrand| ds, using that the effective decay power
// of the integrand only grows with s.
double truncation_bound(std::span<const double> rates, double s) {
  double p_eff = 0.0;
  for (double r : rates) p_eff += s * s / (r * r + s * s);
  const bool subtract = rates.size() <= kSubtractMax;
  double mag;
  if (subtract) {
    const double mu = geometric_mean(rates);
    mag = std::abs(cf_value(rates, s) - gamma_cf(static_cast<double>(rates.size()), mu, s));
    p_eff += 1.0;
  } else {
    mag = std::exp(log_abs_cf(rates, s));
  }
  if (p_eff <= 1.05) return std::numeric_limits<double>::infinity();
  return mag * s / ((p_eff - 1.0) * std::numbers::pi);
}

// Smallest s (up to bisection accuracy) at which pred(s) holds, pred monotone.
template <class Pred>
double first_true(double start, Pred pred) {
  double hi = start;
  int guard = 0;
  while (!pred(hi)) {
    hi *= 2.0;
    if (++guard > 200) throw InternalError("s search diverged");
  }
  double lo = hi / 2.0;
  if (pred(lo)) return lo;
  for (int it = 0; it < 60; ++it) {
    const double mid = 0.5 * (lo + hi);
    (pred(mid) ? hi : lo) = mid;
  }
  return hi;
}

double s_where_cf_below(std::span<const double> rates, double tol) {
  const double target = std::log(tol);
  return first_true(*std::min_element(rates.begin(), rates.end()),
                    [&](double s) { return log_abs_cf(rates, s) < target; });
}

}  // namespace

InversionParams choose_inversion(std::span<const double> rates, const EtaGrid& grid, double err_tol) {
  check_rates(rates);
  check_grid(grid);
  detail::require(rates.size() >= 2, "Fourier inversion needs at least two rates");
  InversionParams p;
  const double s_phi = s_where_cf_below(rates, 0.5e-8);
  const double s_err = first_true(*std::min_element(rates.begin(), rates.end()),
                                  [&](double s) { return truncation_bound(rates, s) < err_tol; });
  p.s_max = std::max(s_phi, s_err);
  const double period = required_period(rates, grid);
  p.n_s = static_cast<int>(std::ceil(p.s_max * period / (2.0 * std::numbers::pi))) + 2;
  return p;
}

MassDensity density_from_cf(std::span<const double> rates, const EtaGrid& grid, double s_max, int n_s) {
  check_rates(rates);
  check_grid(grid);
  detail::require(rates.size() >= 2, "Fourier inversion needs at least two rates");
  detail::require(s_max > 0.0 && n_s >= 2, "s grid needs s_max > 0 and at least two points");
  if (log_abs_cf(rates, s_max) >= std::log(1e-8)) {
    throw PreconditionError("|phi(s_max)| >= 1e-8: increase s_max (suggested " +
                            std::to_string(choose_inversion(rates, grid).s_max) + ")");
  }
  const double ds = s_max / (n_s - 1);
  if (2.0 * std::numbers::pi / ds < required_period(rates, grid)) {
    throw PreconditionError("s step aliases the density tail onto the eta grid: increase n_s (needed " +
                            std::to_string(choose_inversion(rates, grid).n_s) + ")");
  }

  if (static_cast<double>(n_s) * grid.points > 4e9) {
    throw PreconditionError("Fourier inversion would need " + std::to_string(n_s) + " s-points on " +
                            std::to_string(grid.points) + " eta-points: too expensive");
  }
  MassDensity d = make_density(rates, grid, DensityKind::custom);
  const int n = grid.points;
  const auto& k = simd::kernels();
  std::vector<double> rot_re(n), rot_im(n), ph_re(n), ph_im(n);
  for (int i = 0; i < n; ++i) {
    rot_re[i] = std::cos(ds * d.eta(i));
    rot_im[i] = -std::sin(ds * d.eta(i));
  }
  const bool subtract = rates.size() <= kSubtractMax;
  const double k_ref = static_cast<double>(rates.size());
  const double mu_ref = geometric_mean(rates);
  constexpr int kRefresh = 256;
  for (int m = 0; m < n_s; ++m) {
    const double s = m * ds;
    if (m % kRefresh == 0) {
      for (int i = 0; i < n; ++i) {
        ph_re[i] = std::cos(s * d.eta(i));
        ph_im[i] = -std::sin(s * d.eta(i));
      }
    }
    std::complex<double> c = cf_value(rates, s);
    if (subtract) c -= gamma_cf(k_ref, mu_ref, s);
    c *= (m == 0 || m == n_s - 1 ? 0.5 : 1.0) * ds / std::numbers::pi;
    k.phasor_step(c.real(), c.imag(), ph_re.data(), ph_im.data(), rot_re.data(), rot_im.data(), d.values.data(), n);
  }
  if (subtract) {
    for (int i = 0; i < n; ++i) d.values[i] += gamma_pdf(k_ref, mu_ref, d.eta(i));
  }

  d.clipped_mass = clip_negative(d);
  if (d.clipped_mass > 1e-3) {
    throw DiagnosticError("inversion ringing: clipped negative mass " + std::to_string(d.clipped_mass) +
                          " exceeds 1e-3");
  }
  const double total = d.integral();
  if (std::abs(total - 1.0) > 1e-3) {
    throw DiagnosticError("inverted density integrates to " + std::to_string(total) +
                          ": refine the eta grid or enlarge eta_max");
  }
  return d;
}

MassDensity density_from_cf(std::span<const double> rates, const EtaGrid& grid) {
  const auto p = choose_inversion(rates, grid);
  return density_from_cf(rates, grid, p.s_max, p.n_s);
}

namespace {

std::vector<double> hypo_coefficients(std::span<const double> rates) {
  check_rates(rates);
  detail::require(rates.size() <= 20, "closed form limited to 20 rates: use density_from_cf");
  const double rmax = *std::max_element(rates.begin(), rates.end());
  std::vector<double> c(rates.size(), 1.0);
  for (std::size_t j = 0; j < rates.size(); ++j) {
    for (std::size_t k = 0; k < rates.size(); ++k) {
      if (k == j) continue;
      if (std::abs(rates[k] - rates[j]) < 1e-6 * rmax) {
        throw PreconditionError("near-degenerate rates: use density_from_cf");
      }
      c[j] *= rates[k] / (rates[k] - rates[j]);
    }
  }
  return c;
}

double hypo_eval(std::span<const double> rates, std::span<const double> c, double x) {
  if (x < 0.0) return 0.0;
  double f = 0.0;
  for (std::size_t j = 0; j < rates.size(); ++j) f += c[j] * rates[j] * std::exp(-rates[j] * x);
  return f;
}

}  // namespace

double hypoexponential_pdf(std::span<const double> rates, double x) {
  const auto c = hypo_coefficients(rates);
  return std::max(0.0, hypo_eval(rates, c, x));
}

MassDensity density_closed_form(std::span<const double> rates, const EtaGrid& grid) {
  check_grid(grid);
  const auto c = hypo_coefficients(rates);
  MassDensity d = make_density(rates, grid, DensityKind::custom);
  for (int i = 0; i < grid.points; ++i) d.values[i] = hypo_eval(rates, c, d.eta(i));
  d.clipped_mass = clip_negative(d);
  return d;
}

MassDensity numerical_delta(const EtaGrid& grid, int index) {
  check_grid(grid);
  detail::require(index >= 0 && index < grid.points, "delta index outside the grid");
  MassDensity d = make_density({}, grid, DensityKind::custom);
  const bool end = index == 0 || index == grid.points - 1;
  d.values[index] = (end ? 2.0 : 1.0) / grid.step();
  return d;
}

MassDensity convolve(const MassDensity& a, const MassDensity& b) {
  detail::require(a.grid.points == b.grid.points && std::abs(a.step() - b.step()) <= 1e-12 * a.step(),
                  "convolution needs identical eta grids");
  const int n = a.grid.points;
  MassDensity c;
  c.grid = a.grid;
  c.kind = DensityKind::custom;
  c.rates = a.rates;
  c.rates.insert(c.rates.end(), b.rates.begin(), b.rates.end());
  c.tail_cutoff = std::max(a.tail_cutoff, b.tail_cutoff);
  c.values.assign(n, 0.0);
  std::vector<double> rb(b.values.rbegin(), b.values.rend());
  const auto& k = simd::kernels();
  const double h = a.step();
  for (int i = 1; i < n; ++i) {
    // sum_{j=0}^{i} a_j b_{i-j}, trapezoid end corrections
    const double full = k.dot(a.values.data(), rb.data() + (n - 1 - i), static_cast<std::size_t>(i) + 1);
    c.values[i] = h * (full - 0.5 * (a.values[0] * b.values[i] + a.values[i] * b.values[0]));
  }
  c.truncated_mass = std::max(0.0, a.integral() * b.integral() - c.integral());
  c.clipped_mass = a.clipped_mass + b.clipped_mass;
  return c;
}

double penalized_partition(const MassDensity& f0, double m, double eps) {
  detail::require(m > 0.0 && m <= f0.grid.eta_max, "m must lie inside the eta grid");
  detail::require(eps > 0.0, "eps must be positive");
  if (std::sqrt(eps) / f0.step() < 20.0) {
    throw PreconditionError("penalty window sqrt(eps) spans fewer than 20 eta cells: refine the eta grid");
  }
  const int n = f0.grid.points;
  double z = 0.0;
  for (int i = 0; i < n; ++i) {
    const double t = f0.eta(i) - m;
    const double w = (i == 0 || i == n - 1) ? 0.5 : 1.0;
    z += w * std::exp(-t * t / eps) * f0.values[i];
  }
  return z * f0.step();
}

double log_tail_probability(std::span<const double> rates, double delta) {
  check_rates(rates);
  if (delta <= 0.0) return 0.0;
  const double rmin = *std::min_element(rates.begin(), rates.end());
  if (rates.size() == 1) return -rates[0] * delta;

  // Closed form when it is well conditioned: P = sum_j c_j e^{-lambda_j delta}.
  if (rates.size() <= 20) {
    try {
      const auto c = hypo_coefficients(rates);
      double p = 0.0, mag = 0.0;
      for (std::size_t j = 0; j < rates.size(); ++j) {
        const double t = c[j] * std::exp(-rates[j] * delta);
        p += t;
        mag += std::abs(t);
      }
      if (p > 0.0 && mag < 1e6 * p && std::isnormal(p)) return std::log(p);
    } catch (const PreconditionError&) {
      // near-degenerate rates: fall through to the tilted inversion
    }
  }

  // Tilt theta in (0, rmin): the saddle point sum_j 1/(lambda_j - theta) = delta
  // when the mean lies below delta, otherwise rmin/2.
  double mean = 0.0;
  for (double r : rates) mean += 1.0 / r;
  double theta = 0.5 * rmin;
  if (mean < delta) {
    double lo = 0.0, hi = rmin;
    for (int it = 0; it < 200; ++it) {
      const double mid = 0.5 * (lo + hi);
      double m = 0.0;
      for (double r : rates) m += 1.0 / (r - mid);
      (m < delta ? lo : hi) = mid;
    }
    theta = lo;
  }
  std::vector<double> tilted(rates.begin(), rates.end());
  double log_m = 0.0;
  for (auto& r : tilted) {
    log_m += std::log(r / (r - theta));
    r -= theta;
  }

  // I = int_delta^inf e^{-theta (x - delta)} f_theta(x) dx
  //   = (1/pi) Re int_0^inf phi_theta(s) e^{-i s delta} / (theta + i s) ds.
  // The trapezoid step ds periodizes in x with period 2 pi / ds; the period has
  // to clear both the tilted tail and the e^{-theta x} damping of the image at
  // delta - period.
  const double period = delta + std::max(tail_extent(tilted), 36.0 / theta);
  const double s_max = s_where_cf_below(tilted, 1e-13);
  const double ds = 2.0 * std::numbers::pi / period;
  const long n_s = static_cast<long>(std::ceil(s_max / ds)) + 1;
  if (n_s > 200'000'000L) throw PreconditionError("tail probability inversion too expensive for these rates");
  double acc = 0.0;
  for (long m = 0; m < n_s; ++m) {
    const double s = m * ds;
    double re = 0.0, im = 0.0;
    for (double r : tilted) {
      const double t = s / r;
      re -= 0.5 * std::log1p(t * t);
      im += std::atan(t);
    }
    const std::complex<double> term =
        std::polar(std::exp(re), im - s * delta) / std::complex<double>(theta, s);
    acc += (m == 0 ? 0.5 : 1.0) * term.real();
  }
  const double integral = acc * ds / std::numbers::pi;
  if (!(integral > 0.0)) return -std::numeric_limits<double>::infinity();
  return log_m - theta * delta + std::log(integral);
}

std::vector<double> rates_up_to(const SpectralBasis& basis, double split, int max_modes) {
  const int k = max_modes < 0 ? basis.n_modes() : std::min(max_modes, basis.n_modes());
  std::vector<double> r;
  for (int j = 0; j < k; ++j) {
    if (basis.eigenvalues[j] <= split) r.push_back(basis.eigenvalues[j]);
  }
  return r;
}

std::vector<double> rates_above(const SpectralBasis& basis, double split, int max_modes) {
  const int k = max_modes < 0 ? basis.n_modes() : std::min(max_modes, basis.n_modes());
  std::vector<double> r;
  for (int j = 0; j < k; ++j) {
    if (basis.eigenvalues[j] > split) r.push_back(basis.eigenvalues[j]);
  }
  return r;
}

MassDensity density_for_rates(std::span<const double> rates, const EtaGrid& grid, DensityKind kind) {
  MassDensity d;
  if (rates.empty()) {
    d = numerical_delta(grid, 0);
  } else if (rates.size() == 1) {
    d = density_closed_form(rates, grid);
  } else {
    d = density_from_cf(rates, grid);
  }
  d.kind = kind;
  return d;
}

MassDensity mass_density(const SpectralBasis& basis, DensityKind kind, const EtaGrid& grid, double split,
                         int leave_out, int n_modes) {
  const int k = n_modes < 0 ? basis.n_modes() : std::min(n_modes, basis.n_modes());
  std::vector<double> rates;
  switch (kind) {
    case DensityKind::low_modes_g:
      rates = rates_up_to(basis, split, k);
      break;
    case DensityKind::high_modes_f:
      rates = rates_above(basis, split, k);
      break;
    case DensityKind::all_modes_f0:
      rates.assign(basis.eigenvalues.begin(), basis.eigenvalues.begin() + k);
      break;
    case DensityKind::leave_one_out_F:
      detail::require(leave_out >= 0 && leave_out < k, "leave-one-out index outside the mode range");
      for (int j = 0; j < k; ++j) {
        if (j != leave_out) rates.push_back(basis.eigenvalues[j]);
      }
      break;
    case DensityKind::custom:
      throw PreconditionError("mass_density needs a concrete density kind");
  }
  MassDensity d = density_for_rates(rates, grid, kind);
  d.tail_cutoff = basis.eigenvalues[k - 1];
  return d;
}

double phase_type_pdf(std::span<const double> rates, double x) {
  const int d = static_cast<int>(rates.size());
  detail::require(d >= 1, "phase-type density needs at least one rate");
  for (double l : rates) detail::require(l > 0.0 && std::isfinite(l), "rates must be positive and finite");
  if (x <= 0.0) return d == 1 ? rates[0] : 0.0;
  Eigen::MatrixXd q = Eigen::MatrixXd::Zero(d, d);
  for (int i = 0; i < d; ++i) {
    q(i, i) = -rates[i] * x;
    if (i + 1 < d) q(i, i + 1) = rates[i] * x;
  }
  const Eigen::MatrixXd e = q.exp();
  return rates[d - 1] * std::max(e(0, d - 1), 0.0);
}

double conditional_mean(std::span<const double> rates, double m, int j) {
  detail::require(j >= 0 && j < static_cast<int>(rates.size()), "mode index out of range");
  detail::require(m > 0.0, "conditioning mass must be positive");
  std::vector<double> r(rates.begin(), rates.end());
  const double f = phase_type_pdf(r, m);
  r.push_back(rates[j]);
  return phase_type_pdf(r, m) / (rates[j] * f);
}

double conditional_second_moment(std::span<const double> rates, double m, int j, int k) {
  const int d = static_cast<int>(rates.size());
  detail::require(j >= 0 && j < d && k >= 0 && k < d, "mode index out of range");
  detail::require(m > 0.0, "conditioning mass must be positive");
  std::vector<double> r(rates.begin(), rates.end());
  const double f = phase_type_pdf(r, m);
  r.push_back(rates[j]);
  r.push_back(rates[k]);
  const double c = j == k ? 2.0 / (rates[j] * rates[j]) : 1.0 / (rates[j] * rates[k]);
  return c * phase_type_pdf(r, m) / f;
}

double penalized_mean(std::span<const double> rates, double m, double eps, int j) {
  detail::require(j >= 0 && j < static_cast<int>(rates.size()), "mode index out of range");
  detail::require(m > 0.0 && eps > 0.0, "penalized mean needs m > 0 and eps > 0");
  std::vector<double> r(rates.begin(), rates.end());
  std::vector<double> rj = r;
  rj.push_back(rates[j]);
  const double lo = *std::min_element(r.begin(), r.end());
  const double hi = m + 8.0 * std::sqrt(eps) + 40.0 / lo;
  std::vector<double> x, w;
  double num = 0.0, den = 0.0;
  const int panels = 400;
  for (int p = 0; p < panels; ++p) {
    gauss_legendre(20, hi * p / panels, hi * (p + 1) / panels, x, w);
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double g = w[i] * std::exp(-(x[i] - m) * (x[i] - m) / eps);
      if (g == 0.0) continue;
      num += g * phase_type_pdf(rj, x[i]);
      den += g * phase_type_pdf(r, x[i]);
    }
  }
  return num / (rates[j] * den);
}

}  // namespace mfbose
