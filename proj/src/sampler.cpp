#include <algorithm>
#include <cmath>
#include <memory>
#include <numbers>
#include <sstream>

#include "mfbose/error.hpp"
#include "mfbose/measures.hpp"
#include "mfbose/rng.hpp"

namespace mfbose {

std::string measure_kind_name(MeasureKind kind) {
  switch (kind) {
    case MeasureKind::free_gaussian: return "gaussian";
    case MeasureKind::penalized: return "penalized";
    case MeasureKind::conditioned: return "conditioned";
    case MeasureKind::sphere: return "sphere";
    case MeasureKind::interacting: return "interacting";
  }
  return "unknown";
}

MeasureKind parse_measure_kind(const std::string& name) {
  if (name == "gaussian" || name == "free_gaussian" || name == "free") return MeasureKind::free_gaussian;
  if (name == "penalized") return MeasureKind::penalized;
  if (name == "conditioned") return MeasureKind::conditioned;
  if (name == "sphere") return MeasureKind::sphere;
  if (name == "interacting") return MeasureKind::interacting;
  throw PreconditionError("unknown measure kind '" + name + "'");
}

std::string convention_name(SphereConvention c) { return c == SphereConvention::radius ? "radius" : "unit"; }

SphereConvention parse_convention(const std::string& name) {
  if (name == "radius") return SphereConvention::radius;
  if (name == "unit") return SphereConvention::unit;
  throw PreconditionError("unknown sphere convention '" + name + "'");
}

int MeasureSpec::dimension(const SpectralBasis& basis) const {
  if (n_modes > 0) {
    detail::require(n_modes <= basis.n_modes(), "measure needs more modes than the basis resolves");
    return n_modes;
  }
  detail::require(cutoff >= basis.eigenvalues.front(), "cutoff below lambda_1 leaves no modes");
  detail::require(cutoff <= basis.lambda_max(), "cutoff exceeds the largest resolved eigenvalue");
  return basis.count_below(cutoff);
}

void MeasureSpec::validate(const SpectralBasis& basis) const {
  dimension(basis);
  const bool needs_m = kind != MeasureKind::free_gaussian;
  const bool needs_eps = kind == MeasureKind::penalized;
  const bool allows_g = kind == MeasureKind::sphere || kind == MeasureKind::interacting;
  const std::string k = measure_kind_name(kind);
  if (needs_m)
    detail::require(m > 0.0 && std::isfinite(m), k + " measure needs a positive mass m");
  else
    detail::require(m == 0.0, "gaussian measure takes no mass");
  if (needs_eps)
    detail::require(eps > 0.0 && std::isfinite(eps), "penalized measure needs eps > 0");
  else
    detail::require(eps == 0.0, k + " measure takes no eps");
  if (!allows_g) detail::require(g == 0.0, k + " measure takes no coupling");
  detail::require(std::isfinite(g), "coupling must be finite");
  if (kind == MeasureKind::interacting || (kind == MeasureKind::sphere && g != 0.0))
    detail::require(potential.has_value(), k + " measure with a coupling needs a potential");
  if (kind == MeasureKind::interacting)
    detail::require(interacting_base == MeasureKind::sphere || interacting_base == MeasureKind::conditioned,
                    "interacting base must be sphere or conditioned");
  if (kind != MeasureKind::sphere && kind != MeasureKind::interacting)
    detail::require(convention == SphereConvention::radius, "unit-sphere convention applies to sphere kinds only");
}

std::string MeasureSpec::describe() const {
  std::ostringstream os;
  os << measure_kind_name(kind);
  if (kind != MeasureKind::free_gaussian) os << " m=" << m;
  if (kind == MeasureKind::penalized) os << " eps=" << eps;
  if (g != 0.0) os << " g=" << g;
  if (n_modes > 0)
    os << " d=" << n_modes;
  else
    os << " cutoff=" << cutoff;
  if (kind == MeasureKind::sphere || kind == MeasureKind::interacting) os << " convention=" << convention_name(convention);
  if (potential) os << " w=" << potential->describe();
  return os.str();
}

Field SampleBatch::field(int i) const {
  const auto r = row(i);
  return Field(std::vector<Complex>(r.begin(), r.end()));
}

double SampleBatch::mass(int i) const {
  double s = 0.0;
  for (const auto& a : row(i)) s += std::norm(a);
  return s;
}

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

/// theta < lambda_1 with sum_j 1/(lambda_j - theta) = target.
double solve_tilt(std::span<const double> rates, double target) {
  const double l1 = rates.front();
  auto total = [&](double th) {
    double s = 0.0;
    for (double l : rates) s += 1.0 / (l - th);
    return s;
  };
  double lo = std::min(0.0, l1 - static_cast<double>(rates.size()) / target);
  double hi = l1;
  if (total(lo) > target) lo = l1 - 2.0 * rates.size() / target;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid == lo || mid == hi) break;
    (total(mid) < target ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

void apply_weight_guard(SampleBatch& b, bool strict) {
  const auto s = summarize_log_weights(b.log_weights);
  b.ess = s.ess;
  b.max_weight_fraction = s.max_fraction;
  if (s.n_positive == 0) throw DiagnosticError("every sample carries zero weight");
  const double n = static_cast<double>(b.size());
  if (s.ess < 0.01 * n) {
    const std::string msg = "heavy-tailed weights: ess " + std::to_string(s.ess) + " < 1% of " + std::to_string(b.size());
    if (strict) throw DiagnosticError(msg);
    b.warnings.push_back(msg);
  }
  if (s.max_fraction > 0.1) {
    const std::string msg = "one sample carries " + std::to_string(100.0 * s.max_fraction) + "% of the weight";
    if (strict) throw DiagnosticError(msg);
    b.warnings.push_back(msg);
  }
}

Estimate log_mean_exp(std::span<const double> lw) {
  const double ls = logsumexp(lw);
  Estimate e;
  e.value = ls - std::log(static_cast<double>(lw.size()));
  if (!std::isfinite(ls)) return e;
  std::vector<double> r(lw.size());
  for (std::size_t i = 0; i < lw.size(); ++i) r[i] = std::exp(lw[i] - ls) * static_cast<double>(lw.size());
  e.stderr_ = batch_mean(r).stderr_;  // relative error of the mean
  return e;
}

SampleBatch free_draws(const MeasureSpec& spec, const SpectralBasis& basis, int d, int n, std::uint64_t seed,
                       const SampleOptions& opt) {
  std::vector<double> lam(basis.eigenvalues.begin(), basis.eigenvalues.begin() + d);
  const bool conditioned = spec.kind == MeasureKind::conditioned || spec.kind == MeasureKind::interacting;
  const MassDensity* f = opt.complement;
  if (conditioned) {
    detail::require(f != nullptr, "conditioned draws need the complementary mass density");
    if (!f->rates.empty())
      detail::require(*std::min_element(f->rates.begin(), f->rates.end()) >= lam.back() * (1.0 - 1e-12),
                      "complementary density must come from modes above the cutoff");
  }
  double theta = 0.0;
  if (spec.kind != MeasureKind::free_gaussian) {
    if (std::isnan(opt.tilt)) {
      const double target = conditioned ? std::max(spec.m - f->mean(), 0.05 * spec.m) : spec.m;
      theta = solve_tilt(lam, target);
    } else {
      theta = opt.tilt;
    }
  }
  detail::require(theta < lam.front(), "tilt must stay below lambda_1");

  SampleBatch b;
  b.spec = spec;
  b.d = d;
  b.seed = seed;
  b.tilt = theta;
  b.coeffs.resize(static_cast<std::size_t>(n) * d);
  b.log_weights.resize(n);
  double base = 0.0;
  for (double l : lam) base += std::log(l / (l - theta));
  for (int i = 0; i < n; ++i) {
    Philox rng(seed, static_cast<std::uint64_t>(i));
    double mass = 0.0;
    for (int j = 0; j < d; ++j) {
      const double x = -std::log(rng.uniform()) / (lam[j] - theta);
      const double phase = kTwoPi * rng.uniform();
      b.coeffs[static_cast<std::size_t>(i) * d + j] = std::polar(std::sqrt(x), phase);
      mass += x;
    }
    double lw = theta == 0.0 ? 0.0 : base - theta * mass;
    if (spec.kind == MeasureKind::penalized) {
      lw -= (mass - spec.m) * (mass - spec.m) / spec.eps;
    } else if (conditioned) {
      const double fv = spec.m - mass > 0.0 ? f->at(spec.m - mass) : 0.0;
      lw += fv > 0.0 ? std::log(fv) : -kInfinity;
    }
    b.log_weights[i] = lw;
  }
  b.log_normalization = log_mean_exp(b.log_weights);
  return b;
}

}  // namespace

SphereTarget sphere_target(const MeasureSpec& spec, const SpectralBasis& basis) {
  SphereTarget t;
  t.d = spec.dimension(basis);
  const double g = spec.kind == MeasureKind::sphere ? spec.g : 0.0;
  if (spec.convention == SphereConvention::radius) {
    t.radius2 = spec.m;
    t.beta_kin = 1.0;
    t.beta_int = g / (2.0 * spec.m);
  } else {
    t.radius2 = 1.0;
    t.beta_kin = spec.m;
    t.beta_int = 0.5 * g * spec.m;
  }
  return t;
}

double sphere_log_density(const SphereTarget& target, const SpectralBasis& basis, const PairInteraction* interaction,
                          std::span<const Complex> alpha) {
  double kin = 0.0;
  for (int j = 0; j < target.d; ++j) kin += basis.eigenvalues[j] * std::norm(alpha[j]);
  double out = -target.beta_kin * kin;
  if (target.beta_int != 0.0) out -= target.beta_int * interaction->energy(alpha);
  return out;
}

SampleBatch sample_sphere(const SphereTarget& target, const SpectralBasis& basis, const PairInteraction* interaction,
                          int n, std::uint64_t seed, const McmcParams& mcmc) {
  const int d = target.d;
  detail::require(n >= 1, "need at least one sample");
  detail::require(d >= 1 && d <= basis.n_modes(), "sphere dimension out of range");
  detail::require(target.radius2 > 0.0, "sphere radius must be positive");
  detail::require(mcmc.n_chains >= 1 && mcmc.burn_in_sweeps >= 0, "bad MCMC parameters");
  const bool interacting = target.beta_int != 0.0;
  if (interacting) {
    detail::require(interaction != nullptr, "interacting sphere chain needs a pair interaction");
    detail::require(interaction->modes() == d, "pair interaction built for a different mode count");
  }
  const double* lam = basis.eigenvalues.data();
  const int thin = mcmc.thinning > 0 ? mcmc.thinning : d;
  const int chains = std::min(mcmc.n_chains, n);
  constexpr double kMaxStep = std::numbers::pi / 2.0;
  constexpr double kMinKappa = 1e-4, kMaxKappa = 16.0;

  SampleBatch b;
  b.d = d;
  b.seed = seed;
  b.coeffs.resize(static_cast<std::size_t>(n) * d);
  b.log_weights.assign(n, 0.0);
  long accepted = 0, proposed = 0;
  double min_kappa = kMaxKappa;
  int row = 0;

  std::vector<double> x(d);
  std::vector<Complex> alpha(d), trial(d);
  for (int c = 0; c < chains; ++c) {
    Philox rng(seed, static_cast<std::uint64_t>(c));
    const int count = n / chains + (c < n % chains ? 1 : 0);
    // start from a scaled exponential draw
    double sx = 0.0;
    for (int j = 0; j < d; ++j) {
      x[j] = -std::log(rng.uniform()) / std::max(target.beta_kin * lam[j], 1e-12);
      sx += x[j];
    }
    for (int j = 0; j < d; ++j) {
      x[j] *= target.radius2 / sx;
      alpha[j] = std::polar(std::sqrt(x[j]), kTwoPi * rng.uniform());
    }
    double energy = interacting ? interaction->energy(alpha) : 0.0;
    double kappa = std::clamp(mcmc.initial_step, kMinKappa, kMaxKappa);

    auto propose = [&]() -> bool {
      if (d == 1) {
        alpha[0] = std::polar(std::sqrt(x[0]), kTwoPi * rng.uniform());
        return true;
      }
      const int a = static_cast<int>(rng.below(d));
      int bb = static_cast<int>(rng.below(d - 1));
      if (bb >= a) ++bb;
      const double t = x[a] + x[bb];
      const double th = std::atan2(std::sqrt(x[bb]), std::sqrt(x[a]));
      // angular scale of the pair's conditional law; t and the pair are preserved by
      // the move, so the proposal stays symmetric
      const double spread = t * target.beta_kin * std::abs(lam[a] - lam[bb]);
      const double step = spread > 0.0 ? std::min(kMaxStep, kappa / std::sqrt(spread)) : kMaxStep;
      double th2 = th + step * (2.0 * rng.uniform() - 1.0);
      if (th2 < 0.0) th2 = -th2;
      if (th2 > kMaxStep) th2 = std::numbers::pi - th2;
      const double ca = std::cos(th2);
      const double xa = t * ca * ca;
      const double xb = t - xa;
      const double pa = kTwoPi * rng.uniform(), pb = kTwoPi * rng.uniform();
      const double s_old = std::sin(2.0 * th), s_new = std::sin(2.0 * th2);
      double log_ratio = -target.beta_kin * (lam[a] * (xa - x[a]) + lam[bb] * (xb - x[bb]));
      if (s_old > 0.0) log_ratio += std::log(std::max(s_new, 1e-300) / s_old);
      double e_new = energy;
      if (interacting) {
        trial = alpha;
        trial[a] = std::polar(std::sqrt(xa), pa);
        trial[bb] = std::polar(std::sqrt(std::max(xb, 0.0)), pb);
        e_new = interaction->energy(trial);
        log_ratio -= target.beta_int * (e_new - energy);
      }
      if (s_old > 0.0 && std::log(rng.uniform()) >= log_ratio) return false;
      x[a] = xa;
      x[bb] = std::max(xb, 0.0);
      alpha[a] = std::polar(std::sqrt(x[a]), pa);
      alpha[bb] = std::polar(std::sqrt(x[bb]), pb);
      energy = e_new;
      return true;
    };
    auto renormalize = [&]() {
      double s = 0.0;
      for (double v : x) s += v;
      const double f = target.radius2 / s;
      for (int j = 0; j < d; ++j) {
        x[j] *= f;
        alpha[j] *= std::sqrt(f);
      }
      if (interacting) energy = interaction->energy(alpha);
    };

    const long burn = static_cast<long>(mcmc.burn_in_sweeps) * d;
    int window_acc = 0, window = 0;
    for (long it = 0; it < burn; ++it) {
      window_acc += propose() ? 1 : 0;
      if (++window == 100) {
        if (mcmc.adapt && d > 1) {
          const double r = window_acc / 100.0;
          kappa = std::clamp(kappa * std::exp(2.0 * (r - 0.5)), kMinKappa, kMaxKappa);
        }
        window = window_acc = 0;
      }
      if ((it + 1) % (1000L * d) == 0) renormalize();
    }
    renormalize();
    min_kappa = std::min(min_kappa, kappa);
    long since = 0;
    for (int s = 0; s < count; ++s) {
      for (int k = 0; k < thin; ++k) {
        accepted += propose() ? 1 : 0;
        ++proposed;
        if (++since == 1000L * d) {
          renormalize();
          since = 0;
        }
      }
      std::copy(alpha.begin(), alpha.end(), b.coeffs.begin() + static_cast<std::ptrdiff_t>(row) * d);
      ++row;
    }
  }
  b.acceptance_rate = proposed > 0 ? static_cast<double>(accepted) / proposed : 1.0;
  b.ess = n;
  b.max_weight_fraction = 1.0 / n;
  b.log_normalization = {0.0, 0.0};
  if (d > 1) {
    if (b.acceptance_rate < 0.1)
      throw DiagnosticError("sphere chain acceptance " + std::to_string(b.acceptance_rate) + " below 0.1");
    if (b.acceptance_rate > 0.9 && min_kappa < kMaxKappa)
      throw DiagnosticError("sphere chain acceptance " + std::to_string(b.acceptance_rate) + " above 0.9");
  }
  return b;
}

SampleBatch sample_measure(const MeasureSpec& spec, const SpectralBasis& basis, int n, std::uint64_t seed,
                           const SampleOptions& opt) {
  detail::require(n >= 1, "need at least one sample");
  spec.validate(basis);
  const int d = spec.dimension(basis);

  std::unique_ptr<PairInteraction> owned;
  auto interaction = [&]() -> const PairInteraction* {
    if (opt.interaction) {
      detail::require(opt.interaction->modes() == d, "pair interaction built for a different mode count");
      return opt.interaction;
    }
    if (!owned) owned = std::make_unique<PairInteraction>(basis, d, *spec.potential);
    return owned.get();
  };

  SampleBatch b;
  switch (spec.kind) {
    case MeasureKind::free_gaussian:
    case MeasureKind::penalized:
      b = free_draws(spec, basis, d, n, seed, opt);
      break;
    case MeasureKind::conditioned:
      if (opt.complement) {
        b = free_draws(spec, basis, d, n, seed, opt);
      } else {
        b = sample_sphere(sphere_target(spec, basis), basis, nullptr, n, seed, opt.mcmc);
      }
      break;
    case MeasureKind::sphere: {
      const auto t = sphere_target(spec, basis);
      b = sample_sphere(t, basis, t.beta_int != 0.0 ? interaction() : nullptr, n, seed, opt.mcmc);
      break;
    }
    case MeasureKind::interacting: {
      if (spec.interacting_base == MeasureKind::conditioned && opt.complement) {
        b = free_draws(spec, basis, d, n, seed, opt);
      } else {
        b = sample_sphere(sphere_target(spec, basis), basis, nullptr, n, seed, opt.mcmc);
      }
      if (spec.g != 0.0) {
        const double coef =
            spec.convention == SphereConvention::radius ? spec.g / (2.0 * spec.m) : 0.5 * spec.g * spec.m;
        const auto* pi = interaction();
        for (int i = 0; i < n; ++i) b.log_weights[i] -= coef * pi->energy(b.row(i));
      }
      b.log_normalization = log_mean_exp(b.log_weights);
      break;
    }
  }
  b.spec = spec;
  b.seed = seed;
  apply_weight_guard(b, opt.strict);
  return b;
}

}  // namespace mfbose
