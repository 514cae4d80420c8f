#include <algorithm>
#include <array>
#include <cmath>

#include "mfbose/error.hpp"
#include "mfbose/measures.hpp"

namespace mfbose {

namespace {

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (salt + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

double kinetic(const SpectralBasis& basis, std::span<const Complex> alpha) {
  double k = 0.0;
  for (std::size_t j = 0; j < alpha.size(); ++j) k += basis.eigenvalues[j] * std::norm(alpha[j]);
  return k;
}

}  // namespace

DensityMatrixEstimate estimate_dm(const SampleBatch& batch, int k, int n_batches) {
  detail::require(k == 1 || k == 2, "density matrices are estimated for k = 1 or 2");
  detail::require(batch.size() > 0, "empty batch");
  const int d = batch.d;
  const int dim = k == 1 ? d : d * d;
  detail::require(dim <= 256, "density matrix dimension above 256 is not supported");
  const auto summary = summarize_log_weights(batch.log_weights);
  if (summary.ess < 100.0)
    throw DiagnosticError("effective sample size " + std::to_string(summary.ess) + " below 100 for a density matrix");
  const auto w = batch.weights();
  const int n = batch.size();
  const int nb = std::max(2, std::min(n_batches, n));

  std::vector<Eigen::MatrixXcd> sums(nb, Eigen::MatrixXcd::Zero(dim, dim));
  std::vector<double> wsum(nb, 0.0);
  Eigen::VectorXcd v(dim);
  for (int b = 0; b < nb; ++b) {
    const int lo = static_cast<int>(static_cast<long>(n) * b / nb);
    const int hi = static_cast<int>(static_cast<long>(n) * (b + 1) / nb);
    auto& s = sums[b];
    for (int i = lo; i < hi; ++i) {
      if (w[i] == 0.0) continue;
      const auto a = batch.row(i);
      if (k == 1) {
        for (int p = 0; p < d; ++p) v[p] = a[p];
      } else {
        for (int p = 0; p < d; ++p)
          for (int q = 0; q < d; ++q) v[p * d + q] = a[p] * a[q];
      }
      for (int c = 0; c < dim; ++c) {
        const Complex vc = std::conj(v[c]) * w[i];
        for (int r = 0; r <= c; ++r) s(r, c) += v[r] * vc;
      }
      wsum[b] += w[i];
    }
  }
  DensityMatrixEstimate out;
  out.k = k;
  out.d = d;
  out.n_samples = n;
  out.ess = summary.ess;
  double wt = 0.0;
  Eigen::MatrixXcd total = Eigen::MatrixXcd::Zero(dim, dim);
  for (int b = 0; b < nb; ++b) {
    total += sums[b];
    wt += wsum[b];
  }
  out.matrix = total / wt;
  out.stderr_ = Eigen::MatrixXd::Zero(dim, dim);
  for (int c = 0; c < dim; ++c)
    for (int r = 0; r <= c; ++r) {
      double ss = 0.0;
      for (int b = 0; b < nb; ++b) ss += std::norm(sums[b](r, c) - wsum[b] * out.matrix(r, c));
      out.stderr_(r, c) = out.stderr_(c, r) = std::sqrt(ss * nb / (nb - 1.0)) / wt;
    }
  for (int c = 0; c < dim; ++c) {
    out.matrix(c, c) = out.matrix(c, c).real();
    for (int r = c + 1; r < dim; ++r) out.matrix(r, c) = std::conj(out.matrix(c, r));
  }
  out.hermitian_residual = (out.matrix - out.matrix.adjoint()).cwiseAbs().maxCoeff();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(out.matrix, Eigen::EigenvaluesOnly);
  out.min_eigenvalue = es.eigenvalues().minCoeff();
  if (out.min_eigenvalue < -1e-8)
    throw DiagnosticError("density matrix estimate has eigenvalue " + std::to_string(out.min_eigenvalue));
  return out;
}

std::vector<Estimate> occupation_means(const SampleBatch& batch, int n_batches) {
  const auto w = batch.weights();
  std::vector<double> v(batch.size());
  std::vector<Estimate> out;
  for (int j = 0; j < batch.d; ++j) {
    for (int i = 0; i < batch.size(); ++i) v[i] = std::norm(batch.row(i)[j]);
    out.push_back(weighted_mean(v, w, n_batches));
  }
  return out;
}

Estimate occupation_covariance(const SampleBatch& batch, int j, int k, int n_batches) {
  detail::require(j >= 0 && j < batch.d && k >= 0 && k < batch.d, "mode index out of range");
  const int n = batch.size();
  const int nb = std::max(2, std::min(n_batches, n));
  const auto w = batch.weights();
  // per-batch sums of w, w x_j, w x_k, w x_j x_k
  std::vector<std::array<double, 4>> sums(nb, {0.0, 0.0, 0.0, 0.0});
  for (int b = 0; b < nb; ++b) {
    const int lo = static_cast<int>(static_cast<long>(n) * b / nb);
    const int hi = static_cast<int>(static_cast<long>(n) * (b + 1) / nb);
    for (int i = lo; i < hi; ++i) {
      const double xj = std::norm(batch.row(i)[j]), xk = std::norm(batch.row(i)[k]);
      sums[b][0] += w[i];
      sums[b][1] += w[i] * xj;
      sums[b][2] += w[i] * xk;
      sums[b][3] += w[i] * xj * xk;
    }
  }
  std::array<double, 4> tot{0.0, 0.0, 0.0, 0.0};
  for (const auto& s : sums)
    for (int c = 0; c < 4; ++c) tot[c] += s[c];
  auto cov = [](const std::array<double, 4>& s) { return s[3] / s[0] - (s[1] / s[0]) * (s[2] / s[0]); };
  std::vector<double> jk(nb);
  double mean = 0.0;
  for (int b = 0; b < nb; ++b) {
    std::array<double, 4> t = tot;
    for (int c = 0; c < 4; ++c) t[c] -= sums[b][c];
    jk[b] = cov(t);
    mean += jk[b] / nb;
  }
  double ss = 0.0;
  for (double v : jk) ss += (v - mean) * (v - mean);
  return {cov(tot), std::sqrt(ss * (nb - 1.0) / nb)};
}

PartitionEstimate classical_relative_partition(const SampleBatch& batch, double g, const PairInteraction& interaction,
                                               bool strict) {
  const auto& spec = batch.spec;
  detail::require(spec.kind == MeasureKind::conditioned || spec.kind == MeasureKind::sphere,
                  "relative partition needs a conditioned or sphere batch");
  detail::require(spec.g == 0.0, "relative partition needs a g = 0 batch");
  detail::require(interaction.modes() == batch.d, "pair interaction built for a different mode count");
  PartitionEstimate out;
  const auto base = summarize_log_weights(batch.log_weights);
  if (g == 0.0 || interaction.is_zero()) {
    out.z = {1.0, 0.0};
    out.ess = base.ess;
    out.max_weight_fraction = base.max_fraction;
    return out;
  }
  const double coef = spec.convention == SphereConvention::radius ? g / (2.0 * spec.m) : 0.5 * g * spec.m;
  const int n = batch.size();
  std::vector<double> e(n), lw(n);
  for (int i = 0; i < n; ++i) {
    e[i] = -coef * interaction.energy(batch.row(i));
    lw[i] = batch.log_weights[i] + e[i];
  }
  // exp(e - shift) keeps the mean finite for strongly focusing couplings
  const double shift = *std::max_element(e.begin(), e.end());
  std::vector<double> val(n);
  for (int i = 0; i < n; ++i) val[i] = std::exp(e[i] - shift);
  const auto w = batch.weights();
  const auto m = weighted_mean(val, w);
  out.z = {m.value * std::exp(shift), m.stderr_ * std::exp(shift)};
  const auto s = summarize_log_weights(lw);
  out.ess = s.ess;
  out.max_weight_fraction = s.max_fraction;
  if (s.ess < 0.01 * n) {
    const std::string msg = "heavy-tailed interaction weights: ess " + std::to_string(s.ess);
    if (strict) throw DiagnosticError(msg);
    out.warnings.push_back(msg);
  }
  if (s.max_fraction > 0.1) {
    const std::string msg = "one sample carries " + std::to_string(100.0 * s.max_fraction) + "% of the weight";
    if (strict) throw DiagnosticError(msg);
    out.warnings.push_back(msg);
  }
  return out;
}

Estimate classical_relative_entropy(const SampleBatch& numerator, const MeasureSpec& numerator_spec,
                                    const MeasureSpec& denominator_spec, const SpectralBasis& basis,
                                    const PairInteraction* interaction, const EntropyOptions& options) {
  detail::require(numerator_spec.kind == MeasureKind::sphere && denominator_spec.kind == MeasureKind::sphere,
                  "relative entropy is implemented for sphere measures");
  const auto tn = sphere_target(numerator_spec, basis);
  const auto td = sphere_target(denominator_spec, basis);
  if (tn.d != td.d || tn.d != numerator.d) throw PreconditionError("relative entropy: measures live on different E_Lambda");
  if (std::abs(tn.radius2 - td.radius2) > 1e-12 * tn.radius2)
    throw PreconditionError("relative entropy: measures live on spheres of different mass");
  const double dk = tn.beta_kin - td.beta_kin;
  const double di = tn.beta_int - td.beta_int;
  if (dk == 0.0 && di == 0.0) return {0.0, 0.0};
  const bool need_f = tn.beta_int != 0.0 || td.beta_int != 0.0;
  if (need_f) detail::require(interaction != nullptr && interaction->modes() == tn.d, "relative entropy needs the pair interaction");

  auto delta_e = [&](std::span<const Complex> a) {
    double v = dk * kinetic(basis, a);
    if (di != 0.0) v += di * interaction->energy(a);
    return v;
  };
  const int n = numerator.size();
  std::vector<double> de(n);
  for (int i = 0; i < n; ++i) de[i] = delta_e(numerator.row(i));
  const auto w = numerator.weights();
  const auto a = weighted_mean(de, w, options.n_batches);

  if (options.method == EntropyMethod::reweight) {
    // H = -<dE> + log <exp(dE)>, jackknife over contiguous batches
    auto estimate = [&](int skip_lo, int skip_hi) {
      double sw = 0.0, swx = 0.0, hi = -kInfinity;
      for (int i = 0; i < n; ++i)
        if ((i < skip_lo || i >= skip_hi) && w[i] > 0.0) hi = std::max(hi, de[i]);
      double se = 0.0;
      for (int i = 0; i < n; ++i) {
        if ((i >= skip_lo && i < skip_hi) || w[i] == 0.0) continue;
        sw += w[i];
        swx += w[i] * de[i];
        se += w[i] * std::exp(de[i] - hi);
      }
      return -swx / sw + hi + std::log(se / sw);
    };
    const double full = estimate(0, 0);
    const int nb = std::max(2, std::min(options.n_batches, n));
    std::vector<double> jk(nb);
    double mean = 0.0;
    for (int b = 0; b < nb; ++b) {
      jk[b] = estimate(static_cast<int>(static_cast<long>(n) * b / nb), static_cast<int>(static_cast<long>(n) * (b + 1) / nb));
      mean += jk[b] / nb;
    }
    double ss = 0.0;
    for (double v : jk) ss += (v - mean) * (v - mean);
    return {full, std::sqrt(ss * (nb - 1.0) / nb)};
  }

  std::vector<double> nodes, weights;
  gauss_legendre(options.nodes, 0.0, 1.0, nodes, weights);
  double integral = 0.0, var = a.stderr_ * a.stderr_;
  for (std::size_t k = 0; k < nodes.size(); ++k) {
    SphereTarget t = td;
    t.beta_kin = td.beta_kin + nodes[k] * dk;
    t.beta_int = td.beta_int + nodes[k] * di;
    const auto b = sample_sphere(t, basis, t.beta_int != 0.0 ? interaction : nullptr, options.n_samples,
                                 mix_seed(options.seed, k), options.mcmc);
    std::vector<double> v(b.size());
    for (int i = 0; i < b.size(); ++i) v[i] = delta_e(b.row(i));
    const auto e = batch_mean(v, options.n_batches);
    integral += weights[k] * e.value;
    var += weights[k] * weights[k] * e.stderr_ * e.stderr_;
  }
  return {integral - a.value, std::sqrt(var)};
}

MassGap delta_mass_gap(double m1, double m2, double g, const SpectralBasis& basis, int d,
                       const PairInteraction* interaction, int n, std::uint64_t seed, const McmcParams& mcmc) {
  detail::require(m1 > 0.0 && m1 <= m2, "mass gap needs 0 < m1 <= m2");
  MassGap out;
  out.spec_1.kind = out.spec_2.kind = MeasureKind::sphere;
  out.spec_1.convention = out.spec_2.convention = SphereConvention::unit;
  out.spec_1.n_modes = out.spec_2.n_modes = d;
  out.spec_1.m = m1;
  out.spec_2.m = m2;
  out.spec_2.g = g;
  const auto t1 = sphere_target(out.spec_1, basis);
  const auto t2 = sphere_target(out.spec_2, basis);
  if (g != 0.0) detail::require(interaction != nullptr, "mass gap with g != 0 needs the pair interaction");
  const auto b1 = sample_sphere(t1, basis, nullptr, n, mix_seed(seed, 1), mcmc);
  out.batch_2 = sample_sphere(t2, basis, g != 0.0 ? interaction : nullptr, n, mix_seed(seed, 2), mcmc);
  out.batch_2.spec = out.spec_2;
  std::vector<double> k1(n), k2(n);
  for (int i = 0; i < n; ++i) {
    k1[i] = kinetic(basis, b1.row(i));
    k2[i] = kinetic(basis, out.batch_2.row(i));
  }
  out.kinetic_1 = batch_mean(k1);
  out.kinetic_2 = batch_mean(k2);
  out.delta = {out.kinetic_1.value - out.kinetic_2.value,
               std::hypot(out.kinetic_1.stderr_, out.kinetic_2.stderr_)};
  return out;
}

double l4_norm4(const SpectralBasis& basis, std::span<const Complex> alpha) {
  const Field f(std::vector<Complex>(alpha.begin(), alpha.end()));
  std::vector<double> rho;
  field_density(basis, f, rho);
  double s = 0.0;
  for (double r : rho) s += r * r;
  return s * basis.spacing();
}

std::vector<TailProbability> l4_tail_probabilities(const SampleBatch& batch, const SpectralBasis& basis,
                                                   std::span<const double> cuts, double radius) {
  detail::require(radius >= 0.0, "L4 radius must be nonnegative");
  const int n = batch.size(), d = batch.d, ng = basis.n_grid();
  const double h = basis.spacing();
  const double r4 = radius * radius * radius * radius;
  // cut c keeps modes j with lambda_j > cut: process cuts from the top down
  std::vector<int> order(cuts.size());
  for (std::size_t c = 0; c < cuts.size(); ++c) order[c] = static_cast<int>(c);
  std::sort(order.begin(), order.end(), [&](int a, int b) { return cuts[a] > cuts[b]; });
  std::vector<std::vector<double>> hit(cuts.size(), std::vector<double>(n, 0.0));
  std::vector<double> re(ng), im(ng);
  for (int i = 0; i < n; ++i) {
    std::fill(re.begin(), re.end(), 0.0);
    std::fill(im.begin(), im.end(), 0.0);
    const auto a = batch.row(i);
    int j = d - 1;
    for (int c : order) {
      for (; j >= 0 && basis.eigenvalues[j] > cuts[c]; --j) {
        const auto u = basis.mode(j);
        const double ar = a[j].real(), ai = a[j].imag();
        for (int x = 0; x < ng; ++x) {
          re[x] += ar * u[x];
          im[x] += ai * u[x];
        }
      }
      double s = 0.0;
      for (int x = 0; x < ng; ++x) {
        const double r = re[x] * re[x] + im[x] * im[x];
        s += r * r;
      }
      hit[c][i] = s * h >= r4 ? 1.0 : 0.0;
    }
  }
  const auto w = batch.weights();
  const auto summary = summarize_log_weights(batch.log_weights);
  std::vector<TailProbability> out(cuts.size());
  for (std::size_t c = 0; c < cuts.size(); ++c) {
    const auto e = weighted_mean(hit[c], w);
    auto& t = out[c];
    for (int i = 0; i < n; ++i) t.hits += hit[c][i] > 0.0 && w[i] > 0.0 ? 1 : 0;
    if (t.hits == 0) {
      t.one_sided = true;
      t.value = rule_of_three(static_cast<long>(std::floor(summary.ess)));
      t.stderr_ = 0.0;
    } else {
      t.value = e.value;
      t.stderr_ = e.stderr_;
    }
  }
  return out;
}

TailProbability l4_tail_probability(const SampleBatch& batch, const SpectralBasis& basis, double cut, double radius) {
  const double cuts[] = {cut};
  return l4_tail_probabilities(batch, basis, cuts, radius)[0];
}

TailProbability l4_tail_probability(const SpectralBasis& basis, double cutoff, double cut, double radius, double m,
                                    int n, std::uint64_t seed, const McmcParams& mcmc) {
  MeasureSpec spec;
  spec.kind = MeasureKind::sphere;
  spec.m = m;
  spec.cutoff = cutoff;
  spec.validate(basis);
  const auto b = sample_sphere(sphere_target(spec, basis), basis, nullptr, n, seed, mcmc);
  return l4_tail_probability(b, basis, cut, radius);
}

Estimate l4_exponential_moment(const SampleBatch& batch, const SpectralBasis& basis) {
  std::vector<double> v(batch.size());
  for (int i = 0; i < batch.size(); ++i) v[i] = std::exp(l4_norm4(basis, batch.row(i)));
  return weighted_mean(v, batch.weights());
}

}  // namespace mfbose
