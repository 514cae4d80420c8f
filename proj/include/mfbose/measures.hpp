#pragma once

#include <complex>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mfbose/interaction.hpp"
#include "mfbose/massdist.hpp"
#include "mfbose/potential.hpp"
#include "mfbose/spectral.hpp"
#include "mfbose/stats.hpp"

namespace mfbose {

enum class MeasureKind { free_gaussian, penalized, conditioned, sphere, interacting };

std::string measure_kind_name(MeasureKind kind);
MeasureKind parse_measure_kind(const std::string& name);

/// How mass enters the sphere measures.
///   radius: fields live on {||u||^2 = m}, density exp(-<u,hu> - (g/2m) F(u))
///   unit:   fields live on {||v||^2 = 1}, density exp(-m <v,hv> - (g m/2) F(v))
/// The two are the same measure under u = sqrt(m) v.
enum class SphereConvention { radius, unit };

std::string convention_name(SphereConvention c);
SphereConvention parse_convention(const std::string& name);

struct MeasureSpec {
  MeasureKind kind = MeasureKind::free_gaussian;
  double m = 0.0;    // mass; all kinds except free_gaussian
  double eps = 0.0;  // penalized only
  double g = 0.0;    // sphere / interacting; the sign selects focusing (g < 0 with w >= 0) or defocusing
  double cutoff = 0.0;  // Lambda; ignored when n_modes > 0
  int n_modes = 0;      // d = dim E_Lambda, overrides cutoff
  SphereConvention convention = SphereConvention::radius;
  MeasureKind interacting_base = MeasureKind::sphere;  // conditioned or sphere
  std::optional<InteractionPotential> potential;

  /// d resolved against a basis; throws PreconditionError when Lambda > lambda_max.
  int dimension(const SpectralBasis& basis) const;
  /// Checks that exactly the parameters required by `kind` are present.
  void validate(const SpectralBasis& basis) const;
  std::string describe() const;
};

/// Metropolis tuning. One sweep = d proposals.
struct McmcParams {
  int n_chains = 4;
  int burn_in_sweeps = 200;
  int thinning = 0;  // proposals between stored samples, 0 means d
  double initial_step = 0.6;  // initial kappa
  bool adapt = true;
};

struct SampleOptions {
  McmcParams mcmc;
  bool strict = false;
  /// Density f_Lambda of the complementary mass, required by the conditioned kind
  /// (without it the conditioned kind falls back to the sphere chain).
  const MassDensity* complement = nullptr;
  /// Prebuilt pair interaction on the d modes; built from spec.potential when null.
  const PairInteraction* interaction = nullptr;
  /// Exponential tilt theta of the proposal for penalized/conditioned draws
  /// (|alpha_j|^2 ~ Exp(lambda_j - theta)); NaN picks a saddle point automatically.
  double tilt = std::numeric_limits<double>::quiet_NaN();
};

struct SampleBatch {
  MeasureSpec spec;
  int d = 0;
  std::uint64_t seed = 0;
  std::vector<Complex> coeffs;  // n x d, row-major
  std::vector<double> log_weights;
  double ess = 0.0;
  double max_weight_fraction = 0.0;
  double acceptance_rate = std::numeric_limits<double>::quiet_NaN();  // MCMC kinds only
  double tilt = 0.0;
  /// Mean of exp(log_weights): for free-draw kinds the normalization of the measure
  /// relative to mu_0 on E_Lambda (z_{eps,m} for penalized, f_0(m) for conditioned).
  Estimate log_normalization;
  std::vector<std::string> warnings;

  int size() const { return static_cast<int>(log_weights.size()); }
  std::span<const Complex> row(int i) const { return {coeffs.data() + static_cast<std::size_t>(i) * d, static_cast<std::size_t>(d)}; }
  Field field(int i) const;
  double mass(int i) const;
  std::vector<double> weights() const { return normalized_weights(log_weights); }
};

/// Draws n fields from the measure described by `spec`.
SampleBatch sample_measure(const MeasureSpec& spec, const SpectralBasis& basis, int n, std::uint64_t seed,
                           const SampleOptions& options = {});

/// Target of a sphere chain: exp(-beta_kin <u,hu> - beta_int F(u)) on {||u||^2 = radius2}.
struct SphereTarget {
  int d = 0;
  double radius2 = 1.0;
  double beta_kin = 1.0;
  double beta_int = 0.0;
};

SphereTarget sphere_target(const MeasureSpec& spec, const SpectralBasis& basis);

/// Metropolis chains on the sphere (pairwise mass rotation plus phase refresh).
/// The rotation angle of pair (a, b) carrying mass t is uniform in +-kappa / sqrt(t beta |l_a - l_b|)
/// (capped at pi/2) and kappa is adapted during burn-in. Unit log-weights; acceptance
/// below 0.1, or above 0.9 while kappa is below its cap, raises DiagnosticError.
SampleBatch sample_sphere(const SphereTarget& target, const SpectralBasis& basis, const PairInteraction* interaction,
                          int n, std::uint64_t seed, const McmcParams& mcmc);

/// log of the (unnormalized) sphere density ratio used by the chain, exposed for tests.
double sphere_log_density(const SphereTarget& target, const SpectralBasis& basis, const PairInteraction* interaction,
                          std::span<const Complex> alpha);

// ---------------------------------------------------------------------------
// Estimators

struct DensityMatrixEstimate {
  int k = 1;
  int d = 0;
  Eigen::MatrixXcd matrix;   // d^k x d^k, index (i_1 .. i_k) row-major
  Eigen::MatrixXd stderr_;   // |complex| batch-means standard error per entry
  int n_samples = 0;
  double ess = 0.0;
  double min_eigenvalue = 0.0;
  double hermitian_residual = 0.0;
};

/// Self-normalized estimate of int |u^{(x)k}><u^{(x)k}| dmu, k in {1, 2}.
/// Throws DiagnosticError when ess < 100.
DensityMatrixEstimate estimate_dm(const SampleBatch& batch, int k, int n_batches = 20);

/// Weighted mean of |alpha_j|^2 for every mode j.
std::vector<Estimate> occupation_means(const SampleBatch& batch, int n_batches = 20);

/// <|a_j|^2 |a_k|^2> - <|a_j|^2><|a_k|^2> with a jackknife error over contiguous batches.
Estimate occupation_covariance(const SampleBatch& batch, int j, int k, int n_batches = 20);

struct PartitionEstimate {
  Estimate z;
  double ess = 0.0;
  double max_weight_fraction = 0.0;
  std::vector<std::string> warnings;
};

/// z^r_m = < exp(-c F(u)) > over a g = 0 batch, with c = g/(2m) (radius) or g m/2 (unit).
PartitionEstimate classical_relative_partition(const SampleBatch& batch, double g, const PairInteraction& interaction,
                                               bool strict = false);

enum class EntropyMethod { reweight, thermodynamic };

struct EntropyOptions {
  EntropyMethod method = EntropyMethod::thermodynamic;
  int nodes = 8;         // Gauss-Legendre nodes on the coupling path
  int n_samples = 4000;  // per node
  std::uint64_t seed = 1;
  McmcParams mcmc;
  int n_batches = 20;
};

/// H_cl(nu, sigma) for two sphere measures on the same support.
///
/// With E = beta_kin <u,hu> + beta_int F and Delta E = E_nu - E_sigma:
///   H = -<Delta E>_nu + log(z_sigma / z_nu)
/// The log ratio is int_0^1 <Delta E>_t dt along the linear path E_t = E_sigma + t Delta E (thermodynamic) or
/// log <exp(Delta E)>_nu from the numerator batch alone (reweight; jackknife errors).
Estimate classical_relative_entropy(const SampleBatch& numerator, const MeasureSpec& numerator_spec,
                                    const MeasureSpec& denominator_spec, const SpectralBasis& basis,
                                    const PairInteraction* interaction, const EntropyOptions& options = {});

struct MassGap {
  Estimate delta;      // <<v,hv>>_{rho_{m1,0}} - <<v,hv>>_{rho_{m2,g}}
  Estimate kinetic_1;  // under rho_{m1,0}
  Estimate kinetic_2;  // under rho_{m2,g}
  SampleBatch batch_2;  // rho_{m2,g} draws (numerator of the entropy bound)
  MeasureSpec spec_1, spec_2;
};

/// Two unit-sphere chains on the lowest d modes.
MassGap delta_mass_gap(double m1, double m2, double g, const SpectralBasis& basis, int d,
                       const PairInteraction* interaction, int n, std::uint64_t seed, const McmcParams& mcmc = {});

struct TailProbability {
  double value = 0.0;
  double stderr_ = 0.0;
  bool one_sided = false;  // no hits: value is the rule-of-three upper bound
  int hits = 0;
};

/// P(||P_cut^perp u||_{L^4} > R) under a batch on the first d modes, where the
/// projection keeps resolved modes with lambda_j > cut.
TailProbability l4_tail_probability(const SampleBatch& batch, const SpectralBasis& basis, double cut, double radius);

/// Same for several cuts on one batch (common random numbers).
std::vector<TailProbability> l4_tail_probabilities(const SampleBatch& batch, const SpectralBasis& basis,
                                                   std::span<const double> cuts, double radius);

/// Draws mu_{0,m} on every resolved mode with lambda_j <= cutoff (sphere chain), then
/// estimates the tail probability above `cut`.
TailProbability l4_tail_probability(const SpectralBasis& basis, double cutoff, double cut, double radius, double m,
                                    int n, std::uint64_t seed, const McmcParams& mcmc = {});

/// <exp(||u||_{L^4}^4)> over a batch.
Estimate l4_exponential_moment(const SampleBatch& batch, const SpectralBasis& basis);

/// ||u||_{L^4}^4 of a field by grid quadrature.
double l4_norm4(const SpectralBasis& basis, std::span<const Complex> alpha);

// ---------------------------------------------------------------------------
// Persistence

void save_batch(const SampleBatch& batch, const std::string& path);
SampleBatch load_batch(const std::string& path);
/// Columns: sample, re_1, im_1, ..., re_d, im_d, log_weight.
void export_batch_csv(const SampleBatch& batch, const std::string& path);

}  // namespace mfbose
