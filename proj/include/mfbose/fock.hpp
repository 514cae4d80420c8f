#pragma once

#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mfbose/interaction.hpp"

namespace mfbose {

// ---------------------------------------------------------------------------
// Free canonical ensembles on a finite mode set

/// log Z_n for n = 0..N of non-interacting bosons on `rates` at temperature T,
/// by Z_n = (1/n) sum_{k=1}^n Z_1(k/T) Z_{n-k} in the log domain.
std::vector<double> free_canonical_partition(std::span<const double> rates, int N, double T);

struct CanonicalEnsembleData {
  std::vector<double> rates;
  int N = 0;
  double T = 1.0;
  std::vector<double> logZ;               // n = 0..N
  std::vector<double> occupations;        // <n_j>
  Eigen::MatrixXd pair_occupations;       // <n_j n_k>, empty unless requested
};

/// Occupations from P(n_j >= k) = e^{-k l_j/T} Z_{N-k} / Z_N; pair occupations from
/// P(n_j >= a, n_k >= b) for j != k and sum_k (2k - 1) P(n_j >= k) on the diagonal.
CanonicalEnsembleData free_canonical_occupations(std::span<const double> rates, int N, double T, bool pairs = true);

/// Brute-force sum over every occupation sequence (tests and acceptance oracles).
CanonicalEnsembleData enumerate_canonical(std::span<const double> rates, int N, double T);

/// max_j |<n_j>_N - <n_j>_{N+1}| (k = 1) or max_{j,l} |<n_j n_l>_N - <n_j n_l>_{N+1}| (k = 2).
double canonical_shift_bound(std::span<const double> rates, int N, double T, int k = 1);

struct ShiftSweep {
  std::vector<int> N;
  std::vector<double> max_difference;
  double growth_exponent = 0.0;  // slope of log max_difference against log N
};

ShiftSweep canonical_shift_sweep(std::span<const double> rates, double T, int N_max, int k = 1);

// ---------------------------------------------------------------------------
// Grand-canonical (quasi-free) states

/// nu > -lambda_1 with sum_j 1 / (e^{(l_j + nu)/T} - 1) = N_target, by bisection.
double grand_canonical_mu(std::span<const double> rates, double N_target, double T);

struct GrandCanonicalData {
  double nu = 0.0;
  double T = 1.0;
  std::vector<double> occupations;  // Bose-Einstein
  Eigen::MatrixXd pair_occupations;  // Wick: <n_j><n_k> + delta_jk <n_j>(1 + <n_j>)
};

GrandCanonicalData grand_canonical_occupations(std::span<const double> rates, double nu, double T);

// ---------------------------------------------------------------------------
// Relaxed state and factorization

struct SectorWeights {
  std::vector<double> a;  // a_N for N = 0..N_max
  double m = 0.0, T = 1.0, eps = 0.0;
  double log_z_total = 0.0;  // log sum_N Z_N exp(-(N/T - m)^2 / eps)
  /// sum_N a_N (N/T)^k for k = 0..4
  std::vector<double> moments;
};

/// a_N proportional to Z_N exp(-(N/T - m)^2 / eps). Throws PreconditionError when N_max
/// is below mT + 10 sqrt(eps T^2 / 2) or the neglected tail exceeds 1e-12.
SectorWeights relaxed_sector_weights(std::span<const double> rates, double m, double T, double eps, int N_max);

struct FactorizationCoeffs {
  int n_low = 0, n_high = 0;  // modes with lambda <= split / > split
  int N = 0;
  double T = 1.0, delta = 0.0;
  int M = 0;                  // ceil(N - T delta)
  std::vector<double> c;      // c_n = Z^-_n Z^+_{N-n} / Z_N, n = 0..N
  double D_M = 0.0;           // sum_{n >= M} c_n
  std::vector<double> dn;     // c_n / D_M for n >= M, else 0
  double sector_residual = 0.0;  // |log sum_n Z^-_n Z^+_{N-n} - log Z_N|
};

/// Throws PreconditionError when no mode lies at or below the split, or T delta >= N.
FactorizationCoeffs factorization_coeffs(std::span<const double> rates, double split, int N, double T, double delta);

// ---------------------------------------------------------------------------
// Interacting sectors (dense)

/// Occupation sequences (n_1..n_d) with sum N in lexicographically decreasing order.
class OccupationBasis {
 public:
  OccupationBasis() = default;
  OccupationBasis(int d, int N);

  int modes() const { return d_; }
  int particles() const { return N_; }
  int size() const { return static_cast<int>(states_.size()) / std::max(d_, 1); }
  std::span<const int> state(int i) const { return {states_.data() + static_cast<std::size_t>(i) * d_, static_cast<std::size_t>(d_)}; }
  /// Index of an occupation sequence, -1 when absent.
  int index(std::span<const int> n) const;

 private:
  int d_ = 0, N_ = 0;
  std::vector<int> states_;
  std::vector<std::vector<long>> ways_;  // ways_[p][r]: sequences of r particles on modes p..d-1
};

/// C(N + d - 1, N) without overflow for the sizes used here.
double sector_dimension(int d, int N);

struct ManyBodyOperator {
  OccupationBasis basis;
  Eigen::MatrixXd matrix;
  int N = 0, d = 0;
  double g = 0.0;
  double hermitian_residual = 0.0;
  std::string coupling_convention = "g/N";
};

/// H = sum_j l_j n_j + (g/N) (1/2) sum_{ijkl} W[i,j,k,l] a+_i a+_j a_l a_k on the N-particle
/// sector of d modes. Throws PreconditionError above 2e4 states.
ManyBodyOperator build_interacting_hamiltonian(std::span<const double> rates, const WTensor& W, int N, double g);

struct ThermalState {
  double T = 1.0;
  Eigen::VectorXd energies;
  Eigen::MatrixXd vectors;
  Eigen::VectorXd probabilities;
  Eigen::VectorXd log_probabilities;
  double logZ = 0.0;

  Eigen::MatrixXd density() const;
};

ThermalState thermal_state(const ManyBodyOperator& H, double T);

/// Gamma^(k) for k = 1 (d x d) or 2 (d^2 x d^2, index i*d + j) of a state on `basis`,
/// with trace C(N, k).
Eigen::MatrixXd reduced_dm(const Eigen::MatrixXd& state, const OccupationBasis& basis, int k);

/// Tr[w Gamma^(2)] = sum W[i,j,k,l] Gamma^(2)[(k,l),(i,j)].
double pair_expectation(const WTensor& W, const Eigen::MatrixXd& gamma2);

/// Tr[Gamma (log Gamma - log Xi)]. Throws PreconditionError when Gamma has weight on a
/// direction where Xi is below the 1e-300 floor.
double quantum_relative_entropy(const Eigen::MatrixXd& gamma, const Eigen::MatrixXd& xi);
/// Same against a thermal state, with log Xi taken from its energies (no floor needed).
double quantum_relative_entropy(const Eigen::MatrixXd& gamma, const ThermalState& xi);

/// Tr[H Gamma] + T Tr[Gamma log Gamma].
double free_energy(const Eigen::MatrixXd& gamma, const ManyBodyOperator& H, double T);

// ---------------------------------------------------------------------------
// Cannon bijection

struct CannonMatching {
  std::vector<int> g;
  int N = 0;
  std::vector<std::vector<int>> domain;  // S_N
  std::vector<int> image;                // index into S_{N+1}
  std::vector<int> increment;            // coordinate j(n)
  std::vector<std::vector<int>> codomain;  // S_{N+1}
};

/// S_N = {n : 0 <= n_j <= g_j, sum n = N} for sum g = 2N + 1, and a bijection
/// S_N -> S_{N+1} of the form n -> n + e_j found by maximum bipartite matching.
/// Throws InternalError when the matching is not perfect.
CannonMatching cannon_match(std::span<const int> g, int N);

}  // namespace mfbose
