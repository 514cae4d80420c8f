#pragma once

#include <complex>
#include <span>
#include <vector>

#include "mfbose/potential.hpp"
#include "mfbose/spectral.hpp"

namespace mfbose {

/// Toeplitz matrix K_ij = w(x_i - x_j) on the interior grid of a basis, row-major.
/// Throws PreconditionError when w is undefined on some grid offset.
std::vector<double> kernel_matrix(const SpectralBasis& basis, const InteractionPotential& w);

/// F(u) = int int |u(x)|^2 w(x - y) |u(y)|^2 dx dy by grid quadrature (rho^T K rho h^2).
double interaction_energy(const Field& field, const SpectralBasis& basis, const InteractionPotential& w);

/// Same, from a precomputed kernel matrix.
double interaction_energy(const Field& field, const SpectralBasis& basis, std::span<const double> kernel);

/// Pair energy restricted to the first d modes.
///
/// With c_p the real coefficients of |u|^2 = sum_p c_p u_i u_k over pairs p = (i <= k),
/// F = c^T M c with M_pq = int int u_i u_k (x) w(x - y) u_j u_l (y). M is built once by
/// grid quadrature, so evaluating F costs O(d^4 / 4) instead of O(n^2).
class PairInteraction {
 public:
  PairInteraction() = default;
  PairInteraction(const SpectralBasis& basis, int d, const InteractionPotential& w);

  int modes() const { return d_; }
  int pairs() const { return static_cast<int>(pair_i_.size()); }
  bool is_zero() const { return zero_; }

  double energy(std::span<const Complex> alpha) const;
  double energy(const Field& field) const { return energy(field.coeffs); }

  /// W[i,j,k,l] = int int u_i(x) u_j(y) w(x - y) u_k(x) u_l(y), 0-based.
  double w(int i, int j, int k, int l) const;
  /// Largest |W - W'| over the symmetry partners before averaging.
  double symmetry_residual() const { return symmetry_residual_; }
  const std::vector<double>& pair_matrix() const { return m_; }

 private:
  int pair_index(int i, int k) const;

  int d_ = 0;
  bool zero_ = true;
  std::vector<int> pair_i_, pair_k_;
  std::vector<double> m_;  // pairs x pairs, row-major
  double symmetry_residual_ = 0.0;
};

/// Dense W tensor over d modes, index ((i*d + j)*d + k)*d + l.
struct WTensor {
  int d = 0;
  std::vector<double> values;
  double symmetry_residual = 0.0;

  double operator()(int i, int j, int k, int l) const { return values[((i * d + j) * d + k) * d + l]; }
};

/// Two-body matrix elements on the lowest d modes, symmetrized over
/// (i,j,k,l) -> (j,i,l,k), (k,l,i,j), (k,j,i,l). Throws DiagnosticError when the
/// pre-averaging residual exceeds 1e-8 relative to max |W|.
WTensor wmatrix_elements(const SpectralBasis& basis, int d, const InteractionPotential& w);

}  // namespace mfbose
