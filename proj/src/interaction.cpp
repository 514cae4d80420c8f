#include "mfbose/interaction.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Dense>

#include "mfbose/error.hpp"
#include "mfbose/simd/kernels.hpp"

namespace mfbose {

std::vector<double> kernel_matrix(const SpectralBasis& basis, const InteractionPotential& w) {
  const int n = basis.n_grid();
  const double h = basis.spacing();
  detail::require(n >= 1, "basis has no grid");
  if ((n - 1) * h > w.max_offset() * (1.0 + 1e-12))
    throw PreconditionError("potential undefined on grid offsets up to " + std::to_string((n - 1) * h));
  std::vector<double> row(static_cast<std::size_t>(n));
  for (int k = 0; k < n; ++k) row[k] = w(k * h);
  std::vector<double> kmat(static_cast<std::size_t>(n) * n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) kmat[static_cast<std::size_t>(i) * n + j] = row[std::abs(i - j)];
  return kmat;
}

double interaction_energy(const Field& field, const SpectralBasis& basis, std::span<const double> kernel) {
  const auto n = static_cast<std::size_t>(basis.n_grid());
  detail::require(kernel.size() == n * n, "kernel matrix does not match the grid");
  std::vector<double> rho;
  field_density(basis, field, rho);
  const double h = basis.spacing();
  return h * h * simd::kernels().quadratic_form(kernel.data(), rho.data(), n);
}

double interaction_energy(const Field& field, const SpectralBasis& basis, const InteractionPotential& w) {
  const auto kernel = kernel_matrix(basis, w);
  return interaction_energy(field, basis, kernel);
}

PairInteraction::PairInteraction(const SpectralBasis& basis, int d, const InteractionPotential& w) : d_(d) {
  detail::require(d >= 1 && d <= basis.n_modes(), "pair interaction needs 1 <= d <= resolved modes");
  for (int i = 0; i < d; ++i)
    for (int k = i; k < d; ++k) {
      pair_i_.push_back(i);
      pair_k_.push_back(k);
    }
  const int np = pairs();
  m_.assign(static_cast<std::size_t>(np) * np, 0.0);
  if (w.kind == PotentialKind::tabulated)
    zero_ = std::all_of(w.table_w.begin(), w.table_w.end(), [](double v) { return v == 0.0; });
  else
    zero_ = w.depth == 0.0;
  if (zero_) return;

  const int n = basis.n_grid();
  const double h = basis.spacing();
  const auto kvec = kernel_matrix(basis, w);
  using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  Eigen::Map<const RowMat> kmat(kvec.data(), n, n);
  RowMat prod(np, n);
  for (int p = 0; p < np; ++p) {
    const auto ui = basis.mode(pair_i_[p]);
    const auto uk = basis.mode(pair_k_[p]);
    for (int x = 0; x < n; ++x) prod(p, x) = ui[x] * uk[x];
  }
  const Eigen::MatrixXd kp = kmat * prod.transpose();
  const Eigen::MatrixXd mm = (h * h) * (prod * kp);
  double scale = 0.0, asym = 0.0;
  for (int p = 0; p < np; ++p)
    for (int q = 0; q < np; ++q) {
      scale = std::max(scale, std::abs(mm(p, q)));
      asym = std::max(asym, std::abs(mm(p, q) - mm(q, p)));
    }
  symmetry_residual_ = scale > 0.0 ? asym / scale : 0.0;
  for (int p = 0; p < np; ++p)
    for (int q = 0; q < np; ++q) m_[static_cast<std::size_t>(p) * np + q] = 0.5 * (mm(p, q) + mm(q, p));
}

int PairInteraction::pair_index(int i, int k) const {
  if (i > k) std::swap(i, k);
  // pairs are laid out row by row: (0,0..d-1), (1,1..d-1), ...
  return i * d_ - i * (i - 1) / 2 + (k - i);
}

double PairInteraction::energy(std::span<const Complex> alpha) const {
  detail::require(static_cast<int>(alpha.size()) >= d_, "field has fewer coefficients than the interaction");
  if (zero_) return 0.0;
  const int np = pairs();
  double cbuf[1024];
  std::vector<double> heap;
  double* c = cbuf;
  if (np > 1024) {
    heap.resize(np);
    c = heap.data();
  }
  for (int p = 0; p < np; ++p) {
    const Complex a = alpha[pair_i_[p]], b = alpha[pair_k_[p]];
    const double re = a.real() * b.real() + a.imag() * b.imag();
    c[p] = pair_i_[p] == pair_k_[p] ? re : 2.0 * re;
  }
  return simd::kernels().quadratic_form(m_.data(), c, static_cast<std::size_t>(np));
}

double PairInteraction::w(int i, int j, int k, int l) const {
  if (zero_) return 0.0;
  return m_[static_cast<std::size_t>(pair_index(i, k)) * pairs() + pair_index(j, l)];
}

WTensor wmatrix_elements(const SpectralBasis& basis, int d, const InteractionPotential& w) {
  const PairInteraction pi(basis, d, w);
  if (pi.symmetry_residual() > 1e-8)
    throw DiagnosticError("two-body tensor symmetry residual " + std::to_string(pi.symmetry_residual()) +
                          " exceeds 1e-8; refine the grid");
  WTensor t;
  t.d = d;
  t.values.resize(static_cast<std::size_t>(d) * d * d * d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j)
      for (int k = 0; k < d; ++k)
        for (int l = 0; l < d; ++l) {
          const double v = 0.25 * (pi.w(i, j, k, l) + pi.w(j, i, l, k) + pi.w(k, l, i, j) + pi.w(k, j, i, l));
          t.values[((static_cast<std::size_t>(i) * d + j) * d + k) * d + l] = v;
        }
  t.symmetry_residual = pi.symmetry_residual();
  return t;
}

}  // namespace mfbose
