#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "mfbose/error.hpp"
#include "mfbose/fock.hpp"
#include "mfbose/rng.hpp"

using namespace mfbose;

namespace {

double rel(double a, double b) { return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-300}); }

const SpectralBasis& box() {
  static const SpectralBasis b = solve_spectrum(kInfinity, {1.0, 256, Scheme::fd4}, 8);
  return b;
}

std::vector<double> box_rates(int d) { return {box().eigenvalues.begin(), box().eigenvalues.begin() + d}; }

}  // namespace

TEST(Canonical, TrivialCases) {
  const std::vector<double> r{1.0, 2.0};
  EXPECT_EQ(free_canonical_partition(r, 0, 1.0)[0], 0.0);
  const std::vector<double> one{2.5};
  const auto z = free_canonical_partition(one, 7, 0.7);
  for (int n = 0; n <= 7; ++n) EXPECT_NEAR(z[n], -n * 2.5 / 0.7, 1e-12 * (1.0 + n));
  const auto c = free_canonical_occupations(one, 7, 0.7);
  EXPECT_NEAR(c.occupations[0], 7.0, 1e-12);
  EXPECT_NEAR(c.pair_occupations(0, 0), 49.0, 1e-11);
}

TEST(Canonical, FifteenStateEnumeration) {
  const std::vector<double> r{1.0, 2.0, 3.0};
  EXPECT_EQ(OccupationBasis(3, 4).size(), 15);
  double z = 0.0;
  for (int a = 0; a <= 4; ++a)
    for (int b = 0; a + b <= 4; ++b) z += std::exp(-(a * 1.0 + b * 2.0 + (4 - a - b) * 3.0));
  EXPECT_LE(rel(free_canonical_partition(r, 4, 1.0)[4], std::log(z)), 1e-13);
}

TEST(Canonical, RecursionMatchesEnumeration) {
  Philox rng(5, 0);
  for (int d = 1; d <= 4; ++d)
    for (int N = 0; N <= 6; ++N)
      for (double T : {0.5, 1.0, 2.0}) {
        std::vector<double> r;
        for (int j = 0; j < d; ++j) r.push_back(0.3 + 3.0 * rng.uniform());
        const auto a = free_canonical_occupations(r, N, T);
        const auto b = enumerate_canonical(r, N, T);
        for (int n = 0; n <= N; ++n) EXPECT_LE(std::abs(a.logZ[n] - b.logZ[n]), 1e-12 * std::max(1.0, std::abs(b.logZ[n])));
        for (int j = 0; j < d; ++j) {
          EXPECT_LE(std::abs(a.occupations[j] - b.occupations[j]), 1e-12 * std::max(1e-300, b.occupations[j]) + 1e-300);
          for (int k = 0; k < d; ++k)
            EXPECT_LE(std::abs(a.pair_occupations(j, k) - b.pair_occupations(j, k)),
                      1e-12 * b.pair_occupations(j, k) + 1e-300);
        }
        double s = std::accumulate(a.occupations.begin(), a.occupations.end(), 0.0);
        EXPECT_NEAR(s, N, 1e-9 * std::max(N, 1));
      }
}

TEST(Canonical, CorrelationInequalityAndMonotonicity) {
  const auto r = box_rates(6);
  for (int N : {1, 3, 10, 40})
    for (double T : {5.0, 20.0, 80.0}) {
      const auto c = free_canonical_occupations(r, N, T);
      for (int j = 0; j < 6; ++j)
        for (int k = j + 1; k < 6; ++k)
          EXPECT_LE(c.pair_occupations(j, k), c.occupations[j] * c.occupations[k] * (1.0 + 1e-12));
      const auto c1 = free_canonical_occupations(r, N + 1, T, false);
      for (int j = 0; j < 6; ++j) EXPECT_GE(c1.occupations[j], c.occupations[j] * (1.0 - 1e-12));
    }
}

TEST(Canonical, ResourceGuard) {
  const std::vector<double> r{1.0};
  EXPECT_THROW(free_canonical_partition(r, 2000000, 1.0), PreconditionError);
}

TEST(Canonical, ShiftBound) {
  const std::vector<double> one{1.7};
  for (int N : {0, 3, 12}) EXPECT_NEAR(canonical_shift_bound(one, N, 1.3), 1.0, 1e-12);
  const std::vector<double> r{0.5, 1.1, 2.0};
  for (int N = 0; N <= 5; ++N) {
    const auto a = enumerate_canonical(r, N, 1.0);
    const auto b = enumerate_canonical(r, N + 1, 1.0);
    double m = 0.0;
    for (int j = 0; j < 3; ++j) m = std::max(m, std::abs(a.occupations[j] - b.occupations[j]));
    EXPECT_NEAR(canonical_shift_bound(r, N, 1.0), m, 1e-12);
  }
  const auto sweep = canonical_shift_sweep(box_rates(6), 30.0, 40);
  EXPECT_EQ(sweep.N.size(), 40u);
  EXPECT_LE(*std::max_element(sweep.max_difference.begin(), sweep.max_difference.end()), 1.0 + 1e-12);
}

TEST(GrandCanonical, SingleModeInversion) {
  const std::vector<double> one{3.0};
  for (double N : {0.01, 1.0, 7.5, 300.0}) {
    const double nu = grand_canonical_mu(one, N, 2.0);
    EXPECT_LE(rel(nu, 2.0 * std::log1p(1.0 / N) - 3.0), 1e-10);
  }
}

TEST(GrandCanonical, ConservationAndBounds) {
  const auto r = box_rates(8);
  double prev = kInfinity;
  for (double N : {0.5, 1.0, 4.0, 16.0, 64.0}) {
    const double nu = grand_canonical_mu(r, N, 10.0);
    EXPECT_LT(nu, prev);
    prev = nu;
    const auto g = grand_canonical_occupations(r, nu, 10.0);
    EXPECT_NEAR(std::accumulate(g.occupations.begin(), g.occupations.end(), 0.0), N, 1e-9 * N);
    for (int j = 0; j < 8; ++j) {
      EXPECT_LE(g.occupations[j], 10.0 / (r[j] + nu));
      EXPECT_NEAR(g.pair_occupations(j, j), g.occupations[j] * (1.0 + 2.0 * g.occupations[j]), 1e-12 * (1.0 + g.pair_occupations(j, j)));
    }
  }
  const auto far = grand_canonical_occupations(r, 500.0, 1.0);
  EXPECT_LE(rel(far.occupations[0], std::exp(-(r[0] + 500.0))), 1e-12);
  EXPECT_THROW(grand_canonical_occupations(r, -r[0] - 1.0, 1.0), PreconditionError);
}

TEST(GrandCanonical, DominatesCanonical) {
  const auto r = box_rates(8);
  for (double T : {8.0, 32.0})
    for (int N : {4, 16, 32}) {
      const auto c = free_canonical_occupations(r, N, T, false);
      const auto g = grand_canonical_occupations(r, grand_canonical_mu(r, N, T), T);
      for (int j = 0; j < 8; ++j) EXPECT_LE(c.occupations[j], 40.0 / 1.8 * g.occupations[j]);
    }
}

TEST(Relaxed, LimitsOfThePenalty) {
  const auto r = box_rates(6);
  const double T = 10.0, m = 1.0;
  // eps = 1e4: the penalty moves log a_n by at most (30/T - m)^2 / eps = 4e-4 for n <= 30
  const auto loose = relaxed_sector_weights(r, m, T, 1e4, 7082);
  const auto z = free_canonical_partition(r, 30, T);
  for (int n = 1; n <= 30; ++n) EXPECT_NEAR(std::log(loose.a[n] / loose.a[0]), z[n] - z[0], 4e-4);
  const auto tight = relaxed_sector_weights(r, m, T, 1e-6, 40);
  EXPECT_GT(tight.a[10], 1.0 - 1e-6);
  EXPECT_NEAR(std::accumulate(tight.a.begin(), tight.a.end(), 0.0), 1.0, 1e-12);
  EXPECT_THROW(relaxed_sector_weights(r, m, T, 1.0, 12), PreconditionError);
  const auto mid = relaxed_sector_weights(r, m, T, 0.01, 40);
  EXPECT_NEAR(mid.moments[0], 1.0, 1e-12);
  const auto top = std::max_element(mid.a.begin(), mid.a.end()) - mid.a.begin();
  EXPECT_NEAR(static_cast<double>(top), m * T, 3.0);
}

TEST(Factorization, SectorIdentity) {
  const auto r = box_rates(8);
  for (double split : {r[0], r[2], r[5]}) {
    const auto f = factorization_coeffs(r, split, 30, 20.0, 0.3);
    EXPECT_LE(f.sector_residual, 1e-10);
    EXPECT_NEAR(std::accumulate(f.c.begin(), f.c.end(), 0.0), 1.0, 1e-10);
    EXPECT_NEAR(std::accumulate(f.dn.begin(), f.dn.end(), 0.0), 1.0, 1e-10);
    EXPECT_EQ(f.M, 24);
    for (int n = 0; n < f.M; ++n) EXPECT_EQ(f.dn[n], 0.0);
  }
  const auto all = factorization_coeffs(r, r.back(), 10, 5.0, 0.1);
  EXPECT_NEAR(all.c[10], 1.0, 1e-12);
  for (int n = 0; n < 10; ++n) EXPECT_LE(all.c[n], 1e-12);
  EXPECT_THROW(factorization_coeffs(r, 0.5 * r[0], 10, 5.0, 0.1), PreconditionError);
  EXPECT_THROW(factorization_coeffs(r, r[2], 10, 5.0, 3.0), PreconditionError);
}

TEST(OccupationBasis, IndexInvertsEnumeration) {
  const OccupationBasis b(4, 6);
  EXPECT_EQ(b.size(), 84);
  EXPECT_EQ(sector_dimension(4, 6), 84.0);
  for (int i = 0; i < b.size(); ++i) EXPECT_EQ(b.index(b.state(i)), i);
  const std::vector<int> bad{7, 0, 0, 0};
  EXPECT_EQ(b.index(bad), -1);
}

TEST(Hamiltonian, FreeCaseIsDiagonal) {
  const auto r = box_rates(3);
  const auto w = wmatrix_elements(box(), 3, gaussian_bump(0.2));
  const auto H = build_interacting_hamiltonian(r, w, 5, 0.0);
  for (int i = 0; i < H.basis.size(); ++i) {
    double e = 0.0;
    for (int j = 0; j < 3; ++j) e += r[j] * H.basis.state(i)[j];
    EXPECT_NEAR(H.matrix(i, i), e, 1e-12 * e);
    for (int k = 0; k < H.basis.size(); ++k)
      if (k != i) EXPECT_EQ(H.matrix(i, k), 0.0);
  }
}

TEST(Hamiltonian, TwoParticlesMatchFirstQuantized) {
  const auto& b = box();
  const auto pot = gaussian_bump(0.15, 1.0);
  const double g = 1.7;
  const auto r = box_rates(2);
  const auto H = build_interacting_hamiltonian(r, wmatrix_elements(b, 2, pot), 2, g);
  // symmetric two-particle states on the grid for occupations (2,0), (1,1), (0,2)
  const int n = b.n_grid();
  const double h = b.spacing();
  const auto u0 = b.mode(0), u1 = b.mode(1);
  auto psi = [&](int s, int x, int y) {
    if (s == 0) return u0[x] * u0[y];
    if (s == 1) return (u0[x] * u1[y] + u1[x] * u0[y]) / std::sqrt(2.0);
    return u1[x] * u1[y];
  };
  const int order[3] = {H.basis.index(std::vector<int>{2, 0}), H.basis.index(std::vector<int>{1, 1}),
                        H.basis.index(std::vector<int>{0, 2})};
  const double kin[3] = {2.0 * r[0], r[0] + r[1], 2.0 * r[1]};
  for (int a = 0; a < 3; ++a)
    for (int c = 0; c < 3; ++c) {
      double v = 0.0;
      for (int x = 0; x < n; ++x)
        for (int y = 0; y < n; ++y) v += psi(a, x, y) * pot(b.x[x] - b.x[y]) * psi(c, x, y);
      const double want = (a == c ? kin[a] : 0.0) + 0.5 * g * v * h * h;
      EXPECT_NEAR(H.matrix(order[a], order[c]), want, 1e-9 * std::max(1.0, std::abs(want))) << a << c;
    }
}

TEST(Hamiltonian, SpectrumInvariantUnderRelabeling) {
  const auto r = box_rates(3);
  const auto w = wmatrix_elements(box(), 3, gaussian_bump(0.2));
  const int perm[3] = {2, 0, 1};
  std::vector<double> rp(3);
  WTensor wp = w;
  for (int i = 0; i < 3; ++i) rp[i] = r[perm[i]];
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      for (int k = 0; k < 3; ++k)
        for (int l = 0; l < 3; ++l) wp.values[((i * 3 + j) * 3 + k) * 3 + l] = w(perm[i], perm[j], perm[k], perm[l]);
  const auto e1 = thermal_state(build_interacting_hamiltonian(r, w, 4, 3.0), 1.0).energies;
  const auto e2 = thermal_state(build_interacting_hamiltonian(rp, wp, 4, 3.0), 1.0).energies;
  for (int i = 0; i < e1.size(); ++i) EXPECT_NEAR(e1[i], e2[i], 1e-10 * std::abs(e1[i]));
}

TEST(Hamiltonian, DimensionGuard) {
  const std::vector<double> r(10, 1.0);
  WTensor w;
  EXPECT_THROW(build_interacting_hamiltonian(r, w, 30, 0.0), PreconditionError);
}

TEST(Thermal, FreeCaseMatchesRecursion) {
  const auto r = box_rates(4);
  const auto w = wmatrix_elements(box(), 4, gaussian_bump(0.2));
  for (int N : {1, 3, 6}) {
    const auto H = build_interacting_hamiltonian(r, w, N, 0.0);
    for (double T : {5.0, 40.0}) {
      const auto s = thermal_state(H, T);
      EXPECT_NEAR(s.logZ, free_canonical_partition(r, N, T)[N], 1e-10 * std::max(1.0, std::abs(s.logZ)));
      const auto rho = s.density();
      EXPECT_NEAR(rho.trace(), 1.0, 1e-12);
      const auto g1 = reduced_dm(rho, H.basis, 1);
      const auto occ = free_canonical_occupations(r, N, T, false).occupations;
      EXPECT_NEAR(g1.trace(), N, 1e-10);
      for (int j = 0; j < 4; ++j) EXPECT_NEAR(g1(j, j), occ[j], 1e-10);
      if (N >= 2) EXPECT_NEAR(reduced_dm(rho, H.basis, 2).trace(), N * (N - 1) / 2.0, 1e-10);
    }
  }
}

TEST(Thermal, LowTemperatureProjectsOnGround) {
  const auto r = box_rates(3);
  const auto H = build_interacting_hamiltonian(r, wmatrix_elements(box(), 3, gaussian_bump(0.2)), 3, 2.0);
  const auto e = thermal_state(H, 1.0).energies;
  const double T = (e[1] - e[0]) / 50.0;
  const auto s = thermal_state(H, T);
  EXPECT_LT(s.log_probabilities[1], -49.0);
  EXPECT_GT(s.probabilities[0], 1.0 - 1e-15);
  const Eigen::MatrixXd p = s.vectors.col(0) * s.vectors.col(0).transpose();
  EXPECT_LE((s.density() - p).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Thermal, GibbsVariationalPrinciple) {
  const auto r = box_rates(3);
  const auto H = build_interacting_hamiltonian(r, wmatrix_elements(box(), 3, gaussian_bump(0.2)), 4, 3.0);
  const double T = 20.0;
  const auto s = thermal_state(H, T);
  const auto rho = s.density();
  const double f0 = free_energy(rho, H, T);
  EXPECT_NEAR(f0, -T * s.logZ, 1e-9 * std::abs(f0));
  const int D = H.basis.size();
  Philox rng(8, 0);
  for (int trial = 0; trial < 20; ++trial) {
    Eigen::MatrixXd a(D, D);
    for (int i = 0; i < D; ++i)
      for (int j = 0; j < D; ++j) a(i, j) = rng.normal();
    Eigen::MatrixXd p = rho + 0.05 * (trial + 1) * a * a.transpose() / (a * a.transpose()).trace();
    p /= p.trace();
    EXPECT_GT(free_energy(p, H, T), f0);
  }
}

TEST(Thermal, RelativeEntropyAndFreeEnergyIdentity) {
  const int d = 3, N = 5;
  const double g = 2.0, T = 6.0;
  const auto r = box_rates(d);
  const auto w = wmatrix_elements(box(), d, gaussian_bump(0.2));
  const auto Hg = build_interacting_hamiltonian(r, w, N, g);
  const auto H0 = build_interacting_hamiltonian(r, w, N, 0.0);
  const auto sg = thermal_state(Hg, T), s0 = thermal_state(H0, T);
  const auto rg = sg.density();
  EXPECT_NEAR(quantum_relative_entropy(rg, rg), 0.0, 1e-10);
  EXPECT_NEAR(quantum_relative_entropy(rg, sg), 0.0, 1e-10);
  const double h = quantum_relative_entropy(rg, s0);
  EXPECT_GT(h, 0.0);
  EXPECT_NEAR(h, quantum_relative_entropy(rg, s0.density()), 1e-9);
  const double pair = pair_expectation(w, reduced_dm(rg, Hg.basis, 2));
  EXPECT_NEAR(-(sg.logZ - s0.logZ), h + g / N * pair / T, 1e-8);

  // commuting diagonal states reduce to the classical KL divergence
  Eigen::MatrixXd p = Eigen::MatrixXd::Zero(3, 3), q = Eigen::MatrixXd::Zero(3, 3);
  const double pv[3] = {0.5, 0.3, 0.2}, qv[3] = {0.2, 0.2, 0.6};
  double kl = 0.0;
  for (int i = 0; i < 3; ++i) {
    p(i, i) = pv[i];
    q(i, i) = qv[i];
    kl += pv[i] * std::log(pv[i] / qv[i]);
  }
  EXPECT_NEAR(quantum_relative_entropy(p, q), kl, 1e-14);
  q(0, 0) = 0.0;
  EXPECT_THROW(quantum_relative_entropy(p, q), PreconditionError);
}

TEST(ReducedDm, PureCondensate) {
  const OccupationBasis b(3, 6);
  Eigen::MatrixXd rho = Eigen::MatrixXd::Zero(b.size(), b.size());
  rho(b.index(std::vector<int>{6, 0, 0}), b.index(std::vector<int>{6, 0, 0})) = 1.0;
  const auto g1 = reduced_dm(rho, b, 1);
  Eigen::MatrixXd want = Eigen::MatrixXd::Zero(3, 3);
  want(0, 0) = 6.0;
  EXPECT_LE((g1 - want).cwiseAbs().maxCoeff(), 1e-14);
  EXPECT_NEAR(reduced_dm(rho, b, 2)(0, 0), 15.0, 1e-12);
}

TEST(Cannon, SingleCoordinate) {
  const std::vector<int> g{7};
  const auto m = cannon_match(g, 3);
  ASSERT_EQ(m.domain.size(), 1u);
  EXPECT_EQ(m.codomain[m.image[0]], std::vector<int>{4});
}

TEST(Cannon, AllOnesIsBijective) {
  for (int N = 0; N <= 4; ++N) {
    const std::vector<int> g(2 * N + 1, 1);
    const auto m = cannon_match(g, N);
    double binom = 1.0;
    for (int i = 1; i <= N; ++i) binom = binom * (2 * N + 1 - N + i) / i;
    EXPECT_EQ(static_cast<double>(m.domain.size()), std::round(binom));
    std::set<int> seen(m.image.begin(), m.image.end());
    EXPECT_EQ(seen.size(), m.domain.size());
    for (std::size_t i = 0; i < m.domain.size(); ++i) {
      auto n = m.domain[i];
      const int j = m.increment[i];
      EXPECT_LT(n[j], g[j]);
      ++n[j];
      EXPECT_EQ(n, m.codomain[m.image[i]]);
    }
  }
}

TEST(Cannon, Preconditions) {
  const std::vector<int> g{2, 2};
  EXPECT_THROW(cannon_match(g, 2), PreconditionError);
  const std::vector<int> big(13, 1);
  EXPECT_THROW(cannon_match(big, 6), PreconditionError);
}
