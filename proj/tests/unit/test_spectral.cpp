#include <gtest/gtest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <numbers>

#include "mfbose/error.hpp"
#include "mfbose/rng.hpp"
#include "mfbose/spectral.hpp"

using namespace mfbose;

namespace {

const double kPi2 = std::numbers::pi * std::numbers::pi;

const SpectralBasis& box_basis() {
  static const SpectralBasis b = solve_spectrum(kInfinity, {1.0, 1024, Scheme::fd4}, 64);
  return b;
}

const SpectralBasis& octic_basis() {
  static const SpectralBasis b = solve_spectrum(8.0, {4.0, 2048, Scheme::fd4}, 64);
  return b;
}

Field random_field(int d, std::uint64_t stream) {
  Philox rng(11, stream);
  Field f;
  for (int j = 0; j < d; ++j) f.coeffs.emplace_back(rng.normal(), rng.normal());
  return f;
}

// Quadrature energy with forward differences, independent of the eigen-solver's stencil.
double direct_energy(const SpectralBasis& b, const Field& f) {
  const auto u = evaluate_field(b, f);
  const double h = b.spacing();
  const int n = b.n_grid();
  double e = std::norm(u[0]) / h + std::norm(u[n - 1]) / h;  // wall segments, u = 0 at the walls
  for (int i = 0; i + 1 < n; ++i) e += std::norm(u[i + 1] - u[i]) / h;
  for (int i = 0; i < n; ++i) e += h * b.potential(i) * std::norm(u[i]);
  return e;
}

}  // namespace

TEST(Spectral, DirichletBoxEigenvalues) {
  const auto& b = box_basis();
  EXPECT_NEAR(b.eigenvalues[0], kPi2, 1e-6);
  EXPECT_NEAR(b.eigenvalues[1], 4 * kPi2, 1e-5);
  for (int j = 0; j < b.n_modes(); ++j) {
    const double exact = (j + 1) * (j + 1) * kPi2;
    EXPECT_NEAR(b.eigenvalues[j], exact, 5e-5 * exact) << j;
    // the two-grid estimate bounds the true error within a modest factor
    EXPECT_LT(std::abs(b.eigenvalues[j] - exact), 4 * b.eigenvalue_error[j] + 1e-9 * exact) << j;
  }
}

TEST(Spectral, HarmonicLadder) {
  // High-resolution reference solve, compared with the analytic ladder 2j - 1.
  const auto b = solve_spectrum(2.0, {9.0, 4096, Scheme::fd4}, 12);
  for (int j = 0; j < 12; ++j) EXPECT_NEAR(b.eigenvalues[j], 2.0 * j + 1.0, 1e-6) << j;
  for (int j = 1; j < 12; ++j) EXPECT_NEAR(b.eigenvalues[j] - b.eigenvalues[j - 1], 2.0, 1e-6);
}

TEST(Spectral, SecondOrderSchemeConverges) {
  const auto coarse = solve_spectrum(kInfinity, {1.0, 256, Scheme::fd2}, 8);
  const auto fine = solve_spectrum(kInfinity, {1.0, 1024, Scheme::fd2}, 8);
  const double e_coarse = std::abs(coarse.eigenvalues[7] - 64 * kPi2);
  const double e_fine = std::abs(fine.eigenvalues[7] - 64 * kPi2);
  EXPECT_NEAR(e_coarse / e_fine, 16.0, 1.0);
}

TEST(Spectral, OrthonormalityAndResidual) {
  for (const auto* b : {&box_basis(), &octic_basis()}) {
    EXPECT_LE(b->max_relative_residual, 1e-6);
    for (int i = 0; i < b->n_modes(); ++i) {
      for (int j = 0; j <= i; ++j) {
        double ip = 0.0;
        const auto ui = b->mode(i), uj = b->mode(j);
        for (int k = 0; k < b->n_grid(); ++k) ip += b->quad_weights[k] * ui[k] * uj[k];
        EXPECT_NEAR(ip, i == j ? 1.0 : 0.0, 1e-8);
      }
    }
    for (int j = 1; j < b->n_modes(); ++j) EXPECT_GT(b->eigenvalues[j], b->eigenvalues[j - 1]);
    EXPECT_GT(b->eigenvalues[0], 0.0);
  }
}

TEST(Spectral, CountingLawSlopes) {
  EXPECT_NEAR(fit_counting_law(octic_basis(), 8, 64).slope, 0.625, 0.05);
  EXPECT_NEAR(fit_counting_law(box_basis(), 8, 64).slope, 0.5, 0.05);
  const auto quartic = solve_spectrum(4.0, {7.0, 2048, Scheme::fd4}, 64);
  EXPECT_NEAR(fit_counting_law(quartic, 8, 64).slope, 0.75, 0.05);
}

TEST(Spectral, Preconditions) {
  EXPECT_THROW(solve_spectrum(8.0, {4.0, 256, Scheme::fd4}, 65), PreconditionError);
  EXPECT_THROW(solve_spectrum(1.5, {4.0, 256, Scheme::fd4}, 8), PreconditionError);
  EXPECT_THROW(solve_spectrum(8.0, {4.0, 32, Scheme::fd4}, 4), PreconditionError);
  EXPECT_THROW(solve_spectrum(8.0, {-1.0, 256, Scheme::fd4}, 4), PreconditionError);
}

TEST(Spectral, FieldSynthesis) {
  const auto& b = box_basis();
  const auto u = evaluate_field(b, Field({{1.0, 0.0}}));
  for (int i = 0; i < b.n_grid(); ++i) EXPECT_EQ(u[i].real(), b.mode(0)[i]);

  const auto v = evaluate_field(b, Field({{1.0, 0.0}, {1.0, 0.0}}));
  for (int i = 0; i < b.n_grid(); ++i) EXPECT_NEAR(v[i].real(), b.mode(0)[i] + b.mode(1)[i], 1e-14);

  const int pts[] = {0, 17, 511};
  const auto w = evaluate_field(b, Field({{0.0, 2.0}}), pts);
  ASSERT_EQ(w.size(), 3u);
  EXPECT_NEAR(w[1].imag(), 2.0 * b.mode(0)[17], 1e-14);

  Field too_long;
  too_long.coeffs.assign(b.n_modes() + 1, Complex{1.0, 0.0});
  EXPECT_THROW(evaluate_field(b, too_long), PreconditionError);
}

TEST(Spectral, ParsevalOnRandomFields) {
  const auto& b = octic_basis();
  for (int t = 0; t < 20; ++t) {
    const Field f = random_field(b.n_modes(), t);
    std::vector<double> rho;
    field_density(b, f, rho);
    double q = 0.0;
    for (int i = 0; i < b.n_grid(); ++i) q += b.quad_weights[i] * rho[i];
    EXPECT_NEAR(q, f.mass(), 1e-8 * f.mass());
  }
}

TEST(Spectral, KineticFormMatchesQuadrature) {
  const auto& b = octic_basis();
  EXPECT_EQ(kinetic_form(b, Field({{1.0, 0.0}})), b.eigenvalues[0]);
  EXPECT_EQ(kinetic_form(b, Field(std::vector<Complex>(5))), 0.0);
  for (int t = 0; t < 100; ++t) {
    const Field f = random_field(16, 100 + t);
    const double k = kinetic_form(b, f);
    // forward differences underestimate k^2 by about k^4 h^2 / 12 per mode
    double tol = 0.0;
    for (int j = 0; j < f.size(); ++j) tol += b.eigenvalues[j] * b.eigenvalues[j] * std::norm(f.coeffs[j]);
    tol *= 2.0 * b.spacing() * b.spacing() / 12.0;
    EXPECT_NEAR(direct_energy(b, f), k, tol) << t;
    EXPECT_LT(tol, 1e-3 * k);
  }
}

TEST(Spectral, TailSums) {
  const auto& b = box_basis();
  const TailSum empty = tail_sum(b, b.lambda_max(), 1.0);
  EXPECT_EQ(empty.resolved, 0.0);
  EXPECT_GT(empty.remainder, 0.0);
  EXPECT_THROW(tail_sum(b, b.lambda_max() * 1.01, 1.0), PreconditionError);

  // Basel sum: sum_j 1/(j pi)^2 = 1/6
  const TailSum basel = tail_sum(b, 0.0, 1.0);
  EXPECT_NEAR(basel.total(), 1.0 / 6.0, 2e-5);
  const auto small = solve_spectrum(kInfinity, {1.0, 256, Scheme::fd4}, 16);
  EXPECT_LT(std::abs(basel.resolved - 1.0 / 6.0), std::abs(tail_sum(small, 0.0, 1.0).resolved - 1.0 / 6.0));

  const auto& o = octic_basis();
  // slope of log tail vs log Lambda over the middle of the resolved range
  std::vector<double> lx, ly;
  for (int j = 8; j < 40; j += 4) {
    lx.push_back(std::log(o.eigenvalues[j]));
    ly.push_back(std::log(tail_sum(o, o.eigenvalues[j], 1.0).total()));
  }
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < lx.size(); ++i) mx += lx[i], my += ly[i];
  mx /= lx.size();
  my /= ly.size();
  double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < lx.size(); ++i) sxy += (lx[i] - mx) * (ly[i] - my), sxx += (lx[i] - mx) * (lx[i] - mx);
  EXPECT_NEAR(sxy / sxx, 1.0 / 8 - 0.5, 0.05);
}

TEST(Spectral, ContainerRoundTrip) {
  const auto& b = octic_basis();
  const auto path = (std::filesystem::temp_directory_path() / "mfbose_basis_roundtrip.bin").string();
  save_basis(b, path);
  const auto r = load_basis(path);
  EXPECT_EQ(r.s, b.s);
  EXPECT_EQ(r.grid.n_points, b.grid.n_points);
  EXPECT_EQ(r.eigenvalues, b.eigenvalues);
  EXPECT_EQ(r.eigenfunctions, b.eigenfunctions);
  EXPECT_EQ(r.x, b.x);
  EXPECT_EQ(serialize_basis(r), serialize_basis(b));

  auto bytes = serialize_basis(b);
  bytes[100] ^= 0x40;
  EXPECT_THROW(deserialize_basis(bytes), IoError);
  bytes = serialize_basis(b);
  bytes[0] = 'X';
  EXPECT_THROW(deserialize_basis(bytes), IoError);
  bytes.resize(50);
  EXPECT_THROW(deserialize_basis(bytes), IoError);
  std::filesystem::remove(path);
}

TEST(Spectral, InfiniteExponentSurvivesContainer) {
  const auto& b = box_basis();
  const auto r = deserialize_basis(serialize_basis(b));
  EXPECT_TRUE(r.is_box());
  EXPECT_EQ(r.x, b.x);
}
