#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "mfbose/rng.hpp"
#include "mfbose/simd/kernels.hpp"

using namespace mfbose;
using namespace mfbose::simd;

namespace {

std::vector<double> random_vector(std::size_t n, std::uint64_t stream) {
  Philox rng(7, stream);
  std::vector<double> v(n);
  for (auto& x : v) x = rng.normal();
  return v;
}

class KernelEquivalence : public ::testing::TestWithParam<std::size_t> {
 protected:
  void SetUp() override {
    if (!isa_available(Isa::avx2)) GTEST_SKIP() << "no AVX2 on this CPU";
  }
  const KernelTable& ref = kernels_for(Isa::scalar);
  const KernelTable& vec() { return kernels_for(Isa::avx2); }
};

}  // namespace

TEST(Kernels, DispatchPicksAnAvailableIsa) {
  EXPECT_EQ(kernels_for(Isa::scalar).isa, Isa::scalar);
  EXPECT_TRUE(isa_available(kernels().isa));
}

TEST_P(KernelEquivalence, Dot) {
  const std::size_t n = GetParam();
  auto x = random_vector(n, 1), y = random_vector(n, 2);
  const double a = ref.dot(x.data(), y.data(), n);
  const double b = vec().dot(x.data(), y.data(), n);
  EXPECT_NEAR(a, b, 1e-12 * (1.0 + std::abs(a)) * std::sqrt(double(n) + 1));
}

TEST_P(KernelEquivalence, AxpyAndComplexAxpy) {
  const std::size_t n = GetParam();
  auto x = random_vector(n, 3);
  auto y1 = random_vector(n, 4), y2 = y1;
  ref.axpy(0.37, x.data(), y1.data(), n);
  vec().axpy(0.37, x.data(), y2.data(), n);
  for (std::size_t i = 0; i < n; ++i) EXPECT_NEAR(y1[i], y2[i], 1e-14);

  auto re1 = random_vector(n, 5), im1 = random_vector(n, 6);
  auto re2 = re1, im2 = im1;
  ref.complex_axpy(0.5, -1.25, x.data(), re1.data(), im1.data(), n);
  vec().complex_axpy(0.5, -1.25, x.data(), re2.data(), im2.data(), n);
  for (std::size_t i = 0; i < n; ++i) {
    EXPECT_NEAR(re1[i], re2[i], 1e-14);
    EXPECT_NEAR(im1[i], im2[i], 1e-14);
  }
}

TEST_P(KernelEquivalence, Abs2) {
  const std::size_t n = GetParam();
  auto re = random_vector(n, 7), im = random_vector(n, 8);
  std::vector<double> a(n), b(n);
  ref.abs2(re.data(), im.data(), a.data(), n);
  vec().abs2(re.data(), im.data(), b.data(), n);
  for (std::size_t i = 0; i < n; ++i) EXPECT_NEAR(a[i], b[i], 1e-14 * (1 + a[i]));
}

TEST_P(KernelEquivalence, QuadraticFormAndMatvec) {
  const std::size_t n = GetParam();
  auto k = random_vector(n * n, 9), v = random_vector(n, 10);
  const double a = ref.quadratic_form(k.data(), v.data(), n);
  const double b = vec().quadratic_form(k.data(), v.data(), n);
  EXPECT_NEAR(a, b, 1e-11 * (1.0 + double(n) * n));
  std::vector<double> o1(n), o2(n);
  ref.matvec(k.data(), v.data(), o1.data(), n);
  vec().matvec(k.data(), v.data(), o2.data(), n);
  for (std::size_t i = 0; i < n; ++i) EXPECT_NEAR(o1[i], o2[i], 1e-12 * (1.0 + double(n)));
}

TEST_P(KernelEquivalence, PhasorStep) {
  const std::size_t n = GetParam();
  std::vector<double> rr(n), ri(n), pr1(n, 1.0), pi1(n, 0.0), acc1(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    rr[i] = std::cos(0.01 * double(i));
    ri[i] = -std::sin(0.01 * double(i));
  }
  auto pr2 = pr1, pi2 = pi1, acc2 = acc1;
  for (int step = 0; step < 50; ++step) {
    const double cr = std::cos(0.3 * step), ci = std::sin(0.2 * step);
    ref.phasor_step(cr, ci, pr1.data(), pi1.data(), rr.data(), ri.data(), acc1.data(), n);
    vec().phasor_step(cr, ci, pr2.data(), pi2.data(), rr.data(), ri.data(), acc2.data(), n);
  }
  for (std::size_t i = 0; i < n; ++i) {
    EXPECT_NEAR(acc1[i], acc2[i], 1e-12);
    EXPECT_NEAR(pr1[i], pr2[i], 1e-13);
  }
}

INSTANTIATE_TEST_SUITE_P(Lengths, KernelEquivalence, ::testing::Values(0, 1, 3, 4, 7, 8, 9, 31, 64, 257));

TEST(Kernels, PhasorSumMatchesDirectFourierSum) {
  const auto& k = kernels();
  const std::size_t n = 33;
  const double ds = 0.05;
  std::vector<double> x(n), rr(n), ri(n), pr(n, 1.0), pi(n, 0.0), acc(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    x[i] = 0.1 * double(i);
    rr[i] = std::cos(ds * x[i]);
    ri[i] = -std::sin(ds * x[i]);
  }
  // acc = sum_m Re[c_m e^{-i s_m x}] with c_m = 1/(1 - i s_m)
  for (int m = 0; m < 200; ++m) {
    const double s = m * ds;
    const double den = 1.0 + s * s;
    k.phasor_step(1.0 / den, s / den, pr.data(), pi.data(), rr.data(), ri.data(), acc.data(), n);
  }
  for (std::size_t i = 0; i < n; ++i) {
    double direct = 0.0;
    for (int m = 0; m < 200; ++m) {
      const double s = m * ds;
      direct += (std::cos(s * x[i]) + s * std::sin(s * x[i])) / (1.0 + s * s);
    }
    EXPECT_NEAR(acc[i], direct, 1e-10);
  }
}

TEST(Philox, StreamsAreReproducibleAndDistinct) {
  Philox a(42, 0), b(42, 0), c(42, 1), d(43, 0);
  for (int i = 0; i < 100; ++i) {
    const auto va = a(), vb = b(), vc = c(), vd = d();
    EXPECT_EQ(va, vb);
    EXPECT_NE(va, vc);
    EXPECT_NE(va, vd);
  }
}

TEST(Philox, UniformAndNormalMoments) {
  Philox rng(1, 2);
  const int n = 200000;
  double su = 0, sn = 0, sn2 = 0;
  for (int i = 0; i < n; ++i) {
    const double u = rng.uniform();
    ASSERT_GT(u, 0.0);
    ASSERT_LT(u, 1.0);
    su += u;
    const double z = rng.normal();
    sn += z;
    sn2 += z * z;
  }
  EXPECT_NEAR(su / n, 0.5, 4 * std::sqrt(1.0 / 12 / n));
  EXPECT_NEAR(sn / n, 0.0, 4 / std::sqrt(double(n)));
  EXPECT_NEAR(sn2 / n, 1.0, 4 * std::sqrt(2.0 / n));
  for (int i = 0; i < 1000; ++i) EXPECT_LT(rng.below(7), 7u);
}
