// AVX2 + FMA variants. This translation unit is compiled with -mavx2 -mfma and
// must only be entered after the runtime CPU check in dispatch.cpp.

#include <immintrin.h>

#include "mfbose/simd/kernels.hpp"

namespace mfbose::simd::avx2 {
namespace {

inline double hsum(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d s = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

}  // namespace

double dot(const double* x, const double* y, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i), acc0);
    acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i + 4), _mm256_loadu_pd(y + i + 4), acc1);
  }
  for (; i + 4 <= n; i += 4) acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i), acc0);
  double sum = hsum(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) sum += x[i] * y[i];
  return sum;
}

void axpy(double a, const double* x, double* y, std::size_t n) {
  const __m256d va = _mm256_set1_pd(a);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(y + i, _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
  }
  for (; i < n; ++i) y[i] += a * x[i];
}

void complex_axpy(double c_re, double c_im, const double* u, double* re, double* im, std::size_t n) {
  const __m256d vr = _mm256_set1_pd(c_re);
  const __m256d vi = _mm256_set1_pd(c_im);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d vu = _mm256_loadu_pd(u + i);
    _mm256_storeu_pd(re + i, _mm256_fmadd_pd(vr, vu, _mm256_loadu_pd(re + i)));
    _mm256_storeu_pd(im + i, _mm256_fmadd_pd(vi, vu, _mm256_loadu_pd(im + i)));
  }
  for (; i < n; ++i) {
    re[i] += c_re * u[i];
    im[i] += c_im * u[i];
  }
}

void abs2(const double* re, const double* im, double* out, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d r = _mm256_loadu_pd(re + i);
    const __m256d m = _mm256_loadu_pd(im + i);
    _mm256_storeu_pd(out + i, _mm256_fmadd_pd(r, r, _mm256_mul_pd(m, m)));
  }
  for (; i < n; ++i) out[i] = re[i] * re[i] + im[i] * im[i];
}

double quadratic_form(const double* k, const double* v, std::size_t n) {
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) sum += v[i] * dot(k + i * n, v, n);
  return sum;
}

void matvec(const double* k, const double* v, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = dot(k + i * n, v, n);
}

void phasor_step(double c_re, double c_im, double* ph_re, double* ph_im, const double* rot_re, const double* rot_im,
                 double* acc, std::size_t n) {
  const __m256d cr = _mm256_set1_pd(c_re);
  const __m256d ci = _mm256_set1_pd(c_im);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d pr = _mm256_loadu_pd(ph_re + i);
    const __m256d pi = _mm256_loadu_pd(ph_im + i);
    const __m256d rr = _mm256_loadu_pd(rot_re + i);
    const __m256d ri = _mm256_loadu_pd(rot_im + i);
    _mm256_storeu_pd(acc + i, _mm256_fmadd_pd(cr, pr, _mm256_fnmadd_pd(ci, pi, _mm256_loadu_pd(acc + i))));
    _mm256_storeu_pd(ph_re + i, _mm256_fmsub_pd(pr, rr, _mm256_mul_pd(pi, ri)));
    _mm256_storeu_pd(ph_im + i, _mm256_fmadd_pd(pr, ri, _mm256_mul_pd(pi, rr)));
  }
  for (; i < n; ++i) {
    const double pr = ph_re[i];
    const double pi = ph_im[i];
    acc[i] += c_re * pr - c_im * pi;
    ph_re[i] = pr * rot_re[i] - pi * rot_im[i];
    ph_im[i] = pr * rot_im[i] + pi * rot_re[i];
  }
}

}  // namespace mfbose::simd::avx2
