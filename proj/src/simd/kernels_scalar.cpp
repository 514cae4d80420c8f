#include "mfbose/simd/kernels.hpp"

namespace mfbose::simd::scalar {

double dot(const double* x, const double* y, std::size_t n) {
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) sum += x[i] * y[i];
  return sum;
}

void axpy(double a, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

void complex_axpy(double c_re, double c_im, const double* u, double* re, double* im, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    re[i] += c_re * u[i];
    im[i] += c_im * u[i];
  }
}

void abs2(const double* re, const double* im, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = re[i] * re[i] + im[i] * im[i];
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
  for (std::size_t i = 0; i < n; ++i) {
    const double pr = ph_re[i];
    const double pi = ph_im[i];
    acc[i] += c_re * pr - c_im * pi;
    ph_re[i] = pr * rot_re[i] - pi * rot_im[i];
    ph_im[i] = pr * rot_im[i] + pi * rot_re[i];
  }
}

}  // namespace mfbose::simd::scalar
