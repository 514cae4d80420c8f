#pragma once

#include <cstddef>
#include <string_view>

// Data-parallel inner loops shared by the spectral, mass-density and
// interaction code. Every kernel has a scalar reference implementation; the
// AVX2/FMA variants are compiled separately and picked at runtime when the
// CPU supports them. Set MFBOSE_SIMD=scalar to force the reference path.

namespace mfbose::simd {

enum class Isa { scalar, avx2 };

std::string_view isa_name(Isa isa);

struct KernelTable {
  Isa isa;

  /// sum_i x[i] * y[i]
  double (*dot)(const double* x, const double* y, std::size_t n);

  /// y[i] += a * x[i]
  void (*axpy)(double a, const double* x, double* y, std::size_t n);

  /// re[i] += c_re * u[i]; im[i] += c_im * u[i]   (complex coefficient times real mode)
  void (*complex_axpy)(double c_re, double c_im, const double* u, double* re, double* im, std::size_t n);

  /// out[i] = re[i]^2 + im[i]^2
  void (*abs2)(const double* re, const double* im, double* out, std::size_t n);

  /// v^T K v for a row-major n x n matrix K.
  double (*quadratic_form)(const double* k, const double* v, std::size_t n);

  /// out[i] = sum_j K[i*n + j] * v[j]
  void (*matvec)(const double* k, const double* v, double* out, std::size_t n);

  /// One step of a phasor-rotation Fourier sum:
  ///   acc[i] += c_re * ph_re[i] - c_im * ph_im[i];  ph[i] *= rot[i]  (complex)
  void (*phasor_step)(double c_re, double c_im, double* ph_re, double* ph_im, const double* rot_re,
                      const double* rot_im, double* acc, std::size_t n);
};

/// Kernel table for the best ISA available on this CPU (honours MFBOSE_SIMD).
const KernelTable& kernels();

/// Kernel table for a specific ISA. Throws PreconditionError if it is unavailable.
const KernelTable& kernels_for(Isa isa);

bool isa_available(Isa isa);

namespace scalar {
double dot(const double* x, const double* y, std::size_t n);
void axpy(double a, const double* x, double* y, std::size_t n);
void complex_axpy(double c_re, double c_im, const double* u, double* re, double* im, std::size_t n);
void abs2(const double* re, const double* im, double* out, std::size_t n);
double quadratic_form(const double* k, const double* v, std::size_t n);
void matvec(const double* k, const double* v, double* out, std::size_t n);
void phasor_step(double c_re, double c_im, double* ph_re, double* ph_im, const double* rot_re, const double* rot_im,
                 double* acc, std::size_t n);
}  // namespace scalar

namespace avx2 {
double dot(const double* x, const double* y, std::size_t n);
void axpy(double a, const double* x, double* y, std::size_t n);
void complex_axpy(double c_re, double c_im, const double* u, double* re, double* im, std::size_t n);
void abs2(const double* re, const double* im, double* out, std::size_t n);
double quadratic_form(const double* k, const double* v, std::size_t n);
void matvec(const double* k, const double* v, double* out, std::size_t n);
void phasor_step(double c_re, double c_im, double* ph_re, double* ph_im, const double* rot_re, const double* rot_im,
                 double* acc, std::size_t n);
}  // namespace avx2

}  // namespace mfbose::simd
