#include <cstdlib>
#include <string>

#include "mfbose/error.hpp"
#include "mfbose/simd/kernels.hpp"

namespace mfbose::simd {
namespace {

constexpr KernelTable kScalarTable{Isa::scalar,        scalar::dot,    scalar::axpy,   scalar::complex_axpy,
                                   scalar::abs2,       scalar::quadratic_form, scalar::matvec,
                                   scalar::phasor_step};

#ifdef MFBOSE_HAVE_AVX2
constexpr KernelTable kAvx2Table{Isa::avx2,        avx2::dot,    avx2::axpy,   avx2::complex_axpy,
                                 avx2::abs2,       avx2::quadratic_form, avx2::matvec,
                                 avx2::phasor_step};
#endif

const KernelTable& select() {
  if (const char* forced = std::getenv("MFBOSE_SIMD")) {
    const std::string name(forced);
    if (name == "scalar") return kScalarTable;
    if (name == "avx2") return kernels_for(Isa::avx2);
  }
  if (isa_available(Isa::avx2)) return kernels_for(Isa::avx2);
  return kScalarTable;
}

}  // namespace

std::string_view isa_name(Isa isa) {
  switch (isa) {
    case Isa::scalar:
      return "scalar";
    case Isa::avx2:
      return "avx2";
  }
  return "unknown";
}

bool isa_available(Isa isa) {
  switch (isa) {
    case Isa::scalar:
      return true;
    case Isa::avx2:
#if defined(MFBOSE_HAVE_AVX2) && (defined(__x86_64__) || defined(__i386__))
      return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
      return false;
#endif
  }
  return false;
}

const KernelTable& kernels_for(Isa isa) {
  if (isa == Isa::scalar) return kScalarTable;
#ifdef MFBOSE_HAVE_AVX2
  if (isa_available(Isa::avx2)) return kAvx2Table;
#endif
  throw PreconditionError("requested SIMD kernel set is not available on this CPU/build");
}

const KernelTable& kernels() {
  static const KernelTable& table = select();
  return table;
}

}  // namespace mfbose::simd
