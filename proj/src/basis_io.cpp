#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <iterator>

#include "binio.hpp"
#include "mfbose/error.hpp"
#include "mfbose/hash.hpp"
#include "mfbose/spectral.hpp"

namespace mfbose {
namespace {

constexpr char kMagic[8] = {'M', 'F', 'B', 'B', 'A', 'S', 'I', 'S'};
constexpr std::uint32_t kVersion = 1;

}  // namespace

std::vector<std::uint8_t> serialize_basis(const SpectralBasis& basis) {
  binio::Writer w;
  for (char c : kMagic) w.put(c);
  w.put(kVersion);
  w.put(binio::kEndianTag);
  w.put(basis.s);
  w.put(static_cast<std::uint32_t>(basis.grid.scheme == Scheme::fd2 ? 2 : 4));
  w.put(basis.grid.half_width);
  w.put(static_cast<std::uint64_t>(basis.grid.n_points));
  w.put(static_cast<std::uint64_t>(basis.n_modes()));
  w.put(basis.max_relative_residual);
  w.put_array(basis.eigenvalues);
  w.put_array(basis.eigenvalue_error);
  w.put_array(basis.eigenfunctions);
  w.seal();
  return std::move(w.buf);
}

SpectralBasis deserialize_basis(std::span<const std::uint8_t> bytes) {
  binio::Reader r(bytes, "basis container");
  r.header(kMagic, kVersion);

  SpectralBasis b;
  b.s = r.get<double>();
  const auto order = r.get<std::uint32_t>();
  if (order != 2 && order != 4) throw IoError("basis container has unknown scheme order");
  b.grid.scheme = order == 2 ? Scheme::fd2 : Scheme::fd4;
  b.grid.half_width = r.get<double>();
  const auto n = r.get<std::uint64_t>();
  const auto k = r.get<std::uint64_t>();
  if (n < 1 || n > (1u << 26) || k < 1 || k > n) throw IoError("basis container has implausible dimensions");
  b.grid.n_points = static_cast<int>(n);
  b.max_relative_residual = r.get<double>();
  b.eigenvalues = r.get_array<double>(k);
  b.eigenvalue_error = r.get_array<double>(k);
  b.eigenfunctions = r.get_array<double>(k * n);
  r.finish();

  const double hx = b.spacing();
  b.x.resize(n);
  for (std::uint64_t i = 0; i < n; ++i) {
    b.x[i] = b.is_box() ? (i + 1) * hx : -b.grid.half_width + (i + 1) * hx;
  }
  b.quad_weights.assign(n, hx);
  return b;
}

void save_basis(const SpectralBasis& basis, const std::string& path) {
  binio::write_file(path, serialize_basis(basis));
}

SpectralBasis load_basis(const std::string& path) {
  return deserialize_basis(binio::read_file(path));
}

void export_eigenvalues_csv(const SpectralBasis& basis, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << "j,lambda_j\n" << std::setprecision(17);
  for (int j = 0; j < basis.n_modes(); ++j) out << j + 1 << ',' << basis.eigenvalues[j] << '\n';
  if (!out) throw IoError("write to '" + path + "' failed");
}

}  // namespace mfbose
