#include <fstream>
#include <iomanip>

#include "binio.hpp"
#include "mfbose/error.hpp"
#include "mfbose/measures.hpp"

namespace mfbose {
namespace {

constexpr char kMagic[8] = {'M', 'F', 'B', 'B', 'A', 'T', 'C', 'H'};
constexpr std::uint32_t kVersion = 1;

void put_spec(binio::Writer& w, const MeasureSpec& s) {
  w.put(static_cast<std::int32_t>(s.kind));
  w.put(s.m);
  w.put(s.eps);
  w.put(s.g);
  w.put(s.cutoff);
  w.put(static_cast<std::int32_t>(s.n_modes));
  w.put(static_cast<std::int32_t>(s.convention));
  w.put(static_cast<std::int32_t>(s.interacting_base));
  w.put(static_cast<std::uint8_t>(s.potential ? 1 : 0));
  if (s.potential) {
    const auto& p = *s.potential;
    w.put(static_cast<std::int32_t>(p.kind));
    w.put(p.width);
    w.put(p.depth);
    w.put(static_cast<std::int32_t>(p.sign));
    w.put(static_cast<std::uint64_t>(p.table_r.size()));
    w.put_array(p.table_r);
    w.put_array(p.table_w);
  }
}

MeasureSpec get_spec(binio::Reader& r) {
  MeasureSpec s;
  const auto kind = r.get<std::int32_t>();
  if (kind < 0 || kind > 4) throw IoError("batch container has unknown measure kind");
  s.kind = static_cast<MeasureKind>(kind);
  s.m = r.get<double>();
  s.eps = r.get<double>();
  s.g = r.get<double>();
  s.cutoff = r.get<double>();
  s.n_modes = r.get<std::int32_t>();
  s.convention = static_cast<SphereConvention>(r.get<std::int32_t>());
  s.interacting_base = static_cast<MeasureKind>(r.get<std::int32_t>());
  if (r.get<std::uint8_t>() != 0) {
    InteractionPotential p;
    const auto pk = r.get<std::int32_t>();
    if (pk < 0 || pk > 3) throw IoError("batch container has unknown potential kind");
    p.kind = static_cast<PotentialKind>(pk);
    p.width = r.get<double>();
    p.depth = r.get<double>();
    p.sign = r.get<std::int32_t>();
    const auto nt = r.get<std::uint64_t>();
    p.table_r = r.get_array<double>(nt);
    p.table_w = r.get_array<double>(nt);
    s.potential = std::move(p);
  }
  return s;
}

}  // namespace

void save_batch(const SampleBatch& b, const std::string& path) {
  binio::Writer w;
  for (char c : kMagic) w.put(c);
  w.put(kVersion);
  w.put(binio::kEndianTag);
  put_spec(w, b.spec);
  w.put(b.seed);
  w.put(static_cast<std::int32_t>(b.d));
  w.put(static_cast<std::uint64_t>(b.size()));
  w.put(b.ess);
  w.put(b.max_weight_fraction);
  w.put(b.acceptance_rate);
  w.put(b.tilt);
  w.put(b.log_normalization.value);
  w.put(b.log_normalization.stderr_);
  w.put_array(b.coeffs);
  w.put_array(b.log_weights);
  w.put(static_cast<std::uint64_t>(b.warnings.size()));
  for (const auto& s : b.warnings) w.put_string(s);
  w.seal();
  binio::write_file(path, w.buf);
}

SampleBatch load_batch(const std::string& path) {
  const auto bytes = binio::read_file(path);
  binio::Reader r(bytes, "batch container");
  r.header(kMagic, kVersion);
  SampleBatch b;
  b.spec = get_spec(r);
  b.seed = r.get<std::uint64_t>();
  b.d = r.get<std::int32_t>();
  const auto n = r.get<std::uint64_t>();
  if (b.d < 1 || n > (1ULL << 40)) throw IoError("batch container has implausible dimensions");
  b.ess = r.get<double>();
  b.max_weight_fraction = r.get<double>();
  b.acceptance_rate = r.get<double>();
  b.tilt = r.get<double>();
  b.log_normalization.value = r.get<double>();
  b.log_normalization.stderr_ = r.get<double>();
  b.coeffs = r.get_array<Complex>(n * static_cast<std::uint64_t>(b.d));
  b.log_weights = r.get_array<double>(n);
  const auto nw = r.get<std::uint64_t>();
  for (std::uint64_t i = 0; i < nw; ++i) b.warnings.push_back(r.get_string());
  r.finish();
  return b;
}

void export_batch_csv(const SampleBatch& b, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << "sample";
  for (int j = 1; j <= b.d; ++j) out << ",re_" << j << ",im_" << j;
  out << ",log_weight\n" << std::setprecision(17);
  for (int i = 0; i < b.size(); ++i) {
    out << i;
    for (const auto& a : b.row(i)) out << ',' << a.real() << ',' << a.imag();
    out << ',' << b.log_weights[i] << '\n';
  }
  if (!out) throw IoError("write to '" + path + "' failed");
}

}  // namespace mfbose
