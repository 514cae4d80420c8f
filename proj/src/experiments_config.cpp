#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include <unistd.h>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "binio.hpp"
#include "mfbose/error.hpp"
#include "mfbose/experiments.hpp"
#include "mfbose/hash.hpp"

#ifndef MFBOSE_VERSION
#define MFBOSE_VERSION "0.0.0"
#endif

namespace mfbose {

std::string library_version() { return MFBOSE_VERSION; }

namespace {

enum class Kind { number, integer, flag, text, list, sweep };

struct Key {
  const char* name;
  const char* value;
  Kind kind;
};

struct SuiteDefaults {
  const char* id;
  const char* title;
  std::vector<Key> keys;
};

// basis keys shared by the suites that solve a spectrum
std::vector<Key> with_basis(const char* s, const char* half_width, const char* grid, const char* modes,
                            std::vector<Key> rest) {
  std::vector<Key> k{{"s", s, Kind::number},
                     {"half_width", half_width, Kind::number},
                     {"grid", grid, Kind::integer},
                     {"basis_modes", modes, Kind::integer}};
  k.insert(k.end(), rest.begin(), rest.end());
  return k;
}

const std::vector<SuiteDefaults>& suites() {
  static const std::vector<SuiteDefaults> table{
      {"E1", "mass densities: convolution identity and high-mode concentration",
       with_basis("inf", "1", "1024", "40",
                  {{"splits", "1, 2, 3, 4, 5, 6, 7, 8, 9, 10", Kind::sweep},
                   {"eta_max", "3", Kind::number},
                   {"eta_points", "6001", Kind::integer},
                   {"delta", "0.05", Kind::number},
                   {"l1_tolerance", "0.01", Kind::number},
                   {"clip_budget", "0.001", Kind::number}})},
      {"E2", "penalized partition function and penalized measure",
       with_basis("inf", "1", "4096", "200",
                  {{"m", "1", Kind::number},
                   {"eps", "0.001", Kind::number},
                   {"tolerance", "0.05", Kind::number},
                   {"eta_max", "3", Kind::number},
                   {"eta_points", "6001", Kind::integer},
                   {"trend_modes", "4", Kind::integer},
                   {"trend_eps", "0.001, 0.01, 0.1", Kind::sweep},
                   {"n_samples", "400000", Kind::integer}})},
      {"E3", "free canonical state against the mass-conditioned measure",
       with_basis("8", "2.5", "1024", "16",
                  {{"modes", "8", Kind::integer},
                   {"m", "1", Kind::number},
                   {"T", "8, 16, 32, 64", Kind::sweep},
                   {"checked_modes", "3", Kind::integer},
                   {"n_samples", "200000", Kind::integer},
                   {"classical_runs", "20", Kind::integer},
                   {"final_fraction", "0.1", Kind::number}})},
      {"E4", "relaxed canonical state: sector weights and classical limit",
       with_basis("8", "2.5", "1024", "16",
                  {{"modes", "8", Kind::integer},
                   {"m", "1", Kind::number},
                   {"T", "8, 16, 32, 64", Kind::sweep},
                   {"a", "0.1", Kind::number},
                   {"checked_modes", "3", Kind::integer},
                   {"moment_ratio", "1.5", Kind::number},
                   {"relax_T", "64", Kind::number},
                   {"relax_eps", "0.0001, 0.001, 0.01, 0.1", Kind::sweep}})},
      {"E5", "interacting canonical free energy against the classical partition function",
       with_basis("8", "2.5", "1024", "16",
                  {{"modes", "3", Kind::integer},
                   {"m", "1", Kind::number},
                   {"potential", "gaussian_bump", Kind::text},
                   {"width", "0.5", Kind::number},
                   {"depth", "1", Kind::number},
                   {"g", "-0.5, 1", Kind::sweep},
                   {"T", "4, 8, 16", Kind::sweep},
                   {"n_samples", "200000", Kind::integer},
                   {"final_tolerance", "0.1", Kind::number},
                   {"identity_tolerance", "1e-8", Kind::number}})},
      {"E6", "correlation inequalities, quantum and classical",
       with_basis("8", "2.5", "1024", "16",
                  {{"quantum_modes", "2, 3, 4, 6, 8", Kind::sweep},
                   {"quantum_N", "1, 2, 4, 8, 16", Kind::sweep},
                   {"quantum_T", "0.25, 0.5, 1, 2, 4, 8, 16, 32", Kind::sweep},
                   {"rounding", "1e-12", Kind::number},
                   {"classical_modes", "3, 4, 5, 6, 8", Kind::sweep},
                   {"classical_m", "0.5, 1, 2, 4, 8", Kind::sweep},
                   {"classical_repeats", "2", Kind::integer},
                   {"n_samples", "20000", Kind::integer}})},
      {"E7", "Cannon bijection and particle-number shifts",
       with_basis("8", "2.5", "1024", "16",
                  {{"support", "4", Kind::integer},
                   {"cannon_N_max", "5", Kind::integer},
                   {"shift_modes", "2, 4, 8, 16", Kind::sweep},
                   {"shift_T", "1, 4, 16", Kind::sweep},
                   {"shift_N_max", "40", Kind::integer}})},
      {"E8", "canonical occupations dominated by grand-canonical ones",
       with_basis("8", "3", "2048", "64",
                  {{"box_grid", "1024", Kind::integer},
                   {"modes", "2, 4, 8, 16, 32", Kind::sweep},
                   {"T", "1, 4, 16, 64, 256", Kind::sweep},
                   {"m", "0.5, 2", Kind::sweep},
                   {"ratio_bound", "22.222222222222222", Kind::number}})},
      {"E9", "L4 norm of the high-frequency part",
       with_basis("8", "3", "2048", "64",
                  {{"m", "1", Kind::number},
                   {"radius", "0.3", Kind::number},
                   {"cutoffs", "100, 200, 400, 800", Kind::sweep},
                   {"cuts", "10, 20, 40, 80, 160, 320", Kind::sweep},
                   {"n_samples", "40000", Kind::integer},
                   {"drift_tolerance", "0.05", Kind::number}})},
      {"E10", "mass dependence of the classical field theory",
       with_basis("8", "3", "2048", "40",
                  {{"modes", "4, 8, 16, 32", Kind::sweep},
                   {"m1", "1", Kind::number},
                   {"m2", "1.25", Kind::number},
                   {"g", "1", Kind::number},
                   {"potential", "gaussian_bump", Kind::text},
                   {"width", "0.5", Kind::number},
                   {"depth", "1", Kind::number},
                   {"n_samples", "10000", Kind::integer},
                   {"entropy_nodes", "8", Kind::integer},
                   {"entropy_samples", "2500", Kind::integer}})},
  };
  return table;
}

const SuiteDefaults& find_suite(const std::string& id) {
  for (const auto& s : suites())
    if (id == s.id) return s;
  throw PreconditionError("unknown suite '" + id + "'");
}

const Key* find_key(const SuiteDefaults& s, const std::string& name) {
  for (const auto& k : s.keys)
    if (name == k.name) return &k;
  return nullptr;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

double to_number(const std::string& key, const std::string& v) {
  const std::string t = trim(v);
  char* end = nullptr;
  errno = 0;
  const double x = std::strtod(t.c_str(), &end);
  if (t.empty() || end != t.c_str() + t.size() || errno == ERANGE || std::isnan(x))
    throw PreconditionError("config key '" + key + "': '" + v + "' is not a number");
  return x;
}

bool to_flag(const std::string& key, const std::string& v) {
  const std::string t = trim(v);
  if (t == "true" || t == "1" || t == "yes") return true;
  if (t == "false" || t == "0" || t == "no") return false;
  throw PreconditionError("config key '" + key + "': '" + v + "' is not a boolean");
}

std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

void check_value(const std::string& key, Kind kind, const std::string& value) {
  switch (kind) {
    case Kind::number: to_number(key, value); break;
    case Kind::integer: {
      const double x = to_number(key, value);
      if (x != std::floor(x)) throw PreconditionError("config key '" + key + "' must be an integer");
      break;
    }
    case Kind::flag: to_flag(key, value); break;
    case Kind::text: break;
    case Kind::list:
    case Kind::sweep:
      for (const auto& item : split_list(value)) to_number(key, item);
      break;
  }
}

}  // namespace

// ---------------------------------------------------------------------------

const std::string& ExperimentConfig::text(const std::string& key) const {
  const auto it = values.find(key);
  if (it == values.end()) throw PreconditionError(suite + ": missing config key '" + key + "'");
  return it->second;
}

double ExperimentConfig::number(const std::string& key) const { return to_number(key, text(key)); }

int ExperimentConfig::integer(const std::string& key) const {
  const double x = number(key);
  if (x != std::floor(x) || std::abs(x) > 2e9) throw PreconditionError("config key '" + key + "' must be an integer");
  return static_cast<int>(x);
}

bool ExperimentConfig::flag(const std::string& key) const { return to_flag(key, text(key)); }

std::vector<double> ExperimentConfig::numbers(const std::string& key) const {
  std::vector<double> out;
  for (const auto& item : split_list(text(key))) out.push_back(to_number(key, item));
  return out;
}

std::vector<int> ExperimentConfig::integers(const std::string& key) const {
  std::vector<int> out;
  for (double x : numbers(key)) {
    if (x != std::floor(x)) throw PreconditionError("config key '" + key + "' must hold integers");
    out.push_back(static_cast<int>(x));
  }
  return out;
}

void ExperimentConfig::set(const std::string& key, const std::string& value) {
  const auto& s = find_suite(suite);
  const Key* k = find_key(s, key);
  if (k == nullptr) throw PreconditionError("suite " + suite + " has no config key '" + key + "'");
  check_value(key, k->kind, value);
  values[key] = trim(value);
}

std::vector<std::pair<std::string, std::string>> ExperimentConfig::echo() const {
  std::vector<std::pair<std::string, std::string>> out{
      {"run.seed", std::to_string(seed)},
      {"run.strict", strict ? "true" : "false"},
      {"run.threads", std::to_string(threads)},
  };
  for (const auto& [k, v] : values) out.emplace_back(suite + "." + k, v);
  return out;
}

std::string ExperimentConfig::to_text() const {
  std::ostringstream os;
  os << "[run]\nseed = " << seed << "\nthreads = " << threads << "\nstrict = " << (strict ? "true" : "false")
     << "\n\n[" << suite << "]\n";
  for (const auto& [k, v] : values) os << k << " = " << v << "\n";
  return os.str();
}

std::vector<std::string> suite_ids() {
  std::vector<std::string> out;
  for (const auto& s : suites()) out.emplace_back(s.id);
  return out;
}

std::string suite_title(const std::string& suite) { return find_suite(suite).title; }

ExperimentConfig default_config(const std::string& suite) {
  const auto& s = find_suite(suite);
  ExperimentConfig c;
  c.suite = suite;
  for (const auto& k : s.keys) c.values[k.name] = k.value;
  return c;
}

ExperimentConfig parse_config(const std::string& text, const std::string& suite) {
  ExperimentConfig c = default_config(suite);
  boost::property_tree::ptree tree;
  std::istringstream in(text);
  try {
    boost::property_tree::ini_parser::read_ini(in, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw PreconditionError(std::string("config: ") + e.what());
  }
  for (const auto& [section, body] : tree) {
    if (body.empty()) throw PreconditionError("config: key '" + section + "' outside a section");
    if (section == "run") {
      for (const auto& [key, node] : body) {
        const std::string v = node.get_value<std::string>();
        if (key == "seed") {
          const double x = to_number(key, v);
          if (x < 0 || x != std::floor(x)) throw PreconditionError("config: run.seed must be a nonnegative integer");
          c.seed = std::stoull(trim(v));
        } else if (key == "threads") {
          const double x = to_number(key, v);
          if (x < 1 || x != std::floor(x)) throw PreconditionError("config: run.threads must be a positive integer");
          c.threads = static_cast<int>(x);
        } else if (key == "strict") {
          c.strict = to_flag(key, v);
        } else {
          throw PreconditionError("config: unknown key 'run." + key + "'");
        }
      }
      continue;
    }
    const auto& defaults = find_suite(section);
    for (const auto& [key, node] : body) {
      const Key* k = find_key(defaults, key);
      if (k == nullptr) throw PreconditionError("config: suite " + section + " has no key '" + key + "'");
      const std::string v = node.get_value<std::string>();
      check_value(section + "." + key, k->kind, v);
      if (section == suite) c.values[key] = trim(v);
    }
  }
  validate_config(c);
  return c;
}

ExperimentConfig load_config(const std::string& path, const std::string& suite) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), suite);
}

void validate_config(const ExperimentConfig& config) {
  const auto& s = find_suite(config.suite);
  for (const auto& k : s.keys) {
    const std::string& v = config.text(k.name);
    check_value(k.name, k.kind, v);
    if (k.kind == Kind::sweep) {
      const auto xs = config.numbers(k.name);
      if (xs.empty()) throw PreconditionError(config.suite + "." + k.name + ": sweep is empty");
      for (std::size_t i = 1; i < xs.size(); ++i)
        if (!(xs[i] > xs[i - 1])) throw PreconditionError(config.suite + "." + k.name + ": sweep must be strictly increasing");
    }
    if (k.kind == Kind::integer && config.integer(k.name) <= 0)
      throw PreconditionError(config.suite + "." + k.name + " must be positive");
  }
  if (config.threads < 1) throw PreconditionError("run.threads must be positive");
}

// ---------------------------------------------------------------------------
// Cache

namespace {

constexpr char kValuesMagic[8] = {'M', 'F', 'B', 'V', 'A', 'L', 'U', 'E'};
constexpr std::uint32_t kValuesVersion = 1;

std::string env(const char* name) {
  const char* v = std::getenv(name);
  return v == nullptr ? std::string() : std::string(v);
}

}  // namespace

Cache::Cache(std::string root) : root_(std::move(root)) {}

Cache Cache::from_environment() {
  if (auto r = env("MFBOSE_CACHE_DIR"); !r.empty()) return Cache(r);
  if (auto x = env("XDG_CACHE_HOME"); !x.empty()) return Cache(x + "/mfbose");
  if (auto h = env("HOME"); !h.empty()) return Cache(h + "/.cache/mfbose");
  return Cache();
}

std::string Cache::path(const std::string& key) const { return root_ + "/" + key + ".bin"; }

std::optional<std::vector<std::uint8_t>> Cache::load(const std::string& key) const {
  if (!enabled()) return std::nullopt;
  const auto p = path(key);
  std::error_code ec;
  if (!std::filesystem::exists(p, ec)) return std::nullopt;
  try {
    return binio::read_file(p);
  } catch (const IoError&) {
    return std::nullopt;
  }
}

void Cache::store(const std::string& key, std::span<const std::uint8_t> bytes) const {
  if (!enabled()) return;
  std::error_code ec;
  std::filesystem::create_directories(root_, ec);
  if (ec) throw IoError("cannot create cache directory '" + root_ + "': " + ec.message());
  const auto p = path(key);
  // unique per process and thread so concurrent writers of one key do not collide
  const auto tmp = p + ".tmp" + std::to_string(::getpid()) + "-" +
                   std::to_string(std::hash<std::thread::id>{}(std::this_thread::get_id()));
  binio::write_file(tmp, std::vector<std::uint8_t>(bytes.begin(), bytes.end()));
  std::filesystem::rename(tmp, p, ec);
  if (ec) throw IoError("cannot move cache entry into '" + p + "': " + ec.message());
}

void Cache::remove(const std::string& key) const {
  if (!enabled()) return;
  std::error_code ec;
  std::filesystem::remove(path(key), ec);
}

std::string spectrum_cache_key(double s, const GridSpec& grid, int n_modes) {
  Fnv1a h;
  h.text("spectrum").value(std::uint32_t{1}).value(s).value(grid.half_width).value(grid.n_points);
  h.value(static_cast<int>(grid.scheme)).value(n_modes);
  return "spectrum-" + h.hex();
}

SpectralBasis cached_spectrum(const Cache& cache, double s, const GridSpec& grid, int n_modes) {
  const auto key = spectrum_cache_key(s, grid, n_modes);
  if (auto bytes = cache.load(key)) {
    try {
      return deserialize_basis(*bytes);
    } catch (const IoError& e) {
      std::cerr << "warning: cache entry " << cache.path(key) << " unreadable (" << e.what() << "), rebuilding\n";
    }
  }
  auto basis = solve_spectrum(s, grid, n_modes);
  cache.store(key, serialize_basis(basis));
  return basis;
}

std::vector<double> cached_values(const Cache& cache, const std::string& key,
                                  const std::function<std::vector<double>()>& build) {
  if (auto bytes = cache.load(key)) {
    try {
      binio::Reader r(*bytes, "cached values");
      r.header(kValuesMagic, kValuesVersion);
      const auto n = r.get<std::uint64_t>();
      auto v = r.get_array<double>(n);
      r.finish();
      return v;
    } catch (const IoError& e) {
      std::cerr << "warning: cache entry " << cache.path(key) << " unreadable (" << e.what() << "), rebuilding\n";
    }
  }
  auto v = build();
  binio::Writer w;
  for (char c : kValuesMagic) w.put(c);
  w.put(kValuesVersion);
  w.put(binio::kEndianTag);
  w.put(static_cast<std::uint64_t>(v.size()));
  w.put_array(v);
  w.seal();
  cache.store(key, w.buf);
  return v;
}

}  // namespace mfbose
