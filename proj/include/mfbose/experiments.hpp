#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mfbose/spectral.hpp"

namespace mfbose {

std::string library_version();

// ---------------------------------------------------------------------------
// Configuration

/// Sectioned key = value settings for one suite.
///
/// [run] holds seed, threads and strict; each suite reads its own section named by
/// the suite id. Values are kept as text and converted on access; lists are comma
/// separated.
struct ExperimentConfig {
  std::string suite;
  std::uint64_t seed = 1;
  int threads = 1;
  bool strict = false;
  std::string output_dir = ".";
  std::map<std::string, std::string> values;  // keys of the suite section

  bool has(const std::string& key) const { return values.count(key) != 0; }
  const std::string& text(const std::string& key) const;
  double number(const std::string& key) const;
  int integer(const std::string& key) const;
  bool flag(const std::string& key) const;
  std::vector<double> numbers(const std::string& key) const;
  std::vector<int> integers(const std::string& key) const;
  void set(const std::string& key, const std::string& value);

  /// Every setting as ("section.key", value), sorted, run settings first.
  std::vector<std::pair<std::string, std::string>> echo() const;
  /// The same settings in the file format accepted by parse_config.
  std::string to_text() const;
};

/// E1 .. E10 in order.
std::vector<std::string> suite_ids();
std::string suite_title(const std::string& suite);

/// Defaults of a suite. Throws PreconditionError for an unknown id.
ExperimentConfig default_config(const std::string& suite);

/// Defaults of `suite` overlaid with a config text. Sections other than [run] and the
/// suite ids are rejected, as are keys a suite does not define. Sections for other
/// suites are checked and otherwise ignored.
ExperimentConfig parse_config(const std::string& text, const std::string& suite);
ExperimentConfig load_config(const std::string& path, const std::string& suite);

/// Sweep lists nonempty and strictly increasing, counts positive.
void validate_config(const ExperimentConfig& config);

// ---------------------------------------------------------------------------
// Content-addressed cache

/// Files named by a content key under a root directory. A disabled cache (empty root)
/// never hits and drops stores. Corrupted entries are reported on stderr and rebuilt.
class Cache {
 public:
  Cache() = default;
  explicit Cache(std::string root);
  /// Root from MFBOSE_CACHE_DIR, else $XDG_CACHE_HOME/mfbose or $HOME/.cache/mfbose.
  static Cache from_environment();

  bool enabled() const { return !root_.empty(); }
  const std::string& root() const { return root_; }
  std::string path(const std::string& key) const;

  std::optional<std::vector<std::uint8_t>> load(const std::string& key) const;
  /// Written to a temporary file and renamed into place.
  void store(const std::string& key, std::span<const std::uint8_t> bytes) const;
  void remove(const std::string& key) const;

 private:
  std::string root_;
};

std::string spectrum_cache_key(double s, const GridSpec& grid, int n_modes);

/// solve_spectrum through the cache; a hit deserializes the stored container.
SpectralBasis cached_spectrum(const Cache& cache, double s, const GridSpec& grid, int n_modes);

/// A vector of doubles through the cache, built by `build` on a miss.
std::vector<double> cached_values(const Cache& cache, const std::string& key,
                                  const std::function<std::vector<double>()>& build);

// ---------------------------------------------------------------------------
// Reports

struct Clause {
  std::string id;
  std::string description;
  double value = 0.0;      // measured quantity
  double tolerance = 0.0;  // bound it is compared with
  std::string comparison;  // "<=", "<", "decreasing", ...
  bool pass = false;
  bool calibration = false;  // threshold set by this toolkit rather than derived
};

struct Table {
  std::string name;
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;
};

struct Report {
  std::string suite;
  std::string title;
  std::string version;
  std::string coupling_convention = "g/N";
  std::uint64_t seed = 0;
  int threads = 1;
  std::vector<std::pair<std::string, std::string>> config;
  std::vector<Table> tables;
  std::vector<Clause> clauses;
  std::vector<std::string> notes;
  std::string timestamp;  // UTC, ISO 8601
  double wall_clock_seconds = 0.0;

  bool passed() const;
  Table& add_table(std::string name, std::vector<std::string> columns);
  const Table* find_table(const std::string& name) const;
  const Clause* find_clause(const std::string& id) const;
};

/// Field-wise equality, treating NaN entries as equal.
bool operator==(const Report& a, const Report& b);

/// JSON with keys in a fixed order. The "timestamp" object holds the UTC time and the
/// wall-clock seconds; everything outside it is a function of (config, seed, threads).
std::string report_json(const Report& report, bool with_timestamp = true);
Report parse_report_json(const std::string& text);
std::string report_text(const Report& report);
/// CSV of one table: header row then one line per row.
std::string table_csv(const Table& table);

/// Writes <suite>.json, <suite>_<table>.csv and <suite>.txt under `dir` (created when
/// missing) for the requested formats among "json", "csv", "txt". Returns the paths.
std::vector<std::string> emit(const Report& report, const std::string& dir,
                              const std::vector<std::string>& formats = {"json", "csv", "txt"});

// ---------------------------------------------------------------------------
// Suites

/// Runs one suite. Sub-operation errors propagate as Error with the suite and the
/// sweep point in the message.
Report run_suite(const ExperimentConfig& config, const Cache& cache = {});

}  // namespace mfbose
