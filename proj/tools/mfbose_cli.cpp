#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <numeric>

#include <CLI11.hpp>
#include <json.hpp>

#include "mfbose/error.hpp"
#include "mfbose/experiments.hpp"
#include "mfbose/fock.hpp"
#include "mfbose/interaction.hpp"
#include "mfbose/massdist.hpp"
#include "mfbose/measures.hpp"
#include "mfbose/potential.hpp"
#include "mfbose/spectral.hpp"

using namespace mfbose;
using Json = nlohmann::ordered_json;

namespace {

// exit codes
constexpr int kFailedClauses = 1;
constexpr int kBadInput = 2;
constexpr int kRuntime = 3;

bool ends_with(const std::string& s, const std::string& tail) {
  return s.size() >= tail.size() && s.compare(s.size() - tail.size(), tail.size(), tail) == 0;
}

double parse_s(const std::string& text) {
  if (text == "inf" || text == "box") return kInfinity;
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(text, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != text.size()) throw PreconditionError("--s expects a number or 'inf', got '" + text + "'");
  return v;
}

void write_text(const std::string& path, const std::string& body) {
  if (path.empty() || path == "-") {
    std::cout << body;
    return;
  }
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << body;
  if (!out) throw IoError("write to '" + path + "' failed");
}

Json estimate(const Estimate& e) { return Json{{"estimate", e.value}, {"stderr", e.stderr_}}; }

struct PotentialArgs {
  std::string kind = "gaussian_bump";
  double width = 0.5;
  double depth = 1.0;

  void add(CLI::App* app) {
    app->add_option("--potential", kind, "gaussian_bump, step_well or delta_approx");
    app->add_option("--width", width, "potential width");
    app->add_option("--depth", depth, "potential depth");
  }
  InteractionPotential make() const {
    switch (parse_potential_kind(kind)) {
      case PotentialKind::gaussian_bump: return gaussian_bump(width, depth);
      case PotentialKind::step_well: return step_well(width, depth);
      case PotentialKind::delta_approx: return delta_approx(width);
      case PotentialKind::tabulated: break;
    }
    throw PreconditionError("tabulated potentials are not available from the command line");
  }
};

// --- spectrum ---------------------------------------------------------------

struct SpectrumArgs {
  std::string s = "inf";
  int modes = 40;
  int grid = 2048;
  double half_width = 6.0;
  std::string scheme = "fd4";
  std::string out;
  std::string csv;
  bool no_cache = false;
};

int run_spectrum(const SpectrumArgs& a) {
  GridSpec g;
  g.n_points = a.grid;
  g.half_width = a.half_width;
  g.scheme = parse_scheme(a.scheme);
  const Cache cache = a.no_cache ? Cache{} : Cache::from_environment();
  const auto basis = cached_spectrum(cache, parse_s(a.s), g, a.modes);
  if (ends_with(a.out, ".csv")) {
    export_eigenvalues_csv(basis, a.out);
  } else {
    save_basis(basis, a.out);
  }
  if (!a.csv.empty()) export_eigenvalues_csv(basis, a.csv);
  std::cerr << "modes " << basis.n_modes() << ", lambda_1 " << basis.eigenvalues.front() << ", lambda_K "
            << basis.lambda_max() << ", max relative residual " << basis.max_relative_residual << "\n";
  return 0;
}

// --- density ----------------------------------------------------------------

struct DensityArgs {
  std::string basis;
  double split = 0.0;
  double eta_max = 4.0;
  int eta_points = 4001;
  int modes = -1;
  std::string out;
};

int run_density(const DensityArgs& a) {
  const auto basis = load_basis(a.basis);
  const EtaGrid grid{a.eta_max, a.eta_points};
  const auto f = mass_density(basis, DensityKind::high_modes_f, grid, a.split, -1, a.modes);
  const auto g = mass_density(basis, DensityKind::low_modes_g, grid, a.split, -1, a.modes);
  const auto f0 = mass_density(basis, DensityKind::all_modes_f0, grid, 0.0, -1, a.modes);
  std::string body = "eta,f_high,g_low,f0\n";
  char line[128];
  for (int i = 0; i < grid.points; ++i) {
    std::snprintf(line, sizeof line, "%.17g,%.17g,%.17g,%.17g\n", f0.eta(i), f.values[i], g.values[i], f0.values[i]);
    body += line;
  }
  write_text(a.out, body);
  std::cerr << "clipped mass: f_high " << f.clipped_mass << ", g_low " << g.clipped_mass << ", f0 " << f0.clipped_mass
            << "\n";
  return 0;
}

// --- sample -----------------------------------------------------------------

struct SampleArgs {
  std::string basis;
  std::string measure = "sphere";
  double m = 1.0, eps = 0.0, g = 0.0, lambda = 0.0;
  int modes = 0;
  int n = 10000;
  std::uint64_t seed = 1;
  std::string convention = "radius";
  std::string base = "sphere";
  PotentialArgs potential;
  bool strict = false;
  std::string out;
  std::string report;
};

int run_sample(const SampleArgs& a) {
  const auto basis = load_basis(a.basis);
  MeasureSpec spec;
  spec.kind = parse_measure_kind(a.measure);
  spec.m = spec.kind == MeasureKind::free_gaussian ? 0.0 : a.m;
  spec.eps = a.eps;
  spec.g = a.g;
  spec.cutoff = a.lambda;
  spec.n_modes = a.modes;
  spec.convention = parse_convention(a.convention);
  spec.interacting_base = parse_measure_kind(a.base);
  if (spec.kind == MeasureKind::interacting || a.g != 0.0) spec.potential = a.potential.make();
  SampleOptions opt;
  opt.strict = a.strict;
  std::optional<MassDensity> complement;
  if (spec.kind == MeasureKind::conditioned) {
    const int d = spec.dimension(basis);
    const double split = basis.eigenvalues[d - 1];
    const EtaGrid grid{std::max(4.0 * a.m, 4.0), 4001};
    complement = mass_density(basis, DensityKind::high_modes_f, grid, split);
    opt.complement = &*complement;
  }
  const auto batch = sample_measure(spec, basis, a.n, a.seed, opt);
  if (!a.out.empty()) {
    if (ends_with(a.out, ".csv")) {
      export_batch_csv(batch, a.out);
    } else {
      save_batch(batch, a.out);
    }
  }
  Json j;
  j["measure"] = spec.describe();
  j["seed"] = a.seed;
  j["samples"] = batch.size();
  j["modes"] = batch.d;
  j["ess"] = batch.ess;
  j["max_weight_fraction"] = batch.max_weight_fraction;
  if (std::isfinite(batch.acceptance_rate)) j["acceptance_rate"] = batch.acceptance_rate;
  j["log_normalization"] = estimate(batch.log_normalization);
  Json occ = Json::array();
  for (const auto& e : occupation_means(batch)) occ.push_back(estimate(e));
  j["occupations"] = occ;
  j["warnings"] = batch.warnings;
  Json config;
  config["basis"] = a.basis;
  config["measure"] = a.measure;
  config["m"] = a.m;
  config["eps"] = a.eps;
  config["g"] = a.g;
  config["lambda"] = a.lambda;
  config["modes"] = a.modes;
  config["n"] = a.n;
  config["convention"] = a.convention;
  config["strict"] = a.strict;
  j["config"] = config;
  write_text(a.report.empty() && a.out.empty() ? "-" : a.report, j.dump(2) + "\n");
  return 0;
}

// --- canonical --------------------------------------------------------------

struct CanonicalArgs {
  std::string basis;
  int modes = 4;
  int N = 4;
  double T = 1.0;
  double g = 0.0;
  PotentialArgs potential;
  std::string out;
};

std::string matrix_csv(const Eigen::MatrixXd& m) {
  std::string body;
  char cell[40];
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      std::snprintf(cell, sizeof cell, "%s%.17g", c ? "," : "", m(r, c));
      body += cell;
    }
    body += "\n";
  }
  return body;
}

int run_canonical(const CanonicalArgs& a) {
  const auto basis = load_basis(a.basis);
  detail::require(a.modes >= 1 && a.modes <= basis.n_modes(), "--modes exceeds the basis");
  const std::vector<double> rates(basis.eigenvalues.begin(), basis.eigenvalues.begin() + a.modes);
  Json j;
  j["modes"] = a.modes;
  j["N"] = a.N;
  j["T"] = a.T;
  j["g"] = a.g;
  j["coupling_convention"] = "g/N";
  Eigen::MatrixXd g1, g2;
  if (a.g == 0.0) {
    const auto e = free_canonical_occupations(rates, a.N, a.T, true);
    j["logZ"] = e.logZ;
    j["occupations"] = e.occupations;
    g1 = Eigen::MatrixXd::Zero(a.modes, a.modes);
    for (int q = 0; q < a.modes; ++q) g1(q, q) = e.occupations[q];
    g2 = e.pair_occupations;
  } else {
    const auto pot = a.potential.make();
    const auto W = wmatrix_elements(basis, a.modes, pot);
    const auto H = build_interacting_hamiltonian(rates, W, a.N, a.g);
    const auto st = thermal_state(H, a.T);
    const Eigen::MatrixXd gamma = st.density();
    g1 = reduced_dm(gamma, H.basis, 1);
    g2 = reduced_dm(gamma, H.basis, 2);
    j["potential"] = pot.describe();
    j["dimension"] = H.basis.size();
    j["logZ"] = st.logZ;
    std::vector<double> occ(a.modes);
    for (int q = 0; q < a.modes; ++q) occ[q] = g1(q, q);
    j["occupations"] = occ;
    j["free_energy"] = free_energy(gamma, H, a.T);
  }
  Json rdm = Json::array();
  for (Eigen::Index r = 0; r < g1.rows(); ++r) {
    std::vector<double> row(g1.cols());
    for (Eigen::Index c = 0; c < g1.cols(); ++c) row[c] = g1(r, c);
    rdm.push_back(row);
  }
  j["gamma1"] = rdm;
  if (a.out.empty()) {
    std::cout << j.dump(2) << "\n";
    return 0;
  }
  write_text(a.out + ".json", j.dump(2) + "\n");
  write_text(a.out + "_gamma1.csv", matrix_csv(g1));
  // free case: <n_j n_k>; interacting case: Gamma^(2) indexed i*d + j
  write_text(a.out + (a.g == 0.0 ? "_pairs.csv" : "_gamma2.csv"), matrix_csv(g2));
  return 0;
}

// --- relax ------------------------------------------------------------------

struct RelaxArgs {
  std::string basis;
  int modes = 8;
  double m = 1.0, T = 8.0, eps = 0.1;
  int n_max = 0;
  std::string out;
};

int run_relax(const RelaxArgs& a) {
  const auto basis = load_basis(a.basis);
  detail::require(a.modes >= 1 && a.modes <= basis.n_modes(), "--modes exceeds the basis");
  const std::vector<double> rates(basis.eigenvalues.begin(), basis.eigenvalues.begin() + a.modes);
  const int n_max =
      a.n_max > 0 ? a.n_max : static_cast<int>(std::ceil(a.m * a.T + 10.0 * std::sqrt(a.eps * a.T * a.T / 2.0))) + 40;
  const auto w = relaxed_sector_weights(rates, a.m, a.T, a.eps, n_max);
  if (ends_with(a.out, ".csv")) {
    std::string body = "N,a_N\n";
    char line[64];
    for (std::size_t n = 0; n < w.a.size(); ++n) {
      std::snprintf(line, sizeof line, "%zu,%.17g\n", n, w.a[n]);
      body += line;
    }
    write_text(a.out, body);
    return 0;
  }
  Json j;
  j["m"] = a.m;
  j["T"] = a.T;
  j["eps"] = a.eps;
  j["N_max"] = n_max;
  j["log_z_total"] = w.log_z_total;
  j["moments"] = w.moments;
  j["a"] = w.a;
  write_text(a.out.empty() ? "-" : a.out, j.dump(2) + "\n");
  return 0;
}

// --- cannon -----------------------------------------------------------------

struct CannonArgs {
  std::vector<int> g;
  std::string out;
};

int run_cannon(const CannonArgs& a) {
  const int total = std::accumulate(a.g.begin(), a.g.end(), 0);
  detail::require(total % 2 == 1, "--g-vector must have an odd sum 2N + 1");
  const auto mt = cannon_match(a.g, (total - 1) / 2);
  Json j;
  j["g"] = a.g;
  j["N"] = mt.N;
  Json pairs = Json::array();
  for (std::size_t k = 0; k < mt.domain.size(); ++k)
    pairs.push_back(Json{{"from", mt.domain[k]}, {"to", mt.codomain[mt.image[k]]}, {"from_index", k},
                         {"to_index", mt.image[k]}, {"coordinate", mt.increment[k]}});
  j["matching"] = pairs;
  write_text(a.out.empty() ? "-" : a.out, j.dump(2) + "\n");
  return 0;
}

// --- verify -----------------------------------------------------------------

struct VerifyArgs {
  std::string suite = "all";
  std::string config;
  std::string out = "reports";
  bool strict = false;
  int threads = 0;
  std::uint64_t seed = 0;
  std::vector<std::string> formats{"json", "csv", "txt"};
  bool no_cache = false;
};

int run_verify(const VerifyArgs& a) {
  std::vector<std::string> suites;
  if (a.suite == "all") {
    suites = suite_ids();
  } else {
    suites.push_back(a.suite);
  }
  const Cache cache = a.no_cache ? Cache{} : Cache::from_environment();
  bool all_passed = true;
  for (const auto& id : suites) {
    auto cfg = a.config.empty() ? default_config(id) : load_config(a.config, id);
    if (a.strict) cfg.strict = true;
    if (a.threads > 0) cfg.threads = a.threads;
    if (a.seed > 0) cfg.seed = a.seed;
    const auto report = run_suite(cfg, cache);
    emit(report, a.out, a.formats);
    int passed = 0;
    for (const auto& c : report.clauses) passed += c.pass;
    std::cout << (report.passed() ? "PASS " : "FAIL ") << id << "  " << passed << "/" << report.clauses.size()
              << " clauses  " << report.wall_clock_seconds << " s\n";
    for (const auto& c : report.clauses)
      if (!c.pass) std::cout << "  failed " << c.id << ": value " << c.value << " " << c.comparison << " " << c.tolerance << "\n";
    all_passed = all_passed && report.passed();
  }
  return all_passed ? 0 : kFailedClauses;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"mean-field Bose gas toolkit, version " + library_version()};
  app.require_subcommand(1);
  app.set_version_flag("--version", library_version());

  SpectrumArgs sp;
  auto* spectrum = app.add_subcommand("spectrum", "solve -d^2/dx^2 + |x|^s and store the basis");
  spectrum->add_option("--s", sp.s, "exponent s >= 2, or inf for the unit box")->required();
  spectrum->add_option("--modes", sp.modes, "number of eigenpairs")->check(CLI::PositiveNumber);
  spectrum->add_option("--grid", sp.grid, "interior grid points")->check(CLI::PositiveNumber);
  spectrum->add_option("--half-width", sp.half_width, "domain [-L, L] (ignored for the box)");
  spectrum->add_option("--scheme", sp.scheme, "fd2, fd4 or spectral");
  spectrum->add_option("--out", sp.out, "basis container, or eigenvalue CSV when ending in .csv")->required();
  spectrum->add_option("--csv", sp.csv, "also write eigenvalues as CSV");
  spectrum->add_flag("--no-cache", sp.no_cache, "bypass the spectrum cache");

  DensityArgs de;
  auto* density = app.add_subcommand("density", "tabulate f_Lambda, g_Lambda and f_0");
  density->add_option("--basis", de.basis, "basis container")->required();
  density->add_option("--split-lambda", de.split, "split eigenvalue Lambda")->required();
  density->add_option("--eta-max", de.eta_max, "largest mass on the grid");
  density->add_option("--eta-points", de.eta_points, "grid points")->check(CLI::Range(2, 1 << 24));
  density->add_option("--modes", de.modes, "truncate the basis to its first modes");
  density->add_option("--out", de.out, "CSV path (stdout when omitted)");

  SampleArgs sa;
  auto* sample = app.add_subcommand("sample", "draw fields from a classical measure");
  sample->add_option("--basis", sa.basis, "basis container")->required();
  sample->add_option("--measure", sa.measure, "gaussian, penalized, conditioned, sphere or interacting");
  sample->add_option("--m", sa.m, "mass");
  sample->add_option("--eps", sa.eps, "penalization width");
  sample->add_option("--g", sa.g, "coupling");
  sample->add_option("--lambda", sa.lambda, "cutoff Lambda");
  sample->add_option("--modes", sa.modes, "number of modes (overrides --lambda)");
  sample->add_option("--n", sa.n, "samples")->check(CLI::PositiveNumber);
  sample->add_option("--seed", sa.seed, "seed");
  sample->add_option("--convention", sa.convention, "radius or unit");
  sample->add_option("--base", sa.base, "reference of the interacting measure: sphere or conditioned");
  sa.potential.add(sample);
  sample->add_flag("--strict", sa.strict, "diagnostic warnings become errors");
  sample->add_option("--out", sa.out, "batch container, or CSV when ending in .csv");
  sample->add_option("--report", sa.report, "JSON estimates (stdout when neither --out nor --report is given)");

  CanonicalArgs ca;
  auto* canonical = app.add_subcommand("canonical", "canonical N-particle state on the lowest modes");
  canonical->add_option("--basis", ca.basis, "basis container")->required();
  canonical->add_option("--modes", ca.modes, "modes d")->check(CLI::PositiveNumber);
  canonical->add_option("--N", ca.N, "particles")->check(CLI::NonNegativeNumber);
  canonical->add_option("--T", ca.T, "temperature")->check(CLI::PositiveNumber);
  canonical->add_option("--g", ca.g, "coupling, 0 for the free recursion");
  ca.potential.add(canonical);
  canonical->add_option("--out", ca.out, "output prefix for <prefix>.json and CSV matrices (stdout JSON when omitted)");

  RelaxArgs re;
  auto* relax = app.add_subcommand("relax", "sector weights of the relaxed canonical state");
  relax->add_option("--basis", re.basis, "basis container")->required();
  relax->add_option("--modes", re.modes, "modes d")->check(CLI::PositiveNumber);
  relax->add_option("--m", re.m, "mass")->check(CLI::PositiveNumber);
  relax->add_option("--T", re.T, "temperature")->check(CLI::PositiveNumber);
  relax->add_option("--eps", re.eps, "relaxation width")->check(CLI::PositiveNumber);
  relax->add_option("--N-max", re.n_max, "largest sector (default from m, T and eps)");
  relax->add_option("--out", re.out, "JSON, or CSV of a_N when ending in .csv");

  CannonArgs cn;
  auto* cannon = app.add_subcommand("cannon", "bijection S_N -> S_{N+1} for a vector g with sum 2N + 1");
  cannon->add_option("--g-vector", cn.g, "comma separated g")->required()->delimiter(',');
  cannon->add_option("--out", cn.out, "JSON path (stdout when omitted)");

  VerifyArgs ve;
  auto* verify = app.add_subcommand("verify", "run experiment suites and write reports");
  std::vector<std::string> choices = suite_ids();
  choices.push_back("all");
  verify->add_option("--suite", ve.suite, "E1 .. E10 or all")->check(CLI::IsMember(choices));
  verify->add_option("--config", ve.config, "sectioned key = value file");
  verify->add_option("--out", ve.out, "report directory");
  verify->add_flag("--strict", ve.strict, "diagnostic warnings become errors");
  verify->add_option("--threads", ve.threads, "worker threads (overrides the config)");
  verify->add_option("--seed", ve.seed, "seed (overrides the config)");
  verify->add_option("--format", ve.formats, "json, csv, txt")->delimiter(',');
  verify->add_flag("--no-cache", ve.no_cache, "bypass the cache");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : kBadInput;
  }

  try {
    if (*spectrum) return run_spectrum(sp);
    if (*density) return run_density(de);
    if (*sample) return run_sample(sa);
    if (*canonical) return run_canonical(ca);
    if (*relax) return run_relax(re);
    if (*cannon) return run_cannon(cn);
    if (*verify) return run_verify(ve);
  } catch (const PreconditionError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kBadInput;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kRuntime;
  }
  return 0;
}
