#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "mfbose/error.hpp"
#include "mfbose/experiments.hpp"

using namespace mfbose;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("mfbose-test-" + std::to_string(::testing::UnitTest::GetInstance()->random_seed()) + "-" +
            ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
  std::string str() const { return path.string(); }
};

std::string slurp(const std::string& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// A quick E7 instance: small Cannon range, coarse basis.
ExperimentConfig small_e7() {
  auto c = parse_config(
      "[run]\nseed = 7\n"
      "[E7]\ngrid = 256\nbasis_modes = 8\ncannon_N_max = 2\nshift_modes = 2, 4\nshift_T = 1, 4\nshift_N_max = 10\n",
      "E7");
  return c;
}

Report sample_report() {
  Report r;
  r.suite = "E0";
  r.title = "sample";
  r.version = "1";
  r.seed = 3;
  r.threads = 2;
  r.config = {{"run.seed", "3"}, {"E0.x", "1, 2"}};
  auto& t = r.add_table("t", {"a", "b"});
  t.rows = {{1.0, std::nan("")}, {-kInfinity, 1e-300}};
  r.add_table("empty", {"x"});
  r.clauses.push_back({"E0.c", "a clause", 0.5, 1.0, "<=", true, true});
  r.notes = {"note"};
  r.timestamp = "2020-01-01T00:00:00Z";
  r.wall_clock_seconds = 1.25;
  return r;
}

}  // namespace

TEST(Config, DefaultsForEverySuite) {
  const auto ids = suite_ids();
  ASSERT_EQ(ids.size(), 10u);
  EXPECT_EQ(ids.front(), "E1");
  EXPECT_EQ(ids.back(), "E10");
  for (const auto& id : ids) {
    const auto c = default_config(id);
    EXPECT_NO_THROW(validate_config(c)) << id;
    EXPECT_FALSE(suite_title(id).empty());
    EXPECT_FALSE(c.echo().empty());
  }
  EXPECT_THROW(default_config("E11"), PreconditionError);
}

TEST(Config, OverridesAndEcho) {
  const auto c = parse_config("[run]\nseed = 42\nthreads = 3\nstrict = true\n[E3]\nT = 8, 16\nm = 2\n[E1]\ndelta = 0.1\n",
                              "E3");
  EXPECT_EQ(c.seed, 42u);
  EXPECT_EQ(c.threads, 3);
  EXPECT_TRUE(c.strict);
  EXPECT_EQ(c.numbers("T"), (std::vector<double>{8, 16}));
  EXPECT_EQ(c.number("m"), 2.0);
  EXPECT_FALSE(c.has("delta"));  // other suites are checked, not applied
  // the echo round-trips through the file format
  const auto again = parse_config(c.to_text(), "E3");
  EXPECT_EQ(again.values, c.values);
  EXPECT_EQ(again.seed, c.seed);
  EXPECT_EQ(again.echo(), c.echo());
}

TEST(Config, Rejections) {
  EXPECT_THROW(parse_config("[E3]\nbogus = 1\n", "E3"), PreconditionError);
  EXPECT_THROW(parse_config("[E99]\nx = 1\n", "E3"), PreconditionError);
  EXPECT_THROW(parse_config("[run]\ncolor = red\n", "E3"), PreconditionError);
  EXPECT_THROW(parse_config("[run]\nthreads = 0\n", "E3"), PreconditionError);
  EXPECT_THROW(parse_config("[E3]\nT = 16, 8\n", "E3"), PreconditionError);
  EXPECT_THROW(parse_config("[E3]\nT =\n", "E3"), PreconditionError);
  EXPECT_THROW(parse_config("[E3]\nm = abc\n", "E3"), PreconditionError);
  EXPECT_THROW(parse_config("[E3]\nn_samples = -5\n", "E3"), PreconditionError);
  EXPECT_THROW(parse_config("[E1]\ndelta = x\n", "E3"), PreconditionError);  // checked even when not run
  EXPECT_THROW(load_config("/nonexistent/mfbose.ini", "E3"), IoError);
}

TEST(Cache, HitsAreIdempotentAndKeysAreSensitive) {
  TempDir dir;
  const Cache cache(dir.str());
  int builds = 0;
  auto build = [&] {
    ++builds;
    return std::vector<double>{1.0, 2.5, -kInfinity};
  };
  const auto a = cached_values(cache, "k1", build);
  const auto b = cached_values(cache, "k1", build);
  EXPECT_EQ(builds, 1);
  EXPECT_EQ(a, b);
  cached_values(cache, "k2", build);
  EXPECT_EQ(builds, 2);

  GridSpec g{2.0, 128, Scheme::fd4};
  GridSpec g2 = g;
  g2.n_points = 129;
  EXPECT_NE(spectrum_cache_key(8.0, g, 8), spectrum_cache_key(8.0, g2, 8));
  EXPECT_NE(spectrum_cache_key(8.0, g, 8), spectrum_cache_key(6.0, g, 8));
  EXPECT_NE(spectrum_cache_key(8.0, g, 8), spectrum_cache_key(8.0, g, 9));
  const auto s1 = cached_spectrum(cache, 8.0, g, 8);
  const auto s2 = cached_spectrum(cache, 8.0, g, 8);
  EXPECT_EQ(s1.eigenvalues, s2.eigenvalues);
  EXPECT_EQ(s1.eigenfunctions, s2.eigenfunctions);
  EXPECT_TRUE(fs::exists(cache.path(spectrum_cache_key(8.0, g, 8))));
}

TEST(Cache, CorruptEntryIsRebuilt) {
  TempDir dir;
  const Cache cache(dir.str());
  int builds = 0;
  auto build = [&] {
    ++builds;
    return std::vector<double>{3.0, 4.0};
  };
  cached_values(cache, "k", build);
  {
    std::fstream f(cache.path("k"), std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(20);
    f.put('\x7f');
  }
  testing::internal::CaptureStderr();
  const auto v = cached_values(cache, "k", build);
  const auto err = testing::internal::GetCapturedStderr();
  EXPECT_EQ(builds, 2);
  EXPECT_EQ(v, (std::vector<double>{3.0, 4.0}));
  EXPECT_NE(err.find("rebuilding"), std::string::npos);
  EXPECT_EQ(cached_values(cache, "k", build), v);
  EXPECT_EQ(builds, 2);
}

TEST(Cache, DisabledNeverHits) {
  const Cache off;
  EXPECT_FALSE(off.enabled());
  int builds = 0;
  auto build = [&] {
    ++builds;
    return std::vector<double>{1.0};
  };
  cached_values(off, "k", build);
  cached_values(off, "k", build);
  EXPECT_EQ(builds, 2);
}

TEST(Report, JsonRoundTrip) {
  const auto r = sample_report();
  const auto back = parse_report_json(report_json(r));
  EXPECT_TRUE(back == r);
  const auto plain = parse_report_json(report_json(r, false));
  EXPECT_TRUE(plain.timestamp.empty());
  EXPECT_THROW(parse_report_json("{"), IoError);
  EXPECT_THROW(parse_report_json("{\"suite\": 1}"), IoError);
}

TEST(Report, EmptyTableIsHeaderOnly) {
  const auto r = sample_report();
  EXPECT_EQ(table_csv(*r.find_table("empty")), "x\n");
  EXPECT_EQ(table_csv(*r.find_table("t")), "a,b\n1,nan\n-inf,1e-300\n");
}

TEST(Report, EmitWritesEveryFormat) {
  TempDir dir;
  const auto r = sample_report();
  const auto out = (dir.path / "nested").string();
  const auto files = emit(r, out);
  EXPECT_EQ(files.size(), 4u);
  for (const auto& f : files) EXPECT_TRUE(fs::exists(f)) << f;
  EXPECT_TRUE(parse_report_json(slurp(out + "/E0.json")) == r);
  EXPECT_NE(slurp(out + "/E0.txt").find("PASS  E0.c"), std::string::npos);
  EXPECT_THROW(emit(r, "/proc/mfbose-cannot-write"), IoError);
  EXPECT_THROW(emit(r, out, {"xml"}), PreconditionError);
}

TEST(Suite, DeterministicModuloTimestamp) {
  TempDir dir;
  const Cache cache(dir.str());
  const auto c = small_e7();
  const auto a = run_suite(c, cache);
  const auto b = run_suite(c, Cache{});
  EXPECT_EQ(report_json(a, false), report_json(b, false));
  EXPECT_TRUE(a.passed());
  EXPECT_EQ(a.coupling_convention, "g/N");
  EXPECT_FALSE(a.timestamp.empty());
  // the whole config is echoed
  bool seen = false;
  for (const auto& [k, v] : a.config) seen |= k == "E7.shift_N_max" && v == "10";
  EXPECT_TRUE(seen);
}

TEST(Suite, ErrorsNameTheSuite) {
  auto c = small_e7();
  c.set("shift_modes", "2, 400");  // more modes than the basis holds
  try {
    run_suite(c);
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("E7"), std::string::npos) << e.what();
  }
}
