#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "mfbose/error.hpp"
#include "mfbose/experiments.hpp"

namespace mfbose {

using Json = nlohmann::ordered_json;

namespace {

// non-finite numbers are stored as strings so that a parse restores them exactly
Json number(double x) {
  if (std::isfinite(x)) return x;
  if (std::isnan(x)) return "nan";
  return x > 0 ? "inf" : "-inf";
}

double number(const Json& j) {
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
  }
  throw IoError("report JSON: expected a number");
}

bool same(double a, double b) { return a == b || (std::isnan(a) && std::isnan(b)); }

std::string format(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::string brief(double x) {
  if (!std::isfinite(x)) return format(x);
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", x);
  return buf;
}

}  // namespace

bool Report::passed() const {
  for (const auto& c : clauses)
    if (!c.pass) return false;
  return true;
}

Table& Report::add_table(std::string name, std::vector<std::string> columns) {
  tables.push_back({std::move(name), std::move(columns), {}});
  return tables.back();
}

const Table* Report::find_table(const std::string& name) const {
  for (const auto& t : tables)
    if (t.name == name) return &t;
  return nullptr;
}

const Clause* Report::find_clause(const std::string& id) const {
  for (const auto& c : clauses)
    if (c.id == id) return &c;
  return nullptr;
}

bool operator==(const Report& a, const Report& b) {
  if (a.suite != b.suite || a.title != b.title || a.version != b.version ||
      a.coupling_convention != b.coupling_convention || a.seed != b.seed || a.threads != b.threads ||
      a.config != b.config || a.notes != b.notes || a.timestamp != b.timestamp ||
      !same(a.wall_clock_seconds, b.wall_clock_seconds) || a.tables.size() != b.tables.size() ||
      a.clauses.size() != b.clauses.size())
    return false;
  for (std::size_t i = 0; i < a.clauses.size(); ++i) {
    const auto &x = a.clauses[i], &y = b.clauses[i];
    if (x.id != y.id || x.description != y.description || !same(x.value, y.value) ||
        !same(x.tolerance, y.tolerance) || x.comparison != y.comparison || x.pass != y.pass ||
        x.calibration != y.calibration)
      return false;
  }
  for (std::size_t t = 0; t < a.tables.size(); ++t) {
    const auto &x = a.tables[t], &y = b.tables[t];
    if (x.name != y.name || x.columns != y.columns || x.rows.size() != y.rows.size()) return false;
    for (std::size_t r = 0; r < x.rows.size(); ++r) {
      if (x.rows[r].size() != y.rows[r].size()) return false;
      for (std::size_t c = 0; c < x.rows[r].size(); ++c)
        if (!same(x.rows[r][c], y.rows[r][c])) return false;
    }
  }
  return true;
}

std::string report_json(const Report& report, bool with_timestamp) {
  Json j;
  j["suite"] = report.suite;
  j["title"] = report.title;
  j["version"] = report.version;
  j["coupling_convention"] = report.coupling_convention;
  j["seed"] = report.seed;
  j["threads"] = report.threads;
  j["passed"] = report.passed();
  Json config = Json::object();
  for (const auto& [k, v] : report.config) config[k] = v;
  j["config"] = config;
  Json clauses = Json::array();
  for (const auto& c : report.clauses) {
    Json e;
    e["id"] = c.id;
    e["description"] = c.description;
    e["value"] = number(c.value);
    e["tolerance"] = number(c.tolerance);
    e["comparison"] = c.comparison;
    e["pass"] = c.pass;
    e["calibration"] = c.calibration;
    clauses.push_back(e);
  }
  j["clauses"] = clauses;
  Json tables = Json::array();
  for (const auto& t : report.tables) {
    Json e;
    e["name"] = t.name;
    e["columns"] = t.columns;
    Json rows = Json::array();
    for (const auto& r : t.rows) {
      Json row = Json::array();
      for (double x : r) row.push_back(number(x));
      rows.push_back(row);
    }
    e["rows"] = rows;
    tables.push_back(e);
  }
  j["tables"] = tables;
  j["notes"] = report.notes;
  if (with_timestamp) {
    Json ts;
    ts["utc"] = report.timestamp;
    ts["wall_clock_seconds"] = number(report.wall_clock_seconds);
    j["timestamp"] = ts;
  }
  return j.dump(2) + "\n";
}

Report parse_report_json(const std::string& text) {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const Json::exception& e) {
    throw IoError(std::string("report JSON: ") + e.what());
  }
  try {
    Report r;
    r.suite = j.at("suite").get<std::string>();
    r.title = j.at("title").get<std::string>();
    r.version = j.at("version").get<std::string>();
    r.coupling_convention = j.at("coupling_convention").get<std::string>();
    r.seed = j.at("seed").get<std::uint64_t>();
    r.threads = j.at("threads").get<int>();
    for (const auto& [k, v] : j.at("config").items()) r.config.emplace_back(k, v.get<std::string>());
    for (const auto& e : j.at("clauses")) {
      Clause c;
      c.id = e.at("id").get<std::string>();
      c.description = e.at("description").get<std::string>();
      c.value = number(e.at("value"));
      c.tolerance = number(e.at("tolerance"));
      c.comparison = e.at("comparison").get<std::string>();
      c.pass = e.at("pass").get<bool>();
      c.calibration = e.at("calibration").get<bool>();
      r.clauses.push_back(std::move(c));
    }
    for (const auto& e : j.at("tables")) {
      Table t;
      t.name = e.at("name").get<std::string>();
      t.columns = e.at("columns").get<std::vector<std::string>>();
      for (const auto& row : e.at("rows")) {
        std::vector<double> v;
        for (const auto& x : row) v.push_back(number(x));
        t.rows.push_back(std::move(v));
      }
      r.tables.push_back(std::move(t));
    }
    r.notes = j.at("notes").get<std::vector<std::string>>();
    if (j.contains("timestamp")) {
      r.timestamp = j["timestamp"].at("utc").get<std::string>();
      r.wall_clock_seconds = number(j["timestamp"].at("wall_clock_seconds"));
    }
    return r;
  } catch (const Json::exception& e) {
    throw IoError(std::string("report JSON: ") + e.what());
  }
}

std::string table_csv(const Table& table) {
  std::ostringstream os;
  for (std::size_t c = 0; c < table.columns.size(); ++c) os << (c ? "," : "") << table.columns[c];
  os << "\n";
  for (const auto& row : table.rows) {
    for (std::size_t c = 0; c < row.size(); ++c) os << (c ? "," : "") << format(row[c]);
    os << "\n";
  }
  return os.str();
}

std::string report_text(const Report& report) {
  std::ostringstream os;
  os << report.suite << "  " << report.title << "\n";
  os << "version " << report.version << ", seed " << report.seed << ", threads " << report.threads
     << ", coupling " << report.coupling_convention << ", wall clock " << brief(report.wall_clock_seconds) << " s\n";
  if (!report.timestamp.empty()) os << "run at " << report.timestamp << "\n";
  os << "\n";
  int passed = 0;
  for (const auto& c : report.clauses) {
    passed += c.pass;
    os << (c.pass ? "PASS  " : "FAIL  ") << c.id << ": " << c.description << "\n      value " << brief(c.value)
       << " " << c.comparison << " " << brief(c.tolerance) << (c.calibration ? "  (calibration threshold)" : "")
       << "\n";
  }
  if (!report.notes.empty()) {
    os << "\nnotes\n";
    for (const auto& n : report.notes) os << "  " << n << "\n";
  }
  os << "\n" << (report.passed() ? "PASS" : "FAIL") << " " << passed << "/" << report.clauses.size()
     << " clauses\n";
  return os.str();
}

std::vector<std::string> emit(const Report& report, const std::string& dir, const std::vector<std::string>& formats) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory '" + dir + "': " + ec.message());
  std::vector<std::string> written;
  auto write = [&](const std::string& name, const std::string& body) {
    const std::string path = dir + "/" + name;
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    out << body;
    if (!out) throw IoError("write to '" + path + "' failed");
    written.push_back(path);
  };
  for (const auto& f : formats) {
    if (f == "json") {
      write(report.suite + ".json", report_json(report));
    } else if (f == "csv") {
      for (const auto& t : report.tables) write(report.suite + "_" + t.name + ".csv", table_csv(t));
    } else if (f == "txt") {
      write(report.suite + ".txt", report_text(report));
    } else {
      throw PreconditionError("unknown report format '" + f + "'");
    }
  }
  return written;
}

}  // namespace mfbose
