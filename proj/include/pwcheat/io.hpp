#pragma once

// File formats: profile JSON, transfer/dataset/time-series CSV, and the
// JSON reports written by the command-line tool.
//
// CSV files may start with '#' metadata lines ("# key value"); numbers are
// written with 17 significant digits.

#include <cinttypes>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "pwcheat/dataset.hpp"
#include "pwcheat/errors.hpp"
#include "pwcheat/inverse.hpp"
#include "pwcheat/piecewise.hpp"
#include "pwcheat/time_domain.hpp"
#include "pwcheat/verify.hpp"

namespace pwcheat::io {

using Json = nlohmann::ordered_json;

inline constexpr const char* kToolVersion = "0.1.0";

/// FNV-1a, 64 bit.
inline std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016" PRIx64, v);
  return buf;
}

inline std::string format_double(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

/// Metadata carried by every artifact.
struct Metadata {
  std::string tool_version = kToolVersion;
  std::string config_digest;
  std::uint64_t seed = 0;
  std::vector<std::pair<std::string, std::string>> extra;

  std::string csv_header() const {
    std::string out = "# tool_version " + tool_version + "\n# config_digest " + config_digest + "\n# seed " +
                      std::to_string(seed) + "\n";
    for (const auto& [k, v] : extra) out += "# " + k + " " + v + "\n";
    return out;
  }

  Json json() const {
    Json j{{"tool_version", tool_version}, {"config_digest", config_digest}, {"seed", seed}};
    for (const auto& [k, v] : extra) j[k] = v;
    return j;
  }
};

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw IoError("failed reading " + path);
  return ss.str();
}

inline void write_file(const std::string& path, const std::string& contents) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path);
  out << contents;
  out.flush();
  if (!out) throw IoError("failed writing " + path);
}

// ---- profiles ----

inline Json profile_json(const ConductivityProfile& a) {
  return Json{{"breakpoints", a.breakpoints()}, {"values", a.values()}, {"c0", a.c0()}, {"c1", a.c1()}};
}

inline std::string profile_to_string(const ConductivityProfile& a) { return profile_json(a).dump(2) + "\n"; }

inline ConductivityProfile profile_from_json(const Json& j) {
  if (!j.is_object() || !j.contains("breakpoints") || !j.contains("values"))
    throw ValidationError("profile JSON needs \"breakpoints\" and \"values\"");
  try {
    const auto xs = j.at("breakpoints").get<std::vector<double>>();
    const auto vs = j.at("values").get<std::vector<double>>();
    const double c0 = j.value("c0", ConductivityProfile::kDefaultLowerBound);
    const double c1 = j.value("c1", ConductivityProfile::kDefaultUpperBound);
    return ConductivityProfile(xs, vs, c0, c1);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed profile JSON: ") + e.what());
  }
}

/// Piecewise function with the same JSON layout, without conductivity bounds
/// (used for q^2 profiles).
inline PiecewiseFunction piecewise_from_json(const Json& j) {
  if (!j.is_object() || !j.contains("breakpoints") || !j.contains("values"))
    throw ValidationError("profile JSON needs \"breakpoints\" and \"values\"");
  try {
    return normalize(PiecewiseFunction(j.at("breakpoints").get<std::vector<double>>(),
                                       j.at("values").get<std::vector<double>>()));
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed profile JSON: ") + e.what());
  }
}

inline Json parse_json(const std::string& text, const std::string& what) {
  try {
    return Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError(what + " is not valid JSON: " + e.what());
  }
}

inline ConductivityProfile load_profile(const std::string& path) {
  return profile_from_json(parse_json(read_file(path), path));
}

// ---- CSV ----

struct CsvTable {
  std::vector<std::pair<std::string, std::string>> metadata;
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;

  std::string meta(const std::string& key) const {
    for (const auto& [k, v] : metadata)
      if (k == key) return v;
    return {};
  }
};

inline std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, sep)) out.push_back(field);
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

inline double parse_number(const std::string& text, const std::string& context) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(text, &used);
  } catch (const std::exception&) {
    throw ValidationError("not a number in " + context + ": '" + text + "'");
  }
  while (used < text.size() && std::isspace(static_cast<unsigned char>(text[used]))) ++used;
  if (used != text.size()) throw ValidationError("not a number in " + context + ": '" + text + "'");
  return v;
}

inline CsvTable parse_csv(const std::string& text, const std::string& name) {
  CsvTable table;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line[0] == '#') {
      const auto body = line.substr(line.find_first_not_of("# ") == std::string::npos ? line.size()
                                                                                      : line.find_first_not_of("# "));
      const auto space = body.find(' ');
      table.metadata.emplace_back(body.substr(0, space), space == std::string::npos ? "" : body.substr(space + 1));
      continue;
    }
    if (table.header.empty()) {
      table.header = split(line, ',');
      continue;
    }
    const auto fields = split(line, ',');
    if (fields.size() != table.header.size())
      throw ValidationError(name + " line " + std::to_string(line_no) + ": expected " +
                            std::to_string(table.header.size()) + " fields");
    std::vector<double> row;
    for (const auto& f : fields) row.push_back(parse_number(f, name + " line " + std::to_string(line_no)));
    table.rows.push_back(std::move(row));
  }
  if (table.header.empty()) throw ValidationError(name + " has no header line");
  return table;
}

inline void require_header(const CsvTable& t, const std::vector<std::string>& want, const std::string& name) {
  if (t.header != want) {
    std::string joined;
    for (const auto& w : want) joined += (joined.empty() ? "" : ",") + w;
    throw ValidationError(name + " must have header '" + joined + "'");
  }
}

inline std::string dataset_to_csv(const TransferDataset& data, const Metadata& meta) {
  Metadata m = meta;
  const auto& p = data.provenance();
  m.extra.emplace_back("provenance", p.kind == Provenance::Kind::synthetic ? "synthetic" : "external");
  if (p.kind == Provenance::Kind::synthetic) {
    m.extra.emplace_back("noise_rel", format_double(p.noise_rel));
    m.extra.emplace_back("noise_seed", std::to_string(p.seed));
  }
  std::string out = m.csv_header() + "lambda,H,sigma\n";
  for (const auto& s : data.samples())
    out += format_double(s.lambda) + "," + format_double(s.H) + "," + format_double(s.sigma) + "\n";
  return out;
}

inline TransferDataset dataset_from_csv(const std::string& text, const std::string& name = "dataset") {
  const CsvTable t = parse_csv(text, name);
  require_header(t, {"lambda", "H", "sigma"}, name);
  std::vector<TransferSample> samples;
  for (const auto& r : t.rows) samples.push_back({r[0], r[1], r[2]});
  Provenance prov;
  if (t.meta("provenance") == "synthetic") {
    prov.kind = Provenance::Kind::synthetic;
    if (const auto s = t.meta("noise_rel"); !s.empty()) prov.noise_rel = parse_number(s, name + " noise_rel");
    if (const auto s = t.meta("noise_seed"); !s.empty()) prov.seed = std::stoull(s);
  }
  return TransferDataset(std::move(samples), prov);
}

inline std::string transfer_to_csv(const std::vector<std::pair<double, double>>& samples, const Metadata& meta) {
  std::string out = meta.csv_header() + "lambda,H\n";
  for (const auto& [lambda, h] : samples) out += format_double(lambda) + "," + format_double(h) + "\n";
  return out;
}

inline std::string series_to_csv(const TimeSeries& series, const Metadata& meta) {
  std::string out = meta.csv_header() + "t,f,g\n";
  for (std::size_t m = 0; m < series.size(); ++m)
    out += format_double(series.t(m)) + "," + format_double(series.f[m]) + "," + format_double(series.g[m]) + "\n";
  return out;
}

/// Reads t,f,g rows; t must be the uniform grid m*dt.
inline TimeSeries series_from_csv(const std::string& text, const std::string& name = "time series") {
  const CsvTable t = parse_csv(text, name);
  require_header(t, {"t", "f", "g"}, name);
  if (t.rows.size() < 2) throw ValidationError(name + " needs at least two rows");
  TimeSeries series;
  series.dt = t.rows[1][0] - t.rows[0][0];
  if (t.rows[0][0] != 0.0) throw ValidationError(name + " must start at t = 0");
  for (std::size_t m = 0; m < t.rows.size(); ++m) {
    if (std::abs(t.rows[m][0] - series.t(m)) > 1e-9 * std::max(1.0, series.t(m)))
      throw ValidationError(name + " must be sampled on a uniform time grid");
    series.f.push_back(t.rows[m][1]);
    series.g.push_back(t.rows[m][2]);
  }
  series.validate();
  return series;
}

// ---- reports ----

inline Json verification_json(const VerificationReport& report) {
  Json checks = Json::array();
  for (const auto& c : report.invariants)
    checks.push_back({{"name", c.name},
                      {"pass", c.pass},
                      {"worst_value", c.worst_value},
                      {"location", c.location},
                      {"instances", c.instances}});
  const auto& m = report.certificate;
  return Json{{"all_pass", report.all_pass()},
              {"invariants", checks},
              {"moment_certificate",
               {{"min_sv", m.min_singular_value},
                {"max_sv", m.max_singular_value},
                {"cond", m.condition},
                {"full_rank", m.full_rank()},
                {"null_solution_norm", report.null_solution_norm},
                {"k_grid", m.k_grid},
                {"partition", m.partition}}}};
}

inline Json reconstruction_json(const ReconstructionResult& r) {
  Json restarts = Json::array();
  for (const auto& s : r.restarts)
    restarts.push_back({{"objective", s.objective},
                        {"iterations", s.iterations},
                        {"stop", to_string(s.stop)},
                        {"converged", s.converged},
                        {"profile", profile_json(s.profile)}});
  return Json{{"profile", profile_json(r.profile)},
              {"objective", r.objective},
              {"iterations", r.iterations},
              {"converged", r.converged},
              {"stop", to_string(r.stop)},
              {"restarts_agreeing", r.restarts_agreeing},
              {"converged_restarts", r.converged_restarts},
              {"jacobian_condition", r.jacobian_condition},
              {"parameter_std", r.parameter_std},
              {"objective_history", r.objective_history},
              {"restarts", restarts}};
}

inline Json selection_json(const ModelSelection& sel) {
  Json candidates = Json::array();
  for (const auto& c : sel.candidates)
    candidates.push_back({{"n", c.n}, {"objective", c.objective}, {"score", c.score}, {"converged", c.converged}});
  return Json{{"best_n", sel.best_n}, {"candidates", candidates}, {"result", reconstruction_json(sel.result)}};
}

}  // namespace pwcheat::io
