// SPDX-License-Identifier: Apache-2.0
#include "vidbrain/bench/results.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <sstream>
#include <stdexcept>

#include "vidbrain/io/checkpoint.hpp"

namespace vidbrain::bench {

namespace {

std::string num(double v) {
  if (std::isnan(v)) return "nan";
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

double parse_num(const std::string& s) {
  if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size())
    throw std::invalid_argument("results: bad number '" + s + "'");
  return v;
}

bool same_num(double a, double b) { return (std::isnan(a) && std::isnan(b)) || a == b; }

nlohmann::json json_num(double v) { return std::isnan(v) ? nlohmann::json(nullptr) : nlohmann::json(v); }
double from_json_num(const nlohmann::json& j) {
  return j.is_null() ? std::numeric_limits<double>::quiet_NaN() : j.get<double>();
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

}  // namespace

bool ResultRow::failed() const { return std::isnan(mean_r); }

bool same_row(const ResultRow& a, const ResultRow& b) {
  return a.axis == b.axis && a.value == b.value && a.subject == b.subject && a.seed == b.seed &&
         same_num(a.mean_r, b.mean_r) && same_num(a.max_r, b.max_r) && same_num(a.final_loss, b.final_loss) &&
         same_num(a.wall_clock_s, b.wall_clock_s) && a.fingerprint == b.fingerprint;
}

bool same_rows(const std::vector<ResultRow>& a, const std::vector<ResultRow>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (!same_row(a[i], b[i])) return false;
  return true;
}

std::string rows_csv(const std::vector<ResultRow>& rows) {
  std::ostringstream out;
  out << kResultsHeader << "\n";
  for (const auto& r : rows)
    out << r.axis << "," << r.value << "," << r.subject << "," << r.seed << "," << num(r.mean_r) << ","
        << num(r.max_r) << "," << num(r.final_loss) << "," << num(r.wall_clock_s) << "," << r.fingerprint << "\n";
  return out.str();
}

std::vector<ResultRow> parse_rows_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != kResultsHeader) throw std::invalid_argument("results: unexpected CSV header");
  std::vector<ResultRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = split(line);
    if (f.size() != 9) throw std::invalid_argument("results: expected 9 fields in '" + line + "'");
    ResultRow r;
    r.axis = f[0];
    r.value = f[1];
    r.subject = f[2];
    r.seed = std::stoull(f[3]);
    r.mean_r = parse_num(f[4]);
    r.max_r = parse_num(f[5]);
    r.final_loss = parse_num(f[6]);
    r.wall_clock_s = parse_num(f[7]);
    r.fingerprint = f[8];
    rows.push_back(std::move(r));
  }
  return rows;
}

nlohmann::json rows_json(const std::vector<ResultRow>& rows, const SweepMeta& meta) {
  nlohmann::json j;
  j["axis"] = meta.axis;
  j["values"] = meta.values;
  j["seeds"] = meta.seeds;
  j["subjects"] = meta.subjects;
  j["meta"] = meta.extra;
  j["summary"] = summarize(rows, meta);
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& r : rows)
    arr.push_back({{"axis", r.axis},
                   {"value", r.value},
                   {"subject", r.subject},
                   {"seed", r.seed},
                   {"mean_r", json_num(r.mean_r)},
                   {"max_r", json_num(r.max_r)},
                   {"final_loss", json_num(r.final_loss)},
                   {"wall_clock_s", json_num(r.wall_clock_s)},
                   {"fingerprint", r.fingerprint}});
  j["rows"] = arr;
  return j;
}

std::vector<ResultRow> parse_rows_json(const nlohmann::json& j) {
  std::vector<ResultRow> rows;
  for (const auto& e : j.at("rows")) {
    ResultRow r;
    r.axis = e.at("axis").get<std::string>();
    r.value = e.at("value").get<std::string>();
    r.subject = e.at("subject").get<std::string>();
    r.seed = e.at("seed").get<std::uint64_t>();
    r.mean_r = from_json_num(e.at("mean_r"));
    r.max_r = from_json_num(e.at("max_r"));
    r.final_loss = from_json_num(e.at("final_loss"));
    r.wall_clock_s = from_json_num(e.at("wall_clock_s"));
    r.fingerprint = e.at("fingerprint").get<std::string>();
    rows.push_back(std::move(r));
  }
  return rows;
}

namespace {

struct ValueStats {
  std::map<std::string, std::vector<double>> by_subject;   // subject -> mean_r per seed
  std::map<std::uint64_t, std::vector<double>> by_seed;    // seed -> mean_r per subject
};

std::map<std::string, ValueStats> collect(const std::vector<ResultRow>& rows) {
  std::map<std::string, ValueStats> out;
  for (const auto& r : rows) {
    if (r.failed()) continue;
    out[r.value].by_subject[r.subject].push_back(r.mean_r);
    out[r.value].by_seed[r.seed].push_back(r.mean_r);
  }
  return out;
}

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? std::numeric_limits<double>::quiet_NaN() : s / static_cast<double>(v.size());
}

struct Spread {
  double mean, std, min, max;
  std::size_t n;
};

Spread seed_spread(const ValueStats& s) {
  std::vector<double> per_seed;
  for (const auto& [seed, v] : s.by_seed) per_seed.push_back(mean_of(v));
  Spread sp{mean_of(per_seed), 0.0, 0.0, 0.0, per_seed.size()};
  if (per_seed.empty()) return sp;
  sp.min = *std::min_element(per_seed.begin(), per_seed.end());
  sp.max = *std::max_element(per_seed.begin(), per_seed.end());
  double var = 0.0;
  for (double x : per_seed) var += (x - sp.mean) * (x - sp.mean);
  sp.std = std::sqrt(var / static_cast<double>(per_seed.size()));
  return sp;
}

}  // namespace

nlohmann::json summarize(const std::vector<ResultRow>& rows, const SweepMeta& meta) {
  const auto stats = collect(rows);
  nlohmann::json out = nlohmann::json::array();
  for (const auto& value : meta.values) {
    nlohmann::json e;
    e["value"] = value;
    nlohmann::json subj = nlohmann::json::object();
    auto it = stats.find(value);
    if (it != stats.end()) {
      for (const auto& [s, v] : it->second.by_subject) subj[s] = mean_of(v);
      const Spread sp = seed_spread(it->second);
      e["mean_r"] = json_num(sp.mean);
      e["std_r"] = sp.std;
      e["min_r"] = sp.min;
      e["max_r"] = sp.max;
      e["n_seeds"] = sp.n;
    } else {
      e["mean_r"] = nullptr;
      e["n_seeds"] = 0;
    }
    e["subject_mean_r"] = subj;
    out.push_back(e);
  }
  return out;
}

std::string plot_csv(const std::vector<ResultRow>& rows, const SweepMeta& meta) {
  const auto stats = collect(rows);
  std::ostringstream out;
  out << "value,mean_r,std_r,min_r,max_r,n_seeds\n";
  for (const auto& value : meta.values) {
    auto it = stats.find(value);
    if (it == stats.end()) {
      out << value << ",nan,nan,nan,nan,0\n";
      continue;
    }
    const Spread sp = seed_spread(it->second);
    out << value << "," << num(sp.mean) << "," << num(sp.std) << "," << num(sp.min) << "," << num(sp.max) << ","
        << sp.n << "\n";
  }
  return out.str();
}

void emit_report(const std::vector<ResultRow>& rows, const SweepMeta& meta, const std::filesystem::path& dir,
                 const EmitOptions& options) {
  if (rows.empty()) throw std::invalid_argument("emit_report: no rows");
  if (options.csv) io::write_file(dir / "results.csv", rows_csv(rows));
  if (options.json) io::write_file(dir / "results.json", rows_json(rows, meta).dump(2) + "\n");
  if (options.plot_data) io::write_file(dir / ("plot_" + meta.axis + ".csv"), plot_csv(rows, meta));
}

}  // namespace vidbrain::bench
