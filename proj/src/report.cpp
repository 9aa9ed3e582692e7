#include "delta/report.hpp"

#include <charconv>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace delta::report {

using nlohmann::json;

namespace {

constexpr const char* kHeader =
    "method,scenario,rho,pi,B,alpha,lambda,seed,acc_mean_class,acc_overall,pred_std,pred_range,"
    "duration_ms";

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double parse_double(const std::string& s, const std::string& field) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    check_input(used == s.size(), "trailing characters");
    return v;
  } catch (const std::exception&) {
    throw IoError("cannot parse " + field + " value '" + s + "'");
  }
}

json row_to_json(const harness::ReportRow& r) {
  json j;
  j["method"] = r.method;
  j["scenario"] = r.scenario;
  j["rho"] = r.rho ? json(*r.rho) : json(nullptr);
  j["pi"] = r.pi ? json(*r.pi) : json(nullptr);
  j["B"] = r.batch_size;
  j["alpha"] = r.alpha;
  j["lambda"] = r.lambda;
  j["seed"] = r.seed;
  j["acc_mean_class"] = r.acc_mean_class;
  j["acc_overall"] = r.acc_overall;
  j["pred_std"] = r.pred_std;
  j["pred_range"] = r.pred_range;
  j["duration_ms"] = r.duration_ms;
  return j;
}

harness::ReportRow row_from_json(const json& j) {
  harness::ReportRow r;
  r.method = j.at("method").get<std::string>();
  r.scenario = j.at("scenario").get<std::string>();
  if (!j.at("rho").is_null()) r.rho = j.at("rho").get<double>();
  if (!j.at("pi").is_null()) r.pi = j.at("pi").get<double>();
  r.batch_size = j.at("B").get<std::size_t>();
  r.alpha = j.at("alpha").get<double>();
  r.lambda = j.at("lambda").get<double>();
  r.seed = j.at("seed").get<std::uint64_t>();
  r.acc_mean_class = j.at("acc_mean_class").get<double>();
  r.acc_overall = j.at("acc_overall").get<double>();
  r.pred_std = j.at("pred_std").get<double>();
  r.pred_range = j.at("pred_range").get<double>();
  r.duration_ms = j.at("duration_ms").get<double>();
  return r;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      fields.push_back(cur);
      cur.clear();
    } else {
      cur += ch;
    }
  }
  fields.push_back(cur);
  return fields;
}

}  // namespace

void write_jsonl(std::ostream& out, const std::vector<harness::ReportRow>& rows) {
  for (const auto& r : rows) out << row_to_json(r).dump() << '\n';
}

void write_csv(std::ostream& out, const std::vector<harness::ReportRow>& rows) {
  out << kHeader << '\n';
  for (const auto& r : rows) {
    out << r.method << ',' << r.scenario << ',' << (r.rho ? fmt(*r.rho) : "") << ','
        << (r.pi ? fmt(*r.pi) : "") << ',' << r.batch_size << ',' << fmt(r.alpha) << ','
        << fmt(r.lambda) << ',' << r.seed << ',' << fmt(r.acc_mean_class) << ','
        << fmt(r.acc_overall) << ',' << fmt(r.pred_std) << ',' << fmt(r.pred_range) << ','
        << fmt(r.duration_ms) << '\n';
  }
}

enum class Format { Csv, Jsonl };

Format format_from_path(const std::string& path) {
  auto has_suffix = [&](const char* suffix) {
    const std::size_t n = std::strlen(suffix);
    return path.size() >= n && path.compare(path.size() - n, n, suffix) == 0;
  };
  if (has_suffix(".csv")) return Format::Csv;
  if (has_suffix(".jsonl") || has_suffix(".json")) return Format::Jsonl;
  throw ConfigError("unsupported report extension for '" + path +
                    "' (expected .csv, .jsonl, or .json)");
}

void validate_path(const std::string& path) { format_from_path(path); }

void write_file(const std::string& path, const std::vector<harness::ReportRow>& rows) {
  const Format format = format_from_path(path);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  if (format == Format::Csv)
    write_csv(out, rows);
  else
    write_jsonl(out, rows);
  if (!out) throw IoError("failed writing report to '" + path + "'");
}

std::vector<harness::ReportRow> read_jsonl(std::istream& in) {
  std::vector<harness::ReportRow> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    try {
      rows.push_back(row_from_json(json::parse(line)));
    } catch (const json::exception& e) {
      throw IoError(std::string("malformed report line: ") + e.what());
    }
  }
  return rows;
}

std::vector<harness::ReportRow> read_csv(std::istream& in) {
  std::vector<harness::ReportRow> rows;
  std::string line;
  if (!std::getline(in, line)) throw IoError("empty report");
  if (line != kHeader) throw IoError("unexpected CSV header '" + line + "'");
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = split_csv_line(line);
    if (f.size() != 13)
      throw IoError("expected 13 CSV fields, got " + std::to_string(f.size()));
    harness::ReportRow r;
    r.method = f[0];
    r.scenario = f[1];
    if (!f[2].empty()) r.rho = parse_double(f[2], "rho");
    if (!f[3].empty()) r.pi = parse_double(f[3], "pi");
    r.batch_size = static_cast<std::size_t>(parse_double(f[4], "B"));
    r.alpha = parse_double(f[5], "alpha");
    r.lambda = parse_double(f[6], "lambda");
    r.seed = static_cast<std::uint64_t>(parse_double(f[7], "seed"));
    r.acc_mean_class = parse_double(f[8], "acc_mean_class");
    r.acc_overall = parse_double(f[9], "acc_overall");
    r.pred_std = parse_double(f[10], "pred_std");
    r.pred_range = parse_double(f[11], "pred_range");
    r.duration_ms = parse_double(f[12], "duration_ms");
    rows.push_back(std::move(r));
  }
  return rows;
}

std::vector<harness::ReportRow> read_file(const std::string& path) {
  const Format format = format_from_path(path);
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open report '" + path + "'");
  return format == Format::Csv ? read_csv(in) : read_jsonl(in);
}

}  // namespace delta::report
