#pragma once

// Results CSV shared by all protocols. Numbers are written in the shortest
// form that parses back to the same double, so rows round-trip exactly and
// repeated runs produce byte-identical files.

#include <array>
#include <charconv>
#include <cmath>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "becp/metrics.hpp"
#include "becp/simulation.hpp"

namespace becp {

inline constexpr std::array<std::string_view, 14> kCsvColumns = {
    "protocol",       "n_nodes",        "seed",          "duration_s",     "cycle_s",
    "p_block",        "latency_model",  "alpha",         "blocks_confirmed", "throughput_bps",
    "avg_latency_s",  "messages_sent",  "fork_calls_per_block_per_node",   "pass",
};

/// One CSV line. Trial rows carry a seed; aggregate rows leave it empty and
/// hold means over the trials (pass is the conjunction).
struct CsvRow {
  std::string protocol;
  std::uint64_t n_nodes = 0;
  std::optional<std::uint64_t> seed;
  double duration_s = 0.0;
  double cycle_s = 0.0;
  double p_block = 0.0;
  std::string latency_model;
  std::optional<double> alpha;  // pareto only
  double blocks_confirmed = 0.0;
  double throughput_bps = 0.0;
  std::optional<double> avg_latency_s;
  double messages_sent = 0.0;
  std::optional<double> fork_calls_per_block_per_node;
  bool pass = false;

  bool isAggregate() const { return !seed.has_value(); }

  friend bool operator==(const CsvRow&, const CsvRow&) = default;
};

inline CsvRow makeRow(const RunResult& r, const MetricsReport& m) {
  CsvRow row;
  row.protocol = toString(r.protocol);
  row.n_nodes = r.n_nodes;
  row.seed = r.seed;
  row.duration_s = r.duration;
  row.cycle_s = r.cycle_time;
  row.p_block = r.p_block;
  row.latency_model = r.latency.name();
  if (r.latency.kind == LatencyModel::Kind::Pareto) row.alpha = r.latency.alpha;
  row.blocks_confirmed = static_cast<double>(m.blocks_confirmed);
  row.throughput_bps = m.throughput;
  row.avg_latency_s = m.avg_consensus_latency;
  row.messages_sent = static_cast<double>(m.messages_sent);
  row.fork_calls_per_block_per_node = m.fork_calls_per_block_per_node;
  row.pass = m.pass;
  return row;
}

/// Inverse of makeRow for trial rows.
inline MetricsReport toReport(const CsvRow& row) {
  if (row.isAggregate()) throw std::invalid_argument("aggregate rows do not map to a single report");
  MetricsReport m;
  m.blocks_confirmed = static_cast<std::uint64_t>(row.blocks_confirmed);
  m.throughput = row.throughput_bps;
  m.avg_consensus_latency = row.avg_latency_s;
  m.messages_sent = static_cast<std::uint64_t>(row.messages_sent);
  m.fork_calls_per_block_per_node = row.fork_calls_per_block_per_node;
  m.pass = row.pass;
  return m;
}

/// Mean of trial rows that share one configuration.
inline CsvRow aggregateRow(std::span<const CsvRow> trials) {
  if (trials.empty()) throw std::invalid_argument("cannot aggregate zero rows");
  CsvRow a = trials.front();
  a.seed.reset();
  const double n = static_cast<double>(trials.size());
  auto mean = [&](auto field) {
    double s = 0.0;
    for (const auto& t : trials) s += t.*field;
    return s / n;
  };
  auto meanOpt = [&](auto field) -> std::optional<double> {
    double s = 0.0;
    std::size_t k = 0;
    for (const auto& t : trials)
      if (t.*field) {
        s += *(t.*field);
        ++k;
      }
    if (k == 0) return std::nullopt;
    return s / static_cast<double>(k);
  };
  a.blocks_confirmed = mean(&CsvRow::blocks_confirmed);
  a.throughput_bps = mean(&CsvRow::throughput_bps);
  a.messages_sent = mean(&CsvRow::messages_sent);
  a.avg_latency_s = meanOpt(&CsvRow::avg_latency_s);
  a.fork_calls_per_block_per_node = meanOpt(&CsvRow::fork_calls_per_block_per_node);
  a.pass = true;
  for (const auto& t : trials) a.pass = a.pass && t.pass;
  return a;
}

namespace detail {

inline std::string formatNumber(double x) {
  if (!std::isfinite(x)) throw std::invalid_argument("non-finite value in CSV");
  if (x == 0.0) return "0";  // also folds -0
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof buf, x);
  if (ec != std::errc{}) throw std::runtime_error("number formatting failed");
  return std::string(buf, p);
}

inline double readNumber(std::string_view col, const std::string& s) {
  double x = 0.0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), x);
  if (ec != std::errc{} || p != s.data() + s.size())
    throw std::invalid_argument("csv column " + std::string(col) + ": bad number '" + s + "'");
  return x;
}

inline std::uint64_t readUnsigned(std::string_view col, const std::string& s) {
  std::uint64_t x = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), x);
  if (ec != std::errc{} || p != s.data() + s.size())
    throw std::invalid_argument("csv column " + std::string(col) + ": bad integer '" + s + "'");
  return x;
}

}  // namespace detail

inline void writeCsvHeader(std::ostream& out) {
  for (std::size_t i = 0; i < kCsvColumns.size(); ++i) out << (i ? "," : "") << kCsvColumns[i];
  out << '\n';
}

inline void writeCsvRow(std::ostream& out, const CsvRow& r) {
  using detail::formatNumber;
  auto opt = [](const std::optional<double>& v) { return v ? formatNumber(*v) : std::string(); };
  out << r.protocol << ',' << r.n_nodes << ',' << (r.seed ? std::to_string(*r.seed) : std::string()) << ','
      << formatNumber(r.duration_s) << ',' << formatNumber(r.cycle_s) << ',' << formatNumber(r.p_block) << ','
      << r.latency_model << ',' << opt(r.alpha) << ',' << formatNumber(r.blocks_confirmed) << ','
      << formatNumber(r.throughput_bps) << ',' << opt(r.avg_latency_s) << ','
      << formatNumber(r.messages_sent) << ',' << opt(r.fork_calls_per_block_per_node) << ','
      << (r.pass ? "true" : "false") << '\n';
}

inline void emitCsv(std::ostream& out, std::span<const CsvRow> rows) {
  writeCsvHeader(out);
  for (const auto& r : rows) writeCsvRow(out, r);
}

inline std::string toCsv(std::span<const CsvRow> rows) {
  std::ostringstream s;
  emitCsv(s, rows);
  return s.str();
}

inline std::vector<CsvRow> readCsv(std::istream& in) {
  using namespace detail;
  std::string line;
  if (!std::getline(in, line)) throw std::invalid_argument("csv: empty input");
  {
    std::ostringstream expected;
    writeCsvHeader(expected);
    if (line + "\n" != expected.str()) throw std::invalid_argument("csv: unexpected header");
  }
  std::vector<CsvRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) f.push_back(cell);
    if (!line.empty() && line.back() == ',') f.emplace_back();
    if (f.size() != kCsvColumns.size())
      throw std::invalid_argument("csv: expected 14 columns, got " + std::to_string(f.size()));
    auto optNum = [&](std::size_t i) -> std::optional<double> {
      if (f[i].empty()) return std::nullopt;
      return readNumber(kCsvColumns[i], f[i]);
    };
    CsvRow r;
    r.protocol = f[0];
    r.n_nodes = readUnsigned(kCsvColumns[1], f[1]);
    if (!f[2].empty()) r.seed = readUnsigned(kCsvColumns[2], f[2]);
    r.duration_s = readNumber(kCsvColumns[3], f[3]);
    r.cycle_s = readNumber(kCsvColumns[4], f[4]);
    r.p_block = readNumber(kCsvColumns[5], f[5]);
    r.latency_model = f[6];
    r.alpha = optNum(7);
    r.blocks_confirmed = readNumber(kCsvColumns[8], f[8]);
    r.throughput_bps = readNumber(kCsvColumns[9], f[9]);
    r.avg_latency_s = optNum(10);
    r.messages_sent = readNumber(kCsvColumns[11], f[11]);
    r.fork_calls_per_block_per_node = optNum(12);
    if (f[13] != "true" && f[13] != "false") throw std::invalid_argument("csv column pass: bad value '" + f[13] + "'");
    r.pass = f[13] == "true";
    rows.push_back(std::move(r));
  }
  return rows;
}

}  // namespace becp
