#pragma once

// Runs an ExperimentSpec end to end and writes results.csv, summary.txt and
// ledgers.txt (one digest line per run) into the output directory.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <openssl/evp.h>

#include "becp/config.hpp"
#include "becp/csv.hpp"
#include "becp/metrics.hpp"
#include "becp/simulation.hpp"

namespace becp {

/// SHA-256 over every node's ledger in node order: the length, then each
/// header's fields and stored hash.
inline Digest ledgerDigest(const RunResult& r) {
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), &EVP_MD_CTX_free);
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1) throw std::runtime_error("sha256 init failed");
  for (const auto& l : r.ledgers) {
    std::uint8_t len[8];
    detail::putLe64(len, l.size());
    EVP_DigestUpdate(ctx.get(), len, sizeof len);
    for (const auto& e : l.entries()) {
      const auto pre = detail::hashPreimage(e.header.id, e.header.creator, e.header.t, e.header.parent);
      EVP_DigestUpdate(ctx.get(), pre.data(), pre.size());
      EVP_DigestUpdate(ctx.get(), e.header.hash.data(), e.header.hash.size());
    }
  }
  Digest out{};
  unsigned int n = 0;
  if (EVP_DigestFinal_ex(ctx.get(), out.data(), &n) != 1 || n != out.size()) throw std::runtime_error("sha256 failed");
  return out;
}

/// Test mode: breaks one parent link in node 0's ledger.
inline void injectFault(RunResult& r) {
  if (r.ledgers.empty()) return;
  auto& entries = r.ledgers.front().mutableEntries();
  entries.back().header.parent[0] ^= 0xff;
}

struct ConfigOutcome {
  RunConfig config;
  std::vector<RunResult> results;
  std::vector<CsvRow> rows;  // trial rows
  CsvRow aggregate;
  CorrectnessReport correctness;
};

struct ExperimentOutcome {
  std::vector<ConfigOutcome> configs;

  bool pass() const {
    for (const auto& c : configs)
      if (!c.correctness.pass()) return false;
    return !configs.empty();
  }

  std::vector<CsvRow> csvRows() const {
    std::vector<CsvRow> out;
    for (const auto& c : configs) {
      out.insert(out.end(), c.rows.begin(), c.rows.end());
      out.push_back(c.aggregate);
    }
    return out;
  }
};

/// Runs every (config, trial) pair. `fault` corrupts the first trial of each
/// configuration before it is checked.
inline ExperimentOutcome executeExperiment(const ExperimentSpec& spec, bool fault = false) {
  ExperimentOutcome out;
  for (const auto& config : spec.expand()) {
    ConfigOutcome c;
    c.config = config;
    c.results = runTrials(config, spec.workers);
    if (fault) injectFault(c.results.front());
    for (const auto& r : c.results) c.rows.push_back(makeRow(r, computeMetrics(r)));
    c.aggregate = aggregateRow(c.rows);
    c.correctness = correctnessTest(c.results);
    out.configs.push_back(std::move(c));
  }
  return out;
}

namespace detail {
inline std::string fmt(double x, int prec = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", prec, x);
  return buf;
}
inline std::string fmt(const std::optional<double>& x, int prec = 4) { return x ? fmt(*x, prec) : "n/a"; }
}  // namespace detail

inline void writeSummary(std::ostream& out, const ExperimentOutcome& e) {
  using detail::fmt;
  for (const auto& c : e.configs) {
    const auto& a = c.aggregate;
    out << "protocol=" << a.protocol << " nodes=" << a.n_nodes << " p_block=" << fmt(a.p_block, 2)
        << " latency=" << a.latency_model;
    if (a.alpha) out << " alpha=" << fmt(*a.alpha, 2);
    out << " trials=" << c.rows.size() << '\n';
    out << "  blocks confirmed (mean) " << fmt(a.blocks_confirmed, 2) << '\n';
    out << "  throughput              " << fmt(a.throughput_bps) << " blocks/s\n";
    out << "  consensus latency       " << fmt(a.avg_latency_s) << " s (last confirmer)\n";
    double node_lat = 0.0;
    std::size_t k = 0;
    for (const auto& r : c.results)
      if (auto d = computeDiagnostics(r).avg_node_latency) {
        node_lat += *d;
        ++k;
      }
    if (k) out << "  per-node latency        " << fmt(node_lat / static_cast<double>(k)) << " s\n";
    out << "  messages sent (mean)    " << fmt(a.messages_sent, 1) << '\n';
    if (a.fork_calls_per_block_per_node) {
      double rec = 0.0;
      for (const auto& r : c.results) rec += computeDiagnostics(r).recursive_fork_calls_per_block_per_node.value_or(0.0);
      out << "  fork calls/block/node   " << fmt(a.fork_calls_per_block_per_node) << " (recursive "
          << fmt(rec / static_cast<double>(c.results.size())) << ")\n";
    }
    out << "  correctness             " << c.correctness.summary() << (c.correctness.pass() ? " pass" : " FAIL")
        << '\n';
  }
  out << (e.pass() ? "overall: pass\n" : "overall: FAIL\n");
}

inline void writeLedgerDigests(std::ostream& out, const ExperimentOutcome& e) {
  out << "protocol,n_nodes,seed,latency_model,alpha,p_block,min_ledger,max_ledger,digest\n";
  for (const auto& c : e.configs)
    for (std::size_t i = 0; i < c.results.size(); ++i) {
      const auto& r = c.results[i];
      std::size_t lo = r.ledgers.empty() ? 0 : r.ledgers.front().size(), hi = lo;
      for (const auto& l : r.ledgers) {
        lo = std::min(lo, l.size());
        hi = std::max(hi, l.size());
      }
      const auto& row = c.rows[i];
      out << row.protocol << ',' << row.n_nodes << ',' << r.seed << ',' << row.latency_model << ','
          << (row.alpha ? detail::formatNumber(*row.alpha) : "") << ',' << detail::formatNumber(row.p_block) << ','
          << lo - 1 << ',' << hi - 1 << ',' << toHex(ledgerDigest(r)) << '\n';
    }
}

/// Writes all outputs; returns 0 iff every trial passed the correctness test.
inline int runExperiment(const ExperimentSpec& spec, bool fault = false, std::ostream* log = nullptr) {
  const auto outcome = executeExperiment(spec, fault);
  std::filesystem::create_directories(spec.out_dir);
  const std::filesystem::path dir(spec.out_dir);
  auto open = [](const std::filesystem::path& p) {
    std::ofstream f(p, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write '" + p.string() + "'");
    return f;
  };
  {
    auto f = open(dir / "results.csv");
    const auto rows = outcome.csvRows();
    emitCsv(f, rows);
    if (!f) throw std::runtime_error("write failed: results.csv");
  }
  {
    auto f = open(dir / "summary.txt");
    writeSummary(f, outcome);
  }
  {
    auto f = open(dir / "ledgers.txt");
    writeLedgerDigests(f, outcome);
  }
  if (log) writeSummary(*log, outcome);
  return outcome.pass() ? 0 : 1;
}

}  // namespace becp
