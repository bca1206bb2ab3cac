#pragma once

// Throughput, latency, overhead and fork-resolution metrics plus the
// hash-chain correctness test, all computed from finished runs.

#include <algorithm>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "becp/core.hpp"
#include "becp/simulation.hpp"

namespace becp {

/// Blocks present in every node's ledger (genesis excluded), with the time
/// the last node confirmed each and the mean per-node confirmation time.
struct CommonBlock {
  BlockHeader header;
  double last_confirmed_at = 0.0;
  double mean_confirmed_at = 0.0;
};

inline std::vector<CommonBlock> commonBlocks(const RunResult& r) {
  if (r.ledgers.empty()) return {};
  struct Acc {
    BlockHeader header;
    std::size_t holders = 0;
    double last = 0.0;
    double sum = 0.0;
  };
  std::unordered_map<Digest, Acc, DigestHash> acc;
  for (const auto& ledger : r.ledgers) {
    for (std::size_t i = 1; i < ledger.size(); ++i) {
      const auto& e = ledger[i];
      auto& a = acc[e.header.hash];
      a.header = e.header;
      ++a.holders;
      a.last = std::max(a.last, e.confirmed_at);
      a.sum += e.confirmed_at;
    }
  }
  std::vector<CommonBlock> out;
  for (const auto& [h, a] : acc)
    if (a.holders == r.ledgers.size())
      out.push_back({a.header, a.last, a.sum / static_cast<double>(a.holders)});
  std::sort(out.begin(), out.end(), [](const CommonBlock& x, const CommonBlock& y) {
    return x.header.id < y.header.id;
  });
  return out;
}

inline double computeThroughput(const RunResult& r) {
  if (!(r.duration > 0.0)) return 0.0;
  return static_cast<double>(commonBlocks(r).size()) / r.duration;
}

/// Mean of (last confirmation - creation) over network-wide confirmed blocks.
inline std::optional<double> computeAvgLatency(const RunResult& r) {
  const auto blocks = commonBlocks(r);
  if (blocks.empty()) return std::nullopt;
  double sum = 0.0;
  for (const auto& b : blocks) sum += b.last_confirmed_at - b.header.t;
  return sum / static_cast<double>(blocks.size());
}

/// Same, but averaging each block's per-node confirmation times.
inline std::optional<double> computeAvgNodeLatency(const RunResult& r) {
  const auto blocks = commonBlocks(r);
  if (blocks.empty()) return std::nullopt;
  double sum = 0.0;
  for (const auto& b : blocks) sum += b.mean_confirmed_at - b.header.t;
  return sum / static_cast<double>(blocks.size());
}

inline std::uint64_t countMessages(const RunResult& r) { return r.messagesSent(); }

struct ForkCallRates {
  double top_level = 0.0;
  double recursive = 0.0;
};

/// Fork-resolution calls per network-wide confirmed block per node.
inline std::optional<ForkCallRates> forkCallsPerBlockPerNode(const RunResult& r) {
  const auto blocks = commonBlocks(r).size();
  if (blocks == 0 || r.n_nodes == 0) return std::nullopt;
  const double denom = static_cast<double>(blocks) * static_cast<double>(r.n_nodes);
  return ForkCallRates{static_cast<double>(r.forks.top_level) / denom,
                       static_cast<double>(r.forks.recursive) / denom};
}

struct TrialVerdict {
  bool chains_valid = true;
  bool prefix_consistent = true;
  std::size_t common_blocks = 0;

  bool pass() const { return chains_valid && prefix_consistent; }
};

/// Every ledger is a valid hash chain from genesis and all ledgers are
/// pairwise prefix-consistent.
inline TrialVerdict checkTrial(const RunResult& r) {
  TrialVerdict v;
  const Ledger* longest = nullptr;
  for (const auto& l : r.ledgers) {
    if (!l.valid()) v.chains_valid = false;
    if (!longest || l.size() > longest->size()) longest = &l;
  }
  // Pairwise prefix consistency reduces to: every ledger is a prefix of the longest.
  if (longest)
    for (const auto& l : r.ledgers)
      if (!l.isPrefixOf(*longest)) v.prefix_consistent = false;
  v.common_blocks = commonBlocks(r).size();
  return v;
}

struct CorrectnessReport {
  std::vector<TrialVerdict> trials;
  std::size_t failed = 0;
  std::size_t blocks = 0;  // smallest common confirmed count across trials

  bool pass() const { return failed == 0; }
  /// "Failed(f)/b".
  std::string summary() const {
    return "Failed(" + std::to_string(failed) + ")/" + std::to_string(blocks);
  }
};

inline CorrectnessReport correctnessTest(std::span<const RunResult> results) {
  CorrectnessReport rep;
  bool first = true;
  for (const auto& r : results) {
    auto v = checkTrial(r);
    if (!v.pass()) ++rep.failed;
    rep.blocks = first ? v.common_blocks : std::min(rep.blocks, v.common_blocks);
    first = false;
    rep.trials.push_back(v);
  }
  return rep;
}

/// Headline metrics of one run; exactly the metric columns of the CSV.
struct MetricsReport {
  std::uint64_t blocks_confirmed = 0;
  double throughput = 0.0;
  std::optional<double> avg_consensus_latency;
  std::uint64_t messages_sent = 0;
  std::optional<double> fork_calls_per_block_per_node;  // BECP only
  bool pass = false;

  friend bool operator==(const MetricsReport&, const MetricsReport&) = default;
};

inline MetricsReport computeMetrics(const RunResult& r) {
  MetricsReport m;
  m.blocks_confirmed = commonBlocks(r).size();
  m.throughput = computeThroughput(r);
  m.avg_consensus_latency = computeAvgLatency(r);
  m.messages_sent = countMessages(r);
  if (r.protocol == Protocol::Becp)
    if (auto f = forkCallsPerBlockPerNode(r)) m.fork_calls_per_block_per_node = f->top_level;
  m.pass = checkTrial(r).pass();
  return m;
}

/// Secondary readings reported in summaries but not in the CSV.
struct Diagnostics {
  std::optional<double> avg_node_latency;
  std::optional<double> recursive_fork_calls_per_block_per_node;
};

inline Diagnostics computeDiagnostics(const RunResult& r) {
  Diagnostics d;
  d.avg_node_latency = computeAvgNodeLatency(r);
  if (r.protocol == Protocol::Becp)
    if (auto f = forkCallsPerBlockPerNode(r)) d.recursive_fork_calls_per_block_per_node = f->recursive;
  return d;
}

}  // namespace becp
