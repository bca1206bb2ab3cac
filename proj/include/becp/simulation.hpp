#pragma once

// Deterministic discrete-event driver for BECP and the Snow baselines.

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <exception>
#include <stdexcept>
#include <string>
#include <thread>
#include <variant>
#include <vector>

#include "becp/core.hpp"
#include "becp/event_queue.hpp"
#include "becp/latency.hpp"
#include "becp/ncp.hpp"
#include "becp/node.hpp"
#include "becp/rng.hpp"
#include "becp/snow.hpp"

namespace becp {

enum class Protocol : std::uint8_t { Becp, Snowman, Avalanche };

inline std::string toString(Protocol p) {
  switch (p) {
    case Protocol::Becp: return "becp";
    case Protocol::Snowman: return "snowman";
    case Protocol::Avalanche: return "avalanche";
  }
  return "?";
}

inline Protocol parseProtocol(const std::string& s) {
  if (s == "becp") return Protocol::Becp;
  if (s == "snowman") return Protocol::Snowman;
  if (s == "avalanche") return Protocol::Avalanche;
  throw std::invalid_argument("protocol: unknown value '" + s + "'");
}

struct RunConfig {
  Protocol protocol = Protocol::Becp;
  std::size_t n_nodes = 1000;
  double duration = 300.0;
  std::uint64_t seed = 1;
  int trials = 5;
  LatencyModel latency = LatencyModel::uniform();
  BecpParams becp;
  SnowParams snow = SnowParams::snowman();
  bool stagger_ticks = true;

  double cycleTime() const { return protocol == Protocol::Becp ? becp.cycle_time : snow.cycle_time; }
  double pBlock() const { return protocol == Protocol::Becp ? becp.p_block : snow.p_block; }
  double processingDelay() const { return protocol == Protocol::Becp ? becp.d1 : snow.d1; }

  void validate() const {
    if (n_nodes < 2) throw std::invalid_argument("nodes must be >= 2");
    if (!(duration > 0.0)) throw std::invalid_argument("duration must be > 0");
    if (trials < 1) throw std::invalid_argument("trials must be >= 1");
    latency.validate();
    if (protocol == Protocol::Becp)
      becp.validate();
    else
      snow.validate();
  }
};

/// Everything the metrics need from one run.
struct RunResult {
  Protocol protocol = Protocol::Becp;
  std::size_t n_nodes = 0;
  std::uint64_t seed = 0;
  double duration = 0.0;
  double cycle_time = 0.0;
  double p_block = 0.0;
  LatencyModel latency;

  std::uint64_t ticks = 0;
  std::uint64_t pushes = 0;
  std::uint64_t pulls = 0;
  std::uint64_t queries = 0;
  std::uint64_t responses = 0;
  ForkCounters forks;
  std::vector<Ledger> ledgers;

  std::uint64_t messagesSent() const { return pushes + pulls + queries + responses; }
};

namespace detail {
inline RunResult resultShell(const RunConfig& c) {
  RunResult r;
  r.protocol = c.protocol;
  r.n_nodes = c.n_nodes;
  r.seed = c.seed;
  r.duration = c.duration;
  r.cycle_time = c.cycleTime();
  r.p_block = c.pBlock();
  r.latency = c.latency;
  return r;
}
}  // namespace detail

/// Observed push for trace-driven oracles: (send time, sender, recipient).
struct PushRecord {
  double time;
  NodeId from;
  NodeId to;
};

class BecpNetwork {
 public:
  struct Tick {
    NodeId node;
  };
  struct Deliver {
    ExchangeMessage msg;
  };
  struct Generate {};
  using Payload = std::variant<Tick, Deliver, Generate>;

  explicit BecpNetwork(RunConfig config) : config_(std::move(config)), kernel_rng_(0) {
    if (config_.protocol != Protocol::Becp) throw std::invalid_argument("BecpNetwork needs protocol becp");
    config_.validate();
    SplitMix64 root(config_.seed);
    kernel_rng_ = root.fork(0);
    std::vector<NodeId> all(config_.n_nodes);
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = NodeId{static_cast<std::uint32_t>(i)};
    nodes_.reserve(config_.n_nodes);
    for (std::size_t i = 0; i < config_.n_nodes; ++i) {
      SplitMix64 rng = root.fork(i + 1);
      PeerCache peers = ncpInit(all[i], all, config_.becp.n_cache, rng);
      nodes_.emplace_back(all[i], i == 0, std::move(peers), rng, config_.becp);
    }
    for (std::size_t i = 0; i < config_.n_nodes; ++i) {
      const double offset = config_.stagger_ticks ? kernel_rng_.uniform(0.0, config_.becp.cycle_time) : 0.0;
      queue_.push(offset, Tick{all[i]});
    }
    if (!config_.becp.generate_on_tick) queue_.push(config_.becp.first_generation, Generate{});
  }

  BecpNetwork(const BecpNetwork&) = delete;
  BecpNetwork& operator=(const BecpNetwork&) = delete;

  const RunConfig& config() const { return config_; }
  double now() const { return now_; }
  std::span<const BecpNode> nodes() const { return nodes_; }
  BecpNode& node(NodeId id) { return nodes_[id.value]; }
  const EventQueue<Payload>& queue() const { return queue_; }
  void setPushTrace(std::vector<PushRecord>* trace) { trace_ = trace; }

  /// Processes one event. Returns false once the horizon is reached.
  bool step() {
    if (queue_.empty() || queue_.top().time >= config_.duration) return false;
    auto ev = queue_.pop();
    now_ = ev.time;
    if (auto* t = std::get_if<Tick>(&ev.payload)) {
      BecpNode& n = nodes_[t->node.value];
      ++ticks_;
      ExchangeMessage push = n.onCycleTick(now_);
      ++pushes_;
      if (trace_) trace_->push_back({now_, push.sender, push.recipient});
      send(std::move(push));
      queue_.push(now_ + config_.becp.cycle_time, Tick{t->node});
    } else if (std::holds_alternative<Generate>(ev.payload)) {
      for (auto& n : nodes_) n.maybeGenerateBlock(now_);
      queue_.push(now_ + config_.becp.t_block, Generate{});
    } else {
      auto& msg = std::get<Deliver>(ev.payload).msg;
      BecpNode& n = nodes_[msg.recipient.value];
      if (msg.kind == MessageKind::Push) {
        ExchangeMessage pull = n.handlePush(msg, now_);
        ++pulls_;
        send(std::move(pull));
      } else {
        n.handlePull(msg, now_);
      }
    }
    return true;
  }

  void run() {
    while (step()) {
    }
  }

  // Runs all events strictly before `t`.
  void runUntil(double t) {
    while (!queue_.empty() && queue_.top().time < t && step()) {
    }
  }

  RunResult result() const {
    RunResult r = detail::resultShell(config_);
    r.ticks = ticks_;
    r.pushes = pushes_;
    r.pulls = pulls_;
    r.ledgers.reserve(nodes_.size());
    for (const auto& n : nodes_) {
      r.ledgers.push_back(n.ledger());
      r.forks += n.forkCounters();
    }
    return r;
  }

 private:
  void send(ExchangeMessage msg) {
    const double delay = config_.latency.sample(kernel_rng_) + config_.becp.d1;
    queue_.push(now_ + delay, Deliver{std::move(msg)});
  }

  RunConfig config_;
  SplitMix64 kernel_rng_;
  std::vector<BecpNode> nodes_;
  EventQueue<Payload> queue_;
  double now_ = 0.0;
  std::uint64_t ticks_ = 0;
  std::uint64_t pushes_ = 0;
  std::uint64_t pulls_ = 0;
  std::vector<PushRecord>* trace_ = nullptr;
};

class SnowNetwork {
 public:
  struct Tick {
    NodeId node;
  };
  struct Deliver {
    SnowMessage msg;
  };
  struct Generate {};
  using Payload = std::variant<Tick, Deliver, Generate>;

  explicit SnowNetwork(RunConfig config) : config_(std::move(config)), kernel_rng_(0) {
    if (config_.protocol == Protocol::Becp) throw std::invalid_argument("SnowNetwork needs a snow protocol");
    config_.validate();
    const auto variant =
        config_.protocol == Protocol::Snowman ? SnowVariant::Snowman : SnowVariant::Avalanche;
    SplitMix64 root(config_.seed);
    kernel_rng_ = root.fork(0);
    nodes_.reserve(config_.n_nodes);
    for (std::size_t i = 0; i < config_.n_nodes; ++i)
      nodes_.emplace_back(NodeId{static_cast<std::uint32_t>(i)}, variant, config_.snow, root.fork(i + 1));
    for (std::size_t i = 0; i < config_.n_nodes; ++i) {
      const double offset = config_.stagger_ticks ? kernel_rng_.uniform(0.0, config_.snow.cycle_time) : 0.0;
      queue_.push(offset, Tick{NodeId{static_cast<std::uint32_t>(i)}});
    }
    if (!config_.snow.generate_on_tick) queue_.push(config_.snow.first_generation, Generate{});
  }

  SnowNetwork(const SnowNetwork&) = delete;
  SnowNetwork& operator=(const SnowNetwork&) = delete;

  std::span<const SnowNode> nodes() const { return nodes_; }

  bool step() {
    if (queue_.empty() || queue_.top().time >= config_.duration) return false;
    auto ev = queue_.pop();
    now_ = ev.time;
    if (auto* t = std::get_if<Tick>(&ev.payload)) {
      ++ticks_;
      for (auto& q : nodes_[t->node.value].snowQueryRound(now_, config_.n_nodes)) {
        ++queries_;
        send(std::move(q));
      }
      queue_.push(now_ + config_.snow.cycle_time, Tick{t->node});
    } else if (std::holds_alternative<Generate>(ev.payload)) {
      for (auto& n : nodes_) n.maybeGenerateBlock(now_);
      queue_.push(now_ + config_.snow.t_block, Generate{});
    } else {
      auto& msg = std::get<Deliver>(ev.payload).msg;
      SnowNode& n = nodes_[msg.recipient.value];
      if (msg.kind == SnowMessage::Kind::Query) {
        SnowMessage resp = n.handleQuery(msg);
        ++responses_;
        send(std::move(resp));
      } else {
        n.handleResponse(msg, now_);
      }
    }
    return true;
  }

  void run() {
    while (step()) {
    }
  }

  RunResult result() const {
    RunResult r = detail::resultShell(config_);
    r.ticks = ticks_;
    r.queries = queries_;
    r.responses = responses_;
    r.ledgers.reserve(nodes_.size());
    for (const auto& n : nodes_) r.ledgers.push_back(n.ledger());
    return r;
  }

 private:
  void send(SnowMessage msg) {
    const double delay = config_.latency.sample(kernel_rng_) + config_.snow.d1;
    queue_.push(now_ + delay, Deliver{std::move(msg)});
  }

  RunConfig config_;
  SplitMix64 kernel_rng_;
  std::vector<SnowNode> nodes_;
  EventQueue<Payload> queue_;
  double now_ = 0.0;
  std::uint64_t ticks_ = 0;
  std::uint64_t queries_ = 0;
  std::uint64_t responses_ = 0;
};

inline RunResult runSimulation(const RunConfig& config) {
  if (config.protocol == Protocol::Becp) {
    BecpNetwork net(config);
    net.run();
    return net.result();
  }
  SnowNetwork net(config);
  net.run();
  return net.result();
}

/// One run per seed (seed, seed+1, ...); results in seed order. Runs may
/// execute on `workers` threads; each run is independent.
inline std::vector<RunResult> runTrials(const RunConfig& config, unsigned workers = 0) {
  if (config.trials < 1) throw std::invalid_argument("trials must be >= 1");
  std::vector<RunResult> results(static_cast<std::size_t>(config.trials));
  if (workers == 0) workers = std::max(1u, std::thread::hardware_concurrency());
  std::vector<std::thread> pool;
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(results.size());
  const auto work = [&] {
    for (std::size_t i = next++; i < results.size(); i = next++) {
      try {
        RunConfig c = config;
        c.seed = config.seed + i;
        results[i] = runSimulation(c);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  for (unsigned w = 1; w < std::min<std::size_t>(workers, results.size()); ++w) pool.emplace_back(work);
  work();
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return results;
}

}  // namespace becp
