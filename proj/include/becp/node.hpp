#pragma once

// BECP node: size estimation, peer cache and per-block phase transitions
// sharing one push/pull exchange per cycle.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "becp/core.hpp"
#include "becp/ncp.hpp"
#include "becp/rng.hpp"
#include "becp/ssep.hpp"

namespace becp {

/// How an unseen block id is accepted as extending the preferred block.
enum class ParentRule : std::uint8_t {
  ParentHash,      // parent hash equals the preferred block's hash
  CreatorLiteral,  // creator of the (known) parent equals the creator of the preferred block
};

struct BecpParams {
  double epsilon = 0.05;
  int psi_cycles = 5;
  double cycle_time = 0.351;
  double t_block = 10.0;
  double p_block = 0.05;
  double first_generation = 10.0;  // first generation boundary; later ones every t_block
  double timeout_lo = 1.0;
  double timeout_hi = 2.0;
  double d1 = 0.05;
  std::size_t n_cache = 100;
  std::size_t ncp_sample = 8;
  int echo_cycles = 10;     // cycles a confirmed block keeps mixing in exchanges
  bool adopt_phase = true;  // merged shares advance the local phase to theirs (never backwards)
  // false: every node attempts generation at the exact slot instant (driven by
  // the network); true: on its first cycle tick at or after the slot.
  bool generate_on_tick = false;
  ParentRule parent_rule = ParentRule::ParentHash;

  void validate() const {
    if (!(epsilon > 0.0 && epsilon < 1.0)) throw std::invalid_argument("epsilon must be in (0, 1)");
    if (psi_cycles < 1) throw std::invalid_argument("psi must be >= 1");
    if (!(cycle_time > 0.0)) throw std::invalid_argument("cycle must be > 0");
    if (!(t_block > 0.0)) throw std::invalid_argument("t_block must be > 0");
    if (!(p_block >= 0.0 && p_block <= 1.0)) throw std::invalid_argument("p_block must be in [0, 1]");
    if (!(timeout_lo > 0.0 && timeout_lo <= timeout_hi))
      throw std::invalid_argument("timeout_lo must be > 0 and <= timeout_hi");
    if (d1 < 0.0) throw std::invalid_argument("d1 must be >= 0");
    if (n_cache < 1) throw std::invalid_argument("n_cache must be >= 1");
    if (echo_cycles < 0) throw std::invalid_argument("echo_cycles must be >= 0");
  }
};

struct ForkCounters {
  std::uint64_t top_level = 0;
  std::uint64_t recursive = 0;

  ForkCounters& operator+=(const ForkCounters& o) {
    top_level += o.top_level;
    recursive += o.recursive;
    return *this;
  }
};

class BecpNode {
 public:
  // Confirmed blocks stay available for straggler mixing until this many
  // heights below the ledger tip.
  static constexpr std::uint64_t kEchoDepth = 3;

  BecpNode(NodeId id, bool is_seed, PeerCache peers, SplitMix64 rng, const BecpParams& params)
      : id_(id),
        params_(&params),
        ssep_(ssepInit(is_seed)),
        peers_(std::move(peers)),
        rng_(rng),
        pref_(genesis()),
        next_generation_(params.first_generation) {}

  NodeId id() const { return id_; }
  const EstimatorPair& ssep() const { return ssep_; }
  EstimatorPair& mutableSsep() { return ssep_; }
  const PeerCache& peers() const { return peers_; }
  const BlockLocalCache& cache() const { return cache_; }
  const Ledger& ledger() const { return ledger_; }
  const BlockHeader& preferred() const { return pref_; }
  const ForkCounters& forkCounters() const { return forks_; }
  SplitMix64& rng() { return rng_; }

  /// Periodic activation: phase checks, watchdogs, the generation attempt,
  /// then halve all shared mass into a Push for a random cached peer.
  ExchangeMessage onCycleTick(double now) {
    for (auto& e : echoes_) --e.cycles_left;
    std::erase_if(echoes_, [&](const Echo& e) { return e.block.header.id + kEchoDepth <= ledger_.tip().id; });
    updatePhases(now);
    expireWatchdogs(now);
    if (params_->generate_on_tick && now >= next_generation_) {
      maybeGenerateBlock(now);
      while (next_generation_ <= now) next_generation_ += params_->t_block;
    }
    return emit(MessageKind::Push, getRandomNode(peers_, rng_));
  }

  /// Merges a Push and answers with a Pull carrying half of the merged state.
  ExchangeMessage handlePush(const ExchangeMessage& msg, double now) {
    absorb(msg, now);
    return emit(MessageKind::Pull, msg.sender);
  }

  void handlePull(const ExchangeMessage& msg, double now) { absorb(msg, now); }

  /// Duplicate-id resolution for every incoming block share.
  void resolveDuplicateBlockId(std::span<const Block> incoming, double now) {
    for (const auto& in : incoming) resolveOne(in, now);
  }

  /// Removes `hash` and all its cached descendants. Counts one top-level call.
  void forkResolution(const Digest& hash) {
    CacheEntry* e = cache_.find(hash);
    if (!e) return;
    ++forks_.top_level;
    const Digest parent_hash = e->block.header.parent;
    if (CacheEntry* parent = cache_.find(parent_hash)) std::erase(parent->children, hash);
    removeSubtree(hash);
    if (pref_.hash != ledger_.tip().hash && !cache_.find(pref_.hash)) {
      const CacheEntry* parent = cache_.find(parent_hash);
      pref_ = parent ? parent->block.header : ledger_.tip();
    }
  }

  /// Points b_pref at a cached block or the ledger tip. Returns false if
  /// `hash` is neither.
  bool preferBlock(const Digest& hash) {
    if (const CacheEntry* e = cache_.find(hash)) {
      pref_ = e->block.header;
      return true;
    }
    if (hash == ledger_.tip().hash) {
      pref_ = ledger_.tip();
      return true;
    }
    return false;
  }

  /// Block generation attempt: fires with probability p_block.
  std::optional<Block> maybeGenerateBlock(double now) {
    if (!rng_.bernoulli(params_->p_block)) return std::nullopt;
    return generateBlock(now);
  }

  /// Creates a block on top of the preferred block unless one already
  /// occupies the next height.
  std::optional<Block> generateBlock(double now) {
    const std::uint64_t next_id = pref_.id + 1;
    if (!cache_.atId(next_id).empty()) return std::nullopt;
    Block b;
    b.header = BlockHeader::make(next_id, id_, now, pref_.hash);
    b.prop = {1.0, 1.0};
    b.agree = {0.0, 1.0};
    b.state = Phase::Propagation;
    markCountedInVp(b.header);
    cache_.insert(CacheEntry{b, {}, 0, 0, false, false, armDeadline(now)});
    if (CacheEntry* parent = cache_.find(pref_.hash)) parent->children.push_back(b.header.hash);
    pref_ = b.header;
    return b;
  }

  /// Runs the consecutive-cycle convergence checks against the size estimate
  /// and moves converged blocks to the ledger. Returns newly confirmed headers.
  std::vector<BlockHeader> updatePhases(double now) {
    std::vector<BlockHeader> confirmed;
    const auto n_hat = getSystemSize(ssep_);
    if (!n_hat) return confirmed;
    const double bound = params_->epsilon * *n_hat;
    const auto close = [&](const EstimatorPair& p) {
      const auto est = ratioEstimate(p);
      return est && std::abs(*est - *n_hat) <= bound;
    };
    cache_.forEach([&](CacheEntry& e) {
      if (e.block.state == Phase::Propagation) {
        e.prop_streak = close(e.block.prop) ? e.prop_streak + 1 : 0;
        if (e.prop_streak >= params_->psi_cycles) enterAgreement(e);
      } else if (e.block.state == Phase::Agreement && !e.agreed) {
        e.agree_streak = close(e.block.agree) ? e.agree_streak + 1 : 0;
        if (e.agree_streak >= params_->psi_cycles) e.agreed = true;
      }
    });
    // Confirm in id order; a converged block waits until its parent is ledgered.
    while (true) {
      const auto next = cache_.atId(ledger_.tip().id + 1);
      const CacheEntry* ready = nullptr;
      for (const auto& h : next) {
        const CacheEntry* e = cache_.find(h);
        if (e->agreed && e->block.header.parent == ledger_.tip().hash) ready = e;
      }
      if (!ready) break;
      const BlockHeader header = ready->block.header;
      for (const auto& h : std::vector<Digest>(next.begin(), next.end()))
        if (h != header.hash) forkResolution(h);
      Block frozen = ready->block;
      frozen.state = Phase::Confirmed;
      cache_.erase(header.hash);
      ledger_.append(header, now);
      if (params_->echo_cycles > 0) echoes_.push_back({frozen, params_->echo_cycles});
      confirmed.push_back(header);
      counted_vp_.erase(counted_vp_.begin(), counted_vp_.upper_bound(header.id));
      counted_va_.erase(counted_va_.begin(), counted_va_.upper_bound(header.id));
    }
    return confirmed;
  }

  /// Removes unconfirmed blocks off the preferred chain whose deadline passed.
  void expireWatchdogs(double now) {
    std::vector<Digest> on_chain;
    for (const CacheEntry* e = cache_.find(pref_.hash); e; e = cache_.find(e->block.header.parent))
      on_chain.push_back(e->block.header.hash);
    std::vector<Digest> stale;
    cache_.forEach([&](const CacheEntry& e) {
      if (e.deadline < now &&
          std::find(on_chain.begin(), on_chain.end(), e.block.header.hash) == on_chain.end())
        stale.push_back(e.block.header.hash);
    });
    for (const auto& h : stale) forkResolution(h);
  }

 private:
  double armDeadline(double now) { return now + rng_.uniform(params_->timeout_lo, params_->timeout_hi); }

  ExchangeMessage emit(MessageKind kind, NodeId to) {
    ExchangeMessage m;
    m.kind = kind;
    m.sender = id_;
    m.recipient = to;
    auto [kept, sent] = halveForSend(ssep_);
    ssep_ = kept;
    m.ssep_share = sent;
    m.ncp_sample = peers_.sample(params_->ncp_sample, rng_);
    m.block_shares.reserve(cache_.size());
    const auto share = [&](Block& b) {
      auto p = halveForSend(b.prop);
      auto a = halveForSend(b.agree);
      b.prop = p.kept;
      b.agree = a.kept;
      m.block_shares.push_back(Block{b.header, p.sent, a.sent, b.state});
    };
    for (auto& e : echoes_)
      if (e.cycles_left > 0) share(e.block);
    cache_.forEach([&](CacheEntry& e) { share(e.block); });
    return m;
  }

  void absorb(const ExchangeMessage& msg, double now) {
    ssep_ = mergePair(ssep_, msg.ssep_share);
    mergeCache(peers_, msg.ncp_sample, rng_);
    resolveDuplicateBlockId(msg.block_shares, now);
  }

  void resolveOne(const Block& in, double now) {
    const BlockHeader& h = in.header;
    // Heights at or below the ledger tip are immutable; only the mass of a
    // still-echoing confirmed block keeps mixing.
    if (h.id <= ledger_.tip().id) {
      for (auto& e : echoes_) {
        if (e.block.header.hash == h.hash) {
          e.block.prop += in.prop;
          e.block.agree += in.agree;
          e.cycles_left = std::max(e.cycles_left, 1);
        }
      }
      return;
    }
    const auto same_id = cache_.atId(h.id);
    if (!same_id.empty()) {
      CacheEntry* cur = cache_.find(same_id.front());
      const BlockHeader& c = cur->block.header;
      if (h.t == c.t && h.creator == c.creator) {
        cur->block.prop += in.prop;
        cur->block.agree += in.agree;
        cur->deadline = armDeadline(now);
        if (params_->adopt_phase) adoptPhase(*cur, in.state);
      } else if ((h.t == c.t && h.creator < c.creator) || h.t < c.t) {
        if (!parentKnown(h)) return;
        forkResolution(c.hash);
        install(in, now);
      }
      return;
    }
    if (extendsPreferred(h)) install(in, now);
  }

  bool parentKnown(const BlockHeader& h) const {
    if (h.id == ledger_.tip().id + 1) return h.parent == ledger_.tip().hash;
    return cache_.find(h.parent) != nullptr;
  }

  bool extendsPreferred(const BlockHeader& h) const {
    if (params_->parent_rule == ParentRule::ParentHash) return h.parent == pref_.hash;
    const BlockHeader* parent = lookupHeader(h.parent);
    return parent && parent->creator == pref_.creator;
  }

  const BlockHeader* lookupHeader(const Digest& hash) const {
    if (const CacheEntry* e = cache_.find(hash)) return &e->block.header;
    for (const auto& le : ledger_.entries())
      if (le.header.hash == hash) return &le.header;
    return nullptr;
  }

  void install(const Block& in, double now) {
    if (!in.header.hashValid()) return;
    CacheEntry e{in, {}, 0, 0, false, false, armDeadline(now)};
    if (markCountedInVp(in.header)) e.block.prop.v += 1.0;
    e.block.state = Phase::Propagation;
    adoptPhase(e, in.state);
    CacheEntry& stored = cache_.insert(std::move(e));
    if (CacheEntry* parent = cache_.find(in.header.parent)) parent->children.push_back(in.header.hash);
    // Adopt cached blocks that already name this one as parent.
    if (auto kids = cache_.atId(in.header.id + 1); !kids.empty()) {
      for (const auto& k : kids)
        if (cache_.find(k)->block.header.parent == in.header.hash) stored.children.push_back(k);
    }
    pref_ = in.header;
  }

  // Moves the local copy forward to `incoming`; an adopted confirmation is
  // ledgered on the next phase update once the parent is ledgered.
  void adoptPhase(CacheEntry& e, Phase incoming) {
    if (incoming == Phase::Propagation) return;
    if (e.block.state == Phase::Propagation) enterAgreement(e);
    if (incoming == Phase::Confirmed) e.agreed = true;
  }

  void enterAgreement(CacheEntry& e) {
    e.block.state = Phase::Agreement;
    if (!e.counted_in_va && markCounted(counted_va_, e.block.header)) e.block.agree.v += 1.0;
    e.counted_in_va = true;
  }

  bool markCountedInVp(const BlockHeader& h) { return markCounted(counted_vp_, h); }

  // True the first time this node counts itself into the block's estimator.
  static bool markCounted(std::map<std::uint64_t, std::vector<Digest>>& seen_by_id, const BlockHeader& h) {
    auto& seen = seen_by_id[h.id];
    if (std::find(seen.begin(), seen.end(), h.hash) != seen.end()) return false;
    seen.push_back(h.hash);
    return true;
  }

  void removeSubtree(const Digest& hash) {
    CacheEntry* e = cache_.find(hash);
    if (!e) return;
    const auto kids = e->children;
    for (const auto& k : kids) {
      if (cache_.find(k)) {
        ++forks_.recursive;
        removeSubtree(k);
      }
    }
    cache_.erase(hash);
  }

  struct Echo {
    Block block;
    int cycles_left;
  };

  NodeId id_;
  const BecpParams* params_;
  EstimatorPair ssep_;
  PeerCache peers_;
  SplitMix64 rng_;
  BlockLocalCache cache_;
  Ledger ledger_;
  BlockHeader pref_;
  double next_generation_;
  ForkCounters forks_;
  std::map<std::uint64_t, std::vector<Digest>> counted_vp_;
  std::map<std::uint64_t, std::vector<Digest>> counted_va_;
  std::vector<Echo> echoes_;
};

}  // namespace becp
