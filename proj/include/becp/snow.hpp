#pragma once

// Chain-structured Snowman and Avalanche baselines: every cycle a node polls
// k peers drawn from the full membership about its frontier height and runs
// a Snowball-style confidence update on the responses.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "becp/core.hpp"
#include "becp/rng.hpp"

namespace becp {

enum class SnowVariant : std::uint8_t { Snowman, Avalanche };

struct SnowParams {
  int k = 20;
  int alpha1 = 10;
  int alpha2 = 15;
  // When > 0 the quorum is ceil(alpha1_fraction * responses received)
  // instead of alpha1, so late responses do not count against it.
  double alpha1_fraction = 0.0;
  // Poll every undecided height each round instead of only the frontier.
  bool pipeline = false;
  int beta1 = 15;
  int beta2 = 150;
  double cycle_time = 0.351;
  double t_block = 10.0;
  double p_block = 0.05;
  double first_generation = 10.0;
  double d1 = 0.05;
  bool generate_on_tick = false;  // see BecpParams::generate_on_tick

  static SnowParams snowman() { return {}; }
  static SnowParams avalanche() {
    SnowParams p;
    p.alpha1 = 16;  // 0.8 * k, used when every response arrives
    p.alpha2 = 16;
    p.alpha1_fraction = 0.8;
    p.beta1 = 50;
    p.beta2 = 150;
    return p;
  }

  void validate() const {
    if (k < 1) throw std::invalid_argument("k must be >= 1");
    if (alpha1 < 1 || alpha1 > k) throw std::invalid_argument("alpha1 must be in [1, k]");
    if (alpha2 < 1 || alpha2 > k) throw std::invalid_argument("alpha2 must be in [1, k]");
    if (!(alpha1_fraction >= 0.0 && alpha1_fraction <= 1.0))
      throw std::invalid_argument("alpha1_fraction must be in [0, 1]");
    if (beta1 < 1 || beta2 < 1) throw std::invalid_argument("beta values must be >= 1");
    if (!(cycle_time > 0.0)) throw std::invalid_argument("cycle must be > 0");
    if (!(t_block > 0.0)) throw std::invalid_argument("t_block must be > 0");
    if (!(p_block >= 0.0 && p_block <= 1.0)) throw std::invalid_argument("p_block must be in [0, 1]");
  }
};

struct SnowVote {
  std::uint64_t height = 0;
  std::optional<BlockHeader> block;
};

struct SnowMessage {
  enum class Kind : std::uint8_t { Query, Response };

  Kind kind = Kind::Query;
  NodeId sender;
  NodeId recipient;
  std::uint64_t round = 0;
  std::shared_ptr<const std::vector<SnowVote>> entries;
};

/// k distinct ids from [0, n) excluding `self` (Floyd's algorithm).
inline std::vector<NodeId> sampleDistinctPeers(NodeId self, std::size_t n, std::size_t k,
                                               SplitMix64& rng) {
  if (n < 2) throw std::invalid_argument("need at least two nodes to sample peers");
  const std::size_t others = n - 1;
  k = std::min(k, others);
  std::vector<std::uint32_t> picked;
  picked.reserve(k);
  for (std::size_t j = others - k; j < others; ++j) {
    auto r = static_cast<std::uint32_t>(rng.below(j + 1));
    if (std::find(picked.begin(), picked.end(), r) != picked.end()) r = static_cast<std::uint32_t>(j);
    picked.push_back(r);
  }
  std::vector<NodeId> out;
  out.reserve(k);
  for (auto r : picked) out.push_back(NodeId{r >= self.value ? r + 1 : r});
  return out;
}

class SnowNode {
 public:
  struct Candidate {
    BlockHeader header;
    int confidence = 0;
  };

  struct HeightState {
    std::vector<Candidate> blocks;  // first-seen order
    std::optional<Digest> pref;
    std::optional<Digest> last;
    int consecutive = 0;
    int unanimous = 0;  // consecutive rounds where all k responses agreed
    bool ready = false;

    Candidate* find(const Digest& h) {
      for (auto& c : blocks)
        if (c.header.hash == h) return &c;
      return nullptr;
    }
    const Candidate* find(const Digest& h) const {
      for (const auto& c : blocks)
        if (c.header.hash == h) return &c;
      return nullptr;
    }
  };

  SnowNode(NodeId id, SnowVariant variant, const SnowParams& params, SplitMix64 rng)
      : id_(id), variant_(variant), params_(&params), rng_(rng),
        next_generation_(params.first_generation) {}

  NodeId id() const { return id_; }
  const Ledger& ledger() const { return ledger_; }
  const std::map<std::uint64_t, HeightState>& pending() const { return pending_; }
  SplitMix64& rng() { return rng_; }

  /// Closes the previous round, runs a generation attempt, then polls k peers
  /// about the frontier height.
  std::vector<SnowMessage> snowQueryRound(double now, std::size_t n_nodes) {
    closeRound(now);
    if (params_->generate_on_tick && now >= next_generation_) {
      maybeGenerateBlock(now);
      while (next_generation_ <= now) next_generation_ += params_->t_block;
    }
    auto entries = std::make_shared<std::vector<SnowVote>>();
    const std::uint64_t frontier = ledger_.tip().id + 1;
    entries->push_back({frontier, preferredAt(frontier)});
    if (params_->pipeline)
      for (const auto& [h, st] : pending_)
        if (h > frontier && st.pref) entries->push_back({h, preferredAt(h)});
    queried_.clear();
    for (const auto& e : *entries) queried_.push_back(e.height);
    ++round_;
    round_open_ = true;
    responses_ = 0;
    votes_.clear();
    std::vector<SnowMessage> out;
    std::shared_ptr<const std::vector<SnowVote>> shared = std::move(entries);
    for (auto peer : sampleDistinctPeers(id_, n_nodes, static_cast<std::size_t>(params_->k), rng_))
      out.push_back(SnowMessage{SnowMessage::Kind::Query, id_, peer, round_, shared});
    return out;
  }

  /// Current answer for `height`: the accepted block, else the preference.
  std::optional<BlockHeader> snowOnQuery(std::uint64_t height) const {
    if (height <= ledger_.tip().id) return ledger_[height].header;
    return preferredAt(height);
  }

  SnowMessage handleQuery(const SnowMessage& q) {
    auto entries = std::make_shared<std::vector<SnowVote>>();
    entries->reserve(q.entries->size());
    for (const auto& e : *q.entries) {
      if (e.block) learn(*e.block);
      entries->push_back({e.height, snowOnQuery(e.height)});
    }
    return SnowMessage{SnowMessage::Kind::Response, id_, q.sender, q.round, std::move(entries)};
  }

  void handleResponse(const SnowMessage& r, double now) {
    for (const auto& e : *r.entries)
      if (e.block) learn(*e.block);
    if (!round_open_ || r.round != round_) return;
    for (const auto& e : *r.entries)
      votes_[e.height].push_back(e.block ? std::optional<Digest>(e.block->hash) : std::nullopt);
    if (++responses_ >= params_->k) closeRound(now);
  }

  /// Snowball step for one height given the round's responses.
  void snowUpdateConfidence(std::uint64_t height, std::span<const std::optional<Digest>> votes,
                            double now) {
    auto it = pending_.find(height);
    if (it == pending_.end()) return;
    HeightState& st = it->second;
    if (st.blocks.empty() || st.ready) return;

    const Candidate* best = nullptr;
    int best_count = 0;
    for (const auto& c : st.blocks) {
      const int n = static_cast<int>(std::count(votes.begin(), votes.end(), c.header.hash));
      if (n > best_count) {
        best = &c;
        best_count = n;
      }
    }
    if (best && best_count >= quorum(votes.size())) {
      const Digest winner = best->header.hash;
      Candidate* w = st.find(winner);
      ++w->confidence;
      const Candidate* cur = st.pref ? st.find(*st.pref) : nullptr;
      if (!cur || w->confidence > cur->confidence) st.pref = winner;
      const bool unanimous = best_count >= params_->k;
      if (st.last == winner) {
        ++st.consecutive;
        st.unanimous = unanimous ? st.unanimous + 1 : 0;
      } else {
        st.last = winner;
        st.consecutive = 1;
        st.unanimous = unanimous ? 1 : 0;
      }
      if (st.pref == winner) {
        if (variant_ == SnowVariant::Snowman) {
          st.ready = st.consecutive >= params_->beta1 && best_count >= params_->alpha2;
        } else {
          // Early acceptance after beta1 unanimous rounds, else beta2 quorum rounds.
          st.ready = st.unanimous >= params_->beta1 || st.consecutive >= params_->beta2;
        }
      }
    } else {
      st.consecutive = 0;
      st.unanimous = 0;
      st.last.reset();
      // Before any quorum has formed, drift toward the sampled plurality so a
      // many-way split at one height cannot stall forever.
      const Candidate* cur = st.pref ? st.find(*st.pref) : nullptr;
      if (best && (!cur || cur->confidence == 0)) st.pref = best->header.hash;
    }
    acceptReady(now);
  }

  void learn(const BlockHeader& h) {
    const auto tip = ledger_.tip();
    if (h.id <= tip.id) return;
    if (h.id == tip.id + 1 && h.parent != tip.hash) return;
    HeightState& st = pending_[h.id];
    if (st.find(h.hash)) return;
    st.blocks.push_back({h, 0});
    if (!st.pref) st.pref = h.hash;
  }

  std::optional<BlockHeader> maybeGenerateBlock(double now) {
    if (!rng_.bernoulli(params_->p_block)) return std::nullopt;
    BlockHeader parent = ledger_.tip();
    while (true) {
      auto it = pending_.find(parent.id + 1);
      if (it == pending_.end() || !it->second.pref) break;
      parent = it->second.find(*it->second.pref)->header;
    }
    const BlockHeader b = BlockHeader::make(parent.id + 1, id_, now, parent.hash);
    learn(b);
    return b;
  }

 private:
  int quorum(std::size_t received) const {
    if (params_->alpha1_fraction <= 0.0) return params_->alpha1;
    const double q = std::ceil(params_->alpha1_fraction * static_cast<double>(received) - 1e-9);
    return std::max(1, static_cast<int>(q));
  }

  std::optional<BlockHeader> preferredAt(std::uint64_t height) const {
    auto it = pending_.find(height);
    if (it == pending_.end() || !it->second.pref) return std::nullopt;
    return it->second.find(*it->second.pref)->header;
  }

  void closeRound(double now) {
    if (!round_open_) return;
    round_open_ = false;
    for (auto h : queried_)
      if (auto v = votes_.find(h); v != votes_.end()) snowUpdateConfidence(h, v->second, now);
  }

  // Accepts ready blocks in height order while they extend the ledger tip.
  void acceptReady(double now) {
    while (true) {
      auto it = pending_.find(ledger_.tip().id + 1);
      if (it == pending_.end() || !it->second.ready || !it->second.pref) return;
      const BlockHeader accepted = it->second.find(*it->second.pref)->header;
      if (accepted.parent != ledger_.tip().hash) return;
      ledger_.append(accepted, now);
      pending_.erase(it);
      auto next = pending_.find(accepted.id + 1);
      if (next == pending_.end()) continue;
      HeightState& st = next->second;
      std::erase_if(st.blocks, [&](const Candidate& c) { return c.header.parent != accepted.hash; });
      if (st.pref && !st.find(*st.pref)) {
        st.pref.reset();
        st.ready = false;
        const Candidate* top = nullptr;
        for (const auto& c : st.blocks)
          if (!top || c.confidence > top->confidence) top = &c;
        if (top) st.pref = top->header.hash;
      }
      if (st.last && !st.find(*st.last)) {
        st.last.reset();
        st.consecutive = 0;
        st.unanimous = 0;
      }
      if (st.blocks.empty()) pending_.erase(next);
    }
  }

  NodeId id_;
  SnowVariant variant_;
  const SnowParams* params_;
  SplitMix64 rng_;
  Ledger ledger_;
  std::map<std::uint64_t, HeightState> pending_;
  double next_generation_;

  std::uint64_t round_ = 0;
  bool round_open_ = false;
  int responses_ = 0;
  std::vector<std::uint64_t> queried_;
  std::map<std::uint64_t, std::vector<std::optional<Digest>>> votes_;
};

}  // namespace becp
