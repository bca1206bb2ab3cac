#pragma once

// Shared data model: estimator pairs, blocks, the block local cache, the
// ledger and exchange messages.

#include <algorithm>
#include <array>
#include <bit>
#include <compare>
#include <cstdint>
#include <cstring>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include <openssl/evp.h>

namespace becp {

struct NodeId {
  std::uint32_t value = 0;

  friend constexpr auto operator<=>(NodeId, NodeId) = default;
};

using Digest = std::array<std::uint8_t, 32>;

struct DigestHash {
  std::size_t operator()(const Digest& d) const noexcept {
    std::size_t h;
    std::memcpy(&h, d.data(), sizeof h);
    return h;
  }
};

inline std::string toHex(const Digest& d) {
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(64);
  for (auto b : d) {
    out.push_back(kHex[b >> 4]);
    out.push_back(kHex[b & 0xf]);
  }
  return out;
}

/// (value, weight) mass taking part in conservative push-sum averaging.
struct EstimatorPair {
  double v = 0.0;
  double w = 0.0;

  EstimatorPair& operator+=(const EstimatorPair& o) {
    v += o.v;
    w += o.w;
    return *this;
  }
  friend EstimatorPair operator+(EstimatorPair a, const EstimatorPair& b) { return a += b; }
  friend bool operator==(const EstimatorPair&, const EstimatorPair&) = default;
};

enum class Phase : std::uint8_t { Propagation, Agreement, Confirmed };

inline const char* toString(Phase p) {
  switch (p) {
    case Phase::Propagation: return "propagation";
    case Phase::Agreement: return "agreement";
    case Phase::Confirmed: return "confirmed";
  }
  return "?";
}

namespace detail {
inline void putLe64(std::uint8_t* out, std::uint64_t x) {
  for (int i = 0; i < 8; ++i) out[i] = static_cast<std::uint8_t>(x >> (8 * i));
}

// id (u64 LE) | creator (u64 LE) | t (IEEE-754 double LE) | parent (32 bytes).
inline std::array<std::uint8_t, 56> hashPreimage(std::uint64_t id, NodeId creator, double t, const Digest& parent) {
  std::array<std::uint8_t, 56> buf{};
  putLe64(buf.data(), id);
  putLe64(buf.data() + 8, creator.value);
  putLe64(buf.data() + 16, std::bit_cast<std::uint64_t>(t));
  std::memcpy(buf.data() + 24, parent.data(), parent.size());
  return buf;
}
}  // namespace detail

inline Digest computeBlockHash(std::uint64_t id, NodeId creator, double t, const Digest& parent) {
  const auto buf = detail::hashPreimage(id, creator, t, parent);
  Digest out{};
  unsigned int len = 0;
  if (EVP_Digest(buf.data(), buf.size(), out.data(), &len, EVP_sha256(), nullptr) != 1 ||
      len != out.size()) {
    throw std::runtime_error("sha256 failed");
  }
  return out;
}

/// Immutable identity of a block. `id` is the chain height.
struct BlockHeader {
  std::uint64_t id = 0;
  NodeId creator;
  double t = 0.0;
  Digest parent{};
  Digest hash{};

  static BlockHeader make(std::uint64_t id, NodeId creator, double t, const Digest& parent) {
    return BlockHeader{id, creator, t, parent, computeBlockHash(id, creator, t, parent)};
  }

  bool hashValid() const { return hash == computeBlockHash(id, creator, t, parent); }

  friend bool operator==(const BlockHeader&, const BlockHeader&) = default;
};

inline const BlockHeader& genesis() {
  static const BlockHeader g = BlockHeader::make(0, NodeId{0}, 0.0, Digest{});
  return g;
}

/// A block as held or shared by one node: header plus the propagation
/// (vp, wp) and agreement (va, wa) estimators and the local phase.
struct Block {
  BlockHeader header;
  EstimatorPair prop;
  EstimatorPair agree;
  Phase state = Phase::Propagation;
};

/// Block local cache entry: the block plus per-node bookkeeping.
struct CacheEntry {
  Block block;
  std::vector<Digest> children;
  int prop_streak = 0;
  int agree_streak = 0;
  bool counted_in_va = false;
  bool agreed = false;  // agreement phase converged; waits for its parent to be ledgered
  double deadline = 0.0;
};

class BlockLocalCache {
 public:
  CacheEntry* find(const Digest& h) {
    auto it = entries_.find(h);
    return it == entries_.end() ? nullptr : &it->second;
  }
  const CacheEntry* find(const Digest& h) const {
    auto it = entries_.find(h);
    return it == entries_.end() ? nullptr : &it->second;
  }

  // All cached hashes at height `id`.
  std::span<const Digest> atId(std::uint64_t id) const {
    auto it = by_id_.find(id);
    if (it == by_id_.end()) return {};
    return it->second;
  }

  CacheEntry& insert(CacheEntry e) {
    const Digest h = e.block.header.hash;
    const auto id = e.block.header.id;
    auto [it, fresh] = entries_.insert_or_assign(h, std::move(e));
    if (fresh) by_id_[id].push_back(h);
    return it->second;
  }

  bool erase(const Digest& h) {
    auto it = entries_.find(h);
    if (it == entries_.end()) return false;
    auto& bucket = by_id_[it->second.block.header.id];
    std::erase(bucket, h);
    if (bucket.empty()) by_id_.erase(it->second.block.header.id);
    entries_.erase(it);
    return true;
  }

  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }

  // Visits entries in ascending id order.
  template <typename F>
  void forEach(F&& f) {
    for (auto& [id, hashes] : by_id_)
      for (const auto& h : hashes) f(entries_.at(h));
  }
  template <typename F>
  void forEach(F&& f) const {
    for (const auto& [id, hashes] : by_id_)
      for (const auto& h : hashes) f(entries_.at(h));
  }

  std::optional<std::uint64_t> maxId() const {
    if (by_id_.empty()) return std::nullopt;
    return by_id_.rbegin()->first;
  }

 private:
  std::unordered_map<Digest, CacheEntry, DigestHash> entries_;
  std::map<std::uint64_t, std::vector<Digest>> by_id_;
};

struct LedgerEntry {
  BlockHeader header;
  double confirmed_at = 0.0;
};

/// Append-only chain of confirmed blocks, genesis first.
class Ledger {
 public:
  Ledger() { entries_.push_back({genesis(), 0.0}); }

  const BlockHeader& tip() const { return entries_.back().header; }
  std::size_t size() const { return entries_.size(); }
  const LedgerEntry& operator[](std::size_t i) const { return entries_[i]; }
  std::span<const LedgerEntry> entries() const { return entries_; }

  void append(const BlockHeader& h, double when) {
    if (h.id != tip().id + 1 || h.parent != tip().hash)
      throw std::logic_error("ledger append does not extend the tip");
    entries_.push_back({h, when});
  }

  // Test hook for fault injection; bypasses every check.
  std::vector<LedgerEntry>& mutableEntries() { return entries_; }

  /// Genesis first, contiguous ids, parent links and stored hashes all valid.
  bool valid() const {
    if (entries_.empty() || entries_.front().header != genesis()) return false;
    for (std::size_t i = 1; i < entries_.size(); ++i) {
      const auto& h = entries_[i].header;
      const auto& prev = entries_[i - 1].header;
      if (h.id != prev.id + 1 || h.parent != prev.hash || !h.hashValid()) return false;
    }
    return true;
  }

  bool isPrefixOf(const Ledger& other) const {
    if (size() > other.size()) return false;
    for (std::size_t i = 0; i < size(); ++i)
      if (entries_[i].header.hash != other.entries_[i].header.hash) return false;
    return true;
  }

 private:
  std::vector<LedgerEntry> entries_;
};

enum class MessageKind : std::uint8_t { Push, Pull };

struct ExchangeMessage {
  MessageKind kind = MessageKind::Push;
  NodeId sender;
  NodeId recipient;
  EstimatorPair ssep_share;
  std::vector<NodeId> ncp_sample;
  std::vector<Block> block_shares;
};

}  // namespace becp
