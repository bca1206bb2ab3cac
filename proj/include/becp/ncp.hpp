#pragma once

// Node cache protocol: a bounded random sample of peer ids, refreshed by
// gossip and used to pick exchange partners.

#include <algorithm>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

#include "becp/core.hpp"
#include "becp/rng.hpp"

namespace becp {

class PeerCache {
 public:
  PeerCache(NodeId owner, std::size_t capacity) : owner_(owner), capacity_(capacity) {
    if (capacity == 0) throw std::invalid_argument("n_cache must be >= 1");
  }

  NodeId owner() const { return owner_; }
  std::size_t capacity() const { return capacity_; }
  std::size_t size() const { return ids_.size(); }
  bool empty() const { return ids_.empty(); }
  // Sorted ascending.
  std::span<const NodeId> ids() const { return ids_; }

  bool contains(NodeId id) const { return std::binary_search(ids_.begin(), ids_.end(), id); }

  // Ignores self and duplicates; may exceed capacity until shrinkTo().
  void add(NodeId id) {
    if (id == owner_) return;
    auto it = std::lower_bound(ids_.begin(), ids_.end(), id);
    if (it == ids_.end() || *it != id) ids_.insert(it, id);
  }

  void shrinkTo(std::size_t cap, SplitMix64& rng) {
    while (ids_.size() > cap) ids_.erase(ids_.begin() + static_cast<std::ptrdiff_t>(rng.below(ids_.size())));
  }

  /// Uniform sample of min(k, size) distinct cached ids.
  std::vector<NodeId> sample(std::size_t k, SplitMix64& rng) const {
    std::vector<NodeId> pool(ids_.begin(), ids_.end());
    k = std::min(k, pool.size());
    for (std::size_t i = 0; i < k; ++i) std::swap(pool[i], pool[i + rng.below(pool.size() - i)]);
    pool.resize(k);
    return pool;
  }

 private:
  NodeId owner_;
  std::size_t capacity_;
  std::vector<NodeId> ids_;
};

/// min(n_cache, N-1) distinct ids drawn without replacement from all_ids, excluding self.
inline PeerCache ncpInit(NodeId self, std::span<const NodeId> all_ids, std::size_t n_cache,
                         SplitMix64& rng) {
  PeerCache cache(self, n_cache);
  std::vector<NodeId> others;
  others.reserve(all_ids.size());
  for (auto id : all_ids)
    if (id != self) others.push_back(id);
  std::sort(others.begin(), others.end());
  others.erase(std::unique(others.begin(), others.end()), others.end());
  if (others.empty()) throw std::invalid_argument("node list contains no peer other than self");
  const std::size_t k = std::min(n_cache, others.size());
  for (std::size_t i = 0; i < k; ++i) {
    std::swap(others[i], others[i + rng.below(others.size() - i)]);
    cache.add(others[i]);
  }
  return cache;
}

/// Union of the local cache and a received sample, minus self, randomly
/// evicted down to capacity.
inline void mergeCache(PeerCache& local, std::span<const NodeId> received, SplitMix64& rng) {
  for (auto id : received) local.add(id);
  local.shrinkTo(local.capacity(), rng);
}

inline NodeId getRandomNode(const PeerCache& cache, SplitMix64& rng) {
  if (cache.empty()) throw std::logic_error("getRandomNode on an empty peer cache");
  return cache.ids()[rng.below(cache.size())];
}

}  // namespace becp
