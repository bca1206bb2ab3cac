#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <numeric>

#include "becp/ncp.hpp"

using namespace becp;

namespace {
std::vector<NodeId> range(std::uint32_t n) {
  std::vector<NodeId> v(n);
  for (std::uint32_t i = 0; i < n; ++i) v[i] = NodeId{i};
  return v;
}
}  // namespace

TEST(NcpInit, TwoNodes) {
  SplitMix64 rng(1);
  const auto all = range(2);
  auto c = ncpInit(NodeId{0}, all, 100, rng);
  ASSERT_EQ(c.size(), 1u);
  EXPECT_EQ(c.ids()[0], NodeId{1});
}

TEST(NcpInit, ThousandNodesGivesFullCache) {
  SplitMix64 rng(1);
  const auto all = range(1000);
  auto c = ncpInit(NodeId{17}, all, 100, rng);
  EXPECT_EQ(c.size(), 100u);
  EXPECT_FALSE(c.contains(NodeId{17}));
  // sorted and distinct
  for (std::size_t i = 1; i < c.size(); ++i) EXPECT_LT(c.ids()[i - 1], c.ids()[i]);
}

TEST(NcpInit, DeterministicForSeed) {
  const auto all = range(1000);
  SplitMix64 a(9), b(9);
  auto ca = ncpInit(NodeId{3}, all, 100, a);
  auto cb = ncpInit(NodeId{3}, all, 100, b);
  EXPECT_TRUE(std::equal(ca.ids().begin(), ca.ids().end(), cb.ids().begin(), cb.ids().end()));
}

TEST(NcpInit, OnlySelfIsAnError) {
  SplitMix64 rng(1);
  const std::vector<NodeId> only{NodeId{4}};
  EXPECT_THROW(ncpInit(NodeId{4}, only, 100, rng), std::invalid_argument);
}

TEST(MergeCache, Union) {
  SplitMix64 rng(1);
  PeerCache c(NodeId{0}, 100);
  c.add(NodeId{2});
  c.add(NodeId{3});
  const std::vector<NodeId> rx{NodeId{3}, NodeId{4}};
  mergeCache(c, rx, rng);
  ASSERT_EQ(c.size(), 3u);
  EXPECT_TRUE(c.contains(NodeId{2}) && c.contains(NodeId{3}) && c.contains(NodeId{4}));
}

TEST(MergeCache, EvictsToCapacityFromUnion) {
  SplitMix64 rng(5);
  PeerCache c(NodeId{0}, 100);
  for (std::uint32_t i = 1; i <= 100; ++i) c.add(NodeId{i});
  std::vector<NodeId> rx;
  for (std::uint32_t i = 101; i <= 150; ++i) rx.push_back(NodeId{i});
  mergeCache(c, rx, rng);
  EXPECT_EQ(c.size(), 100u);
  for (auto id : c.ids()) {
    EXPECT_GE(id.value, 1u);
    EXPECT_LE(id.value, 150u);
  }
}

TEST(MergeCache, SelfExcluded) {
  SplitMix64 rng(1);
  PeerCache c(NodeId{7}, 10);
  const std::vector<NodeId> rx{NodeId{7}, NodeId{8}};
  mergeCache(c, rx, rng);
  EXPECT_FALSE(c.contains(NodeId{7}));
  EXPECT_TRUE(c.contains(NodeId{8}));
}

TEST(GetRandomNode, SingleEntry) {
  SplitMix64 rng(1);
  PeerCache c(NodeId{0}, 10);
  c.add(NodeId{7});
  EXPECT_EQ(getRandomNode(c, rng), NodeId{7});
}

TEST(GetRandomNode, EmptyIsAnError) {
  SplitMix64 rng(1);
  PeerCache c(NodeId{0}, 10);
  EXPECT_THROW(getRandomNode(c, rng), std::logic_error);
}

// 10^5 draws over 100 ids: each count is Binomial(10^5, 0.01), mean 1000,
// sigma = sqrt(10^5 * 0.01 * 0.99) ~= 31.46.
TEST(GetRandomNode, UniformWithinThreeSigma) {
  SplitMix64 rng(2024);
  PeerCache c(NodeId{0}, 100);
  for (std::uint32_t i = 1; i <= 100; ++i) c.add(NodeId{i});
  std::map<std::uint32_t, int> count;
  for (int i = 0; i < 100000; ++i) ++count[getRandomNode(c, rng).value];
  const double sigma = std::sqrt(1e5 * 0.01 * 0.99);
  ASSERT_EQ(count.size(), 100u);
  for (const auto& [id, n] : count) EXPECT_LE(std::abs(n - 1000.0), 3 * sigma) << "id " << id;
}

TEST(GetRandomNode, ReproducibleSequence) {
  PeerCache c(NodeId{0}, 100);
  for (std::uint32_t i = 1; i <= 50; ++i) c.add(NodeId{i});
  SplitMix64 a(3), b(3);
  for (int i = 0; i < 100; ++i) EXPECT_EQ(getRandomNode(c, a), getRandomNode(c, b));
}

TEST(PeerCacheSample, DistinctAndBounded) {
  SplitMix64 rng(1);
  PeerCache c(NodeId{0}, 100);
  for (std::uint32_t i = 1; i <= 5; ++i) c.add(NodeId{i});
  auto s = c.sample(8, rng);
  EXPECT_EQ(s.size(), 5u);
  std::sort(s.begin(), s.end());
  EXPECT_EQ(std::adjacent_find(s.begin(), s.end()), s.end());
}
