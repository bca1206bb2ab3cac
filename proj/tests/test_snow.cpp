#include <gtest/gtest.h>

#include <set>

#include "becp/simulation.hpp"
#include "becp/snow.hpp"

using namespace becp;

namespace {

using Votes = std::vector<std::optional<Digest>>;

Votes votes(std::initializer_list<std::pair<const BlockHeader*, int>> spec, int empty = 0) {
  Votes v;
  for (const auto& [h, n] : spec)
    for (int i = 0; i < n; ++i) v.emplace_back(h->hash);
  for (int i = 0; i < empty; ++i) v.emplace_back(std::nullopt);
  return v;
}

const BlockHeader kA = BlockHeader::make(1, NodeId{1}, 10.0, genesis().hash);
const BlockHeader kB = BlockHeader::make(1, NodeId{2}, 10.0, genesis().hash);

}  // namespace

TEST(SamplePeers, AllOthersWhenKIsNMinusOne) {
  SplitMix64 rng(1);
  for (std::uint32_t self = 0; self < 21; ++self) {
    const auto s = sampleDistinctPeers(NodeId{self}, 21, 20, rng);
    std::set<std::uint32_t> ids;
    for (auto id : s) ids.insert(id.value);
    EXPECT_EQ(ids.size(), 20u);
    EXPECT_FALSE(ids.count(self));
    EXPECT_LT(*ids.rbegin(), 21u);
  }
}

TEST(SamplePeers, DistinctAndRoughlyUniform) {
  SplitMix64 rng(2);
  std::vector<int> hits(100, 0);
  const int rounds = 20000;
  for (int r = 0; r < rounds; ++r) {
    const auto s = sampleDistinctPeers(NodeId{7}, 100, 20, rng);
    ASSERT_EQ(s.size(), 20u);
    std::set<std::uint32_t> ids;
    for (auto id : s) {
      ids.insert(id.value);
      ++hits[id.value];
    }
    ASSERT_EQ(ids.size(), 20u);
  }
  EXPECT_EQ(hits[7], 0);
  const double expect = rounds * 20.0 / 99.0;
  for (int i = 0; i < 100; ++i)
    if (i != 7) EXPECT_NEAR(hits[i], expect, 0.05 * expect) << i;
}

TEST(SamplePeers, ClampsToMembership) {
  SplitMix64 rng(3);
  EXPECT_EQ(sampleDistinctPeers(NodeId{0}, 5, 20, rng).size(), 4u);
  EXPECT_THROW(sampleDistinctPeers(NodeId{0}, 1, 20, rng), std::invalid_argument);
}

TEST(SnowNode, QueryRoundPollsKPeersAboutFrontier) {
  const auto p = SnowParams::snowman();
  SnowNode n(NodeId{0}, SnowVariant::Snowman, p, SplitMix64(4));
  n.learn(kA);
  const auto qs = n.snowQueryRound(10.1, 100);
  ASSERT_EQ(qs.size(), 20u);
  std::set<std::uint32_t> to;
  for (const auto& q : qs) {
    EXPECT_EQ(q.kind, SnowMessage::Kind::Query);
    to.insert(q.recipient.value);
    ASSERT_EQ(q.entries->size(), 1u);
    EXPECT_EQ(q.entries->front().height, 1u);
    EXPECT_EQ(q.entries->front().block, kA);
  }
  EXPECT_EQ(to.size(), 20u);
}

TEST(SnowNode, OnQueryAnswers) {
  const auto p = SnowParams::snowman();
  SnowNode n(NodeId{0}, SnowVariant::Snowman, p, SplitMix64(4));
  EXPECT_EQ(n.snowOnQuery(0), genesis());
  EXPECT_FALSE(n.snowOnQuery(1).has_value());
  n.learn(kA);
  n.learn(kB);
  EXPECT_EQ(n.snowOnQuery(1), kA);  // first seen
  for (int i = 0; i < 15; ++i) n.snowUpdateConfidence(1, votes({{&kA, 20}}), 11.0 + i);
  EXPECT_EQ(n.ledger().tip(), kA);
  EXPECT_EQ(n.snowOnQuery(1), kA);
}

TEST(SnowNode, QuerySpreadsBlocks) {
  const auto p = SnowParams::snowman();
  SnowNode a(NodeId{0}, SnowVariant::Snowman, p, SplitMix64(4));
  SnowNode b(NodeId{1}, SnowVariant::Snowman, p, SplitMix64(5));
  a.learn(kA);
  const auto qs = a.snowQueryRound(10.0, 2);
  ASSERT_EQ(qs.size(), 1u);
  const auto r = b.handleQuery(qs.front());
  EXPECT_EQ(b.snowOnQuery(1), kA);
  ASSERT_EQ(r.entries->size(), 1u);
  EXPECT_EQ(r.entries->front().block, kA);
}

TEST(SnowNode, LearnRejectsStaleAndDetached) {
  const auto p = SnowParams::snowman();
  SnowNode n(NodeId{0}, SnowVariant::Snowman, p, SplitMix64(4));
  n.learn(genesis());
  n.learn(BlockHeader::make(1, NodeId{3}, 5.0, kA.hash));  // wrong parent at the frontier
  EXPECT_TRUE(n.pending().empty());
  n.learn(BlockHeader::make(2, NodeId{3}, 20.0, kA.hash));  // further heights are kept
  EXPECT_EQ(n.pending().size(), 1u);
}

TEST(Snowman, AcceptsAfterBeta1Rounds) {
  const auto p = SnowParams::snowman();
  SnowNode n(NodeId{0}, SnowVariant::Snowman, p, SplitMix64(4));
  n.learn(kA);
  for (int i = 0; i < 14; ++i) n.snowUpdateConfidence(1, votes({{&kA, 15}}, 5), 11.0 + i);
  EXPECT_EQ(n.ledger().size(), 1u);
  EXPECT_EQ(n.pending().at(1).consecutive, 14);
  n.snowUpdateConfidence(1, votes({{&kA, 15}}, 5), 30.0);
  ASSERT_EQ(n.ledger().size(), 2u);
  EXPECT_EQ(n.ledger().tip(), kA);
  EXPECT_EQ(n.ledger()[1].confirmed_at, 30.0);
}

TEST(Snowman, LastRoundNeedsAlpha2) {
  const auto p = SnowParams::snowman();
  SnowNode n(NodeId{0}, SnowVariant::Snowman, p, SplitMix64(4));
  n.learn(kA);
  for (int i = 0; i < 14; ++i) n.snowUpdateConfidence(1, votes({{&kA, 20}}), 11.0 + i);
  n.snowUpdateConfidence(1, votes({{&kA, 12}}, 8), 25.0);  // quorum but below alpha2
  EXPECT_EQ(n.ledger().size(), 1u);
  EXPECT_EQ(n.pending().at(1).consecutive, 15);
  n.snowUpdateConfidence(1, votes({{&kA, 20}}), 26.0);
  EXPECT_EQ(n.ledger().tip(), kA);
}

TEST(Snowman, BelowQuorumResets) {
  const auto p = SnowParams::snowman();
  SnowNode n(NodeId{0}, SnowVariant::Snowman, p, SplitMix64(4));
  n.learn(kA);
  for (int i = 0; i < 10; ++i) n.snowUpdateConfidence(1, votes({{&kA, 20}}), 11.0 + i);
  n.snowUpdateConfidence(1, votes({{&kA, 9}}, 11), 21.0);
  const auto& st = n.pending().at(1);
  EXPECT_EQ(st.consecutive, 0);
  EXPECT_FALSE(st.last.has_value());
  EXPECT_EQ(st.find(kA.hash)->confidence, 10);  // confidence is kept
}

TEST(Snowman, SwitchesOnlyWhenRivalOvertakesConfidence) {
  const auto p = SnowParams::snowman();
  SnowNode n(NodeId{0}, SnowVariant::Snowman, p, SplitMix64(4));
  n.learn(kA);
  n.learn(kB);
  for (int i = 0; i < 3; ++i) n.snowUpdateConfidence(1, votes({{&kA, 12}, {&kB, 8}}), 11.0 + i);
  for (int i = 0; i < 3; ++i) {
    n.snowUpdateConfidence(1, votes({{&kA, 5}, {&kB, 15}}), 20.0 + i);
    EXPECT_EQ(n.snowOnQuery(1), kA) << "round " << i;  // tie at 3 keeps A
  }
  n.snowUpdateConfidence(1, votes({{&kA, 5}, {&kB, 15}}), 24.0);
  EXPECT_EQ(n.snowOnQuery(1), kB);
  EXPECT_EQ(n.pending().at(1).consecutive, 4);
}

TEST(Snowman, PluralityBootstrapBeforeAnyQuorum) {
  const auto p = SnowParams::snowman();
  SnowNode n(NodeId{0}, SnowVariant::Snowman, p, SplitMix64(4));
  n.learn(kA);
  n.learn(kB);
  n.snowUpdateConfidence(1, votes({{&kA, 3}, {&kB, 6}}, 11), 11.0);
  EXPECT_EQ(n.snowOnQuery(1), kB);
  // Once a quorum formed, sub-quorum pluralities no longer move the preference.
  n.snowUpdateConfidence(1, votes({{&kB, 12}}, 8), 12.0);
  n.snowUpdateConfidence(1, votes({{&kA, 9}}, 11), 13.0);
  EXPECT_EQ(n.snowOnQuery(1), kB);
}

TEST(Snowman, AcceptanceOrdersHeightsAndPrunesSiblings) {
  const auto p = SnowParams::snowman();
  SnowNode n(NodeId{0}, SnowVariant::Snowman, p, SplitMix64(4));
  const auto a2 = BlockHeader::make(2, NodeId{1}, 20.0, kA.hash);
  const auto b2 = BlockHeader::make(2, NodeId{2}, 20.0, kB.hash);
  n.learn(kA);
  n.learn(kB);
  n.learn(b2);
  n.learn(a2);
  for (int i = 0; i < 15; ++i) n.snowUpdateConfidence(2, votes({{&a2, 20}}), 11.0 + i);
  EXPECT_EQ(n.ledger().size(), 1u);  // height 1 not decided yet
  for (int i = 0; i < 15; ++i) n.snowUpdateConfidence(1, votes({{&kA, 20}}), 30.0 + i);
  ASSERT_EQ(n.ledger().size(), 3u);
  EXPECT_EQ(n.ledger()[1].header, kA);
  EXPECT_EQ(n.ledger()[2].header, a2);
  EXPECT_TRUE(n.ledger().valid());
}

TEST(Snowman, ChildOfLosingBlockDropped) {
  const auto p = SnowParams::snowman();
  SnowNode n(NodeId{0}, SnowVariant::Snowman, p, SplitMix64(4));
  const auto b2 = BlockHeader::make(2, NodeId{2}, 20.0, kB.hash);
  n.learn(kA);
  n.learn(kB);
  n.learn(b2);
  for (int i = 0; i < 15; ++i) n.snowUpdateConfidence(1, votes({{&kA, 20}}), 11.0 + i);
  EXPECT_EQ(n.ledger().tip(), kA);
  EXPECT_TRUE(n.pending().empty());
}

TEST(Avalanche, FractionalQuorumOverResponses) {
  const auto p = SnowParams::avalanche();
  SnowNode n(NodeId{0}, SnowVariant::Avalanche, p, SplitMix64(4));
  n.learn(kA);
  n.snowUpdateConfidence(1, votes({{&kA, 14}}, 3), 11.0);  // 14 of 17 >= ceil(13.6)
  EXPECT_EQ(n.pending().at(1).consecutive, 1);
  n.snowUpdateConfidence(1, votes({{&kA, 13}}, 4), 12.0);  // 13 of 17 < 14
  EXPECT_EQ(n.pending().at(1).consecutive, 0);
  n.snowUpdateConfidence(1, votes({{&kA, 16}}, 4), 13.0);  // 16 of 20
  EXPECT_EQ(n.pending().at(1).consecutive, 1);
}

TEST(Avalanche, EarlyAcceptanceNeedsUnanimousStreak) {
  const auto p = SnowParams::avalanche();
  SnowNode n(NodeId{0}, SnowVariant::Avalanche, p, SplitMix64(4));
  n.learn(kA);
  for (int i = 0; i < 49; ++i) n.snowUpdateConfidence(1, votes({{&kA, 20}}), 11.0 + i);
  EXPECT_EQ(n.ledger().size(), 1u);
  n.snowUpdateConfidence(1, votes({{&kA, 19}}, 1), 60.0);  // breaks the unanimous run only
  EXPECT_EQ(n.pending().at(1).unanimous, 0);
  EXPECT_EQ(n.pending().at(1).consecutive, 50);
  for (int i = 0; i < 49; ++i) n.snowUpdateConfidence(1, votes({{&kA, 20}}), 61.0 + i);
  EXPECT_EQ(n.ledger().size(), 1u);
  n.snowUpdateConfidence(1, votes({{&kA, 20}}), 110.0);
  EXPECT_EQ(n.ledger().tip(), kA);
}

TEST(Avalanche, Beta2WithoutUnanimity) {
  const auto p = SnowParams::avalanche();
  SnowNode n(NodeId{0}, SnowVariant::Avalanche, p, SplitMix64(4));
  n.learn(kA);
  for (int i = 0; i < 149; ++i) n.snowUpdateConfidence(1, votes({{&kA, 17}}, 3), 11.0 + i);
  EXPECT_EQ(n.ledger().size(), 1u);
  n.snowUpdateConfidence(1, votes({{&kA, 17}}, 3), 200.0);
  EXPECT_EQ(n.ledger().tip(), kA);
}

TEST(SnowParams, Validation) {
  auto p = SnowParams::snowman();
  EXPECT_NO_THROW(p.validate());
  p.alpha1 = 21;
  EXPECT_THROW(p.validate(), std::invalid_argument);
  p = SnowParams::avalanche();
  p.alpha1_fraction = 1.5;
  EXPECT_THROW(p.validate(), std::invalid_argument);
}

TEST(SnowNetwork, TwentyQueriesPerTickAndDeterministic) {
  RunConfig c;
  c.protocol = Protocol::Snowman;
  c.n_nodes = 50;
  c.duration = 30.0;
  c.trials = 1;
  const auto r = runSimulation(c);
  EXPECT_EQ(r.queries, 20 * r.ticks);
  EXPECT_LE(r.responses, r.queries);
  EXPECT_EQ(r.messagesSent(), r.queries + r.responses);
  const auto again = runSimulation(c);
  EXPECT_EQ(again.messagesSent(), r.messagesSent());
  for (const auto& l : r.ledgers) EXPECT_TRUE(l.valid());
}

TEST(SnowNetwork, SmallRunConfirmsConsistently) {
  RunConfig c;
  c.protocol = Protocol::Snowman;
  c.n_nodes = 50;
  c.duration = 80.0;
  c.trials = 1;
  const auto r = runSimulation(c);
  std::size_t longest = 0;
  for (const auto& l : r.ledgers) longest = std::max(longest, l.size());
  EXPECT_GT(longest, 2u);
  for (const auto& a : r.ledgers)
    for (const auto& b : r.ledgers) {
      const auto& shorter = a.size() <= b.size() ? a : b;
      const auto& longer = a.size() <= b.size() ? b : a;
      ASSERT_TRUE(shorter.isPrefixOf(longer));
    }
}
