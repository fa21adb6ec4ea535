#include <gtest/gtest.h>

#include <algorithm>

#include "retroroute/beam_search.hpp"
#include "retroroute/errors.hpp"
#include "support/test_util.hpp"

using namespace retroroute;
using testutil::TableSession;

namespace {

constexpr int kBos = 0;
constexpr int kEos = 1;

}  // namespace

TEST(BeamSearch, FullWidthEqualsExhaustiveEnumeration) {
  // Vocab 4 with <bos> never emitted in practice still counts as a token:
  // sequences ending in <eos> within 3 tokens plus all <eos>-free ones of length 3.
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    TableSession oracle(4, seed);
    const auto expected = testutil::exhaustive_sequences(oracle, 3, kBos, kEos);
    ASSERT_EQ(expected.size(), 1u + 3u + 9u + 27u);
    TableSession session(4, seed);
    const auto got = beam_search(session, 64, 3, kBos, kEos);
    ASSERT_EQ(got.size(), expected.size());
    for (std::size_t i = 0; i < got.size(); ++i) {
      EXPECT_EQ(got[i].ids, expected[i].ids) << "seed " << seed << " rank " << i;
      EXPECT_NEAR(got[i].logprob, expected[i].logprob, 1e-12);
      EXPECT_EQ(got[i].finished, expected[i].finished);
    }
  }
}

TEST(BeamSearch, CompleteBeamsNeverBeatExhaustiveOptimum) {
  for (std::uint64_t seed = 1; seed <= 30; ++seed) {
    TableSession oracle(5, seed);
    const auto all = testutil::exhaustive_sequences(oracle, 4, kBos, kEos);
    const double optimum = all.front().logprob;
    for (std::size_t width : {1u, 2u, 4u, 8u, 16u, 32u, 64u, 128u, 256u, 625u}) {
      TableSession session(5, seed);
      const auto got = beam_search(session, width, 4, kBos, kEos);
      ASSERT_FALSE(got.empty());
      EXPECT_TRUE(std::is_sorted(got.begin(), got.end(), beam_before));
      EXPECT_LE(got.size(), width);
      // Beams cut short when the pool fills are prefixes, not complete
      // sequences; only complete ones are bounded by the optimum.
      for (const auto& c : got) {
        if (c.finished || c.ids.size() == 4) EXPECT_LE(c.logprob, optimum + 1e-12);
      }
      if (width >= 625) EXPECT_NEAR(got.front().logprob, optimum, 1e-12);
    }
  }
}

TEST(BeamSearch, WidthOneIsGreedy) {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    TableSession oracle(6, seed);
    std::vector<int> prefix{kBos};
    std::vector<int> greedy;
    double lp = 0.0;
    while (greedy.size() < 5) {
      const auto dist = oracle.distribution(prefix);
      const auto best = static_cast<int>(std::max_element(dist.begin(), dist.end()) - dist.begin());
      greedy.push_back(best);
      prefix.push_back(best);
      lp += dist[static_cast<std::size_t>(best)];
      if (best == kEos) break;
    }
    TableSession session(6, seed);
    const auto got = beam_search(session, 1, 5, kBos, kEos);
    ASSERT_EQ(got.size(), 1u);
    EXPECT_EQ(got[0].ids, greedy);
    EXPECT_NEAR(got[0].logprob, lp, 1e-12);
  }
}

TEST(BeamSearch, TiesBreakLexicographically) {
  TableSession session(3, 0, /*uniform=*/true);
  const auto got = beam_search(session, 4, 2, kBos, kEos);
  // Finished [1] outranks every length-2 sequence; ties among those resolve
  // by ascending ids.
  ASSERT_EQ(got.size(), 4u);
  EXPECT_EQ(got[0].ids, (std::vector<int>{1}));
  EXPECT_TRUE(got[0].finished);
  const std::vector<std::vector<int>> rest{{0, 0}, {0, 1}, {0, 2}};
  for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(got[i + 1].ids, rest[i]);
}

TEST(BeamSearch, Deterministic) {
  TableSession a(7, 99), b(7, 99);
  const auto x = beam_search(a, 10, 6, kBos, kEos);
  const auto y = beam_search(b, 10, 6, kBos, kEos);
  ASSERT_EQ(x.size(), y.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    EXPECT_EQ(x[i].ids, y[i].ids);
    EXPECT_EQ(x[i].logprob, y[i].logprob);
  }
}

TEST(BeamSearch, FinishedSequencesEndInEos) {
  TableSession s(5, 3);
  for (const auto& c : beam_search(s, 20, 6, kBos, kEos)) {
    const bool ends = !c.ids.empty() && c.ids.back() == kEos;
    EXPECT_EQ(c.finished, ends);
    EXPECT_EQ(std::count(c.ids.begin(), c.ids.end(), kEos), ends ? 1 : 0);
    if (!c.finished) EXPECT_EQ(c.ids.size(), 6u);
  }
}

TEST(BeamSearch, RejectsBadArguments) {
  TableSession s(4, 1);
  EXPECT_THROW(beam_search(s, 0, 3, kBos, kEos), InputError);
  EXPECT_THROW(beam_search(s, 2, 0, kBos, kEos), InputError);
}
