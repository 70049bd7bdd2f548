#include <sstream>

#include <gtest/gtest.h>

#include "wqdil/random.hpp"
#include "wqdil/visit_archive.hpp"

using namespace wqdil;
using namespace wqdil::explore;

TEST(VisitCountArchive, SingleAndRepeatedVisits) {
  VisitCountArchive v;
  v.visit({0.0, 0.0});
  EXPECT_EQ(v.count(0, 0), 1u);
  EXPECT_EQ(v.total(), 1u);
  for (int i = 0; i < 6; ++i) v.visit({0.55, 0.95});
  EXPECT_EQ(v.count(5, 9), 6u);
  EXPECT_EQ(v.count_at({0.51, 0.99}), 6u);
  EXPECT_THROW(v.visit({1.2, 0.0}), std::out_of_range);
  EXPECT_EQ(v.total(), 7u);
}

TEST(VisitCountArchive, MatchesHistogramOracle) {
  Random rng(3);
  VisitCountArchive v(10);
  std::vector<std::uint64_t> hist(100, 0);
  for (int i = 0; i < 10000; ++i) {
    const Measure d{rng.uniform(), rng.uniform()};
    v.visit(d);
    ++hist[std::min(9, int(d[0] * 10)) * 10 + std::min(9, int(d[1] * 10))];
  }
  std::uint64_t sum = 0;
  for (int r = 0; r < 10; ++r) {
    for (int c = 0; c < 10; ++c) {
      EXPECT_EQ(v.count(r, c), hist[r * 10 + c]);
      sum += v.count(r, c);
    }
  }
  EXPECT_EQ(sum, v.total());
}

TEST(VisitCountArchive, ProportionAndBonusArithmetic) {
  VisitCountArchive v;
  EXPECT_EQ(v.proportion({0.2, 0.2}), 0.0);
  EXPECT_EQ(v.bonus({0.2, 0.2}), 1.0);
  for (int i = 0; i < 10; ++i) v.visit({1.0, 1.0});
  EXPECT_EQ(v.proportion({1.0, 1.0}), 1.0);
  EXPECT_EQ(v.bonus({1.0, 1.0}), 0.5);

  VisitCountArchive h;
  for (int i = 0; i < 5; ++i) h.visit({0.0, 0.0});
  for (int i = 0; i < 5; ++i) h.visit({1.0, 0.0});
  EXPECT_EQ(h.proportion({0.0, 0.0}), 0.5);
  EXPECT_NEAR(h.bonus({0.0, 0.0}), 2.0 / 3.0, 1e-15);
}

TEST(VisitCountArchive, CombinedReward) {
  VisitCountArchive v;
  EXPECT_DOUBLE_EQ(combined_reward(v, 0.4, {0.0, 0.0}, true), 1.4);
  EXPECT_DOUBLE_EQ(combined_reward(v, 0.4, {0.0, 0.0}, false), 0.4);
}

TEST(VisitCountArchive, BonusProperties) {
  Random rng(9);
  VisitCountArchive v(10);
  std::uint64_t last_total = 0;
  for (int i = 0; i < 2000; ++i) {
    const Measure q{rng.uniform(), rng.uniform()};
    const double b = v.bonus(q);
    ASSERT_GE(b, 0.5);
    ASSERT_LE(b, 1.0);
    v.visit({rng.uniform() < 0.5 ? 0.0 : 1.0, rng.uniform()});
    ASSERT_EQ(v.total(), last_total + 1);
    last_total = v.total();
  }
  // Proportions over cell centers sum to one.
  double sum = 0.0;
  for (int r = 0; r < 10; ++r) {
    for (int c = 0; c < 10; ++c) sum += v.proportion({(r + 0.5) / 10, (c + 0.5) / 10});
  }
  EXPECT_NEAR(sum, 1.0, 1e-12);
}

TEST(VisitCountArchive, MoreVisitsLowerBonusAndRaiseOthers) {
  VisitCountArchive v;
  v.visit({0.0, 0.0});
  v.visit({1.0, 1.0});
  const double other_before = v.bonus({1.0, 1.0});
  double last = v.bonus({0.0, 0.0});
  for (int i = 0; i < 20; ++i) {
    v.visit({0.0, 0.0});
    const double now = v.bonus({0.0, 0.0});
    EXPECT_LT(now, last);
    last = now;
  }
  EXPECT_GT(v.bonus({1.0, 1.0}), other_before);
}

TEST(VisitCountArchive, CsvSnapshot) {
  VisitCountArchive v(2);
  v.visit({0.0, 0.9});
  v.visit({0.0, 0.9});
  v.visit({0.9, 0.0});
  std::ostringstream os;
  v.write_csv(os);
  EXPECT_EQ(os.str(), "0,2\n1,0\n");
}
