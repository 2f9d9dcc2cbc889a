#include <algorithm>
#include <cmath>
#include <numeric>

#include <gtest/gtest.h>

#include "fcm/analysis.hpp"
#include "fcm/error.hpp"
#include "support/synthetic.hpp"

namespace fcm {
namespace {

Ranking by_rank(const std::vector<std::pair<std::string, double>>& ranks) {
  // from_scores ranks descending, so negate ranks to keep them as given.
  std::vector<std::pair<std::string, double>> scores;
  for (const auto& [id, r] : ranks) scores.emplace_back(id, -r);
  return Ranking::from_scores(scores);
}

// Average ranks (ascending values get ascending ranks), then Pearson.
double spearman_oracle(const std::vector<double>& x, const std::vector<double>& y) {
  auto ranks = [](const std::vector<double>& v) {
    std::vector<double> r(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
      double less = 0, equal = 0;
      for (double w : v) {
        less += w < v[i];
        equal += w == v[i];
      }
      r[i] = less + (equal + 1) / 2;
    }
    return r;
  };
  const auto rx = ranks(x), ry = ranks(y);
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / n;
  const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  return sxy / std::sqrt(sxx * syy);
}

TEST(Spearman, Examples) {
  const auto r = by_rank({{"a", 1}, {"b", 2}, {"c", 3}});
  EXPECT_DOUBLE_EQ(spearman(r, r), 1.0);
  EXPECT_DOUBLE_EQ(spearman(r, by_rank({{"a", 3}, {"b", 2}, {"c", 1}})), -1.0);
  EXPECT_DOUBLE_EQ(spearman(r, by_rank({{"a", 2}, {"b", 1}, {"c", 3}})), 0.5);
}

TEST(Spearman, Errors) {
  const auto r = by_rank({{"a", 1}, {"b", 2}});
  try {
    spearman(r, by_rank({{"a", 1}, {"c", 2}}));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ItemMismatch);
  }
  try {
    spearman(by_rank({{"a", 1}}), by_rank({{"a", 1}}));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::DegenerateRanking);
  }
  try {
    spearman(r, Ranking::from_scores({{"a", 0.5}, {"b", 0.5}}));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::DegenerateRanking);
  }
}

TEST(Spearman, MatchesOracleOnAllPermutations) {
  for (std::size_t n = 2; n <= 5; ++n) {
    std::vector<double> base(n);
    std::iota(base.begin(), base.end(), 1.0);
    std::vector<double> p = base;
    do {
      std::vector<double> q = base;
      do {
        std::vector<std::pair<std::string, double>> a, b;
        for (std::size_t i = 0; i < n; ++i) {
          a.emplace_back("i" + std::to_string(i), p[i]);
          b.emplace_back("i" + std::to_string(i), q[i]);
        }
        EXPECT_NEAR(spearman(Ranking::from_scores(a), Ranking::from_scores(b)),
                    spearman_oracle(p, q), 1e-12);
      } while (std::next_permutation(q.begin(), q.end()));
    } while (std::next_permutation(p.begin(), p.end()));
  }
}

TEST(Spearman, TiedScoresUseAverageRanks) {
  const std::vector<double> x = {0.9, 0.5, 0.5, 0.1, 0.5};
  const std::vector<double> y = {4, 3, 5, 1, 2};
  std::vector<std::pair<std::string, double>> a, b;
  for (std::size_t i = 0; i < x.size(); ++i) {
    a.emplace_back("i" + std::to_string(i), x[i]);
    b.emplace_back("i" + std::to_string(i), y[i]);
  }
  const auto ra = Ranking::from_scores(a);
  EXPECT_EQ(ra.rank_of("i1"), 3.0);
  EXPECT_EQ(ra.rank_of("i2"), 3.0);
  EXPECT_EQ(ra.rank_of("i4"), 3.0);
  EXPECT_NEAR(spearman(ra, Ranking::from_scores(b)), spearman_oracle(x, y), 1e-12);
}

TEST(Ranking, DuplicateIdsAreRejected) {
  EXPECT_THROW(Ranking::from_scores({{"a", 1}, {"a", 2}}), Error);
}

Annotation ann(std::string id, std::vector<CausalEdge> edges) {
  return {"p1", std::move(id), std::move(edges), Origin::Human};
}

TEST(MeasureRanking, RanksByDescendingScore) {
  const CausalEdge e1("a", "b", Direction::Increase), e2("c", "d", Direction::Increase),
      e3("e", "f", Direction::Increase);
  const std::vector<Annotation> anns = {ann("gold", {e1, e2}), ann("half", {e1, e3}),
                                        ann("same", {e1, e2}), ann("none", {e3}),
                                        ann("half2", {e2, e3})};
  const EdgeMetric metric(vanilla_f1_config());
  const auto r = measure_ranking(anns, "gold", metric);
  EXPECT_EQ(r.size(), 4u);
  EXPECT_EQ(r.rank_of("same"), 1.0);
  EXPECT_EQ(r.rank_of("half"), 2.5);
  EXPECT_EQ(r.rank_of("half2"), 2.5);
  EXPECT_EQ(r.rank_of("none"), 4.0);
  EXPECT_EQ(measure_ranking(anns, "gold", metric, true).rank_of("gold"), 1.5);
  try {
    measure_ranking(anns, "missing", metric);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::GoldMismatch);
  }
}

TEST(HumanRanking, DropsTheGold) {
  Leaderboard b;
  b.passage_id = "p1";
  b.ratings = {{"A", 1040}, {"B", 1000}, {"C", 960}};
  b.ranking = {{"A", 1040, 1, 2}, {"B", 1000, 2, 2}, {"C", 960, 3, 2}};
  const auto r = human_ranking(b, "A");
  EXPECT_EQ(r.items(), (std::vector<std::string>{"B", "C"}));
  EXPECT_EQ(r.rank_of("B"), 1.0);
  EXPECT_EQ(r.rank_of("C"), 2.0);
  EXPECT_THROW(human_ranking(b, "B"), Error);

  b.ratings = {{"A", 1040}, {"B", 980}, {"C", 980}};
  b.ranking = {{"A", 1040, 1, 2}, {"B", 980, 2.5, 2}, {"C", 980, 2.5, 2}};
  EXPECT_EQ(human_ranking(b, "A").rank_of("C"), 1.5);
}

TEST(CorrelationSummary, ConstantValuesGiveZeroWidth) {
  const auto s = correlation_summary({{"p1", 0.5}, {"p2", 0.5}, {"p3", 0.5}});
  EXPECT_DOUBLE_EQ(s.mean, 0.5);
  EXPECT_DOUBLE_EQ(s.ci95.lo, 0.5);
  EXPECT_DOUBLE_EQ(s.ci95.hi, 0.5);
  EXPECT_DOUBLE_EQ(s.ci90.hi, 0.5);
}

TEST(CorrelationSummary, StudentTInterval) {
  const auto s = correlation_summary({{"p1", 0.2}, {"p2", 0.4}, {"p3", 0.6}, {"p4", 0.8}});
  EXPECT_DOUBLE_EQ(s.mean, 0.5);
  const double sd = std::sqrt(0.2 / 3.0);
  EXPECT_NEAR(s.std_dev, sd, 1e-15);
  // t quantiles for 3 degrees of freedom.
  const double t975 = 3.182446305284263, t95 = 2.353363434801823;
  EXPECT_NEAR(s.ci95.lo, 0.5 - t975 * sd / 2, 1e-12);
  EXPECT_NEAR(s.ci95.hi, 0.5 + t975 * sd / 2, 1e-12);
  EXPECT_NEAR(s.ci90.lo, 0.5 - t95 * sd / 2, 1e-12);
  EXPECT_NEAR(s.ci95.lo, 0.089, 1e-3);
  EXPECT_NEAR(s.ci95.hi, 0.911, 1e-3);
}

TEST(CorrelationSummary, SymmetricValuesAverageToZero) {
  EXPECT_DOUBLE_EQ(correlation_summary({{"p1", 1}, {"p2", -1}}).mean, 0.0);
  EXPECT_THROW(correlation_summary({{"p1", 1}}), Error);
}

TEST(CorrelationSummary, IntervalNarrowsWithMoreSamples) {
  // Alternating +-1 around 0 keeps the sample variance close to fixed.
  double previous = std::numeric_limits<double>::infinity();
  for (std::size_t n = 2; n <= 40; n += 2) {
    std::vector<double> v;
    for (std::size_t i = 0; i < n; ++i) v.push_back(i % 2 ? 0.5 : -0.5);
    const double sd_scale = std::sqrt(static_cast<double>(n - 1) / static_cast<double>(n));
    const auto ci = confidence_interval(v, 0.95);
    const double width = (ci.hi - ci.lo) * sd_scale;
    EXPECT_LE(width, previous) << n;
    previous = width;
  }
}

TEST(ConfidenceInterval, BootstrapIsSeededAndBracketsTheMean) {
  const std::vector<double> v = {0.1, 0.3, 0.35, 0.6, 0.9, -0.2, 0.4};
  CiOptions o;
  o.method = CiMethod::Bootstrap;
  const auto a = confidence_interval(v, 0.95, o);
  EXPECT_EQ(a, confidence_interval(v, 0.95, o));
  const double mean = std::accumulate(v.begin(), v.end(), 0.0) / v.size();
  EXPECT_LT(a.lo, mean);
  EXPECT_GT(a.hi, mean);
  EXPECT_GE(a.lo, -0.2);
  EXPECT_LE(a.hi, 0.9);
  const auto narrow = confidence_interval(v, 0.90, o);
  EXPECT_GE(narrow.lo, a.lo);
  EXPECT_LE(narrow.hi, a.hi);
}

TEST(PairedContrast, Examples) {
  const std::vector<std::pair<std::string, double>> m = {{"p1", 0.4}, {"p2", 0.4}, {"p3", 0.4}};
  const std::vector<std::pair<std::string, double>> zero = {{"p1", 0}, {"p2", 0}, {"p3", 0}};
  auto s = paired_contrast(m, m);
  EXPECT_EQ(s.mean, 0.0);
  EXPECT_EQ(s.ci95.lo, 0.0);
  EXPECT_EQ(s.ci95.hi, 0.0);
  EXPECT_DOUBLE_EQ(paired_contrast(m, zero).mean, 0.4);
  s = paired_contrast({{"a", 0.8}, {"b", 0.5}}, {{"b", 0.0}, {"a", 0.5}});
  EXPECT_DOUBLE_EQ(s.mean, 0.4);
  try {
    paired_contrast(m, {{"p1", 0}, {"p2", 0}, {"p9", 0}});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::AlignmentError);
  }
}

TEST(ValidationSet, UsesTheTournamentWinnerAsGold) {
  const auto c = testing::threshold_recovery_corpus(2);
  const auto set = build_validation_set(c.dataset, c.judgments, {});
  ASSERT_EQ(set.cases.size(), 2u);
  for (const auto& vc : set.cases) {
    EXPECT_EQ(vc.gold_id, "gold");
    EXPECT_EQ(vc.human.items().size(), 3u);
    EXPECT_EQ(vc.human.rank_of("x1"), 1.0);
    EXPECT_EQ(vc.human.rank_of("x3"), 3.0);
  }
}

TEST(ValidationSet, SkipsPassagesWithoutJudgments) {
  auto c = testing::threshold_recovery_corpus(2);
  std::erase_if(c.judgments, [](const Judgment& j) { return j.passage_id == "tr1"; });
  const auto set = build_validation_set(c.dataset, c.judgments, {});
  EXPECT_EQ(set.cases.size(), 1u);
  EXPECT_EQ(set.skipped, std::vector<std::string>{"tr1"});
}

TEST(EvaluateMeasure, ThresholdRegimes) {
  const auto c = testing::threshold_recovery_corpus(3);
  const auto set = build_validation_set(c.dataset, c.judgments, {});
  auto config = testing::rouge_without_partial_positives();
  config.threshold = 0.3;
  EXPECT_DOUBLE_EQ(*evaluate_measure(set, config).mean(), -1.0);
  config.threshold = 0.5;
  EXPECT_DOUBLE_EQ(*evaluate_measure(set, config).mean(), 1.0);
  config.threshold = 0.7;
  const auto e = evaluate_measure(set, config);
  EXPECT_FALSE(e.mean().has_value());
  EXPECT_EQ(e.degenerate.size(), 3u);
}

TEST(GridSpec, ParsesAndEnumerates) {
  const auto g = GridSpec::parse("0:1:0.25");
  EXPECT_EQ(g.points(), (std::vector<double>{0, 0.25, 0.5, 0.75, 1.0}));
  EXPECT_EQ(GridSpec::parse("0:1:0.05").points().size(), 21u);
  EXPECT_THROW(GridSpec::parse("0:1"), Error);
  EXPECT_THROW(GridSpec::parse("1:0:0.1"), Error);
  EXPECT_THROW(GridSpec::parse("0:1:0"), Error);
  EXPECT_THROW(GridSpec::parse("a:b:c"), Error);
}

TEST(GridSearch, RecoversTheKnownInterval) {
  const auto c = testing::threshold_recovery_corpus(3);
  const auto set = build_validation_set(c.dataset, c.judgments, {});
  const auto r = grid_search_threshold(set, testing::rouge_without_partial_positives(),
                                       GridSpec::parse("0:1:0.05"));
  EXPECT_GT(r.best_threshold, 0.4);
  EXPECT_LE(r.best_threshold, 0.6);
  EXPECT_NEAR(r.best_threshold, 0.425, 1e-9);
  EXPECT_DOUBLE_EQ(*r.best_mean_rho, 1.0);
  EXPECT_TRUE(std::is_sorted(r.curve.begin(), r.curve.end(), [](const auto& a, const auto& b) {
    return a.threshold < b.threshold;
  }));
  EXPECT_EQ(std::count_if(r.curve.begin(), r.curve.end(), [](const auto& p) { return p.refined; }),
            2);
}

TEST(GridSearch, AllDegenerateFallsBackToTheSmallestThreshold) {
  const auto c = testing::threshold_recovery_corpus(2);
  const auto set = build_validation_set(c.dataset, c.judgments, {});
  const auto r = grid_search_threshold(set, testing::rouge_without_partial_positives(),
                                       GridSpec::parse("0.7:1:0.1"));
  EXPECT_NEAR(r.best_threshold, 0.7, 1e-12);
  EXPECT_FALSE(r.best_mean_rho.has_value());
}

TEST(GridSearch, SinglePointGrid) {
  const auto c = testing::threshold_recovery_corpus(2);
  const auto set = build_validation_set(c.dataset, c.judgments, {});
  const auto r = grid_search_threshold(set, testing::rouge_without_partial_positives(),
                                       GridSpec::parse("0.3:0.3:0.1"));
  EXPECT_NEAR(r.best_threshold, 0.3, 1e-12);
}

Judgment vote(std::string id, std::string a, std::string b, Outcome o, std::string rater) {
  return {std::move(id), "p1", std::move(a), std::move(b), o, std::move(rater), 0};
}

TEST(Reliability, UnanimousPairsFillTheTopBucket) {
  const auto r = rater_reliability({vote("1", "A", "B", Outcome::AWins, "r1"),
                                    vote("2", "B", "A", Outcome::BWins, "r2"),
                                    vote("3", "A", "C", Outcome::Tie, "r1"),
                                    vote("4", "A", "C", Outcome::Tie, "r2")});
  EXPECT_EQ(r.overlapped_pairs, 2u);
  ASSERT_EQ(r.distribution.size(), 1u);
  EXPECT_EQ(r.distribution[0].agreement, 1.0);
  EXPECT_EQ(r.distribution[0].fraction, 1.0);
  EXPECT_FALSE(r.overall_self_consistency.has_value());
}

TEST(Reliability, MajorityShare) {
  const auto r = rater_reliability({vote("1", "A", "B", Outcome::AWins, "r1"),
                                    vote("2", "A", "B", Outcome::AWins, "r2"),
                                    vote("3", "A", "B", Outcome::BWins, "r3")});
  ASSERT_EQ(r.distribution.size(), 1u);
  EXPECT_DOUBLE_EQ(r.distribution[0].agreement, 2.0 / 3.0);
}

TEST(Reliability, SelfConsistency) {
  const auto r = rater_reliability({vote("1", "A", "B", Outcome::AWins, "r1"),
                                    vote("2", "B", "A", Outcome::BWins, "r1"),
                                    vote("3", "A", "C", Outcome::AWins, "r2"),
                                    vote("4", "A", "C", Outcome::Tie, "r2")});
  EXPECT_EQ(r.overlapped_pairs, 0u);
  ASSERT_EQ(r.raters.size(), 2u);
  EXPECT_EQ(r.raters[0].rater_id, "r1");
  EXPECT_EQ(r.raters[0].self_consistency, 1.0);
  EXPECT_EQ(r.raters[1].self_consistency, 0.0);
  EXPECT_DOUBLE_EQ(*r.overall_self_consistency, 0.5);
}

TEST(Reliability, EmptyLogGivesAnEmptyReport) {
  const auto r = rater_reliability({});
  EXPECT_EQ(r.overlapped_pairs, 0u);
  EXPECT_TRUE(r.distribution.empty());
  EXPECT_TRUE(r.raters.empty());
}

}  // namespace
}  // namespace fcm
