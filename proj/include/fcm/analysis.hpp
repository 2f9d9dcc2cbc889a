#pragma once

// Validation of similarity measures against human (Elo) rankings: per-passage
// Spearman correlations, their summaries, threshold search, and rater
// reliability over overlapping judgments.

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "fcm/core.hpp"
#include "fcm/edge_metrics.hpp"
#include "fcm/elo.hpp"

namespace fcm {

class Ranking {
 public:
  Ranking() = default;

  // Ranks by descending score; tied scores share the average rank.
  static Ranking from_scores(const std::vector<std::pair<std::string, double>>& scores);

  const std::vector<std::string>& items() const noexcept { return items_; }
  const std::map<std::string, double>& ranks() const noexcept { return ranks_; }
  double rank_of(const std::string& id) const { return ranks_.at(id); }
  std::size_t size() const noexcept { return items_.size(); }

  friend bool operator==(const Ranking&, const Ranking&) = default;

 private:
  std::vector<std::string> items_;
  std::map<std::string, double> ranks_;
};

// Pearson correlation of the two rank vectors (ties handled by average
// ranks). Throws ItemMismatch when item sets differ and DegenerateRanking when
// n < 2 or either rank vector is constant.
double spearman(const Ranking& r1, const Ranking& r2);

// Scores every annotation except the gold against the gold and ranks them.
// Throws GoldMismatch when the gold id is not among the annotations.
Ranking measure_ranking(const std::vector<Annotation>& annotations, const std::string& gold_id,
                        const EdgeMetric& metric, bool include_gold = false);

// Elo ranking without the gold. Throws GoldMismatch when gold_id is not the
// board's winner.
Ranking human_ranking(const Leaderboard& board, const std::string& gold_id,
                      bool include_gold = false);

struct Interval {
  double lo = 0.0;
  double hi = 0.0;

  friend bool operator==(const Interval&, const Interval&) = default;
};

enum class CiMethod { StudentT, Bootstrap };

struct CiOptions {
  CiMethod method = CiMethod::StudentT;
  std::uint64_t seed = 20240601;
  std::size_t resamples = 10000;
};

struct CorrelationSummary {
  std::vector<std::pair<std::string, double>> per_passage;
  double mean = 0.0;
  double std_dev = 0.0;  // sample standard deviation (n - 1)
  Interval ci90;
  Interval ci95;
  std::size_t skipped = 0;  // passages left out as degenerate
};

// Mean and confidence intervals of per-passage correlations.
// Throws InsufficientData with fewer than two values.
CorrelationSummary correlation_summary(std::vector<std::pair<std::string, double>> per_passage,
                                       const CiOptions& options = {});

// Two-sided confidence interval for the mean of `values` at `level`.
Interval confidence_interval(const std::vector<double>& values, double level,
                             const CiOptions& options = {});

// Summary over per-passage differences (measure - baseline), matched by
// passage id. Throws AlignmentError when the passage sets differ.
CorrelationSummary paired_contrast(const std::vector<std::pair<std::string, double>>& measure,
                                   const std::vector<std::pair<std::string, double>>& baseline,
                                   const CiOptions& options = {});

// One passage ready for correlation: its annotations, the tournament winner
// and the human ranking of the rest.
struct ValidationCase {
  std::string passage_id;
  std::vector<Annotation> annotations;
  std::string gold_id;
  Ranking human;
};

struct ValidationSet {
  std::vector<ValidationCase> cases;
  // Passages without a usable tournament (no annotations or no judgments).
  std::vector<std::string> skipped;
};

ValidationSet build_validation_set(const Dataset& dataset, const std::vector<Judgment>& judgments,
                                   const TournamentConfig& tournament, bool include_gold = false);

struct MeasureEvaluation {
  std::vector<std::pair<std::string, double>> per_passage;
  std::vector<std::string> degenerate;

  std::optional<double> mean() const;
};

MeasureEvaluation evaluate_measure(const ValidationSet& set, const EdgeMetricConfig& config,
                                   bool include_gold = false);

struct GridSpec {
  double lo = 0.0;
  double hi = 1.0;
  double step = 0.05;

  // Parses "lo:hi:step". Throws InvalidConfig.
  static GridSpec parse(const std::string& text);
  void validate() const;
  std::vector<double> points() const;
};

struct GridPoint {
  double threshold = 0.0;
  std::optional<double> mean_rho;  // empty when every passage was degenerate
  std::size_t passages = 0;
  bool refined = false;

  friend bool operator==(const GridPoint&, const GridPoint&) = default;
};

struct GridSearchResult {
  double best_threshold = 0.0;
  std::optional<double> best_mean_rho;
  std::vector<GridPoint> curve;  // sorted by threshold
};

// Coarse grid, then one refinement at +-step/2 around the coarse argmax.
// The best mean rho wins; ties (and all-degenerate grids) go to the smallest T.
GridSearchResult grid_search_threshold(const ValidationSet& set, const EdgeMetricConfig& base,
                                       const GridSpec& grid, bool include_gold = false);

struct AgreementBucket {
  double agreement = 0.0;  // share of raters agreeing with the modal outcome
  std::size_t pairs = 0;
  double fraction = 0.0;  // pairs / multiply-judged pairs
};

struct RaterConsistency {
  std::string rater_id;
  std::size_t repeated_pairs = 0;
  std::size_t judgments = 0;
  double self_consistency = 0.0;
};

struct ReliabilityReport {
  std::size_t overlapped_pairs = 0;
  std::vector<AgreementBucket> distribution;  // ascending agreement
  std::vector<RaterConsistency> raters;       // raters with repeated pairs only
  std::optional<double> overall_self_consistency;
};

// Inter-rater agreement over pairs judged by two or more raters (each rater's
// first judgment in id order counts) and intra-rater consistency over pairs a
// rater judged more than once.
ReliabilityReport rater_reliability(const std::vector<Judgment>& judgments);

}  // namespace fcm
