#pragma once

// Soft-thresholded edge classification and the F1-like score built on it.
//
// A predicted edge "attr-matches" a gold edge when the similarity of both its
// source and its target to the gold phrases reaches the threshold. Each
// predicted edge is then TP (attr-match with equal direction), PP (attr-match
// only with differing direction, when partial positives are enabled) or FP.
// A gold edge is FN when no predicted edge attr-matches it; direction plays no
// part in that test. Matching is existential: several predictions may match
// the same gold edge.

#include <cstddef>
#include <vector>

#include "fcm/core.hpp"
#include "fcm/text_similarity.hpp"

namespace fcm {

struct MatchCounts {
  std::size_t tp = 0;
  std::size_t pp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;

  friend bool operator==(const MatchCounts&, const MatchCounts&) = default;
};

struct EdgeMetricConfig {
  MeasureConfig measure;
  // Compared with >=; may be negative for unbounded external scorers.
  double threshold = 1.0;
  bool allow_partial_positives = true;

  // Throws InvalidConfig on a non-finite threshold or a bad measure.
  void validate() const;
};

// Attribute similarities for every (predicted, gold) edge pair. Classification
// at any threshold can be replayed from it without rescoring text.
struct EdgeSimilarityTable {
  std::size_t predicted = 0;
  std::size_t gold = 0;
  // Row-major [predicted][gold].
  std::vector<double> source;
  std::vector<double> target;
  std::vector<bool> same_direction;

  std::size_t at(std::size_t i, std::size_t j) const { return i * gold + j; }
};

MatchCounts classify_table(const EdgeSimilarityTable& table, double threshold,
                           bool allow_partial_positives);

// Binds a config to a ready similarity function.
class EdgeMetric {
 public:
  explicit EdgeMetric(EdgeMetricConfig config);

  bool attrs_match(const CausalEdge& predicted, const CausalEdge& gold) const;
  MatchCounts classify(const std::vector<CausalEdge>& predicted,
                       const std::vector<CausalEdge>& gold) const;
  EdgeSimilarityTable similarity_table(const std::vector<CausalEdge>& predicted,
                                       const std::vector<CausalEdge>& gold) const;
  // Throws PassageMismatch when the annotations belong to different passages.
  double score(const Annotation& predicted, const Annotation& gold) const;
  double kernel(const Annotation& g1, const Annotation& g2) const;

  const EdgeMetricConfig& config() const noexcept { return config_; }
  const TextSimilarity& similarity() const noexcept { return similarity_; }

 private:
  EdgeMetricConfig config_;
  TextSimilarity similarity_;
};

bool attrs_match(const CausalEdge& predicted, const CausalEdge& gold,
                 const EdgeMetricConfig& config);
MatchCounts classify_edges(const std::vector<CausalEdge>& predicted,
                           const std::vector<CausalEdge>& gold, const EdgeMetricConfig& config);

// (2tp + pp) / (2tp + pp + fp + fn); 1.0 when the denominator is zero.
double soft_f1(const MatchCounts& counts);

double score_annotation(const Annotation& predicted, const Annotation& gold,
                        const EdgeMetricConfig& config);

// Symmetrized score: mean of score_annotation in both argument orders.
double kernel(const Annotation& g1, const Annotation& g2, const EdgeMetricConfig& config);

// Exact match, T = 1, no partial positives: the classical edge-set F1.
EdgeMetricConfig vanilla_f1_config();

// Tuned thresholds for the built-in measures; 1.0 for exact match and the
// learned-scorer value for External.
double default_threshold(MeasureKind kind);

}  // namespace fcm
