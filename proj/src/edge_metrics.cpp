#include "fcm/edge_metrics.hpp"

#include <cmath>
#include <string>

namespace fcm {

void EdgeMetricConfig::validate() const {
  if (!std::isfinite(threshold)) {
    throw Error(ErrorCode::InvalidConfig, "threshold must be finite");
  }
  measure.validate();
}

EdgeMetric::EdgeMetric(EdgeMetricConfig config)
    : config_((config.validate(), std::move(config))), similarity_(config_.measure) {}

bool EdgeMetric::attrs_match(const CausalEdge& predicted, const CausalEdge& gold) const {
  const double t = config_.threshold;
  return similarity_(predicted.source(), gold.source()) >= t &&
         similarity_(predicted.target(), gold.target()) >= t;
}

EdgeSimilarityTable EdgeMetric::similarity_table(const std::vector<CausalEdge>& predicted,
                                                 const std::vector<CausalEdge>& gold) const {
  EdgeSimilarityTable table;
  table.predicted = predicted.size();
  table.gold = gold.size();
  const std::size_t cells = predicted.size() * gold.size();
  table.source.resize(cells);
  table.target.resize(cells);
  table.same_direction.resize(cells);
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    for (std::size_t j = 0; j < gold.size(); ++j) {
      const std::size_t k = table.at(i, j);
      table.source[k] = similarity_(predicted[i].source(), gold[j].source());
      table.target[k] = similarity_(predicted[i].target(), gold[j].target());
      table.same_direction[k] = predicted[i].direction() == gold[j].direction();
    }
  }
  return table;
}

MatchCounts EdgeMetric::classify(const std::vector<CausalEdge>& predicted,
                                 const std::vector<CausalEdge>& gold) const {
  return classify_table(similarity_table(predicted, gold), config_.threshold,
                        config_.allow_partial_positives);
}

MatchCounts classify_table(const EdgeSimilarityTable& table, double threshold,
                           bool allow_partial_positives) {
  auto matches = [&](std::size_t k) {
    return table.source[k] >= threshold && table.target[k] >= threshold;
  };

  MatchCounts counts;
  for (std::size_t i = 0; i < table.predicted; ++i) {
    bool true_pos = false;
    bool partial = false;
    for (std::size_t j = 0; j < table.gold; ++j) {
      const std::size_t k = table.at(i, j);
      if (!matches(k)) continue;
      if (table.same_direction[k]) {
        true_pos = true;
        break;
      }
      partial = true;
    }
    if (true_pos) {
      ++counts.tp;
    } else if (partial && allow_partial_positives) {
      ++counts.pp;
    } else {
      ++counts.fp;
    }
  }
  for (std::size_t j = 0; j < table.gold; ++j) {
    bool matched = false;
    for (std::size_t i = 0; i < table.predicted && !matched; ++i) matched = matches(table.at(i, j));
    if (!matched) ++counts.fn;
  }
  return counts;
}

double EdgeMetric::score(const Annotation& predicted, const Annotation& gold) const {
  if (predicted.passage_id != gold.passage_id) {
    throw Error(ErrorCode::PassageMismatch,
                "'" + predicted.passage_id + "' vs '" + gold.passage_id + "'");
  }
  return soft_f1(classify(predicted.edges, gold.edges));
}

double EdgeMetric::kernel(const Annotation& g1, const Annotation& g2) const {
  return (score(g1, g2) + score(g2, g1)) / 2.0;
}

bool attrs_match(const CausalEdge& predicted, const CausalEdge& gold,
                 const EdgeMetricConfig& config) {
  return EdgeMetric(config).attrs_match(predicted, gold);
}

MatchCounts classify_edges(const std::vector<CausalEdge>& predicted,
                           const std::vector<CausalEdge>& gold, const EdgeMetricConfig& config) {
  return EdgeMetric(config).classify(predicted, gold);
}

double soft_f1(const MatchCounts& c) {
  const double numerator = 2.0 * static_cast<double>(c.tp) + static_cast<double>(c.pp);
  const double denominator =
      numerator + static_cast<double>(c.fp) + static_cast<double>(c.fn);
  return denominator == 0.0 ? 1.0 : numerator / denominator;
}

double score_annotation(const Annotation& predicted, const Annotation& gold,
                        const EdgeMetricConfig& config) {
  return EdgeMetric(config).score(predicted, gold);
}

double kernel(const Annotation& g1, const Annotation& g2, const EdgeMetricConfig& config) {
  return EdgeMetric(config).kernel(g1, g2);
}

EdgeMetricConfig vanilla_f1_config() {
  EdgeMetricConfig config;
  config.measure.kind = MeasureKind::Exact;
  config.threshold = 1.0;
  config.allow_partial_positives = false;
  return config;
}

double default_threshold(MeasureKind kind) {
  switch (kind) {
    case MeasureKind::Exact: return 1.0;
    case MeasureKind::Bleu: return 0.352;
    case MeasureKind::Rouge1: return 0.45;
    case MeasureKind::Meteor: return 0.01;
    case MeasureKind::External: return -0.1532;
  }
  return 1.0;
}

}  // namespace fcm
