#include "fcm/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include <boost/math/distributions/students_t.hpp>

namespace fcm {

Ranking Ranking::from_scores(const std::vector<std::pair<std::string, double>>& scores) {
  std::vector<double> values;
  values.reserve(scores.size());
  for (const auto& s : scores) values.push_back(s.second);
  const std::vector<double> ranks = average_ranks_descending(values);

  Ranking out;
  std::vector<std::pair<double, std::string>> order;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (!out.ranks_.emplace(scores[i].first, ranks[i]).second) {
      throw Error(ErrorCode::ItemMismatch, "duplicate item '" + scores[i].first + "'");
    }
    order.emplace_back(ranks[i], scores[i].first);
  }
  std::sort(order.begin(), order.end());
  for (auto& [rank, id] : order) out.items_.push_back(std::move(id));
  return out;
}

double spearman(const Ranking& r1, const Ranking& r2) {
  if (r1.size() != r2.size() ||
      !std::equal(r1.ranks().begin(), r1.ranks().end(), r2.ranks().begin(),
                  [](const auto& a, const auto& b) { return a.first == b.first; })) {
    throw Error(ErrorCode::ItemMismatch, "rankings cover different items");
  }
  const std::size_t n = r1.size();
  if (n < 2) throw Error(ErrorCode::DegenerateRanking, "need at least two items");

  std::vector<double> x, y;
  x.reserve(n);
  y.reserve(n);
  for (const auto& [id, rank] : r1.ranks()) {
    x.push_back(rank);
    y.push_back(r2.rank_of(id));
  }
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(n);
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(n);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) {
    throw Error(ErrorCode::DegenerateRanking, "constant rank vector");
  }
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

Ranking measure_ranking(const std::vector<Annotation>& annotations, const std::string& gold_id,
                        const EdgeMetric& metric, bool include_gold) {
  auto gold = std::find_if(annotations.begin(), annotations.end(),
                           [&](const Annotation& a) { return a.id() == gold_id; });
  if (gold == annotations.end()) {
    throw Error(ErrorCode::GoldMismatch, "gold '" + gold_id + "' is not among the annotations");
  }
  std::vector<std::pair<std::string, double>> scores;
  for (const auto& a : annotations) {
    if (!include_gold && a.id() == gold_id) continue;
    scores.emplace_back(a.id(), metric.score(a, *gold));
  }
  return Ranking::from_scores(scores);
}

Ranking human_ranking(const Leaderboard& board, const std::string& gold_id, bool include_gold) {
  if (gold_of(board) != gold_id) {
    throw Error(ErrorCode::GoldMismatch, "'" + gold_id + "' did not win passage '" +
                                             board.passage_id + "'");
  }
  std::vector<std::pair<std::string, double>> scores;
  for (const auto& [id, rating] : board.ratings) {
    if (!include_gold && id == gold_id) continue;
    scores.emplace_back(id, rating);
  }
  return Ranking::from_scores(scores);
}

namespace {

double mean_of(const std::vector<double>& v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double sample_sd(const std::vector<double>& v, double mean) {
  if (v.size() < 2) return 0.0;
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

}  // namespace

Interval confidence_interval(const std::vector<double>& values, double level,
                             const CiOptions& options) {
  if (values.size() < 2) throw Error(ErrorCode::InsufficientData, "need at least two values");
  if (!(level > 0.0 && level < 1.0)) {
    throw Error(ErrorCode::InvalidConfig, "confidence level must lie in (0, 1)");
  }
  const double m = mean_of(values);
  if (options.method == CiMethod::StudentT) {
    const double sd = sample_sd(values, m);
    if (sd == 0.0) return {m, m};
    const boost::math::students_t dist(static_cast<double>(values.size() - 1));
    const double t = boost::math::quantile(dist, 1.0 - (1.0 - level) / 2.0);
    const double half = t * sd / std::sqrt(static_cast<double>(values.size()));
    return {m - half, m + half};
  }

  // Percentile bootstrap of the mean.
  if (options.resamples == 0) throw Error(ErrorCode::InvalidConfig, "resamples must be > 0");
  std::mt19937_64 rng(options.seed);
  const std::uint64_t n = values.size();
  std::vector<double> means;
  means.reserve(options.resamples);
  for (std::size_t b = 0; b < options.resamples; ++b) {
    double sum = 0.0;
    for (std::uint64_t i = 0; i < n; ++i) sum += values[rng() % n];
    means.push_back(sum / static_cast<double>(n));
  }
  std::sort(means.begin(), means.end());
  const double tail = (1.0 - level) / 2.0;
  const auto index = [&](double q) {
    const double pos = q * static_cast<double>(means.size() - 1);
    return means[static_cast<std::size_t>(std::llround(pos))];
  };
  return {index(tail), index(1.0 - tail)};
}

CorrelationSummary correlation_summary(std::vector<std::pair<std::string, double>> per_passage,
                                       const CiOptions& options) {
  if (per_passage.size() < 2) {
    throw Error(ErrorCode::InsufficientData,
                "need at least two passages, got " + std::to_string(per_passage.size()));
  }
  std::vector<double> values;
  values.reserve(per_passage.size());
  for (const auto& p : per_passage) values.push_back(p.second);

  CorrelationSummary s;
  s.per_passage = std::move(per_passage);
  s.mean = mean_of(values);
  s.std_dev = sample_sd(values, s.mean);
  s.ci90 = confidence_interval(values, 0.90, options);
  s.ci95 = confidence_interval(values, 0.95, options);
  return s;
}

CorrelationSummary paired_contrast(const std::vector<std::pair<std::string, double>>& measure,
                                   const std::vector<std::pair<std::string, double>>& baseline,
                                   const CiOptions& options) {
  std::map<std::string, double> base(baseline.begin(), baseline.end());
  if (base.size() != measure.size()) {
    throw Error(ErrorCode::AlignmentError, "samples cover different passage counts");
  }
  std::vector<std::pair<std::string, double>> diffs;
  diffs.reserve(measure.size());
  for (const auto& [pid, rho] : measure) {
    auto it = base.find(pid);
    if (it == base.end()) {
      throw Error(ErrorCode::AlignmentError, "passage '" + pid + "' missing from baseline");
    }
    diffs.emplace_back(pid, rho - it->second);
  }
  return correlation_summary(std::move(diffs), options);
}

ValidationSet build_validation_set(const Dataset& dataset, const std::vector<Judgment>& judgments,
                                   const TournamentConfig& tournament, bool include_gold) {
  std::map<std::string, std::vector<Judgment>> by_passage;
  for (const auto& j : judgments) by_passage[j.passage_id].push_back(j);

  ValidationSet set;
  for (const auto& passage : dataset.passages()) {
    const auto annotations = dataset.annotations_for(passage.passage_id);
    auto it = by_passage.find(passage.passage_id);
    if (annotations.empty() || it == by_passage.end() || it->second.empty()) {
      if (!annotations.empty() || it != by_passage.end()) set.skipped.push_back(passage.passage_id);
      continue;
    }
    std::vector<std::string> ids;
    ValidationCase c;
    c.passage_id = passage.passage_id;
    for (const Annotation* a : annotations) {
      ids.push_back(a->id());
      c.annotations.push_back(*a);
    }
    for (const auto& j : it->second) {
      for (const std::string* side : {&j.annotation_a, &j.annotation_b}) {
        if (std::find(ids.begin(), ids.end(), *side) == ids.end()) {
          throw Error(ErrorCode::UnknownAnnotation, "judgment '" + j.judgment_id +
                                                        "' references '" + *side + "'");
        }
      }
    }
    const Leaderboard board = run_tournament(passage.passage_id, it->second, tournament, ids);
    c.gold_id = gold_of(board);
    c.human = human_ranking(board, c.gold_id, include_gold);
    set.cases.push_back(std::move(c));
  }
  return set;
}

std::optional<double> MeasureEvaluation::mean() const {
  if (per_passage.empty()) return std::nullopt;
  double sum = 0.0;
  for (const auto& p : per_passage) sum += p.second;
  return sum / static_cast<double>(per_passage.size());
}

MeasureEvaluation evaluate_measure(const ValidationSet& set, const EdgeMetricConfig& config,
                                   bool include_gold) {
  const EdgeMetric metric(config);
  MeasureEvaluation out;
  for (const auto& c : set.cases) {
    try {
      const Ranking r = measure_ranking(c.annotations, c.gold_id, metric, include_gold);
      out.per_passage.emplace_back(c.passage_id, spearman(r, c.human));
    } catch (const Error& e) {
      if (e.code() != ErrorCode::DegenerateRanking) throw;
      out.degenerate.push_back(c.passage_id);
    }
  }
  return out;
}

GridSpec GridSpec::parse(const std::string& text) {
  GridSpec g;
  std::istringstream in(text);
  std::string part;
  std::vector<double> parts;
  while (std::getline(in, part, ':')) {
    try {
      std::size_t used = 0;
      parts.push_back(std::stod(part, &used));
      if (used != part.size()) throw std::invalid_argument(part);
    } catch (const std::exception&) {
      throw Error(ErrorCode::InvalidConfig, "bad grid '" + text + "', expected lo:hi:step");
    }
  }
  if (parts.size() != 3) throw Error(ErrorCode::InvalidConfig, "grid needs lo:hi:step");
  g.lo = parts[0];
  g.hi = parts[1];
  g.step = parts[2];
  g.validate();
  return g;
}

void GridSpec::validate() const {
  if (!std::isfinite(lo) || !std::isfinite(hi) || !std::isfinite(step) || hi < lo ||
      !(step > 0.0)) {
    throw Error(ErrorCode::InvalidConfig, "grid needs finite lo <= hi and step > 0");
  }
}

std::vector<double> GridSpec::points() const {
  validate();
  const auto count = static_cast<std::size_t>(std::floor((hi - lo) / step + 1e-9)) + 1;
  std::vector<double> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) out.push_back(lo + static_cast<double>(i) * step);
  return out;
}

namespace {

// Similarity tables against the gold for every case, computed once so each
// threshold only replays classification.
struct PreparedCase {
  const ValidationCase* source;
  std::vector<std::pair<std::string, EdgeSimilarityTable>> tables;
};

std::optional<double> mean_rho_at(const std::vector<PreparedCase>& cases, double threshold,
                                  bool partial, std::size_t& used) {
  double sum = 0.0;
  used = 0;
  for (const auto& pc : cases) {
    std::vector<std::pair<std::string, double>> scores;
    scores.reserve(pc.tables.size());
    for (const auto& [id, table] : pc.tables) {
      scores.emplace_back(id, soft_f1(classify_table(table, threshold, partial)));
    }
    try {
      sum += spearman(Ranking::from_scores(scores), pc.source->human);
      ++used;
    } catch (const Error& e) {
      if (e.code() != ErrorCode::DegenerateRanking) throw;
    }
  }
  if (used == 0) return std::nullopt;
  return sum / static_cast<double>(used);
}

bool better(const GridPoint& a, const GridPoint& b) {
  if (a.mean_rho.has_value() != b.mean_rho.has_value()) return a.mean_rho.has_value();
  if (a.mean_rho && *a.mean_rho != *b.mean_rho) return *a.mean_rho > *b.mean_rho;
  return a.threshold < b.threshold;
}

}  // namespace

GridSearchResult grid_search_threshold(const ValidationSet& set, const EdgeMetricConfig& base,
                                       const GridSpec& grid, bool include_gold) {
  const std::vector<double> coarse = grid.points();
  const EdgeMetric metric(base);

  std::vector<PreparedCase> cases;
  for (const auto& c : set.cases) {
    PreparedCase pc{&c, {}};
    auto gold = std::find_if(c.annotations.begin(), c.annotations.end(),
                             [&](const Annotation& a) { return a.id() == c.gold_id; });
    if (gold == c.annotations.end()) {
      throw Error(ErrorCode::GoldMismatch, "gold '" + c.gold_id + "' missing");
    }
    for (const auto& a : c.annotations) {
      if (!include_gold && a.id() == c.gold_id) continue;
      pc.tables.emplace_back(a.id(), metric.similarity_table(a.edges, gold->edges));
    }
    cases.push_back(std::move(pc));
  }

  auto evaluate = [&](double t, bool refined) {
    GridPoint p;
    p.threshold = t;
    p.refined = refined;
    p.mean_rho = mean_rho_at(cases, t, base.allow_partial_positives, p.passages);
    return p;
  };

  GridSearchResult result;
  for (double t : coarse) result.curve.push_back(evaluate(t, false));
  const GridPoint coarse_best =
      *std::min_element(result.curve.begin(), result.curve.end(), better);

  const double half = grid.step / 2.0;
  for (double t : {coarse_best.threshold - half, coarse_best.threshold + half}) {
    if (t < grid.lo || t > grid.hi) continue;
    result.curve.push_back(evaluate(t, true));
  }
  std::sort(result.curve.begin(), result.curve.end(),
            [](const GridPoint& a, const GridPoint& b) { return a.threshold < b.threshold; });

  const GridPoint best = *std::min_element(result.curve.begin(), result.curve.end(), better);
  result.best_threshold = best.threshold;
  result.best_mean_rho = best.mean_rho;
  return result;
}

ReliabilityReport rater_reliability(const std::vector<Judgment>& judgments) {
  using PairKey = std::tuple<std::string, std::string, std::string>;
  // pair -> rater -> normalized outcomes in judgment-id order
  std::map<PairKey, std::map<std::string, std::vector<std::string>>> groups;

  std::vector<const Judgment*> ordered;
  for (const auto& j : judgments) ordered.push_back(&j);
  std::stable_sort(ordered.begin(), ordered.end(), [](const Judgment* a, const Judgment* b) {
    return a->judgment_id < b->judgment_id;
  });
  for (const Judgment* j : ordered) {
    const auto [lo, hi] = std::minmax(j->annotation_a, j->annotation_b);
    std::string winner = j->outcome == Outcome::Tie     ? std::string("=")
                         : j->outcome == Outcome::AWins ? j->annotation_a
                                                        : j->annotation_b;
    groups[{j->passage_id, lo, hi}][j->rater_id].push_back(std::move(winner));
  }

  ReliabilityReport report;
  // Keyed by the reduced fraction so 2/3 and 4/6 share a bucket.
  std::map<std::pair<std::size_t, std::size_t>, std::size_t> buckets;
  std::map<std::string, RaterConsistency> per_rater;
  for (const auto& [key, raters] : groups) {
    if (raters.size() >= 2) {
      std::map<std::string, std::size_t> votes;
      for (const auto& [rater, outcomes] : raters) ++votes[outcomes.front()];
      std::size_t modal = 0;
      for (const auto& [outcome, count] : votes) modal = std::max(modal, count);
      const std::size_t g = std::gcd(modal, raters.size());
      ++buckets[{modal / g, raters.size() / g}];
      ++report.overlapped_pairs;
    }
    for (const auto& [rater, outcomes] : raters) {
      if (outcomes.size() < 2) continue;
      auto& rc = per_rater[rater];
      rc.rater_id = rater;
      ++rc.repeated_pairs;
      for (std::size_t i = 1; i < outcomes.size(); ++i) {
        ++rc.judgments;
        if (outcomes[i] == outcomes.front()) rc.self_consistency += 1.0;
      }
    }
  }

  std::vector<std::pair<std::pair<std::size_t, std::size_t>, std::size_t>> ordered_buckets(
      buckets.begin(), buckets.end());
  std::sort(ordered_buckets.begin(), ordered_buckets.end(), [](const auto& a, const auto& b) {
    return a.first.first * b.first.second < b.first.first * a.first.second;
  });
  for (const auto& [fraction, count] : ordered_buckets) {
    report.distribution.push_back(
        {static_cast<double>(fraction.first) / static_cast<double>(fraction.second), count,
         static_cast<double>(count) / static_cast<double>(report.overlapped_pairs)});
  }
  double consistent = 0.0;
  std::size_t repeats = 0;
  for (auto& [rater, rc] : per_rater) {
    consistent += rc.self_consistency;
    repeats += rc.judgments;
    rc.self_consistency /= static_cast<double>(rc.judgments);
    report.raters.push_back(rc);
  }
  if (repeats > 0) report.overall_self_consistency = consistent / static_cast<double>(repeats);
  return report;
}

}  // namespace fcm
