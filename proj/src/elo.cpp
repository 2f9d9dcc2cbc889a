#include "fcm/elo.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "fcm/error.hpp"

namespace fcm {

namespace {

// Unbiased draw in [0, n) that only depends on the engine's output sequence,
// which the standard fixes for mt19937_64.
std::uint64_t uniform_index(std::mt19937_64& rng, std::uint64_t n) {
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % n;
  std::uint64_t x = rng();
  while (x >= limit) x = rng();
  return x % n;
}

template <typename T>
void seeded_shuffle(std::vector<T>& items, std::mt19937_64& rng) {
  for (std::size_t i = items.size(); i > 1; --i) {
    std::swap(items[i - 1], items[uniform_index(rng, i)]);
  }
}

template <typename T>
void seeded_reorder(std::vector<T>& items, std::mt19937_64& rng) {
  std::vector<std::pair<std::uint64_t, std::size_t>> keys;
  keys.reserve(items.size());
  for (std::size_t i = 0; i < items.size(); ++i) keys.emplace_back(rng(), i);
  std::stable_sort(keys.begin(), keys.end(),
                   [](const auto& a, const auto& b) { return a.first < b.first; });
  std::vector<T> out;
  out.reserve(items.size());
  for (const auto& [key, i] : keys) out.push_back(std::move(items[i]));
  items = std::move(out);
}

}  // namespace

std::string_view to_string(Outcome o) {
  switch (o) {
    case Outcome::AWins: return "a_wins";
    case Outcome::BWins: return "b_wins";
    case Outcome::Tie: return "tie";
  }
  return "tie";
}

Outcome parse_outcome(std::string_view raw) {
  const std::string s = fold_case(raw);
  if (s == "a_wins") return Outcome::AWins;
  if (s == "b_wins") return Outcome::BWins;
  if (s == "tie") return Outcome::Tie;
  throw Error(ErrorCode::ValidationError, "unknown outcome '" + std::string(raw) + "'");
}

void validate_judgment(const Judgment& j) {
  if (j.judgment_id.empty() || j.passage_id.empty() || j.annotation_a.empty() ||
      j.annotation_b.empty() || j.rater_id.empty()) {
    throw Error(ErrorCode::ValidationError, "judgment '" + j.judgment_id + "' has a blank field");
  }
  if (j.annotation_a == j.annotation_b) {
    throw Error(ErrorCode::ValidationError,
                "judgment '" + j.judgment_id + "' compares an annotation with itself");
  }
  if (j.rater_id == j.annotation_a || j.rater_id == j.annotation_b) {
    throw Error(ErrorCode::SelfRating,
                "rater '" + j.rater_id + "' authored one side of '" + j.judgment_id + "'");
  }
}

void TournamentConfig::validate() const {
  if (!std::isfinite(k_factor) || !(k_factor > 0.0)) {
    throw Error(ErrorCode::InvalidConfig, "k_factor must be positive");
  }
  if (!std::isfinite(initial_rating)) {
    throw Error(ErrorCode::InvalidConfig, "initial_rating must be finite");
  }
}

std::pair<double, double> expected_scores(double r_a, double r_b) {
  const double e_a = 1.0 / (1.0 + std::pow(10.0, (r_b - r_a) / 400.0));
  return {e_a, 1.0 - e_a};
}

Ratings apply_judgment(Ratings ratings, const Judgment& judgment, const TournamentConfig& config,
                       bool seed_missing) {
  validate_judgment(judgment);
  for (const std::string* id : {&judgment.annotation_a, &judgment.annotation_b}) {
    if (ratings.count(*id) == 0) {
      if (!seed_missing) throw Error(ErrorCode::UnknownAnnotation, *id);
      ratings[*id] = config.initial_rating;
    }
  }
  double& r_a = ratings[judgment.annotation_a];
  double& r_b = ratings[judgment.annotation_b];
  const double e_a = expected_scores(r_a, r_b).first;
  const double s_a = judgment.outcome == Outcome::AWins ? 1.0
                     : judgment.outcome == Outcome::BWins ? 0.0
                                                          : 0.5;
  // A's change is mirrored onto B so the pair's rating sum is conserved.
  const double delta = config.k_factor * (s_a - e_a);
  r_a += delta;
  r_b -= delta;
  return ratings;
}

std::vector<double> average_ranks_descending(const std::vector<double>& values) {
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return values[a] > values[b]; });
  std::vector<double> ranks(values.size());
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j + 1 < order.size() && values[order[j + 1]] == values[order[i]]) ++j;
    const double avg = (static_cast<double>(i + 1) + static_cast<double>(j + 1)) / 2.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = avg;
    i = j + 1;
  }
  return ranks;
}

Leaderboard run_tournament(std::string_view passage_id, const std::vector<Judgment>& judgments,
                           const TournamentConfig& config,
                           const std::vector<std::string>& registered) {
  config.validate();
  Leaderboard board;
  board.passage_id = std::string(passage_id);
  for (const auto& id : registered) {
    board.ratings.emplace(id, config.initial_rating);
    board.games_played.emplace(id, 0);
  }

  std::vector<const Judgment*> ordered;
  ordered.reserve(judgments.size());
  for (const auto& j : judgments) {
    if (j.passage_id != passage_id) {
      throw Error(ErrorCode::MixedPassages, "judgment '" + j.judgment_id + "' belongs to '" +
                                                j.passage_id + "', not '" +
                                                std::string(passage_id) + "'");
    }
    ordered.push_back(&j);
  }
  std::stable_sort(ordered.begin(), ordered.end(), [](const Judgment* a, const Judgment* b) {
    return a->judgment_id < b->judgment_id;
  });

  for (const Judgment* j : ordered) {
    board.ratings = apply_judgment(std::move(board.ratings), *j, config);
    ++board.games_played[j->annotation_a];
    ++board.games_played[j->annotation_b];
  }

  std::vector<std::pair<std::string, double>> entries(board.ratings.begin(), board.ratings.end());
  std::stable_sort(entries.begin(), entries.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  std::vector<double> values;
  values.reserve(entries.size());
  for (const auto& e : entries) values.push_back(e.second);
  const std::vector<double> ranks = average_ranks_descending(values);
  for (std::size_t i = 0; i < entries.size(); ++i) {
    board.ranking.push_back(
        {entries[i].first, entries[i].second, ranks[i], board.games_played[entries[i].first]});
  }
  return board;
}

std::vector<Leaderboard> run_all_tournaments(const std::vector<Judgment>& judgments,
                                             const TournamentConfig& config,
                                             const Dataset* dataset) {
  std::map<std::string, std::vector<Judgment>> by_passage;
  std::map<std::string, std::vector<std::string>> registered;
  if (dataset != nullptr) {
    for (const auto& a : dataset->annotations()) {
      registered[a.passage_id].push_back(a.annotator_id);
      by_passage[a.passage_id];
    }
  }
  for (const auto& j : judgments) by_passage[j.passage_id].push_back(j);

  std::vector<Leaderboard> out;
  for (const auto& [pid, list] : by_passage) {
    out.push_back(run_tournament(pid, list, config, registered[pid]));
  }
  return out;
}

const std::string& gold_of(const Leaderboard& board) {
  if (board.ranking.empty()) {
    throw Error(ErrorCode::EmptyLeaderboard, "passage '" + board.passage_id + "'");
  }
  // ranking is sorted by rating, ties in id order (ratings map iteration order).
  return board.ranking.front().annotation_id;
}

Schedule build_pairings(const std::vector<PairingRequest>& passages,
                        const std::vector<std::string>& raters, const SchedulerConfig& config) {
  if (!(config.overlap_fraction >= 0.0 && config.overlap_fraction <= 1.0)) {
    throw Error(ErrorCode::InvalidConfig, "overlap_fraction must lie in [0, 1]");
  }
  std::mt19937_64 rng(config.seed);

  struct Pair {
    std::string passage_id;
    std::string first;
    std::string second;
  };
  std::vector<Pair> pairs;
  for (const auto& p : passages) {
    std::vector<std::string> ids = p.annotations;
    std::sort(ids.begin(), ids.end());
    ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
    if (ids.size() < 2) {
      throw Error(ErrorCode::InvalidConfig,
                  "passage '" + p.passage_id + "' needs at least two annotations");
    }
    for (std::size_t i = 0; i < ids.size(); ++i) {
      for (std::size_t j = i + 1; j < ids.size(); ++j) pairs.push_back({p.passage_id, ids[i], ids[j]});
    }
  }
  seeded_reorder(pairs, rng);

  std::vector<std::string> roster = raters;
  std::sort(roster.begin(), roster.end());
  roster.erase(std::unique(roster.begin(), roster.end()), roster.end());
  seeded_shuffle(roster, rng);

  std::size_t cursor = 0;
  // Next eligible rater at or after the cursor, skipping `exclude`.
  auto next_rater = [&](const Pair& pair, const std::string* exclude) -> const std::string* {
    for (std::size_t step = 0; step < roster.size(); ++step) {
      const std::size_t idx = (cursor + step) % roster.size();
      const std::string& r = roster[idx];
      if (r == pair.first || r == pair.second) continue;
      if (exclude != nullptr && r == *exclude) continue;
      cursor = (idx + 1) % roster.size();
      return &r;
    }
    return nullptr;
  };

  Schedule schedule;
  std::vector<const std::string*> primary(pairs.size(), nullptr);
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    primary[i] = next_rater(pairs[i], nullptr);
    if (primary[i] == nullptr) {
      throw Error(ErrorCode::NoEligibleRater, "pair " + pairs[i].first + "/" + pairs[i].second +
                                                  " on passage '" + pairs[i].passage_id + "'");
    }
    schedule.assignments.push_back(
        {pairs[i].passage_id, pairs[i].first, pairs[i].second, *primary[i], false});
  }

  const auto overlap_count = static_cast<std::size_t>(
      std::llround(config.overlap_fraction * static_cast<double>(pairs.size())));
  std::vector<std::size_t> chosen(pairs.size());
  std::iota(chosen.begin(), chosen.end(), 0);
  seeded_shuffle(chosen, rng);
  chosen.resize(std::min(overlap_count, chosen.size()));
  std::sort(chosen.begin(), chosen.end());
  for (std::size_t i : chosen) {
    const std::string* second = next_rater(pairs[i], primary[i]);
    if (second == nullptr) {
      ++schedule.overlap_shortfall;
      continue;
    }
    schedule.assignments.push_back(
        {pairs[i].passage_id, pairs[i].first, pairs[i].second, *second, true});
  }

  for (auto& a : schedule.assignments) {
    if (rng() & 1U) std::swap(a.left, a.right);
  }
  seeded_reorder(schedule.assignments, rng);
  return schedule;
}

}  // namespace fcm
