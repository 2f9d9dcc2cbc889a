#pragma once

// Per-passage Elo tournaments over pairwise human judgments, and the
// scheduler that decides which rater judges which annotation pair.

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "fcm/core.hpp"

namespace fcm {

enum class Outcome { AWins, BWins, Tie };

std::string_view to_string(Outcome o);
// Accepts a_wins | b_wins | tie. Throws ValidationError.
Outcome parse_outcome(std::string_view raw);

// Annotation ids are annotator ids within the passage, so a rater authored an
// annotation exactly when the ids coincide.
struct Judgment {
  std::string judgment_id;
  std::string passage_id;
  std::string annotation_a;
  std::string annotation_b;
  Outcome outcome = Outcome::Tie;
  std::string rater_id;
  std::int64_t submitted_at = 0;  // unix epoch milliseconds

  friend bool operator==(const Judgment&, const Judgment&) = default;
};

// Throws ValidationError (a == b, blank ids) or SelfRating.
void validate_judgment(const Judgment& j);

struct TournamentConfig {
  double k_factor = 32.0;
  double initial_rating = 1000.0;

  // Throws InvalidConfig unless k_factor > 0 and both values are finite.
  void validate() const;
};

using Ratings = std::map<std::string, double>;

// (E_A, E_B) with E_A = 1 / (1 + 10^((R_B - R_A) / 400)) and E_B = 1 - E_A.
std::pair<double, double> expected_scores(double r_a, double r_b);

// Applies one game. Annotations missing from `ratings` are seeded at the
// initial rating unless seeding is disabled (then UnknownAnnotation).
Ratings apply_judgment(Ratings ratings, const Judgment& judgment, const TournamentConfig& config,
                       bool seed_missing = true);

struct RankedEntry {
  std::string annotation_id;
  double rating = 0.0;
  double rank = 0.0;  // 1 = best; tied ratings share the average rank
  std::size_t games = 0;

  friend bool operator==(const RankedEntry&, const RankedEntry&) = default;
};

struct Leaderboard {
  std::string passage_id;
  Ratings ratings;
  // Descending rating; ties ordered by annotation id.
  std::vector<RankedEntry> ranking;
  std::map<std::string, std::size_t> games_played;

  friend bool operator==(const Leaderboard&, const Leaderboard&) = default;
};

// Seeds every registered annotation (and every annotation seen in a judgment)
// at the initial rating and applies the judgments sorted by judgment_id.
// Throws MixedPassages if a judgment belongs to another passage.
Leaderboard run_tournament(std::string_view passage_id, const std::vector<Judgment>& judgments,
                           const TournamentConfig& config,
                           const std::vector<std::string>& registered = {});

// Groups judgments by passage and runs one tournament each, registering the
// passage's annotations from the dataset when given.
std::vector<Leaderboard> run_all_tournaments(const std::vector<Judgment>& judgments,
                                             const TournamentConfig& config,
                                             const Dataset* dataset = nullptr);

// Highest-rated annotation; exact ties go to the smallest id.
// Throws EmptyLeaderboard.
const std::string& gold_of(const Leaderboard& board);

// Average ranks (1 = highest value) for an arbitrary score vector.
std::vector<double> average_ranks_descending(const std::vector<double>& values);

struct PairingRequest {
  std::string passage_id;
  // Annotation ids (= author ids) available for the passage.
  std::vector<std::string> annotations;
};

struct Assignment {
  std::string passage_id;
  std::string left;   // shown on the left / as annotation A
  std::string right;  // shown on the right / as annotation B
  std::string rater_id;
  bool overlap = false;  // second, reliability-only assignment of a pair

  friend bool operator==(const Assignment&, const Assignment&) = default;
};

struct Schedule {
  std::vector<Assignment> assignments;
  // Pairs selected for overlap that had no second eligible rater.
  std::size_t overlap_shortfall = 0;
};

struct SchedulerConfig {
  std::uint64_t seed = 20240601;
  double overlap_fraction = 0.2;
};

// Assigns every unordered annotation pair of every passage to a rater who
// authored neither side, round-robin over a seeded shuffle of the raters.
// A seeded overlap_fraction of the pairs gets a second distinct rater.
// Presentation side is a seeded coin flip per assignment.
// Throws NoEligibleRater, or InvalidConfig for < 2 annotations on a passage.
Schedule build_pairings(const std::vector<PairingRequest>& passages,
                        const std::vector<std::string>& raters, const SchedulerConfig& config);

}  // namespace fcm
