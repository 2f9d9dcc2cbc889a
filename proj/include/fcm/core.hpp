#pragma once

// Data model shared by every module: passages, causal edges, annotations and
// the normalization rules applied to them.

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "fcm/error.hpp"

namespace fcm {

enum class Direction { Increase, Decrease };

// Accepts positive/increase/+ and negative/decrease/- (case-insensitive,
// surrounding whitespace ignored). Throws UnrecognizedDirection otherwise.
Direction canonicalize_direction(std::string_view raw);

// Serialized form: "increase" / "decrease".
std::string_view to_string(Direction d);

// Collapses whitespace runs to a single space and trims both ends.
// Throws EmptyPhrase when nothing is left.
std::string normalize_phrase(std::string_view raw);

// Lowercases ASCII letters; other bytes pass through unchanged.
std::string fold_case(std::string_view s);

class CausalEdge {
 public:
  // Normalizes both phrases; throws EmptyPhrase on a blank source or target.
  CausalEdge(std::string_view source, std::string_view target, Direction direction,
             std::optional<double> weight = std::nullopt);

  const std::string& source() const noexcept { return source_; }
  const std::string& target() const noexcept { return target_; }
  Direction direction() const noexcept { return direction_; }
  // Carried through serialization only; no measure reads it.
  const std::optional<double>& weight() const noexcept { return weight_; }

  // Identity used for deduplication: normalized source, target and direction.
  bool same_relation(const CausalEdge& other) const noexcept {
    return source_ == other.source_ && target_ == other.target_ &&
           direction_ == other.direction_;
  }

  friend bool operator==(const CausalEdge&, const CausalEdge&) = default;

 private:
  std::string source_;
  std::string target_;
  Direction direction_;
  std::optional<double> weight_;
};

enum class Origin { Human, ModelFewShot, ModelFineTuned };

std::string_view to_string(Origin o);
Origin parse_origin(std::string_view raw);

enum class Split { Train, Validation, Test, Unassigned };

std::string_view to_string(Split s);
Split parse_split(std::string_view raw);

struct Passage {
  std::string passage_id;
  std::string text;
  std::string provenance;
  Split split = Split::Unassigned;

  friend bool operator==(const Passage&, const Passage&) = default;
};

// Annotations are identified within a passage by their annotator id; one
// annotator contributes at most one annotation per passage.
struct Annotation {
  std::string passage_id;
  std::string annotator_id;
  std::vector<CausalEdge> edges;
  Origin origin = Origin::Human;

  const std::string& id() const noexcept { return annotator_id; }

  friend bool operator==(const Annotation&, const Annotation&) = default;
};

struct Rater {
  std::string rater_id;
  std::string display_name;

  friend bool operator==(const Rater&, const Rater&) = default;
};

// Unvalidated edge as it arrives from a file, a form or a parser.
struct RawEdge {
  std::string source;
  std::string target;
  Direction direction = Direction::Increase;
  std::optional<double> weight;
};

struct BuiltAnnotation {
  Annotation annotation;
  std::size_t dropped_duplicates = 0;
};

class Dataset;

// Normalizes the edges and drops exact duplicates (first occurrence wins).
// Throws UnknownPassage if the passage is not in the dataset.
BuiltAnnotation build_annotation(const Dataset& dataset, std::string_view passage_id,
                                 std::string_view annotator_id,
                                 const std::vector<RawEdge>& edges, Origin origin);

// Same as above without the passage existence check.
BuiltAnnotation build_annotation_unchecked(std::string_view passage_id,
                                           std::string_view annotator_id,
                                           const std::vector<RawEdge>& edges,
                                           Origin origin);

// Removes repeated relations in place, keeping first occurrences.
std::size_t dedupe_edges(std::vector<CausalEdge>& edges);

class Dataset {
 public:
  Dataset() = default;

  // Throws DuplicatePassage or EmptyPhrase (empty text).
  void add_passage(Passage passage);
  // Throws UnknownPassage, or ValidationError for a second annotation by the
  // same annotator on one passage.
  void add_annotation(Annotation annotation);

  const std::vector<Passage>& passages() const noexcept { return passages_; }
  const std::vector<Annotation>& annotations() const noexcept { return annotations_; }

  const Passage* find_passage(std::string_view passage_id) const;
  bool has_passage(std::string_view passage_id) const {
    return find_passage(passage_id) != nullptr;
  }
  const Annotation* find_annotation(std::string_view passage_id,
                                    std::string_view annotator_id) const;
  std::vector<const Annotation*> annotations_for(std::string_view passage_id) const;

  friend bool operator==(const Dataset& a, const Dataset& b) {
    return a.passages_ == b.passages_ && a.annotations_ == b.annotations_;
  }

 private:
  std::vector<Passage> passages_;
  std::vector<Annotation> annotations_;
  std::unordered_map<std::string, std::size_t> passage_index_;
};

// Re-checks every stored edge and annotation against the model invariants;
// returns human-readable problems (empty when valid).
std::vector<std::string> validate(const Dataset& dataset);

}  // namespace fcm
