#include "fcm/core.hpp"

#include <algorithm>
#include <cctype>
#include <unordered_set>

namespace fcm {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::UnrecognizedDirection: return "UnrecognizedDirection";
    case ErrorCode::EmptyPhrase: return "EmptyPhrase";
    case ErrorCode::UnknownPassage: return "UnknownPassage";
    case ErrorCode::DuplicatePassage: return "DuplicatePassage";
    case ErrorCode::ParseFailure: return "ParseFailure";
    case ErrorCode::EndpointError: return "EndpointError";
    case ErrorCode::MalformedScore: return "MalformedScore";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::PassageMismatch: return "PassageMismatch";
    case ErrorCode::SelfRating: return "SelfRating";
    case ErrorCode::UnknownAnnotation: return "UnknownAnnotation";
    case ErrorCode::MixedPassages: return "MixedPassages";
    case ErrorCode::EmptyLeaderboard: return "EmptyLeaderboard";
    case ErrorCode::NoEligibleRater: return "NoEligibleRater";
    case ErrorCode::ItemMismatch: return "ItemMismatch";
    case ErrorCode::DegenerateRanking: return "DegenerateRanking";
    case ErrorCode::InsufficientData: return "InsufficientData";
    case ErrorCode::AlignmentError: return "AlignmentError";
    case ErrorCode::GoldMismatch: return "GoldMismatch";
    case ErrorCode::SchemaMismatch: return "SchemaMismatch";
    case ErrorCode::ValidationError: return "ValidationError";
    case ErrorCode::StorageError: return "StorageError";
    case ErrorCode::InvalidSession: return "InvalidSession";
    case ErrorCode::UnknownPair: return "UnknownPair";
    case ErrorCode::AlreadyJudged: return "AlreadyJudged";
  }
  return "Unknown";
}

namespace {

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }

std::string_view trim(std::string_view s) {
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

}  // namespace

std::string fold_case(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

Direction canonicalize_direction(std::string_view raw) {
  const std::string token = fold_case(trim(raw));
  if (token == "positive" || token == "increase" || token == "+") return Direction::Increase;
  if (token == "negative" || token == "decrease" || token == "-") return Direction::Decrease;
  throw Error(ErrorCode::UnrecognizedDirection, "'" + std::string(raw) + "'");
}

std::string_view to_string(Direction d) {
  return d == Direction::Increase ? "increase" : "decrease";
}

std::string normalize_phrase(std::string_view raw) {
  std::string out;
  out.reserve(raw.size());
  bool pending_space = false;
  for (char c : raw) {
    if (is_space(c)) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out.push_back(' ');
    pending_space = false;
    out.push_back(c);
  }
  if (out.empty()) throw Error(ErrorCode::EmptyPhrase, "phrase is blank");
  return out;
}

CausalEdge::CausalEdge(std::string_view source, std::string_view target,
                       Direction direction, std::optional<double> weight)
    : source_(normalize_phrase(source)),
      target_(normalize_phrase(target)),
      direction_(direction),
      weight_(weight) {}

std::string_view to_string(Origin o) {
  switch (o) {
    case Origin::Human: return "human";
    case Origin::ModelFewShot: return "model_few_shot";
    case Origin::ModelFineTuned: return "model_fine_tuned";
  }
  return "human";
}

Origin parse_origin(std::string_view raw) {
  const std::string s = fold_case(trim(raw));
  if (s == "human") return Origin::Human;
  if (s == "model_few_shot") return Origin::ModelFewShot;
  if (s == "model_fine_tuned") return Origin::ModelFineTuned;
  throw Error(ErrorCode::ValidationError, "unknown origin '" + std::string(raw) + "'");
}

std::string_view to_string(Split s) {
  switch (s) {
    case Split::Train: return "train";
    case Split::Validation: return "validation";
    case Split::Test: return "test";
    case Split::Unassigned: return "unassigned";
  }
  return "unassigned";
}

Split parse_split(std::string_view raw) {
  const std::string s = fold_case(trim(raw));
  if (s == "train") return Split::Train;
  if (s == "validation") return Split::Validation;
  if (s == "test") return Split::Test;
  if (s == "unassigned" || s.empty()) return Split::Unassigned;
  throw Error(ErrorCode::ValidationError, "unknown split '" + std::string(raw) + "'");
}

std::size_t dedupe_edges(std::vector<CausalEdge>& edges) {
  std::vector<CausalEdge> kept;
  kept.reserve(edges.size());
  for (auto& e : edges) {
    const bool seen = std::any_of(kept.begin(), kept.end(),
                                  [&](const CausalEdge& k) { return k.same_relation(e); });
    if (!seen) kept.push_back(std::move(e));
  }
  const std::size_t dropped = edges.size() - kept.size();
  edges = std::move(kept);
  return dropped;
}

BuiltAnnotation build_annotation_unchecked(std::string_view passage_id,
                                           std::string_view annotator_id,
                                           const std::vector<RawEdge>& edges,
                                           Origin origin) {
  BuiltAnnotation built;
  built.annotation.passage_id = std::string(passage_id);
  built.annotation.annotator_id = std::string(annotator_id);
  built.annotation.origin = origin;
  built.annotation.edges.reserve(edges.size());
  for (const auto& raw : edges) {
    built.annotation.edges.emplace_back(raw.source, raw.target, raw.direction, raw.weight);
  }
  built.dropped_duplicates = dedupe_edges(built.annotation.edges);
  return built;
}

BuiltAnnotation build_annotation(const Dataset& dataset, std::string_view passage_id,
                                 std::string_view annotator_id,
                                 const std::vector<RawEdge>& edges, Origin origin) {
  if (!dataset.has_passage(passage_id)) {
    throw Error(ErrorCode::UnknownPassage, std::string(passage_id));
  }
  return build_annotation_unchecked(passage_id, annotator_id, edges, origin);
}

void Dataset::add_passage(Passage passage) {
  if (trim(passage.text).empty()) {
    throw Error(ErrorCode::EmptyPhrase, "passage '" + passage.passage_id + "' has no text");
  }
  if (passage_index_.count(passage.passage_id) != 0) {
    throw Error(ErrorCode::DuplicatePassage, passage.passage_id);
  }
  passage_index_.emplace(passage.passage_id, passages_.size());
  passages_.push_back(std::move(passage));
}

void Dataset::add_annotation(Annotation annotation) {
  if (!has_passage(annotation.passage_id)) {
    throw Error(ErrorCode::UnknownPassage, annotation.passage_id);
  }
  if (find_annotation(annotation.passage_id, annotation.annotator_id) != nullptr) {
    throw Error(ErrorCode::ValidationError, "second annotation by '" +
                                                annotation.annotator_id + "' on passage '" +
                                                annotation.passage_id + "'");
  }
  annotations_.push_back(std::move(annotation));
}

const Passage* Dataset::find_passage(std::string_view passage_id) const {
  auto it = passage_index_.find(std::string(passage_id));
  return it == passage_index_.end() ? nullptr : &passages_[it->second];
}

const Annotation* Dataset::find_annotation(std::string_view passage_id,
                                           std::string_view annotator_id) const {
  for (const auto& a : annotations_) {
    if (a.passage_id == passage_id && a.annotator_id == annotator_id) return &a;
  }
  return nullptr;
}

std::vector<const Annotation*> Dataset::annotations_for(std::string_view passage_id) const {
  std::vector<const Annotation*> out;
  for (const auto& a : annotations_) {
    if (a.passage_id == passage_id) out.push_back(&a);
  }
  return out;
}

std::vector<std::string> validate(const Dataset& dataset) {
  std::vector<std::string> problems;
  std::unordered_set<std::string> ids;
  for (const auto& p : dataset.passages()) {
    if (!ids.insert(p.passage_id).second) problems.push_back("duplicate passage " + p.passage_id);
    if (trim(p.text).empty()) problems.push_back("passage " + p.passage_id + " has empty text");
  }
  for (const auto& a : dataset.annotations()) {
    const std::string where = a.passage_id + "/" + a.annotator_id;
    if (ids.count(a.passage_id) == 0) problems.push_back(where + ": unknown passage");
    for (std::size_t i = 0; i < a.edges.size(); ++i) {
      const auto& e = a.edges[i];
      for (const std::string* phrase : {&e.source(), &e.target()}) {
        try {
          if (normalize_phrase(*phrase) != *phrase) {
            problems.push_back(where + ": edge " + std::to_string(i) + " not normalized");
          }
        } catch (const Error&) {
          problems.push_back(where + ": edge " + std::to_string(i) + " has empty phrase");
        }
      }
      for (std::size_t j = 0; j < i; ++j) {
        if (a.edges[j].same_relation(e)) {
          problems.push_back(where + ": edge " + std::to_string(i) + " duplicates edge " +
                             std::to_string(j));
        }
      }
    }
  }
  return problems;
}

}  // namespace fcm
