#include "fcm/text_similarity.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

#include "fcm/core.hpp"
#include "fcm/error.hpp"
#include "fcm/porter_stemmer.hpp"

namespace fcm {

namespace {

bool is_punct(char c) { return std::ispunct(static_cast<unsigned char>(c)) != 0; }
bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }

std::string collapse_fold(std::string_view raw) {
  std::string out;
  bool pending = false;
  for (char c : raw) {
    if (is_space(c)) {
      pending = !out.empty();
      continue;
    }
    if (pending) out.push_back(' ');
    pending = false;
    out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  }
  return out;
}

using NgramCounts = std::map<std::vector<std::string>, std::size_t>;

NgramCounts count_ngrams(const TokenSequence& seq, std::size_t n) {
  NgramCounts counts;
  const auto& t = seq.tokens();
  for (std::size_t i = 0; i + n <= t.size(); ++i) {
    ++counts[std::vector<std::string>(t.begin() + static_cast<std::ptrdiff_t>(i),
                                      t.begin() + static_cast<std::ptrdiff_t>(i + n))];
  }
  return counts;
}

std::size_t chunk_count(std::vector<std::pair<std::size_t, std::size_t>> pairs) {
  if (pairs.empty()) return 0;
  std::sort(pairs.begin(), pairs.end());
  std::size_t chunks = 1;
  for (std::size_t i = 1; i < pairs.size(); ++i) {
    const bool adjacent = pairs[i].first == pairs[i - 1].first + 1 &&
                          pairs[i].second == pairs[i - 1].second + 1;
    if (!adjacent) ++chunks;
  }
  return chunks;
}

// One alignment stage: among still-unmatched positions, find a matching of
// maximum size and, among those, the fewest chunks of the combined alignment.
class StageSearch {
 public:
  static constexpr std::size_t kNodeBudget = 200000;

  StageSearch(std::vector<std::vector<std::size_t>> options,
              std::vector<std::pair<std::size_t, std::size_t>> fixed, std::size_t ref_size)
      : options_(std::move(options)), fixed_(std::move(fixed)), ref_used_(ref_size, false) {
    for (const auto& [c, r] : fixed_) ref_used_[r] = true;
    for (std::size_t c = 0; c < options_.size(); ++c) {
      if (!options_[c].empty()) rows_.push_back(c);
    }
  }

  std::vector<std::pair<std::size_t, std::size_t>> run() {
    best_ = fixed_;
    best_count_ = 0;
    best_chunks_ = chunk_count(fixed_);
    current_ = fixed_;
    dfs(0, 0);
    return best_;
  }

 private:
  void dfs(std::size_t row, std::size_t matched) {
    if (++nodes_ > kNodeBudget) return;
    if (matched + (rows_.size() - row) < best_count_) return;
    if (row == rows_.size()) {
      const std::size_t chunks = chunk_count(current_);
      if (matched > best_count_ || (matched == best_count_ && chunks < best_chunks_)) {
        best_ = current_;
        best_count_ = matched;
        best_chunks_ = chunks;
      }
      return;
    }
    const std::size_t c = rows_[row];
    for (std::size_t r : options_[c]) {
      if (ref_used_[r]) continue;
      ref_used_[r] = true;
      current_.emplace_back(c, r);
      dfs(row + 1, matched + 1);
      current_.pop_back();
      ref_used_[r] = false;
    }
    dfs(row + 1, matched);
  }

  std::vector<std::vector<std::size_t>> options_;
  std::vector<std::pair<std::size_t, std::size_t>> fixed_;
  std::vector<bool> ref_used_;
  std::vector<std::size_t> rows_;
  std::vector<std::pair<std::size_t, std::size_t>> current_;
  std::vector<std::pair<std::size_t, std::size_t>> best_;
  std::size_t best_count_ = 0;
  std::size_t best_chunks_ = 0;
  std::size_t nodes_ = 0;
};

bool synonyms(const MeteorParams& params, const std::string& a, const std::string& b) {
  for (const auto& [x, y] : params.synonyms) {
    const std::string fx = fold_case(x), fy = fold_case(y);
    if ((fx == a && fy == b) || (fx == b && fy == a)) return true;
  }
  return false;
}

}  // namespace

TokenSequence tokenize(std::string_view raw) {
  TokenSequence seq;
  std::size_t i = 0;
  while (i < raw.size()) {
    while (i < raw.size() && is_space(raw[i])) ++i;
    std::size_t j = i;
    while (j < raw.size() && !is_space(raw[j])) ++j;
    std::string_view word = raw.substr(i, j - i);
    while (!word.empty() && is_punct(word.front())) word.remove_prefix(1);
    while (!word.empty() && is_punct(word.back())) word.remove_suffix(1);
    if (!word.empty()) seq.tokens_.push_back(fold_case(word));
    i = j;
  }
  return seq;
}

std::string_view to_string(MeasureKind kind) {
  switch (kind) {
    case MeasureKind::Exact: return "exact";
    case MeasureKind::Bleu: return "bleu";
    case MeasureKind::Rouge1: return "rouge1";
    case MeasureKind::Meteor: return "meteor";
    case MeasureKind::External: return "external";
  }
  return "exact";
}

MeasureKind parse_measure_kind(std::string_view raw) {
  const std::string s = fold_case(raw);
  if (s == "exact") return MeasureKind::Exact;
  if (s == "bleu") return MeasureKind::Bleu;
  if (s == "rouge1") return MeasureKind::Rouge1;
  if (s == "meteor") return MeasureKind::Meteor;
  if (s == "external") return MeasureKind::External;
  throw Error(ErrorCode::InvalidConfig, "unknown measure '" + std::string(raw) + "'");
}

double sim_exact(std::string_view candidate, std::string_view reference) {
  return collapse_fold(candidate) == collapse_fold(reference) ? 1.0 : 0.0;
}

double sim_bleu(const TokenSequence& candidate, const TokenSequence& reference,
                const BleuParams& params) {
  if (candidate.empty()) return 0.0;
  const std::size_t max_n =
      std::min<std::size_t>(static_cast<std::size_t>(params.max_n), candidate.size());
  double log_sum = 0.0;
  for (std::size_t n = 1; n <= max_n; ++n) {
    const NgramCounts cand = count_ngrams(candidate, n);
    const NgramCounts ref = count_ngrams(reference, n);
    std::size_t clipped = 0;
    for (const auto& [gram, count] : cand) {
      auto it = ref.find(gram);
      if (it != ref.end()) clipped += std::min(count, it->second);
    }
    const double total = static_cast<double>(candidate.size() - n + 1);
    const double precision = clipped == 0 ? params.epsilon : static_cast<double>(clipped) / total;
    log_sum += std::log(precision);
  }
  const double geo_mean = std::exp(log_sum / static_cast<double>(max_n));
  const double c = static_cast<double>(candidate.size());
  const double r = static_cast<double>(reference.size());
  const double brevity = c < r ? std::exp(1.0 - r / c) : 1.0;
  return std::clamp(geo_mean * brevity, 0.0, 1.0);
}

double sim_rouge1(const TokenSequence& candidate, const TokenSequence& reference,
                  const RougeParams& params) {
  if (candidate.empty() && reference.empty()) return 1.0;
  std::map<std::string, std::size_t> ref_counts;
  for (const auto& t : reference.tokens()) ++ref_counts[t];
  std::map<std::string, std::size_t> cand_counts;
  for (const auto& t : candidate.tokens()) ++cand_counts[t];
  std::size_t overlap = 0;
  for (const auto& [tok, count] : cand_counts) {
    auto it = ref_counts.find(tok);
    if (it != ref_counts.end()) overlap += std::min(count, it->second);
  }
  if (overlap == 0) return 0.0;
  const double m = static_cast<double>(overlap);
  const double p = m / static_cast<double>(candidate.size());
  const double r = m / static_cast<double>(reference.size());
  switch (params.variant) {
    case RougeVariant::Precision: return p;
    case RougeVariant::Recall: return r;
    case RougeVariant::FMeasure: break;
  }
  return 2.0 * p * r / (p + r);
}

MeteorAlignment meteor_align(const TokenSequence& candidate, const TokenSequence& reference,
                             const MeteorParams& params) {
  std::vector<std::string> cand_stems, ref_stems;
  if (params.stemming) {
    for (const auto& t : candidate.tokens()) cand_stems.push_back(porter_stem(t));
    for (const auto& t : reference.tokens()) ref_stems.push_back(porter_stem(t));
  }

  using Relation = bool (*)(const MeteorParams&, const std::string&, const std::string&);
  std::vector<std::pair<int, Relation>> stages;
  stages.emplace_back(0, [](const MeteorParams&, const std::string& a, const std::string& b) {
    return a == b;
  });
  if (params.stemming) stages.emplace_back(1, nullptr);
  if (!params.synonyms.empty()) stages.emplace_back(2, &synonyms);

  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  for (const auto& [stage, relation] : stages) {
    std::vector<bool> cand_used(candidate.size(), false), ref_used(reference.size(), false);
    for (const auto& [c, r] : pairs) {
      cand_used[c] = true;
      ref_used[r] = true;
    }
    std::vector<std::vector<std::size_t>> options(candidate.size());
    for (std::size_t c = 0; c < candidate.size(); ++c) {
      if (cand_used[c]) continue;
      for (std::size_t r = 0; r < reference.size(); ++r) {
        if (ref_used[r]) continue;
        const bool related = stage == 1 ? cand_stems[c] == ref_stems[r]
                                        : relation(params, candidate[c], reference[r]);
        if (related) options[c].push_back(r);
      }
    }
    pairs = StageSearch(std::move(options), pairs, reference.size()).run();
  }

  MeteorAlignment out;
  std::sort(pairs.begin(), pairs.end());
  out.matches = pairs.size();
  out.chunks = chunk_count(pairs);
  out.pairs = std::move(pairs);
  return out;
}

double sim_meteor(const TokenSequence& candidate, const TokenSequence& reference,
                  const MeteorParams& params) {
  if (candidate.empty() || reference.empty()) return 0.0;
  const MeteorAlignment a = meteor_align(candidate, reference, params);
  if (a.matches == 0) return 0.0;
  const double m = static_cast<double>(a.matches);
  const double p = m / static_cast<double>(candidate.size());
  const double r = m / static_cast<double>(reference.size());
  const double f_mean = p * r / (params.alpha * p + (1.0 - params.alpha) * r);
  const double penalty =
      params.gamma * std::pow(static_cast<double>(a.chunks) / m, params.beta);
  return std::clamp(f_mean * (1.0 - penalty), 0.0, 1.0);
}

double sim_external(std::string_view candidate, std::string_view reference,
                    const ExternalScorer& scorer) {
  return scorer.score(candidate, reference);
}

void MeasureConfig::validate() const {
  switch (kind) {
    case MeasureKind::Exact:
    case MeasureKind::Rouge1:
      return;
    case MeasureKind::Bleu:
      if (bleu.max_n < 1) throw Error(ErrorCode::InvalidConfig, "BLEU max n must be >= 1");
      if (!(bleu.epsilon > 0.0) || bleu.epsilon >= 1.0) {
        throw Error(ErrorCode::InvalidConfig, "BLEU epsilon must lie in (0, 1)");
      }
      return;
    case MeasureKind::Meteor:
      if (!(meteor.alpha >= 0.0 && meteor.alpha <= 1.0)) {
        throw Error(ErrorCode::InvalidConfig, "METEOR alpha must lie in [0, 1]");
      }
      if (!(meteor.gamma >= 0.0 && meteor.gamma <= 1.0) || !(meteor.beta > 0.0)) {
        throw Error(ErrorCode::InvalidConfig, "METEOR penalty needs gamma in [0,1], beta > 0");
      }
      return;
    case MeasureKind::External:
      if (!external || external->base_url.empty()) {
        throw Error(ErrorCode::InvalidConfig, "external measure needs an endpoint");
      }
      return;
  }
}

TextSimilarity::TextSimilarity(MeasureConfig config) : config_(std::move(config)) {
  config_.validate();
  if (config_.kind == MeasureKind::External) {
    external_ = std::make_shared<ExternalScorer>(*config_.external);
  }
}

double TextSimilarity::operator()(std::string_view candidate, std::string_view reference) const {
  switch (config_.kind) {
    case MeasureKind::Exact:
      return sim_exact(candidate, reference);
    case MeasureKind::Bleu:
      return sim_bleu(tokenize(candidate), tokenize(reference), config_.bleu);
    case MeasureKind::Rouge1:
      return sim_rouge1(tokenize(candidate), tokenize(reference), config_.rouge);
    case MeasureKind::Meteor:
      return sim_meteor(tokenize(candidate), tokenize(reference), config_.meteor);
    case MeasureKind::External:
      return sim_external(candidate, reference, *external_);
  }
  return 0.0;
}

}  // namespace fcm
