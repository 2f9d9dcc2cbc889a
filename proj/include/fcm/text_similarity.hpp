#pragma once

// Per-attribute textual similarity S(candidate, reference). Candidate is always
// the predicted phrase and reference the gold phrase.

#include <chrono>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace fcm {

class TokenSequence {
 public:
  TokenSequence() = default;

  const std::vector<std::string>& tokens() const noexcept { return tokens_; }
  std::size_t size() const noexcept { return tokens_.size(); }
  bool empty() const noexcept { return tokens_.empty(); }
  const std::string& operator[](std::size_t i) const { return tokens_[i]; }

  friend bool operator==(const TokenSequence&, const TokenSequence&) = default;

 private:
  friend TokenSequence tokenize(std::string_view raw);
  std::vector<std::string> tokens_;
};

// Lowercase, split on whitespace, strip leading/trailing ASCII punctuation,
// drop empties.
TokenSequence tokenize(std::string_view raw);

enum class MeasureKind { Exact, Bleu, Rouge1, Meteor, External };

std::string_view to_string(MeasureKind kind);
// Accepts exact|bleu|rouge1|meteor|external. Throws InvalidConfig.
MeasureKind parse_measure_kind(std::string_view raw);

struct BleuParams {
  int max_n = 4;
  double epsilon = 1e-9;
};

enum class RougeVariant { Precision, Recall, FMeasure };

struct RougeParams {
  RougeVariant variant = RougeVariant::FMeasure;
};

struct MeteorParams {
  // F_mean = P*R / (alpha*P + (1-alpha)*R); alpha = 0.9 gives 10PR/(R+9P).
  double alpha = 0.9;
  double gamma = 0.5;
  double beta = 3.0;
  bool stemming = true;
  // Symmetric synonym pairs, compared after lowercasing.
  std::vector<std::pair<std::string, std::string>> synonyms;
};

struct EndpointConfig {
  std::string base_url;  // e.g. http://127.0.0.1:8080
  std::chrono::milliseconds timeout{10000};
};

double sim_exact(std::string_view candidate, std::string_view reference);
double sim_bleu(const TokenSequence& candidate, const TokenSequence& reference,
                const BleuParams& params = {});
double sim_rouge1(const TokenSequence& candidate, const TokenSequence& reference,
                  const RougeParams& params = {});
double sim_meteor(const TokenSequence& candidate, const TokenSequence& reference,
                  const MeteorParams& params = {});

// Alignment details behind sim_meteor, exposed for diagnostics and tests.
struct MeteorAlignment {
  std::size_t matches = 0;
  std::size_t chunks = 0;
  // (candidate index, reference index), sorted by candidate index.
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
};

MeteorAlignment meteor_align(const TokenSequence& candidate, const TokenSequence& reference,
                             const MeteorParams& params = {});

// Client for an external learned scorer: POST /score {candidate, reference} ->
// {score}. Scores pass through unclamped. Results are memoized per
// (candidate, reference); the cache is safe to share across threads.
class ExternalScorer {
 public:
  explicit ExternalScorer(EndpointConfig endpoint);

  // Throws EndpointError on transport/HTTP failure, MalformedScore when the
  // reply has no finite numeric "score".
  double score(std::string_view candidate, std::string_view reference) const;

  // POST /score_batch with parallel arrays; fills the cache.
  std::vector<double> score_batch(const std::vector<std::string>& candidates,
                                  const std::vector<std::string>& references) const;

  const EndpointConfig& endpoint() const noexcept { return endpoint_; }
  std::size_t cache_size() const;

 private:
  EndpointConfig endpoint_;
  mutable std::mutex mutex_;
  mutable std::map<std::pair<std::string, std::string>, double> cache_;
};

double sim_external(std::string_view candidate, std::string_view reference,
                    const ExternalScorer& scorer);

struct MeasureConfig {
  MeasureKind kind = MeasureKind::Exact;
  BleuParams bleu;
  RougeParams rouge;
  MeteorParams meteor;
  std::optional<EndpointConfig> external;

  // Throws InvalidConfig when the parameters for `kind` are unusable.
  void validate() const;
};

// A configured S(.,.). Copies share the external scorer's cache.
class TextSimilarity {
 public:
  explicit TextSimilarity(MeasureConfig config);

  double operator()(std::string_view candidate, std::string_view reference) const;

  const MeasureConfig& config() const noexcept { return config_; }
  MeasureKind kind() const noexcept { return config_.kind; }

 private:
  MeasureConfig config_;
  std::shared_ptr<ExternalScorer> external_;
};

}  // namespace fcm
