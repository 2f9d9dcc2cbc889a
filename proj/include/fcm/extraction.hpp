#pragma once

// Prompt construction for causal-triplet extraction and parsers for the two
// output grammars models produce:
//
//   inline:  <triplet> SOURCE <subj> TARGET <obj> DIRECTION ...
//   tagged:  <triplet> <subj>SOURCE</subj> <obj>TARGET</obj>
//            <relation>DIRECTION</relation> </triplet> ...
//
// In the inline grammar the phrase right after <triplet> is the cause and the
// phrase after <subj> is the effect.

#include <chrono>
#include <cstddef>
#include <mutex>
#include <condition_variable>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "fcm/core.hpp"

namespace fcm {

enum class PromptKind { InstructionTuned, ZeroShotTagged, ThreeShot };
enum class PromptDialect { BracketInst, HeaderTagged };

std::string_view to_string(PromptKind kind);
std::string_view to_string(PromptDialect dialect);
PromptKind parse_prompt_kind(std::string_view raw);
// Accepts "bracket-inst" / "header-tagged". Throws InvalidConfig.
PromptDialect parse_prompt_dialect(std::string_view raw);

struct Exemplar {
  std::string passage_text;
  std::vector<CausalEdge> edges;
};

struct PromptTemplate {
  PromptKind kind = PromptKind::InstructionTuned;
  PromptDialect dialect = PromptDialect::BracketInst;
  std::vector<Exemplar> exemplars;

  // ThreeShot needs exactly three exemplars, the other kinds none.
  // Throws InvalidConfig.
  void validate() const;
};

// Instruction text used by the inline-grammar prompts.
std::string_view inline_instruction();
// Instruction text used by the tagged-grammar (zero-shot) prompts.
std::string_view tagged_instruction();

std::string build_prompt(const PromptTemplate& tmpl, const Passage& passage);

enum class ParseMode { Strict, Lenient };

struct Diagnostic {
  std::size_t position = 0;  // byte offset into the parsed text
  std::string message;

  friend bool operator==(const Diagnostic&, const Diagnostic&) = default;
};

struct ParseReport {
  std::vector<RawEdge> edges;
  std::vector<Diagnostic> diagnostics;
  ParseMode mode = ParseMode::Lenient;
};

// Lenient mode never throws: malformed segments become diagnostics and are
// skipped. Strict mode throws ParseFailure on the first batch of problems.
ParseReport parse_inline_triplets(std::string_view raw, ParseMode mode = ParseMode::Lenient);
ParseReport parse_tagged_triplets(std::string_view raw, ParseMode mode = ParseMode::Lenient);

// Inverse of parse_inline_triplets for phrases free of marker tokens.
std::string serialize_inline_triplets(const std::vector<CausalEdge>& edges);

// Removes end-of-sequence / turn markers (</s>, <s>, <|eot_id|>, ...).
std::string strip_special_tokens(std::string_view raw);

struct CompletionEndpoint {
  std::string base_url;
  std::string path = "/v1/completions";
  std::string model;
  double temperature = 0.0;
  int max_tokens = 512;
  // Send {"messages": [{"role":"user","content":prompt}]} instead of {"prompt"}.
  bool chat_messages = false;
  std::chrono::milliseconds timeout{60000};
  std::size_t max_in_flight = 4;
};

// Blocking completion client. At most endpoint.max_in_flight requests run at
// once across all threads sharing the client.
class CompletionClient {
 public:
  explicit CompletionClient(CompletionEndpoint endpoint);

  // Returns the first choice's text (choices[0].text or
  // choices[0].message.content). Throws EndpointError.
  std::string complete(const std::string& prompt) const;

  const CompletionEndpoint& endpoint() const noexcept { return endpoint_; }

 private:
  CompletionEndpoint endpoint_;
  mutable std::mutex mutex_;
  mutable std::condition_variable slot_free_;
  mutable std::size_t in_flight_ = 0;
};

struct ExtractionResult {
  Annotation annotation;
  std::vector<Diagnostic> diagnostics;
  std::size_t dropped_duplicates = 0;
  std::string raw_reply;
};

// Builds the prompt, requests one completion and parses it with the grammar
// that matches the template kind (tagged for ZeroShotTagged, inline otherwise).
ExtractionResult extract_annotation(const CompletionClient& client, const PromptTemplate& tmpl,
                                    const Passage& passage, ParseMode mode = ParseMode::Lenient);

}  // namespace fcm
