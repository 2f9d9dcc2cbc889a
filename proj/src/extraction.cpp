#include "fcm/extraction.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <optional>

#include <json.hpp>

#include "fcm/error.hpp"
#include "fcm/http_util.hpp"

namespace fcm {

using nlohmann::json;

namespace {

constexpr std::string_view kInlineInstruction =
    "Given the input sentence, identify all the triplets of entities and the corresponding "
    "causal relationships between them. The entities should be phrases from the input "
    "sentence, and the relationships should either be 'Positive' or 'Negative'. Each new "
    "extracted triplet should start with the <triplet> token, followed by the subject phrase, "
    "the object phrase, and the relationship, separated by <subj> and <obj> tokens.";

constexpr std::string_view kTaggedInstruction =
    "Given the input sentence, identify all the triplets (subject, object and causal "
    "relation). The subject and object should be phrases from the input sentence.\n"
    "The causal relation between subject and object should strictly be either \"Positive\" "
    "or \"Negative\" and nothing else.\n"
    "Each new extracted triplet i.e. subject, object and relation should start with a newline "
    "and be within <triplet> and </triplet>. The subject should be within <subj> and </subj> "
    "tokens. The object should be within <obj> and </obj> tokens. The causal relation should "
    "be within <relation> and </relation> tokens. The format of output of each triplet should "
    "be strictly like below:\n"
    "<triplet>\n"
    "    <subj> </subj>\n"
    "    <obj> </obj>\n"
    "    <relation> </relation>\n"
    "</triplet>";

constexpr std::string_view kNoExtraSentences = "Don't add extra sentences.";

constexpr std::string_view kHeaderBegin = "<|begin_of_text|>";
constexpr std::string_view kHeaderSystem = "<|start_header_id|>system<|end_header_id|>\n\n";
constexpr std::string_view kHeaderUser = "<|start_header_id|>user<|end_header_id|>\n\n";
constexpr std::string_view kHeaderAssistant = "<|start_header_id|>assistant<|end_header_id|>\n\n";
constexpr std::string_view kEot = "<|eot_id|>";

constexpr std::array<std::string_view, 8> kSpecialTokens{
    "<|begin_of_text|>", "<|end_of_text|>", "<|eot_id|>", "<|start_header_id|>",
    "<|end_header_id|>", "</s>",            "<s>",        "<|im_end|>"};

constexpr std::string_view kTriplet = "<triplet>";
constexpr std::string_view kTripletClose = "</triplet>";
constexpr std::string_view kSubj = "<subj>";
constexpr std::string_view kObj = "<obj>";

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }
bool is_punct(char c) { return std::ispunct(static_cast<unsigned char>(c)) != 0; }

std::string_view trim(std::string_view s) {
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

// Special tokens are overwritten with spaces so diagnostic offsets stay
// aligned with the caller's text.
std::string blank_special_tokens(std::string_view raw) {
  std::string out(raw);
  for (auto token : kSpecialTokens) {
    for (std::size_t pos = out.find(token); pos != std::string::npos;
         pos = out.find(token, pos + token.size())) {
      std::fill_n(out.begin() + static_cast<std::ptrdiff_t>(pos), token.size(), ' ');
    }
  }
  return out;
}

std::vector<std::size_t> find_all(std::string_view text, std::string_view needle) {
  std::vector<std::size_t> out;
  for (std::size_t pos = text.find(needle); pos != std::string_view::npos;
       pos = text.find(needle, pos + needle.size())) {
    out.push_back(pos);
  }
  return out;
}

std::optional<Direction> read_direction(std::string_view text, ParseMode mode) {
  std::string_view token = trim(text);
  if (mode == ParseMode::Lenient) {
    std::size_t end = 0;
    while (end < token.size() && !is_space(token[end])) ++end;
    token = token.substr(0, end);
    if (token != "+" && token != "-") {
      while (!token.empty() && is_punct(token.front())) token.remove_prefix(1);
      while (!token.empty() && is_punct(token.back())) token.remove_suffix(1);
    }
  }
  try {
    return canonicalize_direction(token);
  } catch (const Error&) {
    return std::nullopt;
  }
}

class ReportBuilder {
 public:
  explicit ReportBuilder(ParseMode mode) { report_.mode = mode; }

  void note(std::size_t position, std::string message) {
    report_.diagnostics.push_back({position, std::move(message)});
  }

  // Validates phrases and appends the edge, or records why it was skipped.
  void add(std::size_t position, std::string_view source, std::string_view target,
           std::string_view direction_text) {
    RawEdge edge;
    try {
      edge.source = normalize_phrase(source);
    } catch (const Error&) {
      note(position, "empty source phrase");
      return;
    }
    try {
      edge.target = normalize_phrase(target);
    } catch (const Error&) {
      note(position, "empty target phrase");
      return;
    }
    auto direction = read_direction(direction_text, report_.mode);
    if (!direction) {
      note(position, "unrecognized direction '" + std::string(trim(direction_text)) + "'");
      return;
    }
    edge.direction = *direction;
    report_.edges.push_back(std::move(edge));
  }

  ParseReport finish() {
    if (report_.mode == ParseMode::Strict && !report_.diagnostics.empty()) {
      std::string message;
      for (const auto& d : report_.diagnostics) {
        if (!message.empty()) message += "; ";
        message += "at " + std::to_string(d.position) + ": " + d.message;
      }
      throw Error(ErrorCode::ParseFailure, message);
    }
    return std::move(report_);
  }

 private:
  ParseReport report_;
};

// Content of <tag>...</tag> inside block, or nullopt if the open tag is absent.
// A missing close tag runs to the next '<' (or block end) when tolerated.
struct TagContent {
  std::size_t offset;
  std::string_view text;
  bool closed;
};

std::optional<TagContent> tag_content(std::string_view block, std::string_view tag) {
  const std::string open = "<" + std::string(tag) + ">";
  const std::string close = "</" + std::string(tag) + ">";
  const std::size_t start = block.find(open);
  if (start == std::string_view::npos) return std::nullopt;
  const std::size_t body = start + open.size();
  const std::size_t end = block.find(close, body);
  if (end != std::string_view::npos) return TagContent{body, block.substr(body, end - body), true};
  const std::size_t next = block.find('<', body);
  const std::size_t stop = next == std::string_view::npos ? block.size() : next;
  return TagContent{body, block.substr(body, stop - body), false};
}

}  // namespace

std::string_view to_string(PromptKind kind) {
  switch (kind) {
    case PromptKind::InstructionTuned: return "instruction-tuned";
    case PromptKind::ZeroShotTagged: return "zero-shot";
    case PromptKind::ThreeShot: return "three-shot";
  }
  return "instruction-tuned";
}

std::string_view to_string(PromptDialect dialect) {
  return dialect == PromptDialect::BracketInst ? "bracket-inst" : "header-tagged";
}

PromptKind parse_prompt_kind(std::string_view raw) {
  const std::string s = fold_case(trim(raw));
  if (s == "instruction-tuned") return PromptKind::InstructionTuned;
  if (s == "zero-shot") return PromptKind::ZeroShotTagged;
  if (s == "three-shot") return PromptKind::ThreeShot;
  throw Error(ErrorCode::InvalidConfig, "unknown prompt kind '" + std::string(raw) + "'");
}

PromptDialect parse_prompt_dialect(std::string_view raw) {
  const std::string s = fold_case(trim(raw));
  if (s == "bracket-inst") return PromptDialect::BracketInst;
  if (s == "header-tagged") return PromptDialect::HeaderTagged;
  throw Error(ErrorCode::InvalidConfig, "unknown prompt dialect '" + std::string(raw) + "'");
}

void PromptTemplate::validate() const {
  const std::size_t want = kind == PromptKind::ThreeShot ? 3 : 0;
  if (exemplars.size() != want) {
    throw Error(ErrorCode::InvalidConfig, std::string(to_string(kind)) + " prompt needs " +
                                              std::to_string(want) + " exemplars, got " +
                                              std::to_string(exemplars.size()));
  }
}

std::string_view inline_instruction() { return kInlineInstruction; }
std::string_view tagged_instruction() { return kTaggedInstruction; }

std::string serialize_inline_triplets(const std::vector<CausalEdge>& edges) {
  std::string out;
  for (const auto& e : edges) {
    if (!out.empty()) out += "\n";
    out += "<triplet> ";
    out += e.source();
    out += " <subj> ";
    out += e.target();
    out += " <obj> ";
    out += e.direction() == Direction::Increase ? "positive" : "negative";
  }
  return out;
}

std::string build_prompt(const PromptTemplate& tmpl, const Passage& passage) {
  tmpl.validate();
  std::string p;
  const bool header = tmpl.dialect == PromptDialect::HeaderTagged;

  switch (tmpl.kind) {
    case PromptKind::InstructionTuned:
    case PromptKind::ZeroShotTagged: {
      const bool tagged = tmpl.kind == PromptKind::ZeroShotTagged;
      const std::string_view instruction = tagged ? kTaggedInstruction : kInlineInstruction;
      const std::string_view label =
          (tagged || header) ? "Input Sentence : " : "Input Sentence: ";
      if (header) {
        p.append(kHeaderBegin).append(kHeaderSystem).append(instruction).append(kEot);
        p.append(kHeaderUser).append(label).append(passage.text).append(kEot);
        p.append(kHeaderAssistant);
      } else {
        p.append("<s>[INST] ").append(instruction).append("\n\n");
        p.append(label).append(passage.text).append(" [/INST]");
      }
      return p;
    }
    case PromptKind::ThreeShot: {
      if (header) {
        p.append(kHeaderBegin).append(kHeaderSystem).append(kInlineInstruction).append("\n");
        p.append(kNoExtraSentences).append(kEot);
        for (const auto& ex : tmpl.exemplars) {
          p.append(kHeaderUser).append("Input Sentence : ").append(ex.passage_text).append(kEot);
          p.append(kHeaderAssistant).append("Causal Relation Triplets : ");
          p.append(serialize_inline_triplets(ex.edges)).append(kEot);
        }
        p.append(kHeaderUser).append("Input Sentence : ").append(passage.text).append(kEot);
        p.append(kHeaderAssistant).append("Causal Relation Triplets : ");
      } else {
        p.append("<s>[INST] ").append(kInlineInstruction).append("\n");
        p.append(kNoExtraSentences).append("\n");
        bool first = true;
        for (const auto& ex : tmpl.exemplars) {
          if (!first) p.append("[INST]\n");
          first = false;
          p.append("Input Sentence : ").append(ex.passage_text).append(" [/INST]\n");
          p.append("Causal Relation Triplets : ").append(serialize_inline_triplets(ex.edges));
          p.append("\n</s>\n");
        }
        p.append("[INST]\nInput Sentence : ").append(passage.text).append(" [/INST]\n");
        p.append("Causal Relation Triplets : ");
      }
      return p;
    }
  }
  return p;
}

std::string strip_special_tokens(std::string_view raw) {
  return std::string(trim(blank_special_tokens(raw)));
}

ParseReport parse_inline_triplets(std::string_view raw, ParseMode mode) {
  ReportBuilder out(mode);
  const std::string text = blank_special_tokens(raw);
  const std::string_view view(text);
  const auto markers = find_all(view, kTriplet);
  if (markers.empty()) {
    if (!trim(view).empty()) out.note(0, "no <triplet> marker found");
    return out.finish();
  }

  for (std::size_t k = 0; k < markers.size(); ++k) {
    const std::size_t begin = markers[k] + kTriplet.size();
    const std::size_t end = k + 1 < markers.size() ? markers[k + 1] : view.size();
    std::string_view segment = view.substr(begin, end - begin);
    if (const auto close = segment.find(kTripletClose); close != std::string_view::npos) {
      segment = segment.substr(0, close);
    }

    const std::size_t subj = segment.find(kSubj);
    if (subj == std::string_view::npos) {
      out.note(markers[k], "missing <subj>");
      continue;
    }
    const std::size_t obj = segment.find(kObj, subj + kSubj.size());
    if (obj == std::string_view::npos) {
      out.note(markers[k], "missing <obj>");
      continue;
    }
    if (segment.find(kSubj, subj + kSubj.size()) != std::string_view::npos ||
        segment.find(kObj, obj + kObj.size()) != std::string_view::npos) {
      out.note(markers[k], "repeated <subj>/<obj> marker");
      continue;
    }
    out.add(markers[k], segment.substr(0, subj),
            segment.substr(subj + kSubj.size(), obj - subj - kSubj.size()),
            segment.substr(obj + kObj.size()));
  }
  return out.finish();
}

ParseReport parse_tagged_triplets(std::string_view raw, ParseMode mode) {
  ReportBuilder out(mode);
  const std::string text = blank_special_tokens(raw);
  const std::string_view view(text);
  const auto markers = find_all(view, kTriplet);
  if (markers.empty()) {
    if (!trim(view).empty()) out.note(0, "no <triplet> block found");
    return out.finish();
  }

  for (std::size_t k = 0; k < markers.size(); ++k) {
    const std::size_t begin = markers[k] + kTriplet.size();
    const std::size_t limit = k + 1 < markers.size() ? markers[k + 1] : view.size();
    std::string_view block = view.substr(begin, limit - begin);
    const std::size_t close = block.find(kTripletClose);
    if (close != std::string_view::npos) {
      block = block.substr(0, close);
    } else if (mode == ParseMode::Strict) {
      out.note(markers[k], "missing </triplet>");
      continue;
    }

    std::array<std::optional<TagContent>, 3> fields{
        tag_content(block, "subj"), tag_content(block, "obj"), tag_content(block, "relation")};
    constexpr std::array<std::string_view, 3> names{"subj", "obj", "relation"};
    bool ok = true;
    for (std::size_t f = 0; f < fields.size() && ok; ++f) {
      if (!fields[f]) {
        out.note(markers[k], "missing <" + std::string(names[f]) + ">");
        ok = false;
      } else if (!fields[f]->closed && mode == ParseMode::Strict) {
        out.note(begin + fields[f]->offset, "missing </" + std::string(names[f]) + ">");
        ok = false;
      }
    }
    if (!ok) continue;
    out.add(markers[k], fields[0]->text, fields[1]->text, fields[2]->text);
  }
  return out.finish();
}

CompletionClient::CompletionClient(CompletionEndpoint endpoint) : endpoint_(std::move(endpoint)) {
  if (endpoint_.base_url.empty()) throw Error(ErrorCode::InvalidConfig, "endpoint base URL is empty");
  if (endpoint_.max_in_flight == 0) endpoint_.max_in_flight = 1;
}

std::string CompletionClient::complete(const std::string& prompt) const {
  json body = {{"model", endpoint_.model},
               {"temperature", endpoint_.temperature},
               {"max_tokens", endpoint_.max_tokens}};
  if (endpoint_.chat_messages) {
    body["messages"] = json::array({{{"role", "user"}, {"content", prompt}}});
  } else {
    body["prompt"] = prompt;
  }

  {
    std::unique_lock lock(mutex_);
    slot_free_.wait(lock, [this] { return in_flight_ < endpoint_.max_in_flight; });
    ++in_flight_;
  }
  struct Release {
    const CompletionClient* self;
    ~Release() {
      {
        std::lock_guard lock(self->mutex_);
        --self->in_flight_;
      }
      self->slot_free_.notify_one();
    }
  } release{this};

  const std::string reply =
      http_post_json(endpoint_.base_url, endpoint_.path, body.dump(), endpoint_.timeout);
  try {
    const json parsed = json::parse(reply);
    const json& choice = parsed.at("choices").at(0);
    if (choice.contains("text") && choice["text"].is_string()) return choice["text"];
    return choice.at("message").at("content").get<std::string>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::EndpointError, std::string("malformed completion reply: ") + e.what());
  }
}

ExtractionResult extract_annotation(const CompletionClient& client, const PromptTemplate& tmpl,
                                    const Passage& passage, ParseMode mode) {
  const std::string prompt = build_prompt(tmpl, passage);
  ExtractionResult result;
  result.raw_reply = client.complete(prompt);

  ParseReport report = tmpl.kind == PromptKind::ZeroShotTagged
                           ? parse_tagged_triplets(result.raw_reply, mode)
                           : parse_inline_triplets(result.raw_reply, mode);
  if (trim(result.raw_reply).empty()) report.diagnostics.push_back({0, "empty completion"});

  const Origin origin = tmpl.kind == PromptKind::InstructionTuned ? Origin::ModelFineTuned
                                                                   : Origin::ModelFewShot;
  const std::string annotator =
      client.endpoint().model.empty() ? std::string("model") : client.endpoint().model;
  BuiltAnnotation built =
      build_annotation_unchecked(passage.passage_id, annotator, report.edges, origin);
  result.annotation = std::move(built.annotation);
  result.dropped_duplicates = built.dropped_duplicates;
  result.diagnostics = std::move(report.diagnostics);
  return result;
}

}  // namespace fcm
