#include <atomic>
#include <random>

#include <gtest/gtest.h>
#include <json.hpp>

#include "fcm/error.hpp"
#include "fcm/extraction.hpp"
#include "support/stub_server.hpp"

namespace fcm {
namespace {

const Passage kPassage{"p1", "Rising oil prices raised the price of local rice.", "test",
                       Split::Test};

Exemplar exemplar(std::string text, std::string source, std::string target) {
  return {std::move(text), {CausalEdge(source, target, Direction::Increase)}};
}

PromptTemplate three_shot(PromptDialect dialect) {
  PromptTemplate t;
  t.kind = PromptKind::ThreeShot;
  t.dialect = dialect;
  t.exemplars = {exemplar("EX-ONE drought cut yields.", "drought", "yields"),
                 exemplar("EX-TWO noise scares porpoises.", "noise", "porpoises"),
                 exemplar("EX-THREE reefs shelter fish.", "reefs", "fish")};
  return t;
}

std::size_t count(const std::string& haystack, std::string_view needle) {
  std::size_t n = 0;
  for (auto pos = haystack.find(needle); pos != std::string::npos;
       pos = haystack.find(needle, pos + needle.size())) {
    ++n;
  }
  return n;
}

TEST(BuildPrompt, InstructionTunedBracket) {
  const std::string p = build_prompt({}, kPassage);
  EXPECT_EQ(p.rfind("<s>[INST] ", 0), 0u);
  EXPECT_NE(p.find(inline_instruction()), std::string::npos);
  EXPECT_NE(p.find("Input Sentence: " + kPassage.text), std::string::npos);
  EXPECT_LT(p.find(inline_instruction()), p.find(kPassage.text));
  EXPECT_EQ(p, build_prompt({}, kPassage));
}

TEST(BuildPrompt, HeaderDialectEndsAtTheAssistantTurn) {
  PromptTemplate t;
  t.dialect = PromptDialect::HeaderTagged;
  const std::string p = build_prompt(t, kPassage);
  EXPECT_EQ(p.rfind("<|begin_of_text|>", 0), 0u);
  EXPECT_NE(p.find(kPassage.text), std::string::npos);
  const std::string tail = "<|start_header_id|>assistant<|end_header_id|>\n\n";
  EXPECT_EQ(p.substr(p.size() - tail.size()), tail);
}

TEST(BuildPrompt, ZeroShotUsesTheTaggedInstruction) {
  PromptTemplate t;
  t.kind = PromptKind::ZeroShotTagged;
  const std::string p = build_prompt(t, kPassage);
  EXPECT_NE(p.find(tagged_instruction()), std::string::npos);
  EXPECT_EQ(p.find(inline_instruction()), std::string::npos);
}

TEST(BuildPrompt, ThreeShotPlacesExemplarsBeforeThePassage) {
  for (auto dialect : {PromptDialect::BracketInst, PromptDialect::HeaderTagged}) {
    const std::string p = build_prompt(three_shot(dialect), kPassage);
    EXPECT_EQ(count(p, "Input Sentence : "), 4u);
    EXPECT_EQ(count(p, "Causal Relation Triplets : <triplet>"), 3u);
    const auto passage_at = p.find(kPassage.text);
    for (const char* tag : {"EX-ONE", "EX-TWO", "EX-THREE"}) {
      EXPECT_LT(p.find(tag), passage_at) << tag;
    }
    EXPECT_NE(p.find("<triplet> noise <subj> porpoises <obj> positive"), std::string::npos);
    EXPECT_EQ(p, build_prompt(three_shot(dialect), kPassage));
  }
}

TEST(BuildPrompt, ExemplarCountMustMatchTheKind) {
  PromptTemplate t = three_shot(PromptDialect::BracketInst);
  t.exemplars.pop_back();
  EXPECT_THROW(build_prompt(t, kPassage), Error);
  PromptTemplate z;
  z.exemplars.push_back(exemplar("x", "a", "b"));
  EXPECT_THROW(build_prompt(z, kPassage), Error);
}

TEST(PromptNames, RoundTrip) {
  for (auto k : {PromptKind::InstructionTuned, PromptKind::ZeroShotTagged, PromptKind::ThreeShot}) {
    EXPECT_EQ(parse_prompt_kind(to_string(k)), k);
  }
  for (auto d : {PromptDialect::BracketInst, PromptDialect::HeaderTagged}) {
    EXPECT_EQ(parse_prompt_dialect(to_string(d)), d);
  }
  EXPECT_THROW(parse_prompt_dialect("chatml"), Error);
}

TEST(ParseInline, SourceFollowsTheTripletMarker) {
  const auto r = parse_inline_triplets("<triplet> high cost of oil <subj> price of local rice <obj> positive");
  ASSERT_EQ(r.edges.size(), 1u);
  EXPECT_EQ(r.edges[0].source, "high cost of oil");
  EXPECT_EQ(r.edges[0].target, "price of local rice");
  EXPECT_EQ(r.edges[0].direction, Direction::Increase);
  EXPECT_TRUE(r.diagnostics.empty());
}

TEST(ParseInline, EmptyInputIsEmpty) {
  const auto r = parse_inline_triplets("");
  EXPECT_TRUE(r.edges.empty());
  EXPECT_TRUE(r.diagnostics.empty());
}

TEST(ParseInline, MissingObjIsDiagnosed) {
  const auto r = parse_inline_triplets("<triplet> a <subj> b");
  EXPECT_TRUE(r.edges.empty());
  ASSERT_EQ(r.diagnostics.size(), 1u);
  EXPECT_EQ(r.diagnostics[0].position, 0u);
  EXPECT_THROW(parse_inline_triplets("<triplet> a <subj> b", ParseMode::Strict), Error);
}

TEST(ParseInline, KeepsGoodSegmentsAroundBadOnes) {
  const auto r = parse_inline_triplets(
      "<triplet> islamist violence <subj> cattle herding <obj> negative "
      "<triplet> x <subj> y <obj> sideways <triplet> drought <subj> yields <obj> Negative.</s>");
  ASSERT_EQ(r.edges.size(), 2u);
  EXPECT_EQ(r.edges[0].source, "islamist violence");
  EXPECT_EQ(r.edges[0].direction, Direction::Decrease);
  EXPECT_EQ(r.edges[1].source, "drought");
  EXPECT_EQ(r.diagnostics.size(), 1u);
}

TEST(ParseInline, StrictRejectsTrailingPunctuation) {
  EXPECT_THROW(parse_inline_triplets("<triplet> a <subj> b <obj> positive.", ParseMode::Strict),
               Error);
  EXPECT_EQ(parse_inline_triplets("<triplet> a <subj> b <obj> positive", ParseMode::Strict)
                .edges.size(),
            1u);
}

TEST(ParseTagged, ReadsRelationBlocks) {
  const auto r = parse_tagged_triplets(
      "<triplet>\n  <subj>pastoralists</subj>\n  <obj>low levels of rainfall</obj>\n"
      "  <relation>Negative</relation>\n</triplet>");
  ASSERT_EQ(r.edges.size(), 1u);
  EXPECT_EQ(r.edges[0].source, "pastoralists");
  EXPECT_EQ(r.edges[0].target, "low levels of rainfall");
  EXPECT_EQ(r.edges[0].direction, Direction::Decrease);
}

TEST(ParseTagged, MissingRelationIsSkipped) {
  const auto r = parse_tagged_triplets("<triplet><subj>a</subj><obj>b</obj></triplet>");
  EXPECT_TRUE(r.edges.empty());
  EXPECT_EQ(r.diagnostics.size(), 1u);
}

TEST(ParseTagged, KeepsDocumentOrder) {
  const auto r = parse_tagged_triplets(
      "<triplet><subj>a</subj><obj>b</obj><relation>positive</relation></triplet>\n"
      "<triplet><subj>c</subj><obj>d</obj><relation>negative</relation></triplet>");
  ASSERT_EQ(r.edges.size(), 2u);
  EXPECT_EQ(r.edges[0].source, "a");
  EXPECT_EQ(r.edges[1].source, "c");
}

TEST(ParseTagged, LenientToleratesMissingCloseTags) {
  const std::string raw = "<triplet><subj>a<obj>b</obj><relation>positive</relation>";
  EXPECT_EQ(parse_tagged_triplets(raw).edges.size(), 1u);
  EXPECT_THROW(parse_tagged_triplets(raw, ParseMode::Strict), Error);
}

TEST(StripSpecialTokens, RemovesTurnMarkers) {
  EXPECT_EQ(strip_special_tokens("<s> hello </s><|eot_id|>"), "hello");
}

std::vector<CausalEdge> random_edge_list(std::mt19937_64& rng) {
  static const std::vector<std::string> words = {"wind",  "farm", "noise", "Blue", "mussels",
                                                 "reef",  "fish", "rice",  "oil",  "a-b",
                                                 "co2's", "(x)"};
  auto phrase = [&] {
    std::string p;
    for (std::size_t i = 0, n = 1 + rng() % 4; i < n; ++i) {
      if (!p.empty()) p += ' ';
      p += words[rng() % words.size()];
    }
    return p;
  };
  std::vector<CausalEdge> edges;
  for (std::size_t i = 0, n = rng() % 6; i < n; ++i) {
    edges.emplace_back(phrase(), phrase(), rng() % 2 ? Direction::Increase : Direction::Decrease);
  }
  return edges;
}

TEST(InlineGrammar, SerializeThenParseIsIdentity) {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 1000; ++trial) {
    const auto edges = random_edge_list(rng);
    const auto r = parse_inline_triplets(serialize_inline_triplets(edges), ParseMode::Strict);
    ASSERT_EQ(r.edges.size(), edges.size());
    for (std::size_t i = 0; i < edges.size(); ++i) {
      EXPECT_EQ(CausalEdge(r.edges[i].source, r.edges[i].target, r.edges[i].direction), edges[i]);
    }
  }
}

TEST(Parsers, SurviveFuzzInput) {
  std::mt19937_64 rng(23);
  const std::vector<std::string> pieces = {"<triplet>", "<subj>",   "<obj>",    "</subj>",
                                           "</obj>",    "<relation>", "</relation>",
                                           "</triplet>", "positive", "negative", " ",
                                           "\n",         "x",        "<",        ">",
                                           "</s>",       "\xff",     "+"};
  for (int trial = 0; trial < 2000; ++trial) {
    std::string raw;
    for (std::size_t i = 0, n = rng() % 30; i < n; ++i) raw += pieces[rng() % pieces.size()];
    for (auto mode : {ParseMode::Lenient, ParseMode::Strict}) {
      try {
        const auto a = parse_inline_triplets(raw, mode);
        const auto b = parse_tagged_triplets(raw, mode);
        for (const auto& e : a.edges) EXPECT_FALSE(e.source.empty());
        for (const auto& e : b.edges) EXPECT_FALSE(e.target.empty());
      } catch (const Error& e) {
        EXPECT_EQ(mode, ParseMode::Strict);
        EXPECT_EQ(e.code(), ErrorCode::ParseFailure);
      }
    }
  }
}

class CompletionStub : public ::testing::Test {
 protected:
  void SetUp() override {
    stub_.server().Post("/v1/completions", [this](const httplib::Request& req,
                                                  httplib::Response& res) {
      last_body_ = nlohmann::json::parse(req.body);
      nlohmann::json reply = {{"choices", {{{"text", reply_}}}}};
      res.set_content(reply.dump(), "application/json");
    });
    stub_.server().Post("/v1/chat/completions", [this](const httplib::Request& req,
                                                       httplib::Response& res) {
      last_body_ = nlohmann::json::parse(req.body);
      nlohmann::json reply = {
          {"choices", {{{"message", {{"role", "assistant"}, {"content", reply_}}}}}}};
      res.set_content(reply.dump(), "application/json");
    });
    stub_.start();
  }

  CompletionEndpoint endpoint() const {
    CompletionEndpoint e;
    e.base_url = stub_.url();
    e.model = "stub-model";
    e.timeout = std::chrono::milliseconds(2000);
    return e;
  }

  testing::StubServer stub_;
  std::string reply_ = "<triplet> oil prices <subj> rice prices <obj> positive</s>";
  nlohmann::json last_body_;
};

TEST_F(CompletionStub, ExtractsTheReturnedTriplet) {
  const CompletionClient client(endpoint());
  const auto r = extract_annotation(client, {}, kPassage);
  ASSERT_EQ(r.annotation.edges.size(), 1u);
  EXPECT_EQ(r.annotation.edges[0], CausalEdge("oil prices", "rice prices", Direction::Increase));
  EXPECT_EQ(r.annotation.passage_id, "p1");
  EXPECT_EQ(r.annotation.annotator_id, "stub-model");
  EXPECT_EQ(r.annotation.origin, Origin::ModelFineTuned);
  EXPECT_TRUE(r.diagnostics.empty());
  EXPECT_EQ(last_body_.at("prompt"), build_prompt({}, kPassage));
  EXPECT_EQ(last_body_.at("temperature"), 0.0);
}

TEST_F(CompletionStub, ChatReplies) {
  auto e = endpoint();
  e.path = "/v1/chat/completions";
  e.chat_messages = true;
  const CompletionClient client(e);
  EXPECT_EQ(extract_annotation(client, {}, kPassage).annotation.edges.size(), 1u);
  EXPECT_EQ(last_body_.at("messages").at(0).at("role"), "user");
}

TEST_F(CompletionStub, EmptyReplyGivesNoEdgesAndADiagnostic) {
  reply_ = "";
  const CompletionClient client(endpoint());
  const auto r = extract_annotation(client, {}, kPassage);
  EXPECT_TRUE(r.annotation.edges.empty());
  EXPECT_FALSE(r.diagnostics.empty());
}

TEST_F(CompletionStub, ZeroShotParsesTheTaggedGrammar) {
  reply_ = "<triplet><subj>oil</subj><obj>rice</obj><relation>Negative</relation></triplet>";
  PromptTemplate t;
  t.kind = PromptKind::ZeroShotTagged;
  const CompletionClient client(endpoint());
  const auto r = extract_annotation(client, t, kPassage);
  ASSERT_EQ(r.annotation.edges.size(), 1u);
  EXPECT_EQ(r.annotation.edges[0].direction(), Direction::Decrease);
  EXPECT_EQ(r.annotation.origin, Origin::ModelFewShot);
}

TEST(CompletionClient, UnreachableEndpoint) {
  CompletionEndpoint e;
  e.base_url = testing::unreachable_url();
  e.timeout = std::chrono::milliseconds(500);
  const CompletionClient client(e);
  try {
    extract_annotation(client, {}, kPassage);
    FAIL();
  } catch (const Error& err) {
    EXPECT_EQ(err.code(), ErrorCode::EndpointError);
  }
}

}  // namespace
}  // namespace fcm
