#include <fstream>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "fcm/error.hpp"
#include "fcm/storage.hpp"
#include "support/synthetic.hpp"

namespace fcm {
namespace {

namespace fs = std::filesystem;

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void spit(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

ErrorCode code_of(const std::function<void()>& body) {
  try {
    body();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorCode::ValidationError;
}

const char* kTwoPassages =
    R"({"passage_id":"p1","text":"Wind farms shelter mussels.","split":"test","annotations":[)"
    R"({"annotator_id":"a1","edges":[{"source":"wind farms","target":"mussels","direction":"positive"}]}]})"
    "\n\n"
    R"({"passage_id":"p2","text":"Noise scares porpoises.","provenance":"report"})"
    "\n";

TEST(ParseDataset, LoadsPassagesAndNestedAnnotations) {
  std::istringstream in(kTwoPassages);
  const Dataset d = parse_dataset(in);
  ASSERT_EQ(d.passages().size(), 2u);
  EXPECT_EQ(d.passages()[0].split, Split::Test);
  EXPECT_EQ(d.passages()[1].provenance, "report");
  ASSERT_EQ(d.annotations().size(), 1u);
  EXPECT_EQ(d.annotations()[0].edges[0].direction(), Direction::Increase);
}

TEST(ParseDataset, EmptyInputIsAnEmptyDataset) {
  std::istringstream in("");
  EXPECT_TRUE(parse_dataset(in).passages().empty());
}

TEST(ParseDataset, ErrorsCarryTheLineNumber) {
  std::istringstream in(std::string(kTwoPassages) +
                        R"({"passage_id":"p3","text":"x","annotations":[{"annotator_id":"a",)"
                        R"("edges":[{"source":"a","target":"b","direction":"sideways"}]}]})"
                        "\n");
  try {
    parse_dataset(in);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ValidationError);
    EXPECT_NE(std::string(e.what()).find("line 4:"), std::string::npos) << e.what();
    EXPECT_NE(std::string(e.what()).find("sideways"), std::string::npos) << e.what();
  }
}

TEST(ParseDataset, RejectsMalformedRecords) {
  for (const char* text : {"not json\n", "[1,2]\n", R"({"text":"no id"})"
                                                    "\n",
                           R"({"passage_id":"p","text":"t"})"
                           "\n"
                           R"({"passage_id":"p","text":"t"})"
                           "\n"}) {
    std::istringstream in(text);
    EXPECT_EQ(code_of([&] { parse_dataset(in); }), ErrorCode::ValidationError) << text;
  }
}

TEST(ParseDataset, ForeignSchemaVersion) {
  std::istringstream in(R"({"schema_version":2,"passage_id":"p","text":"t"})"
                        "\n");
  EXPECT_EQ(code_of([&] { parse_dataset(in); }), ErrorCode::SchemaMismatch);
}

TEST(ParseAnnotations, ChecksPassages) {
  std::istringstream data(kTwoPassages);
  Dataset d = parse_dataset(data);
  std::istringstream ok(
      R"({"passage_id":"p2","annotator_id":"m","origin":"model_fine_tuned","edges":[]})"
      "\n");
  parse_annotations(ok, d);
  EXPECT_NE(d.find_annotation("p2", "m"), nullptr);
  std::istringstream bad(R"({"passage_id":"p9","annotator_id":"m","edges":[]})"
                         "\n");
  try {
    parse_annotations(bad, d);
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("line 1:"), std::string::npos);
  }
}

TEST(ParseAnnotationRecords, AcceptsBothShapes) {
  std::istringstream in(std::string(kTwoPassages) +
                        R"({"passage_id":"p9","annotator_id":"m","edges":[]})"
                        "\n");
  const auto records = parse_annotation_records(in);
  ASSERT_EQ(records.size(), 2u);
  EXPECT_EQ(records[1].passage_id, "p9");
}

Dataset random_dataset(std::mt19937_64& rng) {
  const std::vector<std::string> words = {"wind", "farm", "noise", "mussels", "\"quoted\"",
                                          "comma,word", "ünïcode", "reef"};
  auto phrase = [&] {
    std::string p = words[rng() % words.size()];
    if (rng() % 2) p += " " + words[rng() % words.size()];
    return p;
  };
  Dataset d;
  for (std::size_t i = 0, n = 1 + rng() % 4; i < n; ++i) {
    const std::string pid = "p" + std::to_string(i);
    d.add_passage({pid, "text " + phrase(), rng() % 2 ? "src" : "", static_cast<Split>(rng() % 4)});
    for (std::size_t a = 0, m = rng() % 4; a < m; ++a) {
      std::vector<RawEdge> edges;
      for (std::size_t e = 0, k = rng() % 4; e < k; ++e) {
        RawEdge r{phrase(), phrase(), rng() % 2 ? Direction::Increase : Direction::Decrease, {}};
        if (rng() % 3 == 0) r.weight = static_cast<double>(rng() % 1000) / 7.0;
        edges.push_back(r);
      }
      d.add_annotation(build_annotation(d, pid, "ann" + std::to_string(a), edges,
                                        static_cast<Origin>(rng() % 3))
                           .annotation);
    }
  }
  return d;
}

TEST(DatasetFile, SaveThenLoadRoundTrips) {
  const auto dir = testing::scratch_dir("roundtrip");
  std::mt19937_64 rng(41);
  for (int trial = 0; trial < 100; ++trial) {
    const Dataset d = random_dataset(rng);
    save_dataset(d, dir / "d.jsonl");
    EXPECT_EQ(load_dataset(dir / "d.jsonl"), d);
  }
  fs::remove_all(dir);
}

TEST(DatasetFile, MissingFileIsAStorageError) {
  EXPECT_EQ(code_of([] { load_dataset("/nonexistent/dataset.jsonl"); }), ErrorCode::StorageError);
}

Judgment judgment(std::string id, std::string rater = "r1") {
  return {std::move(id), "p1", "A", "B", Outcome::AWins, std::move(rater), 1700000000000};
}

TEST(JudgmentLog, AppendIsIdempotent) {
  const auto dir = testing::scratch_dir("log");
  JudgmentLog log(dir / "j.jsonl");
  EXPECT_EQ(log.append(judgment("1")), AppendStatus::New);
  const std::string before = slurp(dir / "j.jsonl");
  EXPECT_EQ(log.append(judgment("1")), AppendStatus::Duplicate);
  EXPECT_EQ(slurp(dir / "j.jsonl"), before);
  EXPECT_EQ(log.size(), 1u);
  EXPECT_TRUE(log.contains("1"));
  fs::remove_all(dir);
}

TEST(JudgmentLog, RejectsSelfRating) {
  const auto dir = testing::scratch_dir("self");
  JudgmentLog log(dir / "j.jsonl");
  EXPECT_EQ(code_of([&] { log.append(judgment("1", "A")); }), ErrorCode::SelfRating);
  EXPECT_EQ(log.size(), 0u);
  EXPECT_FALSE(fs::exists(dir / "j.jsonl"));
  fs::remove_all(dir);
}

TEST(JudgmentLog, MissingFileIsEmpty) {
  EXPECT_TRUE(load_judgments("/nonexistent/judgments.jsonl").empty());
}

TEST(JudgmentLog, TornTailIsDroppedAndRepaired) {
  const auto dir = testing::scratch_dir("torn");
  {
    JudgmentLog log(dir / "j.jsonl");
    log.append(judgment("1"));
    log.append(judgment("2"));
  }
  const std::string intact = slurp(dir / "j.jsonl");
  spit(dir / "j.jsonl", intact + R"({"judgment_id":"3","passa)");
  EXPECT_EQ(load_judgments(dir / "j.jsonl").size(), 2u);
  JudgmentLog reopened(dir / "j.jsonl");
  EXPECT_EQ(reopened.size(), 2u);
  EXPECT_EQ(slurp(dir / "j.jsonl"), intact);
  reopened.append(judgment("3"));
  EXPECT_EQ(load_judgments(dir / "j.jsonl").size(), 3u);
  fs::remove_all(dir);
}

TEST(JudgmentLog, ReplayKeepsAppendOrderAndLeaderboards) {
  const auto dir = testing::scratch_dir("replay");
  const auto corpus = testing::directional_corpus(2);
  std::vector<Judgment> appended;
  {
    JudgmentLog log(dir / "j.jsonl");
    // Append in reverse id order to show replay follows the file, not the ids.
    for (auto it = corpus.judgments.rbegin(); it != corpus.judgments.rend(); ++it) {
      log.append(*it);
      appended.push_back(*it);
    }
  }
  const auto reloaded = load_judgments(dir / "j.jsonl");
  EXPECT_EQ(reloaded, appended);
  EXPECT_EQ(JudgmentLog(dir / "j.jsonl").snapshot(), appended);
  EXPECT_EQ(run_all_tournaments(reloaded, {}, &corpus.dataset),
            run_all_tournaments(corpus.judgments, {}, &corpus.dataset));
  fs::remove_all(dir);
}

TEST(JudgmentLog, CorruptCompleteLineIsAnError) {
  const auto dir = testing::scratch_dir("corrupt");
  spit(dir / "j.jsonl", "{\"judgment_id\": 5}\n");
  try {
    load_judgments(dir / "j.jsonl");
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("line 1:"), std::string::npos);
  }
  fs::remove_all(dir);
}

TEST(Codecs, JudgmentAndMeasureRoundTrip) {
  const Judgment j{"j1", "p1", "A", "B", Outcome::Tie, "r", 1712345678901};
  EXPECT_EQ(judgment_from_json(judgment_to_json(j)), j);

  EdgeMetricConfig c;
  c.measure.kind = MeasureKind::External;
  c.measure.external = EndpointConfig{"http://127.0.0.1:9", std::chrono::milliseconds(1234)};
  c.threshold = -0.1532;
  c.allow_partial_positives = false;
  c.measure.meteor.stemming = false;
  c.measure.rouge.variant = RougeVariant::Recall;
  const auto back = measure_from_json(measure_to_json(c));
  EXPECT_EQ(back.measure.kind, MeasureKind::External);
  EXPECT_EQ(back.measure.external->base_url, "http://127.0.0.1:9");
  EXPECT_EQ(back.measure.external->timeout.count(), 1234);
  EXPECT_EQ(back.threshold, -0.1532);
  EXPECT_FALSE(back.allow_partial_positives);
  EXPECT_FALSE(back.measure.meteor.stemming);
  EXPECT_EQ(back.measure.rouge.variant, RougeVariant::Recall);
}

TEST(Workspace, CreateOpenRoundTrip) {
  const auto dir = testing::scratch_dir("ws");
  WorkspaceConfig c;
  c.raters = {{"r1", "One"}, {"r2", "Two"}};
  c.scheduler.seed = 77;
  c.measure.measure.kind = MeasureKind::Bleu;
  c.measure.threshold = 0.352;
  Workspace::create(dir / "w", c);
  const auto ws = Workspace::open(dir / "w");
  EXPECT_EQ(ws.config().raters, c.raters);
  EXPECT_EQ(ws.config().scheduler.seed, 77u);
  EXPECT_EQ(ws.config().measure.measure.kind, MeasureKind::Bleu);
  EXPECT_EQ(ws.config().guidelines.size(), 8u);
  EXPECT_TRUE(ws.load_judgments().empty());
  EXPECT_EQ(code_of([&] { Workspace::open(dir / "missing"); }), ErrorCode::StorageError);
  fs::remove_all(dir);
}

TEST(Workspace, MergesTheAnnotationsFile) {
  const auto dir = testing::scratch_dir("merge");
  const auto ws = testing::write_workspace(dir, testing::directional_corpus(1));
  save_annotations({{"dir0", "model", {CausalEdge("a", "b", Direction::Increase)},
                     Origin::ModelFineTuned}},
                   ws.annotations_path());
  const Dataset d = ws.load_dataset();
  ASSERT_NE(d.find_annotation("dir0", "model"), nullptr);
  EXPECT_EQ(d.find_annotation("dir0", "model")->origin, Origin::ModelFineTuned);
  EXPECT_EQ(ws.load_judgments().size(), 6u);
  fs::remove_all(dir);
}

TEST(WorkspaceConfig, RejectsBadValues) {
  WorkspaceConfig c;
  c.scheduler.overlap_fraction = 1.5;
  EXPECT_THROW(c.validate(), Error);
  auto j = workspace_config_to_json(WorkspaceConfig{});
  j["schema_version"] = 99;
  EXPECT_EQ(code_of([&] { workspace_config_from_json(j); }), ErrorCode::SchemaMismatch);
}

TEST(FormatCell, FixedSixDecimals) {
  EXPECT_EQ(format_cell(0.5), "0.500000");
  EXPECT_EQ(format_cell(-0.0000001), "0.000000");
  EXPECT_EQ(format_cell(-0.25), "-0.250000");
  EXPECT_EQ(format_cell(std::int64_t{12}), "12");
  EXPECT_EQ(format_cell(std::monostate{}), "");
  EXPECT_EQ(format_cell(std::string("a,\"b\"")), "\"a,\"\"b\"\"\"");
}

TEST(Sha256, KnownDigest) {
  EXPECT_EQ(sha256_hex("abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

std::vector<ResultTable> sample_tables() {
  CorrelationSummary s = correlation_summary({{"p1", 0.2}, {"p2", 0.4}, {"p3", 0.9}});
  return {summary_table("summary", {{"bleu-e", s}}), per_passage_table("per_passage", {{"bleu-e", s}})};
}

TEST(ExportResults, WritesTablesAndManifest) {
  const auto dir = testing::scratch_dir("export");
  const nlohmann::json config = {{"measure", "bleu"}};
  const auto m = export_results({sample_tables()[0]}, dir / "out", config, 7);
  ASSERT_EQ(m.files.size(), 1u);
  EXPECT_EQ(m.files[0].name, "summary.csv");
  EXPECT_EQ(m.files[0].rows, 1u);
  EXPECT_EQ(m.files[0].sha256, sha256_hex(slurp(dir / "out" / "summary.csv")));
  const auto manifest = nlohmann::json::parse(slurp(dir / "out" / "manifest.json"));
  EXPECT_EQ(manifest.at("seed"), 7);
  EXPECT_EQ(manifest.at("config_hash"), sha256_hex(config.dump()));
  EXPECT_EQ(slurp(dir / "out" / "summary.csv").substr(0, 20), "label,passages,mean,");
  fs::remove_all(dir);
}

TEST(ExportResults, ReExportIsByteIdentical) {
  const auto dir = testing::scratch_dir("export2");
  export_results(sample_tables(), dir / "a", {{"k", 1}}, 3);
  export_results(sample_tables(), dir / "b", {{"k", 1}}, 3);
  for (const char* f : {"summary.csv", "per_passage.csv", "manifest.json"}) {
    EXPECT_EQ(slurp(dir / "a" / f), slurp(dir / "b" / f)) << f;
  }
  fs::remove_all(dir);
}

TEST(ExportResults, UnwritableDirectory) {
  const auto dir = testing::scratch_dir("export3");
  spit(dir / "plain-file", "x");
  EXPECT_EQ(code_of([&] { export_results(sample_tables(), dir / "plain-file" / "out", {}, 1); }),
            ErrorCode::StorageError);
  fs::remove_all(dir);
}

}  // namespace
}  // namespace fcm
