#include "cli.hpp"

#include <algorithm>
#include <csignal>
#include <fstream>
#include <future>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <httplib.h>

#include "fcm/analysis.hpp"
#include "fcm/edge_metrics.hpp"
#include "fcm/elo.hpp"
#include "fcm/extraction.hpp"
#include "fcm/service.hpp"
#include "fcm/storage.hpp"

namespace fcm::cli {

namespace {

namespace fs = std::filesystem;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Globals {
  std::string workspace;
  std::uint64_t seed = 0;
  CLI::Option* seed_opt = nullptr;
  std::string format = "table";
};

struct MeasureFlags {
  std::string measure;
  double threshold = 0.0;
  CLI::Option* threshold_opt = nullptr;
  bool no_partial = false;
  std::string scorer_url;
  bool no_stemming = false;

  void attach(CLI::App* app) {
    app->add_option("--measure", measure, "exact | bleu | rouge1 | meteor | external")
        ->check(CLI::IsMember({"exact", "bleu", "rouge1", "meteor", "external"}));
    threshold_opt = app->add_option("--threshold", threshold,
                                    "similarity threshold T (default: tuned value per measure)");
    app->add_flag("--no-partial-positives", no_partial, "count direction mismatches as FP");
    app->add_option("--scorer-url", scorer_url, "base URL of the external scorer");
    app->add_flag("--no-stemming", no_stemming, "disable the METEOR stem stage");
  }

  // Flags override `fallback`; a new --measure starts from that measure's defaults.
  EdgeMetricConfig resolve(const EdgeMetricConfig& fallback) const {
    EdgeMetricConfig c = fallback;
    if (!measure.empty()) {
      c = EdgeMetricConfig{};
      c.measure.kind = parse_measure_kind(measure);
      c.threshold = default_threshold(c.measure.kind);
      c.measure.external = fallback.measure.external;
    }
    if (threshold_opt->count() > 0) c.threshold = threshold;
    if (no_partial) c.allow_partial_positives = false;
    if (!scorer_url.empty()) c.measure.external = EndpointConfig{scorer_url};
    if (no_stemming) c.measure.meteor.stemming = false;
    c.validate();
    return c;
  }
};

std::string label_of(const EdgeMetricConfig& c) {
  std::ostringstream s;
  s << to_string(c.measure.kind) << "@" << format_cell(c.threshold)
    << (c.allow_partial_positives ? "" : "/nopp");
  return s.str();
}

void emit(std::ostream& out, const ResultTable& table, const std::string& format) {
  if (format == "csv") {
    write_csv(out, table);
    return;
  }
  std::vector<std::vector<std::string>> cells;
  cells.push_back(table.columns);
  for (const auto& row : table.rows) {
    std::vector<std::string> line;
    for (const auto& c : row) line.push_back(format_cell(c));
    cells.push_back(std::move(line));
  }
  std::vector<std::size_t> width(table.columns.size(), 0);
  for (const auto& line : cells) {
    for (std::size_t i = 0; i < line.size(); ++i) width[i] = std::max(width[i], line[i].size());
  }
  for (const auto& line : cells) {
    std::string text;
    for (std::size_t i = 0; i < line.size(); ++i) {
      if (i) text += "  ";
      text += line[i];
      if (i + 1 < line.size()) text.append(width[i] - line[i].size(), ' ');
    }
    out << text << '\n';
  }
}

Workspace open_workspace(const Globals& g) {
  if (g.workspace.empty()) {
    throw UsageError("no workspace: pass --workspace DIR or set FCMEVAL_WORKSPACE");
  }
  return Workspace::open(g.workspace);
}

std::uint64_t seed_of(const Globals& g, const Workspace& ws) {
  return g.seed_opt->count() > 0 ? g.seed : ws.config().scheduler.seed;
}

std::string read_input(const std::string& path) {
  if (path == "-") {
    return std::string(std::istreambuf_iterator<char>(std::cin), std::istreambuf_iterator<char>());
  }
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::StorageError, "cannot read '" + path + "'");
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

// Restricts two per-passage samples to the passages both define.
std::pair<std::vector<std::pair<std::string, double>>, std::vector<std::pair<std::string, double>>>
common_passages(const std::vector<std::pair<std::string, double>>& a,
                const std::vector<std::pair<std::string, double>>& b) {
  std::map<std::string, double> mb(b.begin(), b.end());
  std::vector<std::pair<std::string, double>> ra, rb;
  for (const auto& [pid, v] : a) {
    auto it = mb.find(pid);
    if (it == mb.end()) continue;
    ra.emplace_back(pid, v);
    rb.emplace_back(pid, it->second);
  }
  return {ra, rb};
}

// Workspace inputs, with optional file overrides from the command line.
struct Inputs {
  std::string judgments;
  std::string annotations;

  void attach(CLI::App* app) {
    app->add_option("--judgments", judgments, "judgment log (default: workspace log)");
    app->add_option("--annotations", annotations, "dataset file (default: workspace dataset)");
  }
  Dataset dataset(const Workspace& ws) const {
    return annotations.empty() ? ws.load_dataset() : load_dataset(annotations);
  }
  std::vector<Judgment> log(const Workspace& ws) const {
    return judgments.empty() ? ws.load_judgments() : load_judgments(judgments);
  }
};

CiOptions ci_options(bool bootstrap, std::uint64_t seed) {
  CiOptions o;
  o.method = bootstrap ? CiMethod::Bootstrap : CiMethod::StudentT;
  o.seed = seed;
  return o;
}

CorrelationSummary summarize(const MeasureEvaluation& e, const CiOptions& o) {
  CorrelationSummary s = correlation_summary(e.per_passage, o);
  s.skipped = e.degenerate.size();
  return s;
}

// ---- subcommands ---------------------------------------------------------------

struct InitArgs {
  std::vector<std::string> raters;
  std::string dataset;
  double overlap = 0.2;
  MeasureFlags measure;
};

int cmd_init(const Globals& g, const InitArgs& a, std::ostream& out) {
  if (g.workspace.empty()) throw UsageError("init needs --workspace DIR");
  WorkspaceConfig config;
  if (g.seed_opt->count() > 0) config.scheduler.seed = g.seed;
  config.scheduler.overlap_fraction = a.overlap;
  config.measure = a.measure.resolve(config.measure);
  for (const auto& r : a.raters) {
    const auto colon = r.find(':');
    config.raters.push_back({r.substr(0, colon), colon == std::string::npos ? r : r.substr(colon + 1)});
  }
  Workspace ws = Workspace::create(g.workspace, config);
  if (!a.dataset.empty()) save_dataset(load_dataset(a.dataset), ws.dataset_path());
  out << "workspace created at " << ws.root().string() << '\n';
  return kExitOk;
}

struct ExtractArgs {
  std::string endpoint;
  std::string path = "/v1/completions";
  std::string model;
  bool chat = false;
  std::string prompt = "instruction-tuned";
  std::string dialect = "bracket-inst";
  std::string exemplars;
  std::vector<std::string> passages;
  bool strict = false;
  double temperature = 0.0;
  int max_tokens = 512;
  std::size_t parallel = 4;
  std::string out_file;
};

std::vector<Exemplar> load_exemplars(const std::string& path) {
  std::vector<Exemplar> out;
  std::istringstream in(read_input(path));
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto r = nlohmann::json::parse(line);
    Exemplar e;
    e.passage_text = r.at("passage_text").get<std::string>();
    for (const auto& x : r.at("edges")) {
      e.edges.emplace_back(x.at("source").get<std::string>(), x.at("target").get<std::string>(),
                           canonicalize_direction(x.at("direction").get<std::string>()));
    }
    out.push_back(std::move(e));
  }
  return out;
}

int cmd_extract(const Globals& g, const ExtractArgs& a, std::ostream& out, std::ostream& err) {
  const Workspace ws = open_workspace(g);
  const Dataset dataset = ws.load_dataset();

  PromptTemplate tmpl;
  tmpl.kind = parse_prompt_kind(a.prompt);
  tmpl.dialect = parse_prompt_dialect(a.dialect);
  if (!a.exemplars.empty()) tmpl.exemplars = load_exemplars(a.exemplars);
  tmpl.validate();

  CompletionEndpoint endpoint;
  endpoint.base_url = a.endpoint;
  endpoint.path = a.path;
  endpoint.model = a.model;
  endpoint.chat_messages = a.chat;
  endpoint.temperature = a.temperature;
  endpoint.max_tokens = a.max_tokens;
  endpoint.max_in_flight = std::max<std::size_t>(1, a.parallel);
  const CompletionClient client(endpoint);

  std::vector<const Passage*> targets;
  if (a.passages.empty()) {
    for (const auto& p : dataset.passages()) targets.push_back(&p);
  } else {
    for (const auto& id : a.passages) {
      const Passage* p = dataset.find_passage(id);
      if (p == nullptr) throw Error(ErrorCode::UnknownPassage, "passage '" + id + "'");
      targets.push_back(p);
    }
  }

  const ParseMode mode = a.strict ? ParseMode::Strict : ParseMode::Lenient;
  std::vector<std::future<ExtractionResult>> pending;
  for (const Passage* p : targets) {
    pending.push_back(std::async(std::launch::async, [&, p] {
      return extract_annotation(client, tmpl, *p, mode);
    }));
  }

  const fs::path out_path = a.out_file.empty() ? ws.annotations_path() : fs::path(a.out_file);
  std::vector<Annotation> merged;
  std::error_code ec;
  if (fs::exists(out_path, ec)) merged = load_annotation_records(out_path);

  ResultTable table{"extract", {"passage_id", "annotator_id", "edges", "dropped", "diagnostics"}, {}};
  for (auto& f : pending) {
    ExtractionResult r = f.get();
    for (const auto& d : r.diagnostics) {
      err << r.annotation.passage_id << ": offset " << d.position << ": " << d.message << '\n';
    }
    table.rows.push_back({r.annotation.passage_id, r.annotation.annotator_id,
                          static_cast<std::int64_t>(r.annotation.edges.size()),
                          static_cast<std::int64_t>(r.dropped_duplicates),
                          static_cast<std::int64_t>(r.diagnostics.size())});
    std::erase_if(merged, [&](const Annotation& x) {
      return x.passage_id == r.annotation.passage_id && x.annotator_id == r.annotation.annotator_id;
    });
    merged.push_back(std::move(r.annotation));
  }
  save_annotations(merged, out_path);
  emit(out, table, g.format);
  return kExitOk;
}

struct ParseArgs {
  std::string input = "-";
  std::string grammar = "inline";
  bool strict = false;
};

int cmd_parse(const Globals& g, const ParseArgs& a, std::ostream& out, std::ostream& err) {
  const std::string text = read_input(a.input);
  const ParseMode mode = a.strict ? ParseMode::Strict : ParseMode::Lenient;
  const ParseReport report =
      a.grammar == "tagged" ? parse_tagged_triplets(text, mode) : parse_inline_triplets(text, mode);
  for (const auto& d : report.diagnostics) err << "offset " << d.position << ": " << d.message << '\n';
  ResultTable table{"edges", {"source", "target", "direction"}, {}};
  for (const auto& e : report.edges) {
    table.rows.push_back({e.source, e.target, std::string(to_string(e.direction))});
  }
  emit(out, table, g.format);
  return kExitOk;
}

struct ScoreArgs {
  std::string gold;
  std::string pred;
  MeasureFlags measure;
};

int cmd_score(const Globals& g, const ScoreArgs& a, std::ostream& out, std::ostream& err) {
  EdgeMetricConfig base;
  base.measure.kind = MeasureKind::Exact;
  base.threshold = 1.0;
  const EdgeMetric metric(a.measure.resolve(base));

  std::map<std::string, Annotation> gold;
  for (auto& x : load_annotation_records(a.gold)) {
    const std::string pid = x.passage_id;
    if (!gold.emplace(pid, std::move(x)).second) {
      throw Error(ErrorCode::ValidationError, "gold file has several annotations for '" + pid + "'");
    }
  }

  ResultTable table{"scores", {"passage_id", "annotator_id", "tp", "pp", "fp", "fn", "score"}, {}};
  for (const auto& p : load_annotation_records(a.pred)) {
    auto it = gold.find(p.passage_id);
    if (it == gold.end()) {
      err << "no gold annotation for passage '" << p.passage_id << "', skipped\n";
      continue;
    }
    const MatchCounts c = metric.classify(p.edges, it->second.edges);
    table.rows.push_back({p.passage_id, p.annotator_id, static_cast<std::int64_t>(c.tp),
                          static_cast<std::int64_t>(c.pp), static_cast<std::int64_t>(c.fp),
                          static_cast<std::int64_t>(c.fn), soft_f1(c)});
  }
  emit(out, table, g.format);
  return kExitOk;
}

int cmd_elo(const Globals& g, const std::string& passage, const Inputs& in, std::ostream& out) {
  const Workspace ws = open_workspace(g);
  const Dataset dataset = in.dataset(ws);
  if (!passage.empty() && !dataset.has_passage(passage)) {
    throw Error(ErrorCode::UnknownPassage, "passage '" + passage + "'");
  }
  ResultTable table{"standings", {"passage_id", "annotation_id", "rating", "rank", "games"}, {}};
  for (const auto& board : run_all_tournaments(in.log(ws), ws.config().tournament, &dataset)) {
    if (!passage.empty() && board.passage_id != passage) continue;
    for (const auto& e : board.ranking) {
      table.rows.push_back({board.passage_id, e.annotation_id, e.rating, e.rank,
                            static_cast<std::int64_t>(e.games)});
    }
  }
  emit(out, table, g.format);
  return kExitOk;
}

int cmd_schedule(const Globals& g, std::optional<double> overlap, std::ostream& out,
                 std::ostream& err) {
  const Workspace ws = open_workspace(g);
  const Dataset dataset = ws.load_dataset();
  SchedulerConfig config = ws.config().scheduler;
  config.seed = seed_of(g, ws);
  if (overlap) config.overlap_fraction = *overlap;

  std::vector<PairingRequest> requests;
  for (const auto& p : dataset.passages()) {
    PairingRequest r{p.passage_id, {}};
    for (const Annotation* x : dataset.annotations_for(p.passage_id)) r.annotations.push_back(x->id());
    if (r.annotations.size() >= 2) requests.push_back(std::move(r));
  }
  std::vector<std::string> raters;
  for (const auto& r : ws.config().raters) raters.push_back(r.rater_id);
  const Schedule schedule = build_pairings(requests, raters, config);

  ResultTable table{"schedule", {"passage_id", "left", "right", "rater_id", "overlap"}, {}};
  for (const auto& x : schedule.assignments) {
    table.rows.push_back({x.passage_id, x.left, x.right, x.rater_id,
                          static_cast<std::int64_t>(x.overlap ? 1 : 0)});
  }
  emit(out, table, g.format);
  if (schedule.overlap_shortfall > 0) {
    err << "overlap shortfall: " << schedule.overlap_shortfall << " pair(s) without a second rater\n";
  }
  return kExitOk;
}

httplib::Server* g_server = nullptr;

void stop_server(int) {
  if (g_server != nullptr) g_server->stop();
}

int cmd_serve(const Globals& g, const std::string& host, int port, std::ostream& err) {
  const Workspace ws = open_workspace(g);
  auto service = RatingService::from_workspace(ws);
  httplib::Server server;
  install_routes(server, *service);
  if (!server.bind_to_port(host, port)) {
    throw Error(ErrorCode::StorageError, "cannot bind " + host + ":" + std::to_string(port));
  }
  err << "serving /v1 on http://" << host << ":" << port << '\n';
  g_server = &server;
  std::signal(SIGINT, stop_server);
  std::signal(SIGTERM, stop_server);
  server.listen_after_bind();
  g_server = nullptr;
  return kExitOk;
}

struct CorrelateArgs {
  MeasureFlags measure;
  Inputs inputs;
  bool include_gold = false;
  bool bootstrap = false;
  bool contrast = false;
  bool per_passage = false;
};

int cmd_correlate(const Globals& g, const CorrelateArgs& a, std::ostream& out, std::ostream& err) {
  const Workspace ws = open_workspace(g);
  const EdgeMetricConfig config = a.measure.resolve(ws.config().measure);
  const ValidationSet set = build_validation_set(a.inputs.dataset(ws), a.inputs.log(ws),
                                                 ws.config().tournament, a.include_gold);
  const CiOptions ci = ci_options(a.bootstrap, seed_of(g, ws));
  const MeasureEvaluation eval = evaluate_measure(set, config, a.include_gold);
  for (const auto& pid : eval.degenerate) err << "degenerate ranking skipped: " << pid << '\n';

  std::vector<std::pair<std::string, CorrelationSummary>> rows;
  rows.emplace_back(label_of(config), summarize(eval, ci));
  if (a.contrast) {
    const MeasureEvaluation base = evaluate_measure(set, vanilla_f1_config(), a.include_gold);
    const auto [m, b] = common_passages(eval.per_passage, base.per_passage);
    rows.emplace_back(label_of(config) + " - f1", paired_contrast(m, b, ci));
  }
  emit(out, a.per_passage ? per_passage_table("per_passage", rows) : summary_table("summary", rows),
       g.format);
  return kExitOk;
}

struct TuneArgs {
  MeasureFlags measure;
  Inputs inputs;
  std::string grid = "0:1:0.05";
  bool include_gold = false;
  bool save = false;
};

int cmd_tune(const Globals& g, const TuneArgs& a, std::ostream& out) {
  Workspace ws = open_workspace(g);
  const EdgeMetricConfig config = a.measure.resolve(ws.config().measure);
  const GridSpec grid = GridSpec::parse(a.grid);
  const ValidationSet set = build_validation_set(a.inputs.dataset(ws), a.inputs.log(ws),
                                                 ws.config().tournament, a.include_gold);
  const GridSearchResult result = grid_search_threshold(set, config, grid, a.include_gold);

  const Cell best_rho = result.best_mean_rho ? Cell(*result.best_mean_rho) : Cell(std::monostate{});
  out << (g.format == "csv" ? "# " : "") << "T*=" << format_cell(result.best_threshold)
      << " mean_rho=" << format_cell(best_rho) << '\n';
  ResultTable table{"curve", {"threshold", "mean_rho", "passages", "refined"}, {}};
  for (const auto& p : result.curve) {
    table.rows.push_back({p.threshold, p.mean_rho ? Cell(*p.mean_rho) : Cell(std::monostate{}),
                          static_cast<std::int64_t>(p.passages),
                          static_cast<std::int64_t>(p.refined ? 1 : 0)});
  }
  emit(out, table, g.format);
  if (a.save) {
    ws.mutable_config().measure = config;
    ws.mutable_config().measure.threshold = result.best_threshold;
    ws.save_config();
  }
  return kExitOk;
}

struct ReportArgs {
  bool include_gold = false;
  bool bootstrap = false;
  std::string out_dir;
};

int cmd_report(const Globals& g, const ReportArgs& a, std::ostream& out, std::ostream& err) {
  const Workspace ws = open_workspace(g);
  const std::uint64_t seed = seed_of(g, ws);
  const CiOptions ci = ci_options(a.bootstrap, seed);
  const ValidationSet set = build_validation_set(ws.load_dataset(), ws.load_judgments(),
                                                 ws.config().tournament, a.include_gold);

  std::vector<std::pair<std::string, EdgeMetricConfig>> measures;
  measures.emplace_back("f1", vanilla_f1_config());
  for (MeasureKind kind : {MeasureKind::Bleu, MeasureKind::Rouge1, MeasureKind::Meteor}) {
    EdgeMetricConfig c;
    c.measure.kind = kind;
    c.threshold = default_threshold(kind);
    measures.emplace_back(std::string(to_string(kind)) + "-e", c);
  }
  measures.emplace_back("workspace", ws.config().measure);

  const MeasureEvaluation baseline = evaluate_measure(set, vanilla_f1_config(), a.include_gold);
  std::vector<std::pair<std::string, CorrelationSummary>> summaries, contrasts;
  nlohmann::json measure_json = nlohmann::json::array();
  for (const auto& [label, config] : measures) {
    measure_json.push_back({{"label", label}, {"measure", measure_to_json(config)}});
    const MeasureEvaluation eval = evaluate_measure(set, config, a.include_gold);
    if (eval.per_passage.size() < 2) {
      err << label << ": fewer than two usable passages, omitted\n";
      continue;
    }
    summaries.emplace_back(label, summarize(eval, ci));
    if (label == "f1") continue;
    const auto [m, b] = common_passages(eval.per_passage, baseline.per_passage);
    if (m.size() >= 2) contrasts.emplace_back(label, paired_contrast(m, b, ci));
  }

  const nlohmann::json config = {{"workspace", workspace_config_to_json(ws.config())},
                                 {"measures", measure_json},
                                 {"include_gold", a.include_gold},
                                 {"ci", a.bootstrap ? "bootstrap" : "student-t"}};
  const fs::path dir = a.out_dir.empty() ? ws.results_path() : fs::path(a.out_dir);
  const ResultTable summary = summary_table("summary", summaries);
  const ExportManifest manifest = export_results(
      {summary, per_passage_table("per_passage", summaries), summary_table("contrast", contrasts)},
      dir, config, seed);
  emit(out, summary, g.format);
  err << "wrote " << manifest.files.size() << " tables and manifest.json to " << dir.string() << '\n';
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Score extracted causal maps against reference annotations.", "fcm-eval"};
  app.require_subcommand(1);
  app.fallthrough();

  Globals g;
  app.add_option("--workspace,-w", g.workspace, "workspace directory")->envname("FCMEVAL_WORKSPACE");
  g.seed_opt = app.add_option("--seed", g.seed, "seed for randomized steps (default: workspace seed)");
  app.add_option("--format", g.format, "output format")->check(CLI::IsMember({"table", "csv"}));

  InitArgs init;
  auto* c_init = app.add_subcommand("init", "create a workspace");
  c_init->add_option("--rater", init.raters, "rater id, optionally id:display name");
  c_init->add_option("--dataset", init.dataset, "dataset JSONL to import");
  c_init->add_option("--overlap", init.overlap, "overlap fraction for reliability pairs")
      ->check(CLI::Range(0.0, 1.0));
  init.measure.attach(c_init);

  ExtractArgs ex;
  auto* c_extract = app.add_subcommand("extract", "extract annotations with a completion endpoint");
  c_extract->add_option("--endpoint", ex.endpoint, "completion server base URL")->required();
  c_extract->add_option("--model", ex.model, "model name (also the annotator id)")->required();
  c_extract->add_option("--path", ex.path, "request path");
  c_extract->add_flag("--chat", ex.chat, "send a chat messages payload");
  c_extract->add_option("--prompt", ex.prompt, "instruction-tuned | zero-shot | three-shot");
  c_extract->add_option("--prompt-dialect,--dialect", ex.dialect, "bracket-inst | header-tagged");
  c_extract->add_option("--exemplars", ex.exemplars, "JSONL exemplars for three-shot prompts");
  c_extract->add_option("--passage", ex.passages, "restrict to these passage ids");
  c_extract->add_flag("--strict", ex.strict, "fail on any parse diagnostic");
  c_extract->add_option("--temperature", ex.temperature);
  c_extract->add_option("--max-tokens", ex.max_tokens);
  c_extract->add_option("--parallel", ex.parallel, "concurrent requests");
  c_extract->add_option("--out", ex.out_file, "annotation file (default: workspace annotations)");

  ParseArgs pa;
  auto* c_parse = app.add_subcommand("parse", "parse model output into edges");
  c_parse->add_option("input", pa.input, "file to parse, - for stdin");
  c_parse->add_option("--grammar", pa.grammar)->check(CLI::IsMember({"inline", "tagged"}));
  c_parse->add_flag("--strict", pa.strict, "fail on any diagnostic");

  ScoreArgs sc;
  auto* c_score = app.add_subcommand("score", "score predicted annotations against gold");
  c_score->add_option("--gold", sc.gold, "gold annotation records")->required();
  c_score->add_option("--pred", sc.pred, "predicted annotation records")->required();
  sc.measure.attach(c_score);

  std::string elo_passage;
  Inputs elo_inputs;
  auto* c_elo = app.add_subcommand("elo", "leaderboards from the judgment log");
  c_elo->add_option("--passage", elo_passage);
  elo_inputs.attach(c_elo);

  double overlap = 0.0;
  auto* c_schedule = app.add_subcommand("schedule", "pair assignments for raters");
  auto* overlap_opt = c_schedule->add_option("--overlap", overlap)->check(CLI::Range(0.0, 1.0));

  std::string host = "127.0.0.1";
  int port = 8080;
  auto* c_serve = app.add_subcommand("serve", "run the rating service");
  c_serve->add_option("--host", host);
  c_serve->add_option("--port", port)->check(CLI::Range(0, 65535));

  CorrelateArgs co;
  auto* c_corr = app.add_subcommand("correlate", "Spearman correlation with human rankings");
  co.measure.attach(c_corr);
  co.inputs.attach(c_corr);
  c_corr->add_flag("--include-gold", co.include_gold, "keep the tournament winner in rankings");
  c_corr->add_flag("--bootstrap", co.bootstrap, "bootstrap confidence intervals");
  c_corr->add_flag("--contrast", co.contrast, "add the paired difference against vanilla F1");
  c_corr->add_flag("--per-passage", co.per_passage, "print per-passage correlations");

  TuneArgs tu;
  auto* c_tune = app.add_subcommand("tune", "grid search the similarity threshold");
  tu.measure.attach(c_tune);
  tu.inputs.attach(c_tune);
  c_tune->add_option("--grid", tu.grid, "lo:hi:step");
  c_tune->add_flag("--include-gold", tu.include_gold);
  c_tune->add_flag("--save", tu.save, "store the tuned threshold in the workspace");

  ReportArgs re;
  auto* c_report = app.add_subcommand("report", "export correlation tables and a run manifest");
  c_report->add_flag("--include-gold", re.include_gold);
  c_report->add_flag("--bootstrap", re.bootstrap);
  c_report->add_option("--out", re.out_dir, "output directory (default: workspace results)");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (c_init->parsed()) return cmd_init(g, init, out);
    if (c_extract->parsed()) return cmd_extract(g, ex, out, err);
    if (c_parse->parsed()) return cmd_parse(g, pa, out, err);
    if (c_score->parsed()) return cmd_score(g, sc, out, err);
    if (c_elo->parsed()) return cmd_elo(g, elo_passage, elo_inputs, out);
    if (c_schedule->parsed()) {
      return cmd_schedule(g, overlap_opt->count() > 0 ? std::optional(overlap) : std::nullopt, out,
                          err);
    }
    if (c_serve->parsed()) return cmd_serve(g, host, port, err);
    if (c_corr->parsed()) return cmd_correlate(g, co, out, err);
    if (c_tune->parsed()) return cmd_tune(g, tu, out);
    if (c_report->parsed()) return cmd_report(g, re, out, err);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kExitDomain;
  } catch (const nlohmann::json::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitDomain;
  }
  return kExitUsage;
}

}  // namespace fcm::cli
