#include "fcm/storage.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <charconv>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <openssl/evp.h>

namespace fcm {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Already carries its line number; at_line passes it through untouched.
struct LineError : Error {
  using Error::Error;
};

[[noreturn]] void line_error(std::size_t line, const std::string& reason) {
  throw LineError(ErrorCode::ValidationError, "line " + std::to_string(line) + ": " + reason);
}

const json& require(const json& record, const char* key, std::size_t line) {
  auto it = record.find(key);
  if (it == record.end()) line_error(line, std::string("missing field '") + key + "'");
  return *it;
}

std::string require_string(const json& record, const char* key, std::size_t line) {
  const json& v = require(record, key, line);
  if (!v.is_string()) line_error(line, std::string("field '") + key + "' must be a string");
  return v.get<std::string>();
}

std::string optional_string(const json& record, const char* key, std::size_t line) {
  auto it = record.find(key);
  if (it == record.end() || it->is_null()) return {};
  if (!it->is_string()) line_error(line, std::string("field '") + key + "' must be a string");
  return it->get<std::string>();
}

void check_schema(const json& record, std::size_t line) {
  auto it = record.find("schema_version");
  if (it == record.end()) return;
  if (!it->is_number_integer() || it->get<int>() != kSchemaVersion) {
    throw Error(ErrorCode::SchemaMismatch, "line " + std::to_string(line) + ": schema_version " +
                                               it->dump() + ", expected " +
                                               std::to_string(kSchemaVersion));
  }
}

json parse_line(const std::string& text, std::size_t line) {
  json record;
  try {
    record = json::parse(text);
  } catch (const json::parse_error& e) {
    line_error(line, std::string("invalid JSON: ") + e.what());
  }
  if (!record.is_object()) line_error(line, "record must be a JSON object");
  return record;
}

// Runs `body` and rewraps core-model errors with the line number.
template <typename F>
void at_line(std::size_t line, F&& body) {
  try {
    body();
  } catch (const LineError&) {
    throw;
  } catch (const Error& e) {
    if (e.code() == ErrorCode::SchemaMismatch) throw;
    line_error(line, e.message());
  }
}

Annotation annotation_from_json(const json& record, const std::string& passage_id,
                                std::size_t line) {
  const std::string annotator = require_string(record, "annotator_id", line);
  const std::string origin = optional_string(record, "origin", line);
  const json& edges = require(record, "edges", line);
  if (!edges.is_array()) line_error(line, "'edges' must be an array");

  std::vector<RawEdge> raw;
  for (const json& e : edges) {
    if (!e.is_object()) line_error(line, "edge must be an object");
    RawEdge r;
    r.source = require_string(e, "source", line);
    r.target = require_string(e, "target", line);
    r.direction = canonicalize_direction(require_string(e, "direction", line));
    auto w = e.find("weight");
    if (w != e.end() && !w->is_null()) {
      if (!w->is_number()) line_error(line, "'weight' must be a number");
      r.weight = w->get<double>();
    }
    raw.push_back(std::move(r));
  }
  return build_annotation_unchecked(passage_id, annotator, raw,
                                    origin.empty() ? Origin::Human : parse_origin(origin))
      .annotation;
}

template <typename F>
void for_each_record(std::istream& in, F&& handle) {
  std::string text;
  std::size_t line = 0;
  while (std::getline(in, text)) {
    ++line;
    if (std::all_of(text.begin(), text.end(), [](unsigned char c) { return std::isspace(c); })) {
      continue;
    }
    json record = parse_line(text, line);
    check_schema(record, line);
    at_line(line, [&] { handle(record, line); });
  }
}

std::ifstream open_input(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::StorageError, "cannot read '" + path.string() + "'");
  return in;
}

void write_atomically(const fs::path& path, const std::string& bytes) {
  std::error_code ec;
  if (path.has_parent_path()) fs::create_directories(path.parent_path(), ec);
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::StorageError, "cannot write '" + path.string() + "'");
    out << bytes;
    out.flush();
    if (!out) throw Error(ErrorCode::StorageError, "write failed for '" + path.string() + "'");
  }
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw Error(ErrorCode::StorageError, "cannot replace '" + path.string() + "'");
  }
}

}  // namespace

// ---- codecs -----------------------------------------------------------------

json edge_to_json(const CausalEdge& edge) {
  json e = {{"source", edge.source()},
            {"target", edge.target()},
            {"direction", std::string(to_string(edge.direction()))}};
  if (edge.weight()) e["weight"] = *edge.weight();
  return e;
}

json annotation_to_json(const Annotation& a) {
  json edges = json::array();
  for (const auto& e : a.edges) edges.push_back(edge_to_json(e));
  return {{"annotator_id", a.annotator_id},
          {"origin", std::string(to_string(a.origin))},
          {"edges", std::move(edges)}};
}

json judgment_to_json(const Judgment& j) {
  return {{"judgment_id", j.judgment_id}, {"passage_id", j.passage_id},
          {"annotation_a", j.annotation_a}, {"annotation_b", j.annotation_b},
          {"outcome", std::string(to_string(j.outcome))}, {"rater_id", j.rater_id},
          {"submitted_at", j.submitted_at}};
}

Judgment judgment_from_json(const json& r) {
  Judgment j;
  try {
    j.judgment_id = r.at("judgment_id").get<std::string>();
    j.passage_id = r.at("passage_id").get<std::string>();
    j.annotation_a = r.at("annotation_a").get<std::string>();
    j.annotation_b = r.at("annotation_b").get<std::string>();
    j.outcome = parse_outcome(r.at("outcome").get<std::string>());
    j.rater_id = r.at("rater_id").get<std::string>();
    if (auto it = r.find("submitted_at"); it != r.end()) j.submitted_at = it->get<std::int64_t>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ValidationError, std::string("bad judgment record: ") + e.what());
  }
  return j;
}

json measure_to_json(const EdgeMetricConfig& c) {
  json synonyms = json::array();
  for (const auto& [a, b] : c.measure.meteor.synonyms) synonyms.push_back({a, b});
  json m = {
      {"kind", std::string(to_string(c.measure.kind))},
      {"threshold", c.threshold},
      {"partial_positives", c.allow_partial_positives},
      {"bleu", {{"max_n", c.measure.bleu.max_n}, {"epsilon", c.measure.bleu.epsilon}}},
      {"rouge_variant", c.measure.rouge.variant == RougeVariant::Precision ? "precision"
                        : c.measure.rouge.variant == RougeVariant::Recall ? "recall"
                                                                          : "f"},
      {"meteor",
       {{"alpha", c.measure.meteor.alpha},
        {"beta", c.measure.meteor.beta},
        {"gamma", c.measure.meteor.gamma},
        {"stemming", c.measure.meteor.stemming},
        {"synonyms", std::move(synonyms)}}},
  };
  if (c.measure.external) {
    m["external"] = {{"base_url", c.measure.external->base_url},
                     {"timeout_ms", c.measure.external->timeout.count()}};
  }
  return m;
}

EdgeMetricConfig measure_from_json(const json& r) {
  EdgeMetricConfig c;
  try {
    c.measure.kind = parse_measure_kind(r.value("kind", std::string("exact")));
    c.threshold = r.value("threshold", c.threshold);
    c.allow_partial_positives = r.value("partial_positives", c.allow_partial_positives);
    if (auto b = r.find("bleu"); b != r.end()) {
      c.measure.bleu.max_n = b->value("max_n", c.measure.bleu.max_n);
      c.measure.bleu.epsilon = b->value("epsilon", c.measure.bleu.epsilon);
    }
    const std::string variant = r.value("rouge_variant", std::string("f"));
    if (variant == "precision") {
      c.measure.rouge.variant = RougeVariant::Precision;
    } else if (variant == "recall") {
      c.measure.rouge.variant = RougeVariant::Recall;
    } else if (variant == "f") {
      c.measure.rouge.variant = RougeVariant::FMeasure;
    } else {
      throw Error(ErrorCode::InvalidConfig, "unknown rouge_variant '" + variant + "'");
    }
    if (auto m = r.find("meteor"); m != r.end()) {
      auto& p = c.measure.meteor;
      p.alpha = m->value("alpha", p.alpha);
      p.beta = m->value("beta", p.beta);
      p.gamma = m->value("gamma", p.gamma);
      p.stemming = m->value("stemming", p.stemming);
      if (auto s = m->find("synonyms"); s != m->end()) {
        for (const auto& pair : *s) {
          p.synonyms.emplace_back(pair.at(0).get<std::string>(), pair.at(1).get<std::string>());
        }
      }
    }
    if (auto e = r.find("external"); e != r.end() && !e->is_null()) {
      EndpointConfig ep;
      ep.base_url = e->at("base_url").get<std::string>();
      ep.timeout = std::chrono::milliseconds(e->value("timeout_ms", std::int64_t{10000}));
      c.measure.external = ep;
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidConfig, std::string("bad measure config: ") + e.what());
  }
  c.validate();
  return c;
}

// ---- datasets -----------------------------------------------------------------

Dataset parse_dataset(std::istream& in) {
  Dataset dataset;
  for_each_record(in, [&](const json& r, std::size_t line) {
    Passage p;
    p.passage_id = require_string(r, "passage_id", line);
    p.text = require_string(r, "text", line);
    p.provenance = optional_string(r, "provenance", line);
    const std::string split = optional_string(r, "split", line);
    p.split = split.empty() ? Split::Unassigned : parse_split(split);
    const std::string pid = p.passage_id;
    dataset.add_passage(std::move(p));
    if (auto it = r.find("annotations"); it != r.end()) {
      if (!it->is_array()) line_error(line, "'annotations' must be an array");
      for (const json& a : *it) {
        if (!a.is_object()) line_error(line, "annotation must be an object");
        dataset.add_annotation(annotation_from_json(a, pid, line));
      }
    }
  });
  return dataset;
}

Dataset load_dataset(const fs::path& path) {
  std::ifstream in = open_input(path);
  return parse_dataset(in);
}

void parse_annotations(std::istream& in, Dataset& dataset) {
  for_each_record(in, [&](const json& r, std::size_t line) {
    const std::string pid = require_string(r, "passage_id", line);
    if (!dataset.has_passage(pid)) {
      throw Error(ErrorCode::UnknownPassage, "passage '" + pid + "'");
    }
    dataset.add_annotation(annotation_from_json(r, pid, line));
  });
}

void load_annotations(const fs::path& path, Dataset& dataset) {
  std::ifstream in = open_input(path);
  parse_annotations(in, dataset);
}

std::vector<Annotation> parse_annotation_records(std::istream& in) {
  std::vector<Annotation> out;
  for_each_record(in, [&](const json& r, std::size_t line) {
    const std::string pid = require_string(r, "passage_id", line);
    if (r.contains("annotator_id")) {
      out.push_back(annotation_from_json(r, pid, line));
      return;
    }
    if (auto it = r.find("annotations"); it != r.end()) {
      if (!it->is_array()) line_error(line, "'annotations' must be an array");
      for (const json& a : *it) out.push_back(annotation_from_json(a, pid, line));
    }
  });
  return out;
}

std::vector<Annotation> load_annotation_records(const fs::path& path) {
  std::ifstream in = open_input(path);
  return parse_annotation_records(in);
}

void write_dataset(std::ostream& out, const Dataset& dataset) {
  for (const auto& p : dataset.passages()) {
    json annotations = json::array();
    for (const Annotation* a : dataset.annotations_for(p.passage_id)) {
      annotations.push_back(annotation_to_json(*a));
    }
    json r = {{"schema_version", kSchemaVersion},
              {"passage_id", p.passage_id},
              {"text", p.text},
              {"provenance", p.provenance},
              {"split", std::string(to_string(p.split))},
              {"annotations", std::move(annotations)}};
    out << r.dump() << '\n';
  }
}

void save_dataset(const Dataset& dataset, const fs::path& path) {
  std::ostringstream out;
  write_dataset(out, dataset);
  write_atomically(path, out.str());
}

void save_annotations(const std::vector<Annotation>& annotations, const fs::path& path) {
  std::ostringstream out;
  for (const auto& a : annotations) {
    json r = annotation_to_json(a);
    r["passage_id"] = a.passage_id;
    r["schema_version"] = kSchemaVersion;
    out << r.dump() << '\n';
  }
  write_atomically(path, out.str());
}

// ---- judgment log ---------------------------------------------------------------

namespace {

struct LogContents {
  std::vector<Judgment> records;
  std::uintmax_t intact_bytes = 0;  // bytes up to and including the last complete line
};

LogContents read_log(const fs::path& path) {
  LogContents out;
  std::error_code ec;
  if (!fs::exists(path, ec)) return out;
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::StorageError, "cannot read '" + path.string() + "'");
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

  std::size_t start = 0;
  std::size_t line = 0;
  while (start < bytes.size()) {
    const std::size_t end = bytes.find('\n', start);
    if (end == std::string::npos) break;  // torn tail
    ++line;
    const std::string text = bytes.substr(start, end - start);
    start = end + 1;
    out.intact_bytes = start;
    if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
    const json record = parse_line(text, line);
    check_schema(record, line);
    at_line(line, [&] { out.records.push_back(judgment_from_json(record)); });
  }
  return out;
}

}  // namespace

std::vector<Judgment> load_judgments(const fs::path& path) { return read_log(path).records; }

JudgmentLog::JudgmentLog(fs::path path) : path_(std::move(path)) {
  LogContents contents = read_log(path_);
  std::error_code ec;
  if (fs::exists(path_, ec) && fs::file_size(path_, ec) != contents.intact_bytes) {
    fs::resize_file(path_, contents.intact_bytes, ec);
    if (ec) throw Error(ErrorCode::StorageError, "cannot repair '" + path_.string() + "'");
  }
  for (auto& j : contents.records) {
    if (ids_.insert(j.judgment_id).second) records_.push_back(std::move(j));
  }
}

AppendStatus JudgmentLog::append(const Judgment& judgment) {
  validate_judgment(judgment);
  std::lock_guard lock(mutex_);
  if (ids_.count(judgment.judgment_id) != 0) return AppendStatus::Duplicate;

  std::string line = judgment_to_json(judgment).dump();
  line.push_back('\n');
  std::error_code ec;
  if (path_.has_parent_path()) fs::create_directories(path_.parent_path(), ec);
  const int fd = ::open(path_.c_str(), O_WRONLY | O_APPEND | O_CREAT | O_CLOEXEC, 0644);
  if (fd < 0) {
    throw Error(ErrorCode::StorageError,
                "cannot open '" + path_.string() + "': " + std::strerror(errno));
  }
  std::size_t written = 0;
  bool ok = true;
  while (written < line.size()) {
    const ssize_t n = ::write(fd, line.data() + written, line.size() - written);
    if (n < 0) {
      if (errno == EINTR) continue;
      ok = false;
      break;
    }
    written += static_cast<std::size_t>(n);
  }
  ok = ok && ::fsync(fd) == 0;
  ::close(fd);
  if (!ok) throw Error(ErrorCode::StorageError, "append to '" + path_.string() + "' failed");

  ids_.insert(judgment.judgment_id);
  records_.push_back(judgment);
  return AppendStatus::New;
}

std::vector<Judgment> JudgmentLog::snapshot() const {
  std::lock_guard lock(mutex_);
  return records_;
}

std::vector<Judgment> JudgmentLog::snapshot_for(const std::string& passage_id) const {
  std::lock_guard lock(mutex_);
  std::vector<Judgment> out;
  for (const auto& j : records_) {
    if (j.passage_id == passage_id) out.push_back(j);
  }
  return out;
}

bool JudgmentLog::contains(const std::string& judgment_id) const {
  std::lock_guard lock(mutex_);
  return ids_.count(judgment_id) != 0;
}

std::size_t JudgmentLog::size() const {
  std::lock_guard lock(mutex_);
  return records_.size();
}

// ---- workspace -------------------------------------------------------------------

std::vector<std::string> default_guidelines() {
  return {
      "Prefer the annotation with more correct relations and fewer wrong ones.",
      "Prefer node names that stay within concepts present in the text.",
      "Prefer relations whose source and target are not swapped.",
      "Prefer omitting transitive relations the text does not state outright.",
      "Prefer node names that stay close to the wording of the text.",
      "Prefer descriptive node names that keep their modifiers.",
      "Prefer separate nodes for distinct concepts joined by 'and'.",
      "Prefer relations with the correct causal direction.",
  };
}

std::string default_conflict_rule() {
  return "When guidelines conflict, follow the one listed first; otherwise use your best "
         "judgment.";
}

void WorkspaceConfig::validate() const {
  if (schema_version != kSchemaVersion) {
    throw Error(ErrorCode::SchemaMismatch, "workspace schema_version " +
                                               std::to_string(schema_version) + ", expected " +
                                               std::to_string(kSchemaVersion));
  }
  for (const std::string* name : {&dataset_file, &annotations_file, &judgment_log, &results_dir}) {
    if (name->empty()) throw Error(ErrorCode::InvalidConfig, "workspace file names must be set");
  }
  tournament.validate();
  if (!(scheduler.overlap_fraction >= 0.0 && scheduler.overlap_fraction <= 1.0)) {
    throw Error(ErrorCode::InvalidConfig, "overlap_fraction must lie in [0, 1]");
  }
  measure.validate();
  std::set<std::string> seen;
  for (const auto& r : raters) {
    if (r.rater_id.empty() || !seen.insert(r.rater_id).second) {
      throw Error(ErrorCode::InvalidConfig, "rater ids must be unique and non-empty");
    }
  }
}

json workspace_config_to_json(const WorkspaceConfig& c) {
  json raters = json::array();
  for (const auto& r : c.raters) {
    raters.push_back({{"rater_id", r.rater_id}, {"display_name", r.display_name}});
  }
  return {{"schema_version", c.schema_version},
          {"files",
           {{"dataset", c.dataset_file},
            {"annotations", c.annotations_file},
            {"judgments", c.judgment_log},
            {"results", c.results_dir}}},
          {"tournament",
           {{"k_factor", c.tournament.k_factor}, {"initial_rating", c.tournament.initial_rating}}},
          {"scheduler",
           {{"seed", c.scheduler.seed}, {"overlap_fraction", c.scheduler.overlap_fraction}}},
          {"measure", measure_to_json(c.measure)},
          {"raters", std::move(raters)},
          {"guidelines", c.guidelines},
          {"conflict_rule", c.conflict_rule}};
}

WorkspaceConfig workspace_config_from_json(const json& r) {
  WorkspaceConfig c;
  try {
    c.schema_version = r.at("schema_version").get<int>();
    if (c.schema_version != kSchemaVersion) c.validate();  // throws SchemaMismatch
    if (auto f = r.find("files"); f != r.end()) {
      c.dataset_file = f->value("dataset", c.dataset_file);
      c.annotations_file = f->value("annotations", c.annotations_file);
      c.judgment_log = f->value("judgments", c.judgment_log);
      c.results_dir = f->value("results", c.results_dir);
    }
    if (auto t = r.find("tournament"); t != r.end()) {
      c.tournament.k_factor = t->value("k_factor", c.tournament.k_factor);
      c.tournament.initial_rating = t->value("initial_rating", c.tournament.initial_rating);
    }
    if (auto s = r.find("scheduler"); s != r.end()) {
      c.scheduler.seed = s->value("seed", c.scheduler.seed);
      c.scheduler.overlap_fraction = s->value("overlap_fraction", c.scheduler.overlap_fraction);
    }
    if (auto m = r.find("measure"); m != r.end()) c.measure = measure_from_json(*m);
    if (auto rs = r.find("raters"); rs != r.end()) {
      for (const auto& x : *rs) {
        c.raters.push_back({x.at("rater_id").get<std::string>(), x.value("display_name", "")});
      }
    }
    if (auto g = r.find("guidelines"); g != r.end()) {
      c.guidelines = g->get<std::vector<std::string>>();
    }
    c.conflict_rule = r.value("conflict_rule", c.conflict_rule);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidConfig, std::string("bad workspace.json: ") + e.what());
  }
  c.validate();
  return c;
}

Workspace Workspace::open(const fs::path& root) {
  const fs::path descriptor = root / kDescriptor;
  std::ifstream in(descriptor);
  if (!in) {
    throw Error(ErrorCode::StorageError, "no workspace at '" + root.string() + "' (missing " +
                                             kDescriptor + ")");
  }
  json record;
  try {
    record = json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::InvalidConfig, std::string("bad workspace.json: ") + e.what());
  }
  Workspace ws;
  ws.root_ = root;
  ws.config_ = workspace_config_from_json(record);
  return ws;
}

Workspace Workspace::create(const fs::path& root, WorkspaceConfig config) {
  config.validate();
  std::error_code ec;
  fs::create_directories(root, ec);
  if (ec) throw Error(ErrorCode::StorageError, "cannot create '" + root.string() + "'");
  Workspace ws;
  ws.root_ = root;
  ws.config_ = std::move(config);
  ws.save_config();
  return ws;
}

void Workspace::save_config() const {
  config_.validate();
  write_atomically(root_ / kDescriptor, workspace_config_to_json(config_).dump(2) + "\n");
}

Dataset Workspace::load_dataset() const {
  std::error_code ec;
  Dataset dataset;
  if (fs::exists(dataset_path(), ec)) dataset = fcm::load_dataset(dataset_path());
  if (fs::exists(annotations_path(), ec)) load_annotations(annotations_path(), dataset);
  return dataset;
}

std::vector<Judgment> Workspace::load_judgments() const {
  return fcm::load_judgments(judgment_log_path());
}

// ---- export ------------------------------------------------------------------------

std::string format_cell(const Cell& cell) {
  if (const auto* s = std::get_if<std::string>(&cell)) {
    if (s->find_first_of(",\"\n\r") == std::string::npos) return *s;
    std::string quoted = "\"";
    for (char c : *s) {
      if (c == '"') quoted.push_back('"');
      quoted.push_back(c);
    }
    quoted.push_back('"');
    return quoted;
  }
  if (const auto* d = std::get_if<double>(&cell)) {
    if (!std::isfinite(*d)) return std::isnan(*d) ? "nan" : (*d > 0 ? "inf" : "-inf");
    char buffer[64];
    const auto result =
        std::to_chars(buffer, buffer + sizeof buffer, *d, std::chars_format::fixed, 6);
    std::string text(buffer, result.ptr);
    if (text == "-0.000000") text = "0.000000";
    return text;
  }
  if (const auto* i = std::get_if<std::int64_t>(&cell)) return std::to_string(*i);
  return {};
}

void write_csv(std::ostream& out, const ResultTable& table) {
  for (std::size_t i = 0; i < table.columns.size(); ++i) {
    out << (i ? "," : "") << format_cell(table.columns[i]);
  }
  out << '\n';
  for (const auto& row : table.rows) {
    if (row.size() != table.columns.size()) {
      throw Error(ErrorCode::StorageError, "row width does not match columns in '" +
                                               table.name + "'");
    }
    for (std::size_t i = 0; i < row.size(); ++i) out << (i ? "," : "") << format_cell(row[i]);
    out << '\n';
  }
}

ResultTable summary_table(const std::string& name,
                          const std::vector<std::pair<std::string, CorrelationSummary>>& summaries) {
  ResultTable t{name,
                {"label", "passages", "mean", "std_dev", "ci90_lo", "ci90_hi", "ci95_lo",
                 "ci95_hi", "skipped"},
                {}};
  for (const auto& [label, s] : summaries) {
    t.rows.push_back({label, static_cast<std::int64_t>(s.per_passage.size()), s.mean, s.std_dev,
                      s.ci90.lo, s.ci90.hi, s.ci95.lo, s.ci95.hi,
                      static_cast<std::int64_t>(s.skipped)});
  }
  return t;
}

ResultTable per_passage_table(
    const std::string& name,
    const std::vector<std::pair<std::string, CorrelationSummary>>& summaries) {
  ResultTable t{name, {"label", "passage_id", "rho"}, {}};
  for (const auto& [label, s] : summaries) {
    for (const auto& [pid, rho] : s.per_passage) t.rows.push_back({label, pid, rho});
  }
  return t;
}

std::string sha256_hex(const std::string& bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int length = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &length, EVP_sha256(), nullptr) != 1) {
    throw Error(ErrorCode::StorageError, "sha256 failed");
  }
  std::ostringstream hex;
  for (unsigned int i = 0; i < length; ++i) {
    hex << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(digest[i]);
  }
  return hex.str();
}

ExportManifest export_results(const std::vector<ResultTable>& tables, const fs::path& directory,
                              const json& config, std::uint64_t seed) {
  std::error_code ec;
  fs::create_directories(directory, ec);
  if (ec || !fs::is_directory(directory)) {
    throw Error(ErrorCode::StorageError, "cannot create '" + directory.string() + "'");
  }

  ExportManifest manifest;
  manifest.seed = seed;
  manifest.config_hash = sha256_hex(config.dump());
  std::set<std::string> names;
  for (const auto& table : tables) {
    const std::string file = table.name + ".csv";
    if (table.name.empty() || !names.insert(file).second) {
      throw Error(ErrorCode::StorageError, "table names must be unique and non-empty");
    }
    std::ostringstream out;
    write_csv(out, table);
    write_atomically(directory / file, out.str());
    manifest.files.push_back({file, sha256_hex(out.str()), table.rows.size()});
  }

  json files = json::array();
  for (const auto& f : manifest.files) {
    files.push_back({{"name", f.name}, {"sha256", f.sha256}, {"rows", f.rows}});
  }
  const json record = {{"schema_version", kSchemaVersion},
                       {"seed", seed},
                       {"config_hash", manifest.config_hash},
                       {"config", config},
                       {"files", std::move(files)}};
  write_atomically(directory / "manifest.json", record.dump(2) + "\n");
  return manifest;
}

}  // namespace fcm
