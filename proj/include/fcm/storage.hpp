#pragma once

// Line-delimited JSON persistence for datasets and judgment logs, the
// workspace descriptor, and deterministic CSV export.
//
// Workspace layout (all names configurable in workspace.json):
//   workspace.json      schema_version, file names, configs, rater roster
//   dataset.jsonl       one passage per line, annotations nested
//   annotations.jsonl   optional extra annotation records (e.g. extraction output)
//   judgments.jsonl     append-only judgment log
//   results/            exported CSVs and manifest.json

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "fcm/analysis.hpp"
#include "fcm/core.hpp"
#include "fcm/edge_metrics.hpp"
#include "fcm/elo.hpp"

namespace fcm {

inline constexpr int kSchemaVersion = 1;

// ---- record codecs ---------------------------------------------------------

nlohmann::json edge_to_json(const CausalEdge& edge);
nlohmann::json annotation_to_json(const Annotation& annotation);  // without passage_id
nlohmann::json judgment_to_json(const Judgment& judgment);
Judgment judgment_from_json(const nlohmann::json& record);
nlohmann::json measure_to_json(const EdgeMetricConfig& config);
EdgeMetricConfig measure_from_json(const nlohmann::json& record);

// ---- datasets --------------------------------------------------------------

// Each line: {"passage_id", "text", "provenance"?, "split"?, "annotations"?: [
//   {"annotator_id", "origin"?, "edges": [{"source","target","direction","weight"?}]}],
//   "schema_version"?}. Blank lines are ignored.
// Throws SchemaMismatch on a foreign schema_version and ValidationError
// ("line N: reason") on malformed or invalid records.
Dataset parse_dataset(std::istream& in);
Dataset load_dataset(const std::filesystem::path& path);

// Standalone annotation records: {"passage_id", "annotator_id", "origin"?, "edges"}.
// Each is added to `dataset`; same errors as parse_dataset.
void parse_annotations(std::istream& in, Dataset& dataset);
void load_annotations(const std::filesystem::path& path, Dataset& dataset);

// Annotations from either record shape (standalone records, or passage records
// with nested annotations), without a dataset to check passages against.
std::vector<Annotation> parse_annotation_records(std::istream& in);
std::vector<Annotation> load_annotation_records(const std::filesystem::path& path);

void write_dataset(std::ostream& out, const Dataset& dataset);
// Writes to a temporary file and renames it into place. Throws StorageError.
void save_dataset(const Dataset& dataset, const std::filesystem::path& path);
void save_annotations(const std::vector<Annotation>& annotations,
                      const std::filesystem::path& path);

// ---- judgment log ----------------------------------------------------------

// Records in file order. A missing file is an empty log. A final line without
// a trailing newline is a torn write and is skipped.
std::vector<Judgment> load_judgments(const std::filesystem::path& path);

enum class AppendStatus { New, Duplicate };

// Append-only, single-writer log. Appends are serialized by an internal mutex
// and fsync'd before acknowledgment. Idempotent on judgment_id.
class JudgmentLog {
 public:
  // Loads existing records and truncates a torn final line. Throws StorageError.
  explicit JudgmentLog(std::filesystem::path path);

  // Throws ValidationError/SelfRating for invalid judgments, StorageError on I/O.
  AppendStatus append(const Judgment& judgment);

  std::vector<Judgment> snapshot() const;
  std::vector<Judgment> snapshot_for(const std::string& passage_id) const;
  bool contains(const std::string& judgment_id) const;
  std::size_t size() const;
  const std::filesystem::path& path() const noexcept { return path_; }

 private:
  std::filesystem::path path_;
  mutable std::mutex mutex_;
  std::vector<Judgment> records_;
  std::set<std::string> ids_;
};

// ---- workspace -------------------------------------------------------------

// Default rater guidelines, highest priority first, and the tie-break rule.
std::vector<std::string> default_guidelines();
std::string default_conflict_rule();

struct WorkspaceConfig {
  int schema_version = kSchemaVersion;
  std::string dataset_file = "dataset.jsonl";
  std::string annotations_file = "annotations.jsonl";
  std::string judgment_log = "judgments.jsonl";
  std::string results_dir = "results";
  TournamentConfig tournament;
  SchedulerConfig scheduler;
  EdgeMetricConfig measure;
  std::vector<Rater> raters;
  std::vector<std::string> guidelines = default_guidelines();
  std::string conflict_rule = default_conflict_rule();

  // Throws InvalidConfig.
  void validate() const;
};

nlohmann::json workspace_config_to_json(const WorkspaceConfig& config);
// Throws SchemaMismatch or InvalidConfig.
WorkspaceConfig workspace_config_from_json(const nlohmann::json& record);

class Workspace {
 public:
  static constexpr const char* kDescriptor = "workspace.json";

  // Reads root/workspace.json. Throws StorageError when absent.
  static Workspace open(const std::filesystem::path& root);
  // Creates root and writes the descriptor. Throws StorageError.
  static Workspace create(const std::filesystem::path& root, WorkspaceConfig config = {});

  const std::filesystem::path& root() const noexcept { return root_; }
  const WorkspaceConfig& config() const noexcept { return config_; }
  WorkspaceConfig& mutable_config() noexcept { return config_; }
  void save_config() const;

  std::filesystem::path dataset_path() const { return root_ / config_.dataset_file; }
  std::filesystem::path annotations_path() const { return root_ / config_.annotations_file; }
  std::filesystem::path judgment_log_path() const { return root_ / config_.judgment_log; }
  std::filesystem::path results_path() const { return root_ / config_.results_dir; }

  // Dataset file plus the annotations file when present.
  Dataset load_dataset() const;
  std::vector<Judgment> load_judgments() const;

 private:
  std::filesystem::path root_;
  WorkspaceConfig config_;
};

// ---- export ----------------------------------------------------------------

using Cell = std::variant<std::string, double, std::int64_t, std::monostate>;

struct ResultTable {
  std::string name;  // file stem; written as <name>.csv
  std::vector<std::string> columns;
  std::vector<std::vector<Cell>> rows;
};

// Fixed 6-decimal text; "-0.000000" is written as "0.000000", empty cells as "".
std::string format_cell(const Cell& cell);
void write_csv(std::ostream& out, const ResultTable& table);

// One row per labelled summary.
ResultTable summary_table(
    const std::string& name,
    const std::vector<std::pair<std::string, CorrelationSummary>>& summaries);
// Long format: label, passage_id, rho.
ResultTable per_passage_table(
    const std::string& name,
    const std::vector<std::pair<std::string, CorrelationSummary>>& summaries);

struct ExportedFile {
  std::string name;
  std::string sha256;
  std::size_t rows = 0;
};

struct ExportManifest {
  std::vector<ExportedFile> files;
  std::string config_hash;
  std::uint64_t seed = 0;
};

std::string sha256_hex(const std::string& bytes);

// Writes every table plus manifest.json. Output depends only on the arguments.
// Throws StorageError.
ExportManifest export_results(const std::vector<ResultTable>& tables,
                              const std::filesystem::path& directory,
                              const nlohmann::json& config, std::uint64_t seed);

}  // namespace fcm
