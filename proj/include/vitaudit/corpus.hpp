#pragma once

// Line-delimited JSON corpora and audit records.
//
// Input lines:  {"id", "image", "instruction", "response"} plus, for
//               benchmark files, {"label", "category", "subtype",
//               "original_response", ...}.
// Output lines: {"id", "s_l", "s_k", "s_v", "overall", "explanations":
//               {"logic", "knowledge", "vision"}, "annotated_response",
//               "visual_summary", "provenance"} plus label passthrough.

#include <array>
#include <filesystem>
#include <fstream>
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <vector>

#include <nlohmann/json.hpp>

#include "vitaudit/scores.hpp"

namespace vitaudit {

using ojson = nlohmann::ordered_json;

/// Benchmark label carried by corpus lines produced by the inject command.
struct BenchmarkLabel {
  std::string label;  // "pristine" | "injected"
  std::optional<std::string> category;
  std::optional<std::string> subtype;
  /// Injection was attempted and failed; the line holds the original text.
  bool reverted = false;

  bool injected() const { return label == "injected"; }
  friend bool operator==(const BenchmarkLabel&, const BenchmarkLabel&) = default;
};

struct Sample {
  std::string id;
  std::string image_ref;
  std::string instruction;
  std::string response;
  std::optional<BenchmarkLabel> label;

  friend bool operator==(const Sample&, const Sample&) = default;
};

struct AuditRecord {
  std::string sample_id;
  ScoreVector scores;
  /// Indexed by Axis. Present exactly when the axis was scored, either by
  /// the backend or by a default rule.
  std::array<std::optional<std::string>, 3> explanations;
  std::string annotated_response;
  std::string visual_summary;
  ojson provenance = ojson::object();
  std::optional<BenchmarkLabel> label;

  const std::optional<std::string>& explanation(Axis a) const {
    return explanations[static_cast<std::size_t>(a)];
  }

  friend bool operator==(const AuditRecord&, const AuditRecord&) = default;
};

/// Error tied to a file position. line is 1-based; 0 when not applicable.
class CorpusError : public std::runtime_error {
 public:
  CorpusError(std::filesystem::path path, std::size_t line, const std::string& message);

  const std::filesystem::path& path() const noexcept { return path_; }
  std::size_t line() const noexcept { return line_; }

 private:
  std::filesystem::path path_;
  std::size_t line_;
};

ojson to_json(const Sample& s);
/// Throws std::invalid_argument describing the first problem found.
Sample sample_from_json(const nlohmann::json& j);

ojson to_json(const AuditRecord& r);
AuditRecord audit_record_from_json(const nlohmann::json& j);

/// Streams Samples from a corpus file, one per call to next(). Validates
/// every line and rejects duplicate ids.
class CorpusReader {
 public:
  explicit CorpusReader(const std::filesystem::path& path);

  /// std::nullopt at end of file. Throws CorpusError for malformed lines.
  std::optional<Sample> next();

  const std::filesystem::path& path() const { return path_; }
  std::size_t line_number() const { return line_no_; }

 private:
  std::filesystem::path path_;
  std::ifstream in_;
  std::size_t line_no_ = 0;
  std::unordered_set<std::string> seen_;
};

CorpusReader load_corpus(const std::filesystem::path& path);

std::vector<Sample> read_corpus(const std::filesystem::path& path);

/// Reads audit records. With `tolerate_truncated_tail`, a malformed final
/// line (an interrupted write) is skipped instead of reported.
std::vector<AuditRecord> read_records(const std::filesystem::path& path, bool tolerate_truncated_tail = false);

/// Appends one JSON object per line. Output is written to the sibling
/// "<path>.partial" and moved into place by commit(). A writer destroyed
/// without commit() leaves the target untouched and keeps the partial file,
/// which a resumed run picks up.
class JsonlWriter {
 public:
  explicit JsonlWriter(std::filesystem::path path);
  ~JsonlWriter();

  JsonlWriter(const JsonlWriter&) = delete;
  JsonlWriter& operator=(const JsonlWriter&) = delete;

  void write(const ojson& line);
  void flush();
  void commit();
  /// Removes the partial file without touching the target.
  void discard();

  const std::filesystem::path& partial_path() const { return tmp_; }

  std::size_t lines_written() const { return count_; }

 private:
  std::filesystem::path path_;
  std::filesystem::path tmp_;
  std::ofstream out_;
  std::size_t count_ = 0;
  bool committed_ = false;
};

void write_records(const std::vector<AuditRecord>& records, const std::filesystem::path& path);

/// Writes `j` pretty-printed followed by a newline, replacing `path`.
void write_json_file(const ojson& j, const std::filesystem::path& path);

/// Reads each non-blank line of a JSONL file, calling `fn(json, line_no)`.
template <typename Fn>
void for_each_jsonl_line(const std::filesystem::path& path, Fn&& fn);

}  // namespace vitaudit

#include "vitaudit/detail/jsonl.ipp"
