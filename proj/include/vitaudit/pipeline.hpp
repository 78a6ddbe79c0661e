#pragma once

// Batch orchestration: streams a corpus through a per-sample function with
// bounded concurrency, isolates per-sample failures, resumes interrupted
// runs and writes a manifest next to every output.

#include <cstddef>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "vitaudit/assess.hpp"
#include "vitaudit/backend.hpp"
#include "vitaudit/config.hpp"
#include "vitaudit/corpus.hpp"
#include "vitaudit/decompose.hpp"
#include "vitaudit/inject.hpp"

namespace vitaudit {

std::string tool_version();

struct SampleFailure {
  std::string id;
  std::string step;
  std::string cause;
};

/// Result of one sample: an output line or a failure.
struct SampleOutcome {
  std::optional<ojson> line;
  std::optional<SampleFailure> failure;
};

struct BatchStats {
  std::size_t total = 0;
  std::size_t succeeded = 0;
  std::size_t failed = 0;
  /// Output lines for which `is_defaulted` held.
  std::size_t defaulted = 0;
  /// Lines taken from a previous run by --resume.
  std::size_t reused = 0;
  std::vector<SampleFailure> failures;
};

struct BatchOptions {
  std::filesystem::path input;
  std::filesystem::path output;
  int concurrency = 1;
  /// Reuse lines of "<output>.partial" (or of <output>) keyed by id.
  bool resume = false;
  /// Samples read per scheduling round; 0 picks a default.
  std::size_t chunk = 0;
};

using SampleFn = std::function<SampleOutcome(const Sample&)>;

/// Processes the corpus in file order and writes the successful lines in
/// that order, so the output never depends on concurrency. Per-sample
/// exceptions are recorded as failures with step "internal".
BatchStats run_batch(const BatchOptions& options, const SampleFn& fn,
                     const std::function<bool(const ojson&)>& is_defaulted = {});

/// Resolves a relative file image reference against `root`; URIs and
/// absolute paths pass through.
Sample with_resolved_image(const Sample& s, const std::filesystem::path& root);

struct AuditContext {
  Backend* text = nullptr;    // decomposition
  Backend* vision = nullptr;  // assessment
  AssessOptions assess;
  /// Directory relative image references are resolved against.
  std::filesystem::path image_root;
};

/// Builds the persisted record from a finished decomposition and
/// assessment. Defaulted axes carry their fixed explanation.
AuditRecord make_audit_record(const Sample& sample, const DecomposedSample& d, const Assessment& a,
                              const AuditContext& ctx);

SampleOutcome audit_one(const Sample& sample, const AuditContext& ctx);
SampleOutcome decompose_one(const Sample& sample, Backend& text);
SampleOutcome assess_one(const Sample& sample, const DecomposedSample* decomposed, const AuditContext& ctx);

/// Manifest path for an output file: "<output>.manifest.json".
std::filesystem::path manifest_path(const std::filesystem::path& output);

/// Common manifest fields. Contains no timestamps or machine-specific
/// values so reruns produce identical bytes. Backend profiles and counts
/// are included for batch commands, i.e. when `stats` is given.
ojson make_manifest(std::string_view command, const RunConfig& config, const BatchStats* stats);

ojson failures_json(const std::vector<SampleFailure>& failures);

/// True when the record's provenance lists at least one defaulted axis.
bool record_has_default(const ojson& record_line);

}  // namespace vitaudit
