#pragma once

// Controlled defect injection for benchmark construction: content
// analysis, cascaded error selection and guided rewriting, with labels.

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "vitaudit/backend.hpp"
#include "vitaudit/corpus.hpp"

namespace vitaudit {

enum class ErrorCategory { Consistency, Reasoning, Knowledge };

inline constexpr std::array<ErrorCategory, 3> kAllCategories{ErrorCategory::Consistency, ErrorCategory::Reasoning,
                                                             ErrorCategory::Knowledge};

std::string_view to_string(ErrorCategory c);
std::optional<ErrorCategory> parse_category(std::string_view s);

struct ErrorSubtype {
  std::string code;
  std::string name;
  std::string description;
  std::string instruction;
};

/// Defect catalogue. Codes and their order are fixed; descriptions and
/// rewrite instructions come from a JSON data file.
class ErrorTaxonomy {
 public:
  /// The catalogue shipped in data/taxonomy.json, compiled in.
  static const ErrorTaxonomy& builtin();
  static ErrorTaxonomy load(const std::filesystem::path& path);
  /// Throws std::invalid_argument when codes are missing, extra, out of
  /// order, or lack an instruction.
  static ErrorTaxonomy parse(std::string_view json_text);

  const std::string& version() const { return version_; }
  std::span<const ErrorSubtype> subtypes(ErrorCategory c) const;
  const ErrorSubtype* find(std::string_view code) const;
  std::optional<ErrorCategory> category_of(std::string_view code) const;

  /// One "code: description" line per subtype of `c`, in catalogue order.
  std::string options_text(ErrorCategory c) const;

 private:
  std::string version_;
  std::array<std::vector<ErrorSubtype>, 3> by_category_;
};

struct ContentAnalysis {
  bool contains_reasoning = false;
  bool contains_knowledge = false;
  friend bool operator==(const ContentAnalysis&, const ContentAnalysis&) = default;
};

class InjectionError : public std::runtime_error {
 public:
  InjectionError(std::string stage, const std::string& cause)
      : std::runtime_error(stage + ": " + cause), stage_(std::move(stage)) {}
  /// "analysis" | "selection" | "rewrite"
  const std::string& stage() const noexcept { return stage_; }

 private:
  std::string stage_;
};

/// First balanced {...} in `text` that parses as a JSON object.
std::optional<nlohmann::json> extract_json_object(std::string_view text);

/// Throws InjectionError("analysis", ...) when no object is found or a key
/// is missing or not a boolean.
ContentAnalysis parse_content_analysis(std::string_view completion);

ContentAnalysis analyze_content(std::string_view response, Backend& backend);

/// Per-sample uniform stream in [0, 1), derived from (seed, sample id) so
/// results do not depend on processing order.
class SampleRng {
 public:
  SampleRng(std::uint64_t seed, std::string_view sample_id);
  double uniform();

 private:
  std::mt19937_64 engine_;
};

/// The uniform draws behind one injection decision.
struct InjectionDraws {
  double partition = 0;       // challenge iff < challenge_fraction
  double knowledge_gate = 0;  // knowledge iff flagged and < 0.8
  double reasoning_gate = 0;  // reasoning iff flagged and < 0.6
  double subtype = 0;         // uniform subtype index where needed

  static InjectionDraws draw(SampleRng& rng);
  friend bool operator==(const InjectionDraws&, const InjectionDraws&) = default;
};

inline constexpr double kKnowledgeGate = 0.8;
inline constexpr double kReasoningGate = 0.6;

/// Knowledge is tried first, then reasoning, each with its own draw;
/// consistency otherwise.
ErrorCategory choose_category(const ContentAnalysis& a, const InjectionDraws& d);

/// floor(u * n) clamped to n - 1.
std::size_t uniform_index(double u, std::size_t n);

struct ErrorSelection {
  ErrorCategory category = ErrorCategory::Consistency;
  std::string subtype_code;
  /// The model's subtype answer was unusable and a uniform pick was made.
  bool subtype_fallback = false;
  std::string raw;  // selection completion, "" for consistency
};

/// Code named by a selection completion when it belongs to `category`: a
/// JSON answer, a bare code, or prose that names exactly one code.
std::optional<std::string> parse_subtype_choice(std::string_view completion, const ErrorTaxonomy& taxonomy,
                                                ErrorCategory category);

ErrorSelection select_error(const ContentAnalysis& analysis, const InjectionDraws& draws, std::string_view text,
                            const ErrorTaxonomy& taxonomy, Backend& backend);

/// Removes "Rewritten Text:"-style preambles and wrapping quotes.
std::string strip_rewrite_wrappers(std::string_view completion);

struct DefectResult {
  std::string text;
  int attempts = 0;
};

/// Rewrites `sample.response` with the subtype's instruction. Throws
/// InjectionError("rewrite", ...) when every attempt is empty or unchanged.
DefectResult inject_defect(const Sample& sample, const std::string& subtype_code, const ErrorTaxonomy& taxonomy,
                           Backend& backend);

struct InjectionRecord {
  std::string sample_id;
  std::string original_response;
  std::string corrupted_response;
  ErrorCategory category = ErrorCategory::Consistency;
  std::string subtype_code;
  ContentAnalysis analysis;
  InjectionDraws draws;
  bool subtype_fallback = false;
  int rewrite_attempts = 0;
};

struct BenchmarkOptions {
  double challenge_fraction = 5.0 / 6.0;
  std::uint64_t seed = 0;
};

/// One output line of a benchmark corpus.
struct BenchmarkEntry {
  Sample sample;  // label set; response is the corrupted text when injected
  InjectionDraws draws;
  std::optional<InjectionRecord> injection;
  /// Set when the sample was drawn for injection but the pipeline failed.
  std::optional<std::string> revert_reason;
};

/// Partitions one sample and, when drawn for the challenge set, runs all
/// three stages. Never throws for per-sample failures; those revert.
BenchmarkEntry inject_sample(const Sample& sample, const BenchmarkOptions& options, const ErrorTaxonomy& taxonomy,
                             Backend& backend);

/// inject_sample over a corpus with up to `concurrency` samples in flight.
/// Output order equals input order.
std::vector<BenchmarkEntry> build_benchmark(std::span<const Sample> corpus, const BenchmarkOptions& options,
                                            const ErrorTaxonomy& taxonomy, Backend& backend, int concurrency = 1);

/// Corpus line plus {"label","category","subtype","original_response"} and
/// an "injection" object with the analysis and draws.
ojson to_json(const BenchmarkEntry& e);

}  // namespace vitaudit
