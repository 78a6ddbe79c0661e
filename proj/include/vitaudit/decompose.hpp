#pragma once

// Response decomposition: semantic tagging, visual distillation and fluent
// synthesis, run in that order for each sample. All three steps are
// text-only.

#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "vitaudit/backend.hpp"
#include "vitaudit/corpus.hpp"
#include "vitaudit/tagparse.hpp"

namespace vitaudit {

/// Retries per step after the first attempt.
inline constexpr int kStepRetries = 2;

inline constexpr std::string_view kStepTagging = "tagging";
inline constexpr std::string_view kStepDistillation = "distillation";
inline constexpr std::string_view kStepSynthesis = "synthesis";

struct StepAttempts {
  int tagging = 0;
  int distillation = 0;
  int synthesis = 0;
  friend bool operator==(const StepAttempts&, const StepAttempts&) = default;
};

struct DecomposedSample {
  std::string sample_id;
  AnnotatedResponse annotated;
  std::string draft;
  std::string visual_summary;
  /// Model calls issued per step; 0 when the step was short-circuited.
  StepAttempts attempts;
  /// Tagging never validated and the original text was kept as one Plain
  /// segment.
  bool tagging_fallback = false;
  /// Non-fatal validation findings, e.g. an untagged span that the
  /// distilled draft did not preserve.
  std::vector<std::string> warnings;
  /// Raw accepted completions per step ("" when the step made no call).
  std::string raw_tagging;
  std::string raw_distillation;
  std::string raw_synthesis;

  friend bool operator==(const DecomposedSample&, const DecomposedSample&) = default;
};

/// A step gave up. step() is one of kStep*.
class StepError : public std::runtime_error {
 public:
  StepError(std::string step, const std::string& cause, int attempts)
      : std::runtime_error(step + ": " + cause), step_(std::move(step)), cause_(cause), attempts_(attempts) {}

  const std::string& step() const noexcept { return step_; }
  const std::string& cause() const noexcept { return cause_; }
  int attempts() const noexcept { return attempts_; }

 private:
  std::string step_;
  std::string cause_;
  int attempts_;
};

struct TaggingResult {
  AnnotatedResponse annotated;
  int attempts = 0;
  bool fallback = false;
  std::string raw;
  /// Why each rejected attempt was rejected.
  std::vector<std::string> rejections;
};

/// Tags the response. Output must carry the "Marked Response:" prefix,
/// parse, and preserve the original words; otherwise the step retries and
/// finally falls back to the untagged response. Backend errors propagate.
TaggingResult semantic_tagging(const Sample& sample, Backend& backend);

struct DistillationResult {
  std::string draft;
  int attempts = 0;
  std::string raw;
  std::vector<std::string> warnings;
};

/// Rewrites tagged spans. With no tagged spans the draft is the stripped
/// text and no call is made. Throws StepError when tags survive every
/// attempt or the prefix is missing.
DistillationResult visual_distillation(const Sample& sample, const AnnotatedResponse& annotated, Backend& backend);

struct SynthesisResult {
  std::string summary;
  int attempts = 0;
  std::string raw;
};

/// Rephrases the draft into one paragraph. An empty draft yields an empty
/// summary without a call. Throws StepError on empty output after every
/// attempt.
SynthesisResult fluent_synthesis(const Sample& sample, const std::string& draft, Backend& backend);

/// Runs the three steps. Throws StepError naming the failing step; backend
/// errors are rethrown as StepError too.
DecomposedSample decompose(const Sample& sample, Backend& backend);

/// Persisted line: {"id","annotated","draft","visual_summary","attempts",...}
ojson to_json(const DecomposedSample& d);
DecomposedSample decomposed_from_json(const nlohmann::json& j);

}  // namespace vitaudit
