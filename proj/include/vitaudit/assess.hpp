#pragma once

// Rubric scoring along three axes: logical coherence (INFER spans),
// factual accuracy (KNOW spans) and image-text consistency (visual
// summary).

#include <array>
#include <optional>
#include <stdexcept>
#include <string>

#include "vitaudit/backend.hpp"
#include "vitaudit/corpus.hpp"
#include "vitaudit/decompose.hpp"
#include "vitaudit/scores.hpp"

namespace vitaudit {

/// Score assigned locally when a response has no span to judge.
inline constexpr int kDefaultScore = 2;

inline constexpr std::string_view kDefaultLogicExplanation =
    "No <INFER> segments in the response; default score applied without a model call.";
inline constexpr std::string_view kDefaultKnowledgeExplanation =
    "No <KNOW> segments in the response; default score applied without a model call.";

struct Judgment {
  int score = 0;
  std::string explanation;
  /// Produced by a default rule; no backend call was made.
  bool defaulted = false;
  /// Completion the judgment was parsed from ("" when defaulted).
  std::string raw;

  friend bool operator==(const Judgment&, const Judgment&) = default;
};

class JudgmentParseError : public std::runtime_error {
 public:
  enum class Kind { NoScore, OutOfRange };

  JudgmentParseError(Kind kind, const std::string& what, int value = 0)
      : std::runtime_error(what), kind_(kind), value_(value) {}

  Kind kind() const noexcept { return kind_; }
  /// The parsed score for Kind::OutOfRange.
  int value() const noexcept { return value_; }

 private:
  Kind kind_;
  int value_;
};

/// Finds the first "Score: <int>" and the explanation that goes with it:
/// the body after an "Explanation:" label when there is one, otherwise the
/// remaining text around the score. Scores outside 1..5 are rejected, not
/// clamped.
Judgment parse_judgment(std::string_view completion);

Judgment score_logic(const Sample& sample, const AnnotatedResponse& annotated, Backend& backend);
Judgment score_knowledge(const Sample& sample, const AnnotatedResponse& annotated, Backend& backend);
Judgment score_vision(const Sample& sample, const std::string& visual_summary, Backend& backend);

/// A scorer failed. axis() names it.
class AxisError : public std::runtime_error {
 public:
  AxisError(Axis axis, const std::string& cause)
      : std::runtime_error(std::string(to_string(axis)) + ": " + cause), axis_(axis), cause_(cause) {}

  Axis axis() const noexcept { return axis_; }
  const std::string& cause() const noexcept { return cause_; }

 private:
  Axis axis_;
  std::string cause_;
};

struct AssessOptions {
  AxisSet axes;
  WeightScheme weights;
  /// Run the selected scorers on separate threads.
  bool concurrent_axes = false;
};

struct Assessment {
  ScoreVector scores;
  /// Indexed by Axis; nullopt for axes not selected.
  std::array<std::optional<Judgment>, 3> judgments;

  const std::optional<Judgment>& judgment(Axis a) const { return judgments[static_cast<std::size_t>(a)]; }
};

/// Throws std::invalid_argument when an image-bearing axis is selected and
/// the backend profile is not vision-capable.
void require_vision_capable(const Backend& backend, const AxisSet& axes);

/// Scores the selected axes and aggregates them. Throws AxisError naming
/// the first failing axis (in logic, knowledge, vision order).
Assessment assess(const DecomposedSample& decomposed, const Sample& sample, Backend& backend,
                  const AssessOptions& options = {});

}  // namespace vitaudit
