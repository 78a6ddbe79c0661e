#pragma once

// Annotation grammar for tagged responses: plain text with embedded
// <INFER>...</INFER> and <KNOW>...</KNOW> spans. Tags are upper-case only
// and never nest.

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace vitaudit {

enum class SegmentKind { Plain, Infer, Know };

std::string_view to_string(SegmentKind k);

struct Segment {
  SegmentKind kind = SegmentKind::Plain;
  std::string text;

  friend bool operator==(const Segment&, const Segment&) = default;
};

/// Ordered segments of a tagged response. Instances produced by
/// parse_annotated() are normalized: no empty segments and no two adjacent
/// Plain segments.
struct AnnotatedResponse {
  std::vector<Segment> segments;

  friend bool operator==(const AnnotatedResponse&, const AnnotatedResponse&) = default;

  static AnnotatedResponse plain(std::string text);
};

class TagParseError : public std::runtime_error {
 public:
  enum class Kind { Unbalanced, Nested };

  TagParseError(Kind kind, std::size_t offset, const std::string& what)
      : std::runtime_error(what), kind_(kind), offset_(offset) {}

  Kind kind() const noexcept { return kind_; }
  /// Byte offset of the offending tag token.
  std::size_t offset() const noexcept { return offset_; }

 private:
  Kind kind_;
  std::size_t offset_;
};

class PrefixMissingError : public std::runtime_error {
 public:
  PrefixMissingError(std::string prefix, std::string excerpt);

  const std::string& prefix() const noexcept { return prefix_; }
  /// First 80 characters of the offending output.
  const std::string& excerpt() const noexcept { return excerpt_; }

 private:
  std::string prefix_;
  std::string excerpt_;
};

inline constexpr std::string_view kInferOpen = "<INFER>";
inline constexpr std::string_view kInferClose = "</INFER>";
inline constexpr std::string_view kKnowOpen = "<KNOW>";
inline constexpr std::string_view kKnowClose = "</KNOW>";

inline constexpr std::string_view kMarkedResponsePrefix = "Marked Response:";
inline constexpr std::string_view kCleanedResponsePrefix = "Cleaned Response:";
inline constexpr std::string_view kVisualSummaryPrefix = "Visual Summary:";

/// Throws TagParseError on unbalanced or nested tags. Unknown or
/// lower-case tags are kept as plain text.
AnnotatedResponse parse_annotated(std::string_view text);

/// Re-wraps Infer/Know segments in their tags.
std::string serialize(const AnnotatedResponse& a);

std::string strip_tags(const AnnotatedResponse& a);

/// True when `s` contains any of the four tag tokens.
bool contains_tag_token(std::string_view s);

std::vector<std::string> segments_of_kind(const AnnotatedResponse& a, SegmentKind k);

bool has_segments_of_kind(const AnnotatedResponse& a, SegmentKind k);

struct PreservationReport {
  bool pass = true;
  /// Index of the first differing whitespace-delimited token; when one
  /// sequence is a strict prefix of the other this is the shorter length.
  std::optional<std::size_t> first_divergence;
  std::string expected_token;  // empty when past the end of the original
  std::string actual_token;    // empty when past the end of the annotated text
};

/// Compares the whitespace-delimited token sequences of `original` and
/// strip_tags(annotated).
PreservationReport verify_word_preservation(std::string_view original,
                                            const AnnotatedResponse& annotated);

/// Returns the text following `prefix` (and the whitespace after it),
/// trimmed. Leading whitespace before the prefix is tolerated; matching is
/// case-sensitive. Throws PrefixMissingError.
std::string strip_required_prefix(std::string_view text, std::string_view prefix);

}  // namespace vitaudit
