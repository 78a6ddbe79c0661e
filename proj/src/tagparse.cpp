#include "vitaudit/tagparse.hpp"

#include <algorithm>
#include <array>

#include "vitaudit/text.hpp"

namespace vitaudit {
namespace {

struct TagToken {
  std::string_view token;
  SegmentKind kind;
  bool open;
};

constexpr std::array<TagToken, 4> kTokens{{
    {kInferOpen, SegmentKind::Infer, true},
    {kInferClose, SegmentKind::Infer, false},
    {kKnowOpen, SegmentKind::Know, true},
    {kKnowClose, SegmentKind::Know, false},
}};

const TagToken* match_token(std::string_view text, std::size_t pos) {
  for (const auto& t : kTokens) {
    if (text.substr(pos, t.token.size()) == t.token) return &t;
  }
  return nullptr;
}

void push_segment(std::vector<Segment>& out, SegmentKind kind, std::string_view text) {
  if (text.empty()) return;
  if (kind == SegmentKind::Plain && !out.empty() && out.back().kind == SegmentKind::Plain) {
    out.back().text.append(text);
    return;
  }
  out.push_back(Segment{kind, std::string(text)});
}

std::string_view open_token(SegmentKind k) {
  return k == SegmentKind::Infer ? kInferOpen : kKnowOpen;
}

std::string_view close_token(SegmentKind k) {
  return k == SegmentKind::Infer ? kInferClose : kKnowClose;
}

}  // namespace

std::string_view to_string(SegmentKind k) {
  switch (k) {
    case SegmentKind::Plain: return "plain";
    case SegmentKind::Infer: return "infer";
    case SegmentKind::Know: return "know";
  }
  return "plain";
}

AnnotatedResponse AnnotatedResponse::plain(std::string text) {
  AnnotatedResponse a;
  if (!text.empty()) a.segments.push_back(Segment{SegmentKind::Plain, std::move(text)});
  return a;
}

PrefixMissingError::PrefixMissingError(std::string prefix, std::string excerpt)
    : std::runtime_error("expected output to start with '" + prefix + "', got: \"" + excerpt + "\""),
      prefix_(std::move(prefix)),
      excerpt_(std::move(excerpt)) {}

AnnotatedResponse parse_annotated(std::string_view text) {
  AnnotatedResponse out;
  std::optional<SegmentKind> open_kind;
  std::size_t open_at = 0;
  std::size_t seg_start = 0;
  std::size_t pos = 0;

  while (pos < text.size()) {
    const auto lt = text.find('<', pos);
    if (lt == std::string_view::npos) break;
    const TagToken* tok = match_token(text, lt);
    if (tok == nullptr) {
      pos = lt + 1;
      continue;
    }
    if (tok->open) {
      if (open_kind) {
        throw TagParseError(TagParseError::Kind::Nested, lt,
                            "nested tag " + std::string(tok->token) + " at byte " + std::to_string(lt) +
                                " inside " + std::string(open_token(*open_kind)) + " opened at byte " +
                                std::to_string(open_at));
      }
      push_segment(out.segments, SegmentKind::Plain, text.substr(seg_start, lt - seg_start));
      open_kind = tok->kind;
      open_at = lt;
    } else {
      if (!open_kind) {
        throw TagParseError(TagParseError::Kind::Unbalanced, lt,
                            "closing tag " + std::string(tok->token) + " at byte " + std::to_string(lt) +
                                " has no matching opening tag");
      }
      if (*open_kind != tok->kind) {
        throw TagParseError(TagParseError::Kind::Unbalanced, lt,
                            "mismatched tags: " + std::string(tok->token) + " at byte " + std::to_string(lt) +
                                " would close " + std::string(open_token(*open_kind)) + " opened at byte " +
                                std::to_string(open_at));
      }
      push_segment(out.segments, *open_kind, text.substr(seg_start, lt - seg_start));
      open_kind.reset();
    }
    pos = lt + tok->token.size();
    seg_start = pos;
  }

  if (open_kind) {
    throw TagParseError(TagParseError::Kind::Unbalanced, open_at,
                        std::string(open_token(*open_kind)) + " opened at byte " + std::to_string(open_at) +
                            " is never closed");
  }
  push_segment(out.segments, SegmentKind::Plain, text.substr(seg_start));
  return out;
}

std::string serialize(const AnnotatedResponse& a) {
  std::string out;
  for (const auto& s : a.segments) {
    if (s.kind == SegmentKind::Plain) {
      out += s.text;
    } else {
      out += open_token(s.kind);
      out += s.text;
      out += close_token(s.kind);
    }
  }
  return out;
}

std::string strip_tags(const AnnotatedResponse& a) {
  std::string out;
  for (const auto& s : a.segments) out += s.text;
  return out;
}

bool contains_tag_token(std::string_view s) {
  return std::any_of(kTokens.begin(), kTokens.end(),
                     [&](const TagToken& t) { return s.find(t.token) != std::string_view::npos; });
}

std::vector<std::string> segments_of_kind(const AnnotatedResponse& a, SegmentKind k) {
  std::vector<std::string> out;
  for (const auto& s : a.segments) {
    if (s.kind == k) out.push_back(s.text);
  }
  return out;
}

bool has_segments_of_kind(const AnnotatedResponse& a, SegmentKind k) {
  return std::any_of(a.segments.begin(), a.segments.end(), [k](const Segment& s) { return s.kind == k; });
}

PreservationReport verify_word_preservation(std::string_view original, const AnnotatedResponse& annotated) {
  const std::string stripped = strip_tags(annotated);
  const auto expected = text::split_words(original);
  const auto actual = text::split_words(stripped);

  PreservationReport report;
  const std::size_t common = std::min(expected.size(), actual.size());
  for (std::size_t i = 0; i < common; ++i) {
    if (expected[i] != actual[i]) {
      report.pass = false;
      report.first_divergence = i;
      report.expected_token = std::string(expected[i]);
      report.actual_token = std::string(actual[i]);
      return report;
    }
  }
  if (expected.size() != actual.size()) {
    report.pass = false;
    report.first_divergence = common;
    if (common < expected.size()) report.expected_token = std::string(expected[common]);
    if (common < actual.size()) report.actual_token = std::string(actual[common]);
  }
  return report;
}

std::string strip_required_prefix(std::string_view text, std::string_view prefix) {
  const auto body = text::trim_left(text);
  if (body.substr(0, prefix.size()) != prefix) {
    throw PrefixMissingError(std::string(prefix), text::utf8_prefix(text, 80));
  }
  return std::string(text::trim(body.substr(prefix.size())));
}

}  // namespace vitaudit
