#include "vitaudit/decompose.hpp"

#include <algorithm>
#include <cctype>

#include "vitaudit/prompts.hpp"
#include "vitaudit/text.hpp"

namespace vitaudit {
namespace {

constexpr int kMaxAttempts = kStepRetries + 1;

std::string call(Backend& backend, std::string prompt) {
  const ChatMessage msg = ChatMessage::user(std::move(prompt));
  return backend.complete(std::span(&msg, 1)).text;
}

bool has_word_content(std::string_view s) {
  return std::any_of(s.begin(), s.end(), [](char c) {
    const auto u = static_cast<unsigned char>(c);
    return u >= 0x80 || std::isalnum(u);
  });
}

std::string trim_punct(std::string_view s) {
  const auto edge = [](char c) { return std::ispunct(static_cast<unsigned char>(c)) || c == ' '; };
  while (!s.empty() && edge(s.front())) s.remove_prefix(1);
  while (!s.empty() && edge(s.back())) s.remove_suffix(1);
  return std::string(s);
}

}  // namespace

TaggingResult semantic_tagging(const Sample& sample, Backend& backend) {
  TaggingResult out;
  const auto prompt = prompts::render(prompts::kSemanticTagging, {{"response", sample.response}});
  for (int attempt = 1; attempt <= kMaxAttempts; ++attempt) {
    out.attempts = attempt;
    const std::string raw = call(backend, prompt);
    try {
      const auto body = strip_required_prefix(raw, kMarkedResponsePrefix);
      auto annotated = parse_annotated(body);
      const auto report = verify_word_preservation(sample.response, annotated);
      if (!report.pass) {
        out.rejections.push_back("word mismatch at token " + std::to_string(*report.first_divergence) +
                                 ": expected \"" + report.expected_token + "\", got \"" + report.actual_token +
                                 "\"");
        continue;
      }
      out.annotated = std::move(annotated);
      out.raw = raw;
      return out;
    } catch (const PrefixMissingError& e) {
      out.rejections.push_back(e.what());
    } catch (const TagParseError& e) {
      out.rejections.push_back(e.what());
    }
  }
  out.annotated = AnnotatedResponse::plain(sample.response);
  out.fallback = true;
  return out;
}

DistillationResult visual_distillation(const Sample& sample, const AnnotatedResponse& annotated, Backend& backend) {
  DistillationResult out;
  if (!has_segments_of_kind(annotated, SegmentKind::Infer) && !has_segments_of_kind(annotated, SegmentKind::Know)) {
    out.draft = strip_tags(annotated);
    return out;
  }

  const auto prompt = prompts::render(prompts::kVisualDistillation,
                                      {{"instruction", sample.instruction}, {"marked_response", serialize(annotated)}});
  std::string last_error;
  for (int attempt = 1; attempt <= kMaxAttempts; ++attempt) {
    out.attempts = attempt;
    const std::string raw = call(backend, prompt);
    std::string draft;
    try {
      draft = strip_required_prefix(raw, kCleanedResponsePrefix);
    } catch (const PrefixMissingError& e) {
      last_error = e.what();
      continue;
    }
    if (contains_tag_token(draft)) {
      last_error = "residual tags in distilled draft";
      continue;
    }
    const auto normalized_draft = text::normalize_whitespace(draft);
    for (const auto& plain : segments_of_kind(annotated, SegmentKind::Plain)) {
      // punctuation next to a removed span may legitimately change
      const auto needle = trim_punct(text::normalize_whitespace(plain));
      if (!has_word_content(needle)) continue;
      if (normalized_draft.find(needle) == std::string::npos) {
        out.warnings.push_back("untagged text not preserved in draft: \"" + text::utf8_prefix(needle, 80) + "\"");
      }
    }
    out.draft = std::move(draft);
    out.raw = raw;
    return out;
  }
  throw StepError(std::string(kStepDistillation), last_error, out.attempts);
}

SynthesisResult fluent_synthesis(const Sample& sample, const std::string& draft, Backend& backend) {
  SynthesisResult out;
  if (text::trim(draft).empty()) return out;

  const auto prompt =
      prompts::render(prompts::kFluentSynthesis, {{"instruction", sample.instruction}, {"cleaned_response", draft}});
  std::string last_error;
  for (int attempt = 1; attempt <= kMaxAttempts; ++attempt) {
    out.attempts = attempt;
    const std::string raw = call(backend, prompt);
    try {
      auto summary = strip_required_prefix(raw, kVisualSummaryPrefix);
      if (summary.empty()) {
        last_error = "empty completion after prefix";
        continue;
      }
      out.summary = std::move(summary);
      out.raw = raw;
      return out;
    } catch (const PrefixMissingError& e) {
      last_error = e.what();
    }
  }
  throw StepError(std::string(kStepSynthesis), last_error, out.attempts);
}

DecomposedSample decompose(const Sample& sample, Backend& backend) {
  DecomposedSample d;
  d.sample_id = sample.id;

  std::string_view step = kStepTagging;
  try {
    auto tagged = semantic_tagging(sample, backend);
    d.annotated = std::move(tagged.annotated);
    d.attempts.tagging = tagged.attempts;
    d.tagging_fallback = tagged.fallback;
    d.raw_tagging = std::move(tagged.raw);
    if (tagged.fallback) {
      d.warnings.push_back("tagging fell back to untagged response after " + std::to_string(tagged.attempts) +
                           " attempts; last rejection: " + tagged.rejections.back());
    }

    step = kStepDistillation;
    auto distilled = visual_distillation(sample, d.annotated, backend);
    d.draft = std::move(distilled.draft);
    d.attempts.distillation = distilled.attempts;
    d.raw_distillation = std::move(distilled.raw);
    for (auto& w : distilled.warnings) d.warnings.push_back(std::move(w));

    step = kStepSynthesis;
    auto synthesized = fluent_synthesis(sample, d.draft, backend);
    d.visual_summary = std::move(synthesized.summary);
    d.attempts.synthesis = synthesized.attempts;
    d.raw_synthesis = std::move(synthesized.raw);
  } catch (const StepError&) {
    throw;
  } catch (const BackendError& e) {
    throw StepError(std::string(step), std::string("backend: ") + e.what(), e.attempts());
  }
  return d;
}

ojson to_json(const DecomposedSample& d) {
  ojson j;
  j["id"] = d.sample_id;
  j["annotated"] = serialize(d.annotated);
  j["draft"] = d.draft;
  j["visual_summary"] = d.visual_summary;
  j["attempts"] = {{"tagging", d.attempts.tagging},
                   {"distillation", d.attempts.distillation},
                   {"synthesis", d.attempts.synthesis}};
  j["tagging_fallback"] = d.tagging_fallback;
  j["warnings"] = d.warnings;
  j["raw"] = {{"tagging", d.raw_tagging}, {"distillation", d.raw_distillation}, {"synthesis", d.raw_synthesis}};
  return j;
}

DecomposedSample decomposed_from_json(const nlohmann::json& j) {
  DecomposedSample d;
  d.sample_id = j.at("id").get<std::string>();
  d.annotated = parse_annotated(j.at("annotated").get<std::string>());
  d.draft = j.at("draft").get<std::string>();
  d.visual_summary = j.at("visual_summary").get<std::string>();
  const auto& a = j.at("attempts");
  d.attempts.tagging = a.value("tagging", 0);
  d.attempts.distillation = a.value("distillation", 0);
  d.attempts.synthesis = a.value("synthesis", 0);
  d.tagging_fallback = j.value("tagging_fallback", false);
  d.warnings = j.value("warnings", std::vector<std::string>{});
  if (const auto raw = j.find("raw"); raw != j.end()) {
    d.raw_tagging = raw->value("tagging", "");
    d.raw_distillation = raw->value("distillation", "");
    d.raw_synthesis = raw->value("synthesis", "");
  }
  if (contains_tag_token(d.draft)) throw std::invalid_argument("persisted draft contains tag tokens");
  return d;
}

}  // namespace vitaudit
