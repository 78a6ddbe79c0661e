#include "vitaudit/assess.hpp"

#include <cctype>
#include <future>

#include "vitaudit/prompts.hpp"
#include "vitaudit/text.hpp"

namespace vitaudit {
namespace {

struct ScoreMatch {
  std::size_t begin;
  std::size_t end;
  std::string digits;
};

bool iequals_at(std::string_view s, std::size_t pos, std::string_view word) {
  if (pos + word.size() > s.size()) return false;
  for (std::size_t i = 0; i < word.size(); ++i) {
    if (std::tolower(static_cast<unsigned char>(s[pos + i])) != word[i]) return false;
  }
  return true;
}

bool is_letter(char c) { return std::isalpha(static_cast<unsigned char>(c)) != 0; }

std::size_t skip(std::string_view s, std::size_t i, std::string_view chars) {
  while (i < s.size() && chars.find(s[i]) != std::string_view::npos) ++i;
  return i;
}

// Position just past "<label>" followed by optional markup and a colon.
std::optional<std::pair<std::size_t, std::size_t>> find_label(std::string_view s, std::string_view label,
                                                              std::size_t from = 0) {
  for (std::size_t i = from; i < s.size(); ++i) {
    if (!iequals_at(s, i, label)) continue;
    if (i > 0 && is_letter(s[i - 1])) continue;
    std::size_t j = skip(s, i + label.size(), " \t*_");
    if (j < s.size() && s[j] == ':') return std::make_pair(i, j + 1);
  }
  return std::nullopt;
}

std::optional<ScoreMatch> find_score(std::string_view s) {
  std::size_t from = 0;
  while (auto label = find_label(s, "score", from)) {
    const auto [begin, after_colon] = *label;
    std::size_t j = skip(s, after_colon, " \t*_[");
    std::size_t k = j;
    if (k < s.size() && (s[k] == '-' || s[k] == '+')) ++k;
    const std::size_t digits_start = k;
    while (k < s.size() && std::isdigit(static_cast<unsigned char>(s[k]))) ++k;
    if (k > digits_start) {
      std::size_t end = skip(s, k, "*_]");
      return ScoreMatch{begin, end, std::string(s.substr(j, k - j))};
    }
    from = after_colon;
  }
  return std::nullopt;
}

std::string clean(std::string_view s) {
  constexpr std::string_view junk = " \t\r\n*-#_";
  const auto b = s.find_first_not_of(junk);
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(junk);
  return std::string(text::trim(s.substr(b, e - b + 1)));
}

Judgment judged(Backend& backend, std::string prompt, std::optional<std::string> image) {
  const ChatMessage msg = ChatMessage::user(std::move(prompt), std::move(image));
  auto completion = backend.complete(std::span(&msg, 1));
  auto j = parse_judgment(completion.text);
  j.raw = std::move(completion.text);
  return j;
}

}  // namespace

Judgment parse_judgment(std::string_view completion) {
  const auto m = find_score(completion);
  if (!m) {
    throw JudgmentParseError(JudgmentParseError::Kind::NoScore,
                             "no 'Score: <integer>' in judgment: \"" + text::utf8_prefix(completion, 80) + "\"");
  }
  // A decimal such as "4.5" is not an integer score.
  if (m->end < completion.size() && completion[m->end] == '.' && m->end + 1 < completion.size() &&
      std::isdigit(static_cast<unsigned char>(completion[m->end + 1]))) {
    throw JudgmentParseError(JudgmentParseError::Kind::NoScore,
                             "non-integer score in judgment: \"" + text::utf8_prefix(completion, 80) + "\"");
  }
  int score = 0;
  try {
    score = std::stoi(m->digits);
  } catch (const std::out_of_range&) {
    throw JudgmentParseError(JudgmentParseError::Kind::OutOfRange, "score " + m->digits + " outside 1..5");
  }
  if (score < 1 || score > 5) {
    throw JudgmentParseError(JudgmentParseError::Kind::OutOfRange,
                             "score " + std::to_string(score) + " outside 1..5", score);
  }

  Judgment j;
  j.score = score;
  if (const auto after = find_label(completion, "explanation", m->end)) {
    j.explanation = clean(completion.substr(after->second));
  } else if (const auto before = find_label(completion.substr(0, m->begin), "explanation")) {
    j.explanation = clean(completion.substr(before->second, m->begin - before->second));
  } else {
    const auto head = clean(completion.substr(0, m->begin));
    const auto tail = clean(completion.substr(m->end));
    j.explanation = head.empty() ? tail : tail.empty() ? head : head + "\n" + tail;
  }
  return j;
}

Judgment score_logic(const Sample& sample, const AnnotatedResponse& annotated, Backend& backend) {
  if (!has_segments_of_kind(annotated, SegmentKind::Infer)) {
    return Judgment{kDefaultScore, std::string(kDefaultLogicExplanation), true, {}};
  }
  return judged(backend, prompts::render(prompts::kLogicRubric, {{"text_to_evaluate", serialize(annotated)}}),
                sample.image_ref);
}

Judgment score_knowledge(const Sample&, const AnnotatedResponse& annotated, Backend& backend) {
  if (!has_segments_of_kind(annotated, SegmentKind::Know)) {
    return Judgment{kDefaultScore, std::string(kDefaultKnowledgeExplanation), true, {}};
  }
  return judged(backend, prompts::render(prompts::kKnowledgeRubric, {{"text_to_evaluate", serialize(annotated)}}),
                std::nullopt);
}

Judgment score_vision(const Sample& sample, const std::string& visual_summary, Backend& backend) {
  return judged(backend, prompts::render(prompts::kVisionRubric, {{"text_input", visual_summary}}), sample.image_ref);
}

void require_vision_capable(const Backend& backend, const AxisSet& axes) {
  if ((axes.logic || axes.vision) && !backend.profile().vision) {
    throw std::invalid_argument("backend '" + backend.profile().name +
                                "' is not vision-capable; the logic and vision axes need the image");
  }
}

Assessment assess(const DecomposedSample& decomposed, const Sample& sample, Backend& backend,
                  const AssessOptions& options) {
  require_vision_capable(backend, options.axes);

  auto run = [&](Axis axis) -> Judgment {
    switch (axis) {
      case Axis::Logic: return score_logic(sample, decomposed.annotated, backend);
      case Axis::Knowledge: return score_knowledge(sample, decomposed.annotated, backend);
      case Axis::Vision: return score_vision(sample, decomposed.visual_summary, backend);
    }
    throw std::logic_error("unknown axis");
  };

  std::array<std::optional<std::future<Judgment>>, 3> pending;
  for (const Axis a : kAllAxes) {
    if (!options.axes.contains(a)) continue;
    pending[static_cast<std::size_t>(a)] =
        std::async(options.concurrent_axes ? std::launch::async : std::launch::deferred, run, a);
  }

  Assessment out;
  std::optional<AxisError> first_error;
  for (const Axis a : kAllAxes) {
    auto& f = pending[static_cast<std::size_t>(a)];
    if (!f) continue;
    try {
      auto j = f->get();
      out.scores.score(a) = j.score;
      out.judgments[static_cast<std::size_t>(a)] = std::move(j);
    } catch (const std::exception& e) {
      if (!first_error) first_error.emplace(a, e.what());
    }
  }
  if (first_error) throw *first_error;
  out.scores.overall = aggregate(out.scores, options.weights);
  return out;
}

}  // namespace vitaudit
