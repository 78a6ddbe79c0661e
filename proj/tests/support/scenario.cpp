#include "scenario.hpp"

#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "vitaudit/prompts.hpp"
#include "vitaudit/tagparse.hpp"
#include "vitaudit/text.hpp"

namespace vitaudit::testing {
namespace {

struct Piece {
  bool slot = false;
  std::string text;  // literal text or slot name
};

std::vector<Piece> split_template(std::string_view tmpl, const std::vector<std::string>& slots) {
  std::vector<Piece> out{{false, ""}};
  std::size_t i = 0;
  while (i < tmpl.size()) {
    if (tmpl[i] == '{') {
      const auto close = tmpl.find('}', i);
      if (close != std::string_view::npos) {
        const std::string name(tmpl.substr(i + 1, close - i - 1));
        if (std::find(slots.begin(), slots.end(), name) != slots.end()) {
          out.push_back({true, name});
          out.push_back({false, ""});
          i = close + 1;
          continue;
        }
      }
    }
    out.back().text += tmpl[i++];
  }
  return out;
}

std::optional<std::string> opt_string(const nlohmann::json& j, const char* key) {
  const auto it = j.find(key);
  if (it == j.end() || it->is_null()) return std::nullopt;
  return it->get<std::string>();
}

/// Plain segments only, whitespace collapsed.
std::string drop_tagged(std::string_view marked) {
  std::string plain;
  for (const auto& seg : parse_annotated(marked).segments) {
    if (seg.kind == SegmentKind::Plain) plain += seg.text;
  }
  std::string out;
  for (const auto w : text::split_words(plain)) {
    if (w == "." && !out.empty()) {
      out += '.';
      continue;
    }
    if (!out.empty()) out += ' ';
    out += w;
  }
  return out;
}

const std::string kGenericVision =
    "Score: 2\nExplanation: Several assertions in the description are not supported by the image.";
const std::string kGenericJudge = "Score: 3\nExplanation: The claims are plausible but only partly supported.";

}  // namespace

std::optional<std::map<std::string, std::string>> unrender(std::string_view tmpl,
                                                           const std::vector<std::string>& slots,
                                                           std::string_view text) {
  const auto pieces = split_template(tmpl, slots);
  if (!text.starts_with(pieces.front().text)) return std::nullopt;
  std::size_t pos = pieces.front().text.size();
  std::map<std::string, std::string> values;
  for (std::size_t i = 1; i + 1 < pieces.size(); i += 2) {
    const auto& name = pieces[i].text;
    const auto& lit = pieces[i + 1].text;
    const bool last = i + 2 >= pieces.size();
    std::size_t end;
    if (last) {
      if (text.size() < pos + lit.size() || !text.ends_with(lit)) return std::nullopt;
      end = text.size() - lit.size();
    } else {
      end = text.find(lit, pos);
      if (end == std::string_view::npos) return std::nullopt;
    }
    values[name] = std::string(text.substr(pos, end - pos));
    pos = end + lit.size();
  }
  if (pieces.size() == 1 && text.size() != pos) return std::nullopt;
  return values;
}

Scenario Scenario::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open scenario " + path.string());
  const auto j = nlohmann::json::parse(in);
  Scenario s;
  for (const auto& e : j.at("samples")) {
    ScenarioEntry x;
    x.id = e.at("id").get<std::string>();
    x.response = e.at("response").get<std::string>();
    x.marked = opt_string(e, "marked");
    x.cleaned = opt_string(e, "cleaned");
    x.summary = opt_string(e, "summary");
    x.logic = opt_string(e, "logic");
    x.knowledge = opt_string(e, "knowledge");
    x.vision = opt_string(e, "vision");
    x.analysis = opt_string(e, "analysis");
    x.choice = opt_string(e, "choice");
    x.rewrite = opt_string(e, "rewrite");
    s.entries_.push_back(std::move(x));
  }
  return s;
}

std::string Scenario::reply(std::span<const ChatMessage> messages) const {
  const std::string& text = messages.back().text;
  const auto find = [&](auto&& pred) -> const ScenarioEntry* {
    for (const auto& e : entries_) {
      if (pred(e)) return &e;
    }
    return nullptr;
  };
  const auto marked_of = [](const ScenarioEntry& e) { return e.marked.value_or(e.response); };

  if (auto v = unrender(prompts::kSemanticTagging, {"response"}, text)) {
    const auto& r = v->at("response");
    const auto* e = find([&](const ScenarioEntry& x) { return x.response == r; });
    return "Marked Response: " + (e ? marked_of(*e) : r);
  }
  if (auto v = unrender(prompts::kVisualDistillation, {"instruction", "marked_response"}, text)) {
    const auto& m = v->at("marked_response");
    const auto* e = find([&](const ScenarioEntry& x) { return x.marked && serialize(parse_annotated(*x.marked)) == m; });
    return "Cleaned Response: " + (e && e->cleaned ? *e->cleaned : drop_tagged(m));
  }
  if (auto v = unrender(prompts::kFluentSynthesis, {"instruction", "cleaned_response"}, text)) {
    const auto& c = v->at("cleaned_response");
    const auto* e = find([&](const ScenarioEntry& x) { return x.cleaned == c || x.response == c; });
    return "Visual Summary: " + (e && e->summary ? *e->summary : c);
  }
  if (auto v = unrender(prompts::kLogicRubric, {"text_to_evaluate"}, text)) {
    const auto& t = v->at("text_to_evaluate");
    const auto* e = find([&](const ScenarioEntry& x) { return x.marked && serialize(parse_annotated(*x.marked)) == t; });
    return e && e->logic ? *e->logic : kGenericJudge;
  }
  if (auto v = unrender(prompts::kKnowledgeRubric, {"text_to_evaluate"}, text)) {
    const auto& t = v->at("text_to_evaluate");
    const auto* e = find([&](const ScenarioEntry& x) { return x.marked && serialize(parse_annotated(*x.marked)) == t; });
    return e && e->knowledge ? *e->knowledge : kGenericJudge;
  }
  if (auto v = unrender(prompts::kVisionRubric, {"text_input"}, text)) {
    const auto& t = v->at("text_input");
    const auto* e = find([&](const ScenarioEntry& x) { return x.summary == t; });
    return e && e->vision ? *e->vision : kGenericVision;
  }
  if (auto v = unrender(prompts::kContentAnalysis, {"text_to_analyze"}, text)) {
    const auto& t = v->at("text_to_analyze");
    const auto* e = find([&](const ScenarioEntry& x) { return x.response == t; });
    return e && e->analysis ? *e->analysis : R"({"contains_reasoning": false, "contains_knowledge": false})";
  }
  if (auto v = unrender(prompts::kSubtypeSelection, {"error_options_text", "text_to_analyze"}, text)) {
    const auto& t = v->at("text_to_analyze");
    const auto* e = find([&](const ScenarioEntry& x) { return x.response == t; });
    return e && e->choice ? *e->choice : R"({"error_code": ""})";
  }
  if (auto v = unrender(prompts::kDefectGeneration, {"prompt_instruction", "original_text"}, text)) {
    const auto& t = v->at("original_text");
    const auto* e = find([&](const ScenarioEntry& x) { return x.response == t; });
    return e && e->rewrite ? *e->rewrite : t + " Nothing in the scene is as it seems.";
  }
  throw std::runtime_error("scenario: unrecognized prompt");
}

MockBackend::Responder Scenario::responder() const {
  return [this](std::span<const ChatMessage> m) { return reply(m); };
}

MockBackend::Responder Recorder::responder() {
  return [this](std::span<const ChatMessage> m) {
    auto r = inner_(m);
    std::lock_guard lock(mu_);
    const auto [it, inserted] = replies_.emplace(fingerprint(m), r);
    if (!inserted && it->second != r) throw std::runtime_error("recorder: responder is not deterministic");
    return r;
  };
}

MockScript Recorder::script(std::string fallback) const {
  std::lock_guard lock(mu_);
  MockScript s;
  s.by_fingerprint = replies_;
  s.fallback = std::move(fallback);
  return s;
}

std::size_t Recorder::size() const {
  std::lock_guard lock(mu_);
  return replies_.size();
}

std::string script_json(const MockScript& script) {
  nlohmann::ordered_json j;
  j["fallback"] = script.fallback;
  nlohmann::ordered_json replies = nlohmann::ordered_json::object();
  for (const auto& [fp, reply] : script.by_fingerprint) replies[fp] = reply;
  j["replies"] = std::move(replies);
  if (!script.rules.empty()) {
    auto rules = nlohmann::ordered_json::array();
    for (const auto& r : script.rules) rules.push_back({{"contains", r.contains}, {"reply", r.reply}});
    j["rules"] = std::move(rules);
  }
  return j.dump(2) + "\n";
}

}  // namespace vitaudit::testing
