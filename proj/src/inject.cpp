#include "vitaudit/inject.hpp"

#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>

#include <spdlog/spdlog.h>

#include "vitaudit/parallel.hpp"
#include "vitaudit/prompts.hpp"
#include "vitaudit/text.hpp"

namespace vitaudit {

extern const std::string_view kBuiltinTaxonomyJson;

namespace {

using json = nlohmann::json;

constexpr int kRewriteAttempts = 3;

// Fixed code list, in catalogue order.
const std::array<std::vector<std::string_view>, 3> kExpectedCodes{{
    {"consistency_attribute", "consistency_spatial", "consistency_action", "consistency_fake",
     "consistency_misidentification"},
    {"reasoning_conclusion", "reasoning_causal", "reasoning_prediction", "reasoning_procedural",
     "reasoning_comparison"},
    {"knowledge_entity", "knowledge_context", "knowledge_definition", "knowledge_attribution"},
}};

std::size_t index_of(ErrorCategory c) { return static_cast<std::size_t>(c); }

bool read_bool(const json& obj, const char* key) {
  const auto it = obj.find(key);
  if (it == obj.end()) throw InjectionError("analysis", std::string("missing key \"") + key + "\"");
  if (!it->is_boolean()) throw InjectionError("analysis", std::string("key \"") + key + "\" is not a boolean");
  return it->get<bool>();
}

void collect_strings(const json& j, std::vector<std::string>& out) {
  if (j.is_string()) {
    out.push_back(j.get<std::string>());
  } else if (j.is_structured()) {
    for (const auto& v : j) collect_strings(v, out);
  }
}

}  // namespace

std::string_view to_string(ErrorCategory c) {
  switch (c) {
    case ErrorCategory::Consistency: return "consistency";
    case ErrorCategory::Reasoning: return "reasoning";
    case ErrorCategory::Knowledge: return "knowledge";
  }
  return "consistency";
}

std::optional<ErrorCategory> parse_category(std::string_view s) {
  for (const auto c : kAllCategories) {
    if (s == to_string(c)) return c;
  }
  return std::nullopt;
}

ErrorTaxonomy ErrorTaxonomy::parse(std::string_view json_text) {
  const auto j = json::parse(json_text);
  ErrorTaxonomy t;
  t.version_ = j.at("version").get<std::string>();
  for (const auto& cat : j.at("categories")) {
    const auto name = cat.at("name").get<std::string>();
    const auto c = parse_category(name);
    if (!c) throw std::invalid_argument("taxonomy: unknown category '" + name + "'");
    auto& list = t.by_category_[index_of(*c)];
    if (!list.empty()) throw std::invalid_argument("taxonomy: duplicate category '" + name + "'");
    for (const auto& s : cat.at("subtypes")) {
      list.push_back(ErrorSubtype{s.at("code").get<std::string>(), s.value("name", ""),
                                  s.value("description", ""), s.value("instruction", "")});
    }
  }
  for (const auto c : kAllCategories) {
    const auto& list = t.by_category_[index_of(c)];
    const auto& expected = kExpectedCodes[index_of(c)];
    if (list.size() != expected.size()) {
      throw std::invalid_argument("taxonomy: category '" + std::string(to_string(c)) + "' must list " +
                                  std::to_string(expected.size()) + " subtypes");
    }
    for (std::size_t i = 0; i < list.size(); ++i) {
      if (list[i].code != expected[i]) {
        throw std::invalid_argument("taxonomy: expected subtype '" + std::string(expected[i]) + "' at position " +
                                    std::to_string(i) + " of '" + std::string(to_string(c)) + "', found '" +
                                    list[i].code + "'");
      }
      if (text::trim(list[i].instruction).empty()) {
        throw std::invalid_argument("taxonomy: subtype '" + list[i].code + "' has no instruction");
      }
    }
  }
  return t;
}

const ErrorTaxonomy& ErrorTaxonomy::builtin() {
  static const ErrorTaxonomy t = parse(kBuiltinTaxonomyJson);
  return t;
}

ErrorTaxonomy ErrorTaxonomy::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open taxonomy '" + path.string() + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse(buf.str());
}

std::span<const ErrorSubtype> ErrorTaxonomy::subtypes(ErrorCategory c) const { return by_category_[index_of(c)]; }

const ErrorSubtype* ErrorTaxonomy::find(std::string_view code) const {
  for (const auto& list : by_category_) {
    for (const auto& s : list) {
      if (s.code == code) return &s;
    }
  }
  return nullptr;
}

std::optional<ErrorCategory> ErrorTaxonomy::category_of(std::string_view code) const {
  for (const auto c : kAllCategories) {
    for (const auto& s : subtypes(c)) {
      if (s.code == code) return c;
    }
  }
  return std::nullopt;
}

std::string ErrorTaxonomy::options_text(ErrorCategory c) const {
  std::string out;
  for (const auto& s : subtypes(c)) {
    if (!out.empty()) out += '\n';
    out += s.code + ": " + s.description;
  }
  return out;
}

std::optional<json> extract_json_object(std::string_view text) {
  for (std::size_t start = text.find('{'); start != std::string_view::npos; start = text.find('{', start + 1)) {
    int depth = 0;
    bool in_string = false;
    bool escaped = false;
    for (std::size_t i = start; i < text.size(); ++i) {
      const char c = text[i];
      if (in_string) {
        if (escaped) {
          escaped = false;
        } else if (c == '\\') {
          escaped = true;
        } else if (c == '"') {
          in_string = false;
        }
        continue;
      }
      if (c == '"') {
        in_string = true;
      } else if (c == '{') {
        ++depth;
      } else if (c == '}' && --depth == 0) {
        auto parsed = json::parse(text.substr(start, i - start + 1), nullptr, false);
        if (!parsed.is_discarded() && parsed.is_object()) return parsed;
        break;
      }
    }
  }
  return std::nullopt;
}

ContentAnalysis parse_content_analysis(std::string_view completion) {
  const auto obj = extract_json_object(completion);
  if (!obj) {
    throw InjectionError("analysis", "no JSON object in completion: \"" + text::utf8_prefix(completion, 80) + "\"");
  }
  return ContentAnalysis{read_bool(*obj, "contains_reasoning"), read_bool(*obj, "contains_knowledge")};
}

ContentAnalysis analyze_content(std::string_view response, Backend& backend) {
  const ChatMessage msg =
      ChatMessage::user(prompts::render(prompts::kContentAnalysis, {{"text_to_analyze", response}}));
  return parse_content_analysis(backend.complete(std::span(&msg, 1)).text);
}

SampleRng::SampleRng(std::uint64_t seed, std::string_view sample_id) {
  const auto h = text::fnv1a64(sample_id);
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(h), static_cast<std::uint32_t>(h >> 32)};
  engine_.seed(seq);
}

double SampleRng::uniform() {
  // 53 random mantissa bits; exactly representable, never 1.0.
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

InjectionDraws InjectionDraws::draw(SampleRng& rng) {
  InjectionDraws d;
  d.partition = rng.uniform();
  d.knowledge_gate = rng.uniform();
  d.reasoning_gate = rng.uniform();
  d.subtype = rng.uniform();
  return d;
}

ErrorCategory choose_category(const ContentAnalysis& a, const InjectionDraws& d) {
  if (a.contains_knowledge && d.knowledge_gate < kKnowledgeGate) return ErrorCategory::Knowledge;
  if (a.contains_reasoning && d.reasoning_gate < kReasoningGate) return ErrorCategory::Reasoning;
  return ErrorCategory::Consistency;
}

std::size_t uniform_index(double u, std::size_t n) {
  if (n == 0) throw std::logic_error("uniform_index over an empty range");
  const auto i = static_cast<std::size_t>(std::floor(u * static_cast<double>(n)));
  return i < n ? i : n - 1;
}

std::optional<std::string> parse_subtype_choice(std::string_view completion, const ErrorTaxonomy& taxonomy,
                                                ErrorCategory category) {
  auto belongs = [&](const std::string& code) { return taxonomy.category_of(code) == category; };
  if (const auto obj = extract_json_object(completion)) {
    for (const char* key : {"error_code", "code", "choice", "subtype", "error_type", "strategy"}) {
      const auto it = obj->find(key);
      if (it != obj->end() && it->is_string() && belongs(it->get<std::string>())) return it->get<std::string>();
    }
    std::vector<std::string> values;
    collect_strings(*obj, values);
    for (const auto& v : values) {
      if (belongs(v)) return v;
    }
    return std::nullopt;
  }
  // Bare answer such as "knowledge_entity".
  const auto bare = std::string(text::trim(completion));
  if (belongs(bare)) return bare;

  // Prose naming exactly one code of the category.
  const auto is_code_char = [](char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; };
  std::optional<std::string> named;
  for (const auto& st : taxonomy.subtypes(category)) {
    for (auto pos = completion.find(st.code); pos != std::string_view::npos;
         pos = completion.find(st.code, pos + 1)) {
      const auto end = pos + st.code.size();
      const bool left_ok = pos == 0 || !is_code_char(completion[pos - 1]);
      const bool right_ok = end == completion.size() || !is_code_char(completion[end]);
      if (!left_ok || !right_ok) continue;
      if (named && *named != st.code) return std::nullopt;
      named = st.code;
      break;
    }
  }
  return named;
}

ErrorSelection select_error(const ContentAnalysis& analysis, const InjectionDraws& draws, std::string_view text,
                            const ErrorTaxonomy& taxonomy, Backend& backend) {
  ErrorSelection sel;
  sel.category = choose_category(analysis, draws);
  const auto options = taxonomy.subtypes(sel.category);
  if (sel.category == ErrorCategory::Consistency) {
    sel.subtype_code = options[uniform_index(draws.subtype, options.size())].code;
    return sel;
  }

  const auto opts = taxonomy.options_text(sel.category);
  const ChatMessage msg = ChatMessage::user(
      prompts::render(prompts::kSubtypeSelection, {{"error_options_text", opts}, {"text_to_analyze", text}}));
  sel.raw = backend.complete(std::span(&msg, 1)).text;
  if (auto code = parse_subtype_choice(sel.raw, taxonomy, sel.category)) {
    sel.subtype_code = std::move(*code);
  } else {
    sel.subtype_code = options[uniform_index(draws.subtype, options.size())].code;
    sel.subtype_fallback = true;
    spdlog::info("subtype selection answer unusable ({}), picked {} uniformly", text::utf8_prefix(sel.raw, 60),
                 sel.subtype_code);
  }
  return sel;
}

std::string strip_rewrite_wrappers(std::string_view completion) {
  std::string_view s = text::trim(completion);
  for (const std::string_view preamble : {"Rewritten Text:", "Corrupted Text:", "Modified Text:", "Rewritten text:",
                                          "Corrupted text:", "Modified text:"}) {
    if (s.starts_with(preamble)) {
      s = text::trim(s.substr(preamble.size()));
      break;
    }
  }
  const std::array<std::pair<std::string_view, std::string_view>, 3> quotes{{
      {"\"", "\""},
      {"\xE2\x80\x9C", "\xE2\x80\x9D"},  // curly double quotes
      {"'", "'"},
  }};
  for (const auto& [open, close] : quotes) {
    if (s.size() >= open.size() + close.size() && s.starts_with(open) && s.ends_with(close)) {
      const auto inner = s.substr(open.size(), s.size() - open.size() - close.size());
      // Only strip when the quotes wrap the whole text.
      if (inner.find(open) == std::string_view::npos && inner.find(close) == std::string_view::npos) {
        s = text::trim(inner);
      }
      break;
    }
  }
  return std::string(s);
}

DefectResult inject_defect(const Sample& sample, const std::string& subtype_code, const ErrorTaxonomy& taxonomy,
                           Backend& backend) {
  const auto* subtype = taxonomy.find(subtype_code);
  if (subtype == nullptr) throw std::invalid_argument("unknown subtype '" + subtype_code + "'");

  const std::array<ChatMessage, 2> messages{
      ChatMessage::system(std::string(prompts::kDefectGenerationSystem)),
      ChatMessage::user(prompts::render(prompts::kDefectGeneration, {{"prompt_instruction", subtype->instruction},
                                                                     {"original_text", sample.response}})),
  };
  const auto original = text::normalize_whitespace(sample.response);
  std::string last_error;
  for (int attempt = 1; attempt <= kRewriteAttempts; ++attempt) {
    auto rewritten = strip_rewrite_wrappers(backend.complete(messages).text);
    if (rewritten.empty()) {
      last_error = "empty rewrite";
      continue;
    }
    if (text::normalize_whitespace(rewritten) == original) {
      last_error = "rewrite is unchanged from the original";
      continue;
    }
    return DefectResult{std::move(rewritten), attempt};
  }
  throw InjectionError("rewrite", last_error + " after " + std::to_string(kRewriteAttempts) + " attempts");
}

BenchmarkEntry inject_sample(const Sample& sample, const BenchmarkOptions& options, const ErrorTaxonomy& taxonomy,
                             Backend& backend) {
  if (!(options.challenge_fraction >= 0.0 && options.challenge_fraction <= 1.0)) {
    throw std::invalid_argument("challenge fraction must lie in [0, 1]");
  }
  SampleRng rng(options.seed, sample.id);
  BenchmarkEntry e;
  e.sample = sample;
  e.draws = InjectionDraws::draw(rng);
  e.sample.label = BenchmarkLabel{"pristine", std::nullopt, std::nullopt, false};
  if (!(e.draws.partition < options.challenge_fraction)) return e;

  std::string stage = "analysis";
  try {
    InjectionRecord rec;
    rec.sample_id = sample.id;
    rec.original_response = sample.response;
    rec.draws = e.draws;
    rec.analysis = analyze_content(sample.response, backend);

    stage = "selection";
    auto sel = select_error(rec.analysis, e.draws, sample.response, taxonomy, backend);
    rec.category = sel.category;
    rec.subtype_code = sel.subtype_code;
    rec.subtype_fallback = sel.subtype_fallback;

    stage = "rewrite";
    auto defect = inject_defect(sample, rec.subtype_code, taxonomy, backend);
    rec.corrupted_response = std::move(defect.text);
    rec.rewrite_attempts = defect.attempts;

    e.sample.response = rec.corrupted_response;
    e.sample.label = BenchmarkLabel{"injected", std::string(to_string(rec.category)), rec.subtype_code, false};
    e.injection = std::move(rec);
  } catch (const InjectionError& err) {
    e.revert_reason = err.what();
  } catch (const std::exception& err) {
    e.revert_reason = stage + ": " + err.what();
  }
  if (e.revert_reason) {
    e.sample.label->reverted = true;
    spdlog::warn("sample {}: injection reverted ({})", sample.id, *e.revert_reason);
  }
  return e;
}

std::vector<BenchmarkEntry> build_benchmark(std::span<const Sample> corpus, const BenchmarkOptions& options,
                                            const ErrorTaxonomy& taxonomy, Backend& backend, int concurrency) {
  return parallel_map(corpus, concurrency,
                      [&](const Sample& s) { return inject_sample(s, options, taxonomy, backend); });
}

ojson to_json(const BenchmarkEntry& e) {
  ojson j = to_json(e.sample);
  j["original_response"] = e.injection ? e.injection->original_response : e.sample.response;
  if (e.revert_reason) j["revert_reason"] = *e.revert_reason;
  ojson inj;
  inj["draws"] = {{"partition", e.draws.partition},
                  {"knowledge_gate", e.draws.knowledge_gate},
                  {"reasoning_gate", e.draws.reasoning_gate},
                  {"subtype", e.draws.subtype}};
  if (e.injection) {
    inj["analysis"] = {{"contains_reasoning", e.injection->analysis.contains_reasoning},
                       {"contains_knowledge", e.injection->analysis.contains_knowledge}};
    inj["subtype_fallback"] = e.injection->subtype_fallback;
    inj["rewrite_attempts"] = e.injection->rewrite_attempts;
  }
  j["injection"] = std::move(inj);
  return j;
}

}  // namespace vitaudit
