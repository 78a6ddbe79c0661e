#include "vitaudit/pipeline.hpp"

#include <algorithm>
#include <map>

#include <spdlog/spdlog.h>

#include "vitaudit/parallel.hpp"

#ifndef VITAUDIT_VERSION
#define VITAUDIT_VERSION "0.0.0"
#endif

namespace vitaudit {
namespace {

constexpr std::size_t kMinChunk = 32;

/// Lines of a previous run keyed by id. A truncated final line is ignored.
std::map<std::string, ojson> load_previous(const std::filesystem::path& output) {
  std::filesystem::path source = output;
  source += ".partial";
  if (!std::filesystem::exists(source)) source = output;
  std::map<std::string, ojson> out;
  if (!std::filesystem::exists(source)) return out;

  std::ifstream in(source, std::ios::binary);
  std::vector<std::string> lines;
  for (std::string line; std::getline(in, line);) lines.push_back(std::move(line));
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (lines[i].find_first_not_of(" \t\r") == std::string::npos) continue;
    ojson j;
    try {
      j = ojson::parse(lines[i]);
    } catch (const ojson::parse_error&) {
      if (i + 1 == lines.size()) break;
      throw CorpusError(source, i + 1, "cannot resume: malformed line");
    }
    const auto id = j.find("id");
    if (id == j.end() || !id->is_string()) throw CorpusError(source, i + 1, "cannot resume: line without id");
    out.emplace(id->get<std::string>(), std::move(j));
  }
  spdlog::info("resume: {} line(s) available from {}", out.size(), source.string());
  return out;
}

SampleFailure failure(const Sample& s, std::string step, std::string cause) {
  return SampleFailure{s.id, std::move(step), std::move(cause)};
}

ojson provenance_for(const DecomposedSample& d, const Assessment& a, const AuditContext& ctx) {
  ojson p;
  p["tool"] = "vitaudit " + tool_version();
  p["text_model"] = ctx.text ? ctx.text->profile().model_id : "";
  p["vision_model"] = ctx.vision ? ctx.vision->profile().model_id : "";
  p["weights"] = ctx.assess.weights.to_string();
  p["axes"] = ctx.assess.axes.to_string();
  p["attempts"] = {{"tagging", d.attempts.tagging},
                   {"distillation", d.attempts.distillation},
                   {"synthesis", d.attempts.synthesis}};
  ojson defaulted = ojson::array();
  for (const Axis ax : kAllAxes) {
    if (const auto& j = a.judgment(ax); j && j->defaulted) defaulted.push_back(std::string(to_string(ax)));
  }
  p["defaulted"] = std::move(defaulted);
  p["tagging_fallback"] = d.tagging_fallback;
  p["warnings"] = d.warnings;
  ojson flags = ojson::array();
  if (d.visual_summary.empty()) flags.push_back("empty_visual_summary");
  const bool override_text = ctx.text && ctx.text->profile().temperature_override;
  const bool override_vision = ctx.vision && ctx.vision->profile().temperature_override;
  if (override_text || override_vision) flags.push_back("sampling_override");
  p["flags"] = std::move(flags);
  return p;
}

ojson backend_json(const BackendProfile& b) {
  ojson j;
  j["model"] = b.model_id;
  j["endpoint"] = b.endpoint;
  j["vision"] = b.vision;
  j["max_retries"] = b.max_retries;
  j["temperature"] = b.temperature_override ? ojson(*b.temperature_override) : ojson(0.0);
  return j;
}

}  // namespace

std::string tool_version() { return VITAUDIT_VERSION; }

Sample with_resolved_image(const Sample& s, const std::filesystem::path& root) {
  Sample out = s;
  if (is_uri(s.image_ref) || root.empty()) return out;
  const std::filesystem::path p(s.image_ref);
  if (p.is_relative()) out.image_ref = (root / p).lexically_normal().string();
  return out;
}

BatchStats run_batch(const BatchOptions& options, const SampleFn& fn,
                     const std::function<bool(const ojson&)>& is_defaulted) {
  const int concurrency = std::max(1, options.concurrency);
  const std::size_t chunk =
      options.chunk > 0 ? options.chunk : std::max(kMinChunk, static_cast<std::size_t>(concurrency) * 4);

  std::map<std::string, ojson> previous;
  if (options.resume) previous = load_previous(options.output);

  auto reader = load_corpus(options.input);
  JsonlWriter writer(options.output);
  BatchStats stats;

  std::vector<Sample> batch;
  const auto drain = [&] {
    std::vector<const Sample*> todo;
    for (const auto& s : batch) {
      if (!previous.contains(s.id)) todo.push_back(&s);
    }
    const auto outcomes = parallel_map(std::span<const Sample* const>(todo), concurrency,
                                       [&](const Sample* s) -> SampleOutcome {
                                         try {
                                           return fn(*s);
                                         } catch (const std::exception& e) {
                                           return SampleOutcome{std::nullopt, failure(*s, "internal", e.what())};
                                         }
                                       });
    std::size_t next = 0;
    for (const auto& s : batch) {
      ++stats.total;
      const ojson* line = nullptr;
      if (const auto it = previous.find(s.id); it != previous.end()) {
        line = &it->second;
        ++stats.reused;
      } else {
        const auto& o = outcomes[next++];
        if (o.failure) {
          ++stats.failed;
          stats.failures.push_back(*o.failure);
          spdlog::warn("sample {}: {} failed: {}", o.failure->id, o.failure->step, o.failure->cause);
          continue;
        }
        line = &*o.line;
      }
      ++stats.succeeded;
      if (is_defaulted && is_defaulted(*line)) ++stats.defaulted;
      writer.write(*line);
    }
    writer.flush();
    batch.clear();
    spdlog::info("{} sample(s) processed", stats.total);
  };

  while (auto s = reader.next()) {
    batch.push_back(std::move(*s));
    if (batch.size() >= chunk) drain();
  }
  if (!batch.empty()) drain();
  writer.commit();
  return stats;
}

AuditRecord make_audit_record(const Sample& sample, const DecomposedSample& d, const Assessment& a,
                              const AuditContext& ctx) {
  AuditRecord r;
  r.sample_id = sample.id;
  r.scores = a.scores;
  for (const Axis ax : kAllAxes) {
    if (const auto& j = a.judgment(ax)) r.explanations[static_cast<std::size_t>(ax)] = j->explanation;
  }
  r.annotated_response = serialize(d.annotated);
  r.visual_summary = d.visual_summary;
  r.provenance = provenance_for(d, a, ctx);
  r.label = sample.label;
  return r;
}

SampleOutcome decompose_one(const Sample& sample, Backend& text) {
  try {
    return SampleOutcome{to_json(decompose(sample, text)), std::nullopt};
  } catch (const StepError& e) {
    return SampleOutcome{std::nullopt, failure(sample, e.step(), e.cause())};
  }
}

SampleOutcome assess_one(const Sample& sample, const DecomposedSample* decomposed, const AuditContext& ctx) {
  if (!decomposed) return SampleOutcome{std::nullopt, failure(sample, "assess", "no decomposition for this id")};
  const Sample resolved = with_resolved_image(sample, ctx.image_root);
  try {
    const auto a = assess(*decomposed, resolved, *ctx.vision, ctx.assess);
    return SampleOutcome{to_json(make_audit_record(sample, *decomposed, a, ctx)), std::nullopt};
  } catch (const AxisError& e) {
    return SampleOutcome{std::nullopt, failure(sample, "assess:" + std::string(to_string(e.axis())), e.cause())};
  }
}

SampleOutcome audit_one(const Sample& sample, const AuditContext& ctx) {
  DecomposedSample d;
  try {
    d = decompose(sample, *ctx.text);
  } catch (const StepError& e) {
    return SampleOutcome{std::nullopt, failure(sample, e.step(), e.cause())};
  }
  return assess_one(sample, &d, ctx);
}

std::filesystem::path manifest_path(const std::filesystem::path& output) {
  auto p = output;
  p += ".manifest.json";
  return p;
}

ojson failures_json(const std::vector<SampleFailure>& failures) {
  ojson arr = ojson::array();
  for (const auto& f : failures) arr.push_back({{"id", f.id}, {"step", f.step}, {"cause", f.cause}});
  return arr;
}

ojson make_manifest(std::string_view command, const RunConfig& config, const BatchStats* stats) {
  ojson m;
  m["tool"] = "vitaudit";
  m["version"] = tool_version();
  m["command"] = std::string(command);
  m["seed"] = config.seed;
  if (stats) {
    m["backends"] = {{"text", backend_json(config.text_backend)}, {"vision", backend_json(config.vision_backend)}};
  }
  m["weights"] = {{"scheme", config.weights.name()}, {"value", config.weights.to_string()}};
  m["axes"] = config.axes.to_string();
  if (stats) {
    m["sampling_override"] =
        config.text_backend.temperature_override.has_value() || config.vision_backend.temperature_override.has_value();
    m["counts"] = {{"total", stats->total},
                   {"succeeded", stats->succeeded},
                   {"failed", stats->failed},
                   {"defaulted", stats->defaulted},
                   {"reused", stats->reused}};
    m["failures"] = failures_json(stats->failures);
  }
  return m;
}

bool record_has_default(const ojson& line) {
  const auto p = line.find("provenance");
  if (p == line.end() || !p->is_object()) return false;
  const auto d = p->find("defaulted");
  return d != p->end() && d->is_array() && !d->empty();
}

}  // namespace vitaudit
