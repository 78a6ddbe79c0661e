#include <cstdlib>
#include <fstream>
#include <iostream>
#include <memory>
#include <unordered_map>

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "vitaudit/analyze.hpp"
#include "vitaudit/cli.hpp"
#include "vitaudit/config.hpp"
#include "vitaudit/pipeline.hpp"
#include "vitaudit/select.hpp"

namespace vitaudit {
namespace {

struct GlobalOptions {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<int> concurrency;
  std::string weights;
  std::string axes;
  std::string mock_script;
  bool verbose = false;
  bool quiet = false;
};

struct IoOptions {
  std::string input;
  std::string output;
  bool resume = false;
  std::string image_root;
};

class FatalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

void setup_logging(const GlobalOptions& g) {
  auto logger = spdlog::get("vitaudit");
  if (!logger) logger = spdlog::stderr_color_mt("vitaudit");
  spdlog::set_default_logger(logger);
  spdlog::set_pattern("[%l] %v");
  spdlog::set_level(g.quiet ? spdlog::level::warn : g.verbose ? spdlog::level::debug : spdlog::level::info);
}

RunConfig build_config(const GlobalOptions& g) {
  RunConfig c;
  if (!g.config.empty()) c = RunConfig::load(g.config);
  if (g.seed) c.seed = *g.seed;
  if (g.concurrency) c.concurrency = *g.concurrency;
  try {
    if (!g.weights.empty()) c.weights = WeightScheme::parse(g.weights);
    if (!g.axes.empty()) c.axes = AxisSet::parse(g.axes);
  } catch (const std::invalid_argument& e) {
    throw ConfigError("", e.what());
  }
  if (!g.mock_script.empty()) c.mock_script = std::filesystem::path(g.mock_script);
  return c;
}

/// Backends for a run. With a mock script both profiles are served by the
/// same scripted table; otherwise each profile needs an endpoint.
struct Backends {
  std::unique_ptr<Backend> text;
  std::unique_ptr<Backend> vision;
  std::vector<MockBackend*> mocks;
};

Backends make_backends(RunConfig& c) {
  Backends b;
  if (c.mock_script) {
    const auto script = MockScript::load(*c.mock_script);
    for (auto* p : {&c.text_backend, &c.vision_backend}) {
      if (p->endpoint.empty()) p->endpoint = "mock://";
      if (p->model_id.empty()) p->model_id = "mock";
    }
    auto text = std::make_unique<MockBackend>(script, c.text_backend);
    auto vision = std::make_unique<MockBackend>(script, c.vision_backend);
    b.mocks = {text.get(), vision.get()};
    b.text = std::move(text);
    b.vision = std::move(vision);
    return b;
  }
  for (const auto* p : {&c.text_backend, &c.vision_backend}) {
    if (p->endpoint.empty()) {
      throw ConfigError("backend." + p->name + ".endpoint", "not configured (set it in --config or use --mock-script)");
    }
  }
  b.text = std::make_unique<HttpBackend>(c.text_backend);
  b.vision = std::make_unique<HttpBackend>(c.vision_backend);
  return b;
}

void add_mock_accounting(ojson& manifest, const Backends& b) {
  if (b.mocks.empty()) return;
  std::uint64_t misses = 0;
  for (const auto* m : b.mocks) misses += m->misses();
  manifest["mock_misses"] = misses;
  if (misses > 0) spdlog::warn("{} request(s) were not in the mock script and got the fallback reply", misses);
}

void require_file(const std::string& path, const char* what) {
  if (path.empty()) throw ConfigError(what, "path required");
  if (!std::filesystem::exists(path)) throw ConfigError(what, "file not found: " + path);
}

std::filesystem::path image_root_for(const IoOptions& io) {
  if (!io.image_root.empty()) return io.image_root;
  const auto parent = std::filesystem::path(io.input).parent_path();
  return parent.empty() ? std::filesystem::path(".") : parent;
}

AuditContext audit_context(const RunConfig& c, const Backends& b, const IoOptions& io) {
  AuditContext ctx;
  ctx.text = b.text.get();
  ctx.vision = b.vision.get();
  ctx.assess.axes = c.axes;
  ctx.assess.weights = c.weights;
  ctx.image_root = image_root_for(io);
  require_vision_capable(*ctx.vision, c.axes);
  return ctx;
}

BatchOptions batch_options(const RunConfig& c, const IoOptions& io) {
  BatchOptions o;
  o.input = io.input;
  o.output = io.output;
  o.concurrency = c.concurrency;
  o.resume = io.resume;
  return o;
}

void finish(ojson manifest, const BatchStats& stats, const std::filesystem::path& output) {
  write_json_file(manifest, manifest_path(output));
  spdlog::info("{}: {} succeeded, {} failed, {} reused", output.string(), stats.succeeded, stats.failed, stats.reused);
}

int cmd_audit(RunConfig c, const IoOptions& io) {
  require_file(io.input, "--input");
  const auto b = make_backends(c);
  const auto ctx = audit_context(c, b, io);
  const auto stats = run_batch(
      batch_options(c, io), [&](const Sample& s) { return audit_one(s, ctx); }, record_has_default);
  auto m = make_manifest("audit", c, &stats);
  add_mock_accounting(m, b);
  finish(std::move(m), stats, io.output);
  return 0;
}

int cmd_decompose(RunConfig c, const IoOptions& io) {
  require_file(io.input, "--input");
  const auto b = make_backends(c);
  const auto stats = run_batch(batch_options(c, io), [&](const Sample& s) { return decompose_one(s, *b.text); });
  auto m = make_manifest("decompose", c, &stats);
  add_mock_accounting(m, b);
  finish(std::move(m), stats, io.output);
  return 0;
}

int cmd_assess(RunConfig c, const IoOptions& io, const std::string& decomposed_path) {
  require_file(io.input, "--input");
  require_file(decomposed_path, "--decomposed");
  std::unordered_map<std::string, DecomposedSample> decomposed;
  for_each_jsonl_line(decomposed_path, [&](const nlohmann::json& j, std::size_t line) {
    try {
      auto d = decomposed_from_json(j);
      const auto id = d.sample_id;
      if (!decomposed.emplace(id, std::move(d)).second) {
        throw std::invalid_argument("duplicate id \"" + id + "\"");
      }
    } catch (const std::invalid_argument& e) {
      throw CorpusError(decomposed_path, line, e.what());
    } catch (const nlohmann::json::exception& e) {
      throw CorpusError(decomposed_path, line, e.what());
    }
  });
  const auto b = make_backends(c);
  const auto ctx = audit_context(c, b, io);
  const auto stats = run_batch(
      batch_options(c, io),
      [&](const Sample& s) {
        const auto it = decomposed.find(s.id);
        return assess_one(s, it == decomposed.end() ? nullptr : &it->second, ctx);
      },
      record_has_default);
  auto m = make_manifest("assess", c, &stats);
  add_mock_accounting(m, b);
  finish(std::move(m), stats, io.output);
  return 0;
}

int cmd_inject(RunConfig c, const IoOptions& io) {
  require_file(io.input, "--input");
  const ErrorTaxonomy taxonomy = c.taxonomy ? ErrorTaxonomy::load(*c.taxonomy) : ErrorTaxonomy::builtin();
  const auto b = make_backends(c);
  BenchmarkOptions opts;
  opts.challenge_fraction = c.challenge_fraction;
  opts.seed = c.seed;
  const auto stats = run_batch(batch_options(c, io), [&](const Sample& s) {
    return SampleOutcome{to_json(inject_sample(s, opts, taxonomy, *b.text)), std::nullopt};
  });

  std::size_t pristine = 0;
  std::size_t injected = 0;
  ojson reverted = ojson::array();
  for_each_jsonl_line(io.output, [&](const nlohmann::json& j, std::size_t) {
    if (j.value("label", "") == "injected") {
      ++injected;
    } else {
      ++pristine;
    }
    if (j.value("reverted", false)) {
      reverted.push_back({{"id", j.value("id", "")}, {"cause", j.value("revert_reason", "")}});
    }
  });

  auto m = make_manifest("inject", c, &stats);
  m["challenge_fraction"] = c.challenge_fraction;
  m["taxonomy_version"] = taxonomy.version();
  m["labels"] = {{"pristine", pristine}, {"injected", injected}, {"reverted", reverted.size()}};
  m["reverted"] = std::move(reverted);
  add_mock_accounting(m, b);
  finish(std::move(m), stats, io.output);
  return 0;
}

int cmd_select(const RunConfig& c, const IoOptions& io, std::optional<std::size_t> top_k) {
  require_file(io.input, "--input");
  const auto records = read_records(io.input);
  const auto k = top_k.value_or(records.size());
  const auto ids = rank_and_select(records, c.weights, k);

  if (const auto parent = std::filesystem::path(io.output).parent_path(); !parent.empty()) {
    std::filesystem::create_directories(parent);
  }
  std::ofstream out(io.output, std::ios::binary | std::ios::trunc);
  if (!out) throw CorpusError(io.output, 0, "cannot open for writing");
  for (const auto& id : ids) out << id << '\n';
  out.close();
  if (!out) throw CorpusError(io.output, 0, "write failed");

  auto m = make_manifest("select", c, nullptr);
  m["top_k"] = top_k ? ojson(*top_k) : ojson(nullptr);
  m["counts"] = {{"records", records.size()}, {"selected", ids.size()}};
  write_json_file(m, manifest_path(io.output));
  spdlog::info("selected {} of {} record(s) under weights {} ({})", ids.size(), records.size(), c.weights.name(),
               c.weights.to_string());
  return 0;
}

int cmd_analyze(const RunConfig& c, const IoOptions& io, const std::string& csv) {
  require_file(io.input, "--input");
  const ErrorTaxonomy taxonomy = c.taxonomy ? ErrorTaxonomy::load(*c.taxonomy) : ErrorTaxonomy::builtin();
  const auto records = read_records(io.input);
  const auto report = discrimination_report(records, c.bins, taxonomy);
  write_json_file(to_json(report), io.output);
  if (!csv.empty()) {
    std::ofstream out(csv, std::ios::binary | std::ios::trunc);
    if (!out) throw CorpusError(csv, 0, "cannot open for writing");
    out << histogram_csv(report);
  }
  auto m = make_manifest("analyze", c, nullptr);
  m["bins"] = c.bins;
  m["jsd_log_base"] = 2;
  m["auc_positive_class"] = "pristine";
  m["taxonomy_version"] = taxonomy.version();
  m["counts"] = {{"records", records.size()},
                 {"pristine", report.pristine},
                 {"injected", report.injected},
                 {"reverted_excluded", report.reverted_excluded},
                 {"unlabeled_skipped", report.unlabeled_skipped}};
  write_json_file(m, manifest_path(io.output));
  if (report.jsd && report.auc) spdlog::info("JSD {:.6f}  AUC {:.6f}", *report.jsd, *report.auc);
  return 0;
}

void add_io(CLI::App* sub, IoOptions& io, bool resumable) {
  sub->add_option("-i,--input", io.input, "Input JSONL file")->required();
  sub->add_option("-o,--output", io.output, "Output file")->required();
  if (resumable) {
    sub->add_flag("--resume", io.resume, "Reuse finished lines of an interrupted run");
  }
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
  CLI::App app{"vitaudit: decomposition-based quality auditing of visual instruction data"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_version_flag("--version", tool_version());

  GlobalOptions g;
  app.add_option("-c,--config", g.config, "Run configuration file (TOML subset)");
  app.add_option("--seed", g.seed, "Global seed for per-sample random streams");
  app.add_option("-j,--concurrency", g.concurrency, "Samples processed concurrently")->check(CLI::PositiveNumber);
  app.add_option("--weights", g.weights,
                 "Axis weights 'l,k,v' or equal|reason-centric|knowledge-centric|vision-centric");
  app.add_option("--axes", g.axes, "Axes to judge, e.g. 'logic,vision'");
  app.add_option("--mock-script", g.mock_script, "Scripted backend table for offline runs");
  app.add_flag("-v,--verbose", g.verbose, "Debug logging");
  app.add_flag("-q,--quiet", g.quiet, "Warnings and errors only");

  IoOptions io;
  std::string decomposed;
  std::optional<double> challenge_fraction;
  std::optional<std::size_t> top_k;
  std::optional<int> bins;
  std::string csv;
  std::string taxonomy;

  auto* decompose = app.add_subcommand("decompose", "Tag, distill and synthesize each response");
  add_io(decompose, io, true);

  auto* assess = app.add_subcommand("assess", "Score decomposed samples on the three axes");
  add_io(assess, io, true);
  assess->add_option("--decomposed", decomposed, "Output of the decompose command")->required();
  assess->add_option("--image-root", io.image_root, "Base directory for relative image paths");

  auto* audit = app.add_subcommand("audit", "Decompose and assess in one pass");
  add_io(audit, io, true);
  audit->add_option("--image-root", io.image_root, "Base directory for relative image paths");

  auto* inject = app.add_subcommand("inject", "Build a labeled benchmark by defect injection");
  add_io(inject, io, true);
  inject->add_option("--challenge-fraction", challenge_fraction, "Share of samples drawn for injection")
      ->check(CLI::Range(0.0, 1.0));
  inject->add_option("--taxonomy", taxonomy, "Defect catalogue JSON (defaults to the built-in one)");

  auto* select = app.add_subcommand("select", "Rank audit records and keep the top K ids");
  add_io(select, io, false);
  select->add_option("--top-k", top_k, "Number of ids to keep (all when omitted)");

  auto* analyze = app.add_subcommand("analyze", "Discrimination report for an audited benchmark");
  add_io(analyze, io, false);
  analyze->add_option("--bins", bins, "Histogram bins over [1, 5]")->check(CLI::PositiveNumber);
  analyze->add_option("--csv", csv, "Also write bin masses as CSV");
  analyze->add_option("--taxonomy", taxonomy, "Defect catalogue JSON (defaults to the built-in one)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  setup_logging(g);
  try {
    RunConfig c = build_config(g);
    if (challenge_fraction) c.challenge_fraction = *challenge_fraction;
    if (bins) c.bins = *bins;
    if (!taxonomy.empty()) c.taxonomy = std::filesystem::path(taxonomy);
    c.validate();

    if (*decompose) return cmd_decompose(std::move(c), io);
    if (*assess) return cmd_assess(std::move(c), io, decomposed);
    if (*audit) return cmd_audit(std::move(c), io);
    if (*inject) return cmd_inject(std::move(c), io);
    if (*select) return cmd_select(c, io, top_k);
    if (*analyze) return cmd_analyze(c, io, csv);
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return 1;
  }
  return 1;
}

int run_cli(const std::vector<std::string>& args) {
  std::vector<const char*> argv{"vitaudit"};
  for (const auto& a : args) argv.push_back(a.c_str());
  return run_cli(static_cast<int>(argv.size()), argv.data());
}

}  // namespace vitaudit
