#include "vitaudit/corpus.hpp"

#include <cmath>
#include <system_error>

#include "vitaudit/text.hpp"

namespace vitaudit {
namespace {

using json = nlohmann::json;

const std::string& require_string(const json& j, const char* key) {
  const auto it = j.find(key);
  if (it == j.end()) throw std::invalid_argument(std::string("missing field \"") + key + "\"");
  if (!it->is_string()) throw std::invalid_argument(std::string("field \"") + key + "\" is not a string");
  return it->get_ref<const std::string&>();
}

std::optional<std::string> optional_string(const json& j, const char* key) {
  const auto it = j.find(key);
  if (it == j.end() || it->is_null()) return std::nullopt;
  if (!it->is_string()) throw std::invalid_argument(std::string("field \"") + key + "\" is not a string");
  return it->get<std::string>();
}

std::optional<int> optional_score(const json& j, const char* key) {
  const auto it = j.find(key);
  if (it == j.end()) throw std::invalid_argument(std::string("missing field \"") + key + "\"");
  if (it->is_null()) return std::nullopt;
  if (!it->is_number_integer()) throw std::invalid_argument(std::string("field \"") + key + "\" is not an integer");
  const int v = it->get<int>();
  if (v < 1 || v > 5) throw std::invalid_argument(std::string("field \"") + key + "\" outside 1..5");
  return v;
}

std::optional<BenchmarkLabel> label_from_json(const json& j) {
  const auto label = optional_string(j, "label");
  if (!label) return std::nullopt;
  if (*label != "pristine" && *label != "injected") {
    throw std::invalid_argument("field \"label\" must be \"pristine\" or \"injected\", got \"" + *label + "\"");
  }
  BenchmarkLabel out;
  out.label = *label;
  out.category = optional_string(j, "category");
  out.subtype = optional_string(j, "subtype");
  if (const auto it = j.find("reverted"); it != j.end() && !it->is_null()) {
    if (!it->is_boolean()) throw std::invalid_argument("field \"reverted\" is not a boolean");
    out.reverted = it->get<bool>();
  }
  if (out.injected() && (!out.category || !out.subtype)) {
    throw std::invalid_argument("injected line lacks \"category\" or \"subtype\"");
  }
  return out;
}

void label_to_json(const std::optional<BenchmarkLabel>& label, ojson& j) {
  if (!label) return;
  j["label"] = label->label;
  j["category"] = label->category ? ojson(*label->category) : ojson(nullptr);
  j["subtype"] = label->subtype ? ojson(*label->subtype) : ojson(nullptr);
  if (label->reverted) j["reverted"] = true;
}

ojson score_json(const std::optional<int>& s) { return s ? ojson(*s) : ojson(nullptr); }

}  // namespace

CorpusError::CorpusError(std::filesystem::path path, std::size_t line, const std::string& message)
    : std::runtime_error(path.string() + (line > 0 ? ":" + std::to_string(line) : std::string()) + ": " + message),
      path_(std::move(path)),
      line_(line) {}

ojson to_json(const Sample& s) {
  ojson j;
  j["id"] = s.id;
  j["image"] = s.image_ref;
  j["instruction"] = s.instruction;
  j["response"] = s.response;
  label_to_json(s.label, j);
  return j;
}

Sample sample_from_json(const json& j) {
  if (!j.is_object()) throw std::invalid_argument("record is not a JSON object");
  Sample s;
  s.id = require_string(j, "id");
  if (text::trim(s.id).empty()) throw std::invalid_argument("empty id");
  s.image_ref = require_string(j, "image");
  if (text::trim(s.image_ref).empty()) throw std::invalid_argument("empty image reference");
  s.instruction = require_string(j, "instruction");
  if (text::trim(s.instruction).empty()) throw std::invalid_argument("empty instruction");
  s.response = require_string(j, "response");
  if (text::trim(s.response).empty()) throw std::invalid_argument("empty response");
  s.label = label_from_json(j);
  return s;
}

ojson to_json(const AuditRecord& r) {
  ojson j;
  j["id"] = r.sample_id;
  j["s_l"] = score_json(r.scores.s_l);
  j["s_k"] = score_json(r.scores.s_k);
  j["s_v"] = score_json(r.scores.s_v);
  j["overall"] = to_double(r.scores.overall);
  ojson ex = ojson::object();
  for (const Axis a : kAllAxes) {
    const auto& e = r.explanation(a);
    ex[std::string(to_string(a))] = e ? ojson(*e) : ojson(nullptr);
  }
  j["explanations"] = std::move(ex);
  j["annotated_response"] = r.annotated_response;
  j["visual_summary"] = r.visual_summary;
  label_to_json(r.label, j);
  j["provenance"] = r.provenance;
  return j;
}

AuditRecord audit_record_from_json(const json& j) {
  if (!j.is_object()) throw std::invalid_argument("record is not a JSON object");
  AuditRecord r;
  r.sample_id = require_string(j, "id");
  if (r.sample_id.empty()) throw std::invalid_argument("empty id");
  r.scores.s_l = optional_score(j, "s_l");
  r.scores.s_k = optional_score(j, "s_k");
  r.scores.s_v = optional_score(j, "s_v");

  const auto ex = j.find("explanations");
  if (ex == j.end() || !ex->is_object()) throw std::invalid_argument("missing object \"explanations\"");
  for (const Axis a : kAllAxes) {
    r.explanations[static_cast<std::size_t>(a)] = optional_string(*ex, std::string(to_string(a)).c_str());
  }
  r.annotated_response = require_string(j, "annotated_response");
  r.visual_summary = require_string(j, "visual_summary");
  r.label = label_from_json(j);
  if (const auto it = j.find("provenance"); it != j.end() && !it->is_null()) {
    if (!it->is_object()) throw std::invalid_argument("field \"provenance\" is not an object");
    r.provenance = ojson::parse(it->dump());
  }

  WeightScheme weights;
  if (const auto it = r.provenance.find("weights"); it != r.provenance.end() && it->is_string()) {
    weights = WeightScheme::parse(it->get<std::string>());
  }
  r.scores.overall = aggregate(r.scores, weights);

  const auto overall = j.find("overall");
  if (overall == j.end() || !overall->is_number()) throw std::invalid_argument("missing number \"overall\"");
  if (std::abs(overall->get<double>() - to_double(r.scores.overall)) > 1e-9) {
    throw std::invalid_argument("\"overall\" does not match the axis scores under weights " + weights.to_string());
  }
  return r;
}

CorpusReader::CorpusReader(const std::filesystem::path& path) : path_(path), in_(path) {
  if (!std::filesystem::exists(path)) throw CorpusError(path, 0, "file not found");
  if (!in_) throw CorpusError(path, 0, "cannot open file");
}

std::optional<Sample> CorpusReader::next() {
  std::string line;
  while (std::getline(in_, line)) {
    ++line_no_;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    Sample s;
    try {
      s = sample_from_json(json::parse(line));
    } catch (const json::parse_error& e) {
      throw CorpusError(path_, line_no_, std::string("invalid JSON: ") + e.what());
    } catch (const std::exception& e) {
      throw CorpusError(path_, line_no_, e.what());
    }
    if (!seen_.insert(s.id).second) throw CorpusError(path_, line_no_, "duplicate id \"" + s.id + "\"");
    return s;
  }
  return std::nullopt;
}

CorpusReader load_corpus(const std::filesystem::path& path) { return CorpusReader(path); }

std::vector<Sample> read_corpus(const std::filesystem::path& path) {
  auto reader = load_corpus(path);
  std::vector<Sample> out;
  while (auto s = reader.next()) out.push_back(std::move(*s));
  return out;
}

std::vector<AuditRecord> read_records(const std::filesystem::path& path, bool tolerate_truncated_tail) {
  std::ifstream in(path);
  if (!in) throw CorpusError(path, 0, "cannot open file");
  std::vector<std::string> lines;
  for (std::string line; std::getline(in, line);) lines.push_back(std::move(line));

  std::vector<AuditRecord> out;
  std::unordered_set<std::string> seen;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const auto& line = lines[i];
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const bool last = i + 1 == lines.size();
    try {
      out.push_back(audit_record_from_json(json::parse(line)));
    } catch (const std::exception& e) {
      if (tolerate_truncated_tail && last) break;
      throw CorpusError(path, i + 1, e.what());
    }
    if (!seen.insert(out.back().sample_id).second) {
      throw CorpusError(path, i + 1, "duplicate id \"" + out.back().sample_id + "\"");
    }
  }
  return out;
}

JsonlWriter::JsonlWriter(std::filesystem::path path) : path_(std::move(path)) {
  tmp_ = path_;
  tmp_ += ".partial";
  if (path_.has_parent_path()) std::filesystem::create_directories(path_.parent_path());
  out_.open(tmp_, std::ios::binary | std::ios::trunc);
  if (!out_) throw CorpusError(tmp_, 0, "cannot open for writing");
}

JsonlWriter::~JsonlWriter() {
  if (!committed_) out_.close();
}

void JsonlWriter::flush() {
  out_.flush();
  if (!out_) throw CorpusError(tmp_, 0, "flush failed");
}

void JsonlWriter::discard() {
  out_.close();
  std::error_code ec;
  std::filesystem::remove(tmp_, ec);
  committed_ = true;
}

void JsonlWriter::write(const ojson& line) {
  out_ << line.dump() << '\n';
  if (!out_) throw CorpusError(tmp_, count_ + 1, "write failed");
  ++count_;
}

void JsonlWriter::commit() {
  out_.close();
  if (!out_) throw CorpusError(tmp_, 0, "flush failed");
  std::filesystem::rename(tmp_, path_);
  committed_ = true;
}

void write_records(const std::vector<AuditRecord>& records, const std::filesystem::path& path) {
  JsonlWriter w(path);
  for (const auto& r : records) w.write(to_json(r));
  w.commit();
}

void write_json_file(const ojson& j, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw CorpusError(path, 0, "cannot open for writing");
  out << j.dump(2) << '\n';
  if (!out) throw CorpusError(path, 0, "write failed");
}

}  // namespace vitaudit
