#include "vitaudit/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

#include "vitaudit/text.hpp"

namespace vitaudit {
namespace {

using text::trim;

std::string where(const std::string& origin, std::size_t line) { return origin + ":" + std::to_string(line); }

bool is_bare_key_char(char c) {
  return (c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '_' || c == '-' ||
         c == '.';
}

std::string_view strip_comment(std::string_view line) {
  bool in_basic = false;
  bool in_literal = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (in_basic) {
      if (c == '\\') {
        ++i;
      } else if (c == '"') {
        in_basic = false;
      }
    } else if (in_literal) {
      if (c == '\'') in_literal = false;
    } else if (c == '"') {
      in_basic = true;
    } else if (c == '\'') {
      in_literal = true;
    } else if (c == '#') {
      return line.substr(0, i);
    }
  }
  return line;
}

std::string parse_basic_string(std::string_view v, const std::string& loc) {
  std::string out;
  for (std::size_t i = 1; i < v.size(); ++i) {
    const char c = v[i];
    if (c == '"') {
      if (!trim(v.substr(i + 1)).empty()) throw ConfigError(loc, "trailing characters after string");
      return out;
    }
    if (c != '\\') {
      out += c;
      continue;
    }
    if (++i >= v.size()) break;
    switch (v[i]) {
      case '"': out += '"'; break;
      case '\\': out += '\\'; break;
      case 'n': out += '\n'; break;
      case 't': out += '\t'; break;
      default: throw ConfigError(loc, std::string("unsupported escape \\") + v[i]);
    }
  }
  throw ConfigError(loc, "unterminated string");
}

ConfigValue parse_value(std::string_view v, const std::string& loc) {
  v = trim(v);
  if (v.empty()) throw ConfigError(loc, "missing value");
  if (v.front() == '"') return parse_basic_string(v, loc);
  if (v.front() == '\'') {
    const auto close = v.find('\'', 1);
    if (close == std::string_view::npos) throw ConfigError(loc, "unterminated string");
    if (!trim(v.substr(close + 1)).empty()) throw ConfigError(loc, "trailing characters after string");
    return std::string(v.substr(1, close - 1));
  }
  if (v == "true") return true;
  if (v == "false") return false;

  std::string digits;
  for (const char c : v) {
    if (c != '_') digits += c;
  }
  std::int64_t i = 0;
  const auto* end = digits.data() + digits.size();
  const char* first = digits.data() + (digits.front() == '+' ? 1 : 0);
  if (auto [p, ec] = std::from_chars(first, end, i); ec == std::errc() && p == end) return i;
  double d = 0;
  if (auto [p, ec] = std::from_chars(first, end, d); ec == std::errc() && p == end) return d;
  throw ConfigError(loc, "cannot parse value '" + std::string(v) + "'");
}

const char* type_name(const ConfigValue& v) {
  switch (v.index()) {
    case 0: return "string";
    case 1: return "integer";
    case 2: return "float";
    default: return "boolean";
  }
}

std::string as_string(const ConfigValue& v, const std::string& key) {
  if (const auto* s = std::get_if<std::string>(&v)) return *s;
  throw ConfigError(key, std::string("expected a string, got ") + type_name(v));
}

std::int64_t as_int(const ConfigValue& v, const std::string& key) {
  if (const auto* i = std::get_if<std::int64_t>(&v)) return *i;
  throw ConfigError(key, std::string("expected an integer, got ") + type_name(v));
}

double as_double(const ConfigValue& v, const std::string& key) {
  if (const auto* d = std::get_if<double>(&v)) return *d;
  if (const auto* i = std::get_if<std::int64_t>(&v)) return static_cast<double>(*i);
  throw ConfigError(key, std::string("expected a number, got ") + type_name(v));
}

bool as_bool(const ConfigValue& v, const std::string& key) {
  if (const auto* b = std::get_if<bool>(&v)) return *b;
  throw ConfigError(key, std::string("expected a boolean, got ") + type_name(v));
}

int as_count(const ConfigValue& v, const std::string& key) {
  const auto i = as_int(v, key);
  if (i < 0 || i > 1'000'000) throw ConfigError(key, "value out of range");
  return static_cast<int>(i);
}

std::filesystem::path as_path(const ConfigValue& v, const std::string& key, const std::filesystem::path& base) {
  std::filesystem::path p = as_string(v, key);
  if (p.is_relative() && !base.empty()) p = base / p;
  return p;
}

void apply_backend_key(BackendProfile& b, const std::string& name, const ConfigValue& v, const std::string& key) {
  if (name == "endpoint") {
    b.endpoint = as_string(v, key);
  } else if (name == "model") {
    b.model_id = as_string(v, key);
  } else if (name == "timeout_ms") {
    b.timeout = std::chrono::milliseconds(as_int(v, key));
  } else if (name == "max_retries") {
    b.max_retries = as_count(v, key);
  } else if (name == "max_in_flight") {
    b.max_in_flight = as_count(v, key);
  } else if (name == "backoff_ms") {
    b.backoff_base = std::chrono::milliseconds(as_int(v, key));
  } else if (name == "vision") {
    b.vision = as_bool(v, key);
  } else if (name == "api_key_env") {
    b.api_key_env = as_string(v, key);
  } else if (name == "temperature") {
    b.temperature_override = as_double(v, key);
  } else {
    throw ConfigError(key, "unknown key");
  }
}

}  // namespace

ConfigTable ConfigTable::parse(std::string_view text, const std::string& origin) {
  ConfigTable t;
  std::string section;
  std::size_t line_no = 0;
  std::istringstream in{std::string(text)};
  for (std::string raw; std::getline(in, raw);) {
    ++line_no;
    const auto loc = where(origin, line_no);
    const auto line = trim(strip_comment(raw));
    if (line.empty()) continue;

    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError(loc, "malformed section header");
      const auto name = trim(line.substr(1, line.size() - 2));
      if (name.empty() || !std::all_of(name.begin(), name.end(), is_bare_key_char)) {
        throw ConfigError(loc, "invalid section name");
      }
      section = std::string(name);
      continue;
    }

    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw ConfigError(loc, "expected key = value");
    const auto key = trim(line.substr(0, eq));
    if (key.empty() || !std::all_of(key.begin(), key.end(), is_bare_key_char)) {
      throw ConfigError(loc, "invalid key '" + std::string(key) + "'");
    }
    const auto full = section.empty() ? std::string(key) : section + "." + std::string(key);
    if (!t.values_.emplace(full, parse_value(line.substr(eq + 1), loc)).second) {
      throw ConfigError(loc, "duplicate key '" + full + "'");
    }
  }
  return t;
}

ConfigTable ConfigTable::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError(path.string(), "cannot open config file");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(ss.str(), path.string());
}

const ConfigValue* ConfigTable::find(const std::string& key) const {
  const auto it = values_.find(key);
  return it == values_.end() ? nullptr : &it->second;
}

RunConfig::RunConfig() {
  text_backend.name = "text";
  vision_backend.name = "vision";
  vision_backend.vision = true;
}

void RunConfig::apply(const ConfigTable& t, const std::filesystem::path& base_dir) {
  for (const auto& [key, v] : t.values()) {
    std::string name = key;
    if (name.starts_with("run.")) name = name.substr(4);

    if (name.starts_with("backend.text.")) {
      apply_backend_key(text_backend, name.substr(13), v, key);
    } else if (name.starts_with("backend.vision.")) {
      apply_backend_key(vision_backend, name.substr(15), v, key);
    } else if (name == "seed") {
      const auto s = as_int(v, key);
      if (s < 0) throw ConfigError(key, "seed must be non-negative");
      seed = static_cast<std::uint64_t>(s);
    } else if (name == "concurrency") {
      concurrency = as_count(v, key);
    } else if (name == "challenge_fraction") {
      challenge_fraction = as_double(v, key);
    } else if (name == "weights") {
      try {
        weights = WeightScheme::parse(as_string(v, key));
      } catch (const std::invalid_argument& e) {
        throw ConfigError(key, e.what());
      }
    } else if (name == "axes") {
      try {
        axes = AxisSet::parse(as_string(v, key));
      } catch (const std::invalid_argument& e) {
        throw ConfigError(key, e.what());
      }
    } else if (name == "bins") {
      bins = as_count(v, key);
    } else if (name == "taxonomy") {
      taxonomy = as_path(v, key, base_dir);
    } else if (name == "mock_script") {
      mock_script = as_path(v, key, base_dir);
    } else {
      throw ConfigError(key, "unknown key");
    }
  }
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
  RunConfig c;
  c.apply(ConfigTable::load(path), path.parent_path());
  return c;
}

void RunConfig::validate() const {
  if (concurrency < 1) throw ConfigError("concurrency", "must be >= 1");
  if (!(challenge_fraction >= 0.0 && challenge_fraction <= 1.0)) {
    throw ConfigError("challenge_fraction", "must lie in [0, 1]");
  }
  if (bins < 1) throw ConfigError("bins", "must be >= 1");
  if (axes.empty()) throw ConfigError("axes", "select at least one axis");
  if (taxonomy && !std::filesystem::exists(*taxonomy)) {
    throw ConfigError("taxonomy", "file not found: " + taxonomy->string());
  }
  if (mock_script && !std::filesystem::exists(*mock_script)) {
    throw ConfigError("mock_script", "file not found: " + mock_script->string());
  }
}

}  // namespace vitaudit
