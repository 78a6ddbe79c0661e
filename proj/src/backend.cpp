#include "vitaudit/backend.hpp"

#include <fstream>
#include <sstream>
#include <thread>

#include <boost/archive/iterators/base64_from_binary.hpp>
#include <boost/archive/iterators/transform_width.hpp>
#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "vitaudit/text.hpp"

namespace vitaudit {

std::string_view to_string(Role r) { return r == Role::System ? "system" : "user"; }

void BackendProfile::validate() const {
  if (max_in_flight < 1) throw std::invalid_argument("backend '" + name + "': max_in_flight must be >= 1");
  if (timeout.count() <= 0) throw std::invalid_argument("backend '" + name + "': timeout must be > 0");
  if (max_retries < 0) throw std::invalid_argument("backend '" + name + "': max_retries must be >= 0");
}

InFlightLimiter::InFlightLimiter(int limit) : limit_(limit) {
  if (limit < 1) throw std::invalid_argument("in-flight limit must be >= 1");
}

void InFlightLimiter::acquire() {
  std::unique_lock lock(mu_);
  cv_.wait(lock, [&] { return active_ < limit_; });
  ++active_;
}

void InFlightLimiter::release() {
  {
    std::lock_guard lock(mu_);
    --active_;
  }
  cv_.notify_one();
}

bool is_uri(std::string_view ref) {
  return ref.starts_with("http://") || ref.starts_with("https://") || ref.starts_with("data:");
}

Backend::Backend(BackendProfile profile) : profile_((profile.validate(), std::move(profile))), limiter_(profile_.max_in_flight) {}

Completion Backend::complete(std::span<const ChatMessage> messages) {
  if (messages.empty()) throw BackendError(BackendError::Kind::InvalidRequest, "empty message list");
  for (const auto& m : messages) {
    if (!m.image) continue;
    if (m.role == Role::System) {
      throw BackendError(BackendError::Kind::InvalidRequest, "system messages cannot carry an image");
    }
    if (is_uri(*m.image)) continue;
    std::ifstream probe(*m.image, std::ios::binary);
    if (!probe || std::filesystem::is_directory(*m.image)) {
      throw BackendError(BackendError::Kind::UnreadableImage, "cannot read image '" + *m.image + "'");
    }
  }
  InFlightLimiter::Guard slot(limiter_);
  ++calls_;
  return do_complete(messages);
}

std::string fingerprint(std::span<const ChatMessage> messages) {
  std::string joined;
  for (const auto& m : messages) {
    joined += to_string(m.role);
    joined += '\x1f';
    joined += m.text;
    joined += '\x1e';
  }
  return text::to_hex(text::fnv1a64(joined));
}

MockScript MockScript::parse(std::string_view json_text) {
  const auto j = nlohmann::json::parse(json_text);
  if (!j.is_object()) throw std::invalid_argument("mock script must be a JSON object");
  MockScript s;
  s.fallback = j.value("fallback", std::string());
  if (const auto it = j.find("replies"); it != j.end()) {
    for (const auto& [fp, reply] : it->items()) s.by_fingerprint.emplace(fp, reply.get<std::string>());
  }
  if (const auto it = j.find("rules"); it != j.end()) {
    for (const auto& r : *it) {
      Rule rule;
      const auto& c = r.at("contains");
      if (c.is_string()) {
        rule.contains.push_back(c.get<std::string>());
      } else {
        rule.contains = c.get<std::vector<std::string>>();
      }
      rule.reply = r.at("reply").get<std::string>();
      s.rules.push_back(std::move(rule));
    }
  }
  return s;
}

MockScript MockScript::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open mock script '" + path.string() + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  try {
    return parse(buf.str());
  } catch (const std::exception& e) {
    throw std::runtime_error("mock script '" + path.string() + "': " + e.what());
  }
}

BackendProfile MockBackend::default_profile() {
  BackendProfile p;
  p.name = "mock";
  p.endpoint = "mock://";
  p.model_id = "mock";
  p.vision = true;
  p.max_in_flight = 64;
  return p;
}

MockBackend::MockBackend(MockScript script, BackendProfile profile)
    : Backend(std::move(profile)), script_(std::move(script)) {}

MockBackend::MockBackend(Responder responder, BackendProfile profile)
    : Backend(std::move(profile)), responder_(std::move(responder)) {}

std::optional<std::string> MockBackend::lookup(std::span<const ChatMessage> messages) const {
  if (const auto it = script_.by_fingerprint.find(fingerprint(messages)); it != script_.by_fingerprint.end()) {
    return it->second;
  }
  std::string joined;
  for (const auto& m : messages) {
    joined += m.text;
    joined += '\n';
  }
  for (const auto& rule : script_.rules) {
    bool all = true;
    for (const auto& needle : rule.contains) {
      if (joined.find(needle) == std::string::npos) {
        all = false;
        break;
      }
    }
    if (all) return rule.reply;
  }
  return std::nullopt;
}

Completion MockBackend::do_complete(std::span<const ChatMessage> messages) {
  const int now = ++current_;
  int peak = peak_.load();
  while (now > peak && !peak_.compare_exchange_weak(peak, now)) {
  }
  struct Exit {
    std::atomic<int>& c;
    ~Exit() { --c; }
  } exit{current_};

  if (latency_.count() > 0) std::this_thread::sleep_for(latency_);

  if (responder_) return Completion{responder_(messages), 1};
  if (auto reply = lookup(messages)) return Completion{std::move(*reply), 1};

  const auto fp = fingerprint(messages);
  ++misses_;
  {
    std::lock_guard lock(miss_mu_);
    missed_.push_back(fp);
  }
  spdlog::warn("mock backend: no scripted reply for prompt {} ({}...), using fallback", fp,
               text::utf8_prefix(messages.back().text, 60));
  return Completion{script_.fallback, 1};
}

std::vector<std::string> MockBackend::missed_fingerprints() const {
  std::lock_guard lock(miss_mu_);
  return missed_;
}

std::string base64_encode(std::string_view bytes) {
  using namespace boost::archive::iterators;
  using It = base64_from_binary<transform_width<std::string_view::const_iterator, 6, 8>>;
  std::string out(It(bytes.begin()), It(bytes.end()));
  out.append((3 - bytes.size() % 3) % 3, '=');
  return out;
}

}  // namespace vitaudit
