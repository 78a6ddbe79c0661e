#include <cstdlib>
#include <fstream>
#include <sstream>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "vitaudit/backend.hpp"

namespace vitaudit {
namespace {

using json = nlohmann::json;

constexpr std::chrono::milliseconds kMaxBackoff{30'000};

std::string mime_for(const std::filesystem::path& p) {
  auto ext = p.extension().string();
  for (auto& c : ext) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  if (ext == ".jpg" || ext == ".jpeg") return "image/jpeg";
  if (ext == ".gif") return "image/gif";
  if (ext == ".webp") return "image/webp";
  if (ext == ".bmp") return "image/bmp";
  return "image/png";
}

std::string image_url(const std::string& ref) {
  if (is_uri(ref)) return ref;
  std::ifstream in(ref, std::ios::binary);
  if (!in) throw BackendError(BackendError::Kind::UnreadableImage, "cannot read image '" + ref + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return "data:" + mime_for(ref) + ";base64," + base64_encode(buf.str());
}

bool retryable_status(int status) { return status == 429 || status >= 500; }

}  // namespace

HttpBackend::HttpBackend(BackendProfile profile) : Backend(std::move(profile)) {
  const auto& url = this->profile().endpoint;
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) {
    throw std::invalid_argument("backend '" + this->profile().name + "': endpoint '" + url + "' has no scheme");
  }
  const auto path_start = url.find('/', scheme_end + 3);
  scheme_host_port_ = url.substr(0, path_start);
  path_ = path_start == std::string::npos ? "/v1/chat/completions" : url.substr(path_start);
  if (const char* key = std::getenv(this->profile().api_key_env.c_str()); key != nullptr) api_key_ = key;
}

std::string HttpBackend::build_request_body(std::span<const ChatMessage> messages) const {
  json body;
  body["model"] = profile().model_id;
  body["temperature"] = profile().temperature_override.value_or(0.0);
  json msgs = json::array();
  for (const auto& m : messages) {
    json jm;
    jm["role"] = std::string(to_string(m.role));
    if (m.image) {
      jm["content"] = json::array({
          {{"type", "text"}, {"text", m.text}},
          {{"type", "image_url"}, {"image_url", {{"url", image_url(*m.image)}}}},
      });
    } else {
      jm["content"] = m.text;
    }
    msgs.push_back(std::move(jm));
  }
  body["messages"] = std::move(msgs);
  return body.dump();
}

std::string HttpBackend::parse_response_body(const std::string& body) {
  json j;
  try {
    j = json::parse(body);
  } catch (const json::parse_error& e) {
    throw BackendError(BackendError::Kind::BadResponse, std::string("response is not JSON: ") + e.what());
  }
  const auto choices = j.find("choices");
  if (choices == j.end() || !choices->is_array() || choices->empty()) {
    throw BackendError(BackendError::Kind::BadResponse, "response has no choices");
  }
  const auto& msg = (*choices)[0].value("message", json::object());
  const auto content = msg.find("content");
  if (content == msg.end()) throw BackendError(BackendError::Kind::BadResponse, "first choice has no message content");
  if (content->is_string()) return content->get<std::string>();
  if (content->is_array()) {
    std::string out;
    for (const auto& part : *content) {
      if (part.value("type", "") == "text") out += part.value("text", "");
    }
    return out;
  }
  throw BackendError(BackendError::Kind::BadResponse, "unsupported message content type");
}

Completion HttpBackend::do_complete(std::span<const ChatMessage> messages) {
  const auto& p = profile();
  const std::string body = build_request_body(messages);

  httplib::Headers headers;
  if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);

  const int max_attempts = p.max_retries + 1;
  for (int attempt = 1;; ++attempt) {
    httplib::Client client(scheme_host_port_);
    const auto secs = std::chrono::duration_cast<std::chrono::seconds>(p.timeout);
    const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(p.timeout - secs);
    client.set_connection_timeout(secs.count(), usecs.count());
    client.set_read_timeout(secs.count(), usecs.count());
    client.set_write_timeout(secs.count(), usecs.count());

    auto res = client.Post(path_, headers, body, "application/json");

    std::optional<BackendError> failure;
    if (!res) {
      const auto err = res.error();
      const bool timeout = err == httplib::Error::ConnectionTimeout || err == httplib::Error::Read;
      failure.emplace(timeout ? BackendError::Kind::Timeout : BackendError::Kind::Transport,
                      "request to " + p.endpoint + " failed: " + httplib::to_string(err), attempt);
    } else if (res->status >= 200 && res->status < 300) {
      return Completion{parse_response_body(res->body), attempt};
    } else {
      BackendError e(BackendError::Kind::Status,
                     "server returned HTTP " + std::to_string(res->status) + " from " + p.endpoint, attempt,
                     res->status);
      if (!retryable_status(res->status)) throw e;
      failure.emplace(e);
    }

    if (attempt >= max_attempts) {
      throw BackendError(failure->kind(),
                         std::string(failure->what()) + " (after " + std::to_string(attempt) + " attempts)", attempt,
                         failure->status());
    }
    auto delay = p.backoff_base * (1LL << std::min(attempt - 1, 16));
    if (delay > kMaxBackoff) delay = kMaxBackoff;
    spdlog::debug("backend {}: attempt {} failed ({}), retrying in {} ms", p.name, attempt, failure->what(),
                  delay.count());
    std::this_thread::sleep_for(delay);
  }
}

}  // namespace vitaudit
