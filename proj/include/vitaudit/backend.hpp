#pragma once

// Chat-completion backends: a live HTTP client speaking the common
// OpenAI-compatible JSON protocol and a scripted mock for offline runs.

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace vitaudit {

enum class Role { System, User };

std::string_view to_string(Role r);

struct ChatMessage {
  Role role = Role::User;
  std::string text;
  /// File path or http(s)/data URI. Files are read and base64-encoded when
  /// the request is built.
  std::optional<std::string> image;

  static ChatMessage system(std::string text) { return {Role::System, std::move(text), std::nullopt}; }
  static ChatMessage user(std::string text, std::optional<std::string> image = std::nullopt) {
    return {Role::User, std::move(text), std::move(image)};
  }
};

struct BackendProfile {
  std::string name = "default";
  std::string endpoint;  // e.g. http://localhost:8000/v1/chat/completions
  std::string model_id;
  std::chrono::milliseconds timeout{120'000};
  int max_retries = 3;
  int max_in_flight = 4;
  std::chrono::milliseconds backoff_base{500};
  bool vision = false;
  std::string api_key_env = "VITAUDIT_API_KEY";
  /// Sampling is greedy (temperature 0). Setting this is an explicit escape
  /// hatch and is reported in every manifest.
  std::optional<double> temperature_override;

  /// Throws std::invalid_argument.
  void validate() const;
};

class BackendError : public std::runtime_error {
 public:
  enum class Kind { Transport, Timeout, Status, UnreadableImage, InvalidRequest, BadResponse };

  BackendError(Kind kind, const std::string& what, int attempts = 0, int status = 0)
      : std::runtime_error(what), kind_(kind), attempts_(attempts), status_(status) {}

  Kind kind() const noexcept { return kind_; }
  int attempts() const noexcept { return attempts_; }
  /// HTTP status for Kind::Status, otherwise 0.
  int status() const noexcept { return status_; }

 private:
  Kind kind_;
  int attempts_;
  int status_;
};

struct Completion {
  std::string text;
  int attempts = 1;
};

/// Caps the number of concurrently outstanding requests.
class InFlightLimiter {
 public:
  explicit InFlightLimiter(int limit);

  void acquire();
  void release();
  int limit() const { return limit_; }

  class Guard {
   public:
    explicit Guard(InFlightLimiter& l) : l_(l) { l_.acquire(); }
    ~Guard() { l_.release(); }
    Guard(const Guard&) = delete;
    Guard& operator=(const Guard&) = delete;

   private:
    InFlightLimiter& l_;
  };

 private:
  std::mutex mu_;
  std::condition_variable cv_;
  int limit_;
  int active_ = 0;
};

/// A chat-completion responder shared by all workers. complete() validates
/// the request (including image readability) before anything is sent and
/// holds an in-flight slot for the duration of the call.
class Backend {
 public:
  explicit Backend(BackendProfile profile);
  virtual ~Backend() = default;

  Backend(const Backend&) = delete;
  Backend& operator=(const Backend&) = delete;

  Completion complete(std::span<const ChatMessage> messages);

  const BackendProfile& profile() const { return profile_; }
  std::uint64_t calls() const { return calls_.load(); }

 protected:
  virtual Completion do_complete(std::span<const ChatMessage> messages) = 0;

 private:
  BackendProfile profile_;
  InFlightLimiter limiter_;
  std::atomic<std::uint64_t> calls_{0};
};

/// True for http://, https:// and data: references.
bool is_uri(std::string_view ref);

/// Stable 64-bit hash of the role-tagged message texts, as 16 hex digits.
std::string fingerprint(std::span<const ChatMessage> messages);

/// Prompt-to-reply table. Lookup order: exact fingerprint, then substring
/// rules in file order (a rule matches when every listed substring occurs
/// in the concatenated message texts), then the fallback.
struct MockScript {
  struct Rule {
    std::vector<std::string> contains;
    std::string reply;
  };

  std::map<std::string, std::string> by_fingerprint;
  std::vector<Rule> rules;
  std::string fallback;

  /// JSON: {"fallback": "...", "replies": {"<fingerprint>": "..."},
  ///        "rules": [{"contains": ["...", ...], "reply": "..."}]}
  static MockScript load(const std::filesystem::path& path);
  static MockScript parse(std::string_view json_text);
};

class MockBackend : public Backend {
 public:
  using Responder = std::function<std::string(std::span<const ChatMessage>)>;

  MockBackend(MockScript script, BackendProfile profile = default_profile());
  /// Replies computed by `responder`; used by tests that need per-call logic.
  MockBackend(Responder responder, BackendProfile profile = default_profile());

  static BackendProfile default_profile();

  /// Simulated latency per call, to exercise concurrency.
  void set_latency(std::chrono::microseconds d) { latency_ = d; }

  std::uint64_t misses() const { return misses_.load(); }
  std::vector<std::string> missed_fingerprints() const;
  int peak_in_flight() const { return peak_.load(); }

 protected:
  Completion do_complete(std::span<const ChatMessage> messages) override;

 private:
  std::optional<std::string> lookup(std::span<const ChatMessage> messages) const;

  MockScript script_;
  Responder responder_;
  std::chrono::microseconds latency_{0};
  std::atomic<int> current_{0};
  std::atomic<int> peak_{0};
  std::atomic<std::uint64_t> misses_{0};
  mutable std::mutex miss_mu_;
  std::vector<std::string> missed_;
};

class HttpBackend : public Backend {
 public:
  explicit HttpBackend(BackendProfile profile);

  /// Request body for `messages` (images inlined as base64 data URIs).
  std::string build_request_body(std::span<const ChatMessage> messages) const;

  /// Extracts choices[0].message.content. Throws BackendError(BadResponse).
  static std::string parse_response_body(const std::string& body);

 protected:
  Completion do_complete(std::span<const ChatMessage> messages) override;

 private:
  std::string scheme_host_port_;
  std::string path_;
  std::string api_key_;
};

/// Standard base64 with padding.
std::string base64_encode(std::string_view bytes);

}  // namespace vitaudit
