#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <semaphore>
#include <string>
#include <vector>

#include "cup/prompt.hpp"

namespace cup {

struct CompletionRequest {
  std::string model_id;
  std::string prompt;
  double temperature = 0.2;
  int max_tokens = 256;
  std::optional<std::int64_t> seed;
  std::string prompt_version{kPromptVersion};

  // ContractError unless temperature in [0, 2], prompt non-empty and
  // max_tokens positive.
  void validate() const;
};

class LlmBackend {
 public:
  virtual ~LlmBackend() = default;
  virtual std::string id() const = 0;
  // Raw model text. Throws TransportError; never returns silently empty.
  virtual std::string complete(const CompletionRequest& request) = 0;
};

/// Deterministic offline backend.
///
/// Either a rule table (first rule whose model matches and whose `contains`
/// substrings all occur in the prompt wins) or an arbitrary handler. Unknown
/// models raise a backend-config error.
class MockBackend final : public LlmBackend {
 public:
  struct Rule {
    std::string model_id;  // "*" matches any configured model
    std::vector<std::string> contains;
    std::string response;
  };
  using Handler = std::function<std::string(const CompletionRequest&)>;

  MockBackend(std::vector<std::string> models, std::vector<Rule> rules);
  MockBackend(std::vector<std::string> models, Handler handler);

  // {"models": [...], "rules": [{"model": "...", "contains": [...], "response": "..."}]}
  static std::unique_ptr<MockBackend> from_fixture_file(const std::filesystem::path& path);

  std::string id() const override { return "mock"; }
  std::string complete(const CompletionRequest& request) override;
  std::size_t calls() const { return calls_.load(); }

 private:
  std::vector<std::string> models_;
  std::vector<Rule> rules_;
  Handler handler_;
  std::atomic<std::size_t> calls_{0};
};

struct HttpBackendConfig {
  std::string endpoint;  // e.g. http://127.0.0.1:8000/v1 ; "/chat/completions" is appended
  std::string api_key_env = "CUP_API_KEY";
  int max_retries = 3;
  int backoff_ms = 500;  // doubled on every retry
  int timeout_seconds = 120;
  int concurrency = 4;
  std::vector<std::string> models;  // empty = accept any
};

// Chat-completions client: POST {model, messages:[{role:user, content}],
// temperature, max_tokens[, seed]} and read choices[0].message.content.
class HttpChatBackend final : public LlmBackend {
 public:
  explicit HttpChatBackend(HttpBackendConfig config);
  ~HttpChatBackend() override;

  std::string id() const override { return "http:" + config_.endpoint; }
  std::string complete(const CompletionRequest& request) override;

 private:
  std::string attempt(const CompletionRequest& request, bool& retryable);

  HttpBackendConfig config_;
  std::string scheme_host_port_;
  std::string base_path_;
  std::unique_ptr<std::counting_semaphore<>> in_flight_;
};

/// Append-only response cache (one JSON record per line).
///
/// Keys are SHA-256 over the canonical request (model, prompt digest,
/// temperature, max_tokens, seed, prompt version). Records are verified on
/// load; a bad record raises CacheIntegrityError naming its key. Writes are
/// serialized internally.
class ResponseCache {
 public:
  explicit ResponseCache(std::filesystem::path file);

  static std::string key(const CompletionRequest& request);

  std::optional<std::string> lookup(const CompletionRequest& request) const;
  void store(const CompletionRequest& request, const std::string& response);
  std::size_t size() const;
  const std::filesystem::path& file() const { return file_; }

 private:
  std::filesystem::path file_;
  mutable std::mutex mu_;
  std::map<std::string, std::string> entries_;
};

inline std::string complete(const CompletionRequest& request, LlmBackend& backend) {
  request.validate();
  return backend.complete(request);
}

// Hit: cached bytes. Miss: backend call, then store. A null cache degrades to
// complete().
std::string cached_complete(const CompletionRequest& request, LlmBackend& backend, ResponseCache* cache);

}  // namespace cup
