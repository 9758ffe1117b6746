#define CPPHTTPLIB_OPENSSL_SUPPORT
#include "httplib.h"

#include "cup/llm.hpp"

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <thread>

#include "json.hpp"

#include "cup/digest.hpp"
#include "cup/error.hpp"
#include "cup/log.hpp"

namespace cup {

void CompletionRequest::validate() const {
  if (prompt.empty()) throw ContractError("completion request has an empty prompt");
  if (!(temperature >= 0.0 && temperature <= 2.0)) throw ContractError("temperature must be in [0, 2]");
  if (max_tokens <= 0) throw ContractError("max_tokens must be positive");
  if (model_id.empty()) throw ContractError("completion request has no model id");
}

// --- mock --------------------------------------------------------------------

MockBackend::MockBackend(std::vector<std::string> models, std::vector<Rule> rules)
    : models_(std::move(models)), rules_(std::move(rules)) {}

MockBackend::MockBackend(std::vector<std::string> models, Handler handler)
    : models_(std::move(models)), handler_(std::move(handler)) {}

std::unique_ptr<MockBackend> MockBackend::from_fixture_file(const std::filesystem::path& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("mock fixture " + path.string() + ": " + e.what());
  }
  try {
    std::vector<Rule> rules;
    for (const auto& r : j.at("rules")) {
      Rule rule;
      rule.model_id = r.value("model", std::string("*"));
      rule.contains = r.value("contains", std::vector<std::string>{});
      rule.response = r.at("response").get<std::string>();
      rules.push_back(std::move(rule));
    }
    return std::make_unique<MockBackend>(j.at("models").get<std::vector<std::string>>(), std::move(rules));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("mock fixture " + path.string() + ": " + e.what());
  }
}

std::string MockBackend::complete(const CompletionRequest& request) {
  request.validate();
  if (std::find(models_.begin(), models_.end(), request.model_id) == models_.end()) {
    throw TransportError(TransportKind::kBackendConfig, "mock backend has no model '" + request.model_id + "'");
  }
  ++calls_;
  if (handler_) {
    std::string text = handler_(request);
    if (text.empty()) throw TransportError(TransportKind::kMalformedReply, "mock handler returned empty text");
    return text;
  }
  for (const auto& rule : rules_) {
    if (rule.model_id != "*" && rule.model_id != request.model_id) continue;
    const bool all = std::all_of(rule.contains.begin(), rule.contains.end(),
                                 [&](const std::string& s) { return request.prompt.find(s) != std::string::npos; });
    if (all) return rule.response;
  }
  throw TransportError(TransportKind::kMalformedReply,
                       "mock backend has no fixture for this prompt (model " + request.model_id + ")");
}

// --- http --------------------------------------------------------------------

HttpChatBackend::HttpChatBackend(HttpBackendConfig config) : config_(std::move(config)) {
  const auto scheme_end = config_.endpoint.find("://");
  if (config_.endpoint.empty() || scheme_end == std::string::npos) {
    throw ConfigError("http backend endpoint must look like http(s)://host[:port][/path], got '" +
                      config_.endpoint + "'");
  }
  const auto path_start = config_.endpoint.find('/', scheme_end + 3);
  scheme_host_port_ = config_.endpoint.substr(0, path_start);
  base_path_ = path_start == std::string::npos ? "" : config_.endpoint.substr(path_start);
  while (!base_path_.empty() && base_path_.back() == '/') base_path_.pop_back();
  in_flight_ = std::make_unique<std::counting_semaphore<>>(std::max(1, config_.concurrency));
}

HttpChatBackend::~HttpChatBackend() = default;

std::string HttpChatBackend::attempt(const CompletionRequest& request, bool& retryable) {
  retryable = false;
  httplib::Client client(scheme_host_port_);
  client.set_connection_timeout(config_.timeout_seconds, 0);
  client.set_read_timeout(config_.timeout_seconds, 0);
  client.set_write_timeout(config_.timeout_seconds, 0);

  httplib::Headers headers;
  if (!config_.api_key_env.empty()) {
    if (const char* key = std::getenv(config_.api_key_env.c_str()); key && *key) {
      headers.emplace("Authorization", std::string("Bearer ") + key);
    }
  }

  nlohmann::ordered_json body;
  body["model"] = request.model_id;
  body["messages"] = nlohmann::ordered_json::array({{{"role", "user"}, {"content", request.prompt}}});
  body["temperature"] = request.temperature;
  body["max_tokens"] = request.max_tokens;
  if (request.seed) body["seed"] = *request.seed;

  auto res = client.Post(base_path_ + "/chat/completions", headers, body.dump(), "application/json");
  if (!res) {
    retryable = true;
    throw TransportError(TransportKind::kUnavailable,
                         "request to " + config_.endpoint + " failed: " + httplib::to_string(res.error()));
  }
  const int status = res->status;
  if (status == 401 || status == 403) {
    throw TransportError(TransportKind::kAuth, "backend rejected credentials (HTTP " + std::to_string(status) + ")");
  }
  if (status == 429) {
    retryable = true;
    throw TransportError(TransportKind::kRateLimit, "backend rate limit (HTTP 429)");
  }
  if (status >= 500) {
    retryable = true;
    throw TransportError(TransportKind::kUnavailable, "backend error HTTP " + std::to_string(status));
  }
  if (status == 404) {
    throw TransportError(TransportKind::kBackendConfig, "backend returned 404 for model " + request.model_id);
  }
  if (status != 200) {
    throw TransportError(TransportKind::kMalformedReply, "unexpected HTTP status " + std::to_string(status));
  }
  try {
    const auto reply = nlohmann::json::parse(res->body);
    std::string text = reply.at("choices").at(0).at("message").at("content").get<std::string>();
    if (text.empty()) throw TransportError(TransportKind::kMalformedReply, "backend returned empty content");
    return text;
  } catch (const nlohmann::json::exception& e) {
    throw TransportError(TransportKind::kMalformedReply, std::string("malformed chat-completions reply: ") + e.what());
  }
}

std::string HttpChatBackend::complete(const CompletionRequest& request) {
  request.validate();
  if (!config_.models.empty() &&
      std::find(config_.models.begin(), config_.models.end(), request.model_id) == config_.models.end()) {
    throw TransportError(TransportKind::kBackendConfig, "model '" + request.model_id + "' is not configured");
  }
  in_flight_->acquire();
  struct Release {
    std::counting_semaphore<>* s;
    ~Release() { s->release(); }
  } release{in_flight_.get()};

  for (int tries = 0;; ++tries) {
    bool retryable = false;
    try {
      return attempt(request, retryable);
    } catch (const TransportError& e) {
      if (!retryable || tries >= config_.max_retries) throw;
      const auto delay = std::chrono::milliseconds(static_cast<long long>(config_.backoff_ms) << tries);
      logger()->warn("{} (retry {}/{} in {} ms)", e.what(), tries + 1, config_.max_retries, delay.count());
      std::this_thread::sleep_for(delay);
    }
  }
}

// --- cache -------------------------------------------------------------------

namespace {

nlohmann::ordered_json canonical(const CompletionRequest& r) {
  nlohmann::ordered_json j;
  j["model_id"] = r.model_id;
  j["prompt_sha256"] = sha256_hex(r.prompt);
  j["temperature"] = r.temperature;
  j["max_tokens"] = r.max_tokens;
  j["seed"] = r.seed ? nlohmann::ordered_json(*r.seed) : nlohmann::ordered_json(nullptr);
  j["prompt_version"] = r.prompt_version;
  return j;
}

}  // namespace

ResponseCache::ResponseCache(std::filesystem::path file) : file_(std::move(file)) {
  if (!std::filesystem::exists(file_)) return;
  std::ifstream in(file_, std::ios::binary);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    nlohmann::ordered_json rec;
    try {
      rec = nlohmann::ordered_json::parse(line);
    } catch (const nlohmann::json::exception&) {
      throw CacheIntegrityError("line " + std::to_string(line_no), "unparsable cache record in " + file_.string());
    }
    const std::string key = rec.value("key", std::string("line " + std::to_string(line_no)));
    try {
      nlohmann::ordered_json digest;
      for (const char* f : {"model_id", "prompt_sha256", "temperature", "max_tokens", "seed", "prompt_version"})
        digest[f] = rec.at(f);
      const std::string response = rec.at("response").get<std::string>();
      if (sha256_hex(digest.dump()) != key) throw CacheIntegrityError(key, "cache key does not match request fields");
      if (sha256_hex(response) != rec.at("response_sha256").get<std::string>())
        throw CacheIntegrityError(key, "cached response bytes do not match their digest");
      entries_.emplace(key, response);
    } catch (const nlohmann::json::exception& e) {
      throw CacheIntegrityError(key, std::string("incomplete cache record: ") + e.what());
    }
  }
}

std::string ResponseCache::key(const CompletionRequest& request) { return sha256_hex(canonical(request).dump()); }

std::optional<std::string> ResponseCache::lookup(const CompletionRequest& request) const {
  const std::string k = key(request);
  std::lock_guard lock(mu_);
  const auto it = entries_.find(k);
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

void ResponseCache::store(const CompletionRequest& request, const std::string& response) {
  nlohmann::ordered_json rec;
  rec["key"] = key(request);
  const nlohmann::ordered_json fields = canonical(request);
  for (auto& [k, v] : fields.items()) rec[k] = v;
  rec["response_sha256"] = sha256_hex(response);
  rec["response"] = response;
  std::lock_guard lock(mu_);
  if (!entries_.emplace(rec["key"].get<std::string>(), response).second) return;
  if (file_.has_parent_path()) std::filesystem::create_directories(file_.parent_path());
  std::ofstream out(file_, std::ios::binary | std::ios::app);
  if (!out) throw IoError("cannot append to cache " + file_.string());
  out << rec.dump() << '\n';
}

std::size_t ResponseCache::size() const {
  std::lock_guard lock(mu_);
  return entries_.size();
}

std::string cached_complete(const CompletionRequest& request, LlmBackend& backend, ResponseCache* cache) {
  request.validate();
  if (!cache) return backend.complete(request);
  if (auto hit = cache->lookup(request)) return *hit;
  std::string text = backend.complete(request);
  cache->store(request, text);
  return text;
}

}  // namespace cup
