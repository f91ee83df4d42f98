#pragma once

// Provider-agnostic chat completion: request/response types, a content
// addressed response cache, retrying HTTP backends for the three provider
// families, a deterministic mock, and the family-separation guard.

#include <atomic>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <semaphore>
#include <string>
#include <string_view>
#include <vector>

#include "liipa/error.hpp"

namespace liipa {

enum class Family { FamilyA, FamilyB, FamilyC, Mock };

std::string_view to_string(Family f);
/// Accepts "familya", "a", "FamilyA", "mock" (case-insensitive).
std::optional<Family> parse_family(std::string_view s);

struct ChatRequest {
    std::string system;
    std::string human;
    double temperature = 0.0;
    int max_tokens = 1024;
    std::string model_tag;
    Family family = Family::Mock;
    /// Distinguishes independent samples of an otherwise identical request
    /// (tree-of-thoughts branches). Part of the cache identity.
    unsigned sample_index = 0;
};

struct ChatResponse {
    std::string text;
    bool cached = false;
    std::uint64_t latency_ms = 0;
};

struct CacheKey {
    /// Lowercase hex SHA-256 over the canonical request serialization.
    std::string digest;

    static CacheKey of(const ChatRequest& request);
    bool operator==(const CacheKey&) const = default;
};

// ---------------------------------------------------------------------------
// Backends
// ---------------------------------------------------------------------------

/// Raw transport. Implementations must be safe to call from several threads.
class ChatBackend {
public:
    virtual ~ChatBackend() = default;
    virtual ChatResponse complete(const ChatRequest& request) = 0;
};

/// Thrown by transports; `transient` failures are retried, others are not.
class TransportFailure : public Error {
public:
    TransportFailure(bool transient, const std::string& what)
        : Error(ErrorKind::Transport, what), transient_(transient) {}
    [[nodiscard]] bool transient() const noexcept { return transient_; }

private:
    bool transient_;
};

struct RetryPolicy {
    int max_attempts = 5;
    std::chrono::milliseconds base_delay{500};
    double factor = 2.0;
    double jitter = 0.2;
};

/// Delay before retry number `attempt` (1-based), jittered deterministically
/// from `salt` so replays pace identically.
std::chrono::milliseconds backoff_delay(const RetryPolicy& policy, int attempt, std::uint64_t salt);

using Sleeper = std::function<void(std::chrono::milliseconds)>;

/// Call `backend` and retry transient failures per `policy`.
ChatResponse complete_with_retry(ChatBackend& backend, const ChatRequest& request,
                                 const RetryPolicy& policy, const Sleeper& sleep = {});

enum class ApiStyle { OpenAI, Anthropic, Gemini };

struct EndpointConfig {
    ApiStyle api = ApiStyle::OpenAI;
    std::string base_url;
    std::string model;
    /// Environment variable holding the credential, e.g. LIIPA_FAMILYA_KEY.
    std::string key_env;
    std::chrono::seconds timeout{120};
};

std::optional<ApiStyle> parse_api_style(std::string_view s);
/// Default endpoint for a family: A → OpenAI-style, B → Anthropic-style,
/// C → Gemini-style, credentials in LIIPA_FAMILY{A,B,C}_KEY.
EndpointConfig default_endpoint(Family family);

class HttpBackend final : public ChatBackend {
public:
    explicit HttpBackend(EndpointConfig config);
    ChatResponse complete(const ChatRequest& request) override;

    [[nodiscard]] const EndpointConfig& config() const { return config_; }

private:
    EndpointConfig config_;
};

// ---------------------------------------------------------------------------
// Mock
// ---------------------------------------------------------------------------

struct MockOptions {
    /// Word injected into generated stories with probability `fault_rate`.
    std::string fault_word;
    double fault_rate = 0.0;
    /// Probability that a structured route answers without its required
    /// format (repaired when the request carries the reprompt suffix).
    double malformed_rate = 0.0;
};

/// Route tag prompts embed so the mock can answer in the expected format.
std::string_view route_of(std::string_view system_prompt);
std::string route_sentinel(std::string_view route);

/// Pure function of the request's digest and route.
ChatResponse mock_complete(const ChatRequest& request, const MockOptions& options = {});

class MockBackend final : public ChatBackend {
public:
    explicit MockBackend(MockOptions options = {}) : options_(std::move(options)) {}
    ChatResponse complete(const ChatRequest& request) override {
        return mock_complete(request, options_);
    }

private:
    MockOptions options_;
};

// ---------------------------------------------------------------------------
// Cache and client
// ---------------------------------------------------------------------------

/// In-memory map optionally backed by a directory of `<digest>.json` files.
/// Entries are never overwritten once stored.
class ResponseCache {
public:
    ResponseCache() = default;
    explicit ResponseCache(std::filesystem::path dir);

    std::optional<std::string> get(const CacheKey& key);
    void put(const CacheKey& key, const ChatRequest& request, const std::string& text);

    [[nodiscard]] const std::optional<std::filesystem::path>& dir() const { return dir_; }

private:
    std::optional<std::filesystem::path> dir_;
    std::mutex mu_;
    std::map<std::string, std::string> memory_;
};

/// Per-backend token-bucket pacing. rate <= 0 disables pacing.
class TokenBucket {
public:
    TokenBucket(double rate_per_second, double burst);
    void acquire();

private:
    double rate_;
    double burst_;
    double tokens_;
    std::chrono::steady_clock::time_point last_;
    std::mutex mu_;
};

struct ClientOptions {
    std::optional<std::filesystem::path> cache_dir;
    int max_concurrency = 4;
    double requests_per_second = 0.0;
    RetryPolicy retry{};
    Sleeper sleep{};
};

struct ClientStats {
    std::uint64_t requests = 0;
    std::uint64_t cache_hits = 0;
    std::uint64_t backend_calls = 0;
};

/// Routes requests to the backend registered for their family, through the
/// cache, a concurrency ceiling, pacing and retries.
class LlmClient {
public:
    explicit LlmClient(ClientOptions options = {});

    void set_backend(Family family, std::shared_ptr<ChatBackend> backend);
    [[nodiscard]] bool has_backend(Family family) const;

    ChatResponse complete(const ChatRequest& request);

    [[nodiscard]] ClientStats stats() const;

private:
    struct Slot {
        std::shared_ptr<ChatBackend> backend;
        std::unique_ptr<std::counting_semaphore<>> ceiling;
        std::unique_ptr<TokenBucket> pacing;
    };

    ClientOptions options_;
    std::unique_ptr<ResponseCache> cache_;
    std::map<Family, Slot> slots_;
    std::atomic<std::uint64_t> requests_{0};
    std::atomic<std::uint64_t> hits_{0};
    std::atomic<std::uint64_t> calls_{0};
};

/// One request/response pair as recorded in traces.
struct ChatExchange {
    ChatRequest request;
    ChatResponse response;
    CacheKey key;
};

/// A model as a pipeline stage sees it: which client, family and model tag,
/// and the decoding settings used for that stage.
struct ModelRef {
    LlmClient* client = nullptr;
    Family family = Family::Mock;
    std::string model_tag;
    double temperature = 0.0;
    int max_tokens = 1024;

    ChatExchange ask(std::string system, std::string human, unsigned sample_index = 0) const;
    [[nodiscard]] ModelRef with_temperature(double t) const {
        ModelRef r = *this;
        r.temperature = t;
        return r;
    }
};

// ---------------------------------------------------------------------------
// Self-preference guard
// ---------------------------------------------------------------------------

/// Violations where the labelling family equals the narrative-generation or
/// wordlist family. Unknown stages are passed as nullopt; Mock is exempt.
std::vector<std::string> check_family_separation(std::optional<Family> generator,
                                                 std::optional<Family> wordlist,
                                                 std::optional<Family> judge);

}  // namespace liipa
