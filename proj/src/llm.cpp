#include "liipa/llm.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <thread>

#include <json.hpp>

#include "liipa/core.hpp"
#include "liipa/io.hpp"

namespace liipa {

std::string_view to_string(Family f) {
    switch (f) {
        case Family::FamilyA: return "familya";
        case Family::FamilyB: return "familyb";
        case Family::FamilyC: return "familyc";
        case Family::Mock: return "mock";
    }
    return "?";
}

std::optional<Family> parse_family(std::string_view s) {
    std::string lower;
    for (char c : s) lower.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    if (lower == "familya" || lower == "a") return Family::FamilyA;
    if (lower == "familyb" || lower == "b") return Family::FamilyB;
    if (lower == "familyc" || lower == "c") return Family::FamilyC;
    if (lower == "mock") return Family::Mock;
    return std::nullopt;
}

CacheKey CacheKey::of(const ChatRequest& r) {
    char temp[32];
    std::snprintf(temp, sizeof temp, "%.17g", r.temperature);
    const nlohmann::json canonical = {std::string(to_string(r.family)), r.model_tag, r.system,
                                      r.human, std::string(temp), r.max_tokens, r.sample_index};
    return CacheKey{sha256_hex(canonical.dump())};
}

// ---------------------------------------------------------------------------
// Retry
// ---------------------------------------------------------------------------

std::chrono::milliseconds backoff_delay(const RetryPolicy& policy, int attempt,
                                        std::uint64_t salt) {
    const double base = static_cast<double>(policy.base_delay.count()) *
                        std::pow(policy.factor, std::max(0, attempt - 1));
    Rng rng(derive_seed(salt, "backoff", static_cast<std::uint64_t>(attempt)));
    const double j = (rng.uniform_real() * 2.0 - 1.0) * policy.jitter;
    return std::chrono::milliseconds(static_cast<long long>(std::llround(base * (1.0 + j))));
}

ChatResponse complete_with_retry(ChatBackend& backend, const ChatRequest& request,
                                 const RetryPolicy& policy, const Sleeper& sleep) {
    const int attempts = std::max(1, policy.max_attempts);
    const auto salt = derive_seed(0, request.human);
    for (int attempt = 1;; ++attempt) {
        try {
            return backend.complete(request);
        } catch (const TransportFailure& e) {
            if (!e.transient() || attempt >= attempts) {
                if (e.transient())
                    throw TransportFailure(
                        true, "retries exhausted after " + std::to_string(attempt) +
                                  " attempts: " + e.what());
                throw;
            }
            const auto delay = backoff_delay(policy, attempt, salt);
            if (sleep)
                sleep(delay);
            else
                std::this_thread::sleep_for(delay);
        }
    }
}

// ---------------------------------------------------------------------------
// Cache
// ---------------------------------------------------------------------------

ResponseCache::ResponseCache(std::filesystem::path dir) : dir_(std::move(dir)) {
    std::error_code ec;
    std::filesystem::create_directories(*dir_, ec);
    if (ec) throw Error(ErrorKind::Io, "cannot create cache directory " + dir_->string());
}

std::optional<std::string> ResponseCache::get(const CacheKey& key) {
    {
        std::lock_guard lock(mu_);
        if (auto it = memory_.find(key.digest); it != memory_.end()) return it->second;
    }
    if (!dir_) return std::nullopt;
    const auto path = *dir_ / (key.digest + ".json");
    std::error_code ec;
    if (!std::filesystem::exists(path, ec)) return std::nullopt;
    try {
        auto j = nlohmann::json::parse(read_file(path));
        auto text = j.at("text").get<std::string>();
        std::lock_guard lock(mu_);
        memory_.emplace(key.digest, text);
        return text;
    } catch (const std::exception&) {
        return std::nullopt;
    }
}

void ResponseCache::put(const CacheKey& key, const ChatRequest& request, const std::string& text) {
    {
        std::lock_guard lock(mu_);
        memory_.emplace(key.digest, text);
    }
    if (!dir_) return;
    const auto path = *dir_ / (key.digest + ".json");
    std::error_code ec;
    if (std::filesystem::exists(path, ec)) return;
    ojson j;
    j["digest"] = key.digest;
    j["family"] = std::string(to_string(request.family));
    j["model_tag"] = request.model_tag;
    j["temperature"] = request.temperature;
    j["max_tokens"] = request.max_tokens;
    j["sample_index"] = request.sample_index;
    j["system"] = request.system;
    j["human"] = request.human;
    j["text"] = text;
    write_file_atomic(path, j.dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// Pacing
// ---------------------------------------------------------------------------

TokenBucket::TokenBucket(double rate_per_second, double burst)
    : rate_(rate_per_second), burst_(std::max(1.0, burst)), tokens_(burst_),
      last_(std::chrono::steady_clock::now()) {}

void TokenBucket::acquire() {
    if (rate_ <= 0) return;
    for (;;) {
        std::chrono::duration<double> wait{};
        {
            std::lock_guard lock(mu_);
            const auto now = std::chrono::steady_clock::now();
            tokens_ = std::min(burst_, tokens_ + rate_ * std::chrono::duration<double>(now - last_).count());
            last_ = now;
            if (tokens_ >= 1.0) {
                tokens_ -= 1.0;
                return;
            }
            wait = std::chrono::duration<double>((1.0 - tokens_) / rate_);
        }
        std::this_thread::sleep_for(wait);
    }
}

// ---------------------------------------------------------------------------
// Client
// ---------------------------------------------------------------------------

LlmClient::LlmClient(ClientOptions options)
    : options_(std::move(options)),
      cache_(options_.cache_dir ? std::make_unique<ResponseCache>(*options_.cache_dir)
                                : std::make_unique<ResponseCache>()) {}

void LlmClient::set_backend(Family family, std::shared_ptr<ChatBackend> backend) {
    Slot slot;
    slot.backend = std::move(backend);
    slot.ceiling = std::make_unique<std::counting_semaphore<>>(std::max(1, options_.max_concurrency));
    slot.pacing = std::make_unique<TokenBucket>(options_.requests_per_second,
                                                std::max(1, options_.max_concurrency));
    slots_[family] = std::move(slot);
}

bool LlmClient::has_backend(Family family) const { return slots_.count(family) != 0; }

ChatResponse LlmClient::complete(const ChatRequest& request) {
    auto it = slots_.find(request.family);
    if (it == slots_.end())
        throw Error(ErrorKind::Configuration,
                    "no backend configured for family " + std::string(to_string(request.family)));
    if (request.temperature < 0.0 || request.temperature > 2.0)
        throw Error(ErrorKind::InvalidArgument, "temperature must lie in [0, 2]");
    if (request.max_tokens <= 0) throw Error(ErrorKind::InvalidArgument, "max_tokens must be positive");

    ++requests_;
    const auto key = CacheKey::of(request);
    if (auto hit = cache_->get(key)) {
        ++hits_;
        return ChatResponse{*hit, true, 0};
    }

    Slot& slot = it->second;
    slot.ceiling->acquire();
    ChatResponse response;
    try {
        slot.pacing->acquire();
        const auto start = std::chrono::steady_clock::now();
        response = complete_with_retry(*slot.backend, request, options_.retry, options_.sleep);
        response.latency_ms = static_cast<std::uint64_t>(
            std::chrono::duration_cast<std::chrono::milliseconds>(
                std::chrono::steady_clock::now() - start)
                .count());
    } catch (...) {
        slot.ceiling->release();
        throw;
    }
    slot.ceiling->release();
    ++calls_;
    response.cached = false;
    cache_->put(key, request, response.text);
    return response;
}

ChatExchange ModelRef::ask(std::string system, std::string human, unsigned sample_index) const {
    if (client == nullptr) throw Error(ErrorKind::Configuration, "model has no client");
    ChatExchange ex;
    ex.request.system = std::move(system);
    ex.request.human = std::move(human);
    ex.request.temperature = temperature;
    ex.request.max_tokens = max_tokens;
    ex.request.model_tag = model_tag;
    ex.request.family = family;
    ex.request.sample_index = sample_index;
    ex.key = CacheKey::of(ex.request);
    ex.response = client->complete(ex.request);
    return ex;
}

ClientStats LlmClient::stats() const { return {requests_.load(), hits_.load(), calls_.load()}; }

// ---------------------------------------------------------------------------
// Family guard
// ---------------------------------------------------------------------------

std::vector<std::string> check_family_separation(std::optional<Family> generator,
                                                 std::optional<Family> wordlist,
                                                 std::optional<Family> judge) {
    std::vector<std::string> violations;
    if (!judge || *judge == Family::Mock) return violations;
    const auto name = std::string(to_string(*judge));
    if (generator && *generator == *judge)
        violations.push_back("label family " + name + " equals the narrative-generation family");
    if (wordlist && *wordlist == *judge)
        violations.push_back("label family " + name + " equals the wordlist family");
    return violations;
}

}  // namespace liipa
