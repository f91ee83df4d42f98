#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <httplib.h>
#include <json.hpp>

#include <atomic>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <thread>

#include "liipa/llm.hpp"
#include "liipa/prompts.hpp"

using namespace liipa;
namespace fs = std::filesystem;

namespace {

ChatRequest base_request() {
    ChatRequest r;
    r.system = route_sentinel("direct") + "\nsys";
    r.human = "Narrative: Protagonist0 ran.";
    r.model_tag = "m";
    r.family = Family::Mock;
    return r;
}

/// Fails with the given transient flag `failures` times, then answers.
class FlakyBackend : public ChatBackend {
public:
    FlakyBackend(int failures, bool transient) : failures_(failures), transient_(transient) {}
    ChatResponse complete(const ChatRequest&) override {
        ++calls;
        if (calls <= failures_) throw TransportFailure(transient_, "boom");
        return {"ok", false, 0};
    }
    std::atomic<int> calls{0};

private:
    int failures_;
    bool transient_;
};

class CountingBackend : public ChatBackend {
public:
    ChatResponse complete(const ChatRequest& r) override {
        ++calls;
        return {"echo:" + r.human, false, 0};
    }
    std::atomic<int> calls{0};
};

fs::path temp_dir(const char* name) {
    auto d = fs::temp_directory_path() / name;
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
}

}  // namespace

TEST_CASE("cache key covers every request field") {
    const auto base = CacheKey::of(base_request());
    CHECK(base.digest.size() == 64);
    CHECK(CacheKey::of(base_request()) == base);
    auto r = base_request();
    r.system += "x";
    CHECK_FALSE(CacheKey::of(r) == base);
    r = base_request();
    r.human += "x";
    CHECK_FALSE(CacheKey::of(r) == base);
    r = base_request();
    r.temperature = 1e-17;
    CHECK_FALSE(CacheKey::of(r) == base);
    r = base_request();
    r.max_tokens = 1023;
    CHECK_FALSE(CacheKey::of(r) == base);
    r = base_request();
    r.model_tag = "n";
    CHECK_FALSE(CacheKey::of(r) == base);
    r = base_request();
    r.family = Family::FamilyA;
    CHECK_FALSE(CacheKey::of(r) == base);
    r = base_request();
    r.sample_index = 1;
    CHECK_FALSE(CacheKey::of(r) == base);
}

TEST_CASE("family names") {
    CHECK(parse_family("FamilyA") == Family::FamilyA);
    CHECK(parse_family("b") == Family::FamilyB);
    CHECK(parse_family("MOCK") == Family::Mock);
    CHECK_FALSE(parse_family("gpt"));
    for (auto f : {Family::FamilyA, Family::FamilyB, Family::FamilyC, Family::Mock})
        CHECK(parse_family(to_string(f)) == f);
}

TEST_CASE("route sentinel round-trip") {
    CHECK(route_of(route_sentinel("story") + "\nrest") == "story");
    CHECK(route_of("no sentinel").empty());
}

TEST_CASE("mock is a pure function of the request") {
    const auto r = base_request();
    CHECK(mock_complete(r).text == mock_complete(r).text);
    auto r2 = r;
    r2.sample_index = 3;
    // Different identity, still well-formed JSON labels.
    const auto labels = parse_label_json(mock_complete(r2).text, {{Role::Protagonist, 0}});
    CHECK(labels.size() == 1);
}

TEST_CASE("mock story covers every requested character with the requested length") {
    const auto c = sample_constraints(GenerationConfig{}, 11);
    auto ctx = generation_context(c);
    ctx["PLAN"] = "1. Do things.";
    const auto p = render(TemplateId::StoryGen, ctx);
    ChatRequest r;
    r.system = p.system;
    r.human = p.human;
    r.temperature = 1.0;
    const auto text = mock_complete(r).text;
    CHECK(split_sentences(text).size() == static_cast<std::size_t>(c.length_sentences));
    CHECK(extract_characters(text) == c.character_set());
}

TEST_CASE("mock malformed answers are repaired by the reprompt suffix") {
    MockOptions o;
    o.malformed_rate = 1.0;
    auto r = base_request();
    CHECK_THROWS_AS(parse_label_json(mock_complete(r, o).text, {{Role::Protagonist, 0}}), Error);
    r.human += "\n\n" + std::string(kJsonReprompt);
    CHECK_NOTHROW(parse_label_json(mock_complete(r, o).text, {{Role::Protagonist, 0}}));
}

TEST_CASE("backoff grows geometrically within the jitter band") {
    RetryPolicy p;
    for (int a = 1; a <= 5; ++a) {
        const double nominal = 500.0 * std::pow(2.0, a - 1);
        const auto d = backoff_delay(p, a, 99).count();
        CHECK(d >= nominal * 0.8 - 1);
        CHECK(d <= nominal * 1.2 + 1);
        CHECK(backoff_delay(p, a, 99) == backoff_delay(p, a, 99));
    }
}

TEST_CASE("retry loop: transient failures are retried, others are not") {
    RetryPolicy p;
    std::vector<std::chrono::milliseconds> slept;
    Sleeper sleep = [&](std::chrono::milliseconds d) { slept.push_back(d); };
    FlakyBackend two(2, true);
    CHECK(complete_with_retry(two, base_request(), p, sleep).text == "ok");
    CHECK(two.calls == 3);
    CHECK(slept.size() == 2);

    FlakyBackend hard(1, false);
    CHECK_THROWS_AS(complete_with_retry(hard, base_request(), p, sleep), TransportFailure);
    CHECK(hard.calls == 1);

    FlakyBackend forever(100, true);
    CHECK_THROWS_AS(complete_with_retry(forever, base_request(), p, sleep), TransportFailure);
    CHECK(forever.calls == p.max_attempts);
}

TEST_CASE("client: configuration and argument errors") {
    LlmClient client;
    auto r = base_request();
    r.family = Family::FamilyB;
    CHECK_THROWS_WITH_AS(client.complete(r), doctest::Contains("no backend"), Error);
    client.set_backend(Family::Mock, std::make_shared<MockBackend>());
    r = base_request();
    r.temperature = -0.5;
    CHECK_THROWS_AS(client.complete(r), Error);
    r = base_request();
    r.max_tokens = 0;
    CHECK_THROWS_AS(client.complete(r), Error);
}

TEST_CASE("client cache: memory hits and warm disk replay") {
    const auto dir = temp_dir("liipa_test_cache");
    auto backend = std::make_shared<CountingBackend>();
    {
        ClientOptions o;
        o.cache_dir = dir;
        LlmClient client(o);
        client.set_backend(Family::Mock, backend);
        const auto a = client.complete(base_request());
        const auto b = client.complete(base_request());
        CHECK_FALSE(a.cached);
        CHECK(b.cached);
        CHECK(a.text == b.text);
        CHECK(backend->calls == 1);
        CHECK(client.stats().cache_hits == 1);
    }
    ClientOptions o;
    o.cache_dir = dir;
    LlmClient warm(o);
    auto fresh = std::make_shared<CountingBackend>();
    warm.set_backend(Family::Mock, fresh);
    CHECK(warm.complete(base_request()).cached);
    CHECK(fresh->calls == 0);
    CHECK(warm.stats().backend_calls == 0);
    fs::remove_all(dir);
}

TEST_CASE("client concurrency ceiling is respected") {
    class Slow : public ChatBackend {
    public:
        ChatResponse complete(const ChatRequest& r) override {
            const int now = ++active;
            int prev = peak.load();
            while (now > prev && !peak.compare_exchange_weak(prev, now)) {}
            std::this_thread::sleep_for(std::chrono::milliseconds(20));
            --active;
            return {r.human, false, 0};
        }
        std::atomic<int> active{0}, peak{0};
    };
    ClientOptions o;
    o.max_concurrency = 2;
    LlmClient client(o);
    auto slow = std::make_shared<Slow>();
    client.set_backend(Family::Mock, slow);
    std::vector<std::thread> ts;
    for (int i = 0; i < 8; ++i)
        ts.emplace_back([&, i] {
            auto r = base_request();
            r.human += std::to_string(i);
            client.complete(r);
        });
    for (auto& t : ts) t.join();
    CHECK(slow->peak <= 2);
}

TEST_CASE("token bucket paces requests") {
    TokenBucket bucket(50.0, 1.0);
    const auto start = std::chrono::steady_clock::now();
    for (int i = 0; i < 11; ++i) bucket.acquire();
    const auto elapsed = std::chrono::steady_clock::now() - start;
    CHECK(elapsed >= std::chrono::milliseconds(180));
}

TEST_CASE("http backend against a local server: 503s are retried, 400 is not") {
    httplib::Server server;
    std::atomic<int> hits{0};
    std::atomic<int> mode{0};
    server.Post("/v1/chat/completions", [&](const httplib::Request& req, httplib::Response& res) {
        const int n = ++hits;
        CHECK(req.get_header_value("Authorization") == "Bearer secret");
        if (mode == 0 && n <= 2) {
            res.status = 503;
            return;
        }
        if (mode == 1) {
            res.status = 400;
            res.set_content("{\"error\":\"bad\"}", "application/json");
            return;
        }
        const auto body = nlohmann::json::parse(req.body);
        nlohmann::json reply{{"choices", {{{"message", {{"role", "assistant"}, {"content", "reply to " + body["messages"][1]["content"].get<std::string>()}}}}}}};
        res.set_content(reply.dump(), "application/json");
    });
    const int port = server.bind_to_any_port("127.0.0.1");
    std::thread t([&] { server.listen_after_bind(); });
    server.wait_until_ready();

    ::setenv("LIIPA_TEST_KEY", "secret", 1);
    EndpointConfig ep;
    ep.api = ApiStyle::OpenAI;
    ep.base_url = "http://127.0.0.1:" + std::to_string(port);
    ep.model = "test-model";
    ep.key_env = "LIIPA_TEST_KEY";
    ep.timeout = std::chrono::seconds(5);

    ClientOptions o;
    o.sleep = [](std::chrono::milliseconds) {};
    LlmClient client(o);
    client.set_backend(Family::FamilyA, std::make_shared<HttpBackend>(ep));
    auto r = base_request();
    r.family = Family::FamilyA;
    r.human = "hello";
    CHECK(client.complete(r).text == "reply to hello");
    CHECK(hits == 3);

    mode = 1;
    hits = 0;
    r.human = "again";
    CHECK_THROWS_AS(client.complete(r), TransportFailure);
    CHECK(hits == 1);

    EndpointConfig nokey = ep;
    nokey.key_env = "LIIPA_TEST_KEY_UNSET";
    ::unsetenv("LIIPA_TEST_KEY_UNSET");
    HttpBackend missing(nokey);
    try {
        missing.complete(r);
        FAIL("expected configuration error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::Configuration);
    }

    server.stop();
    t.join();
}

TEST_CASE("family separation") {
    CHECK(check_family_separation(Family::FamilyA, Family::FamilyB, Family::FamilyC).empty());
    CHECK(check_family_separation(std::nullopt, Family::FamilyA, Family::FamilyA).size() == 1);
    CHECK(check_family_separation(Family::FamilyB, Family::FamilyA, Family::FamilyB).size() == 1);
    CHECK(check_family_separation(Family::Mock, Family::Mock, Family::Mock).empty());
}

TEST_CASE("model ref records the exchange") {
    LlmClient client;
    client.set_backend(Family::Mock, std::make_shared<MockBackend>());
    ModelRef m{&client, Family::Mock, "mock", 0.0, 256};
    const auto ex = m.ask(route_sentinel("direct"), "Protagonist0 ran.", 2);
    CHECK(ex.request.sample_index == 2);
    CHECK(ex.request.max_tokens == 256);
    CHECK(ex.key == CacheKey::of(ex.request));
    CHECK(m.with_temperature(0.7).temperature == 0.7);
}
