#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <atomic>
#include <functional>
#include <memory>

#include "liipa/classify.hpp"
#include "liipa/genpipe.hpp"
#include "liipa/prompts.hpp"

using namespace liipa;

namespace {

class Counting : public ChatBackend {
public:
    explicit Counting(std::function<std::string(const ChatRequest&)> f = {}) : f_(std::move(f)) {}
    ChatResponse complete(const ChatRequest& r) override {
        ++calls;
        if (f_) return {f_(r), false, 0};
        return mock_complete(r);
    }
    std::atomic<int> calls{0};

private:
    std::function<std::string(const ChatRequest&)> f_;
};

struct Rig {
    explicit Rig(std::function<std::string(const ChatRequest&)> f = {}) {
        backend = std::make_shared<Counting>(std::move(f));
        client.set_backend(Family::Mock, backend);
    }
    ModelRef model() { return ModelRef{&client, Family::Mock, "mock", 0.0, 1024}; }
    LlmClient client;
    std::shared_ptr<Counting> backend;
};

Narrative story(std::string text, std::string id = "imp-000001") {
    Narrative n;
    n.id = std::move(id);
    n.text = std::move(text);
    return n;
}

const char* kThree =
    "Protagonist0 found the map in the attic. Antagonist0 watched from the street. "
    "Protagonist0 and Victim0 crossed the bridge at dusk. The wind rose. "
    "Antagonist0 cut the rope while Victim0 screamed.";

}  // namespace

TEST_CASE("method names") {
    for (auto m : kMethods) CHECK(parse_method(to_string(m)) == m);
    CHECK_FALSE(parse_method("direct"));
    CHECK(is_wordlist_method(Method::StoryWordlist));
    CHECK_FALSE(is_wordlist_method(Method::DirectToT));
}

TEST_CASE("direct strategies make the contracted number of calls") {
    const std::map<Method, int> expected{{Method::DirectDP, 1}, {Method::DirectCoT, 1},
                                         {Method::DirectLtM, 4}, {Method::DirectToT, 2}};
    for (const auto& [m, calls] : expected) {
        CAPTURE(to_string(m));
        Rig rig;
        const auto preds = classify(story(kThree), m, {rig.model(), std::nullopt, Family::FamilyA});
        CHECK(rig.backend->calls == calls);
        CHECK(preds.size() == 3);
        for (const auto& [c, p] : preds) {
            CHECK_FALSE(p.failed);
            CHECK(p.trace.size() == static_cast<std::size_t>(calls));
            CHECK(p.method == m);
        }
    }
}

TEST_CASE("wordlist pipelines: calls per sentence mention and one judge call per character") {
    const auto n = story(kThree);
    std::size_t mentions = 0;
    for (const auto& s : split_sentences(n.text)) mentions += extract_characters(s).size();
    CHECK(mentions == 6);

    Rig lister, judge;
    auto preds = classify(n, Method::SentenceWordlist, {lister.model(), judge.model(), std::nullopt});
    CHECK(lister.backend->calls == static_cast<int>(mentions));
    CHECK(judge.backend->calls == 3);
    CHECK(preds.size() == 3);

    Rig story_lister, story_judge;
    preds = classify(n, Method::StoryWordlist, {story_lister.model(), story_judge.model(), std::nullopt});
    CHECK(story_lister.backend->calls == 1);
    CHECK(story_judge.backend->calls == 3);
    for (const auto& [c, p] : preds) CHECK(p.trace.size() == 2);
}

TEST_CASE("predictions cover exactly the characters in the text") {
    Rig rig, judge;
    for (auto m : kMethods) {
        const auto preds = classify(story(kThree), m, {rig.model(), judge.model(), std::nullopt});
        std::set<CharacterId> keys;
        for (const auto& [c, _] : preds) keys.insert(c);
        CHECK(keys == extract_characters(kThree));
    }
}

TEST_CASE("judge sees only the id and the list, and skips unmentioned characters") {
    std::string seen;
    Rig judge_rig([&](const ChatRequest& r) {
        seen = r.human;
        return std::string("{\"Victim3\": [\"low\", \"neutral\", \"high\"]}");
    });
    Wordlist w;
    w.character = {Role::Victim, 3};
    w.attributes = {"timid", "quiet", "cornered"};
    const auto j = judge(w, judge_rig.model(), Family::FamilyA);
    CHECK(j.labels == LabelSet{Level::Low, Level::Neutral, Level::High});
    CHECK(seen.find("Victim3") != std::string::npos);
    CHECK(seen.find("[timid, quiet, cornered]") != std::string::npos);

    Wordlist unmentioned;
    unmentioned.character = {Role::Victim, 4};
    unmentioned.mentioned = false;
    const int before = judge_rig.backend->calls;
    CHECK(judge(unmentioned, judge_rig.model(), Family::FamilyA).labels == LabelSet{});
    CHECK(judge_rig.backend->calls == before);

    // Named in one sentence out of two.
    Rig lister;
    const auto lists = wordlists_sentence(story("Protagonist0 ran. It rained."), lister.model());
    CHECK(lists.at({Role::Protagonist, 0}).mentioned);
}

TEST_CASE("family separation is enforced before any call") {
    LlmClient client;
    auto backend = std::make_shared<Counting>();
    client.set_backend(Family::FamilyA, backend);
    client.set_backend(Family::FamilyB, backend);
    const ModelRef a{&client, Family::FamilyA, "a", 0.0, 512};
    const ModelRef b{&client, Family::FamilyB, "b", 0.0, 512};
    CHECK_THROWS_AS(classify(story(kThree), Method::DirectDP, {a, std::nullopt, Family::FamilyA}), Error);
    CHECK_THROWS_AS(classify(story(kThree), Method::StoryWordlist, {a, a, Family::FamilyB}), Error);
    CHECK_THROWS_AS(classify(story(kThree), Method::StoryWordlist, {a, b, Family::FamilyB}), Error);
    CHECK_THROWS_AS(classify(story(kThree), Method::StoryWordlist, {a, std::nullopt, std::nullopt}), Error);
    CHECK(backend->calls == 0);
}

TEST_CASE("malformed answers are reprompted once, then marked failed") {
    int n = 0;
    Rig flaky([&](const ChatRequest& r) {
        if (++n == 1) return std::string("I think they are clever.");
        return mock_complete(r).text;
    });
    auto preds = classify(story(kThree), Method::DirectDP, {flaky.model(), std::nullopt, std::nullopt});
    CHECK(flaky.backend->calls == 2);
    for (const auto& [c, p] : preds) {
        CHECK_FALSE(p.failed);
        CHECK(p.trace.size() == 2);
    }

    Rig broken([](const ChatRequest&) { return std::string("no json at all"); });
    preds = classify(story(kThree), Method::DirectCoT, {broken.model(), std::nullopt, std::nullopt});
    CHECK(broken.backend->calls == 2);
    for (const auto& [c, p] : preds) {
        CHECK(p.failed);
        CHECK(p.labels == LabelSet{});
    }
}

TEST_CASE("prediction JSON round-trip") {
    Prediction p;
    p.narrative_id = "imp-000003";
    p.character = {Role::Antagonist, 1};
    p.method = Method::DirectLtM;
    p.labels = {Level::High, Level::Low, Level::Neutral};
    p.trace = {"abc", "def"};
    p.persona = "a woman";
    const auto back = Prediction::from_json(nlohmann::json::parse(p.to_json().dump()));
    CHECK(back.narrative_id == p.narrative_id);
    CHECK(back.character == p.character);
    CHECK(back.method == p.method);
    CHECK(back.labels == p.labels);
    CHECK(back.trace == p.trace);
    CHECK(back.persona == p.persona);
    CHECK_THROWS_AS(Prediction::from_json(nlohmann::json::parse("{\"narrative_id\": 3}")), Error);
}

TEST_CASE("dataset classification is order-stable across workers") {
    std::vector<Narrative> ds;
    for (int i = 0; i < 8; ++i) ds.push_back(story(kThree + std::string(" Rain fell ") + std::to_string(i) + " times.", narrative_id(i)));
    Rig a, b;
    const auto one = classify_dataset(ds, Method::DirectCoT, {a.model(), std::nullopt, std::nullopt}, 1);
    const auto four = classify_dataset(ds, Method::DirectCoT, {b.model(), std::nullopt, std::nullopt}, 4);
    REQUIRE(one.size() == 24);
    REQUIRE(four.size() == 24);
    for (std::size_t i = 0; i < one.size(); ++i) CHECK(one[i].to_json() == four[i].to_json());
}

TEST_CASE("persona insertion and its post-checks") {
    Rig rig;
    const auto* persona = find_persona("a woman");
    REQUIRE(persona != nullptr);
    const auto base = story(kThree);
    const auto out = insert_demographics(base, {Role::Victim, 0}, *persona, rig.model());
    CHECK(out.persona == PersonaTag{"a woman", {Role::Victim, 0}});
    CHECK(out.text.find("woman") != std::string::npos);
    CHECK(extract_characters(out.text) == extract_characters(base.text));

    Rig echo([&](const ChatRequest&) { return std::string(kThree); });
    CHECK_THROWS_AS(insert_demographics(base, {Role::Victim, 0}, *persona, echo.model()), Error);
    CHECK(echo.backend->calls == 3);

    Rig drops([&](const ChatRequest&) { return std::string("Protagonist0, a woman, left. Antagonist0 stayed."); });
    try {
        insert_demographics(base, {Role::Protagonist, 0}, *persona, drops.model());
        FAIL("expected an insertion error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::Insertion);
        CHECK(std::string(e.what()).find("character set") != std::string::npos);
    }

    CHECK_THROWS_AS(insert_demographics(base, {Role::Victim, 7}, *persona, rig.model()), Error);
}

TEST_CASE("persona target is stable and valid") {
    const auto n = story(kThree);
    const auto t = pick_persona_target(n, 5);
    CHECK(t == pick_persona_target(n, 5));
    CHECK(extract_characters(kThree).count(t) == 1);
}
