#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <memory>

#include "liipa/genpipe.hpp"

using namespace liipa;

namespace {

GenerationConstraints one_protagonist(int length) {
    GenerationConstraints c;
    c.character_count = 1;
    c.length_sentences = length;
    c.genre = "Drama";
    c.title = "The Letter";
    c.characters = {{{Role::Protagonist, 0}, {Level::High, Level::Neutral, Level::Low}}};
    return c;
}

Narrative wrap(std::string text, const GenerationConstraints& c) {
    Narrative n;
    n.id = "imp-000000";
    n.text = std::move(text);
    n.constraints = c;
    return n;
}

struct MockRig {
    explicit MockRig(MockOptions o = {}) {
        backend = std::make_shared<MockBackend>(std::move(o));
        client.set_backend(Family::Mock, backend);
    }
    ModelRef model() { return ModelRef{&client, Family::Mock, "mock", 0.0, 1024}; }
    LlmClient client;
    std::shared_ptr<MockBackend> backend;
};

}  // namespace

TEST_CASE("every explicit portrayal word is rejected with its category") {
    const auto c = one_protagonist(2);
    int checked = 0;
    for (const char* category : {"intellect", "appearance", "power"}) {
        const auto& words = exclusion_lists().at(category);
        CHECK(words.size() == 10);
        for (const auto& w : words) {
            CAPTURE(w);
            const auto n = wrap("Protagonist0 looked " + w + " that day. Protagonist0 went home.", c);
            const auto r = validate_automated(n, c);
            CHECK_FALSE(r.passed);
            REQUIRE(r.exclusion_hits.size() == 1);
            CHECK(r.exclusion_hits[0].category == category);
            CHECK(r.exclusion_hits[0].word == w);
            CHECK(r.reasons() == std::vector<std::string>{category});
            ++checked;
        }
    }
    CHECK(checked == 30);
}

TEST_CASE("gendered pronouns are demographic hits") {
    const auto c = one_protagonist(2);
    for (const char* text : {"Protagonist0 ran. Then he stopped.", "Protagonist0 ran. She stopped.",
                             "Protagonist0 lost her keys. Protagonist0 ran."}) {
        CAPTURE(text);
        const auto r = validate_automated(wrap(text, c), c);
        CHECK_FALSE(r.passed);
        CHECK(r.reasons() == std::vector<std::string>{"demographic"});
    }
}

TEST_CASE("inflected forms are caught, unrelated words are not") {
    CHECK(find_exclusion_hits("Protagonist0 spoke cleverly.").size() == 1);
    CHECK(find_exclusion_hits("the smartest move").size() == 1);
    CHECK(find_exclusion_hits("an uglier coat").size() == 1);
    CHECK(find_exclusion_hits("prettiest of them all").size() == 1);
    CHECK(find_exclusion_hits("wiser words").size() == 1);
    CHECK(find_exclusion_hits("the strength of the beam").empty());
    CHECK(find_exclusion_hits("the shed by the river").empty());
    CHECK(find_exclusion_hits("Their weekend ended.").empty());
    const auto hits = find_exclusion_hits("a WEAK door");
    REQUIRE(hits.size() == 1);
    CHECK(hits[0].offset == 2);
}

TEST_CASE("clean fixtures pass") {
    const auto c = one_protagonist(3);
    for (const char* text : {"Protagonist0 solved the puzzle before dawn. They wrote the answer down. "
                             "The room fell quiet.",
                             "Protagonist0 opened the ledger. The numbers did not add up! Was it a trick?"}) {
        CAPTURE(text);
        const auto r = validate_automated(wrap(text, c), c);
        CHECK(r.passed);
        CHECK(r.reasons().empty());
    }
}

TEST_CASE("character set and length checks") {
    const auto c = one_protagonist(2);
    auto r = validate_automated(wrap("Protagonist0 ran. Antagonist0 chased.", c), c);
    CHECK_FALSE(r.passed);
    CHECK(r.unexpected_characters.size() == 1);
    CHECK(r.reasons() == std::vector<std::string>{"character_set"});
    r = validate_automated(wrap("Nobody ran. Nobody chased.", c), c);
    CHECK(r.missing_characters.size() == 1);
    r = validate_automated(wrap("Protagonist0 ran. It rained. It stopped.", c), c);
    CHECK(r.reasons() == std::vector<std::string>{"sentence_count"});
    ValidatorOptions loose;
    loose.length_tolerance = 1;
    CHECK(validate_automated(wrap("Protagonist0 ran. It rained. It stopped.", c), c, loose).passed);
}

TEST_CASE("ToT trace sizes follow the branch factors") {
    MockRig rig;
    const auto c = sample_constraints(GenerationConfig{}, 3);
    for (auto [p, s] : {std::pair{3, 3}, std::pair{2, 4}, std::pair{1, 1}}) {
        ToTConfig tot;
        tot.plan_branch = p;
        tot.story_branch = s;
        const auto g = generate_narrative(c, tot, rig.model());
        CHECK(g.trace.plans.size() == static_cast<std::size_t>(p));
        CHECK(g.trace.stories.size() == static_cast<std::size_t>(s));
        CHECK(g.trace.plan_vote.has_value() == (p > 1));
        CHECK(g.trace.story_vote.has_value() == (s > 1));
        CHECK(g.trace.chosen_plan < g.trace.plans.size());
        CHECK(g.trace.chosen_story < g.trace.stories.size());
        CHECK(g.narrative.text == g.trace.stories[g.trace.chosen_story]);
        CHECK(g.trace.digests.size() >= static_cast<std::size_t>(p + s + (p > 1) + (s > 1)));
    }
    ToTConfig bad;
    bad.plan_branch = 0;
    CHECK_THROWS_AS(generate_narrative(c, bad, rig.model()), Error);
}

TEST_CASE("dataset build is deterministic across worker counts") {
    BuildOptions o;
    o.n_samples = 12;
    o.seed = 4;
    MockRig a, b;
    o.jobs = 1;
    const auto one = build_dataset(o, a.model());
    o.jobs = 6;
    const auto six = build_dataset(o, b.model());
    CHECK(one.complete());
    CHECK(one.records == six.records);
    CHECK(one.manifest(o).dump() == six.manifest(o).dump());
    for (std::size_t i = 0; i < one.records.size(); ++i) {
        CHECK(one.records[i].id == narrative_id(i));
        CHECK(validate_automated(one.records[i], one.records[i].constraints).passed);
    }
}

TEST_CASE("injected exclusion words force regeneration") {
    MockOptions faults;
    faults.fault_word = "brilliant";
    faults.fault_rate = 0.5;
    MockRig rig(faults);
    BuildOptions o;
    o.n_samples = 10;
    o.seed = 2;
    const auto build = build_dataset(o, rig.model());
    const auto reasons = build.discard_reasons();
    REQUIRE(reasons.count("intellect") == 1);
    CHECK(reasons.at("intellect") > 0);
    std::size_t attempts = 0;
    for (const auto& s : build.slots) {
        attempts += s.attempts.size();
        CHECK(s.attempts.size() <= 4);
        CHECK(s.filled == s.attempts.back().passed);
    }
    CHECK(attempts > build.slots.size());
    for (const auto& r : build.records) CHECK(find_exclusion_hits(r.text).empty());

    MockOptions always;
    always.fault_word = "ugly";
    always.fault_rate = 1.0;
    MockRig broken(always);
    o.n_samples = 2;
    const auto partial = build_dataset(o, broken.model());
    CHECK_FALSE(partial.complete());
    CHECK(partial.records.empty());
    CHECK(partial.manifest(o)["complete"] == false);
}

TEST_CASE("zero samples is rejected") {
    MockRig rig;
    BuildOptions o;
    CHECK_THROWS_AS(build_dataset(o, rig.model()), Error);
}

TEST_CASE("narrative ids are zero padded") {
    CHECK(narrative_id(0) == "imp-000000");
    CHECK(narrative_id(1234) == "imp-001234");
}

TEST_CASE("annotation form") {
    auto c = one_protagonist(1);
    c.characters.push_back({{Role::Antagonist, 0}, {}});
    c.character_count = 2;
    const auto form = export_annotation_template(wrap("Protagonist0 met Antagonist0.", c));
    CHECK(form.rfind("Narrative ID: imp-000000\n", 0) == 0);
    CHECK(form.find("Assigned role: Protagonist") != std::string::npos);
    CHECK(form.find("Assigned role: Antagonist") != std::string::npos);
    CHECK(form.find("Specified genre: Drama") != std::string::npos);
    CHECK(form.find("Narrative text:\nProtagonist0 met Antagonist0.") != std::string::npos);
}
