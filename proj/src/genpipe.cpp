#include "liipa/genpipe.hpp"

#include <algorithm>
#include <cctype>

#include "liipa/parallel.hpp"
#include "liipa/prompts.hpp"

namespace liipa {

void ToTConfig::check() const {
    if (plan_branch < 1 || story_branch < 1 || max_regen_attempts < 0)
        throw Error(ErrorKind::InvalidArgument, "ToT branch counts must be positive");
}

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

namespace {

struct Token {
    std::string lower;
    std::size_t offset;
};

bool is_word_byte(unsigned char c) { return std::isalnum(c) || c >= 0x80; }

std::vector<Token> word_tokens(std::string_view text) {
    std::vector<Token> out;
    std::size_t i = 0;
    while (i < text.size()) {
        if (!is_word_byte(static_cast<unsigned char>(text[i]))) {
            ++i;
            continue;
        }
        std::size_t j = i;
        std::string lower;
        while (j < text.size() && is_word_byte(static_cast<unsigned char>(text[j]))) {
            lower.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(text[j]))));
            ++j;
        }
        out.push_back({std::move(lower), i});
        i = j;
    }
    return out;
}

/// `token` is `word` or an inflected form of it.
bool stem_match(std::string_view token, std::string_view word) {
    if (token == word) return true;
    if (token.size() <= word.size()) return false;
    auto rest_is = [&](std::string_view stem, std::initializer_list<std::string_view> suffixes) {
        if (token.substr(0, stem.size()) != stem) return false;
        const auto rest = token.substr(stem.size());
        return std::any_of(suffixes.begin(), suffixes.end(),
                           [&](std::string_view s) { return rest == s; });
    };
    if (rest_is(word, {"s", "es", "ly", "er", "est"})) return true;
    if (word.back() == 'e' && rest_is(word, {"r", "st"})) return true;
    // y -> i before a suffix: pretty -> prettier, ugly -> ugliest.
    if (word.back() == 'y') {
        const std::string stem = std::string(word.substr(0, word.size() - 1)) + "i";
        if (rest_is(stem, {"ly", "er", "est", "es"})) return true;
    }
    return false;
}

std::vector<std::string> split_phrase(std::string_view entry) {
    std::vector<std::string> parts;
    for (const auto& t : word_tokens(entry)) parts.push_back(t.lower);
    return parts;
}

}  // namespace

const std::map<std::string, std::vector<std::string>>& exclusion_lists() {
    static const std::map<std::string, std::vector<std::string>> lists = [] {
        std::map<std::string, std::vector<std::string>> m;
        m["intellect"] = {"brilliant", "intelligent", "smart",      "clever",     "wise",
                          "intellectual", "genius", "knowledgeable", "analytical", "logical"};
        m["appearance"] = {"beautiful", "handsome", "attractive", "ugly",    "pretty",
                           "gorgeous",  "plain",    "stunning",   "hideous", "charming"};
        m["power"] = {"powerful",      "influential", "dominant",  "weak",       "strong",
                      "authoritative", "powerless",   "commanding", "subordinate", "forceful"};
        std::vector<std::string> demo{"he",      "she", "him", "her", "his", "hers",
                                      "himself", "herself", "mr", "mrs", "ms"};
        for (const auto& p : persona_catalog())
            for (const auto& term : p.content_terms)
                if (std::find(demo.begin(), demo.end(), term) == demo.end()) demo.push_back(term);
        m["demographic"] = std::move(demo);
        return m;
    }();
    return lists;
}

std::vector<ExclusionHit> find_exclusion_hits(std::string_view text) {
    const auto tokens = word_tokens(text);
    std::vector<ExclusionHit> hits;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        for (const auto& [category, words] : exclusion_lists()) {
            for (const auto& entry : words) {
                const auto parts = split_phrase(entry);
                if (parts.empty() || i + parts.size() > tokens.size()) continue;
                bool ok = true;
                for (std::size_t k = 0; k + 1 < parts.size() && ok; ++k)
                    ok = tokens[i + k].lower == parts[k];
                if (ok) ok = stem_match(tokens[i + parts.size() - 1].lower, parts.back());
                if (ok) hits.push_back({category, entry, tokens[i].offset});
            }
        }
    }
    return hits;
}

std::vector<std::string> ValidationReport::reasons() const {
    std::vector<std::string> out;
    if (!char_count_ok || !missing_characters.empty() || !unexpected_characters.empty())
        out.emplace_back("character_set");
    if (!sentence_count_ok) out.emplace_back("sentence_count");
    for (const auto& h : exclusion_hits)
        if (std::find(out.begin(), out.end(), h.category) == out.end()) out.push_back(h.category);
    return out;
}

ValidationReport validate_automated(const Narrative& narrative,
                                    const GenerationConstraints& constraints,
                                    const ValidatorOptions& options) {
    ValidationReport r;
    const auto found = extract_characters(narrative.text);
    const auto expected = constraints.character_set();
    std::set_difference(expected.begin(), expected.end(), found.begin(), found.end(),
                        std::inserter(r.missing_characters, r.missing_characters.end()));
    std::set_difference(found.begin(), found.end(), expected.begin(), expected.end(),
                        std::inserter(r.unexpected_characters, r.unexpected_characters.end()));
    r.char_count_ok = static_cast<int>(found.size()) == constraints.character_count &&
                      r.missing_characters.empty() && r.unexpected_characters.empty();
    r.sentence_count = static_cast<int>(split_sentences(narrative.text).size());
    r.sentence_count_ok =
        std::abs(r.sentence_count - constraints.length_sentences) <= options.length_tolerance;
    r.exclusion_hits = find_exclusion_hits(narrative.text);
    r.passed = r.char_count_ok && r.sentence_count_ok && r.missing_characters.empty() &&
               r.exclusion_hits.empty();
    return r;
}

// ---------------------------------------------------------------------------
// Generation
// ---------------------------------------------------------------------------

namespace {

std::string trim_copy(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return std::string(s);
}

VoteRecord run_vote(TemplateId id, const PromptContext& ctx, VoteKind kind, std::size_t k,
                    const ModelRef& voter, std::vector<std::string>& digests) {
    const auto prompt = render(id, ctx);
    auto ex = voter.ask(prompt.system, prompt.human);
    digests.push_back(ex.key.digest);
    try {
        auto v = parse_vote(ex.response.text, kind, k);
        return {ex.response.text, v.index, v.note};
    } catch (const Error& e) {
        if (e.kind() != ErrorKind::Parse) throw;
    }
    auto retry = voter.ask(prompt.system, prompt.human + "\n\n" + std::string(kVoteReprompt));
    digests.push_back(retry.key.digest);
    auto v = parse_vote(retry.response.text, kind, k);
    return {retry.response.text, v.index, v.note};
}

}  // namespace

ojson ToTTrace::to_json() const {
    ojson j;
    j["plans"] = plans;
    if (plan_vote) j["plan_vote"] = {{"response", plan_vote->response}, {"chosen", plan_vote->chosen}, {"note", plan_vote->note}};
    j["chosen_plan"] = chosen_plan;
    j["stories"] = stories;
    if (story_vote) j["story_vote"] = {{"response", story_vote->response}, {"chosen", story_vote->chosen}, {"note", story_vote->note}};
    j["chosen_story"] = chosen_story;
    j["digests"] = digests;
    return j;
}

GenerationResult generate_narrative(const GenerationConstraints& constraints, const ToTConfig& tot,
                                    const ModelRef& generator, std::string id) {
    tot.check();
    const ModelRef sampler = generator.with_temperature(tot.sample_temperature);
    const ModelRef voter = generator.with_temperature(0.0);

    GenerationResult result;
    ToTTrace& trace = result.trace;
    PromptContext ctx = generation_context(constraints);

    const auto plan_prompt = render(TemplateId::PlanGen, ctx);
    for (int p = 0; p < tot.plan_branch; ++p) {
        auto ex = sampler.ask(plan_prompt.system, plan_prompt.human, static_cast<unsigned>(p));
        trace.digests.push_back(ex.key.digest);
        trace.plans.push_back(trim_copy(ex.response.text));
    }
    if (trace.plans.size() > 1) {
        std::string listing;
        for (std::size_t p = 0; p < trace.plans.size(); ++p)
            listing += (p ? "\n\n" : "") + ("Plan" + std::to_string(p + 1) + ":\n") + trace.plans[p];
        ctx["STORY_PLANS"] = listing;
        trace.plan_vote = run_vote(TemplateId::PlanVote, ctx, VoteKind::Plan, trace.plans.size(),
                                   voter, trace.digests);
        trace.chosen_plan = trace.plan_vote->chosen;
    }

    ctx["PLAN"] = trace.plans[trace.chosen_plan];
    const auto story_prompt = render(TemplateId::StoryGen, ctx);
    for (int s = 0; s < tot.story_branch; ++s) {
        auto ex = sampler.ask(story_prompt.system, story_prompt.human, static_cast<unsigned>(s));
        trace.digests.push_back(ex.key.digest);
        trace.stories.push_back(trim_copy(ex.response.text));
    }
    if (trace.stories.size() > 1) {
        std::string listing;
        for (std::size_t s = 0; s < trace.stories.size(); ++s)
            listing += (s ? "\n\n" : "") + ("Story" + std::to_string(s) + ":\n") + trace.stories[s];
        ctx["STORIES"] = listing;
        trace.story_vote = run_vote(TemplateId::StoryVote, ctx, VoteKind::Story,
                                    trace.stories.size(), voter, trace.digests);
        trace.chosen_story = trace.story_vote->chosen;
    }

    result.narrative.id = std::move(id);
    result.narrative.text = trace.stories[trace.chosen_story];
    result.narrative.constraints = constraints;
    return result;
}

// ---------------------------------------------------------------------------
// Dataset assembly
// ---------------------------------------------------------------------------

std::string narrative_id(std::size_t slot) {
    std::string digits = std::to_string(slot);
    if (digits.size() < 6) digits.insert(0, 6 - digits.size(), '0');
    return "imp-" + digits;
}

std::map<std::string, std::size_t> DatasetBuild::discard_reasons() const {
    std::map<std::string, std::size_t> counts;
    for (const auto& s : slots)
        for (const auto& a : s.attempts)
            if (!a.passed)
                for (const auto& r : a.reasons) ++counts[r];
    return counts;
}

ojson DatasetBuild::manifest(const BuildOptions& options) const {
    ojson j;
    j["n_requested"] = n_requested;
    j["n_written"] = records.size();
    j["complete"] = complete();
    j["seed"] = options.seed;
    j["tot"] = {{"plan_branch", options.tot.plan_branch},
                {"story_branch", options.tot.story_branch},
                {"max_regen_attempts", options.tot.max_regen_attempts},
                {"sample_temperature", options.tot.sample_temperature}};
    j["length_tolerance"] = options.validator.length_tolerance;
    std::size_t attempts = 0, passed = 0;
    for (const auto& s : slots) {
        attempts += s.attempts.size();
        for (const auto& a : s.attempts) passed += a.passed ? 1 : 0;
    }
    j["counts"] = {{"attempts", attempts}, {"passed", passed}, {"failed", attempts - passed}};
    ojson reasons = ojson::object();
    for (const auto& [r, n] : discard_reasons()) reasons[r] = n;
    j["discard_reasons"] = reasons;
    ojson slots_json = ojson::array();
    for (const auto& s : slots) {
        ojson sj;
        sj["slot"] = s.slot;
        sj["id"] = s.id;
        sj["filled"] = s.filled;
        ojson aj = ojson::array();
        for (const auto& a : s.attempts)
            aj.push_back({{"seed", a.seed}, {"passed", a.passed}, {"reasons", a.reasons},
                          {"digests", a.digests}});
        sj["attempts"] = aj;
        slots_json.push_back(std::move(sj));
    }
    j["slots"] = slots_json;
    return j;
}

DatasetBuild build_dataset(const BuildOptions& options, const ModelRef& generator) {
    if (options.n_samples < 1) throw Error(ErrorKind::InvalidArgument, "n_samples must be >= 1");
    options.tot.check();

    struct SlotResult {
        SlotRecord record;
        std::optional<Narrative> narrative;
    };
    std::vector<SlotResult> results(options.n_samples);

    parallel_for(options.n_samples, options.jobs, [&](std::size_t slot) {
        SlotResult& out = results[slot];
        out.record.slot = slot;
        out.record.id = narrative_id(slot);
        const auto slot_seed = derive_seed(options.seed, "slot", slot);
        const int total = 1 + options.tot.max_regen_attempts;
        for (int attempt = 0; attempt < total; ++attempt) {
            AttemptRecord a;
            a.seed = derive_seed(slot_seed, "attempt", static_cast<std::uint64_t>(attempt));
            const auto constraints = sample_constraints(options.generation, a.seed);
            try {
                auto gen = generate_narrative(constraints, options.tot, generator, out.record.id);
                a.digests = gen.trace.digests;
                const auto report = validate_automated(gen.narrative, constraints, options.validator);
                a.passed = report.passed;
                a.reasons = report.reasons();
                if (a.passed) out.narrative = std::move(gen.narrative);
            } catch (const Error& e) {
                if (e.kind() != ErrorKind::Parse) throw;
                a.reasons = {"parse"};
            }
            const bool done = a.passed;
            out.record.attempts.push_back(std::move(a));
            if (done) break;
        }
        out.record.filled = out.narrative.has_value();
    });

    DatasetBuild build;
    build.n_requested = options.n_samples;
    for (auto& r : results) {
        if (r.narrative) build.records.push_back(std::move(*r.narrative));
        build.slots.push_back(std::move(r.record));
    }
    return build;
}

std::string export_annotation_template(const Narrative& narrative) {
    std::string roles, portrayals, demographics;
    for (const auto& c : narrative.constraints.characters) {
        const auto name = c.id.str();
        roles += (roles.empty() ? "" : "\n") + ("   " + name + ":\n") +
                 "     Assigned role: " + std::string(to_string(c.role())) + "\n" +
                 "     Role fulfilled in narrative: [Yes/No]\n" +
                 "     If No, explain discrepancy: [Explanation]";
        portrayals += (portrayals.empty() ? "" : "\n") + ("   " + name + ":\n") +
                      "     Intellect portrayal: [Low/Neutral/High]\n" +
                      "     Appearance portrayal: [Low/Neutral/High]\n" +
                      "     Power portrayal: [Low/Neutral/High]";
        demographics += (demographics.empty() ? "" : "\n") + ("   " + name + ":\n") +
                        "     Socio-demographic info present: [Yes/No]\n" +
                        "     If Yes, describe: [Explanation]";
    }
    PromptContext ctx{{"NARRATIVE_ID", narrative.id},
                      {"ROLE_BLOCKS", roles},
                      {"PORTRAYAL_BLOCKS", portrayals},
                      {"DEMOGRAPHIC_BLOCKS", demographics},
                      {"GENRE", narrative.constraints.genre},
                      {"TITLE", narrative.constraints.title}};
    const auto form = render(TemplateId::AnnotationTemplate, ctx);
    return form.human + "\n\nNarrative text:\n" + narrative.text + "\n";
}

}  // namespace liipa
