#include "liipa/classify.hpp"

#include <algorithm>

#include "liipa/metrics.hpp"
#include "liipa/parallel.hpp"
#include "liipa/prompts.hpp"

namespace liipa {

std::string_view to_string(Method m) {
    switch (m) {
        case Method::DirectDP: return "direct-dp";
        case Method::DirectCoT: return "direct-cot";
        case Method::DirectLtM: return "direct-ltm";
        case Method::DirectToT: return "direct-tot";
        case Method::StoryWordlist: return "story";
        case Method::SentenceWordlist: return "sentence";
    }
    return "?";
}

std::optional<Method> parse_method(std::string_view s) {
    for (auto m : kMethods)
        if (to_string(m) == s) return m;
    return std::nullopt;
}

bool is_wordlist_method(Method m) {
    return m == Method::StoryWordlist || m == Method::SentenceWordlist;
}

ojson Prediction::to_json() const {
    ojson j;
    j["narrative_id"] = narrative_id;
    j["character"] = character.str();
    j["method"] = std::string(to_string(method));
    j["labels"] = liipa::to_json(labels);
    j["trace"] = trace;
    j["failed"] = failed;
    if (persona) j["persona"] = *persona;
    return j;
}

Prediction Prediction::from_json(const nlohmann::json& j) {
    try {
        Prediction p;
        p.narrative_id = j.at("narrative_id").get<std::string>();
        const auto id = CharacterId::parse(j.at("character").get<std::string>());
        if (!id) throw Error(ErrorKind::Parse, "bad character id in prediction");
        p.character = *id;
        const auto m = parse_method(j.at("method").get<std::string>());
        if (!m) throw Error(ErrorKind::Parse, "unknown method in prediction");
        p.method = *m;
        p.labels = label_set_from_json(j.at("labels"));
        p.trace = j.value("trace", std::vector<std::string>{});
        p.failed = j.value("failed", false);
        if (j.contains("persona")) p.persona = j["persona"].get<std::string>();
        return p;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::Parse, std::string("prediction record: ") + e.what());
    }
}

// ---------------------------------------------------------------------------
// Direct strategies
// ---------------------------------------------------------------------------

namespace {

bool is_parse_error(const Error& e) { return e.kind() == ErrorKind::Parse; }

/// Ask, parse, and on a parse failure ask once more with `reprompt` appended.
template <typename Parse>
auto ask_parsed(const ModelRef& model, const RenderedPrompt& prompt, std::string_view reprompt,
                std::vector<std::string>& trace, Parse&& parse) {
    auto ex = model.ask(prompt.system, prompt.human);
    trace.push_back(ex.key.digest);
    try {
        return parse(ex.response.text);
    } catch (const Error& e) {
        if (!is_parse_error(e)) throw;
    }
    auto retry = model.ask(prompt.system, prompt.human + "\n\n" + std::string(reprompt));
    trace.push_back(retry.key.digest);
    return parse(retry.response.text);
}

PredictionMap make_predictions(const Narrative& n, Method m, const std::set<CharacterId>& chars,
                               const std::vector<std::string>& trace) {
    PredictionMap out;
    for (const auto& c : chars) {
        Prediction p;
        p.narrative_id = n.id;
        p.character = c;
        p.method = m;
        p.trace = trace;
        if (n.persona) p.persona = n.persona->descriptor;
        out.emplace(c, std::move(p));
    }
    return out;
}

void mark_failed(PredictionMap& preds) {
    for (auto& [c, p] : preds) {
        p.failed = true;
        p.labels = LabelSet{};
    }
}

}  // namespace

PredictionMap classify_direct(const Narrative& narrative, Method strategy, const ModelRef& model) {
    if (is_wordlist_method(strategy))
        throw Error(ErrorKind::InvalidArgument, "classify_direct needs a direct strategy");
    const auto chars = extract_characters(narrative.text);
    if (chars.empty()) throw Error(ErrorKind::InvalidArgument, "narrative " + narrative.id + " has no characters");
    const PromptContext base{{"NARRATIVE", narrative.text}};
    std::vector<std::string> trace;
    auto parse_labels = [&](const std::string& text) { return parse_label_json(text, chars); };

    std::map<CharacterId, LabelSet> labels;
    bool failed = false;
    try {
        switch (strategy) {
            case Method::DirectDP:
                labels = ask_parsed(model, render(TemplateId::DirectDP, base), kJsonReprompt, trace, parse_labels);
                break;
            case Method::DirectCoT:
                labels = ask_parsed(model, render(TemplateId::DirectCoT, base), kJsonReprompt, trace, parse_labels);
                break;
            case Method::DirectLtM: {
                const auto subproblems = ask_parsed(model, render(TemplateId::LtMDecompose, base), kListReprompt,
                                                    trace, [](const std::string& t) { return parse_subproblems(t); });
                std::string previous = "None";
                std::string solved;
                for (std::size_t i = 0; i < subproblems.size(); ++i) {
                    PromptContext ctx = base;
                    ctx["PREVIOUS_SOLUTIONS"] = previous;
                    ctx["SUBPROBLEM"] = subproblems[i];
                    const auto prompt = render(TemplateId::LtMSolve, ctx);
                    if (i + 1 < subproblems.size()) {
                        auto ex = model.ask(prompt.system, prompt.human);
                        trace.push_back(ex.key.digest);
                        solved += (solved.empty() ? "" : "\n\n") + ("Subproblem " + std::to_string(i + 1) + ": " +
                                                                    subproblems[i] + "\nSolution: " + ex.response.text);
                        previous = solved;
                    } else {
                        labels = ask_parsed(model, prompt, kJsonReprompt, trace, parse_labels);
                    }
                }
                break;
            }
            case Method::DirectToT: {
                const auto plan_prompt = render(TemplateId::ToTClassifyPlan, base);
                auto plan = model.ask(plan_prompt.system, plan_prompt.human);
                trace.push_back(plan.key.digest);
                PromptContext ctx = base;
                ctx["PLAN"] = plan.response.text;
                labels = ask_parsed(model, render(TemplateId::ToTClassifyExec, ctx), kJsonReprompt, trace, parse_labels);
                break;
            }
            default: break;
        }
    } catch (const Error& e) {
        if (!is_parse_error(e)) throw;
        failed = true;
    }

    auto preds = make_predictions(narrative, strategy, chars, trace);
    if (failed) {
        mark_failed(preds);
    } else {
        for (auto& [c, p] : preds) p.labels = labels.at(c);
    }
    return preds;
}

// ---------------------------------------------------------------------------
// Wordlists and judge
// ---------------------------------------------------------------------------

std::map<CharacterId, Wordlist> wordlists_story(const Narrative& narrative, const ModelRef& model) {
    const auto chars = extract_characters(narrative.text);
    if (chars.empty()) throw Error(ErrorKind::InvalidArgument, "narrative " + narrative.id + " has no characters");
    std::vector<std::string> trace;
    const auto lists = ask_parsed(model, render(TemplateId::StoryWordlist, {{"NARRATIVE", narrative.text}}),
                                  kJsonReprompt, trace,
                                  [&](const std::string& t) { return parse_wordlist_json(t, chars); });
    std::map<CharacterId, Wordlist> out;
    for (const auto& c : chars) {
        Wordlist w;
        w.character = c;
        w.attributes = lists.at(c);
        w.raw_count = w.attributes.size();
        w.trace = trace;
        out.emplace(c, std::move(w));
    }
    return out;
}

std::map<CharacterId, Wordlist> wordlists_sentence(const Narrative& narrative, const ModelRef& model) {
    const auto chars = extract_characters(narrative.text);
    if (chars.empty()) throw Error(ErrorKind::InvalidArgument, "narrative " + narrative.id + " has no characters");
    std::map<CharacterId, Wordlist> out;
    for (const auto& c : chars) {
        Wordlist w;
        w.character = c;
        w.mentioned = false;
        out.emplace(c, std::move(w));
    }
    const auto sentences = split_sentences(narrative.text);
    for (std::size_t s = 0; s < sentences.size(); ++s) {
        for (const auto& c : extract_characters(sentences[s])) {
            auto& w = out.at(c);
            w.mentioned = true;
            const auto prompt = render(TemplateId::SentenceWordlist, {{"CHARACTER", c.str()}, {"SENTENCE", sentences[s]}});
            try {
                const auto attrs = ask_parsed(model, prompt, kListReprompt, w.trace,
                                              [](const std::string& t) { return parse_wordlist(t); });
                w.raw_count += attrs.size();
                for (const auto& a : attrs)
                    if (std::find(w.attributes.begin(), w.attributes.end(), a) == w.attributes.end())
                        w.attributes.push_back(a);
            } catch (const Error& e) {
                if (!is_parse_error(e)) throw;
                w.skipped_sentences.push_back(s);
            }
        }
    }
    return out;
}

JudgeResult judge(const Wordlist& wordlist, const ModelRef& judge_model, Family wordlist_family) {
    const auto violations = check_family_separation(std::nullopt, wordlist_family, judge_model.family);
    if (!violations.empty()) throw Error(ErrorKind::Configuration, violations.front());
    JudgeResult r;
    if (!wordlist.mentioned || wordlist.attributes.empty()) return r;
    std::string list = "[";
    for (std::size_t i = 0; i < wordlist.attributes.size(); ++i)
        list += (i ? ", " : "") + wordlist.attributes[i];
    list += "]";
    const std::set<CharacterId> expected{wordlist.character};
    const auto prompt = render(TemplateId::JudgeWordlist, {{"CHARACTER", wordlist.character.str()}, {"WORDLIST", list}});
    const auto labels = ask_parsed(judge_model, prompt, kJsonReprompt, r.trace,
                                   [&](const std::string& t) { return parse_label_json(t, expected); });
    r.labels = labels.at(wordlist.character);
    return r;
}

PredictionMap classify(const Narrative& narrative, Method method, const StageModels& models) {
    // The labelling model is the judge for wordlist methods, the classifier otherwise.
    const bool wordlist = is_wordlist_method(method);
    std::optional<Family> labelling = models.labeler.family;
    if (wordlist) labelling = models.judge ? std::optional(models.judge->family) : std::nullopt;
    const auto violations = check_family_separation(
        models.generator, wordlist ? std::optional(models.labeler.family) : std::nullopt, labelling);
    if (!violations.empty()) throw Error(ErrorKind::Configuration, violations.front());

    if (!is_wordlist_method(method)) return classify_direct(narrative, method, models.labeler);
    if (!models.judge) throw Error(ErrorKind::Configuration, "wordlist methods need a judge model");

    const auto chars = extract_characters(narrative.text);
    PredictionMap preds = make_predictions(narrative, method, chars, {});
    std::map<CharacterId, Wordlist> lists;
    try {
        lists = method == Method::StoryWordlist ? wordlists_story(narrative, models.labeler)
                                                : wordlists_sentence(narrative, models.labeler);
    } catch (const Error& e) {
        if (!is_parse_error(e)) throw;
        mark_failed(preds);
        return preds;
    }
    for (auto& [c, p] : preds) {
        const auto& w = lists.at(c);
        p.trace = w.trace;
        try {
            auto j = judge(w, *models.judge, models.labeler.family);
            p.labels = j.labels;
            p.trace.insert(p.trace.end(), j.trace.begin(), j.trace.end());
        } catch (const Error& e) {
            if (!is_parse_error(e)) throw;
            p.failed = true;
            p.labels = LabelSet{};
        }
    }
    return preds;
}

std::vector<Prediction> classify_dataset(const std::vector<Narrative>& dataset, Method method,
                                         const StageModels& models, int jobs) {
    std::vector<PredictionMap> per(dataset.size());
    parallel_for(dataset.size(), jobs, [&](std::size_t i) { per[i] = classify(dataset[i], method, models); });
    std::vector<Prediction> out;
    for (auto& m : per)
        for (auto& [c, p] : m) out.push_back(std::move(p));
    return out;
}

// ---------------------------------------------------------------------------
// Persona insertion
// ---------------------------------------------------------------------------

namespace {

bool contains_phrase(const TokenStream& text, std::string_view phrase) {
    const auto needle = tokenize(phrase).tokens;
    if (needle.empty()) return true;
    return std::search(text.tokens.begin(), text.tokens.end(), needle.begin(), needle.end()) != text.tokens.end();
}

}  // namespace

CharacterId pick_persona_target(const Narrative& narrative, std::uint64_t seed) {
    const auto chars = extract_characters(narrative.text);
    if (chars.empty()) throw Error(ErrorKind::InvalidArgument, "narrative " + narrative.id + " has no characters");
    Rng rng(derive_seed(seed, "persona-target:" + narrative.id));
    return *std::next(chars.begin(), static_cast<std::ptrdiff_t>(rng.uniform(chars.size())));
}

Narrative insert_demographics(const Narrative& narrative, CharacterId character,
                              const Persona& persona, const ModelRef& model,
                              const InsertOptions& options) {
    const auto before = extract_characters(narrative.text);
    if (!before.count(character))
        throw Error(ErrorKind::InvalidArgument, character.str() + " is not in narrative " + narrative.id);
    const int sentences_before = static_cast<int>(split_sentences(narrative.text).size());
    const auto prompt = render(TemplateId::DemographicInsert, {{"CHARACTER", character.str()},
                                                               {"PERSONA", persona.descriptor},
                                                               {"NARRATIVE", narrative.text}});
    std::string last_problem;
    for (int attempt = 0; attempt < std::max(1, options.max_attempts); ++attempt) {
        auto ex = model.ask(prompt.system, prompt.human, static_cast<unsigned>(attempt));
        std::string text = normalize_whitespace(ex.response.text);
        const auto tokens = tokenize(text);
        last_problem.clear();
        for (const auto& term : persona.content_terms)
            if (!contains_phrase(tokens, term)) last_problem = "missing persona term '" + term + "'";
        if (last_problem.empty() && extract_characters(text) != before) last_problem = "character set changed";
        if (last_problem.empty() &&
            std::abs(static_cast<int>(split_sentences(text).size()) - sentences_before) > 1)
            last_problem = "sentence count changed by more than one";
        if (last_problem.empty()) {
            Narrative out = narrative;
            out.text = std::move(text);
            out.persona = PersonaTag{persona.descriptor, character};
            return out;
        }
    }
    throw Error(ErrorKind::Insertion, "persona insertion failed for " + narrative.id + ": " + last_problem);
}

}  // namespace liipa
