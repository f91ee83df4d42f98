#pragma once

// Portrayal classification: direct prompting (DP, CoT, LtM, ToT), the
// story- and sentence-level wordlist pipelines with an LLM judge, and persona
// insertion for fairness slices.

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "liipa/core.hpp"
#include "liipa/io.hpp"
#include "liipa/llm.hpp"

namespace liipa {

enum class Method { DirectDP, DirectCoT, DirectLtM, DirectToT, StoryWordlist, SentenceWordlist };
inline constexpr std::array<Method, 6> kMethods{Method::DirectDP,      Method::DirectCoT,
                                                Method::DirectLtM,     Method::DirectToT,
                                                Method::StoryWordlist, Method::SentenceWordlist};

/// "direct-dp", "direct-cot", "direct-ltm", "direct-tot", "story", "sentence".
std::string_view to_string(Method m);
std::optional<Method> parse_method(std::string_view s);
bool is_wordlist_method(Method m);

struct Prediction {
    std::string narrative_id;
    CharacterId character;
    Method method = Method::DirectDP;
    LabelSet labels;
    /// Digests of every exchange that contributed, in call order.
    std::vector<std::string> trace;
    /// Parsing failed after the reprompt; labels are placeholders.
    bool failed = false;
    std::optional<std::string> persona;

    [[nodiscard]] ojson to_json() const;
    static Prediction from_json(const nlohmann::json& j);
};

using PredictionMap = std::map<CharacterId, Prediction>;

PredictionMap classify_direct(const Narrative& narrative, Method strategy, const ModelRef& model);

struct Wordlist {
    CharacterId character;
    std::vector<std::string> attributes;
    /// False when the character appears in no single sentence (sentence
    /// variant); the judge then answers all-Neutral without a call.
    bool mentioned = true;
    std::vector<std::string> trace;
    /// Sentence indices whose call could not be parsed.
    std::vector<std::size_t> skipped_sentences;
    /// Attributes collected before deduplication.
    std::size_t raw_count = 0;
};

std::map<CharacterId, Wordlist> wordlists_story(const Narrative& narrative, const ModelRef& model);
std::map<CharacterId, Wordlist> wordlists_sentence(const Narrative& narrative,
                                                   const ModelRef& model);

struct JudgeResult {
    LabelSet labels;
    std::vector<std::string> trace;
};

/// Sees only the character id and the attribute list. Throws Configuration
/// when the judge family equals `wordlist_family`.
JudgeResult judge(const Wordlist& wordlist, const ModelRef& judge_model, Family wordlist_family);

struct StageModels {
    /// Direct classifier or wordlist generator.
    ModelRef labeler;
    std::optional<ModelRef> judge;
    /// Family that generated the narratives, when known.
    std::optional<Family> generator;
};

/// Checks family separation first; parse failures become failed predictions.
PredictionMap classify(const Narrative& narrative, Method method, const StageModels& models);

/// Every narrative, in dataset order, characters in id order.
std::vector<Prediction> classify_dataset(const std::vector<Narrative>& dataset, Method method,
                                         const StageModels& models, int jobs = 1);

struct InsertOptions {
    int max_attempts = 3;
};

/// Rewrites the narrative so `persona` describes `character`. Rejects rewrites
/// that drop a content term, change the character set or move the sentence
/// count by more than one. Constraints (and gold labels) are carried over.
Narrative insert_demographics(const Narrative& narrative, CharacterId character,
                              const Persona& persona, const ModelRef& model,
                              const InsertOptions& options = {});

/// Deterministic insertion target for a narrative.
CharacterId pick_persona_target(const Narrative& narrative, std::uint64_t seed);

}  // namespace liipa
