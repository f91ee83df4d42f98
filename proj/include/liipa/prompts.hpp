#pragma once

// Prompt templates for generation, classification, judging and persona
// insertion, plus parsers that turn model completions back into typed values.
//
// Templates use `[KEY]` placeholders. Rendering is single-pass: substituted
// values are never rescanned, so narrative text containing brackets is safe.

#include <cstddef>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "liipa/core.hpp"

namespace liipa {

enum class TemplateId {
    PlanGen,
    PlanVote,
    StoryGen,
    StoryVote,
    SentenceWordlist,
    StoryWordlist,
    JudgeWordlist,
    DirectDP,
    DirectCoT,
    LtMDecompose,
    LtMSolve,
    ToTClassifyPlan,
    ToTClassifyExec,
    DemographicInsert,
    AnnotationTemplate,
};

inline constexpr std::string_view kTemplateVersion = "2024.1";

const std::vector<TemplateId>& all_templates();
std::string_view template_name(TemplateId id);
/// Mock route tag carried by prompts rendered from `id`.
std::string_view template_route(TemplateId id);
/// Placeholder keys the template requires, in first-use order.
std::vector<std::string> required_placeholders(TemplateId id);
/// Every placeholder key used by any template.
const std::set<std::string>& placeholder_vocabulary();

using PromptContext = std::map<std::string, std::string>;

struct RenderedPrompt {
    std::string system;
    std::string human;
    /// Route tag; also embedded as the first line of `system`.
    std::string sentinel;
};

/// Throws Error(Template) naming the first missing key.
RenderedPrompt render(TemplateId id, const PromptContext& ctx);

/// Raw template text of every template, for audit (`--dump-prompts`).
std::string dump_templates();

/// GENRE, TITLE, NUMBER, CHARACTER_ROLES, LENGTH and CHARACTER_PORTRAYALS
/// filled from a constraint set.
PromptContext generation_context(const GenerationConstraints& c);

/// Appended to the human turn when a structured answer failed to parse.
inline constexpr std::string_view kJsonReprompt = "Output only the JSON object.";
inline constexpr std::string_view kListReprompt = "Output only the bracketed list.";
inline constexpr std::string_view kVoteReprompt = "End your answer with the required final line.";

// ---------------------------------------------------------------------------
// Parsers
// ---------------------------------------------------------------------------

/// First bracketed, comma-separated list; items trimmed, unquoted,
/// lowercased. Accepts 3 to 8 items.
std::vector<std::string> parse_wordlist(std::string_view response);

/// Last well-formed JSON object; each expected character must map to a
/// 3-element [intellect, appearance, power] array (or an object keyed by
/// dimension). Keys and level tokens are matched case-insensitively.
std::map<CharacterId, LabelSet> parse_label_json(std::string_view response,
                                                 const std::set<CharacterId>& expected);

/// Last well-formed JSON object mapping each expected character to an array
/// of 3 to 8 attribute strings; lowercased and deduplicated.
std::map<CharacterId, std::vector<std::string>> parse_wordlist_json(
    std::string_view response, const std::set<CharacterId>& expected);

enum class VoteKind { Plan, Story };

struct VoteResult {
    std::size_t index = 0;  ///< always 0-based
    std::string note;       ///< which numbering convention was applied
};

/// Trailing `Chosen Plan: PlanN` / `Chosen Story: StoryN`. Story numbers are
/// 0-based. Plans are presented as Plan1..PlanK, so N in [1,K] is read as
/// 1-based; N == 0 can only be 0-based and is accepted as such.
VoteResult parse_vote(std::string_view response, VoteKind kind, std::size_t k);

/// Numbered list of exactly three subproblems.
std::vector<std::string> parse_subproblems(std::string_view response);

}  // namespace liipa
