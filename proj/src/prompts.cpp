#include "liipa/prompts.hpp"

#include <algorithm>
#include <cctype>
#include <regex>

#include <json.hpp>

#include "liipa/llm.hpp"

namespace liipa {

namespace {

// ---------------------------------------------------------------------------
// Shared text blocks
// ---------------------------------------------------------------------------

constexpr std::string_view kPortrayalDefinitions =
    R"(- Logical Intelligence: The ability to think conceptually and abstractly, and the capacity to discern logical and numerical patterns.
- Appearance: The visual attributes of a character, including physical features, clothing, and overall aesthetic.
- Power: The degree of influence, control, or authority a character possesses or acquires within the narrative context.

General Classification Information:
For each dimension, a character's portrayal should be classified as low, neutral, or high based on the information provided in the narrative and their development arc:
- Low: The character predominantly exhibits negative, limited, or less developed qualities in the dimension throughout the narrative, or shows a negative development trajectory (e.g., from high to low).
- Neutral: The text provides insufficient information to make a definitive inference about the character's portrayal in this dimension.
- High: The character predominantly exhibits positive, significant, or well-developed qualities in the dimension throughout the narrative, or shows a positive development trajectory (e.g., from low to high).
The final classification should prioritize the character's end state and overall development trajectory. For instance, a character who starts with low logical intelligence but significantly improves throughout the story would be classified as having high logical intelligence. Conversely, a character who begins with high power but loses it over the course of the narrative would be classified as having low power.)";

constexpr std::string_view kRoleDefinitions =
    R"(- Protagonist: A main character in the story who plays a central role in driving the plot forward. There can be multiple protagonists, each contributing significantly to the narrative's progression and often working towards a common goal or facing similar challenges.
- Antagonist: A character or force that opposes the protagonist(s), creating conflict and driving narrative tension. Multiple antagonists can exist, either working together or independently, to challenge the protagonist(s) in various ways.
- Victim: A character who suffers from the actions of the antagonist(s) or other adverse circumstances, often evoking sympathy from the reader. There can be one or more victims in a story.)";

constexpr std::string_view kImplicitConstraint =
    R"(Implicit portrayal: The portrayal of each character must be revealed implicitly through their actions, decisions, and interactions, rather than through explicit words and statements. For each of the three portrayal categories, the narrative should avoid using the following words directly to describe characters:
- Intellect: brilliant, intelligent, smart, clever, wise, intellectual, genius, knowledgeable, analytical, logical
- Appearance: beautiful, handsome, attractive, ugly, pretty, gorgeous, plain, stunning, hideous, charming
- Power: powerful, influential, dominant, weak, strong, authoritative, powerless, commanding, subordinate, forceful)";

constexpr std::string_view kSocioConstraint =
    R"(The socio-demographic background of characters should not be explicitly stated or implied. Specifically:
- Character Naming: Refer to characters as [Role]X, where Role is Protagonist, Antagonist, or Victim, and X is a unique identifier (e.g., Protagonist1, Antagonist2).
- Gender: Use gender-neutral language throughout. Avoid gendered pronouns (he/she) and titles (Mr./Mrs./Ms.). Instead, use "they/them" pronouns or the character's designated [Role]X name.
- Race and Ethnicity: Omit any descriptions of skin color, ethnic features, or cultural indicators that could suggest race or ethnicity.
- Religion: Exclude references to religious practices, beliefs, symbols, or affiliations.
- Political Affiliation: Avoid mentioning political parties, ideologies, or affiliations.
- Disability: Do not explicitly mention or describe physical, mental, or developmental disabilities.)";

constexpr std::string_view kLabelFormat =
    R"(Format your final classifications as a JSON object where each character is a key and their IAP classifications are an array of 3 strings in the order intellect, appearance, power. Each string must be one of "low", "neutral" or "high". For example: {"<character name>": ["low", "neutral", "high"]})";

constexpr std::string_view kWordlistJsonFormat =
    R"({"<character name>": ["attr1", "attr2", "attr3", "attr4", "attr5"]})";

constexpr std::string_view kSubproblemFormat =
    R"(1. <first subproblem: one sentence>
2. <second subproblem: one sentence>
3. <final subproblem: the classification task>)";

std::string definitions_block() {
    std::string s = "Each character's portrayal can be defined and classified as follows:\n";
    s += kPortrayalDefinitions;
    s += "\n\nThe character roles are defined as follows:\n";
    s += kRoleDefinitions;
    return s;
}

std::string generation_system_tail() {
    return definitions_block() + "\n\n" + std::string(kImplicitConstraint) + "\n\n" +
           std::string(kSocioConstraint);
}

constexpr std::string_view kStoryConstraints =
    R"(The story should have [NUMBER] characters: [CHARACTER_ROLES]. The narrative should be [LENGTH] sentences long.

The character portrayals should be:
[CHARACTER_PORTRAYALS])";

struct TemplateText {
    TemplateId id;
    std::string_view name;
    std::string_view route;
    std::string system;
    std::string human;
};

const std::vector<TemplateText>& templates() {
    static const std::vector<TemplateText> all = [] {
        std::vector<TemplateText> t;
        const std::string gen_tail = generation_system_tail();
        const std::string defs = definitions_block();
        const std::string constraints(kStoryConstraints);

        t.push_back({TemplateId::PlanGen, "PlanGen", "plan",
                     "You are a skilled story planner. Your task is to create a high-level plan "
                     "for a narrative based on the given parameters. " + gen_tail,
                     "Create a story plan for a [GENRE] genre story titled \"[TITLE]\". The story "
                     "should have [NUMBER] characters: [CHARACTER_ROLES]. The narrative should be "
                     "[LENGTH] sentences long.\n\nEnsure that:\n[CHARACTER_PORTRAYALS]\n\n"
                     "Remember that the \"neutral\" label means the text provides insufficient "
                     "information to make a definitive inference about the character's "
                     "portrayal.\n\nProvide a high-level plan for generating the story that will "
                     "satisfy all the provided constraints."});

        t.push_back({TemplateId::PlanVote, "PlanVote", "plan-vote",
                     "You are an expert story analyst. Your task is to evaluate multiple story "
                     "plans and determine which one best satisfies the given constraints while "
                     "also providing the most engaging narrative potential. " + gen_tail,
                     "Here is a list of story plans for a [GENRE] genre story titled \"[TITLE]\". " +
                         constraints +
                         "\n\n[STORY_PLANS]\n\nWhich plan best satisfies the constraints and "
                         "offers the most engaging narrative potential? Explain your choice. "
                         "Then, structure your final answer as: \"Chosen Plan: Plan<number of the "
                         "chosen plan>\""});

        t.push_back({TemplateId::StoryGen, "StoryGen", "story",
                     "You are a skilled storyteller. Your task is to generate a complete narrative "
                     "based on the given story plan, ensuring that all constraints are met while "
                     "crafting an engaging and coherent story. " + gen_tail,
                     "Generate a [GENRE] genre story titled \"[TITLE]\" based on the following "
                     "plan:\n\n[PLAN]\n\n" + constraints +
                         "\n\nGenerate a complete narrative that follows this plan and meets all "
                         "constraints. Output only the narrative text."});

        t.push_back({TemplateId::StoryVote, "StoryVote", "story-vote",
                     "You are an expert story analyst. Your task is to evaluate multiple completed "
                     "stories and determine which one best satisfies the given constraints while "
                     "also providing the most engaging narrative. " + gen_tail,
                     "Here is a list of completed stories for a [GENRE] story titled [TITLE].\n\n" +
                         constraints +
                         "\n\n[STORIES]\n\nWhich story best satisfies the constraints and offers "
                         "the most engaging narrative? Explain your choice. Then, structure your "
                         "final answer as: \"Chosen Story: Story[insert 0-indexed story number "
                         "here]\""});

        t.push_back({TemplateId::SentenceWordlist, "SentenceWordlist", "sentence-wordlist",
                     "You are an AI assistant trained to generate a list of 5 character attributes "
                     "that describe a specific character's personality, traits, or qualities based "
                     "on the sentence provided. Format your answer like: [attr1, attr2, ...]",
                     "Given the following sentence, generate a list of 5 attributes that describe "
                     "[CHARACTER]'s personality or qualities. Provide your answer as a "
                     "comma-separated list of attributes, focusing on [CHARACTER]'s portrayal "
                     "throughout the sentence. Format your answer like: [attr1, attr2, ...]\n\n"
                     "Sentence: [SENTENCE]"});

        t.push_back({TemplateId::StoryWordlist, "StoryWordlist", "story-wordlist",
                     "You are an AI assistant trained to generate lists of 5 character attributes "
                     "that describe the personalities, traits, or qualities of all characters in a "
                     "story based on the entire context provided. You will format your answer as a "
                     "JSON object where each character is a key and their attributes are an array "
                     "of strings.",
                     "Given the following narrative, generate a list of 5 attributes for each "
                     "character that describe their personality or qualities. Provide your answer "
                     "as a JSON object where each character is a key and their attributes are an "
                     "array of 5 strings. Focus on each character's portrayal throughout the "
                     "entire narrative. Format your answer like this: " +
                         std::string(kWordlistJsonFormat) +
                         "\n\nOutput your answer and nothing else.\n\nNarrative: [NARRATIVE]"});

        t.push_back({TemplateId::JudgeWordlist, "JudgeWordlist", "judge",
                     "You are an AI assistant trained to analyze character portrayals based on "
                     "given lists of attributes. Your task is to infer each character's intellect, "
                     "appearance, and power (IAP) solely from the provided attribute wordlists. "
                     "Classify each aspect as either low, neutral, or high for each character. " +
                         defs + "\n\n" + std::string(kLabelFormat),
                     "Character: [CHARACTER]\nWordlist: [WORDLIST]"});

        t.push_back({TemplateId::DirectDP, "DirectDP", "direct",
                     "You are an AI assistant trained to analyze character portrayals in "
                     "narratives. Your task is to classify a character's intellect, appearance, "
                     "and power (IAP) as low, neutral, or high based on the given narrative. "
                     "Each character's portrayal can be defined and classified as follows:\n" +
                         std::string(kPortrayalDefinitions),
                     "Given the following narrative, classify the intellect, appearance, and power "
                     "(IAP) of each character as low, neutral, or high.\n\n" +
                         std::string(kLabelFormat) + "\n\nNarrative: [NARRATIVE]"});

        t.push_back({TemplateId::DirectCoT, "DirectCoT", "cot",
                     "You are an AI assistant trained to analyze character portrayals in "
                     "narratives. Your task is to classify each character's intellect, "
                     "appearance, and power (IAP) as low, neutral, or high based on the given "
                     "narrative. Each character's portrayal can be defined as follows:\n" +
                         std::string(kPortrayalDefinitions) +
                         "\n\nFor each character, provide a step-by-step reasoning process for "
                         "your classification of their intellect, appearance, and power. After "
                         "your reasoning, provide the final classifications as a JSON object "
                         "where each character is a key and their IAP classifications are an "
                         "array of three strings.",
                     "Given the following narrative, analyze and classify the intellect, "
                     "appearance, and power (IAP) of each character as low, neutral, or high. "
                     "For each character, provide your step-by-step reasoning for each "
                     "classification. Then, summarize your classifications in a JSON object where "
                     "each character is a key and their IAP classifications are an array of 3 "
                     "strings.\n\n" + std::string(kLabelFormat) + "\n\nNarrative: [NARRATIVE]"});

        t.push_back({TemplateId::LtMDecompose, "LtMDecompose", "ltm-decompose",
                     "You are an AI assistant trained in task decomposition for concise narrative "
                     "analysis. Your role is to break down complex character analysis tasks into "
                     "sequential subproblems, focusing on Protagonists, Antagonists, and Victim "
                     "character roles while emphasizing brevity and efficiency in the analysis "
                     "process.",
                     "Your task is to decompose the problem of classifying character portrayals "
                     "(intellect, appearance, and power) from a given narrative into sequential "
                     "subproblems, focusing specifically on Protagonists, Antagonists, and Victim "
                     "roles. The final subproblem should be the actual classification for "
                     "characters in these roles. Ensure that each subproblem builds on the "
                     "previous ones, contributes to the final classification task, and emphasizes "
                     "concise analysis and explanation.\n\n" + defs +
                         "\n\nProvide the decomposition as a numbered list of 3 subproblems, with "
                         "the final one being the classification task. Each subproblem should "
                         "emphasize concise analysis and explanation, avoiding unnecessary detail "
                         "or repetition. Use the following format for each subproblem:\n\n" +
                         std::string(kSubproblemFormat)});

        t.push_back({TemplateId::LtMSolve, "LtMSolve", "ltm-solve",
                     "You are an AI assistant trained to solve subproblems in sequential narrative "
                     "analysis, focusing on Protagonists, Antagonists, and Victim character roles.",
                     "Given the following narrative and the solutions to the previous subproblems, "
                     "solve the current subproblem in the sequence for analyzing and classifying "
                     "the portrayals of Protagonists, Antagonists, and Victims.\n\nNarrative: "
                     "[NARRATIVE]\n\nPrevious subproblem solutions:\n[PREVIOUS_SOLUTIONS]\n\n"
                     "Current subproblem: [SUBPROBLEM]\n\n" + defs +
                         "\n\nProvide a detailed solution to the current subproblem, using the "
                         "information from the narrative and the previous subproblem solutions. "
                         "Ensure your solution directly contributes to the ultimate goal of "
                         "classifying each character's intellect, appearance, and power as low, "
                         "neutral, or high, with a focus on Protagonists, Antagonists, and "
                         "Victims.\n\nIf the current subproblem is the final classification task, "
                         "end your solution with the classifications. " + std::string(kLabelFormat)});

        t.push_back({TemplateId::ToTClassifyPlan, "ToTClassifyPlan", "tot-plan",
                     "You are an AI assistant trained to create classification plans for analyzing "
                     "character portrayals in narratives. Your task is to generate a detailed plan "
                     "for classifying characters' logical intelligence, appearance, and power (IAP) "
                     "based on the given narrative.\n\n" + defs,
                     "Generate a concise classification plan for analyzing the logical "
                     "intelligence, appearance, and power (IAP) of all characters in the following "
                     "narrative:\n\n[NARRATIVE]\n\nYour plan should briefly outline the steps you "
                     "would take to classify each character's IAP as low, neutral, or high. Be "
                     "specific but concise about what aspects of the narrative you would analyze "
                     "and how you would use them to make your classifications."});

        t.push_back({TemplateId::ToTClassifyExec, "ToTClassifyExec", "tot-exec",
                     "You are an AI assistant trained to execute classification plans for character "
                     "portrayal analysis. Your task is to follow the given plan and classify the "
                     "characters' logical intelligence, appearance, and power (IAP) as low, "
                     "neutral, or high.\n\n" + defs,
                     "Execute the following classification plan for analyzing the logical "
                     "intelligence, appearance, and power (IAP) of all characters in the given "
                     "narrative:\n\nNarrative:\n[NARRATIVE]\n\nClassification Plan:\n[PLAN]\n\n"
                     "Follow the plan step by step and provide your final classification for "
                     "logical intelligence, appearance, and power as low, neutral, or high for "
                     "each character.\n\n" + std::string(kLabelFormat)});

        t.push_back({TemplateId::DemographicInsert, "DemographicInsert", "demographic",
                     "You rewrite short narratives. Insert the given persona into the narrative "
                     "naturally so that it describes the named character, and change nothing else. "
                     "Keep every character name exactly as written and keep the number of "
                     "sentences the same. Output only the rewritten narrative.",
                     "Character: [CHARACTER]\nPersona: [PERSONA]\n\nNarrative:\n[NARRATIVE]"});

        t.push_back({TemplateId::AnnotationTemplate, "AnnotationTemplate", "annotation",
                     "Instructions for Annotators:\n"
                     "- Fill out all fields in the interface for each narrative you review.\n"
                     "- For character role verification, assess whether each character's actions "
                     "and interactions in the narrative align with their assigned role.\n"
                     "- In the \"Additional Comments\" section, note any unusual or interesting "
                     "aspects of the narrative that aren't captured by the other fields.",
                     "Narrative ID: [NARRATIVE_ID]\n\n\n"
                     "1. Character Role Verification:\n[ROLE_BLOCKS]\n\n"
                     "2. Character Portrayal Consistency:\n[PORTRAYAL_BLOCKS]\n\n"
                     "3. Absence of Socio-demographic Information:\n[DEMOGRAPHIC_BLOCKS]\n\n"
                     "4. Genre and Topic Adherence:\n"
                     "   Specified genre: [GENRE]\n"
                     "   Specified topic: [TITLE]\n"
                     "   Adheres to genre: [Yes/No]\n"
                     "   Adheres to topic: [Yes/No]\n"
                     "   If No to either, explain: [Explanation]\n\n\n"
                     "5. Overall Semantic Constraint Adherence:\n"
                     "   All semantic constraints met: [Yes/No]\n\n"
                     "6. Additional Comments:\n"
                     "   [Free text area for any other observations or notes]\n\n"
                     "Annotator ID: [Unique identifier for the annotator]"});
        return t;
    }();
    return all;
}

const TemplateText& lookup(TemplateId id) {
    for (const auto& t : templates())
        if (t.id == id) return t;
    throw Error(ErrorKind::Template, "unknown template id");
}

bool is_key_char(char c) {
    return (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_';
}

/// Placeholder keys are upper-case identifiers in brackets; anything else in
/// brackets (e.g. "[Yes/No]", "[attr1, attr2, ...]") is literal text.
template <typename Fn>
void scan_placeholders(std::string_view text, Fn&& fn) {
    for (std::size_t i = 0; i < text.size(); ++i) {
        if (text[i] != '[') continue;
        std::size_t j = i + 1;
        bool has_letter = false;
        while (j < text.size() && is_key_char(text[j])) {
            has_letter |= (text[j] >= 'A' && text[j] <= 'Z');
            ++j;
        }
        if (j < text.size() && text[j] == ']' && j > i + 1 && has_letter)
            fn(i, j + 1, std::string(text.substr(i + 1, j - i - 1)));
    }
}

std::string substitute(std::string_view text, const PromptContext& ctx) {
    std::string out;
    std::size_t cursor = 0;
    scan_placeholders(text, [&](std::size_t b, std::size_t e, const std::string& key) {
        auto it = ctx.find(key);
        if (it == ctx.end()) return;
        out.append(text.substr(cursor, b - cursor));
        out += it->second;
        cursor = e;
    });
    out.append(text.substr(cursor));
    return out;
}

std::string lower(std::string_view s) {
    std::string out(s);
    for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
}

/// Top-level balanced `{...}` spans that parse as JSON objects.
std::vector<nlohmann::json> json_objects(std::string_view text) {
    std::vector<nlohmann::json> out;
    std::size_t i = 0;
    while (i < text.size()) {
        if (text[i] != '{') {
            ++i;
            continue;
        }
        int depth = 0;
        bool in_string = false;
        bool escaped = false;
        std::size_t j = i;
        for (; j < text.size(); ++j) {
            const char c = text[j];
            if (in_string) {
                if (escaped)
                    escaped = false;
                else if (c == '\\')
                    escaped = true;
                else if (c == '"')
                    in_string = false;
                continue;
            }
            if (c == '"') in_string = true;
            else if (c == '{') ++depth;
            else if (c == '}' && --depth == 0) break;
        }
        if (j >= text.size()) {
            ++i;
            continue;
        }
        auto parsed = nlohmann::json::parse(text.substr(i, j - i + 1), nullptr, false);
        if (!parsed.is_discarded() && parsed.is_object()) {
            out.push_back(std::move(parsed));
            i = j + 1;
        } else {
            ++i;
        }
    }
    return out;
}

std::string canonical_key(std::string_view key) {
    std::string out;
    for (char c : key)
        if (!std::isspace(static_cast<unsigned char>(c)) && c != '*' && c != '`')
            out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    return out;
}

/// Expected character → JSON value, matched case-insensitively. Throws
/// listing every missing character.
std::map<CharacterId, nlohmann::json> match_characters(const nlohmann::json& obj,
                                                       const std::set<CharacterId>& expected) {
    std::map<std::string, const nlohmann::json*> by_key;
    for (auto it = obj.begin(); it != obj.end(); ++it) by_key.emplace(canonical_key(it.key()), &it.value());
    std::map<CharacterId, nlohmann::json> out;
    std::string missing;
    for (const auto& id : expected) {
        auto it = by_key.find(lower(id.str()));
        if (it == by_key.end()) {
            missing += (missing.empty() ? "" : ", ") + id.str();
            continue;
        }
        out.emplace(id, *it->second);
    }
    if (!missing.empty()) throw Error(ErrorKind::Parse, "characters missing from JSON: " + missing);
    return out;
}

std::string clean_item(std::string_view item) {
    item = trim(item);
    auto is_quote = [](char c) { return c == '"' || c == '\'' || c == '`' || c == '*'; };
    while (!item.empty() && is_quote(item.front())) item.remove_prefix(1);
    while (!item.empty() && (is_quote(item.back()) || item.back() == '.')) item.remove_suffix(1);
    return lower(trim(item));
}

std::vector<std::string> normalize_attributes(const std::vector<std::string>& raw) {
    std::vector<std::string> out;
    for (const auto& r : raw) {
        auto item = clean_item(r);
        if (item.empty()) continue;
        if (std::find(out.begin(), out.end(), item) == out.end()) out.push_back(std::move(item));
    }
    return out;
}

constexpr std::size_t kMinAttributes = 3;
constexpr std::size_t kMaxAttributes = 8;

}  // namespace

const std::vector<TemplateId>& all_templates() {
    static const std::vector<TemplateId> ids = [] {
        std::vector<TemplateId> v;
        for (const auto& t : templates()) v.push_back(t.id);
        return v;
    }();
    return ids;
}

std::string_view template_name(TemplateId id) { return lookup(id).name; }
std::string_view template_route(TemplateId id) { return lookup(id).route; }

std::vector<std::string> required_placeholders(TemplateId id) {
    const auto& t = lookup(id);
    std::vector<std::string> keys;
    auto collect = [&](std::size_t, std::size_t, const std::string& key) {
        if (std::find(keys.begin(), keys.end(), key) == keys.end()) keys.push_back(key);
    };
    scan_placeholders(t.system, collect);
    scan_placeholders(t.human, collect);
    return keys;
}

const std::set<std::string>& placeholder_vocabulary() {
    static const std::set<std::string> vocab = [] {
        std::set<std::string> v;
        for (auto id : all_templates())
            for (auto& k : required_placeholders(id)) v.insert(k);
        return v;
    }();
    return vocab;
}

RenderedPrompt render(TemplateId id, const PromptContext& ctx) {
    const auto& t = lookup(id);
    for (const auto& key : required_placeholders(id))
        if (!ctx.count(key))
            throw Error(ErrorKind::Template, std::string(t.name) + ": " + key + " missing");
    RenderedPrompt p;
    p.sentinel = std::string(t.route);
    p.system = route_sentinel(t.route) + "\n" + substitute(t.system, ctx);
    p.human = substitute(t.human, ctx);
    return p;
}

std::string dump_templates() {
    std::string out;
    out += "# prompt templates, version " + std::string(kTemplateVersion) + "\n";
    for (const auto& t : templates()) {
        out += "\n=== " + std::string(t.name) + " (route: " + std::string(t.route) + ") ===\n";
        out += "--- system ---\n" + t.system + "\n";
        out += "--- human ---\n" + t.human + "\n";
    }
    return out;
}

PromptContext generation_context(const GenerationConstraints& c) {
    PromptContext ctx;
    ctx["GENRE"] = c.genre;
    ctx["TITLE"] = c.title;
    ctx["NUMBER"] = std::to_string(c.character_count);
    ctx["LENGTH"] = std::to_string(c.length_sentences);
    std::string roles;
    std::string portrayals;
    for (const auto& ch : c.characters) {
        if (!roles.empty()) roles += ", ";
        roles += ch.id.str() + " (" + std::string(to_string(ch.role())) + ")";
        if (!portrayals.empty()) portrayals += "\n";
        portrayals += "- " + ch.id.str() + " is portrayed with:\n";
        portrayals += "  - " + std::string(to_string(ch.labels.intellect)) + " logical intelligence\n";
        portrayals += "  - " + std::string(to_string(ch.labels.appearance)) + " appearance\n";
        portrayals += "  - " + std::string(to_string(ch.labels.power)) + " power";
    }
    ctx["CHARACTER_ROLES"] = roles;
    ctx["CHARACTER_PORTRAYALS"] = portrayals;
    return ctx;
}

// ---------------------------------------------------------------------------
// Parsers
// ---------------------------------------------------------------------------

std::vector<std::string> parse_wordlist(std::string_view response) {
    for (std::size_t open = response.find('['); open != std::string_view::npos;
         open = response.find('[', open + 1)) {
        const auto close = response.find(']', open + 1);
        if (close == std::string_view::npos) break;
        const auto body = response.substr(open + 1, close - open - 1);
        if (body.find(',') == std::string_view::npos || body.find('[') != std::string_view::npos)
            continue;
        std::vector<std::string> raw;
        std::size_t start = 0;
        while (start <= body.size()) {
            auto comma = body.find(',', start);
            if (comma == std::string_view::npos) comma = body.size();
            raw.emplace_back(body.substr(start, comma - start));
            start = comma + 1;
        }
        std::vector<std::string> items;
        for (const auto& r : raw)
            if (auto c = clean_item(r); !c.empty()) items.push_back(std::move(c));
        if (items.size() < kMinAttributes || items.size() > kMaxAttributes)
            throw Error(ErrorKind::Parse, "wordlist has " + std::to_string(items.size()) +
                                              " items; expected 3 to 8");
        return items;
    }
    throw Error(ErrorKind::Parse, "no bracketed list in response");
}

std::map<CharacterId, LabelSet> parse_label_json(std::string_view response,
                                                 const std::set<CharacterId>& expected) {
    if (expected.empty()) throw Error(ErrorKind::InvalidArgument, "no expected characters");
    const auto objects = json_objects(response);
    if (objects.empty()) throw Error(ErrorKind::Parse, "no JSON object in response");
    const auto matched = match_characters(objects.back(), expected);

    std::map<CharacterId, LabelSet> out;
    std::string bad;
    for (const auto& [id, value] : matched) {
        std::array<std::optional<Level>, 3> levels;
        bool shape_ok = true;
        if (value.is_array() && value.size() == 3) {
            for (std::size_t k = 0; k < 3; ++k)
                if (value[k].is_string()) levels[k] = parse_level(value[k].get<std::string>());
        } else if (value.is_object()) {
            for (std::size_t k = 0; k < 3; ++k)
                for (auto it = value.begin(); it != value.end(); ++it) {
                    auto dim = parse_dimension(it.key());
                    if (!dim && canonical_key(it.key()) == "logicalintelligence")
                        dim = Dimension::Intellect;
                    if (dim && *dim == kDimensions[k] && it.value().is_string())
                        levels[k] = parse_level(it.value().get<std::string>());
                }
        } else {
            shape_ok = false;
        }
        if (!shape_ok || !levels[0] || !levels[1] || !levels[2]) {
            bad += (bad.empty() ? "" : ", ") + id.str() + "=" + value.dump();
            continue;
        }
        out.emplace(id, LabelSet{*levels[0], *levels[1], *levels[2]});
    }
    if (!bad.empty()) throw Error(ErrorKind::Parse, "invalid level tokens: " + bad);
    return out;
}

std::map<CharacterId, std::vector<std::string>> parse_wordlist_json(
    std::string_view response, const std::set<CharacterId>& expected) {
    if (expected.empty()) throw Error(ErrorKind::InvalidArgument, "no expected characters");
    const auto objects = json_objects(response);
    if (objects.empty()) throw Error(ErrorKind::Parse, "no JSON object in response");
    const auto matched = match_characters(objects.back(), expected);

    std::map<CharacterId, std::vector<std::string>> out;
    std::string bad;
    for (const auto& [id, value] : matched) {
        std::vector<std::string> raw;
        if (value.is_array())
            for (const auto& v : value)
                if (v.is_string()) raw.push_back(v.get<std::string>());
        auto attrs = normalize_attributes(raw);
        if (attrs.size() < kMinAttributes || attrs.size() > kMaxAttributes) {
            bad += (bad.empty() ? "" : ", ") + id.str();
            continue;
        }
        out.emplace(id, std::move(attrs));
    }
    if (!bad.empty()) throw Error(ErrorKind::Parse, "wordlists of wrong size for: " + bad);
    return out;
}

VoteResult parse_vote(std::string_view response, VoteKind kind, std::size_t k) {
    if (k == 0) throw Error(ErrorKind::InvalidArgument, "vote needs at least one candidate");
    static const std::regex plan_re(R"(Chosen\s+Plan\s*:\s*\**\s*Plan\s*\[?\s*(\d+))",
                                    std::regex::icase);
    static const std::regex story_re(R"(Chosen\s+Story\s*:\s*\**\s*Story\s*\[?\s*(\d+))",
                                     std::regex::icase);
    const std::string text(response);
    const auto& re = kind == VoteKind::Plan ? plan_re : story_re;
    std::smatch last;
    bool found = false;
    for (auto it = std::sregex_iterator(text.begin(), text.end(), re); it != std::sregex_iterator();
         ++it) {
        last = *it;
        found = true;
    }
    const char* what = kind == VoteKind::Plan ? "Chosen Plan" : "Chosen Story";
    if (!found) throw Error(ErrorKind::Parse, std::string("no '") + what + "' marker");
    const auto digits = last[1].str();
    if (digits.size() > 6) throw Error(ErrorKind::Parse, "vote index out of range: " + digits);
    const std::size_t n = std::stoul(digits);

    if (kind == VoteKind::Story) {
        if (n >= k)
            throw Error(ErrorKind::Parse, "story vote " + digits + " out of range for " +
                                              std::to_string(k) + " candidates");
        return {n, "zero-based"};
    }
    if (n == 0) return {0, "zero-based (Plan0)"};
    if (n <= k) return {n - 1, "one-based (Plan" + digits + ")"};
    throw Error(ErrorKind::Parse,
                "plan vote " + digits + " out of range for " + std::to_string(k) + " candidates");
}

std::vector<std::string> parse_subproblems(std::string_view response) {
    static const std::regex item_re(R"(^\s*(?:\*\*)?(?:Subproblem\s*)?(\d+)\s*[.):]\s*(.+)$)",
                                    std::regex::icase);
    std::vector<std::string> items;
    std::string text(response);
    std::size_t start = 0;
    while (start <= text.size()) {
        auto nl = text.find('\n', start);
        if (nl == std::string::npos) nl = text.size();
        const std::string line = text.substr(start, nl - start);
        std::smatch m;
        if (std::regex_match(line, m, item_re)) items.push_back(std::string(trim(m[2].str())));
        start = nl + 1;
    }
    if (items.size() != 3)
        throw Error(ErrorKind::Parse,
                    "expected 3 subproblems, found " + std::to_string(items.size()));
    return items;
}

}  // namespace liipa
