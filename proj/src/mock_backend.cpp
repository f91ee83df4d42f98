#include <regex>
#include <sstream>

#include <json.hpp>

#include "liipa/core.hpp"
#include "liipa/llm.hpp"
#include "liipa/prompts.hpp"

namespace liipa {

namespace {

constexpr std::string_view kSentinelOpen = "<!-- route:";
constexpr std::string_view kSentinelClose = " -->";

constexpr std::array<std::string_view, 40> kAttributes{
    "curious",   "patient",     "resourceful", "cautious",  "generous",   "stubborn",
    "loyal",     "restless",    "observant",   "quiet",     "bold",       "anxious",
    "methodical", "impulsive",  "kind",        "secretive", "determined", "gentle",
    "ambitious", "careless",    "thoughtful",  "reserved",  "persistent", "nervous",
    "honest",    "cunning",     "calm",        "reckless",  "humble",     "proud",
    "diligent",  "hesitant",    "brave",       "meticulous", "weary",     "cheerful",
    "distrustful", "practical", "inventive",   "lonely"};

constexpr std::array<std::string_view, 12> kSoloSentences{
    "{A} walked to the old gate at dawn.",
    "{A} counted the coins twice before leaving the market.",
    "{A} waited by the river until the bells rang.",
    "{A} fixed the broken lantern with a bit of wire.",
    "{A} wrote a short note and hid it under a stone.",
    "{A} climbed the narrow stairs to the tower room.",
    "{A} studied the faded map by candlelight.",
    "{A} lost the key somewhere near the well.",
    "{A} gave the last loaf of bread to a traveler.",
    "{A} refused to open the door after sunset.",
    "{A} repaired the cart before the storm arrived.",
    "{A} followed the muddy tracks into the woods."};

constexpr std::array<std::string_view, 8> kPairSentences{
    "{A} handed {B} a folded letter without a word.",
    "{A} argued with {B} about the missing supplies.",
    "{A} followed {B} through the crowded square.",
    "{A} locked {B} out of the workshop.",
    "{A} asked {B} for help with the heavy crates.",
    "{A} warned {B} about the cracked bridge.",
    "{A} took the lantern from {B} and ran.",
    "{A} shared a quiet meal with {B}."};

constexpr std::array<std::string_view, 3> kReprompts{kJsonReprompt, kListReprompt, kVoteReprompt};

std::uint64_t digest_seed(const std::string& digest) {
    return std::stoull(digest.substr(0, 16), nullptr, 16);
}

std::string fill(std::string_view tmpl, const std::string& a, const std::string& b) {
    std::string out(tmpl);
    if (auto p = out.find("{A}"); p != std::string::npos) out.replace(p, 3, a);
    if (auto p = out.find("{B}"); p != std::string::npos) out.replace(p, 3, b);
    return out;
}

std::vector<CharacterId> characters_in(std::string_view text) {
    auto set = extract_characters(text);
    return {set.begin(), set.end()};
}

std::string after_marker(const std::string& text, std::string_view marker) {
    auto p = text.find(marker);
    return p == std::string::npos ? std::string() : text.substr(p + marker.size());
}

std::string line_value(const std::string& text, std::string_view key) {
    auto p = text.find(key);
    if (p == std::string::npos) return {};
    p += key.size();
    auto e = text.find('\n', p);
    return text.substr(p, e == std::string::npos ? std::string::npos : e - p);
}

std::size_t count_candidates(const std::string& text, std::string_view label) {
    const std::regex re("(^|\\n)" + std::string(label) + "\\d+:");
    return static_cast<std::size_t>(
        std::distance(std::sregex_iterator(text.begin(), text.end(), re), std::sregex_iterator()));
}

std::string label_json(const std::vector<CharacterId>& chars, Rng& rng) {
    nlohmann::ordered_json j = nlohmann::ordered_json::object();
    for (const auto& c : chars) {
        j[c.str()] = {std::string(to_string(kLevels[rng.uniform(3)])),
                      std::string(to_string(kLevels[rng.uniform(3)])),
                      std::string(to_string(kLevels[rng.uniform(3)]))};
    }
    return j.dump(2);
}

std::vector<std::string> pick_attributes(Rng& rng, std::size_t n) {
    std::vector<std::string> out;
    while (out.size() < n) {
        std::string a(kAttributes[rng.uniform(kAttributes.size())]);
        if (std::find(out.begin(), out.end(), a) == out.end()) out.push_back(std::move(a));
    }
    return out;
}

std::string story(const std::string& human, Rng& rng, const MockOptions& options) {
    static const std::regex length_re(R"(should be (\d+) sentences)");
    std::smatch m;
    int length = 5;
    if (std::regex_search(human, m, length_re)) length = std::stoi(m[1].str());
    const auto chars = characters_in(human);
    const std::size_t nc = chars.size();

    std::vector<std::string> sentences;
    std::size_t covered = 0;
    for (int i = 0; i < length; ++i) {
        if (nc == 0) {
            sentences.emplace_back("The wind moved slowly through the valley.");
            continue;
        }
        const std::size_t remaining_slots = static_cast<std::size_t>(length - i);
        const std::size_t a = covered < nc ? covered++ : rng.uniform(nc);
        const bool must_pair = covered < nc && nc - covered >= remaining_slots;
        const bool pair = nc >= 2 && (must_pair || rng.uniform(2) == 0);
        if (pair) {
            std::size_t b;
            if (covered < nc)
                b = covered++;
            else
                do b = rng.uniform(nc); while (b == a);
            sentences.push_back(fill(kPairSentences[rng.uniform(kPairSentences.size())],
                                     chars[a].str(), chars[b].str()));
        } else {
            sentences.push_back(fill(kSoloSentences[rng.uniform(kSoloSentences.size())],
                                     chars[a].str(), {}));
        }
    }
    if (!options.fault_word.empty() && !sentences.empty() &&
        rng.uniform_real() < options.fault_rate) {
        auto& s = sentences[rng.uniform(sentences.size())];
        s.pop_back();
        s += ", and it looked " + options.fault_word + ".";
    }
    std::string out;
    for (const auto& s : sentences) out += (out.empty() ? "" : " ") + s;
    return out;
}

std::string plan(const std::string& human, Rng& rng) {
    const auto chars = characters_in(human);
    std::ostringstream os;
    os << "Story plan:\n";
    std::size_t step = 1;
    for (const auto& c : chars) {
        const auto attrs = pick_attributes(rng, 2);
        os << step++ << ". Show " << c.str() << " through " << attrs[0] << " and " << attrs[1]
           << " choices.\n";
    }
    os << step << ". Close the story with a turn that resolves the central conflict.";
    return os.str();
}

std::string demographic(const std::string& human) {
    const std::string target = line_value(human, "Character: ");
    const std::string persona = line_value(human, "Persona: ");
    std::string text = after_marker(human, "\n\nNarrative:\n");
    const std::regex re("\\b" + target + "\\b");
    std::smatch m;
    if (target.empty() || !std::regex_search(text, m, re)) return text;
    const auto pos = static_cast<std::size_t>(m.position(0));
    const auto end = pos + target.size();
    if (end < text.size() && text[end] == ' ') {
        text.insert(end, ", " + persona + ",");
    } else {
        auto start = text.rfind(". ", pos);
        start = start == std::string::npos ? 0 : start + 2;
        text.insert(start, target + " was " + persona + ". ");
    }
    return text;
}

bool has_reprompt(const std::string& human) {
    for (auto r : kReprompts)
        if (human.size() >= r.size() && human.compare(human.size() - r.size(), r.size(), r) == 0)
            return true;
    return false;
}

}  // namespace

std::string route_sentinel(std::string_view route) {
    return std::string(kSentinelOpen) + std::string(route) + std::string(kSentinelClose);
}

std::string_view route_of(std::string_view system_prompt) {
    if (system_prompt.substr(0, kSentinelOpen.size()) != kSentinelOpen) return {};
    const auto rest = system_prompt.substr(kSentinelOpen.size());
    const auto end = rest.find(kSentinelClose);
    return end == std::string_view::npos ? std::string_view{} : rest.substr(0, end);
}

ChatResponse mock_complete(const ChatRequest& request, const MockOptions& options) {
    const auto digest = CacheKey::of(request).digest;
    Rng rng(digest_seed(digest));
    const std::string route(route_of(request.system));
    const std::string& human = request.human;

    const bool structured = route != "plan" && route != "story" && route != "tot-plan" &&
                            route != "demographic" && !route.empty() && route != "annotation";
    if (structured && options.malformed_rate > 0 && !has_reprompt(human) &&
        rng.uniform_real() < options.malformed_rate)
        return {"I am not certain how to format that answer.", false, 0};

    std::string text;
    if (route == "plan") {
        text = plan(human, rng);
    } else if (route == "plan-vote") {
        const auto k = std::max<std::size_t>(1, count_candidates(human, "Plan"));
        text = "The chosen plan keeps every character's portrayal implicit.\n\nChosen Plan: Plan" +
               std::to_string(rng.uniform(k) + 1);
    } else if (route == "story") {
        text = story(human, rng, options);
    } else if (route == "story-vote") {
        const auto k = std::max<std::size_t>(1, count_candidates(human, "Story"));
        text = "This story follows the plan most closely.\n\nChosen Story: Story" +
               std::to_string(rng.uniform(k));
    } else if (route == "sentence-wordlist") {
        const auto attrs = pick_attributes(rng, 5);
        text = rng.uniform(2) == 0 ? "" : "Here are the attributes: ";
        text += "[";
        for (std::size_t i = 0; i < attrs.size(); ++i) text += (i ? ", " : "") + attrs[i];
        text += "]";
    } else if (route == "story-wordlist") {
        nlohmann::ordered_json j = nlohmann::ordered_json::object();
        for (const auto& c : characters_in(after_marker(human, "Narrative: ")))
            j[c.str()] = pick_attributes(rng, 5);
        text = j.dump(2);
    } else if (route == "judge" || route == "direct") {
        text = label_json(characters_in(human), rng);
    } else if (route == "cot" || route == "ltm-solve" || route == "tot-exec") {
        const auto chars = characters_in(human);
        std::ostringstream os;
        for (const auto& c : chars)
            os << "Step: " << c.str() << " acts in ways that reveal a " << kAttributes[rng.uniform(kAttributes.size())]
               << " side.\n";
        os << "\nFinal classification:\n" << label_json(chars, rng);
        text = os.str();
    } else if (route == "ltm-decompose") {
        text =
            "1. Identify each character's role and key actions in the narrative.\n"
            "2. Relate those actions to intellect, appearance and power cues.\n"
            "3. Classify each character's intellect, appearance and power as low, neutral or high.";
    } else if (route == "tot-plan") {
        text =
            "1. List each character and the actions they take.\n"
            "2. Note decisions that show reasoning, descriptions of looks, and shifts in control.\n"
            "3. Weigh the end state of each character for every dimension.\n"
            "4. Assign low, neutral or high per dimension.";
    } else if (route == "demographic") {
        text = demographic(human);
    } else {
        text = "OK";
    }
    return {std::move(text), false, 0};
}

}  // namespace liipa
