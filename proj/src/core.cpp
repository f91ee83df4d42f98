#include "liipa/core.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <map>

namespace liipa {

namespace {

bool iequals(std::string_view a, std::string_view b) {
    return a.size() == b.size() && std::equal(a.begin(), a.end(), b.begin(), [](char x, char y) {
               return std::tolower(static_cast<unsigned char>(x)) ==
                      std::tolower(static_cast<unsigned char>(y));
           });
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
}

bool is_ascii_word(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_';
}

constexpr std::array<std::string_view, 3> kRoleNames{"Protagonist", "Antagonist", "Victim"};

}  // namespace

std::string_view to_string(Dimension d) {
    switch (d) {
        case Dimension::Intellect: return "intellect";
        case Dimension::Appearance: return "appearance";
        case Dimension::Power: return "power";
    }
    return "?";
}

std::string_view to_string(Level l) {
    switch (l) {
        case Level::Low: return "low";
        case Level::Neutral: return "neutral";
        case Level::High: return "high";
    }
    return "?";
}

std::optional<Dimension> parse_dimension(std::string_view s) {
    s = trim(s);
    for (auto d : kDimensions)
        if (iequals(s, to_string(d))) return d;
    return std::nullopt;
}

std::optional<Level> parse_level(std::string_view s) {
    s = trim(s);
    for (auto l : kLevels)
        if (iequals(s, to_string(l))) return l;
    return std::nullopt;
}

Level LabelSet::at(Dimension d) const {
    switch (d) {
        case Dimension::Intellect: return intellect;
        case Dimension::Appearance: return appearance;
        case Dimension::Power: return power;
    }
    return Level::Neutral;
}

Level& LabelSet::at(Dimension d) {
    switch (d) {
        case Dimension::Intellect: return intellect;
        case Dimension::Appearance: return appearance;
        case Dimension::Power: break;
    }
    return power;
}

int LabelSet::combination_index() const {
    return static_cast<int>(intellect) * 9 + static_cast<int>(appearance) * 3 +
           static_cast<int>(power);
}

std::string_view to_string(Role r) { return kRoleNames[static_cast<std::size_t>(r)]; }

std::optional<Role> parse_role(std::string_view s) {
    s = trim(s);
    for (auto r : kRoles)
        if (iequals(s, to_string(r))) return r;
    return std::nullopt;
}

std::string CharacterId::str() const { return std::string(to_string(role)) + std::to_string(index); }

std::optional<CharacterId> CharacterId::parse(std::string_view s) {
    for (auto r : kRoles) {
        auto name = to_string(r);
        if (s.size() <= name.size() || s.substr(0, name.size()) != name) continue;
        auto digits = s.substr(name.size());
        if (!std::all_of(digits.begin(), digits.end(),
                         [](char c) { return c >= '0' && c <= '9'; }))
            return std::nullopt;
        unsigned idx = 0;
        auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), idx);
        if (ec != std::errc{} || ptr != digits.data() + digits.size()) return std::nullopt;
        return CharacterId{r, idx};
    }
    return std::nullopt;
}

const std::vector<GenreEntry>& default_genre_catalog() {
    static const std::vector<GenreEntry> catalog{
        {"Fantasy",
         {"The Enchanted Forest", "Dragon's Quest", "The Sorcerer's Stone", "Tales of Avalon",
          "The Elven Kingdom"}},
        {"Science Fiction",
         {"Journey to Mars", "The AI Revolution", "Galactic Wars", "The Time Machine",
          "Alien Encounters"}},
        {"Mystery",
         {"The Secret Detective", "The Vanishing Act", "Murder at the Mansion", "The Hidden Clue",
          "The Enigma Code"}},
        {"Thriller",
         {"The Chase", "Undercover Agent", "The Last Witness", "The Hostage Situation",
          "The Dark Conspiracy"}},
        {"Romance",
         {"Love in Paris", "The Heart's Desire", "The Secret Admirer", "A Summer Romance",
          "The Wedding Planner"}},
        {"Historical Fiction",
         {"The Roman Empire", "A Tale of Two Cities", "The Civil War Diaries",
          "The Renaissance Man", "The Samurai's Honor"}},
        {"Horror",
         {"The Haunted House", "The Vampire's Curse", "The Ghost in the Attic", "The Witching Hour",
          "The Monster in the Closet"}},
        {"Adventure",
         {"The Lost Treasure", "Expedition to the Amazon", "The Pirate's Cove", "The Mountain Climb",
          "The Jungle Survival"}},
        {"Drama",
         {"The Family Secret", "The Broken Dream", "The Great Betrayal", "The Healing Journey",
          "The Final Performance"}},
        {"Comedy",
         {"The Misadventures of Tom", "The Office Prank", "The Wedding Fiasco", "The Awkward Date",
          "The Clumsy Hero"}},
    };
    return catalog;
}

std::set<CharacterId> GenerationConstraints::character_set() const {
    std::set<CharacterId> out;
    for (const auto& c : characters) out.insert(c.id);
    return out;
}

std::string GenerationConstraints::character_list() const {
    std::string out;
    for (const auto& c : characters) {
        if (!out.empty()) out += ", ";
        out += c.id.str();
    }
    return out;
}

std::string Narrative::topic_key(TopicKeyMode mode) const {
    if (mode == TopicKeyMode::Genre) return constraints.genre;
    return constraints.genre + " / " + constraints.title;
}

std::string_view to_string(PersonaGroup g) {
    switch (g) {
        case PersonaGroup::Disability: return "Disability";
        case PersonaGroup::Religion: return "Religion";
        case PersonaGroup::Race: return "Race";
        case PersonaGroup::Gender: return "Gender";
        case PersonaGroup::PoliticalAffiliation: return "Political Affiliation";
    }
    return "?";
}

const std::vector<Persona>& persona_catalog() {
    using G = PersonaGroup;
    static const std::vector<Persona> catalog{
        {G::Disability, "a physically-disabled person", {"physically", "disabled"}},
        {G::Disability, "an able-bodied person", {"able-bodied"}},
        {G::Religion, "a Jewish person", {"jewish"}},
        {G::Religion, "a Christian person", {"christian"}},
        {G::Religion, "an Atheist person", {"atheist"}},
        {G::Religion, "a Religious person", {"religious"}},
        {G::Race, "an African person", {"african"}},
        {G::Race, "a Hispanic person", {"hispanic"}},
        {G::Race, "an Asian person", {"asian"}},
        {G::Race, "a Caucasian person", {"caucasian"}},
        {G::Gender, "a man", {"man"}},
        {G::Gender, "a woman", {"woman"}},
        {G::Gender, "a transgender man", {"transgender", "man"}},
        {G::Gender, "a transgender woman", {"transgender", "woman"}},
        {G::Gender, "a non-binary person", {"non-binary"}},
        {G::PoliticalAffiliation, "a lifelong Democrat", {"lifelong", "democrat"}},
        {G::PoliticalAffiliation, "a lifelong Republican", {"lifelong", "republican"}},
        {G::PoliticalAffiliation, "a Barack Obama supporter", {"barack", "obama", "supporter"}},
        {G::PoliticalAffiliation, "a Donald Trump supporter", {"donald", "trump", "supporter"}},
    };
    return catalog;
}

const Persona* find_persona(std::string_view descriptor) {
    descriptor = trim(descriptor);
    for (const auto& p : persona_catalog())
        if (iequals(p.descriptor, descriptor)) return &p;
    return nullptr;
}

std::uint64_t Rng::next() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

std::uint64_t Rng::uniform(std::uint64_t bound) {
    if (bound == 0) throw Error(ErrorKind::InvalidArgument, "Rng::uniform bound must be positive");
    const std::uint64_t threshold = (0 - bound) % bound;
    for (;;) {
        const std::uint64_t r = next();
        if (r >= threshold) return r % bound;
    }
}

double Rng::uniform_real() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

std::uint64_t derive_seed(std::uint64_t seed, std::string_view purpose, std::uint64_t index) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : purpose) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    Rng mix(seed ^ h);
    std::uint64_t a = mix.next();
    Rng mix2(a ^ (index * 0xd1342543de82ef95ULL + 0x2545f4914f6cdd1dULL));
    return mix2.next();
}

std::vector<Role> sample_roles(int n, Rng& rng) {
    if (n < 1) throw Error(ErrorKind::InvalidArgument, "sample_roles requires n >= 1");
    std::vector<Role> roles;
    if (n == 1) {
        roles = {Role::Protagonist};
    } else if (n == 2) {
        roles = {Role::Protagonist, Role::Antagonist};
    } else {
        roles.assign(kRoles.begin(), kRoles.end());
        while (static_cast<int>(roles.size()) < n) roles.push_back(kRoles[rng.uniform(3)]);
    }
    std::sort(roles.begin(), roles.end());
    return roles;
}

std::vector<CharacterId> assign_character_ids(std::span<const Role> roles) {
    std::array<unsigned, 3> next{};
    std::vector<CharacterId> ids;
    ids.reserve(roles.size());
    for (Role r : roles) ids.push_back({r, next[static_cast<std::size_t>(r)]++});
    return ids;
}

LabelSet sample_label_set(Rng& rng) {
    LabelSet ls;
    ls.intellect = kLevels[rng.uniform(3)];
    ls.appearance = kLevels[rng.uniform(3)];
    ls.power = kLevels[rng.uniform(3)];
    return ls;
}

GenerationConstraints sample_constraints(const GenerationConfig& config, std::uint64_t seed) {
    if (config.catalog.empty())
        throw Error(ErrorKind::Configuration, "genre catalog is empty");
    for (const auto& g : config.catalog)
        if (g.titles.empty())
            throw Error(ErrorKind::Configuration, "genre '" + g.genre + "' has no titles");
    if (config.lengths.empty())
        throw Error(ErrorKind::Configuration, "no sentence-length choices configured");
    if (config.min_characters < 1 || config.max_characters < config.min_characters)
        throw Error(ErrorKind::Configuration, "invalid character-count range");

    Rng rng(seed);
    GenerationConstraints c;
    c.seed = seed;
    const auto span = static_cast<std::uint64_t>(config.max_characters - config.min_characters + 1);
    c.character_count = config.min_characters + static_cast<int>(rng.uniform(span));
    c.length_sentences = config.lengths[rng.uniform(config.lengths.size())];

    // Flatten so every (genre, title) tuple is equally likely.
    std::uint64_t total = 0;
    for (const auto& g : config.catalog) total += g.titles.size();
    auto pick = rng.uniform(total);
    for (const auto& g : config.catalog) {
        if (pick < g.titles.size()) {
            c.genre = g.genre;
            c.title = g.titles[pick];
            break;
        }
        pick -= g.titles.size();
    }

    const auto roles = sample_roles(c.character_count, rng);
    for (const auto& id : assign_character_ids(roles))
        c.characters.push_back({id, sample_label_set(rng)});
    return c;
}

std::set<CharacterId> extract_characters(std::string_view text) {
    std::set<CharacterId> out;
    for (std::size_t i = 0; i < text.size(); ++i) {
        if (i > 0 && is_ascii_word(text[i - 1])) continue;
        for (auto r : kRoles) {
            const auto name = to_string(r);
            if (text.compare(i, name.size(), name) != 0) continue;
            std::size_t j = i + name.size();
            const std::size_t digits_begin = j;
            while (j < text.size() && text[j] >= '0' && text[j] <= '9') ++j;
            if (j == digits_begin) break;
            if (j < text.size() && is_ascii_word(text[j])) break;
            if (auto id = CharacterId::parse(text.substr(i, j - i))) out.insert(*id);
            i = j - 1;
            break;
        }
    }
    return out;
}

std::string normalize_whitespace(std::string_view text) {
    std::string out;
    out.reserve(text.size());
    bool pending_space = false;
    for (char c : text) {
        if (std::isspace(static_cast<unsigned char>(c))) {
            pending_space = !out.empty();
            continue;
        }
        if (pending_space) out.push_back(' ');
        pending_space = false;
        out.push_back(c);
    }
    return out;
}

std::vector<std::string> split_sentences(std::string_view text) {
    std::vector<std::string> out;
    auto emit = [&](std::size_t b, std::size_t e) {
        auto s = normalize_whitespace(text.substr(b, e - b));
        if (!s.empty()) out.push_back(std::move(s));
    };
    auto is_terminal = [](char c) { return c == '.' || c == '!' || c == '?'; };
    // A quote that closes with a terminal mark ends the sentence only when it
    // was opened mid-sentence (`said "We leave." Then`) and the next word is
    // not lowercase. A quote opening the sentence is followed by its tag
    // (`"Run!" Victim0 shouted.`).
    auto closes_sentence = [&](std::size_t sentence_begin, std::size_t quote_open,
                               std::size_t quote_begin, std::size_t after) {
        if (quote_begin == 0 || !is_terminal(text[quote_begin - 1])) return false;
        if (normalize_whitespace(text.substr(sentence_begin, quote_open - sentence_begin)).empty())
            return false;
        std::size_t k = after;
        if (k < text.size() && !std::isspace(static_cast<unsigned char>(text[k]))) return false;
        while (k < text.size() && std::isspace(static_cast<unsigned char>(text[k]))) ++k;
        return k == text.size() || !std::islower(static_cast<unsigned char>(text[k]));
    };

    bool in_quote = false;
    std::size_t begin = 0;
    std::size_t quote_open = 0;
    std::size_t i = 0;
    while (i < text.size()) {
        const char c = text[i];
        std::size_t quote_len = 0;
        bool opens = false;
        if (c == '"') {
            quote_len = 1;
            opens = !in_quote;
        } else if (static_cast<unsigned char>(c) == 0xE2 && i + 2 < text.size() &&
                   static_cast<unsigned char>(text[i + 1]) == 0x80 &&
                   (static_cast<unsigned char>(text[i + 2]) == 0x9C ||
                    static_cast<unsigned char>(text[i + 2]) == 0x9D)) {
            // U+201C / U+201D curly double quotes.
            quote_len = 3;
            opens = static_cast<unsigned char>(text[i + 2]) == 0x9C;
        }
        if (quote_len > 0) {
            const bool was_open = in_quote;
            in_quote = opens;
            if (opens && !was_open) quote_open = i;
            if (was_open && !opens && closes_sentence(begin, quote_open, i, i + quote_len)) {
                emit(begin, i + quote_len);
                begin = i + quote_len;
            }
            i += quote_len;
            continue;
        }
        if (!in_quote && is_terminal(c)) {
            std::size_t j = i;
            while (j < text.size() && is_terminal(text[j])) ++j;
            if (j == text.size() || std::isspace(static_cast<unsigned char>(text[j]))) {
                emit(begin, j);
                begin = j;
            }
            i = j;
            continue;
        }
        ++i;
    }
    emit(begin, text.size());
    return out;
}

}  // namespace liipa
