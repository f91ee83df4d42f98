#pragma once

// Domain types shared by every stage of the pipeline, plus the seeded
// sampling routines and the text utilities (character-id extraction,
// sentence splitting) that generation and classification both rely on.

#include <array>
#include <compare>
#include <cstdint>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "liipa/error.hpp"

namespace liipa {

// ---------------------------------------------------------------------------
// Portrayal labels
// ---------------------------------------------------------------------------

enum class Dimension { Intellect, Appearance, Power };
inline constexpr std::array<Dimension, 3> kDimensions{Dimension::Intellect, Dimension::Appearance,
                                                      Dimension::Power};

enum class Level { Low, Neutral, High };
inline constexpr std::array<Level, 3> kLevels{Level::Low, Level::Neutral, Level::High};

std::string_view to_string(Dimension d);
std::string_view to_string(Level l);
std::optional<Dimension> parse_dimension(std::string_view s);
/// Case-insensitive; surrounding whitespace ignored.
std::optional<Level> parse_level(std::string_view s);

struct LabelSet {
    Level intellect = Level::Neutral;
    Level appearance = Level::Neutral;
    Level power = Level::Neutral;

    [[nodiscard]] Level at(Dimension d) const;
    Level& at(Dimension d);

    /// Position in the 27-element product space, intellect most significant.
    [[nodiscard]] int combination_index() const;

    auto operator<=>(const LabelSet&) const = default;
};

// ---------------------------------------------------------------------------
// Characters
// ---------------------------------------------------------------------------

enum class Role { Protagonist, Antagonist, Victim };
inline constexpr std::array<Role, 3> kRoles{Role::Protagonist, Role::Antagonist, Role::Victim};

std::string_view to_string(Role r);
std::optional<Role> parse_role(std::string_view s);

struct CharacterId {
    Role role = Role::Protagonist;
    unsigned index = 0;

    /// Canonical `<Role><index>` form, e.g. "Protagonist0".
    [[nodiscard]] std::string str() const;
    /// Exact inverse of str(); no leading/trailing text accepted.
    static std::optional<CharacterId> parse(std::string_view s);

    auto operator<=>(const CharacterId&) const = default;
};

struct CharacterSpec {
    CharacterId id;
    LabelSet labels;

    [[nodiscard]] Role role() const { return id.role; }
    bool operator==(const CharacterSpec&) const = default;
};

// ---------------------------------------------------------------------------
// Generation constraints and narratives
// ---------------------------------------------------------------------------

struct GenreEntry {
    std::string genre;
    std::vector<std::string> titles;
};

/// The ten genres with five titles each used to condition generation.
const std::vector<GenreEntry>& default_genre_catalog();

struct GenerationConfig {
    std::vector<GenreEntry> catalog = default_genre_catalog();
    int min_characters = 1;
    int max_characters = 5;
    std::vector<int> lengths{5, 10, 15, 20};
};

struct GenerationConstraints {
    int character_count = 0;
    int length_sentences = 0;
    std::string genre;
    std::string title;
    std::vector<CharacterSpec> characters;
    std::uint64_t seed = 0;

    [[nodiscard]] std::set<CharacterId> character_set() const;
    /// "Protagonist0, Antagonist0, ..." in constraint order.
    [[nodiscard]] std::string character_list() const;
    bool operator==(const GenerationConstraints&) const = default;
};

enum class TopicKeyMode { Genre, GenreTitle };

struct PersonaTag {
    std::string descriptor;
    CharacterId character;
    bool operator==(const PersonaTag&) const = default;
};

struct Narrative {
    std::string id;
    std::string text;
    GenerationConstraints constraints;
    /// Set only on demographized copies.
    std::optional<PersonaTag> persona;

    [[nodiscard]] std::string topic_key(TopicKeyMode mode = TopicKeyMode::Genre) const;
    bool operator==(const Narrative&) const = default;
};

// ---------------------------------------------------------------------------
// Personas
// ---------------------------------------------------------------------------

enum class PersonaGroup { Disability, Religion, Race, Gender, PoliticalAffiliation };
inline constexpr std::array<PersonaGroup, 5> kPersonaGroups{
    PersonaGroup::Disability, PersonaGroup::Religion, PersonaGroup::Race, PersonaGroup::Gender,
    PersonaGroup::PoliticalAffiliation};

std::string_view to_string(PersonaGroup g);

struct Persona {
    PersonaGroup group;
    std::string descriptor;
    /// Lowercase words/phrases that must appear once the persona is inserted
    /// and that the validator treats as demographic indicators.
    std::vector<std::string> content_terms;
};

/// The 19 personas in catalog order.
const std::vector<Persona>& persona_catalog();
/// Exact descriptor match (case-insensitive).
const Persona* find_persona(std::string_view descriptor);

// ---------------------------------------------------------------------------
// Randomness
// ---------------------------------------------------------------------------

/// SplitMix64. The algorithm is part of the dataset format: changing it
/// changes every generated corpus.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next();
    /// Uniform integer in [0, bound), bound > 0. Rejection sampling, so the
    /// result does not depend on the standard library's distributions.
    std::uint64_t uniform(std::uint64_t bound);
    /// Uniform real in [0, 1) with 53 random bits.
    double uniform_real();

private:
    std::uint64_t state_;
};

/// Stable sub-seed for (seed, purpose, index). All per-slot randomness flows
/// through here so a record depends only on its own derived seed.
std::uint64_t derive_seed(std::uint64_t seed, std::string_view purpose, std::uint64_t index = 0);

// ---------------------------------------------------------------------------
// Sampling
// ---------------------------------------------------------------------------

/// Character role multiset for n characters, returned sorted
/// (Protagonists, then Antagonists, then Victims).
std::vector<Role> sample_roles(int n, Rng& rng);

/// Per-role indices start at 0 and increase in input order.
std::vector<CharacterId> assign_character_ids(std::span<const Role> roles);

LabelSet sample_label_set(Rng& rng);

GenerationConstraints sample_constraints(const GenerationConfig& config, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Text utilities
// ---------------------------------------------------------------------------

/// Every distinct `(Protagonist|Antagonist|Victim)<digits>` token delimited by
/// word boundaries. Case-sensitive.
std::set<CharacterId> extract_characters(std::string_view text);

/// Rule-based splitter: a run of `.`, `!`, `?` outside double quotes that is
/// followed by whitespace or end of text closes a sentence. A quote opened
/// mid-sentence and closed right after a terminal mark also ends it, unless
/// the next word starts lowercase. Whitespace is collapsed to single spaces.
std::vector<std::string> split_sentences(std::string_view text);

/// Collapse whitespace runs to one space and trim.
std::string normalize_whitespace(std::string_view text);

}  // namespace liipa
