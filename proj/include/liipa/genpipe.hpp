#pragma once

// Constraint-driven narrative generation: tree-of-thoughts plan/vote/story/
// vote, automated validation, the regenerate-on-failure dataset loop and the
// human annotation form.

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "liipa/core.hpp"
#include "liipa/io.hpp"
#include "liipa/llm.hpp"

namespace liipa {

struct ToTConfig {
    int plan_branch = 3;
    int story_branch = 3;
    /// Regenerations allowed after a failed attempt (so 1 + this attempts per slot).
    int max_regen_attempts = 3;
    /// Sampling temperature for plan and story candidates; votes use 0.
    double sample_temperature = 1.0;

    void check() const;
};

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

struct ExclusionHit {
    std::string category;  ///< intellect | appearance | power | demographic
    std::string word;      ///< list entry that matched
    std::size_t offset;    ///< byte offset of the match in the text
    bool operator==(const ExclusionHit&) const = default;
};

struct ValidationReport {
    bool char_count_ok = false;
    bool sentence_count_ok = false;
    int sentence_count = 0;
    std::set<CharacterId> missing_characters;
    std::set<CharacterId> unexpected_characters;
    std::vector<ExclusionHit> exclusion_hits;
    bool passed = false;

    /// Distinct failure categories, e.g. "character_set", "intellect".
    [[nodiscard]] std::vector<std::string> reasons() const;
};

struct ValidatorOptions {
    int length_tolerance = 0;
};

/// category → list entries. Entries may be hyphenated phrases ("able-bodied").
const std::map<std::string, std::vector<std::string>>& exclusion_lists();

/// Case-insensitive, word-bounded matches with simple suffix stemming
/// (plural, adverb, comparative forms).
std::vector<ExclusionHit> find_exclusion_hits(std::string_view text);

ValidationReport validate_automated(const Narrative& narrative,
                                    const GenerationConstraints& constraints,
                                    const ValidatorOptions& options = {});

// ---------------------------------------------------------------------------
// Generation
// ---------------------------------------------------------------------------

struct VoteRecord {
    std::string response;
    std::size_t chosen = 0;
    std::string note;
};

struct ToTTrace {
    std::vector<std::string> plans;
    std::optional<VoteRecord> plan_vote;
    std::size_t chosen_plan = 0;
    std::vector<std::string> stories;
    std::optional<VoteRecord> story_vote;
    std::size_t chosen_story = 0;
    std::vector<std::string> digests;

    [[nodiscard]] ojson to_json() const;
};

struct GenerationResult {
    Narrative narrative;
    ToTTrace trace;
};

GenerationResult generate_narrative(const GenerationConstraints& constraints, const ToTConfig& tot,
                                    const ModelRef& generator, std::string id = "narrative");

// ---------------------------------------------------------------------------
// Dataset assembly
// ---------------------------------------------------------------------------

struct BuildOptions {
    std::size_t n_samples = 0;
    std::uint64_t seed = 0;
    GenerationConfig generation{};
    ToTConfig tot{};
    ValidatorOptions validator{};
    int jobs = 1;
};

struct AttemptRecord {
    std::uint64_t seed = 0;
    bool passed = false;
    std::vector<std::string> reasons;
    std::vector<std::string> digests;
};

struct SlotRecord {
    std::size_t slot = 0;
    std::string id;
    bool filled = false;
    std::vector<AttemptRecord> attempts;
};

struct DatasetBuild {
    std::vector<Narrative> records;
    std::vector<SlotRecord> slots;
    std::size_t n_requested = 0;

    [[nodiscard]] bool complete() const { return records.size() == n_requested; }
    /// Failed-attempt counts by reason.
    [[nodiscard]] std::map<std::string, std::size_t> discard_reasons() const;
    [[nodiscard]] ojson manifest(const BuildOptions& options) const;
};

std::string narrative_id(std::size_t slot);

DatasetBuild build_dataset(const BuildOptions& options, const ModelRef& generator);

/// Annotation form with the narrative id on the first line and one block per
/// character pre-filled from the constraints.
std::string export_annotation_template(const Narrative& narrative);

}  // namespace liipa
