#pragma once

// Scoring predictions against gold labels: overall and faceted accuracy,
// persona fairness (per-group variance, accuracy deltas), the
// fairness/accuracy Pareto table and report files (JSON, CSV, SVG).

#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "liipa/classify.hpp"
#include "liipa/core.hpp"
#include "liipa/io.hpp"

namespace liipa {

struct ScoredRecord {
    Prediction prediction;
    LabelSet gold;
    int character_count = 0;
    int sentence_count = 0;
    /// Per dimension; always false for failed predictions.
    std::array<bool, 3> correct{};
};

struct EvalPolicy {
    /// Drop failed predictions instead of counting them wrong.
    bool skip_failed = false;
};

struct ScoredRun {
    std::string method;
    std::vector<ScoredRecord> records;
    std::size_t failed = 0;
    std::size_t skipped = 0;

    /// Every prediction must have a gold character; orphans raise Alignment.
    static ScoredRun join(std::span<const Prediction> predictions, std::span<const Narrative> gold,
                          const EvalPolicy& policy = {});
};

/// Micro accuracy over (character, dimension) pairs.
double accuracy_overall(const ScoredRun& run);
/// Fraction of characters with all three dimensions right.
double exact_match_accuracy(const ScoredRun& run);

enum class Facet { Dimension, GoldLevel, CharCount, SentenceBin };
std::string_view to_string(Facet f);
std::optional<Facet> parse_facet(std::string_view s);

struct FacetCell {
    std::string key;
    std::size_t n = 0;
    std::size_t correct = 0;
    std::optional<double> accuracy;  ///< null when n == 0
};

/// Gold-level cells are per-true-label recall keyed "<Dimension>/<Level>".
/// Sentence bins are "5-10", "11-15", "16-20", "20+" (shorter texts fall in
/// the first bin).
std::vector<FacetCell> accuracy_by(const ScoredRun& run, Facet facet);
std::string sentence_bin(int sentences);

// ---------------------------------------------------------------------------
// Fairness
// ---------------------------------------------------------------------------

struct FairnessSlice {
    std::string persona;
    PersonaGroup group = PersonaGroup::Gender;
    double accuracy = 0.0;
    std::size_t n = 0;
    double baseline_accuracy = 0.0;
};

struct UnfairnessResult {
    double value = 0.0;
    std::map<PersonaGroup, double> group_variance;
};

/// Mean over groups of the population variance of member accuracies. Every
/// group present needs at least two members.
UnfairnessResult unfairness(std::span<const FairnessSlice> slices);

struct PersonaRun {
    std::string persona;
    ScoredRun run;
};

struct AccuracyDelta {
    std::string persona;
    double delta_pp = 0.0;
    std::string sign;  ///< "increase" | "decrease" | "unchanged"
};

/// Persona accuracy minus baseline accuracy on the persona run's slice, in
/// percentage points. A persona record missing from the baseline raises
/// Alignment.
std::vector<AccuracyDelta> accuracy_deltas(std::span<const PersonaRun> persona_runs,
                                           const ScoredRun& baseline);

/// Slices for each persona run, with the baseline restricted to the same
/// (narrative, character) keys.
std::vector<FairnessSlice> fairness_slices(std::span<const PersonaRun> persona_runs,
                                           const ScoredRun& baseline);

// ---------------------------------------------------------------------------
// Pareto
// ---------------------------------------------------------------------------

struct ParetoPoint {
    std::string method;
    double unfairness = 0.0;
    double accuracy_pct = 0.0;
    std::string manifest_digest;
};

struct ParetoRow {
    ParetoPoint point;
    bool dominated = false;
    std::vector<std::string> dominated_by;
};

/// Dominated when another point has <= unfairness and >= accuracy with at
/// least one strict. Rows sorted by unfairness, then method.
std::vector<ParetoRow> pareto_table(std::span<const ParetoPoint> points);

// ---------------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------------

ojson eval_report_json(const ScoredRun& run, std::span<const Facet> facets);
/// eval.json, eval.csv and accuracy_by_<facet>.svg under `dir`.
void emit_eval_report(const std::filesystem::path& dir, const ScoredRun& run,
                      std::span<const Facet> facets);

ojson fairness_report_json(std::string_view method, std::span<const FairnessSlice> slices,
                           std::span<const AccuracyDelta> deltas, const UnfairnessResult& u);
/// fairness.json, fairness.csv (one row per persona) and deltas.svg.
void emit_fairness_report(const std::filesystem::path& dir, std::string_view method,
                          std::span<const FairnessSlice> slices,
                          std::span<const AccuracyDelta> deltas, const UnfairnessResult& u);

std::string pareto_csv(std::span<const ParetoRow> rows);
std::string pareto_svg(std::span<const ParetoRow> rows);

// SVG primitives shared by the reports.
std::string svg_bar_chart(std::string_view title, std::span<const std::string> labels,
                          std::span<const double> values, std::string_view y_label);
std::string svg_line_chart(std::string_view title, std::span<const std::string> labels,
                           std::span<const double> values, std::string_view y_label);
struct ScatterPoint {
    std::string label;
    double x = 0.0;
    double y = 0.0;
    bool highlight = false;
};
std::string svg_scatter(std::string_view title, std::span<const ScatterPoint> points,
                        std::string_view x_label, std::string_view y_label);

}  // namespace liipa
