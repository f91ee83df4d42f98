#pragma once

// Lexical diversity (HD-D, Maas, MTLD), embedding-based semantic diversity
// (intra/inter-topic APS), n-gram overlap (INGF) and corpus reports.

#include <cstddef>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "liipa/core.hpp"
#include "liipa/io.hpp"

namespace liipa {

struct TokenStream {
    std::vector<std::string> tokens;
    std::size_t N = 0;
    std::size_t V = 0;
    std::map<std::string, std::size_t> freqs;

    static TokenStream from_tokens(std::vector<std::string> tokens);
};

/// Lowercased words; internal apostrophes kept ("don't"), digits kept,
/// punctuation dropped. Non-ASCII letters are kept as-is.
TokenStream tokenize(std::string_view text);

/// (log10 N - log10 V) / (log10 N)^2. Requires N >= 2.
double maas(const TokenStream& ts);
/// Sum over types of P(type drawn in a sample of `sample_size`) / sample_size.
double hdd(const TokenStream& ts, int sample_size = 42);
/// Mean of forward and backward passes.
double mtld(const TokenStream& ts, double threshold = 0.72);
/// A single pass over `tokens` in the given order.
double mtld_pass(std::span<const std::string> tokens, double threshold = 0.72);

// ---------------------------------------------------------------------------
// Embeddings
// ---------------------------------------------------------------------------

class EmbeddingBackend {
public:
    virtual ~EmbeddingBackend() = default;
    [[nodiscard]] virtual int dim() const = 0;
    /// Unit-norm vector of length dim().
    virtual Eigen::VectorXd embed(std::string_view text) = 0;
};

/// Hashed bag of words. Deterministic, no model.
class HashedBowEmbedder final : public EmbeddingBackend {
public:
    explicit HashedBowEmbedder(int dim = 256) : dim_(dim) {}
    [[nodiscard]] int dim() const override { return dim_; }
    Eigen::VectorXd embed(std::string_view text) override;

private:
    int dim_;
};

/// OpenAI-style /v1/embeddings endpoint.
class RemoteEmbedder final : public EmbeddingBackend {
public:
    RemoteEmbedder(std::string base_url, std::string model, std::string key_env, int dim);
    [[nodiscard]] int dim() const override { return dim_; }
    Eigen::VectorXd embed(std::string_view text) override;

private:
    std::string base_url_;
    std::string model_;
    std::string key_env_;
    int dim_;
};

enum class ApsMode { Intra, Inter };

/// (topic, text) pairs.
using TopicText = std::pair<std::string, std::string>;

double aps(std::span<const TopicText> items, ApsMode mode, EmbeddingBackend& backend);
double aps(std::span<const Narrative> narratives, TopicKeyMode key, ApsMode mode,
           EmbeddingBackend& backend);

/// Mean over ordered pairs (i, j), i != j, of |G_i ∩ G_j| / |G_i| where G is
/// the set of word n-grams.
double ingf(std::span<const std::string> texts, int n = 4);

// ---------------------------------------------------------------------------
// Corpus report
// ---------------------------------------------------------------------------

struct HistogramBin {
    int lo = 0;  ///< inclusive
    int hi = 0;  ///< inclusive
    std::size_t count = 0;
    double density = 0.0;
};

struct DiversityReport {
    std::size_t n_narratives = 0;
    std::optional<double> hdd, maas, mtld, intra_aps, inter_aps, ingf;
    /// Narratives that met each lexical metric's length precondition.
    std::map<std::string, std::size_t> lexical_counts;
    std::map<std::string, std::string> errors;
    std::map<std::string, double> role_percent;
    std::vector<HistogramBin> sentence_histogram;

    [[nodiscard]] ojson to_json() const;
    [[nodiscard]] std::string csv_row(std::string_view name) const;
    static std::string csv_header();
};

struct ReportOptions {
    TopicKeyMode topic = TopicKeyMode::Genre;
    int ingf_n = 4;
    int bin_width = 4;
};

DiversityReport corpus_report(std::span<const Narrative> dataset, EmbeddingBackend& backend,
                              const ReportOptions& options = {});

}  // namespace liipa
