#pragma once

// Command-line front end: configuration loading, backend wiring, the
// subcommands and run manifests.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "liipa/genpipe.hpp"
#include "liipa/io.hpp"
#include "liipa/llm.hpp"
#include "liipa/metrics.hpp"

namespace liipa {

inline constexpr std::string_view kVersion = "0.1.0";
inline constexpr std::string_view kSchemaVersion = "1";

struct EmbeddingConfig {
    std::string base_url = "https://api.openai.com";
    std::string model = "text-embedding-3-small";
    std::string key_env = "LIIPA_EMBEDDING_KEY";
    int dim = 1536;
};

struct AppConfig {
    std::uint64_t seed = 0;
    /// 0 = use the backend request ceiling.
    int jobs = 0;
    std::optional<std::filesystem::path> cache_dir;
    int max_concurrency = 4;
    double requests_per_second = 0.0;
    std::map<Family, EndpointConfig> endpoints;
    MockOptions mock;
    GenerationConfig generation;
    ToTConfig tot;
    ValidatorOptions validator;
    ReportOptions metrics;
    EmbeddingConfig embeddings;
    int insert_max_attempts = 3;

    /// Settings that influence outputs; excludes jobs and cache location.
    [[nodiscard]] ojson semantic_json() const;
    [[nodiscard]] std::string digest() const;
    [[nodiscard]] EndpointConfig endpoint(Family f) const;
    [[nodiscard]] int effective_jobs() const { return jobs > 0 ? jobs : max_concurrency; }
};

/// YAML file; unknown keys are rejected.
AppConfig load_config(const std::filesystem::path& path);

/// Exit codes: 0 success, 1 partial output or failed predictions, 2 usage or
/// configuration error.
int run_cli(int argc, const char* const* argv);
int run_cli(const std::vector<std::string>& args);

}  // namespace liipa
