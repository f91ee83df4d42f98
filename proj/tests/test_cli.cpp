#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>

#include "liipa/classify.hpp"
#include "liipa/cli.hpp"

using namespace liipa;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    explicit TempDir(const char* name) : path(fs::temp_directory_path() / name) {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string operator/(const char* f) const { return (path / f).string(); }
    fs::path path;
};

nlohmann::json load(const std::string& p) { return nlohmann::json::parse(read_file(p)); }

nlohmann::json without_runtime(nlohmann::json j) {
    j.erase("runtime");
    return j;
}

}  // namespace

TEST_CASE("generate writes the dataset and a manifest") {
    TempDir t("liipa_cli_gen");
    CHECK(run_cli({"generate", "--n", "5", "--backend", "mock", "--seed", "1", "--out", t / "d.jsonl",
                   "--annotations", t / "forms"}) == 0);
    const auto data = read_dataset(t / "d.jsonl");
    CHECK(data.size() == 5);
    const auto m = load(t / "d.jsonl.manifest.json");
    CHECK(m["command"] == "generate");
    CHECK(m["exit_code"] == 0);
    CHECK(m["details"]["n_written"] == 5);
    CHECK(m["outputs"][0]["sha256"] == file_sha256(t / "d.jsonl"));
    std::size_t forms = 0;
    for (const auto& e : fs::directory_iterator(t.path / "forms")) forms += e.is_regular_file();
    CHECK(forms == 5);
}

TEST_CASE("manifests are deterministic apart from runtime fields") {
    TempDir t("liipa_cli_manifest");
    const std::vector<std::string> base{"generate", "--n", "4", "--seed", "9"};
    auto a = base, b = base;
    a.insert(a.end(), {"--out", t / "a.jsonl", "--manifest", t / "a.json", "--jobs", "1"});
    b.insert(b.end(), {"--out", t / "b.jsonl", "--manifest", t / "b.json", "--jobs", "4"});
    REQUIRE(run_cli(a) == 0);
    REQUIRE(run_cli(b) == 0);
    CHECK(read_file(t / "a.jsonl") == read_file(t / "b.jsonl"));
    auto ma = without_runtime(load(t / "a.json"));
    auto mb = without_runtime(load(t / "b.json"));
    ma["outputs"][0].erase("name");
    mb["outputs"][0].erase("name");
    CHECK(ma == mb);
}

TEST_CASE("warm cache replays without backend calls") {
    TempDir t("liipa_cli_cache");
    const std::vector<std::string> cmd{"--cache-dir", t / "cache", "generate", "--n", "3", "--seed", "2",
                                       "--out", t / "d.jsonl"};
    REQUIRE(run_cli(cmd) == 0);
    const auto cold = load(t / "d.jsonl.manifest.json");
    CHECK(cold["runtime"]["backend_calls"].get<int>() > 0);
    const auto first = read_file(t / "d.jsonl");
    REQUIRE(run_cli(cmd) == 0);
    const auto warm = load(t / "d.jsonl.manifest.json");
    CHECK(warm["runtime"]["backend_calls"] == 0);
    CHECK(warm["runtime"]["cache_hits"] == cold["runtime"]["requests"]);
    CHECK(read_file(t / "d.jsonl") == first);
}

TEST_CASE("family violations exit 2 before any model call") {
    TempDir t("liipa_cli_family");
    REQUIRE(run_cli({"generate", "--n", "2", "--out", t / "d.jsonl"}) == 0);
    CHECK(run_cli({"classify", "--in", t / "d.jsonl", "--method", "story", "--backend", "familya",
                   "--judge-backend", "familya", "--out", t / "p.jsonl"}) == 2);
    CHECK(run_cli({"classify", "--in", t / "d.jsonl", "--method", "direct-dp", "--backend", "familyb",
                   "--generator-backend", "familyb", "--out", t / "p.jsonl"}) == 2);
    CHECK_FALSE(fs::exists(t / "p.jsonl"));
    const auto m = load(t / "p.jsonl.manifest.json");
    CHECK(m["status"] == "error");
    CHECK(m["runtime"]["backend_calls"] == 0);
    CHECK(run_cli({"classify", "--in", t / "d.jsonl", "--method", "story", "--backend", "mock",
                   "--out", t / "p.jsonl"}) == 2);
}

TEST_CASE("usage and configuration errors exit 2") {
    TempDir t("liipa_cli_usage");
    CHECK(run_cli({"generate", "--out", t / "d.jsonl"}) == 2);
    CHECK(run_cli({"generate", "--n", "0", "--out", t / "d.jsonl"}) == 2);
    CHECK(run_cli({"frobnicate"}) == 2);
    CHECK(run_cli({}) == 2);
    write_file_atomic(t.path / "bad.yaml", "seed: 1\ncolour: blue\n");
    CHECK(run_cli({"--config", t / "bad.yaml", "generate", "--n", "1", "--out", t / "d.jsonl"}) == 2);
}

TEST_CASE("config file is honoured") {
    TempDir t("liipa_cli_config");
    write_file_atomic(t.path / "c.yaml",
                      "seed: 5\njobs: 2\ngeneration:\n  min_characters: 2\n  max_characters: 2\n  lengths: [5]\n");
    const auto cfg = load_config(t.path / "c.yaml");
    CHECK(cfg.seed == 5);
    CHECK(cfg.effective_jobs() == 2);
    CHECK(cfg.generation.lengths == std::vector<int>{5});
    REQUIRE(run_cli({"--config", t / "c.yaml", "generate", "--n", "3", "--out", t / "d.jsonl"}) == 0);
    for (const auto& n : read_dataset(t / "d.jsonl")) {
        CHECK(n.constraints.character_count == 2);
        CHECK(n.constraints.length_sentences == 5);
    }
    AppConfig other = cfg;
    other.jobs = 7;
    other.cache_dir = "/tmp/x";
    CHECK(other.digest() == cfg.digest());
    other.seed = 6;
    CHECK(other.digest() != cfg.digest());
}

TEST_CASE("full pipeline through fairness and pareto") {
    TempDir t("liipa_cli_full");
    REQUIRE(run_cli({"generate", "--n", "6", "--seed", "3", "--out", t / "d.jsonl"}) == 0);
    CHECK(run_cli({"validate", "--in", t / "d.jsonl", "--out", t / "v.json"}) == 0);
    CHECK(run_cli({"metrics", "--in", t / "d.jsonl", "--out", t / "m.json", "--csv", t / "m.csv"}) == 0);
    CHECK(load(t / "m.json").contains("mtld"));
    REQUIRE(run_cli({"classify", "--in", t / "d.jsonl", "--method", "direct-cot", "--out", t / "base.jsonl"}) == 0);
    REQUIRE(run_cli({"eval", "--preds", t / "base.jsonl", "--gold", t / "d.jsonl", "--out", t / "eval"}) == 0);
    CHECK(fs::exists(t.path / "eval" / "eval.json"));
    CHECK(fs::exists(t.path / "eval" / "accuracy_by_sentence-bin.svg"));

    fs::create_directories(t.path / "runs");
    for (const char* persona : {"a man", "a woman"}) {
        const std::string slug = std::string(persona) == "a man" ? "man" : "woman";
        const auto demo = (t.path / (slug + ".jsonl")).string();
        REQUIRE(run_cli({"demographize", "--persona", persona, "--in", t / "d.jsonl", "--out", demo}) == 0);
        for (const auto& n : read_dataset(demo)) CHECK(n.persona->descriptor == persona);
        REQUIRE(run_cli({"classify", "--in", demo, "--method", "direct-cot", "--out",
                         (t.path / "runs" / (slug + ".jsonl")).string()}) == 0);
    }
    REQUIRE(run_cli({"fairness", "--baseline", t / "base.jsonl", "--persona-runs", (t.path / "runs").string(),
                     "--gold", t / "d.jsonl", "--out", t / "fair"}) == 0);
    const auto fair = load((t.path / "fair" / "fairness.json").string());
    CHECK(fair["personas"].size() == 2);
    CHECK(fair["unfairness"].get<double>() >= 0.0);

    REQUIRE(run_cli({"pareto", "--runs", (t.path / "fair" / "fairness.json").string(), "--out", t / "p.csv"}) == 0);
    const auto csv = read_file(t / "p.csv");
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 2);
    CHECK(fs::exists(t.path / "p.svg"));
}
