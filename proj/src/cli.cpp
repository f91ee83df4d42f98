#include "liipa/cli.hpp"

#include <CLI11.hpp>
#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <chrono>
#include <ctime>
#include <fstream>
#include <iostream>
#include <set>

#include "liipa/classify.hpp"
#include "liipa/eval.hpp"
#include "liipa/parallel.hpp"
#include "liipa/prompts.hpp"

namespace liipa {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

namespace {

void reject_unknown(const YAML::Node& node, std::string_view where, std::initializer_list<std::string_view> keys) {
    if (!node.IsMap()) throw Error(ErrorKind::Configuration, std::string(where) + " must be a mapping");
    for (const auto& kv : node) {
        const auto key = kv.first.as<std::string>();
        if (std::find(keys.begin(), keys.end(), key) == keys.end())
            throw Error(ErrorKind::Configuration, "unknown config key " + std::string(where) + "." + key);
    }
}

template <typename T>
void read(const YAML::Node& node, const char* key, T& out) {
    if (node[key]) out = node[key].as<T>();
}

ojson endpoint_json(const EndpointConfig& e) {
    const char* api = e.api == ApiStyle::OpenAI ? "openai" : e.api == ApiStyle::Anthropic ? "anthropic" : "gemini";
    return {{"api", api}, {"base_url", e.base_url}, {"model", e.model}, {"key_env", e.key_env},
            {"timeout_s", e.timeout.count()}};
}

}  // namespace

EndpointConfig AppConfig::endpoint(Family f) const {
    const auto it = endpoints.find(f);
    return it != endpoints.end() ? it->second : default_endpoint(f);
}

ojson AppConfig::semantic_json() const {
    ojson j;
    j["seed"] = seed;
    ojson eps = ojson::object();
    for (auto f : {Family::FamilyA, Family::FamilyB, Family::FamilyC})
        eps[std::string(to_string(f))] = endpoint_json(endpoint(f));
    j["backends"] = eps;
    j["mock"] = {{"fault_word", mock.fault_word}, {"fault_rate", mock.fault_rate}, {"malformed_rate", mock.malformed_rate}};
    j["generation"] = {{"min_characters", generation.min_characters},
                       {"max_characters", generation.max_characters},
                       {"lengths", generation.lengths},
                       {"genres", generation.catalog.size()},
                       {"plan_branch", tot.plan_branch},
                       {"story_branch", tot.story_branch},
                       {"max_regen_attempts", tot.max_regen_attempts},
                       {"sample_temperature", tot.sample_temperature},
                       {"length_tolerance", validator.length_tolerance}};
    j["metrics"] = {{"topic", metrics.topic == TopicKeyMode::Genre ? "genre" : "genre-title"},
                    {"ingf_n", metrics.ingf_n},
                    {"bin_width", metrics.bin_width},
                    {"embeddings", {{"base_url", embeddings.base_url}, {"model", embeddings.model}, {"dim", embeddings.dim}}}};
    j["demographics"] = {{"max_attempts", insert_max_attempts}};
    j["template_version"] = std::string(kTemplateVersion);
    return j;
}

std::string AppConfig::digest() const { return sha256_hex(semantic_json().dump()); }

AppConfig load_config(const fs::path& path) {
    AppConfig c;
    YAML::Node root;
    try {
        root = YAML::LoadFile(path.string());
    } catch (const YAML::Exception& e) {
        throw Error(ErrorKind::Configuration, "cannot read config " + path.string() + ": " + e.what());
    }
    if (root.IsNull()) return c;
    try {
        reject_unknown(root, "config", {"seed", "jobs", "cache_dir", "client", "backends", "mock", "generation",
                                        "metrics", "demographics"});
        read(root, "seed", c.seed);
        read(root, "jobs", c.jobs);
        if (root["cache_dir"]) c.cache_dir = root["cache_dir"].as<std::string>();
        if (const auto n = root["client"]) {
            reject_unknown(n, "client", {"max_concurrency", "requests_per_second"});
            read(n, "max_concurrency", c.max_concurrency);
            read(n, "requests_per_second", c.requests_per_second);
        }
        if (const auto n = root["backends"]) {
            if (!n.IsMap()) throw Error(ErrorKind::Configuration, "backends must be a mapping");
            for (const auto& kv : n) {
                const auto name = kv.first.as<std::string>();
                const auto family = parse_family(name);
                if (!family || *family == Family::Mock)
                    throw Error(ErrorKind::Configuration, "unknown backend family '" + name + "'");
                reject_unknown(kv.second, "backends." + name, {"api", "base_url", "model", "key_env", "timeout_s"});
                EndpointConfig e = default_endpoint(*family);
                if (kv.second["api"]) {
                    const auto api = parse_api_style(kv.second["api"].as<std::string>());
                    if (!api) throw Error(ErrorKind::Configuration, "unknown api style for " + name);
                    e.api = *api;
                }
                read(kv.second, "base_url", e.base_url);
                read(kv.second, "model", e.model);
                read(kv.second, "key_env", e.key_env);
                if (kv.second["timeout_s"]) e.timeout = std::chrono::seconds(kv.second["timeout_s"].as<int>());
                c.endpoints[*family] = e;
            }
        }
        if (const auto n = root["mock"]) {
            reject_unknown(n, "mock", {"fault_word", "fault_rate", "malformed_rate"});
            read(n, "fault_word", c.mock.fault_word);
            read(n, "fault_rate", c.mock.fault_rate);
            read(n, "malformed_rate", c.mock.malformed_rate);
        }
        if (const auto n = root["generation"]) {
            reject_unknown(n, "generation", {"min_characters", "max_characters", "lengths", "plan_branch", "story_branch",
                                             "max_regen_attempts", "sample_temperature", "length_tolerance"});
            read(n, "min_characters", c.generation.min_characters);
            read(n, "max_characters", c.generation.max_characters);
            read(n, "lengths", c.generation.lengths);
            read(n, "plan_branch", c.tot.plan_branch);
            read(n, "story_branch", c.tot.story_branch);
            read(n, "max_regen_attempts", c.tot.max_regen_attempts);
            read(n, "sample_temperature", c.tot.sample_temperature);
            read(n, "length_tolerance", c.validator.length_tolerance);
        }
        if (const auto n = root["metrics"]) {
            reject_unknown(n, "metrics", {"topic", "ingf_n", "bin_width", "embeddings"});
            if (n["topic"]) {
                const auto t = n["topic"].as<std::string>();
                if (t == "genre") c.metrics.topic = TopicKeyMode::Genre;
                else if (t == "genre-title") c.metrics.topic = TopicKeyMode::GenreTitle;
                else throw Error(ErrorKind::Configuration, "metrics.topic must be genre or genre-title");
            }
            read(n, "ingf_n", c.metrics.ingf_n);
            read(n, "bin_width", c.metrics.bin_width);
            if (const auto e = n["embeddings"]) {
                reject_unknown(e, "metrics.embeddings", {"base_url", "model", "key_env", "dim"});
                read(e, "base_url", c.embeddings.base_url);
                read(e, "model", c.embeddings.model);
                read(e, "key_env", c.embeddings.key_env);
                read(e, "dim", c.embeddings.dim);
            }
        }
        if (const auto n = root["demographics"]) {
            reject_unknown(n, "demographics", {"max_attempts"});
            read(n, "max_attempts", c.insert_max_attempts);
        }
    } catch (const YAML::Exception& e) {
        throw Error(ErrorKind::Configuration, "bad config value in " + path.string() + ": " + e.what());
    }
    return c;
}

// ---------------------------------------------------------------------------
// Run manifest
// ---------------------------------------------------------------------------

namespace {

std::string utc_now() {
    const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

class Manifest {
public:
    Manifest() : started_(utc_now()) {}

    void set_command(std::string name) { command_ = std::move(name); }
    void set_path(fs::path p) { path_ = std::move(p); }
    [[nodiscard]] bool has_path() const { return !path_.empty(); }
    void input(const fs::path& p) { files("inputs", p); }
    void output(const fs::path& p) { files("outputs", p); }
    void backend(const std::string& stage, Family f, const std::string& model_tag) {
        backends_.push_back({{"stage", stage}, {"family", std::string(to_string(f))}, {"model_tag", model_tag}});
    }
    ojson& details() { return details_; }
    ojson& params() { return params_; }

    void write(const AppConfig& config, int exit_code, const std::string& error, const ClientStats& stats, int jobs) {
        if (path_.empty()) return;
        ojson j;
        j["command"] = command_;
        j["version"] = std::string(kVersion);
        j["schema_version"] = std::string(kSchemaVersion);
        j["template_version"] = std::string(kTemplateVersion);
        j["config_digest"] = config.digest();
        j["seed"] = config.seed;
        j["params"] = params_;
        j["backends"] = backends_;
        j["inputs"] = inputs_;
        j["outputs"] = outputs_;
        j["exit_code"] = exit_code;
        j["status"] = exit_code == 0 ? "ok" : exit_code == 1 ? "partial" : "error";
        if (!error.empty()) j["error"] = error;
        if (!details_.is_null()) j["details"] = details_;
        j["runtime"] = {{"started", started_},
                        {"finished", utc_now()},
                        {"jobs", jobs},
                        {"requests", stats.requests},
                        {"cache_hits", stats.cache_hits},
                        {"backend_calls", stats.backend_calls}};
        try {
            write_file_atomic(path_, j.dump(2) + "\n");
        } catch (const Error& e) {
            std::cerr << "warning: " << e.what() << "\n";
        }
    }

private:
    void files(const char* key, const fs::path& p) {
        std::error_code ec;
        if (fs::is_directory(p, ec)) {
            std::vector<fs::path> entries;
            for (const auto& e : fs::recursive_directory_iterator(p))
                if (e.is_regular_file() && e.path().filename() != "manifest.json") entries.push_back(e.path());
            std::sort(entries.begin(), entries.end());
            for (const auto& e : entries)
                (key == std::string_view("inputs") ? inputs_ : outputs_)
                    .push_back({{"name", fs::relative(e, p.parent_path()).generic_string()}, {"sha256", file_sha256(e)}});
            return;
        }
        (key == std::string_view("inputs") ? inputs_ : outputs_)
            .push_back({{"name", p.filename().string()}, {"sha256", file_sha256(p)}});
    }

    std::string command_;
    fs::path path_;
    std::string started_;
    ojson params_ = ojson::object();
    ojson backends_ = ojson::array();
    ojson inputs_ = ojson::array();
    ojson outputs_ = ojson::array();
    ojson details_;
};

// ---------------------------------------------------------------------------
// Shared state for one invocation
// ---------------------------------------------------------------------------

struct Session {
    AppConfig config;
    std::unique_ptr<LlmClient> client;
    Manifest manifest;

    void open_client() {
        ClientOptions o;
        o.cache_dir = config.cache_dir;
        o.max_concurrency = config.max_concurrency;
        o.requests_per_second = config.requests_per_second;
        client = std::make_unique<LlmClient>(o);
    }

    ModelRef model(const std::string& stage, const std::string& family_name) {
        const auto family = parse_family(family_name);
        if (!family) throw Error(ErrorKind::Configuration, "unknown backend '" + family_name + "'");
        if (!client) open_client();
        std::string tag = "mock";
        if (!client->has_backend(*family)) {
            if (*family == Family::Mock) {
                client->set_backend(*family, std::make_shared<MockBackend>(config.mock));
            } else {
                const auto ep = config.endpoint(*family);
                client->set_backend(*family, std::make_shared<HttpBackend>(ep));
            }
        }
        if (*family != Family::Mock) tag = config.endpoint(*family).model;
        manifest.backend(stage, *family, tag);
        ModelRef m;
        m.client = client.get();
        m.family = *family;
        m.model_tag = tag;
        return m;
    }

    [[nodiscard]] ClientStats stats() const { return client ? client->stats() : ClientStats{}; }
};

fs::path default_manifest(const fs::path& out, bool is_dir) {
    if (is_dir) return out / "manifest.json";
    return fs::path(out.string() + ".manifest.json");
}

void write_lines(const fs::path& path, const std::vector<ojson>& records) {
    std::string s;
    for (const auto& r : records) s += r.dump() + "\n";
    write_file_atomic(path, s);
}

std::vector<Prediction> read_predictions(const fs::path& path) {
    std::vector<Prediction> out;
    for (const auto& j : read_jsonl(path)) out.push_back(Prediction::from_json(j));
    return out;
}

// ---------------------------------------------------------------------------
// Subcommands
// ---------------------------------------------------------------------------

struct GenerateArgs {
    std::size_t n = 0;
    std::string backend = "mock";
    fs::path out, manifest, annotations;
    std::optional<int> length_tolerance, plan_branch, story_branch, max_regen;
};

int cmd_generate(Session& s, const GenerateArgs& a) {
    auto& m = s.manifest;
    if (a.length_tolerance) s.config.validator.length_tolerance = *a.length_tolerance;
    if (a.plan_branch) s.config.tot.plan_branch = *a.plan_branch;
    if (a.story_branch) s.config.tot.story_branch = *a.story_branch;
    if (a.max_regen) s.config.tot.max_regen_attempts = *a.max_regen;
    m.params() = {{"n", a.n}};
    BuildOptions o;
    o.n_samples = a.n;
    o.seed = s.config.seed;
    o.generation = s.config.generation;
    o.tot = s.config.tot;
    o.validator = s.config.validator;
    o.jobs = s.config.effective_jobs();
    const auto generator = s.model("generator", a.backend);
    const auto build = build_dataset(o, generator);
    write_file_atomic(a.out, to_jsonl(build.records));
    m.output(a.out);
    if (!a.annotations.empty()) {
        fs::create_directories(a.annotations);
        for (const auto& r : build.records) write_file_atomic(a.annotations / (r.id + ".txt"), export_annotation_template(r));
        m.output(a.annotations);
    }
    m.details() = build.manifest(o);
    std::cerr << "generated " << build.records.size() << "/" << a.n << " narratives\n";
    return build.complete() ? 0 : 1;
}

struct ValidateArgs {
    fs::path in, out, manifest;
    std::optional<int> length_tolerance;
};

int cmd_validate(Session& s, const ValidateArgs& a) {
    if (a.length_tolerance) s.config.validator.length_tolerance = *a.length_tolerance;
    const auto data = read_dataset(a.in);
    s.manifest.input(a.in);
    ojson records = ojson::array();
    std::size_t passed = 0;
    for (const auto& n : data) {
        const auto r = validate_automated(n, n.constraints, s.config.validator);
        passed += r.passed ? 1 : 0;
        ojson hits = ojson::array();
        for (const auto& h : r.exclusion_hits) hits.push_back({{"category", h.category}, {"word", h.word}, {"offset", h.offset}});
        records.push_back({{"id", n.id}, {"passed", r.passed}, {"sentence_count", r.sentence_count},
                           {"reasons", r.reasons()}, {"exclusion_hits", hits}});
    }
    ojson report;
    report["n"] = data.size();
    report["passed"] = passed;
    report["failed"] = data.size() - passed;
    report["records"] = records;
    if (!a.out.empty()) {
        write_file_atomic(a.out, report.dump(2) + "\n");
        s.manifest.output(a.out);
    } else {
        std::cout << report.dump(2) << "\n";
    }
    s.manifest.details() = {{"passed", passed}, {"failed", data.size() - passed}};
    return passed == data.size() ? 0 : 1;
}

struct MetricsArgs {
    fs::path in, out, csv, manifest;
    std::string embeddings = "stub";
    std::optional<std::string> topic;
    std::optional<int> ingf_n;
};

int cmd_metrics(Session& s, const MetricsArgs& a) {
    if (a.topic) s.config.metrics.topic = *a.topic == "genre" ? TopicKeyMode::Genre : TopicKeyMode::GenreTitle;
    if (a.ingf_n) s.config.metrics.ingf_n = *a.ingf_n;
    const auto data = read_dataset(a.in);
    s.manifest.input(a.in);
    s.manifest.params() = {{"embeddings", a.embeddings}};
    std::unique_ptr<EmbeddingBackend> embedder;
    if (a.embeddings == "stub") {
        embedder = std::make_unique<HashedBowEmbedder>();
    } else {
        const auto& e = s.config.embeddings;
        embedder = std::make_unique<RemoteEmbedder>(e.base_url, e.model, e.key_env, e.dim);
    }
    const auto report = corpus_report(data, *embedder, s.config.metrics);
    write_file_atomic(a.out, report.to_json().dump(2) + "\n");
    s.manifest.output(a.out);
    if (!a.csv.empty()) {
        write_file_atomic(a.csv, DiversityReport::csv_header() + "\n" + report.csv_row(a.in.stem().string()) + "\n");
        s.manifest.output(a.csv);
    }
    return 0;
}

struct ClassifyArgs {
    fs::path in, out, manifest;
    std::string method, backend = "mock";
    std::optional<std::string> judge_backend, generator_backend;
};

int cmd_classify(Session& s, const ClassifyArgs& a) {
    const auto method = parse_method(a.method);
    if (!method) throw Error(ErrorKind::Configuration, "unknown method '" + a.method + "'");
    // Family separation is checked before any model is contacted.
    StageModels models;
    std::optional<Family> generator, labeler = parse_family(a.backend), judge_family;
    if (!labeler) throw Error(ErrorKind::Configuration, "unknown backend '" + a.backend + "'");
    if (a.generator_backend) {
        generator = parse_family(*a.generator_backend);
        if (!generator) throw Error(ErrorKind::Configuration, "unknown backend '" + *a.generator_backend + "'");
    }
    if (is_wordlist_method(*method)) {
        if (!a.judge_backend) throw Error(ErrorKind::Configuration, "--judge-backend is required for " + a.method);
        judge_family = parse_family(*a.judge_backend);
        if (!judge_family) throw Error(ErrorKind::Configuration, "unknown backend '" + *a.judge_backend + "'");
        const auto v = check_family_separation(generator, labeler, judge_family);
        if (!v.empty()) throw Error(ErrorKind::Configuration, v.front());
    } else {
        const auto v = check_family_separation(generator, std::nullopt, labeler);
        if (!v.empty()) throw Error(ErrorKind::Configuration, v.front());
    }
    models.generator = generator;
    models.labeler = s.model(is_wordlist_method(*method) ? "wordlist" : "classifier", a.backend);
    if (a.judge_backend && is_wordlist_method(*method)) models.judge = s.model("judge", *a.judge_backend);

    const auto data = read_dataset(a.in);
    s.manifest.input(a.in);
    s.manifest.params() = {{"method", a.method}};
    const auto preds = classify_dataset(data, *method, models, s.config.effective_jobs());
    std::vector<ojson> lines;
    std::size_t failed = 0;
    for (const auto& p : preds) {
        lines.push_back(p.to_json());
        failed += p.failed ? 1 : 0;
    }
    write_lines(a.out, lines);
    s.manifest.output(a.out);
    s.manifest.details() = {{"predictions", preds.size()}, {"failed", failed}};
    return failed == 0 ? 0 : 1;
}

struct DemographizeArgs {
    fs::path in, out, manifest;
    std::string persona, backend = "mock";
};

int cmd_demographize(Session& s, const DemographizeArgs& a) {
    const Persona* persona = find_persona(a.persona);
    if (persona == nullptr) throw Error(ErrorKind::Configuration, "unknown persona '" + a.persona + "'");
    const auto model = s.model("demographic", a.backend);
    const auto data = read_dataset(a.in);
    s.manifest.input(a.in);
    s.manifest.params() = {{"persona", persona->descriptor}};
    std::vector<std::optional<Narrative>> out(data.size());
    std::vector<std::string> errors(data.size());
    InsertOptions opts{s.config.insert_max_attempts};
    parallel_for(data.size(), s.config.effective_jobs(), [&](std::size_t i) {
        const auto target = pick_persona_target(data[i], s.config.seed);
        try {
            out[i] = insert_demographics(data[i], target, *persona, model, opts);
        } catch (const Error& e) {
            if (e.kind() != ErrorKind::Insertion) throw;
            errors[i] = e.what();
        }
    });
    std::vector<Narrative> kept;
    ojson excluded = ojson::array();
    for (std::size_t i = 0; i < data.size(); ++i) {
        if (out[i]) kept.push_back(std::move(*out[i]));
        else excluded.push_back({{"id", data[i].id}, {"reason", errors[i]}});
    }
    write_file_atomic(a.out, to_jsonl(kept));
    s.manifest.output(a.out);
    s.manifest.details() = {{"written", kept.size()}, {"excluded", excluded}};
    return excluded.empty() ? 0 : 1;
}

std::vector<Facet> parse_facets(const std::string& spec) {
    if (spec == "all") return {Facet::Dimension, Facet::GoldLevel, Facet::CharCount, Facet::SentenceBin};
    std::vector<Facet> out;
    std::size_t start = 0;
    while (start <= spec.size()) {
        const auto end = std::min(spec.find(',', start), spec.size());
        const auto f = parse_facet(spec.substr(start, end - start));
        if (!f) throw Error(ErrorKind::Configuration, "unknown facet '" + spec.substr(start, end - start) + "'");
        out.push_back(*f);
        start = end + 1;
    }
    return out;
}

struct EvalArgs {
    fs::path preds, gold, out, manifest;
    std::string facets = "all";
    bool skip_failed = false;
};

int cmd_eval(Session& s, const EvalArgs& a) {
    const auto facets = parse_facets(a.facets);
    const auto preds = read_predictions(a.preds);
    const auto gold = read_dataset(a.gold);
    s.manifest.input(a.preds);
    s.manifest.input(a.gold);
    s.manifest.params() = {{"facets", a.facets}, {"skip_failed", a.skip_failed}};
    const auto run = ScoredRun::join(preds, gold, {a.skip_failed});
    emit_eval_report(a.out, run, facets);
    s.manifest.output(a.out);
    s.manifest.details() = {{"accuracy", accuracy_overall(run)}, {"failed", run.failed}};
    return run.failed == 0 ? 0 : 1;
}

struct FairnessArgs {
    fs::path baseline, persona_runs, gold, out, manifest;
    bool skip_failed = false;
};

int cmd_fairness(Session& s, const FairnessArgs& a) {
    const auto gold = read_dataset(a.gold);
    const auto base_preds = read_predictions(a.baseline);
    s.manifest.input(a.gold);
    s.manifest.input(a.baseline);
    const auto baseline = ScoredRun::join(base_preds, gold, {a.skip_failed});
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(a.persona_runs))
        if (e.is_regular_file() && e.path().extension() == ".jsonl") files.push_back(e.path());
    std::sort(files.begin(), files.end());
    if (files.empty()) throw Error(ErrorKind::InsufficientData, "no .jsonl files in " + a.persona_runs.string());
    std::vector<PersonaRun> runs;
    for (const auto& f : files) {
        const auto preds = read_predictions(f);
        s.manifest.input(f);
        std::set<std::string> personas;
        for (const auto& p : preds) personas.insert(p.persona.value_or(""));
        if (personas.size() != 1 || personas.begin()->empty())
            throw Error(ErrorKind::Alignment, f.filename().string() + " must hold predictions for exactly one persona");
        runs.push_back({*personas.begin(), ScoredRun::join(preds, gold, {a.skip_failed})});
    }
    const auto slices = fairness_slices(runs, baseline);
    const auto deltas = accuracy_deltas(runs, baseline);
    const auto u = unfairness(slices);
    emit_fairness_report(a.out, baseline.method, slices, deltas, u);
    s.manifest.output(a.out);
    s.manifest.details() = {{"unfairness", u.value}};
    return 0;
}

struct ParetoArgs {
    std::vector<std::string> runs;
    fs::path out, manifest;
};

int cmd_pareto(Session& s, const ParetoArgs& a) {
    std::vector<fs::path> paths;
    for (const auto& r : a.runs) {
        const fs::path p(r);
        if (p.extension() == ".json") {
            paths.push_back(p);
            continue;
        }
        std::ifstream list(p);
        if (!list) throw Error(ErrorKind::Io, "cannot read " + r);
        for (std::string line; std::getline(list, line);) {
            if (line.empty() || line[0] == '#') continue;
            fs::path q(line);
            paths.push_back(q.is_relative() ? p.parent_path() / q : q);
        }
    }
    std::vector<ParetoPoint> points;
    for (const auto& p : paths) {
        const auto j = nlohmann::json::parse(read_file(p), nullptr, false);
        if (j.is_discarded() || !j.contains("unfairness_pp2") || !j.contains("accuracy_pct"))
            throw Error(ErrorKind::Parse, p.string() + " is not a fairness report");
        s.manifest.input(p);
        points.push_back({j.value("method", p.stem().string()), j["unfairness_pp2"].get<double>(),
                          j["accuracy_pct"].get<double>(), file_sha256(p)});
    }
    const auto rows = pareto_table(points);
    write_file_atomic(a.out, pareto_csv(rows));
    auto svg = a.out;
    svg.replace_extension(".svg");
    write_file_atomic(svg, pareto_svg(rows));
    s.manifest.output(a.out);
    s.manifest.output(svg);
    return 0;
}

}  // namespace

// ---------------------------------------------------------------------------
// Entry point
// ---------------------------------------------------------------------------

int run_cli(int argc, const char* const* argv) {
    CLI::App app{"Implicit portrayal dataset generation, classification and evaluation", "liipa"};
    app.require_subcommand(0, 1);
    app.fallthrough();

    std::string config_path, cache_dir;
    std::optional<std::uint64_t> seed;
    std::optional<int> jobs;
    bool dump_prompts = false;
    app.add_option("--config", config_path, "YAML configuration file");
    app.add_option("--cache-dir", cache_dir, "Response cache directory");
    app.add_option("--jobs", jobs, "Worker threads")->check(CLI::PositiveNumber);
    app.add_option("--seed", seed, "Root seed");
    app.add_flag("--dump-prompts", dump_prompts, "Print every prompt template and exit");
    app.set_version_flag("--version", std::string("liipa ") + std::string(kVersion) + " (templates " +
                                          std::string(kTemplateVersion) + ", schema " +
                                          std::string(kSchemaVersion) + ")");

    GenerateArgs gen;
    auto* g = app.add_subcommand("generate", "Generate and validate a narrative dataset");
    g->add_option("--n", gen.n, "Number of narratives")->required();
    g->add_option("--backend", gen.backend, "Generator family");
    g->add_option("--out", gen.out, "Output JSONL")->required();
    g->add_option("--manifest", gen.manifest, "Run manifest path");
    g->add_option("--annotations", gen.annotations, "Directory for annotation forms");
    g->add_option("--length-tolerance", gen.length_tolerance, "Allowed sentence-count drift")->check(CLI::NonNegativeNumber);
    g->add_option("--plan-branch", gen.plan_branch)->check(CLI::PositiveNumber);
    g->add_option("--story-branch", gen.story_branch)->check(CLI::PositiveNumber);
    g->add_option("--max-regen", gen.max_regen)->check(CLI::NonNegativeNumber);

    ValidateArgs val;
    auto* v = app.add_subcommand("validate", "Re-run automated validation on a dataset");
    v->add_option("--in", val.in)->required()->check(CLI::ExistingFile);
    v->add_option("--out", val.out, "Report JSON (stdout when omitted)");
    v->add_option("--manifest", val.manifest);
    v->add_option("--length-tolerance", val.length_tolerance)->check(CLI::NonNegativeNumber);

    MetricsArgs met;
    auto* mc = app.add_subcommand("metrics", "Lexical and semantic diversity report");
    mc->add_option("--in", met.in)->required()->check(CLI::ExistingFile);
    mc->add_option("--out", met.out)->required();
    mc->add_option("--csv", met.csv, "Also write a one-row CSV");
    mc->add_option("--embeddings", met.embeddings)->check(CLI::IsMember({"stub", "remote"}));
    mc->add_option("--topic", met.topic)->check(CLI::IsMember({"genre", "genre-title"}));
    mc->add_option("--ingf-n", met.ingf_n)->check(CLI::PositiveNumber);
    mc->add_option("--manifest", met.manifest);

    ClassifyArgs cls;
    auto* c = app.add_subcommand("classify", "Classify character portrayals");
    c->add_option("--in", cls.in)->required()->check(CLI::ExistingFile);
    c->add_option("--method", cls.method)->required()->check(
        CLI::IsMember({"direct-dp", "direct-cot", "direct-ltm", "direct-tot", "story", "sentence"}));
    c->add_option("--backend", cls.backend, "Classifier or wordlist family");
    c->add_option("--judge-backend", cls.judge_backend, "Judge family for wordlist methods");
    c->add_option("--generator-backend", cls.generator_backend, "Family that generated the narratives");
    c->add_option("--out", cls.out)->required();
    c->add_option("--manifest", cls.manifest);

    DemographizeArgs dem;
    auto* d = app.add_subcommand("demographize", "Insert a persona into every narrative");
    d->add_option("--persona", dem.persona)->required();
    d->add_option("--in", dem.in)->required()->check(CLI::ExistingFile);
    d->add_option("--out", dem.out)->required();
    d->add_option("--backend", dem.backend);
    d->add_option("--manifest", dem.manifest);

    EvalArgs ev;
    auto* e = app.add_subcommand("eval", "Score predictions against gold labels");
    e->add_option("--preds", ev.preds)->required()->check(CLI::ExistingFile);
    e->add_option("--gold", ev.gold)->required()->check(CLI::ExistingFile);
    e->add_option("--facets", ev.facets, "all or a comma list of dimension,gold-level,char-count,sentence-bin");
    e->add_option("--out", ev.out, "Report directory")->required();
    e->add_flag("--skip-failed", ev.skip_failed, "Drop failed predictions instead of counting them wrong");
    e->add_option("--manifest", ev.manifest);

    FairnessArgs fa;
    auto* f = app.add_subcommand("fairness", "Persona accuracy deltas and unfairness");
    f->add_option("--baseline", fa.baseline)->required()->check(CLI::ExistingFile);
    f->add_option("--persona-runs", fa.persona_runs, "Directory of per-persona prediction files")
        ->required()->check(CLI::ExistingDirectory);
    f->add_option("--gold", fa.gold)->required()->check(CLI::ExistingFile);
    f->add_option("--out", fa.out)->required();
    f->add_flag("--skip-failed", fa.skip_failed);
    f->add_option("--manifest", fa.manifest);

    ParetoArgs pa;
    auto* p = app.add_subcommand("pareto", "Fairness/accuracy Pareto table from fairness reports");
    p->add_option("--runs", pa.runs, "fairness.json files, or a text file listing them")->required();
    p->add_option("--out", pa.out)->required();
    p->add_option("--manifest", pa.manifest);

    auto* dp = app.add_subcommand("dump-prompts", "Print every prompt template");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& err) {
        const int code = app.exit(err);
        return code == 0 ? 0 : 2;
    }

    if (dump_prompts || dp->parsed()) {
        std::cout << dump_templates();
        return 0;
    }
    if (app.get_subcommands().empty()) {
        std::cerr << app.help();
        return 2;
    }

    Session s;
    int code = 2;
    std::string error;
    try {
        if (!config_path.empty()) s.config = load_config(config_path);
        if (seed) s.config.seed = *seed;
        if (jobs) s.config.jobs = *jobs;
        if (!cache_dir.empty()) s.config.cache_dir = fs::path(cache_dir);

        auto& m = s.manifest;
        if (g->parsed()) {
            m.set_command("generate");
            m.set_path(gen.manifest.empty() ? default_manifest(gen.out, false) : gen.manifest);
            code = cmd_generate(s, gen);
        } else if (v->parsed()) {
            m.set_command("validate");
            if (!val.manifest.empty()) m.set_path(val.manifest);
            else if (!val.out.empty()) m.set_path(default_manifest(val.out, false));
            code = cmd_validate(s, val);
        } else if (mc->parsed()) {
            m.set_command("metrics");
            m.set_path(met.manifest.empty() ? default_manifest(met.out, false) : met.manifest);
            code = cmd_metrics(s, met);
        } else if (c->parsed()) {
            m.set_command("classify");
            m.set_path(cls.manifest.empty() ? default_manifest(cls.out, false) : cls.manifest);
            code = cmd_classify(s, cls);
        } else if (d->parsed()) {
            m.set_command("demographize");
            m.set_path(dem.manifest.empty() ? default_manifest(dem.out, false) : dem.manifest);
            code = cmd_demographize(s, dem);
        } else if (e->parsed()) {
            m.set_command("eval");
            m.set_path(ev.manifest.empty() ? default_manifest(ev.out, true) : ev.manifest);
            code = cmd_eval(s, ev);
        } else if (f->parsed()) {
            m.set_command("fairness");
            m.set_path(fa.manifest.empty() ? default_manifest(fa.out, true) : fa.manifest);
            code = cmd_fairness(s, fa);
        } else if (p->parsed()) {
            m.set_command("pareto");
            m.set_path(pa.manifest.empty() ? default_manifest(pa.out, false) : pa.manifest);
            code = cmd_pareto(s, pa);
        }
    } catch (const Error& err) {
        error = err.what();
        std::cerr << "liipa: " << error << "\n";
        code = 2;
    } catch (const std::exception& err) {
        error = err.what();
        std::cerr << "liipa: " << error << "\n";
        code = 2;
    }
    s.manifest.write(s.config, code, error, s.stats(), s.config.effective_jobs());
    return code;
}

int run_cli(const std::vector<std::string>& args) {
    std::vector<const char*> argv;
    argv.reserve(args.size() + 1);
    argv.push_back("liipa");
    for (const auto& a : args) argv.push_back(a.c_str());
    return run_cli(static_cast<int>(argv.size()), argv.data());
}

}  // namespace liipa
