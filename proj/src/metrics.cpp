#include "liipa/metrics.hpp"

#include <httplib.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <set>

namespace liipa {

// ---------------------------------------------------------------------------
// Tokenization
// ---------------------------------------------------------------------------

namespace {

struct CodePoint {
    char32_t cp;
    std::size_t len;
};

CodePoint decode(std::string_view s, std::size_t i) {
    const auto b = static_cast<unsigned char>(s[i]);
    auto cont = [&](std::size_t k) -> int {
        if (i + k >= s.size()) return -1;
        const auto c = static_cast<unsigned char>(s[i + k]);
        return (c & 0xC0) == 0x80 ? (c & 0x3F) : -1;
    };
    if (b < 0x80) return {b, 1};
    if ((b & 0xE0) == 0xC0) {
        const int c1 = cont(1);
        if (c1 >= 0) return {static_cast<char32_t>(((b & 0x1F) << 6) | c1), 2};
    } else if ((b & 0xF0) == 0xE0) {
        const int c1 = cont(1), c2 = cont(2);
        if (c1 >= 0 && c2 >= 0)
            return {static_cast<char32_t>(((b & 0x0F) << 12) | (c1 << 6) | c2), 3};
    } else if ((b & 0xF8) == 0xF0) {
        const int c1 = cont(1), c2 = cont(2), c3 = cont(3);
        if (c1 >= 0 && c2 >= 0 && c3 >= 0)
            return {static_cast<char32_t>(((b & 0x07) << 18) | (c1 << 12) | (c2 << 6) | c3), 4};
    }
    return {0xFFFD, 1};
}

bool is_word_cp(char32_t cp) {
    if (cp < 0x80) return std::isalnum(static_cast<int>(cp)) != 0;
    if (cp <= 0xBF || cp == 0xD7 || cp == 0xF7) return false;
    if (cp >= 0x2000 && cp <= 0x2BFF) return false;  // punctuation, symbols, arrows
    if (cp >= 0x3000 && cp <= 0x303F) return false;
    if (cp == 0xFFFD) return false;
    return true;
}

bool is_apostrophe(char32_t cp) { return cp == U'\'' || cp == 0x2019; }

void append_lower(std::string& out, std::string_view bytes, char32_t cp) {
    if (cp < 0x80) {
        out.push_back(static_cast<char>(std::tolower(static_cast<int>(cp))));
    } else if (cp >= 0xC0 && cp <= 0xDE && cp != 0xD7) {
        const char32_t lower = cp + 0x20;
        out.push_back(static_cast<char>(0xC0 | (lower >> 6)));
        out.push_back(static_cast<char>(0x80 | (lower & 0x3F)));
    } else {
        out.append(bytes);
    }
}

}  // namespace

TokenStream TokenStream::from_tokens(std::vector<std::string> tokens) {
    TokenStream ts;
    ts.tokens = std::move(tokens);
    for (const auto& t : ts.tokens) ++ts.freqs[t];
    ts.N = ts.tokens.size();
    ts.V = ts.freqs.size();
    return ts;
}

TokenStream tokenize(std::string_view text) {
    std::vector<std::string> tokens;
    std::string current;
    std::size_t i = 0;
    while (i < text.size()) {
        const auto [cp, len] = decode(text, i);
        if (is_word_cp(cp)) {
            append_lower(current, text.substr(i, len), cp);
        } else if (is_apostrophe(cp) && !current.empty() && i + len < text.size() &&
                   is_word_cp(decode(text, i + len).cp)) {
            current.push_back('\'');
        } else if (!current.empty()) {
            tokens.push_back(std::move(current));
            current.clear();
        }
        i += len;
    }
    if (!current.empty()) tokens.push_back(std::move(current));
    return TokenStream::from_tokens(std::move(tokens));
}

// ---------------------------------------------------------------------------
// Lexical metrics
// ---------------------------------------------------------------------------

double maas(const TokenStream& ts) {
    if (ts.N < 2) throw Error(ErrorKind::InsufficientData, "maas needs at least 2 tokens");
    const double ln = std::log10(static_cast<double>(ts.N));
    const double lv = std::log10(static_cast<double>(ts.V));
    return (ln - lv) / (ln * ln);
}

namespace {

double log_choose(double n, double k) {
    return std::lgamma(n + 1) - std::lgamma(k + 1) - std::lgamma(n - k + 1);
}

}  // namespace

double hdd(const TokenStream& ts, int sample_size) {
    if (sample_size < 1) throw Error(ErrorKind::InvalidArgument, "hdd sample size must be >= 1");
    const auto s = static_cast<std::size_t>(sample_size);
    if (ts.N < s)
        throw Error(ErrorKind::InsufficientData,
                    "hdd needs at least " + std::to_string(s) + " tokens");
    const double n = static_cast<double>(ts.N);
    const double denom = log_choose(n, static_cast<double>(s));
    double total = 0.0;
    for (const auto& [type, f] : ts.freqs) {
        double p_absent = 0.0;
        if (ts.N - f >= s) p_absent = std::exp(log_choose(n - static_cast<double>(f), static_cast<double>(s)) - denom);
        total += (1.0 - p_absent) / static_cast<double>(s);
    }
    return total;
}

double mtld_pass(std::span<const std::string> tokens, double threshold) {
    double factors = 0.0;
    std::set<std::string_view> types;
    std::size_t count = 0;
    double ttr = 1.0;
    for (const auto& t : tokens) {
        types.insert(t);
        ++count;
        ttr = static_cast<double>(types.size()) / static_cast<double>(count);
        if (ttr <= threshold) {
            factors += 1.0;
            types.clear();
            count = 0;
            ttr = 1.0;
        }
    }
    if (count > 0) factors += (1.0 - ttr) / (1.0 - threshold);
    if (factors == 0.0) return static_cast<double>(tokens.size());
    return static_cast<double>(tokens.size()) / factors;
}

double mtld(const TokenStream& ts, double threshold) {
    if (ts.N < 10) throw Error(ErrorKind::InsufficientData, "mtld needs at least 10 tokens");
    if (!(threshold > 0.0 && threshold < 1.0))
        throw Error(ErrorKind::InvalidArgument, "mtld threshold must be in (0, 1)");
    std::vector<std::string> reversed(ts.tokens.rbegin(), ts.tokens.rend());
    return (mtld_pass(ts.tokens, threshold) + mtld_pass(reversed, threshold)) / 2.0;
}

// ---------------------------------------------------------------------------
// Embeddings
// ---------------------------------------------------------------------------

namespace {

std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

}  // namespace

Eigen::VectorXd HashedBowEmbedder::embed(std::string_view text) {
    Eigen::VectorXd v = Eigen::VectorXd::Zero(dim_);
    for (const auto& t : tokenize(text).tokens) v[static_cast<Eigen::Index>(fnv1a(t) % static_cast<std::uint64_t>(dim_))] += 1.0;
    const double norm = v.norm();
    if (norm == 0.0) {
        v[0] = 1.0;
        return v;
    }
    return v / norm;
}

RemoteEmbedder::RemoteEmbedder(std::string base_url, std::string model, std::string key_env,
                               int dim)
    : base_url_(std::move(base_url)), model_(std::move(model)), key_env_(std::move(key_env)),
      dim_(dim) {}

Eigen::VectorXd RemoteEmbedder::embed(std::string_view text) {
    const char* key = std::getenv(key_env_.c_str());
    if (key == nullptr || *key == '\0')
        throw Error(ErrorKind::Configuration, "embedding key variable " + key_env_ + " is not set");
    httplib::Client client(base_url_);
    client.set_read_timeout(std::chrono::seconds(60));
    const nlohmann::json body{{"model", model_}, {"input", std::string(text)}};
    const httplib::Headers headers{{"Authorization", std::string("Bearer ") + key}};
    auto res = client.Post("/v1/embeddings", headers, body.dump(), "application/json");
    if (!res) throw Error(ErrorKind::Transport, "embedding request failed");
    if (res->status != 200)
        throw Error(ErrorKind::Transport, "embedding request returned " + std::to_string(res->status));
    const auto j = nlohmann::json::parse(res->body, nullptr, false);
    if (j.is_discarded() || !j.contains("data") || j["data"].empty())
        throw Error(ErrorKind::Parse, "unexpected embedding response shape");
    const auto& values = j["data"][0]["embedding"];
    if (static_cast<int>(values.size()) != dim_)
        throw Error(ErrorKind::Configuration, "embedding dimension mismatch");
    Eigen::VectorXd v(dim_);
    for (int i = 0; i < dim_; ++i) v[i] = values[static_cast<std::size_t>(i)].get<double>();
    const double norm = v.norm();
    if (norm == 0.0) throw Error(ErrorKind::Parse, "zero embedding");
    return v / norm;
}

// ---------------------------------------------------------------------------
// APS and INGF
// ---------------------------------------------------------------------------

double aps(std::span<const TopicText> items, ApsMode mode, EmbeddingBackend& backend) {
    // Sorted so the summation order (and therefore every bit) is independent
    // of input order.
    std::vector<TopicText> sorted(items.begin(), items.end());
    std::sort(sorted.begin(), sorted.end());
    std::map<std::string, std::vector<Eigen::VectorXd>> by_topic;
    for (const auto& [topic, text] : sorted) by_topic[topic].push_back(backend.embed(text));

    if (mode == ApsMode::Intra) {
        double sum_topics = 0.0;
        std::size_t topics = 0;
        for (const auto& [topic, vecs] : by_topic) {
            if (vecs.size() < 2) continue;
            double sum = 0.0;
            std::size_t pairs = 0;
            for (std::size_t i = 0; i < vecs.size(); ++i)
                for (std::size_t j = i + 1; j < vecs.size(); ++j, ++pairs) sum += vecs[i].dot(vecs[j]);
            sum_topics += sum / static_cast<double>(pairs);
            ++topics;
        }
        if (topics == 0)
            throw Error(ErrorKind::InsufficientData, "intra-topic APS needs a topic with 2 members");
        return sum_topics / static_cast<double>(topics);
    }

    if (by_topic.size() < 2)
        throw Error(ErrorKind::InsufficientData, "inter-topic APS needs at least 2 topics");
    double sum = 0.0;
    std::size_t pairs = 0;
    for (auto a = by_topic.begin(); a != by_topic.end(); ++a)
        for (auto b = std::next(a); b != by_topic.end(); ++b)
            for (const auto& u : a->second)
                for (const auto& v : b->second) {
                    sum += u.dot(v);
                    ++pairs;
                }
    return sum / static_cast<double>(pairs);
}

double aps(std::span<const Narrative> narratives, TopicKeyMode key, ApsMode mode,
           EmbeddingBackend& backend) {
    std::vector<TopicText> items;
    items.reserve(narratives.size());
    for (const auto& n : narratives) items.emplace_back(n.topic_key(key), n.text);
    return aps(items, mode, backend);
}

double ingf(std::span<const std::string> texts, int n) {
    if (n < 1) throw Error(ErrorKind::InvalidArgument, "n-gram order must be >= 1");
    if (texts.size() < 2) throw Error(ErrorKind::InsufficientData, "INGF needs at least 2 texts");
    std::vector<std::set<std::string>> grams;
    for (const auto& text : texts) {
        const auto ts = tokenize(text);
        if (ts.N < static_cast<std::size_t>(n))
            throw Error(ErrorKind::InsufficientData,
                        "INGF needs at least " + std::to_string(n) + " tokens per text");
        std::set<std::string> g;
        for (std::size_t i = 0; i + static_cast<std::size_t>(n) <= ts.N; ++i) {
            std::string gram = ts.tokens[i];
            for (int k = 1; k < n; ++k) gram += ' ' + ts.tokens[i + static_cast<std::size_t>(k)];
            g.insert(std::move(gram));
        }
        grams.push_back(std::move(g));
    }
    std::sort(grams.begin(), grams.end());
    double sum = 0.0;
    std::size_t pairs = 0;
    for (std::size_t i = 0; i < grams.size(); ++i) {
        for (std::size_t j = 0; j < grams.size(); ++j) {
            if (i == j) continue;
            std::size_t shared = 0;
            for (const auto& g : grams[i]) shared += grams[j].count(g);
            sum += static_cast<double>(shared) / static_cast<double>(grams[i].size());
            ++pairs;
        }
    }
    return sum / static_cast<double>(pairs);
}

// ---------------------------------------------------------------------------
// Corpus report
// ---------------------------------------------------------------------------

namespace {

ojson opt(const std::optional<double>& v) { return v ? ojson(*v) : ojson(nullptr); }

std::string fmt(const std::optional<double>& v) {
    if (!v) return "";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6f", *v);
    return buf;
}

}  // namespace

ojson DiversityReport::to_json() const {
    ojson j;
    j["n_narratives"] = n_narratives;
    j["hdd"] = opt(hdd);
    j["maas"] = opt(maas);
    j["mtld"] = opt(mtld);
    j["intra_aps"] = opt(intra_aps);
    j["inter_aps"] = opt(inter_aps);
    j["ingf"] = opt(ingf);
    ojson counts = ojson::object();
    for (const auto& [k, v] : lexical_counts) counts[k] = v;
    j["lexical_counts"] = counts;
    ojson roles = ojson::object();
    for (const auto& [k, v] : role_percent) roles[k] = v;
    j["role_percent"] = roles;
    ojson hist = ojson::array();
    for (const auto& b : sentence_histogram)
        hist.push_back({{"lo", b.lo}, {"hi", b.hi}, {"count", b.count}, {"density", b.density}});
    j["sentence_histogram"] = hist;
    ojson errs = ojson::object();
    for (const auto& [k, v] : errors) errs[k] = v;
    j["errors"] = errs;
    return j;
}

std::string DiversityReport::csv_header() {
    return "dataset,hdd,maas,mtld,intra_aps,inter_aps,ingf";
}

std::string DiversityReport::csv_row(std::string_view name) const {
    return std::string(name) + "," + fmt(hdd) + "," + fmt(maas) + "," + fmt(mtld) + "," +
           fmt(intra_aps) + "," + fmt(inter_aps) + "," + fmt(ingf);
}

DiversityReport corpus_report(std::span<const Narrative> dataset, EmbeddingBackend& backend,
                              const ReportOptions& options) {
    if (dataset.empty()) throw Error(ErrorKind::InsufficientData, "empty dataset");
    DiversityReport r;
    r.n_narratives = dataset.size();

    // Lexical metrics: mean over the narratives long enough for each metric.
    struct Acc {
        double sum = 0.0;
        std::size_t n = 0;
    };
    std::map<std::string, Acc> acc{{"hdd", {}}, {"maas", {}}, {"mtld", {}}};
    for (const auto& n : dataset) {
        const auto ts = tokenize(n.text);
        auto add = [&](const char* name, auto&& f) {
            try {
                acc[name].sum += f();
                ++acc[name].n;
            } catch (const Error& e) {
                if (e.kind() != ErrorKind::InsufficientData) throw;
            }
        };
        add("hdd", [&] { return hdd(ts); });
        add("maas", [&] { return maas(ts); });
        add("mtld", [&] { return mtld(ts); });
    }
    auto mean_of = [&](const char* name) -> std::optional<double> {
        const auto& a = acc[name];
        r.lexical_counts[name] = a.n;
        if (a.n == 0) {
            r.errors[name] = "no narrative long enough";
            return std::nullopt;
        }
        return a.sum / static_cast<double>(a.n);
    };
    r.hdd = mean_of("hdd");
    r.maas = mean_of("maas");
    r.mtld = mean_of("mtld");

    auto guarded = [&](const char* name, auto&& f) -> std::optional<double> {
        try {
            return f();
        } catch (const Error& e) {
            if (e.kind() != ErrorKind::InsufficientData) throw;
            r.errors[name] = e.what();
            return std::nullopt;
        }
    };
    r.intra_aps = guarded("intra_aps", [&] { return aps(dataset, options.topic, ApsMode::Intra, backend); });
    r.inter_aps = guarded("inter_aps", [&] { return aps(dataset, options.topic, ApsMode::Inter, backend); });
    std::vector<std::string> texts;
    for (const auto& n : dataset) texts.push_back(n.text);
    r.ingf = guarded("ingf", [&] { return ingf(texts, options.ingf_n); });

    std::map<Role, std::size_t> roles;
    std::size_t total_chars = 0;
    for (const auto& n : dataset)
        for (const auto& c : n.constraints.characters) {
            ++roles[c.role()];
            ++total_chars;
        }
    for (auto role : kRoles) {
        if (!roles.count(role)) continue;
        r.role_percent[std::string(to_string(role))] =
            100.0 * static_cast<double>(roles[role]) / static_cast<double>(total_chars);
    }

    const int w = std::max(1, options.bin_width);
    std::map<int, std::size_t> bins;
    for (const auto& n : dataset) {
        const int s = static_cast<int>(split_sentences(n.text).size());
        ++bins[(s / w) * w];
    }
    for (const auto& [lo, count] : bins)
        r.sentence_histogram.push_back(
            {lo, lo + w - 1, count,
             static_cast<double>(count) / (static_cast<double>(dataset.size()) * w)});
    return r;
}

}  // namespace liipa
