#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "liipa/metrics.hpp"

using namespace liipa;

namespace {

std::vector<std::string> words(std::initializer_list<const char*> ws) { return {ws.begin(), ws.end()}; }

std::vector<std::string> repeat(const std::vector<std::string>& unit, int times) {
    std::vector<std::string> out;
    for (int i = 0; i < times; ++i) out.insert(out.end(), unit.begin(), unit.end());
    return out;
}

std::vector<std::string> distinct(int n, const char* prefix = "w") {
    std::vector<std::string> out;
    for (int i = 0; i < n; ++i) out.push_back(prefix + std::to_string(i));
    return out;
}

/// Draws 42 tokens without replacement and counts the distinct types.
double hdd_monte_carlo(const std::vector<std::string>& tokens, int draws, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<std::size_t> idx(tokens.size());
    double total = 0.0;
    for (int d = 0; d < draws; ++d) {
        std::iota(idx.begin(), idx.end(), 0);
        std::set<std::string_view> seen;
        for (std::size_t k = 0; k < 42; ++k) {
            const auto j = k + rng.uniform(idx.size() - k);
            std::swap(idx[k], idx[j]);
            seen.insert(tokens[idx[k]]);
        }
        total += static_cast<double>(seen.size()) / 42.0;
    }
    return total / draws;
}

double cosine(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    double dot = 0, na = 0, nb = 0;
    for (Eigen::Index i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    return dot / std::sqrt(na * nb);
}

}  // namespace

TEST_CASE("tokenize") {
    const auto ts = tokenize("Don't STOP, don't stop! Room 101... caf\xC3\xA9");
    CHECK(ts.tokens == words({"don't", "stop", "don't", "stop", "room", "101", "caf\xC3\xA9"}));
    CHECK(ts.N == 7);
    CHECK(ts.V == 5);
    CHECK(ts.freqs.at("stop") == 2);
    CHECK(tokenize("  ...  ").N == 0);
}

TEST_CASE("maas anchors") {
    CHECK(maas(TokenStream::from_tokens(distinct(80))) == 0.0);
    const auto dup = repeat(distinct(50), 2);
    CHECK(std::abs(maas(TokenStream::from_tokens(dup)) - 0.075257498915995) < 1e-6);
    CHECK_THROWS_AS(maas(TokenStream::from_tokens(words({"a"}))), Error);
}

TEST_CASE("maas grows as duplicates replace distinct tokens") {
    for (int c = 0; c < 10; ++c) {
        const int n = 40 + 10 * c;
        auto tokens = distinct(n);
        double prev = maas(TokenStream::from_tokens(tokens));
        for (int k = 1; k < n / 2; ++k) {
            tokens[static_cast<std::size_t>(k)] = tokens[0];
            const double now = maas(TokenStream::from_tokens(tokens));
            CHECK(now > prev);
            prev = now;
        }
    }
}

TEST_CASE("hdd matches a sampling estimate") {
    Rng gen(123);
    for (int s = 0; s < 20; ++s) {
        const auto n = 50 + gen.uniform(451);
        const auto vocab = 5 + gen.uniform(n);
        std::vector<std::string> tokens;
        for (std::size_t i = 0; i < n; ++i) {
            // Skewed draw so frequencies vary.
            const auto r = gen.uniform(vocab);
            tokens.push_back("t" + std::to_string(gen.uniform(r + 1)));
        }
        CAPTURE(n);
        const double analytic = hdd(TokenStream::from_tokens(tokens));
        const double mc = hdd_monte_carlo(tokens, 20000, 1000 + s);
        CHECK(std::abs(analytic - mc) < 0.01);
    }
}

TEST_CASE("hdd degenerate and short streams") {
    CHECK(hdd(TokenStream::from_tokens(repeat(words({"x"}), 60))) == 1.0 / 42.0);
    CHECK(hdd(TokenStream::from_tokens(distinct(42))) == doctest::Approx(1.0));
    CHECK_THROWS_AS(hdd(TokenStream::from_tokens(distinct(41))), Error);
}

TEST_CASE("mtld hand traces") {
    // a b c a b | c a b c a | ... the TTR first drops to 3/5 at every fifth token.
    const auto abc = repeat(words({"a", "b", "c"}), 20);
    CHECK(std::abs(mtld_pass(abc) - 60.0 / 12.0) < 1e-9);
    CHECK(std::abs(mtld(TokenStream::from_tokens(abc)) - 5.0) < 1e-9);

    // x x | x x | ... one factor per two tokens.
    const auto same = repeat(words({"x"}), 20);
    CHECK(std::abs(mtld(TokenStream::from_tokens(same)) - 2.0) < 1e-9);

    // TTR never drops; no factor at all, the pass returns the length.
    CHECK(std::abs(mtld(TokenStream::from_tokens(distinct(30))) - 30.0) < 1e-9);

    // Forward: a b a closes a factor (2/3); c..j leaves TTR 1, partial 0.
    // Backward: j..c a b keeps TTR 1, the last a gives 10/11, partial (1/11)/0.28.
    const auto mixed = words({"a", "b", "a", "c", "d", "e", "f", "g", "h", "i", "j"});
    const double fwd = 11.0 / 1.0;
    const double bwd = 11.0 / ((1.0 - 10.0 / 11.0) / (1.0 - 0.72));
    CHECK(std::abs(mtld_pass(mixed) - fwd) < 1e-9);
    CHECK(std::abs(mtld(TokenStream::from_tokens(mixed)) - (fwd + bwd) / 2.0) < 1e-9);

    // Forward factor at token 6 (4/6); backward at token 9 (6/9); both leave a TTR-1 tail.
    const auto twice = words({"a", "b", "c", "d", "a", "b", "c", "d", "e", "f"});
    CHECK(std::abs(mtld(TokenStream::from_tokens(twice)) - 10.0) < 1e-9);

    CHECK_THROWS_AS(mtld(TokenStream::from_tokens(distinct(9))), Error);
    CHECK_THROWS_AS(mtld(TokenStream::from_tokens(distinct(20)), 1.0), Error);
}

TEST_CASE("mtld is invariant under reversal") {
    Rng rng(9);
    for (int c = 0; c < 20; ++c) {
        std::vector<std::string> t;
        for (int i = 0; i < 200; ++i) t.push_back("t" + std::to_string(rng.uniform(30)));
        std::vector<std::string> r(t.rbegin(), t.rend());
        CHECK(std::abs(mtld(TokenStream::from_tokens(t)) - mtld(TokenStream::from_tokens(r))) < 1e-9);
        CHECK(std::abs(mtld(TokenStream::from_tokens(t)) -
                       (mtld_pass(t) + mtld_pass(r)) / 2.0) < 1e-12);
    }
}

TEST_CASE("hashed embedder is unit norm and deterministic") {
    HashedBowEmbedder e(64);
    const auto v = e.embed("The river ran past the mill.");
    CHECK(v.size() == 64);
    CHECK(v.norm() == doctest::Approx(1.0));
    CHECK(v == e.embed("The river ran past the mill."));
    CHECK(e.embed("").norm() == doctest::Approx(1.0));
}

TEST_CASE("APS and INGF agree with quadratic loops") {
    const std::vector<TopicText> items{
        {"Drama", "Protagonist0 waited by the door for the letter."},
        {"Drama", "The letter never came and Protagonist0 left the door open."},
        {"Drama", "Antagonist0 hid the letter under the stairs."},
        {"Horror", "The stairs creaked while Victim0 counted the candles."},
        {"Horror", "Victim0 counted the candles twice and ran."},
        {"Comedy", "Protagonist1 slipped on the pie and laughed at the ceiling."},
        {"Comedy", "The pie landed on the ceiling fan."},
        {"Mystery", "Protagonist2 counted footprints by the mill."},
    };
    HashedBowEmbedder e(128);

    double intra_sum = 0;
    int intra_topics = 0;
    std::set<std::string> topics;
    for (const auto& [t, _] : items) topics.insert(t);
    for (const auto& topic : topics) {
        double s = 0;
        int pairs = 0;
        for (std::size_t i = 0; i < items.size(); ++i)
            for (std::size_t j = i + 1; j < items.size(); ++j)
                if (items[i].first == topic && items[j].first == topic) {
                    s += cosine(e.embed(items[i].second), e.embed(items[j].second));
                    ++pairs;
                }
        if (pairs > 0) {
            intra_sum += s / pairs;
            ++intra_topics;
        }
    }
    CHECK(std::abs(aps(items, ApsMode::Intra, e) - intra_sum / intra_topics) < 1e-9);

    double inter = 0;
    int inter_pairs = 0;
    for (std::size_t i = 0; i < items.size(); ++i)
        for (std::size_t j = i + 1; j < items.size(); ++j)
            if (items[i].first != items[j].first) {
                inter += cosine(e.embed(items[i].second), e.embed(items[j].second));
                ++inter_pairs;
            }
    CHECK(std::abs(aps(items, ApsMode::Inter, e) - inter / inter_pairs) < 1e-9);

    std::vector<std::string> texts;
    for (const auto& [_, text] : items) texts.push_back(text);
    for (int n : {1, 2, 3}) {
        auto grams = [&](const std::string& text) {
            const auto tk = tokenize(text).tokens;
            std::vector<std::string> g;
            for (std::size_t i = 0; i + n <= tk.size(); ++i) {
                std::string s;
                for (int k = 0; k < n; ++k) s += tk[i + k] + "|";
                if (std::find(g.begin(), g.end(), s) == g.end()) g.push_back(s);
            }
            return g;
        };
        double total = 0;
        int pairs = 0;
        for (std::size_t i = 0; i < texts.size(); ++i)
            for (std::size_t j = 0; j < texts.size(); ++j) {
                if (i == j) continue;
                const auto gi = grams(texts[i]), gj = grams(texts[j]);
                int shared = 0;
                for (const auto& g : gi) shared += std::count(gj.begin(), gj.end(), g) > 0;
                total += static_cast<double>(shared) / gi.size();
                ++pairs;
            }
        CAPTURE(n);
        CHECK(std::abs(ingf(texts, n) - total / pairs) < 1e-9);
    }
}

TEST_CASE("identical texts are maximally similar") {
    const std::vector<TopicText> same(5, {"Drama", "Protagonist0 kept the lamp lit all night."});
    HashedBowEmbedder e;
    CHECK(std::abs(aps(same, ApsMode::Intra, e) - 1.0) < 1e-9);
    std::vector<std::string> texts(5, "Protagonist0 kept the lamp lit all night.");
    CHECK(ingf(texts, 4) == 1.0);
}

TEST_CASE("APS and INGF preconditions") {
    HashedBowEmbedder e;
    const std::vector<TopicText> singletons{{"a", "one text here"}, {"b", "two text here"}};
    CHECK_THROWS_AS(aps(singletons, ApsMode::Intra, e), Error);
    const std::vector<TopicText> one_topic{{"a", "x y"}, {"a", "y z"}};
    CHECK_THROWS_AS(aps(one_topic, ApsMode::Inter, e), Error);
    CHECK_THROWS_AS(ingf(std::vector<std::string>{"only one text"}, 2), Error);
    CHECK_THROWS_AS(ingf(std::vector<std::string>{"too short", "also short"}, 4), Error);
}

TEST_CASE("APS does not depend on input order") {
    std::vector<TopicText> items{{"a", "red fox runs"}, {"a", "red fox sleeps"}, {"b", "blue whale sings"},
                                 {"b", "blue whale dives"}, {"a", "red hen runs"}};
    HashedBowEmbedder e;
    const double base = aps(items, ApsMode::Intra, e);
    std::reverse(items.begin(), items.end());
    CHECK(aps(items, ApsMode::Intra, e) == base);
}

TEST_CASE("corpus report") {
    std::vector<Narrative> ds;
    for (std::uint64_t s = 0; s < 6; ++s) {
        Narrative n;
        n.id = "imp-00000" + std::to_string(s);
        n.constraints = sample_constraints(GenerationConfig{}, s);
        n.constraints.genre = s % 2 ? "Drama" : "Horror";
        n.text = "Protagonist0 walked along the cold river bank at night. The lamp flickered twice. " +
                 std::string(s % 2 ? "A boat drifted past the mill without a sound." : "Rain fell on the roof.");
        ds.push_back(n);
    }
    HashedBowEmbedder e;
    const auto r = corpus_report(ds, e);
    CHECK(r.n_narratives == 6);
    CHECK(r.intra_aps.has_value());
    CHECK(r.inter_aps.has_value());
    CHECK(r.ingf.has_value());
    CHECK(r.maas.has_value());
    // Texts are shorter than the 42-token HD-D sample.
    CHECK_FALSE(r.hdd.has_value());
    CHECK(r.errors.count("hdd") == 1);
    double pct = 0;
    for (const auto& [_, p] : r.role_percent) pct += p;
    CHECK(pct == doctest::Approx(100.0));
    std::size_t binned = 0;
    for (const auto& b : r.sentence_histogram) binned += b.count;
    CHECK(binned == 6);
    CHECK(r.to_json().dump() == corpus_report(ds, e).to_json().dump());
    const auto header = DiversityReport::csv_header();
    const auto row = r.csv_row("mine");
    CHECK(std::count(header.begin(), header.end(), ',') == std::count(row.begin(), row.end(), ','));
    CHECK_THROWS_AS(corpus_report(std::span<const Narrative>{}, e), Error);
}
