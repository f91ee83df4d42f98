#include "liipa/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>
#include <sstream>

namespace liipa {

namespace {

using Key = std::pair<std::string, CharacterId>;

std::string fixed(double v, int digits = 6) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

std::string xml_escape(std::string_view s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            default: out.push_back(c);
        }
    }
    return out;
}

std::string csv_field(std::string_view s) {
    if (s.find_first_of(",\"\n") == std::string_view::npos) return std::string(s);
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out.push_back(c);
    }
    return out + "\"";
}

double fraction(std::size_t num, std::size_t den) {
    return static_cast<double>(num) / static_cast<double>(den);
}

}  // namespace

// ---------------------------------------------------------------------------
// Scoring
// ---------------------------------------------------------------------------

ScoredRun ScoredRun::join(std::span<const Prediction> predictions, std::span<const Narrative> gold,
                          const EvalPolicy& policy) {
    struct GoldInfo {
        LabelSet labels;
        int chars;
        int sentences;
    };
    std::map<Key, GoldInfo> index;
    for (const auto& n : gold) {
        const int sentences = static_cast<int>(split_sentences(n.text).size());
        for (const auto& c : n.constraints.characters)
            index[{n.id, c.id}] = {c.labels, static_cast<int>(n.constraints.characters.size()), sentences};
    }

    ScoredRun run;
    std::vector<std::string> orphans;
    std::set<std::string> methods;
    for (const auto& p : predictions) {
        const auto it = index.find({p.narrative_id, p.character});
        if (it == index.end()) {
            orphans.push_back(p.narrative_id + "/" + p.character.str());
            continue;
        }
        methods.insert(std::string(to_string(p.method)));
        if (p.failed) {
            ++run.failed;
            if (policy.skip_failed) {
                ++run.skipped;
                continue;
            }
        }
        ScoredRecord r;
        r.prediction = p;
        r.gold = it->second.labels;
        r.character_count = it->second.chars;
        r.sentence_count = it->second.sentences;
        for (std::size_t d = 0; d < 3; ++d)
            r.correct[d] = !p.failed && p.labels.at(kDimensions[d]) == r.gold.at(kDimensions[d]);
        run.records.push_back(std::move(r));
    }
    if (!orphans.empty()) {
        std::string msg = "predictions without gold labels:";
        for (std::size_t i = 0; i < orphans.size() && i < 20; ++i) msg += " " + orphans[i];
        if (orphans.size() > 20) msg += " ... (" + std::to_string(orphans.size()) + " total)";
        throw Error(ErrorKind::Alignment, msg);
    }
    if (methods.size() == 1) run.method = *methods.begin();
    else if (methods.size() > 1) run.method = "mixed";
    return run;
}

double accuracy_overall(const ScoredRun& run) {
    if (run.records.empty()) throw Error(ErrorKind::InsufficientData, "no scored predictions");
    std::size_t correct = 0;
    for (const auto& r : run.records)
        for (bool b : r.correct) correct += b ? 1 : 0;
    return fraction(correct, 3 * run.records.size());
}

double exact_match_accuracy(const ScoredRun& run) {
    if (run.records.empty()) throw Error(ErrorKind::InsufficientData, "no scored predictions");
    std::size_t exact = 0;
    for (const auto& r : run.records) exact += (r.correct[0] && r.correct[1] && r.correct[2]) ? 1 : 0;
    return fraction(exact, run.records.size());
}

std::string_view to_string(Facet f) {
    switch (f) {
        case Facet::Dimension: return "dimension";
        case Facet::GoldLevel: return "gold-level";
        case Facet::CharCount: return "char-count";
        case Facet::SentenceBin: return "sentence-bin";
    }
    return "?";
}

std::optional<Facet> parse_facet(std::string_view s) {
    for (auto f : {Facet::Dimension, Facet::GoldLevel, Facet::CharCount, Facet::SentenceBin})
        if (to_string(f) == s) return f;
    return std::nullopt;
}

std::string sentence_bin(int sentences) {
    if (sentences <= 10) return "5-10";
    if (sentences <= 15) return "11-15";
    if (sentences <= 20) return "16-20";
    return "20+";
}

std::vector<FacetCell> accuracy_by(const ScoredRun& run, Facet facet) {
    std::vector<FacetCell> cells;
    auto cell = [&](const std::string& key) -> FacetCell& {
        for (auto& c : cells)
            if (c.key == key) return c;
        cells.push_back({key, 0, 0, std::nullopt});
        return cells.back();
    };
    auto add_all = [&](FacetCell& c, const ScoredRecord& r) {
        for (bool b : r.correct) {
            ++c.n;
            c.correct += b ? 1 : 0;
        }
    };

    switch (facet) {
        case Facet::Dimension:
            for (auto d : kDimensions) cell(std::string(to_string(d)));
            for (const auto& r : run.records)
                for (std::size_t d = 0; d < 3; ++d) {
                    auto& c = cells[d];
                    ++c.n;
                    c.correct += r.correct[d] ? 1 : 0;
                }
            break;
        case Facet::GoldLevel:
            for (auto d : kDimensions)
                for (auto l : kLevels) cell(std::string(to_string(d)) + "/" + std::string(to_string(l)));
            for (const auto& r : run.records)
                for (std::size_t d = 0; d < 3; ++d) {
                    const auto l = static_cast<std::size_t>(r.gold.at(kDimensions[d]));
                    auto& c = cells[d * 3 + l];
                    ++c.n;
                    c.correct += r.correct[d] ? 1 : 0;
                }
            break;
        case Facet::CharCount: {
            std::set<int> counts;
            for (const auto& r : run.records) counts.insert(r.character_count);
            for (int k : counts) cell(std::to_string(k));
            for (const auto& r : run.records) add_all(cell(std::to_string(r.character_count)), r);
            break;
        }
        case Facet::SentenceBin:
            for (const char* b : {"5-10", "11-15", "16-20", "20+"}) cell(b);
            for (const auto& r : run.records) add_all(cell(sentence_bin(r.sentence_count)), r);
            break;
    }
    for (auto& c : cells)
        if (c.n > 0) c.accuracy = fraction(c.correct, c.n);
    return cells;
}

// ---------------------------------------------------------------------------
// Fairness
// ---------------------------------------------------------------------------

UnfairnessResult unfairness(std::span<const FairnessSlice> slices) {
    if (slices.empty()) throw Error(ErrorKind::InsufficientData, "no fairness slices");
    std::map<PersonaGroup, std::vector<double>> groups;
    for (const auto& s : slices) groups[s.group].push_back(s.accuracy);
    UnfairnessResult r;
    double sum = 0.0;
    for (auto& [g, acc] : groups) {
        if (acc.size() < 2)
            throw Error(ErrorKind::InsufficientData,
                        "group " + std::string(to_string(g)) + " needs at least 2 personas");
        // Sorted so the result does not depend on slice order.
        std::sort(acc.begin(), acc.end());
        double mean = 0.0;
        for (double a : acc) mean += a;
        mean /= static_cast<double>(acc.size());
        double var = 0.0;
        for (double a : acc) var += (a - mean) * (a - mean);
        var /= static_cast<double>(acc.size());
        r.group_variance[g] = var;
        sum += var;
    }
    r.value = sum / static_cast<double>(groups.size());
    return r;
}

namespace {

std::map<Key, const ScoredRecord*> index_run(const ScoredRun& run) {
    std::map<Key, const ScoredRecord*> m;
    for (const auto& r : run.records) m[{r.prediction.narrative_id, r.prediction.character}] = &r;
    return m;
}

double slice_accuracy(const std::vector<const ScoredRecord*>& records) {
    std::size_t correct = 0;
    for (const auto* r : records)
        for (bool b : r->correct) correct += b ? 1 : 0;
    return fraction(correct, 3 * records.size());
}

struct Paired {
    std::vector<const ScoredRecord*> persona;
    std::vector<const ScoredRecord*> baseline;
};

Paired pair_up(const PersonaRun& pr, const std::map<Key, const ScoredRecord*>& base) {
    Paired p;
    std::vector<std::string> missing;
    for (const auto& r : pr.run.records) {
        const auto it = base.find({r.prediction.narrative_id, r.prediction.character});
        if (it == base.end()) {
            missing.push_back(r.prediction.narrative_id + "/" + r.prediction.character.str());
            continue;
        }
        p.persona.push_back(&r);
        p.baseline.push_back(it->second);
    }
    if (!missing.empty()) {
        std::string msg = "persona '" + pr.persona + "' has records missing from the baseline:";
        for (std::size_t i = 0; i < missing.size() && i < 20; ++i) msg += " " + missing[i];
        throw Error(ErrorKind::Alignment, msg);
    }
    if (p.persona.empty())
        throw Error(ErrorKind::InsufficientData, "persona '" + pr.persona + "' has no scored records");
    return p;
}

}  // namespace

std::vector<AccuracyDelta> accuracy_deltas(std::span<const PersonaRun> persona_runs,
                                           const ScoredRun& baseline) {
    const auto base = index_run(baseline);
    std::vector<AccuracyDelta> out;
    for (const auto& pr : persona_runs) {
        const auto p = pair_up(pr, base);
        const double d = 100.0 * (slice_accuracy(p.persona) - slice_accuracy(p.baseline));
        AccuracyDelta a{pr.persona, d, "unchanged"};
        if (d > 1e-12) a.sign = "increase";
        else if (d < -1e-12) a.sign = "decrease";
        out.push_back(std::move(a));
    }
    return out;
}

std::vector<FairnessSlice> fairness_slices(std::span<const PersonaRun> persona_runs,
                                           const ScoredRun& baseline) {
    const auto base = index_run(baseline);
    std::vector<FairnessSlice> out;
    for (const auto& pr : persona_runs) {
        const Persona* persona = find_persona(pr.persona);
        if (persona == nullptr) throw Error(ErrorKind::InvalidArgument, "unknown persona '" + pr.persona + "'");
        const auto p = pair_up(pr, base);
        out.push_back({persona->descriptor, persona->group, slice_accuracy(p.persona), p.persona.size(),
                       slice_accuracy(p.baseline)});
    }
    return out;
}

// ---------------------------------------------------------------------------
// Pareto
// ---------------------------------------------------------------------------

std::vector<ParetoRow> pareto_table(std::span<const ParetoPoint> points) {
    std::vector<ParetoRow> rows;
    for (const auto& p : points) {
        if (!std::isfinite(p.unfairness) || !std::isfinite(p.accuracy_pct))
            throw Error(ErrorKind::InvalidArgument, "non-finite Pareto point for " + p.method);
        rows.push_back({p, false, {}});
    }
    for (auto& a : rows) {
        for (const auto& b : rows) {
            if (&a == &b) continue;
            const bool no_worse = b.point.unfairness <= a.point.unfairness &&
                                  b.point.accuracy_pct >= a.point.accuracy_pct;
            const bool strictly = b.point.unfairness < a.point.unfairness ||
                                  b.point.accuracy_pct > a.point.accuracy_pct;
            if (no_worse && strictly) {
                a.dominated = true;
                a.dominated_by.push_back(b.point.method);
            }
        }
    }
    std::sort(rows.begin(), rows.end(), [](const ParetoRow& x, const ParetoRow& y) {
        if (x.point.unfairness != y.point.unfairness) return x.point.unfairness < y.point.unfairness;
        return x.point.method < y.point.method;
    });
    for (auto& r : rows) std::sort(r.dominated_by.begin(), r.dominated_by.end());
    return rows;
}

std::string pareto_csv(std::span<const ParetoRow> rows) {
    std::string out = "method,unfairness,accuracy_pct,dominated,dominated_by,manifest_digest\n";
    for (const auto& r : rows) {
        std::string by;
        for (const auto& m : r.dominated_by) by += (by.empty() ? "" : ";") + m;
        out += csv_field(r.point.method) + "," + fixed(r.point.unfairness) + "," +
               fixed(r.point.accuracy_pct) + "," + (r.dominated ? "true" : "false") + "," +
               csv_field(by) + "," + r.point.manifest_digest + "\n";
    }
    return out;
}

std::string pareto_svg(std::span<const ParetoRow> rows) {
    std::vector<ScatterPoint> pts;
    for (const auto& r : rows) pts.push_back({r.point.method, r.point.unfairness, r.point.accuracy_pct, !r.dominated});
    return svg_scatter("Fairness-accuracy tradeoff", pts, "Unfairness (average per-group variance)",
                       "Accuracy (%)");
}

// ---------------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------------

namespace {

ojson cells_json(const std::vector<FacetCell>& cells) {
    ojson arr = ojson::array();
    for (const auto& c : cells)
        arr.push_back({{"key", c.key}, {"n", c.n}, {"correct", c.correct},
                       {"accuracy", c.accuracy ? ojson(*c.accuracy) : ojson(nullptr)}});
    return arr;
}

}  // namespace

ojson eval_report_json(const ScoredRun& run, std::span<const Facet> facets) {
    ojson j;
    j["method"] = run.method;
    j["n_characters"] = run.records.size();
    j["n_pairs"] = 3 * run.records.size();
    j["failed"] = run.failed;
    j["skipped"] = run.skipped;
    j["accuracy"] = accuracy_overall(run);
    j["exact_match"] = exact_match_accuracy(run);
    ojson f = ojson::object();
    for (auto facet : facets) f[std::string(to_string(facet))] = cells_json(accuracy_by(run, facet));
    j["facets"] = f;
    return j;
}

void emit_eval_report(const std::filesystem::path& dir, const ScoredRun& run,
                      std::span<const Facet> facets) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw Error(ErrorKind::Io, "cannot create " + dir.string() + ": " + ec.message());
    write_file_atomic(dir / "eval.json", eval_report_json(run, facets).dump(2) + "\n");

    std::string csv = "facet,key,n,correct,accuracy\n";
    csv += "overall,all," + std::to_string(3 * run.records.size()) + ",," + fixed(accuracy_overall(run)) + "\n";
    csv += "overall,exact-match," + std::to_string(run.records.size()) + ",," +
           fixed(exact_match_accuracy(run)) + "\n";
    for (auto facet : facets) {
        const auto cells = accuracy_by(run, facet);
        std::vector<std::string> labels;
        std::vector<double> values;
        for (const auto& c : cells) {
            csv += std::string(to_string(facet)) + "," + csv_field(c.key) + "," + std::to_string(c.n) + "," +
                   std::to_string(c.correct) + "," + (c.accuracy ? fixed(*c.accuracy) : "") + "\n";
            labels.push_back(c.key);
            values.push_back(c.accuracy ? 100.0 * *c.accuracy : 0.0);
        }
        const std::string title = "Accuracy by " + std::string(to_string(facet)) + " (" + run.method + ")";
        const auto svg = facet == Facet::SentenceBin || facet == Facet::CharCount
                             ? svg_line_chart(title, labels, values, "Accuracy (%)")
                             : svg_bar_chart(title, labels, values, "Accuracy (%)");
        write_file_atomic(dir / ("accuracy_by_" + std::string(to_string(facet)) + ".svg"), svg);
    }
    write_file_atomic(dir / "eval.csv", csv);
}

ojson fairness_report_json(std::string_view method, std::span<const FairnessSlice> slices,
                           std::span<const AccuracyDelta> deltas, const UnfairnessResult& u) {
    ojson j;
    j["method"] = std::string(method);
    ojson arr = ojson::array();
    for (std::size_t i = 0; i < slices.size(); ++i) {
        const auto& s = slices[i];
        ojson row;
        row["persona"] = s.persona;
        row["group"] = std::string(to_string(s.group));
        row["n"] = s.n;
        row["accuracy"] = s.accuracy;
        row["baseline_accuracy"] = s.baseline_accuracy;
        if (i < deltas.size()) {
            row["delta_pp"] = deltas[i].delta_pp;
            row["sign"] = deltas[i].sign;
        }
        arr.push_back(std::move(row));
    }
    j["personas"] = arr;
    ojson groups = ojson::object();
    for (const auto& [g, v] : u.group_variance) groups[std::string(to_string(g))] = v;
    j["group_variance"] = groups;
    j["unfairness"] = u.value;
    // Same quantity with accuracies in percent, the scale used for the Pareto axis.
    j["unfairness_pp2"] = u.value * 1e4;
    double acc = 0.0;
    std::size_t n = 0;
    for (const auto& s : slices) {
        acc += s.accuracy * static_cast<double>(s.n);
        n += s.n;
    }
    j["accuracy_pct"] = n ? 100.0 * acc / static_cast<double>(n) : 0.0;
    return j;
}

void emit_fairness_report(const std::filesystem::path& dir, std::string_view method,
                          std::span<const FairnessSlice> slices,
                          std::span<const AccuracyDelta> deltas, const UnfairnessResult& u) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw Error(ErrorKind::Io, "cannot create " + dir.string() + ": " + ec.message());
    write_file_atomic(dir / "fairness.json", fairness_report_json(method, slices, deltas, u).dump(2) + "\n");
    std::string csv = "persona,group,n,accuracy,baseline_accuracy,delta_pp,sign\n";
    std::vector<std::string> labels;
    std::vector<double> values;
    for (std::size_t i = 0; i < slices.size(); ++i) {
        const auto& s = slices[i];
        const double d = i < deltas.size() ? deltas[i].delta_pp : 0.0;
        csv += csv_field(s.persona) + "," + std::string(to_string(s.group)) + "," + std::to_string(s.n) + "," +
               fixed(s.accuracy) + "," + fixed(s.baseline_accuracy) + "," + fixed(d) + "," +
               (i < deltas.size() ? deltas[i].sign : "") + "\n";
        labels.push_back(s.persona);
        values.push_back(d);
    }
    write_file_atomic(dir / "fairness.csv", csv);
    write_file_atomic(dir / "deltas.svg",
                      svg_bar_chart("Change in accuracy after persona insertion (" + std::string(method) + ")",
                                    labels, values, "Delta (pp)"));
}

// ---------------------------------------------------------------------------
// SVG
// ---------------------------------------------------------------------------

namespace {

constexpr double kW = 720, kH = 420, kLeft = 70, kRight = 20, kTop = 40, kBottom = 110;

struct Range {
    double lo, hi;
    [[nodiscard]] double span() const { return hi - lo; }
};

Range padded(double lo, double hi) {
    if (lo == hi) {
        lo -= 1.0;
        hi += 1.0;
    }
    const double pad = 0.05 * (hi - lo);
    return {lo - pad, hi + pad};
}

std::string header(std::string_view title) {
    std::ostringstream os;
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kW << "\" height=\"" << kH
       << "\" font-family=\"sans-serif\" font-size=\"11\">\n"
       << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
       << "<text x=\"" << kW / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">"
       << xml_escape(title) << "</text>\n";
    return os.str();
}

std::string axes(const Range& y, std::string_view y_label, std::string_view x_label) {
    std::ostringstream os;
    const double x0 = kLeft, y0 = kH - kBottom, x1 = kW - kRight;
    os << "<line x1=\"" << x0 << "\" y1=\"" << kTop << "\" x2=\"" << x0 << "\" y2=\"" << y0
       << "\" stroke=\"black\"/>\n";
    os << "<line x1=\"" << x0 << "\" y1=\"" << y0 << "\" x2=\"" << x1 << "\" y2=\"" << y0
       << "\" stroke=\"black\"/>\n";
    for (int i = 0; i <= 4; ++i) {
        const double v = y.lo + y.span() * i / 4.0;
        const double py = y0 - (y0 - kTop) * i / 4.0;
        os << "<text x=\"" << x0 - 6 << "\" y=\"" << fixed(py + 4, 2) << "\" text-anchor=\"end\">"
           << fixed(v, 2) << "</text>\n";
    }
    os << "<text x=\"16\" y=\"" << (kTop + y0) / 2 << "\" transform=\"rotate(-90 16 " << (kTop + y0) / 2
       << ")\" text-anchor=\"middle\">" << xml_escape(y_label) << "</text>\n";
    if (!x_label.empty())
        os << "<text x=\"" << (x0 + x1) / 2 << "\" y=\"" << kH - 10 << "\" text-anchor=\"middle\">"
           << xml_escape(x_label) << "</text>\n";
    return os.str();
}

double map_y(const Range& r, double v) {
    const double y0 = kH - kBottom;
    return y0 - (y0 - kTop) * (v - r.lo) / r.span();
}

}  // namespace

std::string svg_bar_chart(std::string_view title, std::span<const std::string> labels,
                          std::span<const double> values, std::string_view y_label) {
    double lo = 0.0, hi = 0.0;
    for (double v : values) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    const Range y = padded(lo, hi);
    std::string out = header(title) + axes(y, y_label, "");
    const double plot_w = kW - kLeft - kRight;
    const double slot = values.empty() ? plot_w : plot_w / static_cast<double>(values.size());
    const double zero = map_y(y, 0.0);
    for (std::size_t i = 0; i < values.size(); ++i) {
        const double x = kLeft + slot * static_cast<double>(i) + slot * 0.15;
        const double top = map_y(y, values[i]);
        const double h = std::abs(zero - top);
        const char* fill = values[i] < 0 ? "#c0392b" : "#2e86c1";
        out += "<rect class=\"bar\" x=\"" + fixed(x, 2) + "\" y=\"" + fixed(std::min(top, zero), 2) +
               "\" width=\"" + fixed(slot * 0.7, 2) + "\" height=\"" + fixed(h, 2) + "\" fill=\"" + fill + "\"/>\n";
        const double lx = x + slot * 0.35, ly = kH - kBottom + 12;
        out += "<text x=\"" + fixed(lx, 2) + "\" y=\"" + fixed(ly, 2) + "\" transform=\"rotate(40 " + fixed(lx, 2) +
               " " + fixed(ly, 2) + ")\">" + xml_escape(i < labels.size() ? labels[i] : "") + "</text>\n";
    }
    return out + "</svg>\n";
}

std::string svg_line_chart(std::string_view title, std::span<const std::string> labels,
                           std::span<const double> values, std::string_view y_label) {
    double lo = 0.0, hi = 0.0;
    for (double v : values) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    const Range y = padded(lo, hi);
    std::string out = header(title) + axes(y, y_label, "");
    const double plot_w = kW - kLeft - kRight;
    const double step = values.size() > 1 ? plot_w / static_cast<double>(values.size() - 1) : 0.0;
    std::string path;
    for (std::size_t i = 0; i < values.size(); ++i) {
        const double x = kLeft + (values.size() > 1 ? step * static_cast<double>(i) : plot_w / 2);
        const double py = map_y(y, values[i]);
        path += (i ? " L" : "M") + fixed(x, 2) + " " + fixed(py, 2);
        out += "<circle class=\"point\" cx=\"" + fixed(x, 2) + "\" cy=\"" + fixed(py, 2) + "\" r=\"3\" fill=\"#2e86c1\"/>\n";
        out += "<text x=\"" + fixed(x, 2) + "\" y=\"" + fixed(kH - kBottom + 16, 2) + "\" text-anchor=\"middle\">" +
               xml_escape(i < labels.size() ? labels[i] : "") + "</text>\n";
    }
    if (!path.empty()) out += "<path d=\"" + path + "\" fill=\"none\" stroke=\"#2e86c1\"/>\n";
    return out + "</svg>\n";
}

std::string svg_scatter(std::string_view title, std::span<const ScatterPoint> points,
                        std::string_view x_label, std::string_view y_label) {
    double xlo = 0, xhi = 0, ylo = 0, yhi = 0;
    for (std::size_t i = 0; i < points.size(); ++i) {
        const auto& p = points[i];
        xlo = i ? std::min(xlo, p.x) : p.x;
        xhi = i ? std::max(xhi, p.x) : p.x;
        ylo = i ? std::min(ylo, p.y) : p.y;
        yhi = i ? std::max(yhi, p.y) : p.y;
    }
    const Range x = padded(xlo, xhi), y = padded(ylo, yhi);
    std::string out = header(title) + axes(y, y_label, x_label);
    const double plot_w = kW - kLeft - kRight;
    for (int i = 0; i <= 4; ++i) {
        const double v = x.lo + x.span() * i / 4.0;
        out += "<text x=\"" + fixed(kLeft + plot_w * i / 4.0, 2) + "\" y=\"" + fixed(kH - kBottom + 16, 2) +
               "\" text-anchor=\"middle\">" + fixed(v, 2) + "</text>\n";
    }
    for (const auto& p : points) {
        const double px = kLeft + plot_w * (p.x - x.lo) / x.span();
        const double py = map_y(y, p.y);
        out += "<circle class=\"marker\" cx=\"" + fixed(px, 2) + "\" cy=\"" + fixed(py, 2) + "\" r=\"5\" fill=\"" +
               (p.highlight ? "#1e8449" : "#7f8c8d") + "\"><title>" + xml_escape(p.label) + "</title></circle>\n";
        out += "<text x=\"" + fixed(px + 7, 2) + "\" y=\"" + fixed(py - 7, 2) + "\">" + xml_escape(p.label) + "</text>\n";
    }
    return out + "</svg>\n";
}

}  // namespace liipa
