#include "beacon/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <memory>
#include <numeric>
#include <sstream>

#include "beacon/error.hpp"

namespace beacon {

std::size_t ConfusionMatrix::total() const { return std::accumulate(counts.begin(), counts.end(), std::size_t{0}); }

std::size_t ConfusionMatrix::support(std::size_t c) const {
    std::size_t s = 0;
    for (std::size_t p = 0; p < k; ++p) s += at(c, p);
    return s;
}

std::size_t ConfusionMatrix::predicted(std::size_t c) const {
    std::size_t s = 0;
    for (std::size_t t = 0; t < k; ++t) s += at(t, c);
    return s;
}

ConfusionMatrix confusion(std::span<const std::size_t> truth, std::span<const std::size_t> pred, std::size_t k) {
    if (truth.size() != pred.size()) fail(ErrorKind::InvalidArgument, "confusion: label lists differ in length");
    if (k == 0) fail(ErrorKind::InvalidArgument, "confusion: no classes");
    ConfusionMatrix cm;
    cm.k = k;
    cm.counts.assign(k * k, 0);
    for (std::size_t i = 0; i < truth.size(); ++i) {
        if (truth[i] >= k || pred[i] >= k) fail(ErrorKind::Label, "confusion: label out of range at index " + std::to_string(i));
        ++cm.counts[truth[i] * k + pred[i]];
    }
    return cm;
}

double accuracy(const ConfusionMatrix& cm) {
    const std::size_t total = cm.total();
    if (total == 0) fail(ErrorKind::EmptyInput, "accuracy: empty confusion matrix");
    std::size_t diag = 0;
    for (std::size_t c = 0; c < cm.k; ++c) diag += cm.at(c, c);
    return static_cast<double>(diag) / static_cast<double>(total);
}

ClassMetrics precision_recall_f1(const ConfusionMatrix& cm, std::size_t c) {
    if (c >= cm.k) fail(ErrorKind::Label, "precision_recall_f1: class out of range");
    const double tp = static_cast<double>(cm.at(c, c));
    const double fp = static_cast<double>(cm.predicted(c)) - tp;
    const double fn = static_cast<double>(cm.support(c)) - tp;
    ClassMetrics m;
    auto ratio = [&m](double num, double den) {
        if (den == 0.0) {
            m.degenerate = true;
            return 0.0;
        }
        return num / den;
    };
    m.precision = ratio(tp, tp + fp);
    m.recall = ratio(tp, tp + fn);
    m.f1 = ratio(2.0 * tp, 2.0 * tp + fp + fn);
    return m;
}

WeightedMetrics weighted_average(std::span<const ClassMetrics> per_class, std::span<const std::size_t> supports) {
    if (per_class.size() != supports.size()) fail(ErrorKind::InvalidArgument, "weighted_average: size mismatch");
    const double total = static_cast<double>(std::accumulate(supports.begin(), supports.end(), std::size_t{0}));
    if (total == 0.0) fail(ErrorKind::EmptyInput, "weighted_average: supports sum to zero");
    WeightedMetrics w;
    for (std::size_t i = 0; i < per_class.size(); ++i) {
        const double s = static_cast<double>(supports[i]);
        w.precision += s * per_class[i].precision;
        w.recall += s * per_class[i].recall;
        w.f1 += s * per_class[i].f1;
    }
    w.precision /= total;
    w.recall /= total;
    w.f1 /= total;
    return w;
}

std::vector<PrPoint> pr_curve(std::span<const double> scores, std::span<const bool> positive) {
    if (scores.size() != positive.size()) fail(ErrorKind::InvalidArgument, "pr_curve: scores and labels differ in length");
    const auto n_pos = static_cast<std::size_t>(std::count(positive.begin(), positive.end(), true));
    if (n_pos == 0) fail(ErrorKind::UndefinedCurve, "pr_curve: no positive samples");

    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

    std::vector<PrPoint> curve{{0.0, 1.0}};
    std::size_t tp = 0, seen = 0;
    for (std::size_t i = 0; i < order.size();) {
        const double s = scores[order[i]];
        while (i < order.size() && scores[order[i]] == s) {
            tp += positive[order[i]];
            ++seen;
            ++i;
        }
        curve.push_back({static_cast<double>(tp) / static_cast<double>(n_pos), static_cast<double>(tp) / static_cast<double>(seen)});
    }
    return curve;
}

double auprc(std::span<const PrPoint> curve) {
    double area = 0.0;
    for (std::size_t i = 1; i < curve.size(); ++i) area += (curve[i].recall - curve[i - 1].recall) * curve[i].precision;
    return area;
}

EvalReport evaluate_predictions(std::span<const float> probabilities, std::span<const std::size_t> truth,
                                const std::vector<std::string>& label_set, const std::string& model_name) {
    const std::size_t k = label_set.size(), n = truth.size();
    if (n == 0) fail(ErrorKind::EmptyInput, "evaluate: empty test set");
    if (probabilities.size() != n * k) fail(ErrorKind::Shape, "evaluate: probability matrix does not match N x K");

    std::vector<std::size_t> pred(n);
    for (std::size_t i = 0; i < n; ++i) {
        const float* row = probabilities.data() + i * k;
        pred[i] = static_cast<std::size_t>(std::max_element(row, row + k) - row);
    }

    EvalReport r;
    r.model = model_name;
    r.samples = n;
    r.confusion = confusion(truth, pred, k);
    r.confusion.label_set = label_set;
    r.accuracy = accuracy(r.confusion);

    std::vector<ClassMetrics> metrics;
    std::vector<std::size_t> supports;
    for (std::size_t c = 0; c < k; ++c) {
        const auto m = precision_recall_f1(r.confusion, c);
        ClassReport cr;
        cr.family = label_set[c];
        cr.support = r.confusion.support(c);
        cr.accuracy = m.recall;
        cr.precision = m.precision;
        cr.recall = m.recall;
        cr.f1 = m.f1;
        cr.degenerate = m.degenerate;
        cr.auprc = std::numeric_limits<double>::quiet_NaN();
        if (cr.support > 0) {
            std::vector<double> scores(n);
            // std::vector<bool> is not contiguous, so the flags live in a plain array.
            std::unique_ptr<bool[]> flags(new bool[n]);
            for (std::size_t i = 0; i < n; ++i) {
                scores[i] = probabilities[i * k + c];
                flags[i] = truth[i] == c;
            }
            cr.pr_curve = pr_curve(scores, std::span<const bool>(flags.get(), n));
            cr.auprc = auprc(cr.pr_curve);
        }
        metrics.push_back(m);
        supports.push_back(cr.support);
        r.per_class.push_back(std::move(cr));
    }
    r.weighted = weighted_average(metrics, supports);
    return r;
}

namespace {

nlohmann::ordered_json number_or_null(double v) { return std::isnan(v) ? nlohmann::ordered_json(nullptr) : nlohmann::ordered_json(v); }

std::string fixed(double v, int digits = 3) {
    if (std::isnan(v)) return "n/a";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

std::string xml_escape(const std::string& s) {
    std::string out;
    for (char ch : s) {
        switch (ch) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            default: out += ch;
        }
    }
    return out;
}

}  // namespace

nlohmann::ordered_json EvalReport::to_json() const {
    nlohmann::ordered_json j;
    j["model"] = model;
    j["samples"] = samples;
    j["accuracy"] = accuracy;
    j["weighted"] = {{"precision", weighted.precision}, {"recall", weighted.recall}, {"f1", weighted.f1}};
    auto& rows = j["per_class"] = nlohmann::ordered_json::array();
    for (const auto& c : per_class) {
        nlohmann::ordered_json row;
        row["family"] = c.family;
        row["support"] = c.support;
        row["accuracy"] = c.accuracy;
        row["precision"] = c.precision;
        row["recall"] = c.recall;
        row["f1"] = c.f1;
        row["degenerate"] = c.degenerate;
        row["auprc"] = number_or_null(c.auprc);
        auto& pts = row["pr_curve"] = nlohmann::ordered_json::array();
        for (const auto& p : c.pr_curve) pts.push_back({p.recall, p.precision});
        rows.push_back(std::move(row));
    }
    j["label_set"] = confusion.label_set;
    auto& cm = j["confusion"] = nlohmann::ordered_json::array();
    for (std::size_t t = 0; t < confusion.k; ++t) {
        std::vector<std::size_t> row(confusion.counts.begin() + static_cast<std::ptrdiff_t>(t * confusion.k),
                                     confusion.counts.begin() + static_cast<std::ptrdiff_t>((t + 1) * confusion.k));
        cm.push_back(row);
    }
    return j;
}

std::string EvalReport::to_table() const {
    std::size_t width = 6;
    for (const auto& c : per_class) width = std::max(width, c.family.size());
    auto pad = [](std::string s, std::size_t w) {
        s.resize(std::max(s.size(), w), ' ');
        return s;
    };
    std::ostringstream out;
    out << pad("Family", width) << "  Acc.   Pre.   Rec.   F1     AUPRC  Support\n";
    for (const auto& c : per_class) {
        out << pad(c.family, width) << "  " << fixed(c.accuracy) << "  " << fixed(c.precision) << "  " << fixed(c.recall)
            << "  " << fixed(c.f1) << "  " << pad(fixed(c.auprc), 5) << "  " << c.support << (c.degenerate ? "  (degenerate)" : "")
            << '\n';
    }
    out << pad("Overall", width) << "  " << fixed(accuracy) << "  " << fixed(weighted.precision) << "  "
        << fixed(weighted.recall) << "  " << fixed(weighted.f1) << "  " << pad("", 5) << "  " << samples << '\n';
    return out.str();
}

std::string EvalReport::pr_curves_csv() const {
    std::ostringstream out;
    out.precision(17);
    out << "class,recall,precision\n";
    for (const auto& c : per_class) {
        for (const auto& p : c.pr_curve) out << c.family << ',' << p.recall << ',' << p.precision << '\n';
    }
    return out.str();
}

std::string EvalReport::pr_curves_svg() const {
    static const char* palette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
                                    "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};
    constexpr double left = 60, top = 30, plot = 400;
    const double legend_x = left + plot + 20;
    const double height = std::max(plot + 90, top + 20.0 * static_cast<double>(per_class.size()) + 40);
    std::ostringstream out;
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << legend_x + 260 << "\" height=\"" << height << "\">\n";
    out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    out << "<text x=\"" << left << "\" y=\"18\" font-family=\"sans-serif\" font-size=\"14\">One-vs-rest precision-recall curves"
        << (model.empty() ? "" : " (" + xml_escape(model) + ")") << "</text>\n";
    out << "<rect x=\"" << left << "\" y=\"" << top << "\" width=\"" << plot << "\" height=\"" << plot
        << "\" fill=\"none\" stroke=\"black\"/>\n";
    for (int i = 0; i <= 5; ++i) {
        const double f = i / 5.0;
        out << "<text x=\"" << left + f * plot << "\" y=\"" << top + plot + 16
            << "\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"middle\">" << fixed(f, 1) << "</text>\n";
        out << "<text x=\"" << left - 6 << "\" y=\"" << top + plot - f * plot + 4
            << "\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"end\">" << fixed(f, 1) << "</text>\n";
    }
    out << "<text x=\"" << left + plot / 2 << "\" y=\"" << top + plot + 36
        << "\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"middle\">Recall</text>\n";
    out << "<text x=\"16\" y=\"" << top + plot / 2 << "\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"middle\" "
        << "transform=\"rotate(-90 16 " << top + plot / 2 << ")\">Precision</text>\n";
    for (std::size_t c = 0; c < per_class.size(); ++c) {
        const auto& cls = per_class[c];
        const char* colour = palette[c % 10];
        if (!cls.pr_curve.empty()) {
            out << "<polyline fill=\"none\" stroke=\"" << colour << "\" stroke-width=\"1.5\" points=\"";
            // Step rendering: precision holds until recall advances.
            for (std::size_t i = 0; i < cls.pr_curve.size(); ++i) {
                const auto& p = cls.pr_curve[i];
                if (i > 0) out << ' ' << fixed(left + p.recall * plot, 2) << ',' << fixed(top + plot - cls.pr_curve[i - 1].precision * plot, 2);
                out << ' ' << fixed(left + p.recall * plot, 2) << ',' << fixed(top + plot - p.precision * plot, 2);
            }
            out << "\"/>\n";
        }
        const double y = top + 14 + 20.0 * static_cast<double>(c);
        out << "<line x1=\"" << legend_x << "\" y1=\"" << y - 4 << "\" x2=\"" << legend_x + 20 << "\" y2=\"" << y - 4
            << "\" stroke=\"" << colour << "\" stroke-width=\"2\"/>\n";
        out << "<text x=\"" << legend_x + 26 << "\" y=\"" << y << "\" font-family=\"sans-serif\" font-size=\"12\">"
            << xml_escape(cls.family) << " (AUPRC = " << fixed(cls.auprc) << ")</text>\n";
    }
    out << "</svg>\n";
    return out.str();
}

}  // namespace beacon
