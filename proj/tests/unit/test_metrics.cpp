#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>
#include <set>

#include <gtest/gtest.h>

#include "beacon/error.hpp"
#include "beacon/metrics.hpp"
#include "beacon/rng.hpp"

using namespace beacon;

namespace {

// Average precision by brute force: one threshold per distinct score, predicted
// positive iff score >= threshold.
double brute_force_ap(const std::vector<double>& scores, const std::vector<bool>& pos) {
    std::set<double, std::greater<>> thresholds(scores.begin(), scores.end());
    const double n_pos = static_cast<double>(std::count(pos.begin(), pos.end(), true));
    double ap = 0.0, prev_recall = 0.0;
    for (double t : thresholds) {
        double tp = 0, fp = 0;
        for (std::size_t i = 0; i < scores.size(); ++i) {
            if (scores[i] >= t) (pos[i] ? tp : fp) += 1;
        }
        const double recall = tp / n_pos, precision = tp / (tp + fp);
        ap += (recall - prev_recall) * precision;
        prev_recall = recall;
    }
    return ap;
}

ConfusionMatrix random_confusion(Rng& rng, std::size_t k) {
    ConfusionMatrix cm;
    cm.k = k;
    cm.counts.resize(k * k);
    for (auto& c : cm.counts) c = rng.below(4) == 0 ? 0 : rng.below(50);
    if (cm.total() == 0) cm.counts[0] = 1;
    return cm;
}

}  // namespace

TEST(Confusion, Examples) {
    const std::vector<std::size_t> t{0, 1, 2, 2, 1, 0};
    const auto perfect = confusion(t, t, 3);
    for (std::size_t a = 0; a < 3; ++a) {
        for (std::size_t b = 0; b < 3; ++b) EXPECT_EQ(perfect.at(a, b), a == b ? 2u : 0u);
    }
    const std::vector<std::size_t> zeros(6, 0);
    const auto col = confusion(t, zeros, 3);
    EXPECT_EQ(col.predicted(0), 6u);
    EXPECT_EQ(col.predicted(1) + col.predicted(2), 0u);

    const std::vector<std::size_t> p{0, 2, 2, 1, 1, 1};
    const auto cm = confusion(t, p, 3);
    const std::vector<std::size_t> tally{1, 1, 0,  //
                                         0, 1, 1,  //
                                         0, 1, 1};
    EXPECT_EQ(cm.counts, tally);
    EXPECT_THROW(confusion(t, std::vector<std::size_t>{0}, 3), Error);
}

TEST(Accuracy, BinaryArithmetic) {
    ConfusionMatrix cm;
    cm.k = 2;
    cm.counts = {9, 3, 3, 85};  // TP FN / FP TN
    EXPECT_NEAR(accuracy(cm), 0.94, 1e-12);
    cm.counts = {0, 0, 0, 0};
    EXPECT_THROW(accuracy(cm), Error);
}

TEST(Accuracy, RandomPredictionsNearChance) {
    Rng rng(1);
    const std::size_t n = 100000;
    std::vector<std::size_t> t(n), p(n);
    for (std::size_t i = 0; i < n; ++i) {
        t[i] = rng.below(10);
        p[i] = rng.below(10);
    }
    // Binomial standard error is about 0.00095; five of them.
    EXPECT_NEAR(accuracy(confusion(t, p, 10)), 0.1, 0.005);
}

TEST(PrecisionRecallF1, Examples) {
    ConfusionMatrix cm;
    cm.k = 2;
    cm.counts = {3, 1, 1, 0};
    const auto m = precision_recall_f1(cm, 0);
    EXPECT_NEAR(m.precision, 0.75, 1e-12);
    EXPECT_NEAR(m.recall, 0.75, 1e-12);
    EXPECT_NEAR(m.f1, 0.75, 1e-12);
    EXPECT_FALSE(m.degenerate);

    cm.k = 3;
    cm.counts = {4, 0, 0, 0, 5, 0, 0, 0, 0};
    const auto absent = precision_recall_f1(cm, 2);
    EXPECT_EQ(absent.precision, 0.0);
    EXPECT_EQ(absent.recall, 0.0);
    EXPECT_EQ(absent.f1, 0.0);
    EXPECT_TRUE(absent.degenerate);
    for (std::size_t c = 0; c < 2; ++c) {
        const auto d = precision_recall_f1(cm, c);
        EXPECT_EQ(d.precision, 1.0);
        EXPECT_EQ(d.recall, 1.0);
        EXPECT_EQ(d.f1, 1.0);
    }
}

TEST(WeightedAverage, Examples) {
    const std::vector<ClassMetrics> m{{1.0, 0.5, 0.2, false}, {0.0, 0.7, 0.4, false}};
    const std::vector<std::size_t> s91{9, 1}, equal{3, 3};
    EXPECT_NEAR(weighted_average(m, s91).precision, 0.9, 1e-12);
    EXPECT_NEAR(weighted_average(m, equal).recall, 0.6, 1e-12);
    EXPECT_NEAR(weighted_average(m, equal).f1, 0.3, 1e-12);
}

TEST(PrCurve, HandSweep) {
    const std::vector<double> scores{0.9, 0.8, 0.7, 0.6};
    const bool pos[] = {true, true, false, true};
    const auto curve = pr_curve(scores, pos);
    ASSERT_EQ(curve.size(), 5u);
    EXPECT_EQ(curve[0].recall, 0.0);
    EXPECT_EQ(curve[0].precision, 1.0);
    const double want[4][2] = {{1.0 / 3, 1.0}, {2.0 / 3, 1.0}, {2.0 / 3, 2.0 / 3}, {1.0, 0.75}};
    for (int i = 0; i < 4; ++i) {
        EXPECT_NEAR(curve[i + 1].recall, want[i][0], 1e-12);
        EXPECT_NEAR(curve[i + 1].precision, want[i][1], 1e-12);
    }
    EXPECT_NEAR(auprc(curve), 11.0 / 12.0, 1e-12);
    EXPECT_NEAR(auprc(curve), brute_force_ap(scores, {true, true, false, true}), 1e-12);
}

TEST(PrCurve, PerfectRankingAndTies) {
    const std::vector<double> scores{0.9, 0.8, 0.3, 0.1};
    const bool pos[] = {true, true, false, false};
    const auto curve = pr_curve(scores, pos);
    // Precision stays 1 until full recall; later points add no area.
    ASSERT_EQ(curve.size(), 5u);
    for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(curve[i].precision, 1.0);
    EXPECT_EQ(curve[2].recall, 1.0);
    EXPECT_EQ(auprc(curve), 1.0);

    const std::vector<double> flat(5, 0.4);
    const bool pos2[] = {true, false, false, true, false};
    const auto tied = pr_curve(flat, pos2);
    ASSERT_EQ(tied.size(), 2u);
    EXPECT_EQ(tied[1].recall, 1.0);
    EXPECT_NEAR(tied[1].precision, 0.4, 1e-12);

    const bool none[] = {false, false, false, false, false};
    try {
        pr_curve(flat, none);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::UndefinedCurve);
    }
}

TEST(PrCurve, MatchesBruteForceOnRandomScores) {
    Rng rng(2);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t n = 2 + rng.below(60);
        std::vector<double> scores(n);
        std::vector<bool> pos(n);
        std::unique_ptr<bool[]> flags(new bool[n]);
        for (std::size_t i = 0; i < n; ++i) {
            scores[i] = static_cast<double>(rng.below(8)) / 8.0;  // coarse grid forces ties
            pos[i] = flags[i] = rng.below(3) == 0;
        }
        if (std::none_of(pos.begin(), pos.end(), [](bool b) { return b; })) pos[0] = flags[0] = true;
        const auto curve = pr_curve(scores, std::span<const bool>(flags.get(), n));
        EXPECT_NEAR(auprc(curve), brute_force_ap(scores, pos), 1e-12);
        for (std::size_t i = 1; i < curve.size(); ++i) EXPECT_GE(curve[i].recall, curve[i - 1].recall);

        // Permuting samples changes nothing.
        std::vector<std::size_t> perm(n);
        std::iota(perm.begin(), perm.end(), std::size_t{0});
        rng.shuffle(perm);
        std::vector<double> s2(n);
        std::unique_ptr<bool[]> f2(new bool[n]);
        for (std::size_t i = 0; i < n; ++i) {
            s2[i] = scores[perm[i]];
            f2[i] = flags[perm[i]];
        }
        EXPECT_EQ(auprc(pr_curve(s2, std::span<const bool>(f2.get(), n))), auprc(curve));
    }
}

TEST(Auprc, RandomScoresNearPrevalence) {
    Rng rng(3);
    const std::size_t n = 20000;
    std::vector<double> scores(n);
    std::unique_ptr<bool[]> pos(new bool[n]);
    for (std::size_t i = 0; i < n; ++i) {
        scores[i] = rng.uniform();
        pos[i] = i % 2 == 0;
    }
    EXPECT_NEAR(auprc(pr_curve(scores, std::span<const bool>(pos.get(), n))), 0.5, 0.02);
}

TEST(Identities, AccuracyIsSupportWeightedRecall) {
    Rng rng(4);
    for (int trial = 0; trial < 1000; ++trial) {
        const auto cm = random_confusion(rng, 2 + rng.below(9));
        double s = 0.0;
        for (std::size_t c = 0; c < cm.k; ++c) s += static_cast<double>(cm.support(c)) * precision_recall_f1(cm, c).recall;
        EXPECT_NEAR(accuracy(cm), s / static_cast<double>(cm.total()), 1e-12);
    }
}

TEST(Identities, F1IsHarmonicMean) {
    Rng rng(5);
    for (int trial = 0; trial < 1000; ++trial) {
        const auto cm = random_confusion(rng, 2 + rng.below(5));
        for (std::size_t c = 0; c < cm.k; ++c) {
            const auto m = precision_recall_f1(cm, c);
            if (m.precision + m.recall > 0) EXPECT_NEAR(m.f1, 2 * m.precision * m.recall / (m.precision + m.recall), 1e-12);
        }
    }
}

TEST(Evaluate, PerfectAndMajorityClassifiers) {
    const std::vector<std::string> labels{"a", "b", "c"};
    const std::vector<std::size_t> truth{0, 0, 0, 0, 1, 2};
    std::vector<float> perfect(truth.size() * 3, 0.0f), majority(truth.size() * 3, 0.0f);
    for (std::size_t i = 0; i < truth.size(); ++i) {
        perfect[i * 3 + truth[i]] = 1.0f;
        majority[i * 3 + 0] = 0.8f;
        majority[i * 3 + 1] = 0.1f;
        majority[i * 3 + 2] = 0.1f;
    }
    const auto r = evaluate_predictions(perfect, truth, labels, "cnn");
    EXPECT_EQ(r.accuracy, 1.0);
    EXPECT_EQ(r.weighted.f1, 1.0);
    for (const auto& c : r.per_class) {
        EXPECT_EQ(c.f1, 1.0);
        EXPECT_EQ(c.auprc, 1.0);
    }
    const auto m = evaluate_predictions(majority, truth, labels, "cnn");
    EXPECT_NEAR(m.accuracy, 4.0 / 6.0, 1e-12);
    EXPECT_EQ(m.per_class[1].f1, 0.0);
    EXPECT_EQ(m.per_class[2].f1, 0.0);
    EXPECT_EQ(m.per_class[0].family, "a");
}

TEST(Evaluate, Renderings) {
    const std::vector<std::string> labels{"Emotet", "Zeus", "njRAT"};
    const std::vector<std::size_t> truth{0, 1, 1, 0};
    const std::vector<float> probs{0.7f, 0.2f, 0.1f, 0.3f, 0.6f, 0.1f, 0.5f, 0.4f, 0.1f, 0.6f, 0.3f, 0.1f};
    const auto r = evaluate_predictions(probs, truth, labels, "mlp");
    const auto j = r.to_json();
    EXPECT_TRUE(j["per_class"][2]["auprc"].is_null());  // njRAT absent from the test set
    EXPECT_EQ(j["samples"], 4);
    const auto table = r.to_table();
    EXPECT_NE(table.find("Family"), std::string::npos);
    EXPECT_NE(table.find("Acc."), std::string::npos);
    EXPECT_NE(table.find("Pre."), std::string::npos);
    EXPECT_NE(table.find("Rec."), std::string::npos);
    EXPECT_NE(table.find("F1"), std::string::npos);
    EXPECT_LT(table.find("Emotet"), table.find("Zeus"));
    EXPECT_EQ(r.pr_curves_csv().rfind("class,recall,precision\n", 0), 0u);
    const auto svg = r.pr_curves_svg();
    EXPECT_NE(svg.find("<svg"), std::string::npos);
    EXPECT_NE(svg.find("polyline"), std::string::npos);
    EXPECT_NE(svg.find("AUPRC"), std::string::npos);
}
