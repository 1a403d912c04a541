#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

namespace beacon {

// Rows are true classes, columns predicted classes.
struct ConfusionMatrix {
    std::size_t k = 0;
    std::vector<std::size_t> counts;  // k * k, row-major
    std::vector<std::string> label_set;

    std::size_t at(std::size_t t, std::size_t p) const { return counts[t * k + p]; }
    std::size_t total() const;
    std::size_t support(std::size_t c) const;    // row sum
    std::size_t predicted(std::size_t c) const;  // column sum
};

ConfusionMatrix confusion(std::span<const std::size_t> truth, std::span<const std::size_t> pred, std::size_t k);

double accuracy(const ConfusionMatrix& cm);

struct ClassMetrics {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    bool degenerate = false;  // some denominator was zero and the metric was set to 0
};

ClassMetrics precision_recall_f1(const ConfusionMatrix& cm, std::size_t c);

struct WeightedMetrics {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

WeightedMetrics weighted_average(std::span<const ClassMetrics> per_class, std::span<const std::size_t> supports);

struct PrPoint {
    double recall;
    double precision;
};

// Descending-score sweep, one point per distinct score, preceded by a (0, 1) anchor.
std::vector<PrPoint> pr_curve(std::span<const double> scores, std::span<const bool> positive);

// Step integral: sum of (recall delta) * precision over consecutive points.
double auprc(std::span<const PrPoint> curve);

struct ClassReport {
    std::string family;
    std::size_t support = 0;
    double accuracy = 0.0;  // per-class accuracy: correct predictions among this family's samples
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    bool degenerate = false;
    double auprc = 0.0;  // NaN when the family is absent from the evaluated set
    std::vector<PrPoint> pr_curve;
};

struct EvalReport {
    std::string model;
    std::size_t samples = 0;
    double accuracy = 0.0;
    WeightedMetrics weighted;
    std::vector<ClassReport> per_class;
    ConfusionMatrix confusion;

    nlohmann::ordered_json to_json() const;
    std::string to_table() const;
    std::string pr_curves_csv() const;
    std::string pr_curves_svg() const;
};

// probabilities: N x K row-major; predictions are row argmax.
EvalReport evaluate_predictions(std::span<const float> probabilities, std::span<const std::size_t> truth,
                                const std::vector<std::string>& label_set, const std::string& model_name = "");

}  // namespace beacon
