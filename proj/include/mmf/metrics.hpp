#pragma once

#include <span>
#include <string>
#include <vector>

#include "mmf/common.hpp"

namespace mmf {

struct Confusion {
    int64_t tp = 0, fp = 0, fn = 0, tn = 0;
    int64_t n() const { return tp + fp + fn + tn; }
};

// Prediction is positive iff score >= threshold (ties count positive).
Confusion confusion(std::span<const double> scores, std::span<const int> labels, double threshold = 0.5);

struct PointMetrics {
    double accuracy = 0, precision = 0, sensitivity = 0, f1 = 0;
    // set when the corresponding denominator was zero and 0 was reported
    bool precision_undefined = false, sensitivity_undefined = false, f1_undefined = false;
};

PointMetrics point_metrics(const Confusion& c);

// Probabilistic (Mann-Whitney) AUC: over all positive/negative pairs, the
// fraction with score_pos > score_neg, ties credited 0.5. O(n log n) via
// average ranks. Requires at least one score from each class.
double auc(std::span<const double> scores, std::span<const int> labels);

struct MetricsReport {
    double accuracy = 0, precision = 0, sensitivity = 0, f1 = 0, auc = 0;
    Confusion confusion;
    int64_t n = 0;
    bool precision_undefined = false, sensitivity_undefined = false, f1_undefined = false;

    std::string to_text() const;
    // "accuracy\tprecision\t..." single-row machine form
    std::string to_tsv_row() const;
    static std::string tsv_header();
};

MetricsReport evaluate_scores(std::span<const double> scores, std::span<const int> labels,
                              double threshold = 0.5);

struct TableEntry {
    std::string feature_extractor;  // e.g. "VGG16+LSTM"
    std::string classifier;         // e.g. "ANN"
    MetricsReport report;
};

// Aligned plain-text table: Feature Extractor | Classifier | ACC | Precision
// | Sensitivity | F1 Score | AUC, values rounded half-up to 3 decimals.
std::string report_table(const std::vector<TableEntry>& entries);
// Same rows in delimited form for machine diffing.
std::string report_table_tsv(const std::vector<TableEntry>& entries);

// Half-up rounding to 3 decimals used in the tables (0.66666 -> "0.667").
std::string format_metric(double v);

}  // namespace mmf
