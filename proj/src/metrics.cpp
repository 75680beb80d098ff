#include "mmf/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

namespace mmf {

Confusion confusion(std::span<const double> scores, std::span<const int> labels, double threshold) {
    if (scores.empty()) throw ContractError("confusion: empty input");
    if (scores.size() != labels.size()) throw ContractError("confusion: scores/labels length mismatch");
    Confusion c;
    for (size_t i = 0; i < scores.size(); ++i) {
        if (labels[i] != 0 && labels[i] != 1) throw ContractError("confusion: labels must be 0 or 1");
        const bool pred = scores[i] >= threshold;
        if (pred && labels[i] == 1) ++c.tp;
        if (pred && labels[i] == 0) ++c.fp;
        if (!pred && labels[i] == 1) ++c.fn;
        if (!pred && labels[i] == 0) ++c.tn;
    }
    return c;
}

PointMetrics point_metrics(const Confusion& c) {
    if (c.n() < 1) throw ContractError("point_metrics: empty confusion matrix");
    PointMetrics m;
    m.accuracy = static_cast<double>(c.tp + c.tn) / static_cast<double>(c.n());
    if (c.tp + c.fp > 0) {
        m.precision = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp);
    } else {
        m.precision_undefined = true;
    }
    if (c.tp + c.fn > 0) {
        m.sensitivity = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
    } else {
        m.sensitivity_undefined = true;
    }
    if (m.precision + m.sensitivity > 0) {
        // harmonic mean 2ps/(p+s), evaluated on the raw counts so integer
        // fixtures come out exact: 2tp/(2tp+fp+fn)
        m.f1 = static_cast<double>(2 * c.tp) / static_cast<double>(2 * c.tp + c.fp + c.fn);
    } else {
        m.f1_undefined = true;  // f1 = 0 by convention when p + s = 0
    }
    return m;
}

double auc(std::span<const double> scores, std::span<const int> labels) {
    if (scores.size() != labels.size()) throw ContractError("auc: scores/labels length mismatch");
    int64_t n_pos = 0, n_neg = 0;
    for (int l : labels) {
        if (l == 1) ++n_pos;
        else if (l == 0) ++n_neg;
        else throw ContractError("auc: labels must be 0 or 1");
    }
    if (n_pos == 0) throw ContractError("auc: no positive examples in input");
    if (n_neg == 0) throw ContractError("auc: no negative examples in input");

    // average ranks with 0.5 credit for ties: rank-sum Mann-Whitney statistic
    std::vector<size_t> order(scores.size());
    std::iota(order.begin(), order.end(), size_t{0});
    std::sort(order.begin(), order.end(), [&](size_t a, size_t b) { return scores[a] < scores[b]; });

    double pos_rank_sum = 0;
    size_t i = 0;
    while (i < order.size()) {
        size_t j = i;
        while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
        // 1-based ranks i+1..j averaged across the tie group
        const double avg_rank = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
        for (size_t k = i; k < j; ++k) {
            if (labels[order[k]] == 1) pos_rank_sum += avg_rank;
        }
        i = j;
    }
    const double u = pos_rank_sum - static_cast<double>(n_pos) * (static_cast<double>(n_pos) + 1) / 2.0;
    return u / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

MetricsReport evaluate_scores(std::span<const double> scores, std::span<const int> labels,
                              double threshold) {
    MetricsReport r;
    r.confusion = confusion(scores, labels, threshold);
    const PointMetrics m = point_metrics(r.confusion);
    r.accuracy = m.accuracy;
    r.precision = m.precision;
    r.sensitivity = m.sensitivity;
    r.f1 = m.f1;
    r.precision_undefined = m.precision_undefined;
    r.sensitivity_undefined = m.sensitivity_undefined;
    r.f1_undefined = m.f1_undefined;
    r.auc = auc(scores, labels);
    r.n = r.confusion.n();
    return r;
}

std::string format_metric(double v) {
    const double rounded = std::floor(v * 1000.0 + 0.5) / 1000.0;
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%.3f", rounded);
    return buf;
}

std::string MetricsReport::to_text() const {
    std::ostringstream os;
    os << "n:           " << n << "\n"
       << "accuracy:    " << format_metric(accuracy) << "\n"
       << "precision:   " << format_metric(precision) << (precision_undefined ? " (undefined)" : "") << "\n"
       << "sensitivity: " << format_metric(sensitivity) << (sensitivity_undefined ? " (undefined)" : "")
       << "\n"
       << "f1:          " << format_metric(f1) << (f1_undefined ? " (undefined)" : "") << "\n"
       << "auc:         " << format_metric(auc) << "\n"
       << "confusion:   tp=" << confusion.tp << " fp=" << confusion.fp << " fn=" << confusion.fn
       << " tn=" << confusion.tn << "\n";
    return os.str();
}

std::string MetricsReport::tsv_header() {
    return "accuracy\tprecision\tsensitivity\tf1\tauc\ttp\tfp\tfn\ttn\tn";
}

std::string MetricsReport::to_tsv_row() const {
    std::ostringstream os;
    char buf[32];
    auto full = [&](double v) {
        std::snprintf(buf, sizeof(buf), "%.17g", v);
        return std::string(buf);
    };
    os << full(accuracy) << '\t' << full(precision) << '\t' << full(sensitivity) << '\t' << full(f1)
       << '\t' << full(auc) << '\t' << confusion.tp << '\t' << confusion.fp << '\t' << confusion.fn
       << '\t' << confusion.tn << '\t' << n;
    return os.str();
}

namespace {

std::string pad(const std::string& s, size_t width) {
    std::string out = s;
    while (out.size() < width) out.push_back(' ');
    return out;
}

}  // namespace

std::string report_table(const std::vector<TableEntry>& entries) {
    if (entries.empty()) throw ContractError("report_table: need at least one entry");
    const std::vector<std::string> header{"Feature Extractor", "Classifier", "ACC",
                                          "Precision",         "Sensitivity", "F1 Score", "AUC"};
    std::vector<std::vector<std::string>> rows;
    for (const auto& e : entries) {
        rows.push_back({e.feature_extractor, e.classifier, format_metric(e.report.accuracy),
                        format_metric(e.report.precision), format_metric(e.report.sensitivity),
                        format_metric(e.report.f1), format_metric(e.report.auc)});
    }
    std::vector<size_t> widths(header.size());
    for (size_t c = 0; c < header.size(); ++c) {
        widths[c] = header[c].size();
        for (const auto& row : rows) widths[c] = std::max(widths[c], row[c].size());
    }
    std::ostringstream os;
    auto emit = [&](const std::vector<std::string>& row) {
        for (size_t c = 0; c < row.size(); ++c) {
            if (c) os << " | ";
            os << pad(row[c], widths[c]);
        }
        os << "\n";
    };
    emit(header);
    size_t total = 0;
    for (size_t c = 0; c < widths.size(); ++c) total += widths[c] + (c ? 3 : 0);
    os << std::string(total, '-') << "\n";
    for (const auto& row : rows) emit(row);
    return os.str();
}

std::string report_table_tsv(const std::vector<TableEntry>& entries) {
    if (entries.empty()) throw ContractError("report_table_tsv: need at least one entry");
    std::ostringstream os;
    os << "feature_extractor\tclassifier\tacc\tprecision\tsensitivity\tf1\tauc\n";
    for (const auto& e : entries) {
        os << e.feature_extractor << '\t' << e.classifier << '\t' << format_metric(e.report.accuracy)
           << '\t' << format_metric(e.report.precision) << '\t' << format_metric(e.report.sensitivity)
           << '\t' << format_metric(e.report.f1) << '\t' << format_metric(e.report.auc) << "\n";
    }
    return os.str();
}

}  // namespace mmf
