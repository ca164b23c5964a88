#include "lordsig/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace lordsig::eval {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Rank-statistic AUC with midranks for ties.
double binary_auc(std::span<const double> scores, std::span<const char> positive) {
    std::vector<std::size_t> order(scores.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
    std::size_t n_pos = 0, n_neg = 0;
    double rank_sum = 0.0;
    std::size_t i = 0;
    while (i < order.size()) {
        std::size_t j = i;
        while (j + 1 < order.size() && scores[order[j + 1]] == scores[order[i]]) ++j;
        const double midrank = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j + 1));
        for (std::size_t k = i; k <= j; ++k)
            if (positive[order[k]]) rank_sum += midrank;
        i = j + 1;
    }
    for (std::size_t k = 0; k < positive.size(); ++k) (positive[k] ? n_pos : n_neg) += 1;
    if (n_pos == 0 || n_neg == 0) return kNaN;
    return (rank_sum - static_cast<double>(n_pos) * (static_cast<double>(n_pos) + 1.0) / 2.0) /
           (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

}  // namespace

double MetricReport::get(const std::string& name) const {
    for (const auto& m : values)
        if (m.name == name) return m.value;
    throw std::out_of_range("MetricReport: no metric named '" + name + "'");
}

MetricReport classification_metrics(std::span<const int> labels,
                                    const std::vector<std::vector<double>>& probabilities) {
    if (labels.size() != probabilities.size() || labels.empty())
        throw std::invalid_argument("classification_metrics: size mismatch or empty input");
    const std::size_t k = probabilities.front().size();
    if (k < 2) throw std::invalid_argument("classification_metrics: need at least 2 classes");
    for (const auto& row : probabilities) {
        if (row.size() != k) throw std::invalid_argument("classification_metrics: ragged probabilities");
        double sum = 0.0;
        for (double p : row) sum += p;
        if (std::abs(sum - 1.0) > 1e-6)
            throw std::invalid_argument("classification_metrics: probability row does not sum to 1");
    }
    for (int y : labels)
        if (y < 0 || static_cast<std::size_t>(y) >= k)
            throw std::invalid_argument("classification_metrics: label out of range");

    MetricReport report;
    report.classification = true;

    std::vector<int> predicted(labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const auto& row = probabilities[i];
        predicted[i] = static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
    }

    std::size_t correct = 0;
    for (std::size_t i = 0; i < labels.size(); ++i)
        if (predicted[i] == labels[i]) ++correct;
    report.values.push_back({"accuracy", static_cast<double>(correct) / static_cast<double>(labels.size())});

    double macro_f1 = 0.0, weighted_f1 = 0.0;
    for (std::size_t c = 0; c < k; ++c) {
        std::size_t tp = 0, fp = 0, fn = 0, support = 0;
        for (std::size_t i = 0; i < labels.size(); ++i) {
            const bool truth = labels[i] == static_cast<int>(c);
            const bool pred = predicted[i] == static_cast<int>(c);
            support += truth;
            tp += truth && pred;
            fp += !truth && pred;
            fn += truth && !pred;
        }
        double f1 = 0.0;  // absent or never-matched classes contribute zero
        if (2 * tp + fp + fn > 0)
            f1 = 2.0 * static_cast<double>(tp) / static_cast<double>(2 * tp + fp + fn);
        macro_f1 += f1 / static_cast<double>(k);
        weighted_f1 += f1 * static_cast<double>(support) / static_cast<double>(labels.size());
    }
    report.values.push_back({"macro_f1", macro_f1});
    report.values.push_back({"weighted_f1", weighted_f1});

    // ROCAUC: binary uses the class-1 score; beyond two classes, one-vs-rest
    // macro over the classes for which it is defined.
    bool single_class = true;
    for (std::size_t i = 1; i < labels.size(); ++i)
        if (labels[i] != labels[0]) single_class = false;
    if (single_class) {
        report.values.push_back({"rocauc", kNaN});
        report.warnings.push_back("rocauc undefined: split contains a single class");
    } else if (k == 2) {
        std::vector<double> scores(labels.size());
        std::vector<char> positive(labels.size());
        for (std::size_t i = 0; i < labels.size(); ++i) {
            scores[i] = probabilities[i][1];
            positive[i] = labels[i] == 1;
        }
        report.values.push_back({"rocauc", binary_auc(scores, positive)});
    } else {
        double acc = 0.0;
        std::size_t defined = 0;
        for (std::size_t c = 0; c < k; ++c) {
            std::vector<double> scores(labels.size());
            std::vector<char> positive(labels.size());
            for (std::size_t i = 0; i < labels.size(); ++i) {
                scores[i] = probabilities[i][c];
                positive[i] = labels[i] == static_cast<int>(c);
            }
            const double auc = binary_auc(scores, positive);
            if (!std::isnan(auc)) {
                acc += auc;
                ++defined;
            }
        }
        report.values.push_back({"rocauc", defined > 0 ? acc / static_cast<double>(defined) : kNaN});
    }
    return report;
}

MetricReport regression_metrics(std::span<const double> target, std::span<const double> predicted) {
    if (target.size() != predicted.size() || target.size() < 2)
        throw std::invalid_argument("regression_metrics: need equal lengths >= 2");
    const double n = static_cast<double>(target.size());

    double mean = 0.0;
    for (double y : target) mean += y;
    mean /= n;

    double ss_res = 0.0, ss_tot = 0.0, mae = 0.0;
    double err_mean = 0.0;
    for (std::size_t i = 0; i < target.size(); ++i) {
        const double e = target[i] - predicted[i];
        ss_res += e * e;
        mae += std::abs(e);
        err_mean += e;
        const double d = target[i] - mean;
        ss_tot += d * d;
    }
    err_mean /= n;
    double err_var = 0.0;
    for (std::size_t i = 0; i < target.size(); ++i) {
        const double e = target[i] - predicted[i] - err_mean;
        err_var += e * e;
    }

    MetricReport report;
    report.classification = false;
    if (ss_tot > 0.0) {
        report.values.push_back({"r2", 1.0 - ss_res / ss_tot});
        report.values.push_back({"explained_variance", 1.0 - err_var / ss_tot});
    } else {
        report.values.push_back({"r2", kNaN});
        report.values.push_back({"explained_variance", kNaN});
        report.warnings.push_back("r2 undefined: target has zero variance");
    }
    report.values.push_back({"mse", ss_res / n});
    report.values.push_back({"mae", mae / n});
    return report;
}

std::vector<MetricSummary> aggregate_reports(const std::vector<MetricReport>& reports) {
    std::vector<MetricSummary> out;
    if (reports.empty()) return out;
    for (const auto& metric : reports.front().values) {
        MetricSummary s;
        s.name = metric.name;
        for (const auto& r : reports) s.per_seed.push_back(r.get(metric.name));
        double mean = 0.0;
        std::size_t defined = 0;
        for (double v : s.per_seed)
            if (!std::isnan(v)) {
                mean += v;
                ++defined;
            }
        if (defined == 0) {
            s.mean = kNaN;
            s.stddev = kNaN;
        } else {
            mean /= static_cast<double>(defined);
            double var = 0.0;
            for (double v : s.per_seed)
                if (!std::isnan(v)) var += (v - mean) * (v - mean);
            s.mean = mean;
            s.stddev = defined > 1 ? std::sqrt(var / static_cast<double>(defined - 1)) : 0.0;
        }
        out.push_back(std::move(s));
    }
    return out;
}

}  // namespace lordsig::eval
