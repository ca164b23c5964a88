#ifndef LORDSIG_METRICS_HPP
#define LORDSIG_METRICS_HPP

#include <span>
#include <string>
#include <vector>

namespace lordsig::eval {

// A single metric; undefined values (single-class ROCAUC, zero-variance R2)
// are reported as NaN with an explanatory warning on the report.
struct MetricValue {
    std::string name;
    double value = 0.0;
};

struct MetricReport {
    bool classification = false;
    std::vector<MetricValue> values;
    std::vector<std::string> warnings;

    double get(const std::string& name) const;
};

// accuracy, macro F1 (absent classes contribute 0), weighted F1
// (support-weighted) and ROCAUC (rank statistic with ties counted 1/2;
// one-vs-rest macro average beyond two classes). Probability rows must sum
// to 1 within 1e-6.
MetricReport classification_metrics(std::span<const int> labels,
                                    const std::vector<std::vector<double>>& probabilities);

// r2, explained_variance, mse, mae.
MetricReport regression_metrics(std::span<const double> target, std::span<const double> predicted);

// Per-seed aggregation: mean and sample standard deviation per metric.
struct MetricSummary {
    std::string name;
    std::vector<double> per_seed;
    double mean = 0.0;
    double stddev = 0.0;
};

std::vector<MetricSummary> aggregate_reports(const std::vector<MetricReport>& reports);

}  // namespace lordsig::eval

#endif
