#ifndef PEERNET_METRICS_HPP
#define PEERNET_METRICS_HPP

#include <cstddef>
#include <span>

namespace peernet::metrics {

struct ConfusionCounts {
    std::size_t tp = 0;
    std::size_t fp = 0;
    std::size_t tn = 0;
    std::size_t fn = 0;

    std::size_t total() const { return tp + fp + tn + fn; }
};

struct ClassificationMetrics {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    double accuracy = 0.0;
    // A zero denominator reports the metric as 0 and raises the flag.
    bool precision_undefined = false;
    bool recall_undefined = false;
    ConfusionCounts counts;
};

ConfusionCounts confusion(std::span<const int> predictions, std::span<const int> labels);

ClassificationMetrics classification_metrics(const ConfusionCounts& counts);
ClassificationMetrics classification_metrics(std::span<const int> predictions, std::span<const int> labels);

double mae(std::span<const double> predictions, std::span<const double> targets);

/// Rank-based (Mann–Whitney) AUC with ties counted as one half. Throws
/// Error(data, "AUC undefined ...") when only one class is present.
double auc(std::span<const double> scores, std::span<const int> labels);

} // namespace peernet::metrics

#endif // PEERNET_METRICS_HPP
