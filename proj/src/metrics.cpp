#include "peernet/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "peernet/error.hpp"

namespace peernet::metrics {

ConfusionCounts confusion(std::span<const int> predictions, std::span<const int> labels) {
    if (predictions.empty()) {
        throw Error(ErrorKind::data, "classification metrics need at least one sample");
    }
    if (predictions.size() != labels.size()) {
        throw Error(ErrorKind::data, "prediction and label counts differ");
    }
    ConfusionCounts c;
    for (std::size_t k = 0; k < labels.size(); ++k) {
        const bool p = predictions[k] != 0;
        const bool y = labels[k] != 0;
        if (p && y) ++c.tp;
        else if (p) ++c.fp;
        else if (y) ++c.fn;
        else ++c.tn;
    }
    return c;
}

ClassificationMetrics classification_metrics(const ConfusionCounts& c) {
    if (c.total() == 0) {
        throw Error(ErrorKind::data, "classification metrics need at least one sample");
    }
    ClassificationMetrics m;
    m.counts = c;
    if (c.tp + c.fp == 0) {
        m.precision_undefined = true;
    } else {
        m.precision = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp);
    }
    if (c.tp + c.fn == 0) {
        m.recall_undefined = true;
    } else {
        m.recall = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
    }
    if (c.tp > 0) {
        // equal ratios give bit-identical values, so threshold ties are exact
        m.f1 = 2.0 * static_cast<double>(c.tp) / static_cast<double>(2 * c.tp + c.fp + c.fn);
    }
    m.accuracy = static_cast<double>(c.tp + c.tn) / static_cast<double>(c.total());
    return m;
}

ClassificationMetrics classification_metrics(std::span<const int> predictions, std::span<const int> labels) {
    return classification_metrics(confusion(predictions, labels));
}

double mae(std::span<const double> predictions, std::span<const double> targets) {
    if (predictions.empty()) {
        throw Error(ErrorKind::data, "MAE needs at least one sample");
    }
    if (predictions.size() != targets.size()) {
        throw Error(ErrorKind::data, "prediction and target counts differ");
    }
    double total = 0.0;
    for (std::size_t k = 0; k < predictions.size(); ++k) {
        total += std::abs(predictions[k] - targets[k]);
    }
    return total / static_cast<double>(predictions.size());
}

double auc(std::span<const double> scores, std::span<const int> labels) {
    if (scores.size() != labels.size()) {
        throw Error(ErrorKind::data, "score and label counts differ");
    }
    const auto n_pos = static_cast<std::size_t>(std::count_if(labels.begin(), labels.end(), [](int y) { return y != 0; }));
    const std::size_t n_neg = labels.size() - n_pos;
    if (n_pos == 0 || n_neg == 0) {
        throw Error(ErrorKind::data, "AUC undefined: labels contain a single class");
    }
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

    // midranks for tied runs
    double pos_rank_sum = 0.0;
    std::size_t i = 0;
    while (i < order.size()) {
        std::size_t j = i;
        while (j + 1 < order.size() && scores[order[j + 1]] == scores[order[i]]) {
            ++j;
        }
        const double rank = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t k = i; k <= j; ++k) {
            if (labels[order[k]] != 0) {
                pos_rank_sum += rank;
            }
        }
        i = j + 1;
    }
    const double np = static_cast<double>(n_pos);
    return (pos_rank_sum - np * (np + 1.0) / 2.0) / (np * static_cast<double>(n_neg));
}

} // namespace peernet::metrics
