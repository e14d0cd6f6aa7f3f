#ifndef PEERNET_BENCHMARK_HPP
#define PEERNET_BENCHMARK_HPP

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "peernet/baselines.hpp"
#include "peernet/data.hpp"
#include "peernet/disambiguation.hpp"
#include "peernet/metrics.hpp"
#include "peernet/train.hpp"

namespace peernet::bench {

using data::Index;
using data::NodePair;

struct SimulateConfig {
    gat::Architecture architecture;
    gat::TrainConfig train;
    baselines::TreeParams tree;
    baselines::MlpConfig mlp;
    data::SplitRatios ratios;
    std::size_t pair_cases = 0;  // 0: one per test edge
    disambig::ResolveOptions resolve;
    double probability_cutoff = 0.5;  // DT/MLP link-existence decision
};

enum class Task { pair, existence };
std::string to_string(Task t);

struct BenchmarkRow {
    std::string model;  // "DT", "MLP", "GAT"
    Task task = Task::pair;
    metrics::ClassificationMetrics metrics;
    std::uint64_t seed = 0;
};

/// Pair cases count as positives; the prediction is positive iff the true
/// candidate was chosen.
metrics::ClassificationMetrics pair_metrics(std::span<const int> correct);

/// Threshold from validation pairs embedded the way test pairs are: each half
/// of `validation` is hidden from the graph while the other half is known.
disambig::Threshold calibrate_held_out(const gat::GatModel<double>& model, const Eigen::MatrixXd& x,
                                       std::span<const NodePair> train, std::span<const NodePair> validation,
                                       std::span<const NodePair> negatives,
                                       disambig::DistanceMetric metric = disambig::DistanceMetric::euclidean);

/// Simulated-ambiguity protocol on the confident edges: 60/20/20 split, GAT
/// trained on the training graph, DT/MLP on concatenated endpoint features
/// with balanced negatives, evaluated on identical cases.
std::vector<BenchmarkRow> simulate_benchmark(const data::FeatureMatrix& features, const data::EdgeTable& edges,
                                             const SimulateConfig& cfg, std::uint64_t seed);

void write_benchmark_csv(std::ostream& out, const std::vector<BenchmarkRow>& rows);
void write_benchmark_text(std::ostream& out, const std::vector<BenchmarkRow>& rows);

} // namespace peernet::bench

#endif // PEERNET_BENCHMARK_HPP
