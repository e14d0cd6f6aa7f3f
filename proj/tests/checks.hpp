#ifndef PEERNET_TESTS_CHECKS_HPP
#define PEERNET_TESTS_CHECKS_HPP

// Randomized property and oracle checks shared by the unit tests and the
// acceptance runner.

#include <cstdint>
#include <string>
#include <vector>

#include "peernet/data.hpp"
#include "peernet/gat.hpp"
#include "peernet/rng.hpp"
#include "peernet/train.hpp"

namespace peernet::checks {

using data::Index;

struct Outcome {
    bool pass = true;
    double worst = 0.0;  // largest error seen (or the measured quantity)
    std::size_t trials = 0;
    std::string detail;
};

struct Instance {
    std::vector<data::NodePair> pairs;
    data::Graph graph;
    Eigen::MatrixXd x;
    gat::GatModel<double> model;
    gat::LinkBatch batch;
};

/// Random graph on 4..max_nodes nodes, random features, a random 2-3 layer
/// multi-head model and a mixed-label link batch.
Instance random_instance(Rng& rng, int max_nodes = 20);

/// Shortest-path hop counts from `source` (-1 when unreachable).
std::vector<int> hop_distances(const data::Graph& graph, Index source);

// gradients
Outcome gat_gradients(int instances, std::uint64_t seed, double tolerance = 1e-4);
Outcome mlp_gradients(int instances, std::uint64_t seed, double tolerance = 1e-4);

// attention invariants
Outcome softmax_rows(int trials, std::uint64_t seed);
Outcome receptive_field(int trials, std::uint64_t seed);
Outcome permutation_equivariance(int trials, std::uint64_t seed);

/// Widths of every layer of the default architecture on `input_dim` features.
std::vector<Index> default_widths(Index input_dim);

// oracles
Outcome logits_oracle(int trials, std::uint64_t seed);
Outcome aggregation_oracle(int trials, std::uint64_t seed);
Outcome bce_oracle(int trials, std::uint64_t seed);
Outcome gini_oracle(int trials, std::uint64_t seed);
Outcome auc_oracle(int trials, std::uint64_t seed);
Outcome threshold_oracle(int trials, std::uint64_t seed);

// explainer
struct PlantedRun {
    bool top1 = false;
    bool hash_unchanged = false;
    std::string top_feature;
};
/// One planted-feature run: labels depend on feature f0 only and the trained
/// model's first-layer weights on every other column are zeroed.
PlantedRun planted_feature_run(int run);
/// Mean edge and feature mask after fitting with a dominant size penalty.
std::pair<double, double> size_penalty_means(double lambda);

} // namespace peernet::checks

#endif // PEERNET_TESTS_CHECKS_HPP
