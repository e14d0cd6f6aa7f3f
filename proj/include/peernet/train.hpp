#ifndef PEERNET_TRAIN_HPP
#define PEERNET_TRAIN_HPP

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "peernet/data.hpp"
#include "peernet/gat.hpp"
#include "peernet/gradcheck.hpp"
#include "peernet/rng.hpp"

namespace peernet::gat {

using data::NodePair;

struct LayerSpec {
    Index channels = 16;
    Index heads = 8;
    Combine combine = Combine::concatenate;
};

/// Default stack: F → 16×8 → 16×8 → 7 (single head). Hidden layers use ReLU,
/// the final layer is linear.
struct Architecture {
    std::vector<LayerSpec> layers{{16, 8, Combine::concatenate}, {16, 8, Combine::concatenate}, {7, 1, Combine::single}};
    double slope = 0.2;

    /// Same hidden stack with a different final width (1 for regression).
    static Architecture with_output(Index channels) {
        Architecture a;
        a.layers.back().channels = channels;
        return a;
    }
};

/// Glorot-uniform weights and attention vectors, seeded.
GatModel<double> init_model(const Architecture& arch, Index input_dim, std::uint64_t seed);

struct TrainConfig {
    double learning_rate = 0.01;
    int epochs = 200;
    int patience = 20;
    double negative_ratio = 1.0;
    double weight_decay = 5e-4;
    // Fraction of training edges drawn each epoch as supervision targets and
    // hidden from message passing for that epoch; 1 uses every edge for both.
    double target_fraction = 1.0;
    std::uint64_t seed = 0;
};

struct EpochRecord {
    int epoch = 0;
    double train_loss = 0.0;
    double validation_loss = 0.0;
};

struct TrainResult {
    GatModel<double> model;
    std::vector<EpochRecord> history;
    int best_epoch = -1;  // -1: no epoch ran, initial parameters returned
    double best_validation_loss = 0.0;
};

/// Uniform node pairs (i ≠ j) absent from `forbidden` and from each other.
/// Throws when the complement is too small to supply `count` pairs.
std::vector<NodePair> sample_non_edges(Index n, std::size_t count, const data::PairSet& forbidden, Rng& rng);

/// Link-prediction training. `graph` is the message-passing graph (training
/// edges only). Negatives avoid every split pair and everything in `exclude`.
/// Returns the parameters of the best validation epoch.
TrainResult train(const GatModel<double>& init, const Eigen::MatrixXd& features, const Graph& graph,
                  const data::EdgeSplit& split, const TrainConfig& cfg, std::span<const NodePair> exclude = {});

Eigen::MatrixXd embed(const GatModel<double>& model, const Eigen::MatrixXd& features, const Graph& graph);

/// Analytic-vs-central-difference check of every model parameter on the
/// link-prediction loss. Runs in long double. `tamper` may modify the analytic
/// gradient before comparison (fault injection in tests).
GradCheckReport grad_check(const GatModel<double>& model, const Eigen::MatrixXd& features, const Graph& graph,
                           const LinkBatch& batch, double delta = 1e-5, double tolerance = 1e-4,
                           const std::function<void(Vector<long double>&)>& tamper = {});

} // namespace peernet::gat

#endif // PEERNET_TRAIN_HPP
