#ifndef PEERNET_RISK_HPP
#define PEERNET_RISK_HPP

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "peernet/baselines.hpp"
#include "peernet/data.hpp"
#include "peernet/gradcheck.hpp"
#include "peernet/train.hpp"

namespace peernet::risk {

using data::Index;

/// logistic((raw − midpoint) / scale) is the training target; the cutoff
/// applies to the raw sum.
struct ScoreScale {
    double midpoint = 7.0;
    double scale = 3.0;
    double cutoff = 7.0;
};

struct IndicatorRange {
    double min;
    double max;
};

/// Declared response ranges of the four indicator items.
const std::array<IndicatorRange, 4>& indicator_ranges();

struct RiskTarget {
    double raw = 0.0;
    double normalized = 0.5;
    bool at_risk = false;
};

/// Throws Error(data) on a wrong item count or an out-of-range response.
RiskTarget compute_suicide_score(std::span<const double> responses, const ScoreScale& scale = {});

double normalize_score(double raw, const ScoreScale& scale);
/// Inverse of normalize_score; p is clamped away from 0 and 1.
double denormalize_score(double p, const ScoreScale& scale);

/// At-risk weight #not / #at, others 1. Throws when either class is absent.
std::vector<double> oversample_weights(std::span<const int> at_risk);

struct RiskData {
    data::FeatureMatrix features;               // every node, indicators excluded
    std::vector<std::optional<RiskTarget>> targets;  // per node; empty when an indicator is missing
    std::vector<std::string> excluded;          // PIDs without a complete indicator set

    std::vector<Index> supervised() const;
};

/// Joins survey and extra attributes, preprocesses them without the
/// indicator columns and scores the indicators.
RiskData prepare_risk_data(const data::NodeTable& nodes, const data::NodeTable& risk,
                           const data::PreprocessOptions& options = {}, const ScoreScale& scale = {});

/// Throws Error(data) if any feature column derives from an indicator.
void check_no_leakage(const data::FeatureMatrix& features);

struct NodeSplit {
    std::vector<Index> train;
    std::vector<Index> validation;
    std::vector<Index> test;
};

NodeSplit split_nodes(std::span<const Index> nodes, const data::SplitRatios& ratios, std::uint64_t seed);

enum class ModelKind { gat, dt, mlp };
std::string to_string(ModelKind k);
ModelKind parse_model_kind(const std::string& s);

struct RiskConfig {
    gat::Architecture architecture = gat::Architecture::with_output(1);
    double learning_rate = 0.005;
    int epochs = 200;
    int patience = 30;
    double weight_decay = 5e-3;
    baselines::TreeParams tree{5, 15, baselines::Criterion::variance};
    baselines::MlpConfig mlp{{64, 32}, 0.005, 300, 1e-4, baselines::MlpLoss::squared_error, 0};
    ScoreScale scale;
    data::SplitRatios ratios;
};

/// [x_i ; mean of x_j over graph neighbours j ≠ i] (zeros for isolated nodes).
Eigen::MatrixXd neighbor_mean_features(const Eigen::MatrixXd& x, const data::Graph& graph);

struct RegressionBatch {
    std::vector<Index> nodes;
    std::vector<double> targets;  // normalized
    std::vector<double> weights;
};

/// Σ w_i (σ(z_i) − t_i)² / Σ w_i over the batch, and ∂/∂z.
template <typename Scalar>
std::pair<Scalar, gat::Matrix<Scalar>> regression_loss(const gat::Matrix<Scalar>& z, const RegressionBatch& batch) {
    gat::Matrix<Scalar> dz = gat::Matrix<Scalar>::Zero(z.rows(), z.cols());
    Scalar total(0), mass(0);
    for (std::size_t k = 0; k < batch.nodes.size(); ++k) mass += Scalar(batch.weights[k]);
    for (std::size_t k = 0; k < batch.nodes.size(); ++k) {
        const Index i = batch.nodes[k];
        const Scalar p = gat::logistic(z(i, 0));
        const Scalar r = p - Scalar(batch.targets[k]);
        const Scalar w = Scalar(batch.weights[k]) / mass;
        total += w * r * r;
        dz(i, 0) += Scalar(2) * w * r * p * (Scalar(1) - p);
    }
    return {total, dz};
}

struct GatRegressor {
    gat::GatModel<double> model;
    int best_epoch = -1;
    double best_validation_loss = 0.0;
};

GatRegressor train_gat_regressor(const Eigen::MatrixXd& x, const data::Graph& graph, const RegressionBatch& train,
                                 const RegressionBatch& validation, const RiskConfig& cfg, std::uint64_t seed);

GradCheckReport gat_regression_grad_check(const gat::GatModel<double>& model, const Eigen::MatrixXd& x,
                                          const data::Graph& graph, const RegressionBatch& batch,
                                          double delta = 1e-5, double tolerance = 1e-4);

/// Trains one regressor on the training nodes and returns raw-scale
/// predictions for every node.
std::vector<double> train_and_predict(ModelKind kind, const RiskData& data, const data::Graph& graph,
                                      const NodeSplit& split, const RiskConfig& cfg, std::uint64_t seed);

struct RiskEvaluation {
    double mae = 0.0;
    std::optional<double> auc;  // empty when the labels are single-class
    std::size_t count = 0;
};

RiskEvaluation evaluate_risk(std::span<const double> predictions, std::span<const double> raw_targets,
                             double cutoff = 7.0);

struct AblationRow {
    std::string model;
    std::string edge_list;
    std::string evaluation;  // "test" (held-out nodes) or "train" (in-sample)
    RiskEvaluation result;
    std::uint64_t seed = 0;
};

struct NamedGraph {
    std::string name;
    data::Graph graph;
};

/// One row per (kind, edge list, evaluation) on a node split shared by all
/// combinations.
std::vector<AblationRow> ablation_compare(const RiskData& data, std::span<const NamedGraph> edge_lists,
                                          std::span<const ModelKind> kinds, const RiskConfig& cfg,
                                          std::uint64_t seed);

void write_ablation_csv(std::ostream& out, std::span<const AblationRow> rows);
void write_ablation_text(std::ostream& out, std::span<const AblationRow> rows);

} // namespace peernet::risk

#endif // PEERNET_RISK_HPP
