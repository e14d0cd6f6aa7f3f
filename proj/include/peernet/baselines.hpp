#ifndef PEERNET_BASELINES_HPP
#define PEERNET_BASELINES_HPP

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "peernet/data.hpp"
#include "peernet/gradcheck.hpp"

namespace peernet::baselines {

using data::Index;
using data::NodePair;

/// Rows are [features(src) ; features(dst)].
struct PairSamples {
    Eigen::MatrixXd x;
    std::vector<int> y;

    Index size() const { return x.rows(); }
};

PairSamples make_pair_samples(std::span<const NodePair> pairs, std::span<const int> labels,
                              const Eigen::MatrixXd& features);

// --- decision tree -------------------------------------------------------------

enum class Criterion { gini, variance };

struct TreeParams {
    int max_depth = 8;
    int min_leaf = 2;
    Criterion criterion = Criterion::gini;
};

struct TreeNode {
    Index feature = -1;       // -1 for leaves
    double threshold = 0.0;   // left branch takes x <= threshold
    int left = -1;
    int right = -1;
    int depth = 0;
    double value = 0.0;       // leaf probability (gini) or weighted mean (variance)
    double impurity = 0.0;
    double weight_negative = 0.0;  // class mass (gini); total mass in weight_positive for variance
    double weight_positive = 0.0;
    std::size_t samples = 0;

    bool is_leaf() const { return feature < 0; }
};

/// Flat array of nodes; node 0 is the root.
struct DecisionTree {
    std::vector<TreeNode> nodes;
    Index feature_count = 0;
    Criterion criterion = Criterion::gini;

    int depth() const;
    std::size_t internal_count() const;
};

/// 1 − Σ p_c² over two classes.
double gini(double weight_negative, double weight_positive);

/// Gini splits for binary labels (weights may be empty), variance reduction
/// for real targets.
DecisionTree dt_train(const Eigen::MatrixXd& x, std::span<const double> y, std::span<const double> weights,
                      const TreeParams& params);
DecisionTree dt_train(const PairSamples& samples, const TreeParams& params = {});

double dt_predict(const DecisionTree& tree, const Eigen::Ref<const Eigen::RowVectorXd>& sample);
Eigen::VectorXd dt_predict_batch(const DecisionTree& tree, const Eigen::MatrixXd& samples);
/// Node indices visited from the root to the leaf.
std::vector<int> dt_path(const DecisionTree& tree, const Eigen::Ref<const Eigen::RowVectorXd>& sample);

struct TopSplit {
    std::string feature;
    Index feature_index = -1;
    int depth = 0;
};

/// First `k` internal nodes in breadth-first order.
std::vector<TopSplit> dt_top_splits(const DecisionTree& tree, std::size_t k,
                                    const std::function<std::string(Index)>& feature_name);

/// Indented dump of splits with class distributions.
std::string dt_export_text(const DecisionTree& tree, const std::function<std::string(Index)>& feature_name);

/// Column names of a pair sample: "src:<name>" then "dst:<name>".
std::function<std::string(Index)> pair_feature_names(const data::FeatureMatrix& fm);

// --- multilayer perceptron -----------------------------------------------------

enum class MlpLoss { bce, squared_error };

/// Dense layers with ReLU hidden units and a logistic output unit.
struct MlpParams {
    std::vector<Eigen::MatrixXd> weights;  // out × in
    std::vector<Eigen::VectorXd> biases;

    Index input_dim() const { return weights.front().cols(); }
};

struct MlpConfig {
    std::vector<Index> hidden{64, 32};
    double learning_rate = 0.01;
    int epochs = 300;
    double weight_decay = 0.0;
    MlpLoss loss = MlpLoss::bce;
    std::uint64_t seed = 0;
};

MlpParams mlp_init(Index input_dim, const std::vector<Index>& hidden, std::uint64_t seed);

double mlp_predict(const MlpParams& params, const Eigen::Ref<const Eigen::RowVectorXd>& sample);
Eigen::VectorXd mlp_predict_batch(const MlpParams& params, const Eigen::MatrixXd& samples);

struct MlpLossGrad {
    double loss = 0.0;
    MlpParams grad;
};

/// Weighted mean loss (weights may be empty) and its analytic gradient.
MlpLossGrad mlp_loss_grad(const MlpParams& params, const Eigen::MatrixXd& x, std::span<const double> y,
                          std::span<const double> weights, MlpLoss loss);

Eigen::VectorXd mlp_flatten(const MlpParams& params);
void mlp_unflatten(MlpParams& params, const Eigen::VectorXd& flat);
std::string mlp_parameter_name(const MlpParams& params, Index flat_index);

/// Full-batch Adam.
MlpParams mlp_train(const Eigen::MatrixXd& x, std::span<const double> y, std::span<const double> weights,
                    const MlpConfig& cfg);
MlpParams mlp_train(const PairSamples& samples, const MlpConfig& cfg);

GradCheckReport mlp_grad_check(const MlpParams& params, const Eigen::MatrixXd& x, std::span<const double> y,
                               std::span<const double> weights, MlpLoss loss, double delta = 1e-5,
                               double tolerance = 1e-4);

} // namespace peernet::baselines

#endif // PEERNET_BASELINES_HPP
