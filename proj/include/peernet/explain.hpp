#ifndef PEERNET_EXPLAIN_HPP
#define PEERNET_EXPLAIN_HPP

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "peernet/data.hpp"
#include "peernet/gat.hpp"
#include "peernet/gradcheck.hpp"

namespace peernet::explain {

using data::Index;
using data::NodePair;

/// Union of the `hops`-neighbourhoods of u and v, induced.
struct Subgraph {
    data::Graph graph;
    std::vector<Index> nodes;       // local -> global, sorted
    std::vector<NodePair> edges;    // local undirected edges, self-loops excluded
    Index u = 0;                    // local ids of the explained pair
    Index v = 0;

    Index local(Index global) const;  // -1 when absent
};

Subgraph extract_subgraph(const data::Graph& graph, Index u, Index v, int hops);

struct ExplainConfig {
    int epochs = 100;
    double learning_rate = 0.01;
    double size_edge = 0.005;
    double size_feature = 0.1;
    double entropy = 0.1;
    int hops = 3;
    std::size_t top_k = 10;
    std::uint64_t seed = 0;
};

/// Logits of the edge mask (one per subgraph edge) and the global feature
/// mask (one per column). Masks are their logistic images.
struct MaskParams {
    Eigen::VectorXd edge;
    Eigen::VectorXd feature;

    Eigen::VectorXd edge_mask() const;
    Eigen::VectorXd feature_mask() const;
};

/// Masked forward context for one explained pair.
class MaskedLink {
public:
    MaskedLink(const gat::GatModel<double>& model, const Eigen::MatrixXd& features, Subgraph sub);

    const Subgraph& subgraph() const { return sub_; }
    Index edge_count() const { return static_cast<Index>(sub_.edges.size()); }
    Index feature_count() const { return x_.cols(); }

    /// logistic(z_u · z_v) with the given masks (feature mask scales input
    /// columns, edge mask scales neighbour messages; self-loops unmasked).
    double score(const Eigen::VectorXd& edge_mask, const Eigen::VectorXd& feature_mask) const;

    struct Objective {
        double loss = 0.0;
        double score = 0.0;
        Eigen::VectorXd d_edge;     // w.r.t. edge logits
        Eigen::VectorXd d_feature;  // w.r.t. feature logits
    };

    /// BCE to `target` plus size and mean element-wise entropy terms, with its
    /// analytic gradient in the logits.
    Objective objective(const MaskParams& params, int target, const ExplainConfig& cfg) const;

    /// Same objective in long double, value only.
    long double objective_value(const Eigen::VectorXd& edge_logits, const Eigen::VectorXd& feature_logits, int target,
                                const ExplainConfig& cfg) const;

private:
    template <typename Scalar>
    gat::Vector<Scalar> entry_weights(const gat::Vector<Scalar>& edge_mask) const;

    gat::GatModel<double> model_;
    gat::GatModel<long double> model_ld_;
    Eigen::MatrixXd x_;
    Subgraph sub_;
    std::vector<Index> entry_edge_;  // adjacency entry -> subgraph edge, -1 for self-loops
};

GradCheckReport mask_grad_check(const MaskedLink& link, const MaskParams& params, int target,
                                const ExplainConfig& cfg, double delta = 1e-6, double tolerance = 1e-4);

struct WeightedEdge {
    Index a = 0;  // global
    Index b = 0;
    double weight = 0.0;
};

struct WeightedFeature {
    Index column = 0;
    std::string name;
    double weight = 0.0;
};

struct Explanation {
    Index u = 0;
    Index v = 0;
    int predicted = 0;
    double full_score = 0.0;
    double masked_score = 0.0;
    double fidelity = 0.0;
    std::size_t shared_neighbors = 0;
    bool warning = false;  // loss still moving at the last epoch; best-so-far masks returned
    std::vector<WeightedEdge> top_edges;
    std::vector<WeightedFeature> top_features;
    Eigen::VectorXd edge_mask;
    Eigen::VectorXd feature_mask;
};

/// Common neighbours of u and v in `graph`, excluding u and v.
std::size_t shared_neighbor_count(const data::Graph& graph, Index u, Index v);

/// Learns masks preserving the model's hard prediction for (u, v). The model
/// is taken by value and never modified.
Explanation explain_link(const gat::GatModel<double>& model, const data::FeatureMatrix& features,
                         const data::Graph& graph, Index u, Index v, const ExplainConfig& cfg = {});

struct FeatureFrequency {
    std::string name;
    std::size_t count = 0;
    double frequency = 0.0;
    double mean_weight = 0.0;
};

struct ExplanationReport {
    std::size_t cases = 0;
    std::vector<FeatureFrequency> features;  // by frequency, then mean weight
    std::vector<bool> shared;                // per case: any common neighbour
};

/// Frequency of each feature among the top `k` of every explanation.
ExplanationReport explanation_report(std::span<const Explanation> explanations, std::size_t k = 3);

std::string explanation_to_json(const Explanation& e, const data::NodeTable& nodes);
Explanation explanation_from_json(const std::string& line, const data::NodeTable& nodes);
void write_report_text(std::ostream& out, const ExplanationReport& report);
void write_report_csv(std::ostream& out, const ExplanationReport& report);

/// Stable hash of every model parameter's bit pattern.
std::string model_hash(const gat::GatModel<double>& model);

} // namespace peernet::explain

#endif // PEERNET_EXPLAIN_HPP
