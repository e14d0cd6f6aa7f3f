#include <algorithm>
#include <deque>
#include <numeric>
#include <sstream>

#include "peernet/baselines.hpp"
#include "peernet/error.hpp"

namespace peernet::baselines {

PairSamples make_pair_samples(std::span<const NodePair> pairs, std::span<const int> labels,
                              const Eigen::MatrixXd& features) {
    if (pairs.size() != labels.size()) {
        throw Error(ErrorKind::data, "pair and label counts differ");
    }
    const Index f = features.cols();
    PairSamples s;
    s.x.resize(static_cast<Index>(pairs.size()), 2 * f);
    s.y.assign(labels.begin(), labels.end());
    for (std::size_t k = 0; k < pairs.size(); ++k) {
        const auto [u, v] = pairs[k];
        if (u < 0 || v < 0 || u >= features.rows() || v >= features.rows()) {
            throw Error(ErrorKind::data, "pair references unknown node");
        }
        s.x.row(static_cast<Index>(k)).head(f) = features.row(u);
        s.x.row(static_cast<Index>(k)).tail(f) = features.row(v);
    }
    return s;
}

double gini(double neg, double pos) {
    const double total = neg + pos;
    if (total <= 0.0) {
        return 0.0;
    }
    const double p = pos / total;
    const double q = neg / total;
    return 1.0 - p * p - q * q;
}

int DecisionTree::depth() const {
    int d = 0;
    for (const auto& n : nodes) d = std::max(d, n.depth);
    return d;
}

std::size_t DecisionTree::internal_count() const {
    return static_cast<std::size_t>(std::count_if(nodes.begin(), nodes.end(), [](const TreeNode& n) { return !n.is_leaf(); }));
}

namespace {

// Running sums for one side of a candidate split.
struct Side {
    double w = 0.0;    // total weight
    double wy = 0.0;   // Σ w·y  (positive mass for gini)
    double wyy = 0.0;  // Σ w·y²
    std::size_t count = 0;

    void add(double weight, double y) {
        w += weight;
        wy += weight * y;
        wyy += weight * y * y;
        ++count;
    }
    void remove(double weight, double y) {
        w -= weight;
        wy -= weight * y;
        wyy -= weight * y * y;
        --count;
    }
    double impurity(Criterion c) const {
        if (w <= 0.0) return 0.0;
        if (c == Criterion::gini) return gini(w - wy, wy);
        const double mean = wy / w;
        return std::max(0.0, wyy / w - mean * mean);
    }
};

struct Builder {
    const Eigen::MatrixXd& x;
    std::span<const double> y;
    std::vector<double> w;
    TreeParams params;
    DecisionTree tree;

    int build(std::vector<Index>& idx, int depth) {
        Side all;
        for (Index i : idx) all.add(w[static_cast<std::size_t>(i)], y[static_cast<std::size_t>(i)]);

        TreeNode node;
        node.depth = depth;
        node.samples = idx.size();
        node.impurity = all.impurity(params.criterion);
        node.value = all.w > 0.0 ? all.wy / all.w : 0.0;
        if (params.criterion == Criterion::gini) {
            node.weight_positive = all.wy;
            node.weight_negative = all.w - all.wy;
        } else {
            node.weight_positive = all.w;
        }
        const int id = static_cast<int>(tree.nodes.size());
        tree.nodes.push_back(node);

        const auto min_leaf = static_cast<std::size_t>(std::max(1, params.min_leaf));
        if (depth >= params.max_depth || node.impurity <= 1e-12 || idx.size() < 2 * min_leaf) {
            return id;
        }

        double best_score = node.impurity - 1e-12;
        Index best_feature = -1;
        double best_threshold = 0.0;
        std::vector<Index> order(idx);
        for (Index f = 0; f < x.cols(); ++f) {
            std::sort(order.begin(), order.end(), [&](Index a, Index b) { return x(a, f) < x(b, f); });
            Side left;
            Side right = all;
            for (std::size_t k = 0; k + 1 < order.size(); ++k) {
                const Index i = order[k];
                left.add(w[static_cast<std::size_t>(i)], y[static_cast<std::size_t>(i)]);
                right.remove(w[static_cast<std::size_t>(i)], y[static_cast<std::size_t>(i)]);
                const double xv = x(i, f);
                const double xn = x(order[k + 1], f);
                if (xv == xn || left.count < min_leaf || right.count < min_leaf) {
                    continue;
                }
                const double score =
                    (left.w * left.impurity(params.criterion) + right.w * right.impurity(params.criterion)) / all.w;
                if (score < best_score) {
                    best_score = score;
                    best_feature = f;
                    best_threshold = 0.5 * (xv + xn);
                }
            }
        }
        if (best_feature < 0) {
            return id;
        }
        std::vector<Index> left_idx;
        std::vector<Index> right_idx;
        for (Index i : idx) {
            (x(i, best_feature) <= best_threshold ? left_idx : right_idx).push_back(i);
        }
        tree.nodes[static_cast<std::size_t>(id)].feature = best_feature;
        tree.nodes[static_cast<std::size_t>(id)].threshold = best_threshold;
        const int l = build(left_idx, depth + 1);
        const int r = build(right_idx, depth + 1);
        tree.nodes[static_cast<std::size_t>(id)].left = l;
        tree.nodes[static_cast<std::size_t>(id)].right = r;
        return id;
    }
};

} // namespace

DecisionTree dt_train(const Eigen::MatrixXd& x, std::span<const double> y, std::span<const double> weights,
                      const TreeParams& params) {
    if (x.rows() == 0) {
        throw Error(ErrorKind::data, "decision tree needs at least one sample");
    }
    if (static_cast<Index>(y.size()) != x.rows() || (!weights.empty() && weights.size() != y.size())) {
        throw Error(ErrorKind::data, "sample, target and weight counts differ");
    }
    if (params.max_depth < 0 || params.min_leaf < 1) {
        throw Error(ErrorKind::config, "max_depth must be >= 0 and min_leaf >= 1");
    }
    if (params.criterion == Criterion::gini) {
        for (double v : y) {
            if (v != 0.0 && v != 1.0) {
                throw Error(ErrorKind::data, "gini tree needs binary labels");
            }
        }
    }
    Builder b{x, y, {}, params, {}};
    b.w = weights.empty() ? std::vector<double>(y.size(), 1.0) : std::vector<double>(weights.begin(), weights.end());
    b.tree.feature_count = x.cols();
    b.tree.criterion = params.criterion;
    std::vector<Index> idx(y.size());
    std::iota(idx.begin(), idx.end(), 0);
    b.build(idx, 0);
    return std::move(b.tree);
}

DecisionTree dt_train(const PairSamples& samples, const TreeParams& params) {
    std::vector<double> y(samples.y.begin(), samples.y.end());
    return dt_train(samples.x, y, {}, params);
}

std::vector<int> dt_path(const DecisionTree& tree, const Eigen::Ref<const Eigen::RowVectorXd>& sample) {
    if (sample.size() != tree.feature_count) {
        throw Error(ErrorKind::data, "sample length " + std::to_string(sample.size()) + " does not match tree input " +
                                         std::to_string(tree.feature_count));
    }
    std::vector<int> path;
    int id = 0;
    while (true) {
        path.push_back(id);
        const auto& n = tree.nodes[static_cast<std::size_t>(id)];
        if (n.is_leaf()) {
            return path;
        }
        id = sample(n.feature) <= n.threshold ? n.left : n.right;
    }
}

double dt_predict(const DecisionTree& tree, const Eigen::Ref<const Eigen::RowVectorXd>& sample) {
    return tree.nodes[static_cast<std::size_t>(dt_path(tree, sample).back())].value;
}

Eigen::VectorXd dt_predict_batch(const DecisionTree& tree, const Eigen::MatrixXd& samples) {
    Eigen::VectorXd out(samples.rows());
    for (Index r = 0; r < samples.rows(); ++r) {
        out(r) = dt_predict(tree, samples.row(r));
    }
    return out;
}

std::vector<TopSplit> dt_top_splits(const DecisionTree& tree, std::size_t k,
                                    const std::function<std::string(Index)>& feature_name) {
    std::vector<TopSplit> out;
    std::deque<int> queue{0};
    while (!queue.empty() && out.size() < k) {
        const auto& n = tree.nodes[static_cast<std::size_t>(queue.front())];
        queue.pop_front();
        if (n.is_leaf()) {
            continue;
        }
        out.push_back({feature_name(n.feature), n.feature, n.depth});
        queue.push_back(n.left);
        queue.push_back(n.right);
    }
    return out;
}

std::string dt_export_text(const DecisionTree& tree, const std::function<std::string(Index)>& feature_name) {
    std::ostringstream os;
    auto visit = [&](auto&& self, int id) -> void {
        const auto& n = tree.nodes[static_cast<std::size_t>(id)];
        os << std::string(static_cast<std::size_t>(2 * n.depth), ' ');
        if (n.is_leaf()) {
            os << "leaf value=" << n.value;
        } else {
            os << feature_name(n.feature) << " <= " << n.threshold;
        }
        os << "  samples=" << n.samples;
        if (tree.criterion == Criterion::gini) {
            os << " class=[" << n.weight_negative << ", " << n.weight_positive << "]";
        }
        os << '\n';
        if (!n.is_leaf()) {
            self(self, n.left);
            self(self, n.right);
        }
    };
    visit(visit, 0);
    return os.str();
}

std::function<std::string(Index)> pair_feature_names(const data::FeatureMatrix& fm) {
    return [&fm](Index k) {
        const Index f = fm.cols();
        return (k < f ? "src:" : "dst:") + fm.column_name(k < f ? k : k - f);
    };
}

} // namespace peernet::baselines
