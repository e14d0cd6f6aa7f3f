#ifndef PEERNET_GAT_HPP
#define PEERNET_GAT_HPP

// Graph attention layers with an analytic backward pass.
//
// Per head, with T = H Wᵀ (row i is W h_i) and the attention vector split as
// a = [a_self ; a_nbr]:
//
//   raw_ij = a_selfᵀ T_i + a_nbrᵀ T_j          for j in N(i)
//   e_ij   = LeakyReLU(raw_ij)
//   α_ij   = softmax_j(e_ij)                    (over N(i) only)
//   pre_i  = Σ_j α_ij w_ij T_j                  (w_ij = 1 unless an edge mask is given)
//   h'_i   = σ(pre_i)                           (heads concatenated, or a single head)
//
// Everything is templated on the scalar so the same code runs in double for
// training and in long double for finite-difference checks.

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "peernet/data.hpp"
#include "peernet/error.hpp"

namespace peernet::gat {

using data::Graph;
using Index = Eigen::Index;

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

enum class Combine { concatenate, single };
enum class Activation { identity, relu };

template <typename Scalar>
Scalar leaky_relu(Scalar x, Scalar slope) {
    return x >= Scalar(0) ? x : slope * x;
}

template <typename Scalar>
struct AttentionHead {
    Matrix<Scalar> weight;     // out × in
    Vector<Scalar> attention;  // 2·out, [self half ; neighbour half]
};

template <typename Scalar>
struct GatLayer {
    std::vector<AttentionHead<Scalar>> heads;
    Combine combine = Combine::concatenate;
    Activation activation = Activation::relu;
    Scalar slope = Scalar(0.2);

    Index in_dim() const { return heads.front().weight.cols(); }
    Index out_dim() const { return heads.front().weight.rows(); }
    Index width() const {
        return combine == Combine::concatenate ? out_dim() * static_cast<Index>(heads.size()) : out_dim();
    }
};

template <typename Scalar>
struct GatModel {
    std::vector<GatLayer<Scalar>> layers;

    Index input_dim() const { return layers.front().in_dim(); }
    Index output_dim() const { return layers.back().width(); }

    template <typename Other>
    GatModel<Other> cast() const {
        GatModel<Other> out;
        for (const auto& l : layers) {
            GatLayer<Other> nl;
            nl.combine = l.combine;
            nl.activation = l.activation;
            nl.slope = static_cast<Other>(l.slope);
            for (const auto& h : l.heads) {
                nl.heads.push_back({h.weight.template cast<Other>(), h.attention.template cast<Other>()});
            }
            out.layers.push_back(std::move(nl));
        }
        return out;
    }
};

/// Throws Error(model) unless the layer chain is consistent.
template <typename Scalar>
void validate(const GatModel<Scalar>& model) {
    if (model.layers.empty()) {
        throw Error(ErrorKind::model, "model has no layers");
    }
    Index expected_in = model.layers.front().in_dim();
    for (std::size_t l = 0; l < model.layers.size(); ++l) {
        const auto& layer = model.layers[l];
        if (layer.heads.empty()) {
            throw Error(ErrorKind::model, "layer " + std::to_string(l) + " has no heads");
        }
        if (layer.combine == Combine::single && layer.heads.size() != 1) {
            throw Error(ErrorKind::model, "layer " + std::to_string(l) + " combines a single head but has " +
                                              std::to_string(layer.heads.size()));
        }
        for (const auto& h : layer.heads) {
            if (h.weight.cols() != expected_in || h.weight.rows() != layer.out_dim() ||
                h.attention.size() != 2 * layer.out_dim()) {
                throw Error(ErrorKind::model, "layer " + std::to_string(l) + " has inconsistent head shapes");
            }
            if (!h.weight.allFinite() || !h.attention.allFinite()) {
                throw Error(ErrorKind::model, "layer " + std::to_string(l) + " has non-finite parameters");
            }
        }
        expected_in = layer.width();
    }
}

// --- per-head pieces ----------------------------------------------------------

template <typename Scalar>
struct HeadState {
    Matrix<Scalar> transformed;  // T = H Wᵀ, n × out
    Vector<Scalar> raw;          // pre-LeakyReLU logit per adjacency entry
    Vector<Scalar> logits;       // e_ij per entry
    Vector<Scalar> alpha;        // α_ij per entry
};

template <typename Scalar>
struct LayerState {
    Matrix<Scalar> input;
    std::vector<HeadState<Scalar>> heads;
    Matrix<Scalar> pre;     // before σ
    Matrix<Scalar> output;  // after σ
};

template <typename Scalar>
struct ForwardState {
    std::vector<LayerState<Scalar>> layers;

    const Matrix<Scalar>& embeddings() const { return layers.back().output; }
    /// Output of layer `l` (0-based).
    const Matrix<Scalar>& layer_output(std::size_t l) const { return layers.at(l).output; }
};

/// Fills transformed/raw/logits of `state` for one head; returns logits.
template <typename Scalar>
const Vector<Scalar>& head_logits(const AttentionHead<Scalar>& head, Scalar slope, const Matrix<Scalar>& h,
                                  const Graph& graph, HeadState<Scalar>& state) {
    if (h.cols() != head.weight.cols()) {
        throw Error(ErrorKind::model, "feature width " + std::to_string(h.cols()) + " does not match layer input " +
                                          std::to_string(head.weight.cols()));
    }
    if (h.rows() != graph.size()) {
        throw Error(ErrorKind::model, "feature rows do not match graph size");
    }
    const Index out = head.weight.rows();
    state.transformed.noalias() = h * head.weight.transpose();
    const Vector<Scalar> self_score = state.transformed * head.attention.head(out);
    const Vector<Scalar> nbr_score = state.transformed * head.attention.tail(out);
    state.raw.resize(graph.entry_count());
    state.logits.resize(graph.entry_count());
    for (Index i = 0; i < graph.size(); ++i) {
        for (Index e = graph.entry_begin(i); e < graph.entry_end(i); ++e) {
            const Scalar r = self_score(i) + nbr_score(graph.neighbor(e));
            state.raw(e) = r;
            state.logits(e) = leaky_relu(r, slope);
        }
    }
    return state.logits;
}

/// Raw attention logits e_ij for every head, one vector per head indexed by
/// adjacency entry.
template <typename Scalar>
std::vector<Vector<Scalar>> attention_logits(const GatLayer<Scalar>& layer, const Matrix<Scalar>& h,
                                             const Graph& graph) {
    std::vector<Vector<Scalar>> out;
    for (const auto& head : layer.heads) {
        HeadState<Scalar> st;
        out.push_back(head_logits(head, layer.slope, h, graph, st));
    }
    return out;
}

/// Row-wise softmax over each neighbourhood, max-shifted.
template <typename Scalar>
Vector<Scalar> attention_normalize(const Vector<Scalar>& logits, const Graph& graph) {
    using std::exp;
    Vector<Scalar> alpha(logits.size());
    for (Index i = 0; i < graph.size(); ++i) {
        const Index b = graph.entry_begin(i);
        const Index n = graph.entry_end(i) - b;
        const Scalar m = logits.segment(b, n).maxCoeff();
        Scalar sum(0);
        for (Index e = b; e < b + n; ++e) {
            alpha(e) = exp(logits(e) - m);
            sum += alpha(e);
        }
        alpha.segment(b, n) /= sum;
    }
    return alpha;
}

/// pre_i = Σ_j α_ij w_ij T_j. `edge_weights` empty means all ones.
template <typename Scalar>
Matrix<Scalar> aggregate(const Vector<Scalar>& alpha, const Matrix<Scalar>& transformed, const Graph& graph,
                         const Vector<Scalar>& edge_weights = {}) {
    Matrix<Scalar> pre = Matrix<Scalar>::Zero(transformed.rows(), transformed.cols());
    const bool weighted = edge_weights.size() > 0;
    for (Index i = 0; i < graph.size(); ++i) {
        for (Index e = graph.entry_begin(i); e < graph.entry_end(i); ++e) {
            const Scalar c = weighted ? alpha(e) * edge_weights(e) : alpha(e);
            pre.row(i) += c * transformed.row(graph.neighbor(e));
        }
    }
    return pre;
}

template <typename Scalar>
Matrix<Scalar> activate(const Matrix<Scalar>& pre, Activation act) {
    if (act == Activation::relu) {
        return pre.cwiseMax(Scalar(0));
    }
    return pre;
}

template <typename Scalar>
LayerState<Scalar> layer_forward(const GatLayer<Scalar>& layer, const Matrix<Scalar>& h, const Graph& graph,
                                 const Vector<Scalar>& edge_weights = {}) {
    if (edge_weights.size() != 0 && edge_weights.size() != graph.entry_count()) {
        throw Error(ErrorKind::model, "edge weight count does not match graph entries");
    }
    LayerState<Scalar> st;
    st.input = h;
    st.pre.resize(h.rows(), layer.width());
    const Index out = layer.out_dim();
    st.heads.resize(layer.heads.size());
    for (std::size_t k = 0; k < layer.heads.size(); ++k) {
        auto& hs = st.heads[k];
        head_logits(layer.heads[k], layer.slope, h, graph, hs);
        hs.alpha = attention_normalize(hs.logits, graph);
        st.pre.middleCols(static_cast<Index>(k) * out, out) = aggregate(hs.alpha, hs.transformed, graph, edge_weights);
    }
    st.output = activate(st.pre, layer.activation);
    return st;
}

template <typename Scalar>
ForwardState<Scalar> forward(const GatModel<Scalar>& model, const Matrix<Scalar>& features, const Graph& graph,
                             const Vector<Scalar>& edge_weights = {}) {
    if (model.layers.empty()) {
        throw Error(ErrorKind::model, "model has no layers");
    }
    if (features.cols() != model.input_dim()) {
        throw Error(ErrorKind::model, "feature width " + std::to_string(features.cols()) +
                                          " does not match model input " + std::to_string(model.input_dim()));
    }
    ForwardState<Scalar> st;
    st.layers.reserve(model.layers.size());
    const Matrix<Scalar>* h = &features;
    for (const auto& layer : model.layers) {
        st.layers.push_back(layer_forward(layer, *h, graph, edge_weights));
        h = &st.layers.back().output;
    }
    return st;
}

// --- link decoding and loss -----------------------------------------------------

template <typename Scalar>
Scalar logistic(Scalar x) {
    using std::exp;
    return x >= Scalar(0) ? Scalar(1) / (Scalar(1) + exp(-x)) : exp(x) / (Scalar(1) + exp(x));
}

/// ŷ = logistic(z_i · z_j).
template <typename DerivedA, typename DerivedB>
typename DerivedA::Scalar link_score(const Eigen::MatrixBase<DerivedA>& zi, const Eigen::MatrixBase<DerivedB>& zj) {
    return logistic(zi.dot(zj));
}

inline constexpr double kProbClamp = 1e-7;

/// Mean binary cross-entropy with probabilities clamped to [ε, 1−ε].
template <typename Scalar>
Scalar bce_loss(const std::vector<int>& labels, const Vector<Scalar>& probs) {
    using std::log;
    if (labels.empty()) {
        throw Error(ErrorKind::data, "empty batch");
    }
    if (static_cast<Index>(labels.size()) != probs.size()) {
        throw Error(ErrorKind::data, "label and prediction counts differ");
    }
    const Scalar eps(kProbClamp);
    Scalar total(0);
    for (std::size_t k = 0; k < labels.size(); ++k) {
        const Scalar p = std::clamp(probs(static_cast<Index>(k)), eps, Scalar(1) - eps);
        total += labels[k] == 1 ? log(p) : log(Scalar(1) - p);
    }
    return -total / static_cast<Scalar>(labels.size());
}

struct LinkBatch {
    std::vector<data::NodePair> pairs;
    std::vector<int> labels;

    std::size_t size() const { return pairs.size(); }
    void add(data::NodePair p, int label) {
        pairs.push_back(p);
        labels.push_back(label);
    }
};

template <typename Scalar>
Vector<Scalar> link_probabilities(const Matrix<Scalar>& z, const LinkBatch& batch) {
    Vector<Scalar> p(static_cast<Index>(batch.size()));
    for (std::size_t k = 0; k < batch.size(); ++k) {
        const auto [i, j] = batch.pairs[k];
        p(static_cast<Index>(k)) = link_score(z.row(i), z.row(j));
    }
    return p;
}

template <typename Scalar>
struct LossGrad {
    Scalar loss;
    Matrix<Scalar> d_embeddings;
};

/// BCE over the batch and its gradient with respect to the embeddings. The
/// gradient is that of the clamped loss, so it vanishes where ŷ is clamped.
template <typename Scalar>
LossGrad<Scalar> link_loss(const Matrix<Scalar>& z, const LinkBatch& batch) {
    const Vector<Scalar> p = link_probabilities(z, batch);
    LossGrad<Scalar> out{bce_loss(batch.labels, p), Matrix<Scalar>::Zero(z.rows(), z.cols())};
    const Scalar eps(kProbClamp);
    const Scalar inv_n = Scalar(1) / static_cast<Scalar>(batch.size());
    for (std::size_t k = 0; k < batch.size(); ++k) {
        const Scalar pk = p(static_cast<Index>(k));
        if (pk < eps || pk > Scalar(1) - eps) {
            continue;
        }
        const Scalar g = (pk - static_cast<Scalar>(batch.labels[k])) * inv_n;
        const auto [i, j] = batch.pairs[k];
        const auto zi = z.row(i).eval();
        out.d_embeddings.row(i) += g * z.row(j);
        out.d_embeddings.row(j) += g * zi;
    }
    return out;
}

// --- backward -------------------------------------------------------------------

template <typename Scalar>
struct Gradients {
    GatModel<Scalar> params;       // same shapes as the model
    Matrix<Scalar> features;       // ∂L/∂X
    Vector<Scalar> edge_weights;   // ∂L/∂w per adjacency entry, summed over layers and heads
};

/// Backpropagates ∂L/∂(final output) through every layer, including the
/// softmax Jacobian and the LeakyReLU inside the attention logits.
template <typename Scalar>
Gradients<Scalar> backward(const GatModel<Scalar>& model, const ForwardState<Scalar>& state, const Graph& graph,
                           const Matrix<Scalar>& d_output, const Vector<Scalar>& edge_weights = {}) {
    Gradients<Scalar> grads;
    grads.params = model;
    grads.edge_weights = Vector<Scalar>::Zero(graph.entry_count());
    const bool weighted = edge_weights.size() > 0;

    Matrix<Scalar> d_out = d_output;
    for (std::size_t li = model.layers.size(); li-- > 0;) {
        const auto& layer = model.layers[li];
        const auto& ls = state.layers[li];
        auto& glayer = grads.params.layers[li];

        Matrix<Scalar> d_pre = d_out;
        if (layer.activation == Activation::relu) {
            d_pre = (ls.pre.array() > Scalar(0)).select(d_out, Scalar(0));
        }

        const Index out = layer.out_dim();
        Matrix<Scalar> d_in = Matrix<Scalar>::Zero(ls.input.rows(), ls.input.cols());
        for (std::size_t k = 0; k < layer.heads.size(); ++k) {
            const auto& head = layer.heads[k];
            const auto& hs = ls.heads[k];
            const auto dp = d_pre.middleCols(static_cast<Index>(k) * out, out);

            Matrix<Scalar> d_t = Matrix<Scalar>::Zero(hs.transformed.rows(), out);
            Vector<Scalar> d_self = Vector<Scalar>::Zero(graph.size());
            Vector<Scalar> d_nbr = Vector<Scalar>::Zero(graph.size());
            std::vector<Scalar> d_alpha;
            for (Index i = 0; i < graph.size(); ++i) {
                const Index b = graph.entry_begin(i);
                const Index n = graph.entry_end(i) - b;
                d_alpha.assign(static_cast<std::size_t>(n), Scalar(0));
                Scalar weighted_sum(0);
                for (Index e = b; e < b + n; ++e) {
                    const Index j = graph.neighbor(e);
                    const Scalar w = weighted ? edge_weights(e) : Scalar(1);
                    const Scalar dot = dp.row(i).dot(hs.transformed.row(j));
                    d_t.row(j) += hs.alpha(e) * w * dp.row(i);
                    grads.edge_weights(e) += hs.alpha(e) * dot;
                    d_alpha[static_cast<std::size_t>(e - b)] = w * dot;
                    weighted_sum += hs.alpha(e) * w * dot;
                }
                for (Index e = b; e < b + n; ++e) {
                    const Scalar d_logit = hs.alpha(e) * (d_alpha[static_cast<std::size_t>(e - b)] - weighted_sum);
                    const Scalar d_raw = hs.raw(e) >= Scalar(0) ? d_logit : layer.slope * d_logit;
                    d_self(i) += d_raw;
                    d_nbr(graph.neighbor(e)) += d_raw;
                }
            }
            d_t.noalias() += d_self * head.attention.head(out).transpose();
            d_t.noalias() += d_nbr * head.attention.tail(out).transpose();

            auto& ghead = glayer.heads[k];
            ghead.attention.head(out).noalias() = hs.transformed.transpose() * d_self;
            ghead.attention.tail(out).noalias() = hs.transformed.transpose() * d_nbr;
            ghead.weight.noalias() = d_t.transpose() * ls.input;
            d_in.noalias() += d_t * head.weight;
        }
        d_out = std::move(d_in);
    }
    grads.features = std::move(d_out);
    return grads;
}

// --- flat parameter views ---------------------------------------------------------

template <typename Scalar>
Index parameter_count(const GatModel<Scalar>& model) {
    Index n = 0;
    for (const auto& l : model.layers) {
        for (const auto& h : l.heads) {
            n += h.weight.size() + h.attention.size();
        }
    }
    return n;
}

template <typename Scalar>
Vector<Scalar> flatten(const GatModel<Scalar>& model) {
    Vector<Scalar> v(parameter_count(model));
    Index o = 0;
    for (const auto& l : model.layers) {
        for (const auto& h : l.heads) {
            v.segment(o, h.weight.size()) = h.weight.reshaped();
            o += h.weight.size();
            v.segment(o, h.attention.size()) = h.attention;
            o += h.attention.size();
        }
    }
    return v;
}

template <typename Scalar>
void unflatten(GatModel<Scalar>& model, const Vector<Scalar>& v) {
    if (v.size() != parameter_count(model)) {
        throw Error(ErrorKind::model, "parameter vector has wrong length");
    }
    Index o = 0;
    for (auto& l : model.layers) {
        for (auto& h : l.heads) {
            h.weight.reshaped() = v.segment(o, h.weight.size());
            o += h.weight.size();
            h.attention = v.segment(o, h.attention.size());
            o += h.attention.size();
        }
    }
}

/// Readable name of flat parameter `index`, e.g. "layer2.head5.W[3,17]".
template <typename Scalar>
std::string parameter_name(const GatModel<Scalar>& model, Index index) {
    Index o = 0;
    for (std::size_t li = 0; li < model.layers.size(); ++li) {
        const auto& l = model.layers[li];
        for (std::size_t k = 0; k < l.heads.size(); ++k) {
            const auto& h = l.heads[k];
            const std::string prefix = "layer" + std::to_string(li + 1) + ".head" + std::to_string(k + 1);
            if (index < o + h.weight.size()) {
                const Index local = index - o;
                const Index r = local % h.weight.rows();
                const Index c = local / h.weight.rows();
                return prefix + ".W[" + std::to_string(r) + "," + std::to_string(c) + "]";
            }
            o += h.weight.size();
            if (index < o + h.attention.size()) {
                return prefix + ".a[" + std::to_string(index - o) + "]";
            }
            o += h.attention.size();
        }
    }
    throw Error(ErrorKind::model, "parameter index out of range");
}

} // namespace peernet::gat

#endif // PEERNET_GAT_HPP
