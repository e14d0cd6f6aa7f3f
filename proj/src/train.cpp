#include "peernet/train.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "peernet/optim.hpp"

namespace peernet::gat {

GatModel<double> init_model(const Architecture& arch, Index input_dim, std::uint64_t seed) {
    if (arch.layers.empty() || input_dim <= 0) {
        throw Error(ErrorKind::config, "architecture needs at least one layer and a positive input width");
    }
    Rng rng(seed);
    auto uniform = [&rng](double r) { return (2.0 * uniform01(rng) - 1.0) * r; };

    GatModel<double> model;
    Index in = input_dim;
    for (std::size_t l = 0; l < arch.layers.size(); ++l) {
        const auto& spec = arch.layers[l];
        if (spec.channels <= 0 || spec.heads <= 0) {
            throw Error(ErrorKind::config, "layer channels and heads must be positive");
        }
        if (spec.combine == Combine::single && spec.heads != 1) {
            throw Error(ErrorKind::config, "single-head combine requires exactly one head");
        }
        GatLayer<double> layer;
        layer.combine = spec.combine;
        layer.slope = arch.slope;
        layer.activation = l + 1 == arch.layers.size() ? Activation::identity : Activation::relu;
        const double rw = std::sqrt(6.0 / static_cast<double>(in + spec.channels));
        const double ra = std::sqrt(6.0 / static_cast<double>(2 * spec.channels + 1));
        for (Index k = 0; k < spec.heads; ++k) {
            AttentionHead<double> head;
            head.weight.resize(spec.channels, in);
            for (Index c = 0; c < in; ++c) {
                for (Index r = 0; r < spec.channels; ++r) {
                    head.weight(r, c) = uniform(rw);
                }
            }
            head.attention.resize(2 * spec.channels);
            for (Index r = 0; r < head.attention.size(); ++r) {
                head.attention(r) = uniform(ra);
            }
            layer.heads.push_back(std::move(head));
        }
        in = layer.width();
        model.layers.push_back(std::move(layer));
    }
    return model;
}

std::vector<NodePair> sample_non_edges(Index n, std::size_t count, const data::PairSet& forbidden, Rng& rng) {
    std::vector<NodePair> out;
    if (count == 0) {
        return out;
    }
    const double total = 0.5 * static_cast<double>(n) * static_cast<double>(n - 1);
    if (n < 2 || static_cast<double>(forbidden.size() + count) > total) {
        throw Error(ErrorKind::data, "graph too dense to sample " + std::to_string(count) + " non-edges");
    }
    data::PairSet taken;
    out.reserve(count);
    const std::size_t max_attempts = 1000 * count + 10000;
    std::size_t attempts = 0;
    while (out.size() < count) {
        if (++attempts > max_attempts) {
            throw Error(ErrorKind::data, "graph too dense to sample " + std::to_string(count) + " non-edges");
        }
        const auto i = static_cast<Index>(uniform_index(rng, static_cast<std::size_t>(n)));
        const auto j = static_cast<Index>(uniform_index(rng, static_cast<std::size_t>(n)));
        if (i == j || forbidden.contains(i, j) || taken.contains(i, j)) {
            continue;
        }
        taken.insert(i, j);
        out.push_back(data::ordered(i, j));
    }
    return out;
}

Eigen::MatrixXd embed(const GatModel<double>& model, const Eigen::MatrixXd& features, const Graph& graph) {
    return forward(model, features, graph).embeddings();
}

TrainResult train(const GatModel<double>& init, const Eigen::MatrixXd& features, const Graph& graph,
                  const data::EdgeSplit& split, const TrainConfig& cfg, std::span<const NodePair> exclude) {
    if (!(cfg.learning_rate > 0.0) || cfg.epochs < 0 || cfg.patience <= 0 || !(cfg.negative_ratio > 0.0) ||
        cfg.weight_decay < 0.0 || !(cfg.target_fraction > 0.0 && cfg.target_fraction <= 1.0)) {
        throw Error(ErrorKind::config, "invalid training configuration");
    }
    validate(init);
    if (split.train.empty()) {
        throw Error(ErrorKind::data, "training split is empty");
    }
    TrainResult result;
    result.model = init;
    result.best_validation_loss = std::numeric_limits<double>::infinity();
    if (cfg.epochs == 0) {
        return result;
    }

    data::PairSet forbidden(split.train);
    for (const auto& p : split.validation) forbidden.insert(p.first, p.second);
    for (const auto& p : split.test) forbidden.insert(p.first, p.second);
    for (const auto& p : exclude) forbidden.insert(p.first, p.second);

    const Index n = features.rows();
    Rng rng(cfg.seed);

    // Validation negatives are drawn once so the stopping criterion compares
    // like with like across epochs.
    LinkBatch val_batch;
    if (!split.validation.empty()) {
        Rng val_rng(splitmix64(cfg.seed ^ 0x76616cULL));
        const auto count = static_cast<std::size_t>(
            std::llround(cfg.negative_ratio * static_cast<double>(split.validation.size())));
        for (const auto& p : split.validation) val_batch.add(p, 1);
        for (const auto& p : sample_non_edges(n, count, forbidden, val_rng)) val_batch.add(p, 0);
    }

    GatModel<double> model = init;
    Vector<double> params = flatten(model);
    Adam<double> adam({cfg.learning_rate, 0.9, 0.999, 1e-8, cfg.weight_decay});
    int since_best = 0;

    const bool hold_out = cfg.target_fraction < 1.0;
    std::vector<NodePair> edges(split.train);

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        LinkBatch batch;
        Graph message = graph;
        std::size_t targets = edges.size();
        if (hold_out) {
            std::shuffle(edges.begin(), edges.end(), rng);
            targets = std::max<std::size_t>(
                1, static_cast<std::size_t>(std::llround(cfg.target_fraction * static_cast<double>(edges.size()))));
            message = Graph::from_pairs(n, std::span<const NodePair>(edges).subspan(targets));
        }
        for (std::size_t k = 0; k < targets; ++k) batch.add(edges[k], 1);
        const auto negatives = static_cast<std::size_t>(std::llround(cfg.negative_ratio * static_cast<double>(targets)));
        for (const auto& p : sample_non_edges(n, negatives, forbidden, rng)) batch.add(p, 0);

        const auto state = forward(model, features, message);
        const auto lg = link_loss(state.embeddings(), batch);
        if (!std::isfinite(lg.loss)) {
            throw Error(ErrorKind::numeric, "training diverged at epoch " + std::to_string(epoch));
        }
        EpochRecord rec{epoch, lg.loss, lg.loss};
        if (val_batch.size() > 0) {
            const Matrix<double> z = hold_out ? forward(model, features, graph).embeddings() : state.embeddings();
            rec.validation_loss = bce_loss(val_batch.labels, link_probabilities(z, val_batch));
        }
        result.history.push_back(rec);

        if (rec.validation_loss < result.best_validation_loss) {
            result.best_validation_loss = rec.validation_loss;
            result.best_epoch = epoch;
            result.model = model;
            since_best = 0;
        } else if (++since_best >= cfg.patience) {
            break;
        }

        const auto grads = backward(model, state, message, lg.d_embeddings);
        adam.step(params, flatten(grads.params));
        if (!params.allFinite()) {
            throw Error(ErrorKind::numeric, "training diverged at epoch " + std::to_string(epoch));
        }
        unflatten(model, params);
    }
    return result;
}

GradCheckReport grad_check(const GatModel<double>& model, const Eigen::MatrixXd& features, const Graph& graph,
                           const LinkBatch& batch, double delta, double tolerance,
                           const std::function<void(Vector<long double>&)>& tamper) {
    using LD = long double;
    const GatModel<LD> base = model.cast<LD>();
    const Matrix<LD> x = features.cast<LD>();

    const auto state = forward(base, x, graph);
    const auto lg = link_loss(state.embeddings(), batch);
    Vector<LD> analytic = flatten(backward(base, state, graph, lg.d_embeddings).params);
    if (tamper) {
        tamper(analytic);
    }

    GatModel<LD> probe_model = base;
    auto loss = [&](const Vector<LD>& theta) {
        unflatten(probe_model, theta);
        return link_loss(forward(probe_model, x, graph).embeddings(), batch).loss;
    };
    auto name = [&](Index k) { return parameter_name(base, k); };
    return check_gradients<LD>(loss, flatten(base), analytic, name, delta, tolerance);
}

} // namespace peernet::gat
