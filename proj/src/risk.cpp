#include "peernet/risk.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <numeric>
#include <ostream>

#include "peernet/error.hpp"
#include "peernet/metrics.hpp"
#include "peernet/optim.hpp"
#include "peernet/rng.hpp"
#include "peernet/synth.hpp"

namespace peernet::risk {

const std::array<IndicatorRange, 4>& indicator_ranges() {
    static const std::array<IndicatorRange, 4> r{{{1, 4}, {1, 5}, {1, 5}, {0, 4}}};
    return r;
}

double normalize_score(double raw, const ScoreScale& scale) {
    return gat::logistic((raw - scale.midpoint) / scale.scale);
}

double denormalize_score(double p, const ScoreScale& scale) {
    const double q = std::clamp(p, 1e-12, 1.0 - 1e-12);
    return scale.midpoint + scale.scale * std::log(q / (1.0 - q));
}

RiskTarget compute_suicide_score(std::span<const double> responses, const ScoreScale& scale) {
    const auto& ranges = indicator_ranges();
    if (responses.size() != ranges.size()) {
        throw Error(ErrorKind::data, "expected 4 indicator responses, got " + std::to_string(responses.size()));
    }
    if (!(scale.scale > 0.0)) {
        throw Error(ErrorKind::config, "score scale must be positive");
    }
    double raw = 0.0;
    for (std::size_t k = 0; k < ranges.size(); ++k) {
        const double r = responses[k];
        if (!std::isfinite(r) || r < ranges[k].min || r > ranges[k].max) {
            throw Error(ErrorKind::data, "indicator " + std::to_string(k + 1) + " response out of range");
        }
        raw += r;
    }
    return {raw, normalize_score(raw, scale), raw >= scale.cutoff};
}

std::vector<double> oversample_weights(std::span<const int> at_risk) {
    const auto pos = static_cast<double>(std::count(at_risk.begin(), at_risk.end(), 1));
    const double neg = static_cast<double>(at_risk.size()) - pos;
    if (pos == 0.0) {
        throw Error(ErrorKind::data, "no at-risk nodes in the training set");
    }
    if (neg == 0.0) {
        throw Error(ErrorKind::data, "no not-at-risk nodes in the training set");
    }
    std::vector<double> w(at_risk.size(), 1.0);
    for (std::size_t k = 0; k < at_risk.size(); ++k) {
        if (at_risk[k] == 1) w[k] = neg / pos;
    }
    return w;
}

std::vector<Index> RiskData::supervised() const {
    std::vector<Index> out;
    for (std::size_t i = 0; i < targets.size(); ++i) {
        if (targets[i]) out.push_back(static_cast<Index>(i));
    }
    return out;
}

void check_no_leakage(const data::FeatureMatrix& features) {
    const auto& indicators = synth::indicator_columns();
    for (const auto& c : features.columns) {
        if (std::find(indicators.begin(), indicators.end(), c.source) != indicators.end()) {
            throw Error(ErrorKind::data, "feature column derives from indicator '" + c.source + "'");
        }
    }
}

RiskData prepare_risk_data(const data::NodeTable& nodes, const data::NodeTable& risk,
                           const data::PreprocessOptions& options, const ScoreScale& scale) {
    const auto& indicators = synth::indicator_columns();
    std::vector<Index> cols;
    for (const auto& name : indicators) {
        const auto c = risk.column_index(name);
        if (!c) {
            throw Error(ErrorKind::data, "risk table lacks indicator column '" + name + "'");
        }
        cols.push_back(*c);
    }
    const data::NodeTable joined = data::join_columns(nodes, risk);
    data::PreprocessOptions opt = options;
    opt.exclude.insert(opt.exclude.end(), indicators.begin(), indicators.end());

    RiskData out;
    out.features = data::preprocess(joined, opt);
    check_no_leakage(out.features);

    out.targets.resize(static_cast<std::size_t>(nodes.size()));
    for (Index i = 0; i < nodes.size(); ++i) {
        const auto r = risk.find(nodes.pid(i));
        std::array<double, 4> values{};
        bool complete = r.has_value();
        for (std::size_t k = 0; complete && k < cols.size(); ++k) {
            const auto& cell = risk.cell(*r, cols[k]);
            if (!cell) {
                complete = false;
            } else {
                values[k] = std::stod(*cell);
            }
        }
        if (complete) {
            out.targets[static_cast<std::size_t>(i)] = compute_suicide_score(values, scale);
        } else {
            out.excluded.push_back(nodes.pid(i));
        }
    }
    return out;
}

NodeSplit split_nodes(std::span<const Index> nodes, const data::SplitRatios& ratios, std::uint64_t seed) {
    const double sum = ratios.train + ratios.validation + ratios.test;
    if (ratios.train <= 0.0 || ratios.validation < 0.0 || ratios.test <= 0.0 || std::abs(sum - 1.0) > 1e-9) {
        throw Error(ErrorKind::config, "split ratios must be non-negative, with train and test positive, and sum to 1");
    }
    std::vector<Index> order(nodes.begin(), nodes.end());
    Rng rng(seed);
    std::shuffle(order.begin(), order.end(), rng);
    const auto n = order.size();
    const auto n_train = static_cast<std::size_t>(std::llround(ratios.train * static_cast<double>(n)));
    const auto n_val = static_cast<std::size_t>(std::llround(ratios.validation * static_cast<double>(n)));
    if (n_train == 0 || n_train + n_val >= n) {
        throw Error(ErrorKind::data, "too few supervised nodes to split");
    }
    NodeSplit s;
    s.train.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
    s.validation.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train),
                        order.begin() + static_cast<std::ptrdiff_t>(n_train + n_val));
    s.test.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train + n_val), order.end());
    for (auto* part : {&s.train, &s.validation, &s.test}) std::sort(part->begin(), part->end());
    return s;
}

std::string to_string(ModelKind k) {
    switch (k) {
        case ModelKind::gat: return "GAT";
        case ModelKind::dt: return "DT";
        case ModelKind::mlp: return "MLP";
    }
    return "?";
}

ModelKind parse_model_kind(const std::string& s) {
    std::string l = s;
    std::transform(l.begin(), l.end(), l.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    if (l == "gat") return ModelKind::gat;
    if (l == "dt") return ModelKind::dt;
    if (l == "mlp") return ModelKind::mlp;
    throw Error(ErrorKind::config, "unknown model kind '" + s + "'");
}

Eigen::MatrixXd neighbor_mean_features(const Eigen::MatrixXd& x, const data::Graph& graph) {
    if (graph.size() != x.rows()) {
        throw Error(ErrorKind::data, "graph size does not match feature rows");
    }
    Eigen::MatrixXd out(x.rows(), 2 * x.cols());
    out.leftCols(x.cols()) = x;
    for (Index i = 0; i < x.rows(); ++i) {
        Eigen::RowVectorXd acc = Eigen::RowVectorXd::Zero(x.cols());
        const Index deg = graph.degree(i);
        for (Index j : graph.neighbors(i)) {
            if (j != i) acc += x.row(j);
        }
        out.row(i).tail(x.cols()) = deg > 0 ? (acc / static_cast<double>(deg)).eval() : acc;
    }
    return out;
}

GatRegressor train_gat_regressor(const Eigen::MatrixXd& x, const data::Graph& graph, const RegressionBatch& train,
                                 const RegressionBatch& validation, const RiskConfig& cfg, std::uint64_t seed) {
    if (!(cfg.learning_rate > 0.0) || cfg.epochs < 0 || cfg.patience <= 0 || cfg.weight_decay < 0.0) {
        throw Error(ErrorKind::config, "invalid risk training configuration");
    }
    if (cfg.architecture.layers.back().channels != 1 || cfg.architecture.layers.back().combine != gat::Combine::single) {
        throw Error(ErrorKind::config, "risk GAT needs a single-head, single-channel output layer");
    }
    if (train.nodes.empty()) {
        throw Error(ErrorKind::data, "no training nodes");
    }
    GatRegressor out;
    auto model = gat::init_model(cfg.architecture, x.cols(), seed);
    out.model = model;
    out.best_validation_loss = std::numeric_limits<double>::infinity();

    gat::Vector<double> params = gat::flatten(model);
    Adam<double> adam({cfg.learning_rate, 0.9, 0.999, 1e-8, cfg.weight_decay});
    int since_best = 0;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        const auto state = gat::forward(model, x, graph);
        const auto [loss, dz] = regression_loss<double>(state.embeddings(), train);
        if (!std::isfinite(loss)) {
            throw Error(ErrorKind::numeric, "risk training diverged at epoch " + std::to_string(epoch));
        }
        const double val = validation.nodes.empty() ? loss : regression_loss<double>(state.embeddings(), validation).first;
        if (val < out.best_validation_loss) {
            out.best_validation_loss = val;
            out.best_epoch = epoch;
            out.model = model;
            since_best = 0;
        } else if (++since_best >= cfg.patience) {
            break;
        }
        const auto grads = gat::backward(model, state, graph, dz);
        adam.step(params, gat::flatten(grads.params));
        if (!params.allFinite()) {
            throw Error(ErrorKind::numeric, "risk training diverged at epoch " + std::to_string(epoch));
        }
        gat::unflatten(model, params);
    }
    return out;
}

GradCheckReport gat_regression_grad_check(const gat::GatModel<double>& model, const Eigen::MatrixXd& x,
                                          const data::Graph& graph, const RegressionBatch& batch, double delta,
                                          double tolerance) {
    using LD = long double;
    const auto base = model.cast<LD>();
    const gat::Matrix<LD> xl = x.cast<LD>();
    const auto state = gat::forward(base, xl, graph);
    const auto dz = regression_loss<LD>(state.embeddings(), batch).second;
    const gat::Vector<LD> analytic = gat::flatten(gat::backward(base, state, graph, dz).params);
    auto probe = base;
    auto loss = [&](const gat::Vector<LD>& theta) {
        gat::unflatten(probe, theta);
        return regression_loss<LD>(gat::forward(probe, xl, graph).embeddings(), batch).first;
    };
    auto name = [&](Index k) { return gat::parameter_name(base, k); };
    return check_gradients<LD>(loss, gat::flatten(base), analytic, name, delta, tolerance);
}

namespace {

RegressionBatch make_batch(const RiskData& data, std::span<const Index> nodes, bool weighted) {
    RegressionBatch b;
    std::vector<int> labels;
    for (Index i : nodes) {
        const auto& t = data.targets.at(static_cast<std::size_t>(i));
        if (!t) continue;
        b.nodes.push_back(i);
        b.targets.push_back(t->normalized);
        labels.push_back(t->at_risk ? 1 : 0);
    }
    b.weights = weighted ? oversample_weights(labels) : std::vector<double>(b.nodes.size(), 1.0);
    return b;
}

} // namespace

std::vector<double> train_and_predict(ModelKind kind, const RiskData& data, const data::Graph& graph,
                                      const NodeSplit& split, const RiskConfig& cfg, std::uint64_t seed) {
    const Eigen::MatrixXd& x = data.features.values;
    if (graph.size() != x.rows()) {
        throw Error(ErrorKind::data, "graph size does not match node count");
    }
    const auto train = make_batch(data, split.train, true);
    std::vector<double> probs(static_cast<std::size_t>(x.rows()));

    if (kind == ModelKind::gat) {
        const auto val = make_batch(data, split.validation, false);
        const auto reg = train_gat_regressor(x, graph, train, val, cfg, derive_seed(seed, "risk-gat"));
        const Eigen::MatrixXd z = gat::embed(reg.model, x, graph);
        for (Index i = 0; i < x.rows(); ++i) probs[static_cast<std::size_t>(i)] = gat::logistic(z(i, 0));
    } else {
        const Eigen::MatrixXd xn = neighbor_mean_features(x, graph);
        Eigen::MatrixXd xt(static_cast<Index>(train.nodes.size()), xn.cols());
        for (std::size_t k = 0; k < train.nodes.size(); ++k) xt.row(static_cast<Index>(k)) = xn.row(train.nodes[k]);
        Eigen::VectorXd p;
        if (kind == ModelKind::dt) {
            auto params = cfg.tree;
            params.criterion = baselines::Criterion::variance;
            p = baselines::dt_predict_batch(baselines::dt_train(xt, train.targets, train.weights, params), xn);
        } else {
            auto mc = cfg.mlp;
            mc.loss = baselines::MlpLoss::squared_error;
            mc.seed = derive_seed(seed, "risk-mlp");
            p = baselines::mlp_predict_batch(baselines::mlp_train(xt, train.targets, train.weights, mc), xn);
        }
        for (Index i = 0; i < x.rows(); ++i) probs[static_cast<std::size_t>(i)] = p(i);
    }
    // Clipped to the reachable range of the summed responses.
    double lo = 0.0, hi = 0.0;
    for (const auto& r : indicator_ranges()) {
        lo += r.min;
        hi += r.max;
    }
    std::vector<double> raw(probs.size());
    for (std::size_t i = 0; i < probs.size(); ++i) raw[i] = std::clamp(denormalize_score(probs[i], cfg.scale), lo, hi);
    return raw;
}

RiskEvaluation evaluate_risk(std::span<const double> predictions, std::span<const double> raw_targets, double cutoff) {
    RiskEvaluation e;
    e.count = predictions.size();
    e.mae = metrics::mae(predictions, raw_targets);
    std::vector<int> labels;
    for (double t : raw_targets) labels.push_back(t >= cutoff ? 1 : 0);
    const auto pos = std::count(labels.begin(), labels.end(), 1);
    if (pos > 0 && pos < static_cast<std::ptrdiff_t>(labels.size())) {
        e.auc = metrics::auc(predictions, labels);
    }
    return e;
}

std::vector<AblationRow> ablation_compare(const RiskData& data, std::span<const NamedGraph> edge_lists,
                                          std::span<const ModelKind> kinds, const RiskConfig& cfg,
                                          std::uint64_t seed) {
    const auto supervised = data.supervised();
    const auto split = split_nodes(supervised, cfg.ratios, derive_seed(seed, "risk-split"));
    std::vector<AblationRow> rows;
    for (ModelKind kind : kinds) {
        for (const auto& el : edge_lists) {
            const auto pred = train_and_predict(kind, data, el.graph, split, cfg, seed);
            for (const auto& [label, nodes] :
                 {std::pair<std::string, const std::vector<Index>*>{"test", &split.test}, {"train", &split.train}}) {
                std::vector<double> p, t;
                for (Index i : *nodes) {
                    p.push_back(pred[static_cast<std::size_t>(i)]);
                    t.push_back(data.targets[static_cast<std::size_t>(i)]->raw);
                }
                rows.push_back({to_string(kind), el.name, label, evaluate_risk(p, t, cfg.scale.cutoff), seed});
            }
        }
    }
    return rows;
}

void write_ablation_csv(std::ostream& out, std::span<const AblationRow> rows) {
    out << "model,edge_list,evaluation,mae,auc,count,seed\n";
    for (const auto& r : rows) {
        out << r.model << ',' << r.edge_list << ',' << r.evaluation << ',' << data::format_double(r.result.mae) << ','
            << (r.result.auc ? data::format_double(*r.result.auc) : "NA") << ',' << r.result.count << ',' << r.seed
            << '\n';
    }
}

void write_ablation_text(std::ostream& out, std::span<const AblationRow> rows) {
    out << "Suicide score prediction\n";
    out << std::left << std::setw(6) << "model" << std::setw(14) << "edge list" << std::setw(7) << "eval" << std::right
        << std::setw(8) << "MAE" << std::setw(8) << "AUC" << '\n';
    for (const auto& r : rows) {
        out << std::left << std::setw(6) << r.model << std::setw(14) << r.edge_list << std::setw(7) << r.evaluation
            << std::right << std::fixed << std::setprecision(3) << std::setw(8) << r.result.mae;
        if (r.result.auc) {
            out << std::setw(8) << *r.result.auc;
        } else {
            out << std::setw(8) << "n/a";
        }
        out << '\n';
    }
}

} // namespace peernet::risk
