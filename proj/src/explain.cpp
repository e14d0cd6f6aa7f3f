#include "peernet/explain.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <iomanip>
#include <map>
#include <ostream>
#include <queue>
#include <unordered_map>

#include <json.hpp>

#include "peernet/error.hpp"
#include "peernet/optim.hpp"
#include "peernet/rng.hpp"

namespace peernet::explain {

using json = nlohmann::json;

Index Subgraph::local(Index global) const {
    const auto it = std::lower_bound(nodes.begin(), nodes.end(), global);
    return it != nodes.end() && *it == global ? static_cast<Index>(it - nodes.begin()) : -1;
}

Subgraph extract_subgraph(const data::Graph& graph, Index u, Index v, int hops) {
    if (u < 0 || v < 0 || u >= graph.size() || v >= graph.size()) {
        throw Error(ErrorKind::data, "explained pair outside the graph");
    }
    if (hops < 0) {
        throw Error(ErrorKind::config, "hop radius must be non-negative");
    }
    std::vector<int> dist(static_cast<std::size_t>(graph.size()), -1);
    std::queue<Index> frontier;
    for (Index s : {u, v}) {
        if (dist[static_cast<std::size_t>(s)] < 0) {
            dist[static_cast<std::size_t>(s)] = 0;
            frontier.push(s);
        }
    }
    while (!frontier.empty()) {
        const Index i = frontier.front();
        frontier.pop();
        if (dist[static_cast<std::size_t>(i)] == hops) continue;
        for (Index j : graph.neighbors(i)) {
            if (dist[static_cast<std::size_t>(j)] < 0) {
                dist[static_cast<std::size_t>(j)] = dist[static_cast<std::size_t>(i)] + 1;
                frontier.push(j);
            }
        }
    }
    Subgraph sub;
    for (Index i = 0; i < graph.size(); ++i) {
        if (dist[static_cast<std::size_t>(i)] >= 0) sub.nodes.push_back(i);
    }
    for (std::size_t a = 0; a < sub.nodes.size(); ++a) {
        for (Index j : graph.neighbors(sub.nodes[a])) {
            const Index b = sub.local(j);
            if (b > static_cast<Index>(a)) sub.edges.emplace_back(static_cast<Index>(a), b);
        }
    }
    sub.graph = data::Graph::from_pairs(static_cast<Index>(sub.nodes.size()), sub.edges);
    sub.u = sub.local(u);
    sub.v = sub.local(v);
    return sub;
}

Eigen::VectorXd MaskParams::edge_mask() const {
    return edge.unaryExpr([](double t) { return gat::logistic(t); });
}

Eigen::VectorXd MaskParams::feature_mask() const {
    return feature.unaryExpr([](double t) { return gat::logistic(t); });
}

namespace {

template <typename Scalar>
Scalar softplus(Scalar t) {
    using std::exp;
    using std::log1p;
    return t > Scalar(0) ? t + log1p(exp(-t)) : log1p(exp(t));
}

// H(σ(t)) = σ(t)·softplus(−t) + (1 − σ(t))·softplus(t)
template <typename Scalar>
Scalar binary_entropy_logit(Scalar t) {
    const Scalar m = gat::logistic(t);
    return m * softplus(-t) + (Scalar(1) - m) * softplus(t);
}

template <typename Scalar>
Scalar clamped_bce(Scalar p, int target) {
    using std::log;
    const Scalar eps(gat::kProbClamp);
    const Scalar q = std::clamp(p, eps, Scalar(1) - eps);
    return target == 1 ? -log(q) : -log(Scalar(1) - q);
}

template <typename Scalar>
Scalar regularizer(const gat::Vector<Scalar>& edge_logits, const gat::Vector<Scalar>& feature_logits,
                   const ExplainConfig& cfg) {
    Scalar r(0);
    for (auto [logits, size] : {std::pair{&edge_logits, cfg.size_edge}, std::pair{&feature_logits, cfg.size_feature}}) {
        if (logits->size() == 0) continue;
        Scalar sum(0), ent(0);
        for (Index k = 0; k < logits->size(); ++k) {
            sum += gat::logistic((*logits)(k));
            ent += binary_entropy_logit((*logits)(k));
        }
        r += Scalar(size) * sum + Scalar(cfg.entropy) * ent / static_cast<Scalar>(logits->size());
    }
    return r;
}

} // namespace

MaskedLink::MaskedLink(const gat::GatModel<double>& model, const Eigen::MatrixXd& features, Subgraph sub)
    : model_(model), model_ld_(model.cast<long double>()), sub_(std::move(sub)) {
    x_.resize(static_cast<Index>(sub_.nodes.size()), features.cols());
    for (std::size_t a = 0; a < sub_.nodes.size(); ++a) x_.row(static_cast<Index>(a)) = features.row(sub_.nodes[a]);
    std::map<NodePair, Index> index;
    for (std::size_t k = 0; k < sub_.edges.size(); ++k) index[sub_.edges[k]] = static_cast<Index>(k);
    const auto& g = sub_.graph;
    entry_edge_.assign(static_cast<std::size_t>(g.entry_count()), -1);
    for (Index i = 0; i < g.size(); ++i) {
        for (Index e = g.entry_begin(i); e < g.entry_end(i); ++e) {
            const Index j = g.neighbor(e);
            if (j != i) entry_edge_[static_cast<std::size_t>(e)] = index.at(data::ordered(i, j));
        }
    }
}

template <typename Scalar>
gat::Vector<Scalar> MaskedLink::entry_weights(const gat::Vector<Scalar>& edge_mask) const {
    gat::Vector<Scalar> w(static_cast<Index>(entry_edge_.size()));
    for (std::size_t e = 0; e < entry_edge_.size(); ++e) {
        w(static_cast<Index>(e)) = entry_edge_[e] < 0 ? Scalar(1) : edge_mask(entry_edge_[e]);
    }
    return w;
}

double MaskedLink::score(const Eigen::VectorXd& edge_mask, const Eigen::VectorXd& feature_mask) const {
    const Eigen::MatrixXd x = x_ * feature_mask.asDiagonal();
    const auto z = gat::forward(model_, x, sub_.graph, entry_weights<double>(edge_mask)).embeddings();
    return gat::link_score(z.row(sub_.u), z.row(sub_.v));
}

MaskedLink::Objective MaskedLink::objective(const MaskParams& params, int target, const ExplainConfig& cfg) const {
    const Eigen::VectorXd me = params.edge_mask();
    const Eigen::VectorXd mf = params.feature_mask();
    const Eigen::MatrixXd x = x_ * mf.asDiagonal();
    const auto w = entry_weights<double>(me);
    const auto state = gat::forward(model_, x, sub_.graph, w);
    const auto& z = state.embeddings();

    Objective out;
    out.score = gat::link_score(z.row(sub_.u), z.row(sub_.v));
    out.loss = clamped_bce(out.score, target) + regularizer<double>(params.edge, params.feature, cfg);

    Eigen::MatrixXd dz = Eigen::MatrixXd::Zero(z.rows(), z.cols());
    const double eps = gat::kProbClamp;
    if (out.score >= eps && out.score <= 1.0 - eps) {
        const double g = out.score - static_cast<double>(target);
        dz.row(sub_.u) += g * z.row(sub_.v);
        dz.row(sub_.v) += g * z.row(sub_.u);
    }
    const auto grads = gat::backward(model_, state, sub_.graph, dz, w);

    Eigen::VectorXd d_me = Eigen::VectorXd::Zero(me.size());
    for (std::size_t e = 0; e < entry_edge_.size(); ++e) {
        if (entry_edge_[e] >= 0) d_me(entry_edge_[e]) += grads.edge_weights(static_cast<Index>(e));
    }
    const Eigen::VectorXd d_mf = (x_.array() * grads.features.array()).colwise().sum().transpose();

    auto finish = [&cfg](const Eigen::VectorXd& d_mask, const Eigen::VectorXd& logits, const Eigen::VectorXd& m,
                         double size) {
        Eigen::VectorXd d(logits.size());
        const double inv = logits.size() > 0 ? 1.0 / static_cast<double>(logits.size()) : 0.0;
        for (Index k = 0; k < logits.size(); ++k) {
            const double s = m(k) * (1.0 - m(k));
            // dH(σ(t))/dt = −t·σ(t)(1 − σ(t))
            d(k) = (d_mask(k) + size) * s - cfg.entropy * inv * logits(k) * s;
        }
        return d;
    };
    out.d_edge = finish(d_me, params.edge, me, cfg.size_edge);
    out.d_feature = finish(d_mf, params.feature, mf, cfg.size_feature);
    return out;
}

long double MaskedLink::objective_value(const Eigen::VectorXd& edge_logits, const Eigen::VectorXd& feature_logits,
                                        int target, const ExplainConfig& cfg) const {
    using LD = long double;
    const gat::Vector<LD> el = edge_logits.cast<LD>();
    const gat::Vector<LD> fl = feature_logits.cast<LD>();
    const gat::Vector<LD> me = el.unaryExpr([](LD t) { return gat::logistic(t); });
    const gat::Vector<LD> mf = fl.unaryExpr([](LD t) { return gat::logistic(t); });
    const gat::Matrix<LD> x = x_.cast<LD>() * mf.asDiagonal();
    const auto z = gat::forward(model_ld_, x, sub_.graph, entry_weights<LD>(me)).embeddings();
    const LD p = gat::link_score(z.row(sub_.u), z.row(sub_.v));
    return clamped_bce(p, target) + regularizer<LD>(el, fl, cfg);
}

GradCheckReport mask_grad_check(const MaskedLink& link, const MaskParams& params, int target,
                                const ExplainConfig& cfg, double delta, double tolerance) {
    using LD = long double;
    const Index ne = params.edge.size();
    const auto obj = link.objective(params, target, cfg);
    gat::Vector<LD> theta(ne + params.feature.size());
    theta << params.edge.cast<LD>(), params.feature.cast<LD>();
    gat::Vector<LD> analytic(theta.size());
    analytic << obj.d_edge.cast<LD>(), obj.d_feature.cast<LD>();
    auto loss = [&](const gat::Vector<LD>& t) {
        const Eigen::VectorXd d = t.cast<double>();
        return link.objective_value(d.head(ne), d.tail(t.size() - ne), target, cfg);
    };
    auto name = [ne](Index k) {
        return k < ne ? "edge[" + std::to_string(k) + "]" : "feature[" + std::to_string(k - ne) + "]";
    };
    return check_gradients<LD>(loss, theta, analytic, name, delta, tolerance);
}

std::size_t shared_neighbor_count(const data::Graph& graph, Index u, Index v) {
    const auto a = graph.neighbors(u);
    const auto b = graph.neighbors(v);
    std::size_t count = 0;
    std::size_t i = 0, j = 0;
    while (i < a.size() && j < b.size()) {
        if (a[i] < b[j]) {
            ++i;
        } else if (b[j] < a[i]) {
            ++j;
        } else {
            if (a[i] != u && a[i] != v) ++count;
            ++i;
            ++j;
        }
    }
    return count;
}

Explanation explain_link(const gat::GatModel<double>& model, const data::FeatureMatrix& features,
                         const data::Graph& graph, Index u, Index v, const ExplainConfig& cfg) {
    if (cfg.epochs < 0 || !(cfg.learning_rate > 0.0) || cfg.size_edge < 0.0 || cfg.size_feature < 0.0 ||
        cfg.entropy < 0.0) {
        throw Error(ErrorKind::config, "invalid explainer configuration");
    }
    if (u == v) {
        throw Error(ErrorKind::data, "explained pair needs two distinct nodes");
    }
    if (features.rows() != graph.size()) {
        throw Error(ErrorKind::data, "feature rows do not match graph size");
    }
    const MaskedLink link(model, features.values, extract_subgraph(graph, u, v, cfg.hops));
    const Index ne = link.edge_count();
    const Index nf = link.feature_count();

    Explanation ex;
    ex.u = u;
    ex.v = v;
    ex.full_score = link.score(Eigen::VectorXd::Ones(ne), Eigen::VectorXd::Ones(nf));
    ex.predicted = ex.full_score > 0.5 ? 1 : 0;
    ex.shared_neighbors = shared_neighbor_count(graph, u, v);

    Rng rng(cfg.seed);
    MaskParams params{Eigen::VectorXd(ne), Eigen::VectorXd(nf)};
    for (Index k = 0; k < ne; ++k) params.edge(k) = normal(rng, 1.0, 0.1);
    for (Index k = 0; k < nf; ++k) params.feature(k) = normal(rng, 1.0, 0.1);

    Eigen::VectorXd theta(ne + nf);
    theta << params.edge, params.feature;
    Adam<double> adam({cfg.learning_rate, 0.9, 0.999, 1e-8, 0.0});
    MaskParams best = params;
    double best_loss = std::numeric_limits<double>::infinity();
    std::vector<double> losses;
    for (int epoch = 0; epoch <= cfg.epochs; ++epoch) {
        params.edge = theta.head(ne);
        params.feature = theta.tail(nf);
        const auto obj = link.objective(params, ex.predicted, cfg);
        if (!std::isfinite(obj.loss)) {
            throw Error(ErrorKind::numeric, "explainer objective is not finite");
        }
        losses.push_back(obj.loss);
        if (obj.loss < best_loss) {
            best_loss = obj.loss;
            best = params;
        }
        if (epoch == cfg.epochs) break;
        Eigen::VectorXd grad(ne + nf);
        grad << obj.d_edge, obj.d_feature;
        adam.step(theta, grad);
    }
    if (losses.size() > 10) {
        const double last = losses.back();
        const double before = losses[losses.size() - 11];
        ex.warning = std::abs(last - before) > 1e-3 * std::max(1.0, std::abs(last));
    }

    ex.edge_mask = best.edge_mask();
    ex.feature_mask = best.feature_mask();
    ex.masked_score = link.score(ex.edge_mask, ex.feature_mask);
    ex.fidelity = std::abs(ex.masked_score - ex.full_score);

    const auto& sub = link.subgraph();
    std::vector<Index> order(static_cast<std::size_t>(ne));
    for (Index k = 0; k < ne; ++k) order[static_cast<std::size_t>(k)] = k;
    std::stable_sort(order.begin(), order.end(),
                     [&](Index a, Index b) { return ex.edge_mask(a) > ex.edge_mask(b); });
    for (std::size_t k = 0; k < std::min(cfg.top_k, order.size()); ++k) {
        const auto [a, b] = sub.edges[static_cast<std::size_t>(order[k])];
        ex.top_edges.push_back({sub.nodes[static_cast<std::size_t>(a)], sub.nodes[static_cast<std::size_t>(b)],
                                ex.edge_mask(order[k])});
    }
    order.resize(static_cast<std::size_t>(nf));
    for (Index k = 0; k < nf; ++k) order[static_cast<std::size_t>(k)] = k;
    std::stable_sort(order.begin(), order.end(),
                     [&](Index a, Index b) { return ex.feature_mask(a) > ex.feature_mask(b); });
    for (std::size_t k = 0; k < std::min(cfg.top_k, order.size()); ++k) {
        ex.top_features.push_back({order[k], features.column_name(order[k]), ex.feature_mask(order[k])});
    }
    return ex;
}

ExplanationReport explanation_report(std::span<const Explanation> explanations, std::size_t k) {
    if (explanations.empty()) {
        throw Error(ErrorKind::data, "no explanations to report");
    }
    ExplanationReport report;
    report.cases = explanations.size();
    std::map<std::string, std::pair<std::size_t, double>> tally;
    for (const auto& e : explanations) {
        for (std::size_t r = 0; r < std::min(k, e.top_features.size()); ++r) {
            auto& t = tally[e.top_features[r].name];
            ++t.first;
            t.second += e.top_features[r].weight;
        }
        report.shared.push_back(e.shared_neighbors > 0);
    }
    for (const auto& [name, t] : tally) {
        report.features.push_back({name, t.first, static_cast<double>(t.first) / static_cast<double>(report.cases),
                                   t.second / static_cast<double>(t.first)});
    }
    std::stable_sort(report.features.begin(), report.features.end(), [](const auto& a, const auto& b) {
        if (a.count != b.count) return a.count > b.count;
        return a.mean_weight > b.mean_weight;
    });
    return report;
}

std::string explanation_to_json(const Explanation& e, const data::NodeTable& nodes) {
    json j;
    j["u"] = nodes.pid(e.u);
    j["v"] = nodes.pid(e.v);
    j["predicted"] = e.predicted;
    j["full_score"] = e.full_score;
    j["masked_score"] = e.masked_score;
    j["fidelity"] = e.fidelity;
    j["shared_neighbors"] = e.shared_neighbors;
    j["warning"] = e.warning;
    j["top_edges"] = json::array();
    for (const auto& te : e.top_edges) {
        j["top_edges"].push_back({{"a", nodes.pid(te.a)}, {"b", nodes.pid(te.b)}, {"weight", te.weight}});
    }
    j["top_features"] = json::array();
    for (const auto& tf : e.top_features) {
        j["top_features"].push_back({{"column", tf.column}, {"name", tf.name}, {"weight", tf.weight}});
    }
    j["edge_mask"] = std::vector<double>(e.edge_mask.data(), e.edge_mask.data() + e.edge_mask.size());
    j["feature_mask"] = std::vector<double>(e.feature_mask.data(), e.feature_mask.data() + e.feature_mask.size());
    return j.dump();
}

Explanation explanation_from_json(const std::string& line, const data::NodeTable& nodes) {
    try {
        const json j = json::parse(line);
        Explanation e;
        e.u = nodes.index_of(j.at("u").get<std::string>());
        e.v = nodes.index_of(j.at("v").get<std::string>());
        e.predicted = j.at("predicted").get<int>();
        e.full_score = j.at("full_score").get<double>();
        e.masked_score = j.at("masked_score").get<double>();
        e.fidelity = j.at("fidelity").get<double>();
        e.shared_neighbors = j.at("shared_neighbors").get<std::size_t>();
        e.warning = j.at("warning").get<bool>();
        for (const auto& te : j.at("top_edges")) {
            e.top_edges.push_back({nodes.index_of(te.at("a").get<std::string>()),
                                   nodes.index_of(te.at("b").get<std::string>()), te.at("weight").get<double>()});
        }
        for (const auto& tf : j.at("top_features")) {
            e.top_features.push_back(
                {tf.at("column").get<Index>(), tf.at("name").get<std::string>(), tf.at("weight").get<double>()});
        }
        const auto em = j.at("edge_mask").get<std::vector<double>>();
        const auto fm = j.at("feature_mask").get<std::vector<double>>();
        e.edge_mask = Eigen::Map<const Eigen::VectorXd>(em.data(), static_cast<Index>(em.size()));
        e.feature_mask = Eigen::Map<const Eigen::VectorXd>(fm.data(), static_cast<Index>(fm.size()));
        return e;
    } catch (const json::exception& ex) {
        throw Error(ErrorKind::data, std::string("malformed explanation record: ") + ex.what());
    }
}

void write_report_text(std::ostream& out, const ExplanationReport& report) {
    out << "Explanations: " << report.cases << " case(s)\n";
    out << std::left << std::setw(28) << "feature" << std::right << std::setw(8) << "count" << std::setw(11)
        << "frequency" << std::setw(13) << "mean weight" << '\n';
    for (const auto& f : report.features) {
        out << std::left << std::setw(28) << f.name << std::right << std::setw(8) << f.count << std::fixed
            << std::setprecision(3) << std::setw(11) << f.frequency << std::setw(13) << f.mean_weight << '\n';
    }
    const auto shared = static_cast<std::size_t>(std::count(report.shared.begin(), report.shared.end(), true));
    out << "pairs sharing a neighbour: " << shared << " of " << report.cases << '\n';
}

void write_report_csv(std::ostream& out, const ExplanationReport& report) {
    out << "feature,count,frequency,mean_weight\n";
    for (const auto& f : report.features) {
        out << f.name << ',' << f.count << ',' << data::format_double(f.frequency) << ','
            << data::format_double(f.mean_weight) << '\n';
    }
}

std::string model_hash(const gat::GatModel<double>& model) {
    const Eigen::VectorXd flat = gat::flatten(model);
    const std::uint64_t h = fnv1a(std::string_view(reinterpret_cast<const char*>(flat.data()),
                                                   static_cast<std::size_t>(flat.size()) * sizeof(double)));
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

} // namespace peernet::explain
