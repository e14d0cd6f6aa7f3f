#include "peernet/benchmark.hpp"

#include <functional>
#include <iomanip>
#include <ostream>

#include "peernet/error.hpp"
#include "peernet/rng.hpp"

namespace peernet::bench {

std::string to_string(Task t) { return t == Task::pair ? "pair" : "existence"; }

metrics::ClassificationMetrics pair_metrics(std::span<const int> correct) {
    std::vector<int> labels(correct.size(), 1);
    return metrics::classification_metrics(correct, labels);
}

namespace {

// Both orientations of every pair, so the order of concatenation carries no
// signal the evaluation cases could not match.
baselines::PairSamples symmetric_samples(std::span<const NodePair> pos, std::span<const NodePair> neg,
                                         const Eigen::MatrixXd& x) {
    std::vector<NodePair> pairs;
    std::vector<int> labels;
    for (const auto& [a, b] : pos) {
        pairs.emplace_back(a, b);
        pairs.emplace_back(b, a);
        labels.insert(labels.end(), {1, 1});
    }
    for (const auto& [a, b] : neg) {
        pairs.emplace_back(a, b);
        pairs.emplace_back(b, a);
        labels.insert(labels.end(), {0, 0});
    }
    return baselines::make_pair_samples(pairs, labels, x);
}

using Scorer = std::function<double(Index, Index)>;

std::vector<int> pair_outcomes(const std::vector<disambig::AmbiguityCase>& cases, const Scorer& score) {
    std::vector<int> correct;
    for (const auto& c : cases) {
        const double s1 = score(c.source, c.first);
        const double s2 = score(c.source, c.second);
        Index chosen;
        if (s1 != s2) {
            chosen = s1 > s2 ? c.first : c.second;
        } else {
            chosen = std::min(c.first, c.second);
        }
        correct.push_back(chosen == *c.truth_node ? 1 : 0);
    }
    return correct;
}

metrics::ClassificationMetrics existence_metrics(const std::vector<disambig::AmbiguityCase>& cases,
                                                 const std::function<bool(Index, Index)>& decide) {
    std::vector<int> pred;
    std::vector<int> labels;
    for (const auto& c : cases) {
        pred.push_back(decide(c.source, c.first) ? 1 : 0);
        labels.push_back(*c.truth_exists ? 1 : 0);
    }
    return metrics::classification_metrics(pred, labels);
}

} // namespace

disambig::Threshold calibrate_held_out(const gat::GatModel<double>& model, const Eigen::MatrixXd& x,
                                       std::span<const NodePair> train, std::span<const NodePair> validation,
                                       std::span<const NodePair> negatives, disambig::DistanceMetric metric) {
    std::vector<double> dist;
    std::vector<int> labels;
    const Index n = x.rows();
    for (std::size_t fold = 0; fold < 2; ++fold) {
        std::vector<NodePair> known(train.begin(), train.end());
        for (std::size_t k = 0; k < validation.size(); ++k) {
            if (k % 2 != fold) known.push_back(validation[k]);
        }
        const Eigen::MatrixXd z = gat::embed(model, x, data::Graph::from_pairs(n, known));
        for (std::size_t k = fold; k < validation.size(); k += 2) {
            dist.push_back(disambig::embedding_distance(z.row(validation[k].first), z.row(validation[k].second), metric));
            labels.push_back(1);
        }
        for (std::size_t k = fold; k < negatives.size(); k += 2) {
            dist.push_back(disambig::embedding_distance(z.row(negatives[k].first), z.row(negatives[k].second), metric));
            labels.push_back(0);
        }
    }
    return disambig::calibrate_threshold(dist, labels);
}

std::vector<BenchmarkRow> simulate_benchmark(const data::FeatureMatrix& features, const data::EdgeTable& edges,
                                             const SimulateConfig& cfg, std::uint64_t seed) {
    const Index n = features.rows();
    const auto confident = data::unique_pairs(edges, data::Confidence::confident);
    const data::PairSet all_edges(data::unique_pairs(edges));
    const auto split = data::split_edges(confident, cfg.ratios, derive_seed(seed, "split"));
    const auto graph = data::Graph::from_pairs(n, split.train);
    const Eigen::MatrixXd& x = features.values;

    // Shared evaluation cases.
    const std::size_t pair_count = cfg.pair_cases == 0 ? split.test.size() : cfg.pair_cases;
    const auto pair_cases =
        disambig::simulate_pair_cases(split.test, all_edges, n, pair_count, derive_seed(seed, "pair-cases"));
    const auto link_cases = disambig::simulate_link_cases(split.test, all_edges, n, derive_seed(seed, "link-cases"));

    // Everything reported, including uncertain rows, stays out of the negatives.
    const auto uncertain = data::unique_pairs(edges, data::Confidence::uncertain);

    // GAT
    gat::TrainConfig tc = cfg.train;
    tc.seed = derive_seed(seed, "train");
    const auto init = gat::init_model(cfg.architecture, x.cols(), derive_seed(seed, "init"));
    const auto trained = gat::train(init, x, graph, split, tc, uncertain);
    std::vector<NodePair> known(split.train);
    known.insert(known.end(), split.validation.begin(), split.validation.end());
    const auto eval_graph = data::Graph::from_pairs(n, known);
    const Eigen::MatrixXd z = gat::embed(trained.model, x, eval_graph);

    Rng val_rng(derive_seed(seed, "validation-negatives"));
    const auto val_neg = gat::sample_non_edges(n, split.validation.size(), all_edges, val_rng);
    const auto threshold =
        calibrate_held_out(trained.model, x, split.train, split.validation, val_neg, cfg.resolve.metric);

    // Baselines on the same training positives with balanced negatives.
    Rng neg_rng(derive_seed(seed, "baseline-negatives"));
    const auto train_neg = gat::sample_non_edges(n, split.train.size(), all_edges, neg_rng);
    const auto samples = symmetric_samples(split.train, train_neg, x);
    const auto tree = baselines::dt_train(samples, cfg.tree);
    auto mlp_cfg = cfg.mlp;
    mlp_cfg.seed = derive_seed(seed, "mlp");
    const auto mlp = baselines::mlp_train(samples, mlp_cfg);

    auto pair_row = [&](Index u, Index v) {
        Eigen::RowVectorXd r(2 * x.cols());
        r << x.row(u), x.row(v);
        return r;
    };
    const Scorer dt_score = [&](Index u, Index v) { return baselines::dt_predict(tree, pair_row(u, v)); };
    const Scorer mlp_score = [&](Index u, Index v) { return baselines::mlp_predict(mlp, pair_row(u, v)); };
    const Scorer gat_score = [&](Index u, Index v) {
        return -disambig::embedding_distance(z.row(u), z.row(v), cfg.resolve.metric);
    };

    std::vector<BenchmarkRow> rows;
    rows.push_back({"DT", Task::pair, pair_metrics(pair_outcomes(pair_cases, dt_score)), seed});
    rows.push_back({"MLP", Task::pair, pair_metrics(pair_outcomes(pair_cases, mlp_score)), seed});
    rows.push_back({"GAT", Task::pair, pair_metrics(pair_outcomes(pair_cases, gat_score)), seed});

    const double cut = cfg.probability_cutoff;
    rows.push_back({"DT", Task::existence,
                    existence_metrics(link_cases, [&](Index u, Index v) { return dt_score(u, v) > cut; }), seed});
    rows.push_back({"MLP", Task::existence,
                    existence_metrics(link_cases, [&](Index u, Index v) { return mlp_score(u, v) > cut; }), seed});
    rows.push_back({"GAT", Task::existence,
                    existence_metrics(link_cases,
                                      [&](Index u, Index v) {
                                          return disambig::link_exists(u, v, z, threshold.tau, cfg.resolve).exists;
                                      }),
                    seed});
    return rows;
}

void write_benchmark_csv(std::ostream& out, const std::vector<BenchmarkRow>& rows) {
    out << "model,task,precision,recall,f1,accuracy,tp,fp,tn,fn,seed\n";
    for (const auto& r : rows) {
        const auto& m = r.metrics;
        out << r.model << ',' << to_string(r.task) << ',' << data::format_double(m.precision) << ','
            << data::format_double(m.recall) << ',' << data::format_double(m.f1) << ','
            << data::format_double(m.accuracy) << ',' << m.counts.tp << ',' << m.counts.fp << ',' << m.counts.tn
            << ',' << m.counts.fn << ',' << r.seed << '\n';
    }
}

void write_benchmark_text(std::ostream& out, const std::vector<BenchmarkRow>& rows) {
    for (Task t : {Task::pair, Task::existence}) {
        out << (t == Task::pair ? "Simulated pair disambiguation\n" : "Simulated link existence\n");
        out << std::left << std::setw(6) << "model" << std::setw(8) << "seed" << std::right << std::setw(10)
            << "precision" << std::setw(10) << "recall" << std::setw(10) << "f1" << std::setw(10) << "accuracy"
            << '\n';
        for (const auto& r : rows) {
            if (r.task != t) continue;
            out << std::left << std::setw(6) << r.model << std::setw(8) << r.seed << std::right << std::fixed
                << std::setprecision(3) << std::setw(10) << r.metrics.precision << std::setw(10) << r.metrics.recall
                << std::setw(10) << r.metrics.f1 << std::setw(10) << r.metrics.accuracy << '\n';
        }
        out << '\n';
    }
}

} // namespace peernet::bench
