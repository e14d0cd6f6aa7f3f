#include "peernet/pipeline.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "peernet/error.hpp"
#include "peernet/metrics.hpp"
#include "peernet/rng.hpp"

namespace peernet::pipeline {

using json = nlohmann::json;
using data::Index;

namespace {

// Reads keys out of one JSON object and rejects whatever is left unread.
class Section {
public:
    Section(const json* j, std::string where) : j_(j), where_(std::move(where)) {
        if (j_ && !j_->is_object()) {
            throw Error(ErrorKind::config, "'" + where_ + "' must be an object");
        }
    }

    template <typename T>
    void get(const std::string& key, T& out) {
        if (!j_ || !j_->contains(key)) return;
        used_.insert(key);
        try {
            out = j_->at(key).get<T>();
        } catch (const json::exception&) {
            throw Error(ErrorKind::config, "'" + path(key) + "' has the wrong type");
        }
    }

    void get_path(const std::string& key, fs::path& out, const fs::path& base) {
        std::string s;
        get(key, s);
        if (!s.empty()) out = fs::path(s).is_absolute() || base.empty() ? fs::path(s) : base / s;
    }

    Section child(const std::string& key) {
        if (!j_ || !j_->contains(key)) return Section(nullptr, path(key));
        used_.insert(key);
        return Section(&j_->at(key), path(key));
    }

    const json* raw(const std::string& key) {
        if (!j_ || !j_->contains(key)) return nullptr;
        used_.insert(key);
        return &j_->at(key);
    }

    void finish() const {
        if (!j_) return;
        for (auto it = j_->begin(); it != j_->end(); ++it) {
            if (!used_.count(it.key())) {
                throw Error(ErrorKind::config, "unknown config key '" + path(it.key()) + "'");
            }
        }
    }

    std::string path(const std::string& key) const { return where_.empty() ? key : where_ + "." + key; }

private:
    const json* j_;
    std::string where_;
    std::set<std::string> used_;
};

void read_tree(Section s, baselines::TreeParams& t) {
    s.get("max_depth", t.max_depth);
    s.get("min_leaf", t.min_leaf);
    s.finish();
}

void read_mlp(Section s, baselines::MlpConfig& m) {
    std::vector<long> hidden;
    s.get("hidden", hidden);
    if (!hidden.empty()) m.hidden.assign(hidden.begin(), hidden.end());
    s.get("learning_rate", m.learning_rate);
    s.get("epochs", m.epochs);
    s.get("weight_decay", m.weight_decay);
    s.finish();
}

void read_split(Section s, data::SplitRatios& r) {
    s.get("train", r.train);
    s.get("validation", r.validation);
    s.get("test", r.test);
    s.finish();
}

void write_text(const fs::path& path, const std::string& text) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw Error(ErrorKind::io, "cannot write " + path.string());
    }
    out << text;
    if (!out) {
        throw Error(ErrorKind::io, "failed writing " + path.string());
    }
}

template <typename Fn>
void write_with(const fs::path& path, Fn&& fn) {
    std::ostringstream os;
    fn(os);
    write_text(path, os.str());
}

fs::path checkpoint_path(const RunConfig& cfg) {
    return cfg.paths.checkpoint.empty() ? cfg.paths.output / "checkpoint.json" : cfg.paths.checkpoint;
}

std::string fixed(double v, int digits = 3) {
    std::ostringstream os;
    os.setf(std::ios::fixed);
    os.precision(digits);
    os << v;
    return os.str();
}

} // namespace

RunConfig parse_config(const std::string& text, const fs::path& base) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw Error(ErrorKind::config, std::string("config is not valid JSON: ") + e.what());
    }
    RunConfig cfg;
    Section root(&j, "");
    root.get("seed", cfg.seed);

    {
        auto s = root.child("paths");
        s.get_path("nodes", cfg.paths.nodes, base);
        s.get_path("schema", cfg.paths.schema, base);
        s.get_path("edges", cfg.paths.edges, base);
        s.get_path("cases", cfg.paths.cases, base);
        s.get_path("truth", cfg.paths.truth, base);
        s.get_path("risk", cfg.paths.risk, base);
        s.get_path("checkpoint", cfg.paths.checkpoint, base);
        s.get_path("output", cfg.paths.output, base);
        s.finish();
    }
    {
        auto s = root.child("preprocess");
        s.get("missing_threshold", cfg.preprocess.missing_threshold);
        s.finish();
        if (!(cfg.preprocess.missing_threshold > 0.0 && cfg.preprocess.missing_threshold <= 1.0)) {
            throw Error(ErrorKind::config, "preprocess.missing_threshold must be in (0, 1]");
        }
    }
    {
        auto s = root.child("architecture");
        s.get("slope", cfg.architecture.slope);
        if (const json* layers = s.raw("layers")) {
            if (!layers->is_array() || layers->empty()) {
                throw Error(ErrorKind::config, "architecture.layers must be a non-empty array");
            }
            cfg.architecture.layers.clear();
            for (std::size_t k = 0; k < layers->size(); ++k) {
                Section ls(&(*layers)[k], "architecture.layers[" + std::to_string(k) + "]");
                gat::LayerSpec spec;
                ls.get("channels", spec.channels);
                ls.get("heads", spec.heads);
                ls.finish();
                spec.combine = spec.heads == 1 ? gat::Combine::single : gat::Combine::concatenate;
                cfg.architecture.layers.push_back(spec);
            }
        }
        s.finish();
    }
    {
        auto s = root.child("train");
        s.get("learning_rate", cfg.train.learning_rate);
        s.get("epochs", cfg.train.epochs);
        s.get("patience", cfg.train.patience);
        s.get("negative_ratio", cfg.train.negative_ratio);
        s.get("weight_decay", cfg.train.weight_decay);
        s.get("target_fraction", cfg.train.target_fraction);
        s.finish();
    }
    read_split(root.child("split"), cfg.split);
    {
        auto s = root.child("disambiguation");
        std::string metric = "euclidean", objective = "f1";
        s.get("metric", metric);
        s.get("objective", objective);
        s.get("margin_epsilon", cfg.resolve.margin_epsilon);
        s.finish();
        cfg.resolve.metric = disambig::parse_metric(metric);
        if (objective != "f1") {
            throw Error(ErrorKind::config, "disambiguation.objective supports only 'f1'");
        }
        if (cfg.resolve.margin_epsilon < 0.0) {
            throw Error(ErrorKind::config, "disambiguation.margin_epsilon must be non-negative");
        }
    }
    {
        auto s = root.child("simulate");
        s.get("seeds", cfg.simulate.seeds);
        s.get("pair_cases", cfg.simulate.pair_cases);
        read_tree(s.child("tree"), cfg.simulate.tree);
        read_mlp(s.child("mlp"), cfg.simulate.mlp);
        s.finish();
    }
    {
        auto s = root.child("risk");
        auto& m = cfg.risk.model;
        s.get("seeds", cfg.risk.seeds);
        std::vector<std::string> models;
        s.get("models", models);
        if (!models.empty()) {
            cfg.risk.kinds.clear();
            for (const auto& name : models) cfg.risk.kinds.push_back(risk::parse_model_kind(name));
        }
        if (const json* lists = s.raw("edge_lists")) {
            if (!lists->is_object()) {
                throw Error(ErrorKind::config, "risk.edge_lists must map names to edge files");
            }
            for (auto it = lists->begin(); it != lists->end(); ++it) {
                if (!it.value().is_string()) {
                    throw Error(ErrorKind::config, "risk.edge_lists." + it.key() + " must be a path");
                }
                const fs::path p = it.value().get<std::string>();
                cfg.risk.edge_lists[it.key()] = p.is_absolute() || base.empty() ? p : base / p;
            }
        }
        s.get("learning_rate", m.learning_rate);
        s.get("epochs", m.epochs);
        s.get("patience", m.patience);
        s.get("weight_decay", m.weight_decay);
        s.get("midpoint", m.scale.midpoint);
        s.get("scale", m.scale.scale);
        s.get("cutoff", m.scale.cutoff);
        read_tree(s.child("tree"), m.tree);
        read_mlp(s.child("mlp"), m.mlp);
        read_split(s.child("split"), m.ratios);
        s.finish();
    }
    {
        auto s = root.child("explain");
        auto& e = cfg.explain;
        s.get("epochs", e.epochs);
        s.get("learning_rate", e.learning_rate);
        s.get("size_edge", e.size_edge);
        s.get("size_feature", e.size_feature);
        s.get("entropy", e.entropy);
        s.get("hops", e.hops);
        s.get("top_k", e.top_k);
        s.get("cases", cfg.explain_cases);
        s.finish();
    }
    {
        auto s = root.child("synth");
        auto& sc = cfg.synth;
        s.get("n", sc.n);
        s.get("target_edges", sc.target_edges);
        s.get("pair_cases", sc.pair_cases);
        s.get("existence_cases", sc.existence_cases);
        s.get("existence_true_fraction", sc.existence_true_fraction);
        s.get("decoy_quantile", sc.decoy_quantile);
        s.get("extra_attributes", sc.extra_attributes);
        s.finish();
    }
    {
        auto s = root.child("review");
        s.get("host", cfg.review.host);
        s.get("port", cfg.review.port);
        s.get_path("state_dir", cfg.review.state_dir, base);
        s.get_path("ui_dir", cfg.review.ui_dir, base);
        s.get("recompute_epochs", cfg.review.recompute_epochs);
        s.finish();
    }
    root.finish();
    if (cfg.paths.output.empty()) cfg.paths.output = base.empty() ? fs::path("out") : base / "out";
    return cfg;
}

RunConfig load_config(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error(ErrorKind::io, "cannot read config " + path.string());
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str(), path.parent_path());
}

void require_inputs(const RunConfig& cfg, bool need_dataset) {
    const auto& p = cfg.paths;
    if (need_dataset) {
        for (const auto& [name, path] : {std::pair{"nodes", p.nodes}, {"schema", p.schema}, {"edges", p.edges}}) {
            if (path.empty()) {
                throw Error(ErrorKind::config, std::string("paths.") + name + " is not set");
            }
        }
    }
    for (const auto& path : {p.nodes, p.schema, p.edges, p.cases, p.truth, p.risk}) {
        if (!path.empty() && !fs::exists(path)) {
            throw Error(ErrorKind::io, "missing input file " + path.string());
        }
    }
}

Dataset load_dataset(const RunConfig& cfg) {
    require_inputs(cfg, true);
    Dataset ds;
    ds.nodes = data::load_nodes(cfg.paths.nodes, cfg.paths.schema);
    ds.edges = data::load_edges(cfg.paths.edges, ds.nodes);
    ds.features = data::preprocess(ds.nodes, cfg.preprocess);
    if (!cfg.paths.cases.empty()) {
        ds.cases = disambig::load_cases(cfg.paths.cases, ds.nodes);
        if (!cfg.paths.truth.empty()) disambig::load_truth(cfg.paths.truth, ds.cases, ds.nodes);
    }
    return ds;
}

Eigen::MatrixXd resolution_embeddings(const checkpoint::Checkpoint& ckpt, const Dataset& ds) {
    checkpoint::require_compatible(ckpt, ds.features);
    const auto confident = data::unique_pairs(ds.edges, data::Confidence::confident);
    return gat::embed(ckpt.model, ds.features.values, data::Graph::from_pairs(ds.features.rows(), confident));
}

explain::Explanation explain_case(const gat::GatModel<double>& model, const Dataset& ds, const data::Graph& graph,
                                  const disambig::AmbiguityCase& c, const disambig::Resolution& r,
                                  const explain::ExplainConfig& cfg, std::uint64_t seed) {
    const Index target = c.kind == disambig::CaseKind::pair ? r.chosen : c.first;
    auto ec = cfg;
    ec.seed = derive_seed(seed, "explain-" + c.id);
    return explain::explain_link(model, ds.features, graph, c.source, target, ec);
}

std::string cmd_synth(const RunConfig& cfg) {
    auto sc = cfg.synth;
    sc.seed = cfg.seed;
    const auto ds = synth::generate(sc);
    synth::write_dataset(ds, cfg.paths.output);
    std::ostringstream os;
    os << "wrote synthetic dataset to " << cfg.paths.output.string() << ": " << ds.nodes.size() << " nodes, "
       << ds.edges.count(data::Confidence::confident) << " confident and "
       << ds.edges.count(data::Confidence::uncertain) << " uncertain nominations, " << ds.cases.size()
       << " planted cases";
    return os.str();
}

std::string cmd_train(const RunConfig& cfg) {
    const auto ds = load_dataset(cfg);
    const auto n = ds.features.rows();
    const auto confident = data::unique_pairs(ds.edges, data::Confidence::confident);
    const auto uncertain = data::unique_pairs(ds.edges, data::Confidence::uncertain);
    const data::PairSet all_edges(data::unique_pairs(ds.edges));

    checkpoint::Checkpoint ckpt;
    ckpt.seed = cfg.seed;
    ckpt.split = data::split_edges(confident, cfg.split, derive_seed(cfg.seed, "split"));
    ckpt.train = cfg.train;
    ckpt.train.seed = derive_seed(cfg.seed, "train");
    const auto init = gat::init_model(cfg.architecture, ds.features.cols(), derive_seed(cfg.seed, "init"));
    const auto result = gat::train(init, ds.features.values, data::Graph::from_pairs(n, ckpt.split.train), ckpt.split,
                                   ckpt.train, uncertain);
    ckpt.model = result.model;
    ckpt.best_epoch = result.best_epoch;
    ckpt.column_map_hash = ds.features.column_map_hash();
    ckpt.column_map = ds.features.column_map_json();

    if (ckpt.split.validation.empty()) {
        throw Error(ErrorKind::data, "validation split is empty; cannot calibrate the threshold");
    }
    Rng rng(derive_seed(cfg.seed, "validation-negatives"));
    const auto negatives = gat::sample_non_edges(n, ckpt.split.validation.size(), all_edges, rng);
    ckpt.threshold = bench::calibrate_held_out(ckpt.model, ds.features.values, ckpt.split.train, ckpt.split.validation,
                                               negatives, cfg.resolve.metric);

    checkpoint::save(checkpoint_path(cfg), ckpt, ds.nodes);
    write_with(cfg.paths.output / "train_history.csv", [&](std::ostream& os) {
        os << "epoch,train_loss,validation_loss\n";
        for (const auto& r : result.history) {
            os << r.epoch << ',' << data::format_double(r.train_loss) << ',' << data::format_double(r.validation_loss)
               << '\n';
        }
    });
    std::ostringstream os;
    os << "trained on " << ckpt.split.train.size() << " edges (" << ckpt.split.validation.size() << " validation, "
       << ckpt.split.test.size() << " test); best epoch " << result.best_epoch << " of " << result.history.size()
       << ", validation loss " << fixed(result.best_validation_loss, 4) << "; tau " << fixed(ckpt.threshold.tau, 4)
       << " (F1 " << fixed(ckpt.threshold.f1) << "); checkpoint " << checkpoint_path(cfg).string();
    return os.str();
}

std::string cmd_resolve(const RunConfig& cfg) {
    const auto ds = load_dataset(cfg);
    const auto ckpt = checkpoint::load(checkpoint_path(cfg), ds.nodes);
    const Eigen::MatrixXd z = resolution_embeddings(ckpt, ds);
    const auto resolved = disambig::resolve_edge_list(ds.edges, ds.cases, z, ckpt.threshold.tau, cfg.resolve);

    write_with(cfg.paths.output / "resolutions.jsonl",
               [&](std::ostream& os) { disambig::write_resolution_log(os, resolved.log, ds.nodes); });
    write_with(cfg.paths.output / "edges_disambiguated.csv",
               [&](std::ostream& os) { data::write_edges(os, resolved.edges, ds.nodes); });

    const std::size_t confident = ds.edges.count(data::Confidence::confident);
    const std::size_t accepted = resolved.edges.size() - confident;
    std::ostringstream os;
    os << "resolved " << resolved.log.size() << " case(s): " << accepted << " link(s) accepted, edge count "
       << confident << " -> " << resolved.edges.size();

    // Accuracy on cases with known truth.
    std::vector<int> pair_pred, pair_label, exist_pred, exist_label;
    for (std::size_t k = 0; k < resolved.cases.size(); ++k) {
        const auto& c = resolved.cases[k];
        const auto& r = resolved.log[k];
        if (c.kind == disambig::CaseKind::pair && c.truth_node) {
            pair_pred.push_back(r.chosen == *c.truth_node ? 1 : 0);
            pair_label.push_back(1);
        } else if (c.kind == disambig::CaseKind::existence && c.truth_exists) {
            exist_pred.push_back(r.exists ? 1 : 0);
            exist_label.push_back(*c.truth_exists ? 1 : 0);
        }
    }
    if (!pair_pred.empty() || !exist_pred.empty()) {
        write_with(cfg.paths.output / "resolve_metrics.csv", [&](std::ostream& out) {
            out << "task,cases,precision,recall,f1,accuracy\n";
            for (const auto& [task, pred, label] :
                 {std::tuple{"pair", &pair_pred, &pair_label}, std::tuple{"existence", &exist_pred, &exist_label}}) {
                if (pred->empty()) continue;
                const auto m = metrics::classification_metrics(*pred, *label);
                out << task << ',' << pred->size() << ',' << data::format_double(m.precision) << ','
                    << data::format_double(m.recall) << ',' << data::format_double(m.f1) << ','
                    << data::format_double(m.accuracy) << '\n';
                os << "; " << task << " accuracy " << fixed(m.accuracy) << " on " << pred->size();
            }
        });
    }
    return os.str();
}

std::string cmd_simulate(const RunConfig& cfg) {
    const auto ds = load_dataset(cfg);
    bench::SimulateConfig sc;
    sc.architecture = cfg.architecture;
    sc.train = cfg.train;
    sc.tree = cfg.simulate.tree;
    sc.mlp = cfg.simulate.mlp;
    sc.ratios = cfg.split;
    sc.pair_cases = cfg.simulate.pair_cases;
    sc.resolve = cfg.resolve;
    std::vector<bench::BenchmarkRow> rows;
    for (std::size_t k = 0; k < cfg.simulate.seeds; ++k) {
        for (auto& r : bench::simulate_benchmark(ds.features, ds.edges, sc, cfg.seed + k)) rows.push_back(std::move(r));
    }
    write_with(cfg.paths.output / "simulate.csv", [&](std::ostream& os) { bench::write_benchmark_csv(os, rows); });
    write_with(cfg.paths.output / "simulate.txt", [&](std::ostream& os) { bench::write_benchmark_text(os, rows); });

    std::map<std::string, std::pair<double, int>> mean;
    for (const auto& r : rows) {
        auto& m = mean[r.model + " " + bench::to_string(r.task)];
        m.first += r.metrics.accuracy;
        ++m.second;
    }
    std::ostringstream os;
    os << "simulated ambiguity over " << cfg.simulate.seeds << " seed(s); mean accuracy:";
    for (const auto& [key, m] : mean) os << ' ' << key << ' ' << fixed(m.first / m.second) << ';';
    return os.str();
}

std::string cmd_risk(const RunConfig& cfg) {
    if (cfg.paths.risk.empty()) {
        throw Error(ErrorKind::config, "paths.risk is not set");
    }
    const auto ds = load_dataset(cfg);
    const auto risk_table = data::load_nodes(cfg.paths.risk, cfg.paths.risk.parent_path() / "risk_schema.json");
    const auto rd = risk::prepare_risk_data(ds.nodes, risk_table, cfg.preprocess, cfg.risk.model.scale);

    std::map<std::string, fs::path> lists = cfg.risk.edge_lists;
    if (lists.empty()) {
        lists["original"] = cfg.paths.edges.parent_path() / "edges_corrupted.csv";
        lists["disambiguated"] = cfg.paths.output / "edges_disambiguated.csv";
    }
    std::vector<risk::NamedGraph> graphs;
    for (const auto& [name, path] : lists) {
        if (!fs::exists(path)) {
            throw Error(ErrorKind::io, "missing edge list '" + name + "' at " + path.string() +
                                           (name == "disambiguated" ? "; run the resolve command first" : ""));
        }
        const auto edges = data::load_edges(path, ds.nodes);
        graphs.push_back({name, data::build_graph(edges, ds.nodes.size(), data::EdgeFilter::all)});
    }
    // "original" first, so the comparison reads left to right.
    std::stable_sort(graphs.begin(), graphs.end(),
                     [](const auto& a, const auto& b) { return a.name == "original" && b.name != "original"; });

    std::vector<risk::AblationRow> rows;
    for (std::size_t k = 0; k < cfg.risk.seeds; ++k) {
        for (auto& r : risk::ablation_compare(rd, graphs, cfg.risk.kinds, cfg.risk.model, cfg.seed + k)) {
            rows.push_back(std::move(r));
        }
    }
    write_with(cfg.paths.output / "risk.csv", [&](std::ostream& os) { risk::write_ablation_csv(os, rows); });
    write_with(cfg.paths.output / "risk.txt", [&](std::ostream& os) { risk::write_ablation_text(os, rows); });

    std::ostringstream os;
    os << "risk prediction over " << cfg.risk.seeds << " seed(s), " << rd.supervised().size() << " scored nodes ("
       << rd.excluded.size() << " excluded for missing indicators); held-out MAE:";
    std::map<std::string, std::pair<double, int>> mean;
    for (const auto& r : rows) {
        if (r.evaluation != "test") continue;
        auto& m = mean[r.model + "/" + r.edge_list];
        m.first += r.result.mae;
        ++m.second;
    }
    for (const auto& [key, m] : mean) os << ' ' << key << ' ' << fixed(m.first / m.second) << ';';
    return os.str();
}

std::string cmd_explain(const RunConfig& cfg) {
    const auto ds = load_dataset(cfg);
    const auto ckpt = checkpoint::load(checkpoint_path(cfg), ds.nodes);
    const Eigen::MatrixXd z = resolution_embeddings(ckpt, ds);
    const auto graph =
        data::Graph::from_pairs(ds.features.rows(), data::unique_pairs(ds.edges, data::Confidence::confident));

    auto cases = ds.cases;
    for (auto& c : disambig::implicit_existence_cases(ds.edges, ds.cases)) cases.push_back(std::move(c));
    if (cases.size() > cfg.explain_cases) cases.resize(cfg.explain_cases);

    std::vector<explain::Explanation> out;
    for (const auto& c : cases) {
        const auto r = disambig::resolve_case(c, z, ckpt.threshold.tau, cfg.resolve);
        out.push_back(explain_case(ckpt.model, ds, graph, c, r, cfg.explain, cfg.seed));
    }
    write_with(cfg.paths.output / "explanations.jsonl", [&](std::ostream& os) {
        for (const auto& e : out) os << explain::explanation_to_json(e, ds.nodes) << '\n';
    });
    std::ostringstream os;
    os << "explained " << out.size() << " case(s)";
    if (!out.empty()) {
        const auto report = explain::explanation_report(out);
        write_with(cfg.paths.output / "explain_report.csv",
                   [&](std::ostream& s) { explain::write_report_csv(s, report); });
        write_with(cfg.paths.output / "explain_report.txt",
                   [&](std::ostream& s) { explain::write_report_text(s, report); });
        os << "; most frequent top feature: " << report.features.front().name << " ("
           << report.features.front().count << " of " << report.cases << ")";
    }
    return os.str();
}

} // namespace peernet::pipeline
