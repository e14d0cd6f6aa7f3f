#include "peernet/synth.hpp"

#include <algorithm>
#include <cstdio>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include "peernet/error.hpp"
#include "peernet/gat.hpp"
#include "peernet/rng.hpp"

namespace peernet::synth {

namespace {

AttributeSpec categorical(std::string name, std::vector<std::string> cats, std::vector<double> weights, double beta,
                          double missing = 0.02) {
    AttributeSpec a;
    a.name = std::move(name);
    a.kind = data::ColumnKind::categorical;
    a.categories = std::move(cats);
    a.weights = std::move(weights);
    a.homophily = beta;
    a.missing_rate = missing;
    return a;
}

AttributeSpec binary(std::string name, double p_one, double beta, double missing = 0.02) {
    AttributeSpec a;
    a.name = std::move(name);
    a.kind = data::ColumnKind::binary;
    a.categories = {"0", "1"};
    a.weights = {1.0 - p_one, p_one};
    a.homophily = beta;
    a.missing_rate = missing;
    return a;
}

AttributeSpec numeric(std::string name, double lo, double hi, double beta, double missing = 0.02) {
    AttributeSpec a;
    a.name = std::move(name);
    a.kind = data::ColumnKind::numeric;
    a.min = lo;
    a.max = hi;
    a.integer = true;
    a.homophily = beta;
    a.missing_rate = missing;
    return a;
}

std::size_t draw_category(Rng& rng, const std::vector<double>& weights) {
    const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
    double u = uniform01(rng) * total;
    for (std::size_t k = 0; k < weights.size(); ++k) {
        if (u < weights[k]) return k;
        u -= weights[k];
    }
    return weights.size() - 1;
}

std::string format_value(double v, bool integer) {
    if (integer) {
        return std::to_string(static_cast<long long>(std::llround(v)));
    }
    return data::format_double(v);
}

void write_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw Error(ErrorKind::io, "cannot write " + path.string());
    }
    out << text;
}

} // namespace

std::vector<AttributeSpec> default_attributes() {
    const std::vector<std::string> education{"HS", "SomeCollege", "Associate", "Bachelor", "Graduate"};
    std::vector<AttributeSpec> a;
    a.push_back(numeric("Age", 19, 45, 4.0));
    a.push_back(categorical("Race", {"White", "Black", "Hispanic", "Asian", "Other"}, {0.55, 0.17, 0.17, 0.05, 0.06}, 1.6));
    a.push_back(categorical("ed", education, {0.3, 0.3, 0.15, 0.18, 0.07}, 1.2));
    a.push_back(categorical("marital_status", {"Single", "Married", "Divorced", "Separated"}, {0.4, 0.4, 0.15, 0.05}, 2.4));
    a.push_back(binary("Romantic", 0.55, 2.4));
    a.push_back(categorical("Gender", {"M", "F"}, {0.8, 0.2}, 3.0, 0.01));
    a.push_back(categorical("Sexuality", {"Straight", "Gay", "Bisexual"}, {0.88, 0.05, 0.07}, 1.0));
    a.push_back(numeric("Siblings", 0, 6, 0.0));
    a.push_back(numeric("Household", 1, 6, 0.6));
    a.push_back(categorical("dad_ed", education, {0.4, 0.25, 0.1, 0.17, 0.08}, 0.8, 0.08));
    a.push_back(categorical("mom_ed", education, {0.38, 0.27, 0.1, 0.17, 0.08}, 0.8, 0.08));
    a.push_back(numeric("military_join", 1995, 2015, 3.0));
    a.push_back(categorical("Rank", {"E1", "E2", "E3", "E4", "E5", "E6", "E7", "O1", "O2", "O3"},
                            {0.04, 0.08, 0.15, 0.22, 0.2, 0.12, 0.07, 0.04, 0.04, 0.04}, 1.6));
    a.push_back(categorical("MOS", {"11B", "12B", "25U", "31B", "35F", "68W", "88M", "92Y"},
                            {0.2, 0.1, 0.12, 0.12, 0.1, 0.14, 0.12, 0.1}, 2.0));
    a.push_back(binary("deploy_ever", 0.7, 0.6));
    a.push_back(numeric("Deployments", 0, 5, 1.0));
    a.push_back(categorical("deploy_where", {"Iraq", "Afghanistan", "Kuwait", "Other"}, {0.4, 0.35, 0.15, 0.1}, 0.0, 0.6));
    std::vector<std::string> units;
    for (int u = 1; u <= 60; ++u) units.push_back("U" + std::to_string(u));
    auto unit = categorical("Unit", units, std::vector<double>(units.size(), 1.0), 12.0, 0.0);
    unit.observed = false;
    a.push_back(std::move(unit));
    return a;
}

void SynthConfig::validate() const {
    if (n < 2) {
        throw Error(ErrorKind::config, "synthetic node count must be at least 2");
    }
    const double pairs = 0.5 * static_cast<double>(n) * static_cast<double>(n - 1);
    if (!(target_edges > 0.0) || target_edges >= pairs) {
        throw Error(ErrorKind::config, "edge target must lie in (0, n(n-1)/2)");
    }
    if (!(existence_true_fraction >= 0.0 && existence_true_fraction <= 1.0) ||
        !(decoy_quantile > 0.0 && decoy_quantile <= 1.0)) {
        throw Error(ErrorKind::config, "fractions must lie in [0, 1]");
    }
    if (attributes.empty()) {
        throw Error(ErrorKind::config, "at least one attribute is required");
    }
    for (const auto& a : attributes) {
        if (a.kind != data::ColumnKind::numeric && (a.categories.empty() || a.categories.size() != a.weights.size())) {
            throw Error(ErrorKind::config, "attribute '" + a.name + "' needs categories with matching weights");
        }
        if (a.kind == data::ColumnKind::numeric && !(a.max > a.min)) {
            throw Error(ErrorKind::config, "attribute '" + a.name + "' needs max > min");
        }
        if (!(a.missing_rate >= 0.0 && a.missing_rate < 1.0)) {
            throw Error(ErrorKind::config, "attribute '" + a.name + "' missing rate must lie in [0, 1)");
        }
    }
    if (risk.informative > extra_attributes) {
        throw Error(ErrorKind::config, "more informative risk attributes than extra attributes");
    }
}

// --- similarity -------------------------------------------------------------------

Similarity::Similarity(const std::vector<AttributeSpec>& specs, const data::NodeTable& nodes) {
    for (const auto& spec : specs) {
        auto col = nodes.column_index(spec.name);
        if (!col) {
            throw Error(ErrorKind::data, "attribute '" + spec.name + "' missing from node table");
        }
        Attr a;
        a.numeric = spec.kind == data::ColumnKind::numeric;
        a.beta = spec.homophily;
        a.values.resize(static_cast<std::size_t>(nodes.size()), std::numeric_limits<double>::quiet_NaN());
        for (Index r = 0; r < nodes.size(); ++r) {
            const auto& cell = nodes.cell(r, *col);
            if (!cell) continue;
            if (a.numeric) {
                a.values[static_cast<std::size_t>(r)] = (std::stod(*cell) - spec.min) / (spec.max - spec.min);
            } else {
                auto it = std::find(spec.categories.begin(), spec.categories.end(), *cell);
                a.values[static_cast<std::size_t>(r)] = static_cast<double>(it - spec.categories.begin());
            }
        }
        attrs_.push_back(std::move(a));
    }
}

double Similarity::eval(Index u, Index v, bool use_beta, double weight) const {
    double s = 0.0;
    for (const auto& a : attrs_) {
        const double xu = a.values[static_cast<std::size_t>(u)];
        const double xv = a.values[static_cast<std::size_t>(v)];
        const double b = use_beta ? a.beta : weight;
        if (std::isnan(xu) || std::isnan(xv)) {
            if (a.numeric) s -= b * 0.5;
            continue;
        }
        if (a.numeric) {
            s -= b * std::abs(xu - xv);
        } else if (xu == xv) {
            s += b;
        }
    }
    return s;
}

double Similarity::operator()(Index u, Index v) const { return eval(u, v, true, 0.0); }

double Similarity::unweighted(Index u, Index v, double weight) const { return eval(u, v, false, weight); }

// --- generation ---------------------------------------------------------------------

namespace {

data::NodeTable sample_attributes(const SynthConfig& cfg, Rng& rng) {
    std::vector<data::Column> cols;
    for (const auto& a : cfg.attributes) cols.push_back({a.name, a.kind});
    data::NodeTable table(cols);
    for (Index i = 0; i < cfg.n; ++i) {
        std::vector<data::NodeTable::Cell> cells;
        for (const auto& a : cfg.attributes) {
            const bool missing = uniform01(rng) < a.missing_rate;
            std::string value;
            if (a.kind == data::ColumnKind::numeric) {
                const double x = a.min + uniform01(rng) * (a.max - a.min);
                value = format_value(x, a.integer);
            } else {
                value = a.categories[draw_category(rng, a.weights)];
            }
            cells.emplace_back(missing ? std::nullopt : std::optional<std::string>(value));
        }
        table.add_row(std::to_string(1001 + i), std::move(cells));
    }
    return table;
}

data::NodeTable observed_columns(const SynthConfig& cfg, const data::NodeTable& full) {
    std::vector<data::Column> cols;
    std::vector<Index> keep;
    for (std::size_t k = 0; k < cfg.attributes.size(); ++k) {
        if (!cfg.attributes[k].observed) continue;
        cols.push_back(full.columns()[k]);
        keep.push_back(static_cast<Index>(k));
    }
    data::NodeTable out(cols);
    for (Index r = 0; r < full.size(); ++r) {
        std::vector<data::NodeTable::Cell> cells;
        for (Index k : keep) cells.push_back(full.cell(r, k));
        out.add_row(full.pid(r), std::move(cells));
    }
    return out;
}

// Intercept b such that Σ_pairs logistic(sim + b) = target.
double calibrate_intercept(const std::vector<double>& sims, double target) {
    auto expected = [&](double b) {
        double s = 0.0;
        for (double x : sims) s += gat::logistic(x + b);
        return s;
    };
    double lo = -60.0;
    double hi = 60.0;
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        (expected(mid) < target ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

data::NodeTable sample_risk(const SynthConfig& cfg, const data::NodeTable& nodes, const data::Graph& truth, Rng& rng) {
    const Index n = cfg.n;
    std::vector<data::Column> cols;
    char name[16];
    for (std::size_t k = 0; k < cfg.extra_attributes; ++k) {
        std::snprintf(name, sizeof(name), "mh_%03zu", k + 1);
        cols.push_back({name, k % 3 == 2 ? data::ColumnKind::binary : data::ColumnKind::numeric});
    }
    for (const auto& c : indicator_columns()) cols.push_back({c, data::ColumnKind::numeric});

    // extra attributes: Likert 0..4 (numeric) or 0/1 (binary)
    Eigen::MatrixXd extra(n, static_cast<Index>(cfg.extra_attributes));
    for (Index i = 0; i < n; ++i) {
        for (std::size_t k = 0; k < cfg.extra_attributes; ++k) {
            extra(i, static_cast<Index>(k)) = cols[k].kind == data::ColumnKind::binary
                                                  ? (uniform01(rng) < 0.3 ? 1.0 : 0.0)
                                                  : std::floor(uniform01(rng) * 5.0);
        }
    }

    // base risk from the informative attributes (positive coefficients), standardized
    Eigen::VectorXd base = Eigen::VectorXd::Zero(n);
    for (std::size_t k = 0; k < cfg.risk.informative; ++k) {
        const double coef = 0.5 + 0.5 * uniform01(rng);
        Eigen::VectorXd col = extra.col(static_cast<Index>(k));
        const double mean = col.mean();
        const double sd = std::sqrt((col.array() - mean).square().mean());
        if (sd > 0.0) base += coef * (col.array() - mean).matrix() / sd;
    }
    if (auto dep = nodes.column_index("Deployments")) {
        Eigen::VectorXd d(n);
        for (Index i = 0; i < n; ++i) {
            const auto& c = nodes.cell(i, *dep);
            d(i) = c ? std::stod(*c) : 0.0;
        }
        const double mean = d.mean();
        const double sd = std::sqrt((d.array() - mean).square().mean());
        if (sd > 0.0) base += 0.5 * (d.array() - mean).matrix() / sd;
    }
    {
        const double mean = base.mean();
        const double sd = std::sqrt((base.array() - mean).square().mean());
        base = (base.array() - mean) / (sd > 0.0 ? sd : 1.0);
    }

    Eigen::VectorXd latent(n);
    for (Index i = 0; i < n; ++i) {
        double exposure = 0.0;
        const Index deg = truth.degree(i);
        if (deg > 0) {
            for (Index j : truth.neighbors(i)) {
                if (j != i) exposure += base(j);
            }
            exposure /= static_cast<double>(deg);
        }
        latent(i) = base(i) + cfg.risk.exposure_weight * exposure + cfg.risk.noise * normal(rng);
    }

    // SBQ-R-like items; totals span 3..18
    const double lo[4] = {1, 1, 1, 0};
    const double hi[4] = {4, 5, 5, 4};
    const double center[4] = {1.4, 1.4, 1.3, 0.6};
    const double slope[4] = {0.8, 0.9, 0.9, 0.7};

    data::NodeTable risk(cols);
    for (Index i = 0; i < n; ++i) {
        std::vector<data::NodeTable::Cell> cells;
        for (std::size_t k = 0; k < cfg.extra_attributes; ++k) {
            cells.emplace_back(format_value(extra(i, static_cast<Index>(k)), true));
        }
        const bool drop = uniform01(rng) < cfg.risk.missing_indicator_rate;
        for (int k = 0; k < 4; ++k) {
            const double raw = center[k] + slope[k] * latent(i) + 0.25 * normal(rng);
            const double item = std::clamp(std::round(raw), lo[k], hi[k]);
            if (drop && k == 3) {
                cells.emplace_back(std::nullopt);
            } else {
                cells.emplace_back(format_value(item, true));
            }
        }
        risk.add_row(nodes.pid(i), std::move(cells));
    }
    return risk;
}

} // namespace

SynthDataset generate(const SynthConfig& cfg) {
    cfg.validate();
    SynthDataset ds;
    Rng rng(cfg.seed);
    const auto full = sample_attributes(cfg, rng);
    ds.nodes = observed_columns(cfg, full);
    const Index n = cfg.n;

    Similarity sim(cfg.attributes, full);
    std::vector<double> sims;
    sims.reserve(static_cast<std::size_t>(n * (n - 1) / 2));
    for (Index u = 0; u < n; ++u) {
        for (Index v = u + 1; v < n; ++v) sims.push_back(sim(u, v));
    }
    ds.intercept = calibrate_intercept(sims, cfg.target_edges);

    std::vector<NodePair> true_pairs;
    std::size_t k = 0;
    for (Index u = 0; u < n; ++u) {
        for (Index v = u + 1; v < n; ++v, ++k) {
            if (uniform01(rng) < gat::logistic(sims[k] + ds.intercept)) {
                true_pairs.emplace_back(u, v);
            }
        }
    }
    const auto true_graph = data::Graph::from_pairs(n, true_pairs);
    const std::size_t n_exist_true =
        static_cast<std::size_t>(std::llround(cfg.existence_true_fraction * static_cast<double>(cfg.existence_cases)));
    if (cfg.pair_cases + n_exist_true > true_pairs.size()) {
        throw Error(ErrorKind::config, "not enough generated edges to plant the requested ambiguities");
    }

    // reporting direction: ego chosen at random
    std::vector<data::Edge> directed;
    for (const auto& [a, b] : true_pairs) {
        const bool flip = uniform01(rng) < 0.5;
        directed.push_back({flip ? b : a, flip ? a : b, data::Confidence::confident});
    }
    ds.true_edges.edges = directed;

    std::vector<std::size_t> order(directed.size());
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);

    std::vector<bool> uncertain(directed.size(), false);
    std::vector<data::Edge> uncertain_rows;
    std::vector<data::Edge> corrupted_extra;
    std::size_t cursor = 0;

    // pair cases: a true alter plus a decoy that looks like it
    for (std::size_t c = 0; c < cfg.pair_cases; ++c) {
        const auto idx = order[cursor++];
        const auto e = directed[idx];
        uncertain[idx] = true;
        std::vector<std::pair<double, Index>> candidates;
        for (Index w = 0; w < n; ++w) {
            if (w == e.src || w == e.dst || true_graph.adjacent(e.src, w)) continue;
            candidates.emplace_back(sim.unweighted(e.dst, w), w);
        }
        std::sort(candidates.begin(), candidates.end(), [](const auto& x, const auto& y) {
            return x.first != y.first ? x.first > y.first : x.second < y.second;
        });
        const auto top = std::max<std::size_t>(
            1, static_cast<std::size_t>(std::ceil(cfg.decoy_quantile * static_cast<double>(candidates.size()))));
        const Index decoy = candidates[uniform_index(rng, top)].second;

        disambig::AmbiguityCase pc;
        pc.id = "pair-" + std::to_string(c + 1);
        pc.kind = disambig::CaseKind::pair;
        pc.provenance = disambig::Provenance::planted;
        pc.source = e.src;
        const bool swap = uniform01(rng) < 0.5;
        pc.first = swap ? decoy : e.dst;
        pc.second = swap ? e.dst : decoy;
        pc.truth_node = e.dst;
        ds.cases.push_back(pc);
        uncertain_rows.push_back({e.src, pc.first, data::Confidence::uncertain});
        uncertain_rows.push_back({e.src, pc.second, data::Confidence::uncertain});
        corrupted_extra.push_back({e.src, decoy, data::Confidence::confident});
    }

    // existence cases: some real links reported with low confidence, some
    // name collisions pointing at an unrelated member
    for (std::size_t c = 0; c < cfg.existence_cases; ++c) {
        disambig::AmbiguityCase ec;
        ec.id = "exist-" + std::to_string(c + 1);
        ec.kind = disambig::CaseKind::existence;
        ec.provenance = disambig::Provenance::planted;
        if (c < n_exist_true) {
            const auto idx = order[cursor++];
            const auto e = directed[idx];
            uncertain[idx] = true;
            ec.source = e.src;
            ec.first = e.dst;
            ec.truth_exists = true;
        } else {
            Index u = 0;
            Index v = 0;
            data::PairSet used;
            for (const auto& r : uncertain_rows) used.insert(r.src, r.dst);
            do {
                u = static_cast<Index>(uniform_index(rng, static_cast<std::size_t>(n)));
                v = static_cast<Index>(uniform_index(rng, static_cast<std::size_t>(n)));
            } while (u == v || true_graph.adjacent(u, v) || used.contains(u, v));
            ec.source = u;
            ec.first = v;
            ec.truth_exists = false;
        }
        ds.cases.push_back(ec);
        uncertain_rows.push_back({ec.source, ec.first, data::Confidence::uncertain});
        corrupted_extra.push_back({ec.source, ec.first, data::Confidence::confident});
    }
    // interleave case order so truth is not positional
    std::shuffle(ds.cases.begin(), ds.cases.end(), rng);

    for (std::size_t i = 0; i < directed.size(); ++i) {
        if (!uncertain[i]) {
            ds.edges.edges.push_back(directed[i]);
            ds.corrupted_edges.edges.push_back(directed[i]);
        }
    }
    ds.edges.edges.insert(ds.edges.edges.end(), uncertain_rows.begin(), uncertain_rows.end());
    ds.corrupted_edges.edges.insert(ds.corrupted_edges.edges.end(), corrupted_extra.begin(), corrupted_extra.end());

    ds.risk = sample_risk(cfg, ds.nodes, true_graph, rng);
    return ds;
}

void write_dataset(const SynthDataset& ds, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    auto dump = [&](const std::string& file, auto&& fn) {
        std::ostringstream os;
        fn(os);
        write_file(dir / file, os.str());
    };
    dump("nodes.csv", [&](std::ostream& os) { data::write_nodes(os, ds.nodes); });
    dump("schema.json", [&](std::ostream& os) { data::write_schema(os, ds.nodes); });
    dump("edges.csv", [&](std::ostream& os) { data::write_edges(os, ds.edges, ds.nodes); });
    dump("edges_true.csv", [&](std::ostream& os) { data::write_edges(os, ds.true_edges, ds.nodes); });
    dump("edges_corrupted.csv", [&](std::ostream& os) { data::write_edges(os, ds.corrupted_edges, ds.nodes); });
    dump("cases.csv", [&](std::ostream& os) { disambig::write_cases(os, ds.cases, ds.nodes, false); });
    dump("truth.csv", [&](std::ostream& os) { disambig::write_truth(os, ds.cases, ds.nodes); });
    dump("risk.csv", [&](std::ostream& os) { data::write_nodes(os, ds.risk); });
    dump("risk_schema.json", [&](std::ostream& os) { data::write_schema(os, ds.risk); });
}

} // namespace peernet::synth
