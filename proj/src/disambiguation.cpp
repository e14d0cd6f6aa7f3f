#include "peernet/disambiguation.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <set>

#include <json.hpp>

#include "peernet/error.hpp"
#include "peernet/metrics.hpp"
#include "peernet/rng.hpp"
#include "peernet/train.hpp"

namespace peernet::disambig {

std::string to_string(CaseKind k) { return k == CaseKind::pair ? "pair" : "existence"; }

std::string to_string(Provenance p) {
    switch (p) {
        case Provenance::real: return "real";
        case Provenance::simulated: return "simulated";
        case Provenance::planted: return "planted";
    }
    return "real";
}

CaseKind parse_case_kind(const std::string& s) {
    if (s == "pair") return CaseKind::pair;
    if (s == "existence") return CaseKind::existence;
    throw Error(ErrorKind::data, "unknown case kind '" + s + "'");
}

Provenance parse_provenance(const std::string& s) {
    if (s == "real") return Provenance::real;
    if (s == "simulated") return Provenance::simulated;
    if (s == "planted") return Provenance::planted;
    throw Error(ErrorKind::data, "unknown case provenance '" + s + "'");
}

DistanceMetric parse_metric(const std::string& s) {
    if (s == "euclidean") return DistanceMetric::euclidean;
    if (s == "cosine") return DistanceMetric::cosine;
    throw Error(ErrorKind::config, "unknown distance metric '" + s + "'");
}

void AmbiguityCase::validate() const {
    if (kind == CaseKind::pair) {
        if (first == second || first == source || second == source) {
            throw Error(ErrorKind::data, "case " + id + ": pair candidates must differ from each other and the source");
        }
    } else if (first == source) {
        throw Error(ErrorKind::data, "case " + id + ": candidate equals the source");
    }
}

double embedding_distance(const Eigen::Ref<const Eigen::RowVectorXd>& zu, const Eigen::Ref<const Eigen::RowVectorXd>& zv,
                          DistanceMetric metric) {
    if (metric == DistanceMetric::euclidean) {
        return (zu - zv).norm();
    }
    const double denom = zu.norm() * zv.norm();
    if (denom == 0.0) {
        return 1.0;
    }
    return std::max(0.0, 1.0 - zu.dot(zv) / denom);
}

Resolution resolve_pair(Index u, Index v1, Index v2, const Eigen::MatrixXd& z, const ResolveOptions& opt) {
    if (u == v1 || u == v2) {
        throw Error(ErrorKind::data, "source node is one of the candidates");
    }
    if (v1 == v2) {
        throw Error(ErrorKind::data, "pair candidates are identical");
    }
    Resolution r;
    r.kind = CaseKind::pair;
    r.source = u;
    r.first = v1;
    r.second = v2;
    r.exists = true;
    r.first_distance = embedding_distance(z.row(u), z.row(v1), opt.metric);
    r.second_distance = embedding_distance(z.row(u), z.row(v2), opt.metric);
    r.margin = std::abs(r.first_distance - r.second_distance);
    if (r.first_distance < r.second_distance) {
        r.chosen = v1;
    } else if (r.second_distance < r.first_distance) {
        r.chosen = v2;
    } else {
        r.chosen = std::min(v1, v2);
    }
    r.low_confidence = r.margin < opt.margin_epsilon;
    return r;
}

Resolution link_exists(Index u, Index v, const Eigen::MatrixXd& z, double tau, const ResolveOptions& opt) {
    Resolution r;
    r.kind = CaseKind::existence;
    r.source = u;
    r.first = v;
    r.first_distance = embedding_distance(z.row(u), z.row(v), opt.metric);
    r.threshold = tau;
    r.exists = r.first_distance < tau;
    r.chosen = r.exists ? v : -1;
    r.margin = std::abs(r.first_distance - tau);
    r.low_confidence = r.margin < opt.margin_epsilon;
    return r;
}

Resolution resolve_case(const AmbiguityCase& c, const Eigen::MatrixXd& z, double tau, const ResolveOptions& opt) {
    c.validate();
    Resolution r = c.kind == CaseKind::pair ? resolve_pair(c.source, c.first, c.second, z, opt)
                                            : link_exists(c.source, c.first, z, tau, opt);
    r.case_id = c.id;
    return r;
}

Threshold calibrate_threshold(std::span<const double> distances, std::span<const int> labels) {
    if (distances.size() != labels.size()) {
        throw Error(ErrorKind::data, "distance and label counts differ");
    }
    const auto positives = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), 1));
    if (positives == 0 || positives == labels.size()) {
        throw Error(ErrorKind::data, "threshold calibration needs both positive and negative cases");
    }
    std::vector<std::size_t> order(distances.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return distances[a] < distances[b]; });

    Threshold best;
    best.validation_size = distances.size();
    best.f1 = -1.0;
    metrics::ConfusionCounts c;
    c.fn = positives;
    c.tn = labels.size() - positives;
    // sweep: after consuming a run of equal distances, all of them fall below
    // any cutoff placed before the next distinct value
    std::size_t k = 0;
    while (k < order.size()) {
        const double d = distances[order[k]];
        while (k < order.size() && distances[order[k]] == d) {
            if (labels[order[k]] == 1) {
                ++c.tp;
                --c.fn;
            } else {
                ++c.fp;
                --c.tn;
            }
            ++k;
        }
        if (k == order.size()) {
            break;
        }
        const double tau = 0.5 * (d + distances[order[k]]);
        const double f1 = metrics::classification_metrics(c).f1;
        if (f1 >= best.f1) {  // later cutoffs are larger: ties favour recall
            best.f1 = f1;
            best.tau = tau;
        }
    }
    if (best.f1 < 0.0) {
        // a single distinct distance: accept everything
        best.tau = distances[order.back()] + 1.0;
        best.f1 = metrics::classification_metrics(c).f1;
    }
    return best;
}

Threshold calibrate_threshold(std::span<const NodePair> pairs, std::span<const int> labels, const Eigen::MatrixXd& z,
                              DistanceMetric metric) {
    std::vector<double> d;
    d.reserve(pairs.size());
    for (const auto& [a, b] : pairs) {
        d.push_back(embedding_distance(z.row(a), z.row(b), metric));
    }
    return calibrate_threshold(d, labels);
}

std::vector<AmbiguityCase> simulate_pair_cases(std::span<const NodePair> test_edges, const data::PairSet& all_edges,
                                               Index n, std::size_t count, std::uint64_t seed) {
    std::vector<AmbiguityCase> out;
    if (count == 0) {
        return out;
    }
    if (test_edges.empty()) {
        throw Error(ErrorKind::data, "pair simulation needs a non-empty test split");
    }
    Rng rng(seed);
    const std::size_t max_retries = 1000;
    out.reserve(count);
    while (out.size() < count) {
        bool placed = false;
        for (std::size_t attempt = 0; attempt < max_retries && !placed; ++attempt) {
            const auto& e = test_edges[uniform_index(rng, test_edges.size())];
            const bool flip = uniform01(rng) < 0.5;
            const Index u = flip ? e.second : e.first;
            const Index v1 = flip ? e.first : e.second;
            for (std::size_t inner = 0; inner < 64; ++inner) {
                const auto v2 = static_cast<Index>(uniform_index(rng, static_cast<std::size_t>(n)));
                if (v2 == u || v2 == v1 || all_edges.contains(u, v2)) {
                    continue;
                }
                AmbiguityCase c;
                c.id = "sim-pair-" + std::to_string(out.size());
                c.kind = CaseKind::pair;
                c.provenance = Provenance::simulated;
                c.source = u;
                const bool swap = uniform01(rng) < 0.5;
                c.first = swap ? v2 : v1;
                c.second = swap ? v1 : v2;
                c.truth_node = v1;
                out.push_back(c);
                placed = true;
                break;
            }
        }
        if (!placed) {
            throw Error(ErrorKind::data, "no valid decoy found after bounded retries");
        }
    }
    return out;
}

std::vector<AmbiguityCase> simulate_link_cases(std::span<const NodePair> test_edges, const data::PairSet& all_edges,
                                               Index n, std::uint64_t seed) {
    if (test_edges.empty()) {
        throw Error(ErrorKind::data, "link simulation needs a non-empty test split");
    }
    Rng rng(seed);
    std::vector<AmbiguityCase> out;
    for (const auto& [a, b] : test_edges) {
        AmbiguityCase c;
        c.id = "sim-link-" + std::to_string(out.size());
        c.kind = CaseKind::existence;
        c.provenance = Provenance::simulated;
        c.source = a;
        c.first = b;
        c.truth_exists = true;
        out.push_back(c);
    }
    for (const auto& [a, b] : gat::sample_non_edges(n, test_edges.size(), all_edges, rng)) {
        AmbiguityCase c;
        c.id = "sim-link-" + std::to_string(out.size());
        c.kind = CaseKind::existence;
        c.provenance = Provenance::simulated;
        c.source = a;
        c.first = b;
        c.truth_exists = false;
        out.push_back(c);
    }
    return out;
}

std::vector<AmbiguityCase> implicit_existence_cases(const data::EdgeTable& edges, std::span<const AmbiguityCase> cases) {
    data::PairSet covered;
    for (const auto& c : cases) {
        covered.insert(c.source, c.first);
        if (c.kind == CaseKind::pair) {
            covered.insert(c.source, c.second);
        }
    }
    std::vector<AmbiguityCase> out;
    for (const auto& e : edges.edges) {
        if (e.confidence != data::Confidence::uncertain || covered.contains(e.src, e.dst)) {
            continue;
        }
        covered.insert(e.src, e.dst);
        AmbiguityCase c;
        c.id = "edge-" + std::to_string(e.src) + "-" + std::to_string(e.dst);
        c.kind = CaseKind::existence;
        c.provenance = Provenance::real;
        c.source = e.src;
        c.first = e.dst;
        out.push_back(c);
    }
    return out;
}

ResolvedEdges resolve_edge_list(const data::EdgeTable& edges, std::span<const AmbiguityCase> cases,
                                const Eigen::MatrixXd& z, double tau, const ResolveOptions& opt) {
    ResolvedEdges out;
    out.cases.assign(cases.begin(), cases.end());
    for (auto& c : implicit_existence_cases(edges, cases)) {
        out.cases.push_back(std::move(c));
    }

    data::PairSet present;
    for (const auto& e : edges.edges) {
        if (e.confidence == data::Confidence::confident) {
            out.edges.edges.push_back(e);
            present.insert(e.src, e.dst);
        }
    }
    for (const auto& c : out.cases) {
        auto r = resolve_case(c, z, tau, opt);
        if (r.exists && r.chosen >= 0 && present.insert(c.source, r.chosen)) {
            out.edges.edges.push_back({c.source, r.chosen, data::Confidence::confident});
        }
        out.log.push_back(std::move(r));
    }
    return out;
}

// --- files -----------------------------------------------------------------------

namespace {

std::ifstream open_input(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw Error(ErrorKind::io, "cannot open " + path.string());
    }
    return in;
}

bool next_line(std::istream& in, std::string& line) {
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (!line.empty()) return true;
    }
    return false;
}

} // namespace

std::vector<AmbiguityCase> read_cases(std::istream& in, const data::NodeTable& nodes) {
    std::vector<AmbiguityCase> out;
    std::string line;
    if (!next_line(in, line)) {
        return out;
    }
    const auto header = data::split_csv_line(line);
    const std::vector<std::string> expected{"id", "kind", "provenance", "source", "candidate1", "candidate2", "truth"};
    if (header != expected) {
        throw Error(ErrorKind::data, "cases header must be id,kind,provenance,source,candidate1,candidate2,truth");
    }
    std::set<std::string> ids;
    while (next_line(in, line)) {
        const auto f = data::split_csv_line(line);
        if (f.size() != expected.size()) {
            throw Error(ErrorKind::data, "malformed case line: " + line);
        }
        AmbiguityCase c;
        c.id = f[0];
        if (!ids.insert(c.id).second) {
            throw Error(ErrorKind::data, "duplicate case id " + c.id);
        }
        c.kind = parse_case_kind(f[1]);
        c.provenance = parse_provenance(f[2]);
        c.source = nodes.index_of(f[3]);
        c.first = nodes.index_of(f[4]);
        if (c.kind == CaseKind::pair) {
            c.second = nodes.index_of(f[5]);
            if (!f[6].empty()) c.truth_node = nodes.index_of(f[6]);
        } else if (!f[6].empty()) {
            if (f[6] != "0" && f[6] != "1") {
                throw Error(ErrorKind::data, "existence truth must be 0 or 1 in case " + c.id);
            }
            c.truth_exists = f[6] == "1";
        }
        c.validate();
        out.push_back(std::move(c));
    }
    return out;
}

std::vector<AmbiguityCase> load_cases(const std::filesystem::path& path, const data::NodeTable& nodes) {
    auto in = open_input(path);
    return read_cases(in, nodes);
}

namespace {

std::string truth_text(const AmbiguityCase& c, const data::NodeTable& nodes) {
    if (c.kind == CaseKind::pair) {
        return c.truth_node ? nodes.pid(*c.truth_node) : std::string();
    }
    return c.truth_exists ? (*c.truth_exists ? "1" : "0") : std::string();
}

} // namespace

void write_cases(std::ostream& out, std::span<const AmbiguityCase> cases, const data::NodeTable& nodes,
                 bool include_truth) {
    out << "id,kind,provenance,source,candidate1,candidate2,truth\n";
    for (const auto& c : cases) {
        out << c.id << ',' << to_string(c.kind) << ',' << to_string(c.provenance) << ',' << nodes.pid(c.source) << ','
            << nodes.pid(c.first) << ',' << (c.kind == CaseKind::pair ? nodes.pid(c.second) : std::string()) << ','
            << (include_truth ? truth_text(c, nodes) : std::string()) << '\n';
    }
}

void read_truth(std::istream& in, std::vector<AmbiguityCase>& cases, const data::NodeTable& nodes) {
    std::map<std::string, AmbiguityCase*> by_id;
    for (auto& c : cases) by_id[c.id] = &c;
    std::string line;
    if (!next_line(in, line)) {
        return;
    }
    if (line != "id,kind,truth") {
        throw Error(ErrorKind::data, "truth header must be id,kind,truth");
    }
    while (next_line(in, line)) {
        const auto f = data::split_csv_line(line);
        if (f.size() != 3) {
            throw Error(ErrorKind::data, "malformed truth line: " + line);
        }
        auto it = by_id.find(f[0]);
        if (it == by_id.end()) {
            continue;
        }
        auto& c = *it->second;
        if (parse_case_kind(f[1]) != c.kind) {
            throw Error(ErrorKind::data, "truth kind mismatch for case " + c.id);
        }
        if (c.kind == CaseKind::pair) {
            c.truth_node = nodes.index_of(f[2]);
        } else {
            c.truth_exists = f[2] == "1";
        }
    }
}

void load_truth(const std::filesystem::path& path, std::vector<AmbiguityCase>& cases, const data::NodeTable& nodes) {
    auto in = open_input(path);
    read_truth(in, cases, nodes);
}

void write_truth(std::ostream& out, std::span<const AmbiguityCase> cases, const data::NodeTable& nodes) {
    out << "id,kind,truth\n";
    for (const auto& c : cases) {
        out << c.id << ',' << to_string(c.kind) << ',' << truth_text(c, nodes) << '\n';
    }
}

std::string resolution_to_json(const Resolution& r, const data::NodeTable& nodes) {
    nlohmann::ordered_json j;
    j["case_id"] = r.case_id;
    j["kind"] = to_string(r.kind);
    j["source"] = nodes.pid(r.source);
    if (r.kind == CaseKind::pair) {
        j["candidates"] = {nodes.pid(r.first), nodes.pid(r.second)};
        j["decision"] = nodes.pid(r.chosen);
        j["distances"] = {r.first_distance, r.second_distance};
    } else {
        j["candidates"] = {nodes.pid(r.first)};
        j["decision"] = r.exists ? "exists" : "absent";
        j["distances"] = {r.first_distance};
        j["threshold"] = r.threshold;
    }
    j["margin"] = r.margin;
    j["low_confidence"] = r.low_confidence;
    return j.dump();
}

Resolution resolution_from_json(const std::string& line, const data::NodeTable& nodes) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(line);
        Resolution r;
        r.case_id = j.at("case_id").get<std::string>();
        r.kind = parse_case_kind(j.at("kind").get<std::string>());
        r.source = nodes.index_of(j.at("source").get<std::string>());
        const auto& cand = j.at("candidates");
        const auto& dist = j.at("distances");
        r.first = nodes.index_of(cand.at(0).get<std::string>());
        r.first_distance = dist.at(0).get<double>();
        if (r.kind == CaseKind::pair) {
            r.second = nodes.index_of(cand.at(1).get<std::string>());
            r.second_distance = dist.at(1).get<double>();
            r.chosen = nodes.index_of(j.at("decision").get<std::string>());
            r.exists = true;
        } else {
            r.exists = j.at("decision").get<std::string>() == "exists";
            r.chosen = r.exists ? r.first : -1;
            r.threshold = j.at("threshold").get<double>();
        }
        r.margin = j.at("margin").get<double>();
        r.low_confidence = j.at("low_confidence").get<bool>();
        return r;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::data, std::string("malformed resolution record: ") + e.what());
    }
}

void write_resolution_log(std::ostream& out, std::span<const Resolution> log, const data::NodeTable& nodes) {
    for (const auto& r : log) {
        out << resolution_to_json(r, nodes) << '\n';
    }
}

} // namespace peernet::disambig
