#include "peernet/checkpoint.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "peernet/error.hpp"
#include "peernet/rng.hpp"

namespace peernet::checkpoint {

using json = nlohmann::ordered_json;

namespace {

constexpr const char* kFormat = "peernet-checkpoint";
constexpr int kVersion = 1;

std::string hex(std::uint64_t h) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

json pairs_to_json(const std::vector<data::NodePair>& pairs, const data::NodeTable& nodes) {
    json a = json::array();
    for (const auto& [u, v] : pairs) a.push_back({nodes.pid(u), nodes.pid(v)});
    return a;
}

std::vector<data::NodePair> pairs_from_json(const json& a, const data::NodeTable& nodes) {
    std::vector<data::NodePair> out;
    for (const auto& p : a) {
        out.emplace_back(nodes.index_of(p.at(0).get<std::string>()), nodes.index_of(p.at(1).get<std::string>()));
    }
    return out;
}

json body(const Checkpoint& c, const data::NodeTable& nodes) {
    json j;
    j["format"] = kFormat;
    j["version"] = kVersion;
    j["seed"] = c.seed;
    j["best_epoch"] = c.best_epoch;
    j["column_map_hash"] = c.column_map_hash;
    j["column_map"] = json::parse(c.column_map.empty() ? "null" : c.column_map);
    j["threshold"] = {{"tau", c.threshold.tau}, {"f1", c.threshold.f1}, {"validation_size", c.threshold.validation_size}};
    j["train"] = {{"learning_rate", c.train.learning_rate}, {"epochs", c.train.epochs},
                  {"patience", c.train.patience},           {"negative_ratio", c.train.negative_ratio},
                  {"weight_decay", c.train.weight_decay},   {"target_fraction", c.train.target_fraction},
                  {"seed", c.train.seed}};
    j["split"] = {{"seed", c.split.seed},
                  {"train", pairs_to_json(c.split.train, nodes)},
                  {"validation", pairs_to_json(c.split.validation, nodes)},
                  {"test", pairs_to_json(c.split.test, nodes)}};
    json layers = json::array();
    for (const auto& l : c.model.layers) {
        json jl;
        jl["combine"] = l.combine == gat::Combine::concatenate ? "concatenate" : "single";
        jl["activation"] = l.activation == gat::Activation::relu ? "relu" : "identity";
        jl["slope"] = l.slope;
        jl["heads"] = json::array();
        for (const auto& h : l.heads) {
            jl["heads"].push_back({{"rows", h.weight.rows()},
                                   {"cols", h.weight.cols()},
                                   {"weight", std::vector<double>(h.weight.data(), h.weight.data() + h.weight.size())},
                                   {"attention", std::vector<double>(h.attention.data(),
                                                                     h.attention.data() + h.attention.size())}});
        }
        layers.push_back(std::move(jl));
    }
    j["layers"] = std::move(layers);
    return j;
}

} // namespace

std::string to_json(const Checkpoint& ckpt, const data::NodeTable& nodes) {
    json j = body(ckpt, nodes);
    j["hash"] = hex(fnv1a(j.dump()));
    return j.dump(1) + "\n";
}

Checkpoint from_json(const std::string& text, const data::NodeTable& nodes) {
    try {
        json j = json::parse(text);
        if (j.value("format", "") != kFormat || j.value("version", 0) != kVersion) {
            throw Error(ErrorKind::data, "not a checkpoint of a supported version");
        }
        const std::string stored = j.at("hash").get<std::string>();
        j.erase("hash");
        if (hex(fnv1a(j.dump())) != stored) {
            throw Error(ErrorKind::data, "checkpoint content hash mismatch");
        }
        Checkpoint c;
        c.seed = j.at("seed").get<std::uint64_t>();
        c.best_epoch = j.at("best_epoch").get<int>();
        c.column_map_hash = j.at("column_map_hash").get<std::string>();
        c.column_map = j.at("column_map").is_null() ? "" : j.at("column_map").dump();
        const auto& t = j.at("threshold");
        c.threshold = {t.at("tau").get<double>(), t.at("f1").get<double>(), t.at("validation_size").get<std::size_t>()};
        const auto& tr = j.at("train");
        c.train.learning_rate = tr.at("learning_rate").get<double>();
        c.train.epochs = tr.at("epochs").get<int>();
        c.train.patience = tr.at("patience").get<int>();
        c.train.negative_ratio = tr.at("negative_ratio").get<double>();
        c.train.weight_decay = tr.at("weight_decay").get<double>();
        c.train.target_fraction = tr.at("target_fraction").get<double>();
        c.train.seed = tr.at("seed").get<std::uint64_t>();
        const auto& s = j.at("split");
        c.split.seed = s.at("seed").get<std::uint64_t>();
        c.split.train = pairs_from_json(s.at("train"), nodes);
        c.split.validation = pairs_from_json(s.at("validation"), nodes);
        c.split.test = pairs_from_json(s.at("test"), nodes);
        for (const auto& jl : j.at("layers")) {
            gat::GatLayer<double> l;
            l.combine = jl.at("combine").get<std::string>() == "single" ? gat::Combine::single : gat::Combine::concatenate;
            l.activation =
                jl.at("activation").get<std::string>() == "relu" ? gat::Activation::relu : gat::Activation::identity;
            l.slope = jl.at("slope").get<double>();
            for (const auto& jh : jl.at("heads")) {
                const auto rows = jh.at("rows").get<Eigen::Index>();
                const auto cols = jh.at("cols").get<Eigen::Index>();
                const auto w = jh.at("weight").get<std::vector<double>>();
                const auto a = jh.at("attention").get<std::vector<double>>();
                if (static_cast<Eigen::Index>(w.size()) != rows * cols) {
                    throw Error(ErrorKind::data, "checkpoint weight has wrong size");
                }
                gat::AttentionHead<double> h;
                h.weight = Eigen::Map<const Eigen::MatrixXd>(w.data(), rows, cols);
                h.attention = Eigen::Map<const Eigen::VectorXd>(a.data(), static_cast<Eigen::Index>(a.size()));
                l.heads.push_back(std::move(h));
            }
            c.model.layers.push_back(std::move(l));
        }
        gat::validate(c.model);
        return c;
    } catch (const json::exception& e) {
        throw Error(ErrorKind::data, std::string("malformed checkpoint: ") + e.what());
    }
}

void save(const std::filesystem::path& path, const Checkpoint& ckpt, const data::NodeTable& nodes) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw Error(ErrorKind::io, "cannot write checkpoint " + path.string());
    }
    out << to_json(ckpt, nodes);
    if (!out) {
        throw Error(ErrorKind::io, "failed writing checkpoint " + path.string());
    }
}

Checkpoint load(const std::filesystem::path& path, const data::NodeTable& nodes) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error(ErrorKind::io, "cannot read checkpoint " + path.string());
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return from_json(ss.str(), nodes);
}

void require_compatible(const Checkpoint& ckpt, const data::FeatureMatrix& features) {
    if (ckpt.column_map_hash != features.column_map_hash()) {
        throw Error(ErrorKind::model, "checkpoint was trained on a different feature column map (hash " +
                                          ckpt.column_map_hash + " vs " + features.column_map_hash() + ")");
    }
    if (ckpt.model.input_dim() != features.cols()) {
        throw Error(ErrorKind::model, "checkpoint input width does not match the features");
    }
}

} // namespace peernet::checkpoint
