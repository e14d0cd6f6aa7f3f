#ifndef PEERNET_PIPELINE_HPP
#define PEERNET_PIPELINE_HPP

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "peernet/benchmark.hpp"
#include "peernet/checkpoint.hpp"
#include "peernet/explain.hpp"
#include "peernet/risk.hpp"
#include "peernet/synth.hpp"

namespace peernet::pipeline {

namespace fs = std::filesystem;

struct Paths {
    fs::path nodes;
    fs::path schema;
    fs::path edges;
    fs::path cases;       // optional
    fs::path truth;       // optional
    fs::path risk;        // optional
    fs::path checkpoint;  // default <output>/checkpoint.json
    fs::path output;
};

struct SimulateParams {
    std::size_t seeds = 10;
    std::size_t pair_cases = 0;
    baselines::TreeParams tree;
    baselines::MlpConfig mlp;
};

struct RiskParams {
    risk::RiskConfig model;
    std::size_t seeds = 10;
    std::vector<risk::ModelKind> kinds{risk::ModelKind::gat, risk::ModelKind::dt, risk::ModelKind::mlp};
    std::map<std::string, fs::path> edge_lists;  // name -> edge file; empty: original + disambiguated defaults
};

struct ReviewParams {
    std::string host = "127.0.0.1";
    int port = 8080;
    fs::path state_dir;   // default <output>/review
    fs::path ui_dir;      // optional static bundle
    int recompute_epochs = 50;
};

struct RunConfig {
    Paths paths;
    data::PreprocessOptions preprocess;
    gat::Architecture architecture;
    gat::TrainConfig train;
    data::SplitRatios split;
    disambig::ResolveOptions resolve;
    SimulateParams simulate;
    RiskParams risk;
    explain::ExplainConfig explain;
    std::size_t explain_cases = 20;
    synth::SynthConfig synth;
    ReviewParams review;
    std::uint64_t seed = 0;
};

/// Parses JSON config text. Relative paths resolve against `base`. Unknown
/// keys anywhere are rejected with Error(config).
RunConfig parse_config(const std::string& text, const fs::path& base = {});
RunConfig load_config(const fs::path& path);

/// Throws Error(io) naming the first configured input that does not exist.
void require_inputs(const RunConfig& cfg, bool need_dataset);

struct Dataset {
    data::NodeTable nodes;
    data::EdgeTable edges;
    data::FeatureMatrix features;
    std::vector<disambig::AmbiguityCase> cases;
};

Dataset load_dataset(const RunConfig& cfg);

/// Embeddings over every confident edge, the graph used for resolution.
Eigen::MatrixXd resolution_embeddings(const checkpoint::Checkpoint& ckpt, const Dataset& ds);

/// Explains the link a case resolves to: (source, chosen) for pair cases,
/// (source, candidate) for existence cases. Seeded per case id.
explain::Explanation explain_case(const gat::GatModel<double>& model, const Dataset& ds, const data::Graph& graph,
                                  const disambig::AmbiguityCase& c, const disambig::Resolution& r,
                                  const explain::ExplainConfig& cfg, std::uint64_t seed);

// Every command writes into cfg.paths.output and returns a one-paragraph
// human summary.
std::string cmd_synth(const RunConfig& cfg);
std::string cmd_train(const RunConfig& cfg);
std::string cmd_resolve(const RunConfig& cfg);
std::string cmd_simulate(const RunConfig& cfg);
std::string cmd_risk(const RunConfig& cfg);
std::string cmd_explain(const RunConfig& cfg);

} // namespace peernet::pipeline

#endif // PEERNET_PIPELINE_HPP
