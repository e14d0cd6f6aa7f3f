#include <gtest/gtest.h>

#include <fstream>
#include <map>
#include <sstream>

#include "fixture_run.hpp"
#include "peernet/error.hpp"
#include "peernet/pipeline.hpp"

using namespace peernet;
using data::Index;
namespace fs = std::filesystem;

namespace {

ErrorKind kind_of(const std::function<void()>& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.kind();
    }
    ADD_FAILURE() << "no error thrown";
    return ErrorKind::numeric;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

} // namespace

TEST(Config, UnknownKeysRejectedAtEveryLevel) {
    EXPECT_EQ(kind_of([] { pipeline::parse_config(R"({"sed": 1})"); }), ErrorKind::config);
    EXPECT_EQ(kind_of([] { pipeline::parse_config(R"({"train": {"epoch": 3}})"); }), ErrorKind::config);
    EXPECT_EQ(kind_of([] { pipeline::parse_config(R"({"architecture": {"layers": [{"chanels": 3}]}})"); }),
              ErrorKind::config);
    EXPECT_EQ(kind_of([] { pipeline::parse_config(R"({"train": {"epochs": "ten"}})"); }), ErrorKind::config);
    EXPECT_EQ(kind_of([] { pipeline::parse_config("{not json"); }), ErrorKind::config);
}

TEST(Config, RelativePathsResolveAgainstBase) {
    const auto cfg = pipeline::parse_config(R"({"paths": {"nodes": "d/n.csv", "edges": "/abs/e.csv"}})", "/base");
    EXPECT_EQ(cfg.paths.nodes, fs::path("/base/d/n.csv"));
    EXPECT_EQ(cfg.paths.edges, fs::path("/abs/e.csv"));
    EXPECT_EQ(cfg.paths.output, fs::path("/base/out"));
}

TEST(Config, DefaultsFollowTheReferenceSetup) {
    const auto cfg = pipeline::parse_config("{}");
    EXPECT_DOUBLE_EQ(cfg.train.learning_rate, 0.01);
    EXPECT_DOUBLE_EQ(cfg.train.weight_decay, 5e-4);
    EXPECT_EQ(cfg.train.epochs, 200);
    EXPECT_EQ(cfg.architecture.layers.size(), 3u);
    EXPECT_EQ(cfg.review.port, 8080);
}

TEST(Config, BadMetricAndInfeasibleSynthAreConfigErrors) {
    EXPECT_EQ(pipeline::parse_config(R"({"disambiguation": {"metric": "cosine"}})").resolve.metric,
              disambig::DistanceMetric::cosine);
    EXPECT_EQ(kind_of([] { pipeline::parse_config(R"({"disambiguation": {"metric": "manhattan"}})"); }),
              ErrorKind::config);
    auto cfg = fixture::fixture_config("synth_bad");
    cfg.synth.n = 1;
    EXPECT_EQ(kind_of([&] { pipeline::cmd_synth(cfg); }), ErrorKind::config);
}

TEST(Config, MissingInputIsIoError) {
    auto cfg = fixture::fixture_config("missing");
    cfg.paths.nodes = cfg.paths.output / "absent.csv";
    EXPECT_EQ(kind_of([&] { pipeline::require_inputs(cfg, true); }), ErrorKind::io);
}

TEST(Checkpoint, RoundTripsAndDetectsTampering) {
    const auto cfg = fixture::trained_config();
    const auto ds = pipeline::load_dataset(cfg);
    const fs::path path = cfg.paths.output / "checkpoint.json";
    const auto ckpt = checkpoint::load(path, ds.nodes);
    const std::string text = slurp(path);
    EXPECT_EQ(checkpoint::to_json(ckpt, ds.nodes), text);

    std::string tampered = text;
    const auto pos = tampered.find("\"tau\"");
    ASSERT_NE(pos, std::string::npos);
    const auto digit = tampered.find_first_of("123456789", pos);
    tampered[digit] = tampered[digit] == '9' ? '8' : static_cast<char>(tampered[digit] + 1);
    EXPECT_EQ(kind_of([&] { checkpoint::from_json(tampered, ds.nodes); }), ErrorKind::data);
}

TEST(Checkpoint, RefusesForeignColumnMap) {
    const auto cfg = fixture::trained_config();
    const auto ds = pipeline::load_dataset(cfg);
    const auto ckpt = checkpoint::load(cfg.paths.output / "checkpoint.json", ds.nodes);
    EXPECT_NO_THROW(checkpoint::require_compatible(ckpt, ds.features));
    auto other = ds.features;
    other.columns.pop_back();
    other.values.conservativeResize(Eigen::NoChange, other.values.cols() - 1);
    EXPECT_EQ(kind_of([&] { checkpoint::require_compatible(ckpt, other); }), ErrorKind::model);
}

TEST(Resolve, ZeroCasesLeaveEdgesUnchanged) {
    const auto trained = fixture::trained_config();
    auto cfg = fixture::fixture_config("resolve_empty");
    cfg.paths.checkpoint = trained.paths.output / "checkpoint.json";
    const auto ds = pipeline::load_dataset(trained);
    data::EdgeTable confident;
    for (const auto& e : ds.edges.edges) {
        if (e.confidence == data::Confidence::confident) confident.edges.push_back(e);
    }
    cfg.paths.edges = cfg.paths.output / "edges.csv";
    cfg.paths.cases = cfg.paths.output / "cases.csv";
    cfg.paths.truth.clear();
    {
        std::ofstream e(cfg.paths.edges);
        data::write_edges(e, confident, ds.nodes);
        std::ofstream c(cfg.paths.cases);
        c << "id,kind,provenance,source,candidate1,candidate2,truth\n";
    }
    pipeline::cmd_resolve(cfg);
    EXPECT_EQ(slurp(cfg.paths.output / "resolutions.jsonl"), "");
    const auto out = data::load_edges(cfg.paths.output / "edges_disambiguated.csv", ds.nodes);
    EXPECT_EQ(out.size(), confident.size());
}

TEST(Resolve, ReportedAccuracyMatchesLog) {
    const auto cfg = fixture::trained_config();
    pipeline::cmd_resolve(cfg);
    const auto ds = pipeline::load_dataset(cfg);
    std::map<std::string, const disambig::AmbiguityCase*> by_id;
    for (const auto& c : ds.cases) by_id[c.id] = &c;

    std::ifstream log(cfg.paths.output / "resolutions.jsonl");
    std::string line;
    std::map<std::string, std::pair<int, int>> tally;  // task -> (correct, total)
    while (std::getline(log, line)) {
        const auto r = disambig::resolution_from_json(line, ds.nodes);
        const auto it = by_id.find(r.case_id);
        if (it == by_id.end()) continue;
        const auto& c = *it->second;
        if (c.kind == disambig::CaseKind::pair && c.truth_node) {
            auto& t = tally["pair"];
            t.first += r.chosen == *c.truth_node;
            ++t.second;
        } else if (c.kind == disambig::CaseKind::existence && c.truth_exists) {
            auto& t = tally["existence"];
            t.first += r.exists == *c.truth_exists;
            ++t.second;
        }
    }
    ASSERT_EQ(tally.size(), 2u);

    std::ifstream metrics(cfg.paths.output / "resolve_metrics.csv");
    std::getline(metrics, line);
    EXPECT_EQ(line, "task,cases,precision,recall,f1,accuracy");
    int rows = 0;
    while (std::getline(metrics, line)) {
        std::vector<std::string> f;
        std::stringstream ss(line);
        for (std::string s; std::getline(ss, s, ',');) f.push_back(s);
        ASSERT_EQ(f.size(), 6u);
        const auto& t = tally.at(f[0]);
        EXPECT_EQ(std::stoi(f[1]), t.second);
        EXPECT_NEAR(std::stod(f[5]), static_cast<double>(t.first) / t.second, 1e-9);
        ++rows;
    }
    EXPECT_EQ(rows, 2);
}

TEST(Risk, MissingDisambiguatedListNamesResolve) {
    auto cfg = fixture::fixture_config("risk_missing");
    cfg.paths.checkpoint = fixture::trained_config().paths.output / "checkpoint.json";
    try {
        pipeline::cmd_risk(cfg);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::io);
        EXPECT_NE(std::string(e.what()).find("resolve"), std::string::npos);
    }
}

TEST(Explain, CasesWrittenAsJsonLines) {
    const auto cfg = fixture::trained_config();
    pipeline::cmd_explain(cfg);
    std::ifstream in(cfg.paths.output / "explanations.jsonl");
    const auto ds = pipeline::load_dataset(cfg);
    int lines = 0;
    for (std::string line; std::getline(in, line); ++lines) {
        const auto e = explain::explanation_from_json(line, ds.nodes);
        EXPECT_GE(e.fidelity, 0.0);
    }
    EXPECT_EQ(lines, 3);
    EXPECT_TRUE(fs::exists(cfg.paths.output / "explain_report.csv"));
}
