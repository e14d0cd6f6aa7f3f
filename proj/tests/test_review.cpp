#include <gtest/gtest.h>

#include <fstream>
#include <sstream>
#include <thread>

#include "fixture_run.hpp"
#include "peernet/review.hpp"

#include <httplib.h>

using namespace peernet;
using data::Index;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

pipeline::RunConfig review_config(const std::string& state) {
    auto cfg = fixture::trained_config();
    cfg.review.state_dir = fs::path(PEERNET_WORK_DIR) / state;
    cfg.review.recompute_epochs = 10;
    return cfg;
}

pipeline::RunConfig fresh_config(const std::string& state) {
    auto cfg = review_config(state);
    fs::remove_all(cfg.review.state_dir);
    return cfg;
}

class Running {
public:
    explicit Running(review::ReviewService& service) {
        review::mount(server_, service);
        port_ = server_.bind_to_any_port("127.0.0.1");
        thread_ = std::thread([this] { server_.listen_after_bind(); });
        server_.wait_until_ready();
    }
    ~Running() {
        server_.stop();
        thread_.join();
    }
    httplib::Client client() const { return httplib::Client("127.0.0.1", port_); }

private:
    httplib::Server server_;
    int port_ = 0;
    std::thread thread_;
};

json decide(httplib::Client& cli, const std::string& id, const std::string& verdict, const std::string& coder,
            int* status = nullptr) {
    const auto res = cli.Post(("/cases/" + id + "/decision").c_str(), json{{"verdict", verdict}, {"coder", coder}}.dump(),
                              "application/json");
    EXPECT_TRUE(res);
    if (status) *status = res->status;
    return json::parse(res->body);
}

const disambig::AmbiguityCase* first_of(const review::ReviewService& s, disambig::CaseKind kind) {
    for (const auto& c : s.cases()) {
        if (c.kind == kind) return &c;
    }
    return nullptr;
}

} // namespace

TEST(ReviewVerdict, Parses) {
    EXPECT_EQ(review::parse_verdict("accept").verdict, review::Verdict::accept);
    const auto o = review::parse_verdict("override:1042");
    EXPECT_EQ(o.verdict, review::Verdict::override_choice);
    EXPECT_EQ(o.choice, "1042");
    EXPECT_THROW(review::parse_verdict("maybe"), Error);
    EXPECT_THROW(review::parse_verdict("override:"), Error);
}

TEST(ReviewService, ListsByMarginAndShowsProfiles) {
    auto service = review::ReviewService::open(fresh_config("review_list"));
    Running run(*service);
    auto cli = run.client();
    const auto res = cli.Get("/cases");
    ASSERT_TRUE(res);
    EXPECT_EQ(res->status, 200);
    EXPECT_EQ(res->get_header_value("X-Revision"), "0");
    const auto body = json::parse(res->body);
    const auto& rows = body["cases"];
    ASSERT_EQ(rows.size(), service->cases().size());
    for (std::size_t k = 1; k < rows.size(); ++k) {
        EXPECT_LE(rows[k - 1]["margin"].get<double>(), rows[k]["margin"].get<double>());
    }

    const auto* pair = first_of(*service, disambig::CaseKind::pair);
    const auto* exist = first_of(*service, disambig::CaseKind::existence);
    ASSERT_TRUE(pair && exist);
    const auto p = json::parse(cli.Get(("/cases/" + pair->id).c_str())->body)["case"];
    EXPECT_EQ(p["candidate_profiles"].size(), 2u);
    EXPECT_FALSE(p.contains("threshold"));
    const auto e = json::parse(cli.Get(("/cases/" + exist->id).c_str())->body)["case"];
    EXPECT_EQ(e["candidate_profiles"].size(), 1u);
    EXPECT_TRUE(e["threshold"].contains("tau"));
    EXPECT_EQ(cli.Get("/cases/nope")->status, 404);
    EXPECT_EQ(cli.Get("/cases?status=bogus")->status, 400);
}

TEST(ReviewService, ExplanationMatchesBatchExplainer) {
    auto cfg = fresh_config("review_explain");
    pipeline::cmd_explain(cfg);
    std::ifstream in(cfg.paths.output / "explanations.jsonl");
    std::string line;
    ASSERT_TRUE(std::getline(in, line));
    const auto batch = json::parse(line);

    auto service = review::ReviewService::open(cfg);
    const auto id = service->cases().front().id;
    const auto live = service->get_case(id).body["case"]["explanation"];
    EXPECT_EQ(live, batch);
}

TEST(ReviewService, AcceptThenConflict) {
    auto service = review::ReviewService::open(fresh_config("review_conflict"));
    Running run(*service);
    auto cli = run.client();
    const auto* pair = first_of(*service, disambig::CaseKind::pair);
    int status = 0;
    const auto ok = decide(cli, pair->id, "accept", "alice", &status);
    EXPECT_EQ(status, 200);
    const auto& sug = service->state()->snapshot->suggestions.at(pair->id);
    EXPECT_EQ(ok["decision"]["staged_edge"][1], service->dataset().nodes.pid(sug.chosen));
    const auto again = decide(cli, pair->id, "reject", "bob", &status);
    EXPECT_EQ(status, 409);
    EXPECT_EQ(again["decision"]["coder"], "alice");

    const auto amended = cli.Post(("/cases/" + pair->id + "/decision").c_str(),
                                  json{{"verdict", "reject"}, {"coder", "bob"}, {"amend", true}}.dump(),
                                  "application/json");
    EXPECT_EQ(amended->status, 200);

    const auto* exist = first_of(*service, disambig::CaseKind::existence);
    const auto rej = decide(cli, exist->id, "reject", "alice", &status);
    EXPECT_EQ(status, 200);
    EXPECT_TRUE(rej["decision"]["staged_edge"].is_null());

    decide(cli, exist->id + "x", "accept", "alice", &status);
    EXPECT_EQ(status, 404);
    decide(cli, pair->id, "override:not-a-pid", "alice", &status);
    EXPECT_EQ(status, 400);
}

TEST(ReviewService, RacingCodersOneWins) {
    auto service = review::ReviewService::open(fresh_config("review_race"));
    Running run(*service);
    for (std::size_t k = 0; k < 5; ++k) {
        const auto& id = service->cases()[k].id;
        int a = 0, b = 0;
        std::thread t1([&] {
            auto cli = run.client();
            decide(cli, id, "accept", "alice", &a);
        });
        std::thread t2([&] {
            auto cli = run.client();
            decide(cli, id, "reject", "bob", &b);
        });
        t1.join();
        t2.join();
        EXPECT_EQ(std::min(a, b), 200);
        EXPECT_EQ(std::max(a, b), 409);
    }
    EXPECT_EQ(service->state()->log.size(), 5u);
}

TEST(ReviewService, DecisionsSurviveRestart) {
    const auto cfg = fresh_config("review_restart");
    std::vector<std::string> ids;
    {
        auto service = review::ReviewService::open(cfg);
        for (std::size_t k = 0; k < 4; ++k) {
            ids.push_back(service->cases()[k].id);
            EXPECT_EQ(service->post_decision(ids.back(), json{{"verdict", k % 2 ? "reject" : "accept"}}, "carol").status,
                      200);
        }
    }
    auto again = review::ReviewService::open(cfg);
    const auto s = again->state();
    ASSERT_EQ(s->log.size(), 4u);
    for (std::size_t k = 0; k < 4; ++k) {
        EXPECT_EQ(s->log[k].case_id, ids[k]);
        EXPECT_EQ(s->log[k].verdict, k % 2 ? review::Verdict::reject : review::Verdict::accept);
    }
    EXPECT_EQ(again->post_decision(ids[0], json{{"verdict", "skip"}}, "carol").status, 409);
}

TEST(ReviewService, RecomputeAfterConfirmations) {
    const auto cfg = fresh_config("review_recompute");
    auto service = review::ReviewService::open(cfg);
    auto idle = service->recompute();
    EXPECT_EQ(idle.body["status"], "unchanged");
    EXPECT_EQ(idle.body["revision"], 0);

    // confirm the runner-up candidate of several pair cases
    int overrides = 0;
    for (const auto& c : service->cases()) {
        if (c.kind != disambig::CaseKind::pair || overrides == 8) continue;
        const auto& sug = service->state()->snapshot->suggestions.at(c.id);
        const Index other = sug.chosen == c.first ? c.second : c.first;
        const auto r =
            service->post_decision(c.id, json{{"verdict", "override:" + service->dataset().nodes.pid(other)}}, "dan");
        EXPECT_EQ(r.status, 200);
        ++overrides;
    }
    const auto r = service->recompute();
    ASSERT_EQ(r.status, 200) << r.body.dump();
    EXPECT_EQ(r.body["revision"], 1);
    EXPECT_EQ(r.body["confirmed_edges"], overrides);
    EXPECT_GE(r.body["changed_pending"].get<std::size_t>(), 1u);
    EXPECT_TRUE(fs::exists(cfg.review.state_dir / "revision-1.json"));
    EXPECT_EQ(service->recompute().body["status"], "unchanged");

    auto reopened = review::ReviewService::open(cfg);
    EXPECT_EQ(reopened->state()->snapshot->revision, 1u);
}

TEST(ReviewService, ExportRoundTripsAndHumansWin) {
    const auto cfg = fresh_config("review_export");
    auto service = review::ReviewService::open(cfg);
    Running run(*service);
    auto cli = run.client();
    const auto& nodes = service->dataset().nodes;

    const disambig::AmbiguityCase* pair = first_of(*service, disambig::CaseKind::pair);
    const auto& sug = service->state()->snapshot->suggestions.at(pair->id);
    const Index other = sug.chosen == pair->first ? pair->second : pair->first;
    int status = 0;
    decide(cli, pair->id, "override:" + nodes.pid(other), "erin", &status);
    ASSERT_EQ(status, 200);

    const auto csv = cli.Get("/export?format=csv");
    ASSERT_TRUE(csv);
    EXPECT_EQ(csv->status, 200);
    const fs::path path = cfg.review.state_dir / "export.csv";
    std::ofstream(path) << csv->body;
    const auto loaded = data::load_edges(path, nodes);
    const auto exported = service->export_edges();
    ASSERT_EQ(loaded.size(), exported.size());

    const data::PairSet set(data::unique_pairs(loaded));
    EXPECT_TRUE(set.contains(pair->source, other));
    const data::PairSet confident(data::unique_pairs(service->dataset().edges, data::Confidence::confident));
    if (!confident.contains(pair->source, sug.chosen)) EXPECT_FALSE(set.contains(pair->source, sug.chosen));

    const auto body = json::parse(cli.Get("/export")->body);
    std::size_t human = 0;
    for (const auto& row : body["rows"]) {
        const auto origin = row["origin"].get<std::string>();
        EXPECT_TRUE(origin == "confident" || origin == "model" || origin == "human");
        if (origin == "human") {
            ++human;
            EXPECT_EQ(row["case_id"], pair->id);
            EXPECT_EQ(row["decision"], 0);
        }
    }
    EXPECT_EQ(human, 1u);
    EXPECT_EQ(body["audit"].size(), 1u);
}
