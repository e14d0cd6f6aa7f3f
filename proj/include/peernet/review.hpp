#ifndef PEERNET_REVIEW_HPP
#define PEERNET_REVIEW_HPP

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "peernet/checkpoint.hpp"
#include "peernet/pipeline.hpp"

namespace httplib {
class Server;
}

namespace peernet::review {

using data::Index;
using data::NodePair;
namespace fs = std::filesystem;

enum class Verdict { accept, override_choice, reject, skip };

std::string to_string(Verdict v);

/// "accept", "reject", "skip" or "override:<PID>".
struct ParsedVerdict {
    Verdict verdict = Verdict::accept;
    std::string choice;  // PID, override only
};
ParsedVerdict parse_verdict(const std::string& text);

struct Decision {
    std::uint64_t sequence = 0;  // position in the decision log
    std::string case_id;
    Verdict verdict = Verdict::accept;
    std::optional<Index> choice;   // override target
    std::string coder;
    std::string note;              // free-form confidence note
    bool amend = false;
    std::uint64_t revision = 0;    // revision the coder saw
    std::string timestamp;
    disambig::Resolution suggestion;
    std::optional<NodePair> staged;  // (source, alter) confirmed by this verdict
};

/// One immutable revision: model, threshold and suggestions for every case.
struct Snapshot {
    std::uint64_t revision = 0;
    gat::GatModel<double> model;
    disambig::Threshold threshold;
    data::Graph graph;                       // confident + confirmed at this revision
    std::vector<NodePair> confirmed;         // human-confirmed edges trained on
    Eigen::MatrixXd embeddings;
    std::map<std::string, disambig::Resolution> suggestions;
};

/// Everything a reader needs, swapped as one pointer.
struct State {
    std::shared_ptr<const Snapshot> snapshot;
    std::vector<Decision> log;                       // append-only, in sequence order
    std::map<std::string, std::size_t> latest;       // case id -> index into log
};

struct Response {
    int status = 200;
    nlohmann::json body;
    int retry_after = 0;  // seconds; set with 503
};

/// Review session over one dataset and checkpoint. Mutations are serialized
/// through one writer lock; readers load the current State pointer and never
/// block. Decisions are appended to <state_dir>/decisions.jsonl and fsynced
/// before they are acknowledged; revisions are saved next to it.
class ReviewService {
public:
    ReviewService(pipeline::RunConfig cfg, pipeline::Dataset ds, checkpoint::Checkpoint ckpt, fs::path state_dir);

    /// Loads dataset and checkpoint named by `cfg`. State dir defaults to
    /// <output>/review.
    static std::unique_ptr<ReviewService> open(const pipeline::RunConfig& cfg);

    Response list_cases(const std::string& status) const;
    Response get_case(const std::string& id) const;
    Response post_decision(const std::string& id, const nlohmann::json& body, const std::string& coder_header = {});
    Response recompute();
    Response export_session() const;
    Response revision() const;

    std::shared_ptr<const State> state() const { return std::atomic_load(&state_); }
    const std::string& session_id() const { return session_id_; }
    const std::vector<disambig::AmbiguityCase>& cases() const { return cases_; }
    const pipeline::Dataset& dataset() const { return ds_; }

    /// Confident input edges plus the human verdicts and, where no verdict
    /// applies, the model suggestions of the current revision.
    data::EdgeTable export_edges() const;

private:
    struct Origin;
    const disambig::AmbiguityCase* find_case(const std::string& id) const;
    std::shared_ptr<const Snapshot> build_snapshot(std::uint64_t revision, const gat::GatModel<double>& model,
                                                   const disambig::Threshold& threshold,
                                                   std::vector<NodePair> confirmed) const;
    std::vector<NodePair> confirmed_edges(const State& s) const;
    nlohmann::json case_summary(const disambig::AmbiguityCase& c, const State& s) const;
    nlohmann::json decision_json(const Decision& d) const;
    Decision decision_from_json(const nlohmann::json& j) const;
    void restore();
    void append_durably(const fs::path& path, const std::string& line) const;
    void save_revision(const Snapshot& snap) const;
    Response error(int status, ErrorKind kind, const std::string& message) const;
    Response with_revision(Response r) const;

    pipeline::RunConfig cfg_;
    pipeline::Dataset ds_;
    checkpoint::Checkpoint base_;
    fs::path state_dir_;
    std::string session_id_;
    std::vector<disambig::AmbiguityCase> cases_;
    std::map<std::string, std::size_t> case_index_;

    std::shared_ptr<const State> state_;
    std::mutex writer_;
    std::atomic<bool> busy_{false};
    mutable std::mutex explain_mutex_;
    mutable std::map<std::pair<std::uint64_t, std::string>, nlohmann::json> explain_cache_;
};

/// Routes the HTTP API onto `service`. Serves `ui_dir` at / when it exists.
void mount(httplib::Server& server, ReviewService& service, const fs::path& ui_dir = {});

/// Blocks serving until the process is interrupted.
void serve(ReviewService& service, const std::string& host, int port, const fs::path& ui_dir = {});

} // namespace peernet::review

#endif // PEERNET_REVIEW_HPP
