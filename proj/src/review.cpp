#include "peernet/review.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <set>
#include <sstream>

#include <httplib.h>

#include "peernet/benchmark.hpp"
#include "peernet/error.hpp"
#include "peernet/rng.hpp"

namespace peernet::review {

using json = nlohmann::json;

namespace {

constexpr const char* kDecisions = "decisions.jsonl";
constexpr const char* kRevisions = "revisions.jsonl";
constexpr int kRetryAfter = 5;

std::string hex(std::uint64_t h) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

std::string utc_now() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(now.time_since_epoch()).count() % 1000;
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%S", &tm);
    char out[40];
    std::snprintf(out, sizeof(out), "%s.%03lldZ", buf, static_cast<long long>(ms));
    return out;
}

std::vector<std::string> read_lines(const fs::path& path) {
    std::vector<std::string> out;
    std::ifstream in(path, std::ios::binary);
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty()) out.push_back(line);
    }
    return out;
}

void write_atomically(const fs::path& path, const std::string& text) {
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        out << text;
        out.flush();
        if (!out) {
            throw Error(ErrorKind::io, "cannot write " + tmp.string());
        }
    }
    const int fd = ::open(tmp.c_str(), O_RDONLY);
    if (fd >= 0) {
        ::fsync(fd);
        ::close(fd);
    }
    fs::rename(tmp, path);
}

int status_for(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::not_found: return 404;
        case ErrorKind::conflict: return 409;
        case ErrorKind::busy: return 503;
        case ErrorKind::config:
        case ErrorKind::data: return 400;
        default: return 500;
    }
}

} // namespace

std::string to_string(Verdict v) {
    switch (v) {
        case Verdict::accept: return "accept";
        case Verdict::override_choice: return "override";
        case Verdict::reject: return "reject";
        case Verdict::skip: return "skip";
    }
    return "unknown";
}

ParsedVerdict parse_verdict(const std::string& text) {
    if (text == "accept") return {Verdict::accept, {}};
    if (text == "reject") return {Verdict::reject, {}};
    if (text == "skip") return {Verdict::skip, {}};
    const std::string prefix = "override:";
    if (text.rfind(prefix, 0) == 0 && text.size() > prefix.size()) {
        return {Verdict::override_choice, text.substr(prefix.size())};
    }
    throw Error(ErrorKind::data, "verdict must be accept, reject, skip or override:<PID>, got '" + text + "'");
}

// --- service ------------------------------------------------------------------

ReviewService::ReviewService(pipeline::RunConfig cfg, pipeline::Dataset ds, checkpoint::Checkpoint ckpt,
                             fs::path state_dir)
    : cfg_(std::move(cfg)), ds_(std::move(ds)), base_(std::move(ckpt)), state_dir_(std::move(state_dir)) {
    checkpoint::require_compatible(base_, ds_.features);
    cases_ = ds_.cases;
    for (auto& c : disambig::implicit_existence_cases(ds_.edges, ds_.cases)) cases_.push_back(std::move(c));
    for (std::size_t k = 0; k < cases_.size(); ++k) {
        if (!case_index_.emplace(cases_[k].id, k).second) {
            throw Error(ErrorKind::data, "duplicate case id " + cases_[k].id);
        }
    }
    session_id_ = hex(fnv1a(checkpoint::to_json(base_, ds_.nodes)));
    fs::create_directories(state_dir_);
    restore();
}

std::unique_ptr<ReviewService> ReviewService::open(const pipeline::RunConfig& cfg) {
    auto ds = pipeline::load_dataset(cfg);
    const fs::path ckpt_path =
        cfg.paths.checkpoint.empty() ? cfg.paths.output / "checkpoint.json" : cfg.paths.checkpoint;
    auto ckpt = checkpoint::load(ckpt_path, ds.nodes);
    const fs::path dir = cfg.review.state_dir.empty() ? cfg.paths.output / "review" : cfg.review.state_dir;
    return std::make_unique<ReviewService>(cfg, std::move(ds), std::move(ckpt), dir);
}

const disambig::AmbiguityCase* ReviewService::find_case(const std::string& id) const {
    const auto it = case_index_.find(id);
    return it == case_index_.end() ? nullptr : &cases_[it->second];
}

std::shared_ptr<const Snapshot> ReviewService::build_snapshot(std::uint64_t revision,
                                                              const gat::GatModel<double>& model,
                                                              const disambig::Threshold& threshold,
                                                              std::vector<NodePair> confirmed) const {
    auto snap = std::make_shared<Snapshot>();
    snap->revision = revision;
    snap->model = model;
    snap->threshold = threshold;
    snap->confirmed = std::move(confirmed);
    auto pairs = data::unique_pairs(ds_.edges, data::Confidence::confident);
    pairs.insert(pairs.end(), snap->confirmed.begin(), snap->confirmed.end());
    snap->graph = data::Graph::from_pairs(ds_.features.rows(), pairs);
    snap->embeddings = gat::embed(model, ds_.features.values, snap->graph);
    for (const auto& c : cases_) {
        snap->suggestions.emplace(c.id, disambig::resolve_case(c, snap->embeddings, threshold.tau, cfg_.resolve));
    }
    return snap;
}

std::vector<NodePair> ReviewService::confirmed_edges(const State& s) const {
    const data::PairSet confident(data::unique_pairs(ds_.edges, data::Confidence::confident));
    std::set<NodePair> out;
    for (const auto& [id, idx] : s.latest) {
        const auto& d = s.log[idx];
        if (d.staged && !confident.contains(d.staged->first, d.staged->second)) {
            out.insert(data::ordered(d.staged->first, d.staged->second));
        }
    }
    return {out.begin(), out.end()};
}

json ReviewService::decision_json(const Decision& d) const {
    json j;
    j["sequence"] = d.sequence;
    j["case_id"] = d.case_id;
    j["verdict"] = to_string(d.verdict);
    j["choice"] = d.choice ? json(ds_.nodes.pid(*d.choice)) : json(nullptr);
    j["coder"] = d.coder;
    j["note"] = d.note;
    j["amend"] = d.amend;
    j["revision"] = d.revision;
    j["timestamp"] = d.timestamp;
    j["suggestion"] = json::parse(disambig::resolution_to_json(d.suggestion, ds_.nodes));
    j["staged_edge"] = d.staged ? json::array({ds_.nodes.pid(d.staged->first), ds_.nodes.pid(d.staged->second)})
                                : json(nullptr);
    return j;
}

Decision ReviewService::decision_from_json(const json& j) const {
    Decision d;
    d.sequence = j.at("sequence").get<std::uint64_t>();
    d.case_id = j.at("case_id").get<std::string>();
    const auto verdict = j.at("verdict").get<std::string>();
    d.verdict = verdict == "override" ? Verdict::override_choice : parse_verdict(verdict).verdict;
    if (!j.at("choice").is_null()) d.choice = ds_.nodes.index_of(j.at("choice").get<std::string>());
    d.coder = j.at("coder").get<std::string>();
    d.note = j.value("note", "");
    d.amend = j.at("amend").get<bool>();
    d.revision = j.at("revision").get<std::uint64_t>();
    d.timestamp = j.at("timestamp").get<std::string>();
    d.suggestion = disambig::resolution_from_json(j.at("suggestion").dump(), ds_.nodes);
    if (!j.at("staged_edge").is_null()) {
        const auto& e = j.at("staged_edge");
        d.staged = NodePair{ds_.nodes.index_of(e.at(0).get<std::string>()),
                            ds_.nodes.index_of(e.at(1).get<std::string>())};
    }
    return d;
}

void ReviewService::append_durably(const fs::path& path, const std::string& line) const {
    const std::string text = line + "\n";
    const int fd = ::open(path.c_str(), O_WRONLY | O_APPEND | O_CREAT, 0644);
    if (fd < 0) {
        throw Error(ErrorKind::io, "cannot open " + path.string());
    }
    std::size_t written = 0;
    while (written < text.size()) {
        const auto n = ::write(fd, text.data() + written, text.size() - written);
        if (n <= 0) {
            ::close(fd);
            throw Error(ErrorKind::io, "failed appending to " + path.string());
        }
        written += static_cast<std::size_t>(n);
    }
    const bool synced = ::fsync(fd) == 0;
    ::close(fd);
    if (!synced) {
        throw Error(ErrorKind::io, "fsync failed on " + path.string());
    }
}

void ReviewService::save_revision(const Snapshot& snap) const {
    const std::string rev = std::to_string(snap.revision);
    std::ostringstream suggestions;
    for (const auto& c : cases_) {
        suggestions << disambig::resolution_to_json(snap.suggestions.at(c.id), ds_.nodes) << '\n';
    }
    write_atomically(state_dir_ / ("suggestions-" + rev + ".jsonl"), suggestions.str());
    if (snap.revision == 0) return;

    checkpoint::Checkpoint ckpt = base_;
    ckpt.model = snap.model;
    ckpt.threshold = snap.threshold;
    const std::string file = "revision-" + rev + ".json";
    write_atomically(state_dir_ / file, checkpoint::to_json(ckpt, ds_.nodes));
    json entry;
    entry["revision"] = snap.revision;
    entry["checkpoint"] = file;
    entry["confirmed"] = json::array();
    for (const auto& [a, b] : snap.confirmed) entry["confirmed"].push_back({ds_.nodes.pid(a), ds_.nodes.pid(b)});
    entry["timestamp"] = utc_now();
    append_durably(state_dir_ / kRevisions, entry.dump());
}

void ReviewService::restore() {
    auto state = std::make_shared<State>();
    gat::GatModel<double> model = base_.model;
    disambig::Threshold threshold = base_.threshold;
    std::vector<NodePair> confirmed;
    std::uint64_t revision = 0;

    const auto revisions = read_lines(state_dir_ / kRevisions);
    for (auto it = revisions.rbegin(); it != revisions.rend(); ++it) {
        // A torn final line from a crash is skipped; the revision it named was
        // never acknowledged.
        json entry;
        try {
            entry = json::parse(*it);
        } catch (const json::exception&) {
            continue;
        }
        const auto ckpt = checkpoint::load(state_dir_ / entry.at("checkpoint").get<std::string>(), ds_.nodes);
        model = ckpt.model;
        threshold = ckpt.threshold;
        revision = entry.at("revision").get<std::uint64_t>();
        for (const auto& p : entry.at("confirmed")) {
            confirmed.emplace_back(ds_.nodes.index_of(p.at(0).get<std::string>()),
                                   ds_.nodes.index_of(p.at(1).get<std::string>()));
        }
        break;
    }
    state->snapshot = build_snapshot(revision, model, threshold, std::move(confirmed));
    if (revision == 0 && !fs::exists(state_dir_ / "suggestions-0.jsonl")) save_revision(*state->snapshot);

    const auto lines = read_lines(state_dir_ / kDecisions);
    for (std::size_t k = 0; k < lines.size(); ++k) {
        json j;
        try {
            j = json::parse(lines[k]);
        } catch (const json::exception&) {
            if (k + 1 == lines.size()) break;
            throw Error(ErrorKind::data, "corrupt decision log line " + std::to_string(k + 1));
        }
        Decision d = decision_from_json(j);
        if (!find_case(d.case_id)) {
            throw Error(ErrorKind::data, "decision log names unknown case " + d.case_id);
        }
        d.sequence = state->log.size();
        state->latest[d.case_id] = state->log.size();
        state->log.push_back(std::move(d));
    }
    std::atomic_store(&state_, std::shared_ptr<const State>(std::move(state)));
}

Response ReviewService::error(int status, ErrorKind kind, const std::string& message) const {
    Response r;
    r.status = status;
    r.body = {{"error", std::string(peernet::to_string(kind))}, {"message", message}};
    if (kind == ErrorKind::busy) r.retry_after = kRetryAfter;
    return with_revision(std::move(r));
}

Response ReviewService::with_revision(Response r) const {
    r.body["revision"] = state()->snapshot->revision;
    return r;
}

json ReviewService::case_summary(const disambig::AmbiguityCase& c, const State& s) const {
    const auto& r = s.snapshot->suggestions.at(c.id);
    json j;
    j["id"] = c.id;
    j["kind"] = disambig::to_string(c.kind);
    j["provenance"] = disambig::to_string(c.provenance);
    j["source"] = ds_.nodes.pid(c.source);
    j["candidates"] = json::array({ds_.nodes.pid(c.first)});
    if (c.kind == disambig::CaseKind::pair) j["candidates"].push_back(ds_.nodes.pid(c.second));
    const auto it = s.latest.find(c.id);
    j["status"] = it == s.latest.end() ? "pending" : "resolved";
    j["suggestion"] = json::parse(disambig::resolution_to_json(r, ds_.nodes));
    j["margin"] = r.margin;
    j["verdict"] = it == s.latest.end() ? json(nullptr) : json(to_string(s.log[it->second].verdict));
    return j;
}

Response ReviewService::list_cases(const std::string& status) const {
    if (!status.empty() && status != "all" && status != "pending" && status != "resolved") {
        return error(400, ErrorKind::data, "status must be pending, resolved or all");
    }
    const auto s = state();
    std::vector<json> rows;
    for (const auto& c : cases_) {
        auto j = case_summary(c, *s);
        if (status == "pending" || status == "resolved") {
            if (j["status"] != status) continue;
        }
        rows.push_back(std::move(j));
    }
    std::stable_sort(rows.begin(), rows.end(), [](const json& a, const json& b) {
        const double ma = a["margin"].get<double>(), mb = b["margin"].get<double>();
        if (ma != mb) return ma < mb;
        return a["id"].get<std::string>() < b["id"].get<std::string>();
    });
    Response r;
    r.body = {{"session", session_id_}, {"revision", s->snapshot->revision}, {"cases", rows}};
    return r;
}

Response ReviewService::get_case(const std::string& id) const {
    const auto* c = find_case(id);
    if (!c) return error(404, ErrorKind::not_found, "unknown case " + id);
    const auto s = state();
    const auto& snap = *s->snapshot;
    const auto& r = snap.suggestions.at(id);

    auto profile = [&](Index node) {
        json attrs = json::object();
        const auto& cols = ds_.nodes.columns();
        for (std::size_t k = 0; k < cols.size(); ++k) {
            const auto& cell = ds_.nodes.cell(node, static_cast<Index>(k));
            attrs[cols[k].name] = cell ? json(*cell) : json(nullptr);
        }
        return json{{"pid", ds_.nodes.pid(node)}, {"attributes", attrs}, {"degree", snap.graph.degree(node)}};
    };

    json j = case_summary(*c, *s);
    j["source_profile"] = profile(c->source);
    json candidates = json::array();
    auto first = profile(c->first);
    first["distance"] = r.first_distance;
    candidates.push_back(first);
    if (c->kind == disambig::CaseKind::pair) {
        auto second = profile(c->second);
        second["distance"] = r.second_distance;
        candidates.push_back(second);
    } else {
        j["threshold"] = {{"tau", snap.threshold.tau},
                          {"f1", snap.threshold.f1},
                          {"validation_size", snap.threshold.validation_size},
                          {"distance", r.first_distance}};
    }
    j["candidate_profiles"] = candidates;

    const auto key = std::make_pair(snap.revision, id);
    json explanation;
    {
        std::lock_guard lock(explain_mutex_);
        const auto it = explain_cache_.find(key);
        if (it != explain_cache_.end()) explanation = it->second;
    }
    if (explanation.is_null()) {
        const auto e = pipeline::explain_case(snap.model, ds_, snap.graph, *c, r, cfg_.explain, cfg_.seed);
        explanation = json::parse(explain::explanation_to_json(e, ds_.nodes));
        std::lock_guard lock(explain_mutex_);
        explain_cache_.emplace(key, explanation);
    }
    j["explanation"] = explanation;
    j["shared_neighbors"] = explanation.value("shared_neighbors", 0);

    json history = json::array();
    for (const auto& d : s->log) {
        if (d.case_id == id) history.push_back(decision_json(d));
    }
    j["decisions"] = history;

    Response out;
    out.body = {{"session", session_id_}, {"revision", snap.revision}, {"case", j}};
    return out;
}

Response ReviewService::post_decision(const std::string& id, const json& body, const std::string& coder_header) {
    const auto* c = find_case(id);
    if (!c) return error(404, ErrorKind::not_found, "unknown case " + id);
    if (!body.is_object() || !body.contains("verdict") || !body["verdict"].is_string()) {
        return error(400, ErrorKind::data, "body must be an object with a string 'verdict'");
    }
    std::string coder = coder_header;
    if (body.contains("coder") && body["coder"].is_string()) coder = body["coder"].get<std::string>();
    if (coder.empty()) return error(400, ErrorKind::data, "coder id is required (body 'coder' or X-Coder header)");
    const bool amend = body.contains("amend") && body["amend"].is_boolean() && body["amend"].get<bool>();
    const std::string note = body.contains("note") && body["note"].is_string() ? body["note"].get<std::string>() : "";

    ParsedVerdict verdict;
    try {
        verdict = parse_verdict(body["verdict"].get<std::string>());
    } catch (const Error& e) {
        return error(400, e.kind(), e.what());
    }
    std::optional<Index> choice;
    if (verdict.verdict == Verdict::override_choice) {
        const auto node = ds_.nodes.find(verdict.choice);
        const bool candidate =
            node && (*node == c->first || (c->kind == disambig::CaseKind::pair && *node == c->second));
        if (!candidate) {
            return error(400, ErrorKind::data, "override choice " + verdict.choice + " is not a candidate of " + id);
        }
        choice = *node;
    }

    std::lock_guard lock(writer_);
    if (busy_) return error(503, ErrorKind::busy, "recompute in progress; retry later");
    const auto s = state();
    if (const auto it = s->latest.find(id); it != s->latest.end() && !amend) {
        auto r = error(409, ErrorKind::conflict, "case " + id + " already has a verdict; set amend to replace it");
        r.body["decision"] = decision_json(s->log[it->second]);
        return r;
    }

    Decision d;
    d.sequence = s->log.size();
    d.case_id = id;
    d.verdict = verdict.verdict;
    d.choice = choice;
    d.coder = coder;
    d.note = note;
    d.amend = amend;
    d.revision = s->snapshot->revision;
    d.timestamp = utc_now();
    d.suggestion = s->snapshot->suggestions.at(id);
    switch (d.verdict) {
        case Verdict::accept:
            if (d.suggestion.exists && d.suggestion.chosen >= 0) d.staged = NodePair{c->source, d.suggestion.chosen};
            break;
        case Verdict::override_choice: d.staged = NodePair{c->source, *choice}; break;
        case Verdict::reject:
        case Verdict::skip: break;
    }

    try {
        append_durably(state_dir_ / kDecisions, decision_json(d).dump());
    } catch (const Error& e) {
        return error(500, e.kind(), e.what());
    }
    auto next = std::make_shared<State>(*s);
    next->latest[id] = next->log.size();
    next->log.push_back(d);
    std::atomic_store(&state_, std::shared_ptr<const State>(std::move(next)));

    Response r;
    r.body = {{"revision", d.revision}, {"decision", decision_json(d)}};
    return r;
}

Response ReviewService::recompute() {
    std::shared_ptr<const State> s;
    {
        std::lock_guard lock(writer_);
        bool expected = false;
        if (!busy_.compare_exchange_strong(expected, true)) {
            return error(503, ErrorKind::busy, "recompute already in progress; retry later");
        }
        s = state();
    }
    struct Release {
        std::atomic<bool>& flag;
        ~Release() { flag = false; }
    } release{busy_};

    const auto& prev = *s->snapshot;
    auto confirmed = confirmed_edges(*s);
    const data::PairSet known(prev.confirmed);
    const auto fresh = std::count_if(confirmed.begin(), confirmed.end(),
                                     [&](const NodePair& p) { return !known.contains(p.first, p.second); });
    if (fresh == 0) {
        Response r;
        r.body = {{"revision", prev.revision},
                  {"status", "unchanged"},
                  {"message", "no newly confirmed edges since revision " + std::to_string(prev.revision)}};
        return r;
    }

    std::shared_ptr<const Snapshot> snap;
    try {
        const Index n = ds_.features.rows();
        data::EdgeSplit split = base_.split;
        const data::PairSet in_train(split.train);
        for (const auto& p : confirmed) {
            if (!in_train.contains(p.first, p.second)) split.train.push_back(p);
        }
        gat::TrainConfig tc = base_.train;
        tc.epochs = cfg_.review.recompute_epochs;
        tc.patience = cfg_.review.recompute_epochs;
        tc.seed = derive_seed(cfg_.seed, "recompute-" + std::to_string(prev.revision + 1));
        const auto uncertain = data::unique_pairs(ds_.edges, data::Confidence::uncertain);
        const auto result = gat::train(prev.model, ds_.features.values, data::Graph::from_pairs(n, split.train), split,
                                       tc, uncertain);

        auto all = data::unique_pairs(ds_.edges);
        all.insert(all.end(), confirmed.begin(), confirmed.end());
        Rng rng(derive_seed(cfg_.seed, "validation-negatives"));
        const auto negatives = gat::sample_non_edges(n, split.validation.size(), data::PairSet(all), rng);
        const auto threshold = bench::calibrate_held_out(result.model, ds_.features.values, split.train,
                                                         split.validation, negatives, cfg_.resolve.metric);
        snap = build_snapshot(prev.revision + 1, result.model, threshold, std::move(confirmed));
        save_revision(*snap);
    } catch (const std::exception& e) {
        const auto* err = dynamic_cast<const Error*>(&e);
        return error(500, err ? err->kind() : ErrorKind::model,
                     std::string("recompute aborted, revision unchanged: ") + e.what());
    }

    std::size_t changed = 0;
    for (const auto& c : cases_) {
        if (s->latest.count(c.id)) continue;
        const auto& a = prev.suggestions.at(c.id);
        const auto& b = snap->suggestions.at(c.id);
        if (a.chosen != b.chosen || a.exists != b.exists || a.margin != b.margin) ++changed;
    }
    {
        std::lock_guard lock(writer_);
        auto next = std::make_shared<State>(*state());
        next->snapshot = snap;
        std::atomic_store(&state_, std::shared_ptr<const State>(std::move(next)));
    }
    Response r;
    r.body = {{"revision", snap->revision},
              {"status", "recomputed"},
              {"previous_revision", prev.revision},
              {"confirmed_edges", snap->confirmed.size()},
              {"tau", snap->threshold.tau},
              {"changed_pending", changed}};
    return r;
}

struct ReviewService::Origin {
    data::Edge edge;
    std::string origin;  // confident | model | human
    std::string case_id;
    std::optional<std::uint64_t> decision;
};

data::EdgeTable ReviewService::export_edges() const {
    const auto body = export_session().body;
    data::EdgeTable out;
    for (const auto& row : body["rows"]) {
        out.edges.push_back({ds_.nodes.index_of(row["source"].get<std::string>()),
                             ds_.nodes.index_of(row["target"].get<std::string>()), data::Confidence::confident});
    }
    return out;
}

Response ReviewService::export_session() const {
    const auto s = state();
    std::vector<Origin> rows;
    data::PairSet present;
    for (const auto& e : ds_.edges.edges) {
        if (e.confidence == data::Confidence::confident) {
            rows.push_back({e, "confident", "", std::nullopt});
            present.insert(e.src, e.dst);
        }
    }
    for (const auto& c : cases_) {
        const auto it = s->latest.find(c.id);
        const Decision* d = it == s->latest.end() ? nullptr : &s->log[it->second];
        if (d && d->verdict != Verdict::skip) {
            if (d->staged && present.insert(d->staged->first, d->staged->second)) {
                rows.push_back({{d->staged->first, d->staged->second, data::Confidence::confident},
                                "human",
                                c.id,
                                d->sequence});
            }
            continue;
        }
        const auto& r = s->snapshot->suggestions.at(c.id);
        if (r.exists && r.chosen >= 0 && present.insert(c.source, r.chosen)) {
            rows.push_back({{c.source, r.chosen, data::Confidence::confident}, "model", c.id, std::nullopt});
        }
    }

    data::EdgeTable table;
    json jrows = json::array();
    for (const auto& o : rows) {
        table.edges.push_back(o.edge);
        json j{{"source", ds_.nodes.pid(o.edge.src)}, {"target", ds_.nodes.pid(o.edge.dst)}, {"origin", o.origin}};
        if (!o.case_id.empty()) j["case_id"] = o.case_id;
        if (o.decision) j["decision"] = *o.decision;
        jrows.push_back(std::move(j));
    }
    std::ostringstream csv;
    data::write_edges(csv, table, ds_.nodes);
    json audit = json::array();
    for (const auto& d : s->log) audit.push_back(decision_json(d));

    Response r;
    r.body = {{"session", session_id_},
              {"revision", s->snapshot->revision},
              {"edges_csv", csv.str()},
              {"rows", jrows},
              {"audit", audit}};
    return r;
}

Response ReviewService::revision() const {
    const auto s = state();
    std::size_t pending = 0;
    for (const auto& c : cases_) pending += s->latest.count(c.id) ? 0 : 1;
    Response r;
    r.body = {{"session", session_id_},
              {"revision", s->snapshot->revision},
              {"busy", busy_.load()},
              {"cases", cases_.size()},
              {"pending", pending},
              {"decisions", s->log.size()},
              {"confirmed_edges", s->snapshot->confirmed.size()},
              {"tau", s->snapshot->threshold.tau}};
    return r;
}

// --- HTTP ---------------------------------------------------------------------

namespace {

void reply(httplib::Response& res, const Response& r) {
    res.status = r.status;
    res.set_header("X-Revision", std::to_string(r.body.value("revision", std::uint64_t{0})));
    if (r.retry_after > 0) res.set_header("Retry-After", std::to_string(r.retry_after));
    res.set_content(r.body.dump(), "application/json");
}

} // namespace

void mount(httplib::Server& server, ReviewService& service, const fs::path& ui_dir) {
    auto guarded = [&service](auto&& fn) {
        return [&service, fn](const httplib::Request& req, httplib::Response& res) {
            try {
                reply(res, fn(req));
            } catch (const Error& e) {
                Response r;
                r.status = status_for(e.kind());
                r.body = {{"error", std::string(to_string(e.kind()))},
                          {"message", e.what()},
                          {"revision", service.state()->snapshot->revision}};
                reply(res, r);
            } catch (const std::exception& e) {
                Response r;
                r.status = 500;
                r.body = {{"error", "internal"}, {"message", e.what()}, {"revision", service.state()->snapshot->revision}};
                reply(res, r);
            }
        };
    };

    server.Get("/revision", guarded([&service](const httplib::Request&) { return service.revision(); }));
    server.Get("/cases", guarded([&service](const httplib::Request& req) {
                   return service.list_cases(req.has_param("status") ? req.get_param_value("status") : "");
               }));
    server.Get(R"(/cases/([^/]+))",
               guarded([&service](const httplib::Request& req) { return service.get_case(req.matches[1]); }));
    server.Post(R"(/cases/([^/]+)/decision)", guarded([&service](const httplib::Request& req) {
                    const json body = json::parse(req.body, nullptr, false);
                    if (body.is_discarded()) {
                        throw Error(ErrorKind::data, "request body is not valid JSON");
                    }
                    return service.post_decision(req.matches[1], body, req.get_header_value("X-Coder"));
                }));
    server.Post("/recompute", guarded([&service](const httplib::Request&) { return service.recompute(); }));
    server.Get("/export", [&service, guarded](const httplib::Request& req, httplib::Response& res) {
        if (req.get_param_value("format") == "csv") {
            const auto body = service.export_session().body;
            res.set_header("X-Revision", std::to_string(body["revision"].get<std::uint64_t>()));
            res.set_content(body["edges_csv"].get<std::string>(), "text/csv");
            return;
        }
        guarded([&service](const httplib::Request&) { return service.export_session(); })(req, res);
    });
    if (!ui_dir.empty() && fs::is_directory(ui_dir)) {
        server.set_mount_point("/", ui_dir.string());
    }
}

void serve(ReviewService& service, const std::string& host, int port, const fs::path& ui_dir) {
    httplib::Server server;
    mount(server, service, ui_dir);
    if (!server.listen(host, port)) {
        throw Error(ErrorKind::io, "cannot listen on " + host + ":" + std::to_string(port));
    }
}

} // namespace peernet::review
