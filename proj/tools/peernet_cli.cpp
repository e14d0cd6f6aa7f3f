#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "peernet/error.hpp"
#include "peernet/pipeline.hpp"
#include "peernet/review.hpp"

using namespace peernet;

namespace {

int fail(std::string_view category, const std::string& message) {
    std::string line = message;
    for (auto& ch : line) {
        if (ch == '\n' || ch == '\r') ch = ' ';
    }
    std::cerr << category << ": " << line << '\n';
    return 1;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Resolve ambiguous links in peer-network survey data with graph attention embeddings"};
    app.require_subcommand(1);
    app.fallthrough();

    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::string out_dir;
    app.add_option("--config", config_path, "JSON config file")->check(CLI::ExistingFile);
    app.add_option("--seed", seed, "override the global seed");
    app.add_option("--out", out_dir, "override the output directory");

    const std::vector<std::pair<std::string, std::string>> commands{
        {"synth", "generate a synthetic dataset with planted cases"},
        {"train", "train the link model and save a checkpoint"},
        {"resolve", "resolve ambiguity cases and write the disambiguated edge list"},
        {"simulate", "simulated-ambiguity benchmark against DT and MLP baselines"},
        {"risk", "risk prediction on original vs disambiguated edge lists"},
        {"explain", "edge and feature mask explanations for resolved cases"},
        {"serve", "run the review service"},
    };
    for (const auto& [name, help] : commands) app.add_subcommand(name, help);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        return fail("config", e.what());
    }

    try {
        pipeline::RunConfig cfg = config_path.empty() ? pipeline::parse_config("{}", std::filesystem::current_path())
                                                      : pipeline::load_config(config_path);
        if (seed) cfg.seed = *seed;
        if (!out_dir.empty()) cfg.paths.output = out_dir;
        const std::string command = app.get_subcommands().front()->get_name();

        std::string summary;
        if (command == "synth") summary = pipeline::cmd_synth(cfg);
        else if (command == "train") summary = pipeline::cmd_train(cfg);
        else if (command == "resolve") summary = pipeline::cmd_resolve(cfg);
        else if (command == "simulate") summary = pipeline::cmd_simulate(cfg);
        else if (command == "risk") summary = pipeline::cmd_risk(cfg);
        else if (command == "explain") summary = pipeline::cmd_explain(cfg);
        else if (command == "serve") {
            auto service = review::ReviewService::open(cfg);
            std::cout << "review session " << service->session_id() << " on http://" << cfg.review.host << ':'
                      << cfg.review.port << std::endl;
            review::serve(*service, cfg.review.host, cfg.review.port, cfg.review.ui_dir);
        }
        if (!summary.empty()) std::cout << summary << '\n';
        return 0;
    } catch (const Error& e) {
        return fail(to_string(e.kind()), e.what());
    } catch (const std::filesystem::filesystem_error& e) {
        return fail("io", e.what());
    } catch (const std::exception& e) {
        return fail("internal", e.what());
    }
}
