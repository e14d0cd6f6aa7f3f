#ifndef PEERNET_TESTS_FIXTURE_RUN_HPP
#define PEERNET_TESTS_FIXTURE_RUN_HPP

#include <filesystem>
#include <string>

#include "peernet/pipeline.hpp"

namespace peernet::fixture {

namespace fs = std::filesystem;

/// Fixture config with a short training budget, writing under the unit work
/// directory.
inline pipeline::RunConfig fixture_config(const std::string& name) {
    auto cfg = pipeline::load_config(fs::path(PEERNET_FIXTURES) / "config.json");
    cfg.paths.output = fs::path(PEERNET_WORK_DIR) / name;
    cfg.train.epochs = 40;
    cfg.train.patience = 40;
    cfg.explain.epochs = 30;
    cfg.explain_cases = 3;
    fs::create_directories(cfg.paths.output);
    return cfg;
}

/// Shared trained checkpoint, built on first use.
inline pipeline::RunConfig trained_config() {
    static const fs::path shared = fs::path(PEERNET_WORK_DIR) / "trained";
    auto cfg = fixture_config("trained");
    if (!fs::exists(shared / "checkpoint.json")) pipeline::cmd_train(cfg);
    return cfg;
}

} // namespace peernet::fixture

#endif // PEERNET_TESTS_FIXTURE_RUN_HPP
