#ifndef PEERNET_CHECKPOINT_HPP
#define PEERNET_CHECKPOINT_HPP

#include <cstdint>
#include <filesystem>
#include <string>

#include "peernet/data.hpp"
#include "peernet/disambiguation.hpp"
#include "peernet/gat.hpp"
#include "peernet/train.hpp"

namespace peernet::checkpoint {

/// Trained link model plus everything needed to reuse it on the same data.
struct Checkpoint {
    gat::GatModel<double> model;
    std::string column_map_hash;
    std::string column_map;         // JSON text of the feature transforms
    disambig::Threshold threshold;
    data::EdgeSplit split;          // internal indices
    gat::TrainConfig train;
    int best_epoch = -1;
    std::uint64_t seed = 0;
};

/// Deterministic JSON text with a trailing content hash.
std::string to_json(const Checkpoint& ckpt, const data::NodeTable& nodes);
/// Throws Error(data) on malformed text or a hash mismatch.
Checkpoint from_json(const std::string& text, const data::NodeTable& nodes);

void save(const std::filesystem::path& path, const Checkpoint& ckpt, const data::NodeTable& nodes);
Checkpoint load(const std::filesystem::path& path, const data::NodeTable& nodes);

/// Refuses (Error(model)) features built under a different column map.
void require_compatible(const Checkpoint& ckpt, const data::FeatureMatrix& features);

} // namespace peernet::checkpoint

#endif // PEERNET_CHECKPOINT_HPP
