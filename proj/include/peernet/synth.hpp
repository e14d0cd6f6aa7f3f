#ifndef PEERNET_SYNTH_HPP
#define PEERNET_SYNTH_HPP

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "peernet/data.hpp"
#include "peernet/disambiguation.hpp"

namespace peernet::synth {

using data::Index;
using data::NodePair;

/// One survey attribute. Categorical/binary attributes draw from `categories`
/// with `weights`; numeric ones uniformly from [min, max] (rounded when
/// `integer`).
struct AttributeSpec {
    std::string name;
    data::ColumnKind kind = data::ColumnKind::categorical;
    std::vector<std::string> categories;
    std::vector<double> weights;
    double min = 0.0;
    double max = 1.0;
    bool integer = true;
    double missing_rate = 0.0;
    double homophily = 0.0;  // β for this attribute
    bool observed = true;    // unobserved attributes shape links but are not exported
};

/// Survey attributes modelled on the study instrument (demographics and
/// service history).
std::vector<AttributeSpec> default_attributes();

struct RiskModel {
    std::size_t informative = 2;       // leading extra attributes that drive risk
    double exposure_weight = 2.0;      // weight on mean neighbour base risk
    double noise = 0.2;
    double missing_indicator_rate = 0.01;
};

struct SynthConfig {
    Index n = 242;
    std::vector<AttributeSpec> attributes = default_attributes();
    double target_edges = 275.0;
    std::size_t pair_cases = 4;
    std::size_t existence_cases = 83;
    double existence_true_fraction = 0.5;
    double decoy_quantile = 0.1;       // pair decoys come from this top fraction by similarity
    std::size_t extra_attributes = 271;
    RiskModel risk;
    std::uint64_t seed = 0;

    /// Throws Error(config) when infeasible.
    void validate() const;
};

inline const std::vector<std::string>& indicator_columns() {
    static const std::vector<std::string> cols{"sbq_1", "sbq_2", "sbq_3", "sbq_4"};
    return cols;
}

struct SynthDataset {
    data::NodeTable nodes;                   // survey attributes used for disambiguation
    data::NodeTable risk;                    // extra attributes + four indicators
    data::EdgeTable edges;                   // as reported: confident + uncertain rows
    data::EdgeTable true_edges;              // ground-truth network (evaluation only)
    data::EdgeTable corrupted_edges;         // confident + decoy substitutions + every reported existence link
    std::vector<disambig::AmbiguityCase> cases;  // planted, with truth filled in
    double intercept = 0.0;                  // calibrated logit offset b
};

/// Pairwise similarity: β-weighted count of matching categorical values minus
/// β-weighted range-normalized numeric gaps. Missing values never match.
class Similarity {
public:
    Similarity(const std::vector<AttributeSpec>& specs, const data::NodeTable& nodes);

    double operator()(Index u, Index v) const;
    /// Same functional with every β set to `weight`.
    double unweighted(Index u, Index v, double weight = 1.0) const;

private:
    struct Attr {
        bool numeric;
        double beta;
        std::vector<double> values;  // NaN = missing; category index for categorical
    };
    double eval(Index u, Index v, bool use_beta, double weight) const;

    std::vector<Attr> attrs_;
};

SynthDataset generate(const SynthConfig& config);

/// nodes.csv, schema.json, edges.csv, cases.csv, truth.csv, risk.csv,
/// risk_schema.json, edges_true.csv, edges_corrupted.csv
void write_dataset(const SynthDataset& ds, const std::filesystem::path& dir);

} // namespace peernet::synth

#endif // PEERNET_SYNTH_HPP
