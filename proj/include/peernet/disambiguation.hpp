#ifndef PEERNET_DISAMBIGUATION_HPP
#define PEERNET_DISAMBIGUATION_HPP

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "peernet/data.hpp"

namespace peernet::disambig {

using data::Index;
using data::NodePair;

enum class CaseKind { pair, existence };
enum class Provenance { real, simulated, planted };
enum class DistanceMetric { euclidean, cosine };

std::string to_string(CaseKind k);
std::string to_string(Provenance p);
CaseKind parse_case_kind(const std::string& s);
Provenance parse_provenance(const std::string& s);
DistanceMetric parse_metric(const std::string& s);

/// One ambiguity. Pair cases name two candidates; existence cases one
/// (`second` is -1).
struct AmbiguityCase {
    std::string id;
    CaseKind kind = CaseKind::pair;
    Provenance provenance = Provenance::real;
    Index source = 0;
    Index first = 0;
    Index second = -1;
    std::optional<Index> truth_node;    // pair cases
    std::optional<bool> truth_exists;   // existence cases

    /// Throws Error(data) on violated candidate constraints.
    void validate() const;
};

struct Threshold {
    double tau = 0.0;
    double f1 = 0.0;
    std::size_t validation_size = 0;
};

struct Resolution {
    std::string case_id;
    CaseKind kind = CaseKind::pair;
    Index source = 0;
    Index first = 0;
    Index second = -1;
    Index chosen = -1;   // pair: chosen candidate
    bool exists = false; // existence: decision; pair: always true
    double first_distance = 0.0;
    double second_distance = 0.0;  // pair only
    double threshold = 0.0;        // existence only
    double margin = 0.0;
    bool low_confidence = false;
};

struct ResolveOptions {
    DistanceMetric metric = DistanceMetric::euclidean;
    double margin_epsilon = 1e-6;
};

double embedding_distance(const Eigen::Ref<const Eigen::RowVectorXd>& zu, const Eigen::Ref<const Eigen::RowVectorXd>& zv,
                          DistanceMetric metric = DistanceMetric::euclidean);

/// Picks the candidate closer to `u`; exact ties go to the smaller index and
/// are flagged low-confidence.
Resolution resolve_pair(Index u, Index v1, Index v2, const Eigen::MatrixXd& embeddings, const ResolveOptions& opt = {});

/// exists ⇔ d(u, v) < τ (strict).
Resolution link_exists(Index u, Index v, const Eigen::MatrixXd& embeddings, double tau, const ResolveOptions& opt = {});

Resolution resolve_case(const AmbiguityCase& c, const Eigen::MatrixXd& embeddings, double tau,
                        const ResolveOptions& opt = {});

/// F1-maximizing cutoff for "exists ⇔ d < τ" over midpoints between sorted
/// distinct distances; F1 ties go to the larger τ (higher recall).
Threshold calibrate_threshold(std::span<const double> distances, std::span<const int> labels);
Threshold calibrate_threshold(std::span<const NodePair> pairs, std::span<const int> labels,
                              const Eigen::MatrixXd& embeddings, DistanceMetric metric = DistanceMetric::euclidean);

/// (u, v1) drawn with replacement from `test_edges` in random orientation,
/// candidate order shuffled,
/// v2 uniform among nodes with (u, v2) absent from `all_edges`. Truth is v1.
std::vector<AmbiguityCase> simulate_pair_cases(std::span<const NodePair> test_edges, const data::PairSet& all_edges,
                                               Index node_count, std::size_t count, std::uint64_t seed);

/// Every test edge as a positive plus the same number of uniformly drawn
/// non-edges as negatives.
std::vector<AmbiguityCase> simulate_link_cases(std::span<const NodePair> test_edges, const data::PairSet& all_edges,
                                               Index node_count, std::uint64_t seed);

struct ResolvedEdges {
    data::EdgeTable edges;            // confident input + accepted links, all confident
    std::vector<Resolution> log;
    std::vector<AmbiguityCase> cases; // explicit cases plus implicit existence cases
};

/// Resolves every uncertain record. Uncertain edges not covered by a pair
/// case become implicit existence cases.
ResolvedEdges resolve_edge_list(const data::EdgeTable& edges, std::span<const AmbiguityCase> cases,
                                const Eigen::MatrixXd& embeddings, double tau, const ResolveOptions& opt = {});

/// Existence cases for uncertain edges not covered by `cases`.
std::vector<AmbiguityCase> implicit_existence_cases(const data::EdgeTable& edges, std::span<const AmbiguityCase> cases);

// --- files -------------------------------------------------------------------

/// id,kind,provenance,source,candidate1,candidate2,truth (PIDs; truth optional)
std::vector<AmbiguityCase> read_cases(std::istream& in, const data::NodeTable& nodes);
std::vector<AmbiguityCase> load_cases(const std::filesystem::path& path, const data::NodeTable& nodes);
void write_cases(std::ostream& out, std::span<const AmbiguityCase> cases, const data::NodeTable& nodes,
                 bool include_truth);

/// id,kind,truth. Fills truth fields of matching cases.
void read_truth(std::istream& in, std::vector<AmbiguityCase>& cases, const data::NodeTable& nodes);
void load_truth(const std::filesystem::path& path, std::vector<AmbiguityCase>& cases, const data::NodeTable& nodes);
void write_truth(std::ostream& out, std::span<const AmbiguityCase> cases, const data::NodeTable& nodes);

/// One JSON object per line.
std::string resolution_to_json(const Resolution& r, const data::NodeTable& nodes);
Resolution resolution_from_json(const std::string& line, const data::NodeTable& nodes);
void write_resolution_log(std::ostream& out, std::span<const Resolution> log, const data::NodeTable& nodes);

} // namespace peernet::disambig

#endif // PEERNET_DISAMBIGUATION_HPP
