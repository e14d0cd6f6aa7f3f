#ifndef PEERNET_DATA_HPP
#define PEERNET_DATA_HPP

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace peernet::data {

using Index = Eigen::Index;

/// Unordered node pair, always stored with first < second.
using NodePair = std::pair<Index, Index>;

inline NodePair ordered(Index a, Index b) { return a < b ? NodePair{a, b} : NodePair{b, a}; }

enum class ColumnKind { categorical, numeric, binary };

ColumnKind parse_column_kind(const std::string& text);
std::string to_string(ColumnKind kind);

struct Column {
    std::string name;
    ColumnKind kind = ColumnKind::numeric;
};

/// Column name -> kind, as read from the schema sidecar.
using Schema = std::map<std::string, ColumnKind>;

/// Raw survey attributes. Rows are addressed by dense internal index; the
/// original PID is kept alongside. Missing cells are std::nullopt.
class NodeTable {
public:
    using Cell = std::optional<std::string>;

    NodeTable() = default;
    NodeTable(std::vector<Column> columns);

    /// Appends a row. Throws on duplicate PID, wrong arity, or a value that
    /// does not fit its column kind.
    void add_row(const std::string& pid, std::vector<Cell> cells);

    Index size() const { return static_cast<Index>(pids_.size()); }
    const std::vector<Column>& columns() const { return columns_; }
    std::optional<Index> column_index(const std::string& name) const;

    const std::string& pid(Index row) const { return pids_.at(static_cast<std::size_t>(row)); }
    const std::vector<std::string>& pids() const { return pids_; }
    std::optional<Index> find(const std::string& pid) const;
    /// Throws Error(data) when the PID is unknown.
    Index index_of(const std::string& pid) const;

    const Cell& cell(Index row, Index col) const {
        return rows_.at(static_cast<std::size_t>(row)).at(static_cast<std::size_t>(col));
    }
    const std::vector<Cell>& row(Index r) const { return rows_.at(static_cast<std::size_t>(r)); }

    std::size_t missing_count() const;

private:
    std::vector<Column> columns_;
    std::vector<std::string> pids_;
    std::unordered_map<std::string, Index> index_;
    std::vector<std::vector<Cell>> rows_;
};

/// Column-wise union of two tables over the same PIDs, in `left` row order.
NodeTable join_columns(const NodeTable& left, const NodeTable& right);

enum class Confidence { confident, uncertain };

Confidence parse_confidence(const std::string& text);
std::string to_string(Confidence c);

struct Edge {
    Index src = 0;
    Index dst = 0;
    Confidence confidence = Confidence::confident;

    friend bool operator==(const Edge&, const Edge&) = default;
};

/// Directed nominations exactly as reported (endpoints as internal indices).
struct EdgeTable {
    std::vector<Edge> edges;

    std::size_t count(Confidence c) const;
    std::size_t size() const { return edges.size(); }
};

/// Unique undirected pairs among edges with the given confidence.
std::vector<NodePair> unique_pairs(const EdgeTable& edges, std::optional<Confidence> only = std::nullopt);

/// Provenance of one FeatureMatrix column.
struct ColumnTransform {
    enum class Kind { one_hot, z_score };

    std::string source;
    Kind kind = Kind::z_score;
    std::string category;   // one_hot only; empty with `unknown` set for the missing bucket
    bool unknown = false;
    double mean = 0.0;      // z_score only
    double stddev = 1.0;    // z_score only
};

struct FeatureMatrix {
    Eigen::MatrixXd values;
    std::vector<ColumnTransform> columns;
    std::vector<std::string> dropped;

    Index rows() const { return values.rows(); }
    Index cols() const { return values.cols(); }

    /// Human-readable name of a column, e.g. "Gender=F" or "Age".
    std::string column_name(Index col) const;
    /// Stable hash of the column map. Checkpoints record it and refuse to
    /// score features produced under a different map.
    std::string column_map_hash() const;
    std::string column_map_json() const;

    /// Re-applies the recorded transforms to one raw row of `table`.
    Eigen::RowVectorXd transform_row(const NodeTable& table, Index row) const;
};

struct PreprocessOptions {
    double missing_threshold = 0.5;
    std::vector<std::string> exclude;
};

/// A row's neighbours are stored as one contiguous run of "entries"; per-entry
/// data (attention, edge masks) is indexed by entry position.
class Graph {
public:
    Graph() = default;

    /// Symmetrized adjacency over `pairs` plus a self-loop on every node.
    static Graph from_pairs(Index n, std::span<const NodePair> pairs);

    Index size() const { return static_cast<Index>(offsets_.empty() ? 0 : offsets_.size() - 1); }
    Index entry_count() const { return static_cast<Index>(neighbors_.size()); }

    Index entry_begin(Index i) const { return offsets_[static_cast<std::size_t>(i)]; }
    Index entry_end(Index i) const { return offsets_[static_cast<std::size_t>(i) + 1]; }
    Index neighbor(Index entry) const { return neighbors_[static_cast<std::size_t>(entry)]; }

    /// Sorted neighbourhood N(i), including i itself.
    std::span<const Index> neighbors(Index i) const;
    bool adjacent(Index i, Index j) const;
    Index degree(Index i) const { return entry_end(i) - entry_begin(i) - 1; }

    /// Unordered edges, self-loops excluded.
    std::vector<NodePair> pairs() const;

    /// Edges as originally reported (empty when built from pairs directly).
    const std::vector<Edge>& directed_edges() const { return directed_; }
    void set_directed_edges(std::vector<Edge> edges) { directed_ = std::move(edges); }

private:
    std::vector<Index> offsets_;
    std::vector<Index> neighbors_;
    std::vector<Edge> directed_;
};

/// Membership set over unordered pairs.
class PairSet {
public:
    PairSet() = default;
    explicit PairSet(std::span<const NodePair> pairs) {
        for (const auto& [a, b] : pairs) insert(a, b);
    }

    bool insert(Index a, Index b) { return keys_.insert(key(a, b)).second; }
    bool contains(Index a, Index b) const { return keys_.count(key(a, b)) != 0; }
    std::size_t size() const { return keys_.size(); }

private:
    static std::uint64_t key(Index a, Index b) {
        const auto p = ordered(a, b);
        return (static_cast<std::uint64_t>(p.first) << 32) | static_cast<std::uint64_t>(p.second);
    }

    std::unordered_set<std::uint64_t> keys_;
};

enum class EdgeFilter { confident, uncertain, all };

struct SplitRatios {
    double train = 0.6;
    double validation = 0.2;
    double test = 0.2;
};

struct EdgeSplit {
    std::vector<NodePair> train;
    std::vector<NodePair> validation;
    std::vector<NodePair> test;
    std::uint64_t seed = 0;
};

// --- loading ---------------------------------------------------------------

Schema load_schema(const std::filesystem::path& path);
Schema parse_schema(const std::string& json_text);

/// Header cells may carry an inline kind ("Age:numeric"); the schema wins
/// otherwise. The PID column must be named "PID".
NodeTable read_nodes(std::istream& in, const Schema& schema);
NodeTable load_nodes(const std::filesystem::path& path, const Schema& schema);
NodeTable load_nodes(const std::filesystem::path& path, const std::filesystem::path& schema_path);

EdgeTable read_edges(std::istream& in, const NodeTable& nodes);
EdgeTable load_edges(const std::filesystem::path& path, const NodeTable& nodes);

void write_nodes(std::ostream& out, const NodeTable& nodes);
void write_schema(std::ostream& out, const NodeTable& nodes);
void write_edges(std::ostream& out, const EdgeTable& edges, const NodeTable& nodes);

// --- transforms ------------------------------------------------------------

FeatureMatrix preprocess(const NodeTable& nodes, const PreprocessOptions& options = {});

Graph build_graph(const EdgeTable& edges, Index n, EdgeFilter include);

SplitRatios default_split();
EdgeSplit split_edges(std::span<const NodePair> pairs, const SplitRatios& ratios, std::uint64_t seed);

// --- small helpers shared by the writers and readers -----------------------

std::vector<std::string> split_csv_line(const std::string& line);
std::string format_double(double v);

} // namespace peernet::data

#endif // PEERNET_DATA_HPP
