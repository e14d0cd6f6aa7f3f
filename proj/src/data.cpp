#include "peernet/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <set>
#include <sstream>

#include <json.hpp>

#include "peernet/error.hpp"
#include "peernet/rng.hpp"

namespace peernet::data {

namespace {

std::optional<double> parse_number(const std::string& text) {
    double v = 0.0;
    const char* first = text.data();
    const char* last = text.data() + text.size();
    auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc() || ptr != last || !std::isfinite(v)) {
        return std::nullopt;
    }
    return v;
}

void check_cell(const Column& col, const std::string& value, const std::string& pid) {
    switch (col.kind) {
        case ColumnKind::numeric:
            if (!parse_number(value)) {
                throw Error(ErrorKind::data, "column '" + col.name + "' is numeric but PID " + pid +
                                                 " has value '" + value + "'");
            }
            break;
        case ColumnKind::binary:
            if (value != "0" && value != "1") {
                throw Error(ErrorKind::data, "column '" + col.name + "' is binary but PID " + pid +
                                                 " has value '" + value + "'");
            }
            break;
        case ColumnKind::categorical:
            break;
    }
}

std::ifstream open_input(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw Error(ErrorKind::io, "cannot open " + path.string());
    }
    return in;
}

bool read_line(std::istream& in, std::string& line) {
    if (!std::getline(in, line)) {
        return false;
    }
    if (!line.empty() && line.back() == '\r') {
        line.pop_back();
    }
    return true;
}

} // namespace

ColumnKind parse_column_kind(const std::string& text) {
    if (text == "categorical") return ColumnKind::categorical;
    if (text == "numeric") return ColumnKind::numeric;
    if (text == "binary") return ColumnKind::binary;
    throw Error(ErrorKind::data, "unknown column kind '" + text + "'");
}

std::string to_string(ColumnKind kind) {
    switch (kind) {
        case ColumnKind::categorical: return "categorical";
        case ColumnKind::numeric: return "numeric";
        case ColumnKind::binary: return "binary";
    }
    return "numeric";
}

Confidence parse_confidence(const std::string& text) {
    if (text == "confident") return Confidence::confident;
    if (text == "uncertain") return Confidence::uncertain;
    throw Error(ErrorKind::data, "unknown confidence '" + text + "'");
}

std::string to_string(Confidence c) {
    return c == Confidence::confident ? "confident" : "uncertain";
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string field;
    for (char c : line) {
        if (c == ',') {
            out.push_back(std::move(field));
            field.clear();
        } else {
            field.push_back(c);
        }
    }
    out.push_back(std::move(field));
    return out;
}

std::string format_double(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    if (ec != std::errc()) {
        throw Error(ErrorKind::numeric, "cannot format value");
    }
    return std::string(buf, ptr);
}

// --- NodeTable ---------------------------------------------------------------

NodeTable::NodeTable(std::vector<Column> columns) : columns_(std::move(columns)) {}

void NodeTable::add_row(const std::string& pid, std::vector<Cell> cells) {
    if (pid.empty()) {
        throw Error(ErrorKind::data, "empty PID at row " + std::to_string(pids_.size() + 1));
    }
    if (index_.count(pid) != 0) {
        throw Error(ErrorKind::data, "duplicate PID " + pid);
    }
    if (cells.size() != columns_.size()) {
        throw Error(ErrorKind::data, "PID " + pid + " has " + std::to_string(cells.size()) +
                                         " attribute cells, expected " + std::to_string(columns_.size()));
    }
    for (std::size_t c = 0; c < cells.size(); ++c) {
        if (cells[c]) {
            check_cell(columns_[c], *cells[c], pid);
        }
    }
    index_.emplace(pid, static_cast<Index>(pids_.size()));
    pids_.push_back(pid);
    rows_.push_back(std::move(cells));
}

std::optional<Index> NodeTable::column_index(const std::string& name) const {
    for (std::size_t c = 0; c < columns_.size(); ++c) {
        if (columns_[c].name == name) {
            return static_cast<Index>(c);
        }
    }
    return std::nullopt;
}

std::optional<Index> NodeTable::find(const std::string& pid) const {
    auto it = index_.find(pid);
    if (it == index_.end()) {
        return std::nullopt;
    }
    return it->second;
}

Index NodeTable::index_of(const std::string& pid) const {
    auto idx = find(pid);
    if (!idx) {
        throw Error(ErrorKind::data, "unknown PID " + pid);
    }
    return *idx;
}

std::size_t NodeTable::missing_count() const {
    std::size_t n = 0;
    for (const auto& r : rows_) {
        n += static_cast<std::size_t>(std::count(r.begin(), r.end(), std::nullopt));
    }
    return n;
}

NodeTable join_columns(const NodeTable& left, const NodeTable& right) {
    std::vector<Column> cols = left.columns();
    for (const auto& c : right.columns()) {
        if (left.column_index(c.name)) {
            throw Error(ErrorKind::data, "column '" + c.name + "' present in both tables");
        }
        cols.push_back(c);
    }
    NodeTable out(std::move(cols));
    for (Index r = 0; r < left.size(); ++r) {
        auto other = right.find(left.pid(r));
        if (!other) {
            throw Error(ErrorKind::data, "PID " + left.pid(r) + " missing from joined table");
        }
        auto cells = left.row(r);
        const auto& extra = right.row(*other);
        cells.insert(cells.end(), extra.begin(), extra.end());
        out.add_row(left.pid(r), std::move(cells));
    }
    return out;
}

// --- EdgeTable ---------------------------------------------------------------

std::size_t EdgeTable::count(Confidence c) const {
    return static_cast<std::size_t>(
        std::count_if(edges.begin(), edges.end(), [c](const Edge& e) { return e.confidence == c; }));
}

std::vector<NodePair> unique_pairs(const EdgeTable& edges, std::optional<Confidence> only) {
    std::vector<NodePair> out;
    out.reserve(edges.size());
    for (const auto& e : edges.edges) {
        if (!only || e.confidence == *only) {
            out.push_back(ordered(e.src, e.dst));
        }
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

// --- IO ------------------------------------------------------------------------

Schema parse_schema(const std::string& json_text) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(json_text);
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::data, std::string("malformed schema: ") + e.what());
    }
    const auto& cols = doc.contains("columns") ? doc.at("columns") : doc;
    if (!cols.is_object()) {
        throw Error(ErrorKind::data, "schema must map column names to kinds");
    }
    Schema schema;
    for (const auto& [name, kind] : cols.items()) {
        if (!kind.is_string()) {
            throw Error(ErrorKind::data, "schema kind for '" + name + "' must be a string");
        }
        schema.emplace(name, parse_column_kind(kind.get<std::string>()));
    }
    return schema;
}

Schema load_schema(const std::filesystem::path& path) {
    auto in = open_input(path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_schema(ss.str());
}

NodeTable read_nodes(std::istream& in, const Schema& schema) {
    std::string line;
    if (!read_line(in, line)) {
        throw Error(ErrorKind::data, "node file has no header row");
    }
    auto header = split_csv_line(line);
    std::optional<std::size_t> pid_col;
    std::vector<Column> columns;
    std::vector<std::size_t> source_col;
    for (std::size_t c = 0; c < header.size(); ++c) {
        std::string name = header[c];
        std::optional<ColumnKind> kind;
        if (auto colon = name.rfind(':'); colon != std::string::npos) {
            kind = parse_column_kind(name.substr(colon + 1));
            name = name.substr(0, colon);
        }
        if (name == "PID") {
            pid_col = c;
            continue;
        }
        if (auto it = schema.find(name); it != schema.end()) {
            kind = it->second;
        }
        if (!kind) {
            throw Error(ErrorKind::data, "unknown column kind for '" + name + "'");
        }
        columns.push_back({name, *kind});
        source_col.push_back(c);
    }
    if (!pid_col) {
        throw Error(ErrorKind::data, "node file has no PID column");
    }

    NodeTable table(columns);
    std::size_t line_no = 1;
    while (read_line(in, line)) {
        ++line_no;
        if (line.empty()) {
            continue;
        }
        auto fields = split_csv_line(line);
        if (fields.size() != header.size()) {
            throw Error(ErrorKind::data, "line " + std::to_string(line_no) + " has " +
                                             std::to_string(fields.size()) + " fields, expected " +
                                             std::to_string(header.size()));
        }
        std::vector<NodeTable::Cell> cells;
        cells.reserve(source_col.size());
        for (std::size_t c : source_col) {
            if (fields[c].empty()) {
                cells.emplace_back(std::nullopt);
            } else {
                cells.emplace_back(fields[c]);
            }
        }
        table.add_row(fields[*pid_col], std::move(cells));
    }
    return table;
}

NodeTable load_nodes(const std::filesystem::path& path, const Schema& schema) {
    auto in = open_input(path);
    return read_nodes(in, schema);
}

NodeTable load_nodes(const std::filesystem::path& path, const std::filesystem::path& schema_path) {
    return load_nodes(path, load_schema(schema_path));
}

EdgeTable read_edges(std::istream& in, const NodeTable& nodes) {
    EdgeTable table;
    std::string line;
    if (!read_line(in, line)) {
        return table;
    }
    auto header = split_csv_line(line);
    if (header.size() != 3 || header[0] != "src" || header[1] != "dst" || header[2] != "confidence") {
        throw Error(ErrorKind::data, "edge file header must be src,dst,confidence");
    }
    std::set<std::tuple<Index, Index, Confidence>> seen;
    std::size_t line_no = 1;
    while (read_line(in, line)) {
        ++line_no;
        if (line.empty()) {
            continue;
        }
        auto f = split_csv_line(line);
        if (f.size() != 3) {
            throw Error(ErrorKind::data, "edge line " + std::to_string(line_no) + " must have 3 fields");
        }
        auto src = nodes.find(f[0]);
        auto dst = nodes.find(f[1]);
        if (!src || !dst) {
            throw Error(ErrorKind::data, "edge line " + std::to_string(line_no) + " references unknown PID " +
                                             (!src ? f[0] : f[1]));
        }
        if (*src == *dst) {
            throw Error(ErrorKind::data, "edge line " + std::to_string(line_no) + " is a self-loop on PID " + f[0]);
        }
        Edge e{*src, *dst, parse_confidence(f[2])};
        if (!seen.emplace(e.src, e.dst, e.confidence).second) {
            throw Error(ErrorKind::data, "edge line " + std::to_string(line_no) + " duplicates " + f[0] + "->" + f[1]);
        }
        table.edges.push_back(e);
    }
    return table;
}

EdgeTable load_edges(const std::filesystem::path& path, const NodeTable& nodes) {
    auto in = open_input(path);
    return read_edges(in, nodes);
}

void write_nodes(std::ostream& out, const NodeTable& nodes) {
    out << "PID";
    for (const auto& c : nodes.columns()) {
        out << ',' << c.name;
    }
    out << '\n';
    for (Index r = 0; r < nodes.size(); ++r) {
        out << nodes.pid(r);
        for (const auto& cell : nodes.row(r)) {
            out << ',';
            if (cell) {
                out << *cell;
            }
        }
        out << '\n';
    }
}

void write_schema(std::ostream& out, const NodeTable& nodes) {
    nlohmann::ordered_json cols = nlohmann::ordered_json::object();
    for (const auto& c : nodes.columns()) {
        cols[c.name] = to_string(c.kind);
    }
    nlohmann::ordered_json doc;
    doc["columns"] = cols;
    out << doc.dump(2) << '\n';
}

void write_edges(std::ostream& out, const EdgeTable& edges, const NodeTable& nodes) {
    out << "src,dst,confidence\n";
    for (const auto& e : edges.edges) {
        out << nodes.pid(e.src) << ',' << nodes.pid(e.dst) << ',' << to_string(e.confidence) << '\n';
    }
}

// --- preprocessing -------------------------------------------------------------

std::string FeatureMatrix::column_name(Index col) const {
    const auto& t = columns.at(static_cast<std::size_t>(col));
    if (t.kind == ColumnTransform::Kind::z_score) {
        return t.source;
    }
    return t.source + "=" + (t.unknown ? std::string("<unknown>") : t.category);
}

std::string FeatureMatrix::column_map_json() const {
    nlohmann::ordered_json arr = nlohmann::ordered_json::array();
    for (const auto& t : columns) {
        nlohmann::ordered_json j;
        j["source"] = t.source;
        if (t.kind == ColumnTransform::Kind::one_hot) {
            j["kind"] = "one_hot";
            j["category"] = t.category;
            j["unknown"] = t.unknown;
        } else {
            j["kind"] = "z_score";
            j["mean"] = t.mean;
            j["stddev"] = t.stddev;
        }
        arr.push_back(std::move(j));
    }
    return arr.dump();
}

std::string FeatureMatrix::column_map_hash() const {
    std::ostringstream os;
    os << std::hex << std::setw(16) << std::setfill('0') << fnv1a(column_map_json());
    return os.str();
}

Eigen::RowVectorXd FeatureMatrix::transform_row(const NodeTable& table, Index row) const {
    Eigen::RowVectorXd out = Eigen::RowVectorXd::Zero(static_cast<Index>(columns.size()));
    for (std::size_t c = 0; c < columns.size(); ++c) {
        const auto& t = columns[c];
        auto src = table.column_index(t.source);
        if (!src) {
            throw Error(ErrorKind::data, "column '" + t.source + "' missing from table");
        }
        const auto& cell = table.cell(row, *src);
        if (t.kind == ColumnTransform::Kind::z_score) {
            out(static_cast<Index>(c)) = cell ? (*parse_number(*cell) - t.mean) / t.stddev : 0.0;
        } else if (t.unknown) {
            out(static_cast<Index>(c)) = cell ? 0.0 : 1.0;
        } else {
            out(static_cast<Index>(c)) = (cell && *cell == t.category) ? 1.0 : 0.0;
        }
    }
    return out;
}

FeatureMatrix preprocess(const NodeTable& nodes, const PreprocessOptions& options) {
    if (!(options.missing_threshold > 0.0 && options.missing_threshold <= 1.0)) {
        throw Error(ErrorKind::config, "missing_threshold must lie in (0, 1]");
    }
    const Index n = nodes.size();
    FeatureMatrix fm;
    for (std::size_t c = 0; c < nodes.columns().size(); ++c) {
        const auto& col = nodes.columns()[c];
        if (std::find(options.exclude.begin(), options.exclude.end(), col.name) != options.exclude.end()) {
            continue;
        }
        std::size_t missing = 0;
        for (Index r = 0; r < n; ++r) {
            missing += nodes.cell(r, static_cast<Index>(c)) ? 0 : 1;
        }
        // "majority missing" is read strictly: more than the threshold
        if (n == 0 || static_cast<double>(missing) > options.missing_threshold * static_cast<double>(n)) {
            fm.dropped.push_back(col.name);
            continue;
        }
        if (col.kind == ColumnKind::numeric) {
            double sum = 0.0;
            std::size_t count = 0;
            for (Index r = 0; r < n; ++r) {
                if (const auto& cell = nodes.cell(r, static_cast<Index>(c))) {
                    sum += *parse_number(*cell);
                    ++count;
                }
            }
            const double mean = sum / static_cast<double>(count);
            double ss = 0.0;
            for (Index r = 0; r < n; ++r) {
                if (const auto& cell = nodes.cell(r, static_cast<Index>(c))) {
                    const double d = *parse_number(*cell) - mean;
                    ss += d * d;
                }
            }
            const double stddev = std::sqrt(ss / static_cast<double>(count));
            if (!(stddev > 0.0)) {
                fm.dropped.push_back(col.name);
                continue;
            }
            ColumnTransform t;
            t.source = col.name;
            t.kind = ColumnTransform::Kind::z_score;
            t.mean = mean;
            t.stddev = stddev;
            fm.columns.push_back(t);
        } else {
            std::set<std::string> categories;
            for (Index r = 0; r < n; ++r) {
                if (const auto& cell = nodes.cell(r, static_cast<Index>(c))) {
                    categories.insert(*cell);
                }
            }
            for (const auto& cat : categories) {
                ColumnTransform t;
                t.source = col.name;
                t.kind = ColumnTransform::Kind::one_hot;
                t.category = cat;
                fm.columns.push_back(t);
            }
            if (missing > 0) {
                ColumnTransform t;
                t.source = col.name;
                t.kind = ColumnTransform::Kind::one_hot;
                t.unknown = true;
                fm.columns.push_back(t);
            }
        }
    }
    if (fm.columns.empty()) {
        throw Error(ErrorKind::data, "no usable features");
    }
    fm.values.resize(n, static_cast<Index>(fm.columns.size()));
    for (Index r = 0; r < n; ++r) {
        fm.values.row(r) = fm.transform_row(nodes, r);
    }
    return fm;
}

// --- Graph ---------------------------------------------------------------------

Graph Graph::from_pairs(Index n, std::span<const NodePair> pairs) {
    std::vector<std::vector<Index>> adj(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i) {
        adj[static_cast<std::size_t>(i)].push_back(i);
    }
    for (const auto& [a, b] : pairs) {
        if (a < 0 || b < 0 || a >= n || b >= n) {
            throw Error(ErrorKind::data, "edge endpoint out of range");
        }
        if (a == b) {
            continue;
        }
        adj[static_cast<std::size_t>(a)].push_back(b);
        adj[static_cast<std::size_t>(b)].push_back(a);
    }
    Graph g;
    g.offsets_.reserve(static_cast<std::size_t>(n) + 1);
    g.offsets_.push_back(0);
    for (auto& nb : adj) {
        std::sort(nb.begin(), nb.end());
        nb.erase(std::unique(nb.begin(), nb.end()), nb.end());
        g.neighbors_.insert(g.neighbors_.end(), nb.begin(), nb.end());
        g.offsets_.push_back(static_cast<Index>(g.neighbors_.size()));
    }
    return g;
}

std::span<const Index> Graph::neighbors(Index i) const {
    const auto b = static_cast<std::size_t>(entry_begin(i));
    const auto e = static_cast<std::size_t>(entry_end(i));
    return {neighbors_.data() + b, e - b};
}

bool Graph::adjacent(Index i, Index j) const {
    auto nb = neighbors(i);
    return std::binary_search(nb.begin(), nb.end(), j);
}

std::vector<NodePair> Graph::pairs() const {
    std::vector<NodePair> out;
    for (Index i = 0; i < size(); ++i) {
        for (Index j : neighbors(i)) {
            if (j > i) {
                out.emplace_back(i, j);
            }
        }
    }
    return out;
}

Graph build_graph(const EdgeTable& edges, Index n, EdgeFilter include) {
    std::vector<NodePair> pairs;
    std::vector<Edge> kept;
    for (const auto& e : edges.edges) {
        const bool take = include == EdgeFilter::all ||
                          (include == EdgeFilter::confident && e.confidence == Confidence::confident) ||
                          (include == EdgeFilter::uncertain && e.confidence == Confidence::uncertain);
        if (take) {
            pairs.push_back(ordered(e.src, e.dst));
            kept.push_back(e);
        }
    }
    Graph g = Graph::from_pairs(n, pairs);
    g.set_directed_edges(std::move(kept));
    return g;
}

SplitRatios default_split() { return {}; }

EdgeSplit split_edges(std::span<const NodePair> pairs, const SplitRatios& ratios, std::uint64_t seed) {
    std::vector<NodePair> unique(pairs.begin(), pairs.end());
    for (auto& p : unique) {
        p = ordered(p.first, p.second);
    }
    std::sort(unique.begin(), unique.end());
    unique.erase(std::unique(unique.begin(), unique.end()), unique.end());
    if (unique.size() < 5) {
        throw Error(ErrorKind::data, "need at least 5 confident edges to split, got " + std::to_string(unique.size()));
    }
    const double total = ratios.train + ratios.validation + ratios.test;
    if (!(ratios.train > 0 && ratios.validation > 0 && ratios.test > 0) || std::abs(total - 1.0) > 1e-9) {
        throw Error(ErrorKind::config, "split ratios must be positive and sum to 1");
    }
    Rng rng(seed);
    std::shuffle(unique.begin(), unique.end(), rng);

    const auto m = static_cast<double>(unique.size());
    const auto n_val = static_cast<std::size_t>(std::llround(ratios.validation * m));
    const auto n_test = static_cast<std::size_t>(std::llround(ratios.test * m));
    const std::size_t n_train = unique.size() - n_val - n_test;

    EdgeSplit split;
    split.seed = seed;
    split.train.assign(unique.begin(), unique.begin() + static_cast<std::ptrdiff_t>(n_train));
    split.validation.assign(unique.begin() + static_cast<std::ptrdiff_t>(n_train),
                            unique.begin() + static_cast<std::ptrdiff_t>(n_train + n_val));
    split.test.assign(unique.begin() + static_cast<std::ptrdiff_t>(n_train + n_val), unique.end());
    return split;
}

} // namespace peernet::data
