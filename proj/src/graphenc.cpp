#include "qexpr/graphenc.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <deque>
#include <fstream>
#include <numbers>
#include <sstream>

#include "qexpr/error.hpp"
#include "qexpr/rng.hpp"
#include "qexpr/transpile.hpp"

namespace qexpr {

using nlohmann::json;

std::vector<std::string> node_feature_names() {
    std::vector<std::string> names = {"is_input", "is_measure", "is_rz",
                                      "is_x",     "is_sx",      "is_cx"};
    for (int q = 0; q < kQubitSlots; ++q) {
        names.push_back("on_q" + std::to_string(q));
    }
    for (const char *c : {"t1", "t2", "frequency", "readout_err", "gate_err",
                          "gate_duration", "reserved"}) {
        names.emplace_back(c);
    }
    return names;
}

namespace {

NodeType node_type(GateKind kind) {
    switch (kind) {
    case GateKind::RZ:
        return NodeType::RZ;
    case GateKind::X:
        return NodeType::X;
    case GateKind::SX:
        return NodeType::SX;
    case GateKind::CX:
        return NodeType::CX;
    default:
        throw Error(ErrorKind::Encoding, std::string("non-native gate ") +
                                             std::string(gate_name(kind)) +
                                             " cannot be encoded");
    }
}

double finite_or_zero(double x) { return std::isfinite(x) ? x : 0.0; }

/// Calibration block for a node on `qubits`; gate error/duration are the
/// gate's own values (zero for INPUT, MEASURE and virtual RZ).
void fill_calibration(Eigen::MatrixXd &m, int row, const BackendModel &b,
                      std::span<const int> qubits, double gate_err,
                      double duration_ns) {
    if (b.noiseless || !b.has_calibration()) {
        return;
    }
    double t1 = 0.0, t2 = 0.0, freq = 0.0, ro = 0.0;
    for (int q : qubits) {
        const auto &c = b.qubit(q);
        t1 += finite_or_zero(c.t1_us) / 100.0;
        t2 += finite_or_zero(c.t2_us) / 100.0;
        freq += c.frequency_ghz / 10.0;
        ro += 0.5 * (c.readout_p01 + c.readout_p10);
    }
    const double k = static_cast<double>(qubits.size());
    const int base = kNodeTypes + kQubitSlots;
    m(row, base + 0) = t1 / k;
    m(row, base + 1) = t2 / k;
    m(row, base + 2) = freq / k;
    m(row, base + 3) = ro / k;
    m(row, base + 4) = gate_err;
    m(row, base + 5) = duration_ns / 1000.0;
    m(row, base + 6) = 0.0;
}

} // namespace

int circuit_depth(const Circuit &circuit) {
    std::vector<int> level(static_cast<std::size_t>(circuit.n_qubits()), 0);
    int depth = 0;
    for (const auto &g : circuit.gates()) {
        if (g.kind == GateKind::MEASURE) {
            continue;
        }
        int l = 0;
        for (int q : g.qubits()) {
            l = std::max(l, level[q]);
        }
        ++l;
        for (int q : g.qubits()) {
            level[q] = l;
        }
        depth = std::max(depth, l);
    }
    return depth;
}

CircuitGraph to_graph(const Circuit &native, const BackendModel &backend,
                      std::size_t n_param_gates) {
    const int n = native.n_qubits();
    if (n > kQubitSlots) {
        throw Error(ErrorKind::Encoding, "at most 10 qubits can be encoded");
    }
    std::vector<const Gate *> ops;
    for (const auto &g : native.gates()) {
        if (g.kind != GateKind::MEASURE) {
            node_type(g.kind); // rejects non-native kinds
            ops.push_back(&g);
        }
    }
    const int v = 2 * n + static_cast<int>(ops.size());
    CircuitGraph graph;
    graph.n_qubits = n;
    graph.backend = backend.id;
    graph.nodes = Eigen::MatrixXd::Zero(v, kNodeDim);
    graph.global = Eigen::RowVectorXd::Zero(kGlobalDim);

    std::vector<int> last(static_cast<std::size_t>(n));
    for (int q = 0; q < n; ++q) {
        graph.nodes(q, static_cast<int>(NodeType::Input)) = 1.0;
        graph.nodes(q, kNodeTypes + q) = 1.0;
        const int qs[1] = {q};
        fill_calibration(graph.nodes, q, backend, qs, 0.0, 0.0);
        last[q] = q;
    }
    std::array<int, 4> counts{}; // RZ, SX, X, CX
    for (std::size_t k = 0; k < ops.size(); ++k) {
        const Gate &g = *ops[k];
        const int node = n + static_cast<int>(k);
        const NodeType t = node_type(g.kind);
        graph.nodes(node, static_cast<int>(t)) = 1.0;
        double err = 0.0, dur = 0.0;
        switch (g.kind) {
        case GateKind::RZ:
            ++counts[0];
            break;
        case GateKind::SX:
            ++counts[1];
            err = backend.sx_error;
            dur = backend.sx_duration_ns;
            break;
        case GateKind::X:
            ++counts[2];
            err = backend.x_error;
            dur = backend.x_duration_ns;
            break;
        case GateKind::CX:
            ++counts[3];
            if (!backend.noiseless && backend.has_calibration()) {
                const auto &e = backend.edge(g.q[0], g.q[1]);
                err = e.cx_error;
                dur = e.cx_duration_ns;
            }
            break;
        default:
            break;
        }
        for (int q : g.qubits()) {
            graph.nodes(node, kNodeTypes + q) = 1.0;
            graph.edges.push_back({last[q], node});
            last[q] = node;
        }
        fill_calibration(graph.nodes, node, backend, g.qubits(), err, dur);
    }
    for (int q = 0; q < n; ++q) {
        const int node = n + static_cast<int>(ops.size()) + q;
        graph.nodes(node, static_cast<int>(NodeType::Measure)) = 1.0;
        graph.nodes(node, kNodeTypes + q) = 1.0;
        const int qs[1] = {q};
        fill_calibration(graph.nodes, node, backend, qs, 0.0, 0.0);
        graph.edges.push_back({last[q], node});
    }
    graph.global << circuit_depth(native), static_cast<double>(n_param_gates), n,
        counts[0], counts[1], counts[2], counts[3];
    return graph;
}

CircuitGraph encode_circuit(const Circuit &abstract, const BackendModel &backend,
                            std::uint64_t seed) {
    Rng rng(seed);
    std::vector<double> values(abstract.n_params());
    for (auto &x : values) {
        x = 2.0 * std::numbers::pi * rng.uniform();
    }
    std::size_t n_param_gates = 0;
    for (const auto &g : abstract.gates()) {
        n_param_gates += is_parameterized(g.kind) ? 1 : 0;
    }
    const Circuit native = transpile(qexpr::bind(abstract, values), backend);
    return to_graph(native, backend, n_param_gates);
}

void CircuitGraph::validate() const {
    const int v = n_nodes();
    if (nodes.cols() != kNodeDim) {
        throw Error(ErrorKind::Validation, "node features must have 23 columns");
    }
    if (global.size() != kGlobalDim) {
        throw Error(ErrorKind::Validation, "global features must have 7 entries");
    }
    if (n_qubits < 1 || n_qubits > kQubitSlots || v < 2 * n_qubits) {
        throw Error(ErrorKind::Validation, "inconsistent node count");
    }
    std::vector<int> indeg(static_cast<std::size_t>(v), 0);
    std::vector<std::vector<int>> out(static_cast<std::size_t>(v));
    for (const auto &[s, t] : edges) {
        if (s < 0 || t < 0 || s >= v || t >= v || s == t) {
            throw Error(ErrorKind::Validation, "edge references invalid node");
        }
        ++indeg[t];
        out[s].push_back(t);
    }
    int inputs = 0, outputs = 0;
    for (int i = 0; i < v; ++i) {
        int type = -1, ones = 0;
        for (int c = 0; c < kNodeTypes; ++c) {
            if (nodes(i, c) == 1.0) {
                type = c;
                ++ones;
            } else if (nodes(i, c) != 0.0) {
                throw Error(ErrorKind::Validation, "node type is not one-hot");
            }
        }
        if (ones != 1) {
            throw Error(ErrorKind::Validation, "node type is not one-hot");
        }
        int arity = 0;
        for (int c = kNodeTypes; c < kNodeTypes + kQubitSlots; ++c) {
            if (nodes(i, c) == 1.0) {
                ++arity;
            } else if (nodes(i, c) != 0.0) {
                throw Error(ErrorKind::Validation, "qubit indicator not binary");
            }
        }
        const int expected = type == static_cast<int>(NodeType::CX) ? 2 : 1;
        if (arity != expected) {
            throw Error(ErrorKind::Validation, "qubit indicator popcount != arity");
        }
        if (type == static_cast<int>(NodeType::Input)) {
            ++inputs;
            if (indeg[i] != 0) {
                throw Error(ErrorKind::Validation, "input node with in-edges");
            }
        } else if (indeg[i] != arity) {
            throw Error(ErrorKind::Validation, "in-degree differs from arity");
        }
        if (type == static_cast<int>(NodeType::Measure)) {
            ++outputs;
            if (!out[i].empty()) {
                throw Error(ErrorKind::Validation, "output node with out-edges");
            }
        }
        if (type <= static_cast<int>(NodeType::Measure) &&
            (nodes(i, kNodeTypes + kQubitSlots + 4) != 0.0 ||
             nodes(i, kNodeTypes + kQubitSlots + 5) != 0.0)) {
            throw Error(ErrorKind::Validation, "input/output node with gate calibration");
        }
    }
    if (inputs != n_qubits || outputs != n_qubits) {
        throw Error(ErrorKind::Validation, "need one input and one output per qubit");
    }
    // Kahn: every node must be reachable in topological order.
    std::deque<int> ready;
    auto deg = indeg;
    for (int i = 0; i < v; ++i) {
        if (deg[i] == 0) {
            ready.push_back(i);
        }
    }
    int visited = 0;
    while (!ready.empty()) {
        const int u = ready.front();
        ready.pop_front();
        ++visited;
        for (int w : out[u]) {
            if (--deg[w] == 0) {
                ready.push_back(w);
            }
        }
    }
    if (visited != v) {
        throw Error(ErrorKind::Validation, "graph has a cycle");
    }
    // Each wire is a path from its input to its output.
    for (int i = 0; i < v; ++i) {
        if (nodes(i, static_cast<int>(NodeType::Input)) != 1.0) {
            continue;
        }
        int q = 0;
        while (nodes(i, kNodeTypes + q) != 1.0) {
            ++q;
        }
        int cur = i;
        while (nodes(cur, static_cast<int>(NodeType::Measure)) != 1.0) {
            int next = -1;
            for (int w : out[cur]) {
                if (nodes(w, kNodeTypes + q) == 1.0) {
                    next = w;
                    break;
                }
            }
            if (next < 0) {
                throw Error(ErrorKind::Validation,
                            "wire " + std::to_string(q) + " is broken");
            }
            cur = next;
        }
    }
}

json CircuitGraph::to_json() const {
    json j;
    j["id"] = id;
    j["backend"] = backend;
    j["n_qubits"] = n_qubits;
    json rows = json::array();
    for (Eigen::Index r = 0; r < nodes.rows(); ++r) {
        json row = json::array();
        for (Eigen::Index c = 0; c < nodes.cols(); ++c) {
            row.push_back(nodes(r, c));
        }
        rows.push_back(std::move(row));
    }
    j["nodes"] = std::move(rows);
    j["edges"] = json::array();
    for (const auto &e : edges) {
        j["edges"].push_back({e[0], e[1]});
    }
    j["global"] = std::vector<double>(global.data(), global.data() + global.size());
    j["expr"] = label ? json(*label) : json(nullptr);
    j["meta"] = meta;
    return j;
}

CircuitGraph CircuitGraph::from_json(const json &j) {
    CircuitGraph g;
    try {
        g.id = j.at("id").get<std::string>();
        g.backend = j.value("backend", std::string{});
        g.n_qubits = j.at("n_qubits").get<int>();
        const auto &rows = j.at("nodes");
        g.nodes.resize(static_cast<Eigen::Index>(rows.size()), kNodeDim);
        for (std::size_t r = 0; r < rows.size(); ++r) {
            if (rows[r].size() != static_cast<std::size_t>(kNodeDim)) {
                throw Error(ErrorKind::Validation,
                            "node " + std::to_string(r) + " has " +
                                std::to_string(rows[r].size()) +
                                " features, expected 23");
            }
            for (int c = 0; c < kNodeDim; ++c) {
                g.nodes(static_cast<Eigen::Index>(r), c) = rows[r][c].get<double>();
            }
        }
        for (const auto &e : j.at("edges")) {
            if (e.size() != 2) {
                throw Error(ErrorKind::Validation, "edge must be a pair");
            }
            g.edges.push_back({e[0].get<int>(), e[1].get<int>()});
        }
        const auto glob = j.at("global").get<std::vector<double>>();
        if (glob.size() != static_cast<std::size_t>(kGlobalDim)) {
            throw Error(ErrorKind::Validation, "global vector must have 7 entries");
        }
        g.global = Eigen::Map<const Eigen::RowVectorXd>(glob.data(), kGlobalDim);
        if (j.contains("expr") && !j["expr"].is_null()) {
            g.label = j["expr"].get<double>();
        }
        if (j.contains("meta")) {
            g.meta = j["meta"];
        }
    } catch (const json::exception &e) {
        throw Error(ErrorKind::Validation, std::string("graph record: ") + e.what());
    }
    return g;
}

bool CircuitGraph::operator==(const CircuitGraph &o) const {
    return id == o.id && backend == o.backend && n_qubits == o.n_qubits &&
           nodes.rows() == o.nodes.rows() && nodes == o.nodes &&
           edges == o.edges && global.size() == o.global.size() &&
           global == o.global && label == o.label && meta == o.meta;
}

namespace {

void column_stats(const std::vector<const Eigen::MatrixXd *> &blocks, int dim,
                  Eigen::RowVectorXd &mean, Eigen::RowVectorXd &std_dev) {
    mean = Eigen::RowVectorXd::Zero(dim);
    std_dev = Eigen::RowVectorXd::Zero(dim);
    double count = 0.0;
    for (const auto *b : blocks) {
        mean += b->colwise().sum();
        count += static_cast<double>(b->rows());
    }
    if (count == 0.0) {
        throw Error(ErrorKind::Validation, "cannot normalize an empty dataset");
    }
    mean /= count;
    for (const auto *b : blocks) {
        std_dev += (b->rowwise() - mean).array().square().colwise().sum().matrix();
    }
    std_dev = (std_dev / count).cwiseSqrt();
}

json row_to_json(const Eigen::RowVectorXd &r) {
    return std::vector<double>(r.data(), r.data() + r.size());
}

Eigen::RowVectorXd row_from_json(const json &j, int dim) {
    const auto v = j.get<std::vector<double>>();
    if (v.size() != static_cast<std::size_t>(dim)) {
        throw Error(ErrorKind::Checkpoint, "normalization stats have wrong length");
    }
    return Eigen::Map<const Eigen::RowVectorXd>(v.data(), dim);
}

} // namespace

FeatureStats FeatureStats::fit(const std::vector<CircuitGraph> &train) {
    if (train.empty()) {
        throw Error(ErrorKind::Validation, "cannot normalize an empty dataset");
    }
    std::vector<const Eigen::MatrixXd *> node_blocks;
    Eigen::MatrixXd globals(static_cast<Eigen::Index>(train.size()), kGlobalDim);
    for (std::size_t i = 0; i < train.size(); ++i) {
        node_blocks.push_back(&train[i].nodes);
        globals.row(static_cast<Eigen::Index>(i)) = train[i].global;
    }
    FeatureStats s;
    column_stats(node_blocks, kNodeDim, s.node_mean, s.node_std);
    column_stats({&globals}, kGlobalDim, s.global_mean, s.global_std);
    return s;
}

void FeatureStats::apply(CircuitGraph &graph) const {
    auto scale = [](const Eigen::RowVectorXd &sd) {
        Eigen::RowVectorXd inv(sd.size());
        for (Eigen::Index c = 0; c < sd.size(); ++c) {
            inv(c) = sd(c) < 1e-12 ? 1.0 : 1.0 / sd(c);
        }
        return inv;
    };
    graph.nodes = ((graph.nodes.rowwise() - node_mean).array().rowwise() *
                   scale(node_std).array())
                      .matrix();
    graph.global = ((graph.global - global_mean).array() * scale(global_std).array())
                       .matrix();
}

json FeatureStats::to_json() const {
    return {{"node_mean", row_to_json(node_mean)},
            {"node_std", row_to_json(node_std)},
            {"global_mean", row_to_json(global_mean)},
            {"global_std", row_to_json(global_std)}};
}

FeatureStats FeatureStats::from_json(const json &j) {
    FeatureStats s;
    try {
        s.node_mean = row_from_json(j.at("node_mean"), kNodeDim);
        s.node_std = row_from_json(j.at("node_std"), kNodeDim);
        s.global_mean = row_from_json(j.at("global_mean"), kGlobalDim);
        s.global_std = row_from_json(j.at("global_std"), kGlobalDim);
    } catch (const json::exception &e) {
        throw Error(ErrorKind::Checkpoint, std::string("stats: ") + e.what());
    }
    return s;
}

std::pair<FeatureStats, std::vector<CircuitGraph>> normalize_features(
    const std::vector<CircuitGraph> &train,
    const std::vector<CircuitGraph> &records) {
    FeatureStats stats = FeatureStats::fit(train);
    std::vector<CircuitGraph> out;
    out.reserve(records.size());
    for (const auto &r : records) {
        out.push_back(stats.applied(r));
    }
    return {std::move(stats), std::move(out)};
}

json default_dataset_header(json extra) {
    json h = {{"schema", "qexpr-graph"},
              {"version", kGraphSchemaVersion},
              {"node_dim", kNodeDim},
              {"node_features", node_feature_names()},
              {"global_features", std::vector<std::string>(kGlobalNames.begin(),
                                                           kGlobalNames.end())}};
    for (auto it = extra.begin(); it != extra.end(); ++it) {
        h[it.key()] = it.value();
    }
    return h;
}

void write_dataset(const std::string &path, const Dataset &dataset) {
    std::ofstream out(path);
    if (!out) {
        throw Error(ErrorKind::Io, "cannot write " + path);
    }
    json header = dataset.header.is_null() ? default_dataset_header() : dataset.header;
    out << header.dump() << '\n';
    for (const auto &r : dataset.records) {
        out << r.to_json().dump() << '\n';
    }
    if (!out) {
        throw Error(ErrorKind::Io, "write failed for " + path);
    }
}

Dataset read_dataset(const std::string &path) {
    std::ifstream in(path);
    if (!in) {
        throw Error(ErrorKind::Io, "cannot open " + path);
    }
    Dataset ds;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) {
            continue;
        }
        json j;
        try {
            j = json::parse(line);
        } catch (const json::parse_error &e) {
            throw ParseError(e.what(), lineno, e.byte == 0 ? 1 : e.byte);
        }
        if (lineno == 1) {
            if (j.value("schema", std::string{}) != "qexpr-graph" ||
                j.value("version", 0) != kGraphSchemaVersion) {
                throw Error(ErrorKind::Schema,
                            path + ": missing or unsupported dataset header");
            }
            ds.header = std::move(j);
            continue;
        }
        try {
            ds.records.push_back(CircuitGraph::from_json(j));
        } catch (const Error &e) {
            throw Error(e.kind(), path + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    if (ds.header.is_null()) {
        throw Error(ErrorKind::Schema, path + ": empty dataset file");
    }
    return ds;
}

Split split_dataset(const std::vector<CircuitGraph> &records, double train_frac,
                    double val_frac, double test_frac, std::uint64_t seed) {
    if (std::abs(train_frac + val_frac + test_frac - 1.0) > 1e-9 || train_frac < 0 ||
        val_frac < 0 || test_frac < 0) {
        throw Error(ErrorKind::Validation, "split fractions must sum to 1");
    }
    std::vector<std::vector<std::size_t>> strata(kQubitSlots + 1);
    for (std::size_t i = 0; i < records.size(); ++i) {
        const int n = records[i].n_qubits;
        if (n < 1 || n > kQubitSlots) {
            throw Error(ErrorKind::Validation, "record with invalid n_qubits");
        }
        strata[static_cast<std::size_t>(n)].push_back(i);
    }
    Split split;
    const Rng master(seed);
    for (std::size_t n = 1; n < strata.size(); ++n) {
        auto &idx = strata[n];
        if (idx.empty()) {
            continue;
        }
        if (idx.size() < 10) {
            split.warnings.push_back("stratum n_qubits=" + std::to_string(n) + " has only " +
                                     std::to_string(idx.size()) + " records");
        }
        Rng rng = master.derive({n});
        for (std::size_t i = idx.size(); i > 1; --i) {
            std::swap(idx[i - 1], idx[rng.below(i)]);
        }
        const auto m = static_cast<double>(idx.size());
        const auto n_val = static_cast<std::size_t>(std::llround(val_frac * m));
        const auto n_test = static_cast<std::size_t>(std::llround(test_frac * m));
        const std::size_t cut = std::min(idx.size(), n_val + n_test);
        for (std::size_t i = 0; i < idx.size(); ++i) {
            if (i < std::min(n_val, cut)) {
                split.val.push_back(idx[i]);
            } else if (i < cut) {
                split.test.push_back(idx[i]);
            } else {
                split.train.push_back(idx[i]);
            }
        }
    }
    std::sort(split.train.begin(), split.train.end());
    std::sort(split.val.begin(), split.val.end());
    std::sort(split.test.begin(), split.test.end());
    return split;
}

void write_global_csv(const std::string &path, const std::vector<CircuitGraph> &records) {
    std::ofstream out(path);
    if (!out) {
        throw Error(ErrorKind::Io, "cannot write " + path);
    }
    out.precision(17);
    out << "id,n_qubits";
    for (const char *n : kGlobalNames) {
        out << ',' << n;
    }
    out << ",expr\n";
    for (const auto &r : records) {
        out << r.id << ',' << r.n_qubits;
        for (Eigen::Index c = 0; c < r.global.size(); ++c) {
            out << ',' << r.global(c);
        }
        out << ',';
        if (r.label) {
            out << *r.label;
        }
        out << '\n';
    }
}

} // namespace qexpr
