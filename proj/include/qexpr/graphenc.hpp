#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "qexpr/backend.hpp"
#include "qexpr/circuit.hpp"

namespace qexpr {

inline constexpr int kNodeTypes = 6;
inline constexpr int kQubitSlots = 10;
inline constexpr int kCalibSlots = 7;
inline constexpr int kNodeDim = kNodeTypes + kQubitSlots + kCalibSlots; // 23
inline constexpr int kGlobalDim = 7;
inline constexpr int kGraphSchemaVersion = 1;

enum class NodeType : int { Input = 0, Measure = 1, RZ = 2, X = 3, SX = 4, CX = 5 };

/// Column order of CircuitGraph::global.
inline constexpr std::array<const char *, kGlobalDim> kGlobalNames = {
    "depth", "n_param_gates", "n_qubits", "count_rz",
    "count_sx", "count_x", "count_cx"};

/// Column names for the 23 node features.
std::vector<std::string> node_feature_names();

using Edge = std::array<int, 2>;

struct CircuitGraph {
    std::string id;
    std::string backend;
    int n_qubits = 0;
    Eigen::MatrixXd nodes; // V x 23
    std::vector<Edge> edges;
    Eigen::RowVectorXd global; // 7
    std::optional<double> label;
    nlohmann::json meta = nlohmann::json::object();

    [[nodiscard]] int n_nodes() const noexcept {
        return static_cast<int>(nodes.rows());
    }

    /// DAG, wire paths INPUT -> ... -> MEASURE, in-degree = arity,
    /// one-hot/indicator structure. Throws Validation errors.
    void validate() const;

    nlohmann::json to_json() const;
    static CircuitGraph from_json(const nlohmann::json &j);

    bool operator==(const CircuitGraph &other) const;
};

/// Graph of a transpiled circuit. `n_param_gates` is the number of
/// parameterized gates in the abstract circuit it came from.
CircuitGraph to_graph(const Circuit &native, const BackendModel &backend,
                      std::size_t n_param_gates);

/// Standard depth (longest chain of gates through shared qubits), ignoring
/// MEASURE.
int circuit_depth(const Circuit &circuit);

/// Transpiles `abstract` with a seeded draw of parameter values (the graph
/// structure depends on gate kinds only, except for degenerate angles), and
/// encodes it.
CircuitGraph encode_circuit(const Circuit &abstract, const BackendModel &backend,
                            std::uint64_t seed);

/// Per-column z-score statistics (node and global features separately).
struct FeatureStats {
    Eigen::RowVectorXd node_mean;
    Eigen::RowVectorXd node_std;
    Eigen::RowVectorXd global_mean;
    Eigen::RowVectorXd global_std;

    static FeatureStats fit(const std::vector<CircuitGraph> &train);
    /// (x - mean) / std, or (x - mean) where std < 1e-12.
    void apply(CircuitGraph &graph) const;
    [[nodiscard]] CircuitGraph applied(CircuitGraph graph) const {
        apply(graph);
        return graph;
    }

    nlohmann::json to_json() const;
    static FeatureStats from_json(const nlohmann::json &j);
};

/// Fits stats on `train` and returns them with normalized copies of every
/// record in `records`.
std::pair<FeatureStats, std::vector<CircuitGraph>> normalize_features(
    const std::vector<CircuitGraph> &train,
    const std::vector<CircuitGraph> &records);

struct Dataset {
    nlohmann::json header;
    std::vector<CircuitGraph> records;
};

nlohmann::json default_dataset_header(nlohmann::json extra = nlohmann::json::object());

/// JSONL: one schema header line, then one record per line.
void write_dataset(const std::string &path, const Dataset &dataset);
Dataset read_dataset(const std::string &path);

struct Split {
    std::vector<std::size_t> train;
    std::vector<std::size_t> val;
    std::vector<std::size_t> test;
    std::vector<std::string> warnings;
};

/// Stratified by n_qubits: each stratum is shuffled with `seed` and cut into
/// round(val * m) validation, round(test * m) test records and the rest
/// training. Index lists are sorted.
Split split_dataset(const std::vector<CircuitGraph> &records, double train_frac,
                    double val_frac, double test_frac, std::uint64_t seed);

/// Global features plus label, one row per record.
void write_global_csv(const std::string &path,
                      const std::vector<CircuitGraph> &records);

} // namespace qexpr
