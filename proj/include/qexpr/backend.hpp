#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

namespace qexpr {

/// Undirected device connectivity.
class CouplingMap {
  public:
    CouplingMap() = default;
    CouplingMap(int n_qubits, std::vector<std::pair<int, int>> edges);

    static CouplingMap full(int n_qubits);
    static CouplingMap linear(int n_qubits);
    static CouplingMap ring(int n_qubits);

    [[nodiscard]] int n_qubits() const noexcept { return n_qubits_; }
    /// Normalized (a < b), sorted, unique.
    [[nodiscard]] const std::vector<std::pair<int, int>> &edges() const noexcept {
        return edges_;
    }
    [[nodiscard]] bool adjacent(int a, int b) const noexcept;
    /// Sorted neighbours of `q`.
    [[nodiscard]] const std::vector<int> &neighbors(int q) const {
        return adj_.at(static_cast<std::size_t>(q));
    }

    /// Subgraph on qubits [0, n).
    [[nodiscard]] CouplingMap induced(int n) const;

    /// BFS shortest path from `from` to `to` (inclusive), visiting
    /// neighbours in ascending order. Empty if unreachable.
    [[nodiscard]] std::vector<int> shortest_path(int from, int to) const;

    nlohmann::json to_json() const;
    static CouplingMap from_json(const nlohmann::json &j);

  private:
    int n_qubits_ = 0;
    std::vector<std::pair<int, int>> edges_;
    std::vector<std::vector<int>> adj_;
    std::vector<bool> adj_matrix_;
};

struct QubitCalibration {
    double t1_us = 0.0;
    double t2_us = 0.0;
    double readout_p01 = 0.0; // P(read 1 | prepared 0)
    double readout_p10 = 0.0; // P(read 0 | prepared 1)
    double frequency_ghz = 0.0;
};

struct EdgeCalibration {
    int a = 0;
    int b = 0;
    double cx_error = 0.0;
    double cx_duration_ns = 0.0;
};

/// Device description used for routing, noise and node features. RZ is
/// virtual: zero error, zero duration.
struct BackendModel {
    std::string id = "noiseless";
    int n_qubits = 10;
    bool noiseless = true;
    CouplingMap coupling = CouplingMap::full(10);
    std::vector<QubitCalibration> qubits;
    double sx_error = 0.0;
    double x_error = 0.0;
    double sx_duration_ns = 0.0;
    double x_duration_ns = 0.0;
    std::vector<EdgeCalibration> cx;

    /// Calibration of the CX on edge {a, b}; throws a profile error if the
    /// pair is not calibrated.
    [[nodiscard]] const EdgeCalibration &edge(int a, int b) const;
    [[nodiscard]] const QubitCalibration &qubit(int q) const;
    [[nodiscard]] bool has_calibration() const noexcept;

    /// Checks probabilities, T2 <= 2 T1, non-negative durations, and (for
    /// noisy profiles) completeness.
    void validate() const;

    nlohmann::json to_json() const;
    static BackendModel from_json(const nlohmann::json &j);
    static BackendModel load(const std::string &path);
};

/// Shipped profiles: "noiseless", "synthetic_low", "synthetic_mid",
/// "synthetic_high".
std::vector<std::string> preset_names();
BackendModel preset(const std::string &name);

/// Resolves a preset name or a JSON profile path.
BackendModel resolve_backend(const std::string &name_or_path);

/// Copy of `backend` with every error rate and readout flip zeroed and
/// infinite T1/T2, but still routed and simulated as a noisy device.
BackendModel zero_noise(const BackendModel &backend);

} // namespace qexpr
