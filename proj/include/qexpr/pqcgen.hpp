#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "qexpr/circuit.hpp"

namespace qexpr {

struct GenConfig {
    int n_qubits = 1;
    int reps = 1;
    std::uint64_t seed = 0;
    double p_second_single_layer = 0.5;
    double p_trailing_layers = 0.5;
    /// 0 selects n_qubits.
    int max_entanglers_per_layer = 0;

    void validate() const;
    nlohmann::json to_json() const;
};

/// Random layered PQC: per repetition a single-qubit layer over
/// {RX, RY, RZ, H, I}, an optional second one, an entangling layer over
/// {CX, CRX, CRY, CRZ, SWAP} on random ordered pairs, and optionally one or
/// two trailing single-qubit layers. Each rotation gets a fresh symbol.
Circuit random_pqc(const GenConfig &cfg);

enum class Entanglement { Full, Linear, Circular, Sca };

std::string to_string(Entanglement e);
Entanglement entanglement_from(const std::string &name);

/// CX pairs of entangling block `block` (0-based) for the given pattern.
std::vector<std::pair<int, int>> entangler_map(int n_qubits, Entanglement e,
                                               int block);

/// RY layer followed by `reps` blocks of [CX layer, RY layer].
Circuit real_amplitudes(int n_qubits, int reps, Entanglement e);

/// Named circuits: JSON/QASM files in `dir`, plus the built-in aliases
/// idle_<n>q and ra_<n>q_l<reps>_<pattern>.
class CircuitLibrary {
  public:
    explicit CircuitLibrary(std::filesystem::path dir = {});

    [[nodiscard]] Circuit get(const std::string &name) const;
    [[nodiscard]] std::vector<std::string> file_names() const;

  private:
    std::filesystem::path dir_;
};

/// Looks `name` up in the directory named by QEXPR_LIBRARY (if set) and
/// the built-in aliases.
Circuit circuit_library(const std::string &name);

} // namespace qexpr
