#pragma once

#include <vector>

#include "qexpr/backend.hpp"
#include "qexpr/circuit.hpp"

namespace qexpr {

/// Threshold under which an Euler angle (or its complement) is considered
/// degenerate and a shorter native form is emitted.
inline constexpr double kEulerEps = 1e-12;

/// Native {RZ, SX, X} sequence for an arbitrary single-qubit unitary on
/// `qubit`, equal to `u` up to global phase. Appended to `out`.
void decompose_unitary_1q(const Mat2 &u, int qubit, std::vector<Gate> &out);

/// Lowers one bound gate into {RZ, X, SX, CX}. MEASURE passes through.
std::vector<Gate> decompose_gate(const Gate &gate);

/// Places two-qubit gates on coupled pairs by inserting SWAPs along BFS
/// shortest paths. `initial_layout` is a permutation of the circuit's qubits
/// (empty means identity); routing uses the map restricted to the qubits
/// the layout occupies. The final logical-to-physical mapping is stored in
/// the result's final_layout.
Circuit route(const Circuit &circuit, const CouplingMap &map,
              const std::vector<int> &initial_layout = {});

/// Merges adjacent RZs on a wire and drops RZ(0) (angles are taken modulo
/// 2 pi, i.e. up to global phase).
Circuit merge_rotations(const Circuit &circuit);

/// route -> decompose -> merge_rotations.
Circuit transpile(const Circuit &circuit, const BackendModel &backend);

} // namespace qexpr
