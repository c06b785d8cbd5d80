#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "qexpr/backend.hpp"
#include "qexpr/circuit.hpp"
#include "qexpr/rng.hpp"

namespace qexpr {

/// 2^n amplitudes, little-endian, initialised to |0...0>.
class Statevector {
  public:
    explicit Statevector(int n_qubits);

    [[nodiscard]] int n_qubits() const noexcept { return n_qubits_; }
    [[nodiscard]] std::span<cplx> amplitudes() noexcept { return amps_; }
    [[nodiscard]] std::span<const cplx> amplitudes() const noexcept {
        return amps_;
    }

    /// Any bound non-measurement gate, abstract or native.
    void apply(const Gate &gate);
    void apply(const Circuit &circuit);

    /// Pauli by index 1 = X, 2 = Y, 3 = Z.
    void apply_pauli(int qubit, int pauli);

    void reset();

    [[nodiscard]] double norm_squared() const noexcept;
    [[nodiscard]] double probability(std::size_t basis) const noexcept {
        return std::norm(amps_[basis]);
    }
    [[nodiscard]] std::vector<double> probabilities() const;

  private:
    int n_qubits_;
    std::vector<cplx> amps_;
};

/// Functional form of Statevector::apply.
Statevector apply_gate(Statevector state, const Gate &gate);

/// |<0...0| U |0...0>|^2 of a bound, measurement-free (or trailing-measure)
/// circuit.
double exact_zero_prob(const Circuit &circuit);

using Counts = std::map<std::string, std::uint64_t>;

/// Bitstring with qubit 0 as the rightmost character.
std::string bitstring(std::uint64_t basis, int n_qubits);

/// Shot sampling. Noiseless backends draw from exact probabilities; noisy
/// backends run one stochastic Pauli trajectory per shot. The circuit must
/// end with a MEASURE on every qubit; noisy mode needs native gates.
Counts sample_counts(const Circuit &circuit, std::uint64_t shots,
                     const BackendModel &backend, Rng &rng);

/// Number of shots reading all zeros; same sampling model as sample_counts
/// but without the measurement requirement (every qubit is read out).
std::uint64_t sample_zero_count(const Circuit &circuit, std::uint64_t shots,
                                const BackendModel &backend, Rng &rng);

/// Pauli-twirled thermal relaxation over `duration_ns`:
/// {p_x, p_y, p_z}.
struct PauliProbs {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;
};
PauliProbs thermal_pauli(double duration_ns, double t1_us, double t2_us);

} // namespace qexpr
