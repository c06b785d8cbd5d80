#pragma once

#include <array>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <Eigen/Dense>

namespace qexpr {

using cplx = std::complex<double>;

enum class GateKind : std::uint8_t {
    RX,
    RY,
    RZ,
    H,
    I,
    X,
    SX,
    CX,
    CRX,
    CRY,
    CRZ,
    SWAP,
    MEASURE,
};

inline constexpr std::size_t kNumGateKinds = 13;
inline constexpr int kMaxQubits = 10;

constexpr std::size_t arity(GateKind kind) noexcept {
    switch (kind) {
    case GateKind::CX:
    case GateKind::CRX:
    case GateKind::CRY:
    case GateKind::CRZ:
    case GateKind::SWAP:
        return 2;
    default:
        return 1;
    }
}

constexpr bool is_parameterized(GateKind kind) noexcept {
    switch (kind) {
    case GateKind::RX:
    case GateKind::RY:
    case GateKind::RZ:
    case GateKind::CRX:
    case GateKind::CRY:
    case GateKind::CRZ:
        return true;
    default:
        return false;
    }
}

/// Native hardware set: RZ, X, SX, CX (MEASURE is allowed alongside).
constexpr bool is_native(GateKind kind) noexcept {
    return kind == GateKind::RZ || kind == GateKind::X ||
           kind == GateKind::SX || kind == GateKind::CX ||
           kind == GateKind::MEASURE;
}

/// Upper-case canonical name ("RX", "CX", ...).
std::string_view gate_name(GateKind kind) noexcept;

/// Case-insensitive lookup of a canonical name.
std::optional<GateKind> gate_from_name(std::string_view name) noexcept;

/// Reference to entry `index` of a circuit's parameter vector.
struct Symbol {
    std::size_t index = 0;
    bool operator==(const Symbol &) const = default;
};

/// none | symbolic | bound value in radians.
using Param = std::variant<std::monostate, Symbol, double>;

struct Gate {
    GateKind kind = GateKind::I;
    /// Control first for controlled gates; only the first arity(kind)
    /// entries are meaningful.
    std::array<int, 2> q{0, 0};
    Param param{};

    static Gate one(GateKind kind, int qubit, Param p = {});
    static Gate two(GateKind kind, int a, int b, Param p = {});

    [[nodiscard]] std::span<const int> qubits() const noexcept {
        return {q.data(), arity(kind)};
    }
    [[nodiscard]] bool has_param() const noexcept {
        return !std::holds_alternative<std::monostate>(param);
    }
    [[nodiscard]] bool is_symbolic() const noexcept {
        return std::holds_alternative<Symbol>(param);
    }
    /// Bound angle; throws if the parameter is absent or symbolic.
    [[nodiscard]] double angle() const;

    bool operator==(const Gate &other) const;
};

/// Ordered gate list over `n_qubits` with dense integer parameter symbols.
class Circuit {
  public:
    Circuit() = default;
    explicit Circuit(int n_qubits);

    [[nodiscard]] int n_qubits() const noexcept { return n_qubits_; }
    [[nodiscard]] std::size_t n_params() const noexcept { return n_params_; }
    [[nodiscard]] const std::vector<Gate> &gates() const noexcept {
        return gates_;
    }
    [[nodiscard]] std::size_t size() const noexcept { return gates_.size(); }
    [[nodiscard]] bool empty() const noexcept { return gates_.empty(); }

    /// Appends after checking qubit range, distinctness and param presence.
    Circuit &add(const Gate &gate);
    Circuit &add(GateKind kind, std::initializer_list<int> qubits,
                 Param p = {});

    /// Allocates a fresh symbol index.
    Symbol new_symbol() noexcept { return Symbol{n_params_++}; }
    void set_n_params(std::size_t n) noexcept { n_params_ = n; }

    void reserve(std::size_t n) { gates_.reserve(n); }
    void clear_gates() noexcept { gates_.clear(); }

    /// Checks every structural invariant, throwing Validation errors.
    void validate() const;

    [[nodiscard]] bool is_bound() const noexcept;
    [[nodiscard]] bool has_measure() const noexcept;

    /// Logical-to-physical placement after routing: output qubit `i` of the
    /// original circuit ends on wire final_layout[i]. Empty means identity.
    std::vector<int> final_layout;

    bool operator==(const Circuit &other) const;

  private:
    int n_qubits_ = 1;
    std::size_t n_params_ = 0;
    std::vector<Gate> gates_;
};

/// Substitutes every symbol(i) with values[i].
Circuit bind(const Circuit &circuit, std::span<const double> values);

/// Reversed order, negated rotation angles. Rejects SX, MEASURE and unbound
/// parameters.
Circuit inverse(const Circuit &circuit);

/// Gates of `second` appended after those of `first`; both must have the
/// same width. Parameter counts are not merged, so bind before composing.
Circuit compose(const Circuit &first, const Circuit &second);

/// Appends a MEASURE on every qubit.
Circuit with_measurements(const Circuit &circuit);

using Mat2 = Eigen::Matrix2cd;
using Mat4 = Eigen::Matrix4cd;

/// 2x2 matrix of a bound single-qubit gate.
Mat2 single_qubit_matrix(const Gate &gate);

/// 4x4 matrix of a bound two-qubit gate on the local basis where bit k of
/// the row index is the state of gate.qubits()[k].
Mat4 two_qubit_matrix(const Gate &gate);

/// Dense unitary, little-endian (qubit 0 is the least significant bit).
/// Only for n <= 6.
Eigen::MatrixXcd unitary(const Circuit &circuit);

inline constexpr int kMaxUnitaryQubits = 6;

enum class Format { Json, Qasm };

Circuit parse_circuit(std::string_view text, Format format);
std::string serialize_circuit(const Circuit &circuit, Format format);

/// Reads a circuit file, choosing the format from the extension (.qasm or
/// anything else as JSON).
Circuit load_circuit_file(const std::string &path);

} // namespace qexpr
