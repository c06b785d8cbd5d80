#include "qexpr/circuit.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>

#include "qexpr/error.hpp"
#include "qexpr/kernels.hpp"

namespace qexpr {

namespace {

constexpr std::array<std::string_view, kNumGateKinds> kNames = {
    "RX", "RY", "RZ", "H",   "I",   "X",    "SX",
    "CX", "CRX", "CRY", "CRZ", "SWAP", "MEASURE"};

} // namespace

std::string_view to_string(ErrorKind kind) {
    switch (kind) {
    case ErrorKind::ParameterArity:
        return "parameter_arity";
    case ErrorKind::Unsupported:
        return "unsupported";
    case ErrorKind::Parse:
        return "parse";
    case ErrorKind::Validation:
        return "validation";
    case ErrorKind::SizeGuard:
        return "size_guard";
    case ErrorKind::Routing:
        return "routing";
    case ErrorKind::Profile:
        return "profile";
    case ErrorKind::Domain:
        return "domain";
    case ErrorKind::Lookup:
        return "lookup";
    case ErrorKind::Encoding:
        return "encoding";
    case ErrorKind::Checkpoint:
        return "checkpoint";
    case ErrorKind::Schema:
        return "schema";
    case ErrorKind::Io:
        return "io";
    }
    return "unknown";
}

std::string_view gate_name(GateKind kind) noexcept {
    return kNames[static_cast<std::size_t>(kind)];
}

std::optional<GateKind> gate_from_name(std::string_view name) noexcept {
    for (std::size_t k = 0; k < kNames.size(); ++k) {
        const auto ref = kNames[k];
        if (ref.size() != name.size()) {
            continue;
        }
        bool same = true;
        for (std::size_t i = 0; i < ref.size() && same; ++i) {
            same = std::toupper(static_cast<unsigned char>(name[i])) == ref[i];
        }
        if (same) {
            return static_cast<GateKind>(k);
        }
    }
    return std::nullopt;
}

Gate Gate::one(GateKind kind, int qubit, Param p) {
    Gate g;
    g.kind = kind;
    g.q = {qubit, 0};
    g.param = p;
    return g;
}

Gate Gate::two(GateKind kind, int a, int b, Param p) {
    Gate g;
    g.kind = kind;
    g.q = {a, b};
    g.param = p;
    return g;
}

double Gate::angle() const {
    if (const auto *v = std::get_if<double>(&param)) {
        return *v;
    }
    if (is_symbolic()) {
        throw Error(ErrorKind::ParameterArity,
                    std::string("unbound parameter on ") +
                        std::string(gate_name(kind)));
    }
    throw Error(ErrorKind::Validation, std::string(gate_name(kind)) +
                                           " carries no parameter");
}

bool Gate::operator==(const Gate &other) const {
    if (kind != other.kind || param != other.param) {
        return false;
    }
    const auto a = qubits();
    const auto b = other.qubits();
    return std::equal(a.begin(), a.end(), b.begin(), b.end());
}

Circuit::Circuit(int n_qubits) : n_qubits_(n_qubits) {
    if (n_qubits < 1 || n_qubits > kMaxQubits) {
        throw Error(ErrorKind::Validation,
                    "n_qubits must be in 1.." + std::to_string(kMaxQubits) +
                        ", got " + std::to_string(n_qubits));
    }
}

Circuit &Circuit::add(const Gate &gate) {
    const auto qs = gate.qubits();
    for (std::size_t i = 0; i < qs.size(); ++i) {
        if (qs[i] < 0 || qs[i] >= n_qubits_) {
            throw Error(ErrorKind::Validation,
                        "qubit " + std::to_string(qs[i]) +
                            " out of range for " + std::to_string(n_qubits_) +
                            "-qubit circuit");
        }
    }
    if (qs.size() == 2 && qs[0] == qs[1]) {
        throw Error(ErrorKind::Validation,
                    std::string(gate_name(gate.kind)) +
                        " requires distinct qubits");
    }
    if (is_parameterized(gate.kind) != gate.has_param()) {
        throw Error(ErrorKind::Validation,
                    std::string(gate_name(gate.kind)) +
                        (gate.has_param() ? " takes no parameter"
                                          : " requires a parameter"));
    }
    if (const auto *s = std::get_if<Symbol>(&gate.param)) {
        n_params_ = std::max(n_params_, s->index + 1);
    }
    gates_.push_back(gate);
    return *this;
}

Circuit &Circuit::add(GateKind kind, std::initializer_list<int> qubits,
                      Param p) {
    if (qubits.size() != arity(kind)) {
        throw Error(ErrorKind::Validation,
                    std::string(gate_name(kind)) + " expects " +
                        std::to_string(arity(kind)) + " qubit(s)");
    }
    const auto *it = qubits.begin();
    return add(arity(kind) == 1 ? Gate::one(kind, it[0], p)
                                : Gate::two(kind, it[0], it[1], p));
}

void Circuit::validate() const {
    std::vector<bool> seen(n_params_, false);
    bool measuring = false;
    for (const auto &g : gates_) {
        const auto qs = g.qubits();
        for (int q : qs) {
            if (q < 0 || q >= n_qubits_) {
                throw Error(ErrorKind::Validation, "qubit out of range");
            }
        }
        if (qs.size() == 2 && qs[0] == qs[1]) {
            throw Error(ErrorKind::Validation, "repeated qubit in gate");
        }
        if (is_parameterized(g.kind) != g.has_param()) {
            throw Error(ErrorKind::Validation, "parameter presence mismatch");
        }
        if (const auto *s = std::get_if<Symbol>(&g.param)) {
            if (s->index >= n_params_) {
                throw Error(ErrorKind::Validation, "symbol index out of range");
            }
            seen[s->index] = true;
        }
        if (g.kind == GateKind::MEASURE) {
            measuring = true;
        } else if (measuring) {
            throw Error(ErrorKind::Validation,
                        "MEASURE must be in the trailing layer");
        }
    }
    for (std::size_t i = 0; i < seen.size(); ++i) {
        if (!seen[i]) {
            throw Error(ErrorKind::Validation,
                        "parameter symbol " + std::to_string(i) + " unused");
        }
    }
}

bool Circuit::is_bound() const noexcept {
    return std::none_of(gates_.begin(), gates_.end(),
                        [](const Gate &g) { return g.is_symbolic(); });
}

bool Circuit::has_measure() const noexcept {
    return std::any_of(gates_.begin(), gates_.end(), [](const Gate &g) {
        return g.kind == GateKind::MEASURE;
    });
}

bool Circuit::operator==(const Circuit &other) const {
    return n_qubits_ == other.n_qubits_ && n_params_ == other.n_params_ &&
           gates_ == other.gates_ && final_layout == other.final_layout;
}

Circuit bind(const Circuit &circuit, std::span<const double> values) {
    if (values.size() != circuit.n_params()) {
        throw Error(ErrorKind::ParameterArity,
                    "expected " + std::to_string(circuit.n_params()) +
                        " parameter values, got " +
                        std::to_string(values.size()));
    }
    Circuit out(circuit.n_qubits());
    out.reserve(circuit.size());
    for (Gate g : circuit.gates()) {
        if (const auto *s = std::get_if<Symbol>(&g.param)) {
            g.param = values[s->index];
        }
        out.add(g);
    }
    out.final_layout = circuit.final_layout;
    return out;
}

Circuit inverse(const Circuit &circuit) {
    Circuit out(circuit.n_qubits());
    out.reserve(circuit.size());
    const auto &gates = circuit.gates();
    for (auto it = gates.rbegin(); it != gates.rend(); ++it) {
        Gate g = *it;
        switch (g.kind) {
        case GateKind::SX:
            throw Error(ErrorKind::Unsupported,
                        "SX cannot be inverted before transpilation");
        case GateKind::MEASURE:
            throw Error(ErrorKind::Unsupported, "cannot invert a measurement");
        default:
            break;
        }
        if (is_parameterized(g.kind)) {
            g.param = -g.angle();
        }
        out.add(g);
    }
    return out;
}

Circuit compose(const Circuit &first, const Circuit &second) {
    if (first.n_qubits() != second.n_qubits()) {
        throw Error(ErrorKind::Validation, "compose: width mismatch");
    }
    Circuit out = first;
    out.final_layout.clear();
    out.reserve(first.size() + second.size());
    for (const auto &g : second.gates()) {
        out.add(g);
    }
    return out;
}

Circuit with_measurements(const Circuit &circuit) {
    Circuit out = circuit;
    for (int q = 0; q < circuit.n_qubits(); ++q) {
        out.add(Gate::one(GateKind::MEASURE, q));
    }
    return out;
}

Mat2 single_qubit_matrix(const Gate &gate) {
    using namespace std::complex_literals;
    Mat2 m;
    switch (gate.kind) {
    case GateKind::RX: {
        const double c = std::cos(gate.angle() / 2);
        const double s = std::sin(gate.angle() / 2);
        m << c, -1i * s, -1i * s, c;
        break;
    }
    case GateKind::RY: {
        const double c = std::cos(gate.angle() / 2);
        const double s = std::sin(gate.angle() / 2);
        m << c, -s, s, c;
        break;
    }
    case GateKind::RZ: {
        const double h = gate.angle() / 2;
        m << std::polar(1.0, -h), 0.0, 0.0, std::polar(1.0, h);
        break;
    }
    case GateKind::H: {
        const double r = 1.0 / std::sqrt(2.0);
        m << r, r, r, -r;
        break;
    }
    case GateKind::I:
        m = Mat2::Identity();
        break;
    case GateKind::X:
        m << 0.0, 1.0, 1.0, 0.0;
        break;
    case GateKind::SX:
        m << 0.5 + 0.5i, 0.5 - 0.5i, 0.5 - 0.5i, 0.5 + 0.5i;
        break;
    default:
        throw Error(ErrorKind::Unsupported,
                    std::string(gate_name(gate.kind)) +
                        " has no single-qubit matrix");
    }
    return m;
}

namespace {

Mat4 controlled(const Mat2 &u) {
    Mat4 m = Mat4::Identity();
    // control is local bit 0: indices 1 (t=0) and 3 (t=1)
    m(1, 1) = u(0, 0);
    m(1, 3) = u(0, 1);
    m(3, 1) = u(1, 0);
    m(3, 3) = u(1, 1);
    return m;
}

GateKind target_rotation(GateKind kind) {
    switch (kind) {
    case GateKind::CRX:
        return GateKind::RX;
    case GateKind::CRY:
        return GateKind::RY;
    default:
        return GateKind::RZ;
    }
}

} // namespace

Mat4 two_qubit_matrix(const Gate &gate) {
    switch (gate.kind) {
    case GateKind::CX: {
        Mat2 x;
        x << 0.0, 1.0, 1.0, 0.0;
        return controlled(x);
    }
    case GateKind::CRX:
    case GateKind::CRY:
    case GateKind::CRZ:
        return controlled(single_qubit_matrix(
            Gate::one(target_rotation(gate.kind), 0, gate.param)));
    case GateKind::SWAP: {
        Mat4 m = Mat4::Zero();
        m(0, 0) = m(3, 3) = 1.0;
        m(1, 2) = m(2, 1) = 1.0;
        return m;
    }
    default:
        throw Error(ErrorKind::Unsupported,
                    std::string(gate_name(gate.kind)) +
                        " has no two-qubit matrix");
    }
}

Eigen::MatrixXcd unitary(const Circuit &circuit) {
    if (circuit.n_qubits() > kMaxUnitaryQubits) {
        throw Error(ErrorKind::SizeGuard,
                    "unitary() supports at most " +
                        std::to_string(kMaxUnitaryQubits) + " qubits");
    }
    const Eigen::Index dim = Eigen::Index{1} << circuit.n_qubits();
    Eigen::MatrixXcd u = Eigen::MatrixXcd::Identity(dim, dim);
    for (const auto &g : circuit.gates()) {
        if (g.kind == GateKind::MEASURE) {
            throw Error(ErrorKind::Unsupported,
                        "unitary() of a measured circuit");
        }
        if (arity(g.kind) == 1) {
            const Mat2 m = single_qubit_matrix(g);
            for (Eigen::Index c = 0; c < dim; ++c) {
                kernels::apply_1q({u.col(c).data(), std::size_t(dim)}, g.q[0],
                                  m);
            }
        } else {
            const Mat4 m = two_qubit_matrix(g);
            for (Eigen::Index c = 0; c < dim; ++c) {
                kernels::apply_2q({u.col(c).data(), std::size_t(dim)}, g.q[0],
                                  g.q[1], m);
            }
        }
    }
    return u;
}

} // namespace qexpr
