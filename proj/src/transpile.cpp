#include "qexpr/transpile.hpp"

#include <cmath>
#include <numbers>
#include <numeric>

#include "qexpr/error.hpp"

namespace qexpr {

namespace {

constexpr double kPi = std::numbers::pi;

// (-pi, pi]
double wrap_angle(double a) {
    a = std::remainder(a, 2.0 * kPi);
    return a <= -kPi ? a + 2.0 * kPi : a;
}

void push_rz(double angle, int qubit, std::vector<Gate> &out) {
    if (std::abs(wrap_angle(angle)) > kEulerEps) {
        out.push_back(Gate::one(GateKind::RZ, qubit, angle));
    }
}

Mat2 h_matrix() { return single_qubit_matrix(Gate::one(GateKind::H, 0)); }

Mat2 s_matrix(bool dagger) {
    using namespace std::complex_literals;
    Mat2 m = Mat2::Identity();
    m(1, 1) = dagger ? -1i : 1i;
    return m;
}

void crz_sequence(int control, int target, double lambda,
                  std::vector<Gate> &out) {
    out.push_back(Gate::one(GateKind::RZ, target, lambda / 2));
    out.push_back(Gate::two(GateKind::CX, control, target));
    out.push_back(Gate::one(GateKind::RZ, target, -lambda / 2));
    out.push_back(Gate::two(GateKind::CX, control, target));
}

} // namespace

void decompose_unitary_1q(const Mat2 &u, int qubit, std::vector<Gate> &out) {
    const double c = std::abs(u(0, 0));
    const double s = std::abs(u(1, 0));
    if (s < kEulerEps) {
        push_rz(std::arg(u(1, 1)) - std::arg(u(0, 0)), qubit, out);
        return;
    }
    if (c < kEulerEps) {
        // U ~ RZ(phi - lambda + pi) X
        out.push_back(Gate::one(GateKind::X, qubit));
        push_rz(std::arg(u(1, 0)) - std::arg(-u(0, 1)) + kPi, qubit, out);
        return;
    }
    const double theta = 2.0 * std::atan2(s, c);
    const double phi = std::arg(u(1, 0)) - std::arg(u(0, 0));
    const double lambda = std::arg(-u(0, 1)) - std::arg(u(0, 0));
    if (std::abs(theta - kPi / 2) < kEulerEps) {
        push_rz(lambda - kPi / 2, qubit, out);
        out.push_back(Gate::one(GateKind::SX, qubit));
        push_rz(phi + kPi / 2, qubit, out);
        return;
    }
    push_rz(lambda, qubit, out);
    out.push_back(Gate::one(GateKind::SX, qubit));
    push_rz(theta + kPi, qubit, out);
    out.push_back(Gate::one(GateKind::SX, qubit));
    push_rz(phi + kPi, qubit, out);
}

std::vector<Gate> decompose_gate(const Gate &gate) {
    std::vector<Gate> out;
    switch (gate.kind) {
    case GateKind::RZ:
    case GateKind::X:
    case GateKind::SX:
    case GateKind::CX:
    case GateKind::MEASURE:
        out.push_back(gate);
        break;
    case GateKind::RX:
    case GateKind::RY:
    case GateKind::H:
    case GateKind::I:
        decompose_unitary_1q(single_qubit_matrix(gate), gate.q[0], out);
        break;
    case GateKind::CRZ:
        crz_sequence(gate.q[0], gate.q[1], gate.angle(), out);
        break;
    case GateKind::CRX: {
        // RX = H RZ H
        const Mat2 h = h_matrix();
        decompose_unitary_1q(h, gate.q[1], out);
        crz_sequence(gate.q[0], gate.q[1], gate.angle(), out);
        decompose_unitary_1q(h, gate.q[1], out);
        break;
    }
    case GateKind::CRY: {
        // RY = (S H) RZ (H S^dagger)
        const Mat2 h = h_matrix();
        decompose_unitary_1q(h * s_matrix(true), gate.q[1], out);
        crz_sequence(gate.q[0], gate.q[1], gate.angle(), out);
        decompose_unitary_1q(s_matrix(false) * h, gate.q[1], out);
        break;
    }
    case GateKind::SWAP:
        out.push_back(Gate::two(GateKind::CX, gate.q[0], gate.q[1]));
        out.push_back(Gate::two(GateKind::CX, gate.q[1], gate.q[0]));
        out.push_back(Gate::two(GateKind::CX, gate.q[0], gate.q[1]));
        break;
    default:
        throw Error(ErrorKind::Unsupported,
                    std::string("cannot decompose ") +
                        std::string(gate_name(gate.kind)));
    }
    return out;
}

Circuit route(const Circuit &circuit, const CouplingMap &map,
              const std::vector<int> &initial_layout) {
    const int n = circuit.n_qubits();
    if (map.n_qubits() < n) {
        throw Error(ErrorKind::Routing,
                    "coupling map has " + std::to_string(map.n_qubits()) +
                        " qubits, circuit needs " + std::to_string(n));
    }
    std::vector<int> l2p(static_cast<std::size_t>(n));
    if (initial_layout.empty()) {
        std::iota(l2p.begin(), l2p.end(), 0);
    } else {
        if (static_cast<int>(initial_layout.size()) != n) {
            throw Error(ErrorKind::Routing, "initial layout size mismatch");
        }
        std::vector<bool> used(static_cast<std::size_t>(n), false);
        for (int p : initial_layout) {
            if (p < 0 || p >= n || used[p]) {
                throw Error(ErrorKind::Routing,
                            "initial layout must be a permutation");
            }
            used[p] = true;
        }
        l2p = initial_layout;
    }
    std::vector<int> p2l(static_cast<std::size_t>(n));
    for (int l = 0; l < n; ++l) {
        p2l[l2p[l]] = l;
    }
    const CouplingMap local = map.induced(n);

    Circuit out(n);
    out.reserve(circuit.size());
    for (const Gate &g : circuit.gates()) {
        if (arity(g.kind) == 1) {
            Gate m = g;
            m.q[0] = l2p[g.q[0]];
            out.add(m);
            continue;
        }
        int pa = l2p[g.q[0]];
        const int pb = l2p[g.q[1]];
        if (!local.adjacent(pa, pb)) {
            const auto path = local.shortest_path(pa, pb);
            if (path.empty()) {
                throw Error(ErrorKind::Routing,
                            "no path between physical qubits " +
                                std::to_string(pa) + " and " +
                                std::to_string(pb));
            }
            for (std::size_t i = 0; i + 2 < path.size(); ++i) {
                const int u = path[i];
                const int v = path[i + 1];
                out.add(Gate::two(GateKind::SWAP, u, v));
                std::swap(p2l[u], p2l[v]);
                l2p[p2l[u]] = u;
                l2p[p2l[v]] = v;
            }
            pa = l2p[g.q[0]];
        }
        Gate m = g;
        m.q = {pa, pb};
        out.add(m);
    }
    bool identity = true;
    for (int l = 0; l < n; ++l) {
        identity = identity && l2p[l] == l;
    }
    if (!identity) {
        out.final_layout = l2p;
    }
    return out;
}

Circuit merge_rotations(const Circuit &circuit) {
    std::vector<Gate> gates;
    gates.reserve(circuit.size());
    std::vector<long> last(static_cast<std::size_t>(circuit.n_qubits()), -1);
    for (const Gate &g : circuit.gates()) {
        if (g.kind == GateKind::RZ) {
            const long prev = last[g.q[0]];
            if (prev >= 0 && gates[prev].kind == GateKind::RZ) {
                gates[prev].param = gates[prev].angle() + g.angle();
                continue;
            }
        }
        gates.push_back(g);
        for (int q : g.qubits()) {
            last[q] = static_cast<long>(gates.size()) - 1;
        }
    }
    Circuit out(circuit.n_qubits());
    out.reserve(gates.size());
    for (Gate &g : gates) {
        if (g.kind == GateKind::RZ) {
            const double a = wrap_angle(g.angle());
            if (std::abs(a) <= kEulerEps) {
                continue;
            }
            g.param = a;
        }
        out.add(g);
    }
    out.final_layout = circuit.final_layout;
    return out;
}

Circuit transpile(const Circuit &circuit, const BackendModel &backend) {
    if (!circuit.is_bound()) {
        throw Error(ErrorKind::ParameterArity, "transpile needs a bound circuit");
    }
    const Circuit routed = route(circuit, backend.coupling);
    Circuit lowered(routed.n_qubits());
    lowered.reserve(routed.size() * 4);
    for (const Gate &g : routed.gates()) {
        for (const Gate &n : decompose_gate(g)) {
            lowered.add(n);
        }
    }
    lowered.final_layout = routed.final_layout;
    return merge_rotations(lowered);
}

} // namespace qexpr
