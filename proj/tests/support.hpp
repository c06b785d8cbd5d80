#pragma once

#include <cmath>
#include <complex>
#include <numbers>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "qexpr/circuit.hpp"
#include "qexpr/graphenc.hpp"

namespace qexpr::test {

using cplx = std::complex<double>;
inline constexpr double kPi = std::numbers::pi;

// Gate matrices written out independently of the library.
inline Eigen::Matrix2cd oracle_1q(GateKind kind, double t) {
    const cplx i(0.0, 1.0);
    const double c = std::cos(t / 2), s = std::sin(t / 2);
    Eigen::Matrix2cd m;
    switch (kind) {
    case GateKind::RX:
        m << c, -i * s, -i * s, c;
        break;
    case GateKind::RY:
        m << c, -s, s, c;
        break;
    case GateKind::RZ:
        m << std::exp(-i * t / 2.0), 0, 0, std::exp(i * t / 2.0);
        break;
    case GateKind::H:
        m << 1, 1, 1, -1;
        m /= std::sqrt(2.0);
        break;
    case GateKind::X:
        m << 0, 1, 1, 0;
        break;
    case GateKind::SX:
        m << cplx(0.5, 0.5), cplx(0.5, -0.5), cplx(0.5, -0.5), cplx(0.5, 0.5);
        break;
    default:
        m.setIdentity();
    }
    return m;
}

inline int bit(std::size_t x, int q) { return static_cast<int>((x >> q) & 1U); }

/// Full 2^n matrix of one gate, built entry by entry.
inline Eigen::MatrixXcd oracle_gate(const Gate &g, int n) {
    const std::size_t dim = std::size_t{1} << n;
    Eigen::MatrixXcd m = Eigen::MatrixXcd::Zero(static_cast<Eigen::Index>(dim),
                                                static_cast<Eigen::Index>(dim));
    const double t = g.has_param() ? std::get<double>(g.param) : 0.0;
    for (std::size_t r = 0; r < dim; ++r) {
        for (std::size_t c = 0; c < dim; ++c) {
            cplx v = 0.0;
            if (arity(g.kind) == 1) {
                const int q = g.q[0];
                if (((r ^ c) & ~(std::size_t{1} << q)) == 0) {
                    v = oracle_1q(g.kind, t)(bit(r, q), bit(c, q));
                }
            } else if (g.kind == GateKind::SWAP) {
                const int a = g.q[0], b = g.q[1];
                std::size_t sw = c & ~((std::size_t{1} << a) | (std::size_t{1} << b));
                sw |= static_cast<std::size_t>(bit(c, a)) << b;
                sw |= static_cast<std::size_t>(bit(c, b)) << a;
                v = r == sw ? 1.0 : 0.0;
            } else {
                const int ctl = g.q[0], tgt = g.q[1];
                if (((r ^ c) & ~(std::size_t{1} << tgt)) == 0) {
                    if (bit(c, ctl) == 0) {
                        v = r == c ? 1.0 : 0.0;
                    } else {
                        const GateKind base = g.kind == GateKind::CX    ? GateKind::X
                                              : g.kind == GateKind::CRX ? GateKind::RX
                                              : g.kind == GateKind::CRY ? GateKind::RY
                                                                        : GateKind::RZ;
                        v = oracle_1q(base, t)(bit(r, tgt), bit(c, tgt));
                    }
                }
            }
            m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = v;
        }
    }
    return m;
}

inline Eigen::MatrixXcd oracle_unitary(const Circuit &c) {
    const auto dim = static_cast<Eigen::Index>(std::size_t{1} << c.n_qubits());
    Eigen::MatrixXcd u = Eigen::MatrixXcd::Identity(dim, dim);
    for (const auto &g : c.gates()) {
        if (g.kind != GateKind::MEASURE) {
            u = oracle_gate(g, c.n_qubits()) * u;
        }
    }
    return u;
}

/// Max elementwise |a - e^{i phi} b| with phi fitted on the largest entry.
inline double phase_distance(const Eigen::MatrixXcd &a, const Eigen::MatrixXcd &b) {
    Eigen::Index r = 0, c = 0;
    b.cwiseAbs().maxCoeff(&r, &c);
    const cplx ph = a(r, c) / b(r, c);
    const cplx unit = ph / std::abs(ph);
    return (a - unit * b).cwiseAbs().maxCoeff();
}

/// Permutation taking logical basis states to physical ones, where logical
/// qubit l sits on physical qubit layout[l].
inline Eigen::MatrixXcd layout_permutation(const std::vector<int> &layout, int n) {
    const std::size_t dim = std::size_t{1} << n;
    Eigen::MatrixXcd p = Eigen::MatrixXcd::Zero(static_cast<Eigen::Index>(dim),
                                                static_cast<Eigen::Index>(dim));
    for (std::size_t j = 0; j < dim; ++j) {
        std::size_t i = 0;
        for (int l = 0; l < n; ++l) {
            const int phys = layout.empty() ? l : layout[static_cast<std::size_t>(l)];
            i |= static_cast<std::size_t>(bit(j, l)) << phys;
        }
        p(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = 1.0;
    }
    return p;
}

inline constexpr GateKind kAbstractKinds[] = {
    GateKind::RX, GateKind::RY,  GateKind::RZ,  GateKind::H,   GateKind::I,    GateKind::X,
    GateKind::SX, GateKind::CX,  GateKind::CRX, GateKind::CRY, GateKind::CRZ, GateKind::SWAP};

/// Random bound circuit over the abstract set (SX optional).
inline Circuit random_bound_circuit(std::mt19937_64 &rng, int n, int n_gates,
                                    bool allow_sx = true) {
    Circuit c(n);
    std::uniform_real_distribution<double> angle(-2 * kPi, 2 * kPi);
    while (static_cast<int>(c.size()) < n_gates) {
        const GateKind k = kAbstractKinds[rng() % std::size(kAbstractKinds)];
        if ((k == GateKind::SX && !allow_sx) || (arity(k) == 2 && n < 2)) {
            continue;
        }
        const Param p = is_parameterized(k) ? Param{angle(rng)} : Param{};
        if (arity(k) == 1) {
            c.add(Gate::one(k, static_cast<int>(rng() % n), p));
        } else {
            const int a = static_cast<int>(rng() % n);
            int b = static_cast<int>(rng() % (n - 1));
            b += b >= a ? 1 : 0;
            c.add(Gate::two(k, a, b, p));
        }
    }
    return c;
}

/// Haar-random pure state: normalized complex Gaussian vector.
inline Eigen::VectorXcd haar_state(std::mt19937_64 &rng, int n) {
    std::normal_distribution<double> g;
    Eigen::VectorXcd v(Eigen::Index{1} << n);
    for (auto &a : v) {
        a = cplx(g(rng), g(rng));
    }
    return v / v.norm();
}

/// Random graph with the record layout (not a valid circuit graph).
inline CircuitGraph random_graph(std::mt19937_64 &rng, int n_nodes, int n_edges,
                                 int node_dim = kNodeDim, int global_dim = kGlobalDim) {
    std::normal_distribution<double> g;
    CircuitGraph out;
    out.id = "g";
    out.n_qubits = 1;
    out.nodes = Eigen::MatrixXd(n_nodes, node_dim);
    for (Eigen::Index i = 0; i < out.nodes.size(); ++i) {
        out.nodes.data()[i] = g(rng);
    }
    out.global = Eigen::RowVectorXd(global_dim);
    for (auto &x : out.global) {
        x = g(rng);
    }
    for (int e = 0; e < n_edges && n_nodes > 1; ++e) {
        const int s = static_cast<int>(rng() % n_nodes);
        int t = static_cast<int>(rng() % (n_nodes - 1));
        t += t >= s ? 1 : 0;
        out.edges.push_back({s, t});
    }
    out.label = g(rng);
    return out;
}

/// Relabels nodes: new index of node i is perm[i].
inline CircuitGraph permute_graph(const CircuitGraph &g, const std::vector<int> &perm) {
    CircuitGraph out = g;
    for (int i = 0; i < g.n_nodes(); ++i) {
        out.nodes.row(perm[static_cast<std::size_t>(i)]) = g.nodes.row(i);
    }
    for (auto &e : out.edges) {
        e = {perm[static_cast<std::size_t>(e[0])], perm[static_cast<std::size_t>(e[1])]};
    }
    return out;
}

} // namespace qexpr::test
