#include <gtest/gtest.h>

#include "qexpr/backend.hpp"
#include "qexpr/error.hpp"
#include "qexpr/sim.hpp"
#include "qexpr/transpile.hpp"
#include "support.hpp"

using namespace qexpr;
using qexpr::test::kPi;

namespace {

Circuit lowered(const Gate &g, int n) {
    Circuit c(n);
    for (const auto &x : decompose_gate(g)) {
        c.add(x);
    }
    return c;
}

Circuit single(const Gate &g, int n) {
    Circuit c(n);
    c.add(g);
    return c;
}

bool all_native(const Circuit &c) {
    for (const auto &g : c.gates()) {
        if (!is_native(g.kind)) {
            return false;
        }
    }
    return true;
}

BackendModel linear_backend(int n) {
    BackendModel b;
    b.id = "linear";
    b.n_qubits = n;
    b.coupling = CouplingMap::linear(n);
    return b;
}

} // namespace

TEST(Decompose, SwapIsThreeCx) {
    const Gate swap = Gate::two(GateKind::SWAP, 0, 1);
    const Circuit c = lowered(swap, 2);
    ASSERT_EQ(c.size(), 3u);
    for (const auto &g : c.gates()) {
        EXPECT_EQ(g.kind, GateKind::CX);
    }
    EXPECT_LT(test::phase_distance(test::oracle_unitary(c),
                                   test::oracle_unitary(single(swap, 2))),
              1e-12);
}

TEST(Decompose, NativeRzUnchanged) {
    const auto out = decompose_gate(Gate::one(GateKind::RZ, 0, 0.7));
    ASSERT_EQ(out.size(), 1u);
    EXPECT_EQ(out[0], Gate::one(GateKind::RZ, 0, 0.7));
}

TEST(Decompose, HadamardMatchesUpToPhase) {
    const Gate h = Gate::one(GateKind::H, 0);
    const Circuit c = lowered(h, 1);
    EXPECT_TRUE(all_native(c));
    EXPECT_LT(test::phase_distance(test::oracle_unitary(c), test::oracle_unitary(single(h, 1))),
              1e-10);
}

TEST(Decompose, EveryKindAtGenericAndDegenerateAngles) {
    const double angles[] = {0.0,     kPi,      -kPi,     kPi / 2, -kPi / 2, 2 * kPi,
                             0.3,     -2.1,     1e-13,    kPi - 1e-13, 3 * kPi / 2, 5.9};
    for (GateKind k : test::kAbstractKinds) {
        for (double a : angles) {
            const Param p = is_parameterized(k) ? Param{a} : Param{};
            const Gate g = arity(k) == 1 ? Gate::one(k, 1, p) : Gate::two(k, 1, 0, p);
            const Circuit c = lowered(g, 2);
            EXPECT_TRUE(all_native(c)) << gate_name(k);
            EXPECT_LT(test::phase_distance(test::oracle_unitary(c),
                                           test::oracle_unitary(single(g, 2))),
                      1e-10)
                << gate_name(k) << " angle " << a;
            if (!is_parameterized(k)) {
                break;
            }
        }
    }
}

TEST(Decompose, ArbitrarySingleQubitUnitaries) {
    std::mt19937_64 rng(21);
    std::normal_distribution<double> g;
    for (int trial = 0; trial < 500; ++trial) {
        Eigen::Matrix2cd z;
        for (int i = 0; i < 4; ++i) {
            z(i / 2, i % 2) = cplx(g(rng), g(rng));
        }
        const Eigen::Matrix2cd u = Eigen::HouseholderQR<Eigen::Matrix2cd>(z).householderQ();
        std::vector<Gate> seq;
        decompose_unitary_1q(u, 0, seq);
        Circuit c(1);
        for (const auto &x : seq) {
            EXPECT_TRUE(is_native(x.kind));
            c.add(x);
        }
        EXPECT_LT(test::phase_distance(test::oracle_unitary(c), u), 1e-10);
    }
}

TEST(Decompose, MeasurePassesThrough) {
    const auto out = decompose_gate(Gate::one(GateKind::MEASURE, 0));
    ASSERT_EQ(out.size(), 1u);
    EXPECT_EQ(out[0].kind, GateKind::MEASURE);
}

TEST(Route, InsertsOneSwapOnLinearMap) {
    Circuit c(3);
    c.add(GateKind::CX, {0, 2});
    const Circuit r = route(c, CouplingMap::linear(3));
    int swaps = 0;
    for (const auto &g : r.gates()) {
        if (g.kind == GateKind::SWAP) {
            ++swaps;
        }
        if (arity(g.kind) == 2) {
            EXPECT_EQ(std::abs(g.q[0] - g.q[1]), 1);
        }
    }
    EXPECT_EQ(swaps, 1);
    EXPECT_EQ(r.size(), 2u);
}

TEST(Route, ConformantCircuitUnchanged) {
    Circuit c(3);
    c.add(GateKind::H, {0});
    c.add(GateKind::CX, {0, 1});
    c.add(GateKind::CRZ, {2, 1}, 0.4);
    const Circuit r = route(c, CouplingMap::linear(3));
    EXPECT_EQ(r.gates(), c.gates());
}

TEST(Route, EdgelessMapIsRoutingError) {
    Circuit c(2);
    c.add(GateKind::CX, {0, 1});
    try {
        (void)route(c, CouplingMap(2, {}));
        FAIL() << "expected routing error";
    } catch (const Error &e) {
        EXPECT_EQ(e.kind(), ErrorKind::Routing);
    }
}

TEST(Route, RoutedUnitaryIsLayoutPermutationTimesOriginal) {
    std::mt19937_64 rng(22);
    for (int trial = 0; trial < 100; ++trial) {
        const Circuit c = test::random_bound_circuit(rng, 4, 12);
        const Circuit r = route(c, CouplingMap::linear(4));
        for (const auto &g : r.gates()) {
            if (arity(g.kind) == 2) {
                ASSERT_EQ(std::abs(g.q[0] - g.q[1]), 1);
            }
        }
        const auto p = test::layout_permutation(r.final_layout, 4);
        EXPECT_LT(test::phase_distance(test::oracle_unitary(r), p * test::oracle_unitary(c)),
                  1e-10);
    }
}

TEST(Transpile, HadamardOnNoiselessBackend) {
    const Circuit c = single(Gate::one(GateKind::H, 0), 1);
    const Circuit t = transpile(c, BackendModel{});
    EXPECT_TRUE(all_native(t));
    EXPECT_FALSE(t.empty());
    EXPECT_LT(test::phase_distance(test::oracle_unitary(t), test::oracle_unitary(c)), 1e-10);
}

TEST(Transpile, EmptyStaysEmpty) {
    EXPECT_TRUE(transpile(Circuit(3), BackendModel{}).empty());
}

TEST(Transpile, MergesAndDropsRz) {
    Circuit c(1);
    c.add(GateKind::RZ, {0}, 0.3);
    c.add(GateKind::RZ, {0}, 0.4);
    const Circuit m = merge_rotations(c);
    ASSERT_EQ(m.size(), 1u);
    EXPECT_NEAR(m.gates()[0].angle(), 0.7, 1e-15);
    Circuit z(1);
    z.add(GateKind::RZ, {0}, 0.3);
    z.add(GateKind::RZ, {0}, -0.3);
    EXPECT_TRUE(merge_rotations(z).empty());
    EXPECT_TRUE(transpile(z, BackendModel{}).empty());
}

TEST(Transpile, RandomCircuitsKeepUnitary) {
    std::mt19937_64 rng(23);
    const BackendModel noiseless;
    const BackendModel lin = linear_backend(3);
    for (int trial = 0; trial < 200; ++trial) {
        const int n = 1 + trial % 3;
        const Circuit c = test::random_bound_circuit(rng, n, 10);
        const Circuit t = transpile(c, noiseless);
        EXPECT_TRUE(all_native(t));
        EXPECT_LT(test::phase_distance(test::oracle_unitary(t), test::oracle_unitary(c)), 1e-9);
        const Circuit r = transpile(c, lin);
        EXPECT_TRUE(all_native(r));
        const auto p = test::layout_permutation(r.final_layout, n);
        EXPECT_LT(test::phase_distance(test::oracle_unitary(r), p * test::oracle_unitary(c)),
                  1e-9);
    }
}

TEST(Transpile, RoutingKeepsZeroProbability) {
    std::mt19937_64 rng(24);
    const BackendModel lin = linear_backend(4);
    for (int trial = 0; trial < 50; ++trial) {
        const Circuit a = test::random_bound_circuit(rng, 4, 10, false);
        const Circuit b = test::random_bound_circuit(rng, 4, 10, false);
        const Circuit cu = compose(a, inverse(b));
        EXPECT_NEAR(exact_zero_prob(transpile(cu, lin)), exact_zero_prob(cu), 1e-9);
    }
}

TEST(Transpile, Deterministic) {
    std::mt19937_64 rng(25);
    const BackendModel lin = linear_backend(4);
    for (int trial = 0; trial < 20; ++trial) {
        const Circuit c = test::random_bound_circuit(rng, 4, 15);
        EXPECT_EQ(transpile(c, lin), transpile(c, lin));
    }
}

TEST(Transpile, RequiresBoundCircuit) {
    Circuit c(1);
    c.add(Gate::one(GateKind::RX, 0, c.new_symbol()));
    EXPECT_THROW((void)transpile(c, BackendModel{}), Error);
}
