#include "qexpr/sim.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "qexpr/error.hpp"
#include "qexpr/kernels.hpp"

namespace qexpr {

Statevector::Statevector(int n_qubits)
    : n_qubits_(n_qubits), amps_(std::size_t{1} << n_qubits, cplx{0.0, 0.0}) {
    if (n_qubits < 1 || n_qubits > kMaxQubits) {
        throw Error(ErrorKind::Validation, "statevector size out of range");
    }
    amps_[0] = 1.0;
}

void Statevector::reset() {
    std::fill(amps_.begin(), amps_.end(), cplx{0.0, 0.0});
    amps_[0] = 1.0;
}

void Statevector::apply(const Gate &gate) {
    const auto qs = gate.qubits();
    for (int q : qs) {
        if (q < 0 || q >= n_qubits_) {
            throw Error(ErrorKind::Validation, "gate qubit out of range");
        }
    }
    switch (gate.kind) {
    case GateKind::MEASURE:
        throw Error(ErrorKind::Unsupported,
                    "measurement is handled by the sampler, not apply()");
    case GateKind::I:
        return;
    case GateKind::X:
        kernels::apply_x(amps_, gate.q[0]);
        return;
    case GateKind::RZ: {
        const double h = gate.angle() / 2;
        kernels::apply_diag_1q(amps_, gate.q[0], std::polar(1.0, -h),
                               std::polar(1.0, h));
        return;
    }
    case GateKind::CX:
        kernels::apply_cx(amps_, gate.q[0], gate.q[1]);
        return;
    default:
        break;
    }
    if (qs.size() == 1) {
        kernels::apply_1q(amps_, gate.q[0], single_qubit_matrix(gate));
    } else {
        kernels::apply_2q(amps_, gate.q[0], gate.q[1], two_qubit_matrix(gate));
    }
}

void Statevector::apply(const Circuit &circuit) {
    if (circuit.n_qubits() != n_qubits_) {
        throw Error(ErrorKind::Validation, "circuit/statevector width mismatch");
    }
    for (const auto &g : circuit.gates()) {
        if (g.kind != GateKind::MEASURE) {
            apply(g);
        }
    }
}

void Statevector::apply_pauli(int qubit, int pauli) {
    using namespace std::complex_literals;
    switch (pauli) {
    case 1:
        kernels::apply_x(amps_, qubit);
        break;
    case 2: {
        // Y = i X Z
        kernels::apply_diag_1q(amps_, qubit, 1.0, -1.0);
        kernels::apply_x(amps_, qubit);
        for (auto &a : amps_) {
            a *= 1i;
        }
        break;
    }
    case 3:
        kernels::apply_diag_1q(amps_, qubit, 1.0, -1.0);
        break;
    default:
        break;
    }
}

double Statevector::norm_squared() const noexcept {
    double s = 0.0;
    for (const auto &a : amps_) {
        s += std::norm(a);
    }
    return s;
}

std::vector<double> Statevector::probabilities() const {
    std::vector<double> p(amps_.size());
    std::transform(amps_.begin(), amps_.end(), p.begin(),
                   [](const cplx &a) { return std::norm(a); });
    return p;
}

Statevector apply_gate(Statevector state, const Gate &gate) {
    state.apply(gate);
    return state;
}

double exact_zero_prob(const Circuit &circuit) {
    Statevector sv(circuit.n_qubits());
    sv.apply(circuit);
    return std::min(1.0, sv.probability(0));
}

std::string bitstring(std::uint64_t basis, int n_qubits) {
    std::string s(static_cast<std::size_t>(n_qubits), '0');
    for (int q = 0; q < n_qubits; ++q) {
        if ((basis >> q) & 1U) {
            s[static_cast<std::size_t>(n_qubits - 1 - q)] = '1';
        }
    }
    return s;
}

PauliProbs thermal_pauli(double duration_ns, double t1_us, double t2_us) {
    if (duration_ns <= 0.0) {
        return {};
    }
    const double t_us = duration_ns / 1000.0;
    const double relax = -std::expm1(-t_us / t1_us);
    const double dephase = -std::expm1(-t_us / t2_us);
    PauliProbs p;
    p.x = p.y = relax / 4.0;
    p.z = std::max(0.0, dephase / 2.0 - relax / 4.0);
    return p;
}

namespace {

struct NoisyOp {
    Gate gate;
    double p_dep = 0.0;
    std::array<PauliProbs, 2> thermal{};
};

std::size_t draw_outcome(std::span<const double> cdf, double u) {
    const auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
    if (it == cdf.end()) {
        // rounding left u above the total mass: take the last populated state
        for (std::size_t i = cdf.size(); i-- > 0;) {
            if (i == 0 || cdf[i] > cdf[i - 1]) {
                return i;
            }
        }
        return 0;
    }
    return static_cast<std::size_t>(it - cdf.begin());
}

void cumulative(std::vector<double> &p) {
    double acc = 0.0;
    for (auto &x : p) {
        acc += x;
        x = acc;
    }
}

/// Per-shot sampler shared by sample_counts and sample_zero_count.
class ShotSampler {
  public:
    ShotSampler(const Circuit &circuit, const BackendModel &backend)
        : n_(circuit.n_qubits()), noisy_(!backend.noiseless), state_(n_) {
        if (!circuit.is_bound()) {
            throw Error(ErrorKind::ParameterArity,
                        "sampling needs a bound circuit");
        }
        if (noisy_) {
            build_noise(circuit, backend);
        } else {
            for (const auto &g : circuit.gates()) {
                if (g.kind != GateKind::MEASURE) {
                    ops_.push_back({g, 0.0, {}});
                }
            }
        }
        for (const auto &op : ops_) {
            state_.apply(op.gate);
        }
        ideal_cdf_ = state_.probabilities();
        cumulative(ideal_cdf_);
    }

    std::uint64_t shot(Rng &rng) {
        std::size_t outcome = 0;
        if (noisy_ && draw_events(rng)) {
            state_.reset();
            std::size_t e = 0;
            for (std::size_t i = 0; i < ops_.size(); ++i) {
                state_.apply(ops_[i].gate);
                for (; e < events_.size() && events_[e].op == i; ++e) {
                    state_.apply_pauli(events_[e].qubit, events_[e].pauli);
                }
            }
            scratch_ = state_.probabilities();
            cumulative(scratch_);
            outcome = draw_outcome(scratch_, rng.uniform());
        } else {
            outcome = draw_outcome(ideal_cdf_, rng.uniform());
        }
        if (noisy_) {
            for (int q = 0; q < n_; ++q) {
                const bool bit = (outcome >> q) & 1U;
                const double flip = bit ? readout_[q].second : readout_[q].first;
                if (flip > 0.0 && rng.uniform() < flip) {
                    outcome ^= std::size_t{1} << q;
                }
            }
        }
        return outcome;
    }

  private:
    struct Event {
        std::size_t op;
        int qubit;
        int pauli;
    };

    void build_noise(const Circuit &circuit, const BackendModel &backend) {
        if (!backend.has_calibration()) {
            throw Error(ErrorKind::Profile,
                        "backend " + backend.id + " lacks calibration for noisy sampling");
        }
        for (const auto &g : circuit.gates()) {
            if (g.kind == GateKind::MEASURE) {
                continue;
            }
            if (!is_native(g.kind)) {
                throw Error(ErrorKind::Unsupported,
                            "noisy sampling requires a transpiled circuit, found " +
                                std::string(gate_name(g.kind)));
            }
            NoisyOp op{g, 0.0, {}};
            double duration = 0.0;
            switch (g.kind) {
            case GateKind::SX:
                op.p_dep = backend.sx_error;
                duration = backend.sx_duration_ns;
                break;
            case GateKind::X:
                op.p_dep = backend.x_error;
                duration = backend.x_duration_ns;
                break;
            case GateKind::CX: {
                const auto &e = backend.edge(g.q[0], g.q[1]);
                op.p_dep = e.cx_error;
                duration = e.cx_duration_ns;
                break;
            }
            default:
                break; // RZ is virtual
            }
            const auto qs = g.qubits();
            for (std::size_t k = 0; k < qs.size(); ++k) {
                const auto &cal = backend.qubit(qs[k]);
                op.thermal[k] = thermal_pauli(duration, cal.t1_us, cal.t2_us);
            }
            ops_.push_back(op);
        }
        for (int q = 0; q < n_; ++q) {
            const auto &cal = backend.qubit(q);
            readout_.emplace_back(cal.readout_p01, cal.readout_p10);
        }
    }

    bool draw_events(Rng &rng) {
        events_.clear();
        for (std::size_t i = 0; i < ops_.size(); ++i) {
            const auto &op = ops_[i];
            const auto qs = op.gate.qubits();
            if (op.p_dep > 0.0 && rng.uniform() < op.p_dep) {
                if (qs.size() == 1) {
                    events_.push_back({i, qs[0], 1 + static_cast<int>(rng.below(3))});
                } else {
                    const int k = 1 + static_cast<int>(rng.below(15));
                    if (k % 4) {
                        events_.push_back({i, qs[0], k % 4});
                    }
                    if (k / 4) {
                        events_.push_back({i, qs[1], k / 4});
                    }
                }
            }
            for (std::size_t k = 0; k < qs.size(); ++k) {
                const auto &t = op.thermal[k];
                const double total = t.x + t.y + t.z;
                if (total <= 0.0) {
                    continue;
                }
                const double u = rng.uniform();
                if (u < t.x) {
                    events_.push_back({i, qs[k], 1});
                } else if (u < t.x + t.y) {
                    events_.push_back({i, qs[k], 2});
                } else if (u < total) {
                    events_.push_back({i, qs[k], 3});
                }
            }
        }
        return !events_.empty();
    }

    int n_;
    bool noisy_;
    Statevector state_;
    std::vector<NoisyOp> ops_;
    std::vector<std::pair<double, double>> readout_;
    std::vector<double> ideal_cdf_;
    std::vector<double> scratch_;
    std::vector<Event> events_;
};

void require_full_measurement(const Circuit &circuit) {
    std::vector<int> measured(static_cast<std::size_t>(circuit.n_qubits()), 0);
    for (const auto &g : circuit.gates()) {
        if (g.kind == GateKind::MEASURE) {
            ++measured[g.q[0]];
        }
    }
    for (int m : measured) {
        if (m != 1) {
            throw Error(ErrorKind::Validation,
                        "sample_counts needs exactly one MEASURE per qubit");
        }
    }
}

} // namespace

Counts sample_counts(const Circuit &circuit, std::uint64_t shots,
                     const BackendModel &backend, Rng &rng) {
    if (shots < 1) {
        throw Error(ErrorKind::Validation, "shots must be >= 1");
    }
    circuit.validate();
    require_full_measurement(circuit);
    ShotSampler sampler(circuit, backend);
    std::vector<std::uint64_t> tally(std::size_t{1} << circuit.n_qubits(), 0);
    for (std::uint64_t s = 0; s < shots; ++s) {
        ++tally[sampler.shot(rng)];
    }
    Counts counts;
    for (std::size_t i = 0; i < tally.size(); ++i) {
        if (tally[i] > 0) {
            counts.emplace(bitstring(i, circuit.n_qubits()), tally[i]);
        }
    }
    return counts;
}

std::uint64_t sample_zero_count(const Circuit &circuit, std::uint64_t shots,
                                const BackendModel &backend, Rng &rng) {
    if (shots < 1) {
        throw Error(ErrorKind::Validation, "shots must be >= 1");
    }
    ShotSampler sampler(circuit, backend);
    std::uint64_t zeros = 0;
    for (std::uint64_t s = 0; s < shots; ++s) {
        zeros += sampler.shot(rng) == 0 ? 1 : 0;
    }
    return zeros;
}

} // namespace qexpr
