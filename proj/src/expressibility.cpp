#include "qexpr/expressibility.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "qexpr/error.hpp"
#include "qexpr/sim.hpp"
#include "qexpr/transpile.hpp"

namespace qexpr {

namespace {

void check_bins(int n_qubits, int n_bins) {
    if (n_qubits < 1 || n_qubits > kMaxQubits) {
        throw Error(ErrorKind::Domain, "n_qubits out of range");
    }
    if (n_bins < 2) {
        throw Error(ErrorKind::Domain, "need at least 2 bins");
    }
}

} // namespace

std::vector<double> haar_bin_probs(int n_qubits, int n_bins) {
    check_bins(n_qubits, n_bins);
    const double m = std::ldexp(1.0, n_qubits) - 1.0; // N - 1
    // cdf complement at each edge: (1 - F)^(N-1); bins telescope.
    std::vector<double> tail(static_cast<std::size_t>(n_bins) + 1);
    for (int k = 0; k <= n_bins; ++k) {
        const double edge = static_cast<double>(k) / n_bins;
        tail[k] = k == n_bins ? 0.0 : std::pow(1.0 - edge, m);
    }
    tail[0] = 1.0;
    std::vector<double> q(static_cast<std::size_t>(n_bins));
    for (int k = 0; k < n_bins; ++k) {
        q[k] = tail[k] - tail[k + 1];
    }
    return q;
}

std::vector<double> haar_bin_log_probs(int n_qubits, int n_bins) {
    check_bins(n_qubits, n_bins);
    const double m = std::ldexp(1.0, n_qubits) - 1.0;
    std::vector<double> lq(static_cast<std::size_t>(n_bins));
    for (int k = 0; k < n_bins; ++k) {
        const double a = static_cast<double>(k) / n_bins;
        const double b = static_cast<double>(k + 1) / n_bins;
        const double la = m * std::log1p(-a);
        const double lb = k + 1 == n_bins ? -std::numeric_limits<double>::infinity()
                                          : m * std::log1p(-b);
        // log((1-a)^m - (1-b)^m) = la + log(1 - exp(lb - la))
        lq[k] = la + std::log(-std::expm1(lb - la));
    }
    return lq;
}

FidelityHistogram::FidelityHistogram(int bins)
    : n_bins(bins), counts(static_cast<std::size_t>(bins), 0) {
    if (bins < 1) {
        throw Error(ErrorKind::Domain, "histogram needs at least one bin");
    }
}

FidelityHistogram FidelityHistogram::from(std::span<const double> fidelities,
                                          int bins) {
    FidelityHistogram h(bins);
    for (double f : fidelities) {
        h.add(f);
    }
    return h;
}

int FidelityHistogram::bin_of(double fidelity) const noexcept {
    const double f = std::clamp(fidelity, 0.0, 1.0);
    const int k = static_cast<int>(std::floor(f * n_bins));
    return std::min(k, n_bins - 1);
}

void FidelityHistogram::add(double fidelity) {
    if (!std::isfinite(fidelity)) {
        throw Error(ErrorKind::Domain, "non-finite fidelity");
    }
    ++counts[static_cast<std::size_t>(bin_of(fidelity))];
    ++total;
}

std::vector<double> FidelityHistogram::probabilities() const {
    std::vector<double> p(counts.size(), 0.0);
    if (total == 0) {
        return p;
    }
    for (std::size_t k = 0; k < counts.size(); ++k) {
        p[k] = static_cast<double>(counts[k]) / static_cast<double>(total);
    }
    return p;
}

namespace {

void check_distribution(std::span<const double> p, const char *name) {
    double s = 0.0;
    for (double x : p) {
        if (x < 0.0) {
            throw Error(ErrorKind::Domain, std::string(name) + " has negative mass");
        }
        s += x;
    }
    if (std::abs(s - 1.0) > 1e-9) {
        throw Error(ErrorKind::Domain, std::string(name) + " does not sum to 1");
    }
}

} // namespace

double kl_divergence(std::span<const double> p, std::span<const double> q) {
    if (p.size() != q.size()) {
        throw Error(ErrorKind::Domain, "kl_divergence: length mismatch");
    }
    check_distribution(p, "p");
    check_distribution(q, "q");
    double d = 0.0;
    for (std::size_t k = 0; k < p.size(); ++k) {
        if (!(q[k] > 0.0)) {
            throw Error(ErrorKind::Domain, "kl_divergence: q has a zero bin");
        }
        if (p[k] > 0.0) {
            d += p[k] * std::log(p[k] / q[k]);
        }
    }
    return std::max(d, 0.0);
}

double kl_divergence_log(std::span<const double> p,
                         std::span<const double> log_q) {
    if (p.size() != log_q.size()) {
        throw Error(ErrorKind::Domain, "kl_divergence: length mismatch");
    }
    check_distribution(p, "p");
    double d = 0.0;
    for (std::size_t k = 0; k < p.size(); ++k) {
        if (!std::isfinite(log_q[k])) {
            throw Error(ErrorKind::Domain, "kl_divergence: q has a zero bin");
        }
        if (p[k] > 0.0) {
            d += p[k] * (std::log(p[k]) - log_q[k]);
        }
    }
    return std::max(d, 0.0);
}

std::string to_string(FidelityMode mode) {
    switch (mode) {
    case FidelityMode::Exact:
        return "exact";
    case FidelityMode::Sampled:
        return "sampled";
    case FidelityMode::Noisy:
        return "noisy";
    }
    return "exact";
}

FidelityMode fidelity_mode_from(const std::string &name) {
    if (name == "exact") {
        return FidelityMode::Exact;
    }
    if (name == "sampled") {
        return FidelityMode::Sampled;
    }
    if (name == "noisy") {
        return FidelityMode::Noisy;
    }
    throw Error(ErrorKind::Validation, "unknown fidelity mode " + name);
}

double pair_fidelity(const Circuit &circuit, std::span<const double> theta,
                     std::span<const double> phi, const ExprConfig &cfg,
                     const BackendModel &backend, Rng &rng) {
    const Circuit prepare = qexpr::bind(circuit, theta);
    const Circuit unprepare = inverse(qexpr::bind(circuit, phi));
    const Circuit native = transpile(compose(prepare, unprepare), backend);
    if (cfg.mode == FidelityMode::Exact) {
        return exact_zero_prob(native);
    }
    const auto zeros = sample_zero_count(native, cfg.shots, backend, rng);
    return static_cast<double>(zeros) / static_cast<double>(cfg.shots);
}

std::vector<double> sample_fidelities(const Circuit &circuit,
                                      const ExprConfig &cfg,
                                      const BackendModel &backend) {
    if (cfg.num_pairs < 1) {
        throw Error(ErrorKind::Validation, "num_pairs must be >= 1");
    }
    if (cfg.mode != FidelityMode::Exact && cfg.shots < 1) {
        throw Error(ErrorKind::Validation, "shots must be >= 1");
    }
    BackendModel device = backend;
    if (cfg.mode == FidelityMode::Sampled) {
        device.noiseless = true;
    } else if (cfg.mode == FidelityMode::Noisy) {
        device.noiseless = false;
        if (!device.has_calibration()) {
            throw Error(ErrorKind::Profile,
                        "noisy mode needs a calibrated backend profile, " +
                            backend.id + " has none");
        }
    }
    const Rng master(cfg.seed);
    const std::size_t np = circuit.n_params();
    std::vector<double> theta(np), phi(np), out;
    out.reserve(cfg.num_pairs);
    constexpr double two_pi = 2.0 * std::numbers::pi;
    for (std::size_t i = 0; i < cfg.num_pairs; ++i) {
        Rng params = master.derive({i, 0});
        for (auto &t : theta) {
            t = two_pi * params.uniform();
        }
        for (auto &p : phi) {
            p = two_pi * params.uniform();
        }
        if (cfg.equal_params) {
            phi = theta;
        }
        Rng shots = master.derive({i, 1});
        out.push_back(pair_fidelity(circuit, theta, phi, cfg, device, shots));
    }
    return out;
}

ExpressibilityResult expressibility_from_fidelities(
    std::span<const double> fidelities, int n_qubits, const ExprConfig &cfg) {
    ExpressibilityResult r;
    r.histogram = FidelityHistogram::from(fidelities, cfg.n_bins);
    r.num_pairs = fidelities.size();
    r.mode = cfg.mode;
    r.shots = cfg.mode == FidelityMode::Exact ? 0 : cfg.shots;
    const auto p = r.histogram.probabilities();
    r.expr = kl_divergence_log(p, haar_bin_log_probs(n_qubits, cfg.n_bins));
    return r;
}

ExpressibilityResult expressibility(const Circuit &circuit,
                                    const ExprConfig &cfg,
                                    const BackendModel &backend) {
    const auto f = sample_fidelities(circuit, cfg, backend);
    return expressibility_from_fidelities(f, circuit.n_qubits(), cfg);
}

nlohmann::json ExpressibilityResult::to_json() const {
    return {{"expr", expr},
            {"n_bins", histogram.n_bins},
            {"num_pairs", num_pairs},
            {"mode", to_string(mode)},
            {"shots", shots},
            {"histogram_counts", histogram.counts}};
}

} // namespace qexpr
