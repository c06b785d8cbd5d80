#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "qexpr/backend.hpp"
#include "qexpr/circuit.hpp"
#include "qexpr/rng.hpp"

namespace qexpr {

/// Probability mass of the Haar fidelity density (N-1)(1-F)^(N-2),
/// N = 2^n_qubits, over `n_bins` uniform bins on [0, 1]. Entries can
/// underflow to zero for n_qubits >= 8; use haar_bin_log_probs there.
std::vector<double> haar_bin_probs(int n_qubits, int n_bins);

/// Natural log of haar_bin_probs, finite for every supported width.
std::vector<double> haar_bin_log_probs(int n_qubits, int n_bins);

/// Uniform bins on [0, 1], the last one right-closed.
struct FidelityHistogram {
    int n_bins = 75;
    std::vector<std::uint64_t> counts;
    std::uint64_t total = 0;

    explicit FidelityHistogram(int bins = 75);
    static FidelityHistogram from(std::span<const double> fidelities, int bins);

    [[nodiscard]] int bin_of(double fidelity) const noexcept;
    void add(double fidelity);
    [[nodiscard]] std::vector<double> probabilities() const;
};

/// sum p_k ln(p_k / q_k) with 0 ln 0 = 0.
double kl_divergence(std::span<const double> p, std::span<const double> q);

/// Same divergence with q given as natural logs.
double kl_divergence_log(std::span<const double> p,
                         std::span<const double> log_q);

enum class FidelityMode { Exact, Sampled, Noisy };

std::string to_string(FidelityMode mode);
FidelityMode fidelity_mode_from(const std::string &name);

struct ExprConfig {
    std::size_t num_pairs = 5000;
    int n_bins = 75;
    FidelityMode mode = FidelityMode::Exact;
    std::uint64_t shots = 1024;
    std::uint64_t seed = 0;
    /// Test hook: reuse theta as phi for every pair.
    bool equal_params = false;
};

/// Compute-uncompute fidelities F = P(0...0) of
/// transpile(bind(C, theta) + inverse(bind(C, phi))), theta and phi
/// uniform on [0, 2 pi). Pair i draws from its own substream of cfg.seed.
std::vector<double> sample_fidelities(const Circuit &circuit,
                                      const ExprConfig &cfg,
                                      const BackendModel &backend);

/// Fidelity of one pair of parameter vectors under cfg.mode, using `rng`
/// for shot noise.
double pair_fidelity(const Circuit &circuit, std::span<const double> theta,
                     std::span<const double> phi, const ExprConfig &cfg,
                     const BackendModel &backend, Rng &rng);

struct ExpressibilityResult {
    double expr = 0.0;
    FidelityHistogram histogram;
    std::size_t num_pairs = 0;
    FidelityMode mode = FidelityMode::Exact;
    std::uint64_t shots = 0;

    nlohmann::json to_json() const;
};

/// KL divergence (nats) of the fidelity histogram from the Haar bins.
ExpressibilityResult expressibility_from_fidelities(
    std::span<const double> fidelities, int n_qubits, const ExprConfig &cfg);

ExpressibilityResult expressibility(const Circuit &circuit,
                                    const ExprConfig &cfg,
                                    const BackendModel &backend);

} // namespace qexpr
