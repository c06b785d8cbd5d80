#include "qexpr/pqcgen.hpp"

#include <array>
#include <cstdlib>
#include <regex>

#include "qexpr/error.hpp"
#include "qexpr/rng.hpp"

namespace qexpr {

namespace {

constexpr std::array kSingleKinds = {GateKind::RX, GateKind::RY, GateKind::RZ,
                                     GateKind::H, GateKind::I};
constexpr std::array kEntanglingKinds = {GateKind::CX, GateKind::CRX,
                                         GateKind::CRY, GateKind::CRZ,
                                         GateKind::SWAP};

void single_layer(Circuit &c, Rng &rng) {
    for (int q = 0; q < c.n_qubits(); ++q) {
        const GateKind k = kSingleKinds[rng.below(kSingleKinds.size())];
        c.add(Gate::one(k, q, is_parameterized(k) ? Param{c.new_symbol()} : Param{}));
    }
}

} // namespace

void GenConfig::validate() const {
    if (n_qubits < 1 || n_qubits > kMaxQubits) {
        throw Error(ErrorKind::Validation, "GenConfig: n_qubits out of range");
    }
    if (reps < 1 || reps > 3) {
        throw Error(ErrorKind::Validation, "GenConfig: reps must be in 1..3");
    }
    auto prob = [](double p) { return p >= 0.0 && p <= 1.0; };
    if (!prob(p_second_single_layer) || !prob(p_trailing_layers)) {
        throw Error(ErrorKind::Validation, "GenConfig: probability out of [0,1]");
    }
    if (max_entanglers_per_layer < 0) {
        throw Error(ErrorKind::Validation, "GenConfig: negative entangler count");
    }
}

nlohmann::json GenConfig::to_json() const {
    return {{"n_qubits", n_qubits},
            {"reps", reps},
            {"seed", seed},
            {"p_second_single_layer", p_second_single_layer},
            {"p_trailing_layers", p_trailing_layers},
            {"max_entanglers_per_layer",
             max_entanglers_per_layer == 0 ? n_qubits : max_entanglers_per_layer}};
}

Circuit random_pqc(const GenConfig &cfg) {
    cfg.validate();
    Rng rng(cfg.seed);
    const int n = cfg.n_qubits;
    const int max_ent = cfg.max_entanglers_per_layer == 0 ? n : cfg.max_entanglers_per_layer;
    Circuit c(n);
    for (int block = 0; block < cfg.reps; ++block) {
        single_layer(c, rng);
        if (rng.bernoulli(cfg.p_second_single_layer)) {
            single_layer(c, rng);
        }
        if (n >= 2 && max_ent > 0) {
            const auto m = 1 + rng.below(static_cast<std::uint64_t>(max_ent));
            for (std::uint64_t i = 0; i < m; ++i) {
                const GateKind k = kEntanglingKinds[rng.below(kEntanglingKinds.size())];
                const int a = static_cast<int>(rng.below(static_cast<std::uint64_t>(n)));
                int b = static_cast<int>(rng.below(static_cast<std::uint64_t>(n - 1)));
                if (b >= a) {
                    ++b;
                }
                c.add(Gate::two(k, a, b,
                                is_parameterized(k) ? Param{c.new_symbol()} : Param{}));
            }
        }
        if (rng.bernoulli(cfg.p_trailing_layers)) {
            const int extra = 1 + static_cast<int>(rng.below(2));
            for (int i = 0; i < extra; ++i) {
                single_layer(c, rng);
            }
        }
    }
    return c;
}

std::string to_string(Entanglement e) {
    switch (e) {
    case Entanglement::Full:
        return "full";
    case Entanglement::Linear:
        return "linear";
    case Entanglement::Circular:
        return "circular";
    case Entanglement::Sca:
        return "sca";
    }
    return "linear";
}

Entanglement entanglement_from(const std::string &name) {
    if (name == "full") {
        return Entanglement::Full;
    }
    if (name == "linear") {
        return Entanglement::Linear;
    }
    if (name == "circular") {
        return Entanglement::Circular;
    }
    if (name == "sca") {
        return Entanglement::Sca;
    }
    throw Error(ErrorKind::Validation, "unknown entanglement pattern " + name);
}

std::vector<std::pair<int, int>> entangler_map(int n, Entanglement e, int block) {
    std::vector<std::pair<int, int>> pairs;
    if (e == Entanglement::Full) {
        for (int i = 0; i < n; ++i) {
            for (int j = i + 1; j < n; ++j) {
                pairs.emplace_back(i, j);
            }
        }
        return pairs;
    }
    // circular: wrap edge first, only when it is distinct from the chain
    if (e != Entanglement::Linear && n > 2) {
        pairs.emplace_back(n - 1, 0);
    }
    for (int i = 0; i + 1 < n; ++i) {
        pairs.emplace_back(i, i + 1);
    }
    if (e != Entanglement::Sca || pairs.empty()) {
        return pairs;
    }
    const std::size_t shift = static_cast<std::size_t>(block) % static_cast<std::size_t>(n);
    std::vector<std::pair<int, int>> shifted;
    for (std::size_t k = 0; k < pairs.size(); ++k) {
        auto p = pairs[(k + shift) % pairs.size()];
        if (block % 2 == 1) {
            std::swap(p.first, p.second);
        }
        shifted.push_back(p);
    }
    return shifted;
}

Circuit real_amplitudes(int n_qubits, int reps, Entanglement e) {
    if (n_qubits < 1 || n_qubits > 4) {
        throw Error(ErrorKind::Validation, "real_amplitudes: n_qubits must be in 1..4");
    }
    if (reps < 1 || reps > 4) {
        throw Error(ErrorKind::Validation, "real_amplitudes: reps must be in 1..4");
    }
    Circuit c(n_qubits);
    auto ry_layer = [&] {
        for (int q = 0; q < n_qubits; ++q) {
            c.add(Gate::one(GateKind::RY, q, c.new_symbol()));
        }
    };
    ry_layer();
    for (int block = 0; block < reps; ++block) {
        for (auto [a, b] : entangler_map(n_qubits, e, block)) {
            c.add(Gate::two(GateKind::CX, a, b));
        }
        ry_layer();
    }
    return c;
}

CircuitLibrary::CircuitLibrary(std::filesystem::path dir) : dir_(std::move(dir)) {}

std::vector<std::string> CircuitLibrary::file_names() const {
    std::vector<std::string> names;
    if (dir_.empty() || !std::filesystem::is_directory(dir_)) {
        return names;
    }
    for (const auto &entry : std::filesystem::directory_iterator(dir_)) {
        const auto ext = entry.path().extension();
        if (ext == ".json" || ext == ".qasm") {
            names.push_back(entry.path().stem().string());
        }
    }
    std::sort(names.begin(), names.end());
    return names;
}

Circuit CircuitLibrary::get(const std::string &name) const {
    if (!dir_.empty()) {
        for (const char *ext : {".json", ".qasm"}) {
            const auto path = dir_ / (name + ext);
            if (std::filesystem::exists(path)) {
                return load_circuit_file(path.string());
            }
        }
    }
    static const std::regex idle(R"(idle_(\d+)q)");
    static const std::regex ra(R"(ra_(\d+)q_l(\d+)_(full|linear|circular|sca))");
    std::smatch m;
    if (std::regex_match(name, m, idle)) {
        return Circuit(std::stoi(m[1]));
    }
    if (std::regex_match(name, m, ra)) {
        return real_amplitudes(std::stoi(m[1]), std::stoi(m[2]),
                               entanglement_from(m[3]));
    }
    throw Error(ErrorKind::Lookup, "no circuit named " + name);
}

Circuit circuit_library(const std::string &name) {
    const char *dir = std::getenv("QEXPR_LIBRARY");
    return CircuitLibrary(dir ? std::filesystem::path(dir) : std::filesystem::path{})
        .get(name);
}

} // namespace qexpr
