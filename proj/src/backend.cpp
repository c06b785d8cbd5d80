#include "qexpr/backend.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <fstream>
#include <limits>

#include "qexpr/error.hpp"

namespace qexpr {

using nlohmann::json;

CouplingMap::CouplingMap(int n_qubits, std::vector<std::pair<int, int>> edges)
    : n_qubits_(n_qubits),
      adj_(static_cast<std::size_t>(std::max(n_qubits, 0))),
      adj_matrix_(static_cast<std::size_t>(std::max(n_qubits, 0)) *
                      static_cast<std::size_t>(std::max(n_qubits, 0)),
                  false) {
    if (n_qubits < 0) {
        throw Error(ErrorKind::Validation, "coupling map: negative size");
    }
    for (auto [a, b] : edges) {
        if (a < 0 || b < 0 || a >= n_qubits || b >= n_qubits) {
            throw Error(ErrorKind::Validation,
                        "coupling map: edge references unknown qubit");
        }
        if (a == b) {
            throw Error(ErrorKind::Validation, "coupling map: self-loop");
        }
        edges_.emplace_back(std::min(a, b), std::max(a, b));
    }
    std::sort(edges_.begin(), edges_.end());
    edges_.erase(std::unique(edges_.begin(), edges_.end()), edges_.end());
    const auto n = static_cast<std::size_t>(n_qubits);
    for (auto [a, b] : edges_) {
        adj_[a].push_back(b);
        adj_[b].push_back(a);
        adj_matrix_[a * n + b] = adj_matrix_[b * n + a] = true;
    }
    for (auto &nb : adj_) {
        std::sort(nb.begin(), nb.end());
    }
}

CouplingMap CouplingMap::full(int n_qubits) {
    std::vector<std::pair<int, int>> e;
    for (int a = 0; a < n_qubits; ++a) {
        for (int b = a + 1; b < n_qubits; ++b) {
            e.emplace_back(a, b);
        }
    }
    return {n_qubits, std::move(e)};
}

CouplingMap CouplingMap::linear(int n_qubits) {
    std::vector<std::pair<int, int>> e;
    for (int a = 0; a + 1 < n_qubits; ++a) {
        e.emplace_back(a, a + 1);
    }
    return {n_qubits, std::move(e)};
}

CouplingMap CouplingMap::ring(int n_qubits) {
    auto m = linear(n_qubits);
    auto e = m.edges();
    if (n_qubits > 2) {
        e.emplace_back(0, n_qubits - 1);
    }
    return {n_qubits, std::move(e)};
}

bool CouplingMap::adjacent(int a, int b) const noexcept {
    if (a < 0 || b < 0 || a >= n_qubits_ || b >= n_qubits_) {
        return false;
    }
    return adj_matrix_[static_cast<std::size_t>(a) * n_qubits_ + b];
}

CouplingMap CouplingMap::induced(int n) const {
    n = std::min(n, n_qubits_);
    std::vector<std::pair<int, int>> e;
    for (auto [a, b] : edges_) {
        if (a < n && b < n) {
            e.emplace_back(a, b);
        }
    }
    return {n, std::move(e)};
}

std::vector<int> CouplingMap::shortest_path(int from, int to) const {
    if (from < 0 || to < 0 || from >= n_qubits_ || to >= n_qubits_) {
        return {};
    }
    std::vector<int> prev(static_cast<std::size_t>(n_qubits_), -1);
    std::vector<bool> seen(static_cast<std::size_t>(n_qubits_), false);
    std::deque<int> queue{from};
    seen[from] = true;
    while (!queue.empty()) {
        const int u = queue.front();
        queue.pop_front();
        if (u == to) {
            break;
        }
        for (int v : adj_[u]) {
            if (!seen[v]) {
                seen[v] = true;
                prev[v] = u;
                queue.push_back(v);
            }
        }
    }
    if (!seen[to]) {
        return {};
    }
    std::vector<int> path;
    for (int v = to; v != -1; v = prev[v]) {
        path.push_back(v);
    }
    std::reverse(path.begin(), path.end());
    return path;
}

json CouplingMap::to_json() const {
    json j;
    j["n_qubits"] = n_qubits_;
    j["edges"] = json::array();
    for (auto [a, b] : edges_) {
        j["edges"].push_back({a, b});
    }
    return j;
}

CouplingMap CouplingMap::from_json(const json &j) {
    try {
        std::vector<std::pair<int, int>> e;
        for (const auto &pair : j.at("edges")) {
            if (pair.size() != 2) {
                throw Error(ErrorKind::Profile, "coupling edge must be a pair");
            }
            e.emplace_back(pair[0].get<int>(), pair[1].get<int>());
        }
        return {j.at("n_qubits").get<int>(), std::move(e)};
    } catch (const json::exception &e) {
        throw Error(ErrorKind::Profile, std::string("coupling map: ") + e.what());
    }
}

const EdgeCalibration &BackendModel::edge(int a, int b) const {
    for (const auto &e : cx) {
        if ((e.a == a && e.b == b) || (e.a == b && e.b == a)) {
            return e;
        }
    }
    throw Error(ErrorKind::Profile, "backend " + id + ": no CX calibration for (" +
                                        std::to_string(a) + "," +
                                        std::to_string(b) + ")");
}

const QubitCalibration &BackendModel::qubit(int q) const {
    if (q < 0 || static_cast<std::size_t>(q) >= qubits.size()) {
        throw Error(ErrorKind::Profile,
                    "backend " + id + ": no calibration for qubit " +
                        std::to_string(q));
    }
    return qubits[static_cast<std::size_t>(q)];
}

bool BackendModel::has_calibration() const noexcept {
    return static_cast<int>(qubits.size()) == n_qubits &&
           cx.size() == coupling.edges().size();
}

void BackendModel::validate() const {
    auto prob = [&](double p, const char *what) {
        if (!(p >= 0.0 && p <= 1.0)) {
            throw Error(ErrorKind::Profile,
                        "backend " + id + ": " + what + " not in [0,1]");
        }
    };
    auto nonneg = [&](double d, const char *what) {
        if (!(d >= 0.0)) {
            throw Error(ErrorKind::Profile,
                        "backend " + id + ": " + what + " negative");
        }
    };
    if (n_qubits < 1 || coupling.n_qubits() != n_qubits) {
        throw Error(ErrorKind::Profile,
                    "backend " + id + ": coupling map size mismatch");
    }
    prob(sx_error, "sx_error");
    prob(x_error, "x_error");
    nonneg(sx_duration_ns, "sx_duration");
    nonneg(x_duration_ns, "x_duration");
    for (const auto &q : qubits) {
        prob(q.readout_p01, "readout_p01");
        prob(q.readout_p10, "readout_p10");
        if (!(q.t1_us > 0.0) || !(q.t2_us > 0.0)) {
            throw Error(ErrorKind::Profile, "backend " + id + ": T1/T2 must be positive");
        }
        if (q.t2_us > 2.0 * q.t1_us * (1.0 + 1e-12)) {
            throw Error(ErrorKind::Profile, "backend " + id + ": T2 > 2 T1");
        }
    }
    for (const auto &e : cx) {
        prob(e.cx_error, "cx_error");
        nonneg(e.cx_duration_ns, "cx_duration");
        if (!coupling.adjacent(e.a, e.b)) {
            throw Error(ErrorKind::Profile,
                        "backend " + id + ": CX calibration on uncoupled pair");
        }
    }
    if (!noiseless && !has_calibration()) {
        throw Error(ErrorKind::Profile,
                    "backend " + id +
                        ": noisy profile needs calibration for every qubit and edge");
    }
}

namespace {

json time_to_json(double t) {
    return std::isfinite(t) ? json(t) : json(nullptr);
}

double time_from_json(const json &j) {
    return j.is_null() ? std::numeric_limits<double>::infinity() : j.get<double>();
}

} // namespace

json BackendModel::to_json() const {
    json j;
    j["id"] = id;
    j["n_qubits"] = n_qubits;
    j["noiseless"] = noiseless;
    j["coupling"] = coupling.to_json();
    j["qubits"] = json::array();
    for (const auto &q : qubits) {
        j["qubits"].push_back({{"T1", time_to_json(q.t1_us)},
                               {"T2", time_to_json(q.t2_us)},
                               {"readout_p01", q.readout_p01},
                               {"readout_p10", q.readout_p10},
                               {"frequency", q.frequency_ghz}});
    }
    json gates;
    gates["sx_error"] = sx_error;
    gates["x_error"] = x_error;
    gates["sx_duration"] = sx_duration_ns;
    gates["x_duration"] = x_duration_ns;
    gates["cx"] = json::array();
    for (const auto &e : cx) {
        gates["cx"].push_back({{"edge", {e.a, e.b}},
                               {"error", e.cx_error},
                               {"duration", e.cx_duration_ns}});
    }
    j["gates"] = gates;
    return j;
}

BackendModel BackendModel::from_json(const json &j) {
    BackendModel b;
    try {
        b.id = j.at("id").get<std::string>();
        b.n_qubits = j.at("n_qubits").get<int>();
        b.noiseless = j.value("noiseless", false);
        b.coupling = j.contains("coupling") ? CouplingMap::from_json(j["coupling"])
                                            : CouplingMap::full(b.n_qubits);
        if (j.contains("qubits")) {
            for (const auto &q : j["qubits"]) {
                QubitCalibration c;
                c.t1_us = time_from_json(q.at("T1"));
                c.t2_us = time_from_json(q.at("T2"));
                c.readout_p01 = q.at("readout_p01").get<double>();
                c.readout_p10 = q.at("readout_p10").get<double>();
                c.frequency_ghz = q.at("frequency").get<double>();
                b.qubits.push_back(c);
            }
        }
        if (j.contains("gates")) {
            const auto &g = j["gates"];
            b.sx_error = g.at("sx_error").get<double>();
            b.x_error = g.at("x_error").get<double>();
            b.sx_duration_ns = g.at("sx_duration").get<double>();
            b.x_duration_ns = g.at("x_duration").get<double>();
            for (const auto &e : g.at("cx")) {
                EdgeCalibration c;
                c.a = e.at("edge").at(0).get<int>();
                c.b = e.at("edge").at(1).get<int>();
                c.cx_error = e.at("error").get<double>();
                c.cx_duration_ns = e.at("duration").get<double>();
                b.cx.push_back(c);
            }
        }
    } catch (const json::exception &e) {
        throw Error(ErrorKind::Profile, std::string("backend profile: ") + e.what());
    }
    b.validate();
    return b;
}

BackendModel BackendModel::load(const std::string &path) {
    std::ifstream in(path);
    if (!in) {
        throw Error(ErrorKind::Io, "cannot open backend profile " + path);
    }
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error &e) {
        throw Error(ErrorKind::Profile, path + ": " + e.what());
    }
    return from_json(j);
}

namespace {

// Deterministic per-qubit jitter in [0, 1).
double jitter(int q, double salt) {
    const double x = std::sin((q + 1) * 12.9898 + salt * 78.233) * 43758.5453;
    return x - std::floor(x);
}

struct NoiseScale {
    double t1;
    double t2_ratio;
    double readout;
    double sx_error;
    double cx_error;
    double cx_duration;
};

BackendModel synthetic(const std::string &id, CouplingMap map, NoiseScale s) {
    BackendModel b;
    b.id = id;
    b.n_qubits = map.n_qubits();
    b.noiseless = false;
    b.coupling = std::move(map);
    for (int q = 0; q < b.n_qubits; ++q) {
        QubitCalibration c;
        c.t1_us = s.t1 * (0.7 + 0.6 * jitter(q, 1.0));
        c.t2_us = std::min(2.0 * c.t1_us, s.t2_ratio * c.t1_us * (0.6 + 0.6 * jitter(q, 2.0)));
        c.readout_p01 = s.readout * (0.5 + jitter(q, 3.0));
        c.readout_p10 = s.readout * (0.8 + 1.2 * jitter(q, 4.0));
        c.frequency_ghz = 4.8 + 0.4 * jitter(q, 5.0);
        b.qubits.push_back(c);
    }
    b.sx_error = s.sx_error;
    b.x_error = s.sx_error;
    b.sx_duration_ns = 35.5;
    b.x_duration_ns = 35.5;
    for (auto [a, c] : b.coupling.edges()) {
        const double j = jitter(a * 16 + c, 6.0);
        b.cx.push_back({a, c, s.cx_error * (0.6 + 0.8 * j),
                        s.cx_duration * (0.8 + 0.4 * jitter(a * 16 + c, 7.0))});
    }
    return b;
}

} // namespace

std::vector<std::string> preset_names() {
    return {"noiseless", "synthetic_low", "synthetic_mid", "synthetic_high"};
}

BackendModel preset(const std::string &name) {
    if (name == "noiseless") {
        return BackendModel{};
    }
    if (name == "synthetic_low") {
        return synthetic(name, CouplingMap::ring(10),
                         {120.0, 1.0, 0.015, 2.5e-4, 7e-3, 320.0});
    }
    if (name == "synthetic_mid") {
        auto edges = CouplingMap::linear(10).edges();
        edges.emplace_back(1, 4);
        edges.emplace_back(5, 8);
        return synthetic(name, CouplingMap(10, edges),
                         {90.0, 0.9, 0.03, 5e-4, 1.4e-2, 400.0});
    }
    if (name == "synthetic_high") {
        return synthetic(name, CouplingMap::linear(10),
                         {60.0, 0.8, 0.05, 1.2e-3, 3e-2, 520.0});
    }
    throw Error(ErrorKind::Lookup, "unknown backend preset " + name);
}

BackendModel resolve_backend(const std::string &name_or_path) {
    for (const auto &n : preset_names()) {
        if (n == name_or_path) {
            return preset(n);
        }
    }
    return BackendModel::load(name_or_path);
}

BackendModel zero_noise(const BackendModel &backend) {
    BackendModel b = backend;
    b.id = backend.id + "_zeroed";
    b.noiseless = false;
    const double inf = std::numeric_limits<double>::infinity();
    if (b.qubits.empty()) {
        b.qubits.resize(static_cast<std::size_t>(b.n_qubits));
    }
    for (auto &q : b.qubits) {
        q.t1_us = inf;
        q.t2_us = inf;
        q.readout_p01 = 0.0;
        q.readout_p10 = 0.0;
    }
    b.sx_error = 0.0;
    b.x_error = 0.0;
    if (b.cx.size() != b.coupling.edges().size()) {
        b.cx.clear();
        for (auto [a, c] : b.coupling.edges()) {
            b.cx.push_back({a, c, 0.0, 0.0});
        }
    }
    for (auto &e : b.cx) {
        e.cx_error = 0.0;
    }
    return b;
}

} // namespace qexpr
