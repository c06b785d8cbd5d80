#include "qexpr/studies.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <mutex>
#include <numeric>
#include <thread>

#include "qexpr/error.hpp"
#include "qexpr/pqcgen.hpp"
#include "qexpr/rng.hpp"

namespace qexpr {

using nlohmann::json;

int worker_count() {
    if (const char *env = std::getenv("QEXPR_WORKERS")) {
        const int n = std::atoi(env);
        if (n >= 1) {
            return n;
        }
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

void CorpusConfig::validate() const {
    if (min_qubits < 1 || max_qubits > kMaxQubits || min_qubits > max_qubits) {
        throw Error(ErrorKind::Validation, "qubit range must lie in 1..10");
    }
    if (per_qubit < 1) {
        throw Error(ErrorKind::Validation, "per_qubit must be >= 1");
    }
    if (reps_max < 1 || reps_max > 3) {
        throw Error(ErrorKind::Validation, "reps_max must be in 1..3");
    }
}

json CorpusConfig::to_json() const {
    return {{"min_qubits", min_qubits},
            {"max_qubits", max_qubits},
            {"per_qubit", per_qubit},
            {"reps_max", reps_max},
            {"num_pairs", expr.num_pairs},
            {"n_bins", expr.n_bins},
            {"mode", to_string(expr.mode)},
            {"shots", expr.shots},
            {"seed", seed}};
}

Corpus generate_corpus(const CorpusConfig &cfg, const BackendModel &backend, int workers,
                       const std::function<void(const std::string &)> &log) {
    cfg.validate();
    struct Job {
        int n;
        int index;
    };
    std::vector<Job> jobs;
    for (int n = cfg.min_qubits; n <= cfg.max_qubits; ++n) {
        for (int k = 0; k < cfg.per_qubit; ++k) {
            jobs.push_back({n, k});
        }
    }
    std::vector<std::optional<CircuitGraph>> results(jobs.size());
    std::vector<std::string> errors(jobs.size());
    std::atomic<std::size_t> next{0};
    std::mutex log_mutex;
    const Rng master(cfg.seed);

    auto run = [&] {
        for (std::size_t i = next++; i < jobs.size(); i = next++) {
            const auto [n, k] = jobs[i];
            const std::string id = "q" + std::to_string(n) + "_" + std::to_string(k);
            try {
                Rng rng = master.derive({static_cast<std::uint64_t>(n),
                                         static_cast<std::uint64_t>(k)});
                GenConfig gen;
                gen.n_qubits = n;
                gen.reps = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(cfg.reps_max)));
                gen.seed = rng();
                const Circuit circuit = random_pqc(gen);
                ExprConfig ec = cfg.expr;
                ec.seed = rng();
                const auto label = expressibility(circuit, ec, backend);
                const std::uint64_t encode_seed = rng();
                CircuitGraph g = encode_circuit(circuit, backend, encode_seed);
                g.id = id;
                g.label = label.expr;
                g.meta = {{"generator", gen.to_json()},
                          {"expr_seed", ec.seed},
                          {"encode_seed", encode_seed},
                          {"circuit", json::parse(serialize_circuit(circuit, Format::Json))}};
                results[i] = std::move(g);
            } catch (const std::exception &e) {
                errors[i] = e.what();
            }
            if (log) {
                std::lock_guard lock(log_mutex);
                log(errors[i].empty() ? id + " ok" : id + " failed: " + errors[i]);
            }
        }
    };
    const int nw = std::clamp(workers, 1, static_cast<int>(std::max<std::size_t>(1, jobs.size())));
    if (nw == 1) {
        run();
    } else {
        std::vector<std::thread> pool;
        for (int w = 0; w < nw; ++w) {
            pool.emplace_back(run);
        }
        for (auto &t : pool) {
            t.join();
        }
    }
    Corpus corpus;
    for (std::size_t i = 0; i < jobs.size(); ++i) {
        if (results[i]) {
            corpus.records.push_back(std::move(*results[i]));
        } else {
            corpus.failures.push_back(
                {"q" + std::to_string(jobs[i].n) + "_" + std::to_string(jobs[i].index),
                 errors[i]});
        }
    }
    return corpus;
}

double pearson(std::span<const double> x, std::span<const double> y, bool *zero_variance) {
    if (x.size() != y.size() || x.size() < 2) {
        throw Error(ErrorKind::Validation, "pearson needs two equal-length samples");
    }
    const double n = static_cast<double>(x.size());
    const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
    const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
    }
    const bool flat = sxx <= 1e-24 * n || syy <= 1e-24 * n;
    if (zero_variance) {
        *zero_variance = flat;
    }
    if (flat) {
        return 0.0;
    }
    return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

CorrelationResult correlation_study(const std::vector<CircuitGraph> &records) {
    if (records.size() < 100) {
        throw Error(ErrorKind::Validation, "correlation study needs at least 100 labeled records");
    }
    CorrelationResult res;
    for (const char *n : kGlobalNames) {
        res.names.emplace_back(n);
    }
    res.names.emplace_back("count_1q");
    res.names.emplace_back("expr");
    const auto cols = res.names.size();
    std::vector<std::vector<double>> data(cols);
    for (const auto &r : records) {
        if (!r.label) {
            throw Error(ErrorKind::Validation, "record " + r.id + " has no label");
        }
        for (int c = 0; c < kGlobalDim; ++c) {
            data[c].push_back(r.global(c));
        }
        data[kGlobalDim].push_back(r.global(3) + r.global(4) + r.global(5));
        data[kGlobalDim + 1].push_back(*r.label);
    }
    res.matrix.resize(static_cast<Eigen::Index>(cols), static_cast<Eigen::Index>(cols));
    for (std::size_t a = 0; a < cols; ++a) {
        for (std::size_t b = 0; b < cols; ++b) {
            res.matrix(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) =
                a == b ? 1.0 : pearson(data[a], data[b]);
        }
    }
    for (std::size_t a = 0; a + 1 < cols; ++a) {
        bool flat = false;
        res.r_expr.push_back(pearson(data[a], data.back(), &flat));
        res.zero_variance.push_back(flat);
        if (flat) {
            res.matrix.row(static_cast<Eigen::Index>(a)).setZero();
            res.matrix.col(static_cast<Eigen::Index>(a)).setZero();
            res.matrix(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(a)) = 1.0;
        }
    }
    return res;
}

namespace {

std::ofstream open_csv(const std::string &path) {
    std::ofstream out(path);
    if (!out) {
        throw Error(ErrorKind::Io, "cannot write " + path);
    }
    out.precision(17);
    return out;
}

} // namespace

void write_correlation_csv(const std::string &path, const CorrelationResult &r) {
    auto out = open_csv(path);
    out << "feature,pearson_r,zero_variance\n";
    for (std::size_t i = 0; i < r.r_expr.size(); ++i) {
        out << r.names[i] << ',' << r.r_expr[i] << ',' << (r.zero_variance[i] ? 1 : 0)
            << '\n';
    }
}

void write_correlation_matrix_csv(const std::string &path, const CorrelationResult &r) {
    auto out = open_csv(path);
    out << "feature";
    for (const auto &n : r.names) {
        out << ',' << n;
    }
    out << '\n';
    for (Eigen::Index a = 0; a < r.matrix.rows(); ++a) {
        out << r.names[static_cast<std::size_t>(a)];
        for (Eigen::Index b = 0; b < r.matrix.cols(); ++b) {
            out << ',' << r.matrix(a, b);
        }
        out << '\n';
    }
}

EvalReport evaluate(const Model &model, const std::vector<CircuitGraph> &records) {
    if (records.empty()) {
        throw Error(ErrorKind::Validation, "nothing to evaluate");
    }
    EvalReport rep;
    rep.predictions = predict(model, records);
    std::map<int, std::pair<std::vector<double>, std::vector<double>>> strata;
    for (std::size_t i = 0; i < records.size(); ++i) {
        if (!records[i].label) {
            throw Error(ErrorKind::Validation, "record " + records[i].id + " has no label");
        }
        rep.labels.push_back(*records[i].label);
        auto &[p, y] = strata[records[i].n_qubits];
        p.push_back(rep.predictions[i]);
        y.push_back(*records[i].label);
    }
    rep.rmse = rmse(rep.predictions, rep.labels);
    for (const auto &[n, py] : strata) {
        rep.per_qubit[n] = {rmse(py.first, py.second), py.first.size()};
    }
    return rep;
}

void write_predictions_csv(const std::string &path, const std::vector<CircuitGraph> &records,
                           const EvalReport &report) {
    auto out = open_csv(path);
    out << "id,n_qubits,label,prediction\n";
    for (std::size_t i = 0; i < records.size(); ++i) {
        out << records[i].id << ',' << records[i].n_qubits << ',' << report.labels[i] << ','
            << report.predictions[i] << '\n';
    }
}

void write_per_qubit_csv(const std::string &path, const EvalReport &report) {
    auto out = open_csv(path);
    out << "n_qubits,count,rmse\n";
    for (const auto &[n, rc] : report.per_qubit) {
        out << n << ',' << rc.second << ',' << rc.first << '\n';
    }
}

std::vector<std::size_t> stratified_subset(const std::vector<CircuitGraph> &records,
                                           std::size_t per_stratum, std::uint64_t seed) {
    std::map<int, std::vector<std::size_t>> strata;
    for (std::size_t i = 0; i < records.size(); ++i) {
        strata[records[i].n_qubits].push_back(i);
    }
    const Rng master(seed);
    std::vector<std::size_t> out;
    for (auto &[n, idx] : strata) {
        if (idx.size() < per_stratum) {
            throw Error(ErrorKind::Validation,
                        "insufficient data: stratum n_qubits=" + std::to_string(n) + " has " +
                            std::to_string(idx.size()) + " records, need " +
                            std::to_string(per_stratum));
        }
        Rng rng = master.derive({static_cast<std::uint64_t>(n)});
        for (std::size_t i = idx.size(); i > 1; --i) {
            std::swap(idx[i - 1], idx[rng.below(i)]);
        }
        out.insert(out.end(), idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(per_stratum));
    }
    std::sort(out.begin(), out.end());
    return out;
}

std::vector<SampleSizeRow> sample_size_study(const std::vector<CircuitGraph> &pool,
                                             const std::vector<CircuitGraph> &test,
                                             std::span<const std::size_t> sizes,
                                             const TrainConfig &cfg,
                                             const ModelConfig &model_cfg) {
    if (sizes.empty() || test.empty()) {
        throw Error(ErrorKind::Validation, "sample-size study needs sizes and test data");
    }
    std::vector<SampleSizeRow> rows;
    for (std::size_t s : sizes) {
        const auto subset = gather(pool, stratified_subset(pool, s, cfg.seed));
        const Split split = split_dataset(subset, 0.875, 0.125, 0.0, cfg.seed);
        const auto result = train(gather(subset, std::span<const std::size_t>(split.train)),
                                  gather(subset, std::span<const std::size_t>(split.val)),
                                  cfg, model_cfg);
        rows.push_back({s, split.train.size(), evaluate(result.best, test).rmse});
    }
    return rows;
}

ExtrapolationResult extrapolation_study(const std::vector<CircuitGraph> &records,
                                        int train_max_qubits, const TrainConfig &cfg,
                                        const ModelConfig &model_cfg) {
    std::vector<CircuitGraph> inside, outside;
    int max_n = 0;
    for (const auto &r : records) {
        max_n = std::max(max_n, r.n_qubits);
        (r.n_qubits <= train_max_qubits ? inside : outside).push_back(r);
    }
    if (outside.empty()) {
        throw Error(ErrorKind::Validation,
                    "no qubit counts above " + std::to_string(train_max_qubits) +
                        " to extrapolate to (max is " + std::to_string(max_n) + ")");
    }
    if (inside.empty()) {
        throw Error(ErrorKind::Validation, "no records inside the training range");
    }
    const Split split = split_dataset(inside, 0.7, 0.1, 0.2, cfg.seed);
    const auto result = train(gather(inside, std::span<const std::size_t>(split.train)),
                              gather(inside, std::span<const std::size_t>(split.val)), cfg,
                              model_cfg);
    const auto held_out = gather(inside, std::span<const std::size_t>(split.test));
    ExtrapolationResult res;
    res.n_train = split.train.size();
    const EvalReport in_rep = evaluate(result.best, held_out);
    const EvalReport out_rep = evaluate(result.best, outside);
    res.interpolation_rmse = in_rep.rmse;
    res.extrapolation_rmse = out_rep.rmse;
    for (const auto &[n, rc] : in_rep.per_qubit) {
        res.rows.push_back({n, rc.second, rc.first, true});
    }
    for (const auto &[n, rc] : out_rep.per_qubit) {
        res.rows.push_back({n, rc.second, rc.first, false});
    }
    return res;
}

} // namespace qexpr
