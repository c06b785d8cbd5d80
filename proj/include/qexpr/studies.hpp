#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "qexpr/backend.hpp"
#include "qexpr/expressibility.hpp"
#include "qexpr/gnn.hpp"
#include "qexpr/graphenc.hpp"

namespace qexpr {

/// Worker count from QEXPR_WORKERS, else the hardware concurrency.
int worker_count();

struct CorpusConfig {
    int min_qubits = 1;
    int max_qubits = 5;
    int per_qubit = 300;
    int reps_max = 3;
    ExprConfig expr; // expr.seed is ignored; every circuit gets its own
    std::uint64_t seed = 0;

    void validate() const;
    nlohmann::json to_json() const;
};

struct CorpusFailure {
    std::string id;
    std::string message;
};

struct Corpus {
    std::vector<CircuitGraph> records;
    std::vector<CorpusFailure> failures;
};

/// Random PQCs labeled with expressibility, encoded as graphs. Records are
/// ordered by (n_qubits, index) regardless of `workers`; a failing circuit
/// is skipped and reported.
Corpus generate_corpus(const CorpusConfig &cfg, const BackendModel &backend,
                       int workers = 1,
                       const std::function<void(const std::string &)> &log = {});

/// Pearson correlation; returns 0 and sets `zero_variance` when either side
/// is constant.
double pearson(std::span<const double> x, std::span<const double> y,
               bool *zero_variance = nullptr);

struct CorrelationResult {
    std::vector<std::string> names; // features then "expr"
    std::vector<double> r_expr;     // per feature
    std::vector<bool> zero_variance;
    Eigen::MatrixXd matrix; // all columns incl. expr
};

/// Global features plus count_1q = rz + sx + x, each correlated with the
/// label. Needs at least 100 labeled records.
CorrelationResult correlation_study(const std::vector<CircuitGraph> &records);
void write_correlation_csv(const std::string &path, const CorrelationResult &r);
void write_correlation_matrix_csv(const std::string &path, const CorrelationResult &r);

struct EvalReport {
    double rmse = 0.0;
    std::map<int, std::pair<double, std::size_t>> per_qubit; // n -> (rmse, count)
    std::vector<double> predictions;
    std::vector<double> labels;
};

EvalReport evaluate(const Model &model, const std::vector<CircuitGraph> &records);
void write_predictions_csv(const std::string &path,
                           const std::vector<CircuitGraph> &records,
                           const EvalReport &report);
void write_per_qubit_csv(const std::string &path, const EvalReport &report);

template <class T>
std::vector<T> gather(const std::vector<T> &items, std::span<const std::size_t> idx) {
    std::vector<T> out;
    out.reserve(idx.size());
    for (auto i : idx) {
        out.push_back(items[i]);
    }
    return out;
}

/// Stratified subset: the first `per_stratum` records of each qubit count
/// after a seeded shuffle. Subsets for growing sizes are nested.
std::vector<std::size_t> stratified_subset(const std::vector<CircuitGraph> &records,
                                           std::size_t per_stratum, std::uint64_t seed);

struct SampleSizeRow {
    std::size_t per_stratum = 0;
    std::size_t train_size = 0;
    double rmse = 0.0;
};

/// One model per size; each subset is cut into training and validation
/// parts (7:1) and scored on the fixed `test` records.
std::vector<SampleSizeRow> sample_size_study(const std::vector<CircuitGraph> &pool,
                                             const std::vector<CircuitGraph> &test,
                                             std::span<const std::size_t> sizes,
                                             const TrainConfig &cfg,
                                             const ModelConfig &model_cfg = {});

struct ExtrapolationRow {
    int n_qubits = 0;
    std::size_t count = 0;
    double rmse = 0.0;
    bool interpolation = true;
};

struct ExtrapolationResult {
    std::vector<ExtrapolationRow> rows;
    double interpolation_rmse = 0.0;
    double extrapolation_rmse = 0.0;
    std::size_t n_train = 0;
};

/// Trains on strata n <= train_max_qubits (70/10/20 split) and scores the
/// held-out part of those strata plus every record above the cutoff.
ExtrapolationResult extrapolation_study(const std::vector<CircuitGraph> &records,
                                        int train_max_qubits, const TrainConfig &cfg,
                                        const ModelConfig &model_cfg = {});

} // namespace qexpr
