#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <set>

#include "qexpr/error.hpp"
#include "qexpr/studies.hpp"
#include "support.hpp"

using namespace qexpr;

namespace {

CorpusConfig small_corpus() {
    CorpusConfig c;
    c.min_qubits = 1;
    c.max_qubits = 3;
    c.per_qubit = 5;
    c.expr.num_pairs = 200;
    c.seed = 42;
    return c;
}

// Records with a known relation between globals and label.
std::vector<CircuitGraph> synthetic_records(int count, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd;
    std::vector<CircuitGraph> out;
    for (int i = 0; i < count; ++i) {
        CircuitGraph g = test::random_graph(rng, 4, 3);
        g.id = "s" + std::to_string(i);
        g.n_qubits = 1 + i % 4;
        g.global[2] = g.n_qubits;
        g.label = 2.0 * g.global[0] + 0.1 * nd(rng);
        out.push_back(std::move(g));
    }
    return out;
}

ModelConfig tiny_config() {
    ModelConfig c;
    c.heads = 2;
    c.head_dim = 4;
    c.mlp_hidden = 8;
    c.reg_hidden1 = 8;
    c.reg_hidden2 = 4;
    return c;
}

double oracle_pearson(const std::vector<double> &x, const std::vector<double> &y) {
    const double n = static_cast<double>(x.size());
    double sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sx += x[i];
        sy += y[i];
        sxx += x[i] * x[i];
        syy += y[i] * y[i];
        sxy += x[i] * y[i];
    }
    return (n * sxy - sx * sy) / std::sqrt((n * sxx - sx * sx) * (n * syy - sy * sy));
}

} // namespace

TEST(Pearson, Examples) {
    const std::vector<double> x = {1, 2, 3, 4, 5};
    const std::vector<double> up = {2, 4, 6, 8, 10};
    const std::vector<double> down = {5, 4, 3, 2, 1};
    EXPECT_NEAR(pearson(x, up), 1.0, 1e-15);
    EXPECT_NEAR(pearson(x, down), -1.0, 1e-15);
    bool flag = false;
    const std::vector<double> flat = {3, 3, 3, 3, 3};
    EXPECT_EQ(pearson(x, flat, &flag), 0.0);
    EXPECT_TRUE(flag);
    EXPECT_THROW((void)pearson(x, std::vector<double>{1, 2}), Error);
}

TEST(Pearson, MatchesSumFormula) {
    std::mt19937_64 rng(81);
    std::normal_distribution<double> nd;
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<double> x(50), y(50);
        for (std::size_t i = 0; i < 50; ++i) {
            x[i] = nd(rng);
            y[i] = 0.3 * x[i] + nd(rng);
        }
        bool flag = true;
        EXPECT_NEAR(pearson(x, y, &flag), oracle_pearson(x, y), 1e-12);
        EXPECT_FALSE(flag);
    }
}

TEST(Corpus, SmallRunShapeAndLabels) {
    const Corpus c = generate_corpus(small_corpus(), BackendModel{}, 1);
    ASSERT_EQ(c.records.size(), 15u);
    EXPECT_TRUE(c.failures.empty());
    std::set<std::string> ids;
    for (std::size_t i = 0; i < c.records.size(); ++i) {
        const auto &r = c.records[i];
        EXPECT_EQ(r.n_qubits, 1 + static_cast<int>(i / 5));
        EXPECT_EQ(r.id, "q" + std::to_string(r.n_qubits) + "_" + std::to_string(i % 5));
        ids.insert(r.id);
        ASSERT_TRUE(r.label.has_value());
        EXPECT_GE(*r.label, 0.0);
        const double n_states = std::ldexp(1.0, r.n_qubits);
        EXPECT_LE(*r.label, (n_states - 1.0) * std::log(75.0) + 1e-9);
        EXPECT_NO_THROW(r.validate());
        EXPECT_TRUE(r.meta.contains("generator"));
        EXPECT_TRUE(r.meta.contains("expr_seed"));
        EXPECT_TRUE(r.meta.contains("circuit"));
        const int reps = r.meta.at("generator").at("reps").get<int>();
        EXPECT_GE(reps, 1);
        EXPECT_LE(reps, 3);
    }
    EXPECT_EQ(ids.size(), 15u);
}

TEST(Corpus, LabelMatchesStoredCircuit) {
    const CorpusConfig cfg = small_corpus();
    const Corpus c = generate_corpus(cfg, BackendModel{}, 1);
    for (std::size_t i = 0; i < c.records.size(); i += 4) {
        const auto &r = c.records[i];
        const Circuit circ = parse_circuit(r.meta.at("circuit").dump(), Format::Json);
        ExprConfig e = cfg.expr;
        e.seed = r.meta.at("expr_seed").get<std::uint64_t>();
        EXPECT_EQ(expressibility(circ, e, BackendModel{}).expr, *r.label) << r.id;
    }
}

TEST(Corpus, DeterministicAndWorkerInvariant) {
    const Corpus a = generate_corpus(small_corpus(), preset("synthetic_low"), 1);
    const Corpus b = generate_corpus(small_corpus(), preset("synthetic_low"), 3);
    ASSERT_EQ(a.records.size(), b.records.size());
    for (std::size_t i = 0; i < a.records.size(); ++i) {
        EXPECT_EQ(a.records[i], b.records[i]) << i;
    }
    CorpusConfig other = small_corpus();
    other.seed = 43;
    EXPECT_FALSE(generate_corpus(other, BackendModel{}, 1).records[3] ==
                 generate_corpus(small_corpus(), BackendModel{}, 1).records[3]);
}

TEST(Corpus, ConfigValidation) {
    CorpusConfig c = small_corpus();
    c.min_qubits = 4;
    c.max_qubits = 3;
    EXPECT_THROW(c.validate(), Error);
    c = small_corpus();
    c.per_qubit = 0;
    EXPECT_THROW(c.validate(), Error);
    c = small_corpus();
    c.reps_max = 4;
    EXPECT_THROW(c.validate(), Error);
}

TEST(Correlation, RecoversKnownRelation) {
    const auto recs = synthetic_records(150, 82);
    const CorrelationResult r = correlation_study(recs);
    ASSERT_EQ(r.names.size(), static_cast<std::size_t>(kGlobalDim) + 2);
    EXPECT_EQ(r.names.front(), "depth");
    EXPECT_EQ(r.names.back(), "expr");
    EXPECT_EQ(r.names[kGlobalDim], "count_1q");
    EXPECT_GT(r.r_expr[0], 0.99);
    std::vector<double> c1q, y;
    for (const auto &g : recs) {
        c1q.push_back(g.global[3] + g.global[4] + g.global[5]);
        y.push_back(*g.label);
    }
    EXPECT_NEAR(r.r_expr[kGlobalDim], oracle_pearson(c1q, y), 1e-12);
    const auto m = static_cast<Eigen::Index>(r.names.size());
    ASSERT_EQ(r.matrix.rows(), m);
    for (Eigen::Index i = 0; i < m; ++i) {
        EXPECT_NEAR(r.matrix(i, i), 1.0, 1e-12);
        EXPECT_NEAR(r.matrix(i, m - 1), r.matrix(m - 1, i), 1e-15);
    }
}

TEST(Correlation, NeedsHundredRecordsAndFlagsConstants) {
    EXPECT_THROW((void)correlation_study(synthetic_records(99, 83)), Error);
    auto recs = synthetic_records(100, 84);
    for (auto &g : recs) {
        g.global[5] = 0.0;
    }
    const CorrelationResult r = correlation_study(recs);
    EXPECT_TRUE(r.zero_variance[5]);
    EXPECT_EQ(r.r_expr[5], 0.0);
    const std::string path = (std::filesystem::temp_directory_path() / "qexpr_corr.csv").string();
    write_correlation_csv(path, r);
    std::ifstream in(path);
    int lines = 0;
    for (std::string line; std::getline(in, line);) {
        ++lines;
    }
    EXPECT_EQ(lines, kGlobalDim + 2);
    std::filesystem::remove(path);
}

TEST(Subset, NestedAndStratified) {
    const auto recs = synthetic_records(200, 85);
    const auto a = stratified_subset(recs, 10, 7);
    const auto b = stratified_subset(recs, 20, 7);
    EXPECT_EQ(a.size(), 40u);
    EXPECT_EQ(b.size(), 80u);
    const std::set<std::size_t> big(b.begin(), b.end());
    for (auto i : a) {
        EXPECT_TRUE(big.contains(i));
    }
    std::map<int, int> per;
    for (auto i : b) {
        ++per[recs[i].n_qubits];
    }
    for (const auto &[n, k] : per) {
        EXPECT_EQ(k, 20) << n;
    }
    EXPECT_THROW((void)stratified_subset(recs, 51, 7), Error);
}

TEST(Evaluate, PerQubitBreakdownAndCsv) {
    const auto recs = synthetic_records(40, 86);
    Model m;
    m.config = tiny_config();
    m.params = ModelParams::init(m.config, 3);
    m.stats = FeatureStats::fit(recs);
    const EvalReport r = evaluate(m, recs);
    EXPECT_EQ(r.predictions.size(), recs.size());
    EXPECT_DOUBLE_EQ(r.rmse, rmse(r.predictions, r.labels));
    std::size_t total = 0;
    for (const auto &[n, v] : r.per_qubit) {
        std::vector<double> p, y;
        for (std::size_t i = 0; i < recs.size(); ++i) {
            if (recs[i].n_qubits == n) {
                p.push_back(r.predictions[i]);
                y.push_back(r.labels[i]);
            }
        }
        EXPECT_DOUBLE_EQ(v.first, rmse(p, y));
        EXPECT_EQ(v.second, p.size());
        total += v.second;
    }
    EXPECT_EQ(total, recs.size());
    const std::string path = (std::filesystem::temp_directory_path() / "qexpr_pred.csv").string();
    write_predictions_csv(path, recs, r);
    std::ifstream in(path);
    std::string header;
    std::getline(in, header);
    EXPECT_EQ(header, "id,n_qubits,label,prediction");
    std::filesystem::remove(path);
}

TEST(SampleSize, OneRowPerSize) {
    const auto pool = synthetic_records(160, 87);
    const auto test_set = synthetic_records(40, 88);
    TrainConfig tc;
    tc.epochs = 3;
    tc.batch_size = 16;
    const std::vector<std::size_t> sizes = {8, 16, 32};
    const auto rows = sample_size_study(pool, test_set, sizes, tc, tiny_config());
    ASSERT_EQ(rows.size(), 3u);
    for (std::size_t k = 0; k < 3; ++k) {
        EXPECT_EQ(rows[k].per_stratum, sizes[k]);
        EXPECT_EQ(rows[k].train_size, 4 * sizes[k] - static_cast<std::size_t>(std::llround(0.125 * 4 * sizes[k])));
        EXPECT_TRUE(std::isfinite(rows[k].rmse));
    }
}

TEST(Extrapolation, FlagsAndErrors) {
    const auto recs = synthetic_records(120, 89);
    TrainConfig tc;
    tc.epochs = 2;
    tc.batch_size = 32;
    const auto r = extrapolation_study(recs, 2, tc, tiny_config());
    ASSERT_FALSE(r.rows.empty());
    std::set<int> seen;
    for (const auto &row : r.rows) {
        seen.insert(row.n_qubits);
        EXPECT_EQ(row.interpolation, row.n_qubits <= 2) << row.n_qubits;
        if (!row.interpolation) {
            EXPECT_EQ(row.count, 30u);
        }
    }
    EXPECT_EQ(seen, (std::set<int>{1, 2, 3, 4}));
    EXPECT_TRUE(std::isfinite(r.interpolation_rmse));
    EXPECT_TRUE(std::isfinite(r.extrapolation_rmse));
    EXPECT_THROW((void)extrapolation_study(recs, 4, tc, tiny_config()), Error);
    EXPECT_THROW((void)extrapolation_study(recs, 0, tc, tiny_config()), Error);
}
