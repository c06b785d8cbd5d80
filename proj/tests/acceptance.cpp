// End-to-end acceptance run. Prints one PASS/FAIL line per criterion and
// exits non-zero when a criterion fails that was not listed in --expect-fail.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include <CLI11.hpp>

#include "qexpr/backend.hpp"
#include "qexpr/expressibility.hpp"
#include "qexpr/gnn.hpp"
#include "qexpr/graphenc.hpp"
#include "qexpr/pqcgen.hpp"
#include "qexpr/sim.hpp"
#include "qexpr/studies.hpp"
#include "qexpr/transpile.hpp"
#include "support.hpp"

using namespace qexpr;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(double x) {
    std::ostringstream s;
    s.precision(6);
    s << x;
    return s.str();
}

// Equal-width histogram probabilities on [0, 1], F = 1 in the last bin.
std::vector<double> histogram(const std::vector<double> &f, int bins) {
    std::vector<double> h(static_cast<std::size_t>(bins), 0.0);
    for (double x : f) {
        const int b = std::min(bins - 1, static_cast<int>(x * bins));
        h[static_cast<std::size_t>(b)] += 1.0;
    }
    for (auto &v : h) {
        v /= static_cast<double>(f.size());
    }
    return h;
}

double kl(const std::vector<double> &p, const std::vector<double> &q) {
    double s = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (p[i] > 0.0) {
            s += p[i] * std::log(p[i] / q[i]);
        }
    }
    return s;
}

// Two-sample Kolmogorov-Smirnov p-value, asymptotic distribution.
double ks_pvalue(std::vector<double> a, std::vector<double> b) {
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    const double na = static_cast<double>(a.size());
    const double nb = static_cast<double>(b.size());
    std::size_t i = 0, j = 0;
    double d = 0.0;
    while (i < a.size() && j < b.size()) {
        const double x = std::min(a[i], b[j]);
        while (i < a.size() && a[i] <= x) {
            ++i;
        }
        while (j < b.size() && b[j] <= x) {
            ++j;
        }
        d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
    }
    const double ne = std::sqrt(na * nb / (na + nb));
    const double lambda = (ne + 0.12 + 0.11 / ne) * d;
    if (lambda < 1e-3) {
        return 1.0;
    }
    double p = 0.0;
    for (int k = 1; k <= 100; ++k) {
        p += 2.0 * ((k % 2 == 1) ? 1.0 : -1.0) * std::exp(-2.0 * k * k * lambda * lambda);
    }
    return std::clamp(p, 0.0, 1.0);
}

double mean(const std::vector<double> &v) {
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double stddev(const std::vector<double> &v) {
    const double m = mean(v);
    double s = 0.0;
    for (double x : v) {
        s += (x - m) * (x - m);
    }
    return std::sqrt(s / static_cast<double>(v.size() - 1));
}

double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    return v[v.size() / 2];
}

Outcome haar_bins() {
    std::mt19937_64 rng(20240601);
    Outcome o{true, ""};
    for (int n = 1; n <= 4; ++n) {
        std::vector<double> f;
        for (int i = 0; i < 5000; ++i) {
            const auto a = test::haar_state(rng, n);
            const auto b = test::haar_state(rng, n);
            f.push_back(std::norm(a.dot(b)));
        }
        const double d = kl(histogram(f, 75), haar_bin_probs(n, 75));
        o.pass = o.pass && d < 0.02;
        o.detail += "n=" + std::to_string(n) + " KL=" + fmt(d) + " ";
    }
    return o;
}

Outcome idle_closed_form() {
    Outcome o{true, ""};
    ExprConfig cfg;
    for (int n = 1; n <= 4; ++n) {
        const double e = expressibility(Circuit(n), cfg, BackendModel{}).expr;
        const double want = static_cast<double>((1 << n) - 1) * std::log(75.0);
        o.pass = o.pass && std::abs(e - want) < 1e-9;
        o.detail += "n=" + std::to_string(n) + " expr=" + fmt(e) + " ";
    }
    return o;
}

Outcome transpile_inverse() {
    std::mt19937_64 rng(31);
    const BackendModel routed = preset("synthetic_low");
    double worst_u = 0.0;
    double worst_p = 0.0;
    for (int trial = 0; trial < 200; ++trial) {
        const int n = 1 + trial % 3;
        const Circuit c = test::random_bound_circuit(rng, n, 4 + trial % 12);
        const BackendModel &b = trial % 2 == 0 ? routed : BackendModel{};
        const Circuit t = transpile(c, b);
        const auto perm = test::layout_permutation(t.final_layout, n);
        worst_u = std::max(worst_u, test::phase_distance(test::oracle_unitary(t),
                                                         perm * test::oracle_unitary(c)));

        GenConfig g;
        g.n_qubits = n;
        g.reps = 1 + trial % 3;
        g.seed = static_cast<std::uint64_t>(trial);
        const Circuit pqc = random_pqc(g);
        std::uniform_real_distribution<double> angle(0.0, 2 * test::kPi);
        std::vector<double> theta(pqc.n_params());
        for (auto &x : theta) {
            x = angle(rng);
        }
        const Circuit bound = qexpr::bind(pqc, theta);
        const Circuit cu = transpile(compose(bound, inverse(bound)), b);
        worst_p = std::max(worst_p, std::abs(1.0 - exact_zero_prob(cu)));
    }
    return {worst_u < 1e-9 && worst_p < 1e-10,
            "max phase distance " + fmt(worst_u) + ", max |1-P0| " + fmt(worst_p)};
}

Outcome gradients() {
    ModelConfig cfg;
    cfg.heads = 2;
    cfg.head_dim = 4;
    cfg.mlp_hidden = 8;
    cfg.reg_hidden1 = 8;
    cfg.reg_hidden2 = 4;
    const double h = 1e-5;
    double worst = 0.0;
    double worst_perm = 0.0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        std::mt19937_64 rng(5000 + seed);
        std::normal_distribution<double> nd(0.0, 0.1);
        ModelParams p = ModelParams::init(cfg, seed);
        for (auto &[name, t] : p.tensors()) {
            if (name.find(".b") != std::string::npos) {
                for (Eigen::Index i = 0; i < t->size(); ++i) {
                    t->data()[i] = nd(rng);
                }
            }
        }
        ModelConfig run = cfg;
        run.reverse_edges = seed % 2 == 1;
        std::vector<CircuitGraph> gs;
        for (int i = 0; i < 2; ++i) {
            gs.push_back(test::random_graph(rng, 2 + static_cast<int>(rng() % 5), 5));
        }
        const GraphBatch batch = GraphBatch::build(gs, run.reverse_edges);
        Eigen::VectorXd w(2);
        w << nd(rng) * 10, nd(rng) * 10;
        ForwardCache cache;
        (void)forward(p, run, batch, &cache);
        ModelParams grads = backward(p, run, batch, cache, w);
        auto gt = grads.tensors();
        auto pt = p.tensors();
        for (std::size_t t = 0; t < pt.size(); ++t) {
            Tensor &param = *pt[t].second;
            const Tensor &grad = *gt[t].second;
            for (Eigen::Index i = 0; i < param.size(); ++i) {
                const double keep = param.data()[i];
                param.data()[i] = keep + h;
                const double up = forward(p, run, batch).dot(w);
                param.data()[i] = keep - h;
                const double down = forward(p, run, batch).dot(w);
                param.data()[i] = keep;
                const double fd = (up - down) / (2 * h);
                const double an = grad.data()[i];
                worst = std::max(worst, std::abs(fd - an) /
                                            std::max({std::abs(fd), std::abs(an), 1e-6}));
            }
        }

        const CircuitGraph g = test::random_graph(rng, 12, 20);
        std::vector<int> perm(12);
        std::iota(perm.begin(), perm.end(), 0);
        std::shuffle(perm.begin(), perm.end(), rng);
        const std::vector<CircuitGraph> pair = {g, test::permute_graph(g, perm)};
        const Eigen::VectorXd y = forward(p, run, GraphBatch::build(pair, run.reverse_edges));
        worst_perm = std::max(worst_perm, std::abs(y[0] - y[1]));
    }
    return {worst < 1e-4 && worst_perm < 1e-9,
            "max rel FD error " + fmt(worst) + ", max permutation delta " + fmt(worst_perm)};
}

Outcome layer_monotonicity() {
    std::vector<double> med;
    std::string detail;
    for (int reps = 1; reps <= 3; ++reps) {
        const Circuit c = real_amplitudes(4, reps, Entanglement::Linear);
        std::vector<double> vals;
        for (std::uint64_t seed = 1; seed <= 3; ++seed) {
            ExprConfig cfg;
            cfg.seed = seed;
            vals.push_back(expressibility(c, cfg, BackendModel{}).expr);
        }
        med.push_back(median(vals));
        detail += "reps=" + std::to_string(reps) + " median=" + fmt(med.back()) + " ";
    }
    return {med[0] > med[1] && med[1] > med[2], detail};
}

std::vector<CircuitGraph> cached_corpus(const fs::path &file, int per_qubit, std::uint64_t seed) {
    if (fs::exists(file)) {
        return read_dataset(file.string()).records;
    }
    CorpusConfig cfg;
    cfg.min_qubits = 1;
    cfg.max_qubits = 5;
    cfg.per_qubit = per_qubit;
    cfg.seed = seed;
    const auto t0 = std::chrono::steady_clock::now();
    Corpus corpus = generate_corpus(cfg, BackendModel{}, worker_count());
    std::cerr << "generated " << corpus.records.size() << " records in "
              << std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count()
              << " s\n";
    const fs::path tmp = file.string() + ".tmp";
    write_dataset(tmp.string(), Dataset{default_dataset_header(cfg.to_json()), corpus.records});
    fs::rename(tmp, file);
    return corpus.records;
}

TrainConfig desk_train_config() {
    TrainConfig tc;
    tc.epochs = 150;
    return tc;
}

Outcome desk_training(const std::vector<CircuitGraph> &corpus) {
    const Split sp = split_dataset(corpus, 0.7, 0.1, 0.2, 0);
    const auto result = train(gather(corpus, std::span<const std::size_t>(sp.train)),
                              gather(corpus, std::span<const std::size_t>(sp.val)),
                              desk_train_config());
    const EvalReport rep = evaluate(result.best, gather(corpus, std::span<const std::size_t>(sp.test)));
    std::string detail = "test RMSE " + fmt(rep.rmse) + " (per n:";
    for (const auto &[n, rc] : rep.per_qubit) {
        detail += " " + std::to_string(n) + "=" + fmt(rc.first);
    }
    detail += ", best epoch " + std::to_string(result.best_epoch) + ")";
    return {rep.rmse <= 0.12, detail};
}

Outcome correlation_signs(const std::vector<CircuitGraph> &corpus) {
    const CorrelationResult r = correlation_study(corpus);
    bool pass = true;
    std::string detail;
    for (const char *name : {"depth", "n_param_gates", "count_1q"}) {
        const auto it = std::find(r.names.begin(), r.names.end(), name);
        const double v = r.r_expr[static_cast<std::size_t>(it - r.names.begin())];
        pass = pass && v < -0.2;
        detail += std::string(name) + " r=" + fmt(v) + " ";
    }
    return {pass, detail};
}

Outcome sample_size(const std::vector<CircuitGraph> &pool, const std::vector<CircuitGraph> &test) {
    const std::vector<std::size_t> sizes = {50, 100, 200, 300};
    const auto rows = sample_size_study(pool, test, sizes, desk_train_config());
    std::string detail;
    for (const auto &r : rows) {
        detail += std::to_string(r.per_stratum) + ":" + fmt(r.rmse) + " ";
    }
    return {rows.back().rmse <= rows.front().rmse + 0.02, detail};
}

Outcome extrapolation(const std::vector<CircuitGraph> &corpus) {
    const auto r = extrapolation_study(corpus, 4, desk_train_config());
    return {r.interpolation_rmse <= 0.12,
            "interpolation RMSE " + fmt(r.interpolation_rmse) + ", extrapolation RMSE " +
                fmt(r.extrapolation_rmse)};
}

Outcome noise_pipeline() {
    const Circuit c = real_amplitudes(2, 1, Entanglement::Linear);
    const BackendModel noisy = preset("synthetic_mid");
    std::vector<double> clean, dirty;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        ExprConfig cfg;
        cfg.seed = seed;
        cfg.mode = FidelityMode::Sampled;
        clean.push_back(expressibility(c, cfg, preset("noiseless")).expr);
        cfg.mode = FidelityMode::Noisy;
        dirty.push_back(expressibility(c, cfg, noisy).expr);
    }
    const double sigma = std::max(stddev(clean), stddev(dirty));
    const double gap = std::abs(mean(dirty) - mean(clean));

    ExprConfig a;
    a.num_pairs = 1000;
    a.seed = 101;
    a.mode = FidelityMode::Sampled;
    ExprConfig b = a;
    b.seed = 202;
    b.mode = FidelityMode::Noisy;
    const double p = ks_pvalue(sample_fidelities(c, a, preset("noiseless")),
                               sample_fidelities(c, b, zero_noise(noisy)));
    return {gap > 3.0 * sigma && p > 0.01,
            "noiseless " + fmt(mean(clean)) + ", noisy " + fmt(mean(dirty)) + ", std " +
                fmt(sigma) + ", zero-noise KS p " + fmt(p)};
}

} // namespace

int main(int argc, char **argv) {
    CLI::App app{"qexpr acceptance run"};
    std::string cache_dir = ".";
    std::vector<int> expect_fail, only;
    app.add_option("--cache-dir", cache_dir, "Directory for generated corpora");
    app.add_option("--expect-fail", expect_fail, "Criteria whose failure is reported but tolerated")
        ->delimiter(',');
    app.add_option("--only", only, "Run only these criteria")->delimiter(',');
    CLI11_PARSE(app, argc, argv);

    const fs::path dir(cache_dir);
    fs::create_directories(dir);
    std::vector<CircuitGraph> corpus, holdout;
    auto need_corpus = [&] {
        if (corpus.empty()) {
            corpus = cached_corpus(dir / "acceptance_corpus.jsonl", 300, 7);
        }
        return corpus;
    };
    auto need_holdout = [&] {
        if (holdout.empty()) {
            holdout = cached_corpus(dir / "acceptance_holdout.jsonl", 60, 8);
        }
        return holdout;
    };

    const std::vector<std::pair<int, std::function<Outcome()>>> criteria = {
        {1, haar_bins},
        {2, idle_closed_form},
        {3, transpile_inverse},
        {4, gradients},
        {5, layer_monotonicity},
        {6, [&] { return desk_training(need_corpus()); }},
        {7, [&] { return correlation_signs(need_corpus()); }},
        {8, [&] { return sample_size(need_corpus(), need_holdout()); }},
        {9, [&] { return extrapolation(need_corpus()); }},
        {10, noise_pipeline},
    };

    const std::set<int> tolerated(expect_fail.begin(), expect_fail.end());
    const std::set<int> selected(only.begin(), only.end());
    int unexpected = 0;
    for (const auto &[id, run] : criteria) {
        if (!selected.empty() && !selected.count(id)) {
            continue;
        }
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = run();
        } catch (const std::exception &e) {
            o = {false, std::string("error: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        const bool known = !o.pass && tolerated.count(id);
        unexpected += (!o.pass && !known) ? 1 : 0;
        std::cout << "criterion " << id << ": " << (o.pass ? "PASS" : "FAIL")
                  << (known ? " (expected)" : "") << "  " << o.detail << " [" << fmt(secs)
                  << " s]" << std::endl;
    }
    return unexpected == 0 ? 0 : 1;
}
