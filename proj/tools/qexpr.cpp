// qexpr: dataset generation, training, evaluation and studies.

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "qexpr/backend.hpp"
#include "qexpr/error.hpp"
#include "qexpr/expressibility.hpp"
#include "qexpr/gnn.hpp"
#include "qexpr/graphenc.hpp"
#include "qexpr/pqcgen.hpp"
#include "qexpr/studies.hpp"
#include "qexpr/version.hpp"

using nlohmann::json;
using namespace qexpr;

namespace {

struct Manifest {
    std::string command;
    std::vector<std::string> argv;
    json config = json::object();
    std::uint64_t seed = 0;
    json inputs = json::array();
    json outputs = json::array();
    std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
    std::time_t started_at = std::time(nullptr);

    void write(const std::string &artifact) const {
        char stamp[32];
        std::strftime(stamp, sizeof stamp, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&started_at));
        const json j = {
            {"command", command},
            {"argv", argv},
            {"config", config},
            {"seed", seed},
            {"inputs", inputs},
            {"outputs", outputs},
            {"tool_version", kVersion},
            {"started_at", stamp},
            {"wall_clock_s",
             std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count()}};
        std::ofstream out(artifact + ".manifest.json");
        if (!out) {
            throw Error(ErrorKind::Io, "cannot write manifest for " + artifact);
        }
        out << j.dump(2) << '\n';
    }
};

std::pair<int, int> parse_range(const std::string &s) {
    const auto dots = s.find("..");
    try {
        if (dots == std::string::npos) {
            const int v = std::stoi(s);
            return {v, v};
        }
        return {std::stoi(s.substr(0, dots)), std::stoi(s.substr(dots + 2))};
    } catch (const std::exception &) {
        throw Error(ErrorKind::Validation, "bad qubit range '" + s + "', expected a..b");
    }
}

std::array<double, 3> parse_split(const std::string &s) {
    std::array<double, 3> f{};
    std::stringstream ss(s);
    std::string part;
    int i = 0;
    while (std::getline(ss, part, '/')) {
        if (i == 3) {
            i = 4;
            break;
        }
        try {
            f[i++] = std::stod(part);
        } catch (const std::exception &) {
            i = 4;
            break;
        }
    }
    const double total = f[0] + f[1] + f[2];
    if (i != 3 || total <= 0.0) {
        throw Error(ErrorKind::Validation, "bad split '" + s + "', expected e.g. 70/10/20");
    }
    return {f[0] / total, f[1] / total, f[2] / total};
}

Circuit load_circuit_arg(const std::string &arg) {
    if (std::filesystem::exists(arg)) {
        return load_circuit_file(arg);
    }
    return circuit_library(arg);
}

void check_schema(const Dataset &ds) {
    if (ds.header.value("node_dim", 0) != kNodeDim) {
        throw Error(ErrorKind::Schema, "dataset node_dim does not match this build");
    }
}

std::vector<CircuitGraph> labeled(const Dataset &ds) {
    for (const auto &r : ds.records) {
        if (!r.label) {
            throw Error(ErrorKind::Validation, "record " + r.id + " has no label");
        }
    }
    return ds.records;
}

void add_train_options(CLI::App *cmd, TrainConfig &tc, ModelConfig &mc) {
    cmd->add_option("--epochs", tc.epochs, "Training epochs")->capture_default_str();
    cmd->add_option("--lr", tc.lr, "Initial learning rate")->capture_default_str();
    cmd->add_option("--weight-decay", tc.weight_decay, "Coupled L2 weight decay")
        ->capture_default_str();
    cmd->add_option("--batch-size", tc.batch_size, "Mini-batch size")->capture_default_str();
    cmd->add_option("--patience", tc.plateau.patience, "Plateau patience (epochs)")
        ->capture_default_str();
    cmd->add_option("--seed", tc.seed, "Master seed")->capture_default_str();
    cmd->add_flag("--reverse-edges", mc.reverse_edges, "Also attend along reversed edges");
}

void print_epoch(const EpochMetrics &m) {
    std::cerr << "epoch " << m.epoch << " train_loss " << m.train_loss << " val_loss "
              << m.val_loss << " lr " << m.lr << '\n';
}

} // namespace

int main(int argc, char **argv) {
    CLI::App app{"Expressibility of parameterized quantum circuits: ground truth and "
                 "graph-transformer prediction"};
    app.set_version_flag("--version", std::string(kVersion));
    app.require_subcommand(1);
    Manifest manifest;
    manifest.argv.assign(argv, argv + argc);

    // generate
    auto *gen = app.add_subcommand("generate", "Generate a labeled random-PQC graph dataset");
    std::string qubits = "1..5", backend_name = "noiseless", mode = "exact", out;
    CorpusConfig cc;
    int workers = 0;
    gen->add_option("--qubits", qubits, "Qubit range a..b")->capture_default_str();
    gen->add_option("--per-qubit", cc.per_qubit, "Circuits per qubit count")
        ->capture_default_str();
    gen->add_option("--reps-max", cc.reps_max, "Maximum repetitions (1..3)")
        ->capture_default_str();
    gen->add_option("--backend", backend_name, "Preset name or profile JSON path")
        ->capture_default_str();
    gen->add_option("--pairs", cc.expr.num_pairs, "Parameter pairs per circuit")
        ->capture_default_str();
    gen->add_option("--bins", cc.expr.n_bins, "Histogram bins")->capture_default_str();
    gen->add_option("--mode", mode, "exact | sampled | noisy")->capture_default_str();
    gen->add_option("--shots", cc.expr.shots, "Shots per pair (sampled/noisy)")
        ->capture_default_str();
    gen->add_option("--seed", cc.seed, "Master seed")->capture_default_str();
    gen->add_option("--workers", workers, "Worker threads (default: QEXPR_WORKERS or cores)");
    gen->add_option("--out", out, "Output JSONL path")->required();

    // train
    auto *tr = app.add_subcommand("train", "Train the expressibility regressor");
    std::string data, split = "70/10/20", metrics;
    TrainConfig tc;
    ModelConfig mc;
    tr->add_option("--data", data, "Dataset JSONL")->required();
    tr->add_option("--split", split, "train/val/test percentages")->capture_default_str();
    tr->add_option("--out", out, "Checkpoint path")->required();
    tr->add_option("--metrics", metrics, "Metrics CSV (default <out>.metrics.csv)");
    add_train_options(tr, tc, mc);

    // eval
    auto *ev = app.add_subcommand("eval", "RMSE of a checkpoint on a dataset");
    std::string ckpt, part = "all", predictions_csv, per_qubit_csv;
    std::uint64_t split_seed = 0;
    ev->add_option("--data", data, "Dataset JSONL")->required();
    ev->add_option("--ckpt", ckpt, "Checkpoint")->required();
    ev->add_option("--part", part, "all | train | val | test")->capture_default_str();
    ev->add_option("--split", split, "Split used with --part")->capture_default_str();
    ev->add_option("--seed", split_seed, "Split seed used with --part")->capture_default_str();
    ev->add_option("--predictions", predictions_csv, "Write per-record predictions CSV");
    ev->add_option("--per-qubit", per_qubit_csv, "Write per-qubit-count RMSE CSV");

    // predict
    auto *pr = app.add_subcommand("predict", "Predict the expressibility of one circuit");
    std::string circuit_arg;
    std::uint64_t encode_seed = 0;
    pr->add_option("--ckpt", ckpt, "Checkpoint")->required();
    pr->add_option("--circuit", circuit_arg, "Circuit file (.json/.qasm) or library name")
        ->required();
    pr->add_option("--backend", backend_name, "Backend used for encoding")->capture_default_str();
    pr->add_option("--seed", encode_seed, "Seed for the encoding parameter draw")
        ->capture_default_str();

    // expr
    auto *ex = app.add_subcommand("expr", "Ground-truth expressibility of one circuit");
    ExprConfig ec;
    ex->add_option("--circuit", circuit_arg, "Circuit file (.json/.qasm) or library name")
        ->required();
    ex->add_option("--backend", backend_name, "Preset name or profile JSON path")
        ->capture_default_str();
    ex->add_option("--pairs", ec.num_pairs, "Parameter pairs")->capture_default_str();
    ex->add_option("--bins", ec.n_bins, "Histogram bins")->capture_default_str();
    ex->add_option("--mode", mode, "exact | sampled | noisy")->capture_default_str();
    ex->add_option("--shots", ec.shots, "Shots per pair")->capture_default_str();
    ex->add_option("--seed", ec.seed, "Seed")->capture_default_str();

    // studies
    auto *corr = app.add_subcommand("study-correlation",
                                    "Pearson r of global features against expressibility");
    std::string matrix_out;
    corr->add_option("--data", data, "Dataset JSONL")->required();
    corr->add_option("--out", out, "Feature-vs-label CSV")->required();
    corr->add_option("--matrix", matrix_out, "Pairwise matrix CSV (default <out>.matrix.csv)");

    auto *ss = app.add_subcommand("study-samplesize", "Test RMSE against training size");
    std::string test_data;
    std::vector<std::size_t> sizes = {50, 100, 200, 300};
    ss->add_option("--data", data, "Training pool JSONL")->required();
    ss->add_option("--test-data", test_data, "Fixed test JSONL")->required();
    ss->add_option("--sizes", sizes, "Records per qubit count")->delimiter(',')
        ->capture_default_str();
    ss->add_option("--out", out, "Output CSV")->required();
    add_train_options(ss, tc, mc);

    auto *xp = app.add_subcommand("study-extrapolation",
                                  "Train on small circuits, score larger ones");
    int train_max = 4;
    xp->add_option("--data", data, "Dataset JSONL")->required();
    xp->add_option("--train-max-qubits", train_max, "Largest qubit count used for training")
        ->capture_default_str();
    xp->add_option("--out", out, "Output CSV")->required();
    add_train_options(xp, tc, mc);

    auto *bk = app.add_subcommand("backend", "Print a backend profile as JSON");
    bk->add_option("name", backend_name, "Preset name or profile path")->capture_default_str();
    bool list = false;
    bk->add_flag("--list", list, "List preset names");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp &e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp &e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion &e) {
        return app.exit(e);
    } catch (const CLI::ParseError &e) {
        std::cerr << json{{"error", "Usage"}, {"message", e.what()}}.dump() << '\n';
        return 2;
    }

    try {
        if (*gen) {
            manifest.command = "generate";
            const auto [lo, hi] = parse_range(qubits);
            cc.min_qubits = lo;
            cc.max_qubits = hi;
            cc.expr.mode = fidelity_mode_from(mode);
            const BackendModel backend = resolve_backend(backend_name);
            const int nw = workers > 0 ? workers : worker_count();
            const Corpus corpus = generate_corpus(cc, backend, nw, [](const std::string &msg) {
                if (msg.find("failed") != std::string::npos) {
                    std::cerr << msg << '\n';
                }
            });
            json extra = {{"generator", cc.to_json()}, {"backend", backend.id}};
            write_dataset(out, Dataset{default_dataset_header(extra), corpus.records});
            manifest.config = cc.to_json();
            manifest.config["backend"] = backend_name;
            manifest.config["workers"] = nw;
            manifest.seed = cc.seed;
            manifest.outputs = {out};
            manifest.write(out);
            std::cout << json{{"records", corpus.records.size()},
                              {"failures", corpus.failures.size()},
                              {"out", out}}
                             .dump()
                      << '\n';
        } else if (*tr) {
            manifest.command = "train";
            const Dataset ds = read_dataset(data);
            check_schema(ds);
            const auto records = labeled(ds);
            const auto f = parse_split(split);
            const Split sp = split_dataset(records, f[0], f[1], f[2], tc.seed);
            for (const auto &w : sp.warnings) {
                std::cerr << "warning: " << w << '\n';
            }
            if (metrics.empty()) {
                metrics = out + ".metrics.csv";
            }
            const auto result = train(gather(records, std::span<const std::size_t>(sp.train)),
                                      gather(records, std::span<const std::size_t>(sp.val)),
                                      tc, mc, out, print_epoch);
            write_metrics_csv(metrics, result.metrics);
            json summary = {{"best_epoch", result.best_epoch},
                            {"best_val_loss", result.best_val_loss},
                            {"n_train", sp.train.size()},
                            {"n_val", sp.val.size()},
                            {"n_test", sp.test.size()}};
            if (!sp.test.empty()) {
                summary["test_rmse"] =
                    evaluate(result.best, gather(records, std::span<const std::size_t>(sp.test)))
                        .rmse;
            }
            manifest.config = {{"train", tc.to_json()}, {"model", mc.to_json()}, {"split", split}};
            manifest.seed = tc.seed;
            manifest.inputs = {data};
            manifest.outputs = {out, metrics};
            manifest.write(out);
            std::cout << summary.dump() << '\n';
        } else if (*ev) {
            manifest.command = "eval";
            const Dataset ds = read_dataset(data);
            check_schema(ds);
            auto records = labeled(ds);
            const Model model = load_checkpoint(ckpt);
            if (part != "all") {
                const auto f = parse_split(split);
                const Split sp = split_dataset(records, f[0], f[1], f[2], split_seed);
                const auto &idx = part == "train" ? sp.train
                                  : part == "val" ? sp.val
                                  : part == "test"
                                      ? sp.test
                                      : throw Error(ErrorKind::Validation, "unknown part " + part);
                records = gather(records, std::span<const std::size_t>(idx));
            }
            const EvalReport rep = evaluate(model, records);
            json per_qubit = json::object();
            for (const auto &[n, rc] : rep.per_qubit) {
                per_qubit[std::to_string(n)] = {{"rmse", rc.first}, {"count", rc.second}};
            }
            if (!predictions_csv.empty()) {
                write_predictions_csv(predictions_csv, records, rep);
                manifest.outputs.push_back(predictions_csv);
            }
            if (!per_qubit_csv.empty()) {
                write_per_qubit_csv(per_qubit_csv, rep);
                manifest.outputs.push_back(per_qubit_csv);
            }
            manifest.config = {{"part", part}, {"split", split}};
            manifest.seed = split_seed;
            manifest.inputs = {data, ckpt};
            for (const auto &o : manifest.outputs) {
                manifest.write(o.get<std::string>());
            }
            std::cout << json{{"rmse", rep.rmse}, {"count", records.size()},
                              {"per_qubit", per_qubit}}
                             .dump()
                      << '\n';
        } else if (*pr) {
            const Model model = load_checkpoint(ckpt);
            const Circuit circuit = load_circuit_arg(circuit_arg);
            CircuitGraph g = encode_circuit(circuit, resolve_backend(backend_name), encode_seed);
            std::cout << predict(model, {g}).front() << '\n';
        } else if (*ex) {
            ec.mode = fidelity_mode_from(mode);
            const Circuit circuit = load_circuit_arg(circuit_arg);
            const auto r = expressibility(circuit, ec, resolve_backend(backend_name));
            std::cout << r.to_json().dump() << '\n';
        } else if (*corr) {
            manifest.command = "study-correlation";
            const Dataset ds = read_dataset(data);
            check_schema(ds);
            const auto res = correlation_study(labeled(ds));
            if (matrix_out.empty()) {
                matrix_out = out + ".matrix.csv";
            }
            write_correlation_csv(out, res);
            write_correlation_matrix_csv(matrix_out, res);
            manifest.inputs = {data};
            manifest.outputs = {out, matrix_out};
            manifest.write(out);
            json r = json::object();
            for (std::size_t i = 0; i < res.r_expr.size(); ++i) {
                r[res.names[i]] = res.r_expr[i];
            }
            std::cout << r.dump() << '\n';
        } else if (*ss) {
            manifest.command = "study-samplesize";
            const Dataset pool = read_dataset(data);
            const Dataset test = read_dataset(test_data);
            check_schema(pool);
            check_schema(test);
            const auto rows =
                sample_size_study(labeled(pool), labeled(test), sizes, tc, mc);
            std::ofstream csv(out);
            if (!csv) {
                throw Error(ErrorKind::Io, "cannot write " + out);
            }
            csv.precision(17);
            csv << "per_stratum,train_size,rmse\n";
            for (const auto &r : rows) {
                csv << r.per_stratum << ',' << r.train_size << ',' << r.rmse << '\n';
            }
            manifest.config = {{"train", tc.to_json()}, {"model", mc.to_json()}, {"sizes", sizes}};
            manifest.seed = tc.seed;
            manifest.inputs = {data, test_data};
            manifest.outputs = {out};
            manifest.write(out);
        } else if (*xp) {
            manifest.command = "study-extrapolation";
            const Dataset ds = read_dataset(data);
            check_schema(ds);
            const auto res = extrapolation_study(labeled(ds), train_max, tc, mc);
            std::ofstream csv(out);
            if (!csv) {
                throw Error(ErrorKind::Io, "cannot write " + out);
            }
            csv.precision(17);
            csv << "n_qubits,count,rmse,regime\n";
            for (const auto &r : res.rows) {
                csv << r.n_qubits << ',' << r.count << ',' << r.rmse << ','
                    << (r.interpolation ? "interpolation" : "extrapolation") << '\n';
            }
            manifest.config = {{"train", tc.to_json()},
                               {"model", mc.to_json()},
                               {"train_max_qubits", train_max}};
            manifest.seed = tc.seed;
            manifest.inputs = {data};
            manifest.outputs = {out};
            manifest.write(out);
            std::cout << json{{"interpolation_rmse", res.interpolation_rmse},
                              {"extrapolation_rmse", res.extrapolation_rmse}}
                             .dump()
                      << '\n';
        } else if (*bk) {
            if (list) {
                std::cout << json(preset_names()).dump() << '\n';
            } else {
                std::cout << resolve_backend(backend_name).to_json().dump(2) << '\n';
            }
        }
    } catch (const Error &e) {
        std::cerr << json{{"error", std::string(to_string(e.kind()))}, {"message", e.what()}}.dump()
                  << '\n';
        return 1;
    } catch (const std::exception &e) {
        std::cerr << json{{"error", "Internal"}, {"message", e.what()}}.dump() << '\n';
        return 1;
    }
    return 0;
}
