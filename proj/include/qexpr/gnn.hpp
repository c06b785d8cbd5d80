#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "qexpr/graphenc.hpp"

namespace qexpr {

using Tensor = Eigen::MatrixXd;

inline constexpr int kCheckpointVersion = 1;

struct ModelConfig {
    int node_dim = kNodeDim;
    int global_dim = kGlobalDim;
    int heads = 4;
    int head_dim = 16;
    int mlp_hidden = 64;
    int reg_hidden1 = 64;
    int reg_hidden2 = 32;
    /// Also attend along reversed circuit edges.
    bool reverse_edges = false;

    [[nodiscard]] int hidden() const noexcept { return heads * head_dim; }
    void validate() const;
    nlohmann::json to_json() const;
    static ModelConfig from_json(const nlohmann::json &j);
    bool operator==(const ModelConfig &) const = default;
};

struct ConvLayer {
    Tensor w_query, b_query, w_key, b_key, w_value, b_value, w_skip, b_skip;
};

struct Dense {
    Tensor w, b; // w: in x out, b: 1 x out
};

struct ModelParams {
    std::array<ConvLayer, 3> conv;
    std::array<Dense, 3> global_mlp;
    std::array<Dense, 3> head;

    /// Every tensor with a stable name, in a fixed order.
    std::vector<std::pair<std::string, Tensor *>> tensors();
    std::vector<std::pair<std::string, const Tensor *>> tensors() const;

    /// Glorot-uniform weights, zero biases.
    static ModelParams init(const ModelConfig &cfg, std::uint64_t seed);
    static ModelParams zeros(const ModelConfig &cfg);
    [[nodiscard]] std::size_t size() const;
    bool operator==(const ModelParams &other) const;
};

/// In-neighbour lists (CSR) including each node itself; duplicate edges
/// are kept.
struct Adjacency {
    std::vector<int> offsets; // n_nodes + 1
    std::vector<int> sources;

    static Adjacency build(int n_nodes, std::span<const Edge> edges, bool reverse);
    [[nodiscard]] int n_nodes() const noexcept {
        return static_cast<int>(offsets.size()) - 1;
    }
};

/// Several graphs stacked into one node matrix.
struct GraphBatch {
    Tensor x;                       // total_nodes x node_dim
    Tensor global;                  // n_graphs x global_dim
    std::vector<int> graph_offsets; // n_graphs + 1
    Adjacency adj;

    static GraphBatch build(std::span<const CircuitGraph *const> graphs, bool reverse);
    static GraphBatch build(std::span<const CircuitGraph> graphs, bool reverse);
    [[nodiscard]] int n_graphs() const noexcept {
        return static_cast<int>(graph_offsets.size()) - 1;
    }
};

struct ConvCache {
    Tensor x, q, k, v;
    Tensor alpha; // heads x adj.sources.size()
};

/// Graph-transformer convolution: per head softmax attention over the
/// in-neighbourhood, heads concatenated, plus a linear skip term.
Tensor transformer_conv(const Tensor &x, const Adjacency &adj, const ConvLayer &p,
                        int heads, int head_dim, ConvCache *cache = nullptr);

/// Accumulates parameter gradients into `grad` and returns d/dx.
Tensor transformer_conv_backward(const Tensor &d_out, const Adjacency &adj,
                                 const ConvLayer &p, int heads, int head_dim,
                                 const ConvCache &cache, ConvLayer &grad);

Tensor global_mean_pool(const Tensor &x, std::span<const int> graph_offsets);

struct ForwardCache {
    std::array<ConvCache, 3> conv;
    std::array<Tensor, 3> conv_out; // pre-activation
    std::array<Tensor, 3> global_pre;
    std::array<Tensor, 3> head_pre;
    Tensor global_in;
    Tensor fused;
};

Eigen::VectorXd forward(const ModelParams &params, const ModelConfig &cfg,
                        const GraphBatch &batch, ForwardCache *cache = nullptr);

/// Gradients of sum_i d_pred[i] * pred[i] w.r.t. every parameter.
ModelParams backward(const ModelParams &params, const ModelConfig &cfg,
                     const GraphBatch &batch, const ForwardCache &cache,
                     const Eigen::VectorXd &d_pred);

double huber_loss(std::span<const double> pred, std::span<const double> target,
                  double delta = 1.0);
/// d loss / d pred for the batch-mean Huber loss.
Eigen::VectorXd huber_grad(std::span<const double> pred,
                           std::span<const double> target, double delta = 1.0);

struct PlateauConfig {
    double factor = 0.1;
    int patience = 10;
    double min_lr = 1e-7;
    double threshold = 1e-4; // relative
};

struct TrainConfig {
    double lr = 1e-4;
    double weight_decay = 1e-6;
    int epochs = 300;
    std::size_t batch_size = 1500;
    double huber_delta = 1.0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    PlateauConfig plateau;
    std::uint64_t seed = 0;

    void validate() const;
    nlohmann::json to_json() const;
    static TrainConfig from_json(const nlohmann::json &j);
};

struct AdamState {
    ModelParams m;
    ModelParams v;
    std::uint64_t t = 0;

    static AdamState zeros(const ModelConfig &cfg);
};

/// One Adam step; `weight_decay * w` is added to each gradient first.
void adam_step(ModelParams &params, const ModelParams &grads, AdamState &state,
               double lr, const TrainConfig &cfg);

/// Reduce-on-plateau for a minimized metric with a relative threshold.
class PlateauScheduler {
  public:
    PlateauScheduler(double lr, PlateauConfig cfg);
    /// Returns the learning rate to use for the next epoch.
    double step(double metric);
    [[nodiscard]] double lr() const noexcept { return lr_; }

  private:
    double lr_;
    PlateauConfig cfg_;
    double best_;
    int bad_epochs_ = 0;
};

struct Model {
    ModelConfig config;
    ModelParams params;
    FeatureStats stats;
    TrainConfig train_config;
    nlohmann::json info = nlohmann::json::object();
};

struct EpochMetrics {
    int epoch = 0;
    double train_loss = 0.0;
    double val_loss = 0.0;
    double lr = 0.0;
};

struct TrainResult {
    Model best;
    std::vector<EpochMetrics> metrics;
    int best_epoch = 0;
    double best_val_loss = 0.0;
};

/// Fits normalization stats on `train`, trains, and keeps the parameters
/// with the lowest validation loss. When `checkpoint_path` is non-empty the
/// best model is written there on each improvement.
TrainResult train(const std::vector<CircuitGraph> &train_set,
                  const std::vector<CircuitGraph> &val_set, const TrainConfig &cfg,
                  const ModelConfig &model_cfg = {},
                  const std::string &checkpoint_path = {},
                  const std::function<void(const EpochMetrics &)> &on_epoch = {});

/// Predictions for raw (unnormalized) graphs.
std::vector<double> predict(const Model &model, const std::vector<CircuitGraph> &graphs);

double rmse(std::span<const double> pred, std::span<const double> target);

nlohmann::json model_to_json(const Model &model);
Model model_from_json(const nlohmann::json &j,
                      const std::optional<ModelConfig> &expected = std::nullopt);
void save_checkpoint(const std::string &path, const Model &model);
Model load_checkpoint(const std::string &path,
                      const std::optional<ModelConfig> &expected = std::nullopt);

void write_metrics_csv(const std::string &path, const std::vector<EpochMetrics> &rows);

} // namespace qexpr
