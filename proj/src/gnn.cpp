#include "qexpr/gnn.hpp"

#include <algorithm>
#include <cstdio>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>

#include "qexpr/error.hpp"
#include "qexpr/rng.hpp"

namespace qexpr {

using nlohmann::json;

void ModelConfig::validate() const {
    if (node_dim < 1 || global_dim < 1 || heads < 1 || head_dim < 1 || mlp_hidden < 1 ||
        reg_hidden1 < 1 || reg_hidden2 < 1) {
        throw Error(ErrorKind::Validation, "model dimensions must be positive");
    }
}

json ModelConfig::to_json() const {
    return {{"node_dim", node_dim},       {"global_dim", global_dim},
            {"heads", heads},             {"head_dim", head_dim},
            {"mlp_hidden", mlp_hidden},   {"reg_hidden1", reg_hidden1},
            {"reg_hidden2", reg_hidden2}, {"reverse_edges", reverse_edges}};
}

ModelConfig ModelConfig::from_json(const json &j) {
    ModelConfig c;
    c.node_dim = j.at("node_dim").get<int>();
    c.global_dim = j.at("global_dim").get<int>();
    c.heads = j.at("heads").get<int>();
    c.head_dim = j.at("head_dim").get<int>();
    c.mlp_hidden = j.at("mlp_hidden").get<int>();
    c.reg_hidden1 = j.at("reg_hidden1").get<int>();
    c.reg_hidden2 = j.at("reg_hidden2").get<int>();
    c.reverse_edges = j.value("reverse_edges", false);
    c.validate();
    return c;
}

namespace {

template <class P, class T>
std::vector<std::pair<std::string, T *>> list_tensors(P &p) {
    std::vector<std::pair<std::string, T *>> out;
    for (std::size_t l = 0; l < p.conv.size(); ++l) {
        auto &c = p.conv[l];
        const std::string pre = "conv" + std::to_string(l + 1) + ".";
        out.emplace_back(pre + "w_query", &c.w_query);
        out.emplace_back(pre + "b_query", &c.b_query);
        out.emplace_back(pre + "w_key", &c.w_key);
        out.emplace_back(pre + "b_key", &c.b_key);
        out.emplace_back(pre + "w_value", &c.w_value);
        out.emplace_back(pre + "b_value", &c.b_value);
        out.emplace_back(pre + "w_skip", &c.w_skip);
        out.emplace_back(pre + "b_skip", &c.b_skip);
    }
    for (std::size_t l = 0; l < p.global_mlp.size(); ++l) {
        const std::string pre = "global" + std::to_string(l + 1) + ".";
        out.emplace_back(pre + "w", &p.global_mlp[l].w);
        out.emplace_back(pre + "b", &p.global_mlp[l].b);
    }
    for (std::size_t l = 0; l < p.head.size(); ++l) {
        const std::string pre = "head" + std::to_string(l + 1) + ".";
        out.emplace_back(pre + "w", &p.head[l].w);
        out.emplace_back(pre + "b", &p.head[l].b);
    }
    return out;
}

Dense zero_dense(int in, int out) {
    return {Tensor::Zero(in, out), Tensor::Zero(1, out)};
}

ConvLayer zero_conv(int in, int hidden) {
    ConvLayer c;
    for (Tensor *w : {&c.w_query, &c.w_key, &c.w_value, &c.w_skip}) {
        *w = Tensor::Zero(in, hidden);
    }
    for (Tensor *b : {&c.b_query, &c.b_key, &c.b_value, &c.b_skip}) {
        *b = Tensor::Zero(1, hidden);
    }
    return c;
}

} // namespace

std::vector<std::pair<std::string, Tensor *>> ModelParams::tensors() {
    return list_tensors<ModelParams, Tensor>(*this);
}

std::vector<std::pair<std::string, const Tensor *>> ModelParams::tensors() const {
    return list_tensors<const ModelParams, const Tensor>(*this);
}

ModelParams ModelParams::zeros(const ModelConfig &cfg) {
    cfg.validate();
    const int h = cfg.hidden();
    ModelParams p;
    p.conv[0] = zero_conv(cfg.node_dim, h);
    p.conv[1] = zero_conv(h, h);
    p.conv[2] = zero_conv(h, h);
    p.global_mlp[0] = zero_dense(cfg.global_dim, cfg.mlp_hidden);
    p.global_mlp[1] = zero_dense(cfg.mlp_hidden, cfg.mlp_hidden);
    p.global_mlp[2] = zero_dense(cfg.mlp_hidden, cfg.mlp_hidden);
    p.head[0] = zero_dense(h + cfg.mlp_hidden, cfg.reg_hidden1);
    p.head[1] = zero_dense(cfg.reg_hidden1, cfg.reg_hidden2);
    p.head[2] = zero_dense(cfg.reg_hidden2, 1);
    return p;
}

ModelParams ModelParams::init(const ModelConfig &cfg, std::uint64_t seed) {
    ModelParams p = zeros(cfg);
    const Rng master(seed);
    std::uint64_t index = 0;
    for (auto &[name, t] : p.tensors()) {
        Rng rng = master.derive({index++});
        if (t->rows() == 1 && name.find(".b") != std::string::npos) {
            continue;
        }
        const double a = std::sqrt(6.0 / static_cast<double>(t->rows() + t->cols()));
        for (Eigen::Index c = 0; c < t->cols(); ++c) {
            for (Eigen::Index r = 0; r < t->rows(); ++r) {
                (*t)(r, c) = a * (2.0 * rng.uniform() - 1.0);
            }
        }
    }
    return p;
}

std::size_t ModelParams::size() const {
    std::size_t n = 0;
    for (const auto &[name, t] : tensors()) {
        n += static_cast<std::size_t>(t->size());
    }
    return n;
}

bool ModelParams::operator==(const ModelParams &other) const {
    const auto a = tensors();
    const auto b = other.tensors();
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a[i].second->rows() != b[i].second->rows() ||
            a[i].second->cols() != b[i].second->cols() || *a[i].second != *b[i].second) {
            return false;
        }
    }
    return true;
}

Adjacency Adjacency::build(int n_nodes, std::span<const Edge> edges, bool reverse) {
    std::vector<int> indeg(static_cast<std::size_t>(n_nodes), 1);
    for (const auto &[s, t] : edges) {
        if (s < 0 || t < 0 || s >= n_nodes || t >= n_nodes) {
            throw Error(ErrorKind::Validation, "edge references invalid node");
        }
        ++indeg[t];
        if (reverse) {
            ++indeg[s];
        }
    }
    Adjacency adj;
    adj.offsets.assign(static_cast<std::size_t>(n_nodes) + 1, 0);
    for (int i = 0; i < n_nodes; ++i) {
        adj.offsets[i + 1] = adj.offsets[i] + indeg[i];
    }
    adj.sources.resize(static_cast<std::size_t>(adj.offsets.back()));
    std::vector<int> fill(adj.offsets.begin(), adj.offsets.end() - 1);
    for (int i = 0; i < n_nodes; ++i) {
        adj.sources[fill[i]++] = i;
    }
    for (const auto &[s, t] : edges) {
        adj.sources[fill[t]++] = s;
        if (reverse) {
            adj.sources[fill[s]++] = t;
        }
    }
    return adj;
}

GraphBatch GraphBatch::build(std::span<const CircuitGraph *const> graphs, bool reverse) {
    if (graphs.empty()) {
        throw Error(ErrorKind::Validation, "empty batch");
    }
    GraphBatch b;
    b.graph_offsets.push_back(0);
    for (const auto *g : graphs) {
        if (g->n_nodes() == 0) {
            throw Error(ErrorKind::Validation, "graph " + g->id + " has no nodes");
        }
        b.graph_offsets.push_back(b.graph_offsets.back() + g->n_nodes());
    }
    const int cols = static_cast<int>(graphs.front()->nodes.cols());
    b.x.resize(b.graph_offsets.back(), cols);
    b.global.resize(static_cast<Eigen::Index>(graphs.size()), graphs.front()->global.size());
    std::vector<Edge> edges;
    for (std::size_t i = 0; i < graphs.size(); ++i) {
        const auto &g = *graphs[i];
        if (g.nodes.cols() != cols || g.global.size() != b.global.cols()) {
            throw Error(ErrorKind::Validation, "feature width mismatch in batch");
        }
        const int off = b.graph_offsets[i];
        b.x.middleRows(off, g.n_nodes()) = g.nodes;
        b.global.row(static_cast<Eigen::Index>(i)) = g.global;
        for (const auto &[s, t] : g.edges) {
            if (s < 0 || t < 0 || s >= g.n_nodes() || t >= g.n_nodes()) {
                throw Error(ErrorKind::Validation, "edge references invalid node");
            }
            edges.push_back({s + off, t + off});
        }
    }
    b.adj = Adjacency::build(b.graph_offsets.back(), edges, reverse);
    return b;
}

GraphBatch GraphBatch::build(std::span<const CircuitGraph> graphs, bool reverse) {
    std::vector<const CircuitGraph *> ptrs;
    for (const auto &g : graphs) {
        ptrs.push_back(&g);
    }
    return build(std::span<const CircuitGraph *const>(ptrs), reverse);
}

namespace {

void check_shape(const Tensor &t, Eigen::Index rows, Eigen::Index cols, const char *what) {
    if (t.rows() != rows || t.cols() != cols) {
        throw Error(ErrorKind::Validation, std::string("shape mismatch in ") + what);
    }
}

Tensor affine(const Tensor &x, const Tensor &w, const Tensor &b) {
    Tensor y = x * w;
    y.rowwise() += b.row(0);
    return y;
}

Tensor relu(const Tensor &x) { return x.cwiseMax(0.0); }

Tensor relu_mask(const Tensor &grad, const Tensor &pre) {
    return (pre.array() > 0.0).select(grad, 0.0);
}

void dense_backward(const Tensor &in, const Tensor &d_out, Dense &grad) {
    grad.w.noalias() += in.transpose() * d_out;
    grad.b += d_out.colwise().sum();
}

} // namespace

Tensor transformer_conv(const Tensor &x, const Adjacency &adj, const ConvLayer &p,
                        int heads, int head_dim, ConvCache *cache) {
    const int hidden = heads * head_dim;
    const auto din = x.cols();
    if (x.rows() != adj.n_nodes()) {
        throw Error(ErrorKind::Validation, "node count differs from adjacency");
    }
    check_shape(p.w_query, din, hidden, "w_query");
    check_shape(p.w_key, din, hidden, "w_key");
    check_shape(p.w_value, din, hidden, "w_value");
    check_shape(p.w_skip, din, hidden, "w_skip");
    check_shape(p.b_query, 1, hidden, "b_query");
    check_shape(p.b_key, 1, hidden, "b_key");
    check_shape(p.b_value, 1, hidden, "b_value");
    check_shape(p.b_skip, 1, hidden, "b_skip");

    // Row-major copies keep per-node head slices contiguous.
    using RowTensor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    const RowTensor q = affine(x, p.w_query, p.b_query);
    const RowTensor k = affine(x, p.w_key, p.b_key);
    const RowTensor v = affine(x, p.w_value, p.b_value);
    RowTensor out = affine(x, p.w_skip, p.b_skip);
    const double scale = 1.0 / std::sqrt(static_cast<double>(head_dim));
    Tensor alpha(heads, static_cast<Eigen::Index>(adj.sources.size()));
    for (int i = 0; i < adj.n_nodes(); ++i) {
        const int beg = adj.offsets[i];
        const int end = adj.offsets[i + 1];
        for (int h = 0; h < heads; ++h) {
            const int c0 = h * head_dim;
            const auto qi = q.row(i).segment(c0, head_dim);
            double top = -std::numeric_limits<double>::infinity();
            for (int e = beg; e < end; ++e) {
                const double s = qi.dot(k.row(adj.sources[e]).segment(c0, head_dim)) * scale;
                alpha(h, e) = s;
                top = std::max(top, s);
            }
            double z = 0.0;
            for (int e = beg; e < end; ++e) {
                alpha(h, e) = std::exp(alpha(h, e) - top);
                z += alpha(h, e);
            }
            auto oi = out.row(i).segment(c0, head_dim);
            for (int e = beg; e < end; ++e) {
                alpha(h, e) /= z;
                oi += alpha(h, e) * v.row(adj.sources[e]).segment(c0, head_dim);
            }
        }
    }
    if (cache) {
        cache->x = x;
        cache->q = q;
        cache->k = k;
        cache->v = v;
        cache->alpha = std::move(alpha);
    }
    return out;
}

Tensor transformer_conv_backward(const Tensor &d_out, const Adjacency &adj,
                                 const ConvLayer &p, int heads, int head_dim,
                                 const ConvCache &cache, ConvLayer &grad) {
    using RowTensor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    const auto n = d_out.rows();
    const RowTensor g = d_out;
    const RowTensor q = cache.q;
    const RowTensor k = cache.k;
    const RowTensor v = cache.v;
    RowTensor dq = RowTensor::Zero(n, d_out.cols());
    RowTensor dk = RowTensor::Zero(n, d_out.cols());
    RowTensor dv = RowTensor::Zero(n, d_out.cols());
    const double scale = 1.0 / std::sqrt(static_cast<double>(head_dim));
    std::vector<double> da;
    for (int i = 0; i < adj.n_nodes(); ++i) {
        const int beg = adj.offsets[i];
        const int end = adj.offsets[i + 1];
        da.resize(static_cast<std::size_t>(end - beg));
        for (int h = 0; h < heads; ++h) {
            const int c0 = h * head_dim;
            const auto gi = g.row(i).segment(c0, head_dim);
            double mean = 0.0;
            for (int e = beg; e < end; ++e) {
                const int j = adj.sources[e];
                da[e - beg] = gi.dot(v.row(j).segment(c0, head_dim));
                dv.row(j).segment(c0, head_dim) += cache.alpha(h, e) * gi;
                mean += cache.alpha(h, e) * da[e - beg];
            }
            for (int e = beg; e < end; ++e) {
                const int j = adj.sources[e];
                const double ds = cache.alpha(h, e) * (da[e - beg] - mean) * scale;
                dq.row(i).segment(c0, head_dim) += ds * k.row(j).segment(c0, head_dim);
                dk.row(j).segment(c0, head_dim) += ds * q.row(i).segment(c0, head_dim);
            }
        }
    }
    const Tensor &x = cache.x;
    const Tensor dqc = dq, dkc = dk, dvc = dv;
    grad.w_skip.noalias() += x.transpose() * d_out;
    grad.b_skip += d_out.colwise().sum();
    grad.w_query.noalias() += x.transpose() * dqc;
    grad.b_query += dqc.colwise().sum();
    grad.w_key.noalias() += x.transpose() * dkc;
    grad.b_key += dkc.colwise().sum();
    grad.w_value.noalias() += x.transpose() * dvc;
    grad.b_value += dvc.colwise().sum();
    Tensor dx = d_out * p.w_skip.transpose();
    dx.noalias() += dqc * p.w_query.transpose();
    dx.noalias() += dkc * p.w_key.transpose();
    dx.noalias() += dvc * p.w_value.transpose();
    return dx;
}

Tensor global_mean_pool(const Tensor &x, std::span<const int> graph_offsets) {
    if (graph_offsets.size() < 2 || graph_offsets.back() != x.rows()) {
        throw Error(ErrorKind::Validation, "graph offsets do not cover the nodes");
    }
    const auto b = static_cast<Eigen::Index>(graph_offsets.size() - 1);
    Tensor out = Tensor::Zero(b, x.cols());
    for (Eigen::Index g = 0; g < b; ++g) {
        const int beg = graph_offsets[g];
        const int end = graph_offsets[g + 1];
        if (end <= beg) {
            throw Error(ErrorKind::Validation, "cannot pool an empty graph");
        }
        for (int i = beg; i < end; ++i) {
            out.row(g) += x.row(i);
        }
        out.row(g) /= static_cast<double>(end - beg);
    }
    return out;
}

Eigen::VectorXd forward(const ModelParams &params, const ModelConfig &cfg,
                        const GraphBatch &batch, ForwardCache *cache) {
    ForwardCache local;
    ForwardCache &c = cache ? *cache : local;
    Tensor h = batch.x;
    for (int l = 0; l < 3; ++l) {
        c.conv_out[l] = transformer_conv(h, batch.adj, params.conv[l], cfg.heads,
                                         cfg.head_dim, &c.conv[l]);
        h = l < 2 ? relu(c.conv_out[l]) : c.conv_out[l];
    }
    const Tensor pooled = global_mean_pool(h, batch.graph_offsets);

    c.global_in = batch.global;
    Tensor g = batch.global;
    for (int l = 0; l < 3; ++l) {
        check_shape(params.global_mlp[l].w, g.cols(), params.global_mlp[l].w.cols(),
                    "global mlp");
        c.global_pre[l] = affine(g, params.global_mlp[l].w, params.global_mlp[l].b);
        g = l < 2 ? relu(c.global_pre[l]) : c.global_pre[l];
    }

    c.fused.resize(pooled.rows(), pooled.cols() + g.cols());
    c.fused << pooled, g;
    Tensor r = c.fused;
    for (int l = 0; l < 3; ++l) {
        check_shape(params.head[l].w, r.cols(), params.head[l].w.cols(), "regressor");
        c.head_pre[l] = affine(r, params.head[l].w, params.head[l].b);
        r = l < 2 ? relu(c.head_pre[l]) : c.head_pre[l];
    }
    Eigen::VectorXd out = r.col(0);
    if (!out.allFinite()) {
        throw Error(ErrorKind::Domain, "non-finite model output");
    }
    return out;
}

ModelParams backward(const ModelParams &params, const ModelConfig &cfg,
                     const GraphBatch &batch, const ForwardCache &c,
                     const Eigen::VectorXd &d_pred) {
    ModelParams grad = ModelParams::zeros(cfg);
    Tensor d = d_pred;
    for (int l = 2; l >= 0; --l) {
        if (l < 2) {
            d = relu_mask(d, c.head_pre[l]);
        }
        const Tensor in = l == 0 ? c.fused : relu(c.head_pre[l - 1]);
        dense_backward(in, d, grad.head[l]);
        d = d * params.head[l].w.transpose();
    }
    const int hidden = cfg.hidden();
    Tensor dg = d.rightCols(d.cols() - hidden);
    const Tensor dpool = d.leftCols(hidden);
    for (int l = 2; l >= 0; --l) {
        if (l < 2) {
            dg = relu_mask(dg, c.global_pre[l]);
        }
        const Tensor in = l == 0 ? c.global_in : relu(c.global_pre[l - 1]);
        dense_backward(in, dg, grad.global_mlp[l]);
        if (l > 0) {
            dg = dg * params.global_mlp[l].w.transpose();
        }
    }
    Tensor dh(batch.x.rows(), hidden);
    for (int gi = 0; gi < batch.n_graphs(); ++gi) {
        const int beg = batch.graph_offsets[gi];
        const int end = batch.graph_offsets[gi + 1];
        const auto inv = 1.0 / static_cast<double>(end - beg);
        for (int i = beg; i < end; ++i) {
            dh.row(i) = dpool.row(gi) * inv;
        }
    }
    for (int l = 2; l >= 0; --l) {
        if (l < 2) {
            dh = relu_mask(dh, c.conv_out[l]);
        }
        dh = transformer_conv_backward(dh, batch.adj, params.conv[l], cfg.heads,
                                       cfg.head_dim, c.conv[l], grad.conv[l]);
    }
    return grad;
}

namespace {

void check_lengths(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) {
        throw Error(ErrorKind::Validation, "prediction/target length mismatch");
    }
    if (a.empty()) {
        throw Error(ErrorKind::Validation, "empty prediction vector");
    }
}

} // namespace

double huber_loss(std::span<const double> pred, std::span<const double> target,
                  double delta) {
    check_lengths(pred, target);
    double sum = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double r = std::abs(pred[i] - target[i]);
        sum += r <= delta ? 0.5 * r * r : delta * (r - 0.5 * delta);
    }
    return sum / static_cast<double>(pred.size());
}

Eigen::VectorXd huber_grad(std::span<const double> pred, std::span<const double> target,
                           double delta) {
    check_lengths(pred, target);
    Eigen::VectorXd g(static_cast<Eigen::Index>(pred.size()));
    const double inv = 1.0 / static_cast<double>(pred.size());
    for (std::size_t i = 0; i < pred.size(); ++i) {
        g(static_cast<Eigen::Index>(i)) = std::clamp(pred[i] - target[i], -delta, delta) * inv;
    }
    return g;
}

void TrainConfig::validate() const {
    if (lr < 0.0 || weight_decay < 0.0 || epochs < 1 || batch_size < 1 ||
        huber_delta <= 0.0 || eps <= 0.0) {
        throw Error(ErrorKind::Validation, "invalid training configuration");
    }
    if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0)) {
        throw Error(ErrorKind::Validation, "Adam betas must be in [0, 1)");
    }
    if (!(plateau.factor > 0.0 && plateau.factor < 1.0) || plateau.patience < 0 ||
        plateau.min_lr < 0.0 || plateau.threshold < 0.0) {
        throw Error(ErrorKind::Validation, "invalid plateau scheduler settings");
    }
}

json TrainConfig::to_json() const {
    return {{"lr", lr},
            {"weight_decay", weight_decay},
            {"epochs", epochs},
            {"batch_size", batch_size},
            {"huber_delta", huber_delta},
            {"beta1", beta1},
            {"beta2", beta2},
            {"eps", eps},
            {"plateau",
             {{"factor", plateau.factor},
              {"patience", plateau.patience},
              {"min_lr", plateau.min_lr},
              {"threshold", plateau.threshold}}},
            {"seed", seed}};
}

TrainConfig TrainConfig::from_json(const json &j) {
    TrainConfig c;
    c.lr = j.value("lr", c.lr);
    c.weight_decay = j.value("weight_decay", c.weight_decay);
    c.epochs = j.value("epochs", c.epochs);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.huber_delta = j.value("huber_delta", c.huber_delta);
    c.beta1 = j.value("beta1", c.beta1);
    c.beta2 = j.value("beta2", c.beta2);
    c.eps = j.value("eps", c.eps);
    if (j.contains("plateau")) {
        const auto &p = j["plateau"];
        c.plateau.factor = p.value("factor", c.plateau.factor);
        c.plateau.patience = p.value("patience", c.plateau.patience);
        c.plateau.min_lr = p.value("min_lr", c.plateau.min_lr);
        c.plateau.threshold = p.value("threshold", c.plateau.threshold);
    }
    c.seed = j.value("seed", c.seed);
    c.validate();
    return c;
}

AdamState AdamState::zeros(const ModelConfig &cfg) {
    return {ModelParams::zeros(cfg), ModelParams::zeros(cfg), 0};
}

void adam_step(ModelParams &params, const ModelParams &grads, AdamState &state,
               double lr, const TrainConfig &cfg) {
    ++state.t;
    const double t = static_cast<double>(state.t);
    const double c1 = 1.0 - std::pow(cfg.beta1, t);
    const double c2 = 1.0 - std::pow(cfg.beta2, t);
    auto p = params.tensors();
    const auto g = grads.tensors();
    auto m = state.m.tensors();
    auto v = state.v.tensors();
    for (std::size_t i = 0; i < p.size(); ++i) {
        const Tensor grad = *g[i].second + cfg.weight_decay * *p[i].second;
        *m[i].second = cfg.beta1 * *m[i].second + (1.0 - cfg.beta1) * grad;
        *v[i].second =
            cfg.beta2 * *v[i].second + (1.0 - cfg.beta2) * grad.cwiseProduct(grad);
        p[i].second->array() -= lr * (m[i].second->array() / c1) /
                                ((v[i].second->array() / c2).sqrt() + cfg.eps);
    }
}

PlateauScheduler::PlateauScheduler(double lr, PlateauConfig cfg)
    : lr_(lr), cfg_(cfg), best_(std::numeric_limits<double>::infinity()) {}

double PlateauScheduler::step(double metric) {
    if (metric < best_ * (1.0 - cfg_.threshold)) {
        best_ = metric;
        bad_epochs_ = 0;
    } else {
        ++bad_epochs_;
    }
    if (bad_epochs_ > cfg_.patience) {
        const double reduced = std::max(lr_ * cfg_.factor, cfg_.min_lr);
        if (lr_ - reduced > 1e-8 * lr_) {
            lr_ = reduced;
        }
        bad_epochs_ = 0;
    }
    return lr_;
}

double rmse(std::span<const double> pred, std::span<const double> target) {
    check_lengths(pred, target);
    double s = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double r = pred[i] - target[i];
        s += r * r;
    }
    return std::sqrt(s / static_cast<double>(pred.size()));
}

namespace {

std::vector<double> labels_of(const std::vector<CircuitGraph> &graphs) {
    std::vector<double> y;
    y.reserve(graphs.size());
    for (const auto &g : graphs) {
        if (!g.label) {
            throw Error(ErrorKind::Validation, "record " + g.id + " has no label");
        }
        y.push_back(*g.label);
    }
    return y;
}

std::vector<double> predict_normalized(const ModelParams &params, const ModelConfig &cfg,
                                       const std::vector<CircuitGraph> &graphs) {
    std::vector<double> out;
    out.reserve(graphs.size());
    constexpr std::size_t chunk = 512;
    for (std::size_t beg = 0; beg < graphs.size(); beg += chunk) {
        const std::size_t n = std::min(chunk, graphs.size() - beg);
        const auto batch = GraphBatch::build(
            std::span<const CircuitGraph>(graphs.data() + beg, n), cfg.reverse_edges);
        const Eigen::VectorXd y = forward(params, cfg, batch);
        out.insert(out.end(), y.data(), y.data() + y.size());
    }
    return out;
}

} // namespace

TrainResult train(const std::vector<CircuitGraph> &train_set,
                  const std::vector<CircuitGraph> &val_set, const TrainConfig &cfg,
                  const ModelConfig &model_cfg, const std::string &checkpoint_path,
                  const std::function<void(const EpochMetrics &)> &on_epoch) {
    cfg.validate();
    model_cfg.validate();
    if (train_set.empty() || val_set.empty()) {
        throw Error(ErrorKind::Validation, "training and validation splits must be non-empty");
    }
    const FeatureStats stats = FeatureStats::fit(train_set);
    std::vector<CircuitGraph> train_n, val_n;
    for (const auto &g : train_set) {
        train_n.push_back(stats.applied(g));
    }
    for (const auto &g : val_set) {
        val_n.push_back(stats.applied(g));
    }
    const auto y_train = labels_of(train_n);
    const auto y_val = labels_of(val_n);

    const Rng master(cfg.seed);
    Model model{model_cfg, ModelParams::init(model_cfg, master.derive({0}).key()), stats,
                cfg, json::object()};
    AdamState adam = AdamState::zeros(model_cfg);
    PlateauScheduler scheduler(cfg.lr, cfg.plateau);
    double lr = cfg.lr;

    TrainResult result;
    result.best_val_loss = std::numeric_limits<double>::infinity();
    std::vector<std::size_t> order(train_n.size());
    std::vector<const CircuitGraph *> members;
    std::vector<double> targets;
    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        std::iota(order.begin(), order.end(), std::size_t{0});
        Rng rng = master.derive({1, static_cast<std::uint64_t>(epoch)});
        for (std::size_t i = order.size(); i > 1; --i) {
            std::swap(order[i - 1], order[rng.below(i)]);
        }
        double loss_sum = 0.0;
        for (std::size_t beg = 0; beg < order.size(); beg += cfg.batch_size) {
            const std::size_t end = std::min(order.size(), beg + cfg.batch_size);
            members.clear();
            targets.clear();
            for (std::size_t i = beg; i < end; ++i) {
                members.push_back(&train_n[order[i]]);
                targets.push_back(y_train[order[i]]);
            }
            const auto batch = GraphBatch::build(members, model_cfg.reverse_edges);
            ForwardCache cache;
            const Eigen::VectorXd pred = forward(model.params, model_cfg, batch, &cache);
            const std::span<const double> ps(pred.data(), static_cast<std::size_t>(pred.size()));
            loss_sum += huber_loss(ps, targets, cfg.huber_delta) *
                        static_cast<double>(members.size());
            const auto grads = backward(model.params, model_cfg, batch, cache,
                                        huber_grad(ps, targets, cfg.huber_delta));
            adam_step(model.params, grads, adam, lr, cfg);
        }
        EpochMetrics m;
        m.epoch = epoch;
        m.train_loss = loss_sum / static_cast<double>(order.size());
        m.val_loss = huber_loss(predict_normalized(model.params, model_cfg, val_n), y_val,
                                cfg.huber_delta);
        m.lr = lr;
        result.metrics.push_back(m);
        if (m.val_loss < result.best_val_loss) {
            result.best_val_loss = m.val_loss;
            result.best_epoch = epoch;
            result.best = model;
            result.best.info = {{"epoch", epoch}, {"val_loss", m.val_loss},
                                {"n_train", train_n.size()}, {"n_val", val_n.size()}};
            if (!checkpoint_path.empty()) {
                save_checkpoint(checkpoint_path, result.best);
            }
        }
        if (on_epoch) {
            on_epoch(m);
        }
        lr = scheduler.step(m.val_loss);
    }
    return result;
}

std::vector<double> predict(const Model &model, const std::vector<CircuitGraph> &graphs) {
    std::vector<CircuitGraph> normalized;
    normalized.reserve(graphs.size());
    for (const auto &g : graphs) {
        normalized.push_back(model.stats.applied(g));
    }
    if (normalized.empty()) {
        return {};
    }
    return predict_normalized(model.params, model.config, normalized);
}

json model_to_json(const Model &model) {
    json tensors = json::object();
    for (const auto &[name, t] : model.params.tensors()) {
        std::vector<double> data;
        data.reserve(static_cast<std::size_t>(t->size()));
        for (Eigen::Index r = 0; r < t->rows(); ++r) {
            for (Eigen::Index c = 0; c < t->cols(); ++c) {
                data.push_back((*t)(r, c));
            }
        }
        tensors[name] = {{"shape", {t->rows(), t->cols()}}, {"data", std::move(data)}};
    }
    return {{"format", "qexpr-gnn-checkpoint"},
            {"version", kCheckpointVersion},
            {"model_config", model.config.to_json()},
            {"train_config", model.train_config.to_json()},
            {"stats", model.stats.to_json()},
            {"info", model.info},
            {"tensors", std::move(tensors)}};
}

Model model_from_json(const json &j, const std::optional<ModelConfig> &expected) {
    try {
        if (j.value("format", std::string{}) != "qexpr-gnn-checkpoint") {
            throw Error(ErrorKind::Checkpoint, "not a model checkpoint");
        }
        if (j.value("version", 0) != kCheckpointVersion) {
            throw Error(ErrorKind::Checkpoint, "unsupported checkpoint version " +
                                                   j.value("version", json()).dump());
        }
        Model m;
        m.config = ModelConfig::from_json(j.at("model_config"));
        if (expected && !(*expected == m.config)) {
            throw Error(ErrorKind::Checkpoint,
                        "checkpoint model config " + m.config.to_json().dump() +
                            " differs from expected " + expected->to_json().dump());
        }
        m.train_config = TrainConfig::from_json(j.at("train_config"));
        m.stats = FeatureStats::from_json(j.at("stats"));
        m.info = j.value("info", json::object());
        m.params = ModelParams::zeros(m.config);
        const auto &tensors = j.at("tensors");
        for (auto &[name, t] : m.params.tensors()) {
            if (!tensors.contains(name)) {
                throw Error(ErrorKind::Checkpoint, "checkpoint lacks tensor " + name);
            }
            const auto &entry = tensors[name];
            const auto shape = entry.at("shape").get<std::vector<Eigen::Index>>();
            const auto data = entry.at("data").get<std::vector<double>>();
            if (shape.size() != 2 || shape[0] != t->rows() || shape[1] != t->cols() ||
                data.size() != static_cast<std::size_t>(t->size())) {
                throw Error(ErrorKind::Checkpoint, "tensor " + name + " has wrong shape");
            }
            std::size_t i = 0;
            for (Eigen::Index r = 0; r < t->rows(); ++r) {
                for (Eigen::Index c = 0; c < t->cols(); ++c) {
                    (*t)(r, c) = data[i++];
                }
            }
        }
        if (tensors.size() != m.params.tensors().size()) {
            throw Error(ErrorKind::Checkpoint, "checkpoint has unexpected tensors");
        }
        return m;
    } catch (const json::exception &e) {
        throw Error(ErrorKind::Checkpoint, std::string("malformed checkpoint: ") + e.what());
    } catch (const Error &e) {
        if (e.kind() == ErrorKind::Checkpoint) {
            throw;
        }
        throw Error(ErrorKind::Checkpoint, e.what());
    }
}

void save_checkpoint(const std::string &path, const Model &model) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp);
        if (!out) {
            throw Error(ErrorKind::Io, "cannot write " + path);
        }
        out << model_to_json(model).dump() << '\n';
        if (!out) {
            throw Error(ErrorKind::Io, "write failed for " + path);
        }
    }
    std::rename(tmp.c_str(), path.c_str());
}

Model load_checkpoint(const std::string &path, const std::optional<ModelConfig> &expected) {
    std::ifstream in(path);
    if (!in) {
        throw Error(ErrorKind::Io, "cannot open " + path);
    }
    json j;
    try {
        in >> j;
    } catch (const json::parse_error &e) {
        throw Error(ErrorKind::Checkpoint, path + ": " + e.what());
    }
    return model_from_json(j, expected);
}

void write_metrics_csv(const std::string &path, const std::vector<EpochMetrics> &rows) {
    std::ofstream out(path);
    if (!out) {
        throw Error(ErrorKind::Io, "cannot write " + path);
    }
    out.precision(17);
    out << "epoch,train_loss,val_loss,lr\n";
    for (const auto &r : rows) {
        out << r.epoch << ',' << r.train_loss << ',' << r.val_loss << ',' << r.lr << '\n';
    }
}

} // namespace qexpr
