#include "plat/attention.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace plat {

void AttentionHeadConfig::validate() const {
    if (!(p > 1.0)) throw std::invalid_argument("attention head: p must be > 1, got " + std::to_string(p));
    if (!(epsilon_clamp > 0.0))
        throw std::invalid_argument("attention head: epsilon_clamp must be > 0");
    if (d_model == 0 || d_qk == 0 || d_v == 0)
        throw std::invalid_argument("attention head: dimensions must be >= 1");
}

void HeadWeights::check_shapes(const AttentionHeadConfig& cfg) const {
    auto expect = [](const Matrix& m, std::size_t r, std::size_t c, const char* name) {
        if (m.rows() != r || m.cols() != c) {
            throw ShapeError(std::string("head weights: ") + name + " is " + m.shape_string() +
                             ", expected (" + std::to_string(r) + "x" + std::to_string(c) + ")");
        }
    };
    expect(w_q, cfg.d_qk, cfg.d_model, "w_q");
    expect(w_k, cfg.d_qk, cfg.d_model, "w_k");
    expect(w_v, cfg.d_v, cfg.d_model, "w_v");
}

std::size_t LayerConfig::d_model() const { return heads.empty() ? 0 : heads.front().d_model; }

std::size_t LayerConfig::concat_width() const {
    std::size_t width = 0;
    for (const auto& h : heads) width += h.d_v;
    return width;
}

void LayerConfig::validate() const {
    if (heads.empty()) throw std::invalid_argument("layer: at least one head required");
    for (const auto& h : heads) {
        h.validate();
        if (h.d_model != d_model())
            throw std::invalid_argument("layer: heads disagree on d_model");
    }
    if (w_o.rows() != concat_width() || w_o.cols() != d_model()) {
        throw ShapeError("layer: w_o is " + w_o.shape_string() + ", expected (" +
                         std::to_string(concat_width()) + "x" + std::to_string(d_model()) + ")");
    }
}

QKV project_qkv(const TokenSequence& x, const HeadWeights& w) {
    if (x.cols() != w.w_q.cols() || x.cols() != w.w_k.cols() || x.cols() != w.w_v.cols()) {
        throw ShapeError("project_qkv: input " + x.shape_string() + " vs projections " +
                         w.w_q.shape_string() + ", " + w.w_k.shape_string() + ", " +
                         w.w_v.shape_string());
    }
    return {matmul_transposed(x, w.w_q), matmul_transposed(x, w.w_k), matmul_transposed(x, w.w_v)};
}

Matrix attention_scores(const Matrix& q, const Matrix& k) {
    if (q.rows() != k.rows() || q.cols() != k.cols())
        throw ShapeError("attention: Q " + q.shape_string() + " vs K " + k.shape_string());
    Matrix logits = matmul_transposed(q, k);
    return row_softmax(scale(logits, 1.0 / std::sqrt(static_cast<double>(q.cols()))));
}

TokenSequence softmax_attention(const Matrix& q, const Matrix& k, const Matrix& v) {
    if (v.rows() != q.rows())
        throw ShapeError("attention: V " + v.shape_string() + " vs Q " + q.shape_string());
    return matmul(attention_scores(q, k), v);
}

ModulationMatrix modulation_matrix(const Matrix& v, double p, double eps) {
    const std::size_t n = v.rows();
    if (p == 2.0) return {Matrix(n, n, 1.0)};
    Matrix dist = pairwise_distances(v);
    for (double& d : dist.data()) d = std::pow(std::max(d, eps), p - 2.0);
    return {std::move(dist)};
}

Matrix combined_weights(const Matrix& q, const Matrix& k, const Matrix& v,
                        const AttentionHeadConfig& cfg) {
    if (v.rows() != q.rows())
        throw ShapeError("attention: V " + v.shape_string() + " vs Q " + q.shape_string());
    Matrix weights = attention_scores(q, k);
    if (cfg.p != 2.0) weights = hadamard(weights, modulation_matrix(v, cfg.p, cfg.epsilon_clamp).values);
    if (cfg.renormalize_rows) {
        const auto sums = row_sums(weights);
        for (std::size_t i = 0; i < weights.rows(); ++i)
            for (double& w : weights.row(i)) w /= sums[i];
    }
    return weights;
}

TokenSequence plat_attention(const Matrix& q, const Matrix& k, const Matrix& v,
                             const AttentionHeadConfig& cfg) {
    cfg.validate();
    return matmul(combined_weights(q, k, v, cfg), v);
}

TokenSequence layer_scale(const TokenSequence& x) {
    constexpr double kEps = 1e-5;
    TokenSequence out(x.rows(), x.cols());
    const double width = static_cast<double>(x.cols());
    for (std::size_t i = 0; i < x.rows(); ++i) {
        const auto in = x.row(i);
        double mean = 0.0;
        for (double a : in) mean += a;
        mean /= width;
        double var = 0.0;
        for (double a : in) var += (a - mean) * (a - mean);
        var /= width;
        const double inv = 1.0 / std::sqrt(var + kEps);
        auto dst = out.row(i);
        for (std::size_t j = 0; j < in.size(); ++j) dst[j] = (in[j] - mean) * inv;
    }
    return out;
}

TokenSequence multi_head_layer(const TokenSequence& x, const LayerConfig& layer,
                               const std::vector<HeadWeights>& weights) {
    layer.validate();
    if (weights.size() != layer.heads.size()) {
        throw std::invalid_argument("multi_head_layer: " + std::to_string(layer.heads.size()) +
                                    " heads but " + std::to_string(weights.size()) +
                                    " weight sets");
    }
    if (x.cols() != layer.d_model())
        throw ShapeError("multi_head_layer: input " + x.shape_string() + " vs d_model " +
                         std::to_string(layer.d_model()));

    const TokenSequence input = layer.use_layer_scaling ? layer_scale(x) : x;
    Matrix concat(x.rows(), layer.concat_width());
    std::size_t offset = 0;
    for (std::size_t h = 0; h < layer.heads.size(); ++h) {
        const auto& cfg = layer.heads[h];
        weights[h].check_shapes(cfg);
        const QKV qkv = project_qkv(input, weights[h]);
        const Matrix head_out = plat_attention(qkv.q, qkv.k, qkv.v, cfg);
        for (std::size_t i = 0; i < x.rows(); ++i)
            for (std::size_t j = 0; j < cfg.d_v; ++j) concat(i, offset + j) = head_out(i, j);
        offset += cfg.d_v;
    }
    return add(matmul(concat, layer.w_o), x);
}

HeadWeights symmetrized(HeadWeights w) {
    w.w_q = w.w_k;
    return w;
}

std::vector<double> head_preset(const std::string& name) {
    if (name == "baseline") return {2.0, 2.0, 2.0, 2.0};
    if (name == "plat") return {1.5, 1.5, 2.0, 2.0};
    if (name == "plat-mixed") return {1.5, 1.5, 2.5, 2.5};
    if (name == "plat-5") return {2.0, 2.0, 2.5, 2.5};
    throw std::invalid_argument("unknown head preset '" + name + "'");
}

}  // namespace plat
