// Softmax self-attention and the p-Laplacian attention layer.
//
// A p-Laplacian head reweights every softmax attention score a(x,y) by
//     P(x,y) = max(|v(x) - v(y)|, eps)^(p-2)
// so that u(x) = sum_y a(x,y) P(x,y) v(y). With p == 2 the factor is exactly
// one and the head reduces to ordinary softmax attention.

#ifndef PLAT_ATTENTION_HPP
#define PLAT_ATTENTION_HPP

#include <cstddef>
#include <string>
#include <vector>

#include "plat/numerics.hpp"

namespace plat {

struct AttentionHeadConfig {
    std::size_t d_model = 0;  // input width D_x
    std::size_t d_qk = 0;
    std::size_t d_v = 0;
    double p = 2.0;
    double epsilon_clamp = 1e-5;
    bool renormalize_rows = false;
    /// Treat P as a constant during backpropagation.
    bool stop_gradient_modulation = false;

    /// Throws std::invalid_argument when p <= 1, eps <= 0 or a width is zero.
    void validate() const;
};

/// Projection weights of one head, stored as (out x in) so Q = X W_q^T.
struct HeadWeights {
    Matrix w_q;  // d_qk x d_model
    Matrix w_k;  // d_qk x d_model
    Matrix w_v;  // d_v  x d_model

    void check_shapes(const AttentionHeadConfig& cfg) const;
};

struct LayerConfig {
    std::vector<AttentionHeadConfig> heads;
    /// (sum of head d_v) x d_model output projection.
    Matrix w_o;
    /// Standardize each token row before the attention block.
    bool use_layer_scaling = false;

    std::size_t d_model() const;
    std::size_t concat_width() const;
    void validate() const;
};

struct ModulationMatrix {
    Matrix values;  // N x N, symmetric, strictly positive
    std::size_t n() const { return values.rows(); }
};

struct QKV {
    Matrix q;
    Matrix k;
    Matrix v;
};

QKV project_qkv(const TokenSequence& x, const HeadWeights& w);

/// row_softmax(Q K^T / sqrt(d_qk)).
Matrix attention_scores(const Matrix& q, const Matrix& k);

TokenSequence softmax_attention(const Matrix& q, const Matrix& k, const Matrix& v);

/// Entry (x,y) = max(|v(x)-v(y)|, eps)^(p-2); p == 2 yields exact ones.
ModulationMatrix modulation_matrix(const Matrix& v, double p, double eps);

/// Per-entry combined weights a(x,y) P(x,y), divided by their row sum when
/// cfg.renormalize_rows is set.
Matrix combined_weights(const Matrix& q, const Matrix& k, const Matrix& v,
                        const AttentionHeadConfig& cfg);

TokenSequence plat_attention(const Matrix& q, const Matrix& k, const Matrix& v,
                             const AttentionHeadConfig& cfg);

/// Row-wise standardization (zero mean, unit variance, eps 1e-5), no affine part.
TokenSequence layer_scale(const TokenSequence& x);

/// concat_h(plat_attention_h) * w_o + x.
TokenSequence multi_head_layer(const TokenSequence& x, const LayerConfig& layer,
                               const std::vector<HeadWeights>& weights);

/// Ties the query projection to the key projection (W_Q := W_K).
HeadWeights symmetrized(HeadWeights w);

/// Per-head p values for the named head allocations:
///   "baseline"  2, 2, 2, 2
///   "plat"      1.5, 1.5, 2, 2
///   "plat-mixed" 1.5, 1.5, 2.5, 2.5
///   "plat-5"    2, 2, 2.5, 2.5
std::vector<double> head_preset(const std::string& name);

}  // namespace plat

#endif  // PLAT_ATTENTION_HPP
