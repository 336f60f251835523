// Toy sequence classifier built from p-Laplacian attention layers, with an
// explicit backward pass.
//
//   H_0     = X + positional_table            (table optional)
//   H_{l+1} = concat_h(head_h(S(H_l))) W_O + H_l   (S = layer_scale or identity)
//           = concat_h(head_h(H_l))            in the bare variant
//   logits  = mean_rows(H_L) W_c^T + b_c
//
// Gradients flow through the modulation matrix P unless the head sets
// stop_gradient_modulation. At |v(x)-v(y)| == eps the clamp derivative is
// taken from the unclamped branch.

#ifndef PLAT_MODEL_HPP
#define PLAT_MODEL_HPP

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "plat/attention.hpp"
#include "plat/numerics.hpp"

namespace plat {

struct ModelConfig {
    std::size_t n_tokens = 16;
    std::size_t d_x = 8;
    std::size_t d_qk = 4;
    std::size_t d_v = 2;
    std::size_t n_layers = 1;
    std::size_t n_classes = 2;
    std::vector<double> head_p{2.0, 2.0, 2.0, 2.0};
    double epsilon_clamp = 1e-5;
    bool renormalize_rows = false;
    bool stop_gradient_modulation = false;
    bool use_layer_scaling = false;
    bool positional_encoding = false;
    /// Drop W_O and the residual; requires heads * d_v == d_x.
    bool bare_attention = false;
    double init_scale = 1.0;

    void validate() const;
};

struct ModelSpec {
    ModelConfig config;
    std::vector<LayerConfig> layers;               // head configs + W_O
    std::vector<std::vector<HeadWeights>> heads;   // [layer][head]
    Matrix classifier;                             // n_classes x d_x
    Matrix classifier_bias;                        // 1 x n_classes
    Matrix positional_table;                       // n_tokens x d_x, empty when disabled
    /// Bumped on every parameter update; caches from older generations are stale.
    std::uint64_t generation = 0;
};

/// Weights ~ N(0, init_scale^2 / fan_in), zero bias, drawn from `seed`.
ModelSpec init_model(const ModelConfig& config, std::uint64_t seed);

/// Standard sinusoidal table: sin for even columns, cos for odd columns.
Matrix sinusoidal_table(std::size_t n_tokens, std::size_t d_x);

struct NamedParameter {
    std::string name;
    Matrix* value;
};

/// Every trainable matrix in a fixed order; W_O is omitted in the bare variant.
std::vector<NamedParameter> parameters(ModelSpec& model);
std::vector<std::string> parameter_names(const ModelSpec& model);

struct HeadCache {
    Matrix q, k, v;
    Matrix scores;       // row softmax
    Matrix modulation;   // P
    Matrix distances;    // |v(x)-v(y)|
    Matrix row_mass;     // N x 1 row sums before renormalization
    Matrix weights;      // final combined weights applied to V
};

struct LayerCache {
    Matrix input;
    Matrix scaled_input;  // input to the heads (== input without layer scaling)
    Matrix inv_std;       // N x 1, layer scaling only
    std::vector<HeadCache> heads;
    Matrix concat;
};

struct ForwardCache {
    const ModelSpec* model = nullptr;
    std::uint64_t generation = 0;
    std::vector<LayerCache> layers;
    std::vector<Matrix> states;  // H_0 .. H_L
    Matrix pooled;               // 1 x d_x
    Matrix logits;               // 1 x n_classes
};

/// Optional frozen P per [layer][head]; used by finite-difference oracles
/// for the stop-gradient variant.
using ModulationOverride = std::vector<std::vector<Matrix>>;

ForwardCache forward(const ModelSpec& model, const TokenSequence& x,
                     const ModulationOverride* frozen_modulation = nullptr);

/// Gradients aligned with parameters(model).
using Gradients = std::vector<Matrix>;

/// Throws std::logic_error when the cache is from a different model or an
/// older parameter generation.
Gradients backward(const ModelSpec& model, const ForwardCache& cache, const Matrix& logit_grad);

struct LossAndGrad {
    double loss = 0.0;
    Matrix logit_grad;  // 1 x n_classes
    int predicted = 0;
};

/// Softmax cross-entropy for a single example.
LossAndGrad cross_entropy(const Matrix& logits, int label);

/// A tensor whose gradient is below kRelativeGradientFloor times the largest
/// tensor gradient (or below kGradientNormFloor) is numerically zero -- e.g.
/// a saturated softmax -- and central differences only see round-off there.
/// The relative error denominator is clamped to that floor.
inline constexpr double kGradientNormFloor = 1e-8;
inline constexpr double kRelativeGradientFloor = 1e-5;

/// Per-tensor comparison of analytic and central-difference gradients.
struct GradientCheckEntry {
    std::string name;
    double relative_error = 0.0;  // |a - n|_2 / max(|a|_2, |n|_2, floor)
    double analytic_norm = 0.0;
};

/// Central differences of the cross-entropy loss at step h. When a head has
/// stop_gradient_modulation set, P is frozen at its unperturbed value so the
/// oracle differentiates the same function as the analytic pass.
std::vector<GradientCheckEntry> gradient_check(ModelSpec model, const TokenSequence& x, int label,
                                               double h = 1e-5);

}  // namespace plat

#endif  // PLAT_MODEL_HPP
