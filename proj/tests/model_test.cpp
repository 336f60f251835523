#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "plat/model.hpp"
#include "test_util.hpp"

namespace plat {
namespace {

using testing::random_matrix;

ModelConfig tiny_config(std::vector<double> ps, std::size_t layers = 1) {
    ModelConfig c;
    c.n_tokens = 4;
    c.d_x = 3;
    c.d_qk = 2;
    c.d_v = 2;
    c.n_layers = layers;
    c.head_p = std::move(ps);
    return c;
}

// Per-example oracle: a standard softmax-attention block written with plain
// index loops, single head, residual + W_O, mean pool, linear classifier.
struct OracleGrads {
    Matrix w_q, w_k, w_v, w_o, classifier, bias;
};

OracleGrads standard_attention_backward(const Matrix& x, const HeadWeights& w, const Matrix& w_o,
                                        const Matrix& wc, const Matrix& g) {
    const std::size_t n = x.rows(), dx = x.cols(), dqk = w.w_q.rows(), dv = w.w_v.rows();
    const std::size_t nc = wc.rows();
    Matrix q(n, dqk), k(n, dqk), v(n, dv);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t b = 0; b < dx; ++b) {
            for (std::size_t a = 0; a < dqk; ++a) {
                q(i, a) += x(i, b) * w.w_q(a, b);
                k(i, a) += x(i, b) * w.w_k(a, b);
            }
            for (std::size_t a = 0; a < dv; ++a) v(i, a) += x(i, b) * w.w_v(a, b);
        }
    const double scale = 1.0 / std::sqrt(double(dqk));
    Matrix att(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        double mx = -1e300;
        for (std::size_t j = 0; j < n; ++j) {
            double s = 0.0;
            for (std::size_t a = 0; a < dqk; ++a) s += q(i, a) * k(j, a);
            att(i, j) = s * scale;
            mx = std::max(mx, att(i, j));
        }
        double z = 0.0;
        for (std::size_t j = 0; j < n; ++j) z += (att(i, j) = std::exp(att(i, j) - mx));
        for (std::size_t j = 0; j < n; ++j) att(i, j) /= z;
    }
    Matrix c(n, dv);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            for (std::size_t a = 0; a < dv; ++a) c(i, a) += att(i, j) * v(j, a);
    Matrix h(n, dx);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t b = 0; b < dx; ++b) {
            h(i, b) = x(i, b);
            for (std::size_t a = 0; a < dv; ++a) h(i, b) += c(i, a) * w_o(a, b);
        }
    std::vector<double> pooled(dx, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t b = 0; b < dx; ++b) pooled[b] += h(i, b) / double(n);

    OracleGrads out{Matrix(dqk, dx), Matrix(dqk, dx), Matrix(dv, dx), Matrix(dv, dx), Matrix(nc, dx), g};
    std::vector<double> dpool(dx, 0.0);
    for (std::size_t cls = 0; cls < nc; ++cls)
        for (std::size_t b = 0; b < dx; ++b) {
            out.classifier(cls, b) = g(0, cls) * pooled[b];
            dpool[b] += g(0, cls) * wc(cls, b);
        }
    Matrix dc(n, dv);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t b = 0; b < dx; ++b) {
            const double dh = dpool[b] / double(n);
            for (std::size_t a = 0; a < dv; ++a) {
                out.w_o(a, b) += c(i, a) * dh;
                dc(i, a) += dh * w_o(a, b);
            }
        }
    Matrix dvv(n, dv), dq(n, dqk), dk(n, dqk);
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<double> datt(n, 0.0);
        double mean = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            for (std::size_t a = 0; a < dv; ++a) {
                datt[j] += dc(i, a) * v(j, a);
                dvv(j, a) += att(i, j) * dc(i, a);
            }
            mean += att(i, j) * datt[j];
        }
        for (std::size_t j = 0; j < n; ++j) {
            const double ds = att(i, j) * (datt[j] - mean) * scale;
            for (std::size_t a = 0; a < dqk; ++a) {
                dq(i, a) += ds * k(j, a);
                dk(j, a) += ds * q(i, a);
            }
        }
    }
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t b = 0; b < dx; ++b) {
            for (std::size_t a = 0; a < dqk; ++a) {
                out.w_q(a, b) += dq(i, a) * x(i, b);
                out.w_k(a, b) += dk(i, a) * x(i, b);
            }
            for (std::size_t a = 0; a < dv; ++a) out.w_v(a, b) += dvv(i, a) * x(i, b);
        }
    return out;
}

TEST(Model, InitIsDeterministicAndShaped) {
    const ModelConfig cfg = tiny_config({2.0, 1.5}, 2);
    const ModelSpec a = init_model(cfg, 7);
    const ModelSpec b = init_model(cfg, 7);
    EXPECT_EQ(a.heads[1][1].w_v, b.heads[1][1].w_v);
    EXPECT_EQ(a.layers[0].w_o.rows(), 4u);
    EXPECT_EQ(a.layers[0].w_o.cols(), 3u);
    EXPECT_EQ(a.classifier.rows(), 2u);
    EXPECT_TRUE(a.positional_table.empty());
    EXPECT_EQ(parameter_names(a).size(), 2u * (2 * 3 + 1) + 2);
}

TEST(Model, RejectsInvalidConfig) {
    ModelConfig cfg = tiny_config({2.0});
    cfg.n_layers = 0;
    EXPECT_THROW(init_model(cfg, 0), std::invalid_argument);
    cfg = tiny_config({1.0});
    EXPECT_THROW(init_model(cfg, 0), std::invalid_argument);
    cfg = tiny_config({2.0});
    cfg.bare_attention = true;  // 1 head * d_v 2 != d_x 3
    EXPECT_THROW(init_model(cfg, 0), std::invalid_argument);
}

TEST(Model, ForwardMatchesAttentionComposition) {
    std::mt19937_64 rng(11);
    ModelConfig cfg = tiny_config({2.0, 2.0});
    const ModelSpec model = init_model(cfg, 5);
    const Matrix x = random_matrix(rng, 4, 3);
    const ForwardCache cache = forward(model, x);
    const Matrix h = multi_head_layer(x, model.layers[0], model.heads[0]);
    EXPECT_LT(max_abs_diff(cache.states[1], h), 1e-14);
    Matrix pooled(1, 3);
    for (std::size_t i = 0; i < 4; ++i)
        for (std::size_t j = 0; j < 3; ++j) pooled(0, j) += h(i, j) / 4.0;
    const Matrix logits = add(matmul_transposed(pooled, model.classifier), model.classifier_bias);
    EXPECT_LT(max_abs_diff(cache.logits, logits), 1e-14);
}

TEST(Model, ForwardRejectsShapeMismatch) {
    const ModelSpec model = init_model(tiny_config({2.0}), 1);
    EXPECT_THROW(forward(model, Matrix(4, 5)), ShapeError);
    ModelConfig cfg = tiny_config({2.0});
    cfg.positional_encoding = true;
    const ModelSpec with_pos = init_model(cfg, 1);
    EXPECT_THROW(forward(with_pos, Matrix(5, 3)), ShapeError);
}

TEST(Model, ZeroClassifierGivesUniformLogits) {
    std::mt19937_64 rng(2);
    ModelSpec model = init_model(tiny_config({1.5, 2.5}), 3);
    model.classifier = Matrix(2, 3);
    const ForwardCache cache = forward(model, random_matrix(rng, 4, 3));
    EXPECT_EQ(cache.logits(0, 0), cache.logits(0, 1));
    const Matrix probs = row_softmax(cache.logits);
    EXPECT_DOUBLE_EQ(probs(0, 0), 0.5);
}

TEST(Model, TokenPermutationLeavesLogitsUnchanged) {
    std::mt19937_64 rng(4);
    for (double p : {1.5, 2.0, 2.5}) {
        ModelConfig cfg = tiny_config({p, 2.0}, 2);
        cfg.n_tokens = 6;
        const ModelSpec model = init_model(cfg, 9);
        const Matrix x = random_matrix(rng, 6, 3);
        std::vector<std::size_t> perm(6);
        std::iota(perm.begin(), perm.end(), 0);
        std::shuffle(perm.begin(), perm.end(), rng);
        Matrix xp(6, 3);
        for (std::size_t i = 0; i < 6; ++i)
            for (std::size_t j = 0; j < 3; ++j) xp(i, j) = x(perm[i], j);
        EXPECT_LT(max_abs_diff(forward(model, x).logits, forward(model, xp).logits), 1e-12) << "p=" << p;
    }
}

TEST(Model, PositionalTableBreaksPermutationSymmetry) {
    std::mt19937_64 rng(4);
    ModelConfig cfg = tiny_config({2.0});
    cfg.positional_encoding = true;
    const ModelSpec model = init_model(cfg, 9);
    const Matrix x = random_matrix(rng, 4, 3);
    Matrix xp = x;
    for (std::size_t j = 0; j < 3; ++j) std::swap(xp(0, j), xp(3, j));
    EXPECT_GT(max_abs_diff(forward(model, x).logits, forward(model, xp).logits), 1e-9);
}

TEST(SinusoidalTable, KnownEntries) {
    const Matrix t = sinusoidal_table(3, 4);
    EXPECT_DOUBLE_EQ(t(0, 0), 0.0);
    EXPECT_DOUBLE_EQ(t(0, 1), 1.0);
    EXPECT_DOUBLE_EQ(t(1, 0), std::sin(1.0));
    EXPECT_DOUBLE_EQ(t(2, 3), std::cos(2.0 / 100.0));
}

TEST(Backward, ZeroUpstreamGradientGivesZeroGradients) {
    std::mt19937_64 rng(8);
    ModelSpec model = init_model(tiny_config({1.5, 2.5}, 2), 1);
    const ForwardCache cache = forward(model, random_matrix(rng, 4, 3));
    for (const Matrix& g : backward(model, cache, Matrix(1, 2)))
        for (double v : g.data()) EXPECT_EQ(v, 0.0);
}

TEST(Backward, GradientStructureMatchesParameters) {
    std::mt19937_64 rng(8);
    ModelSpec model = init_model(tiny_config({1.5, 2.5}, 2), 1);
    const ForwardCache cache = forward(model, random_matrix(rng, 4, 3));
    const Gradients grads = backward(model, cache, Matrix(1, 2, 1.0));
    const auto params = parameters(model);
    ASSERT_EQ(grads.size(), params.size());
    for (std::size_t i = 0; i < grads.size(); ++i) {
        EXPECT_EQ(grads[i].rows(), params[i].value->rows()) << params[i].name;
        EXPECT_EQ(grads[i].cols(), params[i].value->cols()) << params[i].name;
    }
}

TEST(Backward, StaleCacheIsRejected) {
    std::mt19937_64 rng(8);
    ModelSpec model = init_model(tiny_config({2.0}), 1);
    const ForwardCache cache = forward(model, random_matrix(rng, 4, 3));
    ++model.generation;
    EXPECT_THROW(backward(model, cache, Matrix(1, 2)), std::logic_error);
    const ModelSpec other = init_model(tiny_config({2.0}), 1);
    const ForwardCache foreign = forward(other, random_matrix(rng, 4, 3));
    EXPECT_THROW(backward(model, foreign, Matrix(1, 2)), std::logic_error);
}

TEST(Backward, StandardAttentionReductionAtP2) {
    std::mt19937_64 rng(21);
    for (int trial = 0; trial < 20; ++trial) {
        ModelConfig cfg = tiny_config({2.0});
        cfg.n_tokens = testing::random_size(rng, 2, 8);
        cfg.d_x = testing::random_size(rng, 2, 6);
        cfg.d_qk = testing::random_size(rng, 1, 4);
        cfg.d_v = testing::random_size(rng, 1, 4);
        cfg.n_classes = testing::random_size(rng, 2, 4);
        const ModelSpec model = init_model(cfg, 100 + trial);
        const Matrix x = random_matrix(rng, cfg.n_tokens, cfg.d_x);
        const Matrix g = random_matrix(rng, 1, cfg.n_classes);
        const Gradients grads = backward(model, forward(model, x), g);
        const OracleGrads o = standard_attention_backward(x, model.heads[0][0], model.layers[0].w_o,
                                                          model.classifier, g);
        EXPECT_LT(max_abs_diff(grads[0], o.w_q), 1e-10);
        EXPECT_LT(max_abs_diff(grads[1], o.w_k), 1e-10);
        EXPECT_LT(max_abs_diff(grads[2], o.w_v), 1e-10);
        EXPECT_LT(max_abs_diff(grads[3], o.w_o), 1e-10);
        EXPECT_LT(max_abs_diff(grads[4], o.classifier), 1e-10);
        EXPECT_LT(max_abs_diff(grads[5], o.bias), 1e-10);
    }
}

TEST(Backward, StopGradientChangesOnlyValueGradientsWhenPNotTwo) {
    std::mt19937_64 rng(31);
    ModelConfig cfg = tiny_config({2.5});
    const Matrix x = random_matrix(rng, 4, 3);
    const Matrix g = random_matrix(rng, 1, 2);
    const ModelSpec live = init_model(cfg, 4);
    cfg.stop_gradient_modulation = true;
    const ModelSpec frozen = init_model(cfg, 4);
    const Gradients a = backward(live, forward(live, x), g);
    const Gradients b = backward(frozen, forward(frozen, x), g);
    EXPECT_EQ(a[0], b[0]);  // w_q
    EXPECT_GT(max_abs_diff(a[2], b[2]), 1e-8);  // w_v sees dP only when live
}

struct GradCase {
    std::vector<double> ps;
    bool stop_gradient;
    bool layer_scaling;
    bool renormalize;
};

void expect_gradcheck(ModelConfig cfg, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    cfg.init_scale = 0.5;  // keeps logits O(1): saturated models have nothing to check
    const ModelSpec model = init_model(cfg, seed);
    const Matrix x = random_matrix(rng, cfg.n_tokens, cfg.d_x);
    const int label = static_cast<int>(seed % cfg.n_classes);
    for (const auto& e : gradient_check(model, x, label, 1e-5)) {
        EXPECT_LT(e.relative_error, 1e-4) << e.name << " seed " << seed;
    }
}

TEST(GradientCheck, RandomSmallModels) {
    const std::vector<GradCase> cases = {
        {{1.5}, false, false, false}, {{2.5}, false, false, false}, {{1.5, 2.5}, false, false, false},
        {{1.5, 2.5}, true, false, false}, {{3.0, 2.0}, false, false, false}, {{3.0}, true, false, false},
        {{2.0, 2.0}, true, false, false}, {{1.5, 2.5}, false, true, false}, {{2.5, 1.5}, false, false, true},
        {{1.5, 3.0}, true, true, true},
    };
    std::uint64_t seed = 1000;
    for (const auto& c : cases) {
        ModelConfig cfg = tiny_config(c.ps, 2);
        cfg.stop_gradient_modulation = c.stop_gradient;
        cfg.use_layer_scaling = c.layer_scaling;
        cfg.renormalize_rows = c.renormalize;
        expect_gradcheck(cfg, seed++);
    }
}

TEST(GradientCheck, BareAndPositionalVariants) {
    // p < 2 in a bare stack multiplies by eps^(p-2) per layer with nothing to
    // damp it; finite differences are truncation-bound there.
    ModelConfig cfg = tiny_config({2.5, 2.0}, 2);
    cfg.d_x = 4;
    cfg.bare_attention = true;
    cfg.positional_encoding = true;
    expect_gradcheck(cfg, 77);
}

TEST(GradientCheck, DetectsWrongGradient) {
    // Sanity of the oracle itself: a model whose P is frozen in backward but
    // live in the finite differences must fail at p != 2.
    std::mt19937_64 rng(5);
    ModelConfig cfg = tiny_config({2.5});
    ModelSpec model = init_model(cfg, 5);
    const Matrix x = random_matrix(rng, 4, 3);
    const ForwardCache base = forward(model, x);
    ModelSpec frozen = model;
    frozen.layers[0].heads[0].stop_gradient_modulation = true;
    const ForwardCache fc = forward(frozen, x);
    const Gradients wrong = backward(frozen, fc, cross_entropy(fc.logits, 0).logit_grad);
    const Gradients right = backward(model, base, cross_entropy(base.logits, 0).logit_grad);
    EXPECT_GT(frobenius_norm(subtract(wrong[2], right[2])) / frobenius_norm(right[2]), 1e-4);
}

TEST(CrossEntropy, ValueAndGradient) {
    const Matrix logits = Matrix::from_rows({{1.0, 2.0, 3.0}});
    const LossAndGrad r = cross_entropy(logits, 2);
    EXPECT_NEAR(r.loss, 0.40760596444438030, 1e-15);
    EXPECT_EQ(r.predicted, 2);
    EXPECT_NEAR(r.logit_grad(0, 2), 0.6652409557748219 - 1.0, 1e-15);
    EXPECT_THROW(cross_entropy(logits, 3), std::invalid_argument);
}

}  // namespace
}  // namespace plat
