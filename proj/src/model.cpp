#include "plat/model.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

namespace plat {

void ModelConfig::validate() const {
    if (n_layers < 1) throw std::invalid_argument("model: n_layers must be >= 1");
    if (n_tokens < 1 || d_x < 1 || d_qk < 1 || d_v < 1 || n_classes < 2)
        throw std::invalid_argument("model: dimensions must be >= 1 and n_classes >= 2");
    if (head_p.empty()) throw std::invalid_argument("model: at least one head required");
    for (double p : head_p)
        if (!(p > 1.0)) throw std::invalid_argument("model: every head p must be > 1");
    if (!(epsilon_clamp > 0.0)) throw std::invalid_argument("model: epsilon_clamp must be > 0");
    if (bare_attention && head_p.size() * d_v != d_x)
        throw std::invalid_argument("model: bare attention needs heads * d_v == d_x");
}

Matrix sinusoidal_table(std::size_t n_tokens, std::size_t d_x) {
    Matrix table(n_tokens, d_x);
    for (std::size_t pos = 0; pos < n_tokens; ++pos) {
        for (std::size_t i = 0; i < d_x; ++i) {
            const double freq = std::pow(10000.0, -static_cast<double>(i - i % 2) / static_cast<double>(d_x));
            const double angle = static_cast<double>(pos) * freq;
            table(pos, i) = i % 2 == 0 ? std::sin(angle) : std::cos(angle);
        }
    }
    return table;
}

ModelSpec init_model(const ModelConfig& config, std::uint64_t seed) {
    config.validate();
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal;
    auto draw = [&](std::size_t rows, std::size_t cols, std::size_t fan_in) {
        Matrix m(rows, cols);
        const double sd = config.init_scale / std::sqrt(static_cast<double>(fan_in));
        for (double& x : m.data()) x = sd * normal(rng);
        return m;
    };

    ModelSpec model;
    model.config = config;
    for (std::size_t l = 0; l < config.n_layers; ++l) {
        LayerConfig layer;
        layer.use_layer_scaling = config.use_layer_scaling;
        std::vector<HeadWeights> heads;
        for (double p : config.head_p) {
            AttentionHeadConfig h;
            h.d_model = config.d_x;
            h.d_qk = config.d_qk;
            h.d_v = config.d_v;
            h.p = p;
            h.epsilon_clamp = config.epsilon_clamp;
            h.renormalize_rows = config.renormalize_rows;
            h.stop_gradient_modulation = config.stop_gradient_modulation;
            layer.heads.push_back(h);
            heads.push_back({draw(config.d_qk, config.d_x, config.d_x), draw(config.d_qk, config.d_x, config.d_x),
                             draw(config.d_v, config.d_x, config.d_x)});
        }
        const std::size_t width = layer.concat_width();
        layer.w_o = config.bare_attention ? Matrix(width, config.d_x) : draw(width, config.d_x, width);
        model.layers.push_back(std::move(layer));
        model.heads.push_back(std::move(heads));
    }
    model.classifier = draw(config.n_classes, config.d_x, config.d_x);
    model.classifier_bias = Matrix(1, config.n_classes);
    if (config.positional_encoding) model.positional_table = sinusoidal_table(config.n_tokens, config.d_x);
    return model;
}

std::vector<NamedParameter> parameters(ModelSpec& model) {
    std::vector<NamedParameter> out;
    for (std::size_t l = 0; l < model.layers.size(); ++l) {
        const std::string prefix = "layer" + std::to_string(l) + ".";
        for (std::size_t h = 0; h < model.heads[l].size(); ++h) {
            const std::string hp = prefix + "head" + std::to_string(h) + ".";
            out.push_back({hp + "w_q", &model.heads[l][h].w_q});
            out.push_back({hp + "w_k", &model.heads[l][h].w_k});
            out.push_back({hp + "w_v", &model.heads[l][h].w_v});
        }
        if (!model.config.bare_attention) out.push_back({prefix + "w_o", &model.layers[l].w_o});
    }
    out.push_back({"classifier.weight", &model.classifier});
    out.push_back({"classifier.bias", &model.classifier_bias});
    return out;
}

std::vector<std::string> parameter_names(const ModelSpec& model) {
    std::vector<std::string> names;
    for (const auto& p : parameters(const_cast<ModelSpec&>(model))) names.push_back(p.name);
    return names;
}

namespace {

double clamp_derivative_factor(double dist, double p, double eps) {
    // d/d(dist) of max(dist, eps)^(p-2); the tie dist == eps uses the dist branch.
    if (dist < eps) return 0.0;
    return (p - 2.0) * std::pow(dist, p - 3.0);
}

HeadCache head_forward(const Matrix& input, const HeadWeights& w, const AttentionHeadConfig& cfg,
                       const Matrix* frozen_modulation) {
    HeadCache c;
    QKV qkv = project_qkv(input, w);
    c.q = std::move(qkv.q);
    c.k = std::move(qkv.k);
    c.v = std::move(qkv.v);
    c.scores = attention_scores(c.q, c.k);
    c.distances = pairwise_distances(c.v);
    const std::size_t n = input.rows();
    if (frozen_modulation != nullptr) {
        c.modulation = *frozen_modulation;
    } else if (cfg.p == 2.0) {
        c.modulation = Matrix(n, n, 1.0);
    } else {
        c.modulation = Matrix(n, n);
        for (std::size_t i = 0; i < c.distances.size(); ++i)
            c.modulation.data()[i] = std::pow(std::max(c.distances.data()[i], cfg.epsilon_clamp), cfg.p - 2.0);
    }
    c.weights = hadamard(c.scores, c.modulation);
    c.row_mass = Matrix(n, 1);
    const auto sums = row_sums(c.weights);
    for (std::size_t i = 0; i < n; ++i) c.row_mass(i, 0) = sums[i];
    if (cfg.renormalize_rows) {
        for (std::size_t i = 0; i < n; ++i)
            for (double& x : c.weights.row(i)) x /= sums[i];
    }
    return c;
}

struct HeadGrads {
    Matrix w_q, w_k, w_v, input;
};

HeadGrads head_backward(const Matrix& input, const HeadWeights& w, const AttentionHeadConfig& cfg,
                        const HeadCache& c, const Matrix& d_out) {
    const std::size_t n = input.rows();
    // out = weights * V
    Matrix d_weights = matmul_transposed(d_out, c.v);
    Matrix d_v = transposed_matmul(c.weights, d_out);

    Matrix d_raw = d_weights;  // gradient w.r.t. scores (.) P before renormalization
    if (cfg.renormalize_rows) {
        for (std::size_t x = 0; x < n; ++x) {
            double dot = 0.0;
            for (std::size_t y = 0; y < n; ++y) dot += d_weights(x, y) * c.weights(x, y);
            for (std::size_t y = 0; y < n; ++y) d_raw(x, y) = (d_weights(x, y) - dot) / c.row_mass(x, 0);
        }
    }

    const Matrix d_scores = hadamard(d_raw, c.modulation);
    if (!cfg.stop_gradient_modulation && cfg.p != 2.0) {
        // P(x,y) depends on v(x) - v(y) through the clamped distance.
        Matrix g(n, n);
        for (std::size_t x = 0; x < n; ++x)
            for (std::size_t y = 0; y < n; ++y)
                g(x, y) = d_raw(x, y) * c.scores(x, y) *
                          clamp_derivative_factor(c.distances(x, y), cfg.p, cfg.epsilon_clamp);
        for (std::size_t x = 0; x < n; ++x) {
            for (std::size_t y = 0; y < n; ++y) {
                if (x == y || c.distances(x, y) < cfg.epsilon_clamp) continue;
                const double coeff = (g(x, y) + g(y, x)) / c.distances(x, y);
                for (std::size_t d = 0; d < c.v.cols(); ++d) d_v(x, d) += coeff * (c.v(x, d) - c.v(y, d));
            }
        }
    }

    // Softmax Jacobian, then the 1/sqrt(d_qk) logit scale.
    Matrix d_logits(n, n);
    const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(cfg.d_qk));
    for (std::size_t x = 0; x < n; ++x) {
        double dot = 0.0;
        for (std::size_t y = 0; y < n; ++y) dot += d_scores(x, y) * c.scores(x, y);
        for (std::size_t y = 0; y < n; ++y)
            d_logits(x, y) = c.scores(x, y) * (d_scores(x, y) - dot) * inv_sqrt_d;
    }
    const Matrix d_q = matmul(d_logits, c.k);
    const Matrix d_k = transposed_matmul(d_logits, c.q);

    HeadGrads g;
    g.w_q = transposed_matmul(d_q, input);
    g.w_k = transposed_matmul(d_k, input);
    g.w_v = transposed_matmul(d_v, input);
    g.input = add(add(matmul(d_q, w.w_q), matmul(d_k, w.w_k)), matmul(d_v, w.w_v));
    return g;
}

Matrix layer_scale_backward(const Matrix& scaled, const Matrix& inv_std, const Matrix& d_scaled) {
    Matrix d_in(scaled.rows(), scaled.cols());
    const double width = static_cast<double>(scaled.cols());
    for (std::size_t i = 0; i < scaled.rows(); ++i) {
        double mean_d = 0.0, mean_dy = 0.0;
        for (std::size_t j = 0; j < scaled.cols(); ++j) {
            mean_d += d_scaled(i, j);
            mean_dy += d_scaled(i, j) * scaled(i, j);
        }
        mean_d /= width;
        mean_dy /= width;
        for (std::size_t j = 0; j < scaled.cols(); ++j)
            d_in(i, j) = inv_std(i, 0) * (d_scaled(i, j) - mean_d - scaled(i, j) * mean_dy);
    }
    return d_in;
}

Matrix inverse_row_std(const Matrix& x) {
    constexpr double kEps = 1e-5;  // matches layer_scale
    Matrix out(x.rows(), 1);
    const double width = static_cast<double>(x.cols());
    for (std::size_t i = 0; i < x.rows(); ++i) {
        double mean = 0.0;
        for (double a : x.row(i)) mean += a;
        mean /= width;
        double var = 0.0;
        for (double a : x.row(i)) var += (a - mean) * (a - mean);
        out(i, 0) = 1.0 / std::sqrt(var / width + kEps);
    }
    return out;
}

}  // namespace

ForwardCache forward(const ModelSpec& model, const TokenSequence& x, const ModulationOverride* frozen) {
    const ModelConfig& cfg = model.config;
    if (x.cols() != cfg.d_x)
        throw ShapeError("forward: input " + x.shape_string() + " vs d_x " + std::to_string(cfg.d_x));
    if (!model.positional_table.empty() && x.rows() != model.positional_table.rows())
        throw ShapeError("forward: input " + x.shape_string() + " vs positional table " +
                         model.positional_table.shape_string());

    ForwardCache cache;
    cache.model = &model;
    cache.generation = model.generation;
    cache.states.push_back(model.positional_table.empty() ? x : add(x, model.positional_table));

    for (std::size_t l = 0; l < model.layers.size(); ++l) {
        const LayerConfig& layer = model.layers[l];
        LayerCache lc;
        lc.input = cache.states.back();
        if (layer.use_layer_scaling) {
            lc.scaled_input = layer_scale(lc.input);
            lc.inv_std = inverse_row_std(lc.input);
        } else {
            lc.scaled_input = lc.input;
        }
        lc.concat = Matrix(x.rows(), layer.concat_width());
        std::size_t offset = 0;
        for (std::size_t h = 0; h < layer.heads.size(); ++h) {
            const Matrix* fixed = frozen != nullptr ? &(*frozen)[l][h] : nullptr;
            HeadCache hc = head_forward(lc.scaled_input, model.heads[l][h], layer.heads[h], fixed);
            const Matrix out = matmul(hc.weights, hc.v);
            for (std::size_t i = 0; i < out.rows(); ++i)
                for (std::size_t j = 0; j < out.cols(); ++j) lc.concat(i, offset + j) = out(i, j);
            offset += out.cols();
            lc.heads.push_back(std::move(hc));
        }
        Matrix next = cfg.bare_attention ? lc.concat : add(matmul(lc.concat, layer.w_o), lc.input);
        cache.layers.push_back(std::move(lc));
        cache.states.push_back(std::move(next));
    }

    const Matrix& last = cache.states.back();
    cache.pooled = Matrix(1, last.cols());
    for (std::size_t j = 0; j < last.cols(); ++j) {
        double acc = 0.0;
        for (std::size_t i = 0; i < last.rows(); ++i) acc += last(i, j);
        cache.pooled(0, j) = acc / static_cast<double>(last.rows());
    }
    cache.logits = add(matmul_transposed(cache.pooled, model.classifier), model.classifier_bias);
    return cache;
}

Gradients backward(const ModelSpec& model, const ForwardCache& cache, const Matrix& logit_grad) {
    if (cache.model != &model || cache.generation != model.generation)
        throw std::logic_error("backward: cache is stale (model changed since forward)");
    if (logit_grad.rows() != 1 || logit_grad.cols() != model.config.n_classes)
        throw ShapeError("backward: logit gradient " + logit_grad.shape_string());

    const ModelConfig& cfg = model.config;
    const std::size_t n_layers = model.layers.size();
    std::vector<std::vector<HeadGrads>> head_grads(n_layers);
    std::vector<Matrix> w_o_grads(n_layers);

    const Matrix d_classifier = transposed_matmul(logit_grad, cache.pooled);
    const Matrix d_pooled = matmul(logit_grad, model.classifier);
    const Matrix& last = cache.states.back();
    Matrix d_state(last.rows(), last.cols());
    for (std::size_t i = 0; i < last.rows(); ++i)
        for (std::size_t j = 0; j < last.cols(); ++j) d_state(i, j) = d_pooled(0, j) / static_cast<double>(last.rows());

    for (std::size_t l = n_layers; l-- > 0;) {
        const LayerConfig& layer = model.layers[l];
        const LayerCache& lc = cache.layers[l];
        Matrix d_concat;
        Matrix d_input;
        if (cfg.bare_attention) {
            d_concat = d_state;
            d_input = Matrix(lc.input.rows(), lc.input.cols());
        } else {
            w_o_grads[l] = transposed_matmul(lc.concat, d_state);
            d_concat = matmul_transposed(d_state, layer.w_o);
            d_input = d_state;
        }
        Matrix d_scaled(lc.input.rows(), lc.input.cols());
        std::size_t offset = 0;
        for (std::size_t h = 0; h < layer.heads.size(); ++h) {
            const std::size_t width = layer.heads[h].d_v;
            Matrix d_out(d_concat.rows(), width);
            for (std::size_t i = 0; i < d_out.rows(); ++i)
                for (std::size_t j = 0; j < width; ++j) d_out(i, j) = d_concat(i, offset + j);
            offset += width;
            HeadGrads g = head_backward(lc.scaled_input, model.heads[l][h], layer.heads[h], lc.heads[h], d_out);
            d_scaled = add(d_scaled, g.input);
            head_grads[l].push_back(std::move(g));
        }
        d_input = add(d_input, layer.use_layer_scaling ? layer_scale_backward(lc.scaled_input, lc.inv_std, d_scaled)
                                                       : d_scaled);
        d_state = std::move(d_input);
    }

    Gradients grads;
    for (std::size_t l = 0; l < n_layers; ++l) {
        for (auto& g : head_grads[l]) {
            grads.push_back(std::move(g.w_q));
            grads.push_back(std::move(g.w_k));
            grads.push_back(std::move(g.w_v));
        }
        if (!cfg.bare_attention) grads.push_back(std::move(w_o_grads[l]));
    }
    grads.push_back(d_classifier);
    grads.push_back(logit_grad);
    return grads;
}

LossAndGrad cross_entropy(const Matrix& logits, int label) {
    if (logits.rows() != 1 || label < 0 || static_cast<std::size_t>(label) >= logits.cols())
        throw std::invalid_argument("cross_entropy: label out of range or logits not a row");
    const auto row = logits.row(0);
    const auto lab = static_cast<std::size_t>(label);
    LossAndGrad out;
    out.predicted = static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
    out.logit_grad = row_softmax(logits);
    if (static_cast<std::size_t>(out.predicted) == lab) {
        // Confident-correct regime: avoid cancellation in both the loss and 1 - p_label.
        double rest = 0.0;
        for (std::size_t j = 0; j < row.size(); ++j)
            if (j != lab) rest += std::exp(row[j] - row[lab]);
        out.loss = std::log1p(rest);
        out.logit_grad(0, lab) = -rest / (1.0 + rest);
    } else {
        const double mx = row[static_cast<std::size_t>(out.predicted)];
        double z = 0.0;
        for (double v : row) z += std::exp(v - mx);
        out.loss = mx + std::log(z) - row[lab];
        out.logit_grad(0, lab) -= 1.0;
    }
    return out;
}

std::vector<GradientCheckEntry> gradient_check(ModelSpec model, const TokenSequence& x, int label, double h) {
    const ForwardCache base = forward(model, x);
    const Gradients analytic = backward(model, base, cross_entropy(base.logits, label).logit_grad);

    ModulationOverride frozen;
    bool any_frozen = false;
    for (std::size_t l = 0; l < model.layers.size(); ++l) {
        frozen.emplace_back();
        for (std::size_t hd = 0; hd < model.layers[l].heads.size(); ++hd) {
            frozen[l].push_back(base.layers[l].heads[hd].modulation);
            any_frozen = any_frozen || model.layers[l].heads[hd].stop_gradient_modulation;
        }
    }
    // Heads without stop-gradient must see a live P; only freeze the flagged ones.
    auto loss_at = [&](const ModelSpec& m) {
        if (!any_frozen) return cross_entropy(forward(m, x).logits, label).loss;
        ModulationOverride mixed = frozen;
        const ForwardCache live = forward(m, x);
        for (std::size_t l = 0; l < m.layers.size(); ++l)
            for (std::size_t hd = 0; hd < m.layers[l].heads.size(); ++hd)
                if (!m.layers[l].heads[hd].stop_gradient_modulation) mixed[l][hd] = live.layers[l].heads[hd].modulation;
        return cross_entropy(forward(m, x, &mixed).logits, label).loss;
    };

    double largest = 0.0;
    for (const Matrix& g : analytic) largest = std::max(largest, frobenius_norm(g));
    const double floor = std::max(kGradientNormFloor, kRelativeGradientFloor * largest);

    std::vector<GradientCheckEntry> report;
    auto params = parameters(model);
    for (std::size_t pi = 0; pi < params.size(); ++pi) {
        Matrix& w = *params[pi].value;
        Matrix numeric(w.rows(), w.cols());
        for (std::size_t i = 0; i < w.size(); ++i) {
            const double saved = w.data()[i];
            w.data()[i] = saved + h;
            const double up = loss_at(model);
            w.data()[i] = saved - h;
            const double down = loss_at(model);
            w.data()[i] = saved;
            numeric.data()[i] = (up - down) / (2.0 * h);
        }
        const double diff = frobenius_norm(subtract(analytic[pi], numeric));
        const double scale_norm =
            std::max({frobenius_norm(analytic[pi]), frobenius_norm(numeric), floor});
        report.push_back({params[pi].name, diff / scale_norm,
                          frobenius_norm(analytic[pi])});
    }
    return report;
}

}  // namespace plat
