#include "plat/checks.hpp"

#include <ostream>
#include <random>

#include "plat/attention.hpp"
#include "plat/csv.hpp"
#include "plat/energy_flow.hpp"
#include "plat/model.hpp"

namespace plat {

namespace {

Matrix uniform_matrix(std::mt19937_64& rng, std::size_t rows, std::size_t cols) {
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    Matrix m(rows, cols);
    for (double& x : m.data()) x = dist(rng);
    return m;
}

}  // namespace

std::vector<EquivalenceRecord> equivalence_trials(std::size_t trials, std::size_t max_tokens,
                                                  std::size_t max_dim, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    auto pick = [&](std::size_t hi) { return std::uniform_int_distribution<std::size_t>(1, hi)(rng); };
    std::vector<EquivalenceRecord> out;
    for (std::size_t t = 0; t < trials; ++t) {
        EquivalenceRecord r;
        r.trial = t;
        r.n_tokens = pick(max_tokens);
        r.d_model = pick(max_dim);
        r.d_qk = pick(max_dim);
        r.d_v = pick(max_dim);
        const Matrix x = uniform_matrix(rng, r.n_tokens, r.d_model);
        const HeadWeights w{uniform_matrix(rng, r.d_qk, r.d_model), uniform_matrix(rng, r.d_qk, r.d_model),
                            uniform_matrix(rng, r.d_v, r.d_model)};
        AttentionHeadConfig cfg;
        cfg.d_model = r.d_model;
        cfg.d_qk = r.d_qk;
        cfg.d_v = r.d_v;
        cfg.p = 2.0;
        const QKV qkv = project_qkv(x, w);
        r.attention_diff =
            max_abs_diff(plat_attention(qkv.q, qkv.k, qkv.v, cfg), softmax_attention(qkv.q, qkv.k, qkv.v));

        // One rowwise Euler step of the p = 2 flow under the symmetric-keys
        // kernel is softmax attention with queries tied to keys.
        const EnergyKernel kernel = make_kernel(KernelMode::symmetric_keys, qkv.k, qkv.k);
        const FlowState next = euler_step(initial_state(qkv.v, kernel, 2.0), kernel, 2.0, StepMode::paper_rowwise());
        r.flow_step_diff = max_abs_diff(next.u, softmax_attention(qkv.k, qkv.k, qkv.v));
        out.push_back(r);
    }
    return out;
}

void write_equivalence_csv(std::ostream& out, const std::vector<EquivalenceRecord>& records) {
    out << "trial,n_tokens,d_model,d_qk,d_v,attention_max_abs_diff,flow_step_max_abs_diff\n";
    for (const auto& r : records) {
        out << r.trial << ',' << r.n_tokens << ',' << r.d_model << ',' << r.d_qk << ',' << r.d_v << ','
            << format_real(r.attention_diff) << ',' << format_real(r.flow_step_diff) << '\n';
    }
}

std::vector<GradcheckRecord> gradcheck_sweep(const GradcheckSweep& sweep, std::uint64_t seed) {
    if (sweep.p_values.empty()) throw std::invalid_argument("gradcheck: p_values must not be empty");
    std::vector<GradcheckRecord> out;
    const std::size_t m = sweep.p_values.size();
    for (std::size_t i = 0; i < sweep.configs; ++i) {
        ModelConfig cfg;
        cfg.n_tokens = sweep.n_tokens;
        cfg.d_x = sweep.d_x;
        cfg.d_qk = sweep.d_qk;
        cfg.d_v = sweep.d_v;
        cfg.n_layers = sweep.n_layers;
        cfg.head_p = {sweep.p_values[i % m], sweep.p_values[(i / m + 1) % m]};
        cfg.stop_gradient_modulation = i % 2 == 1;
        cfg.init_scale = sweep.init_scale;
        const std::uint64_t s = seed + i;
        std::mt19937_64 rng(s);
        const Matrix x = uniform_matrix(rng, cfg.n_tokens, cfg.d_x);
        const int label = static_cast<int>(i % cfg.n_classes);
        for (const auto& e : gradient_check(init_model(cfg, s), x, label, sweep.h)) {
            out.push_back({i, cfg.head_p[0], cfg.head_p[1], cfg.stop_gradient_modulation, e.name, e.relative_error});
        }
    }
    return out;
}

void write_gradcheck_csv(std::ostream& out, const std::vector<GradcheckRecord>& records) {
    out << "config,p_head0,p_head1,stop_gradient,parameter,relative_error\n";
    for (const auto& r : records) {
        out << r.config << ',' << format_real(r.p_head0) << ',' << format_real(r.p_head1) << ','
            << (r.stop_gradient ? 1 : 0) << ',' << r.parameter << ',' << format_real(r.relative_error) << '\n';
    }
}

}  // namespace plat
