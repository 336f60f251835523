// Randomized verification sweeps shared by the CLI and the acceptance suite.

#ifndef PLAT_CHECKS_HPP
#define PLAT_CHECKS_HPP

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace plat {

struct EquivalenceRecord {
    std::size_t trial = 0;
    std::size_t n_tokens = 0, d_model = 0, d_qk = 0, d_v = 0;
    double attention_diff = 0.0;  // max |p-LaT(p=2) - softmax attention|
    double flow_step_diff = 0.0;  // max |Euler step (paper_rowwise, p=2) - symmetric attention|
};

/// Random shapes N in [1, max_tokens], widths in [1, max_dim]; entries U(-1, 1).
std::vector<EquivalenceRecord> equivalence_trials(std::size_t trials, std::size_t max_tokens,
                                                  std::size_t max_dim, std::uint64_t seed);

/// Header: trial,n_tokens,d_model,d_qk,d_v,attention_max_abs_diff,flow_step_max_abs_diff
void write_equivalence_csv(std::ostream& out, const std::vector<EquivalenceRecord>& records);

struct GradcheckSweep {
    std::size_t configs = 20;
    std::size_t n_tokens = 4;
    std::size_t d_x = 3;
    std::size_t d_qk = 2;
    std::size_t d_v = 2;
    std::size_t n_layers = 2;
    std::vector<double> p_values{1.5, 2.0, 2.5};
    double h = 1e-5;
    double init_scale = 0.5;
};

struct GradcheckRecord {
    std::size_t config = 0;
    double p_head0 = 2.0, p_head1 = 2.0;
    bool stop_gradient = false;
    std::string parameter;
    double relative_error = 0.0;
};

/// Two heads per layer. Config i uses p_values[i % m] and p_values[(i / m + 1) % m]
/// (so every p meets every other) and alternates stop_gradient.
std::vector<GradcheckRecord> gradcheck_sweep(const GradcheckSweep& sweep, std::uint64_t seed);

/// Header: config,p_head0,p_head1,stop_gradient,parameter,relative_error
void write_gradcheck_csv(std::ostream& out, const std::vector<GradcheckRecord>& records);

}  // namespace plat

#endif  // PLAT_CHECKS_HPP
