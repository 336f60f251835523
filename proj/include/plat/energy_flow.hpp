// p-Laplacian energy over a token sequence and its explicit gradient flow.
//
//   J(u) = (1/p) sum_{x,y} k(x,y) |u(y) - u(x)|^p
//   du(x)/dt = -sum_y K(x,y) c(x,y) (u(x) - u(y)),   K = k + k^T,
//   c(x,y) = max(|u(x) - u(y)|, eps)^(p-2)
//
// The right-hand side is exactly -grad J wherever no pair sits inside the
// clamp. The kernel is fixed for the duration of a flow run.

#ifndef PLAT_ENERGY_FLOW_HPP
#define PLAT_ENERGY_FLOW_HPP

#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "plat/numerics.hpp"

namespace plat {

enum class KernelMode {
    asymmetric,      // k(x,y) = exp(q(x).k(y) / sqrt(d_qk))
    symmetric,       // k(x,y) + k(y,x) of the asymmetric kernel
    symmetric_keys,  // exp(k(x).k(y) / sqrt(d_qk))
};

std::string to_string(KernelMode mode);
KernelMode kernel_mode_from_string(const std::string& name);

struct EnergyKernel {
    KernelMode mode = KernelMode::symmetric_keys;
    Matrix matrix;  // N x N, strictly positive

    /// Wraps an explicit weight matrix. Throws if not square, not strictly
    /// positive, or not symmetric under a symmetric mode.
    static EnergyKernel from_matrix(KernelMode mode, Matrix matrix);
    bool is_symmetric_mode() const { return mode != KernelMode::asymmetric; }
};

/// Builds the kernel from query/key rows. `queries` is ignored for
/// symmetric_keys.
EnergyKernel make_kernel(KernelMode mode, const Matrix& queries, const Matrix& keys);

struct StepMode {
    enum class Kind { paper_rowwise, fixed };
    Kind kind = Kind::paper_rowwise;
    double dt = 0.0;  // used only by Kind::fixed

    static StepMode paper_rowwise() { return {Kind::paper_rowwise, 0.0}; }
    static StepMode fixed(double dt) { return {Kind::fixed, dt}; }
};

struct FlowState {
    TokenSequence u;
    std::size_t step_index = 0;
    double energy = 0.0;
};

struct EnergyPoint {
    std::size_t step = 0;
    double energy = 0.0;
    double gradient_norm = 0.0;
};

struct EnergyReport {
    std::vector<EnergyPoint> trajectory;
    double monotone_fraction = 1.0;
    bool converged = false;
    double final_gradient_norm = 0.0;
};

/// Absolute slack when deciding that J did not increase.
inline constexpr double kMonotoneSlack = 1e-12;
inline constexpr double kDefaultFlowTolerance = 1e-8;
inline constexpr double kDefaultClamp = 1e-5;

double energy_functional(const TokenSequence& u, const EnergyKernel& kernel, double p);

/// Negative gradient direction; requires a symmetric kernel mode.
TokenSequence flow_rhs(const TokenSequence& u, const EnergyKernel& kernel, double p,
                       double eps = kDefaultClamp);

FlowState initial_state(TokenSequence u0, const EnergyKernel& kernel, double p);

/// One explicit Euler step. paper_rowwise uses dt(x) = 1 / sum_y K(x,y).
FlowState euler_step(const FlowState& state, const EnergyKernel& kernel, double p,
                     const StepMode& step_mode, double eps = kDefaultClamp);

struct FlowOptions {
    double eps = kDefaultClamp;
    double tolerance = kDefaultFlowTolerance;
};

/// Integrates up to `steps` Euler steps, stopping early once the gradient
/// norm drops below options.tolerance. Step 0 is always recorded.
EnergyReport run_flow(const TokenSequence& u0, const EnergyKernel& kernel, double p,
                      std::size_t steps, const StepMode& step_mode, const FlowOptions& options = {});

/// Energy of successive layer states. `kernels` holds either one kernel for
/// all states or one per transition (states.size() - 1); transition l is
/// judged by J(U^{l+1}; k_l) <= J(U^l; k_l).
EnergyReport layer_energy_audit(std::span<const TokenSequence> states,
                                std::span<const EnergyKernel> kernels, double p,
                                const FlowOptions& options = {});

/// CSV with header "step,energy,gradient_norm".
void write_energy_csv(std::ostream& out, const EnergyReport& report);

}  // namespace plat

#endif  // PLAT_ENERGY_FLOW_HPP
