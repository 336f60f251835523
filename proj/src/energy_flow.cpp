#include "plat/energy_flow.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <stdexcept>

#include "plat/csv.hpp"

namespace plat {

std::string to_string(KernelMode mode) {
    switch (mode) {
        case KernelMode::asymmetric: return "asymmetric";
        case KernelMode::symmetric: return "symmetric";
        case KernelMode::symmetric_keys: return "symmetric_keys";
    }
    return "unknown";
}

KernelMode kernel_mode_from_string(const std::string& name) {
    if (name == "asymmetric") return KernelMode::asymmetric;
    if (name == "symmetric") return KernelMode::symmetric;
    if (name == "symmetric_keys") return KernelMode::symmetric_keys;
    throw std::invalid_argument("unknown kernel mode '" + name + "'");
}

EnergyKernel EnergyKernel::from_matrix(KernelMode mode, Matrix matrix) {
    if (matrix.rows() != matrix.cols())
        throw ShapeError("kernel: matrix must be square, got " + matrix.shape_string());
    for (double w : matrix.data()) {
        if (!(w > 0.0) || !std::isfinite(w))
            throw std::invalid_argument("kernel: entries must be finite and strictly positive");
    }
    if (mode != KernelMode::asymmetric) {
        for (std::size_t i = 0; i < matrix.rows(); ++i)
            for (std::size_t j = i + 1; j < matrix.cols(); ++j)
                if (matrix(i, j) != matrix(j, i))
                    throw std::invalid_argument("kernel: symmetric mode given an asymmetric matrix");
    }
    return {mode, std::move(matrix)};
}

EnergyKernel make_kernel(KernelMode mode, const Matrix& queries, const Matrix& keys) {
    const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(keys.cols()));
    auto exp_logits = [&](const Matrix& left) {
        Matrix m = matmul_transposed(left, keys);
        for (double& x : m.data()) x = std::exp(x * inv_sqrt_d);
        return m;
    };
    switch (mode) {
        case KernelMode::asymmetric:
            if (queries.rows() != keys.rows() || queries.cols() != keys.cols())
                throw ShapeError("kernel: queries " + queries.shape_string() + " vs keys " +
                                 keys.shape_string());
            return EnergyKernel::from_matrix(mode, exp_logits(queries));
        case KernelMode::symmetric: {
            if (queries.rows() != keys.rows() || queries.cols() != keys.cols())
                throw ShapeError("kernel: queries " + queries.shape_string() + " vs keys " +
                                 keys.shape_string());
            const Matrix k = exp_logits(queries);
            Matrix sym(k.rows(), k.cols());
            for (std::size_t i = 0; i < k.rows(); ++i)
                for (std::size_t j = 0; j < k.cols(); ++j) sym(i, j) = k(i, j) + k(j, i);
            return EnergyKernel::from_matrix(mode, std::move(sym));
        }
        case KernelMode::symmetric_keys: {
            // Fill the lower triangle from the upper so the matrix is exactly symmetric.
            Matrix k = exp_logits(keys);
            for (std::size_t i = 0; i < k.rows(); ++i)
                for (std::size_t j = 0; j < i; ++j) k(i, j) = k(j, i);
            return EnergyKernel::from_matrix(mode, std::move(k));
        }
    }
    throw std::invalid_argument("kernel: bad mode");
}

namespace {

void require_kernel_matches(const TokenSequence& u, const EnergyKernel& kernel) {
    if (kernel.matrix.rows() != u.rows() || kernel.matrix.cols() != u.rows()) {
        throw ShapeError("energy: kernel " + kernel.matrix.shape_string() + " vs " +
                         std::to_string(u.rows()) + " tokens");
    }
}

double row_distance(const TokenSequence& u, std::size_t x, std::size_t y) {
    double acc = 0.0;
    for (std::size_t d = 0; d < u.cols(); ++d) {
        const double diff = u(x, d) - u(y, d);
        acc += diff * diff;
    }
    return std::sqrt(acc);
}

// -grad J for any kernel (asymmetric included); flow_rhs adds the mode check.
TokenSequence negative_gradient(const TokenSequence& u, const EnergyKernel& kernel, double p,
                                double eps) {
    require_kernel_matches(u, kernel);
    const std::size_t n = u.rows();
    const Matrix& k = kernel.matrix;
    TokenSequence out(n, u.cols());
    for (std::size_t x = 0; x < n; ++x) {
        auto dst = out.row(x);
        for (std::size_t y = 0; y < n; ++y) {
            if (y == x) continue;
            double coeff = k(x, y) + k(y, x);
            if (p != 2.0) coeff *= std::pow(std::max(row_distance(u, x, y), eps), p - 2.0);
            for (std::size_t d = 0; d < u.cols(); ++d) dst[d] -= coeff * (u(x, d) - u(y, d));
        }
    }
    return out;
}

}  // namespace

double energy_functional(const TokenSequence& u, const EnergyKernel& kernel, double p) {
    require_kernel_matches(u, kernel);
    if (!(p > 1.0)) throw std::invalid_argument("energy: p must be > 1");
    const std::size_t n = u.rows();
    double total = 0.0;
    for (std::size_t x = 0; x < n; ++x) {
        for (std::size_t y = 0; y < n; ++y) {
            if (x == y) continue;
            const double dist = row_distance(u, x, y);
            const double term = p == 2.0 ? dist * dist : std::pow(dist, p);
            total += kernel.matrix(x, y) * term;
        }
    }
    return total / p;
}

TokenSequence flow_rhs(const TokenSequence& u, const EnergyKernel& kernel, double p, double eps) {
    if (!kernel.is_symmetric_mode())
        throw std::invalid_argument("flow_rhs: the gradient flow requires a symmetric kernel mode");
    return negative_gradient(u, kernel, p, eps);
}

FlowState initial_state(TokenSequence u0, const EnergyKernel& kernel, double p) {
    const double energy = energy_functional(u0, kernel, p);
    return {std::move(u0), 0, energy};
}

FlowState euler_step(const FlowState& state, const EnergyKernel& kernel, double p,
                     const StepMode& step_mode, double eps) {
    if (step_mode.kind == StepMode::Kind::fixed && !(step_mode.dt > 0.0))
        throw std::invalid_argument("euler_step: fixed step size must be positive");
    const TokenSequence rhs = flow_rhs(state.u, kernel, p, eps);
    const Matrix& k = kernel.matrix;
    const std::size_t n = state.u.rows();

    FlowState next{state.u, state.step_index + 1, 0.0};
    for (std::size_t x = 0; x < n; ++x) {
        double dt = step_mode.dt;
        if (step_mode.kind == StepMode::Kind::paper_rowwise) {
            double mass = 0.0;
            for (std::size_t y = 0; y < n; ++y) mass += k(x, y) + k(y, x);
            dt = 1.0 / mass;
        }
        auto dst = next.u.row(x);
        const auto dir = rhs.row(x);
        for (std::size_t d = 0; d < dst.size(); ++d) dst[d] += dt * dir[d];
    }
    next.energy = energy_functional(next.u, kernel, p);
    return next;
}

namespace {

double monotone_fraction(const std::vector<std::pair<double, double>>& transitions) {
    if (transitions.empty()) return 1.0;
    std::size_t ok = 0;
    for (const auto& [before, after] : transitions)
        if (after <= before + kMonotoneSlack) ++ok;
    return static_cast<double>(ok) / static_cast<double>(transitions.size());
}

}  // namespace

EnergyReport run_flow(const TokenSequence& u0, const EnergyKernel& kernel, double p,
                      std::size_t steps, const StepMode& step_mode, const FlowOptions& options) {
    if (steps < 1) throw std::invalid_argument("run_flow: steps must be >= 1");
    EnergyReport report;
    FlowState state = initial_state(u0, kernel, p);
    std::vector<std::pair<double, double>> transitions;

    auto record = [&](const FlowState& s) {
        const double grad = frobenius_norm(flow_rhs(s.u, kernel, p, options.eps));
        report.trajectory.push_back({s.step_index, s.energy, grad});
        report.final_gradient_norm = grad;
        return grad < options.tolerance;
    };

    report.converged = record(state);
    for (std::size_t i = 0; i < steps && !report.converged; ++i) {
        FlowState next = euler_step(state, kernel, p, step_mode, options.eps);
        transitions.emplace_back(state.energy, next.energy);
        state = std::move(next);
        report.converged = record(state);
    }
    report.monotone_fraction = monotone_fraction(transitions);
    return report;
}

EnergyReport layer_energy_audit(std::span<const TokenSequence> states,
                                std::span<const EnergyKernel> kernels, double p,
                                const FlowOptions& options) {
    if (states.size() < 2) throw std::invalid_argument("layer_energy_audit: need at least 2 states");
    const bool shared = kernels.size() == 1;
    if (!shared && kernels.size() != states.size() - 1) {
        throw std::invalid_argument("layer_energy_audit: expected 1 or " +
                                    std::to_string(states.size() - 1) + " kernels, got " +
                                    std::to_string(kernels.size()));
    }
    auto kernel_for = [&](std::size_t transition) -> const EnergyKernel& {
        return shared ? kernels[0] : kernels[transition];
    };

    EnergyReport report;
    std::vector<std::pair<double, double>> transitions;
    for (std::size_t l = 0; l < states.size(); ++l) {
        const EnergyKernel& k = kernel_for(std::min(l, states.size() - 2));
        const double energy = energy_functional(states[l], k, p);
        const double grad = frobenius_norm(negative_gradient(states[l], k, p, options.eps));
        report.trajectory.push_back({l, energy, grad});
        report.final_gradient_norm = grad;
        if (l + 1 < states.size()) {
            const double after = energy_functional(states[l + 1], k, p);
            transitions.emplace_back(energy, after);
        }
    }
    report.monotone_fraction = monotone_fraction(transitions);
    report.converged = report.final_gradient_norm < options.tolerance;
    return report;
}

void write_energy_csv(std::ostream& out, const EnergyReport& report) {
    out << "step,energy,gradient_norm\n";
    for (const auto& pt : report.trajectory)
        out << pt.step << ',' << format_real(pt.energy) << ',' << format_real(pt.gradient_norm)
            << '\n';
}

}  // namespace plat
