#include "plat/spectral.hpp"

#include <cmath>
#include <limits>
#include <ostream>
#include <random>
#include <stdexcept>

#include "json.hpp"
#include "plat/csv.hpp"

namespace plat {

std::string to_string(Regime regime) {
    switch (regime) {
        case Regime::homophily: return "homophily";
        case Regime::heterophily: return "heterophily";
        case Regime::mixed: return "mixed";
    }
    return "unknown";
}

std::vector<double> dc_component(std::span<const double> z) {
    double mean = 0.0;
    for (double x : z) mean += x;
    mean /= static_cast<double>(z.size());
    return std::vector<double>(z.size(), mean);
}

std::vector<double> hc_component(std::span<const double> z) {
    const auto dc = dc_component(z);
    std::vector<double> out(z.size());
    for (std::size_t i = 0; i < z.size(); ++i) out[i] = z[i] - dc[i];
    return out;
}

namespace {

double hc_dc_ratio(std::span<const double> z) {
    const double dc = norm2(dc_component(z));
    const double hc = norm2(hc_component(z));
    if (dc == 0.0) return std::numeric_limits<double>::infinity();
    return hc / dc;
}

void require_square(const Matrix& a, std::size_t n, const char* op) {
    if (a.rows() != a.cols() || a.rows() != n) {
        throw ShapeError(std::string(op) + ": operator " + a.shape_string() +
                         " vs signal of length " + std::to_string(n));
    }
}

}  // namespace

LowPassTrajectory low_pass_ratio(const Matrix& a, std::span<const double> z, std::size_t t_max) {
    require_square(a, z.size(), "low_pass_ratio");
    LowPassTrajectory out;
    std::vector<double> current(z.begin(), z.end());
    out.points.push_back({0, hc_dc_ratio(current)});
    for (std::size_t t = 1; t <= t_max; ++t) {
        current = matvec(a, current);
        const double norm = norm2(current);
        if (norm > 0.0 && std::isfinite(norm))
            for (double& x : current) x /= norm;
        out.points.push_back({t, hc_dc_ratio(current)});
    }
    out.is_low_pass_empirical = out.points.back().ratio < kLowPassThreshold;
    return out;
}

EigenEstimate dominant_eigenvalue(const Matrix& a, double tol, std::size_t max_iter) {
    require_square(a, a.rows(), "dominant_eigenvalue");
    const std::size_t n = a.rows();
    EigenEstimate est;
    for (double x : a.data())
        if (!(x > 0.0)) est.positive_matrix = false;

    std::mt19937_64 rng(0x5eed);
    std::uniform_real_distribution<double> noise(0.0, 1e-3);
    std::vector<double> v(n);
    for (double& x : v) x = 1.0 + noise(rng);
    double norm = norm2(v);
    for (double& x : v) x /= norm;

    for (std::size_t it = 1; it <= max_iter; ++it) {
        const auto w = matvec(a, v);
        double lambda = 0.0;
        for (std::size_t i = 0; i < n; ++i) lambda += v[i] * w[i];
        double residual = 0.0;
        for (std::size_t i = 0; i < n; ++i) residual += (w[i] - lambda * v[i]) * (w[i] - lambda * v[i]);
        residual = std::sqrt(residual);

        est.lambda_max = lambda;
        est.iterations = it;
        est.eigenvector = v;
        if (residual < tol) {
            est.converged = est.positive_matrix;
            break;
        }
        norm = norm2(w);
        if (!(norm > 0.0) || !std::isfinite(norm)) break;
        for (std::size_t i = 0; i < n; ++i) v[i] = w[i] / norm;
    }
    return est;
}

Regime classify_regime(const TokenSequence& v) {
    if (v.rows() < 2) throw std::invalid_argument("classify_regime: need at least 2 tokens");
    const Matrix dist = pairwise_distances(v);
    bool all_close = true;
    bool all_far = true;
    for (std::size_t x = 0; x < v.rows(); ++x) {
        for (std::size_t y = x + 1; y < v.rows(); ++y) {
            if (dist(x, y) < 1.0)
                all_far = false;
            else
                all_close = false;
        }
    }
    if (all_close) return Regime::homophily;
    if (all_far) return Regime::heterophily;
    return Regime::mixed;
}

Matrix plat_operator_matrix(const Matrix& q, const Matrix& k, const Matrix& v,
                            const AttentionHeadConfig& cfg) {
    cfg.validate();
    return combined_weights(q, k, v, cfg);
}

SpectralReport build_spectral_report(const Matrix& a, std::span<const double> z, std::size_t t_max,
                                     const TokenSequence* values) {
    SpectralReport report;
    report.operator_dim = a.rows();
    auto traj = low_pass_ratio(a, z, t_max);
    report.ratio_trajectory = std::move(traj.points);
    report.is_low_pass_empirical = traj.is_low_pass_empirical;
    const auto eig = dominant_eigenvalue(a);
    report.lambda_max = eig.lambda_max;
    report.lambda_max_converged = eig.converged;
    if (values != nullptr) report.regime = classify_regime(*values);
    return report;
}

void write_ratio_csv(std::ostream& out, const SpectralReport& report) {
    out << "t,ratio\n";
    for (const auto& pt : report.ratio_trajectory) out << pt.t << ',' << format_real(pt.ratio) << '\n';
}

std::string spectral_summary_json(const SpectralReport& report) {
    nlohmann::ordered_json doc;
    doc["operator_dim"] = report.operator_dim;
    doc["lambda_max"] = report.lambda_max;
    doc["lambda_max_converged"] = report.lambda_max_converged;
    doc["is_low_pass_empirical"] = report.is_low_pass_empirical;
    // JSON has no infinity; a vanished DC part is written as the string "inf".
    if (report.ratio_trajectory.empty()) {
        doc["final_ratio"] = nullptr;
    } else if (const double r = report.ratio_trajectory.back().ratio; std::isfinite(r)) {
        doc["final_ratio"] = r;
    } else {
        doc["final_ratio"] = format_real(r);
    }
    doc["regime"] = report.regime ? nlohmann::ordered_json(to_string(*report.regime))
                                  : nlohmann::ordered_json(nullptr);
    return doc.dump(2);
}

}  // namespace plat
