// Frequency diagnostics for attention operators.
//
// A signal z splits into its DC part (the mean, repeated) and its HC part
// (z minus the mean). An operator A acts as a low-pass filter on z when
// |HC(A^t z)| / |DC(A^t z)| -> 0 as t grows.

#ifndef PLAT_SPECTRAL_HPP
#define PLAT_SPECTRAL_HPP

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "plat/attention.hpp"
#include "plat/numerics.hpp"

namespace plat {

enum class Regime { homophily, heterophily, mixed };
std::string to_string(Regime regime);

/// Final-ratio threshold under which an operator is declared low-pass.
inline constexpr double kLowPassThreshold = 1e-6;

struct RatioPoint {
    std::size_t t = 0;
    double ratio = 0.0;  // +inf when the DC part vanishes
};

struct LowPassTrajectory {
    std::vector<RatioPoint> points;  // t = 0 .. t_max
    bool is_low_pass_empirical = false;
};

struct EigenEstimate {
    double lambda_max = 0.0;
    std::vector<double> eigenvector;  // unit 2-norm
    bool converged = false;
    /// False when the matrix has a non-positive entry, in which case
    /// Perron-Frobenius does not apply and `converged` stays false.
    bool positive_matrix = true;
    std::size_t iterations = 0;
};

struct SpectralReport {
    std::size_t operator_dim = 0;
    std::vector<RatioPoint> ratio_trajectory;
    double lambda_max = 0.0;
    bool lambda_max_converged = false;
    bool is_low_pass_empirical = false;
    std::optional<Regime> regime;
};

std::vector<double> dc_component(std::span<const double> z);
std::vector<double> hc_component(std::span<const double> z);

/// Iterates z <- A z for t = 1..t_max, recording |HC|/|DC| at every t
/// (t = 0 is z itself). The iterate is renormalized each step; the ratio is
/// scale free so this only guards against overflow.
LowPassTrajectory low_pass_ratio(const Matrix& a, std::span<const double> z, std::size_t t_max);

/// Power iteration from the all-ones vector perturbed by 1e-3 uniform
/// noise (fixed seed). Converged once |Av - lambda v| < tol |v|.
EigenEstimate dominant_eigenvalue(const Matrix& a, double tol = 1e-10, std::size_t max_iter = 10000);

/// Homophily when every pairwise row distance is < 1, heterophily when every
/// one is >= 1, otherwise mixed. Requires at least two rows.
Regime classify_regime(const TokenSequence& v);

/// The combined N x N operator softmax(QK^T / sqrt(d_qk)) (.) P.
Matrix plat_operator_matrix(const Matrix& q, const Matrix& k, const Matrix& v,
                            const AttentionHeadConfig& cfg);

SpectralReport build_spectral_report(const Matrix& a, std::span<const double> z, std::size_t t_max,
                                     const TokenSequence* values = nullptr);

/// CSV with header "t,ratio".
void write_ratio_csv(std::ostream& out, const SpectralReport& report);
/// {"operator_dim", "lambda_max", "lambda_max_converged", "is_low_pass_empirical",
///  "final_ratio", "regime"} as a JSON object.
std::string spectral_summary_json(const SpectralReport& report);

}  // namespace plat

#endif  // PLAT_SPECTRAL_HPP
