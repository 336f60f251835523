#include "plat/spectral.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "json.hpp"
#include "test_util.hpp"

namespace plat {
namespace {

using testing::random_matrix;
using testing::random_size;
using testing::random_vector;

Matrix random_row_stochastic(std::mt19937_64& rng, std::size_t n) {
    return row_softmax(random_matrix(rng, n, n, -2, 2));
}

AttentionHeadConfig head(std::size_t d_model, std::size_t d_qk, double p) {
    AttentionHeadConfig cfg;
    cfg.d_model = d_model;
    cfg.d_qk = d_qk;
    cfg.d_v = d_model;
    cfg.p = p;
    return cfg;
}

TEST(DcHc, Examples) {
    EXPECT_EQ(dc_component(std::vector<double>{3, 3, 3}), (std::vector<double>{3, 3, 3}));
    EXPECT_EQ(dc_component(std::vector<double>{-1, 1, -2, 2}), (std::vector<double>(4, 0.0)));
    EXPECT_EQ(dc_component(std::vector<double>{1, 2, 3, 4}), (std::vector<double>(4, 2.5)));
    EXPECT_EQ(hc_component(std::vector<double>{1, 2, 3, 4}), (std::vector<double>{-1.5, -0.5, 0.5, 1.5}));
    EXPECT_EQ(hc_component(std::vector<double>{7, 7}), (std::vector<double>{0, 0}));
}

TEST(DcHc, DecompositionIsExactProperty) {
    std::mt19937_64 rng(50);
    for (int trial = 0; trial < 200; ++trial) {
        const auto z = random_vector(rng, random_size(rng, 1, 64), -100, 100);
        const auto dc = dc_component(z), hc = hc_component(z);
        for (std::size_t i = 0; i < z.size(); ++i) EXPECT_NEAR(dc[i] + hc[i], z[i], 1e-12);
    }
}

TEST(DcHc, MeanSubtractionAgreesWithDftRoute) {
    std::mt19937_64 rng(51);
    for (std::size_t n : {1u, 2u, 5u, 16u, 33u}) {
        const auto z = random_vector(rng, n);
        auto spectrum = dft(z);
        spectrum[0] = 0.0;  // keep coefficients 2..n only
        const auto via_dft = idft(spectrum);
        const auto via_mean = hc_component(z);
        for (std::size_t i = 0; i < n; ++i) EXPECT_NEAR(via_dft[i], via_mean[i], 1e-10);
    }
}

TEST(LowPassRatio, RankOneAveragingKillsHcImmediately) {
    std::mt19937_64 rng(52);
    const std::size_t n = 6;
    const auto traj = low_pass_ratio(Matrix(n, n, 1.0 / n), random_vector(rng, n, 0.5, 2.0), 10);
    ASSERT_EQ(traj.points.size(), 11u);
    EXPECT_GT(traj.points[0].ratio, 0.0);
    for (std::size_t t = 1; t <= 10; ++t) EXPECT_LT(traj.points[t].ratio, 1e-14);
    EXPECT_TRUE(traj.is_low_pass_empirical);
}

TEST(LowPassRatio, IdentityKeepsRatioConstant) {
    std::mt19937_64 rng(53);
    const auto traj = low_pass_ratio(Matrix::identity(5), random_vector(rng, 5, 0.1, 1.0), 20);
    for (const auto& pt : traj.points) EXPECT_NEAR(pt.ratio, traj.points[0].ratio, 1e-12);
    EXPECT_FALSE(traj.is_low_pass_empirical);
}

TEST(LowPassRatio, RowStochasticOperatorsAreLowPass) {
    std::mt19937_64 rng(54);
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t n = random_size(rng, 2, 16);
        const auto traj = low_pass_ratio(random_row_stochastic(rng, n), random_vector(rng, n), 50);
        EXPECT_LT(traj.points.back().ratio, 1e-6);
    }
}

TEST(LowPassRatio, ZeroDcIsMarkedInfinite) {
    const auto traj = low_pass_ratio(Matrix::identity(2), std::vector<double>{1.0, -1.0}, 1);
    EXPECT_TRUE(std::isinf(traj.points[0].ratio));
}

TEST(LowPassRatio, DimensionMismatch) {
    EXPECT_THROW(low_pass_ratio(Matrix::identity(3), std::vector<double>{1, 2}, 5), ShapeError);
    EXPECT_THROW(low_pass_ratio(Matrix(2, 3, 1.0), std::vector<double>{1, 2}, 5), ShapeError);
}

TEST(DominantEigenvalue, ScaledIdentity) {
    EXPECT_NEAR(dominant_eigenvalue(Matrix::identity(4)).lambda_max, 1.0, 1e-12);
    EXPECT_NEAR(dominant_eigenvalue(scale(Matrix::identity(4), 2.0)).lambda_max, 2.0, 1e-12);
}

TEST(DominantEigenvalue, RowStochasticHasUnitSpectralRadius) {
    std::mt19937_64 rng(55);
    for (int trial = 0; trial < 20; ++trial) {
        const auto est = dominant_eigenvalue(random_row_stochastic(rng, random_size(rng, 2, 16)), 1e-10);
        EXPECT_TRUE(est.converged);
        EXPECT_NEAR(est.lambda_max, 1.0, 1e-9);
        for (double x : est.eigenvector) EXPECT_NEAR(x, est.eigenvector[0], 1e-8);
    }
}

TEST(DominantEigenvalue, ResidualBoundsTheEstimate) {
    std::mt19937_64 rng(56);
    const Matrix a = random_matrix(rng, 7, 7, 0.1, 2.0);
    const auto est = dominant_eigenvalue(a, 1e-11);
    ASSERT_TRUE(est.converged);
    const auto av = matvec(a, est.eigenvector);
    double residual = 0.0;
    for (std::size_t i = 0; i < av.size(); ++i)
        residual += std::pow(av[i] - est.lambda_max * est.eigenvector[i], 2);
    EXPECT_LT(std::sqrt(residual), 1e-11);
    for (double x : est.eigenvector) EXPECT_GT(x, 0.0);
}

TEST(DominantEigenvalue, NonPositiveMatrixIsFlagged) {
    const auto est = dominant_eigenvalue(Matrix::from_rows({{1.0, -0.5}, {0.2, 1.0}}));
    EXPECT_FALSE(est.positive_matrix);
    EXPECT_FALSE(est.converged);
}

TEST(DominantEigenvalue, NonConvergenceReported) {
    std::mt19937_64 rng(57);
    const auto est = dominant_eigenvalue(random_matrix(rng, 6, 6, 0.1, 1.0), 1e-300, 3);
    EXPECT_FALSE(est.converged);
    EXPECT_EQ(est.iterations, 3u);
}

TEST(ClassifyRegime, Examples) {
    EXPECT_EQ(classify_regime(Matrix(4, 3, 0.25)), Regime::homophily);
    EXPECT_EQ(classify_regime(Matrix::from_rows({{0, 0}, {3, 4}})), Regime::heterophily);

    // Pairwise distances 0.5, 2.0, 1.7.
    const double cx = 1.36, cy = std::sqrt(4.0 - cx * cx);
    const Matrix v = Matrix::from_rows({{0, 0}, {0.5, 0}, {cx, cy}});
    const Matrix d = pairwise_distances(v);
    EXPECT_NEAR(d(0, 1), 0.5, 1e-12);
    EXPECT_NEAR(d(0, 2), 2.0, 1e-12);
    EXPECT_NEAR(d(1, 2), 1.7, 1e-12);
    EXPECT_EQ(classify_regime(v), Regime::mixed);

    EXPECT_EQ(classify_regime(Matrix::from_rows({{0.0}, {1.0}})), Regime::heterophily);
    EXPECT_THROW(classify_regime(Matrix(1, 2)), std::invalid_argument);
}

TEST(ClassifyRegime, ScalingMatchesScaledDistances) {
    std::mt19937_64 rng(58);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t n = random_size(rng, 2, 6);
        const Matrix v = random_matrix(rng, n, 2);
        const double c = std::uniform_real_distribution<double>(-6, 6)(rng);
        const Matrix d = pairwise_distances(v);
        bool all_close = true, all_far = true;
        for (std::size_t x = 0; x < n; ++x) {
            for (std::size_t y = x + 1; y < n; ++y) {
                const double scaled = std::abs(c) * d(x, y);
                (scaled < 1.0 ? all_far : all_close) = false;
            }
        }
        const Regime expected = all_close ? Regime::homophily : all_far ? Regime::heterophily : Regime::mixed;
        const Matrix sv = scale(v, c);
        // Distances of c*v and |c|*d agree to rounding; skip draws sitting on the threshold.
        bool borderline = false;
        for (std::size_t x = 0; x < n; ++x)
            for (std::size_t y = x + 1; y < n; ++y)
                if (std::abs(std::abs(c) * d(x, y) - 1.0) < 1e-12) borderline = true;
        if (!borderline) {
            EXPECT_EQ(classify_regime(sv), expected);
        }
    }
}

TEST(PlatOperatorMatrix, QuadraticCaseIsRowStochastic) {
    std::mt19937_64 rng(59);
    const Matrix q = random_matrix(rng, 8, 3), k = random_matrix(rng, 8, 3), v = random_matrix(rng, 8, 4);
    const Matrix a = plat_operator_matrix(q, k, v, head(4, 3, 2.0));
    for (double s : row_sums(a)) EXPECT_NEAR(s, 1.0, 1e-12);
    EXPECT_NEAR(dominant_eigenvalue(a).lambda_max, 1.0, 1e-9);
}

TEST(PlatOperatorMatrix, HeterophilicValuesWithHighPExceedUnitEigenvalue) {
    std::mt19937_64 rng(60);
    const std::size_t n = 6;
    Matrix v(n, 2);
    for (std::size_t i = 0; i < n; ++i) {  // points on a circle of radius 3, spacing > 1.5
        v(i, 0) = 3.0 * std::cos(2 * M_PI * double(i) / n);
        v(i, 1) = 3.0 * std::sin(2 * M_PI * double(i) / n);
    }
    ASSERT_EQ(classify_regime(v), Regime::heterophily);
    const Matrix q = random_matrix(rng, n, 2, -0.5, 0.5), k = random_matrix(rng, n, 2, -0.5, 0.5);
    const Matrix scores = attention_scores(q, k);
    const Matrix a = plat_operator_matrix(q, k, v, head(2, 2, 2.5));
    const auto sums = row_sums(a);
    for (std::size_t x = 0; x < n; ++x) EXPECT_GE(sums[x], (1.0 - scores(x, x)) * std::sqrt(1.5));
    EXPECT_GT(dominant_eigenvalue(a).lambda_max, 1.0);
}

TEST(PlatOperatorMatrix, HomophilicValuesWithLowPExceedUnitEigenvalue) {
    std::mt19937_64 rng(61);
    const std::size_t n = 6;
    Matrix v(n, 1);
    for (std::size_t i = 0; i < n; ++i) v(i, 0) = 0.05 * double(i + 1);  // distances in [0.05, 0.25]
    const Matrix q = random_matrix(rng, n, 2), k = random_matrix(rng, n, 2);
    const auto pm = modulation_matrix(v, 1.5, 1e-5);
    for (std::size_t x = 0; x < n; ++x)
        for (std::size_t y = 0; y < n; ++y)
            if (x != y) {
                EXPECT_GT(pm.values(x, y), std::sqrt(2.0));
            }
    EXPECT_GT(dominant_eigenvalue(plat_operator_matrix(q, k, v, head(1, 2, 1.5))).lambda_max, 1.0);
}

TEST(SpectralReport, CsvAndSummary) {
    std::mt19937_64 rng(62);
    const Matrix a = random_row_stochastic(rng, 5);
    const Matrix v = random_matrix(rng, 5, 2, 0.0, 0.2);
    const auto report = build_spectral_report(a, random_vector(rng, 5, 0.5, 1.5), 30, &v);
    EXPECT_EQ(report.operator_dim, 5u);
    EXPECT_EQ(report.ratio_trajectory.size(), 31u);
    EXPECT_TRUE(report.is_low_pass_empirical);
    ASSERT_TRUE(report.regime.has_value());
    EXPECT_EQ(*report.regime, Regime::homophily);

    std::ostringstream csv;
    write_ratio_csv(csv, report);
    EXPECT_EQ(csv.str().substr(0, 8), "t,ratio\n");
    const auto summary = nlohmann::json::parse(spectral_summary_json(report));
    EXPECT_EQ(summary["regime"], "homophily");
    EXPECT_NEAR(summary["lambda_max"].get<double>(), 1.0, 1e-9);
}

}  // namespace
}  // namespace plat
