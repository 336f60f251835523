#include "plat/numerics.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <complex>

#include "test_util.hpp"

namespace plat {
namespace {

using testing::random_matrix;
using testing::random_size;
using testing::random_vector;

TEST(Matmul, IdentityAndAnnihilator) {
    std::mt19937_64 rng(1);
    const Matrix m = random_matrix(rng, 3, 4);
    EXPECT_EQ(matmul(Matrix::identity(3), m), m);
    EXPECT_EQ(matmul(m, Matrix(4, 2)), Matrix(3, 2));
}

TEST(Matmul, HandComputedProduct) {
    const Matrix a = Matrix::from_rows({{1, 2}, {3, 4}});
    const Matrix b = Matrix::from_rows({{5}, {6}});
    EXPECT_EQ(matmul(a, b), Matrix::from_rows({{17}, {39}}));
}

TEST(Matmul, MismatchNamesBothShapes) {
    try {
        matmul(Matrix(2, 3), Matrix(2, 3));
        FAIL() << "expected ShapeError";
    } catch (const ShapeError& e) {
        const std::string msg = e.what();
        EXPECT_NE(msg.find("(2x3) * (2x3)"), std::string::npos) << msg;
    }
}

TEST(Matmul, BitIdenticalAcrossCalls) {
    std::mt19937_64 rng(2);
    const Matrix a = random_matrix(rng, 17, 9);
    const Matrix b = random_matrix(rng, 9, 13);
    const Matrix first = matmul(a, b);
    for (int i = 0; i < 5; ++i) EXPECT_EQ(matmul(a, b), first);
}

TEST(Matmul, TransposedVariantsAgreeWithExplicitTranspose) {
    std::mt19937_64 rng(3);
    const Matrix a = random_matrix(rng, 5, 4);
    const Matrix b = random_matrix(rng, 6, 4);
    const Matrix c = random_matrix(rng, 5, 3);
    EXPECT_EQ(matmul_transposed(a, b), matmul(a, transpose(b)));
    EXPECT_EQ(transposed_matmul(a, c), matmul(transpose(a), c));
}

TEST(RowSoftmax, KnownRows) {
    EXPECT_EQ(row_softmax(Matrix::from_rows({{0, 0}})), Matrix::from_rows({{0.5, 0.5}}));
    for (double x : {-1e300, -3.0, 0.0, 42.0, 1e300})
        EXPECT_EQ(row_softmax(Matrix::from_rows({{x}}))(0, 0), 1.0);

    // exp-normalize evaluated at 30 significant digits
    const Matrix s = row_softmax(Matrix::from_rows({{1, 2, 3}}));
    EXPECT_NEAR(s(0, 0), 0.0900305731703804580, 1e-15);
    EXPECT_NEAR(s(0, 1), 0.2447284710547976525, 1e-15);
    EXPECT_NEAR(s(0, 2), 0.6652409557748218895, 1e-15);
}

TEST(RowSoftmax, LargeLogitsStayFinite) {
    const Matrix s = row_softmax(Matrix::from_rows({{1000.0, 999.0, -1000.0}}));
    EXPECT_TRUE(all_finite(s));
    EXPECT_NEAR(s(0, 0) + s(0, 1) + s(0, 2), 1.0, 1e-12);
}

TEST(RowSoftmax, RowsSumToOneProperty) {
    std::mt19937_64 rng(4);
    for (int trial = 0; trial < 200; ++trial) {
        const Matrix m = random_matrix(rng, random_size(rng, 1, 12), random_size(rng, 1, 12), -50, 50);
        const Matrix s = row_softmax(m);
        for (std::size_t i = 0; i < s.rows(); ++i) {
            double sum = 0.0;
            for (double x : s.row(i)) {
                EXPECT_GE(x, 0.0);
                sum += x;
            }
            EXPECT_NEAR(sum, 1.0, 1e-12);
        }
    }
}

TEST(PairwiseDistances, SmallCases) {
    EXPECT_EQ(pairwise_distances(Matrix::from_rows({{1.0, 2.0}})), Matrix(1, 1));
    const Matrix d = pairwise_distances(Matrix::from_rows({{0, 0}, {3, 4}}));
    EXPECT_EQ(d, Matrix::from_rows({{0, 5}, {5, 0}}));
    EXPECT_EQ(pairwise_distances(Matrix::from_rows({{1, 2}, {1, 2}, {1, 2}})), Matrix(3, 3));
}

TEST(PairwiseDistances, MetricProperties) {
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t n = random_size(rng, 2, 10);
        const Matrix d = pairwise_distances(random_matrix(rng, n, random_size(rng, 1, 6), -3, 3));
        for (std::size_t x = 0; x < n; ++x) {
            EXPECT_EQ(d(x, x), 0.0);
            for (std::size_t y = 0; y < n; ++y) {
                EXPECT_EQ(d(x, y), d(y, x));
                for (std::size_t z = 0; z < n; ++z) EXPECT_LE(d(x, z), d(x, y) + d(y, z) + 1e-9);
            }
        }
    }
}

// Direct summation with the paper-style basis, evaluated independently of dft().
ComplexVector reference_dft(const std::vector<double>& z) {
    const std::size_t n = z.size();
    ComplexVector out(n);
    for (std::size_t k = 0; k < n; ++k) {
        std::complex<double> acc = 0.0;
        for (std::size_t m = 0; m < n; ++m)
            acc += z[m] * std::exp(std::complex<double>(0.0, -2.0 * M_PI * double(k) * double(m) / double(n)));
        out[k] = acc / std::sqrt(double(n));
    }
    return out;
}

TEST(Dft, ConstantVectorConcentratesInDc) {
    const auto spec = dft(std::vector<double>{1, 1, 1, 1});
    EXPECT_NEAR(spec[0].real(), 2.0, 1e-14);
    EXPECT_NEAR(spec[0].imag(), 0.0, 1e-14);
    for (std::size_t k = 1; k < 4; ++k) EXPECT_NEAR(std::abs(spec[k]), 0.0, 1e-14);
}

TEST(Dft, ZeroSignal) {
    for (const auto& c : dft(std::vector<double>(7, 0.0))) EXPECT_EQ(std::abs(c), 0.0);
}

TEST(Dft, MatchesDirectSummation) {
    std::mt19937_64 rng(6);
    const auto z = random_vector(rng, 11);
    const auto fast = dft(z);
    const auto ref = reference_dft(z);
    for (std::size_t k = 0; k < z.size(); ++k) EXPECT_NEAR(std::abs(fast[k] - ref[k]), 0.0, 1e-12);
}

TEST(Dft, RoundTripProperty) {
    std::mt19937_64 rng(7);
    for (std::size_t n : {1u, 2u, 3u, 16u, 97u, 256u, 1024u}) {
        const auto z = random_vector(rng, n, -10, 10);
        const auto back = idft(dft(z));
        double worst = 0.0;
        for (std::size_t i = 0; i < n; ++i) worst = std::max(worst, std::abs(back[i] - z[i]));
        EXPECT_LT(worst, 1e-10) << "n=" << n;
    }
}

TEST(Dft, Unitary) {
    std::mt19937_64 rng(8);
    const auto z = random_vector(rng, 64);
    double spec_energy = 0.0;
    for (const auto& c : dft(z)) spec_energy += std::norm(c);
    EXPECT_NEAR(std::sqrt(spec_energy), norm2(z), 1e-12);
}

}  // namespace
}  // namespace plat
