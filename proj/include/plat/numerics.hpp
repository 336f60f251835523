// Dense 64-bit linear algebra and elementary kernels shared by every module.
//
// All reductions accumulate left to right in index order so results are
// bit-identical across runs and independent of thread count.

#ifndef PLAT_NUMERICS_HPP
#define PLAT_NUMERICS_HPP

#include <complex>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace plat {

class ShapeError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Row-major dense matrix of doubles.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
    Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);

    /// Builds a matrix from nested rows; all rows must have equal length.
    static Matrix from_rows(const std::vector<std::vector<double>>& rows);
    static Matrix identity(std::size_t n);

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
    std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

    std::vector<double>& data() { return data_; }
    const std::vector<double>& data() const { return data_; }

    std::string shape_string() const;

    bool operator==(const Matrix&) const = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

/// N×D token embeddings; one row per token.
using TokenSequence = Matrix;
using ComplexVector = std::vector<std::complex<double>>;

Matrix matmul(const Matrix& a, const Matrix& b);
/// a · bᵀ without materializing the transpose.
Matrix matmul_transposed(const Matrix& a, const Matrix& b);
/// aᵀ · b without materializing the transpose.
Matrix transposed_matmul(const Matrix& a, const Matrix& b);
Matrix transpose(const Matrix& m);

Matrix add(const Matrix& a, const Matrix& b);
Matrix subtract(const Matrix& a, const Matrix& b);
Matrix scale(const Matrix& m, double factor);
Matrix hadamard(const Matrix& a, const Matrix& b);

/// Numerically stable softmax over each row (max subtraction).
Matrix row_softmax(const Matrix& m);

/// Euclidean distance between every pair of rows.
Matrix pairwise_distances(const Matrix& v);

std::vector<double> row_sums(const Matrix& m);
std::vector<double> matvec(const Matrix& a, std::span<const double> x);

double max_abs_diff(const Matrix& a, const Matrix& b);
double frobenius_norm(const Matrix& m);
double norm2(std::span<const double> v);
bool all_finite(const Matrix& m);
bool all_finite(std::span<const double> v);

/// Unitary DFT: X_k = n^{-1/2} Σ_m z_m e^{-2πi km/n}.
ComplexVector dft(std::span<const double> z);
/// Inverse of dft; returns the real part (imaginary residue is discarded).
std::vector<double> idft(const ComplexVector& spectrum);

}  // namespace plat

#endif  // PLAT_NUMERICS_HPP
