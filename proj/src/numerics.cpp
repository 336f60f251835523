#include "plat/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace plat {

namespace {

void require_same_shape(const Matrix& a, const Matrix& b, const char* op) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) {
        throw ShapeError(std::string(op) + ": shape mismatch " + a.shape_string() + " vs " +
                         b.shape_string());
    }
}

}  // namespace

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows_ * cols_) {
        throw ShapeError("Matrix: " + std::to_string(data_.size()) + " values for shape " +
                         shape_string());
    }
}

Matrix Matrix::from_rows(const std::vector<std::vector<double>>& rows) {
    if (rows.empty()) return {};
    const std::size_t cols = rows.front().size();
    Matrix m(rows.size(), cols);
    for (std::size_t r = 0; r < rows.size(); ++r) {
        if (rows[r].size() != cols) throw ShapeError("Matrix::from_rows: ragged rows");
        std::copy(rows[r].begin(), rows[r].end(), m.row(r).begin());
    }
    return m;
}

Matrix Matrix::identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

std::string Matrix::shape_string() const {
    return "(" + std::to_string(rows_) + "x" + std::to_string(cols_) + ")";
}

Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.rows()) {
        throw ShapeError("matmul: inner dimensions differ " + a.shape_string() + " * " +
                         b.shape_string());
    }
    Matrix out(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        for (std::size_t j = 0; j < b.cols(); ++j) {
            double acc = 0.0;
            for (std::size_t k = 0; k < a.cols(); ++k) acc += a(i, k) * b(k, j);
            out(i, j) = acc;
        }
    }
    return out;
}

Matrix matmul_transposed(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.cols()) {
        throw ShapeError("matmul_transposed: column counts differ " + a.shape_string() + " * " +
                         b.shape_string() + "^T");
    }
    Matrix out(a.rows(), b.rows());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        const auto ai = a.row(i);
        for (std::size_t j = 0; j < b.rows(); ++j) {
            const auto bj = b.row(j);
            double acc = 0.0;
            for (std::size_t k = 0; k < a.cols(); ++k) acc += ai[k] * bj[k];
            out(i, j) = acc;
        }
    }
    return out;
}

Matrix transposed_matmul(const Matrix& a, const Matrix& b) {
    if (a.rows() != b.rows()) {
        throw ShapeError("transposed_matmul: row counts differ " + a.shape_string() + "^T * " +
                         b.shape_string());
    }
    Matrix out(a.cols(), b.cols());
    for (std::size_t i = 0; i < a.cols(); ++i) {
        for (std::size_t j = 0; j < b.cols(); ++j) {
            double acc = 0.0;
            for (std::size_t k = 0; k < a.rows(); ++k) acc += a(k, i) * b(k, j);
            out(i, j) = acc;
        }
    }
    return out;
}

Matrix transpose(const Matrix& m) {
    Matrix out(m.cols(), m.rows());
    for (std::size_t i = 0; i < m.rows(); ++i)
        for (std::size_t j = 0; j < m.cols(); ++j) out(j, i) = m(i, j);
    return out;
}

Matrix add(const Matrix& a, const Matrix& b) {
    require_same_shape(a, b, "add");
    Matrix out = a;
    for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] += b.data()[i];
    return out;
}

Matrix subtract(const Matrix& a, const Matrix& b) {
    require_same_shape(a, b, "subtract");
    Matrix out = a;
    for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] -= b.data()[i];
    return out;
}

Matrix scale(const Matrix& m, double factor) {
    Matrix out = m;
    for (double& x : out.data()) x *= factor;
    return out;
}

Matrix hadamard(const Matrix& a, const Matrix& b) {
    require_same_shape(a, b, "hadamard");
    Matrix out = a;
    for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] *= b.data()[i];
    return out;
}

Matrix row_softmax(const Matrix& m) {
    Matrix out(m.rows(), m.cols());
    for (std::size_t i = 0; i < m.rows(); ++i) {
        const auto in = m.row(i);
        auto dst = out.row(i);
        if (in.empty()) continue;
        const double peak = *std::max_element(in.begin(), in.end());
        double total = 0.0;
        for (std::size_t j = 0; j < in.size(); ++j) {
            dst[j] = std::exp(in[j] - peak);
            total += dst[j];
        }
        for (double& x : dst) x /= total;
    }
    return out;
}

Matrix pairwise_distances(const Matrix& v) {
    const std::size_t n = v.rows();
    Matrix out(n, n);
    for (std::size_t x = 0; x < n; ++x) {
        for (std::size_t y = x + 1; y < n; ++y) {
            double acc = 0.0;
            for (std::size_t d = 0; d < v.cols(); ++d) {
                const double diff = v(x, d) - v(y, d);
                acc += diff * diff;
            }
            const double dist = std::sqrt(acc);
            out(x, y) = dist;
            out(y, x) = dist;
        }
    }
    return out;
}

std::vector<double> row_sums(const Matrix& m) {
    std::vector<double> sums(m.rows(), 0.0);
    for (std::size_t i = 0; i < m.rows(); ++i)
        for (double x : m.row(i)) sums[i] += x;
    return sums;
}

std::vector<double> matvec(const Matrix& a, std::span<const double> x) {
    if (a.cols() != x.size()) {
        throw ShapeError("matvec: matrix " + a.shape_string() + " vs vector of length " +
                         std::to_string(x.size()));
    }
    std::vector<double> out(a.rows(), 0.0);
    for (std::size_t i = 0; i < a.rows(); ++i) {
        double acc = 0.0;
        for (std::size_t j = 0; j < a.cols(); ++j) acc += a(i, j) * x[j];
        out[i] = acc;
    }
    return out;
}

double max_abs_diff(const Matrix& a, const Matrix& b) {
    require_same_shape(a, b, "max_abs_diff");
    double worst = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
        worst = std::max(worst, std::abs(a.data()[i] - b.data()[i]));
    return worst;
}

double frobenius_norm(const Matrix& m) { return norm2(m.data()); }

double norm2(std::span<const double> v) {
    double acc = 0.0;
    for (double x : v) acc += x * x;
    return std::sqrt(acc);
}

bool all_finite(const Matrix& m) { return all_finite(std::span<const double>(m.data())); }

bool all_finite(std::span<const double> v) {
    return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

ComplexVector dft(std::span<const double> z) {
    const std::size_t n = z.size();
    const double norm = 1.0 / std::sqrt(static_cast<double>(n));
    ComplexVector out(n);
    for (std::size_t k = 0; k < n; ++k) {
        std::complex<double> acc{0.0, 0.0};
        for (std::size_t m = 0; m < n; ++m) {
            // Reduce k·m mod n first so the angle stays in [0, 2π).
            const double angle = -2.0 * std::numbers::pi * static_cast<double>((k * m) % n) /
                                 static_cast<double>(n);
            acc += z[m] * std::polar(1.0, angle);
        }
        out[k] = acc * norm;
    }
    return out;
}

std::vector<double> idft(const ComplexVector& spectrum) {
    const std::size_t n = spectrum.size();
    const double norm = 1.0 / std::sqrt(static_cast<double>(n));
    std::vector<double> out(n);
    for (std::size_t m = 0; m < n; ++m) {
        std::complex<double> acc{0.0, 0.0};
        for (std::size_t k = 0; k < n; ++k) {
            const double angle = 2.0 * std::numbers::pi * static_cast<double>((k * m) % n) /
                                 static_cast<double>(n);
            acc += spectrum[k] * std::polar(1.0, angle);
        }
        out[m] = acc.real() * norm;
    }
    return out;
}

}  // namespace plat
