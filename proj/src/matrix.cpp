#include "coreg/matrix.hpp"

#include <algorithm>
#include <cmath>

#include "coreg/error.hpp"

namespace coreg {

namespace {

[[noreturn]] void shape_error(const char* op, const Matrix& a, const Matrix& b) {
    fail(ErrorKind::Dimension, std::string(op) + ": incompatible shapes " + a.shape() + " and " + b.shape());
}

void require_same_shape(const char* op, const Matrix& a, const Matrix& b) {
    if (!a.same_shape(b)) shape_error(op, a, b);
}

template <typename F>
Matrix map(const Matrix& x, F f) {
    Matrix out(x.rows(), x.cols());
    auto src = x.data();
    auto dst = out.data();
    for (std::size_t i = 0; i < src.size(); ++i) dst[i] = f(src[i]);
    return out;
}

template <typename F>
Matrix zip(const char* op, const Matrix& a, const Matrix& b, F f) {
    require_same_shape(op, a, b);
    Matrix out(a.rows(), a.cols());
    auto pa = a.data();
    auto pb = b.data();
    auto dst = out.data();
    for (std::size_t i = 0; i < pa.size(); ++i) dst[i] = f(pa[i], pb[i]);
    return out;
}

}  // namespace

Matrix::Matrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows * cols) {
        fail(ErrorKind::Dimension, "matrix data length " + std::to_string(data_.size()) +
                                       " does not match shape " + shape());
    }
}

Matrix Matrix::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
    const std::size_t r = rows.size();
    const std::size_t c = r == 0 ? 0 : rows.begin()->size();
    std::vector<double> data;
    data.reserve(r * c);
    for (const auto& row : rows) {
        if (row.size() != c) fail(ErrorKind::Dimension, "from_rows: ragged initializer");
        data.insert(data.end(), row.begin(), row.end());
    }
    return Matrix(r, c, std::move(data));
}

Matrix Matrix::identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

Matrix Matrix::row_vector(std::span<const double> values) {
    return Matrix(1, values.size(), std::vector<double>(values.begin(), values.end()));
}

std::string Matrix::shape() const {
    return std::to_string(rows_) + "x" + std::to_string(cols_);
}

Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.rows()) shape_error("matmul", a, b);
    Matrix out(a.rows(), b.cols());
    // i-k-j order keeps the inner loop contiguous in both b and out.
    for (std::size_t i = 0; i < a.rows(); ++i) {
        auto orow = out.row(i);
        for (std::size_t k = 0; k < a.cols(); ++k) {
            const double aik = a(i, k);
            if (aik == 0.0) continue;
            auto brow = b.row(k);
            for (std::size_t j = 0; j < b.cols(); ++j) orow[j] += aik * brow[j];
        }
    }
    return out;
}

Matrix matmul_nt(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.cols()) shape_error("matmul_nt", a, b);
    Matrix out(a.rows(), b.rows());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        auto arow = a.row(i);
        for (std::size_t j = 0; j < b.rows(); ++j) {
            auto brow = b.row(j);
            double s = 0.0;
            for (std::size_t k = 0; k < arow.size(); ++k) s += arow[k] * brow[k];
            out(i, j) = s;
        }
    }
    return out;
}

Matrix matmul_tn(const Matrix& a, const Matrix& b) {
    if (a.rows() != b.rows()) shape_error("matmul_tn", a, b);
    Matrix out(a.cols(), b.cols());
    for (std::size_t k = 0; k < a.rows(); ++k) {
        auto arow = a.row(k);
        auto brow = b.row(k);
        for (std::size_t i = 0; i < arow.size(); ++i) {
            const double aki = arow[i];
            if (aki == 0.0) continue;
            auto orow = out.row(i);
            for (std::size_t j = 0; j < brow.size(); ++j) orow[j] += aki * brow[j];
        }
    }
    return out;
}

Matrix transpose(const Matrix& a) {
    Matrix out(a.cols(), a.rows());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j) out(j, i) = a(i, j);
    return out;
}

Matrix add(const Matrix& a, const Matrix& b) {
    return zip("add", a, b, [](double x, double y) { return x + y; });
}

Matrix sub(const Matrix& a, const Matrix& b) {
    return zip("sub", a, b, [](double x, double y) { return x - y; });
}

Matrix hadamard(const Matrix& a, const Matrix& b) {
    return zip("hadamard", a, b, [](double x, double y) { return x * y; });
}

Matrix scale(const Matrix& a, double s) {
    return map(a, [s](double x) { return x * s; });
}

void add_inplace(Matrix& acc, const Matrix& b) {
    require_same_shape("add_inplace", acc, b);
    auto dst = acc.data();
    auto src = b.data();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

void axpy_inplace(Matrix& acc, double s, const Matrix& b) {
    require_same_shape("axpy_inplace", acc, b);
    auto dst = acc.data();
    auto src = b.data();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += s * src[i];
}

Matrix add_row_broadcast(const Matrix& x, const Matrix& row) {
    if (row.rows() != 1 || row.cols() != x.cols()) shape_error("add_row_broadcast", x, row);
    Matrix out = x;
    auto r = row.row(0);
    for (std::size_t i = 0; i < out.rows(); ++i) {
        auto orow = out.row(i);
        for (std::size_t j = 0; j < orow.size(); ++j) orow[j] += r[j];
    }
    return out;
}

Matrix column_sums(const Matrix& x) {
    Matrix out(1, x.cols());
    for (std::size_t i = 0; i < x.rows(); ++i) {
        auto xrow = x.row(i);
        for (std::size_t j = 0; j < xrow.size(); ++j) out(0, j) += xrow[j];
    }
    return out;
}

Matrix append_ones_column(const Matrix& x) {
    Matrix out(x.rows(), x.cols() + 1, 1.0);
    for (std::size_t i = 0; i < x.rows(); ++i)
        std::copy(x.row(i).begin(), x.row(i).end(), out.row(i).begin());
    return out;
}

Matrix drop_last_column(const Matrix& x) {
    if (x.cols() == 0) fail(ErrorKind::Dimension, "drop_last_column: matrix has no columns");
    Matrix out(x.rows(), x.cols() - 1);
    for (std::size_t i = 0; i < x.rows(); ++i)
        std::copy_n(x.row(i).begin(), out.cols(), out.row(i).begin());
    return out;
}

Matrix select_rows(const Matrix& x, std::span<const std::size_t> rows) {
    Matrix out(rows.size(), x.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i] >= x.rows()) {
            fail(ErrorKind::Dimension, "select_rows: row " + std::to_string(rows[i]) + " out of range for " +
                                           x.shape());
        }
        std::copy(x.row(rows[i]).begin(), x.row(rows[i]).end(), out.row(i).begin());
    }
    return out;
}

double sigmoid(double x) {
    // Branches keep exp() from overflowing for large |x|.
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

Matrix sigmoid(const Matrix& x) {
    return map(x, [](double v) { return sigmoid(v); });
}

Matrix leaky_relu(const Matrix& x, double slope) {
    if (!(slope >= 0.0)) fail(ErrorKind::Config, "leaky_relu: slope must be nonnegative");
    return map(x, [slope](double v) { return v > 0.0 ? v : slope * v; });
}

Matrix leaky_relu_derivative(const Matrix& x, double slope) {
    if (!(slope >= 0.0)) fail(ErrorKind::Config, "leaky_relu: slope must be nonnegative");
    return map(x, [slope](double v) { return v > 0.0 ? 1.0 : slope; });
}

double sum(const Matrix& a) {
    double s = 0.0;
    for (double v : a.data()) s += v;
    return s;
}

double max_abs(const Matrix& a) {
    double m = 0.0;
    for (double v : a.data()) m = std::max(m, std::abs(v));
    return m;
}

double frobenius_norm(const Matrix& a) {
    double s = 0.0;
    for (double v : a.data()) s += v * v;
    return std::sqrt(s);
}

bool all_finite(const Matrix& a) {
    return std::all_of(a.data().begin(), a.data().end(), [](double v) { return std::isfinite(v); });
}

void require_finite(const Matrix& a, const std::string& what) {
    if (!all_finite(a)) fail(ErrorKind::Numerical, "non-finite value in " + what);
}

}  // namespace coreg
