#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace coreg {

/// Dense row-major matrix of doubles. Value semantics; cheap to move.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
    Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);

    static Matrix from_rows(std::initializer_list<std::initializer_list<double>> rows);
    static Matrix identity(std::size_t n);
    static Matrix row_vector(std::span<const double> values);

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    double& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols_ + c]; }

    std::span<double> data() noexcept { return data_; }
    std::span<const double> data() const noexcept { return data_; }
    std::span<double> row(std::size_t r) noexcept { return {data_.data() + r * cols_, cols_}; }
    std::span<const double> row(std::size_t r) const noexcept { return {data_.data() + r * cols_, cols_}; }

    std::string shape() const;
    bool same_shape(const Matrix& other) const noexcept {
        return rows_ == other.rows_ && cols_ == other.cols_;
    }

    bool operator==(const Matrix& other) const = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

// Products. All throw ErrorKind::Dimension on shape mismatch.
Matrix matmul(const Matrix& a, const Matrix& b);
Matrix matmul_nt(const Matrix& a, const Matrix& b);  // a * b^T
Matrix matmul_tn(const Matrix& a, const Matrix& b);  // a^T * b
Matrix transpose(const Matrix& a);

Matrix add(const Matrix& a, const Matrix& b);
Matrix sub(const Matrix& a, const Matrix& b);
Matrix hadamard(const Matrix& a, const Matrix& b);
Matrix scale(const Matrix& a, double s);
void add_inplace(Matrix& acc, const Matrix& b);
void axpy_inplace(Matrix& acc, double s, const Matrix& b);

/// Adds a 1 x cols row to every row of x.
Matrix add_row_broadcast(const Matrix& x, const Matrix& row);
/// Column sums as a 1 x cols row.
Matrix column_sums(const Matrix& x);
/// [x | 1]: appends a column of ones.
Matrix append_ones_column(const Matrix& x);
/// Drops the last column.
Matrix drop_last_column(const Matrix& x);
Matrix select_rows(const Matrix& x, std::span<const std::size_t> rows);

Matrix sigmoid(const Matrix& x);
double sigmoid(double x);
/// Elementwise max(x, slope * x); slope must be nonnegative.
Matrix leaky_relu(const Matrix& x, double slope);
/// Elementwise derivative of leaky_relu evaluated at x (1 for x > 0, slope otherwise).
Matrix leaky_relu_derivative(const Matrix& x, double slope);

double sum(const Matrix& a);
double max_abs(const Matrix& a);
double frobenius_norm(const Matrix& a);
bool all_finite(const Matrix& a);
/// Throws ErrorKind::Numerical naming `what` if any entry is NaN or infinite.
void require_finite(const Matrix& a, const std::string& what);

}  // namespace coreg
