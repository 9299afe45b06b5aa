#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string_view>
#include <vector>

namespace rpsft {

/// Row-major dense matrix of doubles. Every weight, gradient and basis in the
/// library is carried by this type.
///
/// A default-constructed matrix is empty (0x0) and only serves as a placeholder;
/// all other constructors require positive dimensions.
class DenseMatrix {
public:
    DenseMatrix() = default;
    DenseMatrix(std::size_t rows, std::size_t cols, double fill = 0.0);
    /// Takes row-major data from an external source. Throws ValidationError
    /// on length mismatch or non-finite entries.
    DenseMatrix(std::size_t rows, std::size_t cols, std::vector<double> data);
    DenseMatrix(std::initializer_list<std::initializer_list<double>> rows);

    static DenseMatrix identity(std::size_t n);
    static DenseMatrix diagonal(std::span<const double> values);

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    double& operator()(std::size_t i, std::size_t j) noexcept { return data_[i * cols_ + j]; }
    double operator()(std::size_t i, std::size_t j) const noexcept { return data_[i * cols_ + j]; }

    std::span<double> data() noexcept { return data_; }
    std::span<const double> data() const noexcept { return data_; }
    std::span<double> row(std::size_t i) noexcept { return {data_.data() + i * cols_, cols_}; }
    std::span<const double> row(std::size_t i) const noexcept { return {data_.data() + i * cols_, cols_}; }

    bool same_shape(const DenseMatrix& other) const noexcept {
        return rows_ == other.rows_ && cols_ == other.cols_;
    }
    bool all_finite() const noexcept;

    DenseMatrix& operator+=(const DenseMatrix& rhs);
    DenseMatrix& operator-=(const DenseMatrix& rhs);
    DenseMatrix& operator*=(double s) noexcept;
    /// this += s * rhs
    DenseMatrix& add_scaled(const DenseMatrix& rhs, double s);

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

DenseMatrix operator+(DenseMatrix a, const DenseMatrix& b);
DenseMatrix operator-(DenseMatrix a, const DenseMatrix& b);
DenseMatrix operator*(double s, DenseMatrix a);
DenseMatrix operator*(DenseMatrix a, double s);

DenseMatrix transpose(const DenseMatrix& a);
/// a * b
DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b);
/// aᵀ * b
DenseMatrix matmul_tn(const DenseMatrix& a, const DenseMatrix& b);
/// a * bᵀ
DenseMatrix matmul_nt(const DenseMatrix& a, const DenseMatrix& b);

double frobenius_inner(const DenseMatrix& a, const DenseMatrix& b);
double squared_norm(const DenseMatrix& a) noexcept;
double frobenius_norm(const DenseMatrix& a) noexcept;
double max_abs(const DenseMatrix& a) noexcept;
double max_abs_diff(const DenseMatrix& a, const DenseMatrix& b);

/// First `count` columns of `a`.
DenseMatrix leading_columns(const DenseMatrix& a, std::size_t count);
/// Top-left rows x cols block.
DenseMatrix leading_block(const DenseMatrix& a, std::size_t rows, std::size_t cols);

/// True when shapes match and every entry has the same bit pattern.
bool bitwise_equal(const DenseMatrix& a, const DenseMatrix& b) noexcept;

/// Throws ParameterError naming `what` when shapes differ.
void require_same_shape(const DenseMatrix& a, const DenseMatrix& b, std::string_view what);

} // namespace rpsft
