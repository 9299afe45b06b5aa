#include "rpsft/matrix.hpp"

#include "rpsft/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <string>

namespace rpsft {

namespace {

void require_positive(std::size_t rows, std::size_t cols) {
    if (rows == 0 || cols == 0) {
        throw ParameterError("matrix dimensions must be positive, got " + std::to_string(rows) + "x" +
                             std::to_string(cols));
    }
}

std::string shape_string(const DenseMatrix& m) {
    return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

} // namespace

DenseMatrix::DenseMatrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols) {
    require_positive(rows, cols);
    data_.assign(rows * cols, fill);
}

DenseMatrix::DenseMatrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
    require_positive(rows, cols);
    if (data_.size() != rows * cols) {
        throw ValidationError("matrix data length " + std::to_string(data_.size()) + " does not match " +
                              std::to_string(rows) + "x" + std::to_string(cols));
    }
    if (!all_finite()) {
        throw ValidationError("matrix contains non-finite entries");
    }
}

DenseMatrix::DenseMatrix(std::initializer_list<std::initializer_list<double>> rows) {
    rows_ = rows.size();
    cols_ = rows_ == 0 ? 0 : rows.begin()->size();
    require_positive(rows_, cols_);
    data_.reserve(rows_ * cols_);
    for (const auto& r : rows) {
        if (r.size() != cols_) {
            throw ValidationError("ragged matrix literal");
        }
        data_.insert(data_.end(), r.begin(), r.end());
    }
    if (!all_finite()) {
        throw ValidationError("matrix contains non-finite entries");
    }
}

DenseMatrix DenseMatrix::identity(std::size_t n) {
    DenseMatrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        m(i, i) = 1.0;
    }
    return m;
}

DenseMatrix DenseMatrix::diagonal(std::span<const double> values) {
    DenseMatrix m(values.size(), values.size());
    for (std::size_t i = 0; i < values.size(); ++i) {
        m(i, i) = values[i];
    }
    return m;
}

bool DenseMatrix::all_finite() const noexcept {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

DenseMatrix& DenseMatrix::operator+=(const DenseMatrix& rhs) {
    require_same_shape(*this, rhs, "matrix addition");
    for (std::size_t i = 0; i < data_.size(); ++i) {
        data_[i] += rhs.data_[i];
    }
    return *this;
}

DenseMatrix& DenseMatrix::operator-=(const DenseMatrix& rhs) {
    require_same_shape(*this, rhs, "matrix subtraction");
    for (std::size_t i = 0; i < data_.size(); ++i) {
        data_[i] -= rhs.data_[i];
    }
    return *this;
}

DenseMatrix& DenseMatrix::operator*=(double s) noexcept {
    for (double& v : data_) {
        v *= s;
    }
    return *this;
}

DenseMatrix& DenseMatrix::add_scaled(const DenseMatrix& rhs, double s) {
    require_same_shape(*this, rhs, "scaled addition");
    for (std::size_t i = 0; i < data_.size(); ++i) {
        data_[i] += s * rhs.data_[i];
    }
    return *this;
}

DenseMatrix operator+(DenseMatrix a, const DenseMatrix& b) { return a += b; }
DenseMatrix operator-(DenseMatrix a, const DenseMatrix& b) { return a -= b; }
DenseMatrix operator*(double s, DenseMatrix a) { return a *= s; }
DenseMatrix operator*(DenseMatrix a, double s) { return a *= s; }

DenseMatrix transpose(const DenseMatrix& a) {
    DenseMatrix t(a.cols(), a.rows());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        for (std::size_t j = 0; j < a.cols(); ++j) {
            t(j, i) = a(i, j);
        }
    }
    return t;
}

DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b) {
    if (a.cols() != b.rows()) {
        throw ParameterError("matmul: inner dimensions differ (" + shape_string(a) + " * " + shape_string(b) + ")");
    }
    DenseMatrix c(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        auto out = c.row(i);
        for (std::size_t p = 0; p < a.cols(); ++p) {
            const double aip = a(i, p);
            const auto brow = b.row(p);
            for (std::size_t j = 0; j < b.cols(); ++j) {
                out[j] += aip * brow[j];
            }
        }
    }
    return c;
}

DenseMatrix matmul_tn(const DenseMatrix& a, const DenseMatrix& b) {
    if (a.rows() != b.rows()) {
        throw ParameterError("matmul_tn: row counts differ (" + shape_string(a) + "^T * " + shape_string(b) + ")");
    }
    DenseMatrix c(a.cols(), b.cols());
    for (std::size_t r = 0; r < a.rows(); ++r) {
        const auto arow = a.row(r);
        const auto brow = b.row(r);
        for (std::size_t i = 0; i < a.cols(); ++i) {
            const double ari = arow[i];
            auto out = c.row(i);
            for (std::size_t j = 0; j < b.cols(); ++j) {
                out[j] += ari * brow[j];
            }
        }
    }
    return c;
}

DenseMatrix matmul_nt(const DenseMatrix& a, const DenseMatrix& b) {
    if (a.cols() != b.cols()) {
        throw ParameterError("matmul_nt: column counts differ (" + shape_string(a) + " * " + shape_string(b) + "^T)");
    }
    DenseMatrix c(a.rows(), b.rows());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        const auto arow = a.row(i);
        for (std::size_t j = 0; j < b.rows(); ++j) {
            const auto brow = b.row(j);
            double s = 0.0;
            for (std::size_t p = 0; p < a.cols(); ++p) {
                s += arow[p] * brow[p];
            }
            c(i, j) = s;
        }
    }
    return c;
}

double frobenius_inner(const DenseMatrix& a, const DenseMatrix& b) {
    require_same_shape(a, b, "frobenius inner product");
    double s = 0.0;
    const auto da = a.data();
    const auto db = b.data();
    for (std::size_t i = 0; i < da.size(); ++i) {
        s += da[i] * db[i];
    }
    return s;
}

double squared_norm(const DenseMatrix& a) noexcept {
    double s = 0.0;
    for (double v : a.data()) {
        s += v * v;
    }
    return s;
}

double frobenius_norm(const DenseMatrix& a) noexcept { return std::sqrt(squared_norm(a)); }

double max_abs(const DenseMatrix& a) noexcept {
    double m = 0.0;
    for (double v : a.data()) {
        m = std::max(m, std::abs(v));
    }
    return m;
}

double max_abs_diff(const DenseMatrix& a, const DenseMatrix& b) {
    require_same_shape(a, b, "max_abs_diff");
    double m = 0.0;
    const auto da = a.data();
    const auto db = b.data();
    for (std::size_t i = 0; i < da.size(); ++i) {
        m = std::max(m, std::abs(da[i] - db[i]));
    }
    return m;
}

DenseMatrix leading_columns(const DenseMatrix& a, std::size_t count) {
    return leading_block(a, a.rows(), count);
}

DenseMatrix leading_block(const DenseMatrix& a, std::size_t rows, std::size_t cols) {
    if (rows == 0 || cols == 0 || rows > a.rows() || cols > a.cols()) {
        throw ParameterError("leading block " + std::to_string(rows) + "x" + std::to_string(cols) +
                             " out of range for " + shape_string(a));
    }
    DenseMatrix out(rows, cols);
    for (std::size_t i = 0; i < rows; ++i) {
        std::copy_n(a.row(i).begin(), cols, out.row(i).begin());
    }
    return out;
}

bool bitwise_equal(const DenseMatrix& a, const DenseMatrix& b) noexcept {
    return a.same_shape(b) && (a.size() == 0 || std::memcmp(a.data().data(), b.data().data(), a.size() * sizeof(double)) == 0);
}

void require_same_shape(const DenseMatrix& a, const DenseMatrix& b, std::string_view what) {
    if (!a.same_shape(b)) {
        throw ParameterError(std::string(what) + ": shape mismatch " + shape_string(a) + " vs " + shape_string(b));
    }
}

} // namespace rpsft
