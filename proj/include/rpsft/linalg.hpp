#pragma once

#include "rpsft/matrix.hpp"

#include <cstddef>
#include <string_view>
#include <vector>

namespace rpsft {

inline constexpr double kOrthonormalTol = 1e-10;
inline constexpr int kMaxJacobiSweeps = 60;

/// Matrix whose columns are orthonormal to within `tol`, checked at construction.
class OrthonormalBasis {
public:
    explicit OrthonormalBasis(DenseMatrix columns, double tol = kOrthonormalTol);

    const DenseMatrix& columns() const noexcept { return columns_; }
    /// Ambient dimension (row count).
    std::size_t dim() const noexcept { return columns_.rows(); }
    /// Number of basis vectors.
    std::size_t rank() const noexcept { return columns_.cols(); }
    double tol() const noexcept { return tol_; }

    /// Basis made of the first `count` columns.
    OrthonormalBasis leading(std::size_t count) const;

private:
    DenseMatrix columns_;
    double tol_;
};

/// Thin SVD M = U diag(sigma) Vᵀ with r = min(m, n) columns in U and V.
struct SvdResult {
    DenseMatrix U;
    std::vector<double> sigma;
    DenseMatrix V;
};

/// One-sided Jacobi SVD.
///
/// Sweeps rotate column pairs of the smaller-dimension side until every pair is
/// orthogonal relative to its norms (|a_p . a_q| <= max(m,n) eps |a_p||a_q|).
/// Singular values come out non-increasing; ties keep the Jacobi column order.
/// Each left vector is signed so its largest-magnitude entry (first index on
/// ties) is non-negative, with the paired right vector flipped to match.
///
/// Throws ValidationError on non-finite input and NumericalError naming `name`
/// when kMaxJacobiSweeps sweeps do not converge.
SvdResult svd_full(const DenseMatrix& m, std::string_view name = "matrix");

struct TruncatedSvd {
    OrthonormalBasis U_k;
    OrthonormalBasis V_k;
    std::vector<double> sigma_k;
};

/// Leading k singular triplets. Throws ParameterError unless 1 <= k <= min(m, n).
TruncatedSvd truncate(const SvdResult& svd, std::size_t k);

/// Principal angles (degrees, ascending, clamped to [0, 90]) between the spans
/// of two bases with equal shapes.
///
/// Angles below 45 degrees are taken from the sines, i.e. the singular values
/// of (I - B1 B1ᵀ) B2, and the rest from arccos of the singular values of
/// B1ᵀ B2. Both describe the same angles; the sine route keeps small angles
/// accurate where arccos loses half the digits.
std::vector<double> principal_angles(const OrthonormalBasis& b1, const OrthonormalBasis& b2);

/// Extends the orthonormal columns of `basis` to a full orthogonal dim x dim matrix.
DenseMatrix complete_orthogonal(const DenseMatrix& basis);

/// Modified Gram-Schmidt on the columns of `a` (rows >= cols, full column rank).
DenseMatrix orthonormalize_columns(const DenseMatrix& a);

/// max |Bᵀ B - I|
double orthonormality_defect(const DenseMatrix& b);

} // namespace rpsft
