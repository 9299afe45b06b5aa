#include "rpsft/linalg.hpp"

#include "rpsft/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <string>

namespace rpsft {

namespace {

using Column = std::vector<double>;

double dot(const Column& a, const Column& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        s += a[i] * b[i];
    }
    return s;
}

double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        s += a[i] * b[i];
    }
    return s;
}

void rotate_pair(std::span<double> p, std::span<double> q, double c, double s) {
    for (std::size_t i = 0; i < p.size(); ++i) {
        const double x = p[i];
        const double y = q[i];
        p[i] = c * x - s * y;
        q[i] = s * x + c * y;
    }
}

// Appends unit vectors orthogonal to `columns` until there are `target` of them.
// Candidates are the coordinate axes; the one with the largest residual wins.
void complete_columns(std::vector<Column>& columns, std::size_t dim, std::size_t target) {
    while (columns.size() < target) {
        Column best;
        double best_norm = -1.0;
        for (std::size_t axis = 0; axis < dim; ++axis) {
            Column v(dim, 0.0);
            v[axis] = 1.0;
            for (int pass = 0; pass < 2; ++pass) {
                for (const auto& c : columns) {
                    const double proj = dot(c, v);
                    for (std::size_t i = 0; i < dim; ++i) {
                        v[i] -= proj * c[i];
                    }
                }
            }
            const double norm = std::sqrt(dot(v, v));
            if (norm > best_norm) {
                best_norm = norm;
                best = std::move(v);
            }
        }
        if (best_norm <= 0.0) {
            throw NumericalError("orthogonal completion failed: no independent direction left");
        }
        for (double& x : best) {
            x /= best_norm;
        }
        columns.push_back(std::move(best));
    }
}

DenseMatrix from_columns(const std::vector<Column>& columns, std::size_t rows) {
    DenseMatrix m(rows, columns.size());
    for (std::size_t j = 0; j < columns.size(); ++j) {
        for (std::size_t i = 0; i < rows; ++i) {
            m(i, j) = columns[j][i];
        }
    }
    return m;
}

std::vector<Column> to_columns(const DenseMatrix& m) {
    std::vector<Column> cols(m.cols(), Column(m.rows()));
    for (std::size_t i = 0; i < m.rows(); ++i) {
        for (std::size_t j = 0; j < m.cols(); ++j) {
            cols[j][i] = m(i, j);
        }
    }
    return cols;
}

// One-sided Jacobi for m >= n. Works on the transpose so that every column
// of `a` is a contiguous row.
SvdResult svd_tall(const DenseMatrix& a, std::string_view name) {
    const std::size_t m = a.rows();
    const std::size_t n = a.cols();
    DenseMatrix work = transpose(a); // n x m, row j = column j of a
    DenseMatrix vt = DenseMatrix::identity(n);
    const double pair_tol = std::numeric_limits<double>::epsilon() * static_cast<double>(std::max(m, n));

    bool converged = false;
    for (int sweep = 0; sweep < kMaxJacobiSweeps && !converged; ++sweep) {
        bool rotated = false;
        for (std::size_t p = 0; p + 1 < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                const double alpha = dot(work.row(p), work.row(p));
                const double beta = dot(work.row(q), work.row(q));
                const double gamma = dot(work.row(p), work.row(q));
                if (gamma == 0.0 || std::abs(gamma) <= pair_tol * std::sqrt(alpha) * std::sqrt(beta)) {
                    continue;
                }
                const double zeta = (beta - alpha) / (2.0 * gamma);
                const double t = std::copysign(1.0, zeta) / (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
                const double c = 1.0 / std::sqrt(1.0 + t * t);
                const double s = c * t;
                rotate_pair(work.row(p), work.row(q), c, s);
                rotate_pair(vt.row(p), vt.row(q), c, s);
                rotated = true;
            }
        }
        converged = !rotated;
    }
    if (!converged) {
        throw NumericalError("svd of " + std::string(name) + " did not converge within " +
                             std::to_string(kMaxJacobiSweeps) + " Jacobi sweeps");
    }

    std::vector<double> norms(n);
    for (std::size_t j = 0; j < n; ++j) {
        norms[j] = std::sqrt(dot(work.row(j), work.row(j)));
    }
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return norms[x] > norms[y]; });

    SvdResult out;
    out.sigma.resize(n);
    std::vector<Column> u_cols;
    std::vector<Column> v_cols;
    u_cols.reserve(n);
    std::vector<std::size_t> missing;
    for (std::size_t j = 0; j < n; ++j) {
        const std::size_t src = order[j];
        const double sigma = norms[src];
        out.sigma[j] = sigma;
        v_cols.emplace_back(vt.row(src).begin(), vt.row(src).end());
        if (sigma > std::numeric_limits<double>::min()) {
            Column u(work.row(src).begin(), work.row(src).end());
            for (double& x : u) {
                x /= sigma;
            }
            u_cols.push_back(std::move(u));
        } else {
            missing.push_back(j);
        }
    }
    // zero singular values have no left vector of their own; they only need to
    // be orthogonal to the rest, and they are last in the ordering
    complete_columns(u_cols, m, n);

    for (std::size_t j = 0; j < n; ++j) {
        auto& u = u_cols[j];
        std::size_t arg = 0;
        for (std::size_t i = 1; i < m; ++i) {
            if (std::abs(u[i]) > std::abs(u[arg])) {
                arg = i;
            }
        }
        if (u[arg] < 0.0) {
            for (double& x : u) {
                x = -x;
            }
            for (double& x : v_cols[j]) {
                x = -x;
            }
        }
    }
    out.U = from_columns(u_cols, m);
    out.V = from_columns(v_cols, n);
    return out;
}

} // namespace

OrthonormalBasis::OrthonormalBasis(DenseMatrix columns, double tol) : columns_(std::move(columns)), tol_(tol) {
    if (columns_.empty()) {
        throw ParameterError("orthonormal basis needs at least one column");
    }
    if (columns_.cols() > columns_.rows()) {
        throw ValidationError("orthonormal basis has more columns (" + std::to_string(columns_.cols()) +
                              ") than rows (" + std::to_string(columns_.rows()) + ")");
    }
    if (!columns_.all_finite()) {
        throw ValidationError("orthonormal basis contains non-finite entries");
    }
    const double defect = orthonormality_defect(columns_);
    if (!(defect < tol_)) {
        throw ValidationError("columns are not orthonormal: max |BᵀB - I| = " + std::to_string(defect));
    }
}

OrthonormalBasis OrthonormalBasis::leading(std::size_t count) const {
    if (count == 0 || count > rank()) {
        throw ParameterError("basis prefix " + std::to_string(count) + " out of range 1.." + std::to_string(rank()));
    }
    return OrthonormalBasis(leading_columns(columns_, count), tol_);
}

SvdResult svd_full(const DenseMatrix& m, std::string_view name) {
    if (m.empty()) {
        throw ParameterError("svd of " + std::string(name) + ": empty matrix");
    }
    if (!m.all_finite()) {
        throw ValidationError("svd of " + std::string(name) + ": non-finite entries");
    }
    if (m.rows() >= m.cols()) {
        return svd_tall(m, name);
    }
    // Mᵀ = U' S V'ᵀ  =>  M = V' S U'ᵀ, then re-sign on the new left vectors
    SvdResult t = svd_tall(transpose(m), name);
    SvdResult out{std::move(t.V), std::move(t.sigma), std::move(t.U)};
    for (std::size_t j = 0; j < out.U.cols(); ++j) {
        std::size_t arg = 0;
        for (std::size_t i = 1; i < out.U.rows(); ++i) {
            if (std::abs(out.U(i, j)) > std::abs(out.U(arg, j))) {
                arg = i;
            }
        }
        if (out.U(arg, j) < 0.0) {
            for (std::size_t i = 0; i < out.U.rows(); ++i) {
                out.U(i, j) = -out.U(i, j);
            }
            for (std::size_t i = 0; i < out.V.rows(); ++i) {
                out.V(i, j) = -out.V(i, j);
            }
        }
    }
    return out;
}

TruncatedSvd truncate(const SvdResult& svd, std::size_t k) {
    const std::size_t r = svd.sigma.size();
    if (k < 1 || k > r) {
        throw ParameterError("truncation rank " + std::to_string(k) + " outside 1.." + std::to_string(r));
    }
    return TruncatedSvd{OrthonormalBasis(leading_columns(svd.U, k)), OrthonormalBasis(leading_columns(svd.V, k)),
                        std::vector<double>(svd.sigma.begin(), svd.sigma.begin() + static_cast<std::ptrdiff_t>(k))};
}

std::vector<double> principal_angles(const OrthonormalBasis& b1, const OrthonormalBasis& b2) {
    if (b1.dim() != b2.dim() || b1.rank() != b2.rank()) {
        throw ParameterError("principal_angles: bases must share shape, got " + std::to_string(b1.dim()) + "x" +
                             std::to_string(b1.rank()) + " and " + std::to_string(b2.dim()) + "x" +
                             std::to_string(b2.rank()));
    }
    const std::size_t k = b1.rank();
    if (bitwise_equal(b1.columns(), b2.columns())) {
        return std::vector<double>(k, 0.0);
    }
    const DenseMatrix cross = matmul_tn(b1.columns(), b2.columns());
    const std::vector<double> cosines = svd_full(cross, "basis cross product").sigma; // descending
    DenseMatrix residual = b2.columns() - matmul(b1.columns(), cross);
    std::vector<double> sines = svd_full(residual, "basis residual").sigma;
    std::reverse(sines.begin(), sines.end()); // ascending, paired with descending cosines

    constexpr double kToDegrees = 180.0 / std::numbers::pi;
    std::vector<double> angles(k);
    for (std::size_t i = 0; i < k; ++i) {
        const double c = std::clamp(cosines[i], 0.0, 1.0);
        const double radians = c * c >= 0.5 ? std::asin(std::clamp(sines[i], 0.0, 1.0)) : std::acos(c);
        angles[i] = std::clamp(radians * kToDegrees, 0.0, 90.0);
    }
    std::sort(angles.begin(), angles.end());
    return angles;
}

DenseMatrix complete_orthogonal(const DenseMatrix& basis) {
    if (basis.cols() > basis.rows()) {
        throw ParameterError("complete_orthogonal: more columns than rows");
    }
    auto cols = to_columns(basis);
    complete_columns(cols, basis.rows(), basis.rows());
    return from_columns(cols, basis.rows());
}

DenseMatrix orthonormalize_columns(const DenseMatrix& a) {
    if (a.cols() > a.rows()) {
        throw ParameterError("orthonormalize_columns: more columns than rows");
    }
    auto cols = to_columns(a);
    for (std::size_t j = 0; j < cols.size(); ++j) {
        for (int pass = 0; pass < 2; ++pass) {
            for (std::size_t p = 0; p < j; ++p) {
                const double proj = dot(cols[p], cols[j]);
                for (std::size_t i = 0; i < a.rows(); ++i) {
                    cols[j][i] -= proj * cols[p][i];
                }
            }
        }
        const double norm = std::sqrt(dot(cols[j], cols[j]));
        if (!(norm > 0.0)) {
            throw NumericalError("orthonormalize_columns: column " + std::to_string(j) + " is linearly dependent");
        }
        for (double& x : cols[j]) {
            x /= norm;
        }
    }
    return from_columns(cols, a.rows());
}

double orthonormality_defect(const DenseMatrix& b) {
    const DenseMatrix gram = matmul_tn(b, b);
    double defect = 0.0;
    for (std::size_t i = 0; i < gram.rows(); ++i) {
        for (std::size_t j = 0; j < gram.cols(); ++j) {
            defect = std::max(defect, std::abs(gram(i, j) - (i == j ? 1.0 : 0.0)));
        }
    }
    return defect;
}

} // namespace rpsft
