#pragma once

// Small dense linear algebra for action-space covariances (d <= 64).
// Matrices are stored packed: row-major lower triangle, d(d+1)/2 values,
// entry (i, j) with j <= i at index i(i+1)/2 + j.

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

namespace pgc {

using Vec = std::vector<double>;

constexpr std::size_t packed_size(std::size_t d) { return d * (d + 1) / 2; }
constexpr std::size_t packed_index(std::size_t i, std::size_t j) { return i * (i + 1) / 2 + j; }

/// Lower-triangular matrix. Entries above the diagonal are implicitly zero.
class LowerTriangular {
public:
    LowerTriangular() = default;
    explicit LowerTriangular(std::size_t dim) : dim_(dim), packed_(packed_size(dim), 0.0) {}
    LowerTriangular(std::size_t dim, Vec packed);

    static LowerTriangular identity(std::size_t dim);
    /// Builds from full rows; entries above the diagonal are ignored.
    static LowerTriangular from_rows(std::initializer_list<std::initializer_list<double>> rows);

    std::size_t dim() const { return dim_; }
    double operator()(std::size_t i, std::size_t j) const { return j > i ? 0.0 : packed_[packed_index(i, j)]; }
    double& at(std::size_t i, std::size_t j) { return packed_[packed_index(i, j)]; }
    double diag(std::size_t k) const { return packed_[packed_index(k, k)]; }

    std::span<const double> packed() const { return packed_; }
    std::span<double> packed() { return packed_; }

    bool has_positive_diagonal() const;

private:
    std::size_t dim_ = 0;
    Vec packed_;
};

/// Symmetric matrix, lower half stored. Positive-definiteness is established
/// by a successful cholesky().
class SymmetricPD {
public:
    SymmetricPD() = default;
    explicit SymmetricPD(std::size_t dim) : dim_(dim), packed_(packed_size(dim), 0.0) {}
    SymmetricPD(std::size_t dim, Vec packed);

    static SymmetricPD identity(std::size_t dim);
    static SymmetricPD from_rows(std::initializer_list<std::initializer_list<double>> rows);
    /// Two-dimensional covariance with equal marginal deviation and correlation rho.
    static SymmetricPD correlated(std::size_t dim, double stddev, double rho);

    std::size_t dim() const { return dim_; }
    double operator()(std::size_t i, std::size_t j) const {
        return i >= j ? packed_[packed_index(i, j)] : packed_[packed_index(j, i)];
    }
    double& at(std::size_t i, std::size_t j) { return i >= j ? packed_[packed_index(i, j)] : packed_[packed_index(j, i)]; }
    std::span<const double> packed() const { return packed_; }

private:
    std::size_t dim_ = 0;
    Vec packed_;
};

constexpr double kPivotTolerance = 1e-12;

/// L with L * L^T = S. Throws NotPositiveDefinite when a pivot is <= 1e-12.
LowerTriangular cholesky(const SymmetricPD& s);

/// Solves L y = v.
Vec forward_substitute(const LowerTriangular& l, std::span<const double> v);

/// Solves L^T x = v.
Vec backward_substitute_transposed(const LowerTriangular& l, std::span<const double> v);

/// (a - mu)^T (L L^T)^{-1} (a - mu), evaluated as y^T y with y = L^{-1}(a - mu).
double mahalanobis_sq(std::span<const double> a, std::span<const double> mu, const LowerTriangular& l);

/// L * L^T
SymmetricPD gram(const LowerTriangular& l);

/// L * y
Vec multiply(const LowerTriangular& l, std::span<const double> y);

/// sum_k log L(k, k)
double log_diagonal_sum(const LowerTriangular& l);

}  // namespace pgc
