#include "pgc/linalg.hpp"

#include <cmath>
#include <string>

#include "pgc/errors.hpp"

namespace pgc {

namespace {

void require_dim(std::size_t expected, std::size_t got, const char* what) {
    if (expected != got) {
        throw DimensionMismatch(std::string(what) + ": expected length " + std::to_string(expected) + ", got " +
                                std::to_string(got));
    }
}

Vec pack_rows(std::initializer_list<std::initializer_list<double>> rows) {
    const std::size_t d = rows.size();
    Vec packed(packed_size(d), 0.0);
    std::size_t i = 0;
    for (const auto& row : rows) {
        require_dim(d, row.size(), "from_rows");
        std::size_t j = 0;
        for (double v : row) {
            if (j <= i) packed[packed_index(i, j)] = v;
            ++j;
        }
        ++i;
    }
    return packed;
}

}  // namespace

LowerTriangular::LowerTriangular(std::size_t dim, Vec packed) : dim_(dim), packed_(std::move(packed)) {
    require_dim(packed_size(dim), packed_.size(), "LowerTriangular");
}

LowerTriangular LowerTriangular::identity(std::size_t dim) {
    LowerTriangular l(dim);
    for (std::size_t k = 0; k < dim; ++k) l.at(k, k) = 1.0;
    return l;
}

LowerTriangular LowerTriangular::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
    return LowerTriangular(rows.size(), pack_rows(rows));
}

bool LowerTriangular::has_positive_diagonal() const {
    for (std::size_t k = 0; k < dim_; ++k)
        if (!(diag(k) > 0.0)) return false;
    return true;
}

SymmetricPD::SymmetricPD(std::size_t dim, Vec packed) : dim_(dim), packed_(std::move(packed)) {
    require_dim(packed_size(dim), packed_.size(), "SymmetricPD");
}

SymmetricPD SymmetricPD::identity(std::size_t dim) {
    SymmetricPD s(dim);
    for (std::size_t k = 0; k < dim; ++k) s.at(k, k) = 1.0;
    return s;
}

SymmetricPD SymmetricPD::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
    return SymmetricPD(rows.size(), pack_rows(rows));
}

SymmetricPD SymmetricPD::correlated(std::size_t dim, double stddev, double rho) {
    SymmetricPD s(dim);
    const double var = stddev * stddev;
    for (std::size_t i = 0; i < dim; ++i)
        for (std::size_t j = 0; j <= i; ++j) s.at(i, j) = (i == j ? 1.0 : rho) * var;
    return s;
}

LowerTriangular cholesky(const SymmetricPD& s) {
    const std::size_t d = s.dim();
    if (d == 0) throw DimensionMismatch("cholesky: empty matrix");
    LowerTriangular l(d);
    for (std::size_t i = 0; i < d; ++i) {
        for (std::size_t j = 0; j <= i; ++j) {
            double sum = s(i, j);
            for (std::size_t k = 0; k < j; ++k) sum -= l(i, k) * l(j, k);
            if (i == j) {
                if (!(sum > kPivotTolerance)) {
                    throw NotPositiveDefinite("cholesky: pivot " + std::to_string(i) + " is " + std::to_string(sum));
                }
                l.at(i, i) = std::sqrt(sum);
            } else {
                l.at(i, j) = sum / l(j, j);
            }
        }
    }
    return l;
}

Vec forward_substitute(const LowerTriangular& l, std::span<const double> v) {
    const std::size_t d = l.dim();
    require_dim(d, v.size(), "forward_substitute");
    if (d == 0) throw DimensionMismatch("forward_substitute: empty system");
    Vec y(d);
    for (std::size_t i = 0; i < d; ++i) {
        double sum = v[i];
        for (std::size_t k = 0; k < i; ++k) sum -= l(i, k) * y[k];
        y[i] = sum / l.diag(i);
    }
    return y;
}

Vec backward_substitute_transposed(const LowerTriangular& l, std::span<const double> v) {
    const std::size_t d = l.dim();
    require_dim(d, v.size(), "backward_substitute_transposed");
    Vec x(d);
    for (std::size_t ii = d; ii-- > 0;) {
        double sum = v[ii];
        for (std::size_t k = ii + 1; k < d; ++k) sum -= l(k, ii) * x[k];
        x[ii] = sum / l.diag(ii);
    }
    return x;
}

double mahalanobis_sq(std::span<const double> a, std::span<const double> mu, const LowerTriangular& l) {
    require_dim(l.dim(), a.size(), "mahalanobis_sq(a)");
    require_dim(l.dim(), mu.size(), "mahalanobis_sq(mu)");
    Vec diff(a.size());
    for (std::size_t k = 0; k < a.size(); ++k) diff[k] = a[k] - mu[k];
    const Vec y = forward_substitute(l, diff);
    double acc = 0.0;
    for (double v : y) acc += v * v;
    return acc;
}

SymmetricPD gram(const LowerTriangular& l) {
    const std::size_t d = l.dim();
    SymmetricPD s(d);
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = 0; j <= i; ++j) {
            double sum = 0.0;
            for (std::size_t k = 0; k <= j; ++k) sum += l(i, k) * l(j, k);
            s.at(i, j) = sum;
        }
    return s;
}

Vec multiply(const LowerTriangular& l, std::span<const double> y) {
    require_dim(l.dim(), y.size(), "multiply");
    Vec out(l.dim(), 0.0);
    for (std::size_t i = 0; i < l.dim(); ++i)
        for (std::size_t k = 0; k <= i; ++k) out[i] += l(i, k) * y[k];
    return out;
}

double log_diagonal_sum(const LowerTriangular& l) {
    double acc = 0.0;
    for (std::size_t k = 0; k < l.dim(); ++k) acc += std::log(l.diag(k));
    return acc;
}

}  // namespace pgc
