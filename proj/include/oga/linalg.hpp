#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace oga {

/// Dense real vector in R^d. All library types treat these as immutable
/// values; operations return fresh vectors.
using Vector = std::vector<double>;

using VecView = std::span<const double>;

inline bool all_finite(VecView v) {
    for (double x : v) {
        if (!std::isfinite(x)) return false;
    }
    return true;
}

inline double inner(VecView u, VecView v) {
    if (u.size() != v.size()) {
        throw std::invalid_argument("inner: dimension mismatch (" +
                                    std::to_string(u.size()) + " vs " +
                                    std::to_string(v.size()) + ")");
    }
    double sum = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) {
        sum += u[i] * v[i];
    }
    return sum;
}

inline double norm(VecView v) {
    return std::sqrt(inner(v, v));
}

inline void axpy(Vector& y, double alpha, VecView x) {
    if (y.size() != x.size()) {
        throw std::invalid_argument("axpy: dimension mismatch");
    }
    for (std::size_t i = 0; i < y.size(); ++i) {
        y[i] += alpha * x[i];
    }
}

inline Vector subtract(VecView a, VecView b) {
    if (a.size() != b.size()) {
        throw std::invalid_argument("subtract: dimension mismatch");
    }
    Vector out(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        out[i] = a[i] - b[i];
    }
    return out;
}

inline Vector scaled(VecView v, double alpha) {
    Vector out(v.begin(), v.end());
    for (double& x : out) x *= alpha;
    return out;
}

/// Symmetric matrix of pairwise inner products, row-major storage.
/// Built from unit-norm atoms it has unit diagonal and off-diagonal
/// magnitudes bounded by the dictionary coherence.
struct GramMatrix {
    std::size_t n = 0;
    std::vector<double> values;  // n*n, row-major

    GramMatrix() = default;
    explicit GramMatrix(std::size_t size) : n(size), values(size * size, 0.0) {}

    double& at(std::size_t i, std::size_t j) { return values[i * n + j]; }
    double at(std::size_t i, std::size_t j) const { return values[i * n + j]; }

    template <class AtomRange>
    static GramMatrix from_atoms(const AtomRange& atoms) {
        const std::size_t count = atoms.size();
        GramMatrix g(count);
        for (std::size_t i = 0; i < count; ++i) {
            for (std::size_t j = 0; j <= i; ++j) {
                const double v = inner(VecView(atoms[i]), VecView(atoms[j]));
                g.at(i, j) = v;
                g.at(j, i) = v;
            }
        }
        return g;
    }
};

/// Solves G c = rhs for symmetric positive definite G via an unpivoted
/// Cholesky factorization. In the regimes this library runs in, G is a
/// Gram matrix of n distinct atoms with (n-1)*M < 1, hence strictly
/// diagonally dominant and safely factorable.
inline std::vector<double> solve_spd(const GramMatrix& g, std::span<const double> rhs) {
    const std::size_t n = g.n;
    if (rhs.size() != n) {
        throw std::invalid_argument("solve_spd: rhs size " + std::to_string(rhs.size()) +
                                    " does not match matrix size " + std::to_string(n));
    }
    std::vector<double> chol(g.values);  // lower triangle of the factor
    for (std::size_t j = 0; j < n; ++j) {
        double pivot = chol[j * n + j];
        for (std::size_t k = 0; k < j; ++k) {
            pivot -= chol[j * n + k] * chol[j * n + k];
        }
        if (pivot <= 0.0) {
            throw std::runtime_error(
                "solve_spd: non-positive pivot " + std::to_string(pivot) +
                " at index " + std::to_string(j) + " (matrix size " +
                std::to_string(n) + "); atoms numerically dependent");
        }
        const double ljj = std::sqrt(pivot);
        chol[j * n + j] = ljj;
        for (std::size_t i = j + 1; i < n; ++i) {
            double sum = chol[i * n + j];
            for (std::size_t k = 0; k < j; ++k) {
                sum -= chol[i * n + k] * chol[j * n + k];
            }
            chol[i * n + j] = sum / ljj;
        }
    }
    // forward then backward substitution
    std::vector<double> y(n);
    for (std::size_t i = 0; i < n; ++i) {
        double sum = rhs[i];
        for (std::size_t k = 0; k < i; ++k) {
            sum -= chol[i * n + k] * y[k];
        }
        y[i] = sum / chol[i * n + i];
    }
    std::vector<double> c(n);
    for (std::size_t ii = n; ii-- > 0;) {
        double sum = y[ii];
        for (std::size_t k = ii + 1; k < n; ++k) {
            sum -= chol[k * n + ii] * c[k];
        }
        c[ii] = sum / chol[ii * n + ii];
    }
    return c;
}

struct ProjectionResult {
    Vector projection;
    Vector residual;
    std::vector<double> coeffs;
};

/// Orthogonal projection of v onto the span of the given atoms, by solving
/// the normal equations with the atoms' Gram matrix. The projection is
/// recomputed from scratch each call; at the span sizes used here (tens of
/// atoms) this is cheap and avoids incremental drift.
template <class AtomRange>
ProjectionResult project_onto_span(const AtomRange& atoms, VecView v) {
    const std::size_t count = atoms.size();
    if (count == 0) {
        return {Vector(v.size(), 0.0), Vector(v.begin(), v.end()), {}};
    }
    for (std::size_t i = 0; i < count; ++i) {
        if (VecView(atoms[i]).size() != v.size()) {
            throw std::invalid_argument("project_onto_span: atom " + std::to_string(i) +
                                        " dimension mismatch");
        }
    }
    const GramMatrix g = GramMatrix::from_atoms(atoms);
    std::vector<double> rhs(count);
    for (std::size_t i = 0; i < count; ++i) {
        rhs[i] = inner(VecView(atoms[i]), v);
    }
    std::vector<double> coeffs = solve_spd(g, rhs);
    Vector projection(v.size(), 0.0);
    for (std::size_t i = 0; i < count; ++i) {
        axpy(projection, coeffs[i], VecView(atoms[i]));
    }
    Vector residual = subtract(v, projection);
    return {std::move(projection), std::move(residual), std::move(coeffs)};
}

}  // namespace oga
