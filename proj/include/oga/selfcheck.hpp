#pragma once

// Deliberately naive reference implementations, kept independent of the main
// solver and oracle code paths. The selftest command and the test suites
// compare the production routines against these.

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "oga/dictionary.hpp"
#include "oga/linalg.hpp"

namespace oga::selfcheck {

/// Dense Gaussian elimination with partial pivoting.
inline std::vector<double> solve_dense(std::vector<std::vector<double>> a,
                                       std::vector<double> rhs) {
    const std::size_t n = a.size();
    if (n == 0 || rhs.size() != n) {
        throw std::invalid_argument("solve_dense: bad system size");
    }
    for (std::size_t col = 0; col < n; ++col) {
        std::size_t pivot_row = col;
        double pivot_abs = std::fabs(a[col][col]);
        for (std::size_t r = col + 1; r < n; ++r) {
            if (std::fabs(a[r][col]) > pivot_abs) {
                pivot_abs = std::fabs(a[r][col]);
                pivot_row = r;
            }
        }
        if (pivot_abs < 1e-13) {
            throw std::runtime_error("solve_dense: pivot " + std::to_string(pivot_abs) +
                                     " at column " + std::to_string(col) + " too small");
        }
        std::swap(a[col], a[pivot_row]);
        std::swap(rhs[col], rhs[pivot_row]);
        for (std::size_t r = col + 1; r < n; ++r) {
            const double factor = a[r][col] / a[col][col];
            if (factor == 0.0) continue;
            for (std::size_t c = col; c < n; ++c) {
                a[r][c] -= factor * a[col][c];
            }
            rhs[r] -= factor * rhs[col];
        }
    }
    std::vector<double> x(n);
    for (std::size_t ii = n; ii-- > 0;) {
        double sum = rhs[ii];
        for (std::size_t c = ii + 1; c < n; ++c) {
            sum -= a[ii][c] * x[c];
        }
        x[ii] = sum / a[ii][ii];
    }
    return x;
}

/// Least-squares fit of v onto the given atoms via explicitly assembled
/// normal equations and Gaussian elimination. Returns the coefficients.
template <class AtomRange>
std::vector<double> least_squares_dense(const AtomRange& atoms, VecView v) {
    const std::size_t n = atoms.size();
    std::vector<std::vector<double>> gram(n, std::vector<double>(n));
    std::vector<double> rhs(n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            gram[i][j] = inner(VecView(atoms[i]), VecView(atoms[j]));
        }
        rhs[i] = inner(VecView(atoms[i]), v);
    }
    return solve_dense(std::move(gram), std::move(rhs));
}

struct BruteResult {
    std::vector<std::size_t> support;
    std::vector<double> coeffs;
    double sigma = 0.0;
    Vector v0;
};

/// Exhaustive best m-term approximation by recursive support enumeration in
/// lexicographic order, materializing every candidate residual. Quadratic in
/// everything and proud of it; only for small dictionaries.
inline BruteResult brute_force_best_term(const Dictionary& d, VecView f, std::size_t m) {
    if (m > d.size()) {
        throw std::invalid_argument("brute_force_best_term: m exceeds atom count");
    }
    BruteResult best;
    best.sigma = norm(f);
    best.v0.assign(f.begin(), f.end());
    if (m == 0) return best;

    std::vector<std::size_t> support(m);
    bool have_best = false;
    auto visit = [&](const std::vector<std::size_t>& s) {
        std::vector<VecView> atoms;
        atoms.reserve(m);
        for (std::size_t idx : s) atoms.push_back(d.atom(idx));
        std::vector<double> coeffs;
        try {
            coeffs = least_squares_dense(atoms, f);
        } catch (const std::runtime_error&) {
            return;  // numerically dependent support; some other support spans it
        }
        Vector approx(f.size(), 0.0);
        for (std::size_t i = 0; i < m; ++i) {
            axpy(approx, coeffs[i], atoms[i]);
        }
        Vector residual = subtract(f, approx);
        const double r = norm(residual);
        if (!have_best || r < best.sigma) {
            have_best = true;
            best.support = s;
            best.coeffs = std::move(coeffs);
            best.sigma = r;
            best.v0 = std::move(residual);
        }
    };
    auto recurse = [&](auto&& self, std::size_t pos, std::size_t from) -> void {
        if (pos == m) {
            visit(support);
            return;
        }
        for (std::size_t idx = from; idx + (m - pos) <= d.size(); ++idx) {
            support[pos] = idx;
            self(self, pos + 1, idx + 1);
        }
    };
    recurse(recurse, 0, 0);
    if (!have_best) {
        throw std::runtime_error("brute_force_best_term: every support was degenerate");
    }
    return best;
}

}  // namespace oga::selfcheck
