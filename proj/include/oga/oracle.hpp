#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "oga/dictionary.hpp"
#include "oga/linalg.hpp"
#include "oga/rng.hpp"

namespace oga {

/// Exact best m-term approximation of f: the support, its least-squares
/// coefficients, the optimal residual v0 and sigma = ||v0||.
struct BestTermResult {
    std::size_t m = 0;
    std::vector<std::size_t> support;
    std::vector<double> coeffs;
    double sigma = 0.0;
    Vector v0;
};

enum class Provenance { exact_oracle, planted };

inline const char* to_string(Provenance p) {
    return p == Provenance::exact_oracle ? "exact_oracle" : "planted";
}

/// An m-atom reference subspace with coefficients and orthogonal remainder:
/// either the exact oracle's answer or a planted surrogate.
struct ReferenceDecomposition {
    std::vector<std::size_t> support;
    std::vector<double> coeffs;
    Vector v0;
    double v0_norm = 0.0;
    Provenance provenance = Provenance::planted;
};

inline ReferenceDecomposition to_reference(const BestTermResult& r) {
    return {r.support, r.coeffs, r.v0, r.sigma, Provenance::exact_oracle};
}

inline constexpr std::uint64_t kDefaultSupportBudget = 50'000'000;

namespace detail {

/// binomial(n, m), saturating at max.
inline std::uint64_t binomial_or_max(std::uint64_t n, std::uint64_t m) {
    if (m > n) return 0;
    m = std::min(m, n - m);
    long double acc = 1.0L;
    for (std::uint64_t i = 1; i <= m; ++i) {
        acc = acc * static_cast<long double>(n - m + i) / static_cast<long double>(i);
        if (acc > 1.0e18L) return std::numeric_limits<std::uint64_t>::max();
    }
    return static_cast<std::uint64_t>(acc + 0.5L);
}

/// In-place Cholesky solve on a small stack matrix; returns false if a
/// pivot drops below the dependence threshold.
inline bool small_spd_solve(double* a, double* b, std::size_t n) {
    for (std::size_t j = 0; j < n; ++j) {
        double pivot = a[j * n + j];
        for (std::size_t k = 0; k < j; ++k) pivot -= a[j * n + k] * a[j * n + k];
        if (pivot <= 1e-13) return false;
        const double ljj = std::sqrt(pivot);
        a[j * n + j] = ljj;
        for (std::size_t i = j + 1; i < n; ++i) {
            double sum = a[i * n + j];
            for (std::size_t k = 0; k < j; ++k) sum -= a[i * n + k] * a[j * n + k];
            a[i * n + j] = sum / ljj;
        }
    }
    for (std::size_t i = 0; i < n; ++i) {
        double sum = b[i];
        for (std::size_t k = 0; k < i; ++k) sum -= a[i * n + k] * b[k];
        b[i] = sum / a[i * n + i];
    }
    for (std::size_t ii = n; ii-- > 0;) {
        double sum = b[ii];
        for (std::size_t k = ii + 1; k < n; ++k) sum -= a[k * n + ii] * b[k];
        b[ii] = sum / a[ii * n + ii];
    }
    return true;
}

}  // namespace detail

/// Enumerates every m-element support in lexicographic order, solves the
/// normal equations on each from precomputed correlations (and, for m >= 2,
/// the dictionary Gram matrix), and returns the minimizer; ties keep the
/// lexicographically smallest support. Pass a precomputed `gram` to share
/// the matrix across calls on the same dictionary.
inline BestTermResult best_m_term(const Dictionary& d, VecView f, std::size_t m,
                                  std::uint64_t budget = kDefaultSupportBudget,
                                  const GramMatrix* gram = nullptr) {
    if (f.size() != d.dim()) {
        throw std::invalid_argument("best_m_term: dimension mismatch");
    }
    if (m > d.dim() || m > d.size()) {
        throw std::invalid_argument("best_m_term: m = " + std::to_string(m) +
                                    " exceeds dim or atom count");
    }
    BestTermResult result;
    result.m = m;
    if (m == 0) {
        result.v0.assign(f.begin(), f.end());
        result.sigma = norm(f);
        return result;
    }
    const std::uint64_t supports = detail::binomial_or_max(d.size(), m);
    if (supports > budget) {
        throw std::runtime_error("best_m_term: " + std::to_string(supports) +
                                 " supports exceed the enumeration budget " +
                                 std::to_string(budget) +
                                 "; raise --budget or shrink the dictionary with a "
                                 "subdictionary");
    }
    constexpr std::size_t kMaxM = 16;
    if (m > kMaxM) {
        throw std::invalid_argument("best_m_term: m > 16 is outside the exhaustive range");
    }

    const std::size_t count = d.size();
    std::vector<double> corr(count);
    for (std::size_t i = 0; i < count; ++i) {
        corr[i] = inner(d.atom(i), f);
    }
    GramMatrix local;
    const GramMatrix* gp = gram;
    if (m >= 2 && gp == nullptr) {
        local = gram_matrix(d);
        gp = &local;
    }
    if (gp != nullptr && gp->n != count) {
        throw std::invalid_argument("best_m_term: supplied Gram matrix has wrong size");
    }

    const double f_sq = inner(f, f);
    double best_resid_sq = std::numeric_limits<double>::infinity();
    std::vector<std::size_t> best_support;

    std::vector<std::size_t> idx(m);
    for (std::size_t i = 0; i < m; ++i) idx[i] = i;
    double a[kMaxM * kMaxM];
    double b[kMaxM];
    while (true) {
        for (std::size_t r = 0; r < m; ++r) {
            b[r] = corr[idx[r]];
            a[r * m + r] = 1.0;
            for (std::size_t c = 0; c < r; ++c) {
                const double g = (m >= 2) ? gp->at(idx[r], idx[c]) : 0.0;
                a[r * m + c] = g;
                a[c * m + r] = g;
            }
        }
        if (detail::small_spd_solve(a, b, m)) {
            double explained = 0.0;
            for (std::size_t r = 0; r < m; ++r) explained += b[r] * corr[idx[r]];
            const double resid_sq = f_sq - explained;
            if (resid_sq < best_resid_sq) {
                best_resid_sq = resid_sq;
                best_support = idx;
            }
        }
        // next lexicographic combination
        std::size_t pos = m;
        while (pos-- > 0) {
            if (idx[pos] + (m - pos) < count) {
                ++idx[pos];
                for (std::size_t q = pos + 1; q < m; ++q) idx[q] = idx[q - 1] + 1;
                break;
            }
            if (pos == 0) goto done;
        }
    }
done:
    if (best_support.empty()) {
        throw std::runtime_error("best_m_term: every support was numerically dependent");
    }
    // Recompute the winner cleanly so that sigma is exactly ||v0||.
    std::vector<VecView> atoms;
    atoms.reserve(m);
    for (std::size_t i : best_support) atoms.push_back(d.atom(i));
    ProjectionResult proj = project_onto_span(atoms, f);
    result.support = std::move(best_support);
    result.coeffs = std::move(proj.coeffs);
    result.v0 = std::move(proj.residual);
    result.sigma = norm(result.v0);
    return result;
}

struct PlantedInstance {
    Vector signal;
    ReferenceDecomposition ref;
};

/// Synthetic signal with a known reference decomposition: m seeded support
/// atoms with coefficients of magnitude in [coeff_low, coeff_high] and
/// random signs, plus a noise vector projected onto the orthogonal
/// complement of the support span and scaled to exactly noise_norm.
inline PlantedInstance plant_instance(const Dictionary& d, std::size_t m, double coeff_low,
                                      double coeff_high, double noise_norm, std::uint64_t seed) {
    if (m == 0 || m > d.size()) {
        throw std::invalid_argument("plant_instance: need 1 <= m <= atom count");
    }
    if (d.dim() <= m) {
        throw std::invalid_argument("plant_instance: dim must exceed m to leave room for "
                                    "orthogonal noise");
    }
    if (coeff_low <= 0.0 || coeff_high < coeff_low) {
        throw std::invalid_argument("plant_instance: need 0 < coeff_low <= coeff_high");
    }
    if (noise_norm < 0.0) {
        throw std::invalid_argument("plant_instance: noise_norm must be >= 0");
    }
    SplitMix64 rng(seed);

    std::vector<std::size_t> support;
    std::vector<bool> taken(d.size(), false);
    while (support.size() < m) {
        const std::size_t idx = static_cast<std::size_t>(rng.uniform_below(d.size()));
        if (!taken[idx]) {
            taken[idx] = true;
            support.push_back(idx);
        }
    }

    std::vector<double> coeffs(m);
    for (double& c : coeffs) {
        c = rng.uniform(coeff_low, coeff_high) * (rng.coin() ? 1.0 : -1.0);
    }

    std::vector<VecView> atoms;
    atoms.reserve(m);
    for (std::size_t i : support) atoms.push_back(d.atom(i));

    Vector v0(d.dim(), 0.0);
    if (noise_norm > 0.0) {
        bool ok = false;
        for (int attempt = 0; attempt < 16 && !ok; ++attempt) {
            Vector draw(d.dim());
            for (double& x : draw) x = rng.normal();
            ProjectionResult p = project_onto_span(atoms, draw);
            const double rn = norm(p.residual);
            if (rn > 1e-12 * norm(draw)) {
                v0 = scaled(p.residual, noise_norm / rn);
                ok = true;
            }
        }
        if (!ok) {
            throw std::runtime_error("plant_instance: could not draw a noise vector outside "
                                     "the support span");
        }
    }

    Vector f = v0;
    for (std::size_t i = 0; i < m; ++i) {
        axpy(f, coeffs[i], atoms[i]);
    }
    ReferenceDecomposition ref{std::move(support), std::move(coeffs), std::move(v0),
                               noise_norm, Provenance::planted};
    return {std::move(f), std::move(ref)};
}

}  // namespace oga
