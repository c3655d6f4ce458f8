#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "oga/dictionary.hpp"
#include "oga/linalg.hpp"

namespace oga {

enum class StopReason { completed_steps, correlation_below_tol };

inline const char* to_string(StopReason r) {
    return r == StopReason::completed_steps ? "completed_steps" : "correlation_below_tol";
}

/// Full record of a greedy pursuit run. Step numbers n are 1-based in the
/// notation below; arrays are 0-based with residual data also present for
/// n = 0 (the input signal).
///
///   selected[n-1]        index of the atom picked at step n
///   corrs[n-1]           signed correlation of the step-(n-1) residual with
///                        the picked atom (the quantity the argmax maximizes
///                        in absolute value)
///   residual_norms[n]    norm of the residual after n steps
///   residuals[n]         the residual vector after n steps
///   coeffs_per_step[n-1] least-squares expansion of the step-n approximant
///                        over the first n selected atoms
///   coeff_deltas[n-1]    the per-step expansion change: entry i holds the
///                        coefficient of atom i+1 in (residual[n-1] -
///                        residual[n]), computed as the difference of
///                        consecutive coefficient vectors
struct OgaTrace {
    std::vector<std::size_t> selected;
    std::vector<double> corrs;
    std::vector<double> residual_norms;
    std::vector<Vector> residuals;
    std::vector<std::vector<double>> coeffs_per_step;
    std::vector<std::vector<double>> coeff_deltas;
    StopReason stop_reason = StopReason::completed_steps;

    std::size_t steps() const { return selected.size(); }
};

/// Lowest index attaining max |<v, atom>|, with the signed inner product at
/// that index. A vector orthogonal to every atom reports index 0, value 0.
inline std::pair<std::size_t, double> max_correlation(const Dictionary& d, VecView v) {
    if (v.size() != d.dim()) {
        throw std::invalid_argument("max_correlation: vector dimension " +
                                    std::to_string(v.size()) + " does not match dictionary " +
                                    std::to_string(d.dim()));
    }
    std::size_t best_index = 0;
    double best_value = 0.0;
    double best_abs = -1.0;
    for (std::size_t i = 0; i < d.size(); ++i) {
        const double c = inner(d.atom(i), v);
        const double a = std::fabs(c);
        if (a > best_abs) {
            best_abs = a;
            best_value = c;
            best_index = i;
        }
    }
    return {best_index, best_value};
}

/// Orthogonal greedy pursuit: at each step pick the atom whose correlation
/// with the current residual is largest in absolute value (ties break to the
/// lowest atom index), then replace the approximant with the orthogonal
/// projection of f onto the span of all atoms picked so far. Stops early
/// when the best correlation drops to stop_tol or below.
inline OgaTrace run_oga(const Dictionary& d, VecView f, std::size_t steps, double stop_tol) {
    if (f.size() != d.dim()) {
        throw std::invalid_argument("run_oga: signal dimension " + std::to_string(f.size()) +
                                    " does not match dictionary " + std::to_string(d.dim()));
    }
    if (steps > d.dim() || steps > d.size()) {
        throw std::invalid_argument("run_oga: steps = " + std::to_string(steps) +
                                    " exceeds dim or atom count");
    }
    if (stop_tol < 0.0) {
        throw std::invalid_argument("run_oga: stop_tol must be >= 0");
    }

    OgaTrace trace;
    trace.residuals.emplace_back(f.begin(), f.end());
    trace.residual_norms.push_back(norm(f));

    std::vector<VecView> picked;       // views into dictionary storage
    std::vector<double> signal_corrs;  // <f, g_i> for the picked atoms
    picked.reserve(steps);

    for (std::size_t n = 1; n <= steps; ++n) {
        const auto [index, value] = max_correlation(d, trace.residuals.back());
        if (std::fabs(value) <= stop_tol) {
            trace.stop_reason = StopReason::correlation_below_tol;
            return trace;
        }
        trace.selected.push_back(index);
        trace.corrs.push_back(value);
        picked.push_back(d.atom(index));
        signal_corrs.push_back(inner(d.atom(index), f));

        std::vector<double> coeffs;
        try {
            coeffs = solve_spd(GramMatrix::from_atoms(picked), signal_corrs);
        } catch (const std::runtime_error& e) {
            throw std::runtime_error("run_oga: projection failed at step " + std::to_string(n) +
                                     ": " + e.what());
        }
        Vector approx(f.size(), 0.0);
        for (std::size_t i = 0; i < picked.size(); ++i) {
            axpy(approx, coeffs[i], picked[i]);
        }
        Vector residual = subtract(f, approx);

        std::vector<double> delta(coeffs);
        if (n >= 2) {
            const auto& prev = trace.coeffs_per_step.back();
            for (std::size_t i = 0; i < prev.size(); ++i) {
                delta[i] -= prev[i];
            }
        }
        trace.coeffs_per_step.push_back(std::move(coeffs));
        trace.coeff_deltas.push_back(std::move(delta));
        trace.residual_norms.push_back(norm(residual));
        trace.residuals.push_back(std::move(residual));
    }
    trace.stop_reason = StopReason::completed_steps;
    return trace;
}

/// Relative default for the early-stop threshold.
inline constexpr double kDefaultStopTolRel = 1e-13;

inline OgaTrace run_oga(const Dictionary& d, VecView f, std::size_t steps) {
    return run_oga(d, f, steps, kDefaultStopTolRel * norm(f));
}

}  // namespace oga
