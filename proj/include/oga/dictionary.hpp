#pragma once

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "oga/linalg.hpp"
#include "oga/rng.hpp"

namespace oga {

struct CoherenceReport {
    double m_coherence = 0.0;
    std::pair<std::size_t, std::size_t> witness_pair{0, 0};
};

namespace detail {

/// Dot product with lane-strided partial sums. The fixed accumulator layout
/// keeps the result deterministic while letting the compiler emit packed
/// fused multiply-adds; the plain sequential loop runs an order of magnitude
/// slower on wide rows.
inline double dot_accum(const double* a, const double* b, std::size_t n) {
    constexpr std::size_t kLanes = 32;
    double acc[kLanes] = {};
    std::size_t k = 0;
    for (; k + kLanes <= n; k += kLanes) {
        for (std::size_t l = 0; l < kLanes; ++l) {
            acc[l] += a[k + l] * b[k + l];
        }
    }
    double sum = 0.0;
    for (std::size_t l = 0; l < kLanes; ++l) sum += acc[l];
    for (; k < n; ++k) sum += a[k] * b[k];
    return sum;
}

/// 4x4 tile of pairwise dot products between rows of two row groups, lane
/// accumulated. Each loaded cache line feeds four products, which is what
/// keeps the full pairwise scan compute-bound instead of L2-bound.
inline void dot_tile_4x4(const double* const ri[4], const double* const rj[4], std::size_t dim,
                         double out[4][4]) {
    constexpr std::size_t kLanes = 8;
    double acc[4][4][kLanes] = {};
    std::size_t k = 0;
    for (; k + kLanes <= dim; k += kLanes) {
        for (std::size_t a = 0; a < 4; ++a) {
            for (std::size_t b = 0; b < 4; ++b) {
                for (std::size_t l = 0; l < kLanes; ++l) {
                    acc[a][b][l] += ri[a][k + l] * rj[b][k + l];
                }
            }
        }
    }
    for (std::size_t a = 0; a < 4; ++a) {
        for (std::size_t b = 0; b < 4; ++b) {
            double sum = 0.0;
            for (std::size_t l = 0; l < kLanes; ++l) sum += acc[a][b][l];
            for (std::size_t t = k; t < dim; ++t) sum += ri[a][t] * rj[b][t];
            out[a][b] = sum;
        }
    }
}

/// Max |<a_i, a_j>| over distinct pairs of the rows of a count x dim matrix,
/// with the lexicographically smallest witness pair on exact ties. Tiled
/// 4x4 over row pairs; at 8192 atoms of dimension 4096 this is ~1.4e11
/// multiply-adds.
inline CoherenceReport max_pairwise_inner(const double* data, std::size_t count, std::size_t dim) {
    CoherenceReport best;
    best.m_coherence = -1.0;
    auto consider = [&](double value, std::size_t i, std::size_t j) {
        const double a = std::fabs(value);
        if (a > best.m_coherence || (a == best.m_coherence &&
                                     std::make_pair(i, j) < best.witness_pair)) {
            best.m_coherence = a;
            best.witness_pair = {i, j};
        }
    };
    const std::size_t tiles = count / 4;
    for (std::size_t ti = 0; ti < tiles; ++ti) {
        const std::size_t i0 = ti * 4;
        const double* ri[4] = {data + i0 * dim, data + (i0 + 1) * dim, data + (i0 + 2) * dim,
                               data + (i0 + 3) * dim};
        for (std::size_t tj = ti; tj < tiles; ++tj) {
            const std::size_t j0 = tj * 4;
            const double* rj[4] = {data + j0 * dim, data + (j0 + 1) * dim, data + (j0 + 2) * dim,
                                   data + (j0 + 3) * dim};
            double out[4][4];
            dot_tile_4x4(ri, rj, dim, out);
            for (std::size_t a = 0; a < 4; ++a) {
                for (std::size_t b = 0; b < 4; ++b) {
                    if (i0 + a < j0 + b) consider(out[a][b], i0 + a, j0 + b);
                }
            }
        }
    }
    // remainder rows that do not fill a 4-tile
    for (std::size_t i = 0; i < count; ++i) {
        const std::size_t j_start = std::max(i + 1, tiles * 4);
        for (std::size_t j = j_start; j < count; ++j) {
            consider(dot_accum(data + i * dim, data + j * dim, dim), i, j);
        }
    }
    if (best.m_coherence < 0.0) best.m_coherence = 0.0;  // single-atom guard
    return best;
}

}  // namespace detail

/// Finite dictionary: an ordered list of unit-norm atoms in R^dim, stored as
/// a flat row-major matrix, with the coherence (max pairwise |inner|) and
/// its witness pair measured once at construction.
class Dictionary {
public:
    std::size_t dim() const { return dim_; }
    std::size_t size() const { return count_; }
    const std::string& label() const { return label_; }
    VecView atom(std::size_t i) const { return {data_.data() + i * dim_, dim_}; }
    const std::vector<double>& data() const { return data_; }
    const CoherenceReport& coherence_report() const { return coherence_; }
    double coherence() const { return coherence_.m_coherence; }

    /// Largest m admitted by the small-coherence regime m <= 1/(20M);
    /// nullopt means unbounded (orthonormal dictionary).
    std::optional<std::size_t> regime_ceiling() const {
        if (coherence_.m_coherence <= 0.0) return std::nullopt;
        return static_cast<std::size_t>(1.0 / (20.0 * coherence_.m_coherence));
    }

    friend Dictionary build_dictionary(const std::vector<Vector>& atoms, std::string label);
    friend Dictionary subdictionary(const Dictionary& d, const std::vector<std::size_t>& indices);

private:
    Dictionary(std::size_t dim, std::size_t count, std::vector<double> data, std::string label)
        : dim_(dim), count_(count), data_(std::move(data)), label_(std::move(label)) {
        coherence_ = detail::max_pairwise_inner(data_.data(), count_, dim_);
        if (coherence_.m_coherence > 1.0 - 1e-10) {
            throw std::invalid_argument(
                "dictionary '" + label_ + "': atoms " +
                std::to_string(coherence_.witness_pair.first) + " and " +
                std::to_string(coherence_.witness_pair.second) +
                " are duplicates or antipodal (|inner| = " +
                std::to_string(coherence_.m_coherence) + ")");
        }
    }

    std::size_t dim_ = 0;
    std::size_t count_ = 0;
    std::vector<double> data_;
    std::string label_;
    CoherenceReport coherence_;
};

/// Validating constructor. Atoms already unit to 1e-12 are kept bit for bit;
/// atoms within 1e-6 of unit norm are renormalized; anything else is
/// rejected. Duplicate or antipodal atom pairs are rejected because they
/// force coherence 1.
inline Dictionary build_dictionary(const std::vector<Vector>& atoms, std::string label) {
    if (atoms.empty()) {
        throw std::invalid_argument("build_dictionary: no atoms");
    }
    if (atoms.size() < 2) {
        throw std::invalid_argument("build_dictionary: need at least 2 atoms");
    }
    const std::size_t dim = atoms[0].size();
    if (dim == 0) {
        throw std::invalid_argument("build_dictionary: zero-dimensional atoms");
    }
    std::vector<double> data;
    data.reserve(atoms.size() * dim);
    for (std::size_t i = 0; i < atoms.size(); ++i) {
        if (atoms[i].size() != dim) {
            throw std::invalid_argument("build_dictionary: atom " + std::to_string(i) +
                                        " has dimension " + std::to_string(atoms[i].size()) +
                                        ", expected " + std::to_string(dim));
        }
        if (!all_finite(atoms[i])) {
            throw std::invalid_argument("build_dictionary: atom " + std::to_string(i) +
                                        " has non-finite entries");
        }
        const double n = norm(atoms[i]);
        if (n == 0.0) {
            throw std::invalid_argument("build_dictionary: atom " + std::to_string(i) +
                                        " is the zero vector");
        }
        if (std::fabs(n - 1.0) <= 1e-12) {
            data.insert(data.end(), atoms[i].begin(), atoms[i].end());
        } else if (std::fabs(n - 1.0) <= 1e-6) {
            for (double x : atoms[i]) data.push_back(x / n);
        } else {
            throw std::invalid_argument("build_dictionary: atom " + std::to_string(i) +
                                        " has norm " + std::to_string(n) +
                                        ", too far from unit to renormalize");
        }
    }
    return Dictionary(dim, atoms.size(), std::move(data), std::move(label));
}

inline CoherenceReport coherence(const Dictionary& d) {
    return d.coherence_report();
}

/// Full pairwise Gram matrix of a dictionary. Compute it once per
/// dictionary and share it across oracle calls; the guard rejects sizes
/// whose matrix would not fit comfortably in memory.
inline GramMatrix gram_matrix(const Dictionary& d) {
    const std::size_t n = d.size();
    if (n * n > (std::size_t{1} << 26)) {
        throw std::runtime_error("gram_matrix: " + std::to_string(n) +
                                 " atoms is too large to materialize; use a subdictionary");
    }
    GramMatrix g(n);
    const double* data = d.data().data();
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j <= i; ++j) {
            const double v = detail::dot_accum(data + i * d.dim(), data + j * d.dim(), d.dim());
            g.at(i, j) = v;
            g.at(j, i) = v;
        }
    }
    return g;
}

/// Standard basis of R^(2^k) together with the rows of the normalized
/// Sylvester-Hadamard matrix of the same order: 2^(k+1) atoms with
/// coherence exactly 2^(-k/2).
inline Dictionary gen_identity_hadamard(unsigned k) {
    if (k < 1) {
        throw std::invalid_argument("gen_identity_hadamard: k must be >= 1");
    }
    if (k > 12) {
        throw std::invalid_argument("gen_identity_hadamard: k = " + std::to_string(k) +
                                    " exceeds the memory budget (max 12, ~256 MiB of atoms)");
    }
    const std::size_t dim = std::size_t{1} << k;
    const double scale = 1.0 / std::sqrt(static_cast<double>(dim));
    std::vector<Vector> atoms;
    atoms.reserve(2 * dim);
    for (std::size_t i = 0; i < dim; ++i) {
        Vector e(dim, 0.0);
        e[i] = 1.0;
        atoms.push_back(std::move(e));
    }
    for (std::size_t i = 0; i < dim; ++i) {
        Vector row(dim);
        for (std::size_t j = 0; j < dim; ++j) {
            // Sylvester sign: parity of popcount(i & j)
            row[j] = (std::popcount(i & j) & 1) ? -scale : scale;
        }
        atoms.push_back(std::move(row));
    }
    return build_dictionary(atoms, "hadamard-union-k" + std::to_string(k));
}

/// Atoms drawn uniformly on the unit sphere from the seeded generator. When
/// max_coherence is given the whole draw is rejected and redrawn until the
/// measured coherence fits, up to max_retries attempts.
inline Dictionary gen_random_spherical(std::size_t dim, std::size_t count, std::uint64_t seed,
                                       std::optional<double> max_coherence = std::nullopt,
                                       unsigned max_retries = 64) {
    if (count < 2) {
        throw std::invalid_argument("gen_random_spherical: need count >= 2");
    }
    if (dim == 0) {
        throw std::invalid_argument("gen_random_spherical: dim must be positive");
    }
    SplitMix64 rng(seed);
    double best_seen = 2.0;
    const std::string label = "random-d" + std::to_string(dim) + "-n" + std::to_string(count) +
                              "-s" + std::to_string(seed);
    for (unsigned attempt = 0; attempt < max_retries; ++attempt) {
        std::vector<Vector> atoms(count);
        for (auto& a : atoms) {
            a.resize(dim);
            double n = 0.0;
            do {
                for (double& x : a) x = rng.normal();
                n = norm(a);
            } while (n == 0.0);
            for (double& x : a) x /= n;
        }
        Dictionary d = build_dictionary(atoms, label);
        if (!max_coherence || d.coherence() <= *max_coherence) {
            return d;
        }
        best_seen = std::min(best_seen, d.coherence());
    }
    throw std::runtime_error("gen_random_spherical: retry budget (" +
                             std::to_string(max_retries) + ") exhausted; best coherence " +
                             std::to_string(best_seen) + " > limit " +
                             std::to_string(*max_coherence));
}

/// Sub-dictionary with the atoms at the given indices, in the given order.
/// Its coherence never exceeds the parent's.
inline Dictionary subdictionary(const Dictionary& d, const std::vector<std::size_t>& indices) {
    if (indices.size() < 2) {
        throw std::invalid_argument("subdictionary: need at least 2 indices");
    }
    std::vector<bool> seen(d.size(), false);
    for (std::size_t idx : indices) {
        if (idx >= d.size()) {
            throw std::invalid_argument("subdictionary: index " + std::to_string(idx) +
                                        " out of range (size " + std::to_string(d.size()) + ")");
        }
        if (seen[idx]) {
            throw std::invalid_argument("subdictionary: repeated index " + std::to_string(idx));
        }
        seen[idx] = true;
    }
    std::vector<double> data;
    data.reserve(indices.size() * d.dim());
    for (std::size_t idx : indices) {
        const VecView a = d.atom(idx);
        data.insert(data.end(), a.begin(), a.end());
    }
    return Dictionary(d.dim(), indices.size(), std::move(data), d.label());
}

/// Text format, one value set per line:
///   dim,<d>
///   count,<N>
///   label,<text>
/// followed by N lines of d comma-separated floats printed with 17
/// significant digits, which round-trips 64-bit values exactly.
inline void save_dictionary(const Dictionary& d, const std::string& path) {
    std::ofstream out(path);
    if (!out) {
        throw std::runtime_error("save_dictionary: cannot open '" + path + "' for writing");
    }
    out << "dim," << d.dim() << "\n";
    out << "count," << d.size() << "\n";
    out << "label," << d.label() << "\n";
    char buf[40];
    for (std::size_t i = 0; i < d.size(); ++i) {
        const VecView a = d.atom(i);
        for (std::size_t j = 0; j < a.size(); ++j) {
            std::snprintf(buf, sizeof(buf), "%.17g", a[j]);
            if (j) out << ',';
            out << buf;
        }
        out << "\n";
    }
    if (!out) {
        throw std::runtime_error("save_dictionary: write to '" + path + "' failed");
    }
}

namespace detail {

inline std::string expect_tagged_line(std::istream& in, const std::string& tag, int line_no) {
    std::string line;
    if (!std::getline(in, line)) {
        throw std::runtime_error("load_dictionary: line " + std::to_string(line_no) +
                                 ": file truncated, expected '" + tag + ",...'");
    }
    if (line.rfind(tag + ",", 0) != 0) {
        throw std::runtime_error("load_dictionary: line " + std::to_string(line_no) +
                                 ": expected '" + tag + ",<value>', got '" + line + "'");
    }
    return line.substr(tag.size() + 1);
}

}  // namespace detail

inline Dictionary load_dictionary(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("load_dictionary: cannot open '" + path + "'");
    }
    std::size_t dim = 0, count = 0;
    try {
        dim = std::stoull(detail::expect_tagged_line(in, "dim", 1));
        count = std::stoull(detail::expect_tagged_line(in, "count", 2));
    } catch (const std::logic_error&) {
        throw std::runtime_error("load_dictionary: '" + path + "': malformed dim/count header");
    }
    const std::string label = detail::expect_tagged_line(in, "label", 3);
    if (dim == 0 || count == 0) {
        throw std::runtime_error("load_dictionary: '" + path + "': dim and count must be positive");
    }
    std::vector<Vector> atoms;
    atoms.reserve(count);
    std::string line;
    for (std::size_t i = 0; i < count; ++i) {
        const int line_no = static_cast<int>(i) + 4;
        if (!std::getline(in, line)) {
            throw std::runtime_error("load_dictionary: line " + std::to_string(line_no) +
                                     ": file truncated, expected atom row " + std::to_string(i));
        }
        Vector atom;
        atom.reserve(dim);
        const char* p = line.c_str();
        char* end = nullptr;
        while (true) {
            const double v = std::strtod(p, &end);
            if (end == p) {
                throw std::runtime_error("load_dictionary: line " + std::to_string(line_no) +
                                         ", offset " + std::to_string(p - line.c_str()) +
                                         ": expected a number");
            }
            atom.push_back(v);
            p = end;
            if (*p == ',') {
                ++p;
            } else {
                break;
            }
        }
        if (*p != '\0') {
            throw std::runtime_error("load_dictionary: line " + std::to_string(line_no) +
                                     ", offset " + std::to_string(p - line.c_str()) +
                                     ": trailing garbage");
        }
        if (atom.size() != dim) {
            throw std::runtime_error("load_dictionary: line " + std::to_string(line_no) +
                                     ": atom has " + std::to_string(atom.size()) +
                                     " entries, expected " + std::to_string(dim));
        }
        if (!all_finite(atom)) {
            throw std::runtime_error("load_dictionary: line " + std::to_string(line_no) +
                                     ": non-finite entry");
        }
        const double n = norm(atom);
        if (std::fabs(n - 1.0) > 1e-6) {
            throw std::runtime_error("load_dictionary: line " + std::to_string(line_no) +
                                     ": atom norm " + std::to_string(n) + " is not unit");
        }
        atoms.push_back(std::move(atom));
    }
    return build_dictionary(atoms, label);
}

}  // namespace oga
