#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>
#include <string_view>
#include <vector>

#include "svdclass/errors.hpp"
#include "svdclass/matrix.hpp"

namespace svdclass {

enum class NormKind { One, Two, Infinity, Frobenius };

inline constexpr std::array<NormKind, 4> kAllNorms = {NormKind::One, NormKind::Two,
                                                      NormKind::Infinity, NormKind::Frobenius};

inline std::string_view to_string(NormKind kind) {
    switch (kind) {
        case NormKind::One: return "1";
        case NormKind::Two: return "2";
        case NormKind::Infinity: return "inf";
        case NormKind::Frobenius: return "fro";
    }
    return "?";
}

inline NormKind parse_norm(std::string_view s) {
    if (s == "1") return NormKind::One;
    if (s == "2") return NormKind::Two;
    if (s == "inf") return NormKind::Infinity;
    if (s == "fro") return NormKind::Frobenius;
    throw ConfigError("unknown norm '" + std::string(s) + "' (expected 1, 2, inf or fro)");
}

/// Thin SVD A = U diag(sigma) V^T with r = min(m, n) columns in U and V.
struct SvdFactors {
    Matrix u;                   // m x r, orthonormal columns
    std::vector<double> sigma;  // r values, descending
    Matrix v;                   // n x r, orthonormal columns

    std::size_t rank_capacity() const { return sigma.size(); }
};

struct JacobiOptions {
    double tolerance = 1e-12;
    int max_sweeps = 30;
};

namespace detail {

// Columns of the working matrix are stored contiguously so that the plane
// rotations touch two contiguous ranges.
struct ColumnStore {
    std::size_t length = 0;
    std::size_t count = 0;
    std::vector<double> data;

    double* col(std::size_t j) { return data.data() + j * length; }
    const double* col(std::size_t j) const { return data.data() + j * length; }
};

inline double dot(const double* a, const double* b, std::size_t n) {
    double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        s0 += a[i] * b[i];
        s1 += a[i + 1] * b[i + 1];
        s2 += a[i + 2] * b[i + 2];
        s3 += a[i + 3] * b[i + 3];
    }
    for (; i < n; ++i) s0 += a[i] * b[i];
    return (s0 + s1) + (s2 + s3);
}

inline void rotate(double* p, double* q, std::size_t n, double c, double s) {
    for (std::size_t i = 0; i < n; ++i) {
        const double xp = p[i];
        const double xq = q[i];
        p[i] = c * xp - s * xq;
        q[i] = s * xp + c * xq;
    }
}

// One-sided Jacobi on the columns of `work`. Rotations are mirrored onto
// `vecs` when it is non-null.
inline void jacobi_orthogonalize(ColumnStore& work, ColumnStore* vecs, const JacobiOptions& opts) {
    const std::size_t n = work.count;
    // Squared column norms, refreshed every sweep and updated in between
    // through the rotation identities alpha' = alpha - t*gamma, beta' = beta + t*gamma.
    std::vector<double> sq(n);
    // Columns below the round-off floor of the whole matrix are left alone.
    double total = 0.0;
    for (std::size_t j = 0; j < n; ++j) total += dot(work.col(j), work.col(j), work.length);
    const double eps = std::numeric_limits<double>::epsilon() * static_cast<double>(std::max(n, work.length));
    const double negligible = total * eps * eps;
    for (int sweep = 0; sweep < opts.max_sweeps; ++sweep) {
        for (std::size_t j = 0; j < n; ++j) sq[j] = dot(work.col(j), work.col(j), work.length);
        bool rotated = false;
        for (std::size_t p = 0; p + 1 < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                const double alpha = sq[p];
                const double beta = sq[q];
                if (alpha <= negligible || beta <= negligible) continue;
                double* cp = work.col(p);
                double* cq = work.col(q);
                const double gamma = dot(cp, cq, work.length);
                if (std::abs(gamma) <= opts.tolerance * std::sqrt(alpha) * std::sqrt(beta)) continue;

                const double zeta = (beta - alpha) / (2.0 * gamma);
                const double t = std::copysign(1.0, zeta) / (std::abs(zeta) + std::hypot(1.0, zeta));
                const double c = 1.0 / std::sqrt(1.0 + t * t);
                const double s = c * t;
                rotate(cp, cq, work.length, c, s);
                if (vecs) rotate(vecs->col(p), vecs->col(q), vecs->length, c, s);
                const double shift = t * gamma;
                sq[p] = alpha - shift;
                sq[q] = beta + shift;
                // Recompute when the update cancels most of its magnitude.
                const double scale = 1e-3 * (std::max(alpha, beta) + std::abs(shift));
                if (sq[p] < scale) sq[p] = dot(cp, cp, work.length);
                if (sq[q] < scale) sq[q] = dot(cq, cq, work.length);
                rotated = true;
            }
        }
        if (!rotated) return;
    }
}

inline ColumnStore columns_of(const Matrix& a, bool transpose) {
    ColumnStore s;
    if (!transpose) {
        s.length = a.rows();
        s.count = a.cols();
        s.data.resize(a.size());
        for (std::size_t i = 0; i < a.rows(); ++i)
            for (std::size_t j = 0; j < a.cols(); ++j) s.data[j * s.length + i] = a(i, j);
    } else {
        s.length = a.cols();
        s.count = a.rows();
        s.data.assign(a.values().begin(), a.values().end());
    }
    return s;
}

inline void require_finite(const Matrix& a, const char* what) {
    if (a.empty()) throw ConfigError(std::string(what) + ": empty matrix");
    if (!a.all_finite()) throw ConfigError(std::string(what) + ": non-finite entry");
}

inline std::vector<std::size_t> descending_order(const std::vector<double>& norms) {
    std::vector<std::size_t> order(norms.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t x, std::size_t y) { return norms[x] > norms[y]; });
    return order;
}

// Fill columns of `u` flagged in `missing` with unit vectors orthogonal to
// every other column.
inline void complete_orthonormal(Matrix& u, const std::vector<bool>& missing) {
    const std::size_t m = u.rows();
    const std::size_t r = u.cols();
    std::vector<bool> have(missing.size());
    for (std::size_t j = 0; j < r; ++j) have[j] = !missing[j];

    std::vector<double> cand(m);
    std::size_t next_basis = 0;
    for (std::size_t j = 0; j < r; ++j) {
        if (have[j]) continue;
        while (next_basis < m) {
            std::fill(cand.begin(), cand.end(), 0.0);
            cand[next_basis++] = 1.0;
            for (int pass = 0; pass < 2; ++pass) {
                for (std::size_t k = 0; k < r; ++k) {
                    if (!have[k]) continue;
                    double proj = 0.0;
                    for (std::size_t i = 0; i < m; ++i) proj += u(i, k) * cand[i];
                    for (std::size_t i = 0; i < m; ++i) cand[i] -= proj * u(i, k);
                }
            }
            double nrm = std::sqrt(std::inner_product(cand.begin(), cand.end(), cand.begin(), 0.0));
            if (nrm > 0.5) {
                for (std::size_t i = 0; i < m; ++i) u(i, j) = cand[i] / nrm;
                have[j] = true;
                break;
            }
        }
    }
}

}  // namespace detail

/// Thin SVD by cyclic one-sided Jacobi.
///
/// Singular values come back in descending order. Each column of U is
/// sign-normalized so that its largest-magnitude entry is nonnegative, with
/// the matching column of V flipped alongside, which makes the factors
/// reproducible. Columns of U belonging to numerically zero singular values
/// are completed to an orthonormal set.
inline SvdFactors svd(const Matrix& a, const JacobiOptions& opts = {}) {
    detail::require_finite(a, "svd");
    // Orthogonalize the longer dimension's columns: for wide matrices work on A^T.
    const bool transpose = a.rows() < a.cols();
    detail::ColumnStore work = detail::columns_of(a, transpose);
    const std::size_t len = work.length;
    const std::size_t r = work.count;

    detail::ColumnStore vecs{r, r, std::vector<double>(r * r, 0.0)};
    for (std::size_t j = 0; j < r; ++j) vecs.col(j)[j] = 1.0;

    detail::jacobi_orthogonalize(work, &vecs, opts);

    std::vector<double> norms(r);
    for (std::size_t j = 0; j < r; ++j)
        norms[j] = std::sqrt(detail::dot(work.col(j), work.col(j), len));
    const auto order = detail::descending_order(norms);

    const double smax = norms.empty() ? 0.0 : norms[order[0]];
    const double tiny = smax * std::numeric_limits<double>::epsilon() * static_cast<double>(std::max(len, r));

    Matrix left(len, r);
    Matrix right(r, r);
    std::vector<double> sigma(r);
    std::vector<bool> missing(r, false);
    for (std::size_t k = 0; k < r; ++k) {
        const std::size_t j = order[k];
        sigma[k] = norms[j];
        if (norms[j] > tiny && norms[j] > 0.0) {
            for (std::size_t i = 0; i < len; ++i) left(i, k) = work.col(j)[i] / norms[j];
        } else {
            missing[k] = true;
        }
        for (std::size_t i = 0; i < r; ++i) right(i, k) = vecs.col(j)[i];
    }
    detail::complete_orthonormal(left, missing);

    SvdFactors f;
    f.sigma = std::move(sigma);
    if (transpose) {
        f.u = std::move(right);
        f.v = std::move(left);
    } else {
        f.u = std::move(left);
        f.v = std::move(right);
    }

    for (std::size_t k = 0; k < r; ++k) {
        std::size_t arg = 0;
        double best = -1.0;
        for (std::size_t i = 0; i < f.u.rows(); ++i) {
            const double mag = std::abs(f.u(i, k));
            if (mag > best) {
                best = mag;
                arg = i;
            }
        }
        if (f.u(arg, k) < 0.0) {
            for (std::size_t i = 0; i < f.u.rows(); ++i) f.u(i, k) = -f.u(i, k);
            for (std::size_t i = 0; i < f.v.rows(); ++i) f.v(i, k) = -f.v(i, k);
        }
    }
    return f;
}

/// Singular values only (descending). Same Jacobi iteration as svd() without
/// accumulating the right singular vectors.
inline std::vector<double> singular_values(const Matrix& a, const JacobiOptions& opts = {}) {
    detail::require_finite(a, "singular_values");
    detail::ColumnStore work = detail::columns_of(a, a.rows() < a.cols());
    detail::jacobi_orthogonalize(work, nullptr, opts);
    std::vector<double> s(work.count);
    for (std::size_t j = 0; j < work.count; ++j)
        s[j] = std::sqrt(detail::dot(work.col(j), work.col(j), work.length));
    std::sort(s.begin(), s.end(), std::greater<>());
    return s;
}

/// Rank-k reconstruction sum_{i<k} sigma_i u_i v_i^T.
inline Matrix truncate(const SvdFactors& f, std::size_t k) {
    if (k < 1 || k > f.rank_capacity()) {
        throw ConfigError("truncation rank " + std::to_string(k) + " outside [1, " +
                          std::to_string(f.rank_capacity()) + "]");
    }
    const std::size_t m = f.u.rows();
    const std::size_t n = f.v.rows();
    Matrix out(m, n);
    for (std::size_t t = 0; t < k; ++t) {
        const double s = f.sigma[t];
        if (s == 0.0) continue;
        for (std::size_t i = 0; i < m; ++i) {
            const double ui = s * f.u(i, t);
            if (ui == 0.0) continue;
            for (std::size_t j = 0; j < n; ++j) out(i, j) += ui * f.v(j, t);
        }
    }
    return out;
}

/// Adds the rank-one term sigma_t u_t v_t^T to `acc`; repeated for t = 0..k-1
/// this builds truncate(f, k) incrementally.
inline void add_rank_one_term(const SvdFactors& f, std::size_t t, Matrix& acc) {
    const double s = f.sigma[t];
    if (s == 0.0) return;
    for (std::size_t i = 0; i < acc.rows(); ++i) {
        const double ui = s * f.u(i, t);
        if (ui == 0.0) continue;
        for (std::size_t j = 0; j < acc.cols(); ++j) acc(i, j) += ui * f.v(j, t);
    }
}

inline double matrix_norm(const Matrix& a, NormKind kind) {
    detail::require_finite(a, "matrix_norm");
    switch (kind) {
        case NormKind::One: {
            std::vector<double> col(a.cols(), 0.0);
            for (std::size_t i = 0; i < a.rows(); ++i)
                for (std::size_t j = 0; j < a.cols(); ++j) col[j] += std::abs(a(i, j));
            return *std::max_element(col.begin(), col.end());
        }
        case NormKind::Infinity: {
            double best = 0.0;
            for (std::size_t i = 0; i < a.rows(); ++i) {
                double row = 0.0;
                for (std::size_t j = 0; j < a.cols(); ++j) row += std::abs(a(i, j));
                best = std::max(best, row);
            }
            return best;
        }
        case NormKind::Frobenius: {
            double s = 0.0;
            for (double v : a.values()) s += v * v;
            return std::sqrt(s);
        }
        case NormKind::Two:
            return singular_values(a).front();
    }
    return 0.0;
}

}  // namespace svdclass
