#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "svdclass/errors.hpp"
#include "svdclass/matrix.hpp"

namespace svdclass {

/// One weight per training image; feasible vectors sum to 1 with every entry >= epsilon.
using WeightVector = std::vector<double>;

enum class TemplateMethod { Uniform, Optimized };

inline std::string_view to_string(TemplateMethod m) {
    return m == TemplateMethod::Uniform ? "uniform" : "optimized";
}

inline TemplateMethod parse_template_method(std::string_view s) {
    if (s == "uniform") return TemplateMethod::Uniform;
    if (s == "optimized") return TemplateMethod::Optimized;
    throw ConfigError("unknown template method '" + std::string(s) + "' (expected uniform or optimized)");
}

struct ClassTemplate {
    std::string label;
    Matrix matrix;
    WeightVector weights;
    TemplateMethod method = TemplateMethod::Uniform;
};

struct WeightSolverOptions {
    double epsilon = 1e-10;       // lower bound on every weight
    double step_tolerance = 1e-10;  // stop when max |w_{t+1} - w_t| falls below this
    int max_iterations = 10000;
    int power_iterations = 50;
    double kkt_tolerance = 1e-7;
    WeightVector initial;  // starting iterate; empty means uniform 1/N
};

struct WeightSolution {
    WeightVector weights;
    int iterations = 0;
    double kkt_residual = 0.0;
    double objective = 0.0;
};

namespace detail {

inline void check_images(std::span<const Matrix> images) {
    if (images.empty()) throw DataError("template needs at least one image");
    for (const auto& img : images)
        if (!img.same_shape(images.front())) throw DataError("template images have differing dimensions");
}

}  // namespace detail

/// Euclidean projection onto {w : sum w = 1, w_i >= epsilon} by the
/// sort-and-threshold rule on the shifted simplex.
inline WeightVector project_to_simplex(std::span<const double> v, double epsilon = 0.0) {
    const std::size_t n = v.size();
    if (n == 0) throw ConfigError("cannot project an empty vector");
    const double radius = 1.0 - epsilon * static_cast<double>(n);
    if (radius < 0.0) throw ConfigError("epsilon too large for the number of weights");

    std::vector<double> sorted(n);
    for (std::size_t i = 0; i < n; ++i) sorted[i] = v[i] - epsilon;
    std::sort(sorted.begin(), sorted.end(), std::greater<>());
    double cumulative = 0.0;
    double theta = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        cumulative += sorted[k];
        const double candidate = (cumulative - radius) / static_cast<double>(k + 1);
        if (sorted[k] - candidate > 0.0) theta = candidate;
    }
    WeightVector w(n);
    for (std::size_t i = 0; i < n; ++i) w[i] = std::max(v[i] - epsilon - theta, 0.0) + epsilon;
    return w;
}

/// E(w) = sum_i ||a_i - sum_j w_j a_j||^2 over vectorized images a_i,
/// expressed through the Gram matrix G = A^T A:
///   E(w) = N w^T G w - 2 w^T G 1 + trace(G),  grad E(w) = 2N G w - 2 G 1.
class TemplateObjective {
public:
    explicit TemplateObjective(std::span<const Matrix> images) : n_(images.size()) {
        detail::check_images(images);
        gram_.assign(n_ * n_, 0.0);
        for (std::size_t i = 0; i < n_; ++i) {
            const auto a = images[i].values();
            for (std::size_t j = i; j < n_; ++j) {
                const auto b = images[j].values();
                const double d = std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
                gram_[i * n_ + j] = d;
                gram_[j * n_ + i] = d;
            }
        }
        gram_row_sums_.assign(n_, 0.0);
        for (std::size_t i = 0; i < n_; ++i)
            for (std::size_t j = 0; j < n_; ++j) gram_row_sums_[i] += gram_[i * n_ + j];
        for (std::size_t i = 0; i < n_; ++i) trace_ += gram_[i * n_ + i];
    }

    std::size_t size() const { return n_; }
    double gram(std::size_t i, std::size_t j) const { return gram_[i * n_ + j]; }

    double value(std::span<const double> w) const {
        check(w);
        const auto gw = gram_times(w);
        double quad = 0.0;
        double lin = 0.0;
        for (std::size_t i = 0; i < n_; ++i) {
            quad += w[i] * gw[i];
            lin += w[i] * gram_row_sums_[i];
        }
        return static_cast<double>(n_) * quad - 2.0 * lin + trace_;
    }

    std::vector<double> gradient(std::span<const double> w) const {
        check(w);
        auto g = gram_times(w);
        const double scale = 2.0 * static_cast<double>(n_);
        for (std::size_t i = 0; i < n_; ++i) g[i] = scale * g[i] - 2.0 * gram_row_sums_[i];
        return g;
    }

    /// Lipschitz constant 2N * lambda_max(G), with lambda_max from power iteration.
    double lipschitz(int power_iterations) const {
        std::vector<double> x(n_, 1.0 / std::sqrt(static_cast<double>(n_)));
        double lambda = 0.0;
        for (int it = 0; it < power_iterations; ++it) {
            auto y = gram_times(x);
            const double nrm = std::sqrt(std::inner_product(y.begin(), y.end(), y.begin(), 0.0));
            if (nrm == 0.0) return 0.0;
            lambda = nrm;
            for (std::size_t i = 0; i < n_; ++i) x[i] = y[i] / nrm;
        }
        // Power iteration approaches lambda_max from below; the margin keeps 1/L a safe step.
        return 2.0 * static_cast<double>(n_) * lambda * 1.01;
    }

private:
    void check(std::span<const double> w) const {
        if (w.size() != n_) throw ConfigError("weight vector length does not match image count");
    }

    std::vector<double> gram_times(std::span<const double> w) const {
        std::vector<double> out(n_, 0.0);
        for (std::size_t i = 0; i < n_; ++i) {
            double s = 0.0;
            for (std::size_t j = 0; j < n_; ++j) s += gram_[i * n_ + j] * w[j];
            out[i] = s;
        }
        return out;
    }

    std::size_t n_;
    std::vector<double> gram_;
    std::vector<double> gram_row_sums_;
    double trace_ = 0.0;
};

/// Projected-gradient fixed-point residual max_i |w_i - P(w - grad/L)_i|,
/// zero exactly at KKT points of the simplex-constrained problem.
inline double kkt_residual(const TemplateObjective& obj, std::span<const double> w, double lipschitz,
                           double epsilon) {
    if (lipschitz <= 0.0) return 0.0;
    const auto g = obj.gradient(w);
    std::vector<double> trial(w.size());
    for (std::size_t i = 0; i < w.size(); ++i) trial[i] = w[i] - g[i] / lipschitz;
    const auto p = project_to_simplex(trial, epsilon);
    double r = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) r = std::max(r, std::abs(w[i] - p[i]));
    return r;
}

/// Minimizes E(w) over the epsilon-shifted simplex by projected gradient
/// descent with step 1/L, starting from uniform weights.
inline WeightSolution solve_template_weights(std::span<const Matrix> images,
                                             const WeightSolverOptions& opts = {}) {
    const TemplateObjective obj(images);
    const std::size_t n = obj.size();
    WeightSolution sol;
    if (opts.initial.empty()) {
        sol.weights.assign(n, 1.0 / static_cast<double>(n));
    } else {
        if (opts.initial.size() != n) throw ConfigError("initial weight count does not match image count");
        sol.weights = project_to_simplex(opts.initial, opts.epsilon);
    }
    if (n == 1) {
        sol.objective = obj.value(sol.weights);
        return sol;
    }

    const double lipschitz = obj.lipschitz(opts.power_iterations);
    if (lipschitz > 0.0) {
        std::vector<double> trial(n);
        for (; sol.iterations < opts.max_iterations; ++sol.iterations) {
            const auto g = obj.gradient(sol.weights);
            for (std::size_t i = 0; i < n; ++i) trial[i] = sol.weights[i] - g[i] / lipschitz;
            auto next = project_to_simplex(trial, opts.epsilon);
            double step = 0.0;
            for (std::size_t i = 0; i < n; ++i) step = std::max(step, std::abs(next[i] - sol.weights[i]));
            sol.weights = std::move(next);
            if (step < opts.step_tolerance) {
                ++sol.iterations;
                break;
            }
        }
    }
    sol.kkt_residual = kkt_residual(obj, sol.weights, lipschitz, opts.epsilon);
    sol.objective = obj.value(sol.weights);
    if (sol.kkt_residual > opts.kkt_tolerance) {
        throw ConvergenceError("template weight solver did not converge after " +
                                   std::to_string(sol.iterations) + " iterations (KKT residual " +
                                   std::to_string(sol.kkt_residual) + ")",
                               sol.kkt_residual);
    }
    return sol;
}

inline WeightVector optimize_weights(std::span<const Matrix> images, const WeightSolverOptions& opts = {}) {
    return solve_template_weights(images, opts).weights;
}

/// sum_i w_i * images[i].
inline Matrix weighted_sum(std::span<const Matrix> images, std::span<const double> weights) {
    detail::check_images(images);
    if (weights.size() != images.size()) throw ConfigError("weight count does not match image count");
    Matrix out(images.front().rows(), images.front().cols());
    auto dst = out.values();
    for (std::size_t i = 0; i < images.size(); ++i) {
        const auto src = images[i].values();
        for (std::size_t p = 0; p < dst.size(); ++p) dst[p] += weights[i] * src[p];
    }
    return out;
}

/// Class mean (1/N) sum A_i.
inline ClassTemplate uniform_template(std::span<const Matrix> images, std::string label) {
    detail::check_images(images);
    const double n = static_cast<double>(images.size());
    Matrix sum(images.front().rows(), images.front().cols());
    for (const auto& img : images) sum += img;
    sum *= 1.0 / n;
    return {std::move(label), std::move(sum), WeightVector(images.size(), 1.0 / n), TemplateMethod::Uniform};
}

inline ClassTemplate optimized_template(std::span<const Matrix> images, std::string label,
                                        const WeightSolverOptions& opts = {}) {
    auto weights = optimize_weights(images, opts);
    auto matrix = weighted_sum(images, weights);
    return {std::move(label), std::move(matrix), std::move(weights), TemplateMethod::Optimized};
}

inline ClassTemplate build_template(std::span<const Matrix> images, std::string label, TemplateMethod method) {
    return method == TemplateMethod::Uniform ? uniform_template(images, std::move(label))
                                             : optimized_template(images, std::move(label));
}

/// Signed sum of coordinate differences, sum_i (a_i - b_i).
inline double weight_divergence(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw ConfigError("weight vectors differ in length");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] - b[i];
    return s;
}

inline double weight_max_abs_difference(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw ConfigError("weight vectors differ in length");
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

}  // namespace svdclass
