#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "svdclass/errors.hpp"

namespace svdclass {

/// Dense row-major matrix of doubles.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), values_(rows * cols, fill) {}
    Matrix(std::size_t rows, std::size_t cols, std::vector<double> values)
        : rows_(rows), cols_(cols), values_(std::move(values)) {
        if (values_.size() != rows_ * cols_) {
            throw ConfigError("matrix value count does not match its dimensions");
        }
    }

    static Matrix identity(std::size_t n) {
        Matrix m(n, n);
        for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
        return m;
    }

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t size() const { return values_.size(); }
    bool empty() const { return values_.empty(); }

    double& operator()(std::size_t i, std::size_t j) { return values_[i * cols_ + j]; }
    double operator()(std::size_t i, std::size_t j) const { return values_[i * cols_ + j]; }

    std::span<double> values() { return values_; }
    std::span<const double> values() const { return values_; }

    bool same_shape(const Matrix& other) const {
        return rows_ == other.rows_ && cols_ == other.cols_;
    }

    bool all_finite() const {
        return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
    }

    Matrix transposed() const {
        Matrix t(cols_, rows_);
        for (std::size_t i = 0; i < rows_; ++i)
            for (std::size_t j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
        return t;
    }

    Matrix& operator+=(const Matrix& o) {
        check_shape(o);
        for (std::size_t i = 0; i < values_.size(); ++i) values_[i] += o.values_[i];
        return *this;
    }
    Matrix& operator-=(const Matrix& o) {
        check_shape(o);
        for (std::size_t i = 0; i < values_.size(); ++i) values_[i] -= o.values_[i];
        return *this;
    }
    Matrix& operator*=(double c) {
        for (double& v : values_) v *= c;
        return *this;
    }

    friend Matrix operator+(Matrix a, const Matrix& b) { return a += b; }
    friend Matrix operator-(Matrix a, const Matrix& b) { return a -= b; }
    friend Matrix operator*(Matrix a, double c) { return a *= c; }
    friend Matrix operator*(double c, Matrix a) { return a *= c; }

    friend Matrix operator*(const Matrix& a, const Matrix& b) {
        if (a.cols_ != b.rows_) throw ConfigError("matrix product dimension mismatch");
        Matrix c(a.rows_, b.cols_);
        for (std::size_t i = 0; i < a.rows_; ++i)
            for (std::size_t k = 0; k < a.cols_; ++k) {
                const double aik = a(i, k);
                if (aik == 0.0) continue;
                for (std::size_t j = 0; j < b.cols_; ++j) c(i, j) += aik * b(k, j);
            }
        return c;
    }

    friend bool operator==(const Matrix&, const Matrix&) = default;

private:
    void check_shape(const Matrix& o) const {
        if (!same_shape(o)) throw ConfigError("matrix shape mismatch");
    }

    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> values_;
};

/// Largest absolute entrywise difference; shapes must agree.
inline double max_abs_diff(const Matrix& a, const Matrix& b) {
    if (!a.same_shape(b)) throw ConfigError("matrix shape mismatch");
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
        m = std::max(m, std::abs(a.values()[i] - b.values()[i]));
    return m;
}

}  // namespace svdclass
