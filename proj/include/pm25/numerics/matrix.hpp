#pragma once

#include <cassert>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

#include "pm25/error.hpp"

namespace pm25 {

/// Row-major dense real matrix.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    Matrix(std::initializer_list<std::initializer_list<double>> init) {
        rows_ = init.size();
        cols_ = rows_ ? init.begin()->size() : 0;
        data_.reserve(rows_ * cols_);
        for (const auto& row : init) {
            if (row.size() != cols_) throw DomainError("ragged matrix initializer");
            data_.insert(data_.end(), row.begin(), row.end());
        }
    }

    static Matrix identity(std::size_t n) {
        Matrix m(n, n);
        for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
        return m;
    }

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }

    double& operator()(std::size_t i, std::size_t j) {
        assert(i < rows_ && j < cols_);
        return data_[i * cols_ + j];
    }
    double operator()(std::size_t i, std::size_t j) const {
        assert(i < rows_ && j < cols_);
        return data_[i * cols_ + j];
    }

    std::span<double> row(std::size_t i) { return {data_.data() + i * cols_, cols_}; }
    std::span<const double> row(std::size_t i) const { return {data_.data() + i * cols_, cols_}; }

    std::vector<double> col(std::size_t j) const {
        std::vector<double> out(rows_);
        for (std::size_t i = 0; i < rows_; ++i) out[i] = (*this)(i, j);
        return out;
    }

    std::span<const double> data() const noexcept { return data_; }

    Matrix transpose() const {
        Matrix t(cols_, rows_);
        for (std::size_t i = 0; i < rows_; ++i)
            for (std::size_t j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
        return t;
    }

    bool all_finite() const {
        for (double v : data_)
            if (!std::isfinite(v)) return false;
        return true;
    }

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

inline Matrix operator*(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.rows()) throw DomainError("matrix product: inner dimensions differ");
    Matrix c(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t k = 0; k < a.cols(); ++k) {
            const double aik = a(i, k);
            if (aik == 0.0) continue;
            for (std::size_t j = 0; j < b.cols(); ++j) c(i, j) += aik * b(k, j);
        }
    return c;
}

inline std::vector<double> operator*(const Matrix& a, std::span<const double> x) {
    if (a.cols() != x.size()) throw DomainError("matrix-vector product: dimension mismatch");
    std::vector<double> y(a.rows(), 0.0);
    for (std::size_t i = 0; i < a.rows(); ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < a.cols(); ++j) s += a(i, j) * x[j];
        y[i] = s;
    }
    return y;
}

inline Matrix operator-(const Matrix& a, const Matrix& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) throw DomainError("matrix difference: shape mismatch");
    Matrix c(a.rows(), a.cols());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j) c(i, j) = a(i, j) - b(i, j);
    return c;
}

inline double frobenius_norm(const Matrix& a) {
    double s = 0.0;
    for (double v : a.data()) s += v * v;
    return std::sqrt(s);
}

/// Three-index array (face, i, j): `faces` faces, each rows x cols.
class Cube {
public:
    Cube() = default;
    Cube(std::size_t faces, std::size_t rows, std::size_t cols)
        : faces_(faces), rows_(rows), cols_(cols), data_(faces * rows * cols, 0.0) {}

    std::size_t faces() const noexcept { return faces_; }
    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }

    double& operator()(std::size_t f, std::size_t i, std::size_t j) {
        assert(f < faces_ && i < rows_ && j < cols_);
        return data_[(f * rows_ + i) * cols_ + j];
    }
    double operator()(std::size_t f, std::size_t i, std::size_t j) const {
        assert(f < faces_ && i < rows_ && j < cols_);
        return data_[(f * rows_ + i) * cols_ + j];
    }

    Matrix face(std::size_t f) const {
        Matrix m(rows_, cols_);
        for (std::size_t i = 0; i < rows_; ++i)
            for (std::size_t j = 0; j < cols_; ++j) m(i, j) = (*this)(f, i, j);
        return m;
    }

    void set_face(std::size_t f, const Matrix& m) {
        assert(m.rows() == rows_ && m.cols() == cols_);
        for (std::size_t i = 0; i < rows_; ++i)
            for (std::size_t j = 0; j < cols_; ++j) (*this)(f, i, j) = m(i, j);
    }

    std::span<const double> data() const noexcept { return data_; }

private:
    std::size_t faces_ = 0;
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

/// Inverse of an upper-triangular matrix by back substitution.
inline Matrix invert_upper_triangular(const Matrix& r) {
    const std::size_t n = r.rows();
    if (r.cols() != n) throw DomainError("invert_upper_triangular: matrix not square");
    Matrix inv(n, n);
    for (std::size_t col = 0; col < n; ++col) {
        for (std::size_t ii = n; ii-- > 0;) {
            double s = (ii == col) ? 1.0 : 0.0;
            for (std::size_t k = ii + 1; k < n; ++k) s -= r(ii, k) * inv(k, col);
            if (r(ii, ii) == 0.0) throw SingularityError("invert_upper_triangular: zero diagonal");
            inv(ii, col) = s / r(ii, ii);
        }
    }
    return inv;
}

}  // namespace pm25
