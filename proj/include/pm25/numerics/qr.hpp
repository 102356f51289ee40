#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include <Eigen/QR>

#include "pm25/error.hpp"
#include "pm25/numerics/matrix.hpp"

namespace pm25 {

/// Householder QR of a tall matrix (n >= q) with R1 normalised to a
/// positive diagonal. Q stays in Eigen's factored form; q_full()
/// materialises the n x n factor.
class HouseholderQR {
public:
    explicit HouseholderQR(const Matrix& a, double rank_tol = 1e-10)
        : n_(a.rows()), q_(a.cols()), sign_(a.cols(), 1.0) {
        if (n_ < q_) throw DomainError("QR: matrix has fewer rows than columns");
        if (!a.all_finite()) throw DomainError("QR: non-finite entry");

        Eigen::MatrixXd m(n_, q_);
        for (std::size_t i = 0; i < n_; ++i)
            for (std::size_t j = 0; j < q_; ++j) m(i, j) = a(i, j);
        qr_.compute(m);

        const Eigen::MatrixXd& packed = qr_.matrixQR();
        r1_ = Matrix(q_, q_);
        double dmax = 0.0;
        for (std::size_t j = 0; j < q_; ++j) {
            sign_[j] = packed(j, j) < 0.0 ? -1.0 : 1.0;
            for (std::size_t k = j; k < q_; ++k) r1_(j, k) = sign_[j] * packed(j, k);
            dmax = std::max(dmax, r1_(j, j));
        }
        for (std::size_t j = 0; j < q_; ++j)
            if (r1_(j, j) <= rank_tol * dmax)
                throw SingularityError("QR: rank deficient (column " + std::to_string(j + 1) + ")");
    }

    std::size_t rows() const noexcept { return n_; }
    std::size_t cols() const noexcept { return q_; }

    /// Upper-triangular q x q factor with positive diagonal.
    const Matrix& r1() const noexcept { return r1_; }

    /// x <- Q' x (length n).
    void apply_qt(std::span<double> x) const {
        check_length(x.size());
        Eigen::Map<Eigen::VectorXd> v(x.data(), static_cast<Eigen::Index>(n_));
        const Eigen::VectorXd y = qr_.householderQ().adjoint() * v;
        v = y;
        for (std::size_t j = 0; j < q_; ++j) x[j] *= sign_[j];
    }

    /// x <- Q x (length n).
    void apply_q(std::span<double> x) const {
        check_length(x.size());
        for (std::size_t j = 0; j < q_; ++j) x[j] *= sign_[j];
        Eigen::Map<Eigen::VectorXd> v(x.data(), static_cast<Eigen::Index>(n_));
        const Eigen::VectorXd y = qr_.householderQ() * v;
        v = y;
    }

    Matrix q_full() const {
        const Eigen::MatrixXd q = qr_.householderQ();
        Matrix out(n_, n_);
        for (std::size_t i = 0; i < n_; ++i)
            for (std::size_t k = 0; k < n_; ++k) out(i, k) = k < q_ ? sign_[k] * q(i, k) : q(i, k);
        return out;
    }

    /// Least-squares solution of A x ~ b.
    std::vector<double> solve(std::span<const double> b) const {
        std::vector<double> y(b.begin(), b.end());
        apply_qt(y);
        std::vector<double> x(q_);
        for (std::size_t i = q_; i-- > 0;) {
            double s = y[i];
            for (std::size_t k = i + 1; k < q_; ++k) s -= r1_(i, k) * x[k];
            x[i] = s / r1_(i, i);
        }
        return x;
    }

private:
    void check_length(std::size_t len) const {
        if (len != n_) throw DomainError("QR: vector length does not match row count");
    }

    std::size_t n_;
    std::size_t q_;
    Eigen::HouseholderQR<Eigen::MatrixXd> qr_;
    std::vector<double> sign_;
    Matrix r1_;
};

struct QrFactors {
    Matrix q;   ///< n x n orthogonal
    Matrix r1;  ///< q x q upper triangular, positive diagonal
};

/// Full QR: a = Q [R1; 0].
inline QrFactors qr_full(const Matrix& a) {
    HouseholderQR qr(a);
    return {qr.q_full(), qr.r1()};
}

}  // namespace pm25
