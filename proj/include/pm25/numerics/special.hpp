#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include <boost/math/distributions/fisher_f.hpp>
#include <boost/math/distributions/students_t.hpp>
#include <boost/math/special_functions/beta.hpp>

#include "pm25/error.hpp"

namespace pm25::special {

/// Regularized incomplete beta I_x(a, b).
inline double incomplete_beta(double a, double b, double x) {
    if (!(a > 0.0) || !(b > 0.0)) throw DomainError("incomplete_beta: shape parameters must be positive");
    if (!(x >= 0.0 && x <= 1.0)) throw DomainError("incomplete_beta: x outside [0,1]");
    return boost::math::ibeta(a, b, x);
}

/// CDF of the F(d1, d2) distribution.
inline double f_cdf(double x, double d1, double d2) {
    if (!(d1 > 0.0) || !(d2 > 0.0)) throw DomainError("f_cdf: degrees of freedom must be positive");
    if (x <= 0.0) return 0.0;
    if (std::isinf(x)) return 1.0;
    return boost::math::cdf(boost::math::fisher_f_distribution<double>(d1, d2), x);
}

/// Quantile of the F(d1, d2) distribution, 0 < p < 1.
inline double f_quantile(double p, double d1, double d2) {
    if (!(p > 0.0 && p < 1.0)) throw DomainError("f_quantile: probability must lie in (0,1)");
    if (!(d1 >= 1.0) || !(d2 >= 1.0)) throw DomainError("f_quantile: degrees of freedom must be >= 1");
    return boost::math::quantile(boost::math::fisher_f_distribution<double>(d1, d2), p);
}

/// Two-sided p-value of a Student-t statistic with `df` degrees of freedom.
inline double student_t_two_sided_p(double t, double df) {
    if (!(df > 0.0)) throw DomainError("student_t: degrees of freedom must be positive");
    if (std::isinf(t)) return 0.0;
    return 2.0 * boost::math::cdf(boost::math::complement(boost::math::students_t_distribution<double>(df), std::abs(t)));
}

inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

/// Survival function of the Kolmogorov distribution, P(K > lambda).
inline double kolmogorov_survival(double lambda) {
    if (lambda <= 0.0) return 1.0;
    if (lambda < 1.18) {
        // Jacobi-theta form converges fast for small arguments.
        const double pi2 = std::numbers::pi * std::numbers::pi;
        const double w = pi2 / (8.0 * lambda * lambda);
        double s = 0.0;
        for (int k = 1; k <= 50; ++k) {
            const double term = std::exp(-(2.0 * k - 1.0) * (2.0 * k - 1.0) * w);
            s += term;
            if (term < 1e-18) break;
        }
        return std::clamp(1.0 - std::sqrt(2.0 * std::numbers::pi) / lambda * s, 0.0, 1.0);
    }
    double s = 0.0;
    double sign = 1.0;
    for (int k = 1; k <= 100; ++k) {
        const double term = std::exp(-2.0 * k * k * lambda * lambda);
        s += sign * term;
        if (term < 1e-18) break;
        sign = -sign;
    }
    return std::clamp(2.0 * s, 0.0, 1.0);
}

}  // namespace pm25::special
