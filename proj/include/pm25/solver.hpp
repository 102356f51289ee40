#pragma once

#include <cmath>
#include <limits>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "pm25/csv.hpp"
#include "pm25/error.hpp"
#include "pm25/model.hpp"
#include "pm25/numerics/qr.hpp"

namespace pm25 {

struct SolverOptions {
    std::size_t max_steps = 50;
    double rel_tol = 1e-8;          ///< relative RSS change between accepted steps
    std::size_t max_halvings = 10;  ///< step halvings tried per iteration
};

struct TraceStep {
    std::size_t step = 0;
    std::vector<double> theta;
    double rss = 0.0;
};

struct FitResult {
    std::vector<double> theta_hat;
    double rss = 0.0;
    double sigma_hat = 0.0;  ///< sqrt(rss / (n - q))
    std::vector<double> residuals;
    std::vector<double> std_residuals;
    std::vector<double> fitted;
    std::vector<TraceStep> trace;  ///< step 0 is the start, then every accepted step
    bool converged = false;
    std::size_t steps = 0;
    std::size_t n = 0;
    std::size_t q = 0;
    std::string message;
};

/// residual_i / sigma_hat. No leverage correction.
inline std::vector<double> standardize_residuals(const FitResult& fit) {
    if (fit.n <= fit.q) throw DegreesOfFreedomError("standardize_residuals: need more observations than parameters");
    std::vector<double> out(fit.residuals.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = fit.sigma_hat > 0.0 ? fit.residuals[i] / fit.sigma_hat : 0.0;
    return out;
}

namespace detail {

inline double sum_squares(std::span<const double> v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return s;
}

template <RegressionModel M>
double residuals_at(const M& model, std::span<const double> theta, std::vector<double>& r) {
    const auto f = model.eval(theta);
    const auto y = model.response();
    r.resize(f.size());
    for (std::size_t i = 0; i < f.size(); ++i) r[i] = y[i] - f[i];
    const double rss = sum_squares(r);
    return std::isfinite(rss) ? rss : std::numeric_limits<double>::infinity();
}

}  // namespace detail

/// Fills fitted values, residuals, rss, sigma_hat and standardized residuals at `theta`.
template <RegressionModel M>
void evaluate_fit(const M& model, std::span<const double> theta, FitResult& fit) {
    fit.n = model.observations();
    fit.q = model.parameters();
    fit.theta_hat.assign(theta.begin(), theta.end());
    fit.fitted = model.eval(theta);
    fit.rss = detail::residuals_at(model, theta, fit.residuals);
    fit.sigma_hat = fit.n > fit.q ? std::sqrt(fit.rss / static_cast<double>(fit.n - fit.q))
                                  : std::numeric_limits<double>::quiet_NaN();
    fit.std_residuals = standardize_residuals(fit);
}

/// ||V' r|| / (1 + rss) at theta.
template <RegressionModel M>
double gradient_measure(const M& model, std::span<const double> theta) {
    std::vector<double> r;
    const double rss = detail::residuals_at(model, theta, r);
    const Matrix v = model.jacobian(theta);
    double g2 = 0.0;
    for (std::size_t j = 0; j < v.cols(); ++j) {
        double g = 0.0;
        for (std::size_t i = 0; i < v.rows(); ++i) g += v(i, j) * r[i];
        g2 += g * g;
    }
    return std::sqrt(g2) / (1.0 + rss);
}

/// Gauss-Newton least squares. Each increment solves the linearised problem
/// through a QR factorisation of the Jacobian; a step that raises the RSS is
/// halved up to `max_halvings` times. Running out of steps returns a result with
/// converged = false; a rank-deficient Jacobian throws SingularityError.
template <RegressionModel M>
FitResult gauss_newton(const M& model, std::vector<double> theta, const SolverOptions& opts = {}) {
    const std::size_t n = model.observations();
    const std::size_t q = model.parameters();
    if (theta.size() != q) throw DomainError("gauss_newton: start vector has wrong length");
    for (double v : theta)
        if (!std::isfinite(v)) throw DomainError("gauss_newton: non-finite start value");
    if (n <= q) throw DegreesOfFreedomError("gauss_newton: need more observations than parameters");

    FitResult fit;
    std::vector<double> r;
    double rss = detail::residuals_at(model, theta, r);
    if (!std::isfinite(rss)) throw DomainError("gauss_newton: residuals not finite at the start value");
    fit.trace.push_back({0, theta, rss});

    std::vector<double> candidate(q);
    std::vector<double> r_candidate;
    for (std::size_t step = 1; step <= opts.max_steps; ++step) {
        const HouseholderQR qr(model.jacobian(theta));
        const std::vector<double> delta = qr.solve(r);

        double factor = 1.0;
        double rss_candidate = std::numeric_limits<double>::infinity();
        bool accepted = false;
        for (std::size_t h = 0; h <= opts.max_halvings; ++h, factor *= 0.5) {
            for (std::size_t j = 0; j < q; ++j) candidate[j] = theta[j] + factor * delta[j];
            rss_candidate = detail::residuals_at(model, candidate, r_candidate);
            if (rss_candidate <= rss) {
                accepted = true;
                break;
            }
        }

        if (!accepted) {
            // No decrease along the Gauss-Newton direction: theta is a numerical minimum
            // when the gradient has vanished.
            fit.converged = gradient_measure(model, theta) < 1e-6;
            fit.message = fit.converged ? "no further decrease; gradient vanished" : "step halving failed";
            break;
        }

        const double change = rss > 0.0 ? (rss - rss_candidate) / rss : 0.0;
        double step_norm = 0.0, theta_norm = 0.0;
        for (std::size_t j = 0; j < q; ++j) {
            step_norm += (candidate[j] - theta[j]) * (candidate[j] - theta[j]);
            theta_norm += candidate[j] * candidate[j];
        }
        theta = candidate;
        r.swap(r_candidate);
        rss = rss_candidate;
        fit.steps = step;
        fit.trace.push_back({step, theta, rss});

        if (change < opts.rel_tol) {
            fit.converged = true;
            fit.message = "relative RSS change below tolerance";
            break;
        }
        if (std::sqrt(step_norm) <= 1e-14 * (std::sqrt(theta_norm) + 1e-14)) {
            fit.converged = true;
            fit.message = "parameter increment negligible";
            break;
        }
    }
    if (!fit.converged && fit.message.empty()) fit.message = "maximum number of steps reached";

    evaluate_fit(model, theta, fit);
    return fit;
}

/// `step,<name>...,rss`
inline void write_trace_csv(std::ostream& os, const FitResult& fit, const std::vector<std::string>& names) {
    os << "step";
    for (const auto& nm : names) os << ',' << nm;
    os << ",rss\n";
    for (const auto& s : fit.trace) {
        os << s.step;
        for (double v : s.theta) os << ',' << csv::format(v);
        os << ',' << csv::format(s.rss) << '\n';
    }
}

}  // namespace pm25
