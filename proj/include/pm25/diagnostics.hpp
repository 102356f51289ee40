#pragma once

#include <array>
#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pm25/error.hpp"
#include "pm25/model.hpp"
#include "pm25/numerics/matrix.hpp"
#include "pm25/numerics/qr.hpp"
#include "pm25/numerics/special.hpp"
#include "pm25/numerics/stat_tests.hpp"
#include "pm25/solver.hpp"

namespace pm25 {

/// Mean-square curvatures scaled by rho = sigma_hat sqrt(q), with the critical
/// value 1/sqrt(F(q, n-q; 1-alpha)) they are compared against.
struct CurvatureReport {
    double rho_k_n = 0.0;  ///< intrinsic
    double rho_k_p = 0.0;  ///< parameter effects
    double critical = 0.0;
    std::array<double, 3> thresholds{};  ///< 1x, 0.5x, 0.2x critical
    bool planar_ok = false;              ///< rho_k_n <= critical
    bool uniform_coordinates_ok = false; ///< rho_k_p <= critical
    double alpha = 0.05;
    std::size_t n = 0;
    std::size_t q = 0;

    bool passes() const { return planar_ok && uniform_coordinates_ok; }
};

struct BiasReport {
    std::vector<double> bias;                         ///< Box bias, model scale
    std::vector<std::optional<double>> percent_bias;  ///< 100 bias / theta; nullopt where theta == 0
};

/// Intermediate arrays of the curvature computation.
struct CurvatureArrays {
    Matrix l;  ///< R1^{-1}
    Cube m;    ///< faces L' V2_s L
    Cube a;    ///< m rotated by Q' across the face index; first q faces are A^P
};

namespace detail {

inline void check_derivative_shapes(const Matrix& v1, const Cube& v2) {
    if (v1.rows() <= v1.cols()) throw DegreesOfFreedomError("curvature: need more observations than parameters");
    if (v2.faces() != v1.rows() || v2.rows() != v1.cols() || v2.cols() != v1.cols())
        throw DomainError("curvature: second-derivative array does not match the Jacobian");
}

inline double mean_square_curvature(const Cube& a, std::size_t first, std::size_t last, std::size_t q) {
    double total = 0.0;
    for (std::size_t t = first; t < last; ++t) {
        double sq = 0.0, tr = 0.0;
        for (std::size_t i = 0; i < q; ++i) {
            tr += a(t, i, i);
            for (std::size_t j = 0; j < q; ++j) sq += a(t, i, j) * a(t, i, j);
        }
        total += 2.0 * sq + tr * tr;
    }
    return total / static_cast<double>(q * (q + 2));
}

}  // namespace detail

inline CurvatureArrays curvature_arrays(const Matrix& v1, const Cube& v2) {
    detail::check_derivative_shapes(v1, v2);
    const std::size_t n = v1.rows();
    const std::size_t q = v1.cols();
    const HouseholderQR qr(v1);

    CurvatureArrays out;
    out.l = invert_upper_triangular(qr.r1());
    const Matrix lt = out.l.transpose();
    out.m = Cube(n, q, q);
    for (std::size_t s = 0; s < n; ++s) out.m.set_face(s, lt * v2.face(s) * out.l);

    out.a = Cube(n, q, q);
    std::vector<double> fiber(n);
    for (std::size_t i = 0; i < q; ++i)
        for (std::size_t j = 0; j < q; ++j) {
            for (std::size_t s = 0; s < n; ++s) fiber[s] = out.m(s, i, j);
            qr.apply_qt(fiber);
            for (std::size_t s = 0; s < n; ++s) out.a(s, i, j) = fiber[s];
        }
    return out;
}

inline double curvature_critical_value(std::size_t q, std::size_t n, double alpha) {
    if (!(alpha > 0.0 && alpha < 1.0)) throw DomainError("curvature: alpha must lie in (0,1)");
    return 1.0 / std::sqrt(special::f_quantile(1.0 - alpha, static_cast<double>(q), static_cast<double>(n - q)));
}

inline CurvatureReport bates_curvature(const Matrix& v1, const Cube& v2, double sigma_hat, double alpha = 0.05) {
    const auto arrays = curvature_arrays(v1, v2);
    const std::size_t n = v1.rows();
    const std::size_t q = v1.cols();
    const double rho = sigma_hat * std::sqrt(static_cast<double>(q));

    CurvatureReport rep;
    rep.n = n;
    rep.q = q;
    rep.alpha = alpha;
    rep.rho_k_p = rho * std::sqrt(detail::mean_square_curvature(arrays.a, 0, q, q));
    rep.rho_k_n = rho * std::sqrt(detail::mean_square_curvature(arrays.a, q, n, q));
    rep.critical = curvature_critical_value(q, n, alpha);
    rep.thresholds = {rep.critical, 0.5 * rep.critical, 0.2 * rep.critical};
    rep.planar_ok = rep.rho_k_n <= rep.critical;
    rep.uniform_coordinates_ok = rep.rho_k_p <= rep.critical;
    return rep;
}

/// Box bias -(sigma^2/2) L L' sum_i V1_i' tr(L' V2_i L).
inline BiasReport box_bias(const Matrix& v1, const Cube& v2, double sigma_hat, std::span<const double> theta_hat) {
    detail::check_derivative_shapes(v1, v2);
    const std::size_t n = v1.rows();
    const std::size_t q = v1.cols();
    if (theta_hat.size() != q) throw DomainError("box_bias: parameter vector length mismatch");

    const HouseholderQR qr(v1);
    const Matrix l = invert_upper_triangular(qr.r1());
    const Matrix lt = l.transpose();

    std::vector<double> w(q, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        const Matrix mi = lt * v2.face(i) * l;
        double tr = 0.0;
        for (std::size_t k = 0; k < q; ++k) tr += mi(k, k);
        for (std::size_t k = 0; k < q; ++k) w[k] += v1(i, k) * tr;
    }
    const std::vector<double> ltw = lt * std::span<const double>(w);
    const std::vector<double> llw = l * std::span<const double>(ltw);

    BiasReport rep;
    rep.bias.resize(q);
    rep.percent_bias.resize(q);
    const double scale = -0.5 * sigma_hat * sigma_hat;
    for (std::size_t k = 0; k < q; ++k) {
        rep.bias[k] = scale * llw[k];
        if (theta_hat[k] != 0.0) rep.percent_bias[k] = 100.0 * rep.bias[k] / theta_hat[k];
    }
    return rep;
}

template <RegressionModel M>
CurvatureReport bates_curvature(const M& model, const FitResult& fit, double alpha = 0.05) {
    return bates_curvature(model.jacobian(fit.theta_hat), model.hessian(fit.theta_hat), fit.sigma_hat, alpha);
}

template <RegressionModel M>
BiasReport box_bias(const M& model, const FitResult& fit) {
    return box_bias(model.jacobian(fit.theta_hat), model.hessian(fit.theta_hat), fit.sigma_hat, fit.theta_hat);
}

// ---------------------------------------------------------------------------
// Residual screens

struct ScreenRow {
    std::string against;  ///< "fitted" or a regressor name
    double rho = 0.0;
    double p = 1.0;
    bool defined = true;  ///< false when one side was constant
};

struct ResidualDiagnostics {
    std::vector<ScreenRow> spearman;  ///< |standardized residual| vs fitted and regressors
    CorrelationTest lag1;             ///< Pearson on (e_t, e_{t-1}) over consecutive days
    std::size_t lag1_pairs = 0;
    bool lag1_defined = true;
    KsTest ks_normality;  ///< raw residuals vs Normal(mean, sd)
    double alpha = 0.01;
    bool heteroscedastic = false;
    bool autocorrelated = false;
};

inline ResidualDiagnostics residual_screen(const FitResult& fit, const FrameModel& model, double alpha = 0.01) {
    const std::size_t n = fit.residuals.size();
    if (n < 3) throw DegreesOfFreedomError("residual_screen: need at least 3 residuals");
    if (n != model.observations()) throw DomainError("residual_screen: fit does not belong to this model");
    if (!(alpha > 0.0 && alpha < 1.0)) throw DomainError("residual_screen: alpha must lie in (0,1)");

    ResidualDiagnostics out;
    out.alpha = alpha;

    const auto e = fit.std_residuals.size() == n ? fit.std_residuals : standardize_residuals(fit);
    std::vector<double> abs_e(n);
    for (std::size_t i = 0; i < n; ++i) abs_e[i] = std::abs(e[i]);

    auto screen = [&](const std::string& name, const std::vector<double>& x) {
        ScreenRow row{name};
        try {
            const auto t = spearman_test(abs_e, x);
            row.rho = t.r;
            row.p = t.p;
        } catch (const DomainError&) {
            row.defined = false;
        }
        out.spearman.push_back(row);
    };
    screen("fitted", fit.fitted);
    for (const auto& [name, column] : model.screen_regressors()) screen(name, column);

    std::vector<double> cur, prev;
    const auto& rows = model.rows();
    for (std::size_t i = 1; i < n; ++i)
        if (rows[i].date.days_since(rows[i - 1].date) == 1) {
            cur.push_back(e[i]);
            prev.push_back(e[i - 1]);
        }
    out.lag1_pairs = cur.size();
    try {
        out.lag1 = pearson_test(cur, prev);
    } catch (const Error&) {
        out.lag1_defined = false;
    }

    try {
        out.ks_normality = ks_normal(fit.residuals);
    } catch (const DomainError&) {
        out.ks_normality = {0.0, 1.0};
    }

    for (const auto& row : out.spearman)
        if (row.defined && row.p < alpha) out.heteroscedastic = true;
    out.autocorrelated = out.lag1_defined && out.lag1.p < alpha;
    return out;
}

}  // namespace pm25
