#include <gtest/gtest.h>

#include <cmath>

#include "oracles.hpp"
#include "pm25/diagnostics.hpp"

using namespace pm25;

namespace {

FitResult fit_with_id(const FrameModel& m) {
    const auto fit = gauss_newton(m, m.spec().default_start());
    EXPECT_TRUE(fit.converged);
    return fit;
}

}  // namespace

TEST(Curvature, LinearModelIsFlat) {
    const auto frame = oracle::appendix_a1_frame();
    const FrameModel m(ModelSpec::linear(), frame);
    const auto fit = gauss_newton(m, {0.0, 0.0});
    const auto rep = bates_curvature(m, fit);
    EXPECT_EQ(rep.rho_k_n, 0.0);
    EXPECT_EQ(rep.rho_k_p, 0.0);
    EXPECT_TRUE(rep.passes());
    for (double b : box_bias(m, fit).bias) EXPECT_EQ(b, 0.0);
}

TEST(Curvature, OneParameterByHand) {
    // Tangent e1; acceleration (c1, c2) splits into c1 along and c2 across.
    Matrix v1{{1.0}, {0.0}, {0.0}};
    Cube v2(3, 1, 1);
    v2(0, 0, 0) = 0.3;
    v2(1, 0, 0) = -0.8;
    v2(2, 0, 0) = 0.6;
    const auto rep = bates_curvature(v1, v2, 0.5);
    EXPECT_NEAR(rep.rho_k_p, 0.5 * 0.3, 1e-15);
    EXPECT_NEAR(rep.rho_k_n, 0.5 * 1.0, 1e-15);
}

TEST(Curvature, ScaleOfTangentDividesOut) {
    // V1 = s e1 gives L = 1/s, so curvature scales by 1/s^2.
    Matrix v1{{2.0}, {0.0}, {0.0}};
    Cube v2(3, 1, 1);
    v2(0, 0, 0) = 0.4;
    v2(1, 0, 0) = 1.2;
    const auto rep = bates_curvature(v1, v2, 1.0);
    EXPECT_NEAR(rep.rho_k_p, 0.1, 1e-15);
    EXPECT_NEAR(rep.rho_k_n, 0.3, 1e-15);
}

TEST(Curvature, AgreesWithSampledDirections) {
    const FrameModel m(ModelSpec::with_id(), oracle::appendix_a1_frame());
    const auto fit = fit_with_id(m);
    const auto v1 = m.jacobian(fit.theta_hat);
    const auto v2 = m.hessian(fit.theta_hat);
    const auto closed = bates_curvature(v1, v2, fit.sigma_hat);
    const auto mc = oracle::sampled_curvature(v1, v2, fit.sigma_hat, 40000, 7);
    EXPECT_NEAR(closed.rho_k_n / mc.rho_k_n, 1.0, 0.03);
    EXPECT_NEAR(closed.rho_k_p / mc.rho_k_p, 1.0, 0.03);
}

TEST(Curvature, CriticalValue) {
    // F(1, 10; 0.95) = 4.9646027 from standard tables
    EXPECT_NEAR(curvature_critical_value(1, 11, 0.05), 1.0 / std::sqrt(4.9646027), 1e-7);
    EXPECT_THROW(curvature_critical_value(3, 20, 0.0), DomainError);
    const auto frame = oracle::appendix_a1_frame();
    const FrameModel m(ModelSpec::with_id(), frame);
    const auto rep = bates_curvature(m, fit_with_id(m), 0.1);
    EXPECT_EQ(rep.q, 7u);
    EXPECT_EQ(rep.n, 31u);
    EXPECT_DOUBLE_EQ(rep.thresholds[1], 0.5 * rep.critical);
    EXPECT_DOUBLE_EQ(rep.thresholds[2], 0.2 * rep.critical);
    EXPECT_GT(rep.critical, curvature_critical_value(7, 31, 0.05));
}

TEST(Curvature, ShapeChecks) {
    Matrix v1(3, 3);
    Cube v2(3, 3, 3);
    EXPECT_THROW(bates_curvature(v1, v2, 1.0), DegreesOfFreedomError);
    Matrix w1{{1.0}, {0.0}, {0.0}};
    Cube w2(2, 1, 1);
    EXPECT_THROW(bates_curvature(w1, w2, 1.0), DomainError);
}

TEST(BoxBias, MatchesNormalEquationForm) {
    for (auto spec : {ModelSpec::initial(), ModelSpec::with_id(), ModelSpec::iterated(0.5)}) {
        const FrameModel m(spec, oracle::appendix_a1_frame());
        const auto fit = gauss_newton(m, spec.default_start());
        ASSERT_TRUE(fit.converged) << spec.name();
        const auto v1 = m.jacobian(fit.theta_hat);
        const auto v2 = m.hessian(fit.theta_hat);
        const auto got = box_bias(v1, v2, fit.sigma_hat, fit.theta_hat).bias;
        const auto want = oracle::box_bias_direct(v1, v2, fit.sigma_hat);
        for (std::size_t i = 0; i < want.size(); ++i)
            EXPECT_NEAR(got[i], want[i], 1e-9 * (1.0 + std::abs(want[i]))) << spec.name() << " " << i;
    }
}

TEST(BoxBias, ScalesWithVariance) {
    const auto toy = oracle::toy_model();
    const auto fit = gauss_newton(toy, {8.0, 0.3});
    const auto v1 = toy.jacobian(fit.theta_hat);
    const auto v2 = toy.hessian(fit.theta_hat);
    const auto a = box_bias(v1, v2, 1.0, fit.theta_hat).bias;
    const auto b = box_bias(v1, v2, 3.0, fit.theta_hat).bias;
    for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(b[i], 9.0 * a[i], 1e-12 * std::abs(b[i]) + 1e-300);
}

TEST(BoxBias, PercentUndefinedAtZero) {
    Matrix v1{{1.0, 0.0}, {0.0, 1.0}, {1.0, 1.0}};
    Cube v2(3, 2, 2);
    v2(2, 0, 0) = 1.0;
    const std::vector<double> theta{0.0, 2.0};
    const auto rep = box_bias(v1, v2, 1.0, theta);
    EXPECT_FALSE(rep.percent_bias[0]);
    ASSERT_TRUE(rep.percent_bias[1]);
    EXPECT_DOUBLE_EQ(*rep.percent_bias[1], 100.0 * rep.bias[1] / 2.0);
    EXPECT_THROW(box_bias(v1, v2, 1.0, std::vector<double>{1.0}), DomainError);
}

TEST(ResidualScreen, RowsForFittedAndEachRegressor) {
    const FrameModel m(ModelSpec::with_id(), oracle::appendix_a1_frame());
    const auto fit = fit_with_id(m);
    const auto d = residual_screen(fit, m);
    ASSERT_EQ(d.spearman.size(), 7u);
    EXPECT_EQ(d.spearman[0].against, "fitted");
    EXPECT_EQ(d.spearman[1].against, "t");
    EXPECT_EQ(d.lag1_pairs, 30u);
    EXPECT_TRUE(d.lag1_defined);
    for (const auto& r : d.spearman) {
        EXPECT_GE(r.p, 0.0);
        EXPECT_LE(r.p, 1.0);
    }
}

TEST(ResidualScreen, FlagsGrowingAlternatingResiduals) {
    const FrameModel m(ModelSpec::with_id(), oracle::appendix_a1_frame());
    FitResult fit;
    fit.n = 31;
    fit.q = 7;
    for (std::size_t i = 0; i < 31; ++i) {
        fit.fitted.push_back(static_cast<double>(i));
        fit.residuals.push_back((i % 2 ? -1.0 : 1.0) * (1.0 + i));
    }
    fit.sigma_hat = 10.0;
    const auto d = residual_screen(fit, m);
    EXPECT_DOUBLE_EQ(d.spearman[0].rho, 1.0);
    EXPECT_TRUE(d.heteroscedastic);
    EXPECT_LT(d.lag1.r, -0.9);
    EXPECT_TRUE(d.autocorrelated);
}

TEST(ResidualScreen, RejectsMismatchedFit) {
    const FrameModel m(ModelSpec::with_id(), oracle::appendix_a1_frame());
    auto fit = fit_with_id(m);
    EXPECT_THROW(residual_screen(fit, m, 1.5), DomainError);
    fit.residuals.pop_back();
    EXPECT_THROW(residual_screen(fit, m), DomainError);
}
