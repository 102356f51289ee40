#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <vector>

#include "pm25/numerics/matrix.hpp"
#include "pm25/numerics/qr.hpp"
#include "pm25/numerics/special.hpp"
#include "pm25/numerics/stat_tests.hpp"

using namespace pm25;

namespace {

Matrix random_matrix(std::size_t n, std::size_t q, std::uint64_t seed) {
    std::mt19937_64 eng(seed);
    std::normal_distribution<double> z;
    Matrix a(n, q);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < q; ++j) a(i, j) = z(eng);
    return a;
}

Matrix stack_r1(const Matrix& r1, std::size_t n) {
    Matrix r(n, r1.cols());
    for (std::size_t i = 0; i < r1.rows(); ++i)
        for (std::size_t j = 0; j < r1.cols(); ++j) r(i, j) = r1(i, j);
    return r;
}

// Composite Simpson on the F density over [0, x].
double f_cdf_by_quadrature(double x, double d1, double d2) {
    auto density = [&](double t) {
        if (t <= 0.0) return 0.0;
        const double lg = std::lgamma(0.5 * (d1 + d2)) - std::lgamma(0.5 * d1) - std::lgamma(0.5 * d2);
        return std::exp(lg + 0.5 * d1 * std::log(d1 / d2) + (0.5 * d1 - 1.0) * std::log(t) -
                        0.5 * (d1 + d2) * std::log1p(d1 * t / d2));
    };
    const int m = 20000;
    const double h = x / m;
    double s = density(0.0) + density(x);
    for (int k = 1; k < m; ++k) s += (k % 2 ? 4.0 : 2.0) * density(k * h);
    return s * h / 3.0;
}

}  // namespace

TEST(Qr, IdentityFactorsToIdentity) {
    const auto f = qr_full(Matrix::identity(4));
    for (std::size_t i = 0; i < 4; ++i)
        for (std::size_t j = 0; j < 4; ++j) {
            EXPECT_NEAR(f.q(i, j), i == j ? 1.0 : 0.0, 1e-15);
            EXPECT_NEAR(f.r1(i, j), i == j ? 1.0 : 0.0, 1e-15);
        }
}

TEST(Qr, ThreeFourColumn) {
    const auto f = qr_full(Matrix{{3.0}, {4.0}});
    EXPECT_NEAR(f.r1(0, 0), 5.0, 1e-14);
    EXPECT_NEAR(f.q(0, 0), 0.6, 1e-14);
    EXPECT_NEAR(f.q(1, 0), 0.8, 1e-14);
}

TEST(Qr, PositiveDiagonal) {
    const auto f = qr_full(random_matrix(30, 5, 3));
    for (std::size_t i = 0; i < 5; ++i) EXPECT_GT(f.r1(i, i), 0.0);
}

class QrReconstruction : public ::testing::TestWithParam<std::pair<std::size_t, std::size_t>> {};

TEST_P(QrReconstruction, ReconstructsAndIsOrthogonal) {
    const auto [n, q] = GetParam();
    const Matrix a = random_matrix(n, q, n * 31 + q);
    const auto f = qr_full(a);
    const Matrix back = f.q * stack_r1(f.r1, n);
    EXPECT_LT(frobenius_norm(back - a) / frobenius_norm(a), 1e-10);
    const Matrix qtq = f.q.transpose() * f.q;
    EXPECT_LT(frobenius_norm(qtq - Matrix::identity(n)), 1e-10);
}

INSTANTIATE_TEST_SUITE_P(Sizes, QrReconstruction,
                         ::testing::Values(std::pair<std::size_t, std::size_t>{50, 4},
                                           std::pair<std::size_t, std::size_t>{10, 10},
                                           std::pair<std::size_t, std::size_t>{200, 7},
                                           std::pair<std::size_t, std::size_t>{1000, 10}));

TEST(Qr, RankDeficientThrows) {
    Matrix a = random_matrix(8, 3, 1);
    for (std::size_t i = 0; i < 8; ++i) a(i, 2) = 2.0 * a(i, 0) - a(i, 1);
    EXPECT_THROW(HouseholderQR{a}, SingularityError);
    EXPECT_THROW(HouseholderQR{Matrix(5, 2, 0.0)}, SingularityError);
}

TEST(Qr, WideOrNonFiniteInputRejected) {
    EXPECT_THROW(HouseholderQR{Matrix(2, 3, 1.0)}, DomainError);
    Matrix a = random_matrix(4, 2, 2);
    a(1, 1) = std::nan("");
    EXPECT_THROW(HouseholderQR{a}, DomainError);
}

TEST(Qr, LeastSquaresMatchesNormalEquations) {
    // y = 1 + 2x exactly plus a residual orthogonal to the columns.
    Matrix a{{1, 0}, {1, 1}, {1, 2}, {1, 3}};
    const std::vector<double> y{1 + 1, 3 - 1, 5 - 1, 7 + 1};
    const auto x = HouseholderQR(a).solve(y);
    EXPECT_NEAR(x[0], 1.0, 1e-12);
    EXPECT_NEAR(x[1], 2.0, 1e-12);
}

TEST(Qr, ApplyQtThenQIsIdentity) {
    const HouseholderQR qr(random_matrix(12, 4, 9));
    std::vector<double> v(12);
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = std::sin(static_cast<double>(i));
    auto w = v;
    qr.apply_qt(w);
    qr.apply_q(w);
    for (std::size_t i = 0; i < v.size(); ++i) EXPECT_NEAR(w[i], v[i], 1e-14);
}

TEST(Matrix, UpperTriangularInverse) {
    const Matrix r{{2, 1, -1}, {0, 3, 0.5}, {0, 0, 4}};
    const Matrix prod = r * invert_upper_triangular(r);
    EXPECT_LT(frobenius_norm(prod - Matrix::identity(3)), 1e-14);
}

TEST(FQuantile, MedianOfEqualDegreesIsOne) {
    for (double d : {1.0, 4.0, 25.0, 300.0}) EXPECT_NEAR(special::f_quantile(0.5, d, d), 1.0, 1e-10);
}

TEST(FQuantile, CriticalValueForSevenParameters) {
    EXPECT_NEAR(1.0 / std::sqrt(special::f_quantile(0.95, 7, 534)), 0.702, 1e-3);
}

TEST(FQuantile, SquareOfStudentT) {
    // t(0.975; 10) from standard tables.
    const double t = 2.2281388519649385;
    EXPECT_NEAR(special::f_quantile(0.95, 1, 10), t * t, 1e-8);
}

TEST(FQuantile, InvertsQuadratureCdf) {
    for (auto [p, d1, d2] : {std::tuple{0.95, 7.0, 534.0}, std::tuple{0.5, 3.0, 12.0}, std::tuple{0.99, 6.0, 40.0}}) {
        const double x = special::f_quantile(p, d1, d2);
        EXPECT_NEAR(f_cdf_by_quadrature(x, d1, d2), p, 1e-6) << d1 << "," << d2;
        EXPECT_NEAR(special::f_cdf(x, d1, d2), p, 1e-8);
    }
}

TEST(FQuantile, DomainErrors) {
    EXPECT_THROW(special::f_quantile(0.0, 3, 4), DomainError);
    EXPECT_THROW(special::f_quantile(1.0, 3, 4), DomainError);
    EXPECT_THROW(special::f_quantile(0.5, 0.5, 4), DomainError);
}

TEST(Kolmogorov, KnownCriticalPoint) {
    // P(K > 1.3581) = 0.05
    EXPECT_NEAR(special::kolmogorov_survival(1.3581), 0.05, 1e-4);
    EXPECT_EQ(special::kolmogorov_survival(0.0), 1.0);
    // The two series agree where they switch.
    EXPECT_NEAR(special::kolmogorov_survival(1.18 - 1e-12), special::kolmogorov_survival(1.18), 1e-10);
}

TEST(Spearman, PerfectMonotone) {
    const std::vector<double> x{1, 2, 3, 4, 5, 6, 7};
    const auto t = spearman_test(x, x);
    EXPECT_DOUBLE_EQ(t.r, 1.0);
    EXPECT_EQ(t.p, 0.0);
    const std::vector<double> rev{7, 6, 5, 4, 3, 2, 1};
    EXPECT_DOUBLE_EQ(spearman_test(x, rev).r, -1.0);
}

TEST(Spearman, MidRanksForTies) {
    const std::vector<double> x{10, 20, 20, 30};
    const auto r = mid_ranks(x);
    EXPECT_EQ(r, (std::vector<double>{1, 2.5, 2.5, 4}));
}

TEST(Spearman, InvariantUnderMonotoneTransform) {
    std::mt19937_64 eng(1);
    std::normal_distribution<double> z;
    std::vector<double> x(40), y(40), ex(40);
    for (std::size_t i = 0; i < x.size(); ++i) {
        x[i] = z(eng);
        y[i] = x[i] + z(eng);
        ex[i] = std::exp(3.0 * x[i]);
    }
    const auto a = spearman_test(x, y), b = spearman_test(ex, y);
    EXPECT_DOUBLE_EQ(a.r, b.r);
    EXPECT_DOUBLE_EQ(a.p, b.p);
}

TEST(Spearman, ErrorCases) {
    const std::vector<double> c{1, 1, 1, 1}, x{1, 2, 3, 4};
    EXPECT_THROW(spearman_test(c, x), DomainError);
    EXPECT_THROW(spearman_test(std::vector<double>{1, 2}, std::vector<double>{2, 1}), DegreesOfFreedomError);
    EXPECT_THROW(spearman_test(x, std::vector<double>{1, 2, 3}), DomainError);
}

TEST(Pearson, LinearRelation) {
    std::vector<double> x, y;
    for (int i = 0; i < 20; ++i) {
        x.push_back(i * 0.3);
        y.push_back(2.0 * x.back() + 1.0);
    }
    EXPECT_NEAR(pearson_test(x, y).r, 1.0, 1e-14);
}

TEST(Pearson, KnownPValue) {
    // r = 0.5, n = 12: t = 0.5 sqrt(10 / 0.75) = 1.8257; two-sided p = 0.0978546 (scipy.stats.t)
    const std::vector<double> x{1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12};
    std::vector<double> y(12);
    // Build y with correlation exactly 0.5 against x: y = 0.5 zx + sqrt(0.75) w, w orthogonal to x.
    const double mx = 6.5;
    double sx = 0.0;
    for (double v : x) sx += (v - mx) * (v - mx);
    std::vector<double> w{1, -1, -1, 1, 1, -1, -1, 1, 0, 0, 0, 0};
    // orthogonalise w against centred x and the constant
    double wm = 0.0;
    for (double v : w) wm += v / 12.0;
    for (double& v : w) v -= wm;
    double dot = 0.0;
    for (std::size_t i = 0; i < 12; ++i) dot += w[i] * (x[i] - mx);
    for (std::size_t i = 0; i < 12; ++i) w[i] -= dot / sx * (x[i] - mx);
    double sw = 0.0;
    for (double v : w) sw += v * v;
    for (std::size_t i = 0; i < 12; ++i) y[i] = 0.5 * (x[i] - mx) / std::sqrt(sx) + std::sqrt(0.75) * w[i] / std::sqrt(sw);
    const auto t = pearson_test(x, y);
    EXPECT_NEAR(t.r, 0.5, 1e-12);
    EXPECT_NEAR(t.p, 0.0978546142578125, 1e-9);
}

TEST(Pearson, IndependentNoiseIsWeak) {
    std::mt19937_64 eng(77);
    std::normal_distribution<double> z;
    std::vector<double> x(2000), y(2000);
    for (std::size_t i = 0; i < x.size(); ++i) {
        x[i] = z(eng);
        y[i] = z(eng);
    }
    const auto t = pearson_test(x, y);
    EXPECT_LT(std::abs(t.r), 0.08);
    EXPECT_GT(t.p, 0.001);
}

TEST(KsTwoSample, IdenticalSamples) {
    const std::vector<double> a{0.3, 1.2, -0.7, 2.2, 0.0};
    const auto t = ks_two_sample(a, a);
    EXPECT_EQ(t.d, 0.0);
    EXPECT_EQ(t.p, 1.0);
}

TEST(KsTwoSample, DisjointSupports) {
    std::vector<double> a, b;
    for (int i = 0; i < 50; ++i) {
        a.push_back(i / 50.0);
        b.push_back(i / 50.0 + 10.0);
    }
    const auto t = ks_two_sample(a, b);
    EXPECT_EQ(t.d, 1.0);
    EXPECT_LT(t.p, 1e-10);
}

TEST(KsTwoSample, SymmetricAndSameDistribution) {
    std::mt19937_64 eng(450);
    std::normal_distribution<double> z;
    std::vector<double> a(450), b(541);
    for (auto& v : a) v = z(eng);
    for (auto& v : b) v = z(eng);
    const auto ab = ks_two_sample(a, b), ba = ks_two_sample(b, a);
    EXPECT_EQ(ab.d, ba.d);
    EXPECT_EQ(ab.p, ba.p);
    EXPECT_GT(ab.p, 0.05);
}

TEST(KsTwoSample, HandCountedGap) {
    // a = {1,2,3}, b = {2.5, 4}: ECDF gap peaks at x in [2, 2.5): 2/3 - 0.
    const auto t = ks_two_sample(std::vector<double>{1, 2, 3}, std::vector<double>{2.5, 4});
    EXPECT_NEAR(t.d, 2.0 / 3.0, 1e-15);
}

TEST(KsTwoSample, EmptyRejected) {
    EXPECT_THROW(ks_two_sample(std::vector<double>{}, std::vector<double>{1.0}), DomainError);
}

TEST(KsNormal, NormalSampleAccepted) {
    std::mt19937_64 eng(8);
    std::normal_distribution<double> z(3.0, 2.0);
    std::vector<double> a(2000);
    for (auto& v : a) v = z(eng);
    EXPECT_GT(ks_normal(a).p, 0.05);
}

TEST(KsNormal, BimodalRejected) {
    std::vector<double> a(500, -1.0);
    a.resize(1000, 1.0);
    const auto t = ks_normal(a);
    EXPECT_GT(t.d, 0.3);
    EXPECT_LT(t.p, 1e-12);
}

TEST(KsNormal, ZeroVarianceRejected) {
    EXPECT_THROW(ks_normal(std::vector<double>{2, 2, 2}), DomainError);
}
