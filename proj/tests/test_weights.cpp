#include <cmath>
#include <limits>
#include <random>

#include <gtest/gtest.h>

#include "nullctl/carleman_weights.hpp"

using namespace nullctl;

namespace {

const CarlemanSetup& table_setup() {
    static const CarlemanSetup S = [] {
        BoxDomain dom;
        return build_setup(dom, dom.omega1, SetupOptions{});
    }();
    return S;
}

WeightExponents random_exponents(std::mt19937_64& rng) {
    std::uniform_int_distribution<int> pq(-8, 8), r(-20, 70);
    return {0.5 * pq(rng), 0.5 * pq(rng), 0.5 * r(rng)};
}

double rel(double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); }

} // namespace

TEST(Weights, NamedTable) {
    EXPECT_EQ(named_weight("rho4"), (WeightExponents{4, -3, 32}));
    EXPECT_EQ(named_weight("\xCF\x81\xE2\x82\x84"), (WeightExponents{4, -3, 32}));
    EXPECT_EQ(named_weight("rho8"), named_weight("zeta"));
    EXPECT_EQ(named_weight("rho8"), (WeightExponents{-1, 1, 0}));
    EXPECT_EQ(named_weight("rho10"), named_weight("zeta_hat"));
    EXPECT_EQ(named_weight("rho10"), (WeightExponents{-1, 1, 5}));
    EXPECT_EQ(named_weight("rho6"), (WeightExponents{1, -0.5, 17.5}));
    EXPECT_THROW(named_weight("rho5"), UnknownWeightName);
    EXPECT_THROW(named_weight("sigma"), UnknownWeightName);
}

TEST(Weights, EllProfile) {
    const auto& S = table_setup();
    EXPECT_DOUBLE_EQ(ell(0.2, S), 0.25);
    EXPECT_DOUBLE_EQ(ell(0.7, S), 0.7 * 0.3);
    EXPECT_DOUBLE_EQ(ell(0.99, S), S.ell_clamp);
    EXPECT_NEAR(ell(0.99, S, EllMode::exact), 0.0099, 1e-15);
    EXPECT_EQ(ell_dt(0.3, S), 0.0);
    EXPECT_EQ(ell_dt(0.95, S), 0.0);
    EXPECT_DOUBLE_EQ(ell_dt(0.95, S, EllMode::exact), 1 - 1.9);
}

// closed form: eta0 attains 0 on the boundary and 1 at the center, so the grid
// extrema are exp(6.25 lam) - exp(6 lam) and exp(6.25 lam) - exp(5 lam) (m = 5)
TEST(Weights, AlphaExtremaRegression) {
    BoxDomain dom;
    auto a = alpha_extrema(dom, 1.0, 5.0, 1024);
    EXPECT_NEAR(a[0], 114.5840311756069, 1e-9);
    EXPECT_NEAR(a[1], 369.59966556576542, 1e-9);
    EXPECT_GT(a[1] / a[0], 4.0 / 3.0);

    SetupOptions o;
    o.lambda_param = 1.0;
    EXPECT_THROW(build_setup(dom, dom.omega1, o), ValidationError);

    const auto& S = table_setup();
    EXPECT_LT(rel(S.alpha1, 1.2770490739692627e+27), 1e-13);
    EXPECT_LT(rel(S.alpha2, 1.3912446282453025e+27), 1e-13);
    EXPECT_LE(S.alpha1, S.alpha2);
    EXPECT_LT(S.alpha2 / S.alpha1, 4.0 / 3.0);
}

TEST(Weights, RatioImprovesWithLambda) {
    BoxDomain dom;
    auto a1 = alpha_extrema(dom, 1.0, 5.0, 256);
    auto a3 = alpha_extrema(dom, 3.0, 5.0, 256);
    EXPECT_LT(a3[1] / a3[0], a1[1] / a1[0]);
}

TEST(Weights, AutoSRespectsExponentCap) {
    const auto& S = table_setup();
    double worst = 0;
    for (auto& [name, e] : weight_table())
        worst = std::max(worst, S.s_param * (std::abs(e.p) * S.alpha1 + std::abs(e.q) * S.alpha2));
    worst /= std::pow(S.ell_clamp, 4);
    EXPECT_NEAR(worst, 250.0, 1e-9);
    for (auto& [name, e] : weight_table())
        for (double t : {0.0, 0.5, 0.9, 1.0}) EXPECT_NO_THROW(mu(e, t, S)) << name;
}

TEST(Weights, OverflowGuard) {
    auto S = table_setup();
    S.s_param *= 100;
    EXPECT_THROW(mu(named_weight("rho0"), 0.99, S), OverflowError);
}

TEST(Weights, ProductLaw) {
    const auto& S = table_setup();
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> U(0.0, 1.0);
    for (int i = 0; i < 200; ++i) {
        WeightExponents e1 = random_exponents(rng), e2 = random_exponents(rng);
        e1.p *= 0.25;
        e1.q *= 0.25;
        e2.p *= 0.25;
        e2.q *= 0.25;
        double t = U(rng);
        double lhs = mu(e1, t, S) * mu(e2, t, S);
        EXPECT_LT(rel(lhs, mu(e1 + e2, t, S)), 1e-12);
    }
}

TEST(Weights, Rho3GrowsTowardsT) {
    const auto& S = table_setup();
    EXPECT_GT(mu(named_weight("rho3"), 0.9, S), mu(named_weight("rho3"), 0.5, S));
}

// best relative error over a step sweep; the weights vary on a scale of l^5 / |s(p a1 + q a2)|
TEST(Weights, TimeDerivativeMatchesFiniteDifferences) {
    const auto& S = table_setup();
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> U(0.52, 0.84);
    for (int i = 0; i < 100; ++i) {
        WeightExponents e = random_exponents(rng);
        double t = U(rng);
        auto f = [&](double x) { return mu(e, x, S); };
        double best = 1;
        for (double h = 1e-3; h > 1e-9; h /= 4) {
            double fd = (f(t - 2 * h) - 8 * f(t - h) + 8 * f(t + h) - f(t + 2 * h)) / (12 * h);
            best = std::min(best, rel(mu_dt(e, t, S), fd));
        }
        EXPECT_LT(best, 1e-6) << e.p << ' ' << e.q << ' ' << e.r << " t=" << t;
    }
    EXPECT_EQ(mu_dt(named_weight("rho4"), 0.3, S), 0.0);
}

// |mu_dt(e)| / mu(e - (0,0,5)) = |d/dt log mu| l^5 by the product law; it stays below
// 4T|s(p a1 + q a2)| + |r| T (T^2/4)^4 up to t -> T with the exact profile
TEST(Weights, DerivativeBoundedByShiftedWeight) {
    const auto& S = table_setup();
    std::mt19937_64 rng(9);
    for (int i = 0; i < 50; ++i) {
        WeightExponents e = random_exponents(rng);
        double C = 4 * S.T * std::abs(exponent_coeff(e, S)) + std::abs(e.r) * S.T * std::pow(0.25 * S.T * S.T, 4);
        double worst = -std::numeric_limits<double>::infinity();
        for (int k = 1; k <= 400; ++k) {
            double t = 0.5 * S.T + 0.5 * S.T * (1 - std::pow(10.0, -8.0 * k / 400));
            double ld = mu_log_dt(e, t, S, EllMode::exact);
            if (ld == 0) continue;
            double lr = std::log(std::abs(ld)) + 5 * std::log(ell(t, S, EllMode::exact));
            worst = std::max(worst, lr);
        }
        EXPECT_LE(worst, std::log(C) + 1e-9);
    }
}

TEST(Weights, DominanceExamples) {
    const auto& S = table_setup();
    auto r0 = named_weight("rho0"), r3 = named_weight("rho3"), r4 = named_weight("rho4"), r6 = named_weight("rho6");
    EXPECT_TRUE(dominates(r0, r0, S));
    EXPECT_FALSE(dominates(r0, r3, S));
    EXPECT_TRUE(dominates(r3, r0, S));
    EXPECT_TRUE(dominates(r4, r3, S));
    EXPECT_TRUE(dominates(r6, r4, S));
}

// oracle: mu_e1 / mu_e2 is bounded near T iff its log does not grow between l = 1e-2 and l = 3e-3;
// the exponential part dominates the polynomial part there by five orders of magnitude
TEST(Weights, DominanceMatchesSamplingOracle) {
    const auto& S = table_setup();
    std::mt19937_64 rng(21);
    int trues = 0;
    for (int i = 0; i < 50; ++i) {
        WeightExponents e1 = random_exponents(rng), e2 = random_exponents(rng);
        if (i % 5 == 0) e2 = {e1.p, e1.q, e2.r}; // equal exponential parts
        auto g = [&](double l) {
            double t = 0.5 * S.T + std::sqrt(0.25 * S.T * S.T - l);
            return mu_log(e1, t, S, EllMode::exact) - mu_log(e2, t, S, EllMode::exact);
        };
        double g_mid = g(1e-2), g_end = g(3e-3);
        bool bounded = g_end <= g_mid + 1e-9 * std::abs(g_mid);
        EXPECT_EQ(dominates(e1, e2, S), bounded) << i;
        trues += bounded;
    }
    EXPECT_GT(trues, 5);
    EXPECT_LT(trues, 45);
}

TEST(Weights, DominanceInvariantUnderS) {
    auto S = table_setup();
    auto S2 = S;
    S2.s_param *= 1e-3;
    std::mt19937_64 rng(2);
    for (int i = 0; i < 50; ++i) {
        auto e1 = random_exponents(rng), e2 = random_exponents(rng);
        EXPECT_EQ(dominates(e1, e2, S), dominates(e1, e2, S2));
    }
}

TEST(Weights, ScaledWeightsDifferByConstant) {
    const auto& S = table_setup();
    auto e = named_weight("rho4");
    double c0 = scaled_mu_log(e, 0.1, S) - mu_log(e, 0.1, S);
    double c1 = scaled_mu_log(e, 0.8, S) - mu_log(e, 0.8, S);
    EXPECT_NEAR(c0, c1, 1e-12);
    EXPECT_NEAR(c0, -32 * std::log(0.25), 1e-12);
}

TEST(Weights, SetupValidation) {
    BoxDomain dom;
    SetupOptions o;
    o.m_exp = 4;
    EXPECT_THROW(build_setup(dom, dom.omega1, o), ValidationError);
    o = {};
    o.ell_clamp = 0.3;
    EXPECT_THROW(build_setup(dom, dom.omega1, o), ValidationError);
    Rect off{0.5, 1.0, 0.5, 1.0};
    EXPECT_THROW(build_setup(dom, off, SetupOptions{}), ValidationError);
}
