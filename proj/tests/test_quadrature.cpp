#include <gtest/gtest.h>

#include "dpexpr/quadrature.hpp"

#include <cmath>

using namespace dpexpr;

TEST(IntegrateAdaptive, PolynomialsAreExact) {
    EXPECT_NEAR(integrate_adaptive([](double x) { return x * x * x; }, 0, 2, {}), 4.0, 1e-13);
    EXPECT_NEAR(integrate_adaptive([](double) { return 1.0; }, -1, 3, {}), 4.0, 1e-13);
}

TEST(IntegrateAdaptive, SmoothFunction) {
    EXPECT_NEAR(integrate_adaptive([](double x) { return std::sin(x); }, 0, M_PI, {}), 2.0, 1e-10);
}

TEST(IntegrateAdaptive, KinkedIntegrand) {
    // Zero, then linear from an irrational kink point.
    const double kink = 1 / std::sqrt(2.0);
    auto fun = [&](double u) { return u < kink ? 0.0 : (u - kink); };
    double exact = 0.5 * (1 - kink) * (1 - kink);
    EXPECT_NEAR(integrate_adaptive(fun, 0, 1, {}), exact, 1e-9);
}

TEST(IntegrateAdaptive, StepIntegrandWithinTolerance) {
    const double jump = 0.3;
    auto fun = [&](double u) { return u < jump ? 0.0 : 1.0; };
    EXPECT_NEAR(integrate_adaptive(fun, 0, 1, {}), 0.7, 1e-9);
}

TEST(IntegrateAdaptive, BudgetExhaustion) {
    QuadratureSpec spec;
    spec.max_evaluations = 30;
    spec.tolerance = 1e-15;
    EXPECT_THROW(integrate_adaptive([](double u) { return std::sqrt(u); }, 0, 1, spec), Error);
}

TEST(IntegrateAdaptive, Deterministic) {
    auto fun = [](double u) { return std::pow(u, 0.3) * std::cos(5 * u); };
    double a = integrate_adaptive(fun, 0, 1, {});
    double b = integrate_adaptive(fun, 0, 1, {});
    EXPECT_EQ(a, b);
}

TEST(IntegrateAdaptive, EmptyInterval) {
    EXPECT_EQ(integrate_adaptive([](double) { return 1.0; }, 1, 1, {}), 0.0);
}
