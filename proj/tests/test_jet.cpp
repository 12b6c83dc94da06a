#include <gtest/gtest.h>

#include <cmath>

#include "hfl/jet.hpp"

using hfl::Jet;
using J = Jet<double, 16>;

TEST(Jet, ProductAndQuotientMatchClosedForms) {
    // f(x) = x^3 / (1 + x) at x = 2: compare against hand-expanded derivatives.
    J x = J::variable(2.0, 3);
    J f = (x * x * x) / (x + 1.0);
    EXPECT_NEAR(f[0], 8.0 / 3.0, 1e-15);
    // f' = (2x^3 + 3x^2) / (1+x)^2 = (16 + 12) / 9
    EXPECT_NEAR(f.derivative(1), 28.0 / 9.0, 1e-14);
}

TEST(Jet, ElementaryFunctionsAgreeWithFiniteDifferences) {
    auto g = [](auto v) { return exp(sin(v) * v) + log1p(v * v) + pow(v, 2.5); };
    const double x0 = 0.7, h = 1e-3;
    J j = g(J::variable(x0, 2));
    auto s = [&](double t) {
        return std::exp(std::sin(t) * t) + std::log1p(t * t) + std::pow(t, 2.5);
    };
    double fd1 = (-s(x0 + 2 * h) + 8 * s(x0 + h) - 8 * s(x0 - h) + s(x0 - 2 * h)) / (12 * h);
    double fd2 = (-s(x0 + 2 * h) + 16 * s(x0 + h) - 30 * s(x0) + 16 * s(x0 - h) - s(x0 - 2 * h)) / (12 * h * h);
    EXPECT_NEAR(j[0], s(x0), 1e-15);
    EXPECT_NEAR(j.derivative(1), fd1, 1e-9);
    EXPECT_NEAR(j.derivative(2), fd2, 1e-6);
}

TEST(Jet, Expm1KeepsRelativeAccuracyNearZero) {
    J e = expm1(J::variable(1e-12, 2));
    EXPECT_NEAR(e[0] / 1e-12, 1.0, 1e-12);
    EXPECT_NEAR(e[1], 1.0, 1e-11);
    EXPECT_NEAR(e[2], 0.5, 1e-12);
}

TEST(Jet, IntegerPowerAtZeroIsExactPolynomial) {
    J p = ipow(J::variable(0.0, 6), 4);
    for (std::size_t j = 0; j <= 6; ++j) EXPECT_EQ(p[j], j == 4 ? 1.0 : 0.0);
    EXPECT_EQ(p.derivative(4), 24.0);
}
