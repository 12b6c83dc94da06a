#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include <boost/math/quadrature/exp_sinh.hpp>

#include "hfl/wnorm.hpp"

using namespace hfl;

namespace {

struct Fixture {
    WeightSpec spec;
    std::shared_ptr<ScaleTable> scales;
    RecurrenceTable table;

    Fixture(int nu, double rho = 0.0)
        : spec(WeightFamily::freud(2.0), rho, nu),
          scales(ScaleTable::shared(MrsSolver(spec, 64, 1e-13), ScaleTable::default_gamma(spec))),
          table(stieltjes_recurrence(spec, 64, 34, *scales)) {}
};

const Fixture& nu2() {
    static Fixture f(2);
    return f;
}

NormSpec norm_spec(int nu, double p = 2.0, double Delta = 1.0) {
    NormSpec ns;
    ns.p = p;
    ns.Delta = Delta;
    ns.alpha = 1.0;
    ns.nu = nu;
    ns.eta = 0.5;
    return ns;
}

}  // namespace

TEST(NormSpec, Validation) {
    auto ns = norm_spec(2);
    EXPECT_NO_THROW(ns.validate_ranges());
    EXPECT_TRUE(ns.delta_bound_holds());
    ns.Delta = -0.6;  // 1/2 - 1 = -1/2
    EXPECT_FALSE(ns.delta_bound_holds());
    ns.Delta = -0.5;
    EXPECT_TRUE(ns.delta_bound_holds());
    auto bad = norm_spec(2, 1.0);
    EXPECT_THROW(bad.validate_ranges(), argument_error);
    bad = norm_spec(2, 2.0, -1.0);
    EXPECT_THROW(bad.validate_ranges(), argument_error);
    bad = norm_spec(2);
    bad.eta = 1.0;
    EXPECT_THROW(bad.validate_ranges(), argument_error);
}

TEST(NormSpec, NormalizerCases) {
    auto ns = norm_spec(2, 2.0, 0.25);
    EXPECT_EQ(ns.z_case(8.0), 1.0);
    ns.Delta = 0.5;
    EXPECT_NEAR(ns.z_case(8.0), std::log(8.0) / 8.0, 1e-15);
    ns.Delta = 1.0;
    EXPECT_EQ(ns.z_case(8.0), 1.0 / 8.0);
}

TEST(Conditions, Examples) {
    const auto& F = nu2();
    auto ns = norm_spec(2);
    ConditionGrid grid;
    grid.x_max = F.scales->a(256);
    auto s = check_conditions(ns, *named_function("sin"), F.spec, grid);
    for (const auto& v : s.values) EXPECT_TRUE(v.ok()) << v.id;
    EXPECT_TRUE(s.vanishes_at_origin);
    EXPECT_GT(s.c_f, 0.0);
    EXPECT_TRUE(std::isfinite(s.c_f));

    auto one = check_conditions(ns, *named_function("one"), F.spec, grid);
    EXPECT_FALSE(one.vanishes_at_origin);
    EXPECT_TRUE(one.get("decay_and_origin").diverging_at_origin);

    auto x = check_conditions(ns, *named_function("x"), F.spec, grid);
    for (const auto& v : x.values) EXPECT_TRUE(v.ok()) << v.id;
    EXPECT_TRUE(x.vanishes_at_origin);

    // exponential growth beats the weight at nu - eta and is caught at the edge
    SampledFunction big;
    big.name = "big";
    big.eval = [](const jet_d& t) { return t * exp(2.0 * (t * t)); };
    auto b = check_conditions(ns, big, F.spec, grid);
    EXPECT_FALSE(b.get("decay_and_origin").ok());
}

TEST(Norm, ZeroAndHomogeneity) {
    const auto& F = nu2();
    auto ns = norm_spec(2);
    auto zero = [](double) { return 0.0; };
    auto z = weighted_lp_norm(ns, *F.scales, zero, 16, {});
    EXPECT_EQ(z.value, 0.0);
    auto g = [&](double x) { return std::exp(2 * log_norm_factor(F.spec, x, 0.25)) * std::sin(x) * std::exp(-x * x); };
    auto base = weighted_lp_norm(ns, *F.scales, g, 16, {});
    for (double c : {-3.0, 0.5, 1e3}) {
        auto gc = [&](double x) { return c * g(x); };
        auto v = weighted_lp_norm(ns, *F.scales, gc, 16, {});
        EXPECT_NEAR(v.value, std::fabs(c) * base.value, 1e-10 * std::fabs(c) * base.value);
    }
}

TEST(Norm, IndependentQuadratureOracle) {
    // p = 2, Delta = 0, nu = 2: integrand (Phi^{3/2} e^{-2x^2} x e^{-x^2})^2, even
    const auto& F = nu2();
    auto ns = norm_spec(2, 2.0, 0.0);
    auto g = [&](double x) { return std::exp(2 * log_norm_factor(F.spec, x, 0.0)) * x * std::exp(-x * x); };
    auto v = weighted_lp_norm(ns, *F.scales, g, 16, {});
    auto fine = [&] {
        NormOptions o;
        o.resolution = 2;
        return weighted_lp_norm(ns, *F.scales, g, 16, {}, o);
    }();
    EXPECT_TRUE(v.converged);
    EXPECT_GT(v.value, 0.0);
    EXPECT_NEAR(fine.value, v.value, 1e-6 * v.value);
    boost::math::quadrature::exp_sinh<double> es;
    double half = es.integrate([](double x) {
        double phi = 1.0 / (std::pow(1.0 + x * x, 2.0 / 3.0) * 2.0);
        double h = std::pow(phi, 1.5) * std::exp(-3 * x * x) * x;
        return h * h;
    });
    EXPECT_NEAR(v.value, std::sqrt(2 * half), 1e-9 * v.value);
}

TEST(Norm, RefinementStability) {
    const auto& F = nu2();
    auto ns = norm_spec(2, 3.0, 0.5);
    Interpolator in(F.table, zeros(F.table, 16, 2, *F.scales), 0);
    auto samples = in.sample(*named_function("rational"), 0);
    auto g = [&](double x) {
        double lw = log_norm_factor(F.spec, x, F.scales->a(16) / 16);
        return in.eval(samples, x, lw) - x / (1 + x * x) * std::exp(2 * lw);
    };
    auto a = weighted_lp_norm(ns, *F.scales, g, 16, in.nodes().x);
    NormOptions o;
    o.resolution = 2;
    auto b = weighted_lp_norm(ns, *F.scales, g, 16, in.nodes().x, o);
    EXPECT_NEAR(a.value, b.value, 1e-6 * a.value);
    EXPECT_LT(a.quad_err, 1e-3 * a.value);
}

TEST(Norm, ExactnessGivesNoiseFloor) {
    for (auto [nu, n] : {std::pair{2, 12}, std::pair{4, 8}}) {
        Fixture F(nu);
        auto ns = norm_spec(nu);
        Interpolator in(F.table, zeros(F.table, n, nu, *F.scales), nu - 1);
        std::mt19937_64 rng(17);
        auto P = random_newton_polynomial(in.nodes(), rng);
        auto samples = in.sample(P.as_function(), nu - 1);
        const double aon = F.scales->a(n) / n;
        auto gP = [&](double x) { return P.eval(x) * std::exp(nu * log_norm_factor(F.spec, x, aon)); };
        auto gE = [&](double x) {
            double lw = log_norm_factor(F.spec, x, aon);
            return in.eval(samples, x, lw) - P.eval(x) * std::exp(nu * lw);
        };
        auto ref = weighted_lp_norm(ns, *F.scales, gP, n, in.nodes().x);
        NormOptions o;
        o.noise_floor = 1e-12 * ref.value;
        auto err = weighted_lp_norm(ns, *F.scales, gE, n, in.nodes().x, o);
        EXPECT_LE(err.value, 1e-6 * ref.value) << nu;
    }
}

TEST(Convergence, DecreasingErrorAndSplitConsistency) {
    const auto& F = nu2();
    auto ns = norm_spec(2);
    auto f = *named_function("sin");
    auto rep = convergence_run(ns, F.spec, f, {8, 16, 32}, 0, F.table, *F.scales);
    ASSERT_EQ(rep.rows.size(), 3u);
    EXPECT_TRUE(rep.monotone());
    for (const auto& r : rep.rows) {
        EXPECT_GE(r.E, 0.0);
        EXPECT_GE(r.normX, 0.0);
        EXPECT_GE(r.normY, 0.0);
        EXPECT_EQ(r.normZ, 0.0);
        EXPECT_FALSE(r.flagged);
        // ||L - f|| <= ||X - f|| + ||Y||
        Interpolator in(F.table, zeros(F.table, r.n, 2, *F.scales), 0);
        auto s = in.sample(f, 0);
        const double aon = r.a_n / r.n;
        auto gXf = [&](double x) {
            double lw = log_norm_factor(F.spec, x, aon);
            return in.split(s, x, lw).X - std::sin(x) * std::exp(2 * lw);
        };
        auto xf = weighted_lp_norm(ns, *F.scales, gXf, r.n, in.nodes().x);
        EXPECT_LE(r.E, xf.value + r.normY + 1e-12);
    }
}

TEST(Convergence, ExactPolynomialStaysAtNoiseFloor) {
    const auto& F = nu2();
    auto ns = norm_spec(2);
    std::mt19937_64 rng(23);
    auto P = random_newton_polynomial(zeros(F.table, 8, 2, *F.scales), rng);
    double p0 = P.eval(0.0);
    SampledFunction f;
    f.name = "poly";
    f.eval = [P, p0](const jet_d& x) { return P.eval(x) - p0; };
    auto rep = convergence_run(ns, F.spec, f, {8, 16, 32}, 1, F.table, *F.scales);
    for (const auto& r : rep.rows) EXPECT_LE(r.E, 1e-6 * r.normX) << r.n;
}

TEST(Convergence, Gates) {
    const auto& F = nu2();
    auto ns = norm_spec(2);
    try {
        convergence_run(ns, F.spec, *named_function("one"), {8, 16}, 0, F.table, *F.scales);
        FAIL();
    } catch (const gate_rejection& g) {
        EXPECT_EQ(g.condition(), "decay_and_origin");
        EXPECT_NE(std::string(g.what()).find("f(0)"), std::string::npos);
    }
    auto bad = norm_spec(2, 2.0, -0.6);
    try {
        convergence_run(bad, F.spec, *named_function("sin"), {8}, 0, F.table, *F.scales);
        FAIL();
    } catch (const gate_rejection& g) {
        EXPECT_EQ(g.condition(), "delta_lower_bound");
    }
    Fixture odd(3);
    try {
        convergence_run(norm_spec(3), odd.spec, *named_function("sin"), {8}, 0, odd.table, *odd.scales);
        FAIL();
    } catch (const gate_rejection& g) {
        EXPECT_EQ(g.condition(), "even_order");
    }
    EXPECT_THROW(convergence_run(ns, F.spec, *named_function("sin"), {16, 8}, 0, F.table, *F.scales), argument_error);
    EXPECT_THROW(convergence_run(ns, F.spec, *named_function("sin"), {8, 128}, 0, F.table, *F.scales), argument_error);
}
