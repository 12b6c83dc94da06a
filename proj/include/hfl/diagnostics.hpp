#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "hfl/interp.hpp"
#include "hfl/mrs.hpp"
#include "hfl/orthopoly.hpp"
#include "hfl/weights.hpp"

namespace hfl {

/// Closed interval of observed values; width is hi/lo.
struct Band {
    double lo = std::numeric_limits<double>::infinity();
    double hi = 0.0;

    void add(double v) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    double width() const { return lo > 0.0 ? hi / lo : std::numeric_limits<double>::infinity(); }
};

/// Result of one diagnostic: a numeric table, named summary constants, and
/// whether the recorded trend stayed bounded. Constants are fitted, never
/// compared against theoretical values.
struct DiagTable {
    std::string check;
    std::vector<std::string> columns;
    std::vector<std::vector<double>> rows;
    std::vector<std::pair<std::string, double>> summary;
    bool ok = true;
    std::string note;

    double get(const std::string& key) const {
        for (const auto& [k, v] : summary)
            if (k == key) return v;
        throw argument_error("DiagTable: no summary entry '" + key + "'");
    }
};

/// Checks selectable for a diagnostic run.
inline const std::vector<std::string>& diagnostic_checks() {
    static const std::vector<std::string> names{"class_membership", "mrs_residual", "spacing",
                                                "supbound",         "coeffbound",   "assumption"};
    return names;
}

/// Maximum band width accepted as a bounded trend.
inline constexpr double kBandLimit = 10.0;

inline DiagTable diag_class_membership(const WeightSpec& spec, const SampleGrid& grid = {}) {
    auto r = check_class_membership(spec, grid);
    DiagTable d;
    d.check = "class_membership";
    d.columns = {"order", "derivative_min", "nonpositive_samples"};
    for (std::size_t i = 0; i < r.derivative_min.size(); ++i)
        d.rows.push_back({double(i), r.derivative_min[i], double(r.derivative_nonpositive[i])});
    d.summary = {{"samples", double(r.samples)},     {"c1_fitted", r.c1_fitted},
                 {"c2_fitted", r.c2_fitted},         {"t_min", r.t_min},
                 {"t_max", r.t_max},                 {"t_descents", double(r.t_descents)},
                 {"t_quasi_const", r.t_quasi_const}, {"smoothness_const", r.smoothness_const}};
    for (std::size_t i = 0; i < r.ci_fitted.size(); ++i)
        d.summary.emplace_back("c" + std::to_string(i + 1) + "_derivative_fitted", r.ci_fitted[i]);
    // Q' > 0 on (0, inf), T bounded below by a constant > 1 and quasi-increasing.
    d.ok = r.derivative_nonpositive[1] == 0 && r.t_min > 1.0 && std::isfinite(r.t_quasi_const);
    return d;
}

/// Relative residual of the MRS equation at t = n.
inline DiagTable diag_mrs_residual(const ScaleTable& scales, const std::vector<int>& n_list) {
    DiagTable d;
    d.check = "mrs_residual";
    d.columns = {"n", "a_n", "residual"};
    const auto& s = scales.solver();
    double worst = 0.0;
    for (int n : n_list) {
        double an = scales.a(n);
        double r = s.residual(an, n, 2 * s.quad_points());
        worst = std::max(worst, r);
        d.rows.push_back({double(n), an, r});
    }
    d.summary = {{"max_residual", worst}};
    d.ok = worst <= 1e-10;
    return d;
}

/// Zero spacing against phi_n, the smallest positive zero against a_n/n,
/// the distance of the largest zero from a_n against delta_n, and b_n/a_n.
inline DiagTable diag_spacing(const RecurrenceTable& t, const ScaleTable& scales, const std::vector<int>& n_list,
                              int nu) {
    DiagTable d;
    d.check = "spacing";
    d.columns = {"n", "ratio_min", "ratio_max", "smallest_zero_ratio", "edge_ratio", "b_n_over_a_n"};
    Band spacing, small, edge, bn;
    for (int n : n_list) {
        auto ns = zeros(t, n, nu, scales);
        Band local;
        for (int j = 0; j + 1 < n; ++j) local.add((ns.x[j] - ns.x[j + 1]) / ns.varphi[j]);
        spacing.add(local.lo);
        spacing.add(local.hi);
        double an = scales.a(n);
        double xmin = std::numeric_limits<double>::infinity();
        for (double x : ns.x)
            if (x > 0.0) xmin = std::min(xmin, x);
        double s = xmin / (an / n);
        double e = (1.0 - ns.x[0] / an) / scales.delta(n);
        double b = t.b[n] / an;
        small.add(s);
        edge.add(e);
        bn.add(b);
        d.rows.push_back({double(n), local.lo, local.hi, s, e, b});
    }
    d.summary = {{"spacing_lo", spacing.lo},       {"spacing_hi", spacing.hi},   {"spacing_width", spacing.width()},
                 {"smallest_zero_width", small.width()}, {"edge_width", edge.width()}, {"b_n_width", bn.width()}};
    d.ok = spacing.width() <= kBandLimit;
    return d;
}

/// a_n^{1/2} sup_x |p_n(x) w(x)| (|x| + a_n/n)^rho Phi(x)^{1/4}, sampled on a
/// grid of (0, 1.25 a_{2n}] fine enough to resolve every oscillation.
inline DiagTable diag_supbound(const RecurrenceTable& t, const ScaleTable& scales, const std::vector<int>& n_list,
                               int points_per_zero = 24) {
    DiagTable d;
    d.check = "supbound";
    d.columns = {"n", "a_n", "sup", "argmax", "product"};
    const auto& spec = scales.spec();
    Band prod;
    for (int n : n_list) {
        double an = scales.a(n), top = 1.25 * scales.a(2.0 * n), h = an / n;
        int m = points_per_zero * n * 2;
        double best = 0.0, where = 0.0;
        for (int i = 1; i <= m; ++i) {
            double x = top * i / m;
            double lw = -q_eval(spec, x, 0) + spec.rho * std::log(x + h) + 0.25 * std::log(phi_cap(spec, x));
            double v = std::fabs(pn_weighted(t, n, x, lw));
            if (v > best) best = v, where = x;
        }
        double p = best * std::sqrt(an);
        prod.add(p);
        d.rows.push_back({double(n), an, best, where, p});
    }
    d.summary = {{"product_lo", prod.lo}, {"product_hi", prod.hi}, {"product_width", prod.width()}};
    d.ok = prod.width() <= kBandLimit;
    return d;
}

/// Ratios of the Taylor-side coefficients to their predicted growth.
inline DiagTable diag_coeffbound(const RecurrenceTable& t, const ScaleTable& scales, const std::vector<int>& n_list,
                                 int nu) {
    DiagTable d;
    d.check = "coeffbound";
    d.columns = {"n", "s", "i", "general_ratio", "parity_ratio"};
    double worst = 0.0;
    bool finite = true;
    for (int n : n_list) {
        Interpolator in(t, zeros(t, n, nu, scales), nu - 1);
        auto r = coeff_bound_diag(in, scales.spec(), scales);
        finite = finite && r.finite_positive;
        for (std::size_t s = 0; s < r.general.size(); ++s)
            for (std::size_t i = s; i < r.general[s].size(); ++i) {
                double par = s == 0 ? r.parity[i] : std::numeric_limits<double>::quiet_NaN();
                worst = std::max(worst, r.general[s][i]);
                d.rows.push_back({double(n), double(s), double(i), r.general[s][i], par});
            }
    }
    d.summary = {{"max_general_ratio", worst}};
    d.ok = finite;
    return d;
}

/// Growth assumptions on the run's n-range: a_n against n^{1/(1+nu-delta)}
/// (Freud families) and T(a_n) against n^gamma.
inline DiagTable diag_assumption(const ScaleTable& scales, const std::vector<int>& n_list) {
    DiagTable d;
    d.check = "assumption";
    d.columns = {"n", "a_n", "T_a_n", "a_n_growth_ratio", "T_growth_ratio"};
    const auto& spec = scales.spec();
    const bool freud = spec.family.is_freud();
    const double expo = 1.0 / (1.0 + spec.nu - spec.family.delta_smooth());
    Band ar, tr;
    for (int n : n_list) {
        double an = scales.a(n), ta = scales.t_at_a(n);
        double a_ratio = freud ? an / std::pow(double(n), expo) : std::numeric_limits<double>::quiet_NaN();
        double t_ratio = ta / std::pow(double(n), scales.gamma());
        if (freud) ar.add(a_ratio);
        tr.add(t_ratio);
        d.rows.push_back({double(n), an, ta, a_ratio, t_ratio});
    }
    if (freud) d.summary.emplace_back("a_n_growth_const", ar.hi);
    d.summary.emplace_back("gamma", scales.gamma());
    d.summary.emplace_back("T_growth_const", tr.hi);
    d.summary.emplace_back("T_growth_width", tr.width());
    d.ok = tr.width() <= kBandLimit && (!freud || std::isfinite(ar.hi));
    return d;
}

}  // namespace hfl
