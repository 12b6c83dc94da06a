#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "hfl/errors.hpp"
#include "hfl/interp.hpp"
#include "hfl/mrs.hpp"
#include "hfl/orthopoly.hpp"
#include "hfl/quadrature.hpp"
#include "hfl/weights.hpp"

namespace hfl {

/// Parameters of the weighted L_p error functional.
struct NormSpec {
    double p = 2.0;
    double Delta = 1.0;
    double alpha = 1.0;
    int nu = 2;
    double rho = 0.0;
    double eta = 0.5;

    /// Range checks; throws argument_error.
    void validate_ranges() const {
        if (!(p > 1.0) || !std::isfinite(p)) throw argument_error("NormSpec: need 1 < p < infinity");
        if (!(Delta > -1.0)) throw argument_error("NormSpec: need Delta > -1");
        if (!(alpha > 0.0)) throw argument_error("NormSpec: need alpha > 0");
        if (nu < 2) throw argument_error("NormSpec: need nu >= 2");
        if (!(rho >= 0.0)) throw argument_error("NormSpec: need rho >= 0");
        if (!(eta > 0.0 && eta < 1.0)) throw argument_error("NormSpec: need 0 < eta < 1");
    }

    /// Delta >= 1/p - min{1, alpha}.
    bool delta_bound_holds() const { return Delta >= 1.0 / p - std::min(1.0, alpha); }

    /// Three-way normalizer split on Delta p: 1 (< 1), log a / a (= 1), 1 / a (> 1).
    double z_case(double an) const {
        double dp = Delta * p;
        if (std::fabs(dp - 1.0) <= 1e-12) return std::log(an) / an;
        return dp < 1.0 ? 1.0 : 1.0 / an;
    }
};

/// log of the per-factor weight Phi^{3/4}(x) w(x) (|x| + a_n/n)^rho; the
/// functional raises it to the power nu. -inf where Q overflows.
inline double log_norm_factor(const WeightSpec& spec, double x, double an_over_n) {
    if (x == 0.0) return -std::numeric_limits<double>::infinity();
    jet_d q;
    try {
        q = q_jet(spec.family, x, 1);
    } catch (const overflow_error&) {
        return -std::numeric_limits<double>::infinity();
    }
    double t = x * q[1] / q[0];
    double log_phi = -(2.0 / 3.0) * std::log1p(q[0]) - std::log(t);
    double r = 0.75 * log_phi - q[0];
    if (spec.rho != 0.0) r += spec.rho * std::log(std::fabs(x) + an_over_n);
    return r;
}

// ---------------------------------------------------------------------------
// Admissibility conditions on test functions

struct ConditionValue {
    std::string id;
    double sup = 0.0;
    double where = 0.0;
    bool diverging_at_origin = false;
    bool diverging_at_edge = false;
    bool ok() const { return std::isfinite(sup) && !diverging_at_origin && !diverging_at_edge; }
};

struct ConditionReport {
    std::vector<ConditionValue> values;  ///< node_growth, node_growth_qprime, derivative_growth, decay_and_origin
    double f_at_zero = 0.0;
    bool vanishes_at_origin = true;
    double c_f = 0.0;

    const ConditionValue& get(const std::string& id) const {
        for (const auto& v : values)
            if (v.id == id) return v;
        throw argument_error("ConditionReport: unknown condition " + id);
    }
};

/// Punctured grid: geometric in [x_min, 1] and uniform in [1, x_max], both signs.
struct ConditionGrid {
    double x_min = 1e-6;
    double x_max = 10.0;
    int decades_points = 20;
    int uniform_points = 400;
};

/// Suprema of the growth conditions over the grid. l is the derivative order
/// used by derivative_growth (0 skips it).
inline ConditionReport check_conditions(const NormSpec& ns, const SampledFunction& f, const WeightSpec& spec,
                                        const ConditionGrid& grid, int l = 0) {
    ns.validate_ranges();
    std::vector<double> xs;
    int decades = static_cast<int>(std::ceil(-std::log10(grid.x_min)));
    for (int i = 0; i < decades * grid.decades_points; ++i)
        xs.push_back(grid.x_min * std::pow(10.0, double(i) / grid.decades_points));
    for (int i = 0; i <= grid.uniform_points; ++i) xs.push_back(1.0 + (grid.x_max - 1.0) * i / grid.uniform_points);

    const char* ids[] = {"node_growth", "node_growth_qprime", "derivative_growth", "decay_and_origin"};
    std::vector<std::vector<double>> vals(4, std::vector<double>(xs.size(), 0.0));
    for (std::size_t i = 0; i < xs.size(); ++i) {
        for (double sign : {-1.0, 1.0}) {
            double x = sign * xs[i];
            auto fd = f.derivatives(x, std::max(l, 0));
            jet_d q;
            bool q_over = false;
            try {
                q = q_jet(spec.family, x, 1);
            } catch (const overflow_error&) {
                q_over = true;
            }
            double ax = std::fabs(x);
            double grow = std::pow(1.0 + ax, ns.alpha);
            double v[4] = {0, 0, 0, 0};
            if (!q_over) {
                double t = x * q[1] / q[0];
                double log_phi = -(2.0 / 3.0) * std::log1p(q[0]) - std::log(t);
                double log_wr = -q[0] + (spec.rho != 0.0 ? spec.rho * std::log(ax) : 0.0);
                double base = grow * std::exp(ns.nu * (-0.75 * log_phi + log_wr));
                double qp = std::fabs(q[1]) + 1.0 / ax;
                v[0] = std::fabs(fd[0]) * base;
                v[1] = v[0] * qp;
                for (int s = 1; s <= l; ++s) v[2] = std::max(v[2], std::fabs(fd[s]) * base);
                v[3] = std::fabs(fd[0]) * grow * std::exp(-(ns.nu - ns.eta) * q[0]) * qp;
            }
            for (int c = 0; c < 4; ++c) vals[c][i] = std::max(vals[c][i], std::isnan(v[c]) ? HUGE_VAL : v[c]);
        }
    }

    ConditionReport r;
    const int inner = grid.decades_points;
    const std::size_t n = xs.size();
    for (int c = 0; c < 4; ++c) {
        ConditionValue cv;
        cv.id = ids[c];
        for (std::size_t i = 0; i < n; ++i)
            if (vals[c][i] > cv.sup || !std::isfinite(vals[c][i])) {
                cv.sup = vals[c][i];
                cv.where = xs[i];
                if (!std::isfinite(cv.sup)) break;
            }
        // trend at the puncture: innermost decade against the next
        double in0 = 0, in1 = 0;
        for (int i = 0; i < inner; ++i) in0 = std::max(in0, vals[c][i]);
        for (int i = inner; i < 2 * inner; ++i) in1 = std::max(in1, vals[c][i]);
        cv.diverging_at_origin = in0 > 2.0 * in1 && in0 >= cv.sup && in0 > 0;
        // trend at the outer edge: last tenth against the one before
        std::size_t tenth = std::max<std::size_t>(grid.uniform_points / 10, 1);
        double out0 = 0, out1 = 0;
        for (std::size_t i = n - tenth; i < n; ++i) out0 = std::max(out0, vals[c][i]);
        for (std::size_t i = n - 2 * tenth; i < n - tenth; ++i) out1 = std::max(out1, vals[c][i]);
        cv.diverging_at_edge = out0 > 1.01 * out1 && out0 >= cv.sup && out0 > 0;
        if (c == 2 && l == 0) cv = ConditionValue{ids[c]};
        r.values.push_back(cv);
    }
    r.f_at_zero = f.value(0.0);
    double scale = std::max(1.0, std::fabs(f.derivatives(0.0, 1)[1]));
    r.vanishes_at_origin = std::fabs(r.f_at_zero) <= 1e-14 * scale;
    for (const auto& v : r.values)
        if (std::isfinite(v.sup)) r.c_f = std::max(r.c_f, v.sup);
    return r;
}

// ---------------------------------------------------------------------------
// Weighted L_p norms

struct NormOptions {
    double rel_tol = 1e-10;  ///< per-interval relative tolerance
    int resolution = 1;      ///< base intervals are split into this many pieces
    int max_depth = 20;
    double noise_floor = 0.0;  ///< absolute accuracy floor in norm units (roundoff level of the integrand)
};

struct NormValue {
    double value = 0.0;      ///< the norm
    double quad_err = 0.0;   ///< estimated error of the norm
    double tail_bound = 0.0; ///< bound on the unresolved exterior contribution to the norm
    bool converged = true;
    double worst_x = 0.0;    ///< location of the worst unconverged interval, if any
};

namespace detail {

struct PanelResult {
    double value = 0.0;
    double err = 0.0;
    bool converged = true;
    double worst_x = 0.0;
};

// Adaptive Gauss-Legendre (20 nodes) of |h|^p on [lo, hi], halving until the
// coarse and refined values agree.
template <class H>
void adapt(H& h, double p, double lo, double hi, double whole, double abs_floor, const NormOptions& opt, int depth,
           std::vector<double>& parts, PanelResult& acc) {
    const auto& rule = gauss_legendre_cached(20);
    auto g = [&](double x) { return std::pow(std::fabs(h(x)), p); };
    double mid = 0.5 * (lo + hi);
    double left = gauss_panel(g, lo, mid, rule);
    double right = gauss_panel(g, mid, hi, rule);
    double fine = left + right;
    double diff = std::fabs(fine - whole);
    if (diff <= opt.rel_tol * std::fabs(fine) + abs_floor || depth >= opt.max_depth) {
        if (depth >= opt.max_depth && diff > opt.rel_tol * std::fabs(fine) + abs_floor) {
            acc.converged = false;
            acc.worst_x = mid;
        }
        parts.push_back(fine);
        acc.err += diff;
        return;
    }
    adapt(h, p, lo, mid, left, abs_floor, opt, depth + 1, parts, acc);
    adapt(h, p, mid, hi, right, abs_floor, opt, depth + 1, parts, acc);
}

template <class H>
PanelResult integrate_pth_power(H& h, double p, const std::vector<double>& breaks, const NormOptions& opt,
                                double reference = 0.0) {
    const auto& rule = gauss_legendre_cached(20);
    auto g = [&](double x) { return std::pow(std::fabs(h(x)), p); };
    std::vector<double> coarse(breaks.size() - 1);
    for (std::size_t i = 0; i + 1 < breaks.size(); ++i) coarse[i] = gauss_panel(g, breaks[i], breaks[i + 1], rule);
    double rough = pairwise_sum(coarse.data(), coarse.size());
    // global tolerance: intervals whose error is below rel_tol of the whole
    // integral (or of the reference, for exterior pieces) are not refined
    double abs_floor = std::max(opt.rel_tol * std::max(std::fabs(rough), reference), std::pow(opt.noise_floor, p)) /
                       static_cast<double>(coarse.size());
    std::vector<double> parts;
    PanelResult acc;
    for (std::size_t i = 0; i + 1 < breaks.size(); ++i)
        adapt(h, p, breaks[i], breaks[i + 1], coarse[i], abs_floor, opt, 0, parts, acc);
    acc.value = pairwise_sum(parts.data(), parts.size());
    return acc;
}

}  // namespace detail

/// ||(1+|x|)^{-Delta} G(x)||_p where G is the already-weighted integrand
/// (callers fold the nu-th power of the norm factor into G, which avoids
/// overflow of unweighted polynomials).
///
/// The interior [-A, A], A = a_{4n}, is split at 0, at every breakpoint in
/// `nodes`, and into pieces no longer than A/n, then integrated adaptively.
/// The exterior is integrated on geometric panels [A r^j, A r^{j+1}] until
/// the panel contributions fall below 1e-18 of the interior; the remainder
/// is bounded by the geometric series of the last panel ratio.
template <class G>
NormValue weighted_lp_norm(const NormSpec& ns, const ScaleTable& scales, G&& gw, int n,
                           const std::vector<double>& nodes, const NormOptions& opt = {}) {
    ns.validate_ranges();
    if (n < 1) throw argument_error("weighted_lp_norm: n must be >= 1");
    const double A = scales.a(4.0 * n);
    auto h = [&](double x) {
        double v = gw(x);
        if (v == 0.0) return 0.0;
        return v * std::pow(1.0 + std::fabs(x), -ns.Delta);
    };
    std::vector<double> pts{-A, 0.0, A};
    for (double x : nodes)
        if (std::fabs(x) < A && x != 0.0) pts.push_back(x);
    std::sort(pts.begin(), pts.end());
    std::vector<double> breaks;
    const double max_width = A / n / opt.resolution;
    for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
        int pieces = std::max(opt.resolution, static_cast<int>(std::ceil((pts[i + 1] - pts[i]) / max_width)));
        for (int j = 0; j < pieces; ++j) breaks.push_back(pts[i] + (pts[i + 1] - pts[i]) * j / pieces);
    }
    breaks.push_back(A);

    auto interior = detail::integrate_pth_power(h, ns.p, breaks, opt);
    double total_p = interior.value;
    double err_p = interior.err;
    double remainder_p = 0.0;

    for (double sign : {-1.0, 1.0}) {
        auto hs = [&](double u) { return h(sign * u); };
        const double ratio = 1.5;
        double lo = A, prev = -1.0, last = 0.0;
        bool done = false;
        for (int j = 0; j < 80; ++j) {
            double hi = lo * ratio;
            std::vector<double> br;
            const int pieces = 4 * opt.resolution;
            for (int k = 0; k <= pieces; ++k) br.push_back(lo + (hi - lo) * k / pieces);
            auto r = detail::integrate_pth_power(hs, ns.p, br, opt, interior.value);
            total_p += r.value;
            err_p += r.err;
            if (!r.converged) {
                interior.converged = false;
                interior.worst_x = sign * r.worst_x;
            }
            last = r.value;
            if (last <= 1e-18 * std::max(interior.value, 1e-300) && prev >= 0.0 && last <= prev) {
                double q = prev > 0.0 ? last / prev : 0.0;
                remainder_p += q < 1.0 ? last * q / (1.0 - q) : std::numeric_limits<double>::infinity();
                done = true;
                break;
            }
            prev = last;
            lo = hi;
        }
        if (!done) remainder_p = std::numeric_limits<double>::infinity();
    }

    NormValue nv;
    nv.value = std::pow(total_p, 1.0 / ns.p);
    // d(I^{1/p}) = I^{1/p - 1} dI / p
    double dnorm = total_p > 0.0 ? nv.value / (ns.p * total_p) : 0.0;
    nv.quad_err = err_p * dnorm;
    nv.tail_bound = std::isfinite(remainder_p) ? remainder_p * dnorm : std::numeric_limits<double>::infinity();
    if (total_p == 0.0) nv.tail_bound = std::isfinite(remainder_p) ? 0.0 : nv.tail_bound;
    nv.converged = interior.converged && nv.tail_bound <= 1e-6 * std::max(nv.value, 1e-300);
    nv.worst_x = interior.worst_x;
    if (total_p == 0.0 && std::isfinite(remainder_p)) nv.converged = interior.converged;
    return nv;
}

// ---------------------------------------------------------------------------
// Convergence runs

struct ErrorRow {
    int n = 0;
    double a_n = 0.0;
    double eps_n = 0.0;
    double E = 0.0;
    double normX = 0.0;
    double normY = 0.0;
    double normZ = 0.0;
    double ratioY = 0.0;
    double ratioZ = 0.0;
    double quad_err = 0.0;
    bool flagged = false;
};

struct ErrorReport {
    std::string function;
    NormSpec norm;
    int l = 0;
    double c_f = 0.0;
    std::vector<ErrorRow> rows;

    /// E_n strictly decreasing over consecutive rows.
    bool monotone() const {
        for (std::size_t i = 1; i < rows.size(); ++i)
            if (!(rows[i].E < rows[i - 1].E)) return false;
        return true;
    }

    /// max / min of a positive column; 1 for fewer than two rows, inf if a value is not positive.
    static double spread(const std::vector<double>& v) {
        if (v.size() < 2) return 1.0;
        double lo = *std::min_element(v.begin(), v.end()), hi = *std::max_element(v.begin(), v.end());
        if (!(lo > 0.0)) return std::numeric_limits<double>::infinity();
        return hi / lo;
    }
    double spread_y() const {
        std::vector<double> v;
        for (const auto& r : rows) v.push_back(r.ratioY);
        return spread(v);
    }
    double spread_z() const {
        std::vector<double> v;
        for (const auto& r : rows) v.push_back(r.ratioZ);
        return spread(v);
    }
};

/// Refuses runs outside the theorem scope; throws gate_rejection.
inline void convergence_gate(const NormSpec& ns, const ConditionReport& cr, int l) {
    if (ns.nu % 2 != 0)
        throw gate_rejection("even_order", "convergence runs require an even interpolation order nu (got nu = " +
                                               std::to_string(ns.nu) + "); the convergence theorems cover even nu only");
    if (!ns.delta_bound_holds()) {
        std::ostringstream os;
        os << "Delta = " << ns.Delta << " violates Delta >= 1/p - min{1, alpha} = "
           << 1.0 / ns.p - std::min(1.0, ns.alpha);
        throw gate_rejection("delta_lower_bound", os.str());
    }
    const auto& d = cr.get("decay_and_origin");
    if (!cr.vanishes_at_origin || !d.ok()) {
        std::ostringstream os;
        os << "test function violates decay_and_origin (|f|(1+|x|)^alpha w^{nu-eta}(|Q'|+1/|x|) <= C_f and "
              "lim f(x)/x finite, which forces f(0) = 0): f(0) = "
           << cr.f_at_zero << ", supremum " << d.sup << " at |x| = " << d.where
           << (d.diverging_at_origin ? ", diverging toward 0" : "") << (d.diverging_at_edge ? ", diverging at the grid edge" : "");
        throw gate_rejection("decay_and_origin", os.str());
    }
    if (l > 0 && !cr.get("derivative_growth").ok()) {
        const auto& v = cr.get("derivative_growth");
        std::ostringstream os;
        os << "test function violates derivative_growth: supremum " << v.sup << " at |x| = " << v.where;
        throw gate_rejection("derivative_growth", os.str());
    }
}

/// E_n = ||(1+|x|)^{-Delta} {Phi^{3/4} w (|x| + a_n/n)^rho}^nu (L_n(l, nu, f) - f)||_p
/// and the X / Y / Z component norms for every n in n_list.
inline ErrorReport convergence_run(const NormSpec& ns, const WeightSpec& spec, const SampledFunction& f,
                                   const std::vector<int>& n_list, int l, const RecurrenceTable& table,
                                   const ScaleTable& scales, const NormOptions& opt = {}) {
    ns.validate_ranges();
    if (ns.nu != spec.nu) throw argument_error("convergence_run: NormSpec.nu differs from the weight's nu");
    if (ns.rho != spec.rho) throw argument_error("convergence_run: NormSpec.rho differs from the weight's rho");
    if (n_list.empty()) throw argument_error("convergence_run: empty n list");
    if (!std::is_sorted(n_list.begin(), n_list.end()) || n_list.front() < 2)
        throw argument_error("convergence_run: n list must be ascending with n >= 2");
    if (n_list.back() > table.N) throw argument_error("convergence_run: n exceeds the recurrence table");

    ConditionGrid grid;
    grid.x_max = scales.a(4.0 * n_list.back());
    auto cr = check_conditions(ns, f, spec, grid, l);
    convergence_gate(ns, cr, l);

    ErrorReport rep;
    rep.function = f.name;
    rep.norm = ns;
    rep.l = l;
    rep.c_f = cr.c_f;
    for (int n : n_list) {
        Interpolator in(table, zeros(table, n, ns.nu, scales), l);
        auto samples = in.sample(f, l);
        const double an = scales.a(n);
        const double aon = an / n;
        auto lw = [&](double x) { return log_norm_factor(spec, x, aon); };
        auto weighted_f = [&](double x, double lwx) {
            if (lwx == -std::numeric_limits<double>::infinity()) return 0.0;
            return f.value(x) * std::exp(ns.nu * lwx);
        };
        auto gE = [&](double x) {
            double w = lw(x);
            return in.eval(samples, x, w) - weighted_f(x, w);
        };
        auto gX = [&](double x) { return in.split(samples, x, lw(x)).X; };
        auto gY = [&](double x) { return in.split(samples, x, lw(x)).Y; };
        auto gZ = [&](double x) { return in.split(samples, x, lw(x)).Z; };
        const auto& nodes = in.nodes().x;
        ErrorRow row;
        row.n = n;
        row.a_n = an;
        row.eps_n = scales.eps(n);
        // L_n f - f cancels down to roundoff of the weighted f, so E is
        // resolved only to that floor
        auto gF = [&](double x) { return weighted_f(x, lw(x)); };
        auto F = weighted_lp_norm(ns, scales, gF, n, nodes, opt);
        NormOptions opt_e = opt;
        opt_e.noise_floor = std::max(opt.noise_floor, 1e-13 * F.value);
        auto E = weighted_lp_norm(ns, scales, gE, n, nodes, opt_e);
        auto X = weighted_lp_norm(ns, scales, gX, n, nodes, opt);
        auto Y = weighted_lp_norm(ns, scales, gY, n, nodes, opt);
        NormValue Z;
        if (l > 0) Z = weighted_lp_norm(ns, scales, gZ, n, nodes, opt);
        row.E = E.value;
        row.normX = X.value;
        row.normY = Y.value;
        row.normZ = Z.value;
        const double logn = std::log(double(n));
        row.ratioY = row.normY / (row.eps_n * (an + logn));
        row.ratioZ = row.normZ / (an * an * logn / n * ns.z_case(an));
        row.quad_err = E.quad_err + E.tail_bound;
        row.flagged = !E.converged || !(row.quad_err < 1e-3 * row.E) || !X.converged || !Y.converged ||
                      (l > 0 && !Z.converged);
        rep.rows.push_back(row);
    }
    return rep;
}

}  // namespace hfl
