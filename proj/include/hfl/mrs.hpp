#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <shared_mutex>
#include <string>
#include <vector>

#include "hfl/errors.hpp"
#include "hfl/quadrature.hpp"
#include "hfl/weights.hpp"

namespace hfl {

/// Solver for the Mhaskar-Rakhmanov-Saff number a_t:
///
///     t = (2/pi) \int_0^1 a_t u Q'(a_t u) / sqrt(1 - u^2) du.
///
/// The integral is taken in theta with u = sin(theta), which removes the
/// endpoint singularity; panels are graded towards theta = 0 when Q is not
/// smooth at the origin.
class MrsSolver {
public:
    MrsSolver(WeightSpec spec, int quad_points = 64, double tol = 1e-13)
        : spec_(std::move(spec)), quad_points_(quad_points), tol_(tol) {
        if (quad_points < 64) throw argument_error("MrsSolver: quad_points must be >= 64");
        if (!(tol > 0.0 && tol <= 1e-6)) throw argument_error("MrsSolver: tol must lie in (0, 1e-6]");
    }

    const WeightSpec& spec() const noexcept { return spec_; }
    int quad_points() const noexcept { return quad_points_; }
    double tol() const noexcept { return tol_; }

    /// Right-hand side of the defining equation for a given scale a.
    double rhs(double a, int points) const {
        const auto& rule = gauss_legendre_cached(points);
        auto integrand = [&](double theta) {
            double x = a * std::sin(theta);
            if (x == 0.0) return 0.0;
            return x * q_jet(spec_.family, x, 1)[1];
        };
        const double half_pi = 0.5 * std::numbers::pi;
        std::vector<double> parts;
        double left = 0.0;
        if (!spec_.family.smooth_at_zero()) {
            // geometric grading: [0, h 2^-G], ..., [h/2, h] with h = pi/8
            constexpr int levels = 24;
            double h = half_pi / 4.0;
            double lo = 0.0, hi = h * std::ldexp(1.0, -levels);
            parts.push_back(gauss_panel(integrand, lo, hi, rule));
            for (int k = levels; k >= 1; --k) {
                lo = hi;
                hi = h * std::ldexp(1.0, -(k - 1));
                parts.push_back(gauss_panel(integrand, lo, hi, rule));
            }
            left = h;
        }
        const int uniform = 4;
        double step = (half_pi - left) / uniform;
        for (int k = 0; k < uniform; ++k)
            parts.push_back(gauss_panel(integrand, left + k * step, k + 1 == uniform ? half_pi : left + (k + 1) * step, rule));
        return (2.0 / std::numbers::pi) * pairwise_sum(parts.data(), parts.size());
    }

    double rhs(double a) const { return rhs(a, quad_points_); }

    /// Relative residual |rhs(a) - t| / t at the given resolution.
    double residual(double a, double t, int points) const { return std::fabs(rhs(a, points) - t) / t; }

    /// a_t by bracketing then secant refinement (the map a -> rhs(a) is increasing).
    double solve(double t) const {
        if (!(t > 0.0)) throw argument_error("mrs_number: t must be > 0");
        auto f = [&](double a) {
            try {
                return rhs(a) / t - 1.0;
            } catch (const overflow_error&) {
                throw overflow_error("mrs_number: scale overflow while bracketing a_t for t = " + std::to_string(t) +
                                     " (" + spec_.family.key() + ")");
            }
        };
        double lo = 1.0, hi = 1.0;
        double flo = f(1.0), fhi = flo;
        if (flo == 0.0) return 1.0;
        if (flo < 0.0) {
            while (fhi < 0.0) {
                lo = hi;
                flo = fhi;
                hi *= 2.0;
                if (hi > 1e150) throw overflow_error("mrs_number: no bracket below the family overflow limit");
                fhi = f(hi);
            }
        } else {
            while (flo > 0.0) {
                hi = lo;
                fhi = flo;
                lo *= 0.5;
                if (lo < 1e-150) throw convergence_error("mrs_number: no lower bracket", flo);
                flo = f(lo);
            }
        }
        // bisection down to a narrow bracket, then Illinois-type secant steps
        int side = 0;
        for (int it = 0; it < 300; ++it) {
            double a;
            if ((hi - lo) > 1e-3 * hi) a = 0.5 * (lo + hi);
            else a = (lo * fhi - hi * flo) / (fhi - flo);
            if (!(a > lo && a < hi)) a = 0.5 * (lo + hi);
            double fa = f(a);
            if (std::fabs(fa) <= 0.25 * tol_) return a;
            if (fa < 0.0) {
                lo = a;
                flo = fa;
                if (side == -1) fhi *= 0.5;
                side = -1;
            } else {
                hi = a;
                fhi = fa;
                if (side == 1) flo *= 0.5;
                side = 1;
            }
            if (hi - lo <= 4.0 * std::numeric_limits<double>::epsilon() * hi) {
                double best = std::fabs(flo) < std::fabs(fhi) ? lo : hi;
                double res = std::fabs(f(best));
                if (res <= tol_) return best;
                throw convergence_error("mrs_number: bracket collapsed above tolerance", res);
            }
        }
        double mid = 0.5 * (lo + hi);
        throw convergence_error("mrs_number: iteration cap reached", std::fabs(f(mid)));
    }

private:
    WeightSpec spec_;
    int quad_points_;
    double tol_;
};

/// How the local spacing function phi_u is normalized in the interior.
enum class PhiConvention {
    /// (a_u / u) (1 - |x|/a_{2u}) / sqrt(1 - |x|/a_u + delta_u): the standard form, bounded below near 0.
    standard,
    /// (|x| / u) (1 - |x|/a_{2u}) / sqrt(1 - |x|/a_u + delta_u): the form that vanishes at 0.
    vanishing_at_origin,
};

/// Cache of a_t and the scale functions derived from it. Lookups may run
/// concurrently; a miss takes the writer lock once.
class ScaleTable {
public:
    ScaleTable(MrsSolver solver, double gamma) : solver_(std::move(solver)), gamma_(gamma) {
        if (!(gamma >= 0.0 && gamma < 1.0)) throw argument_error("ScaleTable: gamma must lie in [0, 1)");
    }

    /// Shared table for a solver, content-addressed by (family, rho, tol, resolution, gamma).
    static std::shared_ptr<ScaleTable> shared(const MrsSolver& solver, double gamma) {
        static std::mutex mu;
        static std::map<std::string, std::shared_ptr<ScaleTable>> registry;
        char buf[96];
        std::snprintf(buf, sizeof buf, "|tol=%.17g|q=%d|gamma=%.17g", solver.tol(), solver.quad_points(), gamma);
        std::string key = solver.spec().key() + buf;
        std::lock_guard lock(mu);
        auto& slot = registry[key];
        if (!slot) slot = std::make_shared<ScaleTable>(solver, gamma);
        return slot;
    }

    /// Default gamma: 0 for Freud families, `erdos_default` otherwise.
    static double default_gamma(const WeightSpec& spec, double erdos_default = 0.1) {
        return spec.family.is_freud() ? 0.0 : erdos_default;
    }

    const MrsSolver& solver() const noexcept { return solver_; }
    const WeightSpec& spec() const noexcept { return solver_.spec(); }
    double gamma() const noexcept { return gamma_; }

    double a(double t) const {
        {
            std::shared_lock lock(mu_);
            auto it = cache_.find(t);
            if (it != cache_.end()) return it->second;
        }
        double v = solver_.solve(t);
        std::unique_lock lock(mu_);
        cache_.emplace(t, v);
        return v;
    }

    double t_at_a(double t) const { return t_func(spec(), a(t)); }

    /// delta_u = (u T(a_u))^{-2/3}.
    double delta(double u) const {
        if (!(u > 0.0)) throw argument_error("delta_u: u must be > 0");
        return std::pow(u * t_at_a(u), -2.0 / 3.0);
    }

    double phi(double u, double x, PhiConvention conv = PhiConvention::standard) const {
        if (!(u > 0.0)) throw argument_error("phi_u: u must be > 0");
        double au = a(u), a2u = a(2.0 * u), du = delta(u);
        double ax = std::min(std::fabs(x), au);
        double lead = conv == PhiConvention::standard ? au / u : ax / u;
        return lead * (1.0 - ax / a2u) / std::sqrt(1.0 - ax / au + du);
    }

    /// Phi_n(x) = max{delta_n, 1 - |x|/a_n}.
    double phi_n_factor(int n, double x) const {
        if (n < 1) throw argument_error("phi_n_factor: n must be >= 1");
        return std::max(delta(n), 1.0 - std::fabs(x) / a(n));
    }

    /// eps_n: a_n/n when T(a_n)/a_n < 1, else n^{gamma-1}. a_n is only known
    /// to the solver tolerance, so ratios within that band of 1 take the
    /// second branch.
    double eps(int n, double gamma) const {
        if (n < 1) throw argument_error("eps_n: n must be >= 1");
        double an = a(n);
        if (t_at_a(n) / an < 1.0 - 8.0 * solver_.tol()) return an / n;
        return std::pow(double(n), gamma - 1.0);
    }
    double eps(int n) const { return eps(n, gamma_); }

    std::vector<std::pair<double, double>> entries() const {
        std::shared_lock lock(mu_);
        return {cache_.begin(), cache_.end()};
    }

private:
    MrsSolver solver_;
    double gamma_;
    mutable std::shared_mutex mu_;
    mutable std::map<double, double> cache_;
};

inline double mrs_number(const MrsSolver& s, double t) { return ScaleTable::shared(s, 0.0)->a(t); }
inline double delta_u(const MrsSolver& s, double u) { return ScaleTable::shared(s, 0.0)->delta(u); }
inline double phi_u(const MrsSolver& s, double u, double x, PhiConvention c = PhiConvention::standard) {
    return ScaleTable::shared(s, 0.0)->phi(u, x, c);
}
inline double phi_n_factor(const MrsSolver& s, int n, double x) { return ScaleTable::shared(s, 0.0)->phi_n_factor(n, x); }
inline double eps_n(const MrsSolver& s, int n, double gamma) { return ScaleTable::shared(s, 0.0)->eps(n, gamma); }

}  // namespace hfl
