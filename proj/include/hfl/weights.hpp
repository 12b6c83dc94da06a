#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <string>
#include <type_traits>
#include <variant>
#include <vector>

#include "hfl/errors.hpp"
#include "hfl/jet.hpp"

namespace hfl {

/// Q(x) = |x|^m, m > 1.
struct FreudMonomial {
    double m;
};

/// Q(x) = |x|^m { exp_l(|x|^alpha) - alpha* exp_l(0) },
/// alpha* = 0 when alpha = 0, else 1; exp_0(y) = y.
struct ExpPower {
    int ell;
    double alpha;
    double m;
};

/// Q(x) = (1 + |x|)^{|x|^alpha} - 1, alpha > 1.
struct PowerExp {
    double alpha;
};

/// An exponent Q for the weight exp(-Q). Immutable once built.
class WeightFamily {
public:
    using kind_type = std::variant<FreudMonomial, ExpPower, PowerExp>;

    static WeightFamily freud(double m, double delta_smooth = 0.0) {
        if (!(m > 1.0)) throw argument_error("freud family requires m > 1");
        return WeightFamily(FreudMonomial{m}, delta_smooth);
    }

    static WeightFamily exp_power(int ell, double alpha, double m, double delta_smooth = 0.0) {
        if (ell < 0) throw argument_error("exppower family requires ell >= 0");
        if (alpha < 0.0 || m < 0.0) throw argument_error("exppower family requires alpha, m >= 0");
        if (!(alpha + m > 1.0)) throw argument_error("exppower family requires alpha + m > 1");
        return WeightFamily(ExpPower{ell, alpha, m}, delta_smooth);
    }

    static WeightFamily power_exp(double alpha, double delta_smooth = 0.0) {
        if (!(alpha > 1.0)) throw argument_error("powerexp family requires alpha > 1");
        return WeightFamily(PowerExp{alpha}, delta_smooth);
    }

    const kind_type& kind() const noexcept { return kind_; }
    double delta_smooth() const noexcept { return delta_smooth_; }

    /// True when T = xQ'/Q is bounded (Freud type), false for Erdős type.
    bool is_freud() const {
        return std::visit(
            [](const auto& k) {
                using K = std::decay_t<decltype(k)>;
                if constexpr (std::is_same_v<K, FreudMonomial>) return true;
                else if constexpr (std::is_same_v<K, ExpPower>) return k.ell == 0 || k.alpha == 0.0;
                else return false;
            },
            kind_);
    }

    /// Stable textual identity, used for cache keys and manifests.
    std::string key() const {
        char buf[160];
        std::visit(
            [&](const auto& k) {
                using K = std::decay_t<decltype(k)>;
                if constexpr (std::is_same_v<K, FreudMonomial>)
                    std::snprintf(buf, sizeof buf, "freud(m=%.17g)", k.m);
                else if constexpr (std::is_same_v<K, ExpPower>)
                    std::snprintf(buf, sizeof buf, "exppower(ell=%d,alpha=%.17g,m=%.17g)", k.ell, k.alpha, k.m);
                else
                    std::snprintf(buf, sizeof buf, "powerexp(alpha=%.17g)", k.alpha);
            },
            kind_);
        return buf;
    }

    /// Q on x > 0, generic over scalars and jets. Callers handle x <= 0.
    template <class V, class Scalar>
    V q_positive(const V& x) const {
        return std::visit(
            [&](const auto& k) -> V {
                using K = std::decay_t<decltype(k)>;
                using std::pow;
                if constexpr (std::is_same_v<K, FreudMonomial>) {
                    return pow(x, Scalar(k.m));
                } else if constexpr (std::is_same_v<K, ExpPower>) {
                    V core = exp_tower_shifted<V, Scalar>(k, x);
                    if (k.m == 0.0) return core;
                    return pow(x, Scalar(k.m)) * core;
                } else {
                    using std::log1p;
                    using detail::log1p_;
                    using std::expm1;
                    using detail::expm1_;
                    if constexpr (std::is_arithmetic_v<V> || !has_jet_ops<V>)
                        return expm1_(pow(x, Scalar(k.alpha)) * log1p_(x));
                    else
                        return expm1(pow(x, Scalar(k.alpha)) * log1p(x));
                }
            },
            kind_);
    }

    /// Q as a formal power series about 0. Only valid when smooth_at_zero().
    template <class J>
    J q_at_zero(std::size_t order) const {
        J x = J::variable(0.0, order);
        return std::visit(
            [&](const auto& k) -> J {
                using K = std::decay_t<decltype(k)>;
                if constexpr (std::is_same_v<K, FreudMonomial>) {
                    return ipow(x, static_cast<unsigned>(k.m));
                } else if constexpr (std::is_same_v<K, ExpPower>) {
                    J y = k.alpha > 0.0 ? ipow(x, static_cast<unsigned>(k.alpha)) : J(1.0, order);
                    J core = k.ell == 0 ? y : (k.alpha > 0.0 ? shifted_tower(k.ell, y) : J(exp_l(k.ell, 1.0), order));
                    return ipow(x, static_cast<unsigned>(k.m)) * core;
                } else {
                    throw domain_error("powerexp is not smooth at 0");
                }
            },
            kind_);
    }

    /// Smallest exponent kappa in the expansion Q(x) ~ c |x|^kappa near 0.
    double leading_exponent() const {
        return std::visit(
            [](const auto& k) -> double {
                using K = std::decay_t<decltype(k)>;
                if constexpr (std::is_same_v<K, FreudMonomial>) return k.m;
                else if constexpr (std::is_same_v<K, ExpPower>) return k.ell == 0 ? k.m + k.alpha : (k.alpha > 0 ? k.m + k.alpha : k.m);
                else return k.alpha + 1.0;
            },
            kind_);
    }

    /// True when Q is C-infinity at 0 (all exponents are even integers).
    bool smooth_at_zero() const {
        auto even_int = [](double v) { return v >= 0 && std::floor(v) == v && std::fmod(v, 2.0) == 0.0; };
        return std::visit(
            [&](const auto& k) -> bool {
                using K = std::decay_t<decltype(k)>;
                if constexpr (std::is_same_v<K, FreudMonomial>) return even_int(k.m);
                else if constexpr (std::is_same_v<K, ExpPower>) {
                    if (k.ell == 0) return even_int(k.m + k.alpha);
                    return even_int(k.m) && even_int(k.alpha);
                } else return false;
            },
            kind_);
    }

    /// exp_l(y), l-fold iterated exponential.
    static double exp_l(int ell, double y) {
        for (int i = 0; i < ell; ++i) y = std::exp(y);
        return y;
    }

private:
    WeightFamily(kind_type k, double delta) : kind_(k), delta_smooth_(delta) {
        if (delta < 0.0 || delta >= 1.0) throw argument_error("delta_smooth must lie in [0, 1)");
    }

    template <class V>
    static constexpr bool has_jet_ops = !std::is_arithmetic_v<V> && requires(V v) { v.order(); };

    // exp_l(y) - exp_l(0) computed as nested expm1 so that it stays accurate near y = 0.
    template <class V>
    static V shifted_tower(int ell, const V& y) {
        using std::expm1;
        using detail::expm1_;
        V e = y;
        double base = 0.0;  // exp_{i}(0)
        for (int i = 1; i <= ell; ++i) {
            double c = std::exp(base);  // exp_i(0)
            if constexpr (has_jet_ops<V>) e = expm1(e) * c;
            else e = expm1_(e) * V(c);
            base = c;
        }
        return e;
    }

    template <class V, class Scalar>
    static V exp_tower_shifted(const ExpPower& k, const V& x) {
        using std::pow;
        if (k.ell == 0) return k.alpha > 0.0 ? pow(x, Scalar(k.alpha)) : V(one_like(x));
        if (k.alpha == 0.0) return one_like(x) * Scalar(exp_l(k.ell, 1.0));
        return shifted_tower(k.ell, V(pow(x, Scalar(k.alpha))));
    }

    template <class V>
    static V one_like(const V& x) {
        if constexpr (has_jet_ops<V>) return V(1.0, x.order());
        else return V(1);
    }

    kind_type kind_;
    double delta_smooth_ = 0.0;
};

/// The weight w_rho(x) = |x|^rho exp(-Q(x)) together with the interpolation
/// order nu it is used with.
struct WeightSpec {
    WeightFamily family;
    double rho = 0.0;
    int nu = 2;

    WeightSpec(WeightFamily f, double rho_, int nu_) : family(std::move(f)), rho(rho_), nu(nu_) {
        if (!(rho >= 0.0)) throw argument_error("rho must be >= 0");
        if (nu < 2) throw argument_error("nu must be >= 2");
        if (nu + 1 > 15) throw argument_error("nu too large for the derivative engine");
    }

    std::string key() const {
        char buf[64];
        std::snprintf(buf, sizeof buf, ",rho=%.17g", rho);
        return family.key() + buf;
    }
};

using jet_d = Jet<double, 16>;

/// Taylor jet of Q about x up to `order`. Throws on singular or overflowing evaluation.
inline jet_d q_jet(const WeightFamily& fam, double x, std::size_t order) {
    if (!std::isfinite(x)) throw domain_error("q_eval: x must be finite");
    if (x == 0.0) {
        if (fam.smooth_at_zero()) return fam.q_at_zero<jet_d>(order);
        double kappa = fam.leading_exponent();
        jet_d z(0.0, order);
        for (std::size_t j = 1; j <= order; ++j)
            if (double(j) >= kappa)
                throw domain_error("q_eval: derivative of order " + std::to_string(j) + " is singular at x = 0");
        return z;
    }
    double ax = std::fabs(x);
    jet_d q = fam.q_positive<jet_d, double>(jet_d::variable(ax, order));
    for (std::size_t j = 0; j <= order; ++j)
        if (!std::isfinite(q[j])) throw overflow_error("q_eval: overflow at |x| = " + std::to_string(ax) + " for " + fam.key());
    if (x < 0.0)
        for (std::size_t j = 1; j <= order; j += 2) q[j] = -q[j];
    return q;
}

/// Q^{(order)}(x), 0 <= order <= nu + 1, by exact series differentiation.
inline double q_eval(const WeightSpec& spec, double x, int order) {
    if (order < 0 || order > spec.nu + 1)
        throw unsupported_order("q_eval: order " + std::to_string(order) + " exceeds nu + 1 = " + std::to_string(spec.nu + 1));
    return q_jet(spec.family, x, static_cast<std::size_t>(order)).derivative(static_cast<std::size_t>(order));
}

/// Q(x) at arbitrary working precision (order 0 only).
template <class Real>
Real q_value(const WeightFamily& fam, const Real& x) {
    using std::abs;
    Real ax = abs(x);
    if (ax == 0) return Real(0);
    return fam.q_positive<Real, Real>(ax);
}

/// T(x) = x Q'(x) / Q(x), x != 0.
inline double t_func(const WeightSpec& spec, double x) {
    if (x == 0.0) throw domain_error("t_func: T is undefined at x = 0");
    jet_d q = q_jet(spec.family, x, 1);
    return x * q[1] / q[0];
}

/// log w_rho(x); -inf at x = 0 when rho > 0.
inline double log_w_rho(const WeightSpec& spec, double x) {
    double lq;
    try {
        lq = q_jet(spec.family, x, 0)[0];
    } catch (const overflow_error&) {
        return -std::numeric_limits<double>::infinity();
    }
    if (spec.rho == 0.0) return -lq;
    if (x == 0.0) return -std::numeric_limits<double>::infinity();
    return spec.rho * std::log(std::fabs(x)) - lq;
}

/// |x|^rho exp(-Q(x)); underflow and Q overflow flush to 0.
inline double w_rho_eval(const WeightSpec& spec, double x) { return std::exp(log_w_rho(spec, x)); }

/// exp(-Q(x)) without the |x|^rho factor.
inline double w_eval(const WeightSpec& spec, double x) {
    try {
        return std::exp(-q_jet(spec.family, x, 0)[0]);
    } catch (const overflow_error&) {
        return 0.0;
    }
}

/// Phi(x) = 1 / ((1 + Q(x))^{2/3} T(x)), x != 0.
inline double phi_cap(const WeightSpec& spec, double x) {
    if (x == 0.0) throw domain_error("phi_cap: undefined at x = 0");
    jet_d q = q_jet(spec.family, x, 1);
    double t = x * q[1] / q[0];
    return 1.0 / (std::pow(1.0 + q[0], 2.0 / 3.0) * t);
}

/// Largest x (within a factor 1 + 1e-6) at which Q and its first nu+1
/// derivatives are finite, capped at `cap`.
inline double family_x_max(const WeightSpec& spec, double cap = 1e6) {
    auto ok = [&](double x) {
        try {
            q_jet(spec.family, x, spec.nu + 1);
            return true;
        } catch (const overflow_error&) {
            return false;
        }
    };
    if (ok(cap)) return cap;
    double lo = 1e-3, hi = cap;
    while (hi / lo > 1.0 + 1e-6) {
        double mid = std::sqrt(lo * hi);
        (ok(mid) ? lo : hi) = mid;
    }
    return lo;
}

/// Sampling description for the class diagnostics: `points` geometric samples on [x_min, x_max].
struct SampleGrid {
    double x_min = 1e-7;
    double x_max = 10.0;
    int points = 400;

    std::vector<double> samples() const {
        if (points < 1) throw argument_error("sample grid is empty");
        if (!(x_min > 0.0) || !(x_max >= x_min)) throw argument_error("sample grid must satisfy 0 < x_min <= x_max");
        std::vector<double> xs(points);
        if (points == 1) {
            xs[0] = x_min;
            return xs;
        }
        double r = std::log(x_max / x_min) / (points - 1);
        for (int i = 0; i < points; ++i) xs[i] = x_min * std::exp(r * i);
        xs.back() = x_max;
        return xs;
    }
};

/// Worst observed margins for the sampled weight-class conditions. Constants
/// in the class definitions are existential, so they are reported as fitted
/// values and never compared against thresholds here.
struct ClassReport {
    std::string family;
    int samples = 0;
    /// min over the grid of Q^{(i)}(x), i = 0..nu+1, and the count of non-positive samples.
    std::vector<double> derivative_min;
    std::vector<int> derivative_nonpositive;
    /// sup of (Q''/|Q'|) / (|Q'|/Q): fitted upper constant.
    double c1_fitted = 0.0;
    /// inf of the same ratio for x >= 1: fitted lower constant outside a compact J.
    double c2_fitted = 0.0;
    /// sup of |Q^{(i+1)}| / (|Q^{(i)}| |Q'| / Q), i = 1..nu (inf when Q^{(i)} vanishes).
    std::vector<double> ci_fitted;
    double t_min = 0.0;  ///< fitted Lambda
    double t_max = 0.0;
    int t_descents = 0;          ///< strict decreases of T between consecutive samples
    double t_quasi_const = 1.0;  ///< max over x < y of T(x) / T(y)
    /// sup over (0, 1] of Q^{(nu+1)}(x) x^delta with the family's delta.
    double smoothness_const = 0.0;
};

inline ClassReport check_class_membership(const WeightSpec& spec, const SampleGrid& grid) {
    auto xs = grid.samples();
    const std::size_t top = static_cast<std::size_t>(spec.nu) + 1;
    ClassReport r;
    r.family = spec.family.key();
    r.samples = static_cast<int>(xs.size());
    r.derivative_min.assign(top + 1, std::numeric_limits<double>::infinity());
    r.derivative_nonpositive.assign(top + 1, 0);
    r.ci_fitted.assign(static_cast<std::size_t>(spec.nu), 0.0);
    r.c2_fitted = std::numeric_limits<double>::infinity();
    r.t_min = std::numeric_limits<double>::infinity();
    double t_running_max = 0.0;
    double t_prev = 0.0;
    for (std::size_t s = 0; s < xs.size(); ++s) {
        double x = xs[s];
        jet_d q;
        try {
            q = q_jet(spec.family, x, top);
        } catch (const overflow_error&) {
            break;
        }
        std::vector<double> d(top + 1);
        for (std::size_t i = 0; i <= top; ++i) d[i] = q.derivative(i);
        for (std::size_t i = 0; i <= top; ++i) {
            r.derivative_min[i] = std::min(r.derivative_min[i], d[i]);
            if (!(d[i] > 0.0)) ++r.derivative_nonpositive[i];
        }
        double logder = std::fabs(d[1]) / d[0];
        double ratio = (d[2] / std::fabs(d[1])) / logder;
        r.c1_fitted = std::max(r.c1_fitted, ratio);
        if (x >= 1.0) r.c2_fitted = std::min(r.c2_fitted, ratio);
        for (std::size_t i = 1; i <= static_cast<std::size_t>(spec.nu); ++i) {
            double denom = std::fabs(d[i]) * logder;
            double c = denom > 0.0 ? std::fabs(d[i + 1]) / denom
                                   : (d[i + 1] == 0.0 ? 0.0 : std::numeric_limits<double>::infinity());
            r.ci_fitted[i - 1] = std::max(r.ci_fitted[i - 1], c);
        }
        double t = x * d[1] / d[0];
        r.t_min = std::min(r.t_min, t);
        r.t_max = std::max(r.t_max, t);
        if (s > 0 && t < t_prev * (1.0 - 1e-12)) ++r.t_descents;
        t_running_max = std::max(t_running_max, t);
        r.t_quasi_const = std::max(r.t_quasi_const, t_running_max / t);
        t_prev = t;
        if (x <= 1.0)
            r.smoothness_const = std::max(r.smoothness_const, d[top] * std::pow(x, spec.family.delta_smooth()));
    }
    if (!std::isfinite(r.c2_fitted)) r.c2_fitted = 0.0;
    return r;
}

}  // namespace hfl
