#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "hfl/errors.hpp"
#include "hfl/jet.hpp"
#include "hfl/mrs.hpp"
#include "hfl/orthopoly.hpp"
#include "hfl/weights.hpp"

namespace hfl {

/// A test function defined once against jets, so every derivative is exact.
/// alpha, eta and c_f are the claimed growth-condition parameters.
struct SampledFunction {
    std::string name;
    std::function<jet_d(const jet_d&)> eval;
    double alpha = 1.0;
    double eta = 0.5;
    double c_f = 0.0;

    double value(double x) const { return eval(jet_d(x, 0))[0]; }

    /// f^{(j)}(x), j = 0..order.
    std::vector<double> derivatives(double x, int order) const {
        if (order < 0 || order > 15) throw unsupported_order("SampledFunction: derivative order out of range");
        jet_d r = eval(jet_d::variable(x, order));
        std::vector<double> out(order + 1);
        for (int j = 0; j <= order; ++j) out[j] = r.derivative(j);
        return out;
    }
};

/// Built-in test functions: sin, xexp (x e^{-x^2}), rational (x/(1+x^2)),
/// one, x, zero.
inline std::optional<SampledFunction> named_function(const std::string& name) {
    SampledFunction f;
    f.name = name;
    if (name == "sin") f.eval = [](const jet_d& x) { return sin(x); };
    else if (name == "xexp") f.eval = [](const jet_d& x) { return x * exp(-(x * x)); };
    else if (name == "rational") f.eval = [](const jet_d& x) { return x / (x * x + 1.0); };
    else if (name == "one") f.eval = [](const jet_d& x) { return jet_d(1.0, x.order()); };
    else if (name == "x") f.eval = [](const jet_d& x) { return x; };
    else if (name == "zero") f.eval = [](const jet_d& x) { return jet_d(0.0, x.order()); };
    else return std::nullopt;
    return f;
}

inline std::vector<std::string> function_names() { return {"sin", "xexp", "rational", "one", "x", "zero"}; }

/// Per-node Taylor data of the fundamental polynomials.
struct FundamentalCoeffs {
    int n = 0;
    int nu = 0;
    int l = 0;
    std::vector<std::vector<double>> taylor_c;       ///< Taylor coefficients of l_k at x_k, c_0..c_{nu-1}
    std::vector<std::vector<double>> taylor_b;       ///< Taylor coefficients of l_k^nu at x_k, b_0..b_{nu-1}
    std::vector<std::vector<std::vector<double>>> e;  ///< e[k][s][i], 0 <= s <= i <= nu-1 (zero below the diagonal)
};

namespace detail {

inline std::vector<double> lk_series(const NodeSet& nodes, int k, int order) {
    if (k < 0 || k >= nodes.n) throw argument_error("taylor_lk: node index out of range");
    if (order < 0 || order + 1 > nodes.nu) throw unsupported_order("taylor_lk: order must be <= nu - 1");
    // l_k(x_k + d) = prod_{j != k} (1 + d / (x_k - x_j)), truncated
    std::vector<hp50> c(order + 1, hp50(0));
    c[0] = 1;
    const hp50 xk = nodes.x[k];
    for (int j = 0; j < nodes.n; ++j) {
        if (j == k) continue;
        if (nodes.x[j] == nodes.x[k])
            throw domain_error("taylor_lk: degenerate node " + std::to_string(k + 1) + " (repeated abscissa)");
        hp50 u = 1 / (xk - nodes.x[j]);
        for (int i = order; i >= 1; --i) c[i] += u * c[i - 1];
    }
    std::vector<double> r(order + 1);
    for (int i = 0; i <= order; ++i) r[i] = c[i].convert_to<double>();
    return r;
}

/// A value held as (log |v|, sign v).
struct LogSigned {
    double log_abs;
    double sign;
};

inline std::vector<double> series_mul(const std::vector<double>& a, const std::vector<double>& b) {
    std::vector<double> r(a.size(), 0.0);
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t j = 0; i + j < a.size(); ++j) r[i + j] += a[i] * b[j];
    return r;
}

}  // namespace detail

/// Taylor coefficients b_0..b_order of l_k^nu at x_k (k is 0-based).
inline std::vector<double> taylor_lk(const NodeSet& nodes, int k, int order) {
    auto c = detail::lk_series(nodes, k, order);
    std::vector<double> b(order + 1, 0.0);
    b[0] = 1.0;
    for (int p = 0; p < nodes.nu; ++p) b = detail::series_mul(b, c);
    b[0] = 1.0;
    return b;
}

/// e_{s,i} from the Taylor coefficients of l_k^nu by unit-triangular
/// back-substitution: e_{s,s} = 1/s!, e_{s,j} = -sum_{i=s}^{j-1} e_{s,i} b_{j-i}.
inline std::vector<std::vector<double>> e_coeffs(int nu, std::span<const double> b) {
    if (nu < 1 || static_cast<int>(b.size()) < nu) throw argument_error("e_coeffs: need b_0..b_{nu-1}");
    if (b[0] != 1.0) throw argument_error("e_coeffs: b_0 must be 1");
    std::vector<std::vector<double>> e(nu, std::vector<double>(nu, 0.0));
    double fact = 1.0;
    for (int s = 0; s < nu; ++s) {
        if (s > 0) fact *= s;
        e[s][s] = 1.0 / fact;
        for (int j = s + 1; j < nu; ++j) {
            double acc = 0.0;
            for (int i = s; i < j; ++i) acc += e[s][i] * b[j - i];
            e[s][j] = -acc;
        }
    }
    return e;
}

inline FundamentalCoeffs build_coeffs(const NodeSet& nodes, int l) {
    if (l < 0 || l > nodes.nu - 1) throw argument_error("build_coeffs: need 0 <= l <= nu - 1");
    FundamentalCoeffs fc;
    fc.n = nodes.n;
    fc.nu = nodes.nu;
    fc.l = l;
    for (int k = 0; k < nodes.n; ++k) {
        fc.taylor_c.push_back(detail::lk_series(nodes, k, nodes.nu - 1));
        fc.taylor_b.push_back(taylor_lk(nodes, k, nodes.nu - 1));
        fc.e.push_back(e_coeffs(nodes.nu, fc.taylor_b.back()));
    }
    return fc;
}

/// f^{(s)}(x_k) for s = 0..l at every node.
struct NodeSamples {
    int l = 0;
    std::vector<std::vector<double>> f;  ///< f[k][s]
};

/// L_n = X + Y (+ Z when l > 0).
struct Split {
    double X = 0.0;
    double Y = 0.0;
    double Z = 0.0;
    double L() const { return X + Y + Z; }
};

/// Fundamental polynomials h_{s,k} and the operators L_n(l, nu, f) on a
/// fixed node set. l_k is the Lagrange basis of the stored (rounded) nodes,
/// prod_{j != k} (x - x_j) / (x_k - x_j), evaluated as omega(x) / ((x - x_k)
/// omega'(x_k)) so that it vanishes exactly at every other stored node; within
/// 1e-8 of the node gap the Taylor series of l_k is used instead.
class Interpolator {
public:
    Interpolator(const RecurrenceTable& table, NodeSet nodes, int l)
        : table_(&table), nodes_(std::move(nodes)), fc_(build_coeffs(nodes_, l)) {
        if (nodes_.n > table.N) throw argument_error("Interpolator: node set exceeds the recurrence table");
        const int n = nodes_.n;
        log_dw_.assign(n, 0.0);
        sign_dw_.assign(n, 1.0);
        dw_hp_.assign(n, hp50(1));
        for (int k = 0; k < n; ++k)
            for (int j = 0; j < n; ++j) {
                if (j == k) continue;
                double g = nodes_.x[k] - nodes_.x[j];
                log_dw_[k] += std::log(std::fabs(g));
                if (g < 0) sign_dw_[k] = -sign_dw_[k];
                dw_hp_[k] *= hp50(nodes_.x[k]) - nodes_.x[j];
            }
    }

    const NodeSet& nodes() const { return nodes_; }
    const FundamentalCoeffs& coeffs() const { return fc_; }
    const RecurrenceTable& table() const { return *table_; }
    int n() const { return nodes_.n; }
    int nu() const { return nodes_.nu; }
    int l() const { return fc_.l; }

    NodeSamples sample(const SampledFunction& f, int l) const {
        check_l(l);
        NodeSamples ns;
        ns.l = l;
        for (double xk : nodes_.x) ns.f.push_back(f.derivatives(xk, l));
        return ns;
    }

    /// h_{s,k}(x) * W(x)^nu, with log W = log_w; Real is double or hp50.
    template <class Real>
    Real fundamental(int s, int k, const Real& x, double log_w = 0.0) const {
        if (s < 0 || s >= nu()) throw argument_error("fundamental: s out of range");
        if (k < 0 || k >= n()) throw argument_error("fundamental: k out of range");
        Real d = x - Real(nodes_.x[k]);
        Real u;
        if constexpr (std::is_same_v<Real, double>) u = lk_scaled<Real>(k, d, scaled_omega(x, log_w), log_w);
        else u = lk_scaled<Real>(k, d, 0, log_w);
        return power(u) * poly<Real>(k, s, d, 0, nu() - 1);
    }

    /// The three components at x, scaled by W(x)^nu with log W = log_w.
    Split split(const NodeSamples& f, double x, double log_w = 0.0) const {
        check_l(f.l);
        Split r;
        const int v = nu();
        auto P = scaled_omega(x, log_w);
        for (int k = 0; k < n(); ++k) {
            double d = x - nodes_.x[k];
            double uv = power(lk_scaled<double>(k, d, P, log_w));
            if (uv == 0.0) continue;
            const auto& fk = f.f[k];
            r.X += fk[0] * uv * poly<double>(k, 0, d, 0, v - 2);
            r.Y += fk[0] * uv * poly<double>(k, 0, d, v - 1, v - 1);
            for (int s = 1; s <= f.l; ++s) r.Z += fk[s] * uv * poly<double>(k, s, d, s, v - 1);
        }
        return r;
    }

    double eval(const NodeSamples& f, double x, double log_w = 0.0) const { return split(f, x, log_w).L(); }

private:
    void check_l(int l) const {
        if (l < 0 || l > nu() - 1) throw argument_error("interp: need 0 <= l <= nu - 1");
    }

    template <class Real>
    Real power(const Real& u) const {
        Real r = u;
        for (int i = 1; i < nu(); ++i) r *= u;
        return r;
    }

    // sum_{i=lo}^{hi} e_{s,i} d^i, clipped to i >= s
    template <class Real>
    Real poly(int k, int s, const Real& d, int lo, int hi) const {
        const auto& e = fc_.e[k][s];
        lo = std::max(lo, s);
        Real acc = 0;
        for (int i = hi; i >= lo; --i) acc = acc * d + Real(e[i]);
        for (int i = 0; i < lo; ++i) acc *= d;
        return acc;
    }

    // omega(x) W(x) with omega(x) = prod_j (x - x_j), as (log|.|, sign)
    detail::LogSigned scaled_omega(double x, double log_w) const {
        detail::LogSigned r{log_w, 1.0};
        for (double xj : nodes_.x) {
            double g = x - xj;
            if (g == 0.0) return detail::LogSigned{-std::numeric_limits<double>::infinity(), 1.0};
            r.log_abs += std::log(std::fabs(g));
            if (g < 0.0) r.sign = -r.sign;
        }
        return r;
    }

    // l_k(x) * W(x)
    template <class Real, class Omega>
    Real lk_scaled(int k, const Real& d, const Omega& P, double log_w) const {
        if constexpr (std::is_same_v<Real, double>) {
            if (std::fabs(d) < 1e-8 * nodes_.gap[k]) {
                const auto& c = fc_.taylor_c[k];
                double acc = 0;
                for (int j = static_cast<int>(c.size()) - 1; j >= 0; --j) acc = acc * d + c[j];
                return acc * std::exp(log_w);
            }
            if (P.log_abs == -std::numeric_limits<double>::infinity()) return 0.0;
            return P.sign * sign_dw_[k] * std::exp(P.log_abs - log_dw_[k]) / d;
        } else {
            // extended precision has no cancellation to avoid: the product itself
            Real x = d + Real(nodes_.x[k]);
            Real r = exp(Real(log_w)) / dw_hp_[k];
            for (int j = 0; j < n(); ++j)
                if (j != k) r *= x - Real(nodes_.x[j]);
            return r;
        }
    }

    const RecurrenceTable* table_;
    NodeSet nodes_;
    FundamentalCoeffs fc_;
    std::vector<double> log_dw_;  ///< log |omega'(x_k)|
    std::vector<double> sign_dw_;
    std::vector<hp50> dw_hp_;
};

/// h_{s,k}(x); k is 0-based.
inline double eval_fundamental(const Interpolator& in, int s, int k, double x) {
    if (s > in.l()) throw argument_error("eval_fundamental: s exceeds l");
    return in.fundamental<double>(s, k, x);
}

/// L_n(l, nu, f; x); l = 0 gives L_n(nu, f; x).
inline double eval_L(const Interpolator& in, const SampledFunction& f, double x, int l) {
    return in.eval(in.sample(f, l), x);
}

inline Split eval_split(const Interpolator& in, const SampledFunction& f, double x, int l) {
    return in.split(in.sample(f, l), x);
}

/// j-th derivative by the j-th central difference with step h (error O(h^2)).
template <class Real, class F>
Real central_difference(F&& f, const Real& x, int j, const Real& h) {
    Real acc = 0;
    Real binom = 1;
    for (int i = 0; i <= j; ++i) {
        Real offset = (Real(j) / 2 - i) * h;
        Real term = binom * f(Real(x + offset));
        acc += (i % 2 ? -term : term);
        binom = binom * (j - i) / (i + 1);
    }
    Real hj = 1;
    for (int i = 0; i < j; ++i) hj *= h;
    return acc / hj;
}

/// Polynomial in Newton form a_0 + a_1 (x - z_0) + a_2 (x - z_0)(x - z_1) + ...
struct NewtonPolynomial {
    std::vector<double> z;
    std::vector<double> a;

    int degree() const { return static_cast<int>(a.size()) - 1; }

    template <class V>
    V eval(const V& x) const {
        V r = x * 0.0 + a.back();
        for (int j = degree() - 1; j >= 0; --j) r = r * (x - z[j]) + a[j];
        return r;
    }

    SampledFunction as_function(std::string name = "newton") const {
        SampledFunction f;
        f.name = std::move(name);
        f.eval = [p = *this](const jet_d& x) { return p.eval(x); };
        return f;
    }
};

/// Random polynomial of degree nu*n - 1 with coefficients uniform in [-1, 1]
/// in the Newton basis on the confluent nodes (each node repeated nu times,
/// taken alternately from the two ends of the node set).
inline NewtonPolynomial random_newton_polynomial(const NodeSet& nodes, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    NewtonPolynomial p;
    std::vector<double> order;
    for (int lo = 0, hi = nodes.n - 1; lo <= hi; ++lo, --hi) {
        order.push_back(nodes.x[lo]);
        if (hi != lo) order.push_back(nodes.x[hi]);
    }
    for (double x : order)
        for (int r = 0; r < nodes.nu; ++r) p.z.push_back(x);
    p.z.pop_back();
    p.a.resize(nodes.n * nodes.nu);
    for (auto& c : p.a) c = u(rng);
    return p;
}

/// Lemma-style coefficient bounds: ratios of |e_{s,i}| to the growth
/// expressions n / sqrt(a_{2n}^2 - x_k^2) (general) and the parity-split
/// expression for e_{0,i} (weights with the |x|^rho factor).
struct CoeffBoundReport {
    int n = 0;
    int nu = 0;
    std::vector<std::vector<double>> general;  ///< [s][i]: max_k |e_{s,i}| / (n / sqrt(a_{2n}^2 - x_k^2))^{i-s}
    std::vector<double> parity;                ///< [i]: max_k |e_{0,i}| / parity-split bound
    bool finite_positive = true;
};

inline CoeffBoundReport coeff_bound_diag(const Interpolator& in, const WeightSpec& spec, const ScaleTable& scales) {
    const int n = in.n(), nu = in.nu();
    const auto& x = in.nodes().x;
    const auto& e = in.coeffs().e;
    const double an = scales.a(n), a2n = scales.a(2.0 * n);
    const double tan_ = t_func(spec, an) / an;
    const double dn = scales.delta(n);
    CoeffBoundReport r;
    r.n = n;
    r.nu = nu;
    r.general.assign(nu, std::vector<double>(nu, 0.0));
    r.parity.assign(nu, 0.0);
    for (int k = 0; k < n; ++k) {
        const double base = n / std::sqrt(a2n * a2n - x[k] * x[k]);
        for (int s = 0; s < nu; ++s)
            for (int i = s; i < nu; ++i)
                r.general[s][i] = std::max(r.general[s][i], std::fabs(e[k][s][i]) / std::pow(base, i - s));
        const double ax = std::fabs(x[k]);
        for (int i = 0; i < nu; ++i) {
            double bound;
            if (x[k] == 0.0) bound = std::pow(n / an, i);
            else if (ax <= an * (1 + dn)) {
                int odd = i % 2;
                double qp = std::fabs(q_jet(spec.family, x[k], 1)[1]);
                bound = std::pow(tan_ + qp + 1.0 / ax, odd) * std::pow(n / (a2n - ax) + tan_, i - odd);
            } else continue;
            r.parity[i] = std::max(r.parity[i], std::fabs(e[k][0][i]) / bound);
        }
    }
    for (const auto& row : r.general)
        for (int i = 0; i < nu; ++i)
            if (!std::isfinite(row[i])) r.finite_positive = false;
    for (int s = 0; s < nu; ++s)
        if (!(r.general[s][s] > 0.0)) r.finite_positive = false;
    for (double v : r.parity)
        if (!std::isfinite(v)) r.finite_positive = false;
    return r;
}

}  // namespace hfl
