#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numbers>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <boost/multiprecision/cpp_bin_float.hpp>

#include "hfl/errors.hpp"
#include "hfl/mrs.hpp"
#include "hfl/quadrature.hpp"
#include "hfl/weights.hpp"

namespace hfl {

using hp50 = boost::multiprecision::cpp_bin_float_50;
using hp100 = boost::multiprecision::cpp_bin_float_100;

/// FNV-1a, used for cache checksums and config fingerprints.
inline std::uint64_t fnv1a64(std::string_view s) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

inline std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

/// Recurrence coefficients of the orthonormal polynomials for w_rho^2.
///
/// Monic form: pi_{k+1} = x pi_k - beta_k pi_{k-1} (no diagonal term, the
/// weight is even). beta[0] holds the total mass.
struct RecurrenceTable {
    std::string weight_key;
    int N = 0;
    int digits = 0;
    double support = 0.0;  ///< half-length of the discretized support
    int panels = 0;        ///< uniform panels at the accepted resolution
    std::vector<hp100> beta;
    std::vector<double> beta_d;
    std::vector<double> b;  ///< b[k] = sqrt(beta_k) = gamma_{k-1} / gamma_k for k >= 1

    void finalize() {
        beta_d.resize(beta.size());
        b.resize(beta.size());
        for (std::size_t k = 0; k < beta.size(); ++k) {
            beta_d[k] = beta[k].convert_to<double>();
            b[k] = sqrt(beta[k]).convert_to<double>();
        }
    }

    /// sqrt(beta_k) at a given working precision.
    template <class Real>
    std::vector<Real> sqrt_beta() const {
        if constexpr (std::is_same_v<Real, double>) {
            return b;
        } else {
            std::vector<Real> r(beta.size());
            for (std::size_t k = 0; k < beta.size(); ++k) r[k] = Real(sqrt(beta[k]));
            return r;
        }
    }
};

namespace detail {

inline int stability_horizon(int digits) { return digits <= 50 ? 128 : 256; }

// Discretized measure on [0, A]; the mirror points -x carry the same mass.
template <class Real>
struct HalfMeasure {
    std::vector<Real> x;
    std::vector<Real> w;
};

template <class Real>
HalfMeasure<Real> discretize(const WeightSpec& spec, double support, int panels, int q, int grading) {
    const auto rule = gauss_legendre<Real>(q);
    HalfMeasure<Real> m;
    const Real A(support);
    const Real h = A / panels;
    const Real two_rho(2.0 * spec.rho);
    auto add_panel = [&](const Real& lo, const Real& hi) {
        Real c = (lo + hi) / 2, r = (hi - lo) / 2;
        for (int i = 0; i < q; ++i) {
            Real xi = c + r * rule.x[i];
            Real wq = r * rule.w[i];
            Real qv = q_value<Real>(spec.family, xi);
            Real dens = exp(-2 * qv);
            if (spec.rho != 0.0) dens *= pow(xi, two_rho);
            m.x.push_back(xi);
            m.w.push_back(wq * dens);
        }
    };
    int first = 0;
    if (grading > 0) {
        Real lo = 0, hi = ldexp(h, -grading);
        add_panel(lo, hi);
        for (int k = grading; k >= 1; --k) {
            lo = hi;
            hi = ldexp(h, -(k - 1));
            add_panel(lo, hi);
        }
        first = 1;
    }
    for (int p = first; p < panels; ++p) add_panel(h * p, p + 1 == panels ? A : h * (p + 1));
    return m;
}

// Orthonormal Stieltjes sweep on a symmetric discrete measure; returns beta_0..beta_N.
template <class Real>
std::vector<Real> stieltjes_sweep(const HalfMeasure<Real>& m, int N) {
    const std::size_t M = m.x.size();
    std::vector<Real> beta(N + 1);
    Real mass = 0;
    for (const auto& w : m.w) mass += w;
    mass *= 2;
    beta[0] = mass;
    std::vector<Real> prev(M, Real(0)), cur(M), next(M);
    Real b_prev = 0;
    Real q0 = 1 / sqrt(mass);
    std::fill(cur.begin(), cur.end(), q0);
    for (int k = 0; k < N; ++k) {
        Real norm2 = 0;
        for (std::size_t i = 0; i < M; ++i) {
            next[i] = m.x[i] * cur[i] - b_prev * prev[i];
            norm2 += m.w[i] * next[i] * next[i];
        }
        norm2 *= 2;
        if (!(norm2 > 0)) throw precision_error("stieltjes: lost positivity at k = " + std::to_string(k + 1));
        beta[k + 1] = norm2;
        Real bk = sqrt(norm2);
        for (std::size_t i = 0; i < M; ++i) next[i] /= bk;
        std::swap(prev, cur);
        std::swap(cur, next);
        b_prev = bk;
    }
    return beta;
}

// Analytic bound on the mass of w_rho^2 beyond A, using convexity of Q:
// Q(x) >= Q(A) + Q'(A)(x - A) and x^{2 rho} <= A^{2 rho} e^{2 rho (x - A)/A}.
inline double tail_mass_bound(const WeightSpec& spec, double A) {
    jet_d q;
    try {
        q = q_jet(spec.family, A, 1);
    } catch (const overflow_error&) {
        return 0.0;
    }
    double rate = 2.0 * q[1] - 2.0 * spec.rho / A;
    if (!(rate > 0.0)) return std::numeric_limits<double>::infinity();
    return std::exp(-2.0 * q[0] + 2.0 * spec.rho * std::log(A)) / rate;
}

// Smallest A (on a 5% geometric ladder) whose tail bound is below rel * mass_estimate.
inline double tail_cutoff(const WeightSpec& spec, double rel) {
    // crude mass estimate from a coarse double-precision rule
    double mass = 0.0;
    for (int i = 0; i < 2000; ++i) {
        double x = (i + 0.5) * 0.005;
        mass += 0.005 * std::exp(2 * log_w_rho(spec, x));
    }
    mass = std::max(mass * 2.0, 1e-300);
    double A = 0.5;
    while (tail_mass_bound(spec, A) > rel * mass) {
        A *= 1.05;
        if (A > 1e6) throw overflow_error("tail_cutoff: weight does not decay fast enough");
    }
    return A;
}

template <class Real>
std::vector<hp100> stieltjes_at(const WeightSpec& spec, int N, double support, int& panels_out) {
    const bool smooth = spec.family.smooth_at_zero() && std::floor(2 * spec.rho) == 2 * spec.rho;
    const int q = 32;
    int panels = std::max(16, N / 4);
    int grading = smooth ? 0 : 40;
    const double target = 1e-24;
    std::vector<Real> prev = stieltjes_sweep(discretize<Real>(spec, support, panels, q, grading), N);
    double worst = 0.0;
    for (int level = 0; level < 6; ++level) {
        panels *= 2;
        if (!smooth) grading += 20;
        std::vector<Real> cur = stieltjes_sweep(discretize<Real>(spec, support, panels, q, grading), N);
        worst = 0.0;
        for (int k = 0; k <= N; ++k) {
            using std::abs;
            Real rel = abs(cur[k] - prev[k]) / cur[k];
            worst = std::max(worst, rel.template convert_to<double>());
        }
        prev = std::move(cur);
        if (worst < target) {
            panels_out = panels;
            std::vector<hp100> out(N + 1);
            for (int k = 0; k <= N; ++k) out[k] = hp100(prev[k]);
            return out;
        }
    }
    throw precision_error("stieltjes: discretization did not settle (worst relative change " + std::to_string(worst) +
                          "); increase digits");
}

}  // namespace detail

/// Recurrence coefficients beta_0..beta_N for w_rho^2 by the discretized
/// Stieltjes procedure at >= `digits` significant digits. The measure is
/// discretized on [-A, A] with A = max(a_{4N}, tail cutoff), and the
/// resolution is doubled until every beta_k settles.
inline RecurrenceTable stieltjes_recurrence(const WeightSpec& spec, int N, int digits, const ScaleTable& scales) {
    if (N < 1) throw argument_error("stieltjes_recurrence: N must be >= 1");
    if (digits < 30) throw argument_error("stieltjes_recurrence: digits must be >= 30");
    if (digits > 100) throw precision_error("stieltjes_recurrence: at most 100 digits are supported");
    int horizon = detail::stability_horizon(digits);
    if (N > horizon)
        throw stability_error("stieltjes_recurrence: N = " + std::to_string(N) + " beyond the stability horizon at " +
                                  std::to_string(digits) + " digits",
                              horizon);
    RecurrenceTable t;
    t.weight_key = spec.key();
    t.N = N;
    t.digits = digits;
    t.support = std::max(scales.a(4.0 * N), detail::tail_cutoff(spec, 1e-30));
    if (digits <= 50) t.beta = detail::stieltjes_at<hp50>(spec, N, t.support, t.panels);
    else t.beta = detail::stieltjes_at<hp100>(spec, N, t.support, t.panels);
    t.finalize();
    return t;
}

/// p_n and its derivatives up to max_order, stored as values * 2^scale_exp.
template <class Real>
struct ScaledDerivatives {
    std::vector<Real> v;
    int scale_exp = 0;
};

/// Differentiated orthonormal three-term recurrence
///     b_{k+1} p_{k+1}^{(j)} = x p_k^{(j)} + j p_k^{(j-1)} - b_k p_{k-1}^{(j)},
/// with periodic power-of-two rescaling tracked in scale_exp.
template <class Real>
ScaledDerivatives<Real> pn_derivatives_scaled(std::span<const Real> b, int n, const Real& x, int max_order) {
    using std::abs;
    const int J = max_order + 1;
    std::vector<Real> prev(J, Real(0)), cur(J, Real(0)), next(J);
    cur[0] = 1 / b[0];
    int e = 0;
    constexpr int chunk = 256;
    const Real big = ldexp(Real(1), chunk);
    for (int k = 0; k < n; ++k) {
        Real bn = b[k + 1];
        Real bk = k == 0 ? Real(0) : b[k];
        for (int j = 0; j < J; ++j) {
            Real s = x * cur[j] - bk * prev[j];
            if (j > 0) s += j * cur[j - 1];
            next[j] = s / bn;
        }
        std::swap(prev, cur);
        std::swap(cur, next);
        Real mx = 0;
        for (int j = 0; j < J; ++j) mx = std::max<Real>(mx, abs(cur[j]));
        if (mx > big) {
            for (int j = 0; j < J; ++j) {
                cur[j] = ldexp(cur[j], -chunk);
                prev[j] = ldexp(prev[j], -chunk);
            }
            e += chunk;
        }
    }
    return {cur, e};
}

/// p_n^{(j)}(x), j = 0..max_order, in double.
inline std::vector<double> eval_pn(const RecurrenceTable& t, int n, double x, int max_order) {
    if (n < 0 || n > t.N) throw argument_error("eval_pn: n = " + std::to_string(n) + " outside the table");
    if (max_order < 0) throw argument_error("eval_pn: max_order must be >= 0");
    auto s = pn_derivatives_scaled<double>(std::span<const double>(t.b), n, x, max_order);
    for (auto& v : s.v) {
        v = std::ldexp(v, s.scale_exp);
        if (!std::isfinite(v)) throw overflow_error("eval_pn: p_n overflows at x = " + std::to_string(x));
    }
    return s.v;
}

/// p_n(x) * exp(log_weight), combined in log space.
inline double pn_weighted(const RecurrenceTable& t, int n, double x, double log_weight) {
    auto s = pn_derivatives_scaled<double>(std::span<const double>(t.b), n, x, 0);
    double v = s.v[0];
    if (v == 0.0 || log_weight == -std::numeric_limits<double>::infinity()) return 0.0;
    double lg = std::log(std::fabs(v)) + s.scale_exp * std::numbers::ln2 + log_weight;
    return std::copysign(std::exp(lg), v);
}

/// Zeros of p_n in descending order with derivative data at each node.
struct NodeSet {
    int n = 0;
    int nu = 0;
    std::vector<double> x;                   ///< x_{1,n} > ... > x_{n,n}
    std::vector<std::vector<double>> deriv;  ///< deriv[k][j] = p_n^{(j)}(x_k), j = 0..nu
    std::vector<double> varphi;              ///< phi_n(x_k)
    std::vector<double> gap;                 ///< distance to the nearest neighbor
    double x0 = 0.0;                         ///< x_{1,n} + phi_n(x_{1,n}); diagnostic only
    int rejected_polish = 0;                 ///< Newton steps refused by the ordering guard

    double pn_prime(int k) const { return deriv[k][1]; }
};

/// Zeros of p_n: Jacobi-matrix eigenvalues polished by one guarded Newton
/// step in extended precision. The middle zero of odd n is pinned to 0.
inline NodeSet zeros(const RecurrenceTable& t, int n, int nu, const ScaleTable& scales) {
    if (n < 1 || n > t.N) throw argument_error("zeros: n = " + std::to_string(n) + " outside the table");
    if (nu < 1) throw argument_error("zeros: nu must be >= 1");
    NodeSet ns;
    ns.n = n;
    ns.nu = nu;
    std::vector<double> ev(n, 0.0);
    if (n > 1) {
        Eigen::VectorXd diag = Eigen::VectorXd::Zero(n);
        Eigen::VectorXd sub(n - 1);
        for (int k = 0; k < n - 1; ++k) sub[k] = t.b[k + 1];
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es;
        es.computeFromTridiagonal(diag, sub, Eigen::EigenvaluesOnly);
        if (es.info() != Eigen::Success) throw convergence_error("zeros: tridiagonal eigensolver failed", 0.0);
        for (int k = 0; k < n; ++k) ev[k] = es.eigenvalues()[n - 1 - k];
    }
    const auto bh = t.sqrt_beta<hp50>();
    std::span<const hp50> bspan(bh);
    std::vector<hp50> xs(n);
    for (int k = 0; k < n; ++k) {
        hp50 z = ev[k];
        double left = k + 1 < n ? ev[k] - ev[k + 1] : std::numeric_limits<double>::infinity();
        double right = k > 0 ? ev[k - 1] - ev[k] : std::numeric_limits<double>::infinity();
        double half_gap = 0.5 * std::min(left, right);
        auto d = pn_derivatives_scaled<hp50>(bspan, n, z, 1);
        if (d.v[1] != 0) {
            hp50 step = d.v[0] / d.v[1];
            if (abs(step).convert_to<double>() <= half_gap) z -= step;
            else ++ns.rejected_polish;
        }
        xs[k] = z;
    }
    // exact symmetry of an even weight
    for (int k = 0; k < n / 2; ++k) {
        hp50 s = (xs[k] - xs[n - 1 - k]) / 2;
        xs[k] = s;
        xs[n - 1 - k] = -s;
    }
    if (n % 2 == 1) xs[n / 2] = 0;
    ns.x.resize(n);
    ns.deriv.resize(n);
    for (int k = 0; k < n; ++k) {
        ns.x[k] = xs[k].convert_to<double>();
        auto d = pn_derivatives_scaled<hp50>(bspan, n, hp50(ns.x[k]), nu);
        ns.deriv[k].resize(nu + 1);
        for (int j = 0; j <= nu; ++j) {
            double v = ldexp(d.v[j], d.scale_exp).convert_to<double>();
            if (!std::isfinite(v)) throw overflow_error("zeros: derivative data overflow at node " + std::to_string(k + 1));
            ns.deriv[k][j] = v;
        }
        if (ns.deriv[k][1] == 0.0) throw convergence_error("zeros: p_n' vanishes at a node", 0.0);
    }
    ns.gap.resize(n);
    for (int k = 0; k < n; ++k) {
        double g = std::numeric_limits<double>::infinity();
        if (k > 0) g = std::min(g, ns.x[k - 1] - ns.x[k]);
        if (k + 1 < n) g = std::min(g, ns.x[k] - ns.x[k + 1]);
        ns.gap[k] = g;
    }
    ns.varphi.resize(n);
    for (int k = 0; k < n; ++k) ns.varphi[k] = scales.phi(n, ns.x[k]);
    ns.x0 = ns.x[0] + ns.varphi[0];
    return ns;
}

struct OrthonormalityResidual {
    double residual = 0.0;
    double error_estimate = 0.0;
    bool converged = true;
};

/// |int p_m p_n w_rho^2 - delta_{mn}| by composite Gauss-Legendre in double
/// (40 nodes per panel, independent of the discretization used to build the
/// table). The error estimate is the change under doubling of the panel count.
inline OrthonormalityResidual orthonormality_residual(const RecurrenceTable& t, const WeightSpec& spec, int m, int n,
                                                      const ScaleTable& scales) {
    if (m < 0 || n < 0 || m > t.N || n > t.N) throw argument_error("orthonormality_residual: degree outside the table");
    const int top = std::max({m, n, 1});
    const double A = std::max(scales.a(4.0 * top), detail::tail_cutoff(spec, 1e-18));
    const bool graded = !(spec.family.smooth_at_zero() && std::floor(2 * spec.rho) == 2 * spec.rho);
    const auto& rule = gauss_legendre_cached(40);
    auto f = [&](double x) {
        double lw = log_w_rho(spec, x);
        return pn_weighted(t, m, x, lw) * pn_weighted(t, n, x, lw);
    };
    auto integrate = [&](int panels) {
        std::vector<double> parts;
        for (double sign : {-1.0, 1.0}) {
            auto g = [&](double u) { return f(sign * u); };
            double h = A / panels;
            int first = 0;
            if (graded) {
                // geometric panels toward 0 inside the first uniform panel
                double hi = h;
                for (int k = 0; k < 40; ++k) {
                    parts.push_back(gauss_panel(g, hi / 2, hi, rule));
                    hi /= 2;
                }
                parts.push_back(gauss_panel(g, 0.0, hi, rule));
                first = 1;
            }
            for (int p = first; p < panels; ++p) parts.push_back(gauss_panel(g, h * p, h * (p + 1), rule));
        }
        return pairwise_sum(parts.data(), parts.size());
    };
    const int base = std::max(8, top / 2);
    double coarse = integrate(base);
    double fine = integrate(2 * base);
    OrthonormalityResidual r;
    r.residual = std::fabs(fine - (m == n ? 1.0 : 0.0));
    r.error_estimate = std::fabs(fine - coarse);
    r.converged = r.error_estimate <= 1e-11;
    return r;
}

/// Versioned text cache of recurrence tables, validated by checksum.
class RecurrenceCache {
public:
    static constexpr const char* format_tag = "hflab-recurrence 1";

    explicit RecurrenceCache(std::filesystem::path dir) : dir_(std::move(dir)) {}

    /// Directory from HFLAB_CACHE_DIR if set, else `fallback`.
    static std::filesystem::path resolve_dir(const std::filesystem::path& fallback) {
        if (const char* env = std::getenv("HFLAB_CACHE_DIR"); env && *env) return env;
        return fallback;
    }

    std::filesystem::path path_for(const std::string& weight_key, int N, int digits) const {
        std::string id = weight_key + "|N=" + std::to_string(N) + "|digits=" + std::to_string(digits);
        return dir_ / ("rec-" + hex64(fnv1a64(id)) + ".txt");
    }

    static std::string serialize(const RecurrenceTable& t) {
        std::ostringstream body;
        body << format_tag << '\n';
        body << "key " << t.weight_key << '\n';
        body << "N " << t.N << '\n';
        body << "digits " << t.digits << '\n';
        body << "support " << std::setprecision(17) << t.support << '\n';
        body << "panels " << t.panels << '\n';
        for (int k = 0; k <= t.N; ++k)
            body << "beta " << k << ' ' << t.beta[k].str(std::max(t.digits, 40), std::ios_base::scientific) << '\n';
        std::string s = body.str();
        return s + "checksum " + hex64(fnv1a64(s)) + '\n';
    }

    /// Parses a serialized table; throws precision_error on checksum mismatch.
    static RecurrenceTable parse(const std::string& text) {
        auto pos = text.rfind("checksum ");
        if (pos == std::string::npos) throw precision_error("recurrence cache: missing checksum");
        std::string body = text.substr(0, pos);
        std::string sum = text.substr(pos + 9);
        while (!sum.empty() && (sum.back() == '\n' || sum.back() == '\r')) sum.pop_back();
        if (sum != hex64(fnv1a64(body))) throw precision_error("recurrence cache: checksum mismatch");
        std::istringstream in(body);
        std::string line;
        std::getline(in, line);
        if (line != format_tag) throw precision_error("recurrence cache: unknown format '" + line + "'");
        RecurrenceTable t;
        while (std::getline(in, line)) {
            std::istringstream ls(line);
            std::string tag;
            ls >> tag;
            if (tag == "key") t.weight_key = line.substr(4);
            else if (tag == "N") ls >> t.N;
            else if (tag == "digits") ls >> t.digits;
            else if (tag == "support") ls >> t.support;
            else if (tag == "panels") ls >> t.panels;
            else if (tag == "beta") {
                int k;
                std::string v;
                ls >> k >> v;
                if (k != static_cast<int>(t.beta.size())) throw precision_error("recurrence cache: beta out of order");
                t.beta.emplace_back(v);
            }
        }
        if (static_cast<int>(t.beta.size()) != t.N + 1) throw precision_error("recurrence cache: truncated table");
        t.finalize();
        return t;
    }

    std::optional<RecurrenceTable> load(const std::string& weight_key, int N, int digits) const {
        auto p = path_for(weight_key, N, digits);
        std::ifstream f(p, std::ios::binary);
        if (!f) return std::nullopt;
        std::stringstream ss;
        ss << f.rdbuf();
        RecurrenceTable t = parse(ss.str());
        if (t.weight_key != weight_key || t.N != N || t.digits != digits)
            throw precision_error("recurrence cache: key mismatch in " + p.string());
        return t;
    }

    void store(const RecurrenceTable& t) const {
        std::filesystem::create_directories(dir_);
        auto p = path_for(t.weight_key, t.N, t.digits);
        auto tmp = p;
        tmp += ".tmp";
        {
            std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
            f << serialize(t);
        }
        std::filesystem::rename(tmp, p);
    }

    /// Cached table if present and valid, otherwise build and store it.
    /// With require_cached, a missing or invalid entry is an error.
    RecurrenceTable get(const WeightSpec& spec, int N, int digits, const ScaleTable& scales, bool require_cached = false) const {
        try {
            if (auto t = load(spec.key(), N, digits)) return *t;
        } catch (const precision_error&) {
            if (require_cached) throw;
        }
        if (require_cached)
            throw precision_error("recurrence cache: no cached table for " + spec.key() + " N=" + std::to_string(N));
        RecurrenceTable t = stieltjes_recurrence(spec, N, digits, scales);
        store(t);
        return t;
    }

    const std::filesystem::path& dir() const noexcept { return dir_; }

private:
    std::filesystem::path dir_;
};

}  // namespace hfl
