#pragma once

#include <array>
#include <cassert>
#include <cmath>
#include <cstddef>

#include <boost/math/special_functions/expm1.hpp>
#include <boost/math/special_functions/log1p.hpp>

namespace hfl {

namespace detail {

template <class T>
T expm1_(const T& x) {
    if constexpr (std::is_same_v<T, double>) return std::expm1(x);
    else return boost::math::expm1(x);
}

template <class T>
T log1p_(const T& x) {
    if constexpr (std::is_same_v<T, double>) return std::log1p(x);
    else return boost::math::log1p(x);
}

}  // namespace detail

/// Truncated Taylor series about a point: c[j] = f^{(j)}(x0) / j!.
///
/// Arithmetic is exact up to roundoff in the coefficients, so a function
/// written once against Jet yields all of its derivatives at a point.
template <class T, std::size_t MaxOrder = 16>
class Jet {
public:
    static constexpr std::size_t capacity = MaxOrder + 1;

    Jet() = default;
    Jet(T value, std::size_t order) : order_(order) {
        assert(order <= MaxOrder);
        c_.fill(T(0));
        c_[0] = value;
    }

    /// The identity function x about x0.
    static Jet variable(T x0, std::size_t order) {
        Jet v(x0, order);
        if (order >= 1) v.c_[1] = T(1);
        return v;
    }

    std::size_t order() const noexcept { return order_; }
    const T& operator[](std::size_t j) const { return c_[j]; }
    T& operator[](std::size_t j) { return c_[j]; }

    /// j-th derivative at the expansion point.
    T derivative(std::size_t j) const {
        T f(1);
        for (std::size_t i = 2; i <= j; ++i) f *= T(static_cast<double>(i));
        return c_[j] * f;
    }

    Jet& operator+=(const Jet& o) {
        for (std::size_t j = 0; j <= order_; ++j) c_[j] += o.c_[j];
        return *this;
    }
    Jet& operator-=(const Jet& o) {
        for (std::size_t j = 0; j <= order_; ++j) c_[j] -= o.c_[j];
        return *this;
    }
    Jet& operator*=(const T& s) {
        for (std::size_t j = 0; j <= order_; ++j) c_[j] *= s;
        return *this;
    }
    Jet& operator+=(const T& s) {
        c_[0] += s;
        return *this;
    }

    friend Jet operator+(Jet a, const Jet& b) { return a += b; }
    friend Jet operator-(Jet a, const Jet& b) { return a -= b; }
    friend Jet operator+(Jet a, const T& s) { return a += s; }
    friend Jet operator-(Jet a, const T& s) { return a += T(-s); }
    friend Jet operator*(Jet a, const T& s) { return a *= s; }
    friend Jet operator*(const T& s, Jet a) { return a *= s; }
    friend Jet operator-(Jet a) { return a *= T(-1); }

    friend Jet operator*(const Jet& a, const Jet& b) {
        Jet r(T(0), a.order_);
        for (std::size_t k = 0; k <= a.order_; ++k) {
            T s(0);
            for (std::size_t i = 0; i <= k; ++i) s += a.c_[i] * b.c_[k - i];
            r.c_[k] = s;
        }
        return r;
    }

    friend Jet operator/(const Jet& a, const Jet& b) {
        Jet r(T(0), a.order_);
        for (std::size_t k = 0; k <= a.order_; ++k) {
            T s = a.c_[k];
            for (std::size_t i = 1; i <= k; ++i) s -= b.c_[i] * r.c_[k - i];
            r.c_[k] = s / b.c_[0];
        }
        return r;
    }

    friend Jet operator/(const T& s, const Jet& b) { return Jet(s, b.order_) / b; }

    friend Jet exp(const Jet& a) {
        using std::exp;
        Jet r(T(0), a.order_);
        r.c_[0] = exp(a.c_[0]);
        exp_tail(a, r, r.c_[0]);
        return r;
    }

    /// exp(a) - 1 with an accurate constant term near a = 0.
    friend Jet expm1(const Jet& a) {
        using std::exp;
        Jet r(T(0), a.order_);
        exp_tail(a, r, exp(a.c_[0]));
        r.c_[0] = detail::expm1_(a.c_[0]);
        return r;
    }

    friend Jet log(const Jet& a) {
        using std::log;
        Jet r(T(0), a.order_);
        r.c_[0] = log(a.c_[0]);
        log_tail(a, r, a.c_[0]);
        return r;
    }

    /// log(1 + a) with an accurate constant term near a = 0.
    friend Jet log1p(const Jet& a) {
        Jet r(T(0), a.order_);
        r.c_[0] = detail::log1p_(a.c_[0]);
        log_tail(a, r, T(1) + a.c_[0]);
        return r;
    }

    /// a^p for a positive constant term.
    friend Jet pow(const Jet& a, const T& p) {
        using std::pow;
        Jet r(T(0), a.order_);
        r.c_[0] = pow(a.c_[0], p);
        for (std::size_t k = 1; k <= a.order_; ++k) {
            T s(0);
            for (std::size_t j = 1; j <= k; ++j)
                s += ((p + T(1)) * T(double(j)) - T(double(k))) * a.c_[j] * r.c_[k - j];
            r.c_[k] = s / (T(double(k)) * a.c_[0]);
        }
        return r;
    }

    friend Jet ipow(const Jet& a, unsigned e) {
        Jet r(T(1), a.order_);
        Jet base = a;
        while (e) {
            if (e & 1u) r = r * base;
            e >>= 1u;
            if (e) base = base * base;
        }
        return r;
    }

    friend Jet sin(const Jet& a) { return sincos(a).first; }
    friend Jet cos(const Jet& a) { return sincos(a).second; }

    friend std::pair<Jet, Jet> sincos(const Jet& a) {
        using std::cos;
        using std::sin;
        Jet s(T(0), a.order_), c(T(0), a.order_);
        s.c_[0] = sin(a.c_[0]);
        c.c_[0] = cos(a.c_[0]);
        for (std::size_t k = 1; k <= a.order_; ++k) {
            T ss(0), cc(0);
            for (std::size_t j = 1; j <= k; ++j) {
                ss += T(double(j)) * a.c_[j] * c.c_[k - j];
                cc += T(double(j)) * a.c_[j] * s.c_[k - j];
            }
            s.c_[k] = ss / T(double(k));
            c.c_[k] = -cc / T(double(k));
        }
        return {s, c};
    }

private:
    // r_k for exp-type series given the constant term e0 = exp(a0).
    static void exp_tail(const Jet& a, Jet& r, const T& e0) {
        for (std::size_t k = 1; k <= a.order_; ++k) {
            T s(0);
            for (std::size_t j = 1; j <= k; ++j) s += T(double(j)) * a.c_[j] * (k == j ? e0 : r.c_[k - j]);
            r.c_[k] = s / T(double(k));
        }
    }

    // r_k for log of a series whose constant term is b0 and higher terms a_k.
    static void log_tail(const Jet& a, Jet& r, const T& b0) {
        for (std::size_t k = 1; k <= a.order_; ++k) {
            T s = a.c_[k];
            for (std::size_t j = 1; j < k; ++j) s -= T(double(j)) * r.c_[j] * a.c_[k - j] / T(double(k));
            r.c_[k] = s / b0;
        }
    }

    std::array<T, capacity> c_{};
    std::size_t order_ = 0;
};

}  // namespace hfl
