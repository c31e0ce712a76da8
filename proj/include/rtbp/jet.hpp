#pragma once
#include <array>
#include <cmath>
#include <stdexcept>

namespace rtbp {

/// Truncated power series in one variable with coefficients of type Real.
/// All jets on a thread share one truncation degree (JetDegree), so that the
/// integrator and potential kernels can use them as a drop-in scalar type.
template <class Real, int Cap = 24>
class Jet {
public:
    static constexpr int capacity = Cap;
    static int& degree() {
        static thread_local int d = 0;
        return d;
    }

    Jet() = default;
    Jet(double v) : scalar_(true) { c_[0] = Real(v); }
    template <class R, class = std::enable_if_t<std::is_constructible_v<Real, R> && !std::is_arithmetic_v<R>>>
    Jet(const R& v) : scalar_(true) { c_[0] = Real(v); }

    /// a + b t
    static Jet linear(const Real& a, const Real& b) {
        Jet j(a);
        if (degree() >= 1) j.c_[1] = b;
        j.scalar_ = false;
        return j;
    }

    const Real& operator[](int i) const { return c_[i]; }
    Real& operator[](int i) {
        scalar_ = false;
        return c_[i];
    }
    bool is_scalar() const { return scalar_; }

    /// evaluate the polynomial at t
    Real operator()(const Real& t) const {
        Real acc = c_[degree()];
        for (int i = degree() - 1; i >= 0; --i) acc = acc * t + c_[i];
        return acc;
    }

    Jet operator-() const {
        Jet r;
        r.scalar_ = scalar_;
        for (int i = 0; i <= top(); ++i) r.c_[i] = -c_[i];
        return r;
    }
    Jet& operator+=(const Jet& b) {
        for (int i = 0; i <= b.top(); ++i) c_[i] += b.c_[i];
        scalar_ = scalar_ && b.scalar_;
        return *this;
    }
    Jet& operator-=(const Jet& b) {
        for (int i = 0; i <= b.top(); ++i) c_[i] -= b.c_[i];
        scalar_ = scalar_ && b.scalar_;
        return *this;
    }
    Jet& operator*=(const Jet& b) { return *this = *this * b; }
    Jet& operator/=(const Jet& b) { return *this = *this / b; }

    friend Jet operator+(Jet a, const Jet& b) { return a += b; }
    friend Jet operator-(Jet a, const Jet& b) { return a -= b; }

    friend Jet operator*(const Jet& a, const Jet& b) {
        const int n = degree();
        Jet r;
        if (a.scalar_) {
            r.scalar_ = b.scalar_;
            for (int i = 0; i <= b.top(); ++i) r.c_[i] = a.c_[0] * b.c_[i];
            return r;
        }
        if (b.scalar_) {
            r.scalar_ = false;
            for (int i = 0; i <= n; ++i) r.c_[i] = a.c_[i] * b.c_[0];
            return r;
        }
        r.scalar_ = false;
        for (int k = 0; k <= n; ++k) {
            Real acc = 0;
            for (int i = 0; i <= k; ++i) acc += a.c_[i] * b.c_[k - i];
            r.c_[k] = acc;
        }
        return r;
    }

    friend Jet operator/(const Jet& a, const Jet& b) {
        if (b.scalar_) {
            Jet r;
            r.scalar_ = a.scalar_;
            for (int i = 0; i <= a.top(); ++i) r.c_[i] = a.c_[i] / b.c_[0];
            return r;
        }
        if (b.c_[0] == 0) throw std::domain_error("jet division by a series without constant term");
        const int n = degree();
        Jet r;
        r.scalar_ = false;
        for (int k = 0; k <= n; ++k) {
            Real acc = a.c_[k];
            for (int i = 1; i <= k; ++i) acc -= b.c_[i] * r.c_[k - i];
            r.c_[k] = acc / b.c_[0];
        }
        return r;
    }

    friend Jet sqrt(const Jet& a) {
        using std::sqrt;
        Jet r;
        r.c_[0] = sqrt(a.c_[0]);
        r.scalar_ = a.scalar_;
        if (a.scalar_) return r;
        if (r.c_[0] == 0) throw std::domain_error("jet square root at zero");
        const int n = degree();
        for (int k = 1; k <= n; ++k) {
            Real acc = a.c_[k];
            for (int i = 1; i < k; ++i) acc -= r.c_[i] * r.c_[k - i];
            r.c_[k] = acc / (2 * r.c_[0]);
        }
        return r;
    }

    friend void sincos(const Jet& a, Jet& s, Jet& c) {
        using std::cos; using std::sin;
        s = Jet();
        c = Jet();
        s.c_[0] = sin(a.c_[0]);
        c.c_[0] = cos(a.c_[0]);
        s.scalar_ = c.scalar_ = a.scalar_;
        if (a.scalar_) return;
        const int n = degree();
        for (int k = 1; k <= n; ++k) {
            Real as = 0, ac = 0;
            for (int j = 1; j <= k; ++j) {
                Real ja = Real(j) * a.c_[j];
                as += ja * c.c_[k - j];
                ac += ja * s.c_[k - j];
            }
            s.c_[k] = as / k;
            c.c_[k] = -ac / k;
        }
    }
    friend Jet sin(const Jet& a) {
        Jet s, c;
        sincos(a, s, c);
        return s;
    }
    friend Jet cos(const Jet& a) {
        Jet s, c;
        sincos(a, s, c);
        return c;
    }

private:
    int top() const { return scalar_ ? 0 : degree(); }
    std::array<Real, Cap> c_{};
    bool scalar_ = true;
};

/// Sets the truncation degree of Jet<Real> on this thread for a scope.
template <class Real, int Cap = 24>
class JetDegree {
public:
    explicit JetDegree(int d) : saved_(Jet<Real, Cap>::degree()) {
        if (d < 0 || d >= Cap) throw std::invalid_argument("jet degree outside capacity");
        Jet<Real, Cap>::degree() = d;
    }
    ~JetDegree() { Jet<Real, Cap>::degree() = saved_; }
    JetDegree(const JetDegree&) = delete;
    JetDegree& operator=(const JetDegree&) = delete;

private:
    int saved_;
};

}  // namespace rtbp
