#pragma once
#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>

#include "rtbp/dop853_tableau.hpp"
#include "rtbp/errors.hpp"

namespace rtbp {

/// One step of the Dormand-Prince 8(5,3) pair.  T is the state element type
/// (double, multiprecision, or a truncated power series); Real the time type.
template <class T, std::size_t N, class Real>
struct Dop853Work {
    using State = std::array<T, N>;
    std::array<State, dop853::kStagesExt> K;
};

namespace detail {
template <class T, class Real>
inline T coef(long double c) {
    return T(Real(c));
}
}  // namespace detail

/// Computes the 8th-order solution y1 at t + h given f0 = f(t, y0); fills
/// K[0..12] (K[12] = f(t+h, y1)).
template <class T, std::size_t N, class Real, class F>
void dop853_step(F&& f, const Real& t, const std::array<T, N>& y0, const std::array<T, N>& f0,
                 const Real& h, Dop853Work<T, N, Real>& w, std::array<T, N>& y1) {
    using namespace dop853;
    w.K[0] = f0;
    std::array<T, N> tmp;
    for (int s = 1; s < kStages; ++s) {
        for (std::size_t i = 0; i < N; ++i) {
            T acc = T(Real(0)) * y0[i];
            for (int j = 0; j < s; ++j)
                if (A[s][j] != 0.0L) acc += detail::coef<T, Real>(A[s][j]) * w.K[j][i];
            tmp[i] = y0[i] + T(h) * acc;
        }
        w.K[s] = f(t + Real(C[s]) * h, tmp);
    }
    for (std::size_t i = 0; i < N; ++i) {
        T acc = T(Real(0)) * y0[i];
        for (int j = 0; j < kStages; ++j)
            if (A[kStages][j] != 0.0L) acc += detail::coef<T, Real>(A[kStages][j]) * w.K[j][i];
        y1[i] = y0[i] + T(h) * acc;
    }
    w.K[kStages] = f(t + h, y1);
}

/// Dense output polynomial on one accepted step.
template <class T, std::size_t N, class Real>
struct Dop853Dense {
    Real t0{}, t1{};
    std::array<T, N> y0{};
    std::array<std::array<T, N>, 7> Fc{};

    std::array<T, N> operator()(const Real& t) const {
        Real h = t1 - t0;
        Real x = (t - t0) / h;
        std::array<T, N> y;
        for (std::size_t i = 0; i < N; ++i) {
            T acc = T(Real(0)) * y0[i];
            for (int k = 6; k >= 0; --k) {
                acc += Fc[k][i];
                acc = ((6 - k) % 2 == 0) ? acc * T(x) : acc * T(Real(1) - x);
            }
            y[i] = y0[i] + acc;
        }
        return y;
    }
};

template <class T, std::size_t N, class Real, class F>
Dop853Dense<T, N, Real> dop853_dense(F&& f, const Real& t, const Real& h, const std::array<T, N>& y0,
                                     const std::array<T, N>& y1, Dop853Work<T, N, Real>& w) {
    using namespace dop853;
    std::array<T, N> tmp;
    for (int s = kStages + 1; s < kStagesExt; ++s) {
        for (std::size_t i = 0; i < N; ++i) {
            T acc = T(Real(0)) * y0[i];
            for (int j = 0; j < s; ++j)
                if (A[s][j] != 0.0L) acc += detail::coef<T, Real>(A[s][j]) * w.K[j][i];
            tmp[i] = y0[i] + T(h) * acc;
        }
        w.K[s] = f(t + Real(C[s]) * h, tmp);
    }
    Dop853Dense<T, N, Real> d;
    d.t0 = t;
    d.t1 = t + h;
    d.y0 = y0;
    for (std::size_t i = 0; i < N; ++i) {
        T dy = y1[i] - y0[i];
        d.Fc[0][i] = dy;
        d.Fc[1][i] = T(h) * w.K[0][i] - dy;
        d.Fc[2][i] = T(Real(2)) * dy - T(h) * (w.K[kStages][i] + w.K[0][i]);
        for (int r = 0; r < 4; ++r) {
            T acc = T(Real(0)) * y0[i];
            for (int j = 0; j < kStagesExt; ++j)
                if (D[r][j] != 0.0L) acc += detail::coef<T, Real>(D[r][j]) * w.K[j][i];
            d.Fc[3 + r][i] = T(h) * acc;
        }
    }
    return d;
}

/// Fixed-step integration with n equal steps.  Works for any element type.
template <class T, std::size_t N, class Real, class F>
std::array<T, N> dop853_fixed(F&& f, Real t0, std::array<T, N> y, Real t1, int n) {
    Dop853Work<T, N, Real> w;
    Real h = (t1 - t0) / Real(n);
    std::array<T, N> y1;
    std::array<T, N> f0 = f(t0, y);
    for (int k = 0; k < n; ++k) {
        Real t = t0 + Real(k) * h;
        dop853_step(f, t, y, f0, h, w, y1);
        y = y1;
        f0 = w.K[dop853::kStages];
    }
    return y;
}

struct Dop853Options {
    double rtol = 1e-12;
    double atol = 1e-14;
    double max_step = std::numeric_limits<double>::infinity();
    double first_step = 0.0;  ///< 0 selects automatically
    long max_steps = 2000000;
};

/// Adaptive driver for real element types.  The observer is called on every
/// accepted step with the dense output; returning false stops integration.
template <class Real, std::size_t N, class F, class Obs>
std::array<Real, N> dop853_adaptive(F&& f, Real t0, std::array<Real, N> y, Real t1,
                                    const Dop853Options& opt, Obs&& observer, bool dense = true) {
    using std::abs; using std::sqrt; using std::pow; using std::max; using std::min;
    using namespace dop853;
    const Real dir = t1 >= t0 ? Real(1) : Real(-1);
    const Real span = abs(t1 - t0);
    if (span == Real(0)) return y;
    Dop853Work<Real, N, Real> w;
    std::array<Real, N> f0 = f(t0, y), y1;
    const Real rtol(opt.rtol), atol(opt.atol);
    auto scale_of = [&](std::size_t i, const std::array<Real, N>& a, const std::array<Real, N>& b) {
        return atol + max(abs(a[i]), abs(b[i])) * rtol;
    };
    Real h;
    if (opt.first_step > 0) {
        h = Real(opt.first_step);
    } else {
        Real d0 = 0, d1 = 0;
        for (std::size_t i = 0; i < N; ++i) {
            Real sc = scale_of(i, y, y);
            d0 += (y[i] / sc) * (y[i] / sc);
            d1 += (f0[i] / sc) * (f0[i] / sc);
        }
        d0 = sqrt(d0 / Real(N));
        d1 = sqrt(d1 / Real(N));
        h = (d0 < Real(1e-5) || d1 < Real(1e-5)) ? Real(1e-6) : Real(0.01) * d0 / d1;
        h = min(h, span);
        std::array<Real, N> yt;
        for (std::size_t i = 0; i < N; ++i) yt[i] = y[i] + dir * h * f0[i];
        auto ft = f(t0 + dir * h, yt);
        Real d2 = 0;
        for (std::size_t i = 0; i < N; ++i) {
            Real sc = scale_of(i, y, y);
            d2 += ((ft[i] - f0[i]) / sc) * ((ft[i] - f0[i]) / sc);
        }
        d2 = sqrt(d2 / Real(N)) / h;
        Real h1 = (d1 <= Real(1e-15) && d2 <= Real(1e-15)) ? max(Real(1e-6), h * Real(1e-3))
                                                            : pow(Real(0.01) / max(d1, d2), Real(1) / Real(8));
        h = min(Real(100) * h, h1);
    }
    const Real hmax = Real(opt.max_step);
    h = min(h, hmax);
    Real t = t0;
    long steps = 0;
    while (dir * (t1 - t) > Real(0)) {
        if (++steps > opt.max_steps) throw HorizonExceeded("step budget exhausted");
        Real hmin = Real(10) * std::numeric_limits<Real>::epsilon() * max(abs(t), Real(1));
        if (h < hmin) throw StepSizeUnderflow("step size below resolution at t = " + std::to_string(double(t)));
        bool last = false;
        if (h >= abs(t1 - t)) {
            h = abs(t1 - t);
            last = true;
        }
        Real hs = dir * h;
        dop853_step(f, t, y, f0, hs, w, y1);
        Real e5 = 0, e3 = 0;
        for (std::size_t i = 0; i < N; ++i) {
            Real a5 = 0, a3 = 0;
            for (int j = 0; j <= kStages; ++j) {
                a5 += Real(E5[j]) * w.K[j][i];
                a3 += Real(E3[j]) * w.K[j][i];
            }
            Real sc = scale_of(i, y, y1);
            e5 += (a5 / sc) * (a5 / sc);
            e3 += (a3 / sc) * (a3 / sc);
        }
        Real err = 0;
        if (e5 > Real(0) || e3 > Real(0)) err = h * e5 / sqrt((e5 + Real(0.01) * e3) * Real(N));
        bool finite = true;
        for (std::size_t i = 0; i < N; ++i)
            if (!(abs(y1[i]) < std::numeric_limits<Real>::infinity())) finite = false;
        if (finite && err <= Real(1)) {
            bool keep = true;
            if (dense) {
                auto d = dop853_dense(f, t, hs, y, y1, w);
                keep = observer(d);
            } else {
                Dop853Dense<Real, N, Real> d;
                d.t0 = t;
                d.t1 = t + hs;
                d.y0 = y;
                keep = observer(d);
            }
            t = last ? t1 : t + hs;
            y = y1;
            f0 = w.K[kStages];
            if (!keep) break;
            Real fac = err == Real(0) ? Real(10) : min(Real(10), Real(0.9) * pow(err, Real(-1) / Real(8)));
            h = min(h * fac, hmax);
        } else {
            Real fac = finite ? max(Real(0.2), Real(0.9) * pow(err, Real(-1) / Real(8))) : Real(0.25);
            h *= fac;
        }
    }
    return y;
}

}  // namespace rtbp
