#pragma once
#include <cmath>

#include "rtbp/ephemeris.hpp"
#include "rtbp/params.hpp"

namespace rtbp {

/// Perturbing potential dU = U - x^2/2 in McGehee variables together with
/// its x and alpha derivatives.
template <class T>
struct DeltaU {
    T value;
    T dx;
    T dalpha;
};

namespace detail {

/// g(a) = (1+a)^{-1/2} - 1 + a/2 and g'(a), written without cancellation
template <class T>
inline void g_and_dg(const T& a, T& g, T& dg) {
    using std::sqrt;
    T s = sqrt(T(1) + a);
    T sp1 = T(1) + s;
    g = a * a * (s + T(2)) / (T(2) * s * sp1 * sp1);
    dg = a * (s * s + s + T(1)) / (T(2) * sp1 * s * s * s);
}

}  // namespace detail

/// Kernel shared by double, multiprecision and power-series evaluation.
/// rho and v are the primary separation and true anomaly at the current time.
template <class T, class R>
DeltaU<T> delta_u_kernel(const T& x, const T& alpha, const R& rho, const R& v, double mu) {
    using std::cos; using std::sin;
    const T x2 = x * x;
    const T rx2 = T(rho) * x2;
    const T c = cos(alpha - T(v));
    const T sn = sin(alpha - T(v));
    const double m1 = 1.0 - mu;
    T w = -T(mu * m1 / 8.0) * rx2 * rx2;
    T dw = -T(mu * m1 / 2.0) * T(rho) * T(rho) * x2 * x;
    T wa = T(0) * x;
    if (mu != 0.0) {
        T aS = -T(mu) * rx2 * c + T(mu * mu / 4.0) * rx2 * rx2;
        T aJ = T(m1) * rx2 * c + T(m1 * m1 / 4.0) * rx2 * rx2;
        T gS, dgS, gJ, dgJ;
        detail::g_and_dg(aS, gS, dgS);
        detail::g_and_dg(aJ, gJ, dgJ);
        w += T(m1) * gS + T(mu) * gJ;
        T rx = T(rho) * x;
        T daS = -T(2 * mu) * rx * c + T(mu * mu) * rx * rx * x;
        T daJ = T(2 * m1) * rx * c + T(m1 * m1) * rx * rx * x;
        dw += T(m1) * dgS * daS + T(mu) * dgJ * daJ;
        // d aS/d alpha = mu rho x^2 sin, d aJ/d alpha = -(1-mu) rho x^2 sin
        wa = T(m1 * mu) * rx2 * sn * (dgS - dgJ);
    } else {
        w = T(0) * x;
        dw = T(0) * x;
    }
    DeltaU<T> out;
    out.value = x2 / T(2) * w;
    out.dx = x * w + x2 / T(2) * dw;
    out.dalpha = x2 / T(2) * wa;
    return out;
}

/// Direct two-centre value of dU, used as an independent check of the kernel.
double delta_u_direct(double x, double alpha, double s, const Params& p);

/// Double-precision dU with collision screening.
DeltaU<double> delta_u(double x, double alpha, double s, const Params& p);

/// Throws CollisionError when either primary is closer than the floor.
void screen_collision(double x, double alpha, double rho, double v, const Params& p);

/// Full potential U = (1-mu)/|q - q_S| + mu/|q - q_J| in polar variables.
double potential_U(double r, double alpha, double t, const Params& p);

/// Gradient of U in Cartesian variables; returns U.
double potential_cartesian(double q1, double q2, double t, const Params& p, double grad[2]);

/// Primary positions at time t: q_S (mass 1-mu) and q_J (mass mu).
void primary_positions(double t, const Params& p, double qS[2], double qJ[2]);

}  // namespace rtbp
