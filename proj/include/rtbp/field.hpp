#pragma once
#include <array>
#include <cmath>

#include "rtbp/coords.hpp"
#include "rtbp/ephemeris.hpp"
#include "rtbp/potential.hpp"

namespace rtbp {

/// McGehee system: x' = -x^3 y/4, alpha' = G x^4/4,
/// y' = G^2 x^6/8 - (x^3/4) dU/dx, G' = dU/dalpha.
template <class T, class R>
std::array<T, 4> mcgehee_field_kernel(const std::array<T, 4>& s, const R& rho, const R& v, double mu) {
    const T& x = s[0];
    const T& G = s[3];
    auto du = delta_u_kernel(x, s[1], rho, v, mu);
    T x2 = x * x;
    T x3 = x2 * x;
    T x4 = x2 * x2;
    std::array<T, 4> d;
    d[0] = -x3 * s[2] / T(4);
    d[1] = G * x4 / T(4);
    d[2] = G * G * x4 * x2 / T(8) - x3 / T(4) * (x + du.dx);
    d[3] = du.dalpha;
    return d;
}

/// Local (q, p, theta, G) system with the G x^4/4 cancellation in theta' done
/// analytically.
template <class T, class R>
std::array<T, 4> local_field_kernel(const std::array<T, 4>& s, const R& rho, const R& v, double mu) {
    const T& q = s[0];
    const T& p = s[1];
    const T& G = s[3];
    T x = q + p;
    T y = p - q;
    T alpha = s[2] - G * y;
    auto du = delta_u_kernel(x, alpha, rho, v, mu);
    T x2 = x * x;
    T x3 = x2 * x;
    T x6 = x3 * x3;
    std::array<T, 4> d;
    d[0] = x3 * q / T(4) - G * G * x6 / T(16) + x3 * du.dx / T(8);
    d[1] = -x3 * p / T(4) + G * G * x6 / T(16) - x3 * du.dx / T(8);
    d[2] = G * G * G * x6 / T(8) - G * x3 * du.dx / T(4) + y * du.dalpha;
    d[3] = du.dalpha;
    return d;
}

/// Vector field of the restricted problem in a given chart.
class System {
public:
    System(const Params& p, Chart chart) : params_(p), eph_(p.e0), chart_(chart) { p.validate(); }
    Vec4 operator()(double t, const Vec4& s) const;
    const Params& params() const { return params_; }
    const Ephemeris& ephemeris() const { return eph_; }
    Chart chart() const { return chart_; }
private:
    Params params_;
    Ephemeris eph_;
    Chart chart_;
};

Vec4 vector_field(Chart chart, double t, const Vec4& s, const Params& p);

/// derivative of a McGehee state (x, alpha, y, G) plus s' = 1
McGeheeState vector_field_mcgehee(const McGeheeState& m, const Params& p);

/// Polar Hamiltonian H = (y^2 + G^2/r^2)/2 - U
double polar_hamiltonian(const PolarState& s, const Params& p);
/// J = H - G, conserved for e0 = 0
double jacobi_integral(const PolarState& s, const Params& p);
/// Two-body energy (mu = 0 Hamiltonian)
double kepler_energy(const PolarState& s);

}  // namespace rtbp
