#pragma once
#include <cmath>
#include <limits>

#include <boost/math/constants/constants.hpp>

#include "rtbp/errors.hpp"

namespace rtbp {

/// Keplerian motion of the primaries: unit semi-major axis, period 2*pi,
/// perihelion at t = 0.  Solved through the eccentric anomaly.
class Ephemeris {
public:
    explicit Ephemeris(double e0 = 0.0) : e_(e0) {
        if (!(e0 >= 0.0 && e0 < 1.0)) throw DomainError("eccentricity outside [0,1)");
    }
    double eccentricity() const { return e_; }

    /// eccentric anomaly, continuous in t (E(t + 2 pi) = E(t) + 2 pi)
    template <class R>
    R eccentric_anomaly(const R& t) const {
        using std::floor; using std::sin; using std::cos; using std::abs;
        const R two_pi = R(2) * pi<R>();
        if (e_ == 0.0) return t;
        R k = floor((t + pi<R>()) / two_pi);
        R m = t - k * two_pi;  // in [-pi, pi)
        R E = (e_ < 0.8) ? m : R(m >= R(0) ? 1 : -1) * pi<R>();
        for (int it = 0; it < 60; ++it) {
            R f = E - R(e_) * sin(E) - m;
            R fp = R(1) - R(e_) * cos(E);
            R fpp = R(e_) * sin(E);
            // Halley step
            R d = f / (fp - R(0.5) * f * fpp / fp);
            E -= d;
            if (abs(d) <= R(4) * eps<R>() * (R(1) + abs(E))) break;
        }
        return E + k * two_pi;
    }

    /// true anomaly v(t), v(0) = 0, v(t + 2 pi) = v(t) + 2 pi
    template <class R>
    R true_anomaly(const R& t) const {
        using std::floor; using std::sin; using std::cos; using std::atan2; using std::sqrt;
        if (e_ == 0.0) return t;
        const R two_pi = R(2) * pi<R>();
        R E = eccentric_anomaly(t);
        R k = floor((E + pi<R>()) / two_pi);
        R Er = E - k * two_pi;
        R v = R(2) * atan2(sqrt(R(1 + e_)) * sin(Er / 2), sqrt(R(1 - e_)) * cos(Er / 2));
        return v + k * two_pi;
    }

    /// primary separation rho(t) = 1 - e cos E = (1 - e^2)/(1 + e cos v)
    template <class R>
    R separation(const R& t) const {
        using std::cos;
        if (e_ == 0.0) return R(1);
        return R(1) - R(e_) * cos(eccentric_anomaly(t));
    }

    /// dv/dt = (1 + e cos v)^2 / (1 - e^2)^{3/2}
    double true_anomaly_rate(double t) const;

private:
    template <class R> static R pi() { return boost::math::constants::pi<R>(); }
    template <class R> static R eps() { return std::numeric_limits<R>::epsilon(); }
    double e_;
};

/// true anomaly from the Kepler solve
double true_anomaly(double t, double e0);
/// true anomaly from direct integration of dv/dt with absolute tolerance tol
double true_anomaly_ode(double t, double e0, double tol);
double primary_separation(double t, double e0);

}  // namespace rtbp
