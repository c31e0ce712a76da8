#include "rtbp/potential.hpp"

#include <cmath>
#include <sstream>

namespace rtbp {

void primary_positions(double t, const Params& p, double qS[2], double qJ[2]) {
    Ephemeris eph(p.e0);
    double v = eph.true_anomaly(t);
    double rho = eph.separation(t);
    double c = std::cos(v), s = std::sin(v);
    // the heavy primary (mass 1-mu) sits at +mu rho (cos v, sin v)
    qS[0] = p.mu * rho * c;
    qS[1] = p.mu * rho * s;
    qJ[0] = -(1.0 - p.mu) * rho * c;
    qJ[1] = -(1.0 - p.mu) * rho * s;
}

namespace {

void check_distance(double d, const Params& p, const char* which) {
    if (!(d >= p.collision_floor)) {
        std::ostringstream os;
        os << "distance to " << which << " primary " << d << " below floor " << p.collision_floor;
        throw CollisionError(os.str());
    }
}

}  // namespace

double potential_cartesian(double q1, double q2, double t, const Params& p, double grad[2]) {
    double qS[2], qJ[2];
    primary_positions(t, p, qS, qJ);
    double dS[2] = {q1 - qS[0], q2 - qS[1]};
    double dJ[2] = {q1 - qJ[0], q2 - qJ[1]};
    double rS = std::hypot(dS[0], dS[1]);
    double rJ = std::hypot(dJ[0], dJ[1]);
    double U = 0;
    grad[0] = grad[1] = 0;
    if (p.mu < 1.0) {
        check_distance(rS, p, "heavy");
        U += (1 - p.mu) / rS;
        double k = (1 - p.mu) / (rS * rS * rS);
        grad[0] -= k * dS[0];
        grad[1] -= k * dS[1];
    }
    if (p.mu > 0.0) {
        check_distance(rJ, p, "light");
        U += p.mu / rJ;
        double k = p.mu / (rJ * rJ * rJ);
        grad[0] -= k * dJ[0];
        grad[1] -= k * dJ[1];
    }
    return U;
}

double potential_U(double r, double alpha, double t, const Params& p) {
    if (!(r > 0)) throw DomainError("radius must be positive");
    Ephemeris eph(p.e0);
    double v = eph.true_anomaly(t);
    double rho = eph.separation(t);
    double c = std::cos(alpha - v);
    double h = rho / r;
    double sS2 = 1.0 - 2.0 * p.mu * h * c + p.mu * p.mu * h * h;
    double sJ2 = 1.0 + 2.0 * (1.0 - p.mu) * h * c + (1.0 - p.mu) * (1.0 - p.mu) * h * h;
    double U = 0;
    if (p.mu < 1.0) {
        double d = r * std::sqrt(std::max(sS2, 0.0));
        check_distance(d, p, "heavy");
        U += (1.0 - p.mu) / d;
    }
    if (p.mu > 0.0) {
        double d = r * std::sqrt(std::max(sJ2, 0.0));
        check_distance(d, p, "light");
        U += p.mu / d;
    }
    return U;
}

double delta_u_direct(double x, double alpha, double s, const Params& p) {
    if (x == 0.0) return 0.0;
    double r = 2.0 / (x * x);
    return potential_U(r, alpha, s, p) - x * x / 2.0;
}

void screen_collision(double x, double alpha, double rho, double v, const Params& p) {
    if (!(x > 0)) return;
    double rx2 = rho * x * x;
    double c = std::cos(alpha - v);
    double r = 2.0 / (x * x);
    if (p.mu < 1.0) {
        double sS2 = 1.0 - p.mu * rx2 * c + p.mu * p.mu * rx2 * rx2 / 4;
        check_distance(r * std::sqrt(std::max(sS2, 0.0)), p, "heavy");
    }
    if (p.mu > 0.0) {
        double sJ2 = 1.0 + (1 - p.mu) * rx2 * c + (1 - p.mu) * (1 - p.mu) * rx2 * rx2 / 4;
        check_distance(r * std::sqrt(std::max(sJ2, 0.0)), p, "light");
    }
}

DeltaU<double> delta_u(double x, double alpha, double s, const Params& p) {
    if (!(x >= 0)) throw DomainError("McGehee radius must be non-negative");
    Ephemeris eph(p.e0);
    double v = eph.true_anomaly(s);
    double rho = eph.separation(s);
    screen_collision(x, alpha, rho, v, p);
    return delta_u_kernel(x, alpha, rho, v, p.mu);
}

}  // namespace rtbp
