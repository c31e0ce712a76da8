#include "rtbp/field.hpp"

#include <cmath>

namespace rtbp {

namespace {

Vec4 cartesian_field(double t, const Vec4& s, const Params& p) {
    double g[2];
    potential_cartesian(s[0], s[1], t, p, g);
    return {s[2], s[3], g[0], g[1]};
}

Vec4 polar_field(double t, const Vec4& s, const Params& p) {
    double r = s[0], a = s[1], y = s[2], G = s[3];
    if (!(r > 0)) throw DomainError("polar field at r <= 0");
    double c = std::cos(a), sn = std::sin(a);
    double g[2];
    potential_cartesian(r * c, r * sn, t, p, g);
    double Ur = g[0] * c + g[1] * sn;
    double Ua = r * (-g[0] * sn + g[1] * c);
    return {y, G / (r * r), G * G / (r * r * r) + Ur, Ua};
}

}  // namespace

Vec4 vector_field(Chart chart, double t, const Vec4& s, const Params& p) {
    switch (chart) {
        case Chart::Cartesian: return cartesian_field(t, s, p);
        case Chart::Polar: return polar_field(t, s, p);
        case Chart::McGehee: {
            if (!(s[0] >= 0)) throw DomainError("McGehee field needs x >= 0");
            Ephemeris eph(p.e0);
            double rho = eph.separation(t), v = eph.true_anomaly(t);
            screen_collision(s[0], s[1], rho, v, p);
            return mcgehee_field_kernel(s, rho, v, p.mu);
        }
        case Chart::LocalQP: {
            Ephemeris eph(p.e0);
            double rho = eph.separation(t), v = eph.true_anomaly(t);
            screen_collision(s[0] + s[1], s[2] - s[3] * (s[1] - s[0]), rho, v, p);
            return local_field_kernel(s, rho, v, p.mu);
        }
    }
    return {};
}

Vec4 System::operator()(double t, const Vec4& s) const { return vector_field(chart_, t, s, params_); }

McGeheeState vector_field_mcgehee(const McGeheeState& m, const Params& p) {
    Vec4 d = vector_field(Chart::McGehee, m.s, to_vec(m), p);
    return {d[0], d[1], d[2], d[3], 1.0};
}

double kepler_energy(const PolarState& s) { return 0.5 * (s.y * s.y + s.G * s.G / (s.r * s.r)) - 1.0 / s.r; }

double polar_hamiltonian(const PolarState& s, const Params& p) {
    return 0.5 * (s.y * s.y + s.G * s.G / (s.r * s.r)) - potential_U(s.r, s.alpha, s.t, p);
}

double jacobi_integral(const PolarState& s, const Params& p) { return polar_hamiltonian(s, p) - s.G; }

}  // namespace rtbp
