#pragma once
#include <array>
#include <cmath>
#include <string>

#include "rtbp/errors.hpp"

namespace rtbp {

using Vec4 = std::array<double, 4>;

struct CartesianState {
    double q[2] = {0, 0};
    double p[2] = {0, 0};
    double t = 0;
};

struct PolarState {
    double r = 1, alpha = 0, y = 0, G = 0, t = 0;
};

/// Regularised point near infinity, r = 2/x^2; x = 0 is parabolic infinity.
struct McGeheeState {
    double x = 0, alpha = 0, y = 0, G = 0, s = 0;
};

/// Local variables at infinity: q = (x-y)/2, p = (x+y)/2, theta = alpha + G y.
struct LocalState {
    double q = 0, p = 0, theta = 0, G = 0, t = 0;
};

enum class Chart { Cartesian, Polar, McGehee, LocalQP };

const char* chart_name(Chart c);
Chart chart_from_name(const std::string& s);

PolarState cartesian_to_polar(const CartesianState& c);
CartesianState polar_to_cartesian(const PolarState& p);
McGeheeState to_mcgehee(const PolarState& p);
PolarState from_mcgehee(const McGeheeState& m);
LocalState to_local(const McGeheeState& m);
McGeheeState from_local(const LocalState& l);

inline Vec4 to_vec(const CartesianState& c) { return {c.q[0], c.q[1], c.p[0], c.p[1]}; }
inline Vec4 to_vec(const PolarState& p) { return {p.r, p.alpha, p.y, p.G}; }
inline Vec4 to_vec(const McGeheeState& m) { return {m.x, m.alpha, m.y, m.G}; }
inline Vec4 to_vec(const LocalState& l) { return {l.q, l.p, l.theta, l.G}; }
inline CartesianState cartesian_from_vec(const Vec4& v, double t) { return {{v[0], v[1]}, {v[2], v[3]}, t}; }
inline PolarState polar_from_vec(const Vec4& v, double t) { return {v[0], v[1], v[2], v[3], t}; }
inline McGeheeState mcgehee_from_vec(const Vec4& v, double s) { return {v[0], v[1], v[2], v[3], s}; }
inline LocalState local_from_vec(const Vec4& v, double t) { return {v[0], v[1], v[2], v[3], t}; }

/// Convert a chart vector between charts (time is shared by all of them).
Vec4 convert(Chart from, Chart to, const Vec4& v, double t);

/// Jacobian d(to)/d(from) at v, by analytic differentiation of the transforms.
std::array<std::array<double, 4>, 4> convert_jacobian(Chart from, Chart to, const Vec4& v, double t);

/// wrap an angle into [0, 2 pi)
double wrap_2pi(double a);
/// wrap an angle into [-pi, pi)
double wrap_pi(double a);

}  // namespace rtbp
