#include "rtbp/coords.hpp"

#include <cmath>
#include <numbers>

namespace rtbp {

using Mat4 = std::array<std::array<double, 4>, 4>;

const char* chart_name(Chart c) {
    switch (c) {
        case Chart::Cartesian: return "cartesian";
        case Chart::Polar: return "polar";
        case Chart::McGehee: return "mcgehee";
        case Chart::LocalQP: return "local";
    }
    return "?";
}

Chart chart_from_name(const std::string& s) {
    if (s == "cartesian") return Chart::Cartesian;
    if (s == "polar") return Chart::Polar;
    if (s == "mcgehee") return Chart::McGehee;
    if (s == "local") return Chart::LocalQP;
    throw DomainError("unknown chart '" + s + "'");
}

double wrap_2pi(double a) {
    const double tp = 2 * std::numbers::pi;
    double r = std::fmod(a, tp);
    if (r < 0) r += tp;
    if (r >= tp) r -= tp;
    return r;
}

double wrap_pi(double a) {
    double r = wrap_2pi(a + std::numbers::pi) - std::numbers::pi;
    return r;
}

PolarState cartesian_to_polar(const CartesianState& c) {
    double r = std::hypot(c.q[0], c.q[1]);
    if (!(r > 0)) throw DomainError("cartesian_to_polar at the origin");
    PolarState p;
    p.r = r;
    p.alpha = std::atan2(c.q[1], c.q[0]);
    p.y = (c.q[0] * c.p[0] + c.q[1] * c.p[1]) / r;
    p.G = c.q[0] * c.p[1] - c.q[1] * c.p[0];
    p.t = c.t;
    return p;
}

CartesianState polar_to_cartesian(const PolarState& p) {
    if (!(p.r > 0)) throw DomainError("polar_to_cartesian with r <= 0");
    double c = std::cos(p.alpha), s = std::sin(p.alpha);
    CartesianState o;
    o.q[0] = p.r * c;
    o.q[1] = p.r * s;
    o.p[0] = p.y * c - p.G * s / p.r;
    o.p[1] = p.y * s + p.G * c / p.r;
    o.t = p.t;
    return o;
}

McGeheeState to_mcgehee(const PolarState& p) {
    if (!(p.r > 0)) throw DomainError("to_mcgehee with r <= 0");
    return {std::sqrt(2.0 / p.r), p.alpha, p.y, p.G, p.t};
}

PolarState from_mcgehee(const McGeheeState& m) {
    if (!(m.x > 0)) throw DomainError("from_mcgehee with x <= 0");
    return {2.0 / (m.x * m.x), m.alpha, m.y, m.G, m.s};
}

LocalState to_local(const McGeheeState& m) {
    return {(m.x - m.y) / 2, (m.x + m.y) / 2, m.alpha + m.G * m.y, m.G, m.s};
}

McGeheeState from_local(const LocalState& l) {
    double y = l.p - l.q;
    return {l.q + l.p, l.theta - l.G * y, y, l.G, l.t};
}

namespace {

int rank(Chart c) {
    switch (c) {
        case Chart::Cartesian: return 0;
        case Chart::Polar: return 1;
        case Chart::McGehee: return 2;
        case Chart::LocalQP: return 3;
    }
    return 0;
}

Vec4 step(int from, int to, const Vec4& v, double t) {
    if (from == 0 && to == 1) return to_vec(cartesian_to_polar(cartesian_from_vec(v, t)));
    if (from == 1 && to == 0) return to_vec(polar_to_cartesian(polar_from_vec(v, t)));
    if (from == 1 && to == 2) return to_vec(to_mcgehee(polar_from_vec(v, t)));
    if (from == 2 && to == 1) return to_vec(from_mcgehee(mcgehee_from_vec(v, t)));
    if (from == 2 && to == 3) return to_vec(to_local(mcgehee_from_vec(v, t)));
    return to_vec(from_local(local_from_vec(v, t)));
}

Mat4 step_jacobian(int from, int to, const Vec4& v) {
    Mat4 J{};
    if (from == 0 && to == 1) {
        double q1 = v[0], q2 = v[1], p1 = v[2], p2 = v[3];
        double r = std::hypot(q1, q2), r2 = r * r, r3 = r2 * r;
        double qp = q1 * p1 + q2 * p2;
        J[0] = {q1 / r, q2 / r, 0, 0};
        J[1] = {-q2 / r2, q1 / r2, 0, 0};
        J[2] = {p1 / r - qp * q1 / r3, p2 / r - qp * q2 / r3, q1 / r, q2 / r};
        J[3] = {p2, -p1, -q2, q1};
    } else if (from == 1 && to == 0) {
        double r = v[0], a = v[1], y = v[2], G = v[3];
        double c = std::cos(a), s = std::sin(a);
        J[0] = {c, -r * s, 0, 0};
        J[1] = {s, r * c, 0, 0};
        J[2] = {G * s / (r * r), -y * s - G * c / r, c, -s / r};
        J[3] = {-G * c / (r * r), y * c - G * s / r, s, c / r};
    } else if (from == 1 && to == 2) {
        double r = v[0];
        double x = std::sqrt(2.0 / r);
        J[0] = {-x / (2 * r), 0, 0, 0};
        J[1] = {0, 1, 0, 0};
        J[2] = {0, 0, 1, 0};
        J[3] = {0, 0, 0, 1};
    } else if (from == 2 && to == 1) {
        double x = v[0];
        J[0] = {-4.0 / (x * x * x), 0, 0, 0};
        J[1] = {0, 1, 0, 0};
        J[2] = {0, 0, 1, 0};
        J[3] = {0, 0, 0, 1};
    } else if (from == 2 && to == 3) {
        double y = v[2], G = v[3];
        J[0] = {0.5, 0, -0.5, 0};
        J[1] = {0.5, 0, 0.5, 0};
        J[2] = {0, 1, G, y};
        J[3] = {0, 0, 0, 1};
    } else {
        double q = v[0], p = v[1], G = v[3];
        J[0] = {1, 1, 0, 0};
        J[1] = {G, -G, 1, -(p - q)};
        J[2] = {-1, 1, 0, 0};
        J[3] = {0, 0, 0, 1};
    }
    return J;
}

Mat4 matmul(const Mat4& A, const Mat4& B) {
    Mat4 C{};
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j)
            for (int k = 0; k < 4; ++k) C[i][j] += A[i][k] * B[k][j];
    return C;
}

}  // namespace

Vec4 convert(Chart from, Chart to, const Vec4& v, double t) {
    int a = rank(from), b = rank(to);
    Vec4 w = v;
    while (a != b) {
        int n = a < b ? a + 1 : a - 1;
        w = step(a, n, w, t);
        a = n;
    }
    return w;
}

Mat4 convert_jacobian(Chart from, Chart to, const Vec4& v, double t) {
    int a = rank(from), b = rank(to);
    Mat4 J{};
    for (int i = 0; i < 4; ++i) J[i][i] = 1;
    Vec4 w = v;
    while (a != b) {
        int n = a < b ? a + 1 : a - 1;
        J = matmul(step_jacobian(a, n, w), J);
        w = step(a, n, w, t);
        a = n;
    }
    return J;
}

}  // namespace rtbp
