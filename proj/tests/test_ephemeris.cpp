#include <cmath>
#include <numbers>
#include <random>

#include "doctest.h"
#include "fixtures.hpp"
#include "rtbp/field.hpp"

using namespace rtbp;
using std::numbers::pi;

TEST_SUITE("ephemeris") {

TEST_CASE("true anomaly trivial cases") {
    CHECK(true_anomaly(1.3, 0.0) == doctest::Approx(1.3).epsilon(1e-15));
    CHECK(true_anomaly(2 * pi, 0.3) == doctest::Approx(2 * pi).epsilon(1e-14));
    CHECK(true_anomaly(0.0, 0.7) == 0.0);
}

TEST_CASE("true anomaly matches high precision oracle on both routes") {
    CHECK(std::abs(true_anomaly(pi / 2, 0.2) - fixtures::kTrueAnomalyHalfPiE02) < 1e-14);
    CHECK(std::abs(true_anomaly_ode(pi / 2, 0.2, 1e-12) - fixtures::kTrueAnomalyHalfPiE02) < 1e-12);
}

TEST_CASE("Kepler and ODE routes agree over several periods") {
    for (double e : {0.05, 0.3, 0.6}) {
        for (double t : {0.4, 3.0, 7.7, 20.0}) {
            double a = true_anomaly(t, e);
            double b = true_anomaly_ode(t, e, 1e-11);
            CHECK(std::abs(a - b) < 1e-10);
        }
    }
}

TEST_CASE("true anomaly is monotone with secular period") {
    for (double e : {0.0, 0.1, 0.9}) {
        Ephemeris eph(e);
        double prev = -1e9;
        for (int k = -200; k <= 200; ++k) {
            double t = 0.05 * k;
            double v = eph.true_anomaly(t);
            CHECK(v > prev);
            prev = v;
            CHECK(std::abs(eph.true_anomaly(t + 2 * pi) - v - 2 * pi) < 1e-12);
            CHECK(std::abs(eph.separation(t + 2 * pi) - eph.separation(t)) < 1e-13);
        }
    }
}

TEST_CASE("primary separation") {
    CHECK(primary_separation(0.0, 0.1) == doctest::Approx(0.9).epsilon(1e-15));
    CHECK(primary_separation(1.234, 0.0) == 1.0);
    CHECK(primary_separation(pi, 0.1) == doctest::Approx(1.1).epsilon(1e-15));
    for (int k = 0; k < 100; ++k) {
        double t = 0.37 * k;
        double r = primary_separation(t, 0.3);
        CHECK(r >= 0.7 - 1e-15);
        CHECK(r <= 1.3 + 1e-15);
        double v = true_anomaly(t, 0.3);
        CHECK(std::abs(r - (1 - 0.09) / (1 + 0.3 * std::cos(v))) < 1e-14);
    }
}

TEST_CASE("eccentricity and mass ratio validation") {
    CHECK_THROWS_AS(Params(0.6, 0.0), DomainError);
    CHECK_THROWS_AS(Params(0.3, 1.0), DomainError);
    CHECK_THROWS_AS(Ephemeris(-0.1), DomainError);
}

TEST_CASE("potential values") {
    Params p0(0.0, 0.3);
    CHECK(potential_U(10.0, 0.7, 2.0, p0) == doctest::Approx(0.1).epsilon(1e-15));
    Params p(0.5, 0.0);
    // syzygy: primaries at distance 1.5 and 2.5 from the third body
    double t = 0.8;
    CHECK(potential_U(2.0, true_anomaly(t, 0.0), t, p) == doctest::Approx(0.5 / 1.5 + 0.5 / 2.5).epsilon(1e-14));
    // far field U - 1/r = O(r^-3)
    Params q(0.3, 0.1);
    double prev = 0;
    for (double r : {50.0, 100.0, 200.0}) {
        double d = std::abs(potential_U(r, 0.4, 1.1, q) - 1 / r) * r * r * r;
        if (prev > 0) CHECK(std::abs(d / prev - 1) < 0.05);
        prev = d;
    }
}

TEST_CASE("potential is symmetric in alpha - v") {
    Params p(0.3, 0.2);
    Ephemeris eph(0.2);
    for (double t : {0.3, 1.9, 4.0}) {
        double v = eph.true_anomaly(t);
        for (double d : {0.1, 1.0, 2.5}) {
            CHECK(potential_U(3.0, v + d, t, p) == doctest::Approx(potential_U(3.0, v - d, t, p)).epsilon(1e-14));
        }
    }
}

TEST_CASE("collision floor") {
    Params p(0.5, 0.0);
    // heavy primary of mass 1-mu at +mu along v(0) = 0
    CHECK_THROWS_AS(potential_U(0.5, 0.0, 0.0, p), CollisionError);
    CHECK_THROWS_AS(potential_U(0.5 + 1e-8, 0.0, 0.0, p), CollisionError);
    CHECK_NOTHROW(potential_U(0.5 + 1e-4, 0.0, 0.0, p));
    double qS[2], qJ[2];
    primary_positions(0.0, p, qS, qJ);
    CHECK(qS[0] == doctest::Approx(0.5));
    CHECK(qJ[0] == doctest::Approx(-0.5));
}

TEST_CASE("delta U trivial limits and cancellation-free form") {
    Params p0(0.0, 0.1);
    CHECK(delta_u(0.3, 1.0, 0.5, p0).value == 0.0);
    Params p(0.3, 0.1);
    CHECK(delta_u(0.0, 1.0, 0.5, p).value == 0.0);
    // kernel equals direct difference where the latter has no cancellation
    for (double x : {0.3, 0.6, 0.9}) {
        for (double a : {0.0, 1.1, 2.9}) {
            double k = delta_u(x, a, 0.7, p).value;
            double d = delta_u_direct(x, a, 0.7, p);
            CHECK(std::abs(k - d) < 1e-14);
        }
    }
    // at tiny x the kernel keeps full relative precision
    double x = 1e-3;
    double k = delta_u(x, 0.0, 0.0, Params(0.3, 0.0)).value;
    CHECK(k / std::pow(x, 6) == doctest::Approx(fixtures::kDeltaUx6Mu03).epsilon(1e-5));
}

TEST_CASE("leading coefficient of delta U is the quadrupole") {
    Params p(0.3, 0.0);
    for (double phi : {0.0, 0.5, 1.3, 2.0}) {
        double x = 2e-3;
        double v = delta_u(x, phi, 0.0, p).value / std::pow(x, 6);
        double c = std::cos(phi);
        CHECK(v == doctest::Approx(0.3 * 0.7 * (3 * c * c - 1) / 16).epsilon(1e-5));
    }
}

TEST_CASE("delta U bound constant on x <= 0.5") {
    double worst = 0;
    for (double mu : {0.05, 0.3, 0.5})
        for (double e : {0.0, 0.1})
            for (int is = 0; is < 13; ++is)
                for (int ix = 1; ix <= 25; ++ix)
                    for (int ia = 0; ia < 36; ++ia) {
                        double x = 0.02 * ix, a = ia * pi / 18, s = is * pi / 6;
                        double d = delta_u(x, a, s, Params(mu, e)).value;
                        worst = std::max(worst, std::abs(d) / (mu * std::pow(x, 6)));
                    }
    CHECK(worst < fixtures::kDeltaUBoundC);
    CHECK(worst > 0.1);
}

TEST_CASE("delta U derivatives against central differences") {
    Params p(0.4, 0.2);
    for (double x : {0.1, 0.4, 0.7}) {
        double a = 0.9, s = 1.7, h = 1e-5;
        auto du = delta_u(x, a, s, p);
        double dx = (delta_u(x + h, a, s, p).value - delta_u(x - h, a, s, p).value) / (2 * h);
        double da = (delta_u(x, a + h, s, p).value - delta_u(x, a - h, s, p).value) / (2 * h);
        CHECK(du.dx == doctest::Approx(dx).epsilon(1e-7));
        CHECK(du.dalpha == doctest::Approx(da).epsilon(1e-7));
    }
}

TEST_CASE("McGehee field at infinity") {
    Params p(0.5, 0.1);
    McGeheeState m{0.0, 1.0, 0.3, 2.0, 0.4};
    auto d = vector_field_mcgehee(m, p);
    CHECK(d.x == 0.0);
    CHECK(d.y == 0.0);
    CHECK(d.alpha == 0.0);
    CHECK(d.G == 0.0);
    CHECK(d.s == 1.0);
}

TEST_CASE("coordinate transforms") {
    PolarState pr{8.0, 0.3, 0.1, 2.0, 0.0};
    CHECK(to_mcgehee(pr).x == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(from_mcgehee({0.5, 0, 0, 0, 0}).r == 8.0);
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> U(-1, 1);
    for (int k = 0; k < 200; ++k) {
        PolarState s{1.5 + 10 * (U(rng) + 1), 3 * U(rng), U(rng), 3 * U(rng), U(rng)};
        auto c = polar_to_cartesian(s);
        auto b = cartesian_to_polar(c);
        CHECK(std::abs(b.r - s.r) < 1e-14 * s.r);
        CHECK(std::abs(b.alpha - s.alpha) < 1e-14);
        CHECK(std::abs(b.y - s.y) < 1e-14);
        CHECK(std::abs(b.G - s.G) < 1e-13);
        auto m = to_mcgehee(s);
        auto back = from_mcgehee(m);
        CHECK(std::abs(back.r - s.r) < 1e-14 * s.r);
        CHECK(m.G == s.G);
        auto l = to_local(m);
        auto m2 = from_local(l);
        CHECK(std::abs(m2.x - m.x) < 1e-15);
        CHECK(std::abs(m2.y - m.y) < 1e-15);
        CHECK(std::abs(m2.alpha - m.alpha) < 1e-14);
        CHECK(m2.G == m.G);
    }
    auto l = to_local({0.4, 1.2, 0.0, 3.0, 0.0});
    CHECK(l.q == 0.2);
    CHECK(l.p == 0.2);
    CHECK(l.theta == 1.2);
    CHECK_THROWS_AS(from_mcgehee({0.0, 0, 0, 0, 0}), DomainError);
    CHECK_THROWS_AS(to_mcgehee({-1.0, 0, 0, 0, 0}), DomainError);
}

TEST_CASE("vector fields are related by chart Jacobians") {
    Params p(0.3, 0.15);
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> U(-1, 1);
    const Chart charts[] = {Chart::Cartesian, Chart::Polar, Chart::McGehee, Chart::LocalQP};
    for (int k = 0; k < 40; ++k) {
        double t = 3 * U(rng);
        PolarState s{4 + 20 * (U(rng) + 1), 3 * U(rng), 0.5 * U(rng), 1.5 + U(rng), t};
        Vec4 base = to_vec(s);
        for (Chart a : charts) {
            Vec4 va = convert(Chart::Polar, a, base, t);
            Vec4 fa = vector_field(a, t, va, p);
            for (Chart b : charts) {
                if (a == b) continue;
                Vec4 vb = convert(a, b, va, t);
                Vec4 fb = vector_field(b, t, vb, p);
                auto J = convert_jacobian(a, b, va, t);
                for (int i = 0; i < 4; ++i) {
                    double pushed = 0, scale = 0;
                    for (int j = 0; j < 4; ++j) {
                        pushed += J[i][j] * fa[j];
                        scale += std::abs(J[i][j] * fa[j]);
                    }
                    CHECK(std::abs(pushed - fb[i]) <= 1e-10 * std::max(scale, std::abs(fb[i])) + 1e-300);
                }
            }
        }
    }
}

TEST_CASE("chart Jacobian against finite differences") {
    Vec4 v{0.3, 1.1, 0.2, 2.5};
    auto J = convert_jacobian(Chart::McGehee, Chart::Cartesian, v, 0.0);
    for (int j = 0; j < 4; ++j) {
        Vec4 a = v, b = v;
        double h = 1e-6;
        a[j] += h;
        b[j] -= h;
        Vec4 fa = convert(Chart::McGehee, Chart::Cartesian, a, 0.0);
        Vec4 fb = convert(Chart::McGehee, Chart::Cartesian, b, 0.0);
        for (int i = 0; i < 4; ++i) CHECK(J[i][j] == doctest::Approx((fa[i] - fb[i]) / (2 * h)).epsilon(1e-6));
    }
}

TEST_CASE("local field vanishes to cubic order at q = p = 0") {
    Params p(0.5, 0.0);
    // fit log|f| against log scale along a ray
    for (int comp = 0; comp < 2; ++comp) {
        double prev = 0;
        std::vector<double> slopes;
        for (int k = 0; k < 5; ++k) {
            double h = 0.02 * std::pow(0.5, k);
            Vec4 s{0.7 * h, 0.3 * h, 0.4, 3.0};
            double f = std::abs(vector_field(Chart::LocalQP, 0.2, s, p)[comp]);
            if (k > 0) slopes.push_back(std::log(prev / f) / std::log(2.0));
            prev = f;
        }
        // q' and p' are (q+p)^3 times a linear factor: order four overall
        for (double sl : slopes) CHECK(sl > 3.0);
        CHECK(slopes.back() == doctest::Approx(4.0).epsilon(0.02));
    }
    // theta' and G' are of order six
    double prev = 0;
    for (int k = 0; k < 4; ++k) {
        double h = 0.05 * std::pow(0.5, k);
        Vec4 s{0.6 * h, 0.4 * h, 0.4, 3.0};
        double f = std::abs(vector_field(Chart::LocalQP, 0.2, s, p)[2]);
        if (k > 0) CHECK(std::log(prev / f) / std::log(2.0) == doctest::Approx(6.0).epsilon(0.03));
        prev = f;
    }
}

TEST_CASE("circular integral has zero derivative along the field") {
    Params p(0.5, 0.0);
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> U(-1, 1);
    for (int k = 0; k < 20; ++k) {
        double t = 2 * U(rng);
        PolarState s{3 + 5 * (U(rng) + 1), 3 * U(rng), 0.4 * U(rng), 1.2 + U(rng), t};
        Vec4 f = vector_field(Chart::Polar, t, to_vec(s), p);
        double h = 1e-5;
        auto shifted = [&](double d) {
            PolarState q = s;
            q.r += d * f[0]; q.alpha += d * f[1]; q.y += d * f[2]; q.G += d * f[3]; q.t += d;
            return jacobi_integral(q, p);
        };
        double dJ = (shifted(h) - shifted(-h)) / (2 * h);
        CHECK(std::abs(dJ) < 1e-8);
    }
}

}
