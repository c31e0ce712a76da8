#include <cmath>
#include <numbers>
#include <random>

#include "doctest.h"
#include "rtbp/separatrix.hpp"

using namespace rtbp;
using std::numbers::pi;

TEST_SUITE("separatrix") {

TEST_CASE("closed form at perihelion and at tau = 1") {
    auto a = separatrix_eval(0.0, 3.0, 0.4, 0.1);
    CHECK(a.state.x == doctest::Approx(2.0 / 3.0));
    CHECK(a.state.y == 0.0);
    CHECK(a.state.alpha == 0.4);
    CHECK(a.t == 0.0);
    auto b = separatrix_eval(1.0, 2.0, 0.0, 0.0);
    CHECK(b.state.x == doctest::Approx(std::sqrt(2.0) / 2).epsilon(1e-15));
    CHECK(b.state.y == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(b.state.alpha == doctest::Approx(pi / 2).epsilon(1e-15));
    CHECK(b.t == doctest::Approx(16.0 / 3.0).epsilon(1e-15));
    auto c = separatrix_eval(1e12, 2.0, 0.0, 0.0);
    CHECK(c.state.x < 1e-11);
    CHECK(c.state.alpha == doctest::Approx(pi));
    CHECK_THROWS_AS(separatrix_eval(0.3, 0.0, 0, 0), DomainError);
}

TEST_CASE("field identities along the family") {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> U(-30, 30);
    for (int k = 0; k < 500; ++k) {
        double tau = U(rng), G0 = 0.5 + std::abs(U(rng)) / 5;
        auto sp = separatrix_eval(tau, G0, 0.0, 0.0);
        double x2 = sp.state.x * sp.state.x;
        CHECK(x2 * (1 + tau * tau) * G0 * G0 == doctest::Approx(4.0).epsilon(1e-14));
        CHECK(std::abs(sp.t - 0.5 * G0 * G0 * G0 * (tau + tau * tau * tau / 3)) <= 1e-12 * std::max(1.0, std::abs(sp.t)));
        // r = (G0^2/2)(1 + tau^2)
        CHECK(2 / x2 == doctest::Approx(G0 * G0 / 2 * (1 + tau * tau)).epsilon(1e-14));
        // odd symmetry of the angle
        CHECK(separatrix_eval(-tau, G0, 0, 0).state.alpha == doctest::Approx(-sp.state.alpha).epsilon(1e-15));
        CHECK(sp.state.G == G0);
    }
}

TEST_CASE("tau from time round trip") {
    CHECK(tau_from_time(0.0, 3.0) == 0.0);
    CHECK(tau_from_time(2.0 * 8 / 3, 2.0) == doctest::Approx(1.0).epsilon(1e-15));
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> U(-1, 1);
    for (int k = 0; k < 1000; ++k) {
        double G0 = 1 + 4 * std::abs(U(rng));
        double t = std::pow(10.0, 6 * U(rng)) * (U(rng) < 0 ? -1 : 1);
        double tau = tau_from_time(t, G0);
        CHECK(std::abs(separatrix_time(tau, G0) - t) <= 1e-12 * std::max(1.0, std::abs(t)));
    }
}

TEST_CASE("perihelion is the closest point") {
    double prev = 0;
    for (double tau = 0; tau < 5; tau += 0.1) {
        double r = 2 / std::pow(separatrix_eval(tau, 2.0, 0, 0).state.x, 2);
        if (tau > 0) CHECK(r > prev);
        prev = r;
    }
    CHECK(2 / std::pow(separatrix_eval(0, 2.0, 0, 0).state.x, 2) == doctest::Approx(2.0));
}

TEST_CASE("closed form solves the mu = 0 field") {
    std::vector<double> grid;
    for (int k = 0; k <= 400; ++k) grid.push_back(-20 + 0.1 * k);
    for (double G0 : {1.0, 2.0, 5.0, -3.0}) CHECK(verify_separatrix(G0, grid, Params(0.0, 0.0)) < 1e-10);
    CHECK_THROWS_AS(verify_separatrix(1.0, grid, Params(0.1, 0.0)), DomainError);
}

}
