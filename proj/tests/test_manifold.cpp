#include <cmath>
#include <numbers>
#include <sstream>

#include <Eigen/Dense>
#include <boost/math/constants/constants.hpp>

#include "doctest.h"
#include "rtbp/jet.hpp"
#include "rtbp/manifold.hpp"

using namespace rtbp;
using std::numbers::pi;

namespace {

using J = Jet<mp50>;

double fitted_order(const std::vector<double>& t, const std::vector<double>& v) {
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < t.size(); ++i) {
        mx += std::log(t[i]);
        my += std::log(v[i]);
    }
    mx /= t.size();
    my /= t.size();
    double num = 0, den = 0;
    for (std::size_t i = 0; i < t.size(); ++i) {
        num += (std::log(t[i]) - mx) * (std::log(v[i]) - my);
        den += (std::log(t[i]) - mx) * (std::log(t[i]) - mx);
    }
    return num / den;
}

std::vector<double> geometric(double a, double b, int n) {
    std::vector<double> ts;
    for (int i = 0; i < n; ++i) ts.push_back(a * std::pow(b / a, double(i) / (n - 1)));
    return ts;
}

double max_coef(const ManifoldChart& ch, int from, int comp) {
    double m = 0;
    for (int j = from; j <= ch.k; ++j) m = std::max(m, std::abs(double(ch.coef[j][comp])));
    return m;
}

}  // namespace

TEST_SUITE("manifold") {

TEST_CASE("power series arithmetic") {
    JetDegree<mp50> g(12);
    J t = J::linear(mp50(0), mp50(1));
    J s = sqrt(J(1.0) + t);
    J one = s * s - t;
    CHECK(abs(one[0] - 1) < 1e-45);
    for (int k = 1; k <= 12; ++k) CHECK(abs(one[k]) < 1e-45);
    // 1/(1 - t) = sum t^k
    J geo = J(1.0) / (J(1.0) - t);
    for (int k = 0; k <= 12; ++k) CHECK(abs(geo[k] - 1) < 1e-45);
    // sin^2 + cos^2 = 1 around a nonzero angle, and sin'(0.3 + t) = cos
    J a = J(0.3) + t;
    J sn = sin(a), cs = cos(a);
    J id = sn * sn + cs * cs;
    CHECK(abs(id[0] - 1) < 1e-45);
    for (int k = 1; k <= 12; ++k) CHECK(abs(id[k]) < 1e-45);
    CHECK(abs(sn[1] - cos(mp50(0.3))) < 1e-45);
    CHECK(abs(cs[2] + cos(mp50(0.3)) / 2) < 1e-45);
    // evaluation at a point reproduces the function up to truncation
    CHECK(abs(geo(mp50(0.01)) - 1 / (1 - mp50(0.01))) < 1e-25);
}

TEST_CASE("series transport is the Taylor expansion of the discrete period map") {
    Params p(0.5, 0.0);
    PeriodMapOracle F(p, 0.4, 6.0, 0.0, 1, 16);
    MSeries K;
    K[0] = {mp50(0), mp50(0.6)};
    K[1] = {mp50(0), mp50(0.8)};
    K[2] = {mp50(0.4), mp50(0)};
    K[3] = {mp50(6.0), mp50(0)};
    const int d = 14;
    MSeries S = F.compose(K, d);
    for (double t : {1e-3, 4e-3}) {
        MPoint z;
        for (int i = 0; i < 4; ++i) z[i] = K[i][0] + K[i][1] * mp50(t);
        MPoint img = F.apply(z);
        for (int i = 0; i < 4; ++i) {
            mp50 acc = 0;
            for (int m = d; m >= 0; --m) acc = acc * mp50(t) + S[i][m];
            // truncation error ~ t^{d+1}
            CHECK(double(abs(acc - img[i])) < 1e6 * std::pow(t, d + 1));
        }
    }
}

TEST_CASE("normal form data of the period map") {
    Params p(0.5, 0.0);
    for (auto b : {ManifoldBranch::Stable, ManifoldBranch::Unstable}) {
        auto F = chart_oracle(b, p, 0.0, 10.0, 0.0);
        auto d = detect_normal_form(*F, b == ManifoldBranch::Stable ? 1 : 0);
        CHECK(d.N == 4);
        CHECK(std::abs(d.c - 0.25) < 1e-6);
        CHECK(std::abs(d.period - 2 * pi) < 1e-15);
    }
    // the expanding direction is rejected
    auto F = chart_oracle(ManifoldBranch::Stable, p, 0.0, 10.0, 0.0);
    CHECK_THROWS_AS(detect_normal_form(*F, 0), OrderSolveFailure);
}

TEST_CASE("finite-difference Taylor oracle agrees on N and c") {
    Params p(0.5, 0.0);
    auto c = fd_axis_coefficients(p, 0.0, 10.0, 0.0, 1, 1);
    CHECK(std::abs(c[0]) < 1e-12);
    CHECK(std::abs(c[1] - 1) < 1e-10);
    CHECK(std::abs(c[2]) < 1e-7);
    CHECK(std::abs(c[3]) < 1e-7);
    CHECK(std::abs(-c[4] / (2 * pi) - 0.25) < 1e-6);
}

TEST_CASE("normal form map: the axis is an exact chart") {
    const double a = 0.3, b = 0.05;
    NormalFormMap F(a, b, 1.0, 4.0);
    auto d = detect_normal_form(F, 0);
    CHECK(d.N == 4);
    CHECK(std::abs(d.c - a) < 1e-15);
    auto ch = formal_solve(F, d, 10, 0);
    CHECK(abs(ch.c_map - a) < 1e-45);
    CHECK(abs(ch.ctilde - b) < 1e-40);
    for (int m = 2; m <= ch.k; ++m)
        for (int i = 0; i < 4; ++i) CHECK(abs(ch.coef[m][i]) < 1e-40);
    auto rep = invariance_defect(ch, {1e-3, 1e-2, 0.05, 0.1}, F);
    for (const auto& s : rep.samples) CHECK(s.defect < 1e-13);
}

TEST_CASE("stable chart of a map equals the unstable chart of its inverse") {
    NormalFormMap F(0.3, 0.05, 0.0, 3.0);
    auto Finv = F.inverse();
    auto d = detect_normal_form(F, 0);
    auto stable = formal_solve(F, d, 9, 0, ManifoldBranch::Stable);
    // K is the unstable chart of F^{-1} with inner dynamics R^{-1}: F^{-1}(K(R(t))) = K(t)
    for (double t : {1e-3, 1e-2, 0.1}) {
        MPoint back = Finv->apply(stable.eval(stable.R(mp50(t))));
        MPoint z = stable.eval(mp50(t));
        for (int i = 0; i < 4; ++i) CHECK(double(abs(back[i] - z[i])) < 1e-13);
    }
    auto again = formal_solve(*Finv->inverse(), d, 9, 0, ManifoldBranch::Unstable);
    for (int m = 0; m <= 9; ++m)
        for (int i = 0; i < 4; ++i) CHECK(abs(stable.coef[m][i] - again.coef[m][i]) < 1e-40);

    // the truncated flow model (q' = x^3 q/4, p' = -x^3 p/4) is reversible under
    // (q, p, t) -> (p, q, -t): its stable chart is the swapped unstable chart
    Params p(0.5, 0.0);
    PeriodMapOracle fwd(p, 0.0, 3.0, 0.0, 1, 32, LocalField::Model);
    PeriodMapOracle bwd(p, 0.0, 3.0, 0.0, -1, 32, LocalField::Model);
    auto cs = formal_solve(fwd, detect_normal_form(fwd, 1), 8, 1, ManifoldBranch::Stable);
    auto cu = formal_solve(bwd, detect_normal_form(bwd, 0), 8, 0, ManifoldBranch::Unstable);
    for (int m = 0; m <= 8; ++m) {
        CHECK(abs(cs.coef[m][0] - cu.coef[m][1]) < 1e-40);
        CHECK(abs(cs.coef[m][1] - cu.coef[m][0]) < 1e-40);
    }
    CHECK(abs(cs.ctilde - cu.ctilde) < 1e-40);
}

TEST_CASE("truncated flow model: chart stays on the invariant axis") {
    Params p(0.5, 0.0);
    PeriodMapOracle bwd(p, 0.7, 5.0, 0.0, -1, 32, LocalField::Model);
    auto d = detect_normal_form(bwd, 0);
    auto ch = formal_solve(bwd, d, 8, 0, ManifoldBranch::Unstable);
    for (int m = 1; m <= 8; ++m) {
        CHECK(ch.coef[m][1] == 0);
        CHECK(ch.coef[m][2] == 0);
        CHECK(ch.coef[m][3] == 0);
    }
    // q' = q^4/4 over 2 pi gives t - (pi/2) t^4 + (pi^2/2) t^7 + ... backwards,
    // up to the discretization error of the fixed-step map
    mp50 pi_mp = boost::math::constants::pi<mp50>();
    CHECK(abs(ch.c_map - pi_mp / 2) < 1e-15);
    CHECK(abs(ch.ctilde - pi_mp * pi_mp / 2) < 1e-14);
    auto rep = invariance_defect(ch, geometric(1e-3, 3e-2, 8), bwd);
    CHECK(rep.slope >= 8 + 4 - 0.5);
}

TEST_CASE("three-body chart: defect order, residuals, asymptotics") {
    Params p(0.5, 0.0);
    const auto ts = geometric(1e-3, 3e-2, 10);
    for (auto b : {ManifoldBranch::Unstable, ManifoldBranch::Stable}) {
        CAPTURE(manifold_branch_name(b));
        ChartConfig cfg;
        cfg.k = 8;
        auto ch = compute_chart(b, p, 0.0, 10.0, 0.0, cfg);
        auto F = chart_oracle(b, p, 0.0, 10.0, 0.0);
        for (double r : ch.order_residual) CHECK(r < 1e-10);
        auto rep = invariance_defect(ch, ts, *F);
        CHECK(rep.slope >= 11.5);
        // ctilde of the leading model q' = q^4/4
        mp50 pi_mp = boost::math::constants::pi<mp50>();
        CHECK(abs(ch.ctilde - pi_mp * pi_mp / 2) < 1e-10);
        // linear part fixed, p (or q) = O(t^2), z - z0 = O(t^3)
        const int ax = ch.axis, other = 1 - ax;
        CHECK(ch.coef[1][ax] == 1);
        std::vector<double> tt, ov, zv;
        for (double t : ts) {
            MPoint z = ch.eval(mp50(t));
            tt.push_back(t);
            ov.push_back(double(abs(z[other])));
            zv.push_back(double(std::max(abs(z[2] - ch.coef[0][2]), abs(z[3] - ch.coef[0][3]))));
        }
        CHECK(fitted_order(tt, ov) >= 1.7);
        CHECK(fitted_order(tt, zv) >= 2.7);
        CHECK(ch.t_handoff > 5e-3);
        CHECK(ch.t_max >= ch.t_handoff);
        if (b == ManifoldBranch::Unstable) {
            // coefficients of the map's axis component are those of x^3 q/4 at order 3
            CHECK(std::abs(double(ch.coef[3][2]) - 1000.0 / 6) < 1e-9);
        }
    }
}

TEST_CASE("k = 7 chart and raising the order") {
    Params p(0.5, 0.0);
    auto F = chart_oracle(ManifoldBranch::Unstable, p, 0.0, 10.0, 0.0);
    auto d = detect_normal_form(*F, 0);
    auto c7 = formal_solve(*F, d, 7, 0, ManifoldBranch::Unstable);
    auto r7 = invariance_defect(c7, geometric(1e-3, 3e-2, 8), *F);
    CHECK(r7.slope >= 10.5);
    // k -> 2k - N
    auto c12 = formal_solve(*F, d, 12, 0, ManifoldBranch::Unstable);
    auto r12 = invariance_defect(c12, geometric(3e-3, 3e-2, 8), *F);
    CHECK(r12.slope >= 15.5);
    // lower-order coefficients are not changed by raising the order
    for (int m = 0; m <= 7; ++m)
        for (int i = 0; i < 4; ++i) CHECK(abs(c7.coef[m][i] - c12.coef[m][i]) <= 1e-40 * (1 + abs(c7.coef[m][i])));
}

TEST_CASE("free resonant coefficient only reparametrizes the chart") {
    Params p(0.5, 0.0);
    auto F = chart_oracle(ManifoldBranch::Unstable, p, 0.3, 6.0, 0.0, 32);
    auto d = detect_normal_form(*F, 0);
    auto c0 = formal_solve(*F, d, 8, 0, ManifoldBranch::Unstable);
    auto c1 = formal_solve(*F, d, 8, 0, ManifoldBranch::Unstable, 0.7);
    CHECK(abs(c0.ctilde - c1.ctilde) < 1e-40);
    CHECK(c1.coef[4][0] == mp50(0.7));
    for (double t : {1e-3, 5e-3, 1e-2}) {
        // find s with K1(s)_q = K0(t)_q, then compare the rest
        MPoint z0 = c0.eval(mp50(t));
        mp50 s = t;
        for (int it = 0; it < 60; ++it) {
            MPoint z1 = c1.eval(s);
            mp50 ds = 1e-30;
            mp50 der = (c1.eval(s + ds)[0] - c1.eval(s - ds)[0]) / (2 * ds);
            s -= (z1[0] - z0[0]) / der;
        }
        MPoint z1 = c1.eval(s);
        for (int i = 1; i < 4; ++i) CHECK(double(abs(z1[i] - z0[i])) < 1e-10 * std::pow(t / 1e-2, 9));
    }
}

TEST_CASE("order solve failures") {
    NormalFormMap F(0.3, 0.05, 0.0, 3.0);
    ParabolicNormalData wrong;
    wrong.c = 0.31;
    wrong.period = 1.0;
    try {
        formal_solve(F, wrong, 8, 0);
        FAIL("expected OrderSolveFailure");
    } catch (const OrderSolveFailure& e) {
        CHECK(e.order() == 1);
    }
    ParabolicNormalData ok = detect_normal_form(F, 0);
    CHECK_THROWS_AS(formal_solve(F, ok, 3, 0), DomainError);
    ParabolicNormalData bad;
    bad.N = 1;
    CHECK_THROWS_AS(bad.validate(), DomainError);
}

TEST_CASE("chart text format round-trips bit for bit") {
    NormalFormMap F(0.3, 0.05, 0.25, 3.5);
    auto ch = formal_solve(F, detect_normal_form(F, 0), 9, 0, ManifoldBranch::Unstable);
    Params p(0.5, 0.0);
    auto F3 = chart_oracle(ManifoldBranch::Stable, p, 0.1, 7.0, 0.0, 16);
    auto ch3 = formal_solve(*F3, detect_normal_form(*F3, 1), 6, 1, ManifoldBranch::Stable);
    calibrate(ch3, *F3);
    for (const auto* c : {&ch, &ch3}) {
        std::ostringstream a;
        write_chart(a, *c);
        std::istringstream in(a.str());
        ManifoldChart back = read_chart(in);
        std::ostringstream b;
        write_chart(b, back);
        CHECK(a.str() == b.str());
        CHECK(back.branch == c->branch);
        CHECK(back.t_max == c->t_max);
        CHECK(back.c_map == c->c_map);
        CHECK(back.ctilde == c->ctilde);
        for (int m = 0; m <= c->k; ++m)
            for (int i = 0; i < 4; ++i) CHECK(back.coef[m][i] == c->coef[m][i]);
    }
    std::istringstream junk("# rtbp-manifold-chart 1\n# k 2\n0 0 0 0 0\n");
    CHECK_THROWS_AS(read_chart(junk), DomainError);
}

TEST_CASE("sector domain of the conjugacy") {
    ParabolicNormalData d;  // N = 4, c = 1/4
    auto ok = sector_check(d, 0.0, {0.1, 0.3});
    CHECK(ok.pass);
    CHECK(ok.worst_margin >= 0);
    CHECK(ok.b > 0);
    CHECK(ok.b <= ok.d);
    CHECK(std::abs(ok.bound_rho - std::cbrt(0.075)) < 1e-12);
    // a small ctilde does not change the verdict
    CHECK(sector_check(d, 0.05, {0.1, 0.3}).pass);
    auto bad = sector_check(d, 0.0, {0.1, 2.0});
    CHECK_FALSE(bad.pass);
    CHECK(bad.worst_margin < 0);
    CHECK(std::abs(bad.witness) > 0);
    // real segment: 0 < R(t) < t
    for (int j = 1; j <= 64; ++j) {
        double t = 0.3 * j / 64;
        double R = t - 0.25 * std::pow(t, 4);
        CHECK(R < t);
        CHECK(R > 0);
    }
    CHECK_THROWS_AS(sector_check(d, 0.0, {-0.1, 0.3}), DomainError);
}

TEST_CASE("globalized unstable manifold of the integrable problem is the separatrix") {
    Params p(0.0, 0.0);
    ChartConfig cfg;
    auto ch = compute_chart(ManifoldBranch::Unstable, p, 0.4, 5.0, 0.0, cfg);
    GlobalizeConfig g;
    g.n_seeds = 4;
    auto gm = globalize(ch, ch.t_handoff, p, g);
    CHECK(gm.seed_shift_mismatch < 10 * cfg.handoff_tol);
    double worst = 0;
    for (const auto& o : gm.orbits) {
        CHECK(o.samples.size() > 10);
        for (const auto& [t, m] : o.samples) worst = std::max(worst, separatrix_distance(m, 0.4, gm.branch));
    }
    CHECK(worst < 1e-7);
    // the last sample of each orbit is at perihelion
    for (const auto& o : gm.orbits) CHECK(std::abs(o.samples.back().second.y) < 1e-9);
}

TEST_CASE("seed shift consistency for the restricted problem") {
    Params p(0.5, 0.0);
    ChartConfig cfg;
    cfg.k = 8;
    cfg.steps = 32;
    for (auto b : {ManifoldBranch::Unstable, ManifoldBranch::Stable}) {
        auto ch = compute_chart(b, p, 1.0, 6.0, 0.5, cfg);
        GlobalizeConfig g;
        g.n_seeds = 2;
        g.horizon = 20.0;
        auto gm = globalize(ch, ch.t_handoff, p, g);
        CHECK(gm.seed_shift_mismatch < 10 * cfg.handoff_tol);
        CHECK(gm.orbits.size() == 2);
        CHECK_THROWS_AS(globalize(ch, 2 * ch.t_max + 1, p, g), DomainError);
    }
}

TEST_CASE("straightened local coordinates") {
    Params p(0.5, 0.0);
    ChartConfig cfg;
    cfg.k = 6;
    cfg.steps = 32;
    const double th = 0.3, G0 = 5.0;
    auto sc = straighten_local(p, th, G0, 0.0, cfg);
    for (double u : {2e-3, 5e-3, 1e-2, 2e-2}) {
        Vec4 on_u{u, 0, th, G0}, on_s{0, u, th, G0};
        CHECK(std::abs(sc.field(on_u, 0.0)[1]) < 1e-8);
        CHECK(std::abs(sc.field(on_s, 0.0)[0]) < 1e-8);
        // the coordinate change maps the charts to the planes
        Vec4 zu = sc.backward(on_u, 0.0);
        Vec4 back = sc.forward(zu, 0.0);
        for (int i = 0; i < 4; ++i) CHECK(std::abs(back[i] - on_u[i]) < 1e-15);
    }
    // common factor f with f(q, p) = q + p + O_2
    std::vector<std::array<double, 2>> x;
    std::vector<double> fq, fp;
    for (double Q : {2e-4, 5e-4, 1e-3, 1.5e-3, 2e-3})
        for (double P : {2e-4, 5e-4, 1e-3, 1.5e-3, 2e-3}) {
            Vec4 f = sc.field({Q, P, th, G0}, 0.0);
            x.push_back({Q, P});
            fq.push_back(std::cbrt(4 * f[0] / Q));
            fp.push_back(std::cbrt(-4 * f[1] / P));
        }
    for (const auto* fv : {&fq, &fp}) {
        // least squares f = aQ + bP + quadratic
        Eigen::MatrixXd A(x.size(), 5);
        Eigen::VectorXd y(x.size());
        for (std::size_t i = 0; i < x.size(); ++i) {
            double Q = x[i][0], P = x[i][1];
            A.row(i) << Q, P, Q * Q, Q * P, P * P;
            y(i) = (*fv)[i];
        }
        Eigen::VectorXd c = A.colPivHouseholderQr().solve(y);
        CHECK(std::abs(c(0) - 1) < 1e-3);
        CHECK(std::abs(c(1) - 1) < 1e-3);
    }
    for (std::size_t i = 0; i < fq.size(); ++i) CHECK(std::abs(fq[i] / fp[i] - 1) < 1e-2);

    CHECK_THROWS_AS(check_chart_pair(sc.unstable(), sc.stable(), 10.0), ChartMismatch);
    CHECK_THROWS_AS(check_chart_pair(sc.stable(), sc.unstable(), 1e-3), ChartMismatch);
    ManifoldChart moved = sc.stable();
    moved.base[3] += 0.1;
    CHECK_THROWS_AS(check_chart_pair(sc.unstable(), moved, 1e-3), ChartMismatch);
}

}  // TEST_SUITE
