#include <cmath>
#include <cstdlib>
#include <numbers>

#include "doctest.h"
#include "fixtures.hpp"
#include "rtbp/chain.hpp"

using namespace rtbp;
using std::numbers::pi;

namespace {

HomoclinicConfig quick() {
    HomoclinicConfig c;
    c.measure_splitting = false;
    return c;
}

}  // namespace

TEST_SUITE("chain") {

TEST_CASE("thread count from the environment") {
    ::setenv("RTBP_THREADS", "3", 1);
    CHECK(thread_count() == 3);
    std::vector<int> hit(10, 0);
    parallel_for(10, [&](int i) { hit[i] += i; });
    for (int i = 0; i < 10; ++i) CHECK(hit[i] == i);
    CHECK_THROWS_AS(parallel_for(4, [](int i) { if (i == 2) throw DomainError("x"); }), DomainError);
    ::setenv("RTBP_THREADS", "zero", 1);
    CHECK_THROWS_AS(thread_count(), ConfigError);
    ::unsetenv("RTBP_THREADS");
    CHECK(thread_count() >= 1);
}

TEST_CASE("homoclinic config validation") {
    HomoclinicConfig c;
    c.match_tol = 0;
    CHECK_THROWS_AS(find_homoclinic(Branch::Minus, 0, 5, 0, Params(0.5, 0), c), DomainError);
    c = {};
    c.phase_step = 2;
    CHECK_THROWS_AS(HomoclinicSolver(Params(0.5, 0), c), DomainError);
    CHECK_THROWS_AS(find_homoclinic(Branch::Minus, 0, 0, 0, Params(0.5, 0)), DomainError);
}

TEST_CASE("equal masses at mu = 0: manifolds coincide") {
    auto h = find_homoclinic(Branch::Minus, 0.3, 5.0, 0.0, Params(0.0, 0.0));
    CHECK(h.coincident);
    CHECK_FALSE(h.resolved);
    CHECK(h.splitting < 1e-8);
    CHECK(h.splitting_predicted == 0.0);
    CHECK(h.residual < 1e-8);
    CHECK(std::abs(h.alpha1 - h.alpha0) < 1e-8);
    CHECK(h.point.x == doctest::Approx(0.4).epsilon(1e-9));
}

TEST_CASE("homoclinic near the Melnikov seed at mu = 0.5, G = 5") {
    const Params p(0.5, 0.0);
    HomoclinicSolver solver(p, quick());
    for (Branch b : {Branch::Minus, Branch::Plus}) {
        CAPTURE(branch_name(b));
        auto h = solver.solve(b, 0.3, 5.0, 0.0);
        CHECK(h.residual < 1e-8);
        CHECK_FALSE(h.coincident);
        CHECK(h.seed_distance > 0);
        CHECK(h.seed_distance <= 2 * 0.5 * std::pow(5.0, -4));
        // the splitting is e^{-G^3/3} small: far below double resolution
        CHECK(h.splitting_predicted < 1e-30);
        CHECK(h.G1 == 5.0);
        auto [a1, G1] = ScatteringModel(b, p).apply(0.3, 5.0);
        CHECK(G1 == 5.0);
        CHECK(std::abs(wrap_pi(h.alpha1 - a1)) < 1e-5);
        CHECK(std::abs(wrap_pi(h.point.s - h.seed_phase)) < 1e-2);
    }
}

TEST_CASE("splitting slope against the harmonic prediction at mu = 0.3") {
    const Params p(0.3, 0.0);
    HomoclinicSolver solver(p);
    auto h3 = solver.solve(Branch::Minus, 0.0, 3.0, 0.0);
    auto h35 = solver.solve(Branch::Minus, 0.0, 3.5, 0.0);
    CHECK(h3.resolved);
    CHECK(h35.resolved);
    CHECK(h3.splitting_predicted == doctest::Approx(fixtures::kSplitG3Mu03).epsilon(1e-4));
    CHECK(h35.splitting_predicted == doctest::Approx(fixtures::kSplitG35Mu03).epsilon(1e-4));
    CHECK(std::abs(h3.splitting) == doctest::Approx(fixtures::kSplitG3Mu03).epsilon(0.03));
    CHECK(std::abs(h35.splitting) == doctest::Approx(fixtures::kSplitG35Mu03).epsilon(0.03));
    const double ratio = std::abs(h3.splitting / h35.splitting);
    CHECK(ratio == doctest::Approx(fixtures::kSplitG3Mu03 / fixtures::kSplitG35Mu03).epsilon(0.03));
    CHECK(h3.residual < 1e-8);
}

TEST_CASE("lambda lemma transition bounds") {
    LambdaModel m{0.3, -0.2, 0.1, 0.4, {1.0, 0.5}};
    auto r = lambda_transition(m);
    CHECK(r.S_lo == doctest::Approx(8.373).epsilon(1e-4));
    CHECK(r.S_hi == doctest::Approx(10.234).epsilon(1e-4));
    CHECK(r.S >= r.S_lo);
    CHECK(r.S <= r.S_hi);
    CHECK(r.violations == 0);
    CHECK(r.exit.q == doctest::Approx(1e-2).epsilon(1e-12));
    CHECK(r.exit.p <= r.p_bound);
    CHECK(r.z_drift <= r.z_bound);
    CHECK(r.z_drift > 0);
    CHECK(r.T > 0);
    CHECK(r.samples.size() >= 1000);
}

TEST_CASE("pure hyperbolic model leaves in ln(q_f / delta)") {
    auto r = lambda_transition(LambdaModel::pure());
    CHECK(r.S == doctest::Approx(std::log(1e4)).epsilon(1e-10));
    CHECK(r.exit.p == doctest::Approx(1e-6).epsilon(1e-9));
    CHECK(r.z_drift == 0.0);
    // t' = (q + p)^-3 along q = delta e^s, p = p0 e^-s
    CHECK(r.T > 0);
}

TEST_CASE("lambda lemma violations are reported") {
    LambdaModel strong{500.0, 0, 0, 0, {0, 0}};
    try {
        lambda_transition(strong);
        FAIL("expected a bound violation");
    } catch (const BoundViolation& e) {
        CHECK(e.witness_time() > 0);
    }
    LambdaConfig c;
    c.eps_tilde = 0.2;
    CHECK_THROWS_AS(lambda_transition(LambdaModel::pure(), c), DomainError);
    c = {};
    c.delta = 0.1;
    CHECK_THROWS_AS(lambda_transition(LambdaModel::pure(), c), DomainError);
}

TEST_CASE("circular chain keeps G exactly") {
    const Params p(0.5, 0.0);
    auto ch = build_chain(0.2, 5.0, BranchPolicy::Alternate, 200, 4.0, 6.0, p);
    REQUIRE(ch.nodes.size() == 201);
    REQUIRE(ch.links.size() == 200);
    for (const auto& n : ch.nodes) CHECK(n.G == 5.0);
    CHECK(ch.max_deviation == 0.0);
    CHECK(ch.net_drift == 0.0);
    CHECK(ch.bounded);
    CHECK_FALSE(ch.elliptic);
    const double fm = ScatteringModel(Branch::Minus, p).f(5.0);
    const double fp = ScatteringModel(Branch::Plus, p).f(5.0);
    CHECK(ch.nodes[1].alpha == doctest::Approx(0.2 - fm).epsilon(1e-15));
    CHECK(ch.nodes[2].alpha == doctest::Approx(0.2 - fm - fp).epsilon(1e-15));
    CHECK(ch.links[1].branch == Branch::Plus);
    CHECK_FALSE(ch.links[0].witness.has_value());
    CHECK_THROWS_AS(build_chain(0, 7.0, BranchPolicy::Minus, 3, 4.0, 6.0, p), DomainError);
    CHECK(branch_policy_from_name("alternate") == BranchPolicy::Alternate);
    CHECK_THROWS_AS(branch_policy_from_name("sideways"), DomainError);
}

TEST_CASE("elliptic chain stays in a narrow band") {
    const Params p(0.5, 1e-3);
    auto ch = build_chain(0.0, 5.0, BranchPolicy::Minus, 50, 4.0, 6.0, p);
    CHECK(ch.elliptic);
    CHECK(ch.bounded);
    CHECK(ch.max_deviation < 0.1);
    CHECK(ch.max_deviation > 0.0);
    double dev = 0;
    for (const auto& n : ch.nodes) dev = std::max(dev, std::abs(n.G - 5.0));
    CHECK(dev == ch.max_deviation);
    CHECK(ch.net_drift == ch.nodes.back().G - 5.0);
}

TEST_CASE("shadowing needs transversal witnesses") {
    const Params p(0.5, 0.0);
    auto bare = build_chain(0.0, 5.0, BranchPolicy::Minus, 1, 4.0, 6.0, p);
    CHECK_THROWS_AS(shadow_chain(bare, p), DomainError);
    ChainConfig cc;
    cc.witnesses = -1;
    cc.homoclinic = quick();
    const Params p0(0.0, 0.0);
    auto flat = build_chain(0.0, 5.0, BranchPolicy::Minus, 1, 4.0, 6.0, p0, cc);
    REQUIRE(flat.links[0].witness);
    CHECK(flat.links[0].witness->coincident);
    CHECK_THROWS_AS(shadow_chain(flat, p0), DegenerateSplitting);
    ShadowConfig sc;
    sc.delta = {0.01, 0.02};
    CHECK_THROWS_AS(shadow_chain(bare, p, sc), DomainError);
}

TEST_CASE("one-link shadowing run") {
    const Params p(0.5, 0.0);
    ChainConfig cc;
    cc.witnesses = -1;
    cc.homoclinic = quick();
    auto ch = build_chain(0.0, 5.0, BranchPolicy::Minus, 1, 4.0, 6.0, p, cc);
    auto run = shadow_chain(ch, p);
    CHECK(run.complete);
    CHECK(run.links_shadowed == 1);
    REQUIRE(run.visits.size() == 2);
    CHECK_FALSE(run.visits[0].lambda);
    CHECK(run.visits[1].lambda);
    CHECK(run.visits[1].distance <= run.visits[1].radius);
    CHECK(visits_interleave(run));
    REQUIRE(run.boxes.size() == 1);
    CHECK(run.boxes[0].first < run.epsilon);
    CHECK(run.epsilon < run.boxes[0].second);
    REQUIRE(run.excursions.size() == 1);
    CHECK(run.excursions[0].r_max > 10 * run.excursions[0].r_min);
    CHECK(run.excursions[0].t_start < run.excursions[0].t_apo);
    CHECK(run.excursions[0].t_apo < run.excursions[0].t_end);

    ShadowConfig rc;
    rc.reverse_time = true;
    auto back = shadow_chain(ch, p, rc);
    CHECK(back.reversed);
    CHECK(visits_interleave(back));
    CHECK(back.epsilon == run.epsilon);
    CHECK(back.visits[1].t == -run.visits[1].t);
    CHECK(back.visits[1].state.alpha == -run.visits[1].state.alpha);

    ShadowRun bad = run;
    std::swap(bad.visits[0].t, bad.visits[1].t);
    CHECK_FALSE(visits_interleave(bad));
}

TEST_CASE("oscillation demo refuses coincident manifolds") {
    OscillationConfig oc;
    oc.homoclinic = quick();
    auto r = oscillation_demo(Params(0.0, 0.0), 5.0, 2, oc);
    CHECK_FALSE(r.pass);
    CHECK(r.verdict == "FAIL");
    CHECK(r.reason.find("coincident") != std::string::npos);
    CHECK_FALSE(r.run.has_value());
}

}  // TEST_SUITE
