#include "rtbp/acceptance.hpp"

#include <chrono>
#include <cmath>
#include <numbers>
#include <sstream>

#include "rtbp/separatrix.hpp"

namespace rtbp {

namespace {

constexpr double pi = std::numbers::pi;

std::string fmt(double v) {
    std::ostringstream os;
    os.precision(7);
    os << v;
    return os.str();
}

struct Outcome {
    bool pass;
    std::string detail;
};

Outcome separatrix_residual() {
    std::vector<double> grid;
    for (int k = 0; k <= 400; ++k) grid.push_back(-20 + 0.1 * k);
    double worst = 0;
    for (double G0 : {1.0, 2.0, 5.0}) worst = std::max(worst, verify_separatrix(G0, grid, Params(0.0, 0.0)));
    return {worst < 1e-10, "max residual " + fmt(worst) + " (limit 1e-10)"};
}

Outcome jacobi_drift() {
    Params p(0.5, 0.0);
    IntegratorConfig ic{1e-13, 1e-15};
    PolarState s{3.0, 0.2, 0.05, 1.8, 0.0};
    const double J0 = jacobi_integral(s, p);
    auto tr = integrate(to_vec(polar_to_cartesian(s)), 0.0, 100 * pi, Chart::Cartesian, p, ic);
    double worst = 0;
    for (const auto& [t, y] : tr.samples())
        worst = std::max(worst, std::abs(jacobi_integral(cartesian_to_polar(cartesian_from_vec(y, t)), p) - J0) /
                                    std::abs(J0));
    return {worst < 1e-9, "max |J - J0|/|J0| = " + fmt(worst) + " over 50 periods (limit 1e-9)"};
}

Outcome critical(const RunConfig& cfg) {
    Params p(0.5, 0.0);
    double worst = 0, gap = 0;
    for (double G : {5.0, 8.0, 12.0}) {
        auto c = critical_points(0.0, G, 0.0, p, cfg.quad);
        worst = std::max({worst, c.residual_minus, c.residual_plus});
        gap = std::max(gap, std::abs(c.sigma_plus - c.sigma_minus - pi));
    }
    return {worst < 1e-9 && gap == 0.0,
            "max |dL(sigma*)|/max|dL| = " + fmt(worst) + ", |sigma+ - sigma- - pi| = " + fmt(gap)};
}

Outcome twist(const RunConfig& cfg) {
    const double mu = 0.5;
    Params p(mu, 0.0);
    bool ok = true;
    std::string d;
    for (Branch b : {Branch::Minus, Branch::Plus}) {
        ScatteringModel m(b, p, cfg.quad);
        double r8 = m.f(8) / ScatteringModel::f_asymptotic(8, mu);
        double r16 = m.f(16) / ScatteringModel::f_asymptotic(16, mu);
        double r32 = m.f(32) / ScatteringModel::f_asymptotic(32, mu);
        double slope = std::log(std::abs(r32 - 1) / std::abs(r8 - 1)) / std::log(4.0);
        ok = ok && std::abs(r8 - 1) <= 0.1 && std::abs(r16 - 1) <= 0.01 && std::abs(r32 - 1) <= 1e-3 &&
             std::abs(slope + 4) <= 0.5;
        d += std::string(d.empty() ? "" : "; ") + branch_name(b) + ": ratios " + fmt(r8) + ", " + fmt(r16) + ", " +
             fmt(r32) + " at G = 8, 16, 32, slope " + fmt(slope);
    }
    return {ok, d};
}

Outcome reduced(const RunConfig& cfg) {
    const double mu = 0.5, G = 16;
    Params p(mu, 0.0);
    bool ok = true;
    std::string d;
    for (Branch b : {Branch::Minus, Branch::Plus}) {
        double r = reduced_poincare(G, b, p, cfg.quad) * 2 * G * G * G / (pi * mu * (1 - mu));
        ok = ok && r >= 0.99 && r <= 1.01;
        d += std::string(d.empty() ? "" : ", ") + branch_name(b) + " " + fmt(r);
    }
    return {ok, "normalized L* at G = 16: " + d};
}

Outcome defect(const RunConfig& cfg) {
    Params p(0.5, 0.0);
    std::vector<double> ts;
    for (int i = 0; i < 10; ++i) ts.push_back(1e-3 * std::pow(30.0, i / 9.0));
    ChartConfig cc = cfg.chart;
    cc.k = 8;
    bool ok = true;
    std::string d;
    for (auto b : {ManifoldBranch::Unstable, ManifoldBranch::Stable}) {
        auto ch = compute_chart(b, p, 0.0, 10.0, 0.0, cc);
        auto F = chart_oracle(b, p, 0.0, 10.0, 0.0, cc.steps);
        double slope = invariance_defect(ch, ts, *F).slope;
        ok = ok && slope >= 11.5;
        d += std::string(d.empty() ? "" : ", ") + manifold_branch_name(b) + " " + fmt(slope);
    }
    return {ok, "defect order on [1e-3, 3e-2]: " + d + " (need >= 11.5)"};
}

Outcome normal_form(const RunConfig& cfg) {
    Params p(0.5, 0.0);
    bool ok = true;
    std::string d;
    for (auto b : {ManifoldBranch::Stable, ManifoldBranch::Unstable}) {
        auto F = chart_oracle(b, p, 0.0, 10.0, 0.0, cfg.chart.steps);
        auto nf = detect_normal_form(*F, b == ManifoldBranch::Stable ? 1 : 0);
        ok = ok && nf.N == 4 && std::abs(nf.c - 0.25) <= 1e-6;
        d += std::string(d.empty() ? "" : "; ") + manifold_branch_name(b) + ": N = " + std::to_string(nf.N) +
             ", c - 1/4 = " + fmt(nf.c - 0.25);
    }
    return {ok, d};
}

Outcome lambda(const RunConfig& cfg) {
    LambdaConfig lc = cfg.lambda;
    lc.eps_tilde = 0.1;
    lc.q_f = 1e-2;
    lc.delta = 1e-6;
    try {
        auto t = lambda_transition(cfg.model, lc);
        return {t.violations == 0 && t.S >= 8.373 && t.S <= 10.234,
                "S = " + fmt(t.S) + " in [" + fmt(t.S_lo) + ", " + fmt(t.S_hi) + "], " +
                    std::to_string(t.samples.size()) + " samples, 0 violations"};
    } catch (const BoundViolation& e) {
        return {false, std::string(e.what()) + " at s = " + fmt(e.witness_time())};
    }
}

Outcome homoclinic(const RunConfig& cfg) {
    HomoclinicConfig hc = cfg.homoclinic;
    hc.measure_splitting = false;
    HomoclinicSolver solver(Params(0.5, 0.0), hc);
    std::string d;
    bool ok = true;
    for (Branch b : {Branch::Minus, Branch::Plus}) {
        auto h = solver.solve(b, 0.0, 5.0, 0.0);
        ok = ok && h.residual < hc.match_tol && !h.coincident;
        d += std::string(branch_name(b)) + ": residual " + fmt(h.residual) + ", seed distance " +
             fmt(h.seed_distance) + ", predicted splitting " + fmt(h.splitting_predicted) + "; ";
    }
    auto z = find_homoclinic(Branch::Minus, 0.0, 5.0, 0.0, Params(0.0, 0.0), hc);
    ok = ok && z.coincident;
    d += std::string("mu = 0: ") + (z.coincident ? "coincident" : "not coincident") + " (max |Delta| " +
         fmt(z.splitting) + ")";
    return {ok, d};
}

Outcome oscillation(const RunConfig& cfg) {
    bool ok = true;
    std::string d;
    for (double e0 : {0.0, 1e-3}) {
        auto r = oscillation_demo(Params(0.5, e0), 5.0, 2, cfg.oscillation_config());
        ok = ok && r.pass;
        d += std::string(d.empty() ? "" : "; ") + "e0 = " + fmt(e0) + ": " + r.verdict + ", " + r.reason;
    }
    return {ok, d};
}

Outcome bounded(const RunConfig& cfg) {
    auto ch = build_chain(0.0, 5.0, BranchPolicy::Minus, 50, 4.0, 6.0, Params(0.5, 1e-3), cfg.chain_config());
    return {ch.max_deviation < 0.1, "max |G_k - G_0| = " + fmt(ch.max_deviation) + " over 50 links (limit 0.1)"};
}

}  // namespace

bool criterion_is_slow(int id) { return id == 10; }

std::string criterion_title(int id) {
    static const char* t[] = {"separatrix residual",       "circular first integral",
                              "melnikov critical points",  "twist asymptotics",
                              "reduced poincare leading term", "parameterization defect order",
                              "normal form data",          "lambda lemma bounds",
                              "homoclinic existence",      "oscillation demonstration",
                              "bounded elliptic chain"};
    if (id < 1 || id > kCriteria) throw DomainError("no criterion " + std::to_string(id));
    return t[id - 1];
}

CriterionResult run_criterion(int id, const RunConfig& cfg) {
    CriterionResult r;
    r.id = id;
    r.title = criterion_title(id);
    r.slow = criterion_is_slow(id);
    auto t0 = std::chrono::steady_clock::now();
    try {
        Outcome o;
        switch (id) {
            case 1: o = separatrix_residual(); break;
            case 2: o = jacobi_drift(); break;
            case 3: o = critical(cfg); break;
            case 4: o = twist(cfg); break;
            case 5: o = reduced(cfg); break;
            case 6: o = defect(cfg); break;
            case 7: o = normal_form(cfg); break;
            case 8: o = lambda(cfg); break;
            case 9: o = homoclinic(cfg); break;
            case 10: o = oscillation(cfg); break;
            default: o = bounded(cfg); break;
        }
        r.pass = o.pass;
        r.detail = o.detail;
    } catch (const std::exception& e) {
        r.pass = false;
        r.detail = e.what();
    }
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return r;
}

std::vector<CriterionResult> run_acceptance(const RunConfig& cfg, const std::vector<int>& selected, bool include_slow,
                                            const std::function<void(const CriterionResult&)>& on_result) {
    std::vector<CriterionResult> out;
    for (int id = 1; id <= kCriteria; ++id) {
        if (!selected.empty() && std::find(selected.begin(), selected.end(), id) == selected.end()) continue;
        CriterionResult r;
        if (criterion_is_slow(id) && !include_slow) {
            r.id = id;
            r.title = criterion_title(id);
            r.slow = true;
            r.skipped = true;
            r.detail = "slow suite";
        } else {
            r = run_criterion(id, cfg);
        }
        if (on_result) on_result(r);
        out.push_back(r);
    }
    return out;
}

std::string format_result(const CriterionResult& r) {
    std::ostringstream os;
    os << (r.skipped ? "[SKIP] " : r.pass ? "[PASS] " : "[FAIL] ") << r.id << ' ' << r.title << ": " << r.detail;
    if (!r.skipped) {
        os.precision(3);
        os << " (" << r.seconds << " s)";
    }
    return os.str();
}

}  // namespace rtbp
