#include "rtbp/chain.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <numbers>
#include <thread>

#include <boost/math/tools/roots.hpp>

#include "rtbp/coords.hpp"
#include "rtbp/dop853.hpp"
#include "rtbp/field.hpp"
#include "rtbp/flow.hpp"

namespace rtbp {

namespace {

constexpr double pi = std::numbers::pi;
constexpr double two_pi = 2 * std::numbers::pi;

double sgn(double v) { return v < 0 ? -1.0 : 1.0; }

}  // namespace

int thread_count() {
    if (const char* env = std::getenv("RTBP_THREADS")) {
        char* end = nullptr;
        long n = std::strtol(env, &end, 10);
        if (end != env && *end == '\0' && n >= 1 && n <= 1024) return int(n);
        throw ConfigError("RTBP_THREADS must be a positive integer");
    }
    unsigned h = std::thread::hardware_concurrency();
    return h == 0 ? 1 : int(h);
}

void parallel_for(int n, const std::function<void(int)>& f) {
    const int nt = std::min(thread_count(), n);
    if (nt <= 1) {
        for (int i = 0; i < n; ++i) f(i);
        return;
    }
    std::exception_ptr err;
    std::mutex m;
    std::vector<std::thread> pool;
    for (int w = 0; w < nt; ++w)
        pool.emplace_back([&, w] {
            for (int i = w; i < n; i += nt) {
                try {
                    f(i);
                } catch (...) {
                    std::lock_guard<std::mutex> g(m);
                    if (!err) err = std::current_exception();
                }
            }
        });
    for (auto& t : pool) t.join();
    if (err) std::rethrow_exception(err);
}

// ---------------------------------------------------------------- perihelion curves

PerihelionCurve::PerihelionCurve(ManifoldChart chart, const Params& p, const IntegratorConfig& ic, double t0)
    : chart_(std::move(chart)), p_(p), ic_(ic) {
    p_.validate();
    ic_.validate();
    t0_ = t0 > 0 ? t0 : chart_.t_handoff;
    if (!(t0_ > 0)) throw DomainError("chart has no handoff range");
    if (t0_ > chart_.t_max) throw DomainError("seed parameter beyond the chart validity radius");
    t1_ = chart_.R(t0_);
}

PerihelionPoint PerihelionCurve::at(double lambda) const {
    const bool unstable = chart_.branch == ManifoldBranch::Unstable;
    const double t = t1_ + (t0_ - t1_) * lambda;
    Vec4 m0 = to_vec(from_local(local_from_vec(chart_.eval(t), chart_.s0)));
    Section peri{"perihelion", [](double, const Vec4& v) { return v[2]; }, unstable ? 1 : -1};
    const double span = ic_.max_time;
    SectionEvent ev = integrate_to_section(m0, chart_.s0, chart_.s0 + (unstable ? span : -span), Chart::McGehee,
                                           p_, peri, ic_);
    return {lambda, ev.t, ev.state[0], ev.state[1], ev.state[3]};
}

PerihelionPoint PerihelionCurve::solve(const std::function<double(const PerihelionPoint&)>& g, double target,
                                       double tol) const {
    PerihelionPoint a = at(0.0), b = at(1.0);
    double ga = g(a), gb = g(b);
    const double d = gb - ga;
    if (!(std::abs(std::abs(d) - two_pi) < 0.5))
        throw NoIntersection("passage function does not wind once over the fundamental domain");
    // unwrapped target inside [ga, gb]
    double u = wrap_2pi(target - ga);
    double T = d > 0 ? ga + u : ga - (two_pi - u);
    double lo = 0, hi = 1, flo = ga - T, fhi = gb - T;
    if (std::abs(flo) < tol) return a;
    if (std::abs(fhi) < tol) return b;
    double x0 = lo, f0 = flo, x1 = hi, f1 = fhi;
    for (int it = 0; it < 60; ++it) {
        double x = x1 - f1 * (x1 - x0) / (f1 - f0);
        if (!(x > lo && x < hi)) x = 0.5 * (lo + hi);
        PerihelionPoint pt = at(x);
        double fx = g(pt) - T;
        if (std::abs(fx) < tol || hi - lo < 1e-15) return pt;
        if ((fx < 0) == (flo < 0)) {
            lo = x;
            flo = fx;
        } else {
            hi = x;
            fhi = fx;
        }
        x0 = x1;
        f0 = f1;
        x1 = x;
        f1 = fx;
    }
    throw NoIntersection("perihelion passage solve did not converge");
}

PerihelionPoint PerihelionCurve::at_phase(double s_target) const {
    return solve([](const PerihelionPoint& q) { return q.s; }, s_target);
}

// ---------------------------------------------------------------- homoclinics

void HomoclinicConfig::validate() const {
    integrator.validate();
    if (!(match_tol > 0 && coincidence_tol > 0 && noise_floor > 0 && base_step > 0))
        throw DomainError("homoclinic tolerances must be positive");
    if (!(phase_step > 0 && phase_step < 1)) throw DomainError("phase step must lie in (0, 1)");
    if (coincidence_samples < 2 || max_iter < 1) throw DomainError("bad homoclinic iteration counts");
    if (chart.k < 4) throw DomainError("chart order must be at least 4");
}

HomoclinicSolver::HomoclinicSolver(const Params& p, const HomoclinicConfig& cfg) : p_(p), cfg_(cfg) {
    p_.validate();
    cfg_.validate();
}

const PerihelionCurve& HomoclinicSolver::curve(ManifoldBranch b, double theta, double G, double s0) {
    std::array<double, 4> key{b == ManifoldBranch::Stable ? 0.0 : 1.0, theta, G, s0};
    auto it = cache_.find(key);
    if (it != cache_.end()) return *it->second;
    ManifoldChart ch = compute_chart(b, p_, theta, G, s0, cfg_.chart);
    auto c = std::make_unique<PerihelionCurve>(std::move(ch), p_, cfg_.integrator);
    return *cache_.emplace(key, std::move(c)).first->second;
}

double HomoclinicSolver::splitting_function(double alpha0, double G0, double s0, double s_p, PerihelionPoint* uout,
                                            double* a1out, double* G1out, double* resout) {
    PerihelionPoint U, S;
    double alpha1 = 0, G1 = G0;
    if (p_.e0 == 0.0) {
        // rotating (alpha, s) together maps solutions to solutions: one chart per G
        const PerihelionCurve& cu = curve(ManifoldBranch::Unstable, 0.0, G0, 0.0);
        const PerihelionCurve& cs = curve(ManifoldBranch::Stable, 0.0, G0, 0.0);
        U = cu.at_phase(s_p - alpha0);
        U.s += alpha0;
        U.alpha += alpha0;
        const double target = U.alpha - U.s;
        S = cs.solve([](const PerihelionPoint& q) { return q.alpha - q.s; }, target);
        double c = U.s - S.s;
        alpha1 = alpha0 + wrap_pi(c - alpha0);
        S.s += c;
        S.alpha += c;
    } else {
        U = curve(ManifoldBranch::Unstable, alpha0, G0, s0).at_phase(s_p);
        auto stable_at = [&](double th, double G) {
            ManifoldChart ch = compute_chart(ManifoldBranch::Stable, p_, th, G, s0, cfg_.chart);
            return PerihelionCurve(std::move(ch), p_, cfg_.integrator).at_phase(U.s);
        };
        auto F = [&](const PerihelionPoint& q) {
            return std::array<double, 2>{wrap_pi(q.alpha - U.alpha), q.G - U.G};
        };
        // start from the base point of the circular connection
        const PerihelionCurve& c0 = curve(ManifoldBranch::Stable, alpha0, G0, s0);
        PerihelionPoint S0 = c0.solve([](const PerihelionPoint& q) { return q.alpha - q.s; }, U.alpha - U.s);
        alpha1 = alpha0 + wrap_pi(U.s - S0.s);
        G1 = G0;
        const double h = cfg_.base_step;
        for (int it = 0;; ++it) {
            if (it >= cfg_.max_iter) throw NoIntersection("future base point iteration did not converge");
            S = stable_at(alpha1, G1);
            auto r = F(S);
            if (std::max(std::abs(r[0]), std::abs(r[1])) < 0.1 * cfg_.match_tol) break;
            auto ra = F(stable_at(alpha1 + h, G1));
            auto rg = F(stable_at(alpha1, G1 + h));
            double j00 = (ra[0] - r[0]) / h, j01 = (rg[0] - r[0]) / h;
            double j10 = (ra[1] - r[1]) / h, j11 = (rg[1] - r[1]) / h;
            double det = j00 * j11 - j01 * j10;
            if (!(std::abs(det) > 0)) throw DegenerateSplitting("singular base point Jacobian");
            alpha1 -= (j11 * r[0] - j01 * r[1]) / det;
            G1 -= (-j10 * r[0] + j00 * r[1]) / det;
        }
    }
    double res = std::max({std::abs(wrap_pi(U.alpha - S.alpha)), std::abs(U.G - S.G), std::abs(U.x - S.x),
                           std::abs(wrap_pi(U.s - S.s))});
    if (uout) *uout = U;
    if (a1out) *a1out = alpha1;
    if (G1out) *G1out = G1;
    if (resout) *resout = res;
    return U.x - S.x;
}

HomoclinicIntersection HomoclinicSolver::solve(Branch b, double alpha0, double G0, double s0) {
    if (!(std::abs(G0) > 0)) throw DomainError("homoclinic needs G0 != 0");
    HomoclinicIntersection out;
    out.branch = b;
    out.alpha0 = alpha0;
    out.G0 = G0;
    out.s0 = s0;
    const double G = std::abs(G0);
    const double alpha_p = alpha0 + pi * sgn(G0);
    out.seed_phase = alpha_p + (b == Branch::Plus ? pi : 0.0);

    Harmonics hm = harmonics(G, Params(p_.mu, 0.0, p_.collision_floor));
    const bool constant_L = hm.lowest() == 0;
    if (!constant_L)
        out.splitting_predicted =
            0.5 * G * (1 - 4 / (G * G * G)) * std::abs(hm.d2theta(b == Branch::Plus ? pi : 0.0).value());

    PerihelionPoint U;
    double a1 = 0, G1 = 0, res = 0;
    double d0 = splitting_function(alpha0, G0, s0, out.seed_phase, &U, &a1, &G1, &res);
    double s_root = out.seed_phase;

    if (constant_L) {
        double worst = std::abs(d0);
        for (int j = 1; j < cfg_.coincidence_samples; ++j)
            worst = std::max(worst, std::abs(splitting_function(
                                        alpha0, G0, s0, out.seed_phase + two_pi * j / cfg_.coincidence_samples)));
        out.splitting = worst;
        out.coincident = worst < cfg_.coincidence_tol;
        if (!out.coincident)
            throw DegenerateSplitting("constant Poincare function but the manifolds split by " +
                                      std::to_string(worst));
    } else if (cfg_.measure_splitting) {
        const double h = cfg_.phase_step;
        double dp = splitting_function(alpha0, G0, s0, s_root + h);
        double dm = splitting_function(alpha0, G0, s0, s_root - h);
        out.splitting = (dp - dm) / (2 * h);
        out.resolved = std::abs(out.splitting) * h > 10 * cfg_.noise_floor;
        if (out.resolved) {
            // secant on the passage phase
            double x0 = s_root, f0 = d0, x1 = s_root + h, f1 = dp;
            for (int it = 0;; ++it) {
                if (it >= cfg_.max_iter) throw NoIntersection("splitting function secant did not converge");
                if (std::abs(f0) < 1e-3 * cfg_.match_tol) break;
                double x = x0 - f0 * (x0 - x1) / (f0 - f1);
                if (std::abs(wrap_pi(x - out.seed_phase)) > pi / 4)
                    throw NoIntersection("seed outside the basin of the intersection");
                x1 = x0;
                f1 = f0;
                x0 = x;
                f0 = splitting_function(alpha0, G0, s0, x, &U, &a1, &G1, &res);
            }
            s_root = x0;
            d0 = f0;
            double sp = splitting_function(alpha0, G0, s0, s_root + h);
            double sm = splitting_function(alpha0, G0, s0, s_root - h);
            out.splitting = (sp - sm) / (2 * h);
            if (std::abs(out.splitting) * h < 10 * cfg_.noise_floor)
                throw DegenerateSplitting("tangential intersection: slope " + std::to_string(out.splitting));
        }
    }
    if (!(res < cfg_.match_tol)) throw NoIntersection("matching residual " + std::to_string(res));
    // the forcing is 2 pi periodic in s: report the passage near the seed phase
    U.s = out.seed_phase + wrap_pi(U.s - out.seed_phase);
    out.point = U;
    out.alpha1 = a1;
    out.G1 = G1;
    out.residual = res;
    out.seed_distance = std::max({std::abs(U.x - 2 / G), std::abs(wrap_pi(U.alpha - alpha_p)),
                                  std::abs(wrap_pi(U.s - out.seed_phase)), std::abs(U.G - G0)});
    return out;
}

HomoclinicIntersection find_homoclinic(Branch b, double alpha0, double G0, double s0, const Params& p,
                                       const HomoclinicConfig& cfg) {
    HomoclinicSolver solver(p, cfg);
    return solver.solve(b, alpha0, G0, s0);
}

// ---------------------------------------------------------------- lambda lemma

double LambdaModel::K() const { return std::max(std::abs(o0[0]), std::abs(o0[1])); }

LambdaModel LambdaModel::pure() { return {}; }

void LambdaConfig::validate() const {
    if (!(eps_tilde > 0 && eps_tilde <= 0.1)) throw DomainError("eps_tilde must lie in (0, 1/10]");
    if (!(delta > 0 && q_f > delta)) throw DomainError("need 0 < delta < q_f");
    if (!(p0 > 0)) throw DomainError("p0 must be positive");
    if (samples < 2) throw DomainError("need at least two samples");
    integrator.validate();
}

LambdaTransition lambda_transition(const LambdaModel& m, const LambdaConfig& cfg) {
    cfg.validate();
    using V = std::array<double, 5>;  // q, p, z1, z2, t
    auto f = [&](double, const V& y) {
        const double q = y[0], p = y[1];
        const double fq = q + p;
        return V{q * (1 + m.aq * q + m.bq * p), -p * (1 + m.ap * q + m.bp * p), q * p * m.o0[0], q * p * m.o0[1],
                 1 / (fq * fq * fq)};
    };
    const double e = cfg.eps_tilde;
    const double L = std::log(cfg.q_f / cfg.delta);
    LambdaTransition out;
    out.S_lo = L / (1 + e);
    out.S_hi = L / (1 - e);

    std::vector<Dop853Dense<double, 5, double>> steps;
    bool hit = false;
    V y0{cfg.delta, cfg.p0, cfg.z0[0], cfg.z0[1], 0.0};
    dop853_adaptive(f, 0.0, y0, 2 * out.S_hi, cfg.integrator.options(), [&](const Dop853Dense<double, 5, double>& d) {
        steps.push_back(d);
        if (d(d.t1)[0] >= cfg.q_f) {
            hit = true;
            return false;
        }
        return true;
    });
    if (!hit) throw BoundViolation("q never reached q_f", 2 * out.S_hi);
    const auto& last = steps.back();
    boost::uintmax_t iters = 100;
    auto root = boost::math::tools::toms748_solve([&](double s) { return last(s)[0] - cfg.q_f; }, last.t0, last.t1,
                                                  boost::math::tools::eps_tolerance<double>(52), iters);
    const double S = 0.5 * (root.first + root.second);
    auto state_at = [&](double s) {
        auto it = std::lower_bound(steps.begin(), steps.end(), s,
                                   [](const Dop853Dense<double, 5, double>& d, double v) { return d.t1 < v; });
        if (it == steps.end()) --it;
        V v = (*it)(s);
        return LambdaSample{s, v[0], v[1], v[4], {v[2], v[3]}};
    };
    out.S = S;
    out.exit = state_at(S);
    out.T = out.exit.t;

    const double K = m.K();
    const double qp0 = cfg.delta * cfg.p0;
    // the integrator tolerance is the only slack
    const double slack = 1e3 * cfg.integrator.rel_tol;
    double first_bad = -1;
    std::vector<double> grid;
    for (int j = 0; j < cfg.samples; ++j) grid.push_back(S * j / (cfg.samples - 1));
    for (const auto& d : steps)
        if (d.t1 < S) grid.push_back(d.t1);
    std::sort(grid.begin(), grid.end());
    for (double s : grid) {
        LambdaSample smp = state_at(s);
        out.samples.push_back(smp);
        const double qlo = cfg.delta * std::exp((1 - e) * s), qhi = cfg.delta * std::exp((1 + e) * s);
        const double plo = cfg.p0 * std::exp(-(1 + e) * s), phi = cfg.p0 * std::exp(-(1 - e) * s);
        const double dz = std::max(std::abs(smp.z[0] - cfg.z0[0]), std::abs(smp.z[1] - cfg.z0[1]));
        const double zb = 5 * K * std::exp(s / 5) * qp0;
        bool ok = smp.q >= qlo * (1 - slack) && smp.q <= qhi * (1 + slack) && smp.p >= plo * (1 - slack) &&
                  smp.p <= phi * (1 + slack) && dz <= zb * (1 + slack) + 1e-300;
        if (!ok) {
            ++out.violations;
            if (first_bad < 0) first_bad = s;
        }
    }
    out.z_drift = std::max(std::abs(out.exit.z[0] - cfg.z0[0]), std::abs(out.exit.z[1] - cfg.z0[1]));
    out.z_bound = 5 * K * std::exp(S / 5) * qp0;
    out.p_bound = cfg.p0 * std::pow(cfg.delta / cfg.q_f, (1 - e) / (1 + e));
    if (out.violations > 0)
        throw BoundViolation(std::to_string(out.violations) + " samples outside the Gronwall bounds", first_bad);
    if (!(S >= out.S_lo && S <= out.S_hi)) throw BoundViolation("transition time outside its bracket", S);
    if (!(out.exit.p <= out.p_bound * (1 + slack))) throw BoundViolation("exit p above its bound", S);
    return out;
}

// ---------------------------------------------------------------- chains

const char* branch_policy_name(BranchPolicy b) {
    switch (b) {
        case BranchPolicy::Minus: return "minus";
        case BranchPolicy::Plus: return "plus";
        case BranchPolicy::Alternate: return "alternate";
    }
    return "?";
}

BranchPolicy branch_policy_from_name(const std::string& s) {
    if (s == "minus" || s == "-") return BranchPolicy::Minus;
    if (s == "plus" || s == "+") return BranchPolicy::Plus;
    if (s == "alternate") return BranchPolicy::Alternate;
    throw DomainError("unknown branch policy '" + s + "'");
}

TransitionChain build_chain(double alpha0, double G0, BranchPolicy policy, int n, double G_lo, double G_hi,
                            const Params& p, const ChainConfig& cfg) {
    p.validate();
    if (n < 0) throw DomainError("chain length must be non-negative");
    if (!(G_lo <= G0 && G0 <= G_hi)) throw DomainError("G0 outside the band");
    TransitionChain ch;
    ch.G_lo = G_lo;
    ch.G_hi = G_hi;
    ch.elliptic = p.e0 > 0;
    ch.nodes.push_back({alpha0, G0, true});
    std::optional<ScatteringModel> circ[2];
    std::optional<EllipticScattering> ell[2];
    std::unique_ptr<HomoclinicSolver> solver;
    for (int k = 0; k < n; ++k) {
        Branch b = policy == BranchPolicy::Minus  ? Branch::Minus
                   : policy == BranchPolicy::Plus ? Branch::Plus
                                                  : (k % 2 ? Branch::Plus : Branch::Minus);
        const int bi = b == Branch::Plus;
        const auto [a, G] = std::pair{ch.nodes.back().alpha, ch.nodes.back().G};
        double a1, G1;
        if (!ch.elliptic) {
            if (!circ[bi]) circ[bi].emplace(b, p, cfg.quad);
            std::tie(a1, G1) = circ[bi]->apply(a, G);
        } else {
            if (!ell[bi]) ell[bi].emplace(b, p, cfg.quad, cfg.elliptic);
            // the elliptic generating function is written in the perihelion angle
            const double shift = pi * sgn(G);
            std::tie(a1, G1) = ell[bi]->apply(a + shift, G);
            a1 -= shift;
        }
        ChainNode node{a1, G1, G_lo <= G1 && G1 <= G_hi};
        ChainLink link;
        link.branch = b;
        if (cfg.witnesses < 0 || k < cfg.witnesses) {
            if (!solver) solver = std::make_unique<HomoclinicSolver>(p, cfg.homoclinic);
            HomoclinicIntersection w = solver->solve(b, a, G, 0.0);
            link.witness_gap = std::max(std::abs(wrap_pi(w.alpha1 - a1)), std::abs(w.G1 - G1));
            link.witness = std::move(w);
        }
        ch.nodes.push_back(node);
        ch.links.push_back(std::move(link));
    }
    for (const auto& nd : ch.nodes) {
        ch.bounded = ch.bounded && nd.in_band;
        ch.max_deviation = std::max(ch.max_deviation, std::abs(nd.G - G0));
    }
    ch.net_drift = ch.nodes.back().G - G0;
    return ch;
}

// ---------------------------------------------------------------- shadowing

double ShadowConfig::delta_k(int k) const {
    if (k < 1) throw DomainError("visit index starts at 1");
    if (!delta.empty()) return delta[std::min<std::size_t>(k - 1, delta.size() - 1)];
    return delta_scale / k;
}

void ShadowConfig::validate() const {
    integrator.validate();
    for (std::size_t i = 0; i < delta.size(); ++i) {
        if (!(delta[i] > 0)) throw DomainError("ball radii must be positive");
        if (i > 0 && delta[i] > delta[i - 1]) throw DomainError("ball radii must not increase");
    }
    if (!(delta_scale > 0 && delta_tilde > 0 && horizon > 0)) throw DomainError("bad shadowing radii");
    if (subdivisions < 2) throw DomainError("need at least two subdivisions");
}

namespace {

struct Passage {
    double t_apo = 0, t_peri = 0;
    Vec4 apo{}, peri{};
};

/// integrates from a perihelion state through up to `count` apocentre/perihelion
/// pairs; stops early when the orbit escapes (x below x_escape)
struct Excursions {
    std::vector<Passage> passages;
    bool escaped = false;
};

Excursions run_excursions(const System& sys, double t0, const Vec4& y0, int count, double x_escape, double horizon,
                          const IntegratorConfig& ic) {
    Excursions out;
    auto f = [&](double t, const Vec4& y) { return sys(t, y); };
    double t = t0;
    Vec4 y = y0;
    for (int k = 0; k < count; ++k) {
        Passage ps;
        for (int leg = 0; leg < 2; ++leg) {
            const int want = leg == 0 ? -1 : 1;  // y decreasing at apocentre, increasing at perihelion
            bool found = false, esc = false;
            double tc = 0;
            Vec4 yc{};
            double prev = y[2];
            dop853_adaptive(f, t, y, t0 + horizon, ic.options(), [&](const Dop853Dense<double, 4, double>& d) {
                Vec4 e = d(d.t1);
                if ((want < 0 && prev > 0 && e[2] <= 0) || (want > 0 && prev < 0 && e[2] >= 0)) {
                    boost::uintmax_t it = 100;
                    auto r = boost::math::tools::toms748_solve([&](double s) { return d(s)[2]; }, d.t0, d.t1,
                                                               boost::math::tools::eps_tolerance<double>(52), it);
                    tc = 0.5 * (r.first + r.second);
                    yc = d(tc);
                    yc[2] = 0.0;
                    found = true;
                    return false;
                }
                if (e[0] < x_escape && e[2] > 0) {
                    esc = true;
                    return false;
                }
                prev = e[2];
                return true;
            });
            if (esc) {
                out.escaped = true;
                return out;
            }
            if (!found) throw HorizonExceeded("shadowing orbit did not return within the horizon");
            t = tc;
            y = yc;
            if (leg == 0) {
                ps.t_apo = tc;
                ps.apo = yc;
            } else {
                ps.t_peri = tc;
                ps.peri = yc;
            }
        }
        out.passages.push_back(ps);
    }
    return out;
}

double lambda_distance(const Vec4& m, const ChainNode& n) {
    return std::max({std::abs(m[0]), std::abs(m[2]), std::abs(wrap_pi(m[1] - n.alpha)), std::abs(m[3] - n.G)});
}

double point_distance(double t, const Vec4& m, const PerihelionPoint& w) {
    return std::max({std::abs(m[0] - w.x), std::abs(m[2]), std::abs(wrap_pi(m[1] - w.alpha)), std::abs(m[3] - w.G),
                     std::abs(wrap_pi(t - w.s))});
}

}  // namespace

bool visits_interleave(const ShadowRun& run) {
    for (std::size_t i = 1; i < run.visits.size(); ++i) {
        const double a = run.visits[i - 1].t, b = run.visits[i].t;
        if (run.reversed ? !(b < a) : !(b > a)) return false;
        if (run.visits[i].lambda == run.visits[i - 1].lambda) return false;
    }
    return true;
}

ShadowRun shadow_chain(const TransitionChain& chain, const Params& p, const ShadowConfig& cfg) {
    p.validate();
    cfg.validate();
    const int n = int(chain.links.size());
    if (n < 1) throw DomainError("shadowing needs at least one link");
    for (int k = 0; k < n; ++k)
        if (!chain.links[k].witness) throw DomainError("link " + std::to_string(k) + " has no homoclinic witness");
    for (int k = 0; k < n; ++k)
        if (chain.links[k].witness && chain.links[k].witness->coincident)
            throw DegenerateSplitting("link " + std::to_string(k) + " has coincident manifolds");

    const System sys(p, Chart::McGehee);
    const PerihelionPoint p0 = chain.links[0].witness->point;
    const double xp = p0.x;
    double dmin = cfg.delta_k(n);
    for (int k = 1; k <= n; ++k) dmin = std::min(dmin, cfg.delta_k(k));
    const double x_escape = 0.1 * dmin;

    auto start_state = [&](double eps) { return Vec4{p0.x + eps, p0.alpha, 0.0, p0.G}; };
    auto simulate = [&](double eps, int count) {
        return run_excursions(sys, p0.s, start_state(eps), count, x_escape, cfg.horizon, cfg.integrator);
    };

    ShadowRun run;
    // |H| ~ x_p |eps| and the apocentre sits at x ~ sqrt(2|H|)
    double a = -cfg.delta_k(1) * cfg.delta_k(1) / (2 * xp);
    double b = a * (dmin / cfg.delta_k(1)) * (dmin / cfg.delta_k(1)) / 2;
    if (-a > cfg.delta_tilde) throw DomainError("first ball radius too large for the homoclinic ball");

    auto lambda_ok = [&](double eps, int k) {
        Excursions ex = simulate(eps, k);
        if (ex.escaped || int(ex.passages.size()) < k) return false;
        return lambda_distance(ex.passages[k - 1].apo, chain.nodes[k]) <= cfg.delta_k(k);
    };
    // bisection on a predicate that holds at `good` and fails at `bad`
    auto edge = [&](double good, double bad, const std::function<bool(double)>& pred, double rel) {
        const double w0 = std::abs(bad - good);
        while (std::abs(bad - good) > rel * w0) {
            double mid = 0.5 * (good + bad);
            if (mid == good || mid == bad) break;
            (pred(mid) ? good : bad) = mid;
        }
        return good;
    };

    int k = 1;
    for (; k <= n; ++k) {
        // Lambda_k ball: cut the far end of the box
        if (!lambda_ok(b, k)) {
            run.stop_reason = "no orbit of the box reaches the ball around Lambda_" + std::to_string(k);
            break;
        }
        if (!lambda_ok(a, k)) a = edge(b, a, [&](double e) { return lambda_ok(e, k); }, 1e-3);
        if (k == n) {
            Excursions ex = simulate(0.5 * (a + b), n);
            if (ex.escaped || int(ex.passages.size()) < n) {
                run.stop_reason = "orbit escaped after the last visit";
                break;
            }
            run.boxes.push_back({a, b});
            continue;
        }
        // homoclinic point p_k: match the passage phase, then keep the delta_tilde ball
        const PerihelionPoint& w = chain.links[k].witness->point;
        auto phase = [&](double eps) {
            Excursions ex = simulate(eps, k);
            if (ex.escaped || int(ex.passages.size()) < k) return std::numeric_limits<double>::quiet_NaN();
            return wrap_pi(ex.passages[k - 1].t_peri - w.s);
        };
        auto ball = [&](double eps) {
            Excursions ex = simulate(eps, k);
            if (ex.escaped || int(ex.passages.size()) < k) return false;
            const Passage& ps = ex.passages[k - 1];
            return point_distance(ps.t_peri, ps.peri, w) <= cfg.delta_tilde;
        };
        // the return time is k Kepler periods 2 pi (2 x_p |eps|)^{-3/2}: one winding of
        // the phase is about 2 pi / slope wide
        auto slope = [&](double eps) {
            double period = two_pi * std::pow(2 * xp * std::abs(eps), -1.5);
            return 1.5 * k * period / std::abs(eps);
        };
        // batches of candidates spanning two windings each, scanned from the b end
        const int M = cfg.subdivisions;
        const double cell = 4 * pi / (slope(b) * M);
        double e_hi = b, f_hi = phase(b), e_lo = b, f_lo = f_hi;
        bool bracketed = false;
        for (int batch = 0; batch < 16 && !bracketed && e_hi > a; ++batch) {
            std::vector<double> e(M), f(M);
            parallel_for(M, [&](int j) {
                e[j] = e_hi - (j + 1) * cell;
                f[j] = e[j] > a ? phase(e[j]) : std::numeric_limits<double>::quiet_NaN();
            });
            for (int j = 0; j < M; ++j) {
                if (std::isfinite(f[j]) && std::isfinite(f_hi) && (f[j] <= 0) != (f_hi <= 0) &&
                    std::abs(f[j] - f_hi) < pi) {
                    e_lo = e[j];
                    f_lo = f[j];
                    bracketed = true;
                    break;
                }
                e_hi = e[j];
                f_hi = f[j];
            }
        }
        if (!bracketed) {
            run.stop_reason = "no passage through the ball around p_" + std::to_string(k);
            break;
        }
        boost::uintmax_t it = 200;
        auto r = boost::math::tools::toms748_solve(phase, e_lo, e_hi, f_lo, f_hi,
                                                   boost::math::tools::eps_tolerance<double>(52), it);
        const double star = 0.5 * (r.first + r.second);
        if (!ball(star)) {
            run.stop_reason = "phase matched but the orbit misses the ball around p_" + std::to_string(k);
            break;
        }
        const double reach = 4 * cfg.delta_tilde / slope(star);
        double lo = std::max(a, star - reach), hi = std::min(b, star + reach);
        if (!ball(lo)) lo = edge(star, lo, ball, 1e-3);
        if (!ball(hi)) hi = edge(star, hi, ball, 1e-3);
        if (!(lo >= a && hi <= b && lo < hi)) throw DomainError("box refinement left the previous box");
        if (hi - lo < 16 * std::abs(star) * std::numeric_limits<double>::epsilon()) {
            run.stop_reason = "box below working precision";
            break;
        }
        a = lo;
        b = hi;
        run.boxes.push_back({a, b});
    }
    const int boxed = int(run.boxes.size());
    if (boxed == 0) throw PrecisionExhausted(0, run.stop_reason.empty() ? "no link shadowed" : run.stop_reason);

    // the representative orbit of the last box, recorded in full
    const double eps = 0.5 * (run.boxes.back().first + run.boxes.back().second);
    run.epsilon = eps;
    Vec4 a0 = start_state(eps);
    run.initial = mcgehee_from_vec(a0, p0.s);
    Excursions ex = simulate(eps, boxed);
    auto period_of = [&](double t) { return long(std::floor((t - p0.s) / two_pi)); };
    run.visits.push_back({false, 0, p0.s, 0, run.initial, std::abs(eps), cfg.delta_tilde});
    double t_prev = p0.s, x_prev = a0[0];
    int shadowed = 0;
    bool ok = true;
    for (int j = 0; j < int(ex.passages.size()); ++j) {
        const Passage& ps = ex.passages[j];
        const int kk = j + 1;
        VisitRecord vl{true, kk, ps.t_apo, period_of(ps.t_apo), mcgehee_from_vec(ps.apo, ps.t_apo),
                       lambda_distance(ps.apo, chain.nodes[kk]), cfg.delta_k(kk)};
        run.visits.push_back(vl);
        ok = ok && vl.distance <= vl.radius;
        if (kk < n) {
            const PerihelionPoint& w = chain.links[kk].witness->point;
            VisitRecord vp{false, kk, ps.t_peri, period_of(ps.t_peri), mcgehee_from_vec(ps.peri, ps.t_peri),
                           point_distance(ps.t_peri, ps.peri, w), cfg.delta_tilde};
            run.visits.push_back(vp);
            ok = ok && vp.distance <= vp.radius;
        }
        if (ok) shadowed = kk;
        Excursion e;
        e.t_start = t_prev;
        e.t_apo = ps.t_apo;
        e.t_end = ps.t_peri;
        e.r_max = 2 / (ps.apo[0] * ps.apo[0]);
        e.r_min = 2 / (std::max(x_prev, ps.peri[0]) * std::max(x_prev, ps.peri[0]));
        run.excursions.push_back(e);
        t_prev = ps.t_peri;
        x_prev = ps.peri[0];
    }
    run.links_shadowed = shadowed;
    run.complete = shadowed == n;
    if (run.complete) run.stop_reason.clear();
    else if (run.stop_reason.empty()) run.stop_reason = "representative orbit left a ball";

    if (cfg.reverse_time) {
        // (x, alpha, y, G, s) -> (x, -alpha, -y, G, -s) reverses time
        auto flip = [](McGeheeState m) {
            m.alpha = -m.alpha;
            m.y = -m.y;
            m.s = -m.s;
            return m;
        };
        run.initial = flip(run.initial);
        for (auto& v : run.visits) {
            v.state = flip(v.state);
            v.t = -v.t;
            v.period = -v.period;
        }
        for (auto& e : run.excursions) {
            e.t_start = -e.t_start;
            e.t_apo = -e.t_apo;
            e.t_end = -e.t_end;
        }
        run.reversed = true;
    }
    return run;
}

// ---------------------------------------------------------------- oscillation

OscillationReport oscillation_demo(const Params& p, double G0, int n_links, const OscillationConfig& cfg) {
    if (n_links < 1) throw DomainError("need at least one link");
    OscillationReport rep;
    ChainConfig cc;
    cc.witnesses = n_links;
    cc.homoclinic = cfg.homoclinic;
    cc.homoclinic.measure_splitting = false;
    rep.chain = build_chain(cfg.alpha0, G0, cfg.policy, n_links, G0 - cfg.band, G0 + cfg.band, p, cc);
    for (const auto& l : rep.chain.links)
        if (l.witness && l.witness->coincident) {
            rep.verdict = "FAIL";
            rep.reason = "coincident manifolds: no transversal heteroclinic connection, no transition chain";
            return rep;
        }
    if (!rep.chain.bounded) {
        rep.verdict = "FAIL";
        rep.reason = "chain left the action band";
        return rep;
    }
    try {
        rep.run = shadow_chain(rep.chain, p, cfg.shadow);
    } catch (const PrecisionExhausted& e) {
        rep.verdict = "FAIL";
        rep.reason = e.what();
        return rep;
    }
    const auto& ex = rep.run->excursions;
    int done = int(ex.size());
    if (done > 0) {
        rep.r_out = ex[0].r_max;
        rep.r_in = 0;
        for (const auto& e : ex) {
            rep.r_out = std::min(rep.r_out, e.r_max);
            rep.r_in = std::max(rep.r_in, e.r_min);
        }
    }
    const bool ratio = done > 0 && rep.r_out >= cfg.ratio_required * rep.r_in;
    rep.pass = rep.run->complete && done >= cfg.excursions_required && ratio && visits_interleave(*rep.run);
    rep.verdict = rep.pass ? "PASS" : "FAIL";
    if (!rep.pass) {
        if (!rep.run->complete) rep.reason = "shadowed " + std::to_string(rep.run->links_shadowed) + " of " +
                                             std::to_string(n_links) + " links: " + rep.run->stop_reason;
        else if (done < cfg.excursions_required) rep.reason = "too few completed excursions";
        else if (!ratio) rep.reason = "excursion ratio below the threshold";
        else rep.reason = "visits out of order";
    } else {
        rep.reason = std::to_string(done) + " excursions, r_out/r_in = " + std::to_string(rep.r_out / rep.r_in);
    }
    return rep;
}

}  // namespace rtbp
