#include "rtbp/flow.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numbers>

namespace rtbp {

void IntegratorConfig::validate() const {
    if (!(rel_tol > 0 && abs_tol > 0)) throw DomainError("tolerances must be positive");
    if (!(max_step > 0)) throw DomainError("max_step must be positive");
    if (!(event_tol > 0)) throw DomainError("event tolerance must be positive");
}

Dop853Options IntegratorConfig::options() const {
    Dop853Options o;
    o.rtol = rel_tol;
    o.atol = abs_tol;
    o.max_step = max_step;
    o.max_steps = max_steps;
    return o;
}

Vec4 Trajectory::at(double t) const {
    if (steps.empty()) throw DomainError("empty trajectory");
    bool fwd = steps.front().t1 >= steps.front().t0;
    auto inside = [&](const DenseStep& s) {
        return fwd ? (t >= s.t0 && t <= s.t1) : (t <= s.t0 && t >= s.t1);
    };
    // binary search on step start times
    std::size_t lo = 0, hi = steps.size();
    while (hi - lo > 1) {
        std::size_t mid = (lo + hi) / 2;
        bool after = fwd ? t >= steps[mid].t0 : t <= steps[mid].t0;
        if (after) lo = mid; else hi = mid;
    }
    if (!inside(steps[lo])) {
        double tol = 1e-12 * std::max(1.0, std::abs(t));
        bool near_end = std::abs(t - steps.back().t1) <= tol;
        bool near_start = std::abs(t - steps.front().t0) <= tol;
        if (near_end) return final_state;
        if (near_start) return steps.front().y0;
        throw DomainError("time outside trajectory span");
    }
    if (t == steps[lo].t1 && lo + 1 == steps.size()) return final_state;
    return steps[lo](t);
}

std::vector<std::pair<double, Vec4>> Trajectory::samples() const {
    std::vector<std::pair<double, Vec4>> out;
    if (steps.empty()) return out;
    out.reserve(steps.size() + 1);
    for (const auto& s : steps) out.emplace_back(s.t0, s.y0);
    out.emplace_back(steps.back().t1, final_state);
    return out;
}

Trajectory integrate(const Vec4& y0, double t0, double t1, Chart chart, const Params& p,
                     const IntegratorConfig& cfg) {
    cfg.validate();
    if (!std::isfinite(t0) || !std::isfinite(t1)) throw DomainError("time span must be finite");
    if (std::abs(t1 - t0) > cfg.max_time) throw HorizonExceeded("time span beyond configured horizon");
    System sys(p, chart);
    Trajectory tr;
    tr.chart = chart;
    auto f = [&](double t, const Vec4& y) { return sys(t, y); };
    tr.final_state = dop853_adaptive(f, t0, y0, t1, cfg.options(), [&](const DenseStep& d) {
        tr.steps.push_back(d);
        return true;
    });
    if (tr.steps.empty()) {
        DenseStep d;
        d.t0 = d.t1 = t0;
        d.y0 = y0;
        tr.steps.push_back(d);
    }
    return tr;
}

namespace {

bool crosses(double a, double b, int dir) {
    if (dir > 0) return a < 0 && b >= 0;
    if (dir < 0) return a > 0 && b <= 0;
    return (a < 0 && b >= 0) || (a > 0 && b <= 0);
}

SectionEvent refine(const DenseStep& s, const Section& sec, double ga, double gb, double tol) {
    double a = s.t0, b = s.t1;
    // bisection on the dense output, then a Newton polish
    for (int it = 0; it < 200 && std::abs(b - a) > 1e-15 * std::max(1.0, std::abs(a)); ++it) {
        double m = 0.5 * (a + b);
        double gm = sec.g(m, s(m));
        if ((ga < 0) == (gm < 0) && gm != 0) {
            a = m;
            ga = gm;
        } else {
            b = m;
            gb = gm;
        }
        if (std::abs(gm) < 0.1 * tol) { a = b = m; break; }
    }
    double t = 0.5 * (a + b);
    double g = sec.g(t, s(t));
    double dt = 1e-7 * std::max(std::abs(s.t1 - s.t0), 1e-12);
    double dg = (sec.g(t + dt, s(t + dt)) - sec.g(t - dt, s(t - dt))) / (2 * dt);
    if (dg != 0 && std::isfinite(dg)) {
        double tn = t - g / dg;
        double lo = std::min(s.t0, s.t1), hi = std::max(s.t0, s.t1);
        if (tn >= lo && tn <= hi) {
            double gn = sec.g(tn, s(tn));
            if (std::abs(gn) <= std::abs(g)) { t = tn; g = gn; }
        }
    }
    SectionEvent ev;
    ev.t = t;
    ev.state = s(t);
    ev.section_id = sec.id;
    ev.direction = gb >= ga ? 1 : -1;
    ev.residual = std::abs(g);
    return ev;
}

}  // namespace

SectionEvent find_section_crossing(const Trajectory& traj, const Section& sec, const IntegratorConfig& cfg) {
    for (std::size_t i = 0; i < traj.steps.size(); ++i) {
        const auto& s = traj.steps[i];
        Vec4 yb = (i + 1 < traj.steps.size()) ? traj.steps[i + 1].y0 : traj.final_state;
        double ga = sec.g(s.t0, s.y0), gb = sec.g(s.t1, yb);
        if (crosses(ga, gb, sec.direction)) return refine(s, sec, ga, gb, cfg.event_tol);
    }
    throw NoCrossing("section '" + sec.id + "' not crossed");
}

SectionEvent integrate_to_section(const Vec4& y0, double t0, double t_max, Chart chart, const Params& p,
                                  const Section& sec, const IntegratorConfig& cfg, Trajectory* traj) {
    cfg.validate();
    if (std::abs(t_max - t0) > cfg.max_time) throw HorizonExceeded("time span beyond configured horizon");
    System sys(p, chart);
    auto f = [&](double t, const Vec4& y) { return sys(t, y); };
    bool found = false;
    SectionEvent ev;
    Trajectory local;
    Trajectory& tr = traj ? *traj : local;
    tr.chart = chart;
    tr.steps.clear();
    double gprev = sec.g(t0, y0);
    tr.final_state = dop853_adaptive(f, t0, y0, t_max, cfg.options(), [&](const DenseStep& d) {
        tr.steps.push_back(d);
        double gn = sec.g(d.t1, d(d.t1));
        if (crosses(gprev, gn, sec.direction)) {
            ev = refine(d, sec, gprev, gn, cfg.event_tol);
            found = true;
            return false;
        }
        gprev = gn;
        return true;
    });
    if (!found) throw NoCrossing("section '" + sec.id + "' not reached before t = " + std::to_string(t_max));
    return ev;
}

McGeheeState poincare_map(const McGeheeState& m, const Params& p, const IntegratorConfig& cfg, int direction) {
    if (m.x == 0.0 && m.y == 0.0) {
        McGeheeState out = m;
        out.s = m.s + direction * 2 * std::numbers::pi;
        return out;
    }
    double t1 = m.s + (direction >= 0 ? 2 : -2) * std::numbers::pi;
    Trajectory tr = integrate(to_vec(m), m.s, t1, Chart::McGehee, p, cfg);
    return mcgehee_from_vec(tr.final_state, t1);
}

std::vector<McGeheeState> iterate_map(const McGeheeState& m, int n, const Params& p, const IntegratorConfig& cfg) {
    std::vector<McGeheeState> out{m};
    int dir = n >= 0 ? 1 : -1;
    for (int k = 0; k < std::abs(n); ++k) out.push_back(poincare_map(out.back(), p, cfg, dir));
    return out;
}

double period_map_determinant(const McGeheeState& m, const Params& p, const IntegratorConfig& cfg, double h) {
    Vec4 base = convert(Chart::McGehee, Chart::Polar, to_vec(m), m.s);
    auto image = [&](const Vec4& polar) {
        Vec4 mg = convert(Chart::Polar, Chart::McGehee, polar, m.s);
        auto out = poincare_map(mcgehee_from_vec(mg, m.s), p, cfg);
        return convert(Chart::McGehee, Chart::Polar, to_vec(out), out.s);
    };
    Eigen::Matrix4d J;
    for (int j = 0; j < 4; ++j) {
        double hj = h * std::max(1.0, std::abs(base[j]));
        Vec4 a = base, b = base;
        a[j] += hj;
        b[j] -= hj;
        Vec4 fa = image(a), fb = image(b);
        for (int i = 0; i < 4; ++i) J(i, j) = (fa[i] - fb[i]) / (2 * hj);
    }
    return J.determinant();
}

Vec4 integrate_fixed(const Vec4& y0, double t0, double t1, int n, Chart chart, const Params& p) {
    System sys(p, chart);
    auto f = [&](double t, const Vec4& y) { return sys(t, y); };
    return dop853_fixed<double, 4, double>(f, t0, y0, t1, n);
}

double empirical_order(const std::function<Vec4(double, const Vec4&)>& f, const Vec4& y0, double t1,
                       const Vec4& exact, const std::vector<int>& steps) {
    std::vector<double> lh, le;
    for (int n : steps) {
        Vec4 y = dop853_fixed<double, 4, double>(f, 0.0, y0, t1, n);
        double e = 0;
        for (int i = 0; i < 4; ++i) e = std::max(e, std::abs(y[i] - exact[i]));
        lh.push_back(std::log(t1 / n));
        le.push_back(std::log(e));
    }
    double mh = 0, me = 0;
    for (std::size_t i = 0; i < lh.size(); ++i) { mh += lh[i]; me += le[i]; }
    mh /= lh.size();
    me /= le.size();
    double num = 0, den = 0;
    for (std::size_t i = 0; i < lh.size(); ++i) {
        num += (lh[i] - mh) * (le[i] - me);
        den += (lh[i] - mh) * (lh[i] - mh);
    }
    return num / den;
}

}  // namespace rtbp
