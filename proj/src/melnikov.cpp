#include "rtbp/melnikov.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "rtbp/ephemeris.hpp"
#include "rtbp/potential.hpp"
#include "rtbp/separatrix.hpp"

namespace rtbp {

using std::numbers::pi;
using cplx = std::complex<double>;

void QuadConfig::validate() const {
    if (!(tol > 0 && tol < 1)) throw DomainError("quadrature tol must lie in (0,1)");
    if (!(G_min > 0)) throw DomainError("G_min must be positive");
    if (max_harmonics < 1) throw DomainError("max_harmonics must be >= 1");
    if (max_depth < 1) throw DomainError("max_depth must be >= 1");
    if (contour_c < 0) throw DomainError("contour_c must be >= 0");
}

double Scaled::value() const { return mant == 0 ? 0.0 : mant * std::exp(-expo); }
double Scaled::log_abs() const { return std::log(std::abs(mant)) - expo; }

namespace {

// sum_j c_j c_{j+k} h^p B_p wt(p), p = 2j + k >= 2
template <class T, class W>
T legendre_series(int k, const T& h, double mu, W wt) {
    const double m1 = 1.0 - mu;
    const double q = std::abs(h) * std::max(mu, m1);
    if (!(q < 1.0)) throw DomainError("harmonic series outside its disc of convergence");
    double cj = 1.0, cjk = 1.0;
    for (int i = 0; i < k; ++i) cjk *= (2.0 * i + 1) / (2.0 * i + 2);
    T hp = T(1);
    for (int i = 0; i < k; ++i) hp *= h;
    T h2 = h * h;
    double mp = std::pow(mu, k - 1), np = std::pow(m1, k - 1);
    if (k == 0) { mp = 1.0 / mu; np = 1.0 / m1; }
    T sum = T(0);
    for (int j = 0; j < 4000; ++j) {
        int p = 2 * j + k;
        if (p >= 2) {
            double B = mp + ((p % 2) ? -np : np);
            sum += cj * cjk * B * wt(p) * hp;
            double rest = std::abs(hp) * std::max(mp, np) * 2.0 * (p + 2) / (1.0 - q * q);
            if (rest < 1e-19 * std::abs(sum)) break;
        }
        cj *= (2.0 * j + 1) / (2.0 * j + 2);
        cjk *= (2.0 * (j + k) + 1) / (2.0 * (j + k) + 2);
        hp *= h2;
        mp *= mu * mu;
        np *= m1 * m1;
    }
    return sum;
}

double check_G(double G, const QuadConfig& cfg) {
    cfg.validate();
    if (!std::isfinite(G) || std::abs(G) < cfg.G_min)
        throw DomainError("G0 below G_min");
    return std::abs(G);
}

void check_circular(const Params& p) {
    p.validate();
    if (p.e0 != 0.0) throw DomainError("Poincare function is defined for e0 = 0");
}

}  // namespace

cplx potential_harmonic(int k, cplx w, double mu) {
    if (k < 0) throw DomainError("negative harmonic");
    if (mu == 0.0) return 0.0;
    cplx h = w / 2.0;
    return mu * (1 - mu) * h * legendre_series(k, h, mu, [](int) { return 1.0; });
}

double harmonic_zero(double G, double mu, const QuadConfig& cfg, double* err) {
    if (mu == 0.0) {
        if (err) *err = 0;
        return 0.0;
    }
    // dt = (G^3/2) sec^4(b) db, w = 4 cos^2 b / G^2 = 2h;  A_0 = mu(1-mu) h s(h)
    auto f = [&](double b) {
        double c = std::cos(b);
        double h = 2 * c * c / (G * G);
        double s = legendre_series(0, h, mu, [](int) { return 1.0; });
        return G * mu * (1 - mu) * s / (c * c);
    };
    double e = 0;
    double v = boost::math::quadrature::gauss_kronrod<double, 61>::integrate(
        f, 0.0, pi / 2, std::min(cfg.max_depth, 8), std::min(cfg.tol, 1e-14), &e);
    if (err) *err = 2 * e;
    return 2 * v;
}

double harmonic_zero_dG(double G, double mu, const QuadConfig& cfg) {
    if (mu == 0.0) return 0.0;
    // d/dG [(G^3/2) sec^4 A_0(w)] = G^2 sec^4 [(3/2) A_0 - w A_0'(w)]
    auto f = [&](double b) {
        double c = std::cos(b);
        double h = 2 * c * c / (G * G);
        double s = legendre_series(0, h, mu, [](int p) { return 0.5 - p; });
        // sec^4 * mu(1-mu) h s = mu(1-mu) s (h/c^4) = mu(1-mu) s 2/(G^2 c^2)
        return 2 * mu * (1 - mu) * s / (c * c);
    };
    double e = 0;
    return 2 * boost::math::quadrature::gauss_kronrod<double, 61>::integrate(
                   f, 0.0, pi / 2, std::min(cfg.max_depth, 8), std::min(cfg.tol, 1e-14), &e);
}

double harmonic_scaled(int k, double G, double mu, const QuadConfig& cfg, double* err, double b) {
    if (k < 1) throw DomainError("harmonic_scaled needs k >= 1");
    G = std::abs(G);
    if (mu == 0.0 || (mu == 0.5 && k % 2)) {
        if (err) *err = 0;
        return 0.0;
    }
    double c = cfg.contour_c > 0 ? cfg.contour_c : 2 * (1 - mu);
    // contour Im tau = -b, b = 1 - eps; eps kept separately to avoid cancellation
    double eps = b < 0 ? std::min(0.9, c / (G * G)) : 1 - b;
    b = 1 - eps;
    if (!(b > 0 && eps * (2 - eps) > 2 * (1 - mu) / (G * G)))
        throw DomainError("contour depth leaves the convergence region");
    const double d = 0.5 * G * G * G;
    const double lift = k * d * eps * eps * (2 + b) / 3;
    const double xmax = std::sqrt((lift + 50.0) / (k * d * b));
    auto f = [&](double xi) {
        cplx one_t2(xi * xi + eps * (2 - eps), -2 * xi * b);
        cplx w = 4.0 / (G * G * one_t2);
        cplx z = std::pow(cplx(1 + b, xi) / cplx(eps, -xi), k);
        // -i k d (tau + tau^3/3) + 2 k d/3
        double re = lift - k * d * b * xi * xi;
        double im = -k * d * (xi * eps * (2 - eps) + xi * xi * xi / 3);
        return potential_harmonic(k, w, mu) * z * std::exp(cplx(re, im)) * d * one_t2;
    };
    double e = 0;
    cplx v = boost::math::quadrature::gauss_kronrod<double, 61>::integrate(
        f, 0.0, xmax, std::min(cfg.max_depth, 10), std::max(cfg.tol, 1e-12), &e);
    if (!std::isfinite(v.real())) throw QuadratureFailure("contour integral not finite");
    if (err) *err = 2 * e;
    return 2 * v.real();
}

double Harmonics::decay() const { return G * G * G / 3; }

int Harmonics::lowest() const {
    for (std::size_t k = 0; k < m.size(); ++k)
        if (m[k] != 0) return int(k) + 1;
    return 0;
}

double Harmonics::harmonic(int k) const {
    if (k == 0) return I0;
    if (k < 0 || k > int(m.size())) return 0.0;
    return m[k - 1] * std::exp(-k * decay());
}

double Harmonics::value(double theta) const {
    double v = I0;
    for (std::size_t i = 0; i < m.size(); ++i) v += 2 * harmonic(int(i) + 1) * std::cos((i + 1) * theta);
    return v;
}

double Harmonics::error() const {
    double e = I0_err;
    for (std::size_t i = 0; i < m_err.size(); ++i) e += 2 * m_err[i] * std::exp(-(i + 1.0) * decay());
    return e;
}

namespace {
template <class F>
Scaled scaled_sum(const Harmonics& h, F term) {
    int k0 = h.lowest();
    if (k0 == 0) return {};
    double d = h.decay();
    double s = 0;
    for (int k = k0; k <= int(h.m.size()); ++k) s += term(k) * h.m[k - 1] * std::exp(-(k - k0) * d);
    return {s, k0 * d};
}
}  // namespace

Scaled Harmonics::oscillatory(double theta) const {
    return scaled_sum(*this, [&](int k) { return 2 * std::cos(k * theta); });
}

Scaled Harmonics::dtheta(double theta) const {
    return scaled_sum(*this, [&](int k) { return -2.0 * k * std::sin(k * theta); });
}

Scaled Harmonics::d2theta(double theta) const {
    return scaled_sum(*this, [&](int k) { return -2.0 * k * k * std::cos(k * theta); });
}

Scaled Harmonics::max_dtheta() const {
    Scaled best;
    const int n = 4096;
    for (int i = 0; i <= n; ++i) {
        Scaled s = dtheta(pi * i / n);
        if (std::abs(s.mant) > std::abs(best.mant)) best = s;
    }
    best.mant = std::abs(best.mant);
    return best;
}

Harmonics harmonics(double G, const Params& p, const QuadConfig& cfg) {
    check_circular(p);
    G = check_G(G, cfg);
    Harmonics h;
    h.G = G;
    h.mu = p.mu;
    if (p.mu == 0.0) return h;
    h.I0 = harmonic_zero(G, p.mu, cfg, &h.I0_err);
    const double d = G * G * G / 3;
    double lead = 0;
    int k0 = 0, small = 0;
    for (int k = 1; k <= cfg.max_harmonics; ++k) {
        double e = 0;
        double mk = harmonic_scaled(k, G, p.mu, cfg, &e);
        h.m.push_back(mk);
        h.m_err.push_back(e);
        if (mk == 0) continue;
        if (k0 == 0) {
            k0 = k;
            lead = std::abs(mk);
            continue;
        }
        double rel = std::abs(mk) * std::exp(-(k - k0) * d) / lead;
        small = rel < 1e-17 ? small + 1 : 0;
        if (small >= 2) break;
    }
    return h;
}

MelnikovResult poincare_function(double alpha0, double G0, double s0, double sigma, const Params& p,
                                 const QuadConfig& cfg) {
    Harmonics h = harmonics(G0, p, cfg);
    MelnikovResult r;
    r.value = h.value(alpha0 - s0 + sigma);
    r.error = h.error() + 1e-16 * std::abs(r.value);
    r.tail_bound = 0;
    r.alpha0 = alpha0;
    r.G0 = G0;
    r.s0 = s0;
    r.sigma = sigma;
    r.e0 = p.e0;
    return r;
}

MelnikovResult poincare_function_direct(double alpha0, double G0, double s0, double sigma, const Params& p,
                                        const DirectConfig& cfg) {
    p.validate();
    if (G0 == 0) throw DomainError("G0 must be nonzero");
    if (!(cfg.T > 0 && cfg.panel_phase > 0 && cfg.tol > 0)) throw DomainError("bad direct quadrature config");
    const double G = std::abs(G0);
    // integrate in t itself: the nodes fix the phase s0 + t exactly and tau follows
    auto f = [&](double t) {
        SeparatrixPoint sp = separatrix_at_time(t, G0, alpha0, 0.0);
        return delta_u(sp.state.x, sp.state.alpha, s0 - sigma + t, p).value;
    };
    double t1 = separatrix_time(cfg.T, G);
    int n = std::max(1, int(std::ceil(2 * t1 / cfg.panel_phase)));
    MelnikovResult r;
    for (int i = 0; i < n; ++i) {
        double a = -t1 + 2 * t1 * i / n, b = -t1 + 2 * t1 * (i + 1) / n;
        double e = 0;
        // cos(alpha - s) is only known to ulp(t) far out
        double tol = std::max(cfg.tol, 64 * std::numeric_limits<double>::epsilon() * std::max(std::abs(a), std::abs(b)));
        r.value += boost::math::quadrature::gauss_kronrod<double, 31>::integrate(f, a, b, 8, tol, &e);
        r.error += e;
    }
    r.tail_bound = 64 * cfg.bound_C * p.mu / (3 * G * G * G * cfg.T * cfg.T * cfg.T);
    r.alpha0 = alpha0;
    r.G0 = G0;
    r.s0 = s0;
    r.sigma = sigma;
    r.e0 = p.e0;
    return r;
}

const char* branch_name(Branch b) { return b == Branch::Plus ? "plus" : "minus"; }

Branch branch_from_name(const std::string& s) {
    if (s == "plus" || s == "+") return Branch::Plus;
    if (s == "minus" || s == "-") return Branch::Minus;
    throw DomainError("unknown branch '" + s + "'");
}

CriticalPoints critical_points(double alpha0, double G0, double s0, const Params& p, const QuadConfig& cfg,
                               double threshold) {
    Harmonics h = harmonics(G0, p, cfg);
    CriticalPoints c;
    c.sigma_minus = s0 - alpha0;
    c.sigma_plus = c.sigma_minus + pi;
    if (h.lowest() == 0) throw NondegeneracyFailure("Poincare function is constant in sigma");
    Scaled big = h.max_dtheta();
    double th_m = alpha0 - s0 + c.sigma_minus;
    double th_p = alpha0 - s0 + c.sigma_plus;
    c.residual_minus = std::abs(h.dtheta(th_m).mant) / big.mant;
    c.residual_plus = std::abs(h.dtheta(th_p).mant) / big.mant;
    c.d2_minus = h.d2theta(th_m);
    c.d2_plus = h.d2theta(th_p);
    double refabs = 0;
    int k0 = h.lowest();
    for (int k = k0; k <= int(h.m.size()); ++k)
        refabs += 2.0 * k * k * std::abs(h.m[k - 1]) * std::exp(-(k - k0) * h.decay());
    if (std::abs(c.d2_minus.mant) < threshold * refabs || std::abs(c.d2_plus.mant) < threshold * refabs)
        throw NondegeneracyFailure("second sigma derivative vanishes at a critical point");
    return c;
}

double reduced_poincare(double G0, Branch b, const Params& p, const QuadConfig& cfg) {
    Harmonics h = harmonics(G0, p, cfg);
    double v = h.I0;
    for (int k = 1; k <= int(h.m.size()); ++k)
        v += 2 * h.harmonic(k) * ((b == Branch::Plus && k % 2) ? -1.0 : 1.0);
    return v;
}

Scaled branch_difference(double G0, const Params& p, const QuadConfig& cfg) {
    Harmonics h = harmonics(G0, p, cfg);
    double d = h.decay();
    double s = 0;
    for (int k = 1; k <= int(h.m.size()); k += 2) s += -4 * h.m[k - 1] * std::exp(-(k - 1) * d);
    return {s, d};
}

ScatteringModel::ScatteringModel(Branch b, const Params& p, const QuadConfig& cfg) : branch_(b), p_(p), cfg_(cfg) {
    check_circular(p_);
    cfg_.validate();
}

double ScatteringModel::f(double G) const {
    check_G(G, cfg_);
    double h = std::cbrt(1e-14) * G;
    return (reduced_poincare(G + h, branch_, p_, cfg_) - reduced_poincare(G - h, branch_, p_, cfg_)) / (2 * h);
}

double ScatteringModel::df(double G) const {
    check_G(G, cfg_);
    double h = 1e-4 * G;
    double lp = reduced_poincare(G + h, branch_, p_, cfg_);
    double l0 = reduced_poincare(G, branch_, p_, cfg_);
    double lm = reduced_poincare(G - h, branch_, p_, cfg_);
    return (lp - 2 * l0 + lm) / (h * h);
}

double ScatteringModel::f_asymptotic(double G, double mu) { return -3 * pi * mu * (1 - mu) / (2 * std::pow(G, 4)); }

std::pair<double, double> ScatteringModel::apply(double alpha, double G) const { return {alpha - f(G), G}; }

std::pair<double, double> scattering_circular(Branch b, double alpha, double G, const Params& p,
                                              const QuadConfig& cfg) {
    return ScatteringModel(b, p, cfg).apply(alpha, G);
}

TwistReport twist_check(const std::vector<double>& Gs, const Params& p, const QuadConfig& cfg) {
    if (p.mu == 0.0) throw DomainError("twist statistic needs mu > 0");
    if (Gs.empty()) throw DomainError("empty G range");
    TwistReport r;
    r.statistic = std::numeric_limits<double>::infinity();
    r.asymptotic = 6 * pi * (1 - p.mu);
    for (Branch b : {Branch::Minus, Branch::Plus}) {
        ScatteringModel m(b, p, cfg);
        for (double G : Gs) {
            double s = std::abs(m.df(G)) * std::pow(G, 5) / p.mu;
            if (s < r.statistic) {
                r.statistic = s;
                r.at_G = G;
                r.branch = b;
            }
        }
    }
    return r;
}

AveragedTerm elliptic_averaged(double alpha, double G, const Params& p, const EllipticConfig& ecfg,
                               const QuadConfig& cfg) {
    p.validate();
    G = check_G(G, cfg);
    AveragedTerm out;
    if (p.mu == 0.0) return out;
    const int n = ecfg.n_phase;
    if (n < 4) throw DomainError("n_phase must be >= 4");
    Ephemeris eph(p.e0);
    std::vector<double> rho(n), v(n), s(n);
    for (int i = 0; i < n; ++i) {
        s[i] = 2 * pi * i / n;
        rho[i] = eph.separation(s[i]);
        v[i] = eph.true_anomaly(s[i]);
    }
    // averages of (dU, dU_x, dU_alpha) for e0 minus circular
    auto avg = [&](double b, double& du, double& dux, double& dua) {
        double x = 2 * std::cos(b) / G;
        double a = alpha + 2 * b;
        du = dux = dua = 0;
        for (int i = 0; i < n; ++i) {
            auto e = delta_u_kernel<double, double>(x, a, rho[i], v[i], p.mu);
            auto c = delta_u_kernel<double, double>(x, a, 1.0, s[i], p.mu);
            du += e.value - c.value;
            dux += e.dx - c.dx;
            dua += e.dalpha;
        }
        du /= n;
        dux /= n;
        dua /= n;
    };
    auto sec4 = [](double b) {
        double c = std::cos(b);
        return 1.0 / (c * c * c * c);
    };
    const double d = 0.5 * G * G * G;
    using GK = boost::math::quadrature::gauss_kronrod<double, 61>;
    // analytic integrands: a few bisections suffice, and the alpha derivative
    // can sit at rounding level where a relative tolerance is unreachable
    double tol = std::min(cfg.tol, 1e-13);
    int depth = std::min(cfg.max_depth, 4);
    out.value = GK::integrate([&](double b) {
        double u, ux, ua;
        avg(b, u, ux, ua);
        return d * sec4(b) * u;
    }, -pi / 2, pi / 2, depth, tol);
    out.dalpha = GK::integrate([&](double b) {
        double u, ux, ua;
        avg(b, u, ux, ua);
        return d * sec4(b) * ua;
    }, -pi / 2, pi / 2, depth, tol);
    out.dG = GK::integrate([&](double b) {
        double u, ux, ua;
        avg(b, u, ux, ua);
        return sec4(b) * G * (1.5 * G * u - std::cos(b) * ux);
    }, -pi / 2, pi / 2, depth, tol);
    return out;
}

EllipticScattering::EllipticScattering(Branch b, const Params& p, const QuadConfig& cfg, const EllipticConfig& ecfg)
    : branch_(b), p_(p), cfg_(cfg), ecfg_(ecfg), circ_(b, Params(p.mu, 0.0, p.collision_floor), cfg) {
    p_.validate();
    if (p_.e0 > ecfg_.e0_cap) throw ChannelLost("e0 above the configured cap");
}

std::pair<double, double> EllipticScattering::apply(double alpha, double G) const {
    if (!(std::abs(G) >= cfg_.G_min)) throw ChannelLost("G below G_min");
    // generating function alpha G' - L(alpha, G'):  G' = G + L_alpha,  alpha' = alpha - L_G
    double Gp = G;
    AveragedTerm t;
    int it = 0;
    for (;; ++it) {
        if (it >= ecfg_.max_iter) throw ChannelLost("implicit action update did not converge");
        t = elliptic_averaged(alpha, Gp, p_, ecfg_, cfg_);
        double Gn = G + t.dalpha;
        if (!(std::abs(Gn) >= cfg_.G_min)) throw ChannelLost("orbit left the channel range");
        bool done = std::abs(Gn - Gp) <= ecfg_.solve_tol * std::abs(G);
        Gp = Gn;
        if (done) break;
    }
    if (p_.e0 == 0.0) Gp = G;
    t = elliptic_averaged(alpha, Gp, p_, ecfg_, cfg_);
    return {alpha - circ_.f(Gp) - t.dG, Gp};
}

std::pair<double, double> EllipticScattering::first_order(double alpha, double G, double h) const {
    auto at = [&](double e) {
        return EllipticScattering(branch_, Params(p_.mu, e, p_.collision_floor), cfg_, ecfg_).apply(alpha, G);
    };
    auto s0 = at(0.0), s1 = at(h), s2 = at(h / 2);
    double da = 2 * (s2.first - s0.first) / (h / 2) - (s1.first - s0.first) / h;
    double dg = 2 * (s2.second - s0.second) / (h / 2) - (s1.second - s0.second) / h;
    return {da, dg};
}

std::pair<double, double> scattering_elliptic(Branch b, double alpha, double G, const Params& p,
                                              const QuadConfig& cfg, const EllipticConfig& ecfg) {
    return EllipticScattering(b, p, cfg, ecfg).apply(alpha, G);
}

}  // namespace rtbp
