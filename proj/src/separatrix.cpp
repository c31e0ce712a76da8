#include "rtbp/separatrix.hpp"

#include <algorithm>
#include <cmath>

#include "rtbp/field.hpp"

namespace rtbp {

namespace {

void need_nonzero(double G0) {
    if (G0 == 0.0 || !std::isfinite(G0)) throw DomainError("separatrix needs G0 != 0");
}

}  // namespace

double separatrix_time(double tau, double G0) {
    need_nonzero(G0);
    double g = std::abs(G0);
    return 0.5 * g * g * g * (tau + tau * tau * tau / 3.0);
}

SeparatrixPoint separatrix_eval(double tau, double G0, double alpha0, double s0) {
    need_nonzero(G0);
    double g = std::abs(G0);
    double q = 1.0 + tau * tau;
    SeparatrixPoint sp;
    sp.tau = tau;
    sp.t = separatrix_time(tau, G0);
    sp.state.x = std::isinf(tau) ? 0.0 : 2.0 / (g * std::sqrt(q));
    sp.state.y = std::isinf(tau) ? 0.0 : 2.0 * tau / (g * q);
    sp.state.alpha = alpha0 + (G0 > 0 ? 2.0 : -2.0) * std::atan(tau);
    sp.state.G = G0;
    sp.state.s = s0 + sp.t;
    return sp;
}

double tau_from_time(double t, double G0, double tol) {
    need_nonzero(G0);
    if (t == 0.0) return 0.0;
    double g = std::abs(G0);
    // tau^3 + 3 tau - 6t/g^3 = 0 has the single real root 2 sinh(asinh(w)/3), w = 3t/g^3
    double w = 3.0 * t / (g * g * g);
    double tau = 2.0 * std::sinh(std::asinh(w) / 3.0);
    double k = 0.5 * g * g * g;
    for (int it = 0; it < 3; ++it) {
        double r = k * (tau + tau * tau * tau / 3.0) - t;
        tau -= r / (k * (1.0 + tau * tau));
        if (std::abs(r) <= tol * std::max(1.0, std::abs(t))) break;
    }
    return tau;
}

SeparatrixPoint separatrix_at_time(double t, double G0, double alpha0, double s0) {
    SeparatrixPoint sp = separatrix_eval(tau_from_time(t, G0), G0, alpha0, s0);
    sp.t = t;
    sp.state.s = s0 + t;
    return sp;
}

McGeheeState separatrix_velocity(double tau, double G0) {
    need_nonzero(G0);
    double g = std::abs(G0);
    double q = 1.0 + tau * tau;
    double dtdtau = 0.5 * g * g * g * q;
    McGeheeState d;
    d.x = -2.0 * tau / (g * q * std::sqrt(q)) / dtdtau;
    d.y = 2.0 * (1.0 - tau * tau) / (g * q * q) / dtdtau;
    d.alpha = (G0 > 0 ? 2.0 : -2.0) / q / dtdtau;
    d.G = 0.0;
    d.s = 1.0;
    return d;
}

double verify_separatrix(double G0, const std::vector<double>& tau_grid, const Params& p) {
    if (p.mu != 0.0) throw DomainError("verify_separatrix requires mu = 0");
    double worst = 0;
    for (double tau : tau_grid) {
        auto sp = separatrix_eval(tau, G0, 0.3, 0.0);
        auto d = separatrix_velocity(tau, G0);
        auto f = vector_field_mcgehee(sp.state, p);
        worst = std::max({worst, std::abs(d.x - f.x), std::abs(d.y - f.y), std::abs(d.alpha - f.alpha),
                          std::abs(d.G - f.G), std::abs(d.s - f.s)});
    }
    return worst;
}

}  // namespace rtbp
