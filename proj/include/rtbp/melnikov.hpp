#pragma once
#include <complex>
#include <string>
#include <utility>
#include <vector>

#include "rtbp/errors.hpp"
#include "rtbp/params.hpp"

namespace rtbp {

struct QuadConfig {
    double tol = 1e-12;      // relative to the scale mu(1-mu)/G^3
    double G_min = 2.0;
    int max_harmonics = 64;
    int max_depth = 20;
    double contour_c = 0.0;  // contour at Im tau = -(1 - c/G^2); 0 selects 2(1-mu)
    void validate() const;
};

/// Number m * exp(-e) kept apart so that e^{-G^3/3}-sized quantities survive.
struct Scaled {
    double mant = 0;
    double expo = 0;
    double value() const;
    double log_abs() const;
    int sign() const { return (mant > 0) - (mant < 0); }
};

/// Coefficients of L(theta) = I_0 + 2 sum_k I_k cos(k theta), theta = alpha0 - s0 + sigma.
/// I_k = m_k exp(-k G^3/3).
struct Harmonics {
    double G = 0;
    double mu = 0;
    double I0 = 0;
    double I0_err = 0;
    std::vector<double> m;      // m[k-1]
    std::vector<double> m_err;
    double decay() const;       // G^3/3
    int lowest() const;         // first k with m_k != 0, 0 if none
    double harmonic(int k) const;
    double value(double theta) const;
    double error() const;
    Scaled oscillatory(double theta) const;  // L(theta) - I_0
    Scaled dtheta(double theta) const;
    Scaled d2theta(double theta) const;
    /// max over theta of |dL/dtheta| (scaled)
    Scaled max_dtheta() const;
};

/// Averaged part I_0 = int <dU>_phi dt along the separatrix.
double harmonic_zero(double G, double mu, const QuadConfig& cfg, double* err = nullptr);
/// dI_0/dG differentiated under the integral sign.
double harmonic_zero_dG(double G, double mu, const QuadConfig& cfg);
/// m_k = I_k e^{k G^3/3} from the shifted contour; b overrides the contour depth.
double harmonic_scaled(int k, double G, double mu, const QuadConfig& cfg, double* err = nullptr,
                       double b = -1.0);
/// Coefficient A_k(w) of 2 cos(k phi) in dU for circular primaries, w = x^2.
std::complex<double> potential_harmonic(int k, std::complex<double> w, double mu);

Harmonics harmonics(double G, const Params& p, const QuadConfig& cfg = {});

struct MelnikovResult {
    double value = 0;
    double error = 0;
    double tail_bound = 0;
    double alpha0 = 0, G0 = 0, s0 = 0, sigma = 0, e0 = 0;
};

MelnikovResult poincare_function(double alpha0, double G0, double s0, double sigma, const Params& p,
                                 const QuadConfig& cfg = {});

struct DirectConfig {
    double T = 40.0;          // tau range [-T, T]
    double panel_phase = 6.283185307179586;  // time span of one panel
    double tol = 1e-13;
    double bound_C = 0.17;    // |dU| <= C mu x^6
};

/// Straight quadrature of dU along the separatrix in tau, split into panels of
/// equal time; slow, used as a diagnostic at moderate G.
MelnikovResult poincare_function_direct(double alpha0, double G0, double s0, double sigma,
                                        const Params& p, const DirectConfig& cfg = {});

enum class Branch { Minus, Plus };
const char* branch_name(Branch b);
Branch branch_from_name(const std::string& s);

struct CriticalPoints {
    double sigma_minus = 0, sigma_plus = 0;
    double residual_minus = 0, residual_plus = 0;  // |dL| / max |dL|
    Scaled d2_minus, d2_plus;
};

CriticalPoints critical_points(double alpha0, double G0, double s0, const Params& p,
                               const QuadConfig& cfg = {}, double threshold = 1e-8);

double reduced_poincare(double G0, Branch b, const Params& p, const QuadConfig& cfg = {});
/// L*_+ - L*_- = -4 sum_{k odd} I_k
Scaled branch_difference(double G0, const Params& p, const QuadConfig& cfg = {});

class ScatteringModel {
public:
    ScatteringModel(Branch b, const Params& p, const QuadConfig& cfg = {});
    Branch branch() const { return branch_; }
    double G_min() const { return cfg_.G_min; }
    /// f(G) = d L*/dG by centred differences
    double f(double G) const;
    double df(double G) const;
    static double f_asymptotic(double G, double mu);
    /// (alpha - f(G), G): past asymptotic base point to future one
    std::pair<double, double> apply(double alpha, double G) const;

private:
    Branch branch_;
    Params p_;
    QuadConfig cfg_;
};

std::pair<double, double> scattering_circular(Branch b, double alpha, double G, const Params& p,
                                              const QuadConfig& cfg = {});

struct TwistReport {
    double statistic = 0;  // min |df/dG| G^5 / mu
    double at_G = 0;
    Branch branch = Branch::Minus;
    double asymptotic = 0;  // 6 pi (1-mu)
};

TwistReport twist_check(const std::vector<double>& Gs, const Params& p, const QuadConfig& cfg = {});

struct EllipticConfig {
    double e0_cap = 0.05;
    int n_phase = 64;
    double solve_tol = 1e-15;
    int max_iter = 50;
};

/// s-averaged generating function correction and its derivatives:
/// value, d/dalpha, d/dG of  int <dU(e0)>_s - <dU(0)>_s  along the separatrix.
struct AveragedTerm {
    double value = 0, dalpha = 0, dG = 0;
};
AveragedTerm elliptic_averaged(double alpha, double G, const Params& p, const EllipticConfig& ecfg = {},
                               const QuadConfig& cfg = {});

class EllipticScattering {
public:
    EllipticScattering(Branch b, const Params& p, const QuadConfig& cfg = {}, const EllipticConfig& ecfg = {});
    /// G' = G + L_alpha(alpha, G'), alpha' = alpha - L_G(alpha, G')
    std::pair<double, double> apply(double alpha, double G) const;
    /// S_1 estimated as the Richardson limit of (S(e) - S(0))/e, e = h, h/2
    std::pair<double, double> first_order(double alpha, double G, double h = 1e-2) const;
    const Params& params() const { return p_; }

private:
    Branch branch_;
    Params p_;
    QuadConfig cfg_;
    EllipticConfig ecfg_;
    ScatteringModel circ_;
};

std::pair<double, double> scattering_elliptic(Branch b, double alpha, double G, const Params& p,
                                              const QuadConfig& cfg = {}, const EllipticConfig& ecfg = {});

}  // namespace rtbp
