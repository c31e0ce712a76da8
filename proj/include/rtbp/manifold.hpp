#pragma once
#include <array>
#include <complex>
#include <iosfwd>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include <boost/multiprecision/cpp_bin_float.hpp>

#include "rtbp/errors.hpp"
#include "rtbp/flow.hpp"
#include "rtbp/params.hpp"

namespace rtbp {

using mp50 = boost::multiprecision::number<boost::multiprecision::cpp_bin_float<50>,
                                           boost::multiprecision::et_off>;
using MPoint = std::array<mp50, 4>;
/// per component Taylor coefficients, index = power of t
using MSeries = std::array<std::vector<mp50>, 4>;

/// A map of the local (q, p, theta, G) chart with a fixed point, known through
/// the Taylor expansion of F(K(t)) for polynomial curves K.
class TaylorOracle {
public:
    virtual ~TaylorOracle() = default;
    virtual MPoint base() const = 0;
    /// coefficients of F(K(t)) up to degree d; K[i][0] must be the base point
    virtual MSeries compose(const MSeries& K, int d) const = 0;
    virtual MPoint apply(const MPoint& z) const = 0;
    /// time span of one iterate (map coefficients = span * field coefficients)
    virtual double period() const = 0;
    virtual std::unique_ptr<TaylorOracle> inverse() const = 0;
    virtual std::unique_ptr<TaylorOracle> clone() const = 0;
};

enum class LocalField { ThreeBody, Model };

/// Period map of the local chart over [s0, s0 + direction * 2 pi], realised as
/// `steps` fixed DOP853 steps in 50-digit arithmetic.  Its Taylor expansion is
/// obtained by pushing power series through the same steps.
class PeriodMapOracle : public TaylorOracle {
public:
    PeriodMapOracle(const Params& p, double theta0, double G0, double s0, int direction = 1, int steps = 64,
                    LocalField field = LocalField::ThreeBody);
    MPoint base() const override;
    MSeries compose(const MSeries& K, int d) const override;
    MPoint apply(const MPoint& z) const override;
    double period() const override;
    /// the same scheme integrated in the opposite direction
    std::unique_ptr<TaylorOracle> inverse() const override;
    std::unique_ptr<TaylorOracle> clone() const override;
    int direction() const { return dir_; }

private:
    Params p_;
    double theta0_, G0_, s0_;
    int dir_, steps_;
    LocalField field_;
};

/// Polynomial map (q, p, theta, G) -> (q(1 - a x^3 + b x^6), p(1 + a x^3), theta, G),
/// x = q + p.  On {p = 0} it is exactly t -> t - a t^4 + b t^7.
class NormalFormMap : public TaylorOracle {
public:
    NormalFormMap(double a, double b, double theta0, double G0, double span = 1.0);
    MPoint base() const override;
    MSeries compose(const MSeries& K, int d) const override;
    MPoint apply(const MPoint& z) const override;
    double period() const override { return span_; }
    /// inverted by Newton iteration on series and points
    std::unique_ptr<TaylorOracle> inverse() const override;
    std::unique_ptr<TaylorOracle> clone() const override;

private:
    double a_, b_, theta0_, G0_, span_;
};

struct ParabolicNormalData {
    int N = 4;
    double c = 0.25;        // leading coefficient per unit time
    int center_dim = 2;
    double period = 6.283185307179586;
    void validate() const;
};

/// Reads N and c from the Taylor expansion of F along the coordinate axis
/// `axis` (0 = q, 1 = p): F(z0 + t e) - z0 - t e = -c period t^N e + ...
ParabolicNormalData detect_normal_form(const TaylorOracle& F, int axis, int max_degree = 8,
                                       double threshold = 1e-20);

/// Finite-difference Taylor oracle in double precision: least-squares fit of the
/// adaptive period map along the axis on a Chebyshev stencil of half-width
/// tol^{1/(degree+1)}.  Returns the coefficients of F(z0 + t e) - z0 for the
/// axis component.
std::vector<double> fd_axis_coefficients(const Params& p, double theta0, double G0, double s0, int axis,
                                         int direction, int degree = 12, double tol = 1e-14);

enum class ManifoldBranch { Stable, Unstable };
const char* manifold_branch_name(ManifoldBranch b);
ManifoldBranch manifold_branch_from_name(const std::string& s);

struct DefectSample {
    double t = 0;
    double defect = 0;
};

/// Local parameterization K(t) of W^s or W^u of the fixed point, with
/// F o K = K o R, R(t) = t - c_map t^N + ctilde t^{2N-1}.  For the unstable
/// branch F is the inverse period map.
struct ManifoldChart {
    ManifoldBranch branch = ManifoldBranch::Unstable;
    int axis = 0;
    std::array<double, 4> base{};  // (q, p, theta, G)
    double s0 = 0;
    int N = 4;
    double c = 0.25;   // per unit time
    double period = 6.283185307179586;
    mp50 c_map = 0;    // coefficient of t^N in R
    mp50 ctilde = 0;
    int k = 0;
    std::vector<MPoint> coef;  // coef[m], m = 0..k; coef[0] = base
    std::vector<double> order_residual;
    double t_max = 0;
    double t_handoff = 0;
    std::vector<DefectSample> defect_profile;

    MPoint eval(const mp50& t) const;
    Vec4 eval(double t) const;
    Vec4 derivative(double t) const;
    mp50 R(const mp50& t) const;
    double R(double t) const;
    MSeries series() const;
};

/// Order-by-order solution of F o K = K o R with K_1 = e_axis.  The supplied c
/// is checked against the oracle and refined to working precision.  The axis
/// component of K_N is free (resonant order); it is set to resonant_choice.
ManifoldChart formal_solve(const TaylorOracle& F, const ParabolicNormalData& data, int k, int axis,
                           ManifoldBranch branch = ManifoldBranch::Stable, double resonant_choice = 0.0);

struct DefectReport {
    std::vector<DefectSample> samples;
    double slope = 0;
};

/// max-norm of F(K(t)) - K(R(t)) at each t, with the log-log slope
DefectReport invariance_defect(const ManifoldChart& chart, const std::vector<double>& ts, const TaylorOracle& F);

/// Fills defect_profile, t_max (defect < validity_tol) and t_handoff from a
/// geometric sweep of t.  t_handoff bounds the estimated distance to the true
/// manifold, defect / (N c_map t^{N-1}), by handoff_tol.
void calibrate(ManifoldChart& chart, const TaylorOracle& F, double handoff_tol = 1e-9,
               double validity_tol = 1e-6, double t_lo = 1e-3, double t_hi = 0.5, int samples = 28);

struct ChartConfig {
    int k = 8;
    int steps = 64;
    double handoff_tol = 1e-9;
    double validity_tol = 1e-6;
};

/// Stable chart from the forward period map (K_1 = e_p), unstable chart from
/// the inverse map (K_1 = e_q), at base (theta0, G0) on the section s = s0.
ManifoldChart compute_chart(ManifoldBranch b, const Params& p, double theta0, double G0, double s0 = 0.0,
                            const ChartConfig& cfg = {});
/// oracle matching compute_chart's choice of map
std::unique_ptr<TaylorOracle> chart_oracle(ManifoldBranch b, const Params& p, double theta0, double G0,
                                           double s0, int steps = 64);

/// Text format: '#' header lines (branch, axis, base, s0, N, c, period, c_map,
/// ctilde, k, t_max, t_handoff), then one row "m K_q K_p K_theta K_G" per order.
void write_chart(std::ostream& os, const ManifoldChart& chart);
ManifoldChart read_chart(std::istream& is);

struct SectorDomain {
    double a = 0.1;
    double rho = 0.3;
    void validate() const;
};

struct SectorReport {
    bool pass = false;
    double worst_margin = 0;
    std::complex<double> witness;
    double b = 0, d = 0;  // |t| - d|t|^N <= |R(t)| <= |t| - b|t|^N on the grid
    double bound_rho = 0; // rho allowed by rho^{N-1} < (N-1) c a (1 - M a/((N-1) c))
};

/// Grid check of R(V) in V on the boundary of V = {|arg t| <= a, 0 < |t| <= rho}.
SectorReport sector_check(const ParabolicNormalData& data, double ctilde, const SectorDomain& V, double M = 0.0,
                          int grid = 64);

struct GlobalizeConfig {
    int n_seeds = 16;
    double horizon = 0.0;          // 0: stop at the first perihelion passage
    double max_time = 1e6;
    IntegratorConfig integrator{1e-13, 1e-15};
};

struct ManifoldOrbit {
    double t_param = 0;  // chart parameter of the seed
    std::vector<std::pair<double, McGeheeState>> samples;
};

struct GlobalManifold {
    ManifoldBranch branch = ManifoldBranch::Unstable;
    double t0 = 0;
    std::vector<ManifoldOrbit> orbits;
    /// seeds at t0 and R(t0) compared after one period (local chart max-norm)
    double seed_shift_mismatch = 0;
};

/// Flows a fundamental domain K([R(t0), t0]) with the full system (forward for
/// the unstable branch, backward for the stable one).
GlobalManifold globalize(const ManifoldChart& chart, double t0, const Params& p, const GlobalizeConfig& cfg = {});

/// Distance of a McGehee state from the mu = 0 separatrix asymptotic to
/// Lambda_{theta0, G}: max of |x - x_sep(tau)| and |alpha - alpha_sep(tau)|.
double separatrix_distance(const McGeheeState& m, double theta0, ManifoldBranch b);

/// Coordinates (Q, P, Z) with W^u = {P = 0}, W^s = {Q = 0} built from chart
/// stencils around one base point: Q = q - h_s(p, z, s), P = p - h_u(q, z, s).
class StraightenedChart {
public:
    StraightenedChart(const Params& p, double theta0, double G0, double s0 = 0.0, const ChartConfig& cfg = {},
                      double stencil = 1e-4);
    /// graph of W^u over (q, theta, G) at time s: p and its gradient (d/dq, d/dtheta, d/dG, d/ds)
    double h_unstable(double q, double theta, double G, double s, std::array<double, 4>* grad = nullptr) const;
    double h_stable(double p, double theta, double G, double s, std::array<double, 4>* grad = nullptr) const;
    Vec4 forward(const Vec4& local, double s) const;
    Vec4 backward(const Vec4& straight, double s) const;
    /// pushed-forward local field at a straightened point
    Vec4 field(const Vec4& straight, double s) const;
    double radius() const { return radius_; }
    const ManifoldChart& unstable() const { return charts_u_[0]; }
    const ManifoldChart& stable() const { return charts_s_[0]; }

private:
    double graph(const std::vector<ManifoldChart>& charts, int axis, double u, double theta, double G, double s,
                 std::array<double, 4>* grad) const;
    Params p_;
    double theta0_, G0_, s0_, h_;
    std::vector<ManifoldChart> charts_u_, charts_s_;  // centre, theta+-, G+-, s+-
    double radius_ = 0;
};

/// ChartMismatch unless the charts share base point and section and both are
/// valid up to min_radius.
void check_chart_pair(const ManifoldChart& u, const ManifoldChart& s, double min_radius);

/// Builds the straightened chart; ChartMismatch when the two charts' validity
/// ranges are too small to overlap on a common neighbourhood.
StraightenedChart straighten_local(const Params& p, double theta0, double G0, double s0 = 0.0,
                                   const ChartConfig& cfg = {}, double min_radius = 1e-2);

}  // namespace rtbp
