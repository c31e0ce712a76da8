#pragma once
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "rtbp/dop853.hpp"
#include "rtbp/field.hpp"

namespace rtbp {

struct IntegratorConfig {
    double rel_tol = 1e-12;
    double abs_tol = 1e-14;
    double max_step = std::numeric_limits<double>::infinity();
    double max_time = 1e7;  ///< safety horizon on |t1 - t0|
    long max_steps = 5000000;
    double event_tol = 1e-12;

    void validate() const;
    Dop853Options options() const;
};

using DenseStep = Dop853Dense<double, 4, double>;

/// Accepted steps with their dense output.
class Trajectory {
public:
    Chart chart = Chart::Cartesian;
    std::vector<DenseStep> steps;

    bool empty() const { return steps.empty(); }
    double t_begin() const { return steps.front().t0; }
    double t_end() const { return steps.back().t1; }
    Vec4 front() const { return steps.front().y0; }
    Vec4 back() const { return final_state; }
    /// dense-output evaluation at any t inside the span
    Vec4 at(double t) const;
    /// step endpoints as (t, state) samples
    std::vector<std::pair<double, Vec4>> samples() const;

    Vec4 final_state{};
};

/// Integrate the chart's vector field over [t0, t1] (t1 < t0 integrates backward).
Trajectory integrate(const Vec4& y0, double t0, double t1, Chart chart, const Params& p,
                     const IntegratorConfig& cfg);

/// Scalar section function g(t, state) with crossing direction
/// (+1 increasing, -1 decreasing, 0 either).
struct Section {
    std::string id;
    std::function<double(double, const Vec4&)> g;
    int direction = 0;
};

struct SectionEvent {
    double t = 0;
    Vec4 state{};
    std::string section_id;
    int direction = 0;
    double residual = 0;
};

/// First crossing on a stored trajectory (in integration direction).
SectionEvent find_section_crossing(const Trajectory& traj, const Section& sec, const IntegratorConfig& cfg);

/// Integrate from (t0, y0) until the first crossing or t_max; throws NoCrossing.
SectionEvent integrate_to_section(const Vec4& y0, double t0, double t_max, Chart chart, const Params& p,
                                  const Section& sec, const IntegratorConfig& cfg, Trajectory* traj = nullptr);

/// Stroboscopic map over one period of the primaries (direction -1 gives the inverse).
McGeheeState poincare_map(const McGeheeState& m, const Params& p, const IntegratorConfig& cfg, int direction = 1);

/// n >= 0 forward, n < 0 backward iterates; result[0] is the input.
std::vector<McGeheeState> iterate_map(const McGeheeState& m, int n, const Params& p, const IntegratorConfig& cfg);

/// Determinant of the finite-difference Jacobian of the period map, computed
/// in the canonical polar variables (r, alpha, y, G).
double period_map_determinant(const McGeheeState& m, const Params& p, const IntegratorConfig& cfg, double h = 1e-6);

/// Fixed-step DOP853 (n steps) of a chart field; used by the order study.
Vec4 integrate_fixed(const Vec4& y0, double t0, double t1, int n, Chart chart, const Params& p);

/// Empirical order from step halving on a generic problem: returns the
/// least-squares slope of log(error) against log(h).
double empirical_order(const std::function<Vec4(double, const Vec4&)>& f, const Vec4& y0, double t1,
                       const Vec4& exact, const std::vector<int>& steps);

}  // namespace rtbp
