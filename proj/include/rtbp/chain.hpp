#pragma once
#include <array>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "rtbp/manifold.hpp"
#include "rtbp/melnikov.hpp"

namespace rtbp {

/// Worker threads for candidate sweeps: RTBP_THREADS if set, else the hardware count.
int thread_count();
/// Runs f(0..n-1) on thread_count() threads; the first exception is rethrown.
void parallel_for(int n, const std::function<void(int)>& f);

// ---------------------------------------------------------------- homoclinics

struct PerihelionPoint {
    double lambda = 0;  // position in the fundamental domain, 0..1
    double s = 0, x = 0, alpha = 0, G = 0;
};

/// First perihelion passages (y = 0) of orbits seeded on the fundamental domain
/// K([R(t0), t0]) of a chart: forward for W^u, backward for W^s.  Across the
/// domain the passage phase s winds once.
class PerihelionCurve {
public:
    PerihelionCurve(ManifoldChart chart, const Params& p, const IntegratorConfig& ic = {1e-13, 1e-15},
                    double t0 = 0.0);
    PerihelionPoint at(double lambda) const;
    /// point with g(point) = target mod 2 pi, for a g that winds once over the domain
    PerihelionPoint solve(const std::function<double(const PerihelionPoint&)>& g, double target,
                          double tol = 1e-12) const;
    PerihelionPoint at_phase(double s_target) const;
    const ManifoldChart& chart() const { return chart_; }

private:
    ManifoldChart chart_;
    Params p_;
    IntegratorConfig ic_;
    double t0_, t1_;
};

struct HomoclinicConfig {
    ChartConfig chart{8, 32, 1e-9, 1e-6};
    IntegratorConfig integrator{1e-13, 1e-15};
    double match_tol = 1e-8;
    double coincidence_tol = 1e-8;
    int coincidence_samples = 8;
    double phase_step = 0.05;      // step for the splitting slope
    double noise_floor = 1e-10;    // resolution of the x mismatch
    double base_step = 1e-5;       // finite differences in (theta1, G1), elliptic case
    bool measure_splitting = true;
    int max_iter = 20;
    void validate() const;
};

struct HomoclinicIntersection {
    Branch branch = Branch::Minus;
    double alpha0 = 0, G0 = 0, s0 = 0;  // past base point Lambda_{alpha0, G0}
    double alpha1 = 0, G1 = 0;          // future base point
    PerihelionPoint point;              // on the perihelion section
    double seed_phase = 0;              // Melnikov prediction of the passage phase
    double seed_distance = 0;           // from the unperturbed perihelion point
    /// x mismatch of the manifolds as a function of the passage phase
    double splitting = 0;               // measured slope at the intersection
    double splitting_predicted = 0;     // (G/2)(1 - 4/G^3) |d2L/dsigma2|
    bool resolved = false;              // slope above the noise floor
    bool coincident = false;            // identical manifolds (constant Poincare function)
    double residual = 0;                // max mismatch in (s, x, alpha, G)
};

/// Heteroclinic connection from Lambda_{alpha0, G0} (alpha0 the asymptotic angle)
/// seeded at the critical point sigma*_{+-} of the Poincare function and matched
/// on the perihelion section.
HomoclinicIntersection find_homoclinic(Branch b, double alpha0, double G0, double s0, const Params& p,
                                       const HomoclinicConfig& cfg = {});

/// Chart and perihelion-curve cache shared by the homoclinics of one chain.
class HomoclinicSolver {
public:
    HomoclinicSolver(const Params& p, const HomoclinicConfig& cfg = {});
    HomoclinicIntersection solve(Branch b, double alpha0, double G0, double s0);
    /// x mismatch at passage phase s_p, with the matched future base point
    double splitting_function(double alpha0, double G0, double s0, double s_p, PerihelionPoint* u = nullptr,
                              double* alpha1 = nullptr, double* G1 = nullptr, double* residual = nullptr);

private:
    const PerihelionCurve& curve(ManifoldBranch b, double theta, double G, double s0);
    Params p_;
    HomoclinicConfig cfg_;
    std::map<std::array<double, 4>, std::unique_ptr<PerihelionCurve>> cache_;
};

// ---------------------------------------------------------------- lambda lemma

/// Rescaled local model q' = q(1 + O1q), p' = -p(1 + O1p), z' = q p O0, t' = f^-3
/// with O1q = aq q + bq p, O1p = ap q + bp p and constant O0.
struct LambdaModel {
    double aq = 0, bq = 0, ap = 0, bp = 0;
    std::array<double, 2> o0{0, 0};
    /// bound on |O0| used in the centre drift estimate
    double K() const;
    static LambdaModel pure();
};

struct LambdaConfig {
    double eps_tilde = 0.1;
    double q_f = 1e-2;
    double delta = 1e-6;
    double p0 = 1e-2;
    std::array<double, 2> z0{0.0, 5.0};
    int samples = 1000;
    IntegratorConfig integrator{1e-13, 1e-20};
    void validate() const;
};

struct LambdaSample {
    double s = 0, q = 0, p = 0, t = 0;
    std::array<double, 2> z{};
};

struct LambdaTransition {
    double S = 0;            // rescaled transition time
    double T = 0;            // physical time
    double S_lo = 0, S_hi = 0;
    LambdaSample exit;
    double p_bound = 0;      // p0 (delta/q_f)^{(1-e)/(1+e)}
    double z_drift = 0, z_bound = 0;
    std::vector<LambdaSample> samples;
    int violations = 0;
};

/// Integrates the model from (delta, p0, z0) to {q = q_f}; BoundViolation with
/// the offending s when a sample leaves the Gronwall sandwich or a bound fails.
LambdaTransition lambda_transition(const LambdaModel& m, const LambdaConfig& cfg = {});

// ---------------------------------------------------------------- chains

enum class BranchPolicy { Minus, Plus, Alternate };
const char* branch_policy_name(BranchPolicy b);
BranchPolicy branch_policy_from_name(const std::string& s);

struct ChainNode {
    double alpha = 0, G = 0;  // asymptotic angle and momentum of Lambda_k
    bool in_band = true;
};

struct ChainLink {
    Branch branch = Branch::Minus;
    std::optional<HomoclinicIntersection> witness;
    double witness_gap = 0;  // |witness future base - next node|
};

struct TransitionChain {
    std::vector<ChainNode> nodes;  // n + 1 nodes
    std::vector<ChainLink> links;  // n links
    double G_lo = 0, G_hi = 0;     // band
    bool bounded = true;
    double max_deviation = 0;      // max |G_k - G_0|
    double net_drift = 0;          // G_n - G_0
    bool elliptic = false;
};

struct ChainConfig {
    int witnesses = 0;  // links with a homoclinic witness, -1 for all
    HomoclinicConfig homoclinic;
    QuadConfig quad;
    EllipticConfig elliptic;
};

/// Iterates the circular (e0 = 0) or elliptic scattering map from (alpha0, G0).
TransitionChain build_chain(double alpha0, double G0, BranchPolicy policy, int n, double G_lo, double G_hi,
                            const Params& p, const ChainConfig& cfg = {});

// ---------------------------------------------------------------- shadowing

struct ShadowConfig {
    std::vector<double> delta;     // Lambda-ball radii; empty: delta_scale / k
    double delta_scale = 0.05;
    double delta_tilde = 1e-2;     // radius of the balls around the homoclinic points
    double horizon = 1e8;
    int subdivisions = 32;
    IntegratorConfig integrator{1e-12, 1e-15};
    bool reverse_time = false;     // report the reflected orbit, oscillating in the past
    double delta_k(int k) const;
    void validate() const;
};

struct VisitRecord {
    bool lambda = false;  // Lambda_k visit (apocentre) or homoclinic point p_k (perihelion)
    int link = 0;
    double t = 0;
    long period = 0;      // completed periods of the primaries since the start
    McGeheeState state;
    double distance = 0;
    double radius = 0;    // ball radius it was checked against
};

struct Excursion {
    double t_start = 0, t_apo = 0, t_end = 0;
    double r_max = 0, r_min = 0;
};

struct ShadowRun {
    double epsilon = 0;                             // offset along the transversal curve
    McGeheeState initial;
    std::vector<std::pair<double, double>> boxes;   // nested boxes, one per link
    std::vector<VisitRecord> visits;
    std::vector<Excursion> excursions;
    int links_shadowed = 0;
    bool complete = false;
    bool reversed = false;
    std::string stop_reason;
};

/// Box refinement on the curve x = x(p_0) + epsilon through the first homoclinic
/// point.  Needs a witness on every link.  Throws PrecisionExhausted(k) when no
/// link could be shadowed, otherwise records the partial run.
ShadowRun shadow_chain(const TransitionChain& chain, const Params& p, const ShadowConfig& cfg = {});

/// Checks N_k < Ntilde_k < N_{k+1} on the visit records.
bool visits_interleave(const ShadowRun& run);

// ---------------------------------------------------------------- oscillation

struct OscillationConfig {
    BranchPolicy policy = BranchPolicy::Minus;
    double alpha0 = 0.0;
    double band = 1.0;
    ShadowConfig shadow;
    HomoclinicConfig homoclinic{};
    double ratio_required = 10.0;
    int excursions_required = 2;
};

struct OscillationReport {
    bool pass = false;
    std::string verdict;
    std::string reason;
    TransitionChain chain;
    std::optional<ShadowRun> run;
    double r_in = 0, r_out = 0;
};

/// chain -> witnesses -> shadowing; PASS needs the required number of completed
/// excursions with r_out / r_in above the ratio.  Finite evidence only.
OscillationReport oscillation_demo(const Params& p, double G0, int n_links, const OscillationConfig& cfg = {});

}  // namespace rtbp
