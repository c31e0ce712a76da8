#include "rtbp/manifold.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <istream>
#include <limits>
#include <numbers>
#include <ostream>
#include <sstream>

#include <boost/math/constants/constants.hpp>

#include "rtbp/dop853.hpp"
#include "rtbp/field.hpp"
#include "rtbp/jet.hpp"

namespace rtbp {

namespace {

using J = Jet<mp50>;

const mp50& two_pi_mp() {
    static const mp50 v = boost::math::constants::two_pi<mp50>();
    return v;
}

template <class T>
std::array<T, 4> model_field(const std::array<T, 4>& s) {
    T x = s[0] + s[1];
    T x3 = x * x * x;
    return {x3 * s[0] / T(4), -(x3 * s[1]) / T(4), T(0), T(0)};
}

template <class T>
std::array<T, 4> run_period_map(const Params& p, LocalField field, const std::array<T, 4>& y0, double s0, int dir,
                                int steps) {
    Ephemeris eph(p.e0);
    const mp50 t0(s0);
    const mp50 t1 = t0 + (dir > 0 ? two_pi_mp() : -two_pi_mp());
    auto f = [&](const mp50& t, const std::array<T, 4>& s) -> std::array<T, 4> {
        if (field == LocalField::Model) return model_field(s);
        return local_field_kernel(s, eph.separation(t), eph.true_anomaly(t), p.mu);
    };
    return dop853_fixed(f, t0, y0, t1, steps);
}

std::array<J, 4> to_jets(const MSeries& K) {
    std::array<J, 4> y;
    const int d = J::degree();
    for (int i = 0; i < 4; ++i) {
        if (K[i].empty()) throw DomainError("empty series component");
        const int top = std::min<int>(d, int(K[i].size()) - 1);
        for (int m = 0; m <= top; ++m) y[i][m] = K[i][m];
    }
    return y;
}

MSeries from_jets(const std::array<J, 4>& y, int d) {
    MSeries out;
    for (int i = 0; i < 4; ++i) {
        out[i].resize(d + 1);
        for (int m = 0; m <= d; ++m) out[i][m] = y[i][m];
    }
    return out;
}

template <class T>
std::array<T, 4> normal_form_map(double a, double b, const std::array<T, 4>& z) {
    T x = z[0] + z[1];
    T x3 = x * x * x;
    return {z[0] * (T(1) - T(a) * x3 + T(b) * x3 * x3), z[1] * (T(1) + T(a) * x3), z[2], z[3]};
}

mp50 max_abs(const MPoint& v) {
    mp50 m = 0;
    for (const auto& x : v) m = std::max(m, mp50(abs(x)));
    return m;
}

/// Inverse of a near-identity map by the iteration Y <- Y - (F(Y) - K).
class InverseOracle : public TaylorOracle {
public:
    explicit InverseOracle(std::unique_ptr<TaylorOracle> f) : f_(std::move(f)) {}
    MPoint base() const override { return f_->base(); }
    MSeries compose(const MSeries& K, int d) const override {
        MSeries target, Y;
        for (int i = 0; i < 4; ++i) {
            target[i].assign(d + 1, mp50(0));
            for (int m = 0; m <= d && m < int(K[i].size()); ++m) target[i][m] = K[i][m];
        }
        Y = target;
        mp50 scale = 1;
        for (int i = 0; i < 4; ++i)
            for (const auto& c : target[i]) scale = std::max(scale, mp50(abs(c)));
        for (int it = 0; it < d + 8; ++it) {
            MSeries FY = f_->compose(Y, d);
            mp50 change = 0;
            for (int i = 0; i < 4; ++i)
                for (int m = 0; m <= d; ++m) {
                    mp50 r = FY[i][m] - target[i][m];
                    Y[i][m] -= r;
                    change = std::max(change, mp50(abs(r)));
                }
            if (change <= 1e-46 * scale) break;
        }
        return Y;
    }
    MPoint apply(const MPoint& z) const override {
        MPoint y = z;
        const mp50 scale = 1 + max_abs(z);
        for (int it = 0; it < 200; ++it) {
            MPoint fy = f_->apply(y);
            mp50 change = 0;
            for (int i = 0; i < 4; ++i) {
                mp50 r = fy[i] - z[i];
                y[i] -= r;
                change = std::max(change, mp50(abs(r)));
            }
            if (change <= 1e-48 * scale) return y;
        }
        throw DomainError("inverse map iteration did not converge");
    }
    double period() const override { return f_->period(); }
    std::unique_ptr<TaylorOracle> inverse() const override { return f_->clone(); }
    std::unique_ptr<TaylorOracle> clone() const override { return std::make_unique<InverseOracle>(f_->clone()); }

private:
    std::unique_ptr<TaylorOracle> f_;
};

MSeries series_of(const std::vector<MPoint>& coef, int upto) {
    MSeries K;
    for (int i = 0; i < 4; ++i) {
        K[i].resize(upto + 1);
        for (int m = 0; m <= upto; ++m) K[i][m] = coef[m][i];
    }
    return K;
}

J jet_pow(const J& x, int n) {
    J r(1.0);
    for (int i = 0; i < n; ++i) r = r * x;
    return r;
}

/// coefficients of K^{<= upto}(R(t)) to degree d
MSeries compose_with_R(const std::vector<MPoint>& coef, int upto, const mp50& cm, const mp50& ct, int N, int d) {
    JetDegree<mp50> guard(d);
    J t = J::linear(mp50(0), mp50(1));
    J R = t - J(cm) * jet_pow(t, N) + J(ct) * jet_pow(t, 2 * N - 1);
    MSeries out;
    for (int i = 0; i < 4; ++i) {
        J acc(coef[upto][i]);
        for (int m = upto - 1; m >= 0; --m) acc = acc * R + J(coef[m][i]);
        out[i].resize(d + 1);
        for (int j = 0; j <= d; ++j) out[i][j] = acc[j];
    }
    return out;
}

std::array<mp50, 4> solve4(std::array<std::array<mp50, 4>, 4> M, std::array<mp50, 4> b, int order) {
    mp50 scale = 0;
    for (auto& row : M)
        for (auto& x : row) scale = std::max(scale, mp50(abs(x)));
    for (int c = 0; c < 4; ++c) {
        int piv = c;
        for (int r = c + 1; r < 4; ++r)
            if (abs(M[r][c]) > abs(M[piv][c])) piv = r;
        if (!(abs(M[piv][c]) > 1e-30 * scale))
            throw OrderSolveFailure(order, "singular cohomological equation");
        std::swap(M[piv], M[c]);
        std::swap(b[piv], b[c]);
        for (int r = c + 1; r < 4; ++r) {
            mp50 f = M[r][c] / M[c][c];
            for (int k = c; k < 4; ++k) M[r][k] -= f * M[c][k];
            b[r] -= f * b[c];
        }
    }
    std::array<mp50, 4> x;
    for (int r = 3; r >= 0; --r) {
        mp50 acc = b[r];
        for (int k = r + 1; k < 4; ++k) acc -= M[r][k] * x[k];
        x[r] = acc / M[r][r];
    }
    return x;
}

std::string mp_str(const mp50& x) {
    return x.str(std::numeric_limits<mp50>::max_digits10, std::ios_base::scientific);
}

std::string dbl_str(double x) {
    std::ostringstream os;
    os.imbue(std::locale::classic());
    os.precision(17);
    os << x;
    return os.str();
}

double parse_double(const std::string& s) {
    char* end = nullptr;
    double v = std::strtod(s.c_str(), &end);
    if (end == s.c_str() || *end != '\0') throw DomainError("bad number in chart file: " + s);
    return v;
}

// keeps the sign of zero, which the string constructor drops
mp50 parse_mp(const std::string& s) {
    const bool neg = !s.empty() && s[0] == '-';
    try {
        mp50 v(neg ? s.substr(1) : s);
        return neg ? -v : v;
    } catch (const std::runtime_error&) {
        throw DomainError("bad number in chart file: " + s);
    }
}

}  // namespace

// ---------------------------------------------------------------- oracles

PeriodMapOracle::PeriodMapOracle(const Params& p, double theta0, double G0, double s0, int direction, int steps,
                                 LocalField field)
    : p_(p), theta0_(theta0), G0_(G0), s0_(s0), dir_(direction >= 0 ? 1 : -1), steps_(steps), field_(field) {
    p.validate();
    if (steps < 1) throw DomainError("period map needs at least one step");
}

MPoint PeriodMapOracle::base() const { return {mp50(0), mp50(0), mp50(theta0_), mp50(G0_)}; }

MSeries PeriodMapOracle::compose(const MSeries& K, int d) const {
    JetDegree<mp50> guard(d);
    auto y = run_period_map(p_, field_, to_jets(K), s0_, dir_, steps_);
    return from_jets(y, d);
}

MPoint PeriodMapOracle::apply(const MPoint& z) const { return run_period_map(p_, field_, z, s0_, dir_, steps_); }

double PeriodMapOracle::period() const { return 2 * std::numbers::pi; }

std::unique_ptr<TaylorOracle> PeriodMapOracle::inverse() const {
    return std::make_unique<PeriodMapOracle>(p_, theta0_, G0_, s0_, -dir_, steps_, field_);
}

std::unique_ptr<TaylorOracle> PeriodMapOracle::clone() const { return std::make_unique<PeriodMapOracle>(*this); }

NormalFormMap::NormalFormMap(double a, double b, double theta0, double G0, double span)
    : a_(a), b_(b), theta0_(theta0), G0_(G0), span_(span) {
    if (!(span > 0)) throw DomainError("span must be positive");
}

MPoint NormalFormMap::base() const { return {mp50(0), mp50(0), mp50(theta0_), mp50(G0_)}; }

MSeries NormalFormMap::compose(const MSeries& K, int d) const {
    JetDegree<mp50> guard(d);
    return from_jets(normal_form_map(a_, b_, to_jets(K)), d);
}

MPoint NormalFormMap::apply(const MPoint& z) const { return normal_form_map(a_, b_, z); }

std::unique_ptr<TaylorOracle> NormalFormMap::inverse() const {
    return std::make_unique<InverseOracle>(clone());
}

std::unique_ptr<TaylorOracle> NormalFormMap::clone() const { return std::make_unique<NormalFormMap>(*this); }

// ---------------------------------------------------------------- normal form

void ParabolicNormalData::validate() const {
    if (N < 2) throw DomainError("degeneracy order N must be at least 2");
    if (!(c > 0)) throw DomainError("leading coefficient c must be positive");
    if (center_dim < 0) throw DomainError("negative centre dimension");
    if (!(period > 0)) throw DomainError("period must be positive");
}

ParabolicNormalData detect_normal_form(const TaylorOracle& F, int axis, int max_degree, double threshold) {
    if (axis < 0 || axis > 1) throw DomainError("axis must be 0 (q) or 1 (p)");
    MPoint z0 = F.base();
    MSeries K;
    for (int i = 0; i < 4; ++i) K[i] = {z0[i], mp50(i == axis ? 1 : 0)};
    MSeries S = F.compose(K, max_degree);
    for (int i = 0; i < 4; ++i)
        for (int m = 0; m < 2; ++m) S[i][m] -= K[i][m];
    for (int j = 2; j <= max_degree; ++j) {
        mp50 norm = 0;
        for (int i = 0; i < 4; ++i) norm = std::max(norm, mp50(abs(S[i][j])));
        if (norm <= threshold) continue;
        mp50 lead = -S[axis][j];
        for (int i = 0; i < 4; ++i)
            if (i != axis && abs(S[i][j]) > 1e-12 * abs(lead))
                throw OrderSolveFailure(j, "leading term not along the chart axis");
        ParabolicNormalData d;
        d.N = j;
        d.period = F.period();
        d.c = double(lead / mp50(d.period));
        if (!(d.c > 0)) throw OrderSolveFailure(j, "leading term expands along the axis");
        return d;
    }
    throw OrderSolveFailure(max_degree, "no nonlinear term up to the probed degree");
}

std::vector<double> fd_axis_coefficients(const Params& p, double theta0, double G0, double s0, int axis,
                                         int direction, int degree, double tol) {
    if (axis < 0 || axis > 1) throw DomainError("axis must be 0 (q) or 1 (p)");
    if (degree < 1) throw DomainError("degree must be positive");
    const double h = std::pow(tol, 1.0 / (degree + 1));
    const int n = 2 * (degree + 1);
    IntegratorConfig cfg;
    cfg.rel_tol = tol;
    cfg.abs_tol = tol * 1e-2;
    const double t1 = s0 + (direction >= 0 ? 1 : -1) * 2 * std::numbers::pi;
    Eigen::MatrixXd V(n, degree + 1);
    Eigen::VectorXd rhs(n);
    for (int j = 0; j < n; ++j) {
        double u = std::cos(std::numbers::pi * (j + 0.5) / n);
        Vec4 z{0, 0, theta0, G0};
        z[axis] = h * u;
        Vec4 out = integrate(z, s0, t1, Chart::LocalQP, p, cfg).final_state;
        double pw = 1;
        for (int m = 0; m <= degree; ++m) {
            V(j, m) = pw;
            pw *= u;
        }
        rhs(j) = out[axis];
    }
    Eigen::VectorXd c = V.colPivHouseholderQr().solve(rhs);
    std::vector<double> out(degree + 1);
    for (int m = 0; m <= degree; ++m) out[m] = c(m) / std::pow(h, m);
    return out;
}

// ---------------------------------------------------------------- charts

const char* manifold_branch_name(ManifoldBranch b) { return b == ManifoldBranch::Stable ? "stable" : "unstable"; }

ManifoldBranch manifold_branch_from_name(const std::string& s) {
    if (s == "stable" || s == "s") return ManifoldBranch::Stable;
    if (s == "unstable" || s == "u") return ManifoldBranch::Unstable;
    throw DomainError("unknown manifold branch '" + s + "'");
}

MPoint ManifoldChart::eval(const mp50& t) const {
    MPoint out;
    for (int i = 0; i < 4; ++i) {
        mp50 acc = coef[k][i];
        for (int m = k - 1; m >= 0; --m) acc = acc * t + coef[m][i];
        out[i] = acc;
    }
    return out;
}

Vec4 ManifoldChart::eval(double t) const {
    Vec4 out;
    for (int i = 0; i < 4; ++i) {
        double acc = double(coef[k][i]);
        for (int m = k - 1; m >= 0; --m) acc = acc * t + double(coef[m][i]);
        out[i] = acc;
    }
    return out;
}

Vec4 ManifoldChart::derivative(double t) const {
    Vec4 out;
    for (int i = 0; i < 4; ++i) {
        double acc = k * double(coef[k][i]);
        for (int m = k - 1; m >= 1; --m) acc = acc * t + m * double(coef[m][i]);
        out[i] = acc;
    }
    return out;
}

mp50 ManifoldChart::R(const mp50& t) const {
    mp50 tn = pow(t, N);
    return t - c_map * tn + ctilde * tn * pow(t, N - 1);
}

double ManifoldChart::R(double t) const { return double(R(mp50(t))); }

MSeries ManifoldChart::series() const { return series_of(coef, k); }

ManifoldChart formal_solve(const TaylorOracle& F, const ParabolicNormalData& data, int k, int axis,
                           ManifoldBranch branch, double resonant_choice) {
    data.validate();
    const int N = data.N;
    if (k < N) throw DomainError("chart order k must be at least N");
    if (k + N - 1 >= J::capacity) throw DomainError("chart order exceeds series capacity");
    if (axis < 0 || axis > 1) throw DomainError("axis must be 0 (q) or 1 (p)");

    ManifoldChart ch;
    ch.branch = branch;
    ch.axis = axis;
    ch.N = N;
    ch.period = F.period();
    ch.k = k;
    const MPoint z0 = F.base();
    for (int i = 0; i < 4; ++i) ch.base[i] = double(z0[i]);
    ch.coef.assign(k + 1, MPoint{});
    ch.coef[0] = z0;
    ch.coef[1][axis] = 1;
    ch.order_residual.assign(k + 1, 0.0);

    // order 1: F(z0 + e t) = z0 + e t - c_map e t^N + ...
    MSeries line = F.compose(series_of(ch.coef, 1), N);
    for (int j = 2; j < N; ++j)
        for (int i = 0; i < 4; ++i)
            if (abs(line[i][j]) > 1e-30) throw OrderSolveFailure(1, "map has terms below degree N");
    const mp50 cm = -line[axis][N];
    const mp50 expected = mp50(data.c) * mp50(ch.period);
    double r1 = double(abs(cm - expected) / expected);
    for (int i = 0; i < 4; ++i)
        if (i != axis) r1 = std::max(r1, double(abs(line[i][N]) / expected));
    ch.order_residual[1] = r1;
    if (!(r1 < 1e-10)) throw OrderSolveFailure(1, "normal form data disagree with the map");
    ch.c_map = cm;
    ch.c = double(cm / mp50(ch.period));

    // D P_N(e): s -> P_N(e + s e_j) is a polynomial of degree N, differentiated
    // exactly by Lagrange weights on the integer nodes -n..n
    const int n = (N + 1) / 2;
    std::vector<int> nodes;
    for (int s = -n; s <= n; ++s) nodes.push_back(s);
    std::vector<mp50> w(nodes.size(), mp50(0));
    for (std::size_t j = 0; j < nodes.size(); ++j) {
        if (nodes[j] == 0) continue;
        mp50 prod = mp50(1) / nodes[j];
        for (std::size_t i = 0; i < nodes.size(); ++i)
            if (i != j && nodes[i] != 0) prod *= mp50(-nodes[i]) / mp50(nodes[j] - nodes[i]);
        w[j] = prod;
    }
    std::array<std::array<mp50, 4>, 4> A{};
    for (int col = 0; col < 4; ++col) {
        for (std::size_t j = 0; j < nodes.size(); ++j) {
            if (nodes[j] == 0) continue;
            std::vector<MPoint> lin(2, MPoint{});
            lin[0] = z0;
            lin[1][axis] = 1;
            lin[1][col] += nodes[j];
            MSeries P = F.compose(series_of(lin, 1), N);
            for (int i = 0; i < 4; ++i) A[i][col] += w[j] * P[i][N];
        }
    }

    auto residual_at = [&](const MSeries& S, const MSeries& KR, int deg) {
        mp50 scale = 1, r = 0;
        for (int i = 0; i < 4; ++i) {
            scale = std::max({scale, mp50(abs(S[i][deg])), mp50(abs(KR[i][deg]))});
            r = std::max(r, mp50(abs(S[i][deg] - KR[i][deg])));
        }
        return double(r / scale);
    };

    for (int m = 2; m <= k; ++m) {
        const int D = m + N - 1;
        MSeries S = F.compose(series_of(ch.coef, m - 1), D);
        MSeries KR = compose_with_R(ch.coef, m - 1, cm, m > N ? ch.ctilde : mp50(0), N, D);
        double r = 0;
        for (int deg = 2; deg < D; ++deg) r = std::max(r, residual_at(S, KR, deg));
        ch.order_residual[m - 1] = std::max(ch.order_residual[m - 1], r);
        if (!(r < 1e-10)) throw OrderSolveFailure(m - 1, "matching residual " + std::to_string(r));

        std::array<std::array<mp50, 4>, 4> M = A;
        std::array<mp50, 4> rhs;
        for (int i = 0; i < 4; ++i) {
            M[i][i] += mp50(m) * cm;
            rhs[i] = -(S[i][D] - KR[i][D]);
        }
        if (m == N) {
            // the axis column is singular; its value is fixed and ctilde solved instead
            const mp50 beta(resonant_choice);
            for (int i = 0; i < 4; ++i) {
                rhs[i] -= M[i][axis] * beta;
                M[i][axis] = (i == axis) ? mp50(-1) : mp50(0);
            }
        }
        auto x = solve4(M, rhs, m);
        if (m == N) {
            ch.ctilde = x[axis];
            x[axis] = resonant_choice;
        }
        for (int i = 0; i < 4; ++i) ch.coef[m][i] = x[i];
    }
    const int D = k + N - 1;
    MSeries S = F.compose(ch.series(), D);
    MSeries KR = compose_with_R(ch.coef, k, cm, ch.ctilde, N, D);
    double r = 0;
    for (int deg = 2; deg <= D; ++deg) r = std::max(r, residual_at(S, KR, deg));
    ch.order_residual[k] = r;
    if (!(r < 1e-10)) throw OrderSolveFailure(k, "matching residual " + std::to_string(r));
    return ch;
}

DefectReport invariance_defect(const ManifoldChart& chart, const std::vector<double>& ts, const TaylorOracle& F) {
    DefectReport rep;
    std::vector<double> lx, ly;
    for (double t : ts) {
        mp50 tm(t);
        MPoint img = F.apply(chart.eval(tm));
        MPoint kr = chart.eval(chart.R(tm));
        mp50 d = 0;
        for (int i = 0; i < 4; ++i) d = std::max(d, mp50(abs(img[i] - kr[i])));
        rep.samples.push_back({t, double(d)});
        if (d > 0 && t > 0) {
            lx.push_back(std::log(t));
            ly.push_back(std::log(double(d)));
        }
    }
    if (lx.size() >= 2) {
        double mx = 0, my = 0;
        for (std::size_t i = 0; i < lx.size(); ++i) { mx += lx[i]; my += ly[i]; }
        mx /= lx.size();
        my /= ly.size();
        double num = 0, den = 0;
        for (std::size_t i = 0; i < lx.size(); ++i) {
            num += (lx[i] - mx) * (ly[i] - my);
            den += (lx[i] - mx) * (lx[i] - mx);
        }
        rep.slope = den > 0 ? num / den : 0.0;
    }
    return rep;
}

void calibrate(ManifoldChart& chart, const TaylorOracle& F, double handoff_tol, double validity_tol, double t_lo,
               double t_hi, int samples) {
    if (!(t_lo > 0 && t_hi > t_lo && samples >= 2)) throw DomainError("bad calibration sweep");
    std::vector<double> ts(samples);
    for (int i = 0; i < samples; ++i) ts[i] = t_lo * std::pow(t_hi / t_lo, double(i) / (samples - 1));
    auto rep = invariance_defect(chart, ts, F);
    chart.defect_profile = rep.samples;
    chart.t_handoff = 0;
    chart.t_max = 0;
    bool hand = true, valid = true;
    for (const auto& s : rep.samples) {
        bool finite = std::isfinite(s.defect);
        // a defect d displaces the curve by about d / |1 - R'(t)|
        double shift = s.defect / (chart.N * double(chart.c_map) * std::pow(s.t, chart.N - 1));
        hand = hand && finite && shift < handoff_tol;
        valid = valid && finite && s.defect < validity_tol;
        if (hand) chart.t_handoff = s.t;
        if (valid) chart.t_max = s.t;
    }
}

std::unique_ptr<TaylorOracle> chart_oracle(ManifoldBranch b, const Params& p, double theta0, double G0, double s0,
                                           int steps) {
    return std::make_unique<PeriodMapOracle>(p, theta0, G0, s0, b == ManifoldBranch::Stable ? 1 : -1, steps);
}

ManifoldChart compute_chart(ManifoldBranch b, const Params& p, double theta0, double G0, double s0,
                            const ChartConfig& cfg) {
    if (G0 == 0) throw DomainError("base point needs G0 != 0");
    auto F = chart_oracle(b, p, theta0, G0, s0, cfg.steps);
    const int axis = b == ManifoldBranch::Stable ? 1 : 0;
    auto data = detect_normal_form(*F, axis);
    ManifoldChart ch = formal_solve(*F, data, cfg.k, axis, b);
    ch.s0 = s0;
    calibrate(ch, *F, cfg.handoff_tol, cfg.validity_tol);
    return ch;
}

// ---------------------------------------------------------------- text format

void write_chart(std::ostream& os, const ManifoldChart& ch) {
    os << "# rtbp-manifold-chart 1\n";
    os << "# branch " << manifold_branch_name(ch.branch) << "\n";
    os << "# axis " << ch.axis << "\n";
    os << "# base";
    for (double b : ch.base) os << ' ' << dbl_str(b);
    os << "\n# s0 " << dbl_str(ch.s0) << "\n";
    os << "# N " << ch.N << "\n";
    os << "# c " << dbl_str(ch.c) << "\n";
    os << "# period " << dbl_str(ch.period) << "\n";
    os << "# c_map " << mp_str(ch.c_map) << "\n";
    os << "# ctilde " << mp_str(ch.ctilde) << "\n";
    os << "# k " << ch.k << "\n";
    os << "# t_max " << dbl_str(ch.t_max) << "\n";
    os << "# t_handoff " << dbl_str(ch.t_handoff) << "\n";
    os << "# residual";
    for (double r : ch.order_residual) os << ' ' << dbl_str(r);
    os << "\n";
    for (const auto& d : ch.defect_profile) os << "# defect " << dbl_str(d.t) << ' ' << dbl_str(d.defect) << "\n";
    for (int m = 0; m <= ch.k; ++m) {
        os << m;
        for (int i = 0; i < 4; ++i) os << ' ' << mp_str(ch.coef[m][i]);
        os << "\n";
    }
}

ManifoldChart read_chart(std::istream& is) {
    ManifoldChart ch;
    std::string line;
    bool magic = false;
    int rows = 0;
    ch.k = -1;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::istringstream ls(line);
        ls.imbue(std::locale::classic());
        if (line[0] == '#') {
            std::string hash, key;
            ls >> hash >> key;
            std::vector<std::string> v;
            for (std::string w; ls >> w;) v.push_back(w);
            auto need = [&](std::size_t n) {
                if (v.size() != n) throw DomainError("chart header '" + key + "' malformed");
            };
            if (key == "rtbp-manifold-chart") { magic = true; continue; }
            if (key == "branch") { need(1); ch.branch = manifold_branch_from_name(v[0]); }
            else if (key == "axis") { need(1); ch.axis = std::stoi(v[0]); }
            else if (key == "base") { need(4); for (int i = 0; i < 4; ++i) ch.base[i] = parse_double(v[i]); }
            else if (key == "s0") { need(1); ch.s0 = parse_double(v[0]); }
            else if (key == "N") { need(1); ch.N = std::stoi(v[0]); }
            else if (key == "c") { need(1); ch.c = parse_double(v[0]); }
            else if (key == "period") { need(1); ch.period = parse_double(v[0]); }
            else if (key == "c_map") { need(1); ch.c_map = parse_mp(v[0]); }
            else if (key == "ctilde") { need(1); ch.ctilde = parse_mp(v[0]); }
            else if (key == "k") {
                need(1);
                ch.k = std::stoi(v[0]);
                if (ch.k < 1 || ch.k >= J::capacity) throw DomainError("chart order out of range");
                ch.coef.assign(ch.k + 1, MPoint{});
            }
            else if (key == "t_max") { need(1); ch.t_max = parse_double(v[0]); }
            else if (key == "t_handoff") { need(1); ch.t_handoff = parse_double(v[0]); }
            else if (key == "residual") { ch.order_residual.clear(); for (auto& s : v) ch.order_residual.push_back(parse_double(s)); }
            else if (key == "defect") { need(2); ch.defect_profile.push_back({parse_double(v[0]), parse_double(v[1])}); }
            else throw DomainError("unknown chart header '" + key + "'");
            continue;
        }
        if (ch.k < 0) throw DomainError("coefficient row before the order header");
        int m;
        std::string c[4];
        if (!(ls >> m >> c[0] >> c[1] >> c[2] >> c[3]) || m < 0 || m > ch.k)
            throw DomainError("malformed coefficient row");
        for (int i = 0; i < 4; ++i) ch.coef[m][i] = parse_mp(c[i]);
        ++rows;
    }
    if (!magic) throw DomainError("not a manifold chart file");
    if (rows != ch.k + 1) throw DomainError("chart file has missing coefficient rows");
    return ch;
}

// ---------------------------------------------------------------- sector

void SectorDomain::validate() const {
    if (!(a > 0 && rho > 0)) throw DomainError("sector needs a > 0 and rho > 0");
}

SectorReport sector_check(const ParabolicNormalData& data, double ctilde, const SectorDomain& V, double M,
                          int grid) {
    data.validate();
    V.validate();
    if (grid < 2) throw DomainError("sector grid needs at least two points");
    using C = std::complex<double>;
    const int N = data.N;
    auto R = [&](C t) { return t - data.c * std::pow(t, N) + ctilde * std::pow(t, 2 * N - 1); };
    std::vector<C> pts;
    for (int j = 1; j <= grid; ++j) {
        double r = V.rho * j / grid;
        pts.push_back(std::polar(r, V.a));
        pts.push_back(std::polar(r, -V.a));
    }
    for (int j = 0; j < grid; ++j) pts.push_back(std::polar(V.rho, -V.a + 2 * V.a * j / (grid - 1)));

    SectorReport rep;
    rep.worst_margin = std::numeric_limits<double>::infinity();
    rep.b = std::numeric_limits<double>::infinity();
    rep.d = -std::numeric_limits<double>::infinity();
    for (C t : pts) {
        C Rt = R(t);
        double margin = std::min(V.a - std::abs(std::arg(Rt)), V.rho - std::abs(Rt));
        if (margin < rep.worst_margin) {
            rep.worst_margin = margin;
            rep.witness = t;
        }
        double ratio = (std::abs(t) - std::abs(Rt)) / std::pow(std::abs(t), N);
        rep.b = std::min(rep.b, ratio);
        rep.d = std::max(rep.d, ratio);
    }
    const double k1 = (N - 1) * data.c;
    double bound = k1 * V.a * (1 - M * V.a / k1);
    rep.bound_rho = bound > 0 ? std::pow(bound, 1.0 / (N - 1)) : 0.0;
    rep.pass = rep.worst_margin >= 0 && rep.b > 0;
    return rep;
}

// ---------------------------------------------------------------- globalization

GlobalManifold globalize(const ManifoldChart& ch, double t0, const Params& p, const GlobalizeConfig& cfg) {
    p.validate();
    if (!(t0 > 0 && t0 <= ch.t_max)) throw DomainError("handoff parameter outside the validity radius");
    if (ch.t_handoff > 0 && t0 > ch.t_handoff * (1 + 1e-12))
        throw DomainError("handoff parameter beyond the handoff tolerance");
    if (cfg.n_seeds < 1) throw DomainError("need at least one seed");
    const bool unstable = ch.branch == ManifoldBranch::Unstable;
    const double t1 = ch.R(t0);
    const double two_pi = 2 * std::numbers::pi;

    GlobalManifold out;
    out.branch = ch.branch;
    out.t0 = t0;
    IntegratorConfig ic = cfg.integrator;
    ic.max_time = std::max(ic.max_time, cfg.max_time);

    // one period of the full system must carry the seed at R(t0) to t0 (unstable)
    // or t0 to R(t0) (stable)
    {
        Vec4 from = ch.eval(unstable ? t1 : t0), to = ch.eval(unstable ? t0 : t1);
        Vec4 img = integrate(from, ch.s0, ch.s0 + two_pi, Chart::LocalQP, p, ic).final_state;
        double d = 0;
        for (int i = 0; i < 4; ++i) d = std::max(d, std::abs(img[i] - to[i]));
        out.seed_shift_mismatch = d;
    }

    const int dir = unstable ? 1 : -1;
    Section peri{"perihelion", [](double, const Vec4& s) { return s[2]; }, unstable ? 1 : -1};
    for (int j = 0; j < cfg.n_seeds; ++j) {
        ManifoldOrbit orb;
        orb.t_param = t1 + (t0 - t1) * j / cfg.n_seeds;
        LocalState l = local_from_vec(ch.eval(orb.t_param), ch.s0);
        Vec4 m0 = to_vec(from_local(l));
        Trajectory tr;
        if (cfg.horizon > 0) {
            tr = integrate(m0, ch.s0, ch.s0 + dir * cfg.horizon, Chart::McGehee, p, ic);
            for (const auto& [t, v] : tr.samples()) orb.samples.emplace_back(t, mcgehee_from_vec(v, t));
        } else {
            SectionEvent ev =
                integrate_to_section(m0, ch.s0, ch.s0 + dir * cfg.max_time, Chart::McGehee, p, peri, ic, &tr);
            // the last stored step overshoots the section
            for (const auto& [t, v] : tr.samples())
                if (dir * (t - ev.t) < 0) orb.samples.emplace_back(t, mcgehee_from_vec(v, t));
            orb.samples.emplace_back(ev.t, mcgehee_from_vec(ev.state, ev.t));
        }
        out.orbits.push_back(std::move(orb));
    }
    return out;
}

double separatrix_distance(const McGeheeState& m, double theta0, ManifoldBranch b) {
    if (!(m.x > 0) || m.G == 0) throw DomainError("separatrix distance needs x > 0 and G != 0");
    const double aG = std::abs(m.G);
    const double sg = m.G > 0 ? 1.0 : -1.0;
    const double tau = 2 * m.y / (aG * m.x * m.x);
    const double xs = 2 / (aG * std::sqrt(1 + tau * tau));
    const double shift = (b == ManifoldBranch::Unstable ? 1.0 : -1.0) * sg * std::numbers::pi;
    const double as = theta0 + shift + 2 * sg * std::atan(tau);
    return std::max(std::abs(m.x - xs), std::abs(wrap_pi(m.alpha - as)));
}

// ---------------------------------------------------------------- straightening

void check_chart_pair(const ManifoldChart& u, const ManifoldChart& s, double min_radius) {
    if (u.branch != ManifoldBranch::Unstable || s.branch != ManifoldBranch::Stable)
        throw ChartMismatch("need one unstable and one stable chart");
    for (int i = 0; i < 4; ++i)
        if (u.base[i] != s.base[i]) throw ChartMismatch("charts have different base points");
    if (u.s0 != s.s0) throw ChartMismatch("charts live on different sections");
    if (std::min(u.t_max, s.t_max) < min_radius)
        throw ChartMismatch("validity ranges do not reach the common radius " + std::to_string(min_radius));
}

namespace {

struct DoubleChart {
    int k = 0;
    std::vector<Vec4> c;
    explicit DoubleChart(const ManifoldChart& ch) : k(ch.k), c(ch.k + 1) {
        for (int m = 0; m <= k; ++m)
            for (int i = 0; i < 4; ++i) c[m][i] = double(ch.coef[m][i]);
    }
    void eval(double t, Vec4& v, Vec4& dv) const {
        for (int i = 0; i < 4; ++i) {
            double a = c[k][i], d = 0;
            for (int m = k - 1; m >= 0; --m) {
                d = d * t + a;
                a = a * t + c[m][i];
            }
            v[i] = a;
            dv[i] = d;
        }
    }
};

}  // namespace

StraightenedChart::StraightenedChart(const Params& p, double theta0, double G0, double s0, const ChartConfig& cfg,
                                     double stencil)
    : p_(p), theta0_(theta0), G0_(G0), s0_(s0), h_(stencil) {
    if (!(stencil > 0)) throw DomainError("stencil step must be positive");
    std::vector<std::array<double, 3>> pts = {{theta0, G0, s0},          {theta0 + h_, G0, s0},
                                              {theta0 - h_, G0, s0},     {theta0, G0 + h_, s0},
                                              {theta0, G0 - h_, s0}};
    if (p.e0 != 0) {
        pts.push_back({theta0, G0, s0 + h_});
        pts.push_back({theta0, G0, s0 - h_});
    }
    for (const auto& q : pts) {
        charts_u_.push_back(compute_chart(ManifoldBranch::Unstable, p, q[0], q[1], q[2], cfg));
        charts_s_.push_back(compute_chart(ManifoldBranch::Stable, p, q[0], q[1], q[2], cfg));
    }
    radius_ = std::numeric_limits<double>::infinity();
    for (const auto& c : charts_u_) radius_ = std::min(radius_, c.t_max);
    for (const auto& c : charts_s_) radius_ = std::min(radius_, c.t_max);
}

double StraightenedChart::graph(const std::vector<ManifoldChart>& charts, int axis, double u, double theta,
                                double G, double s, std::array<double, 4>* grad) const {
    // K(t; a, b, c) ~ K0(t) + a D_theta(t) + b D_G(t) + c D_s(t), with (a, b, c)
    // the base point offsets; solve K_axis = u, K_theta = theta, K_G = G.
    std::vector<DoubleChart> dc;
    for (const auto& ch : charts) dc.emplace_back(ch);
    const int other = 1 - axis;
    const double c = s - s0_;
    auto model = [&](double t, double a, double b, Vec4& K, Vec4& Kt, Vec4& Da, Vec4& Db, Vec4& Dc) {
        std::vector<Vec4> v(dc.size()), dv(dc.size());
        for (std::size_t i = 0; i < dc.size(); ++i) dc[i].eval(t, v[i], dv[i]);
        for (int i = 0; i < 4; ++i) {
            Da[i] = (v[1][i] - v[2][i]) / (2 * h_);
            Db[i] = (v[3][i] - v[4][i]) / (2 * h_);
            double dDa = (dv[1][i] - dv[2][i]) / (2 * h_), dDb = (dv[3][i] - dv[4][i]) / (2 * h_), dDc;
            if (dc.size() > 5) {
                Dc[i] = (v[5][i] - v[6][i]) / (2 * h_);
                dDc = (dv[5][i] - dv[6][i]) / (2 * h_);
            } else {
                // rotation symmetry of the circular problem
                Dc[i] = (i == 2 ? 1.0 : 0.0) - Da[i];
                dDc = -dDa;
            }
            K[i] = v[0][i] + a * Da[i] + b * Db[i] + c * Dc[i];
            Kt[i] = dv[0][i] + a * dDa + b * dDb + c * dDc;
        }
    };
    double t = u, a = theta - theta0_, b = G - G0_;
    Vec4 K, Kt, Da, Db, Dc;
    Eigen::Matrix3d Jm;
    for (int it = 0; it < 50; ++it) {
        model(t, a, b, K, Kt, Da, Db, Dc);
        Eigen::Vector3d r(K[axis] - u, K[2] - theta, K[3] - G);
        Jm << Kt[axis], Da[axis], Db[axis], Kt[2], Da[2], Db[2], Kt[3], Da[3], Db[3];
        Eigen::Vector3d dx = Jm.partialPivLu().solve(r);
        t -= dx(0);
        a -= dx(1);
        b -= dx(2);
        if (dx.cwiseAbs().maxCoeff() <= 1e-15 * (1 + std::abs(t) + std::abs(a) + std::abs(b))) break;
    }
    model(t, a, b, K, Kt, Da, Db, Dc);
    Jm << Kt[axis], Da[axis], Db[axis], Kt[2], Da[2], Db[2], Kt[3], Da[3], Db[3];
    if (grad) {
        Eigen::RowVector3d dH(Kt[other], Da[other], Db[other]);
        Eigen::Matrix3d Ji = Jm.inverse();
        Eigen::RowVector3d g = dH * Ji;  // d/d(u, theta, G)
        Eigen::Vector3d dPhi_dc(Dc[axis], Dc[2], Dc[3]);
        (*grad)[0] = g(0);
        (*grad)[1] = g(1);
        (*grad)[2] = g(2);
        (*grad)[3] = Dc[other] - g.dot(dPhi_dc);
    }
    return K[other];
}

double StraightenedChart::h_unstable(double q, double theta, double G, double s, std::array<double, 4>* grad) const {
    return graph(charts_u_, 0, q, theta, G, s, grad);
}

double StraightenedChart::h_stable(double p, double theta, double G, double s, std::array<double, 4>* grad) const {
    return graph(charts_s_, 1, p, theta, G, s, grad);
}

Vec4 StraightenedChart::forward(const Vec4& z, double s) const {
    return {z[0] - h_stable(z[1], z[2], z[3], s), z[1] - h_unstable(z[0], z[2], z[3], s), z[2], z[3]};
}

Vec4 StraightenedChart::backward(const Vec4& w, double s) const {
    double q = w[0], p = w[1];
    for (int it = 0; it < 100; ++it) {
        double qn = w[0] + h_stable(p, w[2], w[3], s);
        double pn = w[1] + h_unstable(q, w[2], w[3], s);
        double d = std::max(std::abs(qn - q), std::abs(pn - p));
        q = qn;
        p = pn;
        if (d <= 1e-17 * (std::abs(q) + std::abs(p)) || d == 0) break;
    }
    return {q, p, w[2], w[3]};
}

Vec4 StraightenedChart::field(const Vec4& w, double s) const {
    Vec4 z = backward(w, s);
    Vec4 f = vector_field(Chart::LocalQP, s, z, p_);
    std::array<double, 4> gs, gu;
    h_stable(z[1], z[2], z[3], s, &gs);
    h_unstable(z[0], z[2], z[3], s, &gu);
    Vec4 out;
    out[0] = f[0] - (gs[0] * f[1] + gs[1] * f[2] + gs[2] * f[3] + gs[3]);
    out[1] = f[1] - (gu[0] * f[0] + gu[1] * f[2] + gu[2] * f[3] + gu[3]);
    out[2] = f[2];
    out[3] = f[3];
    return out;
}

StraightenedChart straighten_local(const Params& p, double theta0, double G0, double s0, const ChartConfig& cfg,
                                   double min_radius) {
    StraightenedChart sc(p, theta0, G0, s0, cfg);
    check_chart_pair(sc.unstable(), sc.stable(), min_radius);
    return sc;
}

}  // namespace rtbp
