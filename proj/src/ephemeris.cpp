#include "rtbp/ephemeris.hpp"

#include <array>

#include "rtbp/dop853.hpp"

namespace rtbp {

double Ephemeris::true_anomaly_rate(double t) const {
    if (e_ == 0.0) return 1.0;
    double v = true_anomaly(t);
    double a = 1.0 + e_ * std::cos(v);
    return a * a / std::pow(1.0 - e_ * e_, 1.5);
}

double true_anomaly(double t, double e0) { return Ephemeris(e0).true_anomaly(t); }

double primary_separation(double t, double e0) { return Ephemeris(e0).separation(t); }

double true_anomaly_ode(double t, double e0, double tol) {
    if (!(tol > 0)) throw DomainError("tolerance must be positive");
    [[maybe_unused]] Ephemeris check(e0);
    const double k = std::pow(1.0 - e0 * e0, -1.5);
    auto f = [&](double, const std::array<double, 1>& v) {
        double a = 1.0 + e0 * std::cos(v[0]);
        return std::array<double, 1>{a * a * k};
    };
    Dop853Options opt;
    opt.atol = tol * 1e-3;
    opt.rtol = std::max(tol * 1e-3, 1e-15);
    auto y = dop853_adaptive(f, 0.0, std::array<double, 1>{0.0}, t, opt,
                             [](const auto&) { return true; }, false);
    return y[0];
}

}  // namespace rtbp
