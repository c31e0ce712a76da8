#pragma once
#include <vector>

#include "rtbp/coords.hpp"
#include "rtbp/params.hpp"

namespace rtbp {

/// Point of the mu = 0 parabolic homoclinic family with angular momentum G0.
struct SeparatrixPoint {
    double tau = 0;
    double t = 0;
    McGeheeState state;
};

/// t(tau) = (|G0|^3/2)(tau + tau^3/3)
double separatrix_time(double tau, double G0);

/// x = 2/(|G0| sqrt(1+tau^2)), y = 2 tau/(|G0|(1+tau^2)),
/// alpha = alpha0 + 2 sgn(G0) arctan tau, s = s0 + t(tau)
SeparatrixPoint separatrix_eval(double tau, double G0, double alpha0, double s0);

/// Same point parametrised by the time t since perihelion.
SeparatrixPoint separatrix_at_time(double t, double G0, double alpha0, double s0);

/// Inverse of the cubic t(tau): closed-form real root plus one Newton polish.
double tau_from_time(double t, double G0, double tol = 1e-14);

/// Time derivative of the closed form (x', alpha', y', G', s').
McGeheeState separatrix_velocity(double tau, double G0);

/// max over the grid of |d/dt(closed form) - McGehee field(closed form)|; mu must be 0.
double verify_separatrix(double G0, const std::vector<double>& tau_grid, const Params& p);

}  // namespace rtbp
