#pragma once
#include <cmath>
#include <string>

#include "rtbp/errors.hpp"

namespace rtbp {

/// Problem parameters: mass ratio and eccentricity of the primaries.
struct Params {
    double mu = 0.5;
    double e0 = 0.0;
    /// minimum admissible distance to either primary
    double collision_floor = 1e-6;

    Params() = default;
    Params(double mu_, double e0_, double floor = 1e-6) : mu(mu_), e0(e0_), collision_floor(floor) {
        validate();
    }
    void validate() const {
        if (!(mu >= 0.0 && mu <= 0.5))
            throw DomainError("mass ratio must lie in [0, 1/2], got " + std::to_string(mu));
        if (!(e0 >= 0.0 && e0 < 1.0))
            throw DomainError("eccentricity must lie in [0, 1), got " + std::to_string(e0));
        if (!(collision_floor > 0.0)) throw DomainError("collision floor must be positive");
    }
};

}  // namespace rtbp
