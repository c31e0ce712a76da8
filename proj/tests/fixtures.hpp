#pragma once
// Values frozen from independent high-precision computations (mpmath, 40 digits)
// or measured once on a grid and stored here.

namespace fixtures {

// v(pi/2) for e0 = 0.2: Kepler root and Taylor ODE solution agree to 40 digits
inline constexpr double kTrueAnomalyHalfPiE02 = 1.960692062674920719520787435874066172226;

// leading x^6 coefficient of dU at e0 = 0, alpha - s = 0, mu = 0.3 (Richardson on
// the exact two-centre potential)
inline constexpr double kDeltaUx6Mu03 = 0.02625;

// sup |dU| / (mu x^6) over x <= 0.5, mu <= 0.5, e0 <= 0.1 (measured 0.1641)
inline constexpr double kDeltaUBoundC = 0.17;

// averaged harmonic I_0 (elliptic-integral form of the angular average,
// tests/oracles/melnikov_oracle.py)
inline constexpr double kI0G5Mu05 = 0.0031433613473242145548;
inline constexpr double kI0G3Mu03 = 0.012296776122281820968;
inline constexpr double kI0G16Mu05 = 0.000095874313554281575087;
inline constexpr double kdI0dGG8Mu05 = -0.00028767901221601587556;

// scaled harmonics m_k = I_k e^{k G^3/3} (hypergeometric form, different contour)
inline constexpr double kM1G25Mu03 = -0.025697249200024613432;
inline constexpr double kM2G25Mu03 = 2.7012632617423098622;
inline constexpr double kM1G3Mu03 = -0.020828017439883482476;
inline constexpr double kM2G5Mu05 = 9.6021087196608479865;
inline constexpr double kM2G12Mu05 = 36.576820012558196831;

// transversal splitting slope (G/2)(1 - 4/G^3)|L''(0)| from the m_k above
inline constexpr double kSplitG3Mu03 = 6.0039719457773496194e-6;
inline constexpr double kSplitG35Mu03 = 3.534625684664953345e-8;

}  // namespace fixtures
