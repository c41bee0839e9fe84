#pragma once

namespace qdscope {

// Reduced Planck constant in meV*ps; the one bridge between meV detunings
// and 1/ps angular frequencies.
inline constexpr double kHbarMeVps = 0.6582;

// Elementary charge in coulomb.
inline constexpr double kElementaryCharge = 1.602e-19;

// FWHM of a Gaussian = kGaussFwhm * sigma.
inline constexpr double kGaussFwhm = 2.3548200450309493; // 2*sqrt(2*ln 2)

} // namespace qdscope
