#pragma once

// Regression constants measured once and frozen. Each is checked by a unit test and by
// the acceptance binary.

namespace frozen {

// Largest finite-difference slope of the reshaped two-disc filter on the x-axis,
// over D in {0.9, 0.99, 0.999} and k_phi in {0, 1}. Measured 0.986255949.
inline constexpr double example_two_slope = 0.986255949;
inline constexpr double example_two_slope_bound = 1.0;

// Grid estimate (200 per axis) of the Lipschitz constant of the obstacle-course safety
// filter over the safe part of [-3.5, 3.5] x [-0.5, 3.0]. The maximum sits at the obstacle
// end caps; refining the grid raises it towards about 8.1.
inline constexpr double vtol_k1_estimate = 7.35821953;

}  // namespace frozen
