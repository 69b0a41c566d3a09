#pragma once

#include <cstdint>
#include <vector>

namespace replab {

// Staleness-indexed gradient-noise scale sigma(s): the noise standard
// deviation of a stochastic gradient computed from a sample that is s
// optimizer steps old.
//
// Kinds:
//  - Constant:  sigma(s) = sigma0.
//  - PowerLaw:  sigma(s) = (s / tau)^alpha, so sigma(0) = 0 and sigma(tau)=1.
//  - Tabulated: sigma(s) = values[s], clamped to the last entry beyond the
//    table (sigma must be non-decreasing in s).
struct NoiseProfile {
    enum class Kind { constant, power_law, tabulated };

    static NoiseProfile constant(double sigma0);
    static NoiseProfile power_law(double alpha, double tau);
    static NoiseProfile tabulated(std::vector<double> values);

    double sigma(int64_t s) const;

    // Exact staleness-averaged second moment over a window of H ages:
    // (1/H) * sum_{s=0}^{H-1} sigma(s)^2.  H >= 1.
    double mean_sigma_sq_exact(int64_t window) const;

    // Continuous relaxation of the same average at a real-valued window x>0,
    // used inside design objectives and optimizers:
    //  - PowerLaw: closed form (1/(2 alpha + 1)) * (x/tau)^(2 alpha).
    //  - Constant: sigma0^2.
    //  - Tabulated: linear interpolation of the exact averages at the two
    //    neighbouring integer windows (clamped at both ends).
    double mean_sigma_sq_continuous(double x) const;

    Kind kind = Kind::constant;
    double sigma0 = 1.0;            // constant
    double alpha = 0.0;             // power_law exponent, alpha >= 0
    double tau = 1.0;               // power_law scale, tau > 0
    std::vector<double> values;     // tabulated
    std::vector<double> sq_prefix;  // tabulated: sq_prefix[i] = sum of values[0..i)^2
};

}  // namespace replab
