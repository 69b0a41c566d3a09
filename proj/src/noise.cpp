#include "replab/noise.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace replab {

NoiseProfile NoiseProfile::constant(double sigma0) {
    if (sigma0 < 0.0) {
        throw std::invalid_argument("NoiseProfile: sigma0 must be non-negative");
    }
    NoiseProfile p;
    p.kind = Kind::constant;
    p.sigma0 = sigma0;
    return p;
}

NoiseProfile NoiseProfile::power_law(double alpha, double tau) {
    if (alpha < 0.0) {
        throw std::invalid_argument("NoiseProfile: alpha must be non-negative");
    }
    if (!(tau > 0.0)) {
        throw std::invalid_argument("NoiseProfile: tau must be positive");
    }
    NoiseProfile p;
    p.kind = Kind::power_law;
    p.alpha = alpha;
    p.tau = tau;
    return p;
}

NoiseProfile NoiseProfile::tabulated(std::vector<double> values) {
    if (values.empty()) {
        throw std::invalid_argument("NoiseProfile: tabulated values must not be empty");
    }
    double prev = -1.0;
    for (double v : values) {
        if (v < 0.0) {
            throw std::invalid_argument("NoiseProfile: sigma values must be non-negative");
        }
        if (v < prev) {
            throw std::invalid_argument("NoiseProfile: sigma must be non-decreasing in staleness");
        }
        prev = v;
    }
    NoiseProfile p;
    p.kind = Kind::tabulated;
    p.values = std::move(values);
    p.sq_prefix.resize(p.values.size() + 1, 0.0);
    for (std::size_t i = 0; i < p.values.size(); ++i) {
        p.sq_prefix[i + 1] = p.sq_prefix[i] + p.values[i] * p.values[i];
    }
    return p;
}

double NoiseProfile::sigma(int64_t s) const {
    if (s < 0) {
        throw std::invalid_argument("NoiseProfile::sigma: staleness must be non-negative");
    }
    switch (kind) {
        case Kind::constant:
            return sigma0;
        case Kind::power_law:
            if (s == 0) {
                return 0.0;
            }
            return std::pow(static_cast<double>(s) / tau, alpha);
        case Kind::tabulated: {
            const std::size_t i = static_cast<std::size_t>(s);
            return i < values.size() ? values[i] : values.back();
        }
    }
    throw std::logic_error("NoiseProfile::sigma: bad kind");
}

double NoiseProfile::mean_sigma_sq_exact(int64_t window) const {
    if (window < 1) {
        throw std::invalid_argument("NoiseProfile::mean_sigma_sq_exact: window must be >= 1");
    }
    if (kind == Kind::tabulated) {
        // Prefix sums keep this O(1) even for the huge windows the numeric
        // optimizer probes; beyond the table sigma holds its last value.
        const auto len = static_cast<int64_t>(values.size());
        const int64_t in_table = std::min(window, len);
        double sum = sq_prefix[static_cast<std::size_t>(in_table)];
        if (window > len) {
            sum += static_cast<double>(window - len) * values.back() * values.back();
        }
        return sum / static_cast<double>(window);
    }
    double sum = 0.0;
    for (int64_t s = 0; s < window; ++s) {
        const double v = sigma(s);
        sum += v * v;
    }
    return sum / static_cast<double>(window);
}

double NoiseProfile::mean_sigma_sq_continuous(double x) const {
    if (!(x > 0.0)) {
        throw std::invalid_argument("NoiseProfile::mean_sigma_sq_continuous: x must be positive");
    }
    switch (kind) {
        case Kind::constant:
            return sigma0 * sigma0;
        case Kind::power_law:
            return std::pow(x / tau, 2.0 * alpha) / (2.0 * alpha + 1.0);
        case Kind::tabulated: {
            if (x <= 1.0) {
                return mean_sigma_sq_exact(1);
            }
            const double lo = std::floor(x);
            const double hi = lo + 1.0;
            const double at_lo = mean_sigma_sq_exact(static_cast<int64_t>(lo));
            if (x == lo) {
                return at_lo;
            }
            const double at_hi = mean_sigma_sq_exact(static_cast<int64_t>(hi));
            return at_lo + (x - lo) / (hi - lo) * (at_hi - at_lo);
        }
    }
    throw std::logic_error("NoiseProfile::mean_sigma_sq_continuous: bad kind");
}

}  // namespace replab
