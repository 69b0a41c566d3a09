#include "replab/design.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

namespace replab {

namespace {

void validate_counts(const DesignParams& p) {
    if (p.N < 1 || p.R < 1 || p.B < 1) {
        throw std::invalid_argument("design: N, R, B must be positive");
    }
    if (p.N % p.R != 0) {
        throw std::invalid_argument("design: R must divide N");
    }
    if (p.rho < 0.0) {
        throw std::invalid_argument("design: rho must be non-negative");
    }
}

}  // namespace

double variance_param(const DesignParams& p) {
    validate_counts(p);
    const int64_t window = p.N / p.R;
    const double msq = p.noise.mean_sigma_sq_exact(window);
    return msq * (1.0 / static_cast<double>(p.B) + 1.0 / static_cast<double>(p.N) +
                  p.rho / static_cast<double>(p.R));
}

double convergence_bound(const DesignParams& p) {
    validate_counts(p);
    if (!(p.eta > 0.0)) {
        throw std::invalid_argument("design: eta must be positive");
    }
    if (p.T_steps < 1) {
        throw std::invalid_argument("design: T_steps must be positive");
    }
    if (!(p.L > 0.0) || p.F0 < 0.0 || p.kappa < 0.0) {
        throw std::invalid_argument("design: L must be positive, F0 and kappa non-negative");
    }
    const EtaValidity validity = eta_validity(p);
    if (!validity.valid) {
        throw std::invalid_argument(
            "design: the guarantee needs eta < " + std::to_string(validity.smoothness_cap) +
            " (smoothness) and eta <= " + std::to_string(validity.bias_cap) +
            " (bias drift); got eta = " + std::to_string(p.eta));
    }
    const double v = variance_param(p);
    const double n_over_r = static_cast<double>(p.N) / static_cast<double>(p.R);
    const double drift_curvature = 4.0 * n_over_r * n_over_r * p.kappa * p.kappa * p.eta;
    return 12.0 * p.F0 / (p.eta * static_cast<double>(p.T_steps)) +
           8.0 * p.eta * (drift_curvature + p.L) * v;
}

EtaValidity eta_validity(const DesignParams& p) {
    validate_counts(p);
    if (!(p.L > 0.0) || p.kappa < 0.0) {
        throw std::invalid_argument("design: L must be positive, kappa non-negative");
    }
    EtaValidity out;
    out.smoothness_cap = 0.5 / p.L;
    out.bias_cap = p.kappa > 0.0
                       ? static_cast<double>(p.R) /
                             (2.0 * std::sqrt(2.0) * p.kappa * static_cast<double>(p.N))
                       : std::numeric_limits<double>::infinity();
    out.valid = p.eta > 0.0 && p.eta < out.smoothness_cap && p.eta <= out.bias_cap;
    return out;
}

namespace {

void validate_xy_inputs(double mu, double rho) {
    if (!(mu > 0.0)) {
        throw std::invalid_argument("design: mu must be positive");
    }
    if (rho < 0.0) {
        throw std::invalid_argument("design: rho must be non-negative");
    }
}

}  // namespace

double objective_J(double x, double y, double mu, double rho, const NoiseProfile& noise) {
    validate_xy_inputs(mu, rho);
    if (!(x > 0.0) || !(y > 0.0)) {
        throw std::invalid_argument("design: x and y must be positive");
    }
    return noise.mean_sigma_sq_continuous(x) * (1.0 + y / mu) * (1.0 / y + 1.0 / x + rho);
}

double y_from_x(double x, double mu, double rho) {
    validate_xy_inputs(mu, rho);
    if (!(x > 0.0)) {
        throw std::invalid_argument("design: x must be positive");
    }
    return std::sqrt(mu / (rho + 1.0 / x));
}

double objective_I(double x, double mu, double rho, const NoiseProfile& noise) {
    validate_xy_inputs(mu, rho);
    if (!(x > 0.0)) {
        throw std::invalid_argument("design: x must be positive");
    }
    const double root = 1.0 / std::sqrt(mu) + std::sqrt(rho + 1.0 / x);
    return noise.mean_sigma_sq_continuous(x) * root * root;
}

double objective_K(double x, double alpha, double mu, double rho) {
    validate_xy_inputs(mu, rho);
    if (!(x > 0.0)) {
        throw std::invalid_argument("design: x must be positive");
    }
    if (!(alpha > 0.0) || !(alpha < 0.5)) {
        throw std::invalid_argument("design: alpha must be in (0, 1/2)");
    }
    return std::pow(x, alpha) * (1.0 / std::sqrt(mu) + std::sqrt(rho + 1.0 / x));
}

DesignSolution optimal_design_numeric(double mu, double rho, const NoiseProfile& noise,
                                      double grid_lo, double grid_hi, int grid_points) {
    validate_xy_inputs(mu, rho);
    if (!(grid_lo > 0.0) || !(grid_hi > grid_lo) || grid_points < 3) {
        throw std::invalid_argument("design: bad grid");
    }

    const double log_lo = std::log(grid_lo);
    const double log_hi = std::log(grid_hi);
    const auto eval = [&](double log_x) { return objective_I(std::exp(log_x), mu, rho, noise); };

    int best = 0;
    double best_val = std::numeric_limits<double>::infinity();
    std::vector<double> log_xs(static_cast<std::size_t>(grid_points));
    for (int i = 0; i < grid_points; ++i) {
        const double t = log_lo + (log_hi - log_lo) * static_cast<double>(i) /
                                      static_cast<double>(grid_points - 1);
        log_xs[static_cast<std::size_t>(i)] = t;
        const double v = eval(t);
        if (v < best_val) {
            best_val = v;
            best = i;
        }
    }

    DesignSolution out;
    out.at_grid_boundary = (best == 0 || best == grid_points - 1);

    // Golden-section refinement in log space between the argmin's neighbours.
    double lo = log_xs[static_cast<std::size_t>(best == 0 ? 0 : best - 1)];
    double hi = log_xs[static_cast<std::size_t>(best == grid_points - 1 ? grid_points - 1
                                                                        : best + 1)];
    constexpr double kInvPhi = 0.6180339887498949;
    double a = hi - kInvPhi * (hi - lo);
    double b = lo + kInvPhi * (hi - lo);
    double fa = eval(a);
    double fb = eval(b);
    for (int iter = 0; iter < 200 && hi - lo > 1e-14; ++iter) {
        if (fa < fb) {
            hi = b;
            b = a;
            fb = fa;
            a = hi - kInvPhi * (hi - lo);
            fa = eval(a);
        } else {
            lo = a;
            a = b;
            fa = fb;
            b = lo + kInvPhi * (hi - lo);
            fb = eval(b);
        }
    }
    const double log_x_star = 0.5 * (lo + hi);
    out.x_star = std::exp(log_x_star);
    out.y_star = y_from_x(out.x_star, mu, rho);
    out.objective = objective_I(out.x_star, mu, rho, noise);
    return out;
}

namespace {

void validate_power_law_inputs(double alpha, double mu, double rho) {
    if (!(alpha > 0.0) || !(alpha < 0.5)) {
        throw std::invalid_argument("design: closed form requires 0 < alpha < 1/2");
    }
    validate_xy_inputs(mu, rho);
}

}  // namespace

double optimal_x_closed_form(double alpha, double mu, double rho) {
    validate_power_law_inputs(alpha, mu, rho);
    const double one_minus = 1.0 - 2.0 * alpha;
    if (rho == 0.0) {
        // Limit of the quadratic: x* = mu (1-2 alpha)^2 / (4 alpha^2).
        return mu * one_minus * one_minus / (4.0 * alpha * alpha);
    }
    // Quadratic A x^2 + B x + C = 0 with
    //   A = alpha rho (1/mu - rho), B = alpha/mu + rho (1-2 alpha),
    //   C = -(1-2 alpha)^2 / (4 alpha).
    const double qa = alpha * rho * (1.0 / mu - rho);
    const double qb = alpha / mu + rho * one_minus;
    const double qc = -one_minus * one_minus / (4.0 * alpha);
    if (qa == 0.0) {
        // rho = 1/mu: the equation is linear.
        return -qc / qb;
    }
    const double disc = qb * qb - 4.0 * qa * qc;
    // qb > 0 and qc < 0, so x* = qc / q is the positive root, computed
    // without cancellation (and continuous through qa -> 0).
    const double q = -0.5 * (qb + std::sqrt(disc));
    return qc / q;
}

DesignSolution optimal_design_power_law(double alpha, double mu, double rho) {
    validate_power_law_inputs(alpha, mu, rho);
    const double one_minus = 1.0 - 2.0 * alpha;
    DesignSolution out;
    if (rho == 0.0) {
        out.y_star = mu * one_minus / (2.0 * alpha);
        out.x_star = out.y_star * out.y_star / mu;
    } else {
        // Positive root of rho y^2 + 2 alpha y + mu (2 alpha - 1) = 0.
        out.y_star = (-alpha + std::sqrt(alpha * alpha + mu * rho * one_minus)) / rho;
        out.x_star = out.y_star * out.y_star / (mu - rho * out.y_star * out.y_star);
    }
    // The objective value is reported for the unit-scale profile; the
    // optimum itself does not depend on tau.
    out.objective = objective_I(out.x_star, mu, rho, NoiseProfile::power_law(alpha, 1.0));
    return out;
}

EtaChoice optimal_eta(const DesignParams& p, double mu, double compute_budget) {
    validate_counts(p);
    if (!(mu >= 0.0)) {
        throw std::invalid_argument("design: mu must be non-negative");
    }
    if (!(compute_budget > 0.0)) {
        throw std::invalid_argument("design: compute budget must be positive");
    }
    if (!(p.F0 > 0.0) || !(p.L > 0.0)) {
        throw std::invalid_argument("design: optimal_eta requires F0 > 0 and L > 0");
    }

    const double a = 12.0 * p.F0 *
                     (static_cast<double>(p.B) + mu * static_cast<double>(p.R)) / compute_budget;
    const double b = 8.0 * p.L * variance_param(p);

    const EtaValidity validity = eta_validity(p);
    // The smoothness condition is strict, so back off from the cap slightly.
    const double cap = std::min(validity.smoothness_cap * (1.0 - 1e-9), validity.bias_cap);

    EtaChoice out;
    if (b == 0.0) {
        out.eta_star = cap;
        out.capped = true;
        out.predicted_bound = a / out.eta_star;
        return out;
    }
    out.eta_star = std::sqrt(a / b);
    if (out.eta_star > cap) {
        out.eta_star = cap;
        out.capped = true;
    }
    out.predicted_bound = a / out.eta_star + b * out.eta_star;
    return out;
}

}  // namespace replab
