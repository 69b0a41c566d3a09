#pragma once

#include <cstdint>

#include "replab/noise.hpp"

namespace replab {

// Design point for buffered stochastic-gradient training:
//   N buffer capacity, R fresh records inserted per step, B batch size,
//   T_steps optimizer steps, eta step size; kappa bounds the gradient bias
//   per unit of parameter drift, rho caps the pairwise noise correlation at
//   rho*|dt|/N, L is the objective's smoothness constant, F0 the initial
//   suboptimality.  R must divide N; the staleness window is H = N/R.
struct DesignParams {
    double eta = 0.01;
    int64_t N = 16;
    int64_t R = 4;
    int64_t B = 8;
    int64_t T_steps = 1000;
    double kappa = 0.0;
    double rho = 0.0;
    double L = 1.0;
    double F0 = 1.0;
    NoiseProfile noise;
};

// Gradient-noise variance parameter of the buffered-SGD guarantee:
//   V = mean_sigma_sq(N/R) * (1/B + 1/N + rho/R), with the exact
// staleness-averaged second moment.
double variance_param(const DesignParams& p);

// Upper bound on (1/T) sum_t ||grad F(theta_t)||^2 after T_steps:
//   12 F0 / (eta T) + 8 eta (4 N^2 kappa^2 eta / R^2 + L) * V.
double convergence_bound(const DesignParams& p);

// Step-size conditions under which the bound holds:
//   eta < 1/(2L)   and   eta <= R / (2 sqrt(2) kappa N)  (vacuous at kappa=0).
struct EtaValidity {
    bool valid = false;
    double smoothness_cap = 0.0;  // 1/(2L), exclusive
    double bias_cap = 0.0;        // R/(2 sqrt(2) kappa N), inclusive; +inf at kappa=0
};
EtaValidity eta_validity(const DesignParams& p);

// Scale-invariant design objectives in x = N/R (staleness window) and
// y = B/R (replay ratio):
//   J(x, y) = mean_sigma_sq(x) * (1 + y/mu) * (1/y + 1/x + rho)
//   I(x)    = J(x, y_from_x(x)) = mean_sigma_sq(x) * (1/sqrt(mu) + sqrt(rho + 1/x))^2
//   y_from_x(x) = sqrt(mu / (rho + 1/x))   (the optimal replay ratio at x)
// mean_sigma_sq uses the continuous relaxation of the noise profile.
double objective_J(double x, double y, double mu, double rho, const NoiseProfile& noise);
double objective_I(double x, double mu, double rho, const NoiseProfile& noise);
double y_from_x(double x, double mu, double rho);

// Scale-free optimality curve for the power-law profile:
//   K(x) = x^alpha * (1/sqrt(mu) + sqrt(rho + 1/x)).
// I(x) = tau^(-2 alpha)/(2 alpha + 1) * K(x)^2 for that profile, so K has the
// same argmin as I and is what design reports sample for plotting.
double objective_K(double x, double alpha, double mu, double rho);

struct DesignSolution {
    double x_star = 0.0;
    double y_star = 0.0;
    double objective = 0.0;       // I(x_star)
    bool at_grid_boundary = false;  // numeric solver only: argmin hit the grid edge
};

// Minimizes I(x) on a log grid (default [1e-3, 1e6], 2000 points) followed by
// golden-section refinement between the argmin's neighbours. Sets
// at_grid_boundary when the grid argmin is the first or last point.
DesignSolution optimal_design_numeric(double mu, double rho, const NoiseProfile& noise,
                                      double grid_lo = 1e-3, double grid_hi = 1e6,
                                      int grid_points = 2000);

// Closed-form optimum for the power-law profile sigma(s) = (s/tau)^alpha,
// valid for 0 < alpha < 1/2, mu > 0, rho >= 0:
//   y* solves rho y^2 + 2 alpha y + mu (2 alpha - 1) = 0 (positive root);
//   x* = y*^2 / (mu - rho y*^2).
// Branches: rho = 0 gives y* = mu(1-2 alpha)/(2 alpha), x* = y*^2/mu;
// rho = 1/mu makes the x* quadratic linear and is solved directly.
// The optimum does not depend on tau.
DesignSolution optimal_design_power_law(double alpha, double mu, double rho);

// The staleness-window closed form, exposed for cross-checking: solves the
// quadratic A x^2 + B x + C = 0 for x* directly (same branches).
double optimal_x_closed_form(double alpha, double mu, double rho);

// Step size minimizing the budgeted bound a/eta + b*eta with
//   a = 12 F0 (B + mu R) / compute_budget,
//   b = 8 L * variance_param(p) / eta... (the eta-linear coefficient),
// i.e. eta* = sqrt(a/b), clamped into the validity region. b = 0 (noise-free)
// returns the validity cap and sets `capped`.
struct EtaChoice {
    double eta_star = 0.0;
    double predicted_bound = 0.0;  // a/eta* + b*eta*
    bool capped = false;
};
EtaChoice optimal_eta(const DesignParams& p, double mu, double compute_budget);

}  // namespace replab
