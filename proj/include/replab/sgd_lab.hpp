#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "replab/design.hpp"
#include "replab/noise.hpp"
#include "replab/rng.hpp"

namespace replab {

// L-smooth synthetic objectives with exact value/gradient oracles.
//   quadratic:   F(theta) = L/2 * ||theta||^2
//   double_well: F(theta) = sum_i  u^2/8 + 1 + cos(u),  u = theta_i
// The double well is nonconvex with two symmetric minima per coordinate,
// F >= 0 everywhere, and exact smoothness constant 5/4.
struct SyntheticObjective {
    enum class Kind { quadratic, double_well };

    static SyntheticObjective quadratic(double smoothness, std::size_t dim);
    static SyntheticObjective double_well(std::size_t dim);

    double value(const std::vector<double>& theta) const;
    std::vector<double> gradient(const std::vector<double>& theta) const;

    Kind kind = Kind::quadratic;
    double smoothness = 1.0;  // the exact Lipschitz constant of the gradient
    std::size_t dim = 32;
};

// Deterministic start point: radius * (1,...,1)/sqrt(dim). Seed-independent
// so the initial suboptimality entering bound evaluations is exact.
std::vector<double> initial_theta(std::size_t dim, double radius);

// One stored gradient-bearing sample. Everything is frozen at creation:
// the parameter snapshot, a unit noise direction, and the seed that makes
// the noise scalar a deterministic function of (sample, use step) — so two
// draws of the same record in one batch carry identical noise, which is the
// duplicate-draw event the variance analysis charges at full strength.
struct SyntheticSample {
    std::uint64_t rollout_id = 0;
    std::int64_t creation_step = 0;
    std::vector<double> frozen_theta;
    std::vector<double> noise_direction;
    std::uint64_t noise_scale_seed = 0;
};

// Standard-normal scalar for this sample at step t, seeded by
// noise_scale_seed XOR t.
double raw_noise_factor(const SyntheticSample& sample, std::int64_t t);

// Gradient estimate for one sample with an externally supplied noise factor:
//   grad F(theta_t) + bias + sigma(t - t_i) * factor * noise_direction,
// where bias = kappa * ||theta_t - theta_{t_i}|| along the drift direction
// (zero vector at zero drift — fresh samples are unbiased). The bias meets
// its admissible cap with equality, so bound checks are stress-tested.
std::vector<double> synth_gradient_with_factor(const SyntheticObjective& objective,
                                               const std::vector<double>& theta_t,
                                               const SyntheticSample& sample,
                                               std::int64_t t,
                                               const NoiseProfile& noise,
                                               double kappa, double factor);

// Same with the sample's own seeded factor (the uncorrelated mechanism).
std::vector<double> synth_gradient(const SyntheticObjective& objective,
                                   const std::vector<double>& theta_t,
                                   const SyntheticSample& sample, std::int64_t t,
                                   const NoiseProfile& noise, double kappa);

// Per-slot noise factors for one batch at step t. Distinct records' factors
// are Cholesky-mixed toward pairwise correlation
//   min(1, rho_knob * |t_i - t_j| / N),
// duplicates of one record share its factor, and a non-PSD target is shrunk
// toward the identity (bisection), which keeps every pairwise correlation at
// or below the one-sided cap. rho_knob = 0 returns the raw seeded factors.
std::vector<double> correlated_noise_factors(
    const std::vector<const SyntheticSample*>& batch, std::int64_t t,
    double rho_knob, std::int64_t buffer_capacity);

// Synchronous buffered-SGD run: each step inserts `inserts_per_step` fresh
// samples into a capacity-N FIFO buffer, draws `batch_size` uniformly with
// replacement, and applies theta <- theta - eta * mean gradient estimate.
struct SyncRunConfig {
    std::int64_t buffer_capacity = 16;  // N; inserts_per_step must divide it
    std::int64_t inserts_per_step = 4;  // R
    std::int64_t batch_size = 8;        // B
    double eta = 0.01;
    std::int64_t steps = 100;           // T
    SyntheticObjective objective;
    NoiseProfile noise;
    double kappa = 0.0;
    double rho_knob = 0.0;
    double theta0_radius = 10.0;
    std::uint64_t seed = 0;
};

// Maps a run config onto the bound-evaluation parameters.
DesignParams design_params(const SyncRunConfig& config);

class DivergenceError : public std::runtime_error {
public:
    DivergenceError(std::int64_t step, double norm);
    std::int64_t step() const { return step_; }

private:
    std::int64_t step_;
};

struct SyncRunTrace {
    std::vector<double> grad_norm_sq;     // ||grad F(theta_t)||^2, pre-update
    std::vector<double> objective_value;  // F(theta_t), pre-update
    std::vector<std::int64_t> occupancy;  // buffer size after the step's inserts
    std::vector<double> noise_norm_sq;    // ||batch-mean noise component||^2
    double mean_grad_norm_sq = 0.0;       // (1/T) sum_t ||grad F(theta_t)||^2
    double final_objective = 0.0;         // F(theta_T)

    // CSV: step,grad_norm_sq,objective,buffer_occupancy
    std::string to_csv() const;
};

// Throws std::invalid_argument on malformed configs (including a step size
// outside the guarantee's validity region) and DivergenceError when
// ||theta|| exceeds 1e12.
SyncRunTrace run_sync(const SyncRunConfig& config);

// Grid sweep over (x = N/R, y = B/R) at a fixed compute budget
// C = (B + mu R) * T: every cell runs `seeds` independent runs of
// T = floor(C / (B + mu R)) steps at its own bound-optimal step size.
struct SweepConfig {
    double compute_budget = 6000.0;
    double mu = 6.0;
    std::vector<double> x_grid;  // x * R must be an integer multiple of R
    std::vector<double> y_grid;  // B = round(y * R), >= 1
    std::int64_t R = 4;
    SyntheticObjective objective;
    NoiseProfile noise;
    double kappa = 0.0;
    double rho_knob = 0.0;
    double theta0_radius = 10.0;
    int seeds = 5;
    std::uint64_t seed = 0;
};

struct SweepCellResult {
    double x = 0.0;
    double y = 0.0;
    std::int64_t N = 0;
    std::int64_t R = 0;
    std::int64_t B = 0;
    std::int64_t T_steps = 0;
    double eta = 0.0;
    bool eta_capped = false;
    std::vector<double> per_seed_stat;  // (1/T) sum ||grad F||^2 per seed
    double median_stat = 0.0;
};

// Skips infeasible cells (budget too small for one step); throws if nothing
// is feasible.
std::vector<SweepCellResult> sweep_designs(const SweepConfig& config);

// CSV: one row per (cell, seed): x,y,N,R,B,T,eta,seed,stat
std::string sweep_to_csv(const std::vector<SweepCellResult>& cells);

}  // namespace replab
