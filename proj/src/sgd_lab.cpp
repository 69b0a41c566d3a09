#include "replab/sgd_lab.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <unordered_map>

#include "replab/replay_buffer.hpp"
#include "replab/text_io.hpp"

namespace replab {

namespace {

double dot(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

double median_nearest_rank(std::vector<double> values) {
    std::sort(values.begin(), values.end());
    const std::size_t rank = (values.size() + 1) / 2;  // ceil(n/2)
    return values[rank - 1];
}

}  // namespace

SyntheticObjective SyntheticObjective::quadratic(double smoothness, std::size_t dim) {
    if (!(smoothness > 0.0) || dim == 0) {
        throw std::invalid_argument("quadratic objective needs positive smoothness and dimension");
    }
    SyntheticObjective o;
    o.kind = Kind::quadratic;
    o.smoothness = smoothness;
    o.dim = dim;
    return o;
}

SyntheticObjective SyntheticObjective::double_well(std::size_t dim) {
    if (dim == 0) {
        throw std::invalid_argument("double-well objective needs a positive dimension");
    }
    SyntheticObjective o;
    o.kind = Kind::double_well;
    o.smoothness = 1.25;  // sup |d^2/du^2 (u^2/8 + 1 + cos u)| = 1/4 + 1
    o.dim = dim;
    return o;
}

double SyntheticObjective::value(const std::vector<double>& theta) const {
    if (theta.size() != dim) {
        throw std::invalid_argument("objective: parameter dimension mismatch");
    }
    if (kind == Kind::quadratic) {
        return 0.5 * smoothness * dot(theta, theta);
    }
    double sum = 0.0;
    for (double u : theta) sum += u * u / 8.0 + 1.0 + std::cos(u);
    return sum;
}

std::vector<double> SyntheticObjective::gradient(const std::vector<double>& theta) const {
    if (theta.size() != dim) {
        throw std::invalid_argument("objective: parameter dimension mismatch");
    }
    std::vector<double> g(theta.size());
    if (kind == Kind::quadratic) {
        for (std::size_t i = 0; i < theta.size(); ++i) g[i] = smoothness * theta[i];
    } else {
        for (std::size_t i = 0; i < theta.size(); ++i) {
            g[i] = theta[i] / 4.0 - std::sin(theta[i]);
        }
    }
    return g;
}

std::vector<double> initial_theta(std::size_t dim, double radius) {
    if (dim == 0) throw std::invalid_argument("initial_theta: dimension must be positive");
    if (radius < 0.0) throw std::invalid_argument("initial_theta: radius must be non-negative");
    return std::vector<double>(dim, radius / std::sqrt(static_cast<double>(dim)));
}

double raw_noise_factor(const SyntheticSample& sample, std::int64_t t) {
    if (t < sample.creation_step) {
        throw std::invalid_argument("sample used before its creation step");
    }
    Rng rng(sample.noise_scale_seed ^ static_cast<std::uint64_t>(t));
    return rng.normal();
}

std::vector<double> synth_gradient_with_factor(const SyntheticObjective& objective,
                                               const std::vector<double>& theta_t,
                                               const SyntheticSample& sample,
                                               std::int64_t t,
                                               const NoiseProfile& noise,
                                               double kappa, double factor) {
    if (t < sample.creation_step) {
        throw std::invalid_argument("sample used before its creation step");
    }
    if (sample.frozen_theta.size() != theta_t.size() ||
        sample.noise_direction.size() != theta_t.size()) {
        throw std::invalid_argument("sample snapshot dimension mismatch");
    }
    std::vector<double> g = objective.gradient(theta_t);
    // kappa * ||drift|| along the unit drift direction is just kappa * drift,
    // and vanishes with the drift itself.
    const double scale = noise.sigma(static_cast<double>(t - sample.creation_step)) * factor;
    for (std::size_t i = 0; i < g.size(); ++i) {
        g[i] += kappa * (theta_t[i] - sample.frozen_theta[i]);
        g[i] += scale * sample.noise_direction[i];
    }
    return g;
}

std::vector<double> synth_gradient(const SyntheticObjective& objective,
                                   const std::vector<double>& theta_t,
                                   const SyntheticSample& sample, std::int64_t t,
                                   const NoiseProfile& noise, double kappa) {
    return synth_gradient_with_factor(objective, theta_t, sample, t, noise, kappa,
                                      raw_noise_factor(sample, t));
}

namespace {

// Lower-triangular Cholesky factor of a symmetric matrix stored row-major.
// Returns false on a non-positive pivot (matrix not positive definite).
bool cholesky(const std::vector<double>& m, std::size_t n, std::vector<double>& lower) {
    lower.assign(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j <= i; ++j) {
            double s = m[i * n + j];
            for (std::size_t k = 0; k < j; ++k) s -= lower[i * n + k] * lower[j * n + k];
            if (i == j) {
                if (!(s > 0.0)) return false;
                lower[i * n + i] = std::sqrt(s);
            } else {
                lower[i * n + j] = s / lower[j * n + j];
            }
        }
    }
    return true;
}

}  // namespace

std::vector<double> correlated_noise_factors(
    const std::vector<const SyntheticSample*>& batch, std::int64_t t,
    double rho_knob, std::int64_t buffer_capacity) {
    if (rho_knob < 0.0 || rho_knob > 1.0) {
        throw std::invalid_argument("rho_knob must lie in [0, 1]");
    }
    if (buffer_capacity <= 0) {
        throw std::invalid_argument("buffer capacity must be positive");
    }

    // Distinct records in first-occurrence order; duplicate slots share the
    // record's factor so repeated draws stay perfectly coherent.
    std::unordered_map<std::uint64_t, std::size_t> index;
    std::vector<const SyntheticSample*> distinct;
    std::vector<std::size_t> slot_of(batch.size());
    for (std::size_t i = 0; i < batch.size(); ++i) {
        auto [it, inserted] = index.try_emplace(batch[i]->rollout_id, distinct.size());
        if (inserted) distinct.push_back(batch[i]);
        slot_of[i] = it->second;
    }

    const std::size_t n = distinct.size();
    std::vector<double> raw(n);
    for (std::size_t k = 0; k < n; ++k) raw[k] = raw_noise_factor(*distinct[k], t);

    std::vector<double> mixed;
    if (rho_knob == 0.0 || n == 1) {
        mixed = raw;
    } else {
        std::vector<double> target(n * n, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            target[i * n + i] = 1.0;
            for (std::size_t j = 0; j < i; ++j) {
                const double dt = std::abs(static_cast<double>(distinct[i]->creation_step -
                                                               distinct[j]->creation_step));
                const double c =
                    std::min(1.0, rho_knob * dt / static_cast<double>(buffer_capacity));
                target[i * n + j] = c;
                target[j * n + i] = c;
            }
        }
        std::vector<double> lower;
        if (!cholesky(target, n, lower)) {
            // Shrink the off-diagonal block toward the identity until the
            // matrix turns positive definite; correlations only shrink, so
            // they stay below the cap.
            double lo = 0.0;
            double hi = 1.0;
            std::vector<double> trial(n * n);
            for (int iter = 0; iter < 40; ++iter) {
                const double mid = 0.5 * (lo + hi);
                for (std::size_t i = 0; i < n; ++i) {
                    for (std::size_t j = 0; j < n; ++j) {
                        trial[i * n + j] =
                            i == j ? 1.0 : mid * target[i * n + j];
                    }
                }
                std::vector<double> candidate;
                if (cholesky(trial, n, candidate)) {
                    lo = mid;
                    lower = std::move(candidate);
                } else {
                    hi = mid;
                }
            }
            if (lower.empty()) {
                // No shrink level succeeded (cannot happen before numeric
                // degeneracy): fall back to fully independent factors.
                lower.assign(n * n, 0.0);
                for (std::size_t i = 0; i < n; ++i) lower[i * n + i] = 1.0;
            }
        }
        mixed.assign(n, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            double s = 0.0;
            for (std::size_t k = 0; k <= i; ++k) s += lower[i * n + k] * raw[k];
            mixed[i] = s;
        }
    }

    std::vector<double> factors(batch.size());
    for (std::size_t i = 0; i < batch.size(); ++i) factors[i] = mixed[slot_of[i]];
    return factors;
}

DesignParams design_params(const SyncRunConfig& config) {
    DesignParams p;
    p.eta = config.eta;
    p.N = config.buffer_capacity;
    p.R = config.inserts_per_step;
    p.B = config.batch_size;
    p.T_steps = config.steps;
    p.kappa = config.kappa;
    p.rho = config.rho_knob;
    p.L = config.objective.smoothness;
    p.F0 = config.objective.value(initial_theta(config.objective.dim, config.theta0_radius));
    p.noise = config.noise;
    return p;
}

DivergenceError::DivergenceError(std::int64_t step, double norm)
    : std::runtime_error("parameters diverged at step " + std::to_string(step) +
                         " (norm " + format_double(norm) + " exceeds 1e12)"),
      step_(step) {}

std::string SyncRunTrace::to_csv() const {
    std::ostringstream out;
    out << "step,grad_norm_sq,objective,buffer_occupancy\n";
    for (std::size_t t = 0; t < grad_norm_sq.size(); ++t) {
        out << t << ',' << format_double(grad_norm_sq[t]) << ','
            << format_double(objective_value[t]) << ',' << occupancy[t] << '\n';
    }
    return out.str();
}

SyncRunTrace run_sync(const SyncRunConfig& config) {
    if (config.buffer_capacity <= 0 || config.inserts_per_step <= 0 ||
        config.buffer_capacity % config.inserts_per_step != 0) {
        throw std::invalid_argument(
            "run_sync: inserts per step must divide the positive buffer capacity");
    }
    if (config.batch_size <= 0 || config.steps <= 0) {
        throw std::invalid_argument("run_sync: batch size and steps must be positive");
    }
    if (config.rho_knob < 0.0 || config.rho_knob > 1.0) {
        throw std::invalid_argument("run_sync: rho_knob must lie in [0, 1]");
    }
    const EtaValidity validity = eta_validity(design_params(config));
    if (!validity.valid) {
        throw std::invalid_argument(
            "run_sync: eta " + format_double(config.eta) +
            " violates the step-size conditions (needs 0 < eta < " +
            format_double(validity.smoothness_cap) + " and eta <= " +
            format_double(validity.bias_cap) + ")");
    }

    const std::size_t dim = config.objective.dim;
    Rng root(config.seed);
    Rng creation = root.stream("sample_creation");
    Rng sampling = root.stream("buffer_sampling");

    ShardedReplayBuffer buffer(1, static_cast<std::size_t>(config.buffer_capacity),
                               SamplingStrategy::uniform_with_replacement,
                               RetentionPolicy::plain_fifo());
    std::unordered_map<std::uint64_t, SyntheticSample> store;
    store.reserve(static_cast<std::size_t>(config.buffer_capacity) * 2);

    std::vector<double> theta = initial_theta(dim, config.theta0_radius);
    SyncRunTrace trace;
    trace.grad_norm_sq.reserve(static_cast<std::size_t>(config.steps));
    trace.objective_value.reserve(static_cast<std::size_t>(config.steps));
    trace.occupancy.reserve(static_cast<std::size_t>(config.steps));
    trace.noise_norm_sq.reserve(static_cast<std::size_t>(config.steps));

    std::uint64_t next_id = 1;
    const double guard_norm_sq = 1e24;  // ||theta|| > 1e12
    const double inv_b = 1.0 / static_cast<double>(config.batch_size);

    for (std::int64_t t = 0; t < config.steps; ++t) {
        for (std::int64_t r = 0; r < config.inserts_per_step; ++r) {
            SyntheticSample s;
            s.rollout_id = next_id;
            s.creation_step = t;
            s.frozen_theta = theta;
            s.noise_direction = creation.unit_vector(dim);
            s.noise_scale_seed = creation.next_u64();

            RolloutRecord rec;
            rec.rollout_id = next_id;
            rec.creation_step = t;
            rec.policy_version = t;
            if (auto evicted = buffer.push(rec)) store.erase(evicted->rollout_id);
            store.emplace(next_id, std::move(s));
            ++next_id;
        }

        const std::vector<double> grad = config.objective.gradient(theta);
        trace.grad_norm_sq.push_back(dot(grad, grad));
        trace.objective_value.push_back(config.objective.value(theta));
        trace.occupancy.push_back(static_cast<std::int64_t>(buffer.size()));

        const std::vector<RolloutRecord> batch =
            buffer.sample(static_cast<std::size_t>(config.batch_size), sampling);
        std::vector<const SyntheticSample*> samples;
        samples.reserve(batch.size());
        for (const RolloutRecord& rec : batch) samples.push_back(&store.at(rec.rollout_id));

        const std::vector<double> factors = correlated_noise_factors(
            samples, t, config.rho_knob, config.buffer_capacity);

        std::vector<double> bias_mean(dim, 0.0);
        std::vector<double> noise_mean(dim, 0.0);
        for (std::size_t i = 0; i < samples.size(); ++i) {
            const SyntheticSample& s = *samples[i];
            const double scale =
                config.noise.sigma(static_cast<double>(t - s.creation_step)) * factors[i];
            for (std::size_t d = 0; d < dim; ++d) {
                bias_mean[d] += config.kappa * (theta[d] - s.frozen_theta[d]);
                noise_mean[d] += scale * s.noise_direction[d];
            }
        }
        double theta_norm_sq = 0.0;
        for (std::size_t d = 0; d < dim; ++d) {
            bias_mean[d] *= inv_b;
            noise_mean[d] *= inv_b;
            theta[d] -= config.eta * (grad[d] + bias_mean[d] + noise_mean[d]);
            theta_norm_sq += theta[d] * theta[d];
        }
        trace.noise_norm_sq.push_back(dot(noise_mean, noise_mean));
        if (theta_norm_sq > guard_norm_sq) {
            throw DivergenceError(t, std::sqrt(theta_norm_sq));
        }
    }

    double sum = 0.0;
    for (double v : trace.grad_norm_sq) sum += v;
    trace.mean_grad_norm_sq = sum / static_cast<double>(config.steps);
    trace.final_objective = config.objective.value(theta);
    return trace;
}

std::vector<SweepCellResult> sweep_designs(const SweepConfig& config) {
    if (config.x_grid.empty() || config.y_grid.empty()) {
        throw std::invalid_argument("sweep_designs: empty grid");
    }
    if (config.R <= 0 || config.seeds < 1) {
        throw std::invalid_argument("sweep_designs: R and seeds must be positive");
    }
    if (!(config.mu > 0.0) || !(config.compute_budget > 0.0)) {
        throw std::invalid_argument("sweep_designs: mu and compute budget must be positive");
    }

    const double f0 =
        config.objective.value(initial_theta(config.objective.dim, config.theta0_radius));
    Rng root(config.seed);

    std::vector<SweepCellResult> cells;
    std::size_t cell_index = 0;
    for (double x : config.x_grid) {
        for (double y : config.y_grid) {
            const std::uint64_t this_cell = cell_index++;
            const double n_real = x * static_cast<double>(config.R);
            const std::int64_t N = std::llround(n_real);
            if (N <= 0 || std::abs(n_real - static_cast<double>(N)) > 1e-9 ||
                N % config.R != 0) {
                throw std::invalid_argument(
                    "sweep_designs: x = " + format_double(x) +
                    " does not give an integral buffer capacity divisible by R");
            }
            const std::int64_t B = std::llround(y * static_cast<double>(config.R));
            if (B < 1) {
                throw std::invalid_argument("sweep_designs: y = " + format_double(y) +
                                            " gives a batch size below 1");
            }
            const double step_cost =
                static_cast<double>(B) + config.mu * static_cast<double>(config.R);
            const auto T = static_cast<std::int64_t>(config.compute_budget / step_cost);
            if (T < 1) continue;  // budget cannot afford a single step here

            DesignParams p;
            p.eta = 1e-3;  // placeholder; optimal_eta only uses the caps
            p.N = N;
            p.R = config.R;
            p.B = B;
            p.T_steps = T;
            p.kappa = config.kappa;
            p.rho = config.rho_knob;
            p.L = config.objective.smoothness;
            p.F0 = f0;
            p.noise = config.noise;
            const EtaChoice choice = optimal_eta(p, config.mu, config.compute_budget);

            SweepCellResult cell;
            cell.x = x;
            cell.y = y;
            cell.N = N;
            cell.R = config.R;
            cell.B = B;
            cell.T_steps = T;
            cell.eta = choice.eta_star;
            cell.eta_capped = choice.capped;
            for (int s = 0; s < config.seeds; ++s) {
                SyncRunConfig rc;
                rc.buffer_capacity = N;
                rc.inserts_per_step = config.R;
                rc.batch_size = B;
                rc.eta = choice.eta_star;
                rc.steps = T;
                rc.objective = config.objective;
                rc.noise = config.noise;
                rc.kappa = config.kappa;
                rc.rho_knob = config.rho_knob;
                rc.theta0_radius = config.theta0_radius;
                rc.seed = root.stream("cell", this_cell)
                              .stream("seed", static_cast<std::uint64_t>(s))
                              .seed();
                cell.per_seed_stat.push_back(run_sync(rc).mean_grad_norm_sq);
            }
            cell.median_stat = median_nearest_rank(cell.per_seed_stat);
            cells.push_back(std::move(cell));
        }
    }
    if (cells.empty()) {
        throw std::invalid_argument("sweep_designs: no grid cell fits the compute budget");
    }
    return cells;
}

std::string sweep_to_csv(const std::vector<SweepCellResult>& cells) {
    std::ostringstream out;
    out << "x,y,N,R,B,T,eta,seed,stat\n";
    for (const SweepCellResult& c : cells) {
        for (std::size_t s = 0; s < c.per_seed_stat.size(); ++s) {
            out << format_double(c.x) << ',' << format_double(c.y) << ',' << c.N << ','
                << c.R << ',' << c.B << ',' << c.T_steps << ',' << format_double(c.eta)
                << ',' << s << ',' << format_double(c.per_seed_stat[s]) << '\n';
        }
    }
    return out.str();
}

}  // namespace replab
