#include "replab/compute_model.hpp"

namespace replab {

namespace {

void require_positive(double v, const char* what) {
    if (!(v > 0.0)) {
        throw std::invalid_argument(std::string(what) + " must be positive");
    }
}

void require_non_negative(double v, const char* what) {
    if (!(v >= 0.0)) {
        throw std::invalid_argument(std::string(what) + " must be non-negative");
    }
}

}  // namespace

double cost_without_buffer(double step_cost, double mu) {
    require_positive(step_cost, "step_cost");
    require_non_negative(mu, "mu");
    return step_cost * (1.0 + mu);
}

double cost_with_buffer(double step_cost, double workers, double trainers) {
    require_positive(step_cost, "step_cost");
    require_non_negative(workers, "workers");  // W = 0: replay-only analyses
    require_positive(trainers, "trainers");
    return step_cost * (1.0 + workers / trainers);
}

double compute_ratio(double workers, double trainers, double mu) {
    require_non_negative(workers, "workers");
    require_positive(trainers, "trainers");
    require_non_negative(mu, "mu");
    return (1.0 + workers / trainers) / (1.0 + mu);
}

double estimate_mu(double k_training, double trainers, double k_inference, double workers) {
    require_positive(k_training, "k_training");
    require_positive(trainers, "trainers");
    require_positive(k_inference, "k_inference");
    require_positive(workers, "workers");
    return (k_training / trainers) / (k_inference / workers);
}

}  // namespace replab
