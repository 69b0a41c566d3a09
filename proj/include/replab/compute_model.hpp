#pragma once

#include <stdexcept>

namespace replab {

// GPU-compute accounting for asynchronous generate/train pipelines.
//
// Conventions: C is the trainer compute per optimizer step (a full batch);
// generating a batch of rollouts of the same size costs C*mu; W generation
// GPUs and T trainer GPUs run without idling when a replay buffer decouples
// them. All quantities are per optimizer step.

// Per-step compute when every batch must be regenerated fresh: C * (1 + mu).
double cost_without_buffer(double step_cost, double mu);

// Per-step compute when generation runs continuously at the W:T ratio:
// C * (1 + W/T).
double cost_with_buffer(double step_cost, double workers, double trainers);

// Ratio of buffered to unbuffered per-step compute: (1 + W/T) / (1 + mu).
double compute_ratio(double workers, double trainers, double mu);

// Estimates mu from measured throughputs: per-GPU training consumption rate
// divided by per-GPU generation rate, (k_training / T) / (k_inference / W).
// k_training counts records consumed by optimizer steps (with repeats);
// k_inference counts unique records generated.
double estimate_mu(double k_training, double trainers, double k_inference, double workers);

}  // namespace replab
