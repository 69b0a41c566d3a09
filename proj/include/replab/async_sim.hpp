#pragma once

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "replab/metrics.hpp"
#include "replab/replay_buffer.hpp"

namespace replab {

// Hand-off structure between workers and the trainer: a consume-once LIFO
// queue (optionally bounded; capacity 0 = unbounded) or a sharded replay
// buffer of total capacity N with one shard per trainer.
struct TransferSpec {
    enum class Mode { queue, buffer };

    static TransferSpec queue(std::size_t capacity);
    static TransferSpec buffer(std::size_t total_capacity, SamplingStrategy strategy,
                               RetentionPolicy retention);

    Mode mode = Mode::queue;
    std::size_t capacity = 0;
    SamplingStrategy strategy = SamplingStrategy::uniform_with_replacement;
    RetentionPolicy retention = RetentionPolicy::plain_fifo();
};

// Asynchronous pipeline: W generation workers feed the transfer structure
// with groups of G records; T lock-stepped trainer GPUs apply one global
// update of batch_size records every step_cost/T virtual time. Generating a
// batch_size-worth of records costs mu trainer steps of compute, so one
// group takes log-normal time with mean mu*step_cost*G/batch_size (cv =
// service_jitter). Workers see weights refreshed every weight_sync_every
// steps and stamp each rollout with the version held at generation start.
struct PipelineConfig {
    std::int64_t workers = 1;            // W
    std::int64_t trainers = 1;           // T
    double mu = 4.0;
    double service_jitter = 0.0;
    TransferSpec transfer = TransferSpec::queue(0);
    std::int64_t batch_size = 8;         // B, global per update
    std::int64_t group_size = 4;         // G records per generation
    std::int64_t weight_sync_every = 1;
    std::int64_t horizon = 100;          // trainer steps to run
    double step_cost = 1.0;              // C
    std::uint64_t seed = 0;
};

struct UpdateEvent {
    std::int64_t step = 0;
    double time = 0.0;  // virtual time the update was applied
    std::vector<std::uint64_t> batch;
};

struct StallInterval {
    std::string actor;  // "trainer" or "worker<i>"
    std::string cause;  // "waiting_on_empty" or "waiting_on_full"
    double begin = 0.0;
    double end = 0.0;
};

struct BusyInterval {
    double begin = 0.0;
    double end = 0.0;
};

// Bounded-queue pipelines can wedge (every worker blocked on a full queue
// that still holds fewer than batch_size records); the simulator detects
// the condition and reports every actor's state.
class DeadlockError : public std::runtime_error {
public:
    explicit DeadlockError(const std::string& what) : std::runtime_error(what) {}
};

struct AsyncRunTrace {
    PipelineConfig config;
    std::int64_t steps = 0;
    double end_time = 0.0;
    double warmup_end = 0.0;  // time the first update began

    std::int64_t records_delivered = 0;
    std::int64_t records_delivered_after_warmup = 0;
    std::int64_t records_consumed = 0;  // queue mode pops
    std::int64_t final_queue_size = 0;

    double trainer_compute = 0.0;    // steps * step_cost
    double inference_compute = 0.0;  // delivered records * mu * step_cost / B

    MetricsLedger ledger;
    std::map<std::uint64_t, std::int64_t> policy_version_of;
    std::vector<UpdateEvent> updates;
    std::vector<StallInterval> stalls;
    std::vector<std::vector<BusyInterval>> worker_busy;  // per worker

    // Line-delimited updates: step,time,id;id;...
    std::string updates_to_text() const;
};

AsyncRunTrace simulate(const PipelineConfig& config);

// Uses per record once production and consumption rates balance: mu * T / W.
double steady_state_replay_ratio(double workers, double trainers, double mu);

// Post-warm-up virtual-time fractions per actor.
struct StallRow {
    std::string actor;
    double busy_fraction = 0.0;
    double stalled_empty_fraction = 0.0;
    double stalled_full_fraction = 0.0;
};

std::vector<StallRow> stall_report(const AsyncRunTrace& trace);
std::string stall_report_csv(const std::vector<StallRow>& rows);

// Queue-mode staleness against the generating weight version: one value per
// use event, use_step - policy version at generation start.
std::vector<std::int64_t> staleness_without_buffer(const AsyncRunTrace& trace);

}  // namespace replab
