#include "replab/async_sim.hpp"

#include <algorithm>
#include <deque>
#include <optional>
#include <queue>
#include <sstream>

#include "replab/rng.hpp"
#include "replab/text_io.hpp"
#include "replab/transfer_queue.hpp"

namespace replab {

TransferSpec TransferSpec::queue(std::size_t capacity) {
    TransferSpec t;
    t.mode = Mode::queue;
    t.capacity = capacity;
    return t;
}

TransferSpec TransferSpec::buffer(std::size_t total_capacity, SamplingStrategy strategy,
                                  RetentionPolicy retention) {
    if (total_capacity == 0) {
        throw std::invalid_argument("buffer transfer requires a positive capacity");
    }
    TransferSpec t;
    t.mode = Mode::buffer;
    t.capacity = total_capacity;
    t.strategy = strategy;
    t.retention = retention;
    return t;
}

double steady_state_replay_ratio(double workers, double trainers, double mu) {
    if (!(workers > 0.0) || !(trainers > 0.0) || !(mu > 0.0)) {
        throw std::invalid_argument("steady_state_replay_ratio needs positive W, T, mu");
    }
    return mu * trainers / workers;
}

namespace {

// Events are ordered by (time, kind, actor, sequence); deliveries sort ahead
// of update completions at equal times so a step starting at that instant
// sees the freshest records. The sequence number makes the order total.
struct Event {
    double time = 0.0;
    int kind = 0;  // 0 = worker generation done, 1 = trainer step done
    std::int64_t actor = 0;
    std::uint64_t seq = 0;
};

struct EventAfter {
    bool operator()(const Event& a, const Event& b) const {
        if (a.time != b.time) return a.time > b.time;
        if (a.kind != b.kind) return a.kind > b.kind;
        if (a.actor != b.actor) return a.actor > b.actor;
        return a.seq > b.seq;
    }
};

struct WorkerState {
    std::int64_t version_at_start = 0;
    double generation_start = 0.0;
    std::deque<RolloutRecord> pending;  // records awaiting queue space
    std::optional<double> blocked_since;
};

void validate(const PipelineConfig& c) {
    if (c.workers < 1 || c.trainers < 1) {
        throw std::invalid_argument("pipeline needs at least one worker and one trainer");
    }
    if (!(c.mu > 0.0) || !(c.step_cost > 0.0)) {
        throw std::invalid_argument("pipeline needs positive mu and step cost");
    }
    if (c.service_jitter < 0.0) {
        throw std::invalid_argument("service jitter (cv) must be non-negative");
    }
    if (c.batch_size < 1 || c.group_size < 1 || c.weight_sync_every < 1 || c.horizon < 1) {
        throw std::invalid_argument(
            "batch size, group size, weight_sync_every and horizon must be positive");
    }
    if (c.transfer.mode == TransferSpec::Mode::buffer) {
        if (c.batch_size % c.trainers != 0) {
            throw std::invalid_argument(
                "buffer mode: batch size must be divisible by the trainer count");
        }
        if (c.transfer.capacity % static_cast<std::size_t>(c.trainers) != 0) {
            throw std::invalid_argument(
                "buffer mode: capacity must be divisible by the trainer count");
        }
    }
}

}  // namespace

std::string AsyncRunTrace::updates_to_text() const {
    std::ostringstream out;
    for (const UpdateEvent& u : updates) {
        out << u.step << ',' << format_double(u.time) << ',';
        for (std::size_t i = 0; i < u.batch.size(); ++i) {
            if (i > 0) out << ';';
            out << u.batch[i];
        }
        out << '\n';
    }
    return out.str();
}

AsyncRunTrace simulate(const PipelineConfig& config) {
    validate(config);

    const bool buffer_mode = config.transfer.mode == TransferSpec::Mode::buffer;
    const double step_duration = config.step_cost / static_cast<double>(config.trainers);
    const double group_mean_time = config.mu * config.step_cost *
                                   static_cast<double>(config.group_size) /
                                   static_cast<double>(config.batch_size);
    const auto per_shard = static_cast<std::size_t>(config.batch_size / config.trainers);
    const double record_inference_cost =
        config.mu * config.step_cost / static_cast<double>(config.batch_size);

    AsyncRunTrace trace;
    trace.config = config;
    trace.worker_busy.resize(static_cast<std::size_t>(config.workers));

    Rng root(config.seed);
    std::vector<Rng> worker_rng;
    worker_rng.reserve(static_cast<std::size_t>(config.workers));
    for (std::int64_t i = 0; i < config.workers; ++i) {
        worker_rng.push_back(root.stream("worker", static_cast<std::uint64_t>(i)));
    }
    Rng sampling = root.stream("buffer_sampling");

    std::optional<ShardedReplayBuffer> buffer;
    std::optional<TransferQueue> queue;
    if (buffer_mode) {
        buffer.emplace(static_cast<std::size_t>(config.trainers), config.transfer.capacity,
                       config.transfer.strategy, config.transfer.retention);
    } else {
        queue.emplace(config.transfer.capacity == 0
                          ? std::nullopt
                          : std::optional<std::size_t>(config.transfer.capacity));
    }

    std::priority_queue<Event, std::vector<Event>, EventAfter> events;
    std::uint64_t next_seq = 0;
    auto schedule = [&](double time, int kind, std::int64_t actor) {
        events.push(Event{time, kind, actor, next_seq++});
    };

    std::vector<WorkerState> workers(static_cast<std::size_t>(config.workers));
    std::int64_t steps = 0;
    bool trainer_busy = false;
    bool first_step_started = false;
    std::optional<double> trainer_waiting_since;
    std::vector<std::uint64_t> current_batch;
    std::uint64_t next_rollout_id = 1;
    std::uint64_t next_group_id = 1;

    auto synced_version = [&]() { return steps - steps % config.weight_sync_every; };

    auto start_generation = [&](std::int64_t w, double now) {
        WorkerState& state = workers[static_cast<std::size_t>(w)];
        state.version_at_start = synced_version();
        state.generation_start = now;
        const double service =
            worker_rng[static_cast<std::size_t>(w)].lognormal_mean_cv(group_mean_time,
                                                                      config.service_jitter);
        schedule(now + service, 0, w);
    };

    // Stamps the entry-time step, notes the generation in the ledger, and
    // bills the inference compute. Records enter the system here.
    auto admit_record = [&](RolloutRecord record, double now) {
        record.creation_step = steps;
        trace.ledger.note_generated(record.rollout_id);
        trace.records_delivered += 1;
        if (first_step_started) trace.records_delivered_after_warmup += 1;
        trace.inference_compute += record_inference_cost;
        if (buffer_mode) {
            buffer->push(record);
        } else {
            queue->push(record);  // caller checked for space
        }
        (void)now;
    };

    auto trainer_ready = [&]() {
        if (buffer_mode) {
            for (std::int64_t s = 0; s < config.trainers; ++s) {
                if (buffer->shard_size(static_cast<std::size_t>(s)) < per_shard) return false;
            }
            return true;
        }
        return queue->size() >= static_cast<std::size_t>(config.batch_size);
    };

    // Moves blocked workers' pending records into freed queue space, oldest
    // block first; a fully drained worker resumes generating immediately.
    auto drain_blocked_workers = [&](double now) {
        while (true) {
            std::int64_t chosen = -1;
            double earliest = 0.0;
            for (std::int64_t w = 0; w < config.workers; ++w) {
                const WorkerState& state = workers[static_cast<std::size_t>(w)];
                if (!state.blocked_since.has_value()) continue;
                if (chosen < 0 || *state.blocked_since < earliest) {
                    chosen = w;
                    earliest = *state.blocked_since;
                }
            }
            if (chosen < 0) return;
            WorkerState& state = workers[static_cast<std::size_t>(chosen)];
            while (!state.pending.empty() &&
                   queue->size() < *queue->capacity()) {
                admit_record(state.pending.front(), now);
                state.pending.pop_front();
            }
            if (!state.pending.empty()) return;  // queue full again
            trace.stalls.push_back(
                StallInterval{"worker" + std::to_string(chosen), "waiting_on_full",
                              *state.blocked_since, now});
            state.blocked_since.reset();
            start_generation(chosen, now);
        }
    };

    auto try_start_trainer = [&](double now) {
        if (trainer_busy || steps >= config.horizon) return;
        if (!trainer_ready()) {
            if (!trainer_waiting_since.has_value()) trainer_waiting_since = now;
            return;
        }
        if (trainer_waiting_since.has_value()) {
            trace.stalls.push_back(StallInterval{"trainer", "waiting_on_empty",
                                                 *trainer_waiting_since, now});
            trainer_waiting_since.reset();
        }
        if (!first_step_started) {
            first_step_started = true;
            trace.warmup_end = now;
        }
        current_batch.clear();
        if (buffer_mode) {
            const std::vector<RolloutRecord> batch =
                buffer->sample(static_cast<std::size_t>(config.batch_size), sampling,
                               &trace.ledger, steps, steps);
            for (const RolloutRecord& r : batch) current_batch.push_back(r.rollout_id);
        } else {
            for (std::int64_t rank = 0; rank < config.batch_size; ++rank) {
                const std::optional<RolloutRecord> r = queue->pop();
                // trainer_ready() guaranteed batch_size entries
                UseEvent use;
                use.rollout_id = r->rollout_id;
                use.creation_step = r->creation_step;
                use.use_step = steps;
                use.batch_id = steps;
                use.within_batch_rank = rank;
                trace.ledger.record_use(use);
                trace.records_consumed += 1;
                current_batch.push_back(r->rollout_id);
            }
            if (queue->capacity().has_value()) drain_blocked_workers(now);
        }
        trainer_busy = true;
        schedule(now + step_duration, 1, 0);
    };

    for (std::int64_t w = 0; w < config.workers; ++w) start_generation(w, 0.0);
    try_start_trainer(0.0);

    while (steps < config.horizon) {
        if (events.empty()) {
            std::ostringstream what;
            what << "pipeline deadlocked after " << steps << " steps: trainer "
                 << (trainer_waiting_since.has_value() ? "waiting on records"
                                                       : "idle")
                 << ", queue holds "
                 << (buffer_mode ? buffer->size() : queue->size()) << " records";
            for (std::int64_t w = 0; w < config.workers; ++w) {
                const WorkerState& state = workers[static_cast<std::size_t>(w)];
                what << "; worker" << w
                     << (state.blocked_since.has_value()
                             ? " blocked with " + std::to_string(state.pending.size()) +
                                   " pending records"
                             : " generating");
            }
            throw DeadlockError(what.str());
        }
        const Event event = events.top();
        events.pop();

        if (event.kind == 0) {
            // Worker generation complete: deliver the group record by record.
            const auto w = static_cast<std::size_t>(event.actor);
            WorkerState& state = workers[w];
            trace.worker_busy[w].push_back(
                BusyInterval{state.generation_start, event.time});
            const std::uint64_t group = next_group_id++;
            std::vector<RolloutRecord> fresh;
            fresh.reserve(static_cast<std::size_t>(config.group_size));
            for (std::int64_t g = 0; g < config.group_size; ++g) {
                RolloutRecord record;
                record.rollout_id = next_rollout_id++;
                record.group_id = group;
                record.policy_version = state.version_at_start;
                fresh.push_back(record);
                trace.policy_version_of[record.rollout_id] = state.version_at_start;
            }
            bool blocked = false;
            for (RolloutRecord& record : fresh) {
                if (blocked) {
                    state.pending.push_back(record);
                    continue;
                }
                if (!buffer_mode && queue->capacity().has_value() &&
                    queue->size() >= *queue->capacity()) {
                    blocked = true;
                    state.blocked_since = event.time;
                    state.pending.push_back(record);
                    continue;
                }
                admit_record(record, event.time);
            }
            if (!blocked) start_generation(event.actor, event.time);
            try_start_trainer(event.time);
        } else {
            // Trainer step complete: apply the update, advance the version.
            trace.updates.push_back(UpdateEvent{steps, event.time, current_batch});
            trace.trainer_compute += config.step_cost;
            steps += 1;
            trainer_busy = false;
            if (steps >= config.horizon) {
                trace.end_time = event.time;
                break;
            }
            try_start_trainer(event.time);
        }
    }

    // Close open stall intervals at the end of the run.
    if (trainer_waiting_since.has_value()) {
        trace.stalls.push_back(
            StallInterval{"trainer", "waiting_on_empty", *trainer_waiting_since,
                          trace.end_time});
    }
    for (std::int64_t w = 0; w < config.workers; ++w) {
        const WorkerState& state = workers[static_cast<std::size_t>(w)];
        if (state.blocked_since.has_value()) {
            trace.stalls.push_back(StallInterval{"worker" + std::to_string(w),
                                                 "waiting_on_full",
                                                 *state.blocked_since, trace.end_time});
        } else if (state.generation_start < trace.end_time) {
            // Generation still in flight when the run ended.
            trace.worker_busy[static_cast<std::size_t>(w)].push_back(
                BusyInterval{state.generation_start, trace.end_time});
        }
    }
    trace.steps = steps;
    trace.final_queue_size =
        buffer_mode ? 0 : static_cast<std::int64_t>(queue->size());
    return trace;
}

namespace {

double clipped_overlap(double begin, double end, double lo, double hi) {
    const double b = std::max(begin, lo);
    const double e = std::min(end, hi);
    return e > b ? e - b : 0.0;
}

}  // namespace

std::vector<StallRow> stall_report(const AsyncRunTrace& trace) {
    const double lo = trace.warmup_end;
    const double hi = trace.end_time;
    const double window = hi - lo;
    if (!(window > 0.0)) {
        throw std::invalid_argument("stall_report needs a completed trace");
    }

    std::vector<StallRow> rows;
    StallRow trainer;
    trainer.actor = "trainer";
    trainer.busy_fraction = static_cast<double>(trace.steps) * trace.config.step_cost /
                            static_cast<double>(trace.config.trainers) / window;
    for (const StallInterval& s : trace.stalls) {
        if (s.actor == "trainer") {
            trainer.stalled_empty_fraction += clipped_overlap(s.begin, s.end, lo, hi) / window;
        }
    }
    rows.push_back(trainer);

    for (std::size_t w = 0; w < trace.worker_busy.size(); ++w) {
        StallRow row;
        row.actor = "worker" + std::to_string(w);
        for (const BusyInterval& b : trace.worker_busy[w]) {
            row.busy_fraction += clipped_overlap(b.begin, b.end, lo, hi) / window;
        }
        for (const StallInterval& s : trace.stalls) {
            if (s.actor == row.actor) {
                row.stalled_full_fraction += clipped_overlap(s.begin, s.end, lo, hi) / window;
            }
        }
        rows.push_back(row);
    }
    return rows;
}

std::string stall_report_csv(const std::vector<StallRow>& rows) {
    std::ostringstream out;
    out << "actor,busy_fraction,stalled_empty_fraction,stalled_full_fraction\n";
    for (const StallRow& r : rows) {
        out << r.actor << ',' << format_double(r.busy_fraction) << ','
            << format_double(r.stalled_empty_fraction) << ','
            << format_double(r.stalled_full_fraction) << '\n';
    }
    return out.str();
}

std::vector<std::int64_t> staleness_without_buffer(const AsyncRunTrace& trace) {
    if (trace.config.transfer.mode != TransferSpec::Mode::queue) {
        throw std::invalid_argument("staleness_without_buffer is defined for queue mode");
    }
    std::vector<std::int64_t> out;
    out.reserve(trace.ledger.events().size());
    for (const UseEvent& e : trace.ledger.events()) {
        out.push_back(e.use_step - trace.policy_version_of.at(e.rollout_id));
    }
    return out;
}

}  // namespace replab
