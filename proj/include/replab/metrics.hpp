#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "replab/rng.hpp"

namespace replab {

// One occurrence of a rollout inside an applied training batch: the atom of
// the staleness / replay-ratio / steps-since-last-use diagnostics.
// within_batch_rank records selection (arrival) order inside the batch;
// (batch_id, within_batch_rank) is unique across a run.
struct UseEvent {
    std::uint64_t rollout_id = 0;
    std::int64_t creation_step = 0;
    std::int64_t use_step = 0;
    std::int64_t batch_id = 0;
    std::int64_t within_batch_rank = 0;

    std::string to_line() const;
    static UseEvent from_line(std::string_view line);

    bool operator==(const UseEvent&) const = default;
};

// How many trainer steps old the rollout was when this batch was applied.
// Throws if the event claims a use before its creation (corrupted ledger).
std::int64_t staleness(const UseEvent& event);

// Append-only history of every rollout generated and every batch membership.
// Records can be evicted from the buffer; the ledger never forgets, so the
// diagnostics can count zero-use rollouts and total uses exactly. Appends are
// atomic; summarization reads an immutable snapshot.
class MetricsLedger {
public:
    MetricsLedger() = default;

    // Registers a freshly generated rollout so it shows up with count 0 in
    // replay statistics even if it is never sampled.
    void note_generated(std::uint64_t rollout_id);

    // Appends one batch-membership event. use_step must be >= creation_step
    // and (batch_id, within_batch_rank) must be new.
    void record_use(const UseEvent& event);

    const std::vector<UseEvent>& events() const { return events_; }
    const std::vector<std::uint64_t>& generated_ids() const { return generated_; }

    // Line-delimited round trip: '# use_ledger v1' header, generated ids,
    // then one event per line.
    std::string export_text() const;
    static MetricsLedger import_text(std::string_view text);

private:
    std::vector<std::uint64_t> generated_;
    std::set<std::uint64_t> generated_index_;
    std::vector<UseEvent> events_;
    std::set<std::pair<std::int64_t, std::int64_t>> batch_slots_;
    // Behind a pointer so the ledger stays movable (import returns by value).
    mutable std::unique_ptr<std::mutex> mutex_ = std::make_unique<std::mutex>();
};

// Total uses per rollout over the whole run. Includes rollouts that were
// generated but never sampled (count 0) unless include_zero_use is false.
std::map<std::uint64_t, std::uint64_t> replay_counts(const MetricsLedger& ledger,
                                                     bool include_zero_use = true);

// Event indices ordered by (use_step, batch_id, random within-batch rank).
// The random rank realizes "a random ordering of the samples" inside each
// batch; rng should be a dedicated metrics stream so drawing it never
// perturbs training randomness.
std::vector<std::size_t> global_use_order(const std::vector<UseEvent>& events, Rng& rng);

// Per-event label in global use order: nullopt on a rollout's first
// occurrence ("new"), otherwise the gap in trainer steps since the same
// rollout's immediately preceding occurrence.
struct UseGapLabel {
    std::size_t event_index = 0;               // into ledger.events()
    std::optional<std::int64_t> gap;           // nullopt = first use ("new")

    bool operator==(const UseGapLabel&) const = default;
};

std::vector<UseGapLabel> steps_since_last_use(const MetricsLedger& ledger, Rng& rng);

// Unit-width integer-bin histogram plus exact mean and nearest-rank
// median/quartiles (rank = ceil(q * n) on the sorted values).
struct MetricSummary {
    std::map<std::int64_t, std::uint64_t> histogram;
    double mean = 0.0;
    double median = 0.0;
    double q25 = 0.0;
    double q75 = 0.0;
    std::size_t count = 0;
};

MetricSummary summarize(const std::vector<double>& values);

// CSV with header 'name,mean,median,q25,q75,count', one row per metric.
std::string summary_table(const std::vector<std::pair<std::string, MetricSummary>>& rows);

// CSV with header 'bin,count', one row per occupied unit bin.
std::string histogram_table(const MetricSummary& summary);

}  // namespace replab
