#pragma once

#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "replab/metrics.hpp"
#include "replab/rng.hpp"
#include "replab/rollout.hpp"

namespace replab {

// How sample() picks records inside one shard.
enum class SamplingStrategy {
    uniform_with_replacement,
    uniform_without_replacement,
    // Never-used records first (freshest first), remainder uniform without
    // replacement among the already-used ones.
    unused_first_without_replacement,
};

std::string to_string(SamplingStrategy s);
SamplingStrategy sampling_strategy_from_string(std::string_view s);

// What a full shard evicts on push.
//
// plain_fifo evicts the oldest record. positive_bias(delta) keeps the
// ceil((1-delta)*n) freshest arrivals unconditionally, fills the remaining
// floor(delta*n) slots with the freshest correct records outside that fresh
// window, and covers any shortfall with the freshest remaining records
// regardless of correctness. delta = 0 reduces to plain FIFO.
struct RetentionPolicy {
    enum class Kind { plain_fifo, positive_bias };

    static RetentionPolicy plain_fifo();
    static RetentionPolicy positive_bias(double delta);

    Kind kind = Kind::plain_fifo;
    double delta = 0.0;
};

std::string to_string(const RetentionPolicy& r);
RetentionPolicy retention_policy_from_string(std::string_view s);

// Fixed-capacity replay store split into per-trainer shards.
//
// push() routes records round-robin across shards and returns the record the
// shard's retention policy evicted, if any. sample() is non-consuming: it
// draws batch_size/num_shards records from every shard with the configured
// strategy, increments their use counts, and returns immutable copies in
// shard-major draw order. With a fixed rng seed the full push/sample trace
// is bit-identical across runs. Operations are atomic with respect to each
// other (single total order).
class ShardedReplayBuffer {
public:
    ShardedReplayBuffer(std::size_t num_shards, std::size_t total_capacity,
                        SamplingStrategy strategy, RetentionPolicy retention);

    // Rejects a rollout_id already held by any shard (evicted ids may recur).
    std::optional<RolloutRecord> push(const RolloutRecord& record);

    // batch_size must be a positive multiple of num_shards; without
    // replacement it must not exceed any shard's occupancy. When a ledger is
    // given, one UseEvent per selection is appended with within_batch_rank =
    // selection order inside the returned batch.
    std::vector<RolloutRecord> sample(std::size_t batch_size, Rng& rng,
                                      MetricsLedger* ledger = nullptr,
                                      std::int64_t batch_id = 0,
                                      std::int64_t use_step = 0);

    std::size_t num_shards() const { return shards_.size(); }
    std::size_t total_capacity() const { return total_capacity_; }
    std::size_t shard_capacity() const { return shard_capacity_; }
    std::size_t size() const;
    std::size_t shard_size(std::size_t shard) const;

    // Copies of one shard's records, oldest arrival first.
    std::vector<RolloutRecord> shard_contents(std::size_t shard) const;

    SamplingStrategy strategy() const { return strategy_; }
    const RetentionPolicy& retention() const { return retention_; }

    // Text round trip: record lines grouped under '# shard i' separators with
    // a commented header carrying the buffer config and the routing cursor.
    std::string dump() const;
    static ShardedReplayBuffer load(std::string_view text);

private:
    struct Shard {
        std::vector<RolloutRecord> records;  // arrival order, oldest first
    };

    std::optional<RolloutRecord> shard_push(Shard& shard, const RolloutRecord& record);
    std::vector<std::size_t> pick_indices(const Shard& shard, std::size_t k, Rng& rng) const;

    std::size_t total_capacity_;
    std::size_t shard_capacity_;
    SamplingStrategy strategy_;
    RetentionPolicy retention_;
    std::vector<Shard> shards_;
    std::unordered_set<uint64_t> present_ids_;
    std::size_t route_cursor_ = 0;
    // Behind a pointer so the buffer stays movable (load() returns by value).
    mutable std::unique_ptr<std::mutex> mutex_ = std::make_unique<std::mutex>();
};

}  // namespace replab
