#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "replab/metrics.hpp"
#include "replab/replay_buffer.hpp"
#include "replab/rng.hpp"
#include "replab/rollout.hpp"

using namespace replab;

namespace {

RolloutRecord make_record(std::uint64_t id, bool correct = true, std::int64_t creation_step = 0) {
    RolloutRecord r;
    r.rollout_id = id;
    r.prompt_id = static_cast<std::int64_t>(id % 7);
    r.group_id = static_cast<std::int64_t>(id / 4);
    r.creation_step = creation_step;
    r.policy_version = creation_step;
    r.reward = correct ? 1.0 : 0.0;
    r.is_correct = correct;
    r.behavior_logprob = -1.25 - 0.001 * static_cast<double>(id);
    r.advantage = correct ? 0.5 : -0.5;
    r.use_count = 0;
    return r;
}

std::vector<std::uint64_t> ids_of(const std::vector<RolloutRecord>& records) {
    std::vector<std::uint64_t> ids;
    ids.reserve(records.size());
    for (const RolloutRecord& r : records) {
        ids.push_back(r.rollout_id);
    }
    return ids;
}

// Reference answer computed from the complete arrival history: keep the
// fresh-window records unconditionally, then the freshest correct arrivals
// outside that window, then (if not enough correct ones exist) the freshest
// remaining arrivals regardless of correctness. Returns ids in arrival order.
std::vector<std::uint64_t> retained_reference(
    const std::vector<std::pair<std::uint64_t, bool>>& history, std::size_t cap, double delta) {
    const std::size_t n = history.size();
    std::vector<std::uint64_t> out;
    if (n <= cap) {
        for (const auto& [id, correct] : history) {
            (void)correct;
            out.push_back(id);
        }
        return out;
    }
    const auto correct_slots =
        static_cast<std::size_t>(std::floor(delta * static_cast<double>(cap) + 1e-9));
    const std::size_t fresh_slots = cap - correct_slots;
    std::set<std::size_t> keep;
    for (std::size_t i = n - fresh_slots; i < n; ++i) {
        keep.insert(i);
    }
    std::size_t taken = 0;
    for (std::size_t i = n - fresh_slots; i-- > 0 && taken < correct_slots;) {
        if (history[i].second) {
            keep.insert(i);
            ++taken;
        }
    }
    for (std::size_t i = n - fresh_slots; i-- > 0 && keep.size() < cap;) {
        keep.insert(i);
    }
    for (std::size_t i : keep) {
        out.push_back(history[i].first);
    }
    return out;
}

}  // namespace

TEST_CASE("constructor rejects bad shard/capacity combinations") {
    CHECK_THROWS_AS(ShardedReplayBuffer(0, 4, SamplingStrategy::uniform_with_replacement,
                                        RetentionPolicy::plain_fifo()),
                    std::invalid_argument);
    CHECK_THROWS_AS(ShardedReplayBuffer(2, 0, SamplingStrategy::uniform_with_replacement,
                                        RetentionPolicy::plain_fifo()),
                    std::invalid_argument);
    CHECK_THROWS_AS(ShardedReplayBuffer(3, 8, SamplingStrategy::uniform_with_replacement,
                                        RetentionPolicy::plain_fifo()),
                    std::invalid_argument);
    CHECK_THROWS_AS(RetentionPolicy::positive_bias(1.5), std::invalid_argument);
    CHECK_THROWS_AS(RetentionPolicy::positive_bias(-0.1), std::invalid_argument);
}

TEST_CASE("FIFO eviction: capacity-3 shard holding a,b,c evicts a when d arrives") {
    ShardedReplayBuffer buf(1, 3, SamplingStrategy::uniform_with_replacement,
                            RetentionPolicy::plain_fifo());
    CHECK_FALSE(buf.push(make_record(1)).has_value());
    CHECK_FALSE(buf.push(make_record(2)).has_value());
    CHECK_FALSE(buf.push(make_record(3)).has_value());
    const auto evicted = buf.push(make_record(4));
    REQUIRE(evicted.has_value());
    CHECK(evicted->rollout_id == 1);
    CHECK(ids_of(buf.shard_contents(0)) == std::vector<std::uint64_t>{2, 3, 4});
    CHECK(buf.size() == 3);
}

TEST_CASE("round-robin routing balances shards") {
    SUBCASE("two shards split odd/even arrivals") {
        ShardedReplayBuffer buf(2, 6, SamplingStrategy::uniform_with_replacement,
                                RetentionPolicy::plain_fifo());
        for (std::uint64_t id = 1; id <= 6; ++id) {
            buf.push(make_record(id));
        }
        CHECK(ids_of(buf.shard_contents(0)) == std::vector<std::uint64_t>{1, 3, 5});
        CHECK(ids_of(buf.shard_contents(1)) == std::vector<std::uint64_t>{2, 4, 6});
    }
    SUBCASE("one shard receives everything") {
        ShardedReplayBuffer buf(1, 16, SamplingStrategy::uniform_with_replacement,
                                RetentionPolicy::plain_fifo());
        for (std::uint64_t id = 1; id <= 9; ++id) {
            buf.push(make_record(id));
        }
        CHECK(buf.shard_size(0) == 9);
    }
    SUBCASE("three shards end up equally sized after nine arrivals") {
        ShardedReplayBuffer buf(3, 30, SamplingStrategy::uniform_with_replacement,
                                RetentionPolicy::plain_fifo());
        for (std::uint64_t id = 1; id <= 9; ++id) {
            buf.push(make_record(id));
        }
        for (std::size_t s = 0; s < 3; ++s) {
            CHECK(buf.shard_size(s) == 3);
        }
    }
}

TEST_CASE("plain FIFO matches a reference deque on a random multi-shard trace") {
    Rng rng(2024);
    for (std::size_t shards : {std::size_t{1}, std::size_t{3}}) {
        const std::size_t per_shard = 4;
        ShardedReplayBuffer buf(shards, shards * per_shard,
                                SamplingStrategy::uniform_with_replacement,
                                RetentionPolicy::plain_fifo());
        std::vector<std::deque<std::uint64_t>> reference(shards);
        for (std::uint64_t id = 0; id < 100; ++id) {
            const std::size_t target = static_cast<std::size_t>(id) % shards;
            const auto evicted = buf.push(make_record(id, rng.uniform01() < 0.5));
            std::deque<std::uint64_t>& shard_ref = reference[target];
            if (shard_ref.size() == per_shard) {
                REQUIRE(evicted.has_value());
                CHECK(evicted->rollout_id == shard_ref.front());
                shard_ref.pop_front();
            } else {
                CHECK_FALSE(evicted.has_value());
            }
            shard_ref.push_back(id);
            for (std::size_t s = 0; s < shards; ++s) {
                CHECK(ids_of(buf.shard_contents(s)) ==
                      std::vector<std::uint64_t>(reference[s].begin(), reference[s].end()));
            }
        }
    }
}

TEST_CASE("positive-bias retention keeps the documented capacity-8 example set") {
    // Arrival order oldest -> newest, ids 9 down to 0 (id k = k-th newest at
    // the end). Correctness flags follow the worked trace; delta = 0.75.
    const std::vector<std::pair<std::uint64_t, bool>> arrivals = {
        {9, false}, {8, true}, {7, true},  {6, false}, {5, true},
        {4, true},  {3, false}, {2, true}, {1, false}, {0, false},
    };
    ShardedReplayBuffer buf(1, 8, SamplingStrategy::uniform_with_replacement,
                            RetentionPolicy::positive_bias(0.75));
    for (const auto& [id, correct] : arrivals) {
        buf.push(make_record(id, correct));
    }
    CHECK(ids_of(buf.shard_contents(0)) == std::vector<std::uint64_t>{8, 7, 5, 4, 3, 2, 1, 0});
}

TEST_CASE("positive-bias retention matches the full-history reference on random streams") {
    Rng rng(99);
    const double deltas[] = {0.0, 0.25, 1.0 / 3.0, 0.5, 0.6, 0.75, 1.0};
    const std::size_t caps[] = {1, 2, 3, 4, 8};
    for (double delta : deltas) {
        for (std::size_t cap : caps) {
            for (double p_correct : {0.2, 0.5, 0.8}) {
                ShardedReplayBuffer buf(1, cap, SamplingStrategy::uniform_with_replacement,
                                        RetentionPolicy::positive_bias(delta));
                std::vector<std::pair<std::uint64_t, bool>> history;
                for (std::uint64_t id = 0; id < 6 * cap + 7; ++id) {
                    const bool correct = rng.uniform01() < p_correct;
                    history.emplace_back(id, correct);
                    buf.push(make_record(id, correct));
                    const auto got = ids_of(buf.shard_contents(0));
                    const auto want = retained_reference(history, cap, delta);
                    REQUIRE_MESSAGE(got == want,
                                    "delta=", delta, " cap=", cap, " after id ", id);
                }
            }
        }
    }
}

TEST_CASE("positive-bias invariants: fresh window always retained, rest correct when possible") {
    Rng rng(5150);
    const std::size_t cap = 6;
    const double delta = 0.5;
    const auto correct_slots =
        static_cast<std::size_t>(std::floor(delta * static_cast<double>(cap) + 1e-9));
    const std::size_t fresh_slots = cap - correct_slots;
    ShardedReplayBuffer buf(1, cap, SamplingStrategy::uniform_with_replacement,
                            RetentionPolicy::positive_bias(delta));
    std::vector<std::pair<std::uint64_t, bool>> history;
    for (std::uint64_t id = 0; id < 80; ++id) {
        const bool correct = rng.uniform01() < 0.4;
        history.emplace_back(id, correct);
        buf.push(make_record(id, correct));
        if (history.size() <= cap) {
            continue;
        }
        const auto contents = buf.shard_contents(0);
        const auto retained_ids = ids_of(contents);
        std::set<std::uint64_t> retained(retained_ids.begin(), retained_ids.end());
        std::size_t correct_outside = 0;
        for (std::size_t i = 0; i + fresh_slots < history.size(); ++i) {
            correct_outside += history[i].second ? 1 : 0;
        }
        for (std::size_t i = history.size() - fresh_slots; i < history.size(); ++i) {
            CHECK(retained.count(history[i].first) == 1);
        }
        if (correct_outside >= correct_slots) {
            for (const RolloutRecord& r : contents) {
                if (r.rollout_id + fresh_slots < history.size()) {
                    CHECK(r.is_correct);
                }
            }
        }
    }
}

TEST_CASE("positive-bias with delta=0 behaves exactly like plain FIFO") {
    ShardedReplayBuffer biased(1, 4, SamplingStrategy::uniform_with_replacement,
                               RetentionPolicy::positive_bias(0.0));
    ShardedReplayBuffer fifo(1, 4, SamplingStrategy::uniform_with_replacement,
                             RetentionPolicy::plain_fifo());
    Rng rng(7);
    for (std::uint64_t id = 0; id < 40; ++id) {
        const bool correct = rng.uniform01() < 0.5;
        const auto a = biased.push(make_record(id, correct));
        const auto b = fifo.push(make_record(id, correct));
        CHECK(a == b);
        CHECK(ids_of(biased.shard_contents(0)) == ids_of(fifo.shard_contents(0)));
    }
}

TEST_CASE("duplicate rollout ids are rejected until the original is evicted") {
    ShardedReplayBuffer buf(1, 2, SamplingStrategy::uniform_with_replacement,
                            RetentionPolicy::plain_fifo());
    buf.push(make_record(10));
    CHECK_THROWS_AS(buf.push(make_record(10)), std::invalid_argument);
    buf.push(make_record(11));
    const auto evicted = buf.push(make_record(12));  // evicts 10
    REQUIRE(evicted.has_value());
    CHECK(evicted->rollout_id == 10);
    CHECK_NOTHROW(buf.push(make_record(10)));  // evicted id may recur
    CHECK_THROWS_AS(buf.push(make_record(12)), std::invalid_argument);
}

TEST_CASE("sampling a singleton shard with replacement returns the record three times") {
    ShardedReplayBuffer buf(1, 4, SamplingStrategy::uniform_with_replacement,
                            RetentionPolicy::plain_fifo());
    buf.push(make_record(42));
    Rng rng(1);
    const auto batch = buf.sample(3, rng);
    REQUIRE(batch.size() == 3);
    for (const RolloutRecord& r : batch) {
        CHECK(r.rollout_id == 42);
    }
}

TEST_CASE("sampling all records without replacement yields a permutation") {
    ShardedReplayBuffer buf(1, 10, SamplingStrategy::uniform_without_replacement,
                            RetentionPolicy::plain_fifo());
    for (std::uint64_t id = 0; id < 10; ++id) {
        buf.push(make_record(id));
    }
    Rng rng(3);
    const auto batch = buf.sample(10, rng);
    auto ids = ids_of(batch);
    std::sort(ids.begin(), ids.end());
    CHECK(ids == std::vector<std::uint64_t>{0, 1, 2, 3, 4, 5, 6, 7, 8, 9});
}

TEST_CASE("uniform sampling hits each of 100 records with frequency 0.01 +- 0.003") {
    ShardedReplayBuffer buf(1, 100, SamplingStrategy::uniform_with_replacement,
                            RetentionPolicy::plain_fifo());
    for (std::uint64_t id = 0; id < 100; ++id) {
        buf.push(make_record(id));
    }
    Rng rng(12345);
    std::map<std::uint64_t, std::size_t> counts;
    const std::size_t draws = 100000;
    for (std::size_t i = 0; i < draws; ++i) {
        counts[buf.sample(1, rng).front().rollout_id] += 1;
    }
    REQUIRE(counts.size() == 100);
    for (const auto& [id, count] : counts) {
        const double freq = static_cast<double>(count) / static_cast<double>(draws);
        CHECK_MESSAGE(std::abs(freq - 0.01) <= 0.003, "record ", id, " frequency ", freq);
    }
}

TEST_CASE("sampling increments use counts but never mutates payloads or contents") {
    ShardedReplayBuffer buf(2, 8, SamplingStrategy::uniform_with_replacement,
                            RetentionPolicy::plain_fifo());
    std::vector<RolloutRecord> originals;
    for (std::uint64_t id = 0; id < 8; ++id) {
        RolloutRecord r = make_record(id, id % 2 == 0);
        originals.push_back(r);
        buf.push(r);
    }
    Rng rng(8);
    const std::size_t rounds = 5;
    for (std::size_t i = 0; i < rounds; ++i) {
        (void)buf.sample(4, rng);
    }
    CHECK(buf.size() == 8);
    std::uint64_t total_uses = 0;
    for (std::size_t s = 0; s < 2; ++s) {
        for (const RolloutRecord& r : buf.shard_contents(s)) {
            total_uses += r.use_count;
            RolloutRecord zeroed = r;
            zeroed.use_count = 0;
            CHECK(zeroed == originals[r.rollout_id]);
        }
    }
    CHECK(total_uses == rounds * 4);
}

TEST_CASE("sample argument validation") {
    ShardedReplayBuffer buf(2, 8, SamplingStrategy::uniform_without_replacement,
                            RetentionPolicy::plain_fifo());
    Rng rng(5);
    buf.push(make_record(1));
    // second shard still empty
    CHECK_THROWS_AS(buf.sample(2, rng), std::invalid_argument);
    buf.push(make_record(2));
    CHECK_THROWS_AS(buf.sample(0, rng), std::invalid_argument);
    CHECK_THROWS_AS(buf.sample(3, rng), std::invalid_argument);  // not a multiple of shards
    CHECK_THROWS_AS(buf.sample(4, rng), std::invalid_argument);  // exceeds shard occupancy
    CHECK_NOTHROW(buf.sample(2, rng));
}

TEST_CASE("unused-first sampling prefers never-used records, freshest first") {
    ShardedReplayBuffer buf(1, 8, SamplingStrategy::unused_first_without_replacement,
                            RetentionPolicy::plain_fifo());
    for (std::uint64_t id = 1; id <= 5; ++id) {
        buf.push(make_record(id));
    }
    Rng rng(17);
    CHECK(ids_of(buf.sample(2, rng)) == std::vector<std::uint64_t>{5, 4});
    CHECK(ids_of(buf.sample(2, rng)) == std::vector<std::uint64_t>{3, 2});
    // One never-used record (id 1) remains; the rest of the batch is drawn
    // without replacement from the used ones.
    const auto batch = ids_of(buf.sample(4, rng));
    REQUIRE(batch.size() == 4);
    CHECK(batch.front() == 1);
    std::set<std::uint64_t> rest(batch.begin() + 1, batch.end());
    CHECK(rest.size() == 3);
    for (std::uint64_t id : rest) {
        CHECK(id >= 2);
        CHECK(id <= 5);
    }
}

TEST_CASE("sampling with a ledger appends one event per selection in batch order") {
    ShardedReplayBuffer buf(2, 8, SamplingStrategy::uniform_with_replacement,
                            RetentionPolicy::plain_fifo());
    for (std::uint64_t id = 0; id < 6; ++id) {
        buf.push(make_record(id, true, 3));
    }
    MetricsLedger ledger;
    Rng rng(2);
    const auto batch = buf.sample(4, rng, &ledger, /*batch_id=*/7, /*use_step=*/9);
    REQUIRE(ledger.events().size() == 4);
    for (std::size_t i = 0; i < batch.size(); ++i) {
        const UseEvent& e = ledger.events()[i];
        CHECK(e.rollout_id == batch[i].rollout_id);
        CHECK(e.creation_step == 3);
        CHECK(e.use_step == 9);
        CHECK(e.batch_id == 7);
        CHECK(e.within_batch_rank == static_cast<std::int64_t>(i));
    }
}

TEST_CASE("identical seeds reproduce the full push/sample trace bit for bit") {
    auto run = [] {
        ShardedReplayBuffer buf(2, 12, SamplingStrategy::uniform_without_replacement,
                                RetentionPolicy::positive_bias(0.5));
        Rng rng(404);
        std::string trace;
        for (std::uint64_t id = 0; id < 60; ++id) {
            const auto evicted = buf.push(make_record(id, id % 3 != 0));
            trace += evicted.has_value() ? evicted->to_line() : "none";
            trace += '\n';
            if (id >= 6 && id % 5 == 0) {
                for (const RolloutRecord& r : buf.sample(4, rng)) {
                    trace += r.to_line();
                    trace += '\n';
                }
            }
        }
        return trace + buf.dump();
    };
    CHECK(run() == run());
}

TEST_CASE("dump/load round trip preserves contents, config, and routing cursor") {
    ShardedReplayBuffer buf(2, 8, SamplingStrategy::unused_first_without_replacement,
                            RetentionPolicy::positive_bias(0.25));
    for (std::uint64_t id = 0; id < 5; ++id) {  // odd count leaves the cursor mid-cycle
        buf.push(make_record(id, id % 2 == 0, 1));
    }
    Rng rng(6);
    (void)buf.sample(2, rng);  // non-zero use counts must survive the round trip

    const std::string text = buf.dump();
    ShardedReplayBuffer loaded = ShardedReplayBuffer::load(text);
    CHECK(loaded.dump() == text);
    CHECK(loaded.num_shards() == 2);
    CHECK(loaded.total_capacity() == 8);
    CHECK(loaded.strategy() == SamplingStrategy::unused_first_without_replacement);
    CHECK(loaded.retention().kind == RetentionPolicy::Kind::positive_bias);
    CHECK(loaded.retention().delta == 0.25);
    for (std::size_t s = 0; s < 2; ++s) {
        CHECK(buf.shard_contents(s) == loaded.shard_contents(s));
    }

    // Both buffers route the next push to the same shard.
    buf.push(make_record(100));
    loaded.push(make_record(100));
    for (std::size_t s = 0; s < 2; ++s) {
        CHECK(ids_of(buf.shard_contents(s)) == ids_of(loaded.shard_contents(s)));
    }
}

TEST_CASE("load rejects corrupted dumps") {
    CHECK_THROWS_AS(ShardedReplayBuffer::load("not a dump"), std::invalid_argument);

    ShardedReplayBuffer buf(2, 4, SamplingStrategy::uniform_with_replacement,
                            RetentionPolicy::plain_fifo());
    buf.push(make_record(1));
    buf.push(make_record(2));
    const std::string good = buf.dump();

    SUBCASE("duplicate rollout id") {
        std::string text = good;
        const std::string line = make_record(1).to_line();
        text += line + "\n";  // shard 1 already ends the dump; id 1 repeats
        CHECK_THROWS_WITH_AS(ShardedReplayBuffer::load(text),
                             doctest::Contains("duplicate rollout id"), std::invalid_argument);
    }
    SUBCASE("route cursor out of range") {
        std::string text = good;
        const std::string needle = "# route_cursor = 0";
        text.replace(text.find(needle), needle.size(), "# route_cursor = 5");
        CHECK_THROWS_AS(ShardedReplayBuffer::load(text), std::invalid_argument);
    }
    SUBCASE("shard over capacity") {
        std::string text = good;
        text += make_record(7).to_line() + "\n";
        text += make_record(8).to_line() + "\n";
        CHECK_THROWS_WITH_AS(ShardedReplayBuffer::load(text),
                             doctest::Contains("capacity"), std::invalid_argument);
    }
}

TEST_CASE("strategy and retention names round-trip through their string forms") {
    for (SamplingStrategy s : {SamplingStrategy::uniform_with_replacement,
                               SamplingStrategy::uniform_without_replacement,
                               SamplingStrategy::unused_first_without_replacement}) {
        CHECK(sampling_strategy_from_string(to_string(s)) == s);
    }
    CHECK_THROWS_AS(sampling_strategy_from_string("bogus"), std::invalid_argument);
    const RetentionPolicy pb = RetentionPolicy::positive_bias(0.375);
    const RetentionPolicy parsed = retention_policy_from_string(to_string(pb));
    CHECK(parsed.kind == RetentionPolicy::Kind::positive_bias);
    CHECK(parsed.delta == 0.375);
    CHECK(retention_policy_from_string("plain_fifo").kind == RetentionPolicy::Kind::plain_fifo);
    CHECK_THROWS_AS(retention_policy_from_string("bogus"), std::invalid_argument);
}
