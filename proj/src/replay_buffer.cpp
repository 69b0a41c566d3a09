#include "replab/replay_buffer.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "replab/text_io.hpp"

namespace replab {

std::string to_string(SamplingStrategy s) {
    switch (s) {
        case SamplingStrategy::uniform_with_replacement:
            return "uniform_with_replacement";
        case SamplingStrategy::uniform_without_replacement:
            return "uniform_without_replacement";
        case SamplingStrategy::unused_first_without_replacement:
            return "unused_first_without_replacement";
    }
    throw std::logic_error("bad SamplingStrategy");
}

SamplingStrategy sampling_strategy_from_string(std::string_view s) {
    if (s == "uniform_with_replacement") {
        return SamplingStrategy::uniform_with_replacement;
    }
    if (s == "uniform_without_replacement") {
        return SamplingStrategy::uniform_without_replacement;
    }
    if (s == "unused_first_without_replacement") {
        return SamplingStrategy::unused_first_without_replacement;
    }
    throw std::invalid_argument("unknown sampling strategy: '" + std::string(s) + "'");
}

RetentionPolicy RetentionPolicy::plain_fifo() { return RetentionPolicy{}; }

RetentionPolicy RetentionPolicy::positive_bias(double delta) {
    if (!(delta >= 0.0) || !(delta <= 1.0)) {
        throw std::invalid_argument("RetentionPolicy: delta must be in [0, 1]");
    }
    RetentionPolicy r;
    r.kind = Kind::positive_bias;
    r.delta = delta;
    return r;
}

std::string to_string(const RetentionPolicy& r) {
    if (r.kind == RetentionPolicy::Kind::plain_fifo) {
        return "plain_fifo";
    }
    return "positive_bias delta=" + format_double(r.delta);
}

RetentionPolicy retention_policy_from_string(std::string_view s) {
    const std::string_view t = trim(s);
    if (t == "plain_fifo") {
        return RetentionPolicy::plain_fifo();
    }
    constexpr std::string_view kPrefix = "positive_bias delta=";
    if (t.substr(0, kPrefix.size()) == kPrefix) {
        return RetentionPolicy::positive_bias(parse_double(t.substr(kPrefix.size())));
    }
    throw std::invalid_argument("unknown retention policy: '" + std::string(s) + "'");
}

ShardedReplayBuffer::ShardedReplayBuffer(std::size_t num_shards, std::size_t total_capacity,
                                         SamplingStrategy strategy, RetentionPolicy retention)
    : total_capacity_(total_capacity),
      strategy_(strategy),
      retention_(retention),
      shards_(num_shards) {
    if (num_shards == 0) {
        throw std::invalid_argument("ShardedReplayBuffer: need at least one shard");
    }
    if (total_capacity == 0 || total_capacity % num_shards != 0) {
        throw std::invalid_argument(
            "ShardedReplayBuffer: capacity must be a positive multiple of the shard count");
    }
    shard_capacity_ = total_capacity / num_shards;
}

std::optional<RolloutRecord> ShardedReplayBuffer::push(const RolloutRecord& record) {
    std::lock_guard<std::mutex> lock(*mutex_);
    if (!present_ids_.insert(record.rollout_id).second) {
        throw std::invalid_argument("ShardedReplayBuffer: rollout id " +
                                    std::to_string(record.rollout_id) + " is already stored");
    }
    Shard& shard = shards_[route_cursor_];
    route_cursor_ = (route_cursor_ + 1) % shards_.size();
    std::optional<RolloutRecord> evicted = shard_push(shard, record);
    if (evicted.has_value()) {
        present_ids_.erase(evicted->rollout_id);
    }
    return evicted;
}

std::optional<RolloutRecord> ShardedReplayBuffer::shard_push(Shard& shard,
                                                             const RolloutRecord& record) {
    shard.records.push_back(record);
    if (shard.records.size() <= shard_capacity_) {
        return std::nullopt;
    }

    std::size_t victim = 0;
    if (retention_.kind == RetentionPolicy::Kind::positive_bias) {
        const auto n = shard_capacity_;
        // floor(delta*n) correctness-reserved slots; the epsilon guards
        // against representations like 0.7*10 = 6.999... .
        const auto correct_slots =
            static_cast<std::size_t>(std::floor(retention_.delta * static_cast<double>(n) + 1e-9));
        const std::size_t fresh_slots = n - correct_slots;
        // Records outside the fresh window: [0, outside). The excluded record
        // is the oldest non-fresh wrong record beyond the shortfall fill, or
        // the oldest record when every outside record is correct.
        const std::size_t outside = shard.records.size() - fresh_slots;
        bool found_wrong = false;
        for (std::size_t i = 0; i < outside; ++i) {
            if (!shard.records[i].is_correct) {
                victim = i;
                found_wrong = true;
                break;
            }
        }
        if (!found_wrong) {
            victim = 0;
        }
    }

    RolloutRecord evicted = shard.records[victim];
    shard.records.erase(shard.records.begin() + static_cast<std::ptrdiff_t>(victim));
    return evicted;
}

std::vector<std::size_t> ShardedReplayBuffer::pick_indices(const Shard& shard, std::size_t k,
                                                           Rng& rng) const {
    const std::size_t n = shard.records.size();
    std::vector<std::size_t> picks;
    picks.reserve(k);
    switch (strategy_) {
        case SamplingStrategy::uniform_with_replacement:
            for (std::size_t i = 0; i < k; ++i) {
                picks.push_back(static_cast<std::size_t>(rng.below(n)));
            }
            break;
        case SamplingStrategy::uniform_without_replacement: {
            if (k > n) {
                throw std::invalid_argument(
                    "ShardedReplayBuffer: batch exceeds shard occupancy for sampling "
                    "without replacement");
            }
            picks = rng.sample_without_replacement(n, k);
            break;
        }
        case SamplingStrategy::unused_first_without_replacement: {
            if (k > n) {
                throw std::invalid_argument(
                    "ShardedReplayBuffer: batch exceeds shard occupancy for sampling "
                    "without replacement");
            }
            for (std::size_t i = n; i-- > 0 && picks.size() < k;) {
                if (shard.records[i].use_count == 0) {
                    picks.push_back(i);
                }
            }
            if (picks.size() < k) {
                std::vector<std::size_t> used;
                for (std::size_t i = 0; i < n; ++i) {
                    if (shard.records[i].use_count != 0) {
                        used.push_back(i);
                    }
                }
                for (std::size_t j : rng.sample_without_replacement(used.size(),
                                                                    k - picks.size())) {
                    picks.push_back(used[j]);
                }
            }
            break;
        }
    }
    return picks;
}

std::vector<RolloutRecord> ShardedReplayBuffer::sample(std::size_t batch_size, Rng& rng,
                                                       MetricsLedger* ledger,
                                                       std::int64_t batch_id,
                                                       std::int64_t use_step) {
    std::lock_guard<std::mutex> lock(*mutex_);
    if (batch_size == 0 || batch_size % shards_.size() != 0) {
        throw std::invalid_argument(
            "ShardedReplayBuffer: batch size must be a positive multiple of the shard count");
    }
    const std::size_t per_shard = batch_size / shards_.size();
    std::vector<RolloutRecord> batch;
    batch.reserve(batch_size);
    for (Shard& shard : shards_) {
        if (shard.records.empty()) {
            throw std::invalid_argument("ShardedReplayBuffer: cannot sample from an empty shard");
        }
        for (std::size_t idx : pick_indices(shard, per_shard, rng)) {
            shard.records[idx].use_count += 1;
            batch.push_back(shard.records[idx]);
        }
    }
    if (ledger != nullptr) {
        for (std::size_t rank = 0; rank < batch.size(); ++rank) {
            UseEvent event;
            event.rollout_id = batch[rank].rollout_id;
            event.creation_step = batch[rank].creation_step;
            event.use_step = use_step;
            event.batch_id = batch_id;
            event.within_batch_rank = static_cast<std::int64_t>(rank);
            ledger->record_use(event);
        }
    }
    return batch;
}

std::size_t ShardedReplayBuffer::size() const {
    std::lock_guard<std::mutex> lock(*mutex_);
    std::size_t total = 0;
    for (const Shard& s : shards_) {
        total += s.records.size();
    }
    return total;
}

std::size_t ShardedReplayBuffer::shard_size(std::size_t shard) const {
    std::lock_guard<std::mutex> lock(*mutex_);
    return shards_.at(shard).records.size();
}

std::vector<RolloutRecord> ShardedReplayBuffer::shard_contents(std::size_t shard) const {
    std::lock_guard<std::mutex> lock(*mutex_);
    return shards_.at(shard).records;
}

std::string ShardedReplayBuffer::dump() const {
    std::lock_guard<std::mutex> lock(*mutex_);
    std::string out;
    out += "# sharded_replay_buffer v1\n";
    out += "# shards = " + std::to_string(shards_.size()) + "\n";
    out += "# capacity = " + std::to_string(total_capacity_) + "\n";
    out += "# strategy = " + to_string(strategy_) + "\n";
    out += "# retention = " + to_string(retention_) + "\n";
    out += "# route_cursor = " + std::to_string(route_cursor_) + "\n";
    for (std::size_t i = 0; i < shards_.size(); ++i) {
        out += "# shard " + std::to_string(i) + "\n";
        for (const RolloutRecord& r : shards_[i].records) {
            out += r.to_line();
            out += '\n';
        }
    }
    return out;
}

namespace {

std::string_view header_value(std::string_view line, std::string_view key) {
    // line looks like "# key = value"
    const std::size_t eq = line.find('=');
    if (eq == std::string_view::npos) {
        throw std::invalid_argument("buffer dump: malformed header line '" + std::string(line) +
                                    "'");
    }
    const std::string_view name = trim(line.substr(1, eq - 1));
    if (name != key) {
        throw std::invalid_argument("buffer dump: expected header '" + std::string(key) +
                                    "', got '" + std::string(name) + "'");
    }
    return trim(line.substr(eq + 1));
}

}  // namespace

ShardedReplayBuffer ShardedReplayBuffer::load(std::string_view text) {
    std::vector<std::string> lines;
    for (auto& line : split(text, '\n')) {
        if (!trim(line).empty()) {
            lines.push_back(std::string(trim(line)));
        }
    }
    if (lines.size() < 6 || lines[0] != "# sharded_replay_buffer v1") {
        throw std::invalid_argument("buffer dump: missing or unsupported header");
    }
    const auto num_shards = parse_uint64(header_value(lines[1], "shards"));
    const auto capacity = parse_uint64(header_value(lines[2], "capacity"));
    const auto strategy = sampling_strategy_from_string(header_value(lines[3], "strategy"));
    const auto retention = retention_policy_from_string(header_value(lines[4], "retention"));
    const auto route_cursor = parse_uint64(header_value(lines[5], "route_cursor"));

    ShardedReplayBuffer buf(num_shards, capacity, strategy, retention);
    if (route_cursor >= num_shards) {
        throw std::invalid_argument("buffer dump: route cursor out of range");
    }
    buf.route_cursor_ = route_cursor;

    std::size_t shard = 0;
    bool in_shard = false;
    for (std::size_t i = 6; i < lines.size(); ++i) {
        const std::string& line = lines[i];
        if (line.rfind("# shard ", 0) == 0) {
            shard = parse_uint64(std::string_view(line).substr(8));
            if (shard >= num_shards) {
                throw std::invalid_argument("buffer dump: shard index out of range");
            }
            in_shard = true;
            continue;
        }
        if (!in_shard) {
            throw std::invalid_argument("buffer dump: record before any shard marker");
        }
        Shard& s = buf.shards_[shard];
        s.records.push_back(RolloutRecord::from_line(line));
        if (s.records.size() > buf.shard_capacity_) {
            throw std::invalid_argument("buffer dump: shard exceeds capacity");
        }
        if (!buf.present_ids_.insert(s.records.back().rollout_id).second) {
            throw std::invalid_argument("buffer dump: duplicate rollout id " +
                                        std::to_string(s.records.back().rollout_id));
        }
    }
    return buf;
}

}  // namespace replab
