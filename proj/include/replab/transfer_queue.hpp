#pragma once

#include <mutex>
#include <optional>
#include <vector>

#include "replab/rollout.hpp"

namespace replab {

// Consume-once LIFO hand-off between generators and the trainer: pop returns
// the most recently pushed record and removes it. A bounded queue refuses
// pushes that would overflow (back-pressure); capacity nullopt = unbounded.
// Operations are atomic with respect to each other.
class TransferQueue {
public:
    explicit TransferQueue(std::optional<std::size_t> capacity = std::nullopt);

    // false = queue full (record not enqueued).
    bool push(const RolloutRecord& record);

    // All-or-nothing group push: either every record fits or none is added.
    bool push_group(const std::vector<RolloutRecord>& records);

    // nullopt = queue empty.
    std::optional<RolloutRecord> pop();

    std::size_t size() const;
    std::optional<std::size_t> capacity() const { return capacity_; }

private:
    std::optional<std::size_t> capacity_;
    std::vector<RolloutRecord> stack_;
    mutable std::mutex mutex_;
};

}  // namespace replab
