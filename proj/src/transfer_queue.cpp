#include "replab/transfer_queue.hpp"

#include <stdexcept>

namespace replab {

TransferQueue::TransferQueue(std::optional<std::size_t> capacity) : capacity_(capacity) {
    if (capacity_ && *capacity_ == 0) {
        throw std::invalid_argument("TransferQueue: capacity must be positive");
    }
}

bool TransferQueue::push(const RolloutRecord& record) {
    std::lock_guard<std::mutex> lock(mutex_);
    if (capacity_ && stack_.size() >= *capacity_) {
        return false;
    }
    stack_.push_back(record);
    return true;
}

bool TransferQueue::push_group(const std::vector<RolloutRecord>& records) {
    std::lock_guard<std::mutex> lock(mutex_);
    if (capacity_ && stack_.size() + records.size() > *capacity_) {
        return false;
    }
    stack_.insert(stack_.end(), records.begin(), records.end());
    return true;
}

std::optional<RolloutRecord> TransferQueue::pop() {
    std::lock_guard<std::mutex> lock(mutex_);
    if (stack_.empty()) {
        return std::nullopt;
    }
    RolloutRecord r = stack_.back();
    stack_.pop_back();
    return r;
}

std::size_t TransferQueue::size() const {
    std::lock_guard<std::mutex> lock(mutex_);
    return stack_.size();
}

}  // namespace replab
