#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace replab {

// One generated rollout. `creation_step` is the global optimizer-step count
// when the record entered the pipeline; `policy_version` is the weight
// version it was generated with (these differ when weight sync is delayed).
// `use_count` counts how many times sampling has returned the record.
struct RolloutRecord {
    uint64_t rollout_id = 0;
    uint64_t prompt_id = 0;
    uint64_t group_id = 0;
    int64_t creation_step = 0;
    int64_t policy_version = 0;
    double reward = 0.0;
    bool is_correct = false;
    double behavior_logprob = 0.0;
    double advantage = 0.0;
    uint32_t use_count = 0;

    // Comma-separated line with the fields in declaration order. Floats use
    // shortest round-trip formatting, so serialize/parse is exact.
    std::string to_line() const;
    static RolloutRecord from_line(std::string_view line);

    bool operator==(const RolloutRecord&) const = default;
};

}  // namespace replab
