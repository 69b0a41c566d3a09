#include "replab/rollout.hpp"

#include <stdexcept>

#include "replab/text_io.hpp"

namespace replab {

std::string RolloutRecord::to_line() const {
    return join_csv({std::to_string(rollout_id), std::to_string(prompt_id),
                     std::to_string(group_id), std::to_string(creation_step),
                     std::to_string(policy_version), format_double(reward),
                     is_correct ? "1" : "0", format_double(behavior_logprob),
                     format_double(advantage), std::to_string(use_count)});
}

RolloutRecord RolloutRecord::from_line(std::string_view line) {
    const auto fields = split(line, ',');
    if (fields.size() != 10) {
        throw std::invalid_argument("RolloutRecord: expected 10 fields, got " +
                                    std::to_string(fields.size()));
    }
    RolloutRecord r;
    r.rollout_id = parse_uint64(fields[0]);
    r.prompt_id = parse_uint64(fields[1]);
    r.group_id = parse_uint64(fields[2]);
    r.creation_step = parse_int64(fields[3]);
    r.policy_version = parse_int64(fields[4]);
    r.reward = parse_double(fields[5]);
    r.is_correct = parse_bool(fields[6]);
    r.behavior_logprob = parse_double(fields[7]);
    r.advantage = parse_double(fields[8]);
    r.use_count = static_cast<uint32_t>(parse_uint64(fields[9]));
    return r;
}

}  // namespace replab
