#include "replab/bandit.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <iostream>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "replab/compute_model.hpp"
#include "replab/replay_buffer.hpp"
#include "replab/sgd_lab.hpp"
#include "replab/text_io.hpp"
#include "replab/transfer_queue.hpp"

namespace replab {

namespace {

void check_prompt_arm(const char* who, std::size_t prompt, std::size_t num_prompts,
                      std::size_t arm, std::size_t num_arms) {
    if (prompt >= num_prompts) {
        throw std::invalid_argument(std::string(who) + ": prompt " +
                                    std::to_string(prompt) + " out of range (have " +
                                    std::to_string(num_prompts) + ")");
    }
    if (arm >= num_arms) {
        throw std::invalid_argument(std::string(who) + ": arm " + std::to_string(arm) +
                                    " out of range (have " + std::to_string(num_arms) + ")");
    }
}

}  // namespace

void BanditTask::validate() const {
    if (num_prompts == 0 || num_arms < 2) {
        throw std::invalid_argument("bandit task needs >= 1 prompt and >= 2 arms");
    }
    if (correct.size() != num_prompts) {
        throw std::invalid_argument("bandit task: correct table has " +
                                    std::to_string(correct.size()) + " rows, expected " +
                                    std::to_string(num_prompts));
    }
    for (std::size_t p = 0; p < num_prompts; ++p) {
        if (correct[p].size() != num_arms) {
            throw std::invalid_argument("bandit task: prompt " + std::to_string(p) +
                                        " row has " + std::to_string(correct[p].size()) +
                                        " arms, expected " + std::to_string(num_arms));
        }
        const auto hits = static_cast<std::size_t>(
            std::count(correct[p].begin(), correct[p].end(), true));
        if (hits == 0 || hits == num_arms) {
            throw std::invalid_argument(
                "bandit task: prompt " + std::to_string(p) +
                " needs at least one correct and one incorrect arm");
        }
    }
}

bool BanditTask::is_correct(std::size_t prompt, std::size_t arm) const {
    check_prompt_arm("bandit task", prompt, num_prompts, arm, num_arms);
    return correct[prompt][arm];
}

double BanditTask::reward(std::size_t prompt, std::size_t arm) const {
    return is_correct(prompt, arm) ? 1.0 : 0.0;
}

BanditTask BanditTask::random(std::size_t prompts, std::size_t arms,
                              std::size_t correct_per_prompt, Rng& rng) {
    if (prompts == 0 || arms < 2) {
        throw std::invalid_argument("random bandit task needs >= 1 prompt and >= 2 arms");
    }
    if (correct_per_prompt == 0 || correct_per_prompt >= arms) {
        throw std::invalid_argument(
            "random bandit task: correct_per_prompt must be in [1, arms-1], got " +
            std::to_string(correct_per_prompt));
    }
    BanditTask task;
    task.num_prompts = prompts;
    task.num_arms = arms;
    task.correct.assign(prompts, std::vector<bool>(arms, false));
    for (std::size_t p = 0; p < prompts; ++p) {
        for (std::size_t arm : rng.sample_without_replacement(arms, correct_per_prompt)) {
            task.correct[p][arm] = true;
        }
    }
    return task;
}

std::string BanditTask::to_text() const {
    validate();
    std::string out = "# bandit_task v1\n";
    out += "prompts " + std::to_string(num_prompts) + "\n";
    out += "arms " + std::to_string(num_arms) + "\n";
    for (std::size_t p = 0; p < num_prompts; ++p) {
        out += "correct " + std::to_string(p) + ":";
        for (std::size_t a = 0; a < num_arms; ++a) {
            if (correct[p][a]) out += " " + std::to_string(a);
        }
        out += "\n";
    }
    return out;
}

BanditTask BanditTask::from_text(std::string_view text) {
    std::vector<std::string> lines;
    for (const auto& raw : split(text, '\n')) {
        auto t = trim(raw);
        if (!t.empty()) lines.emplace_back(t);
    }
    std::size_t pos = 0;
    auto next_line = [&](const std::string& what) -> std::string {
        if (pos >= lines.size()) {
            throw std::invalid_argument("bandit task text ended before " + what);
        }
        return lines[pos++];
    };
    if (next_line("header") != "# bandit_task v1") {
        throw std::invalid_argument("bandit task text: missing '# bandit_task v1' header");
    }
    auto keyed_value = [&](const std::string& key) -> uint64_t {
        const std::string line = next_line("'" + key + "' line");
        if (line.rfind(key + " ", 0) != 0) {
            throw std::invalid_argument("bandit task text: expected '" + key +
                                        " <n>', got '" + line + "'");
        }
        return parse_uint64(trim(std::string_view(line).substr(key.size() + 1)));
    };
    BanditTask task;
    task.num_prompts = keyed_value("prompts");
    task.num_arms = keyed_value("arms");
    task.correct.assign(task.num_prompts, std::vector<bool>(task.num_arms, false));
    for (std::size_t p = 0; p < task.num_prompts; ++p) {
        const std::string line = next_line("correct line for prompt " + std::to_string(p));
        const std::string prefix = "correct " + std::to_string(p) + ":";
        if (line.rfind(prefix, 0) != 0) {
            throw std::invalid_argument("bandit task text: expected '" + prefix +
                                        " ...', got '" + line + "'");
        }
        std::istringstream rest{line.substr(prefix.size())};
        std::string field;
        while (rest >> field) {
            const uint64_t arm = parse_uint64(field);
            if (arm >= task.num_arms) {
                throw std::invalid_argument("bandit task text: arm " + field +
                                            " out of range on prompt " + std::to_string(p));
            }
            task.correct[p][arm] = true;
        }
    }
    if (pos != lines.size()) {
        throw std::invalid_argument("bandit task text: trailing content '" + lines[pos] + "'");
    }
    task.validate();
    return task;
}

SoftmaxPolicy SoftmaxPolicy::uniform(std::size_t prompts, std::size_t arms) {
    if (prompts == 0 || arms == 0) {
        throw std::invalid_argument("softmax policy needs >= 1 prompt and >= 1 arm");
    }
    SoftmaxPolicy policy;
    policy.num_prompts = prompts;
    policy.num_arms = arms;
    policy.logits.assign(prompts * arms, 0.0);
    return policy;
}

double SoftmaxPolicy::logit(std::size_t prompt, std::size_t arm) const {
    check_prompt_arm("softmax policy", prompt, num_prompts, arm, num_arms);
    return logits[prompt * num_arms + arm];
}

double& SoftmaxPolicy::logit(std::size_t prompt, std::size_t arm) {
    check_prompt_arm("softmax policy", prompt, num_prompts, arm, num_arms);
    return logits[prompt * num_arms + arm];
}

std::vector<double> SoftmaxPolicy::probs(std::size_t prompt, double temperature) const {
    check_prompt_arm("softmax policy", prompt, num_prompts, 0, num_arms);
    if (!(temperature > 0.0) || !std::isfinite(temperature)) {
        throw std::invalid_argument("softmax temperature must be positive and finite");
    }
    const double* row = logits.data() + prompt * num_arms;
    double max_scaled = -std::numeric_limits<double>::infinity();
    for (std::size_t a = 0; a < num_arms; ++a) {
        max_scaled = std::max(max_scaled, row[a] / temperature);
    }
    std::vector<double> p(num_arms);
    double total = 0.0;
    for (std::size_t a = 0; a < num_arms; ++a) {
        p[a] = std::exp(row[a] / temperature - max_scaled);
        total += p[a];
    }
    for (double& v : p) v /= total;
    return p;
}

double SoftmaxPolicy::logprob(std::size_t prompt, std::size_t arm, double temperature) const {
    check_prompt_arm("softmax policy", prompt, num_prompts, arm, num_arms);
    if (!(temperature > 0.0) || !std::isfinite(temperature)) {
        throw std::invalid_argument("softmax temperature must be positive and finite");
    }
    const double* row = logits.data() + prompt * num_arms;
    double max_scaled = -std::numeric_limits<double>::infinity();
    for (std::size_t a = 0; a < num_arms; ++a) {
        max_scaled = std::max(max_scaled, row[a] / temperature);
    }
    double total = 0.0;
    for (std::size_t a = 0; a < num_arms; ++a) {
        total += std::exp(row[a] / temperature - max_scaled);
    }
    return row[arm] / temperature - max_scaled - std::log(total);
}

std::size_t SoftmaxPolicy::sample_arm(std::size_t prompt, double temperature, Rng& rng) const {
    const std::vector<double> p = probs(prompt, temperature);
    const double u = rng.uniform01();
    double acc = 0.0;
    for (std::size_t a = 0; a + 1 < p.size(); ++a) {
        acc += p[a];
        if (u < acc) return a;
    }
    return p.size() - 1;
}

LossSpec LossSpec::grpo(double eps_low, double eps_high, std::size_t group_size) {
    LossSpec spec;
    spec.kind = Kind::grpo;
    spec.eps_low = eps_low;
    spec.eps_high = eps_high;
    spec.group_size = group_size;
    spec.validate();
    return spec;
}

LossSpec LossSpec::asymre(double delta_v, std::size_t group_size) {
    LossSpec spec;
    spec.kind = Kind::asymre;
    spec.delta_v = delta_v;
    spec.group_size = group_size;
    spec.validate();
    return spec;
}

void LossSpec::validate() const {
    if (eps_low < 0.0 || eps_high < 0.0) {
        throw std::invalid_argument("loss spec: clip bounds must be >= 0");
    }
    if (!std::isfinite(eps_low) || !std::isfinite(eps_high) || !std::isfinite(delta_v)) {
        throw std::invalid_argument("loss spec: parameters must be finite");
    }
    if (group_size < 2) {
        throw std::invalid_argument("loss spec: group_size must be >= 2, got " +
                                    std::to_string(group_size));
    }
}

std::string to_string(LossSpec::Kind k) {
    switch (k) {
        case LossSpec::Kind::grpo: return "grpo";
        case LossSpec::Kind::asymre: return "asymre";
    }
    throw std::logic_error("unknown loss kind");
}

LossSpec::Kind loss_kind_from_string(std::string_view s) {
    if (s == "grpo") return LossSpec::Kind::grpo;
    if (s == "asymre") return LossSpec::Kind::asymre;
    throw std::invalid_argument("unknown loss kind '" + std::string(s) +
                                "' (expected grpo or asymre)");
}

std::vector<double> group_advantages(const std::vector<double>& rewards) {
    if (rewards.size() < 2) {
        throw std::invalid_argument("group advantages need >= 2 rewards");
    }
    const double n = static_cast<double>(rewards.size());
    double mean = 0.0;
    for (double r : rewards) mean += r;
    mean /= n;
    double var = 0.0;
    for (double r : rewards) var += (r - mean) * (r - mean);
    var /= n;  // population variance over exactly the group
    const double std_dev = std::sqrt(var);
    std::vector<double> adv(rewards.size(), 0.0);
    if (std_dev < 1e-8) return adv;  // constant group: no contrastive signal
    for (std::size_t i = 0; i < rewards.size(); ++i) {
        adv[i] = (rewards[i] - mean) / std_dev;
    }
    return adv;
}

std::vector<RolloutRecord> rollout_group(const SoftmaxPolicy& policy, const BanditTask& task,
                                         std::size_t prompt, std::size_t group_size,
                                         uint64_t group_id, uint64_t first_rollout_id,
                                         int64_t creation_step, int64_t policy_version,
                                         RolloutSideTables& tables, Rng& rng) {
    if (group_size < 2) {
        throw std::invalid_argument("rollout group needs group_size >= 2");
    }
    check_prompt_arm("rollout group", prompt, task.num_prompts, 0, task.num_arms);
    if (policy.num_prompts != task.num_prompts || policy.num_arms != task.num_arms) {
        throw std::invalid_argument("rollout group: policy shape does not match task");
    }

    std::vector<std::size_t> arms(group_size);
    std::vector<double> rewards(group_size);
    for (std::size_t i = 0; i < group_size; ++i) {
        arms[i] = policy.sample_arm(prompt, policy.temperature_train, rng);
        rewards[i] = task.reward(prompt, arms[i]);
    }
    const std::vector<double> advantages = group_advantages(rewards);
    double mean_reward = 0.0;
    for (double r : rewards) mean_reward += r;
    mean_reward /= static_cast<double>(group_size);
    tables.group_mean_reward[group_id] = mean_reward;

    std::vector<RolloutRecord> records(group_size);
    for (std::size_t i = 0; i < group_size; ++i) {
        RolloutRecord& rec = records[i];
        rec.rollout_id = first_rollout_id + i;
        rec.prompt_id = prompt;
        rec.group_id = group_id;
        rec.creation_step = creation_step;
        rec.policy_version = policy_version;
        rec.reward = rewards[i];
        rec.is_correct = task.is_correct(prompt, arms[i]);
        rec.behavior_logprob = policy.logprob(prompt, arms[i], policy.temperature_train);
        rec.advantage = advantages[i];
        tables.arm_of[rec.rollout_id] = arms[i];
    }
    return records;
}

namespace {

// Accumulates coef * d(logprob)/d(logits) into the gradient row of `prompt`:
// d logprob(arm) / d logit_j = (1[j == arm] - p_j) / temperature.
void add_logprob_grad(std::vector<double>& grad, const std::vector<double>& probs,
                      std::size_t prompt, std::size_t arm, std::size_t num_arms,
                      double temperature, double coef) {
    double* row = grad.data() + prompt * num_arms;
    for (std::size_t j = 0; j < num_arms; ++j) {
        const double indicator = (j == arm) ? 1.0 : 0.0;
        row[j] += coef * (indicator - probs[j]) / temperature;
    }
}

std::size_t arm_for(const RolloutSideTables& tables, const RolloutRecord& rec) {
    const auto it = tables.arm_of.find(rec.rollout_id);
    if (it == tables.arm_of.end()) {
        throw std::invalid_argument("rollout " + std::to_string(rec.rollout_id) +
                                    " missing from the arm side table");
    }
    return it->second;
}

}  // namespace

LossResult grpo_loss_grad(const SoftmaxPolicy& policy,
                          const std::vector<RolloutRecord>& batch,
                          const RolloutSideTables& tables, const LossSpec& spec) {
    spec.validate();
    if (batch.empty()) {
        throw std::invalid_argument("loss gradient needs a non-empty batch");
    }
    const double tau = policy.temperature_train;
    LossResult result;
    result.grad.assign(policy.logits.size(), 0.0);
    double objective = 0.0;
    std::size_t included = 0;
    for (const RolloutRecord& rec : batch) {
        const std::size_t prompt = rec.prompt_id;
        const std::size_t arm = arm_for(tables, rec);
        const std::vector<double> probs = policy.probs(prompt, tau);
        const double logprob_now = policy.logprob(prompt, arm, tau);
        const double ratio = std::exp(logprob_now - rec.behavior_logprob);
        if (!std::isfinite(ratio)) {
            ++result.excluded;
            std::cerr << "warning: rollout " << rec.rollout_id
                      << " has non-finite importance ratio; excluded from the update\n";
            continue;
        }
        ++included;
        const double a = rec.advantage;
        const double clipped = std::clamp(ratio, 1.0 - spec.eps_low, 1.0 + spec.eps_high);
        const double unclipped_value = ratio * a;
        const double clipped_value = clipped * a;
        if (unclipped_value <= clipped_value) {
            // Unclipped branch active (ties resolve here): d/dl = a * ratio * dlogprob.
            objective += unclipped_value;
            add_logprob_grad(result.grad, probs, prompt, arm, policy.num_arms, tau, a * ratio);
        } else {
            // Clipped branch is only strictly smaller when the clamp saturates,
            // where its derivative in theta is zero.
            objective += clipped_value;
        }
    }
    if (included > 0) {
        const double scale = 1.0 / static_cast<double>(included);
        result.objective = objective * scale;
        for (double& g : result.grad) g *= -scale;  // negate: descent on -objective
    }
    return result;
}

LossResult asymre_loss_grad(const SoftmaxPolicy& policy,
                            const std::vector<RolloutRecord>& batch,
                            const RolloutSideTables& tables, const LossSpec& spec) {
    spec.validate();
    if (batch.empty()) {
        throw std::invalid_argument("loss gradient needs a non-empty batch");
    }
    const double tau = policy.temperature_train;
    LossResult result;
    result.grad.assign(policy.logits.size(), 0.0);
    double objective = 0.0;
    for (const RolloutRecord& rec : batch) {
        const std::size_t prompt = rec.prompt_id;
        const std::size_t arm = arm_for(tables, rec);
        const auto it = tables.group_mean_reward.find(rec.group_id);
        if (it == tables.group_mean_reward.end()) {
            throw std::invalid_argument("group " + std::to_string(rec.group_id) +
                                        " missing from the mean-reward side table");
        }
        const double coef = rec.reward - (it->second + spec.delta_v);
        const std::vector<double> probs = policy.probs(prompt, tau);
        objective += coef * policy.logprob(prompt, arm, tau);
        add_logprob_grad(result.grad, probs, prompt, arm, policy.num_arms, tau, coef);
    }
    const double scale = 1.0 / static_cast<double>(batch.size());
    result.objective = objective * scale;
    for (double& g : result.grad) g *= -scale;  // negate: descent on -objective
    return result;
}

LossResult loss_grad(const SoftmaxPolicy& policy, const std::vector<RolloutRecord>& batch,
                     const RolloutSideTables& tables, const LossSpec& spec) {
    switch (spec.kind) {
        case LossSpec::Kind::grpo: return grpo_loss_grad(policy, batch, tables, spec);
        case LossSpec::Kind::asymre: return asymre_loss_grad(policy, batch, tables, spec);
    }
    throw std::logic_error("unknown loss kind");
}

double policy_entropy(const SoftmaxPolicy& policy, std::size_t prompt) {
    const std::vector<double> p = policy.probs(prompt, policy.temperature_train);
    double h = 0.0;
    for (double v : p) {
        if (v > 0.0) h -= v * std::log(v);
    }
    return h;
}

double mean_policy_entropy(const SoftmaxPolicy& policy) {
    double total = 0.0;
    for (std::size_t prompt = 0; prompt < policy.num_prompts; ++prompt) {
        total += policy_entropy(policy, prompt);
    }
    return total / static_cast<double>(policy.num_prompts);
}

double pass_at_k(const SoftmaxPolicy& policy, const BanditTask& task, int64_t k) {
    if (k < 1) {
        throw std::invalid_argument("pass@k needs k >= 1, got " + std::to_string(k));
    }
    if (policy.num_prompts != task.num_prompts || policy.num_arms != task.num_arms) {
        throw std::invalid_argument("pass@k: policy shape does not match task");
    }
    double total = 0.0;
    for (std::size_t prompt = 0; prompt < task.num_prompts; ++prompt) {
        const std::vector<double> p = policy.probs(prompt, policy.temperature_eval);
        double p_correct = 0.0;
        for (std::size_t a = 0; a < task.num_arms; ++a) {
            if (task.correct[prompt][a]) p_correct += p[a];
        }
        total += 1.0 - std::pow(1.0 - p_correct, static_cast<double>(k));
    }
    return total / static_cast<double>(task.num_prompts);
}

std::string TrainResult::curve_csv() const {
    std::string out = "step,compute,mean_reward,entropy,pass_at_1,pass_at_4,pass_at_16\n";
    for (const TrainCurvePoint& pt : curve) {
        out += std::to_string(pt.step);
        out += ',';
        out += format_double(pt.compute);
        out += ',';
        out += format_double(pt.mean_reward);
        out += ',';
        out += format_double(pt.entropy);
        out += ',';
        out += format_double(pt.pass_at_1);
        out += ',';
        out += format_double(pt.pass_at_4);
        out += ',';
        out += format_double(pt.pass_at_16);
        out += '\n';
    }
    return out;
}

namespace {

void validate_train_config(const TrainConfig& config) {
    config.task.validate();
    config.loss.validate();
    if (config.batch_size == 0) {
        throw std::invalid_argument("train config: batch_size must be >= 1");
    }
    if (!(config.eta > 0.0) || !std::isfinite(config.eta)) {
        throw std::invalid_argument("train config: eta must be positive and finite");
    }
    if (config.workers == 0 || config.trainers == 0) {
        throw std::invalid_argument("train config: workers and trainers must be >= 1");
    }
    if (!(config.mu > 0.0) || !std::isfinite(config.mu)) {
        throw std::invalid_argument("train config: mu must be positive and finite");
    }
    if (config.weight_sync_every == 0) {
        throw std::invalid_argument("train config: weight_sync_every must be >= 1");
    }
    if (config.steps < 1) {
        throw std::invalid_argument("train config: steps must be >= 1");
    }
    if (!(config.step_cost > 0.0) || !std::isfinite(config.step_cost)) {
        throw std::invalid_argument("train config: step_cost must be positive and finite");
    }
    if (config.eval_every < 1) {
        throw std::invalid_argument("train config: eval_every must be >= 1");
    }
    if (config.transfer.mode == TransferSpec::Mode::queue) {
        if (config.batch_size % config.loss.group_size != 0) {
            throw std::invalid_argument(
                "train config: queue mode needs batch_size divisible by group_size (got " +
                std::to_string(config.batch_size) + " and " +
                std::to_string(config.loss.group_size) + ")");
        }
        if (config.transfer.capacity != 0 && config.transfer.capacity < config.batch_size) {
            throw std::invalid_argument(
                "train config: queue capacity must be 0 (unbounded) or >= batch_size");
        }
    } else {
        const bool without_replacement =
            config.transfer.strategy != SamplingStrategy::uniform_with_replacement;
        if (without_replacement && config.transfer.capacity < config.batch_size) {
            throw std::invalid_argument(
                "train config: sampling without replacement needs buffer capacity >= "
                "batch_size");
        }
    }
}

void guard_divergence(const SoftmaxPolicy& policy, int64_t step) {
    double max_abs = 0.0;
    for (double v : policy.logits) {
        if (!std::isfinite(v)) throw DivergenceError(step, v);
        max_abs = std::max(max_abs, std::abs(v));
    }
    if (max_abs > 1e12) throw DivergenceError(step, max_abs);
}

}  // namespace

TrainResult train(const TrainConfig& config) {
    validate_train_config(config);
    const std::size_t num_prompts = config.task.num_prompts;
    const std::size_t group = config.loss.group_size;
    const double record_cost = config.mu * config.step_cost / static_cast<double>(config.batch_size);

    Rng root(config.seed);
    Rng generation = root.stream("generation");
    Rng sampling = root.stream("buffer_sampling");

    TrainResult result;
    result.policy = SoftmaxPolicy::uniform(num_prompts, config.task.num_arms);
    SoftmaxPolicy& policy = result.policy;
    SoftmaxPolicy behavior = policy;
    int64_t behavior_version = 0;

    RolloutSideTables tables;
    const bool buffered = config.transfer.mode == TransferSpec::Mode::buffer;
    ShardedReplayBuffer buffer(1, buffered ? config.transfer.capacity : 1,
                               config.transfer.strategy, config.transfer.retention);
    TransferQueue queue(config.transfer.capacity == 0
                            ? std::optional<std::size_t>{}
                            : std::optional<std::size_t>{config.transfer.capacity});

    uint64_t next_rollout_id = 0;
    uint64_t next_group_id = 0;
    std::size_t prompt_cursor = 0;

    auto generate_group = [&](int64_t creation_step) {
        const std::size_t prompt = prompt_cursor;
        prompt_cursor = (prompt_cursor + 1) % num_prompts;
        std::vector<RolloutRecord> records =
            rollout_group(behavior, config.task, prompt, group, next_group_id,
                          next_rollout_id, creation_step, behavior_version, tables, generation);
        next_group_id += 1;
        next_rollout_id += group;
        result.records_generated += static_cast<int64_t>(group);
        result.inference_compute += record_cost * static_cast<double>(group);
        return records;
    };

    if (buffered) {
        // Warm-up: fill the buffer to capacity under the initial policy so the
        // first update already sees steady-state occupancy.
        while (buffer.size() < config.transfer.capacity) {
            for (const RolloutRecord& rec : generate_group(0)) buffer.push(rec);
        }
    }

    // Fresh records owed to the buffer per update; whole groups are emitted
    // whenever the debt covers one.
    const double per_step_production =
        static_cast<double>(config.workers) * static_cast<double>(config.batch_size) /
        (config.mu * static_cast<double>(config.trainers));
    double production_debt = 0.0;

    double window_reward = 0.0;
    double window_neg_logprob = 0.0;
    int64_t window_count = 0;

    for (int64_t step = 0; step < config.steps; ++step) {
        if (step % static_cast<int64_t>(config.weight_sync_every) == 0) {
            behavior = policy;
            behavior_version = step;
        }

        std::vector<RolloutRecord> batch;
        if (buffered) {
            production_debt += per_step_production;
            while (production_debt >= static_cast<double>(group)) {
                for (const RolloutRecord& rec : generate_group(step)) buffer.push(rec);
                production_debt -= static_cast<double>(group);
            }
            batch = buffer.sample(config.batch_size, sampling);
        } else {
            for (std::size_t g = 0; g < config.batch_size / group; ++g) {
                for (const RolloutRecord& rec : generate_group(step)) {
                    if (!queue.push(rec)) {
                        throw std::logic_error("transfer queue rejected a record");
                    }
                }
            }
            batch.reserve(config.batch_size);
            for (std::size_t i = 0; i < config.batch_size; ++i) {
                auto rec = queue.pop();
                if (!rec) throw std::logic_error("transfer queue ran dry mid-batch");
                batch.push_back(*rec);
            }
        }

        const LossResult loss = loss_grad(policy, batch, tables, config.loss);
        result.excluded_records += static_cast<int64_t>(loss.excluded);
        for (std::size_t i = 0; i < policy.logits.size(); ++i) {
            policy.logits[i] -= config.eta * loss.grad[i];
        }
        result.trainer_compute += config.step_cost;
        result.steps = step + 1;
        guard_divergence(policy, step);

        for (const RolloutRecord& rec : batch) {
            window_reward += rec.reward;
            window_neg_logprob -= rec.behavior_logprob;
            if (rec.is_correct) result.sampled_correct += 1;
        }
        window_count += static_cast<int64_t>(batch.size());
        result.records_consumed += static_cast<int64_t>(batch.size());

        if ((step + 1) % config.eval_every == 0 || step + 1 == config.steps) {
            TrainCurvePoint pt;
            pt.step = step + 1;
            pt.compute = result.trainer_compute + result.inference_compute;
            pt.mean_reward = window_reward / static_cast<double>(window_count);
            pt.entropy = window_neg_logprob / static_cast<double>(window_count);
            pt.pass_at_1 = pass_at_k(policy, config.task, 1);
            pt.pass_at_4 = pass_at_k(policy, config.task, 4);
            pt.pass_at_16 = pass_at_k(policy, config.task, 16);
            result.curve.push_back(pt);
            window_reward = 0.0;
            window_neg_logprob = 0.0;
            window_count = 0;
        }
    }
    return result;
}

}  // namespace replab
