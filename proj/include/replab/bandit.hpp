#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "replab/async_sim.hpp"
#include "replab/rng.hpp"
#include "replab/rollout.hpp"

namespace replab {

// Prompt-conditioned bandit task with binary rewards: P prompts, K arms per
// prompt, and a per-prompt set of correct arms. Stands in for binary-graded
// generation tasks at desk scale.
struct BanditTask {
    std::size_t num_prompts = 0;
    std::size_t num_arms = 0;
    std::vector<std::vector<bool>> correct;  // [prompt][arm]

    // Throws std::invalid_argument unless every prompt has at least one
    // correct and one incorrect arm (degenerate prompts give constant-reward
    // groups and no learning signal).
    void validate() const;

    bool is_correct(std::size_t prompt, std::size_t arm) const;
    double reward(std::size_t prompt, std::size_t arm) const;

    // Random task with exactly `correct_per_prompt` correct arms per prompt,
    // drawn without replacement. Requires 1 <= correct_per_prompt < arms.
    static BanditTask random(std::size_t prompts, std::size_t arms,
                             std::size_t correct_per_prompt, Rng& rng);

    // Text round trip:
    //   # bandit_task v1
    //   prompts <P>
    //   arms <K>
    //   correct <p>: <arm> <arm> ...   (one line per prompt, arms ascending)
    std::string to_text() const;
    static BanditTask from_text(std::string_view text);

    bool operator==(const BanditTask&) const = default;
};

// Tabular softmax policy: one logit row per prompt. Training samples are
// drawn at temperature_train; evaluation metrics use temperature_eval.
struct SoftmaxPolicy {
    std::size_t num_prompts = 0;
    std::size_t num_arms = 0;
    double temperature_train = 1.0;
    double temperature_eval = 0.1;
    std::vector<double> logits;  // row-major P x K

    static SoftmaxPolicy uniform(std::size_t prompts, std::size_t arms);

    double logit(std::size_t prompt, std::size_t arm) const;
    double& logit(std::size_t prompt, std::size_t arm);

    // Softmax of logits/temperature for one prompt (temperature > 0).
    std::vector<double> probs(std::size_t prompt, double temperature) const;
    double logprob(std::size_t prompt, std::size_t arm, double temperature) const;
    std::size_t sample_arm(std::size_t prompt, double temperature, Rng& rng) const;
};

// Which policy-gradient surrogate the trainer optimizes.
//
// grpo: per-record min(w*A, clip(w, 1-eps_low, 1+eps_high)*A) with
// importance ratio w = exp(logprob_now - behavior_logprob) and the
// group-normalized advantage A frozen at generation; no KL term.
// asymre: per-record (reward - (group_mean_reward + delta_v)) * logprob_now;
// no importance ratio.
struct LossSpec {
    enum class Kind { grpo, asymre };

    Kind kind = Kind::grpo;
    double eps_low = 0.2;
    double eps_high = 0.2;
    double delta_v = -0.1;
    std::size_t group_size = 16;

    static LossSpec grpo(double eps_low = 0.2, double eps_high = 0.2,
                         std::size_t group_size = 16);
    static LossSpec asymre(double delta_v = -0.1, std::size_t group_size = 16);

    // Throws std::invalid_argument on negative eps bounds or group_size < 2
    // (group advantages need at least two rewards).
    void validate() const;
};

std::string to_string(LossSpec::Kind k);
LossSpec::Kind loss_kind_from_string(std::string_view s);

// Per-run lookups the losses need beyond what RolloutRecord carries: the arm
// a rollout chose (for logprob_now) and its group's mean reward (the AsymRE
// baseline), both frozen at generation time.
struct RolloutSideTables {
    std::map<uint64_t, std::size_t> arm_of;             // rollout_id -> arm
    std::map<uint64_t, double> group_mean_reward;       // group_id -> mean r
};

// Group-relative advantages: (r_i - mean) / population std over exactly the
// given rewards; all zeros when the population std is below 1e-8 (constant
// groups carry no contrastive signal).
std::vector<double> group_advantages(const std::vector<double>& rewards);

// Samples group_size arms for one prompt at the policy's training
// temperature. Each record stores the reward, the behavior log-probability
// under `policy` (the generating snapshot), and the group-normalized
// advantage frozen at creation; `tables` gains the arm choices and the group
// mean reward. Rollout ids are first_rollout_id, first_rollout_id+1, ...
std::vector<RolloutRecord> rollout_group(const SoftmaxPolicy& policy,
                                         const BanditTask& task,
                                         std::size_t prompt,
                                         std::size_t group_size,
                                         uint64_t group_id,
                                         uint64_t first_rollout_id,
                                         int64_t creation_step,
                                         int64_t policy_version,
                                         RolloutSideTables& tables, Rng& rng);

// Surrogate objective value and the gradient of the NEGATED objective over
// the full logit table (row-major P x K), so a plain descent step
// logits -= eta * grad ascends the surrogate. `excluded` counts records
// dropped for non-finite importance ratios (grpo only).
struct LossResult {
    double objective = 0.0;
    std::vector<double> grad;
    std::size_t excluded = 0;
};

LossResult grpo_loss_grad(const SoftmaxPolicy& policy,
                          const std::vector<RolloutRecord>& batch,
                          const RolloutSideTables& tables, const LossSpec& spec);

LossResult asymre_loss_grad(const SoftmaxPolicy& policy,
                            const std::vector<RolloutRecord>& batch,
                            const RolloutSideTables& tables, const LossSpec& spec);

// Dispatch on spec.kind.
LossResult loss_grad(const SoftmaxPolicy& policy,
                     const std::vector<RolloutRecord>& batch,
                     const RolloutSideTables& tables, const LossSpec& spec);

// Shannon entropy -sum p log p of one prompt's training-temperature softmax,
// and its average over prompts.
double policy_entropy(const SoftmaxPolicy& policy, std::size_t prompt);
double mean_policy_entropy(const SoftmaxPolicy& policy);

// Probability that at least one of k independent eval-temperature samples is
// correct, computed in closed form per prompt as 1 - (1 - p_correct)^k and
// averaged over prompts. pass_at_k(policy, task, 1) is the expected reward
// of the eval-temperature policy.
double pass_at_k(const SoftmaxPolicy& policy, const BanditTask& task, int64_t k);

// Synchronous-emulation training run. Per update the trainer consumes
// batch_size records and the emulated generation side produces
// workers*batch_size/(mu*trainers) fresh records (whole groups, carried
// fractionally across steps), so the steady-state replay ratio is
// mu*trainers/workers in buffer mode and exactly 1 in queue mode (which
// requires batch_size % group_size == 0 and regenerates the full batch every
// step). Buffer mode fills the buffer to capacity before the first update.
// Compute is billed per event: step_cost per update, mu*step_cost/batch_size
// per generated record (warm-up included).
struct TrainConfig {
    BanditTask task;
    LossSpec loss;
    TransferSpec transfer = TransferSpec::queue(0);
    std::size_t batch_size = 16;
    double eta = 0.5;
    std::size_t workers = 1;
    std::size_t trainers = 1;
    double mu = 4.0;
    std::size_t weight_sync_every = 1;
    int64_t steps = 1000;
    double step_cost = 1.0;
    int64_t eval_every = 10;
    uint64_t seed = 0;
};

// One row of the training curve. Window metrics (mean_reward, entropy)
// aggregate the training batches consumed since the previous row:
// mean_reward is the realized mean record reward and entropy is the mean of
// -behavior_logprob — the entropy a trainer reports from its own batches,
// which lags the current policy when records are stale. pass_at_* are
// analytic eval-temperature metrics of the policy at this step.
struct TrainCurvePoint {
    int64_t step = 0;
    double compute = 0.0;
    double mean_reward = 0.0;
    double entropy = 0.0;
    double pass_at_1 = 0.0;
    double pass_at_4 = 0.0;
    double pass_at_16 = 0.0;
};

struct TrainResult {
    SoftmaxPolicy policy;  // final parameters
    std::vector<TrainCurvePoint> curve;
    double trainer_compute = 0.0;
    double inference_compute = 0.0;
    int64_t steps = 0;
    int64_t records_generated = 0;
    int64_t records_consumed = 0;
    int64_t sampled_correct = 0;   // is_correct records among consumed batches
    int64_t excluded_records = 0;  // non-finite-ratio exclusions (grpo)

    // CSV: step,compute,mean_reward,entropy,pass_at_1,pass_at_4,pass_at_16
    std::string curve_csv() const;
};

// Runs the emulation. Throws std::invalid_argument on inconsistent configs
// and DivergenceError (from the optimization harness) when logits blow up.
TrainResult train(const TrainConfig& config);

}  // namespace replab
