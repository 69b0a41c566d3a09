#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "replab/config.hpp"

namespace replab {

inline constexpr const char* kToolVersion = "replab 0.1.0";

// Process exit statuses shared by the command-line front end and the tests.
inline constexpr int kExitSuccess = 0;
inline constexpr int kExitInternal = 1;    // unexpected errors
inline constexpr int kExitConfig = 2;      // bad config, unknown keys, bad inputs
inline constexpr int kExitDivergence = 3;  // optimizer blow-up
inline constexpr int kExitDeadlock = 4;    // pipeline deadlock

// Maps an in-flight exception to the exit statuses above. Call from a catch
// block; rethrows internally to inspect the type.
int exit_code_for_current_exception();

// Each run_* command validates its config against a closed key set (unknown
// keys are hard errors), runs, writes its data files plus manifest.txt into
// out_dir (created if missing), and returns the human-readable report that
// the front end prints. Reruns with identical inputs produce byte-identical
// files. Errors surface as exceptions (ConfigError, std::invalid_argument,
// DivergenceError, DeadlockError).

// Closed-form design report: compute-ratio table for the configured (W, T)
// pairs, the optimal staleness window x* and replay ratio y* (closed form
// cross-checked against the numeric minimizer), a step-size/bound section
// when a compute budget is given, and optionally sampled K(x) curve data.
std::string run_design(const KeyValueConfig& config, const std::string& out_dir);

// Buffered-SGD runs on synthetic objectives: one trace per seed in `run`
// mode, a design-grid sweep in `sweep` mode.
std::string run_simulate_sync(const KeyValueConfig& config, const std::string& out_dir,
                              const std::vector<uint64_t>& seeds);

// Event-driven generate/train pipeline: per seed, the update log, the use
// ledger, the stall report, and staleness/replay/steps-since-last-use
// histograms, plus a cross-seed summary.
std::string run_simulate_async(const KeyValueConfig& config, const std::string& out_dir,
                               const std::vector<uint64_t>& seeds);

// Bandit policy-gradient training: the task definition, one training curve
// per seed, and a cross-seed summary.
std::string run_train_bandit(const KeyValueConfig& config, const std::string& out_dir,
                             const std::vector<uint64_t>& seeds);

// Cross-run comparison over completed train-bandit directories: merges every
// curve's (compute, pass_at_1) points, flags the Pareto frontier, and writes
// a best-value-per-compute-budget table. Reads the input directories,
// writes only to out_dir.
std::string run_report(const std::vector<std::string>& run_dirs, const std::string& out_dir);

}  // namespace replab
