// Command-line front end: subcommand dispatch, flag handling, and exit-code
// mapping. All real work lives in the library so tests can drive it directly.

#include <cstdint>
#include <exception>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "replab/commands.hpp"
#include "replab/config.hpp"

namespace {

struct CommonArgs {
    std::string config_path;
    std::string out_dir;
    std::string overrides;
    std::uint64_t seed = 0;
    bool seed_given = false;
    std::int64_t seed_count = 1;
};

void add_common_options(CLI::App* cmd, CommonArgs& args, bool needs_config) {
    auto* config_opt =
        cmd->add_option("--config", args.config_path, "key-value config file");
    if (needs_config) config_opt->required();
    cmd->add_option("--out", args.out_dir, "output directory")->required();
    cmd->add_option("--grid-overrides", args.overrides,
                    "comma-separated key=value pairs applied over the config file");
    cmd->add_option("--seed", args.seed, "base seed (overrides the config's seed key)")
        ->each([&args](const std::string&) { args.seed_given = true; });
    cmd->add_option("--seeds", args.seed_count, "number of consecutive seeds to run")
        ->check(CLI::PositiveNumber);
}

replab::KeyValueConfig load_config(const CommonArgs& args) {
    replab::KeyValueConfig config;
    if (!args.config_path.empty()) {
        try {
            config = replab::KeyValueConfig::parse_file(args.config_path);
        } catch (const replab::ConfigError&) {
            throw;
        } catch (const std::exception& e) {
            throw replab::ConfigError(e.what());
        }
    }
    if (!args.overrides.empty()) {
        config.apply_overrides(args.overrides);
    }
    return config;
}

std::vector<std::uint64_t> seed_list(const CommonArgs& args,
                                     const replab::KeyValueConfig& config) {
    std::uint64_t base = 0;
    if (args.seed_given) {
        base = args.seed;
    } else if (config.has("seed")) {
        base = static_cast<std::uint64_t>(config.get_int64("seed"));
    }
    std::vector<std::uint64_t> seeds;
    for (std::int64_t i = 0; i < args.seed_count; ++i) {
        seeds.push_back(base + static_cast<std::uint64_t>(i));
    }
    return seeds;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"desk-scale replay-buffer laboratory"};
    app.require_subcommand(1);

    CommonArgs design_args, sync_args, async_args, bandit_args;
    std::string report_out;
    std::vector<std::string> report_dirs;

    CLI::App* design = app.add_subcommand(
        "design", "closed-form design report: compute ratios, x*, y*, eta*, bound");
    add_common_options(design, design_args, true);

    CLI::App* sync = app.add_subcommand(
        "simulate-sync", "buffered-SGD runs and design sweeps on synthetic objectives");
    add_common_options(sync, sync_args, true);

    CLI::App* async_cmd = app.add_subcommand(
        "simulate-async", "event-driven generate/train pipeline simulation");
    add_common_options(async_cmd, async_args, true);

    CLI::App* bandit = app.add_subcommand(
        "train-bandit", "policy-gradient training on a prompt-conditioned bandit");
    add_common_options(bandit, bandit_args, true);

    CLI::App* report = app.add_subcommand(
        "report", "compare completed train-bandit runs: Pareto frontier and budget table");
    report->add_option("dirs", report_dirs, "completed run directories")->required();
    report->add_option("--out", report_out, "output directory")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        std::string text;
        if (design->parsed()) {
            text = replab::run_design(load_config(design_args), design_args.out_dir);
        } else if (sync->parsed()) {
            const replab::KeyValueConfig config = load_config(sync_args);
            text = replab::run_simulate_sync(config, sync_args.out_dir,
                                             seed_list(sync_args, config));
        } else if (async_cmd->parsed()) {
            const replab::KeyValueConfig config = load_config(async_args);
            text = replab::run_simulate_async(config, async_args.out_dir,
                                              seed_list(async_args, config));
        } else if (bandit->parsed()) {
            const replab::KeyValueConfig config = load_config(bandit_args);
            text = replab::run_train_bandit(config, bandit_args.out_dir,
                                            seed_list(bandit_args, config));
        } else if (report->parsed()) {
            text = replab::run_report(report_dirs, report_out);
        }
        std::cout << text;
        return replab::kExitSuccess;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return replab::exit_code_for_current_exception();
    }
}
