#include "replab/commands.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "replab/async_sim.hpp"
#include "replab/bandit.hpp"
#include "replab/compute_model.hpp"
#include "replab/design.hpp"
#include "replab/metrics.hpp"
#include "replab/noise.hpp"
#include "replab/replay_buffer.hpp"
#include "replab/sgd_lab.hpp"
#include "replab/text_io.hpp"

namespace fs = std::filesystem;

namespace replab {

int exit_code_for_current_exception() {
    try {
        throw;
    } catch (const DivergenceError&) {
        return kExitDivergence;
    } catch (const DeadlockError&) {
        return kExitDeadlock;
    } catch (const ConfigError&) {
        return kExitConfig;
    } catch (const std::invalid_argument&) {
        return kExitConfig;
    } catch (const std::exception&) {
        return kExitInternal;
    } catch (...) {
        return kExitInternal;
    }
}

namespace {

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

void ensure_out_dir(const std::string& out_dir) {
    if (out_dir.empty()) {
        throw ConfigError("output directory must not be empty");
    }
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) {
        throw ConfigError("cannot create output directory '" + out_dir + "': " + ec.message());
    }
}

void write_out_file(const std::string& out_dir, const std::string& name,
                    std::string_view content) {
    write_text_file((fs::path(out_dir) / name).string(), content);
}

std::string read_input_file(const std::string& path) {
    try {
        return read_text_file(path);
    } catch (const std::exception& e) {
        throw ConfigError(e.what());
    }
}

// Wraps a parsed config, converts each lookup once, and remembers the
// resolved string so the manifest can list every effective value (defaults
// included), not only the keys the file happened to set.
class Resolved {
public:
    explicit Resolved(const KeyValueConfig& config) : config_(config) {}

    std::string str(const std::string& key) { return note(key, config_.get_string(key)); }
    std::string str(const std::string& key, const std::string& fallback) {
        return note(key, config_.get_string(key, fallback));
    }
    double num(const std::string& key) { return note_num(key, config_.get_double(key)); }
    double num(const std::string& key, double fallback) {
        return note_num(key, config_.get_double(key, fallback));
    }
    int64_t integer(const std::string& key) { return note_int(key, config_.get_int64(key)); }
    int64_t integer(const std::string& key, int64_t fallback) {
        return note_int(key, config_.get_int64(key, fallback));
    }
    bool flag(const std::string& key, bool fallback) {
        const bool v = config_.get_bool(key, fallback);
        resolved_[key] = v ? "true" : "false";
        return v;
    }

    bool has(const std::string& key) const { return config_.has(key); }
    void note_value(const std::string& key, const std::string& value) { resolved_[key] = value; }

    const std::map<std::string, std::string>& entries() const { return resolved_; }

private:
    std::string note(const std::string& key, std::string value) {
        resolved_[key] = value;
        return value;
    }
    double note_num(const std::string& key, double value) {
        resolved_[key] = format_double(value);
        return value;
    }
    int64_t note_int(const std::string& key, int64_t value) {
        resolved_[key] = std::to_string(value);
        return value;
    }

    const KeyValueConfig& config_;
    std::map<std::string, std::string> resolved_;
};

std::string seeds_csv(const std::vector<uint64_t>& seeds) {
    std::string out;
    for (std::size_t i = 0; i < seeds.size(); ++i) {
        if (i) out += ',';
        out += std::to_string(seeds[i]);
    }
    return out;
}

void write_manifest(const std::string& out_dir, const std::string& subcommand,
                    const Resolved* resolved, const std::vector<uint64_t>& seeds,
                    const std::vector<std::pair<std::string, std::string>>& extra,
                    const std::vector<std::pair<std::string, std::string>>& end_stats) {
    std::string text = "# run_manifest v1\n";
    text += "subcommand = " + subcommand + "\n";
    text += std::string("tool_version = ") + kToolVersion + "\n";
    text += "out_dir = " + out_dir + "\n";
    if (!seeds.empty()) {
        text += "seeds = " + seeds_csv(seeds) + "\n";
    }
    if (resolved != nullptr) {
        for (const auto& [key, value] : resolved->entries()) {
            text += "config." + key + " = " + value + "\n";
        }
    }
    for (const auto& [key, value] : extra) {
        text += key + " = " + value + "\n";
    }
    for (const auto& [key, value] : end_stats) {
        text += "end." + key + " = " + value + "\n";
    }
    write_out_file(out_dir, "manifest.txt", text);
}

void require_seeds(const std::vector<uint64_t>& seeds) {
    if (seeds.empty()) {
        throw ConfigError("at least one seed is required");
    }
}

std::vector<double> parse_number_list(const std::string& key, const std::string& text) {
    std::vector<double> out;
    for (const std::string& field : split(text, ',')) {
        const auto t = trim(field);
        if (t.empty()) continue;
        try {
            out.push_back(parse_double(t));
        } catch (const std::exception&) {
            throw ConfigError("config key '" + key + "': cannot parse number '" +
                              std::string(t) + "'");
        }
    }
    if (out.empty()) {
        throw ConfigError("config key '" + key + "': empty list");
    }
    return out;
}

std::vector<std::pair<int64_t, int64_t>> parse_wt_pairs(const std::string& text) {
    std::vector<std::pair<int64_t, int64_t>> out;
    for (const std::string& field : split(text, ',')) {
        const auto t = trim(field);
        if (t.empty()) continue;
        const auto parts = split(t, ':');
        if (parts.size() != 2) {
            throw ConfigError("config key 'wt_pairs': expected W:T, got '" + std::string(t) +
                              "'");
        }
        try {
            out.emplace_back(parse_int64(trim(parts[0])), parse_int64(trim(parts[1])));
        } catch (const std::exception&) {
            throw ConfigError("config key 'wt_pairs': cannot parse '" + std::string(t) + "'");
        }
    }
    if (out.empty()) {
        throw ConfigError("config key 'wt_pairs': empty list");
    }
    return out;
}

double median_of(std::vector<double> values) {
    if (values.empty()) {
        throw std::invalid_argument("median of empty list");
    }
    std::sort(values.begin(), values.end());
    return values[(values.size() - 1) / 2];
}

NoiseProfile noise_from(Resolved& r) {
    const std::string kind = r.str("noise", "power_law");
    if (kind == "power_law") {
        if (r.has("noise_sigma0")) {
            throw ConfigError("config key 'noise_sigma0' only applies to noise = constant");
        }
        return NoiseProfile::power_law(r.num("noise_alpha", 0.25), r.num("noise_tau", 64.0));
    }
    if (kind == "constant") {
        if (r.has("noise_alpha") || r.has("noise_tau")) {
            throw ConfigError(
                "config keys 'noise_alpha'/'noise_tau' only apply to noise = power_law");
        }
        return NoiseProfile::constant(r.num("noise_sigma0", 1.0));
    }
    throw ConfigError("config key 'noise': expected power_law or constant, got '" + kind + "'");
}

SyntheticObjective objective_from(Resolved& r) {
    const std::string kind = r.str("objective", "quadratic");
    const auto dim = static_cast<std::size_t>(r.integer("dim", 32));
    if (kind == "quadratic") {
        return SyntheticObjective::quadratic(r.num("L", 1.0), dim);
    }
    if (kind == "double_well") {
        if (r.has("L")) {
            throw ConfigError(
                "config key 'L' is fixed by the double_well objective; remove it");
        }
        return SyntheticObjective::double_well(dim);
    }
    throw ConfigError("config key 'objective': expected quadratic or double_well, got '" +
                      kind + "'");
}

TransferSpec transfer_from(Resolved& r) {
    const std::string mode = r.str("transfer", "queue");
    if (mode == "queue") {
        for (const char* key : {"strategy", "retention", "retention_delta"}) {
            if (r.has(key)) {
                throw ConfigError(std::string("config key '") + key +
                                  "' only applies to transfer = buffer");
            }
        }
        return TransferSpec::queue(static_cast<std::size_t>(r.integer("capacity", 0)));
    }
    if (mode == "buffer") {
        const auto capacity = static_cast<std::size_t>(r.integer("capacity"));
        SamplingStrategy strategy;
        try {
            strategy = sampling_strategy_from_string(r.str("strategy", "uniform_with_replacement"));
        } catch (const std::exception& e) {
            throw ConfigError(std::string("config key 'strategy': ") + e.what());
        }
        const std::string retention = r.str("retention", "plain_fifo");
        if (retention == "plain_fifo") {
            if (r.has("retention_delta")) {
                throw ConfigError(
                    "config key 'retention_delta' only applies to retention = positive_bias");
            }
            return TransferSpec::buffer(capacity, strategy, RetentionPolicy::plain_fifo());
        }
        if (retention == "positive_bias") {
            return TransferSpec::buffer(capacity, strategy,
                                        RetentionPolicy::positive_bias(r.num("retention_delta")));
        }
        throw ConfigError(
            "config key 'retention': expected plain_fifo or positive_bias, got '" + retention +
            "'");
    }
    throw ConfigError("config key 'transfer': expected queue or buffer, got '" + mode + "'");
}

}  // namespace

std::string run_design(const KeyValueConfig& config, const std::string& out_dir) {
    config.require_known_keys({"alpha", "mu", "rho", "wt_pairs", "budget", "R", "kappa", "L",
                               "F0", "noise_tau", "curve_x_min", "curve_x_max",
                               "curve_points"});
    ensure_out_dir(out_dir);
    Resolved r(config);
    const double alpha = r.num("alpha");
    const double mu = r.num("mu");
    const double rho = r.num("rho");
    const double noise_tau = r.num("noise_tau", 64.0);

    std::ostringstream report;
    report << "design report (alpha=" << fmt(alpha) << ", mu=" << fmt(mu)
           << ", rho=" << fmt(rho) << ")\n";

    const DesignSolution closed = optimal_design_power_law(alpha, mu, rho);
    const NoiseProfile noise = NoiseProfile::power_law(alpha, noise_tau);
    const DesignSolution numeric = optimal_design_numeric(mu, rho, noise);
    const double x_gap = std::abs(closed.x_star - numeric.x_star) / closed.x_star;
    report << "x_star = " << fmt(closed.x_star) << " (numeric " << fmt(numeric.x_star)
           << ", relative gap " << fmt(x_gap) << ")\n";
    report << "y_star = " << fmt(closed.y_star) << "\n";
    report << "objective I(x_star) = " << fmt(closed.objective) << "\n";

    // Optimality-curve samples on a log grid, two columns, for plotting.
    const double curve_lo = r.num("curve_x_min", 0.25);
    const double curve_hi = r.num("curve_x_max", 64.0);
    const int64_t curve_points = r.integer("curve_points", 33);
    if (!(curve_lo > 0.0) || !(curve_hi > curve_lo) || curve_points < 2) {
        throw ConfigError("design curve grid: need 0 < curve_x_min < curve_x_max and >= 2 points");
    }
    std::string curve = "x,K\n";
    for (int64_t i = 0; i < curve_points; ++i) {
        const double t = static_cast<double>(i) / static_cast<double>(curve_points - 1);
        const double x = curve_lo * std::pow(curve_hi / curve_lo, t);
        curve += format_double(x) + "," + format_double(objective_K(x, alpha, mu, rho)) + "\n";
    }
    write_out_file(out_dir, "design_curve.csv", curve);

    std::vector<std::pair<std::string, std::string>> end_stats;
    end_stats.emplace_back("x_star", format_double(closed.x_star));
    end_stats.emplace_back("y_star", format_double(closed.y_star));

    if (config.has("wt_pairs")) {
        const auto pairs = parse_wt_pairs(r.str("wt_pairs"));
        std::string table = "workers,trainers,gamma\n";
        report << "\nper-update compute ratio vs regenerate-every-batch:\n";
        for (const auto& [w, t] : pairs) {
            const double gamma = compute_ratio(static_cast<double>(w), static_cast<double>(t), mu);
            table += std::to_string(w) + "," + std::to_string(t) + "," + format_double(gamma) +
                     "\n";
            report << "  (W=" << w << ", T=" << t << ")  gamma = " << fmt(gamma) << "\n";
        }
        write_out_file(out_dir, "gamma_table.csv", table);
    }

    const double budget = r.num("budget", 0.0);
    if (budget > 0.0) {
        const int64_t R = r.integer("R", 4);
        if (R < 1) throw ConfigError("config key 'R' must be >= 1");
        DesignParams params;
        params.R = R;
        params.N = std::max<int64_t>(1, std::llround(closed.x_star)) * R;
        params.B = std::max<int64_t>(1, std::llround(closed.y_star * static_cast<double>(R)));
        params.kappa = r.num("kappa", 0.0);
        params.rho = rho;
        params.L = r.num("L", 1.0);
        params.F0 = r.num("F0", 1.0);
        params.noise = noise;
        const double denom = static_cast<double>(params.B) + mu * static_cast<double>(params.R);
        params.T_steps = static_cast<int64_t>(budget / denom);
        if (params.T_steps < 1) {
            throw ConfigError("config key 'budget' too small for a single step at the "
                              "chosen design");
        }
        const EtaChoice eta = optimal_eta(params, mu, budget);
        params.eta = eta.eta_star;
        const double bound = convergence_bound(params);
        report << "\nbudgeted design (budget=" << fmt(budget) << ", R=" << R << "):\n";
        report << "  N = " << params.N << " (x rounded to " << fmt(static_cast<double>(params.N) /
                                                                   static_cast<double>(R))
               << "), B = " << params.B << ", T = " << params.T_steps << "\n";
        report << "  eta_star = " << fmt(eta.eta_star) << (eta.capped ? " (validity-capped)" : "")
               << "\n";
        report << "  guarantee on mean squared gradient norm = " << fmt(bound) << "\n";
        end_stats.emplace_back("eta_star", format_double(eta.eta_star));
        end_stats.emplace_back("bound", format_double(bound));
    }

    const std::string report_text = report.str();
    write_out_file(out_dir, "report.txt", report_text);
    write_manifest(out_dir, "design", &r, {}, {}, end_stats);
    return report_text;
}

std::string run_simulate_sync(const KeyValueConfig& config, const std::string& out_dir,
                              const std::vector<uint64_t>& seeds) {
    config.require_known_keys({"mode", "objective", "L", "dim", "noise", "noise_alpha",
                               "noise_tau", "noise_sigma0", "kappa", "rho_knob",
                               "theta0_radius", "seed", "N", "R", "B", "eta", "steps",
                               "budget", "mu", "x_grid", "y_grid", "sweep_seeds"});
    require_seeds(seeds);
    ensure_out_dir(out_dir);
    Resolved r(config);
    const std::string mode = r.str("mode", "run");
    const SyntheticObjective objective = objective_from(r);
    const NoiseProfile noise = noise_from(r);
    const double kappa = r.num("kappa", 0.0);
    const double rho_knob = r.num("rho_knob", 0.0);
    const double theta0_radius = r.num("theta0_radius", 10.0);

    std::ostringstream report;
    std::vector<std::pair<std::string, std::string>> end_stats;

    if (mode == "run") {
        for (const char* key : {"budget", "mu", "x_grid", "y_grid", "sweep_seeds"}) {
            if (r.has(key)) {
                throw ConfigError(std::string("config key '") + key +
                                  "' only applies to mode = sweep");
            }
        }
        SyncRunConfig run_config;
        run_config.buffer_capacity = r.integer("N");
        run_config.inserts_per_step = r.integer("R");
        run_config.batch_size = r.integer("B");
        run_config.eta = r.num("eta");
        run_config.steps = r.integer("steps");
        run_config.objective = objective;
        run_config.noise = noise;
        run_config.kappa = kappa;
        run_config.rho_knob = rho_knob;
        run_config.theta0_radius = theta0_radius;

        DesignParams params = design_params(run_config);
        const EtaValidity validity = eta_validity(params);
        const double bound = validity.valid ? convergence_bound(params) : 0.0;
        report << "buffered-SGD run: N=" << run_config.buffer_capacity
               << " R=" << run_config.inserts_per_step << " B=" << run_config.batch_size
               << " eta=" << fmt(run_config.eta) << " steps=" << run_config.steps << "\n";
        if (validity.valid) {
            report << "guarantee on mean squared gradient norm: " << fmt(bound) << "\n";
        } else {
            report << "step size outside the guarantee's validity region (caps: < "
                   << fmt(validity.smoothness_cap) << ", <= " << fmt(validity.bias_cap)
                   << ")\n";
        }

        std::vector<double> mean_grads, finals;
        for (const uint64_t seed : seeds) {
            run_config.seed = seed;
            const SyncRunTrace trace = run_sync(run_config);
            write_out_file(out_dir, "trace_seed" + std::to_string(seed) + ".csv",
                           trace.to_csv());
            mean_grads.push_back(trace.mean_grad_norm_sq);
            finals.push_back(trace.final_objective);
            report << "seed " << seed << ": mean ||grad||^2 = " << fmt(trace.mean_grad_norm_sq)
                   << ", final objective = " << fmt(trace.final_objective);
            if (validity.valid) {
                report << (trace.mean_grad_norm_sq <= bound ? " (within guarantee)"
                                                            : " (EXCEEDS guarantee)");
            }
            report << "\n";
        }
        const double med = median_of(mean_grads);
        report << "median mean ||grad||^2 = " << fmt(med) << ", median final objective = "
               << fmt(median_of(finals)) << "\n";
        end_stats.emplace_back("median_mean_grad_norm_sq", format_double(med));
        end_stats.emplace_back("median_final_objective", format_double(median_of(finals)));
    } else if (mode == "sweep") {
        for (const char* key : {"N", "B", "eta", "steps"}) {
            if (r.has(key)) {
                throw ConfigError(std::string("config key '") + key +
                                  "' only applies to mode = run");
            }
        }
        SweepConfig sweep;
        sweep.compute_budget = r.num("budget");
        sweep.mu = r.num("mu");
        sweep.x_grid = parse_number_list("x_grid", r.str("x_grid"));
        sweep.y_grid = parse_number_list("y_grid", r.str("y_grid"));
        sweep.R = r.integer("R", 4);
        sweep.objective = objective;
        sweep.noise = noise;
        sweep.kappa = kappa;
        sweep.rho_knob = rho_knob;
        sweep.theta0_radius = theta0_radius;
        sweep.seeds = static_cast<int>(r.integer("sweep_seeds", 5));
        sweep.seed = seeds[0];
        r.note_value("seed", std::to_string(seeds[0]));

        const std::vector<SweepCellResult> cells = sweep_designs(sweep);
        write_out_file(out_dir, "sweep.csv", sweep_to_csv(cells));

        const SweepCellResult* best = nullptr;
        for (const SweepCellResult& cell : cells) {
            if (best == nullptr || cell.median_stat < best->median_stat) best = &cell;
        }
        report << "design sweep over " << cells.size() << " cells, budget = "
               << fmt(sweep.compute_budget) << ", mu = " << fmt(sweep.mu) << "\n";
        report << "best cell: x=" << fmt(best->x) << " y=" << fmt(best->y) << " (N=" << best->N
               << ", B=" << best->B << ", T=" << best->T_steps
               << ", eta=" << fmt(best->eta) << ") median stat = " << fmt(best->median_stat)
               << "\n";
        if (noise.kind == NoiseProfile::Kind::power_law) {
            const DesignSolution closed =
                optimal_design_power_law(noise.alpha, sweep.mu, rho_knob);
            report << "closed-form optimum: x_star=" << fmt(closed.x_star)
                   << " y_star=" << fmt(closed.y_star) << "\n";
            end_stats.emplace_back("x_star", format_double(closed.x_star));
            end_stats.emplace_back("y_star", format_double(closed.y_star));
        }
        end_stats.emplace_back("best_x", format_double(best->x));
        end_stats.emplace_back("best_y", format_double(best->y));
        end_stats.emplace_back("best_median_stat", format_double(best->median_stat));
    } else {
        throw ConfigError("config key 'mode': expected run or sweep, got '" + mode + "'");
    }

    const std::string report_text = report.str();
    write_out_file(out_dir, "report.txt", report_text);
    write_manifest(out_dir, "simulate-sync", &r, seeds, {}, end_stats);
    return report_text;
}

std::string run_simulate_async(const KeyValueConfig& config, const std::string& out_dir,
                               const std::vector<uint64_t>& seeds) {
    config.require_known_keys({"workers", "trainers", "mu", "service_jitter", "transfer",
                               "capacity", "strategy", "retention", "retention_delta",
                               "batch_size", "group_size", "weight_sync_every", "horizon",
                               "step_cost", "seed"});
    require_seeds(seeds);
    ensure_out_dir(out_dir);
    Resolved r(config);
    PipelineConfig pipeline;
    pipeline.workers = r.integer("workers", 1);
    pipeline.trainers = r.integer("trainers", 1);
    pipeline.mu = r.num("mu", 4.0);
    pipeline.service_jitter = r.num("service_jitter", 0.0);
    pipeline.transfer = transfer_from(r);
    pipeline.batch_size = r.integer("batch_size", 8);
    pipeline.group_size = r.integer("group_size", 4);
    pipeline.weight_sync_every = r.integer("weight_sync_every", 1);
    pipeline.horizon = r.integer("horizon", 100);
    pipeline.step_cost = r.num("step_cost", 1.0);

    const bool buffered = pipeline.transfer.mode == TransferSpec::Mode::buffer;
    const double target = steady_state_replay_ratio(static_cast<double>(pipeline.workers),
                                                    static_cast<double>(pipeline.trainers),
                                                    pipeline.mu);

    std::ostringstream report;
    report << "pipeline: W=" << pipeline.workers << " T=" << pipeline.trainers
           << " mu=" << fmt(pipeline.mu) << " transfer=" << (buffered ? "buffer" : "queue")
           << " horizon=" << pipeline.horizon << "\n";
    report << "steady-state replay ratio target = " << fmt(target) << "\n";

    std::string run_stats =
        "seed,steps,end_time,records_delivered,records_delivered_after_warmup,replay_mean,"
        "staleness_mean,steps_since_mean,mu_hat\n";
    std::vector<std::pair<std::string, MetricSummary>> summary_rows;
    std::vector<double> replay_means, staleness_means, mu_hats;

    for (const uint64_t seed : seeds) {
        pipeline.seed = seed;
        const AsyncRunTrace trace = simulate(pipeline);
        const std::string tag = "_seed" + std::to_string(seed);
        write_out_file(out_dir, "updates" + tag + ".txt", trace.updates_to_text());
        write_out_file(out_dir, "ledger" + tag + ".txt", trace.ledger.export_text());
        write_out_file(out_dir, "stalls" + tag + ".csv", stall_report_csv(stall_report(trace)));

        std::vector<double> staleness_values;
        staleness_values.reserve(trace.ledger.events().size());
        for (const UseEvent& event : trace.ledger.events()) {
            staleness_values.push_back(static_cast<double>(staleness(event)));
        }
        std::vector<double> replay_values;
        for (const auto& [id, count] : replay_counts(trace.ledger)) {
            replay_values.push_back(static_cast<double>(count));
        }
        Rng metrics_rng = Rng(seed).stream("metrics");
        std::vector<double> gap_values;
        for (const UseGapLabel& label : steps_since_last_use(trace.ledger, metrics_rng)) {
            if (label.gap.has_value()) gap_values.push_back(static_cast<double>(*label.gap));
        }

        const MetricSummary staleness_summary = summarize(staleness_values);
        const MetricSummary replay_summary = summarize(replay_values);
        const MetricSummary gap_summary =
            gap_values.empty() ? MetricSummary{} : summarize(gap_values);
        write_out_file(out_dir, "staleness_hist" + tag + ".csv",
                       histogram_table(staleness_summary));
        write_out_file(out_dir, "replay_hist" + tag + ".csv", histogram_table(replay_summary));
        write_out_file(out_dir, "steps_since_hist" + tag + ".csv",
                       histogram_table(gap_summary));
        summary_rows.emplace_back("staleness" + tag, staleness_summary);
        summary_rows.emplace_back("replay_count" + tag, replay_summary);
        summary_rows.emplace_back("steps_since_last_use" + tag, gap_summary);

        const double mu_hat = estimate_mu(
            static_cast<double>(trace.ledger.events().size()),
            static_cast<double>(pipeline.trainers),
            static_cast<double>(trace.records_delivered_after_warmup),
            static_cast<double>(pipeline.workers));
        run_stats += std::to_string(seed) + "," + std::to_string(trace.steps) + "," +
                     format_double(trace.end_time) + "," +
                     std::to_string(trace.records_delivered) + "," +
                     std::to_string(trace.records_delivered_after_warmup) + "," +
                     format_double(replay_summary.mean) + "," +
                     format_double(staleness_summary.mean) + "," +
                     format_double(gap_summary.mean) + "," + format_double(mu_hat) + "\n";
        replay_means.push_back(replay_summary.mean);
        staleness_means.push_back(staleness_summary.mean);
        mu_hats.push_back(mu_hat);

        report << "seed " << seed << ": steps=" << trace.steps
               << " delivered=" << trace.records_delivered
               << " replay_mean=" << fmt(replay_summary.mean)
               << " staleness_mean=" << fmt(staleness_summary.mean)
               << " mu_hat=" << fmt(mu_hat) << "\n";
        if (!buffered) {
            const std::vector<int64_t> raw = staleness_without_buffer(trace);
            double mean = 0.0;
            for (int64_t v : raw) mean += static_cast<double>(v);
            if (!raw.empty()) mean /= static_cast<double>(raw.size());
            report << "  staleness vs generating version (queue) mean = " << fmt(mean) << "\n";
        }
    }

    write_out_file(out_dir, "run_stats.csv", run_stats);
    write_out_file(out_dir, "summary.csv", summary_table(summary_rows));
    report << "medians: replay_mean=" << fmt(median_of(replay_means))
           << " staleness_mean=" << fmt(median_of(staleness_means))
           << " mu_hat=" << fmt(median_of(mu_hats)) << "\n";

    std::vector<std::pair<std::string, std::string>> end_stats;
    end_stats.emplace_back("replay_mean_median", format_double(median_of(replay_means)));
    end_stats.emplace_back("staleness_mean_median", format_double(median_of(staleness_means)));
    end_stats.emplace_back("mu_hat_median", format_double(median_of(mu_hats)));

    const std::string report_text = report.str();
    write_out_file(out_dir, "report.txt", report_text);
    write_manifest(out_dir, "simulate-async", &r, seeds, {}, end_stats);
    return report_text;
}

std::string run_train_bandit(const KeyValueConfig& config, const std::string& out_dir,
                             const std::vector<uint64_t>& seeds) {
    config.require_known_keys({"task_file", "task_prompts", "task_arms", "task_correct",
                               "task_seed", "loss", "eps_low", "eps_high", "delta_v",
                               "group_size", "transfer", "capacity", "strategy", "retention",
                               "retention_delta", "batch_size", "eta", "workers", "trainers",
                               "mu", "weight_sync_every", "steps", "step_cost", "eval_every",
                               "seed"});
    require_seeds(seeds);
    ensure_out_dir(out_dir);
    Resolved r(config);

    TrainConfig train_config;
    if (r.has("task_file")) {
        for (const char* key : {"task_prompts", "task_arms", "task_correct", "task_seed"}) {
            if (r.has(key)) {
                throw ConfigError(std::string("config key '") + key +
                                  "' conflicts with task_file");
            }
        }
        train_config.task = BanditTask::from_text(read_input_file(r.str("task_file")));
    } else {
        Rng task_rng = Rng(static_cast<uint64_t>(r.integer("task_seed", 777))).stream("task");
        train_config.task = BanditTask::random(
            static_cast<std::size_t>(r.integer("task_prompts", 10)),
            static_cast<std::size_t>(r.integer("task_arms", 8)),
            static_cast<std::size_t>(r.integer("task_correct", 2)), task_rng);
    }

    LossSpec loss;
    try {
        loss.kind = loss_kind_from_string(r.str("loss", "grpo"));
    } catch (const std::exception& e) {
        throw ConfigError(std::string("config key 'loss': ") + e.what());
    }
    loss.eps_low = r.num("eps_low", 0.2);
    loss.eps_high = r.num("eps_high", 0.2);
    loss.delta_v = r.num("delta_v", -0.1);
    loss.group_size = static_cast<std::size_t>(r.integer("group_size", 16));
    train_config.loss = loss;
    train_config.transfer = transfer_from(r);
    train_config.batch_size = static_cast<std::size_t>(r.integer("batch_size", 16));
    train_config.eta = r.num("eta", 0.5);
    train_config.workers = static_cast<std::size_t>(r.integer("workers", 1));
    train_config.trainers = static_cast<std::size_t>(r.integer("trainers", 1));
    train_config.mu = r.num("mu", 4.0);
    train_config.weight_sync_every = static_cast<std::size_t>(r.integer("weight_sync_every", 1));
    train_config.steps = r.integer("steps", 1000);
    train_config.step_cost = r.num("step_cost", 1.0);
    train_config.eval_every = r.integer("eval_every", 10);

    write_out_file(out_dir, "task.txt", train_config.task.to_text());

    std::ostringstream report;
    report << "bandit training: loss=" << to_string(loss.kind) << " transfer="
           << (train_config.transfer.mode == TransferSpec::Mode::buffer ? "buffer" : "queue")
           << " W=" << train_config.workers << " T=" << train_config.trainers
           << " mu=" << fmt(train_config.mu) << " steps=" << train_config.steps << "\n";

    std::string final_stats =
        "seed,final_pass_at_1,final_pass_at_4,final_pass_at_16,total_compute,"
        "per_update_compute,replay_ratio,excluded_records\n";
    std::vector<double> finals, per_updates;
    for (const uint64_t seed : seeds) {
        train_config.seed = seed;
        const TrainResult result = train(train_config);
        write_out_file(out_dir, "curve_seed" + std::to_string(seed) + ".csv",
                       result.curve_csv());
        const double total = result.trainer_compute + result.inference_compute;
        const double per_update = total / static_cast<double>(result.steps);
        const double replay = static_cast<double>(result.records_consumed) /
                              static_cast<double>(result.records_generated);
        const double p1 = pass_at_k(result.policy, train_config.task, 1);
        final_stats += std::to_string(seed) + "," + format_double(p1) + "," +
                       format_double(pass_at_k(result.policy, train_config.task, 4)) + "," +
                       format_double(pass_at_k(result.policy, train_config.task, 16)) + "," +
                       format_double(total) + "," + format_double(per_update) + "," +
                       format_double(replay) + "," + std::to_string(result.excluded_records) +
                       "\n";
        finals.push_back(p1);
        per_updates.push_back(per_update);
        report << "seed " << seed << ": final pass@1 = " << fmt(p1)
               << ", per-update compute = " << fmt(per_update)
               << ", realized replay ratio = " << fmt(replay) << "\n";
    }
    write_out_file(out_dir, "final_stats.csv", final_stats);
    report << "median final pass@1 = " << fmt(median_of(finals))
           << ", median per-update compute = " << fmt(median_of(per_updates)) << "\n";

    std::vector<std::pair<std::string, std::string>> end_stats;
    end_stats.emplace_back("final_pass_at_1_median", format_double(median_of(finals)));
    end_stats.emplace_back("per_update_compute_median", format_double(median_of(per_updates)));

    const std::string report_text = report.str();
    write_out_file(out_dir, "report.txt", report_text);
    write_manifest(out_dir, "train-bandit", &r, seeds, {}, end_stats);
    return report_text;
}

namespace {

struct CurvePoint {
    std::string series;
    int64_t step = 0;
    double compute = 0.0;
    double value = 0.0;
    bool pareto = false;
};

std::vector<CurvePoint> load_curve_points(const std::string& dir) {
    std::vector<std::string> files;
    {
        std::error_code ec;
        fs::directory_iterator it(dir, ec);
        if (ec) {
            throw ConfigError("cannot read run directory '" + dir + "': " + ec.message());
        }
        for (const auto& entry : fs::directory_iterator(dir)) {
            const std::string name = entry.path().filename().string();
            if (name.rfind("curve_seed", 0) == 0 && name.size() > 4 &&
                name.substr(name.size() - 4) == ".csv") {
                files.push_back(name);
            }
        }
    }
    std::sort(files.begin(), files.end());
    if (files.empty()) {
        throw ConfigError("run directory '" + dir + "' has no curve_seed*.csv files");
    }
    std::vector<CurvePoint> points;
    for (const std::string& name : files) {
        const std::string text = read_input_file((fs::path(dir) / name).string());
        const std::vector<std::string> lines = split(text, '\n');
        if (lines.empty()) {
            throw ConfigError("curve file '" + name + "' in '" + dir + "' is empty");
        }
        const std::vector<std::string> header = split(lines[0], ',');
        int64_t step_col = -1, compute_col = -1, value_col = -1;
        for (std::size_t i = 0; i < header.size(); ++i) {
            const auto h = trim(header[i]);
            if (h == "step") step_col = static_cast<int64_t>(i);
            if (h == "compute") compute_col = static_cast<int64_t>(i);
            if (h == "pass_at_1") value_col = static_cast<int64_t>(i);
        }
        if (step_col < 0 || compute_col < 0 || value_col < 0) {
            throw ConfigError("curve file '" + name + "' in '" + dir +
                              "' lacks step/compute/pass_at_1 columns; runs are not comparable");
        }
        const std::string series =
            fs::path(dir).filename().string() + "/" + name.substr(0, name.size() - 4);
        for (std::size_t li = 1; li < lines.size(); ++li) {
            const auto line = trim(lines[li]);
            if (line.empty()) continue;
            const std::vector<std::string> fields = split(line, ',');
            const auto need = static_cast<std::size_t>(
                std::max({step_col, compute_col, value_col}) + 1);
            if (fields.size() < need) {
                throw ConfigError("curve file '" + name + "' in '" + dir +
                                  "' has a short row: '" + std::string(line) + "'");
            }
            CurvePoint pt;
            pt.series = series;
            pt.step = parse_int64(trim(fields[static_cast<std::size_t>(step_col)]));
            pt.compute = parse_double(trim(fields[static_cast<std::size_t>(compute_col)]));
            pt.value = parse_double(trim(fields[static_cast<std::size_t>(value_col)]));
            points.push_back(pt);
        }
    }
    return points;
}

}  // namespace

std::string run_report(const std::vector<std::string>& run_dirs, const std::string& out_dir) {
    if (run_dirs.empty()) {
        throw ConfigError("report needs at least one completed run directory");
    }
    ensure_out_dir(out_dir);

    std::vector<CurvePoint> points;
    for (const std::string& dir : run_dirs) {
        const std::vector<CurvePoint> loaded = load_curve_points(dir);
        points.insert(points.end(), loaded.begin(), loaded.end());
    }

    // Pareto flags: a point is on the frontier unless some point reaches at
    // least its value at no more compute, strictly better in one of the two.
    std::sort(points.begin(), points.end(), [](const CurvePoint& a, const CurvePoint& b) {
        if (a.compute != b.compute) return a.compute < b.compute;
        if (a.value != b.value) return a.value > b.value;
        if (a.series != b.series) return a.series < b.series;
        return a.step < b.step;
    });
    double best_before = -1.0;  // max value over strictly cheaper points
    std::size_t i = 0;
    while (i < points.size()) {
        std::size_t j = i;
        while (j < points.size() && points[j].compute == points[i].compute) ++j;
        const double group_max = points[i].value;  // sorted descending within the group
        for (std::size_t k = i; k < j; ++k) {
            points[k].pareto = points[k].value == group_max && group_max > best_before;
        }
        best_before = std::max(best_before, group_max);
        i = j;
    }

    std::string csv = "series,step,compute,value,pareto\n";
    for (const CurvePoint& pt : points) {
        csv += pt.series + "," + std::to_string(pt.step) + "," + format_double(pt.compute) +
               "," + format_double(pt.value) + "," + (pt.pareto ? "1" : "0") + "\n";
    }
    write_out_file(out_dir, "report.csv", csv);

    std::ostringstream report;
    report << "comparison over " << run_dirs.size() << " run director"
           << (run_dirs.size() == 1 ? "y" : "ies") << ", " << points.size() << " curve points\n";
    report << "best value by compute budget (improvements only):\n";
    double running = -1.0;
    std::size_t frontier = 0;
    for (const CurvePoint& pt : points) {
        if (pt.pareto) ++frontier;
        if (pt.pareto && pt.value > running) {
            running = pt.value;
            report << "  compute <= " << fmt(pt.compute) << ": pass@1 = " << fmt(pt.value)
                   << "  (" << pt.series << ", step " << pt.step << ")\n";
        }
    }
    report << frontier << " of " << points.size() << " points on the Pareto frontier\n";

    std::vector<std::pair<std::string, std::string>> extra;
    for (std::size_t d = 0; d < run_dirs.size(); ++d) {
        extra.emplace_back("input." + std::to_string(d), run_dirs[d]);
    }
    std::vector<std::pair<std::string, std::string>> end_stats;
    end_stats.emplace_back("points", std::to_string(points.size()));
    end_stats.emplace_back("frontier_points", std::to_string(frontier));

    const std::string report_text = report.str();
    write_out_file(out_dir, "report.txt", report_text);
    write_manifest(out_dir, "report", nullptr, {}, extra, end_stats);
    return report_text;
}

}  // namespace replab
