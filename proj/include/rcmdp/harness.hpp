#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "rcmdp/baselines.hpp"
#include "rcmdp/envs.hpp"
#include "rcmdp/solver.hpp"

// Experiment driver: config parsing, multi-seed runs, CSV trace emission,
// summary statistics, and static SVG plots.
namespace rcmdp {

struct EnvSpecConfig {
    std::string name;
    EnvOverrides overrides;
};

struct ExperimentConfig {
    EnvSpecConfig env;
    std::vector<std::string> algorithms = {"RCPO", "PCPO", "RVI"};
    std::vector<std::uint64_t> seeds = {0, 1, 2, 3, 4};
    RcpoConfig rcpo;
    std::filesystem::path output_dir = "out";
    bool emit_plots_flag = true;
    int eval_every = 1;
    double init_policy_noise = 0.05;  // seed-dependent mixing toward uniform

    void validate() const;
};

/// Parse and validate a JSON config file. Unknown keys are errors.
ExperimentConfig load_config(const std::filesystem::path& file);

/// One flattened per-(algorithm, seed, iteration) output row.
struct TraceRow {
    std::string algorithm;
    std::uint64_t seed = 0;
    int iteration = 0;
    double robust_reward_raw = 0, robust_utility_raw = 0;
    double nominal_reward_raw = 0, nominal_utility_raw = 0;
    double robust_reward_norm = 0, robust_utility_norm = 0;
    double b = 0, realized_kl = 0, eps_reward = 0, eps_utility = 0;
    double m_estimate = 1, thm_reward_rhs = 0, thm_utility_rhs = 0;
    bool reward_bound_ok = true, utility_bound_ok = true, kl_lemma_ok = true;
    std::string flags;
};

extern const char* kTraceHeader;

std::string format_trace_row(const TraceRow& row);

/// Run every (algorithm, seed) pair, writing trace.csv, summary.csv and
/// config_echo.json into the output directory. Returns the output directory.
std::filesystem::path run_experiment(const ExperimentConfig& config);

/// In-memory variant used by tests and by run_experiment.
std::vector<TraceRow> run_experiment_rows(const ExperimentConfig& config,
                                          const BuiltEnv& env);

/// Render <env>_reward.svg and <env>_utility.svg from an experiment
/// directory; returns the written paths.
std::vector<std::filesystem::path> emit_plots(
    const std::filesystem::path& trace_dir);

/// Re-verify the recorded bound flags in a trace directory; prints one
/// pass/fail line per check. Returns true when every check passes.
bool check_bounds(const std::filesystem::path& trace_dir, std::ostream& out);

/// Seeded initial policy: uniform mixed with a random simplex row.
StochasticPolicy seeded_initial_policy(int n_states, int n_actions,
                                       std::uint64_t seed, double noise);

}  // namespace rcmdp
