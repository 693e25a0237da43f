#pragma once

#include <map>
#include <string>

#include "rcmdp/uncertainty.hpp"

// The three tabular benchmark CMDPs. Signals are normalized into [0,1];
// thresholds are rescaled by the same factors, and the raw scales are kept
// alongside so output can be reported on the original scale.
namespace rcmdp {

struct BuiltEnv {
    std::string name;
    TabularCMDP cmdp;          // normalized signals, rescaled threshold
    Divergence divergence = Divergence::KL;
    double radius = 0.0;
    double reward_scale = 1.0;   // raw = normalized * scale
    double utility_scale = 1.0;
    double raw_threshold = 0.0;

    UncertaintySet uncertainty() const {
        return UncertaintySet(divergence, radius, cmdp.nominal_kernel);
    }
};

using EnvOverrides = std::map<std::string, double>;

/// Coin-toss betting game on balances 0..16; 0 and 16 absorb.
/// Knobs: gamma, radius, threshold, head_prob, initial_balance.
BuiltEnv make_gambler(const EnvOverrides& overrides = {});

/// 40-node chain with slip; left pays reward, right pays utility, with a
/// terminal-node reward bonus. Knobs: gamma, radius, threshold, slip, n_nodes.
BuiltEnv make_nchain(const EnvOverrides& overrides = {});

/// 4x4 frozen lake with absorbing holes and a rewarding goal; utility is
/// collected on the top two rows. Knobs: gamma, radius, threshold,
/// slip (intended-direction probability).
BuiltEnv make_frozenlake(const EnvOverrides& overrides = {});

/// Dispatch by name ("gambler", "nchain", "frozenlake").
BuiltEnv make_env(const std::string& name, const EnvOverrides& overrides = {});

}  // namespace rcmdp
