#pragma once

#include <string>
#include <vector>

#include "rcmdp/uncertainty.hpp"

// Robust constrained policy optimization: the exact tabular two-step update
// (trust-region improvement + KL projection onto the robust constraint set),
// the first/second-order parametric update, and per-iteration bound
// diagnostics.
namespace rcmdp {

enum class SolverMode { exact_tabular, practical_parametric };

struct RcpoConfig {
    double delta = 0.01;               // trust-region radius
    int pgd_steps = 200;               // worst-kernel PGD iterations
    StepSchedule pgd_schedule = default_pgd_schedule();
    int max_iterations = 100;          // K
    double eps_tol = 1e-3;             // worst-kernel accuracy target
    SolverMode mode = SolverMode::exact_tabular;
    double dual_bisection_tol = 1e-8;
    // Ablation: drop the 1/(1-gamma) factor from the linearized constraint
    // and use the bare advantage expectation instead.
    bool literal_constraint_scale = false;

    void validate() const {
        if (delta <= 0.0) throw InvariantError("RcpoConfig: delta must be > 0");
        if (eps_tol <= 0.0) throw InvariantError("RcpoConfig: eps_tol must be > 0");
        if (max_iterations < 0) throw InvariantError("RcpoConfig: K must be >= 0");
        if (pgd_steps < 1) throw InvariantError("RcpoConfig: pgd_steps must be >= 1");
    }
};

struct IterationRecord {
    int iteration = 0;
    double robust_reward_return = 0.0;   // updated policy, robust
    double robust_utility_return = 0.0;
    double nominal_reward_return = 0.0;  // updated policy, nominal kernel
    double nominal_utility_return = 0.0;
    double constraint_slack_b = 0.0;     // d - V_c^{pi_k}(rho), <= 0 feasible
    double realized_kl_step = 0.0;
    double eps_reward = 0.0;             // worst-kernel estimation gaps
    double eps_utility = 0.0;
    double m_estimate = 1.0;             // max occupancy ratio, lower bound
    double alpha_kl = 0.0;
    double theorem_reward_rhs = 0.0;
    double theorem_utility_rhs = 0.0;
    bool reward_bound_ok = true;
    bool utility_bound_ok = true;
    bool kl_lemma_ok = true;
    std::string flags;
};

struct PolicyStepResult {
    StochasticPolicy policy;
    bool flagged = false;
    std::string flag;
};

/// Trust-region improvement (exact tabular, exponential-tilt dual):
/// maximize the reward advantage under d^{pi_k}_{worst_r} subject to the
/// averaged-KL constraint.
PolicyStepResult improvement_step(const TabularCMDP& cmdp, const UncertaintySet& u,
                                  const StochasticPolicy& pi_k,
                                  const Kernel& worst_r, double delta,
                                  double dual_tol = 1e-8);

/// KL projection of pi_half onto the linearized robust utility constraint.
PolicyStepResult projection_step(const TabularCMDP& cmdp, const UncertaintySet& u,
                                 const StochasticPolicy& pi_k,
                                 const StochasticPolicy& pi_half,
                                 const Kernel& worst_r, const Kernel& worst_c,
                                 double dual_tol = 1e-8,
                                 bool literal_constraint_scale = false);

/// Exact solve of the single-shot two-constraint trust-region problem
/// (objective weights/advantage from one kernel, utility constraint from
/// another). Used by the CPO baseline and the single-shot ablation.
PolicyStepResult constrained_trust_step(const TabularCMDP& cmdp,
                                        const StochasticPolicy& pi_k,
                                        const Kernel& kernel_r,
                                        const Kernel& kernel_c, double delta,
                                        double dual_tol = 1e-8);

/// Softmax-over-logits policy family helpers (theta of length S*A).
StochasticPolicy softmax_policy(const Vector& theta, int n_states, int n_actions);
Vector policy_logits(const StochasticPolicy& policy);

struct PracticalResult {
    Vector theta;
    bool flagged = false;
    std::string flag;
};

/// Closed-form natural-gradient update with the clamped constraint
/// correction, computed from the given worst-case kernels.
PracticalResult practical_update_with(const TabularCMDP& cmdp,
                                      const Kernel& worst_r, const Kernel& worst_c,
                                      const Vector& theta_k, double delta);

/// Convenience wrapper using the exact worst-case kernels.
PracticalResult practical_update(const TabularCMDP& cmdp, const UncertaintySet& u,
                                 const Vector& theta_k, double delta);

struct TrainResult {
    StochasticPolicy final_policy;
    std::vector<IterationRecord> trace;
};

TrainResult rcpo_train(const TabularCMDP& cmdp, const UncertaintySet& u,
                       const RcpoConfig& config, const StochasticPolicy& pi_0);

}  // namespace rcmdp
