#pragma once

#include <functional>
#include <utility>

#include "rcmdp/core.hpp"

// (s,a)-rectangular uncertainty sets, exact inner-minimization oracles,
// robust policy evaluation / value iteration, kernel-space value gradients,
// and worst-case-kernel estimation by projected gradient descent.
namespace rcmdp {

enum class Divergence { KL, TV };

inline const char* to_string(Divergence d) {
    return d == Divergence::KL ? "KL" : "TV";
}

/// Divergence ball of uniform radius around the nominal kernel rows.
/// The ball is {q : D(q || nominal_row) <= radius}, per (s,a) independently;
/// TV uses D(q||p) = (1/2)||q - p||_1.
struct UncertaintySet {
    Divergence divergence = Divergence::KL;
    double radius = 0.0;
    const Kernel* nominal = nullptr;

    UncertaintySet() = default;
    UncertaintySet(Divergence div, double r, const Kernel& nom)
        : divergence(div), radius(r), nominal(&nom) {
        if (radius < 0.0) throw InvariantError("UncertaintySet: radius < 0");
    }
};

/// Divergence of a row from a nominal row under the set's convention.
double row_divergence(const Eigen::Ref<const Eigen::RowVectorXd>& row,
                      const Eigen::Ref<const Eigen::RowVectorXd>& nominal,
                      Divergence div);

struct SupportResult {
    double value = 0.0;
    Eigen::RowVectorXd minimizer;
};

/// Per-row inner minimization min_{q in ball} q . v.
/// KL: exponential-tilting dual, ternary search on the dual variable.
/// TV: sorted mass shift from highest-v to the lowest-v support state.
SupportResult support_min(const Vector& v,
                          const Eigen::Ref<const Eigen::RowVectorXd>& nominal_row,
                          double radius, Divergence divergence);

struct RobustEvalResult {
    Vector v_robust;
    Kernel worst_kernel;
    double scalar_return = 0.0;
    double residual = 0.0;
};

/// Fixed-policy robust Bellman fixed point, with the per-row minimizers
/// assembled into the worst-case kernel at convergence.
RobustEvalResult robust_policy_evaluation(const TabularCMDP& cmdp,
                                          const UncertaintySet& u,
                                          const StochasticPolicy& policy,
                                          Signal signal, double tol = 1e-9);

struct RobustViResult {
    Vector v_opt;
    StochasticPolicy greedy_policy;
    int sweeps = 0;
};

/// Robust value iteration to sup-norm tolerance; greedy ties break toward
/// the lowest action index.
RobustViResult robust_value_iteration(const TabularCMDP& cmdp,
                                      const UncertaintySet& u, Signal signal,
                                      double tol = 1e-9, int max_sweeps = 0);

/// One robust optimality sweep in place; returns the sup-norm change.
double robust_vi_sweep(const TabularCMDP& cmdp, const UncertaintySet& u,
                       Signal signal, Vector& v);

/// Greedy deterministic policy for a robust value estimate.
StochasticPolicy robust_greedy_policy(const TabularCMDP& cmdp,
                                      const UncertaintySet& u, Signal signal,
                                      const Vector& v);

/// dV(rho)/dp(s'|s,a) = gamma/(1-gamma) * d(s) * pi(a|s) * v(s'),
/// from one occupancy solve and one value solve. Layout matches Kernel.
Matrix kernel_value_gradient(const TabularCMDP& cmdp,
                             const StochasticPolicy& policy,
                             const Kernel& kernel, Signal signal);

/// Row-wise projection into the uncertainty ball. Rows already inside are
/// returned unchanged; TV uses Dykstra alternating projections in l2,
/// KL uses the geodesic mixture toward the nominal row.
Kernel project_kernel(const Kernel& kernel, const UncertaintySet& u,
                      double tol = 1e-8);

Eigen::RowVectorXd project_row(const Eigen::Ref<const Eigen::RowVectorXd>& row,
                               const Eigen::Ref<const Eigen::RowVectorXd>& nominal,
                               double radius, Divergence div, double tol = 1e-8);

/// Euclidean projection onto the probability simplex.
Eigen::RowVectorXd project_simplex(const Eigen::Ref<const Eigen::RowVectorXd>& x);

using StepSchedule = std::function<double(int)>;

inline StepSchedule default_pgd_schedule() {
    return [](int t) { return 3.0 / (1.0 + t / 200.0); };
}

struct PgdResult {
    Kernel kernel;
    double achieved_return = 0.0;
    bool tolerance_met = true;  // vs the robust-evaluation reference
    double gap = 0.0;           // achieved minus reference return
};

/// Worst-case kernel estimation by projected gradient descent; returns the
/// iterate with the lowest return seen. Descent starts from `init` when given
/// (falling back to a nominal-start rerun if that misses the tolerance) and
/// from the nominal kernel otherwise.
PgdResult worst_kernel_pgd(const TabularCMDP& cmdp, const StochasticPolicy& policy,
                           const UncertaintySet& u, Signal signal, int steps = 200,
                           const StepSchedule& schedule = default_pgd_schedule(),
                           double eps_tol = 1e-3, const Kernel* init = nullptr);

}  // namespace rcmdp
