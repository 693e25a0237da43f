#include "rcmdp/baselines.hpp"

namespace rcmdp {

PolicyStepResult cpo_update(const TabularCMDP& cmdp, const StochasticPolicy& pi_k,
                            double delta, double dual_tol) {
    return constrained_trust_step(cmdp, pi_k, cmdp.nominal_kernel,
                                  cmdp.nominal_kernel, delta, dual_tol);
}

PolicyStepResult pcpo_update(const TabularCMDP& cmdp, const StochasticPolicy& pi_k,
                             double delta, double dual_tol) {
    UncertaintySet singleton(Divergence::KL, 0.0, cmdp.nominal_kernel);
    PolicyStepResult half = improvement_step(cmdp, singleton, pi_k,
                                             cmdp.nominal_kernel, delta, dual_tol);
    PolicyStepResult proj =
        projection_step(cmdp, singleton, pi_k, half.policy, cmdp.nominal_kernel,
                        cmdp.nominal_kernel, dual_tol);
    if (half.flagged && !proj.flagged) {
        proj.flagged = true;
        proj.flag = half.flag;
    }
    return proj;
}

}  // namespace rcmdp
