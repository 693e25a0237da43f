#pragma once

#include "rcmdp/solver.hpp"

// Non-robust baselines for the experiment comparisons: CPO and PCPO under
// the nominal kernel. RVI is provided by the uncertainty module.
namespace rcmdp {

enum class BaselineKind { CPO, PCPO, RVI };

/// One CPO iteration: single-shot trust-region step with the utility
/// constraint active, both evaluated under the nominal kernel.
PolicyStepResult cpo_update(const TabularCMDP& cmdp, const StochasticPolicy& pi_k,
                            double delta, double dual_tol = 1e-8);

/// One PCPO iteration: the RCPO two-step update with the nominal kernel
/// substituted for both worst-case kernels.
PolicyStepResult pcpo_update(const TabularCMDP& cmdp, const StochasticPolicy& pi_k,
                             double delta, double dual_tol = 1e-8);

}  // namespace rcmdp
