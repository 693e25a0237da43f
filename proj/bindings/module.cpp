#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

#include "rcmdp/harness.hpp"

namespace py = pybind11;
using namespace rcmdp;

PYBIND11_MODULE(_rcmdp, m) {
    m.doc() = "robust constrained MDP toolkit (C++ core)";

    py::enum_<Signal>(m, "Signal")
        .value("reward", Signal::reward)
        .value("utility", Signal::utility);

    py::enum_<Divergence>(m, "Divergence")
        .value("KL", Divergence::KL)
        .value("TV", Divergence::TV);

    py::class_<Kernel>(m, "Kernel")
        .def(py::init<>())
        .def(py::init<int, int>(), py::arg("n_states"), py::arg("n_actions"))
        .def_readwrite("probs", &Kernel::probs)
        .def_readwrite("n_states", &Kernel::n_states)
        .def_readwrite("n_actions", &Kernel::n_actions);

    py::class_<StochasticPolicy>(m, "StochasticPolicy")
        .def(py::init<Matrix>())
        .def_static("uniform", &StochasticPolicy::uniform)
        .def_readwrite("probs", &StochasticPolicy::probs);

    py::class_<TabularCMDP>(m, "TabularCMDP")
        .def(py::init<>())
        .def_readwrite("n_states", &TabularCMDP::n_states)
        .def_readwrite("n_actions", &TabularCMDP::n_actions)
        .def_readwrite("gamma", &TabularCMDP::gamma)
        .def_readwrite("reward", &TabularCMDP::reward)
        .def_readwrite("utility", &TabularCMDP::utility)
        .def_readwrite("nominal_kernel", &TabularCMDP::nominal_kernel)
        .def_readwrite("rho", &TabularCMDP::rho)
        .def_readwrite("threshold_d", &TabularCMDP::threshold_d)
        .def("validate", &TabularCMDP::validate);

    py::class_<ValueBundle>(m, "ValueBundle")
        .def_readonly("v", &ValueBundle::v)
        .def_readonly("q", &ValueBundle::q)
        .def_readonly("advantage", &ValueBundle::advantage)
        .def_readonly("scalar_return", &ValueBundle::scalar_return);

    m.def("evaluate_policy", &evaluate_policy, py::arg("cmdp"), py::arg("policy"),
          py::arg("kernel"), py::arg("signal"));
    m.def("occupancy", &occupancy, py::arg("cmdp"), py::arg("policy"),
          py::arg("kernel"));
    m.def("policy_kl", &policy_kl, py::arg("p"), py::arg("q"), py::arg("weights"));

    py::class_<UncertaintySet>(m, "UncertaintySet")
        .def(py::init<Divergence, double, const Kernel&>(), py::arg("divergence"),
             py::arg("radius"), py::arg("nominal"), py::keep_alive<1, 4>())
        .def_readonly("divergence", &UncertaintySet::divergence)
        .def_readonly("radius", &UncertaintySet::radius);

    py::class_<SupportResult>(m, "SupportResult")
        .def_readonly("value", &SupportResult::value)
        .def_readonly("minimizer", &SupportResult::minimizer);

    m.def(
        "support_min",
        [](const Vector& v, const Eigen::RowVectorXd& nominal_row, double radius,
           Divergence div) { return support_min(v, nominal_row, radius, div); },
        py::arg("values"), py::arg("nominal_row"), py::arg("radius"),
        py::arg("divergence"));

    py::class_<RobustEvalResult>(m, "RobustEvalResult")
        .def_readonly("v_robust", &RobustEvalResult::v_robust)
        .def_readonly("worst_kernel", &RobustEvalResult::worst_kernel)
        .def_readonly("scalar_return", &RobustEvalResult::scalar_return)
        .def_readonly("residual", &RobustEvalResult::residual);

    m.def("robust_policy_evaluation", &robust_policy_evaluation, py::arg("cmdp"),
          py::arg("set"), py::arg("policy"), py::arg("signal"),
          py::arg("tol") = 1e-9);
    py::class_<RobustViResult>(m, "RobustViResult")
        .def_readonly("v_opt", &RobustViResult::v_opt)
        .def_readonly("greedy_policy", &RobustViResult::greedy_policy)
        .def_readonly("sweeps", &RobustViResult::sweeps);

    m.def("robust_value_iteration", &robust_value_iteration, py::arg("cmdp"),
          py::arg("set"), py::arg("signal"), py::arg("tol") = 1e-9,
          py::arg("max_sweeps") = 0);
    m.def("project_kernel", &project_kernel, py::arg("kernel"), py::arg("set"),
          py::arg("tol") = 1e-8);

    py::class_<PgdResult>(m, "PgdResult")
        .def_readonly("kernel", &PgdResult::kernel)
        .def_readonly("achieved_return", &PgdResult::achieved_return)
        .def_readonly("tolerance_met", &PgdResult::tolerance_met)
        .def_readonly("gap", &PgdResult::gap);

    m.def(
        "worst_kernel_pgd",
        [](const TabularCMDP& cmdp, const StochasticPolicy& pi,
           const UncertaintySet& u, Signal sig, int steps, double eps_tol) {
            return worst_kernel_pgd(cmdp, pi, u, sig, steps,
                                    default_pgd_schedule(), eps_tol);
        },
        py::arg("cmdp"), py::arg("policy"), py::arg("set"), py::arg("signal"),
        py::arg("steps") = 200, py::arg("eps_tol") = 1e-3);

    py::enum_<SolverMode>(m, "SolverMode")
        .value("exact_tabular", SolverMode::exact_tabular)
        .value("practical_parametric", SolverMode::practical_parametric);

    py::class_<RcpoConfig>(m, "RcpoConfig")
        .def(py::init<>())
        .def_readwrite("delta", &RcpoConfig::delta)
        .def_readwrite("pgd_steps", &RcpoConfig::pgd_steps)
        .def_readwrite("max_iterations", &RcpoConfig::max_iterations)
        .def_readwrite("eps_tol", &RcpoConfig::eps_tol)
        .def_readwrite("mode", &RcpoConfig::mode)
        .def_readwrite("dual_bisection_tol", &RcpoConfig::dual_bisection_tol)
        .def_readwrite("literal_constraint_scale",
                       &RcpoConfig::literal_constraint_scale);

    py::class_<IterationRecord>(m, "IterationRecord")
        .def_readonly("iteration", &IterationRecord::iteration)
        .def_readonly("robust_reward_return", &IterationRecord::robust_reward_return)
        .def_readonly("robust_utility_return",
                      &IterationRecord::robust_utility_return)
        .def_readonly("nominal_reward_return",
                      &IterationRecord::nominal_reward_return)
        .def_readonly("nominal_utility_return",
                      &IterationRecord::nominal_utility_return)
        .def_readonly("constraint_slack_b", &IterationRecord::constraint_slack_b)
        .def_readonly("realized_kl_step", &IterationRecord::realized_kl_step)
        .def_readonly("eps_reward", &IterationRecord::eps_reward)
        .def_readonly("eps_utility", &IterationRecord::eps_utility)
        .def_readonly("m_estimate", &IterationRecord::m_estimate)
        .def_readonly("theorem_reward_rhs", &IterationRecord::theorem_reward_rhs)
        .def_readonly("theorem_utility_rhs", &IterationRecord::theorem_utility_rhs)
        .def_readonly("reward_bound_ok", &IterationRecord::reward_bound_ok)
        .def_readonly("utility_bound_ok", &IterationRecord::utility_bound_ok)
        .def_readonly("kl_lemma_ok", &IterationRecord::kl_lemma_ok)
        .def_readonly("flags", &IterationRecord::flags);

    py::class_<TrainResult>(m, "TrainResult")
        .def_readonly("final_policy", &TrainResult::final_policy)
        .def_readonly("trace", &TrainResult::trace);

    m.def("rcpo_train", &rcpo_train, py::arg("cmdp"), py::arg("set"),
          py::arg("config"), py::arg("pi_0"));

    py::class_<PolicyStepResult>(m, "PolicyStepResult")
        .def_readonly("policy", &PolicyStepResult::policy)
        .def_readonly("flagged", &PolicyStepResult::flagged)
        .def_readonly("flag", &PolicyStepResult::flag);

    m.def("cpo_update", &cpo_update, py::arg("cmdp"), py::arg("pi_k"),
          py::arg("delta"), py::arg("dual_tol") = 1e-8);
    m.def("pcpo_update", &pcpo_update, py::arg("cmdp"), py::arg("pi_k"),
          py::arg("delta"), py::arg("dual_tol") = 1e-8);

    py::class_<BuiltEnv>(m, "BuiltEnv")
        .def_readonly("name", &BuiltEnv::name)
        .def_readonly("cmdp", &BuiltEnv::cmdp)
        .def_readonly("divergence", &BuiltEnv::divergence)
        .def_readonly("radius", &BuiltEnv::radius)
        .def_readonly("reward_scale", &BuiltEnv::reward_scale)
        .def_readonly("utility_scale", &BuiltEnv::utility_scale)
        .def_readonly("raw_threshold", &BuiltEnv::raw_threshold)
        .def("uncertainty", &BuiltEnv::uncertainty, py::keep_alive<0, 1>());

    m.def("make_env", &make_env, py::arg("name"),
          py::arg("overrides") = EnvOverrides{});

    m.def("load_config", &load_config, py::arg("file"));
    m.def("run_experiment", &run_experiment, py::arg("config"),
          py::call_guard<py::gil_scoped_release>());
    m.def(
        "check_bounds",
        [](const std::filesystem::path& dir) {
            std::ostringstream out;
            bool ok = check_bounds(dir, out);
            return py::make_tuple(ok, out.str());
        },
        py::arg("trace_dir"));
    m.def("emit_plots", &emit_plots, py::arg("trace_dir"));

    py::class_<EnvSpecConfig>(m, "EnvSpecConfig")
        .def(py::init<>())
        .def_readwrite("name", &EnvSpecConfig::name)
        .def_readwrite("overrides", &EnvSpecConfig::overrides);

    py::class_<ExperimentConfig>(m, "ExperimentConfig")
        .def(py::init<>())
        .def_readwrite("env", &ExperimentConfig::env)
        .def_readwrite("algorithms", &ExperimentConfig::algorithms)
        .def_readwrite("seeds", &ExperimentConfig::seeds)
        .def_readwrite("rcpo", &ExperimentConfig::rcpo)
        .def_readwrite("output_dir", &ExperimentConfig::output_dir)
        .def_readwrite("emit_plots_flag", &ExperimentConfig::emit_plots_flag)
        .def_readwrite("eval_every", &ExperimentConfig::eval_every);
}
