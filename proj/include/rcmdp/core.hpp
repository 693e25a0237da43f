#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <stdexcept>
#include <string>

// Exact primitives for finite constrained MDPs: transition kernels,
// stochastic policies, and value/advantage/occupancy computation by
// direct linear solves.
namespace rcmdp {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

enum class Signal { reward, utility };

inline const char* to_string(Signal s) {
    return s == Signal::reward ? "reward" : "utility";
}

/// Transition kernel p(s'|s,a), stored row-major with row index s*n_actions+a.
struct Kernel {
    Matrix probs;  // (n_states*n_actions) x n_states
    int n_states = 0;
    int n_actions = 0;

    Kernel() = default;
    Kernel(int states, int actions)
        : probs(Matrix::Zero(states * actions, states)),
          n_states(states),
          n_actions(actions) {}

    Matrix::RowXpr row(int s, int a) { return probs.row(s * n_actions + a); }
    Matrix::ConstRowXpr row(int s, int a) const {
        return probs.row(s * n_actions + a);
    }

    void validate(double tol = 1e-12) const;
};

/// Per-state probability row over actions.
struct StochasticPolicy {
    Matrix probs;  // n_states x n_actions

    StochasticPolicy() = default;
    explicit StochasticPolicy(Matrix p) : probs(std::move(p)) {}

    static StochasticPolicy uniform(int n_states, int n_actions) {
        return StochasticPolicy(
            Matrix::Constant(n_states, n_actions, 1.0 / n_actions));
    }

    int n_states() const { return static_cast<int>(probs.rows()); }
    int n_actions() const { return static_cast<int>(probs.cols()); }

    void validate(double tol = 1e-12) const;
};

/// Finite CMDP: reward and utility signals in [0,1], discount in (0,1),
/// initial distribution rho, and utility threshold d.
struct TabularCMDP {
    int n_states = 0;
    int n_actions = 0;
    Kernel nominal_kernel;
    Matrix reward;   // n_states x n_actions, entries in [0,1]
    Matrix utility;  // n_states x n_actions, entries in [0,1]
    double gamma = 0.95;
    Vector rho;      // initial state distribution
    double threshold_d = 0.0;

    const Matrix& signal(Signal s) const {
        return s == Signal::reward ? reward : utility;
    }

    void validate(double tol = 1e-12) const;
};

/// V, Q, A for one (policy, kernel, signal) triple plus the return under rho.
struct ValueBundle {
    Signal signal = Signal::reward;
    Vector v;           // n_states
    Matrix q;           // n_states x n_actions
    Matrix advantage;   // q - v, rowwise
    double scalar_return = 0.0;
};

/// Exact policy evaluation: solves (I - gamma*P_pi) v = r_pi by dense LU.
ValueBundle evaluate_policy(const TabularCMDP& cmdp, const StochasticPolicy& policy,
                            const Kernel& kernel, Signal signal);

/// Discounted state occupancy: solves d = (1-gamma)*rho + gamma*P_pi^T d.
Vector occupancy(const TabularCMDP& cmdp, const StochasticPolicy& policy,
                 const Kernel& kernel);

/// State-averaged KL divergence sum_s w(s) KL(p(.|s) || q(.|s)).
/// Returns +infinity when p puts mass where q has none.
double policy_kl(const StochasticPolicy& p, const StochasticPolicy& q,
                 const Vector& weights);

/// Deterministic random CMDP generator for property tests.
/// gamma in [0.8, 0.99]; threshold left at 0 for the caller to override.
TabularCMDP make_random_cmdp(std::uint64_t seed, int n_states, int n_actions);

struct DimensionError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};
struct InvariantError : std::logic_error {
    using std::logic_error::logic_error;
};

}  // namespace rcmdp
