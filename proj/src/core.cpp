#include "rcmdp/core.hpp"

#include <cmath>
#include <limits>
#include <random>

namespace rcmdp {

namespace {

void check_simplex_row(const Eigen::Ref<const Eigen::RowVectorXd>& row,
                       double tol, const std::string& what) {
    if ((row.array() < -tol).any())
        throw InvariantError(what + ": negative entry");
    if (std::abs(row.sum() - 1.0) > tol)
        throw InvariantError(what + ": row does not sum to 1");
}

}  // namespace

void Kernel::validate(double tol) const {
    if (probs.rows() != static_cast<long>(n_states) * n_actions ||
        probs.cols() != n_states)
        throw DimensionError("Kernel: shape mismatch");
    for (int i = 0; i < probs.rows(); ++i)
        check_simplex_row(probs.row(i), tol, "Kernel row " + std::to_string(i));
}

void StochasticPolicy::validate(double tol) const {
    for (int s = 0; s < probs.rows(); ++s)
        check_simplex_row(probs.row(s), tol, "Policy row " + std::to_string(s));
}

void TabularCMDP::validate(double tol) const {
    if (gamma <= 0.0 || gamma >= 1.0)
        throw InvariantError("TabularCMDP: gamma must lie strictly in (0,1)");
    if (reward.rows() != n_states || reward.cols() != n_actions ||
        utility.rows() != n_states || utility.cols() != n_actions)
        throw DimensionError("TabularCMDP: signal shape mismatch");
    if ((reward.array() < -tol).any() || (reward.array() > 1.0 + tol).any())
        throw InvariantError("TabularCMDP: reward entries outside [0,1]");
    if ((utility.array() < -tol).any() || (utility.array() > 1.0 + tol).any())
        throw InvariantError("TabularCMDP: utility entries outside [0,1]");
    if (rho.size() != n_states)
        throw DimensionError("TabularCMDP: rho size mismatch");
    check_simplex_row(rho.transpose(), tol, "rho");
    if (threshold_d < 0.0)
        throw InvariantError("TabularCMDP: threshold_d must be >= 0");
    if (nominal_kernel.n_states != n_states ||
        nominal_kernel.n_actions != n_actions)
        throw DimensionError("TabularCMDP: kernel dimensions mismatch");
    nominal_kernel.validate(tol);
}

namespace {

void check_dims(const TabularCMDP& cmdp, const StochasticPolicy& policy,
                const Kernel& kernel) {
    if (policy.n_states() != cmdp.n_states ||
        policy.n_actions() != cmdp.n_actions)
        throw DimensionError("policy dimensions do not match cmdp");
    if (kernel.n_states != cmdp.n_states || kernel.n_actions != cmdp.n_actions)
        throw DimensionError("kernel dimensions do not match cmdp");
}

// State-to-state chain P_pi(s,s') = sum_a pi(a|s) p(s'|s,a).
Matrix policy_chain(const StochasticPolicy& policy, const Kernel& kernel) {
    const int S = kernel.n_states, A = kernel.n_actions;
    Matrix chain = Matrix::Zero(S, S);
    for (int s = 0; s < S; ++s)
        for (int a = 0; a < A; ++a)
            chain.row(s) += policy.probs(s, a) * kernel.row(s, a);
    return chain;
}

}  // namespace

ValueBundle evaluate_policy(const TabularCMDP& cmdp, const StochasticPolicy& policy,
                            const Kernel& kernel, Signal signal) {
    check_dims(cmdp, policy, kernel);
    const int S = cmdp.n_states, A = cmdp.n_actions;
    const Matrix& sig = cmdp.signal(signal);

    Matrix chain = policy_chain(policy, kernel);
    Vector r_pi = (policy.probs.array() * sig.array()).rowwise().sum();

    Matrix system = Matrix::Identity(S, S) - cmdp.gamma * chain;
    ValueBundle out;
    out.signal = signal;
    out.v = system.partialPivLu().solve(r_pi);

    out.q = Matrix(S, A);
    for (int s = 0; s < S; ++s)
        for (int a = 0; a < A; ++a)
            out.q(s, a) = sig(s, a) + cmdp.gamma * kernel.row(s, a).dot(out.v);
    out.advantage = out.q.colwise() - out.v;
    out.scalar_return = cmdp.rho.dot(out.v);
    return out;
}

Vector occupancy(const TabularCMDP& cmdp, const StochasticPolicy& policy,
                 const Kernel& kernel) {
    check_dims(cmdp, policy, kernel);
    const int S = cmdp.n_states;
    Matrix chain = policy_chain(policy, kernel);
    Matrix system = Matrix::Identity(S, S) - cmdp.gamma * chain.transpose();
    Vector d = system.partialPivLu().solve(((1.0 - cmdp.gamma) * cmdp.rho).eval());
    // Clip solver noise; the exact solution is a probability vector.
    d = d.cwiseMax(0.0);
    return d;
}

double policy_kl(const StochasticPolicy& p, const StochasticPolicy& q,
                 const Vector& weights) {
    if (p.probs.rows() != q.probs.rows() || p.probs.cols() != q.probs.cols() ||
        weights.size() != p.probs.rows())
        throw DimensionError("policy_kl: dimension mismatch");
    double total = 0.0;
    for (int s = 0; s < p.probs.rows(); ++s) {
        if (weights(s) == 0.0) continue;
        double kl = 0.0;
        for (int a = 0; a < p.probs.cols(); ++a) {
            double ps = p.probs(s, a);
            if (ps == 0.0) continue;  // 0*log(0/x) = 0
            double qs = q.probs(s, a);
            if (qs == 0.0) return std::numeric_limits<double>::infinity();
            kl += ps * std::log(ps / qs);
        }
        total += weights(s) * std::max(kl, 0.0);
    }
    return std::max(total, 0.0);
}

TabularCMDP make_random_cmdp(std::uint64_t seed, int n_states, int n_actions) {
    if (n_states < 1 || n_actions < 1)
        throw DimensionError("make_random_cmdp: need at least one state and action");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    TabularCMDP cmdp;
    cmdp.n_states = n_states;
    cmdp.n_actions = n_actions;
    cmdp.gamma = 0.8 + 0.19 * unit(rng);
    cmdp.threshold_d = 0.0;

    cmdp.nominal_kernel = Kernel(n_states, n_actions);
    auto random_simplex = [&](auto&& row) {
        for (int i = 0; i < row.size(); ++i)
            row(i) = -std::log(std::max(unit(rng), 1e-300));
        row /= row.sum();
    };
    for (int s = 0; s < n_states; ++s)
        for (int a = 0; a < n_actions; ++a)
            random_simplex(cmdp.nominal_kernel.row(s, a));

    cmdp.reward = Matrix(n_states, n_actions);
    cmdp.utility = Matrix(n_states, n_actions);
    for (int s = 0; s < n_states; ++s)
        for (int a = 0; a < n_actions; ++a) {
            cmdp.reward(s, a) = unit(rng);
            cmdp.utility(s, a) = unit(rng);
        }

    cmdp.rho = Vector(n_states);
    random_simplex(cmdp.rho.transpose());
    cmdp.validate();
    return cmdp;
}

}  // namespace rcmdp
