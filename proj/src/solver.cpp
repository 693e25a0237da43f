#include "rcmdp/solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace rcmdp {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kOccupancyFloor = 1e-12;

// The projection enforces a first-order model of the constraint; padding the
// target threshold by a small fraction absorbs the second-order remainder so
// accepted iterates satisfy the true constraint, not just its linearization.
// Proportional padding vanishes with the threshold, keeping the zero-threshold
// degenerate cases exact.
constexpr double kThresholdPad = 0.02;

double padded_threshold(const TabularCMDP& cmdp) {
    return cmdp.threshold_d + kThresholdPad * std::abs(cmdp.threshold_d);
}

// Softmax of log(pi_k) + exponent, rowwise, computed in log space. Rows with
// weight zero are left at pi_k.
StochasticPolicy tilt_policy(const StochasticPolicy& pi_k, const Matrix& exponent,
                             const Vector& weights) {
    const int S = pi_k.n_states(), A = pi_k.n_actions();
    Matrix out = pi_k.probs;
    for (int s = 0; s < S; ++s) {
        if (weights(s) <= 0.0) continue;
        double lmax = -kInf;
        Eigen::RowVectorXd logits(A);
        for (int a = 0; a < A; ++a) {
            logits(a) = pi_k.probs(s, a) > 0.0
                            ? std::log(pi_k.probs(s, a)) + exponent(s, a)
                            : -kInf;
            lmax = std::max(lmax, logits(a));
        }
        double z = 0.0;
        for (int a = 0; a < A; ++a) {
            out(s, a) = std::isinf(logits(a)) ? 0.0 : std::exp(logits(a) - lmax);
            z += out(s, a);
        }
        out.row(s) /= z;
    }
    return StochasticPolicy(out);
}

// eta -> 0 limit of the exponential tilt: pi_k renormalized on the advantage
// argmax set, per weighted state.
StochasticPolicy limit_tilt(const StochasticPolicy& pi_k, const Matrix& adv,
                            const Vector& weights) {
    const int S = pi_k.n_states(), A = pi_k.n_actions();
    Matrix out = pi_k.probs;
    for (int s = 0; s < S; ++s) {
        if (weights(s) <= 0.0) continue;
        double amax = -kInf;
        for (int a = 0; a < A; ++a)
            if (pi_k.probs(s, a) > 0.0) amax = std::max(amax, adv(s, a));
        double z = 0.0;
        for (int a = 0; a < A; ++a) {
            bool keep = pi_k.probs(s, a) > 0.0 && adv(s, a) >= amax - 1e-12;
            out(s, a) = keep ? pi_k.probs(s, a) : 0.0;
            z += out(s, a);
        }
        out.row(s) /= z;
    }
    return StochasticPolicy(out);
}

// Exact solve of max_pi sum_s w(s) <pi_s, adv_s> subject to
// sum_s w(s) KL(pi_s || pi_k_s) <= delta, by bisection on the single dual
// multiplier of the KL constraint.
StochasticPolicy trust_tilt_solve(const StochasticPolicy& pi_k, const Matrix& adv,
                                  const Vector& weights, double delta,
                                  double dual_tol) {
    const int S = pi_k.n_states(), A = pi_k.n_actions();
    bool improvable = false;
    for (int s = 0; s < S && !improvable; ++s) {
        if (weights(s) <= 0.0) continue;
        double amax = -kInf, mean = 0.0;
        for (int a = 0; a < A; ++a)
            if (pi_k.probs(s, a) > 0.0) {
                amax = std::max(amax, adv(s, a));
                mean += pi_k.probs(s, a) * adv(s, a);
            }
        if (amax - mean > 1e-13) improvable = true;
    }
    if (!improvable) return pi_k;

    StochasticPolicy limit = limit_tilt(pi_k, adv, weights);
    if (policy_kl(limit, pi_k, weights) <= delta) return limit;

    auto solve_at = [&](double eta) {
        return tilt_policy(pi_k, (adv / eta).eval(), weights);
    };
    double hi = 1.0;
    while (policy_kl(solve_at(hi), pi_k, weights) > delta) hi *= 2.0;
    double lo = hi * 0.5;
    while (policy_kl(solve_at(lo), pi_k, weights) < delta) lo *= 0.5;

    StochasticPolicy best = solve_at(hi);
    for (int it = 0; it < 200; ++it) {
        double mid = 0.5 * (lo + hi);
        StochasticPolicy cand = solve_at(mid);
        double kl = policy_kl(cand, pi_k, weights);
        if (kl > delta) {
            lo = mid;
        } else {
            hi = mid;
            best = cand;
        }
        if (std::abs(kl - delta) <= dual_tol && kl <= delta) {
            best = cand;
            break;
        }
    }
    return best;
}

// Exponential tilts cannot revive an action whose probability has reached
// zero, so a collapse onto the wrong vertex would be irreversible. A tiny
// probability floor keeps every action recoverable without perceptibly
// moving returns.
constexpr double kPolicyFloor = 1e-8;

StochasticPolicy floor_policy(const StochasticPolicy& pi) {
    Matrix probs = pi.probs.cwiseMax(kPolicyFloor);
    for (int s = 0; s < probs.rows(); ++s) probs.row(s) /= probs.row(s).sum();
    return StochasticPolicy(probs);
}

}  // namespace

PolicyStepResult improvement_step(const TabularCMDP& cmdp, const UncertaintySet& u,
                                  const StochasticPolicy& pi_k,
                                  const Kernel& worst_r, double delta,
                                  double dual_tol) {
    (void)u;
    if (delta <= 0.0) throw InvariantError("improvement_step: delta must be > 0");
    ValueBundle bundle = evaluate_policy(cmdp, pi_k, worst_r, Signal::reward);
    Vector d = occupancy(cmdp, pi_k, worst_r);

    // Degenerate if every state with an improvement direction is unvisited.
    bool any_direction = false, reachable_direction = false;
    for (int s = 0; s < cmdp.n_states; ++s) {
        double amax = -kInf, mean = 0.0;
        for (int a = 0; a < cmdp.n_actions; ++a)
            if (pi_k.probs(s, a) > 0.0) {
                amax = std::max(amax, bundle.advantage(s, a));
                mean += pi_k.probs(s, a) * bundle.advantage(s, a);
            }
        if (amax - mean > 1e-13) {
            any_direction = true;
            if (d(s) > kOccupancyFloor) reachable_direction = true;
        }
    }
    if (!reachable_direction) {
        PolicyStepResult out{pi_k, false, ""};
        if (any_direction) {
            out.flagged = true;
            out.flag = "improvement_degenerate_occupancy";
        }
        return out;
    }
    return {floor_policy(
                trust_tilt_solve(pi_k, bundle.advantage, d, delta, dual_tol)),
            false, ""};
}

PolicyStepResult projection_step(const TabularCMDP& cmdp, const UncertaintySet& u,
                                 const StochasticPolicy& pi_k,
                                 const StochasticPolicy& pi_half,
                                 const Kernel& worst_r, const Kernel& worst_c,
                                 double dual_tol, bool literal_constraint_scale) {
    ValueBundle bundle_c = evaluate_policy(cmdp, pi_k, worst_c, Signal::utility);
    Vector d_c = occupancy(cmdp, pi_k, worst_c);
    Vector d_r = occupancy(cmdp, pi_k, worst_r);
    const double factor =
        literal_constraint_scale ? 1.0 : 1.0 / (1.0 - cmdp.gamma);

    // The tilt direction comes from the linearized constraint model, but
    // acceptance is judged against the exact robust utility of the candidate:
    // the first-order model's error grows with the step, and a projection that
    // merely satisfies the model can land well inside the infeasible region.
    auto constraint_margin = [&](const StochasticPolicy& pi) {
        return robust_policy_evaluation(cmdp, u, pi, Signal::utility)
                   .scalar_return -
               padded_threshold(cmdp);
    };

    if (constraint_margin(pi_half) >= -dual_tol) return {pi_half, false, ""};

    // Per-state tilt weight: constraint occupancy relative to the KL weights.
    Matrix scaled_adv(cmdp.n_states, cmdp.n_actions);
    Vector active = Vector::Zero(cmdp.n_states);
    for (int s = 0; s < cmdp.n_states; ++s) {
        double w = factor * d_c(s) / std::max(d_r(s), kOccupancyFloor);
        scaled_adv.row(s) = w * bundle_c.advantage.row(s);
        active(s) = d_c(s) > 0.0 ? 1.0 : 0.0;
    }

    StochasticPolicy limit = floor_policy(limit_tilt(pi_half, scaled_adv, active));
    if (constraint_margin(limit) < -dual_tol) {
        return {limit, true, "projection_infeasible"};
    }

    auto solve_at = [&](double nu) {
        return floor_policy(tilt_policy(pi_half, (nu * scaled_adv).eval(), active));
    };
    double hi = 1.0;
    while (hi < 1e9 && constraint_margin(solve_at(hi)) < 0.0) hi *= 2.0;
    if (hi >= 1e9) return {limit, false, ""};
    double lo = 0.0;
    StochasticPolicy best = solve_at(hi);
    for (int it = 0; it < 60; ++it) {
        double mid = 0.5 * (lo + hi);
        StochasticPolicy cand = solve_at(mid);
        double margin = constraint_margin(cand);
        if (margin < 0.0) {
            lo = mid;
        } else {
            hi = mid;
            best = cand;
            // On the boundary to within a whisker of the exact utility:
            // tighter duals cost a robust evaluation apiece and buy nothing.
            if (margin <= 1e-6 * (1.0 + std::abs(cmdp.threshold_d))) break;
        }
        if (hi - lo <= 1e-12 * std::max(1.0, hi)) break;
    }
    return {best, false, ""};
}

PolicyStepResult constrained_trust_step(const TabularCMDP& cmdp,
                                        const StochasticPolicy& pi_k,
                                        const Kernel& kernel_r,
                                        const Kernel& kernel_c, double delta,
                                        double dual_tol) {
    if (delta <= 0.0)
        throw InvariantError("constrained_trust_step: delta must be > 0");
    ValueBundle bundle_r = evaluate_policy(cmdp, pi_k, kernel_r, Signal::reward);
    ValueBundle bundle_c = evaluate_policy(cmdp, pi_k, kernel_c, Signal::utility);
    Vector d_r = occupancy(cmdp, pi_k, kernel_r);
    Vector d_c = occupancy(cmdp, pi_k, kernel_c);
    const double factor = 1.0 / (1.0 - cmdp.gamma);

    auto constraint_margin = [&](const StochasticPolicy& pi) {
        double adv_term = 0.0;
        for (int s = 0; s < cmdp.n_states; ++s)
            adv_term += d_c(s) * pi.probs.row(s).dot(bundle_c.advantage.row(s));
        return bundle_c.scalar_return + factor * adv_term -
               padded_threshold(cmdp);
    };

    Matrix constraint_adv(cmdp.n_states, cmdp.n_actions);
    for (int s = 0; s < cmdp.n_states; ++s)
        constraint_adv.row(s) = factor * d_c(s) /
                                std::max(d_r(s), kOccupancyFloor) *
                                bundle_c.advantage.row(s);

    auto solve_at = [&](double nu) {
        Matrix adv = bundle_r.advantage + nu * constraint_adv;
        return floor_policy(trust_tilt_solve(pi_k, adv, d_r, delta, dual_tol));
    };

    StochasticPolicy unconstrained = solve_at(0.0);
    if (constraint_margin(unconstrained) >= -dual_tol)
        return {unconstrained, false, ""};

    double hi = 1.0;
    bool found = false;
    for (int it = 0; it < 60; ++it) {
        if (constraint_margin(solve_at(hi)) >= 0.0) {
            found = true;
            break;
        }
        hi *= 2.0;
    }
    if (!found) {
        // Maximal constraint-ascent tilt within the trust region.
        StochasticPolicy recovery = floor_policy(
            trust_tilt_solve(pi_k, constraint_adv, d_r, delta, dual_tol));
        return {recovery, true, "cpo_infeasible"};
    }
    double lo = 0.0;
    StochasticPolicy best = solve_at(hi);
    for (int it = 0; it < 100; ++it) {
        double mid = 0.5 * (lo + hi);
        StochasticPolicy cand = solve_at(mid);
        double margin = constraint_margin(cand);
        if (margin < 0.0) {
            lo = mid;
        } else {
            hi = mid;
            best = cand;
        }
        if (std::abs(margin) <= dual_tol && margin >= -dual_tol) {
            best = cand;
            break;
        }
    }
    return {best, false, ""};
}

StochasticPolicy softmax_policy(const Vector& theta, int n_states, int n_actions) {
    Matrix probs(n_states, n_actions);
    for (int s = 0; s < n_states; ++s) {
        double lmax = -kInf;
        for (int a = 0; a < n_actions; ++a)
            lmax = std::max(lmax, theta(s * n_actions + a));
        double z = 0.0;
        for (int a = 0; a < n_actions; ++a) {
            probs(s, a) = std::exp(theta(s * n_actions + a) - lmax);
            z += probs(s, a);
        }
        probs.row(s) /= z;
    }
    return StochasticPolicy(probs);
}

Vector policy_logits(const StochasticPolicy& policy) {
    const int S = policy.n_states(), A = policy.n_actions();
    Vector theta(S * A);
    for (int s = 0; s < S; ++s)
        for (int a = 0; a < A; ++a) {
            if (policy.probs(s, a) <= 0.0)
                throw InvariantError("policy_logits: zero-probability action");
            theta(s * A + a) = std::log(policy.probs(s, a));
        }
    return theta;
}

namespace {

// Per-state softmax Fisher blocks weighted by d_r, regularized against the
// per-state shift gauge freedom.
struct FisherBlocks {
    std::vector<Matrix> blocks;  // A x A per state

    Vector solve(const Vector& x, int S, int A) const {
        Vector out(S * A);
        for (int s = 0; s < S; ++s)
            out.segment(s * A, A) =
                blocks[s].ldlt().solve(x.segment(s * A, A).eval());
        return out;
    }
};

FisherBlocks fisher_blocks(const StochasticPolicy& pi, const Vector& d_r,
                           double reg = 1e-6) {
    const int S = pi.n_states(), A = pi.n_actions();
    FisherBlocks fb;
    fb.blocks.reserve(S);
    for (int s = 0; s < S; ++s) {
        Vector p = pi.probs.row(s).transpose();
        Matrix h = d_r(s) * (Matrix(p.asDiagonal()) - p * p.transpose());
        h += reg * Matrix::Identity(A, A);
        fb.blocks.push_back(std::move(h));
    }
    return fb;
}

Vector advantage_gradient(const StochasticPolicy& pi, const Vector& weights,
                          const Matrix& adv, double scale) {
    const int S = pi.n_states(), A = pi.n_actions();
    Vector g(S * A);
    for (int s = 0; s < S; ++s) {
        double mean = pi.probs.row(s).dot(adv.row(s));
        for (int a = 0; a < A; ++a)
            g(s * A + a) =
                scale * weights(s) * pi.probs(s, a) * (adv(s, a) - mean);
    }
    return g;
}

}  // namespace

PracticalResult practical_update_with(const TabularCMDP& cmdp,
                                      const Kernel& worst_r, const Kernel& worst_c,
                                      const Vector& theta_k, double delta) {
    const int S = cmdp.n_states, A = cmdp.n_actions;
    StochasticPolicy pi = softmax_policy(theta_k, S, A);
    ValueBundle bundle_r = evaluate_policy(cmdp, pi, worst_r, Signal::reward);
    ValueBundle bundle_c = evaluate_policy(cmdp, pi, worst_c, Signal::utility);
    Vector d_r = occupancy(cmdp, pi, worst_r);
    Vector d_c = occupancy(cmdp, pi, worst_c);
    const double factor = 1.0 / (1.0 - cmdp.gamma);

    Vector g = advantage_gradient(pi, d_r, bundle_r.advantage, 1.0);
    Vector h = advantage_gradient(pi, d_c, bundle_c.advantage, factor);
    FisherBlocks H = fisher_blocks(pi, d_r);

    Vector Hg = H.solve(g, S, A);
    Vector Hh = H.solve(h, S, A);
    double gHg = g.dot(Hg);
    double hHh = h.dot(Hh);
    double hHg = h.dot(Hg);
    double b = cmdp.threshold_d - bundle_c.scalar_return;

    PracticalResult out;
    out.theta = theta_k;
    if (gHg <= 1e-12) {
        out.flagged = true;
        out.flag = "practical_stationary";
        return out;
    }
    double step = std::sqrt(2.0 * delta / gHg);
    out.theta = theta_k + step * Hg;

    // Constraint correction along the natural utility direction, clamped to
    // zero when the trust step already keeps the linearized utility above d.
    double violation = b - step * hHg;
    if (violation > 0.0) {
        if (hHh <= 1e-12) {
            out.flagged = true;
            out.flag = "practical_cannot_project";
            return out;
        }
        out.theta += (violation / hHh) * Hh;
    }
    return out;
}

PracticalResult practical_update(const TabularCMDP& cmdp, const UncertaintySet& u,
                                 const Vector& theta_k, double delta) {
    StochasticPolicy pi = softmax_policy(theta_k, cmdp.n_states, cmdp.n_actions);
    Kernel worst_r =
        robust_policy_evaluation(cmdp, u, pi, Signal::reward).worst_kernel;
    Kernel worst_c =
        robust_policy_evaluation(cmdp, u, pi, Signal::utility).worst_kernel;
    return practical_update_with(cmdp, worst_r, worst_c, theta_k, delta);
}

namespace {

double occupancy_ratio_sup(const Vector& num, const Vector& den) {
    double m = 1.0;
    for (int s = 0; s < num.size(); ++s) {
        bool nz = num(s) > kOccupancyFloor, dz = den(s) > kOccupancyFloor;
        if (!nz && !dz) continue;
        if (!dz) return kInf;
        if (nz) m = std::max(m, num(s) / den(s));
    }
    return m;
}

IterationRecord make_record(const TabularCMDP& cmdp, const UncertaintySet& u,
                            const StochasticPolicy& pi_k,
                            const StochasticPolicy& pi_next,
                            const PgdResult& pgd_r, const PgdResult& pgd_c,
                            const RobustEvalResult& ref_r_k,
                            const RobustEvalResult& ref_c_k,
                            const RobustEvalResult& ref_r_next,
                            const RobustEvalResult& ref_c_next,
                            const RcpoConfig& config) {
    const double gamma = cmdp.gamma;
    IterationRecord rec;

    rec.robust_reward_return = ref_r_next.scalar_return;
    rec.robust_utility_return = ref_c_next.scalar_return;
    rec.nominal_reward_return =
        evaluate_policy(cmdp, pi_next, cmdp.nominal_kernel, Signal::reward)
            .scalar_return;
    rec.nominal_utility_return =
        evaluate_policy(cmdp, pi_next, cmdp.nominal_kernel, Signal::utility)
            .scalar_return;
    rec.constraint_slack_b = cmdp.threshold_d - ref_c_k.scalar_return;
    rec.eps_reward = std::abs(pgd_r.gap);
    rec.eps_utility = std::abs(pgd_c.gap);

    Vector d_pgd_r = occupancy(cmdp, pi_k, pgd_r.kernel);
    rec.realized_kl_step = policy_kl(pi_next, pi_k, d_pgd_r);

    // Occupancy-ratio bound over the kernels materialized this iteration.
    std::vector<Vector> occs;
    occs.push_back(occupancy(cmdp, pi_k, cmdp.nominal_kernel));
    occs.push_back(d_pgd_r);
    occs.push_back(occupancy(cmdp, pi_k, pgd_c.kernel));
    occs.push_back(occupancy(cmdp, pi_k, ref_r_k.worst_kernel));
    occs.push_back(occupancy(cmdp, pi_k, ref_c_k.worst_kernel));
    occs.push_back(occupancy(cmdp, pi_k, ref_r_next.worst_kernel));
    occs.push_back(occupancy(cmdp, pi_k, ref_c_next.worst_kernel));
    double m = 1.0;
    for (const auto& a : occs)
        for (const auto& b2 : occs) m = std::max(m, occupancy_ratio_sup(a, b2));
    rec.m_estimate = m;

    // Theorem epsilon terms: pi_k advantages under pi_{k+1}'s worst kernels,
    // averaged over pi_{k+1}.
    Matrix adv_r =
        evaluate_policy(cmdp, pi_k, ref_r_next.worst_kernel, Signal::reward)
            .advantage;
    Matrix adv_c =
        evaluate_policy(cmdp, pi_k, ref_c_next.worst_kernel, Signal::utility)
            .advantage;
    double eps_thm_r = 0.0, eps_thm_c = 0.0;
    for (int s = 0; s < cmdp.n_states; ++s) {
        eps_thm_r = std::max(
            eps_thm_r, std::abs(pi_next.probs.row(s).dot(adv_r.row(s))));
        eps_thm_c = std::max(
            eps_thm_c, std::abs(pi_next.probs.row(s).dot(adv_c.row(s))));
    }

    // alpha_KL from the softmax Fisher at pi_k.
    {
        ValueBundle bundle_c =
            evaluate_policy(cmdp, pi_k, pgd_c.kernel, Signal::utility);
        Vector d_c = occupancy(cmdp, pi_k, pgd_c.kernel);
        Vector h = advantage_gradient(pi_k, d_c, bundle_c.advantage,
                                      1.0 / (1.0 - gamma));
        FisherBlocks H = fisher_blocks(pi_k, d_pgd_r);
        double hHh = h.dot(H.solve(h, cmdp.n_states, cmdp.n_actions));
        rec.alpha_kl = hHh > 0.0 ? 1.0 / (2.0 * hHh) : kInf;
    }

    const double L_pi =
        std::sqrt(static_cast<double>(cmdp.n_actions)) / ((1.0 - gamma) * (1.0 - gamma));
    const bool feasible = rec.constraint_slack_b <= 0.0;
    const double delta_eff =
        feasible ? config.delta
                 : config.delta + rec.constraint_slack_b *
                                      rec.constraint_slack_b * rec.alpha_kl;
    const double eps_assumption = std::max(rec.eps_reward, rec.eps_utility);
    rec.theorem_reward_rhs =
        -(1.0 / (1.0 - gamma)) * rec.m_estimate *
        (2.0 * L_pi + 2.0 * gamma * eps_thm_r / (1.0 - gamma)) *
        std::sqrt(delta_eff / 2.0);
    rec.theorem_utility_rhs =
        cmdp.threshold_d - eps_assumption -
        (1.0 / (1.0 - gamma)) * rec.m_estimate *
            (3.0 * L_pi + 2.0 * gamma * eps_thm_c / (1.0 - gamma)) *
            std::sqrt(delta_eff / 2.0);

    double realized_improvement =
        ref_r_next.scalar_return - ref_r_k.scalar_return;
    rec.reward_bound_ok = realized_improvement >= rec.theorem_reward_rhs - 1e-6;
    rec.utility_bound_ok =
        ref_c_next.scalar_return >= rec.theorem_utility_rhs - 1e-6;

    if (feasible) {
        rec.kl_lemma_ok = rec.realized_kl_step <= config.delta + 1e-6;
    } else {
        double m_prime = 0.0;
        for (int s = 0; s < cmdp.n_states && std::isfinite(m_prime); ++s)
            for (int a = 0; a < cmdp.n_actions; ++a) {
                if (pi_k.probs(s, a) <= 0.0) continue;
                if (pi_next.probs(s, a) <= 0.0) {
                    m_prime = kInf;
                    break;
                }
                m_prime = std::max(
                    m_prime,
                    std::abs(std::log(pi_next.probs(s, a) / pi_k.probs(s, a))));
            }
        double bound = config.delta +
                       rec.constraint_slack_b * rec.constraint_slack_b *
                           rec.alpha_kl +
                       rec.constraint_slack_b * m_prime *
                           std::sqrt(rec.alpha_kl / 2.0) +
                       1e-6;
        rec.kl_lemma_ok = !(rec.realized_kl_step > bound);
    }
    return rec;
}

void append_flag(std::string& flags, const std::string& f) {
    if (f.empty()) return;
    if (!flags.empty()) flags += "|";
    flags += f;
}

// Rowwise geometric interpolation between two policies; t = 0 gives a and
// t = 1 gives b. Along this path the per-state KL to a grows monotonically,
// so any point of it stays inside a trust region that contains b.
StochasticPolicy geometric_mix(const StochasticPolicy& a,
                               const StochasticPolicy& b, double t) {
    const int S = a.n_states(), A = a.n_actions();
    Matrix probs(S, A);
    for (int s = 0; s < S; ++s) {
        double z = 0.0;
        for (int col = 0; col < A; ++col) {
            double pa = a.probs(s, col), pb = b.probs(s, col);
            probs(s, col) = (pa > 0.0 && pb > 0.0)
                                ? std::exp((1.0 - t) * std::log(pa) +
                                           t * std::log(pb))
                                : 0.0;
            z += probs(s, col);
        }
        probs.row(s) /= z;
    }
    return StochasticPolicy(probs);
}

}  // namespace

TrainResult rcpo_train(const TabularCMDP& cmdp, const UncertaintySet& u,
                       const RcpoConfig& config, const StochasticPolicy& pi_0) {
    config.validate();
    pi_0.validate(1e-9);
    TrainResult out;
    out.final_policy = pi_0;
    if (config.max_iterations == 0) return out;

    StochasticPolicy pi = pi_0;
    RobustEvalResult ref_r =
        robust_policy_evaluation(cmdp, u, pi, Signal::reward);
    RobustEvalResult ref_c =
        robust_policy_evaluation(cmdp, u, pi, Signal::utility);

    // Successive iterates move at most delta in policy space, so the previous
    // adversarial kernels are strong starting points for the next search.
    Kernel warm_r = *u.nominal;
    Kernel warm_c = *u.nominal;
    for (int k = 0; k < config.max_iterations; ++k) {
        const Kernel* init_r = k > 0 ? &warm_r : nullptr;
        const Kernel* init_c = k > 0 ? &warm_c : nullptr;
        PgdResult pgd_r = worst_kernel_pgd(cmdp, pi, u, Signal::reward,
                                           config.pgd_steps, config.pgd_schedule,
                                           config.eps_tol, init_r);
        PgdResult pgd_c = worst_kernel_pgd(cmdp, pi, u, Signal::utility,
                                           config.pgd_steps, config.pgd_schedule,
                                           config.eps_tol, init_c);
        warm_r = pgd_r.kernel;
        warm_c = pgd_c.kernel;

        std::string flags;
        if (!pgd_r.tolerance_met) append_flag(flags, "pgd_reward_tol");
        if (!pgd_c.tolerance_met) append_flag(flags, "pgd_utility_tol");

        StochasticPolicy pi_next = pi;
        if (config.mode == SolverMode::exact_tabular) {
            PolicyStepResult half =
                improvement_step(cmdp, u, pi, pgd_r.kernel, config.delta,
                                 config.dual_bisection_tol);
            append_flag(flags, half.flag);
            PolicyStepResult proj = projection_step(
                cmdp, u, pi, half.policy, pgd_r.kernel, pgd_c.kernel,
                config.dual_bisection_tol, config.literal_constraint_scale);
            append_flag(flags, proj.flag);
            pi_next = proj.policy;
        } else {
            PracticalResult step = practical_update_with(
                cmdp, pgd_r.kernel, pgd_c.kernel, policy_logits(pi),
                config.delta);
            append_flag(flags, step.flag);
            pi_next = softmax_policy(step.theta, cmdp.n_states, cmdp.n_actions);
        }

        RobustEvalResult ref_r_next =
            robust_policy_evaluation(cmdp, u, pi_next, Signal::reward);
        RobustEvalResult ref_c_next =
            robust_policy_evaluation(cmdp, u, pi_next, Signal::utility);

        // The projection satisfies a first-order model of the constraint; if
        // the true robust utility of the accepted step slipped below the
        // threshold while the current iterate satisfies it, backtrack along
        // the geometric path. Restoring to the padded threshold (when
        // reachable) leaves a slack band, so later steps can move along the
        // constraint surface instead of stalling on it.
        if (config.mode == SolverMode::exact_tabular &&
            ref_c.scalar_return >= cmdp.threshold_d &&
            ref_c_next.scalar_return < cmdp.threshold_d) {
            auto bisect = [&](double target, StochasticPolicy& best) {
                double lo = 0.0, hi = 1.0;
                bool found = false;
                for (int it = 0; it < 20; ++it) {
                    double t = 0.5 * (lo + hi);
                    StochasticPolicy cand = geometric_mix(pi, pi_next, t);
                    double val =
                        robust_policy_evaluation(cmdp, u, cand, Signal::utility)
                            .scalar_return;
                    if (val >= target) {
                        lo = t;
                        best = cand;
                        found = true;
                    } else {
                        hi = t;
                    }
                }
                return found;
            };
            StochasticPolicy best = pi;
            bool found = bisect(padded_threshold(cmdp), best) ||
                         bisect(cmdp.threshold_d, best);
            pi_next = best;
            ref_r_next = robust_policy_evaluation(cmdp, u, pi_next,
                                                  Signal::reward);
            ref_c_next = robust_policy_evaluation(cmdp, u, pi_next,
                                                  Signal::utility);
            append_flag(flags, found ? "feasibility_backtrack"
                                     : "feasibility_backtrack_stalled");
        }

        IterationRecord rec =
            make_record(cmdp, u, pi, pi_next, pgd_r, pgd_c, ref_r, ref_c,
                        ref_r_next, ref_c_next, config);
        rec.iteration = k;
        rec.flags = flags;
        out.trace.push_back(std::move(rec));

        pi = pi_next;
        ref_r = ref_r_next;
        ref_c = ref_c_next;
    }
    out.final_policy = pi;
    return out;
}

}  // namespace rcmdp
