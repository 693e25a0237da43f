#include "rcmdp/uncertainty.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

namespace rcmdp {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

double row_divergence(const Eigen::Ref<const Eigen::RowVectorXd>& row,
                      const Eigen::Ref<const Eigen::RowVectorXd>& nominal,
                      Divergence div) {
    if (div == Divergence::TV) return 0.5 * (row - nominal).lpNorm<1>();
    double kl = 0.0;
    for (int i = 0; i < row.size(); ++i) {
        if (row(i) <= 0.0) continue;
        if (nominal(i) <= 0.0) return kInf;
        kl += row(i) * std::log(row(i) / nominal(i));
    }
    return std::max(kl, 0.0);
}

namespace {

// Exponential tilt q_i = p_i exp(-v_i/lambda) / Z, computed with a shifted
// exponent so small lambda underflows toward the argmin instead of NaN.
Eigen::RowVectorXd kl_tilt(const Vector& v,
                           const Eigen::Ref<const Eigen::RowVectorXd>& p,
                           double lambda) {
    double vmin = kInf;
    for (int i = 0; i < p.size(); ++i)
        if (p(i) > 0.0) vmin = std::min(vmin, v(i));
    Eigen::RowVectorXd q = Eigen::RowVectorXd::Zero(p.size());
    double z = 0.0;
    for (int i = 0; i < p.size(); ++i) {
        if (p(i) <= 0.0) continue;
        q(i) = p(i) * std::exp(-(v(i) - vmin) / lambda);
        z += q(i);
    }
    q /= z;
    return q;
}

SupportResult support_min_kl(const Vector& v,
                             const Eigen::Ref<const Eigen::RowVectorXd>& p,
                             double radius) {
    // Tilt divergence KL(q_lambda || p) decreases in lambda; the dual optimum
    // activates the ball constraint, so solve KL(q_lambda || p) = radius.
    const double lambda_floor = 1e-12;
    Eigen::RowVectorXd q_lo = kl_tilt(v, p, lambda_floor);
    if (row_divergence(q_lo, p, Divergence::KL) <= radius) {
        // Concentrating on the argmin set is already feasible.
        return {q_lo.dot(v), q_lo};
    }
    double vmax = -kInf, vmin = kInf;
    for (int i = 0; i < p.size(); ++i)
        if (p(i) > 0.0) {
            vmax = std::max(vmax, v(i));
            vmin = std::min(vmin, v(i));
        }
    double lo = lambda_floor;
    double hi = (vmax - vmin) / radius + 1.0;
    while (row_divergence(kl_tilt(v, p, hi), p, Divergence::KL) > radius)
        hi *= 2.0;
    for (int it = 0; it < 200; ++it) {
        double mid = 0.5 * (lo + hi);
        double kl = row_divergence(kl_tilt(v, p, mid), p, Divergence::KL);
        if (kl > radius)
            lo = mid;
        else
            hi = mid;
        if (hi - lo <= 1e-10 * (1.0 + hi) && std::abs(kl - radius) <= 1e-10)
            break;
    }
    Eigen::RowVectorXd q = kl_tilt(v, p, hi);  // feasible side of the bracket
    return {q.dot(v), q};
}

SupportResult support_min_tv(const Vector& v,
                             const Eigen::Ref<const Eigen::RowVectorXd>& p,
                             double radius) {
    const int n = static_cast<int>(p.size());
    int imin = 0;
    for (int i = 1; i < n; ++i)
        if (v(i) < v(imin)) imin = i;

    Eigen::RowVectorXd q = p;
    double budget = std::min(radius, 1.0 - p(imin));
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
        if (v(a) != v(b)) return v(a) > v(b);
        return a < b;
    });
    for (int i : order) {
        if (budget <= 0.0) break;
        if (i == imin || v(i) <= v(imin)) continue;
        double take = std::min(q(i), budget);
        q(i) -= take;
        q(imin) += take;
        budget -= take;
    }
    return {q.dot(v), q};
}

}  // namespace

SupportResult support_min(const Vector& v,
                          const Eigen::Ref<const Eigen::RowVectorXd>& nominal_row,
                          double radius, Divergence divergence) {
    if (!v.allFinite()) throw InvariantError("support_min: non-finite v entries");
    if ((nominal_row.array() < -1e-12).any() ||
        std::abs(nominal_row.sum() - 1.0) > 1e-9)
        throw InvariantError("support_min: invalid simplex input");
    if (radius < 0.0) throw InvariantError("support_min: radius < 0");
    if (radius == 0.0) return {nominal_row.dot(v), nominal_row};

    double vmin = kInf, vmax = -kInf;
    for (int i = 0; i < nominal_row.size(); ++i)
        if (nominal_row(i) > 0.0) {
            vmin = std::min(vmin, v(i));
            vmax = std::max(vmax, v(i));
        }
    if (vmax - vmin <= 1e-14 * (1.0 + std::abs(vmax)))
        return {nominal_row.dot(v), nominal_row};

    return divergence == Divergence::KL ? support_min_kl(v, nominal_row, radius)
                                        : support_min_tv(v, nominal_row, radius);
}

namespace {

void check_set(const TabularCMDP& cmdp, const UncertaintySet& u) {
    if (u.nominal == nullptr) throw InvariantError("UncertaintySet: no nominal kernel");
    if (u.nominal->n_states != cmdp.n_states ||
        u.nominal->n_actions != cmdp.n_actions)
        throw DimensionError("UncertaintySet: nominal kernel dimension mismatch");
}

}  // namespace

RobustEvalResult robust_policy_evaluation(const TabularCMDP& cmdp,
                                          const UncertaintySet& u,
                                          const StochasticPolicy& policy,
                                          Signal signal, double tol) {
    check_set(cmdp, u);
    const int S = cmdp.n_states, A = cmdp.n_actions;
    const Matrix& sig = cmdp.signal(signal);

    // Adversarial policy iteration: pick the minimizing kernel for the current
    // value estimate, then solve the linear system exactly under it.
    Vector v = Vector::Zero(S);
    Kernel worst(S, A);
    const int max_outer = 1000;
    bool converged = false;
    for (int outer = 0; outer < max_outer; ++outer) {
        for (int s = 0; s < S; ++s)
            for (int a = 0; a < A; ++a)
                worst.row(s, a) =
                    support_min(v, u.nominal->row(s, a), u.radius, u.divergence)
                        .minimizer;
        Vector v_new = evaluate_policy(cmdp, policy, worst, signal).v;
        double gap = (v_new - v).lpNorm<Eigen::Infinity>();
        v = v_new;
        if (gap <= tol) {
            converged = true;
            break;
        }
    }
    if (!converged)
        throw InvariantError("robust_policy_evaluation: iteration cap exceeded");

    // One more minimizer pass at the converged value; residual is the
    // remaining Bellman error under the assembled kernel.
    for (int s = 0; s < S; ++s)
        for (int a = 0; a < A; ++a)
            worst.row(s, a) =
                support_min(v, u.nominal->row(s, a), u.radius, u.divergence)
                    .minimizer;
    RobustEvalResult out;
    out.v_robust = evaluate_policy(cmdp, policy, worst, signal).v;
    out.worst_kernel = worst;
    out.scalar_return = cmdp.rho.dot(out.v_robust);
    double residual = 0.0;
    for (int s = 0; s < S; ++s) {
        double t = 0.0;
        for (int a = 0; a < A; ++a)
            t += policy.probs(s, a) *
                 (sig(s, a) + cmdp.gamma * worst.row(s, a).dot(out.v_robust));
        residual = std::max(residual, std::abs(t - out.v_robust(s)));
    }
    out.residual = residual;
    return out;
}

double robust_vi_sweep(const TabularCMDP& cmdp, const UncertaintySet& u,
                       Signal signal, Vector& v) {
    check_set(cmdp, u);
    const Matrix& sig = cmdp.signal(signal);
    double gap = 0.0;
    Vector v_new(cmdp.n_states);
    for (int s = 0; s < cmdp.n_states; ++s) {
        double best = -kInf;
        for (int a = 0; a < cmdp.n_actions; ++a) {
            double val =
                sig(s, a) +
                cmdp.gamma *
                    support_min(v, u.nominal->row(s, a), u.radius, u.divergence)
                        .value;
            best = std::max(best, val);
        }
        v_new(s) = best;
    }
    gap = (v_new - v).lpNorm<Eigen::Infinity>();
    v = v_new;
    return gap;
}

StochasticPolicy robust_greedy_policy(const TabularCMDP& cmdp,
                                      const UncertaintySet& u, Signal signal,
                                      const Vector& v) {
    const Matrix& sig = cmdp.signal(signal);
    Matrix probs = Matrix::Zero(cmdp.n_states, cmdp.n_actions);
    for (int s = 0; s < cmdp.n_states; ++s) {
        int best_a = 0;
        double best = -kInf;
        for (int a = 0; a < cmdp.n_actions; ++a) {
            double val =
                sig(s, a) +
                cmdp.gamma *
                    support_min(v, u.nominal->row(s, a), u.radius, u.divergence)
                        .value;
            if (val > best + 1e-12) {  // ties go to the lowest index
                best = val;
                best_a = a;
            }
        }
        probs(s, best_a) = 1.0;
    }
    return StochasticPolicy(probs);
}

RobustViResult robust_value_iteration(const TabularCMDP& cmdp,
                                      const UncertaintySet& u, Signal signal,
                                      double tol, int max_sweeps) {
    if (max_sweeps <= 0)
        max_sweeps = static_cast<int>(
            std::ceil(std::log(tol * (1.0 - cmdp.gamma) /
                               (1.0 / (1.0 - cmdp.gamma) + 1.0)) /
                      std::log(cmdp.gamma))) +
                     100;
    RobustViResult out;
    out.v_opt = Vector::Zero(cmdp.n_states);
    for (out.sweeps = 0; out.sweeps < max_sweeps; ++out.sweeps) {
        double gap = robust_vi_sweep(cmdp, u, signal, out.v_opt);
        if (gap <= tol) {
            out.greedy_policy = robust_greedy_policy(cmdp, u, signal, out.v_opt);
            return out;
        }
    }
    throw InvariantError("robust_value_iteration: iteration cap exceeded");
}

Matrix kernel_value_gradient(const TabularCMDP& cmdp,
                             const StochasticPolicy& policy,
                             const Kernel& kernel, Signal signal) {
    Vector d = occupancy(cmdp, policy, kernel);
    Vector v = evaluate_policy(cmdp, policy, kernel, signal).v;
    const int S = cmdp.n_states, A = cmdp.n_actions;
    Matrix grad(S * A, S);
    const double scale = cmdp.gamma / (1.0 - cmdp.gamma);
    for (int s = 0; s < S; ++s)
        for (int a = 0; a < A; ++a)
            grad.row(s * A + a) = scale * d(s) * policy.probs(s, a) * v.transpose();
    return grad;
}

Eigen::RowVectorXd project_simplex(const Eigen::Ref<const Eigen::RowVectorXd>& x) {
    const int n = static_cast<int>(x.size());
    std::vector<double> u(x.data(), x.data() + n);
    std::sort(u.begin(), u.end(), std::greater<double>());
    double cssv = 0.0, theta = 0.0;
    int rho = 0;
    for (int i = 0; i < n; ++i) {
        cssv += u[i];
        double t = (cssv - 1.0) / (i + 1);
        if (u[i] - t > 0.0) {
            rho = i + 1;
            theta = t;
        }
    }
    Eigen::RowVectorXd out(n);
    for (int i = 0; i < n; ++i) out(i) = std::max(x(i) - theta, 0.0);
    (void)rho;
    return out;
}

namespace {

// Euclidean projection onto {q : ||q - c||_1 <= r}.
Eigen::RowVectorXd project_l1_ball(const Eigen::Ref<const Eigen::RowVectorXd>& x,
                                   const Eigen::Ref<const Eigen::RowVectorXd>& c,
                                   double r) {
    Eigen::RowVectorXd z = x - c;
    if (z.lpNorm<1>() <= r) return x;
    const int n = static_cast<int>(z.size());
    std::vector<double> a(n);
    for (int i = 0; i < n; ++i) a[i] = std::abs(z(i));
    std::sort(a.begin(), a.end(), std::greater<double>());
    double cssv = 0.0, tau = 0.0;
    for (int i = 0; i < n; ++i) {
        cssv += a[i];
        double t = (cssv - r) / (i + 1);
        if (a[i] > t) tau = t;
    }
    Eigen::RowVectorXd out(n);
    for (int i = 0; i < n; ++i) {
        double mag = std::max(std::abs(z(i)) - tau, 0.0);
        out(i) = c(i) + (z(i) >= 0.0 ? mag : -mag);
    }
    return out;
}

Eigen::RowVectorXd project_row_tv(const Eigen::Ref<const Eigen::RowVectorXd>& row,
                                  const Eigen::Ref<const Eigen::RowVectorXd>& nom,
                                  double radius, double tol) {
    // Dykstra's alternating projections between the simplex and the l1 ball
    // of radius 2R around the nominal row.
    const int n = static_cast<int>(row.size());
    Eigen::RowVectorXd x = row;
    Eigen::RowVectorXd p = Eigen::RowVectorXd::Zero(n);
    Eigen::RowVectorXd q = Eigen::RowVectorXd::Zero(n);
    for (int it = 0; it < 20000; ++it) {
        Eigen::RowVectorXd y = project_simplex(x + p);
        p = x + p - y;
        Eigen::RowVectorXd x_next = project_l1_ball(y + q, nom, 2.0 * radius);
        q = y + q - x_next;
        double change = (x_next - x).lpNorm<Eigen::Infinity>();
        x = x_next;
        if (change <= tol && (x - y).lpNorm<Eigen::Infinity>() <= tol) break;
    }
    // Clean up residual infeasibility from finite iteration counts.
    x = project_simplex(x);
    double tv = 0.5 * (x - nom).lpNorm<1>();
    if (tv > radius) x = nom + (radius / tv) * (x - nom);
    return x;
}

Eigen::RowVectorXd project_row_kl(const Eigen::Ref<const Eigen::RowVectorXd>& row,
                                  const Eigen::Ref<const Eigen::RowVectorXd>& nom,
                                  double radius, double tol) {
    // Geodesic mixture row_t ~ nom^(1-t) row^t; KL(row_t || nom) grows
    // monotonically from 0 at t=0, so bisect t to land on the ball boundary.
    const int n = static_cast<int>(row.size());
    // Floor the row on the nominal support so the geodesic starts exactly at
    // the nominal row at t=0; otherwise a row that lost support entries makes
    // the bracket degenerate and the bisection can overshoot the ball.
    auto mix = [&](double t) {
        Eigen::RowVectorXd m = Eigen::RowVectorXd::Zero(n);
        double z = 0.0;
        for (int i = 0; i < n; ++i) {
            if (nom(i) <= 0.0) continue;
            double ri = std::max(row(i), 1e-12);
            m(i) = std::exp((1.0 - t) * std::log(nom(i)) + t * std::log(ri));
            z += m(i);
        }
        m /= z;
        return m;
    };
    double lo = 0.0, hi = 1.0;
    for (int it = 0; it < 200; ++it) {
        double mid = 0.5 * (lo + hi);
        double kl = row_divergence(mix(mid), nom, Divergence::KL);
        if (kl > radius)
            hi = mid;
        else
            lo = mid;
        if (std::abs(kl - radius) <= tol) return mix(mid);
    }
    return mix(lo);
}

}  // namespace

Eigen::RowVectorXd project_row(const Eigen::Ref<const Eigen::RowVectorXd>& row,
                               const Eigen::Ref<const Eigen::RowVectorXd>& nominal,
                               double radius, Divergence div, double tol) {
    if ((nominal.array() < -1e-12).any() || std::abs(nominal.sum() - 1.0) > 1e-9)
        throw InvariantError("project_row: invalid nominal row");
    if (row_divergence(row, nominal, div) <= radius) return row;
    if (radius == 0.0) return nominal;
    return div == Divergence::TV ? project_row_tv(row, nominal, radius, tol)
                                 : project_row_kl(row, nominal, radius, tol);
}

Kernel project_kernel(const Kernel& kernel, const UncertaintySet& u, double tol) {
    if (u.nominal == nullptr) throw InvariantError("project_kernel: no nominal");
    Kernel out = kernel;
    for (int s = 0; s < kernel.n_states; ++s)
        for (int a = 0; a < kernel.n_actions; ++a)
            out.row(s, a) = project_row(kernel.row(s, a), u.nominal->row(s, a),
                                        u.radius, u.divergence, tol);
    return out;
}

namespace {

// Exact Euclidean projection onto {q : supp(q) subset of supp(p), sumq = 1,
// KL(q||p) <= R} for one kernel row. The KKT system is solved with an outer
// bisection on the ball multiplier mu and a Newton solve for the
// normalization multiplier nu; for mu > 0 the log term keeps the solution
// strictly positive on the support, so the nonnegativity constraints never
// activate there. One projector is built per row and reused across
// gradient steps: the support pattern, scratch buffers, and the
// multipliers from the previous call all carry over, so the mu search
// starts from a near-exact bracket instead of a cold one.
class KlRowProjector {
  public:
    void init(const Eigen::Ref<const Eigen::RowVectorXd>& p, double radius) {
        n_ = static_cast<int>(p.size());
        radius_ = radius;
        supp_.clear();
        for (int i = 0; i < n_; ++i)
            if (p(i) > 0.0) supp_.push_back(i);
        k_ = static_cast<int>(supp_.size());
        xs_.resize(k_);
        ps_.resize(k_);
        log_ps_.resize(k_);
        q_.resize(k_);
        sorted_.resize(k_);
        for (int i = 0; i < k_; ++i) {
            ps_(i) = p(supp_[i]);
            log_ps_(i) = std::log(ps_(i));
        }
        mu_ = -1.0;
        nu_ = 0.0;
    }

    void project(const Eigen::Ref<const Eigen::RowVectorXd>& x,
                 Eigen::Ref<Eigen::RowVectorXd> out) {
        for (int i = 0; i < k_; ++i) xs_(i) = x(supp_[i]);

        // The face projection is the exact projection when it already lands
        // inside the ball.
        face_simplex_projection();
        if (kl_of_q() <= radius_) {
            emit(out);
            return;
        }
        if (radius_ == 0.0) {
            q_ = ps_;
            emit(out);
            return;
        }

        // KL(q(mu)) decreases in mu: bracket, then root-find in log space
        // with the Illinois variant of regula falsi (bisection fallback).
        double mu_lo, mu_hi, f_lo, f_hi;
        const double mu0 = mu_ > 0.0 ? mu_ : 1.0;
        f_lo = kl_at(mu0) - radius_;
        if (f_lo > 0.0) {
            mu_lo = mu0;
            mu_hi = mu0 * 2.0;
            while ((f_hi = kl_at(mu_hi) - radius_) > 0.0 && mu_hi < 1e12) {
                mu_lo = mu_hi;
                f_lo = f_hi;
                mu_hi *= 4.0;
            }
            if (f_hi > 0.0) f_hi = kl_at(mu_hi) - radius_;
        } else {
            mu_hi = mu0;
            f_hi = f_lo;
            mu_lo = mu0 * 0.5;
            while ((f_lo = kl_at(mu_lo) - radius_) <= 0.0 && mu_lo > 1e-12) {
                mu_hi = mu_lo;
                f_hi = f_lo;
                mu_lo *= 0.25;
            }
        }
        int side = 0;
        double mu_last = mu_hi;
        for (int it = 0; it < 40; ++it) {
            if (mu_hi - mu_lo <= 1e-10 * mu_hi) break;
            double llo = std::log(std::max(mu_lo, 1e-300)), lhi = std::log(mu_hi);
            double lm = f_lo != f_hi ? llo - f_lo * (lhi - llo) / (f_hi - f_lo)
                                     : 0.5 * (llo + lhi);
            if (!(lm > llo && lm < lhi)) lm = 0.5 * (llo + lhi);
            double mu = std::exp(lm);
            double f = kl_at(mu) - radius_;
            mu_last = mu;
            if (f > 0.0) {
                mu_lo = mu;
                f_lo = f;
                if (side == -1) f_hi *= 0.5;  // Illinois weighting
                side = -1;
            } else {
                mu_hi = mu;
                f_hi = f;
                if (side == 1) f_lo *= 0.5;
                side = 1;
            }
        }
        if (mu_last != mu_hi) kl_at(mu_hi);  // recompute q on the feasible side
        mu_ = mu_hi;
        q_ /= q_.sum();
        emit(out);
    }

  private:
    void emit(Eigen::Ref<Eigen::RowVectorXd> out) {
        out.setZero();
        for (int i = 0; i < k_; ++i) out(supp_[i]) = q_(i);
    }

    // q_ = argmin ||q - xs_||^2 over the probability simplex.
    void face_simplex_projection() {
        sorted_ = xs_;
        std::sort(sorted_.data(), sorted_.data() + k_, std::greater<double>());
        double cssv = 0.0, theta = 0.0;
        for (int i = 0; i < k_; ++i) {
            cssv += sorted_(i);
            double t = (cssv - 1.0) / (i + 1);
            if (sorted_(i) > t) theta = t;
        }
        for (int i = 0; i < k_; ++i) q_(i) = std::max(xs_(i) - theta, 0.0);
    }

    double kl_of_q() const {
        double kl = 0.0;
        for (int i = 0; i < k_; ++i)
            if (q_(i) > 0.0) kl += q_(i) * (std::log(q_(i)) - log_ps_(i));
        return kl;
    }

    // componentwise Newton on q_i + mu log(q_i/p_i) = x_i - nu - mu
    void solve_q(double mu, double nu) {
        for (int i = 0; i < k_; ++i) {
            double target = xs_(i) - nu - mu;
            double qi = q_(i) > 0.0 ? q_(i) : std::max(ps_(i), 1e-12);
            for (int it = 0; it < 50; ++it) {
                double h = qi + mu * (std::log(qi) - log_ps_(i)) - target;
                double step = h / (1.0 + mu / qi);
                double next = qi - step;
                if (next <= 0.0) next = qi * 0.5;
                if (std::abs(next - qi) <= 1e-14 * (1.0 + qi)) {
                    qi = next;
                    break;
                }
                qi = next;
            }
            q_(i) = qi;
        }
    }

    // sum q(mu, nu) is strictly decreasing in nu; Newton with bracketing.
    void solve_nu(double mu) {
        double nu = nu_;
        double lo = xs_.minCoeff() - mu - 1.0, hi = xs_.maxCoeff();
        if (nu <= lo || nu >= hi) nu = 0.5 * (lo + hi);
        for (int it = 0; it < 100; ++it) {
            solve_q(mu, nu);
            double s = q_.sum() - 1.0;
            if (std::abs(s) <= 1e-13) break;
            if (s > 0.0)
                lo = nu;
            else
                hi = nu;
            double ds = 0.0;  // d(sumq)/dnu = -sum 1/(1 + mu/q_i)
            for (int i = 0; i < k_; ++i) ds -= 1.0 / (1.0 + mu / q_(i));
            double next = nu - s / ds;
            nu = (next > lo && next < hi) ? next : 0.5 * (lo + hi);
        }
        nu_ = nu;
    }

    double kl_at(double mu) {
        solve_nu(mu);
        return kl_of_q();
    }

    int n_ = 0, k_ = 0;
    double radius_ = 0.0;
    double mu_ = -1.0, nu_ = 0.0;
    std::vector<int> supp_;
    Eigen::RowVectorXd xs_, ps_, log_ps_, q_, sorted_;
};

}  // namespace

PgdResult worst_kernel_pgd(const TabularCMDP& cmdp, const StochasticPolicy& policy,
                           const UncertaintySet& u, Signal signal, int steps,
                           const StepSchedule& schedule, double eps_tol,
                           const Kernel* init) {
    check_set(cmdp, u);
    if (steps < 1) throw InvariantError("worst_kernel_pgd: steps must be >= 1");
    const int S = cmdp.n_states, A = cmdp.n_actions;

    std::vector<KlRowProjector> proj;
    if (u.divergence == Divergence::KL) {
        proj.resize(static_cast<std::size_t>(S) * A);
        for (int s = 0; s < S; ++s)
            for (int a = 0; a < A; ++a)
                proj[s * A + a].init(u.nominal->row(s, a), u.radius);
    }

    const double scale = cmdp.gamma / (1.0 - cmdp.gamma);
    auto run_from = [&](const Kernel& start, PgdResult& out) {
        Kernel current = start;
        Eigen::RowVectorXd stepped(S);
        for (int t = 0;; ++t) {
            // dV(rho)/dp(s'|s,a) = gamma/(1-gamma) * d(s) * pi(a|s) * v(s');
            // the value bundle doubles as this step's gradient input and the
            // running lowest-return tracker.
            ValueBundle ev = evaluate_policy(cmdp, policy, current, signal);
            if (ev.scalar_return < out.achieved_return) {
                out.achieved_return = ev.scalar_return;
                out.kernel = current;
            }
            if (t >= steps) break;
            Vector d = occupancy(cmdp, policy, current);
            const double beta = schedule(t);
            double max_change = 0.0;
            for (int s = 0; s < S; ++s)
                for (int a = 0; a < A; ++a) {
                    double c = beta * scale * d(s) * policy.probs(s, a);
                    stepped = current.row(s, a) - c * ev.v.transpose();
                    Eigen::RowVectorXd next(S);
                    if (u.divergence == Divergence::KL) {
                        // Exact Euclidean projection: the geodesic retraction
                        // can stall at the wrong boundary point on rows with
                        // three or more support states, so descent uses the
                        // true projection onto the ball.
                        proj[s * A + a].project(stepped, next);
                    } else {
                        auto nom = u.nominal->row(s, a);
                        next = project_row(project_simplex(stepped), nom,
                                           u.radius, u.divergence);
                    }
                    max_change = std::max(
                        max_change,
                        (next - current.row(s, a)).cwiseAbs().maxCoeff());
                    current.row(s, a) = next;
                }
            // Fixed point of the projected step: further iterations are
            // no-ops, so evaluate the final kernel once more and stop.
            if (max_change <= 1e-12) {
                ValueBundle last = evaluate_policy(cmdp, policy, current, signal);
                if (last.scalar_return < out.achieved_return) {
                    out.achieved_return = last.scalar_return;
                    out.kernel = current;
                }
                break;
            }
        }
    };

    PgdResult out;
    out.kernel = *u.nominal;
    out.achieved_return = std::numeric_limits<double>::infinity();
    run_from(init != nullptr ? *init : *u.nominal, out);

    double reference =
        robust_policy_evaluation(cmdp, u, policy, signal).scalar_return;
    out.gap = out.achieved_return - reference;
    out.tolerance_met = std::abs(out.gap) <= eps_tol;

    // A warm start biases descent toward the previous adversary's basin; if
    // that basin went stale, rerun from the nominal kernel and keep the
    // lower-return estimate.
    if (init != nullptr && !out.tolerance_met) {
        run_from(*u.nominal, out);
        out.gap = out.achieved_return - reference;
        out.tolerance_met = std::abs(out.gap) <= eps_tol;
    }
    return out;
}

}  // namespace rcmdp
