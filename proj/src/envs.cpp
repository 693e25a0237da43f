#include "rcmdp/envs.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

namespace rcmdp {

namespace {

double knob(const EnvOverrides& o, const std::string& key, double fallback) {
    auto it = o.find(key);
    return it == o.end() ? fallback : it->second;
}

void check_knobs(const EnvOverrides& o, const std::set<std::string>& allowed,
                 const std::string& env) {
    for (const auto& [key, value] : o) {
        (void)value;
        if (!allowed.count(key))
            throw std::invalid_argument(env + ": unknown override '" + key + "'");
    }
}

// Divide signals by their maxima and rescale the utility threshold by the
// same factor, keeping raw scales around for reporting.
void normalize(BuiltEnv& env, double raw_threshold) {
    double rmax = env.cmdp.reward.maxCoeff();
    double cmax = env.cmdp.utility.maxCoeff();
    env.reward_scale = rmax > 0.0 ? rmax : 1.0;
    env.utility_scale = cmax > 0.0 ? cmax : 1.0;
    env.cmdp.reward /= env.reward_scale;
    env.cmdp.utility /= env.utility_scale;
    env.raw_threshold = raw_threshold;
    env.cmdp.threshold_d = raw_threshold / env.utility_scale;
    env.cmdp.validate(1e-9);
}

}  // namespace

BuiltEnv make_gambler(const EnvOverrides& overrides) {
    check_knobs(overrides,
                {"gamma", "radius", "threshold", "head_prob", "initial_balance"},
                "gambler");
    const double head = knob(overrides, "head_prob", 0.6);
    const int goal = 16;
    const int S = goal + 1;
    const int A = 8;  // stakes 1..8, clipped at the boundaries

    BuiltEnv env;
    env.name = "gambler";
    env.divergence = Divergence::KL;
    env.radius = knob(overrides, "radius", 0.1);

    TabularCMDP& m = env.cmdp;
    m.n_states = S;
    m.n_actions = A;
    m.gamma = knob(overrides, "gamma", 0.95);
    m.nominal_kernel = Kernel(S, A);
    m.reward = Matrix::Zero(S, A);
    m.utility = Matrix::Zero(S, A);

    for (int s = 0; s < S; ++s)
        for (int a = 0; a < A; ++a) {
            auto row = m.nominal_kernel.row(s, a);
            if (s == 0 || s == goal) {
                row(s) = 1.0;  // absorbing, zero signals
                continue;
            }
            int stake = std::min({a + 1, s, goal - s});
            row(s + stake) += head;
            row(s - stake) += 1.0 - head;
            m.reward(s, a) = (s + stake == goal) ? 10.0 * head : 0.0;
            // Only minimum bets earn utility, so the constraint demands
            // patience that fast goal-seeking play never supplies.
            m.utility(s, a) = stake == 1 ? 8.0 : 0.0;
        }

    m.rho = Vector::Zero(S);
    int start = static_cast<int>(knob(overrides, "initial_balance", 8));
    m.rho(std::clamp(start, 0, goal)) = 1.0;

    normalize(env, knob(overrides, "threshold", 2.5));
    return env;
}

BuiltEnv make_nchain(const EnvOverrides& overrides) {
    check_knobs(overrides, {"gamma", "radius", "threshold", "slip", "n_nodes"},
                "nchain");
    const int N = static_cast<int>(knob(overrides, "n_nodes", 40));
    const double slip = knob(overrides, "slip", 0.1);
    const int S = N, A = 2;  // 0 = left, 1 = right

    BuiltEnv env;
    env.name = "nchain";
    env.divergence = Divergence::KL;
    env.radius = knob(overrides, "radius", 0.15);

    TabularCMDP& m = env.cmdp;
    m.n_states = S;
    m.n_actions = A;
    m.gamma = knob(overrides, "gamma", 0.95);
    m.nominal_kernel = Kernel(S, A);
    m.reward = Matrix::Zero(S, A);
    m.utility = Matrix::Zero(S, A);

    const int last = N - 1;
    for (int s = 0; s < S; ++s) {
        int left = std::max(s - 1, 0);
        int right = std::min(s + 1, last);
        for (int a = 0; a < A; ++a) {
            int intended = (a == 0) ? left : right;
            int slipped = (a == 0) ? right : left;
            auto row = m.nominal_kernel.row(s, a);
            row(intended) += 1.0 - slip;
            row(slipped) += slip;
            // Moving left pays (1, 0) and moving right pays (0, 2); a blocked
            // move at either end of the chain pays neither. Being carried to
            // the terminal node adds the bonus reward in expectation.
            bool can_move = (a == 0) ? (s > 0) : (s < last);
            m.reward(s, a) = (a == 0 && can_move ? 1.0 : 0.0) + 10.0 * row(last);
            m.utility(s, a) = (a == 1 && can_move) ? 2.0 : 0.0;
        }
    }

    m.rho = Vector::Zero(S);
    m.rho(0) = 1.0;

    normalize(env, knob(overrides, "threshold", 6.0));
    return env;
}

BuiltEnv make_frozenlake(const EnvOverrides& overrides) {
    check_knobs(overrides, {"gamma", "radius", "threshold", "slip"}, "frozenlake");
    // Standard 4x4 map: SFFF / FHFH / FFFH / HFFG.
    const std::set<int> holes = {5, 7, 11, 12};
    const int goal_cell = 15;
    const int S = 17;  // 16 cells + absorbing terminal
    const int terminal = 16;
    const int A = 4;  // left, down, right, up
    const double intended = knob(overrides, "slip", 0.8);
    const double perp = (1.0 - intended) / 2.0;

    BuiltEnv env;
    env.name = "frozenlake";
    env.divergence = Divergence::KL;
    env.radius = knob(overrides, "radius", 0.1);

    TabularCMDP& m = env.cmdp;
    m.n_states = S;
    m.n_actions = A;
    m.gamma = knob(overrides, "gamma", 0.95);
    m.nominal_kernel = Kernel(S, A);
    m.reward = Matrix::Zero(S, A);
    m.utility = Matrix::Zero(S, A);

    auto move = [&](int cell, int dir) {
        int r = cell / 4, c = cell % 4;
        switch (dir) {
            case 0: c = std::max(c - 1, 0); break;
            case 1: r = std::min(r + 1, 3); break;
            case 2: c = std::min(c + 1, 3); break;
            case 3: r = std::max(r - 1, 0); break;
        }
        return r * 4 + c;
    };

    for (int s = 0; s < S; ++s)
        for (int a = 0; a < A; ++a) {
            auto row = m.nominal_kernel.row(s, a);
            if (s == terminal || holes.count(s)) {
                row(s) = 1.0;
                continue;
            }
            if (s == goal_cell) {
                row(terminal) = 1.0;
                continue;
            }
            row(move(s, a)) += intended;
            row(move(s, (a + 1) % 4)) += perp;
            row(move(s, (a + 3) % 4)) += perp;
            m.reward(s, a) = 200.0 * row(goal_cell);
            // Utility sits on the cell beside the goal: passing through on
            // the way to the goal pays too little discounted utility, so
            // meeting the constraint takes a deliberate pause there that a
            // pure reward-seeker never makes.
            if (s == 14) m.utility(s, a) = 1.0;
        }

    m.rho = Vector::Zero(S);
    m.rho(0) = 1.0;

    normalize(env, knob(overrides, "threshold", 0.7));
    return env;
}

BuiltEnv make_env(const std::string& name, const EnvOverrides& overrides) {
    if (name == "gambler") return make_gambler(overrides);
    if (name == "nchain") return make_nchain(overrides);
    if (name == "frozenlake") return make_frozenlake(overrides);
    throw std::invalid_argument("unknown environment: " + name);
}

}  // namespace rcmdp
