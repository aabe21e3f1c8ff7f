#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <vector>

#include "ppl/oracle.hpp"
#include "ppl/tabular.hpp"
#include "ppl/tensor.hpp"
#include "ppl/toy.hpp"

namespace ppl {

/// Outcome of one evaluation episode.
struct RolloutResult {
    double discounted_return = 0.0;
    double undiscounted_return = 0.0;
    std::size_t steps = 0;
    std::vector<std::pair<std::vector<double>, std::vector<double>>> trajectory;
    std::vector<double> rewards;      // per step, aligned with trajectory
    std::vector<std::size_t> ticks;   // discount ticks consumed per step
    bool reached_target = false;
    bool action_clamped = false;

    /// Recompute the discounted return from the recorded rewards and ticks.
    double recompute_discounted(double gamma) const {
        double ret = 0.0;
        std::size_t total = 0;
        for (std::size_t i = 0; i < rewards.size(); ++i) {
            total += ticks[i];
            if (rewards[i] != 0.0)
                ret += std::pow(gamma, static_cast<double>(total - 1)) * rewards[i];
        }
        return ret;
    }
};

/// A policy for the toy task: position (x, y) -> target y.
using ToyPolicy = std::function<double(double x, double y)>;

/// Roll the toy environment. Deterministic for deterministic policies.
inline RolloutResult rollout(const ToyPathEnv& env, const ToyPolicy& policy,
                             std::size_t max_steps) {
    RolloutResult r;
    ToyPosition pos{env.x_grid.front(), 0.0};
    std::size_t total_ticks = 0;
    for (std::size_t step = 0; step < max_steps; ++step) {
        const double a = policy(pos.x, pos.y);
        const ToyStepResult sr = toy_step(env, pos, a);
        r.trajectory.push_back({{pos.x, pos.y}, {a}});
        r.rewards.push_back(sr.reward);
        r.ticks.push_back(sr.ticks);
        r.action_clamped = r.action_clamped || sr.action_clamped;
        total_ticks += sr.ticks;
        if (sr.reward != 0.0) {
            r.discounted_return +=
                std::pow(env.gamma, static_cast<double>(total_ticks - 1)) * sr.reward;
            r.undiscounted_return += sr.reward;
            r.reached_target = true;
        }
        pos = sr.next;
        ++r.steps;
        if (sr.done) break;
    }
    return r;
}

/// Replay policy: at grid column i, emit a recorded target for column i+1.
inline ToyPolicy toy_replay_policy(const ToyPathEnv& env, std::vector<double> targets) {
    return [env, targets = std::move(targets)](double x, double /*y*/) {
        const std::size_t i = env.grid_index(x);
        return targets[std::min(i + 1, targets.size() - 1)];
    };
}

/// Targets of an expert's nominal curve at every grid column.
inline std::vector<double> toy_expert_targets(const ToyPathEnv& env, std::size_t expert,
                                              double x_start = -1.3, double x_end = 0.0) {
    std::vector<double> t(env.n_grid());
    for (std::size_t i = 0; i < env.n_grid(); ++i)
        t[i] = toy_expert_y(expert, env.x_grid[i], x_start, x_end);
    t.back() = 0.0;
    return t;
}

/// Roll a tabular policy on the exact MDP; the horizon is chosen so the
/// truncation error stays below trunc_tol.
inline RolloutResult rollout(const TabularMdp& mdp, const TabularPolicy& policy,
                             std::size_t start_state, double trunc_tol = 1e-12) {
    double rmax = 0.0;
    for (const auto& row : mdp.reward)
        for (double v : row) rmax = std::max(rmax, std::abs(v));
    std::size_t horizon = 1;
    if (rmax > 0.0) {
        const double tail = trunc_tol * (1.0 - mdp.gamma) / rmax;
        horizon = static_cast<std::size_t>(std::ceil(std::log(tail) / std::log(mdp.gamma))) + 1;
    }

    RolloutResult r;
    std::size_t s = start_state;
    double disc = 1.0;
    for (std::size_t t = 0; t < horizon && !mdp.terminal[s]; ++t) {
        const std::size_t a = policy.action_of(s);
        const double rew = mdp.reward[s][a];
        r.trajectory.push_back({one_hot(s, mdp.n_states), one_hot(a, mdp.n_actions)});
        r.rewards.push_back(rew);
        r.ticks.push_back(1);
        r.discounted_return += disc * rew;
        r.undiscounted_return += rew;
        disc *= mdp.gamma;
        s = mdp.next[s][a];
        ++r.steps;
    }
    r.reached_target = mdp.terminal[s];
    return r;
}

}  // namespace ppl
