#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <vector>

#include "ppl/dataset.hpp"

namespace ppl {

inline constexpr double kPi = 3.14159265358979323846;

// ---------------------------------------------------------------------------
// Shortest-path toy task: 50 grid points along the x-axis from -1.3 to 0,
// continuous y. The agent picks a target y for the next grid point and moves
// there at unit speed; every sub-step of length step_length costs one
// discount tick. Only arrival at the target point S_T = (0, 0) is rewarded,
// so geometric path length equals discount depth and the straight line is
// uniquely optimal.

struct ToyPathEnv {
    std::vector<double> x_grid;  // 50 points, -1.3 .. 0
    double step_length;
    double gamma = 0.99;
    double y_low = -1.5;
    double y_high = 1.5;
    double target_tol;  // half a grid cell

    static ToyPathEnv make(std::size_t n_grid = 50, double x_start = -1.3,
                           double x_end = 0.0, double gamma = 0.99) {
        ToyPathEnv env;
        env.gamma = gamma;
        env.x_grid.resize(n_grid);
        for (std::size_t i = 0; i < n_grid; ++i)
            env.x_grid[i] = x_start + (x_end - x_start) * static_cast<double>(i) /
                                          static_cast<double>(n_grid - 1);
        env.step_length = (x_end - x_start) / static_cast<double>(n_grid - 1);
        env.target_tol = 0.5 * env.step_length;
        return env;
    }

    std::size_t n_grid() const { return x_grid.size(); }
    double x_target() const { return x_grid.back(); }

    /// Grid index of a position whose x sits on the grid (to rounding).
    std::size_t grid_index(double x) const {
        std::size_t best = 0;
        double bd = std::abs(x - x_grid[0]);
        for (std::size_t i = 1; i < x_grid.size(); ++i) {
            const double d = std::abs(x - x_grid[i]);
            if (d < bd) {
                bd = d;
                best = i;
            }
        }
        return best;
    }
};

struct ToyPosition {
    double x = 0.0;
    double y = 0.0;
};

/// Unit-speed sub-step positions from `from` to `to`: each tick advances
/// step_length along the segment, the last tick lands exactly on `to`.
inline std::vector<ToyPosition> toy_ticks(ToyPosition from, ToyPosition to,
                                          double step_length) {
    const double dx = to.x - from.x, dy = to.y - from.y;
    const double dist = std::hypot(dx, dy);
    const std::size_t k =
        std::max<std::size_t>(1, static_cast<std::size_t>(
                                     std::ceil(dist / step_length - 1e-12)));
    std::vector<ToyPosition> out;
    out.reserve(k);
    for (std::size_t j = 1; j <= k; ++j) {
        const double frac = std::min(1.0, static_cast<double>(j) * step_length / dist);
        out.push_back({from.x + frac * dx, from.y + frac * dy});
    }
    out.back() = to;
    return out;
}

struct ToyStepResult {
    ToyPosition next;
    double reward = 0.0;
    bool done = false;
    std::size_t ticks = 0;
    bool action_clamped = false;
};

/// One environment step: move from the current grid column to the next,
/// aiming at y = action. Out-of-bounds actions clamp and are flagged.
inline ToyStepResult toy_step(const ToyPathEnv& env, ToyPosition pos, double action) {
    ToyStepResult r;
    double a = action;
    if (a < env.y_low || a > env.y_high) {
        a = std::clamp(a, env.y_low, env.y_high);
        r.action_clamped = true;
    }
    const std::size_t i = env.grid_index(pos.x);
    if (i + 1 >= env.n_grid()) {  // already at the last column
        r.next = pos;
        r.done = true;
        return r;
    }
    const ToyPosition target{env.x_grid[i + 1], a};
    const auto ticks = toy_ticks(pos, target, env.step_length);
    r.next = target;
    r.ticks = ticks.size();
    if (i + 1 == env.n_grid() - 1) {
        r.done = true;
        const double d = std::hypot(target.x - env.x_target(), target.y);
        if (d < env.target_tol) r.reward = 1.0;
    }
    return r;
}

// ---------------------------------------------------------------------------
// Behavior trajectories. Three experts sharing start S_0 = (-1.3, 0) and end
// S_T = (0, 0), each good on a different x-segment so pointwise stitching
// beats every single expert:
//   0: upper half-sine arc (peak +0.8) on the first half, then straight
//   1: straight on the first half, lower half-sine arc (dip -0.8) after
//   2: full-period sine, amplitude 0.5
// Each expert is near the axis on a different x-segment, so the straight
// line (expert 1's first half joined to expert 0's second half) beats all
// three.

inline double toy_expert_y(std::size_t expert, double x, double x_start = -1.3,
                           double x_end = 0.0) {
    const double mid = 0.5 * (x_start + x_end);
    switch (expert) {
        case 0:
            if (x <= mid) return 0.8 * std::sin(kPi * (x - x_start) / (mid - x_start));
            return 0.0;
        case 1:
            if (x >= mid) return -0.8 * std::sin(kPi * (x - mid) / (x_end - mid));
            return 0.0;
        case 2:
            return 0.5 * std::sin(2.0 * kPi * (x - x_start) / (x_end - x_start));
        default:
            throw dataset_error("toy expert index out of range");
    }
}

struct ToyDatasetConfig {
    std::size_t n_grid = 50;
    double x_start = -1.3;
    double x_end = 0.0;
    double gamma = 0.99;
    double noise_sigma = 0.01;
    double action_low = -1.0;
    double action_high = 1.0;
};

/// Generate the toy offline dataset: three expert trajectories recorded at
/// tick granularity. State = (x, y) position, action = the (noisy) target y
/// for the next grid column, held constant along the segment's sub-steps.
/// Exactly the three arrival transitions carry reward 1.
inline OfflineDataset generate_toy_path_dataset(const ToyDatasetConfig& cfg,
                                                std::uint64_t seed) {
    ToyPathEnv env = ToyPathEnv::make(cfg.n_grid, cfg.x_start, cfg.x_end, cfg.gamma);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> noise(0.0, cfg.noise_sigma);

    OfflineDataset ds;
    ds.state_dim = 2;
    ds.action_dim = 1;
    ds.action_low = {cfg.action_low};
    ds.action_high = {cfg.action_high};

    std::vector<std::size_t> traj_lengths;
    for (std::size_t e = 0; e < 3; ++e) {
        ToyPosition pos{env.x_grid[0], 0.0};
        std::size_t len = 0;
        for (std::size_t i = 0; i + 1 < env.n_grid(); ++i) {
            const bool last = (i + 2 == env.n_grid());
            double target = toy_expert_y(e, env.x_grid[i + 1], cfg.x_start, cfg.x_end);
            if (last)
                target = 0.0;  // keep the arrival inside the target tolerance
            else
                target = std::clamp(target + noise(rng), cfg.action_low, cfg.action_high);
            const ToyPosition to{env.x_grid[i + 1], target};
            const auto ticks = toy_ticks(pos, to, env.step_length);
            for (std::size_t j = 0; j < ticks.size(); ++j) {
                Transition t;
                t.state = {pos.x, pos.y};
                t.action = {target};
                t.next_state = {ticks[j].x, ticks[j].y};
                const bool arrival = last && j + 1 == ticks.size();
                t.reward = arrival ? 1.0 : 0.0;
                t.done = arrival;
                ds.transitions.push_back(std::move(t));
                pos = ticks[j];
                ++len;
            }
        }
        traj_lengths.push_back(len);
    }

    ds.metadata = {{"generator", "toy-path"},
                   {"seed", seed},
                   {"n_grid", cfg.n_grid},
                   {"x_start", cfg.x_start},
                   {"x_end", cfg.x_end},
                   {"gamma", cfg.gamma},
                   {"noise_sigma", cfg.noise_sigma},
                   {"experts", 3},
                   {"trajectory_lengths", traj_lengths}};
    ds.validate();
    return ds;
}

/// Split a trajectory-ordered dataset back into trajectories (done flags
/// terminate each one). Used by plotting and evaluation.
inline std::vector<std::vector<ToyPosition>> toy_trajectories(const OfflineDataset& ds) {
    std::vector<std::vector<ToyPosition>> out;
    std::vector<ToyPosition> cur;
    for (const auto& t : ds.transitions) {
        if (cur.empty()) cur.push_back({t.state[0], t.state[1]});
        cur.push_back({t.next_state[0], t.next_state[1]});
        if (t.done) {
            out.push_back(std::move(cur));
            cur.clear();
        }
    }
    if (!cur.empty()) out.push_back(std::move(cur));
    return out;
}

}  // namespace ppl
