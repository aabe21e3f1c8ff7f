#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <set>
#include <vector>

#include "ppl/envs.hpp"
#include "ppl/network.hpp"
#include "ppl/oracle.hpp"
#include "ppl/train.hpp"

namespace ppl {

/// Wrap a policy network as a toy-task policy.
inline ToyPolicy net_toy_policy(const Network& net) {
    return [&net](double x, double y) {
        const Tensor out = net.predict(Tensor({1, 2}, {x, y}));
        return out.values[0];
    };
}

/// Mean |y| along a toy rollout's visited positions (excluding the start,
/// which is pinned at y = 0). Measures deviation from the straight line.
inline double toy_mean_abs_y(const RolloutResult& r) {
    if (r.trajectory.empty()) return 0.0;
    double s = 0.0;
    std::size_t n = 0;
    for (std::size_t i = 1; i < r.trajectory.size(); ++i) {
        s += std::abs(r.trajectory[i].first[1]);
        ++n;
    }
    // include the final arrival y (the action of the last step)
    s += std::abs(r.trajectory.back().second[0]);
    ++n;
    return s / static_cast<double>(n);
}

/// Distinct dataset actions observed at each tabular state.
inline std::vector<std::vector<std::size_t>> dataset_actions_per_state(
    const OfflineDataset& ds, std::size_t n_states, std::size_t n_actions) {
    std::vector<std::set<std::size_t>> sets(n_states);
    for (const auto& t : ds.transitions)
        sets[argmax_index(t.state)].insert(argmax_index(t.action));
    std::vector<std::vector<std::size_t>> out(n_states);
    for (std::size_t s = 0; s < n_states; ++s)
        out[s].assign(sets[s].begin(), sets[s].end());
    (void)n_actions;
    return out;
}

/// Nearest-dataset-action assignment of pi(s) per tabular state; ties go to
/// the lowest action index.
inline TabularPolicy nearest_action_policy(const Network& policy,
                                           const std::vector<std::vector<std::size_t>>& actions_per_state,
                                           std::size_t n_states, std::size_t n_actions) {
    std::vector<std::size_t> chosen(n_states, 0);
    for (std::size_t s = 0; s < n_states; ++s) {
        const Tensor a = policy.predict(Tensor({1, n_states}, one_hot(s, n_states)));
        double best = std::numeric_limits<double>::infinity();
        std::size_t best_a = actions_per_state[s].empty() ? 0 : actions_per_state[s][0];
        for (auto cand : actions_per_state[s]) {
            double d2 = 0.0;
            for (std::size_t j = 0; j < n_actions; ++j) {
                const double diff = a.values[j] - (j == cand ? 1.0 : 0.0);
                d2 += diff * diff;
            }
            if (d2 < best) {
                best = d2;
                best_a = cand;
            }
        }
        chosen[s] = best_a;
    }
    return TabularPolicy::deterministic(chosen, n_actions);
}

/// Dataset actions "receiving policy mass" at each state: actions whose
/// distance to pi(s) is within mass_tol of the nearest one (near-ties count
/// as covered). Diagnostic behind the w-monotonicity check.
inline std::vector<std::vector<std::size_t>> covered_action_sets(
    const Network& policy, const std::vector<std::vector<std::size_t>>& actions_per_state,
    std::size_t n_states, std::size_t n_actions, double mass_tol = 0.1) {
    std::vector<std::vector<std::size_t>> out(n_states);
    for (std::size_t s = 0; s < n_states; ++s) {
        const Tensor a = policy.predict(Tensor({1, n_states}, one_hot(s, n_states)));
        std::vector<double> dist;
        double best = std::numeric_limits<double>::infinity();
        for (auto cand : actions_per_state[s]) {
            double d2 = 0.0;
            for (std::size_t j = 0; j < n_actions; ++j) {
                const double diff = a.values[j] - (j == cand ? 1.0 : 0.0);
                d2 += diff * diff;
            }
            dist.push_back(std::sqrt(d2));
            best = std::min(best, dist.back());
        }
        for (std::size_t k = 0; k < actions_per_state[s].size(); ++k)
            if (dist[k] <= best + mass_tol) out[s].push_back(actions_per_state[s][k]);
    }
    return out;
}

inline std::size_t total_covered(const std::vector<std::vector<std::size_t>>& sets) {
    std::size_t n = 0;
    for (const auto& s : sets) n += s.size();
    return n;
}

/// Mean potential over the top and bottom Q-decile dataset pairs.
struct DecilePotentials {
    double mean_f_top = 0.0;
    double mean_f_bottom = 0.0;
};

inline DecilePotentials potential_by_q_decile(const OfflineDataset& ds, const Network& q,
                                              const Network& f) {
    const auto batch = ds.make_batch([&] {
        std::vector<std::size_t> all(ds.size());
        for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
        return all;
    }());
    const Tensor sa = concat_cols(batch.states, batch.actions);
    const Tensor qv = q.predict(sa);
    const Tensor fv = f.predict(sa);
    std::vector<std::size_t> order(ds.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return qv.values[a] < qv.values[b]; });
    const std::size_t decile = std::max<std::size_t>(1, ds.size() / 10);
    DecilePotentials out;
    for (std::size_t i = 0; i < decile; ++i) {
        out.mean_f_bottom += fv.values[order[i]];
        out.mean_f_top += fv.values[order[order.size() - 1 - i]];
    }
    out.mean_f_bottom /= static_cast<double>(decile);
    out.mean_f_top /= static_cast<double>(decile);
    return out;
}

}  // namespace ppl
