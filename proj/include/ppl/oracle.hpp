#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "ppl/tabular.hpp"

namespace ppl {

struct oracle_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Tabular policy as a per-state action distribution; deterministic policies
/// are one-hot rows.
struct TabularPolicy {
    std::vector<std::vector<double>> probs;  // [state][action]

    static TabularPolicy deterministic(const std::vector<std::size_t>& actions,
                                       std::size_t n_actions) {
        TabularPolicy p;
        p.probs.reserve(actions.size());
        for (auto a : actions) p.probs.push_back(one_hot(a, n_actions));
        return p;
    }

    static TabularPolicy uniform_over_support(const SupportSpec& support,
                                              std::size_t n_actions) {
        TabularPolicy p;
        p.probs.reserve(support.size());
        for (const auto& acts : support) {
            std::vector<double> row(n_actions, 0.0);
            for (auto a : acts) row[a] = 1.0 / static_cast<double>(acts.size());
            p.probs.push_back(std::move(row));
        }
        return p;
    }

    std::size_t action_of(std::size_t s) const { return argmax_index(probs[s]); }

    void validate(std::size_t n_states, std::size_t n_actions) const {
        if (probs.size() != n_states) throw oracle_error("policy: state count mismatch");
        for (const auto& row : probs) {
            if (row.size() != n_actions) throw oracle_error("policy: action count mismatch");
            double sum = 0.0;
            for (double v : row) {
                if (v < 0.0) throw oracle_error("policy: negative probability");
                sum += v;
            }
            if (std::abs(sum - 1.0) > 1e-12)
                throw oracle_error("policy: row does not sum to 1");
        }
    }
};

struct ValueTable {
    std::vector<double> V;
    std::vector<std::vector<double>> Q;
};

/// Exact policy evaluation by iterating the Bellman operator to a sup-norm
/// residual below tol (contraction, gamma < 1).
inline ValueTable policy_evaluation(const TabularMdp& mdp, const TabularPolicy& policy,
                                    double tol = 1e-12) {
    policy.validate(mdp.n_states, mdp.n_actions);
    std::vector<double> V(mdp.n_states, 0.0);
    for (;;) {
        double resid = 0.0;
        std::vector<double> Vn(mdp.n_states, 0.0);
        for (std::size_t s = 0; s < mdp.n_states; ++s) {
            double v = 0.0;
            for (std::size_t a = 0; a < mdp.n_actions; ++a) {
                const double p = policy.probs[s][a];
                if (p == 0.0) continue;
                v += p * (mdp.reward[s][a] + mdp.gamma * V[mdp.next[s][a]]);
            }
            Vn[s] = v;
            resid = std::max(resid, std::abs(Vn[s] - V[s]));
        }
        V = std::move(Vn);
        if (resid <= tol) break;
    }
    ValueTable t;
    t.V = V;
    t.Q.resize(mdp.n_states);
    for (std::size_t s = 0; s < mdp.n_states; ++s) {
        t.Q[s].resize(mdp.n_actions);
        for (std::size_t a = 0; a < mdp.n_actions; ++a)
            t.Q[s][a] = mdp.reward[s][a] + mdp.gamma * V[mdp.next[s][a]];
    }
    return t;
}

/// Value iteration; returns the optimal value table and a greedy policy
/// (ties resolved toward the lowest action index).
inline std::pair<ValueTable, TabularPolicy> value_iteration(const TabularMdp& mdp,
                                                            double tol = 1e-12) {
    std::vector<double> V(mdp.n_states, 0.0);
    for (;;) {
        double resid = 0.0;
        std::vector<double> Vn(mdp.n_states, 0.0);
        for (std::size_t s = 0; s < mdp.n_states; ++s) {
            double best = -std::numeric_limits<double>::infinity();
            for (std::size_t a = 0; a < mdp.n_actions; ++a)
                best = std::max(best, mdp.reward[s][a] + mdp.gamma * V[mdp.next[s][a]]);
            Vn[s] = best;
            resid = std::max(resid, std::abs(Vn[s] - V[s]));
        }
        V = std::move(Vn);
        if (resid <= tol) break;
    }
    ValueTable t;
    t.V = V;
    t.Q.resize(mdp.n_states);
    std::vector<std::size_t> greedy(mdp.n_states, 0);
    for (std::size_t s = 0; s < mdp.n_states; ++s) {
        t.Q[s].resize(mdp.n_actions);
        for (std::size_t a = 0; a < mdp.n_actions; ++a) {
            t.Q[s][a] = mdp.reward[s][a] + mdp.gamma * V[mdp.next[s][a]];
            if (t.Q[s][a] > t.Q[s][greedy[s]]) greedy[s] = a;
        }
    }
    return {t, TabularPolicy::deterministic(greedy, mdp.n_actions)};
}

/// Per state, the support action maximizing Q; ties go to the lowest index.
/// This is the limit policy of the partial-transport objective as the
/// unbalance coefficient grows.
inline TabularPolicy supported_argmax_policy(const TabularMdp& mdp, const ValueTable& q_beta,
                                             const SupportSpec& support) {
    if (support.size() != mdp.n_states)
        throw oracle_error("supported_argmax: support size mismatch");
    std::vector<std::size_t> actions(mdp.n_states, 0);
    for (std::size_t s = 0; s < mdp.n_states; ++s) {
        if (support[s].empty()) throw oracle_error("supported_argmax: empty support");
        std::size_t best = support[s][0];
        for (auto a : support[s])
            if (q_beta.Q[s][a] > q_beta.Q[s][best]) best = a;
        actions[s] = best;
    }
    return TabularPolicy::deterministic(actions, mdp.n_actions);
}

/// Exact discounted state occupancy d^pi from a start state:
/// d(s) = (1-gamma) * sum_t gamma^t Pr(s_t = s).
inline std::vector<double> discounted_occupancy(const TabularMdp& mdp,
                                                const TabularPolicy& policy,
                                                std::size_t start_state) {
    std::vector<double> dist(mdp.n_states, 0.0);
    dist[start_state] = 1.0;
    std::vector<double> occ(mdp.n_states, 0.0);
    double scale = 1.0 - mdp.gamma;
    double coef = 1.0;
    while (coef > 1e-16) {
        for (std::size_t s = 0; s < mdp.n_states; ++s) occ[s] += scale * coef * dist[s];
        std::vector<double> nxt(mdp.n_states, 0.0);
        for (std::size_t s = 0; s < mdp.n_states; ++s) {
            if (dist[s] == 0.0) continue;
            for (std::size_t a = 0; a < mdp.n_actions; ++a) {
                const double p = policy.probs[s][a];
                if (p == 0.0) continue;
                nxt[mdp.next[s][a]] += dist[s] * p;
            }
        }
        dist = std::move(nxt);
        coef *= mdp.gamma;
    }
    return occ;
}

/// J(pi) - J(beta) from a start state, computed two ways: direct value
/// difference and the performance-difference lemma with the exact discounted
/// occupancy. Disagreement beyond tol signals an internal inconsistency.
inline double performance_gap(const TabularMdp& mdp, const TabularPolicy& pi,
                              const TabularPolicy& beta, std::size_t start_state,
                              double tol = 1e-8) {
    const ValueTable v_pi = policy_evaluation(mdp, pi);
    const ValueTable v_beta = policy_evaluation(mdp, beta);
    const double direct = v_pi.V[start_state] - v_beta.V[start_state];

    const std::vector<double> occ = discounted_occupancy(mdp, pi, start_state);
    double adv = 0.0;
    for (std::size_t s = 0; s < mdp.n_states; ++s) {
        double q_pi = 0.0;
        for (std::size_t a = 0; a < mdp.n_actions; ++a)
            if (pi.probs[s][a] != 0.0) q_pi += pi.probs[s][a] * v_beta.Q[s][a];
        adv += occ[s] * (q_pi - v_beta.V[s]);
    }
    const double lemma = adv / (1.0 - mdp.gamma);

    if (std::abs(direct - lemma) > tol)
        throw oracle_error("performance_gap: direct " + std::to_string(direct) +
                           " and lemma " + std::to_string(lemma) + " disagree beyond " +
                           std::to_string(tol));
    return direct;
}

}  // namespace ppl
