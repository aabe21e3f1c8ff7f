#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <random>
#include <vector>

#include "ppl/dataset.hpp"

namespace ppl {

/// Finite deterministic MDP with exact dynamics for oracle computations.
/// Terminal states self-loop with zero reward.
struct TabularMdp {
    std::size_t n_states = 0;
    std::size_t n_actions = 0;
    std::vector<std::vector<std::size_t>> next;    // next[s][a]
    std::vector<std::vector<double>> reward;       // reward[s][a]
    double gamma = 0.99;
    std::vector<bool> terminal;                    // per state

    void validate() const {
        if (n_states == 0 || n_actions == 0)
            throw dataset_error("tabular mdp: empty state or action space");
        if (gamma <= 0.0 || gamma >= 1.0)
            throw dataset_error("tabular mdp: gamma must be in (0,1)");
        if (next.size() != n_states || reward.size() != n_states ||
            terminal.size() != n_states)
            throw dataset_error("tabular mdp: tables not fully populated");
        for (std::size_t s = 0; s < n_states; ++s) {
            if (next[s].size() != n_actions || reward[s].size() != n_actions)
                throw dataset_error("tabular mdp: row " + std::to_string(s) +
                                    " not fully populated");
            for (std::size_t a = 0; a < n_actions; ++a) {
                if (next[s][a] >= n_states)
                    throw dataset_error("tabular mdp: next state out of range");
                if (terminal[s] && (next[s][a] != s || reward[s][a] != 0.0))
                    throw dataset_error("tabular mdp: terminal state " +
                                        std::to_string(s) +
                                        " must self-loop with zero reward");
            }
        }
    }
};

inline std::vector<double> one_hot(std::size_t i, std::size_t n) {
    std::vector<double> v(n, 0.0);
    v[i] = 1.0;
    return v;
}

inline std::size_t argmax_index(const std::vector<double>& v) {
    return static_cast<std::size_t>(
        std::max_element(v.begin(), v.end()) - v.begin());
}

/// Per-state action subsets that define the behavior policy's support.
using SupportSpec = std::vector<std::vector<std::size_t>>;

/// Roll episodes of a uniform-over-support behavior policy and record the
/// transitions one-hot encoded. Index tables stay in the metadata so the
/// oracle can work on the same instance.
inline OfflineDataset generate_tabular_dataset(const TabularMdp& mdp,
                                               const SupportSpec& support,
                                               std::size_t episodes,
                                               std::uint64_t seed,
                                               std::size_t episode_len = 0) {
    mdp.validate();
    if (episodes == 0) throw dataset_error("generate_tabular_dataset: episodes must be >= 1");
    if (support.size() != mdp.n_states)
        throw dataset_error("generate_tabular_dataset: support spec size mismatch");
    for (std::size_t s = 0; s < mdp.n_states; ++s) {
        if (support[s].empty())
            throw dataset_error("generate_tabular_dataset: empty support at state " +
                                std::to_string(s));
        for (auto a : support[s])
            if (a >= mdp.n_actions)
                throw dataset_error("generate_tabular_dataset: support action out of range");
    }
    if (episode_len == 0) episode_len = 2 * mdp.n_states;

    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::size_t> pick_state(0, mdp.n_states - 1);

    OfflineDataset ds;
    ds.state_dim = mdp.n_states;
    ds.action_dim = mdp.n_actions;
    ds.action_low.assign(mdp.n_actions, 0.0);
    ds.action_high.assign(mdp.n_actions, 1.0);

    for (std::size_t e = 0; e < episodes; ++e) {
        std::size_t s = pick_state(rng);
        for (std::size_t t = 0; t < episode_len && !mdp.terminal[s]; ++t) {
            std::uniform_int_distribution<std::size_t> pick_a(0, support[s].size() - 1);
            const std::size_t a = support[s][pick_a(rng)];
            const std::size_t ns = mdp.next[s][a];
            Transition tr;
            tr.state = one_hot(s, mdp.n_states);
            tr.action = one_hot(a, mdp.n_actions);
            tr.reward = mdp.reward[s][a];
            tr.next_state = one_hot(ns, mdp.n_states);
            tr.done = mdp.terminal[ns];
            ds.transitions.push_back(std::move(tr));
            s = ns;
        }
    }

    // warn (in metadata, not an error) if a terminal never appeared in the data
    std::vector<std::string> warnings;
    {
        std::vector<bool> seen(mdp.n_states, false);
        for (const auto& t : ds.transitions) seen[argmax_index(t.next_state)] = true;
        for (std::size_t s = 0; s < mdp.n_states; ++s)
            if (mdp.terminal[s] && !seen[s])
                warnings.push_back("terminal state " + std::to_string(s) +
                                   " never reached under behavior policy");
    }

    nlohmann::json sup = nlohmann::json::array();
    for (const auto& acts : support) sup.push_back(acts);
    nlohmann::json nxt = nlohmann::json::array(), rew = nlohmann::json::array();
    for (std::size_t s = 0; s < mdp.n_states; ++s) {
        nxt.push_back(mdp.next[s]);
        rew.push_back(mdp.reward[s]);
    }
    std::vector<int> term;
    for (bool b : mdp.terminal) term.push_back(b ? 1 : 0);
    ds.metadata = {{"generator", "tabular"},
                   {"seed", seed},
                   {"episodes", episodes},
                   {"episode_len", episode_len},
                   {"n_states", mdp.n_states},
                   {"n_actions", mdp.n_actions},
                   {"gamma", mdp.gamma},
                   {"support", sup},
                   {"transition_table", nxt},
                   {"reward_table", rew},
                   {"terminal", term}};
    if (!warnings.empty()) ds.metadata["warnings"] = warnings;
    ds.validate();
    return ds;
}

/// Rebuild the MDP and support spec from a tabular dataset's metadata.
inline std::pair<TabularMdp, SupportSpec> tabular_from_metadata(const nlohmann::json& md) {
    if (md.value("generator", "") != "tabular")
        throw dataset_error("metadata does not describe a tabular dataset");
    TabularMdp mdp;
    mdp.n_states = md.at("n_states").get<std::size_t>();
    mdp.n_actions = md.at("n_actions").get<std::size_t>();
    mdp.gamma = md.at("gamma").get<double>();
    mdp.next = md.at("transition_table").get<std::vector<std::vector<std::size_t>>>();
    mdp.reward = md.at("reward_table").get<std::vector<std::vector<double>>>();
    for (int b : md.at("terminal").get<std::vector<int>>()) mdp.terminal.push_back(b != 0);
    SupportSpec support = md.at("support").get<SupportSpec>();
    mdp.validate();
    return {mdp, support};
}

/// Random deterministic MDP (no terminals) with random per-state behavior
/// supports; the oracle and neural-equivalence suites run on these.
inline std::pair<TabularMdp, SupportSpec> random_tabular_instance(
    std::size_t n_states, std::size_t n_actions, double gamma, std::mt19937_64& rng,
    std::size_t min_support = 1) {
    TabularMdp mdp;
    mdp.n_states = n_states;
    mdp.n_actions = n_actions;
    mdp.gamma = gamma;
    mdp.terminal.assign(n_states, false);
    std::uniform_int_distribution<std::size_t> ps(0, n_states - 1);
    std::uniform_real_distribution<double> pr(0.0, 1.0);
    mdp.next.resize(n_states);
    mdp.reward.resize(n_states);
    for (std::size_t s = 0; s < n_states; ++s) {
        mdp.next[s].resize(n_actions);
        mdp.reward[s].resize(n_actions);
        for (std::size_t a = 0; a < n_actions; ++a) {
            mdp.next[s][a] = ps(rng);
            mdp.reward[s][a] = pr(rng);
        }
    }
    SupportSpec support(n_states);
    std::uniform_int_distribution<std::size_t> psz(min_support, n_actions);
    for (std::size_t s = 0; s < n_states; ++s) {
        std::vector<std::size_t> acts(n_actions);
        for (std::size_t a = 0; a < n_actions; ++a) acts[a] = a;
        std::shuffle(acts.begin(), acts.end(), rng);
        acts.resize(psz(rng));
        std::sort(acts.begin(), acts.end());
        support[s] = std::move(acts);
    }
    mdp.validate();
    return {mdp, support};
}

}  // namespace ppl
