#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ppl/tensor.hpp"

namespace ppl {

struct dataset_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// One offline experience tuple.
struct Transition {
    std::vector<double> state;
    std::vector<double> action;
    double reward = 0.0;
    std::vector<double> next_state;
    bool done = false;

    bool operator==(const Transition&) const = default;
};

/// Immutable collection of transitions plus action/state bounds.
struct OfflineDataset {
    std::vector<Transition> transitions;
    std::size_t state_dim = 0;
    std::size_t action_dim = 0;
    std::vector<double> action_low;
    std::vector<double> action_high;
    nlohmann::json metadata;  // generator name + parameters + seed

    void validate() const {
        if (transitions.empty()) throw dataset_error("dataset is empty");
        if (action_low.size() != action_dim || action_high.size() != action_dim)
            throw dataset_error("action bounds must match action dim");
        for (std::size_t i = 0; i < transitions.size(); ++i) {
            const auto& t = transitions[i];
            if (t.state.size() != state_dim || t.next_state.size() != state_dim)
                throw dataset_error("transition " + std::to_string(i) +
                                    ": state dim mismatch");
            if (t.action.size() != action_dim)
                throw dataset_error("transition " + std::to_string(i) +
                                    ": action dim mismatch");
            if (!std::isfinite(t.reward))
                throw dataset_error("transition " + std::to_string(i) +
                                    ": non-finite reward");
            for (std::size_t j = 0; j < action_dim; ++j)
                if (t.action[j] < action_low[j] - 1e-12 ||
                    t.action[j] > action_high[j] + 1e-12)
                    throw dataset_error("transition " + std::to_string(i) +
                                        ": action outside declared bounds");
        }
    }

    std::size_t size() const { return transitions.size(); }

    /// Batch view as matrices: states [B,sd], actions [B,ad], rewards [B,1],
    /// next states [B,sd], done flags [B,1], and the behavior's empirical
    /// next actions [B,ad] (the action the data took at next_state).
    struct Batch {
        Tensor states, actions, rewards, next_states, dones, next_actions;
        std::vector<std::size_t> indices;
        std::size_t size() const { return indices.size(); }
    };

    /// Action taken at transitions[i].next_state in the recorded stream:
    /// the following row's action, as trajectories are stored contiguously.
    /// Terminal rows fall back to their own action (the bootstrap term is
    /// gated out by the done flag anyway).
    const std::vector<double>& next_action_of(std::size_t i) const {
        if (transitions[i].done || i + 1 >= transitions.size())
            return transitions[i].action;
        return transitions[i + 1].action;
    }

    Batch make_batch(const std::vector<std::size_t>& idx) const {
        Batch b;
        b.indices = idx;
        const std::size_t B = idx.size();
        b.states = Tensor::zeros({B, state_dim});
        b.actions = Tensor::zeros({B, action_dim});
        b.rewards = Tensor::zeros({B, 1});
        b.next_states = Tensor::zeros({B, state_dim});
        b.dones = Tensor::zeros({B, 1});
        b.next_actions = Tensor::zeros({B, action_dim});
        for (std::size_t i = 0; i < B; ++i) {
            const auto& t = transitions[idx[i]];
            std::copy(t.state.begin(), t.state.end(), b.states.values.begin() + i * state_dim);
            std::copy(t.action.begin(), t.action.end(),
                      b.actions.values.begin() + i * action_dim);
            b.rewards.values[i] = t.reward;
            std::copy(t.next_state.begin(), t.next_state.end(),
                      b.next_states.values.begin() + i * state_dim);
            b.dones.values[i] = t.done ? 1.0 : 0.0;
            const auto& na = next_action_of(idx[i]);
            std::copy(na.begin(), na.end(), b.next_actions.values.begin() + i * action_dim);
        }
        return b;
    }
};

/// Uniform with-replacement sample; deterministic given the rng state.
inline OfflineDataset::Batch sample_batch(const OfflineDataset& ds, std::size_t batch_size,
                                          std::mt19937_64& rng) {
    if (ds.transitions.empty()) throw dataset_error("sample_batch: empty dataset");
    if (batch_size < 1) throw dataset_error("sample_batch: batch size must be >= 1");
    std::uniform_int_distribution<std::size_t> pick(0, ds.transitions.size() - 1);
    std::vector<std::size_t> idx(batch_size);
    for (auto& i : idx) i = pick(rng);
    return ds.make_batch(idx);
}

// ---------------------------------------------------------------------------
// On-disk format: JSON lines. First line is a header with dims, bounds and
// metadata; each following line is one transition. nlohmann::json emits
// shortest round-trip decimals, so save/load is bit-exact.

inline void save_dataset(const OfflineDataset& ds, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw dataset_error("cannot open for writing: " + path);
    nlohmann::json hdr;
    hdr["type"] = "ppl-offline-dataset";
    hdr["version"] = 1;
    hdr["state_dim"] = ds.state_dim;
    hdr["action_dim"] = ds.action_dim;
    hdr["action_low"] = ds.action_low;
    hdr["action_high"] = ds.action_high;
    hdr["metadata"] = ds.metadata;
    hdr["count"] = ds.transitions.size();
    os << hdr.dump() << "\n";
    for (const auto& t : ds.transitions) {
        nlohmann::json j;
        j["s"] = t.state;
        j["a"] = t.action;
        j["r"] = t.reward;
        j["ns"] = t.next_state;
        j["d"] = t.done;
        os << j.dump() << "\n";
    }
    if (!os) throw dataset_error("write failed: " + path);
}

inline OfflineDataset load_dataset(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw dataset_error("cannot open: " + path);
    std::string line;
    std::size_t lineno = 0;
    auto parse_line = [&](const std::string& s) {
        try {
            return nlohmann::json::parse(s);
        } catch (const nlohmann::json::exception& e) {
            throw dataset_error("parse error at line " + std::to_string(lineno) + ": " +
                                e.what());
        }
    };

    if (!std::getline(is, line)) throw dataset_error("empty dataset file: " + path);
    ++lineno;
    nlohmann::json hdr = parse_line(line);
    if (hdr.value("type", "") != "ppl-offline-dataset")
        throw dataset_error("not a dataset file: " + path);

    OfflineDataset ds;
    try {
        ds.state_dim = hdr.at("state_dim").get<std::size_t>();
        ds.action_dim = hdr.at("action_dim").get<std::size_t>();
        ds.action_low = hdr.at("action_low").get<std::vector<double>>();
        ds.action_high = hdr.at("action_high").get<std::vector<double>>();
        ds.metadata = hdr.value("metadata", nlohmann::json::object());
    } catch (const nlohmann::json::exception& e) {
        throw dataset_error("malformed header at line 1: " + std::string(e.what()));
    }
    const std::size_t expected = hdr.value("count", std::size_t{0});

    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty()) continue;
        nlohmann::json j = parse_line(line);
        Transition t;
        try {
            t.state = j.at("s").get<std::vector<double>>();
            t.action = j.at("a").get<std::vector<double>>();
            t.reward = j.at("r").get<double>();
            t.next_state = j.at("ns").get<std::vector<double>>();
            t.done = j.at("d").get<bool>();
        } catch (const nlohmann::json::exception& e) {
            throw dataset_error("malformed transition at line " + std::to_string(lineno) +
                                ": " + e.what());
        }
        ds.transitions.push_back(std::move(t));
    }
    if (expected != 0 && ds.transitions.size() != expected)
        throw dataset_error("truncated file: header declares " + std::to_string(expected) +
                            " transitions, found " + std::to_string(ds.transitions.size()));
    ds.validate();
    return ds;
}

inline bool datasets_equal(const OfflineDataset& a, const OfflineDataset& b) {
    return a.state_dim == b.state_dim && a.action_dim == b.action_dim &&
           a.action_low == b.action_low && a.action_high == b.action_high &&
           a.metadata == b.metadata && a.transitions == b.transitions;
}

}  // namespace ppl
