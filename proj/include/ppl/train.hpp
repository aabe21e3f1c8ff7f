#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <functional>
#include <random>
#include <string>
#include <unordered_map>
#include <vector>

#include "ppl/adam.hpp"
#include "ppl/dataset.hpp"
#include "ppl/network.hpp"
#include "ppl/tabular.hpp"
#include "ppl/tape.hpp"

namespace ppl {

/// Hyperparameters of the training loop.
struct TrainConfig {
    double w = 8.0;  // unbalance coefficient; w = 1 is the full-cloning limit
    double gamma = 0.99;
    double lr_policy = 1e-3;
    double lr_critic = 1e-3;
    double lr_potential = 1e-3;
    std::size_t batch_size = 256;
    std::size_t steps_bc = 5000;
    std::size_t steps_critic = 5000;
    std::size_t steps_ppl = 5000;
    enum class Mode { OneStep, Joint };
    Mode mode = Mode::OneStep;
    double conservative_coef = 1.0;
    double polyak_tau = 0.005;
    std::uint64_t seed = 0;
    std::vector<std::size_t> hidden = {32};  // shared by all three networks
    std::size_t log_every = 50;

    void validate() const {
        if (w < 1.0) throw dataset_error("train config: w must be >= 1");
        if (gamma <= 0.0 || gamma >= 1.0)
            throw dataset_error("train config: gamma must be in (0,1)");
        if (batch_size < 1) throw dataset_error("train config: batch size must be >= 1");
        if (conservative_coef < 0.0)
            throw dataset_error("train config: conservative coefficient must be >= 0");
        if (polyak_tau <= 0.0 || polyak_tau > 1.0)
            throw dataset_error("train config: polyak tau must be in (0,1]");
    }
};

struct TrainLogRecord {
    std::size_t step = 0;
    std::string phase;  // bc / critic / ppl
    double critic_loss = 0.0;
    double potential_obj = 0.0;
    double policy_obj = 0.0;
    double mean_f_data = 0.0;
    double mean_f_policy = 0.0;
    double mean_q_policy = 0.0;
};

struct TrainLog {
    std::vector<TrainLogRecord> records;

    void to_csv(const std::string& path) const {
        std::ofstream os(path);
        if (!os) throw dataset_error("cannot open train log for writing: " + path);
        os << "step,phase,critic_loss,potential_obj,policy_obj,mean_f_data,"
              "mean_f_policy,mean_q_policy\n";
        char buf[512];
        for (const auto& r : records) {
            std::snprintf(buf, sizeof(buf),
                          "%zu,%s,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", r.step,
                          r.phase.c_str(), r.critic_loss, r.potential_obj, r.policy_obj,
                          r.mean_f_data, r.mean_f_policy, r.mean_q_policy);
            os << buf;
        }
    }

    bool operator==(const TrainLog& o) const {
        if (records.size() != o.records.size()) return false;
        for (std::size_t i = 0; i < records.size(); ++i) {
            const auto& a = records[i];
            const auto& b = o.records[i];
            if (a.step != b.step || a.phase != b.phase || a.critic_loss != b.critic_loss ||
                a.potential_obj != b.potential_obj || a.policy_obj != b.policy_obj ||
                a.mean_f_data != b.mean_f_data || a.mean_f_policy != b.mean_f_policy ||
                a.mean_q_policy != b.mean_q_policy)
                return false;
        }
        return true;
    }
};

// ---------------------------------------------------------------------------
// helpers

inline double mean_of(const Tensor& t) {
    double s = 0.0;
    for (double v : t.values) s += v;
    return s / static_cast<double>(t.size());
}

inline Tensor concat_cols(const Tensor& a, const Tensor& b) {
    const std::size_t m = a.rows(), p = a.cols(), q = b.cols();
    Tensor c = Tensor::zeros({m, p + q});
    for (std::size_t i = 0; i < m; ++i) {
        std::copy(a.values.begin() + i * p, a.values.begin() + (i + 1) * p,
                  c.values.begin() + i * (p + q));
        std::copy(b.values.begin() + i * q, b.values.begin() + (i + 1) * q,
                  c.values.begin() + i * (p + q) + p);
    }
    return c;
}

/// v(s') used by the Bellman target; returns one value per batch row.
using BootstrapFn = std::function<std::vector<double>(const OfflineDataset::Batch& batch)>;

/// Bootstrap with a deterministic policy network: Q_target(s', pi(s')).
inline BootstrapFn policy_bootstrap(const Network& q_target, const Network& policy) {
    return [&q_target, &policy](const OfflineDataset::Batch& batch) {
        const Tensor a = policy.predict(batch.next_states);
        const Tensor q = q_target.predict(concat_cols(batch.next_states, a));
        return q.values;
    };
}

/// Bootstrap with the behavior policy via its empirical samples:
/// Q_target(s', a') where a' is the action the dataset itself took at s'.
/// This is the continuous-action analogue of averaging over the behavior
/// support, and its fixed point is Q^beta of the mixture that logged the
/// data, which is what single-step policy extraction needs for stitching.
inline BootstrapFn behavior_bootstrap(const Network& q_target) {
    return [&q_target](const OfflineDataset::Batch& batch) {
        const Tensor q =
            q_target.predict(concat_cols(batch.next_states, batch.next_actions));
        return q.values;
    };
}

/// Expected bootstrap over a behavior support: mean_a Q_target(s', a') with a'
/// uniform over the support of the one-hot next state. Matches the oracle's
/// uniform behavior policy on tabular instances.
inline BootstrapFn support_bootstrap(const Network& q_target, SupportSpec support,
                                     std::size_t n_actions) {
    return [&q_target, support = std::move(support),
            n_actions](const OfflineDataset::Batch& batch) {
        const Tensor& next_states = batch.next_states;
        const std::size_t B = next_states.rows();
        const std::size_t sd = next_states.cols();
        std::vector<double> out(B, 0.0);
        // flatten all (s', a') pairs into one forward pass
        std::vector<std::size_t> row_of;
        std::vector<double> flat;
        for (std::size_t i = 0; i < B; ++i) {
            std::vector<double> s(next_states.values.begin() + i * sd,
                                  next_states.values.begin() + (i + 1) * sd);
            const std::size_t si = argmax_index(s);
            for (auto a : support[si]) {
                flat.insert(flat.end(), s.begin(), s.end());
                auto oh = one_hot(a, n_actions);
                flat.insert(flat.end(), oh.begin(), oh.end());
                row_of.push_back(i);
            }
        }
        Tensor input({row_of.size(), sd + n_actions}, std::move(flat));
        const Tensor q = q_target.predict(input);
        std::vector<double> cnt(B, 0.0);
        for (std::size_t r = 0; r < row_of.size(); ++r) {
            out[row_of[r]] += q.values[r];
            cnt[row_of[r]] += 1.0;
        }
        for (std::size_t i = 0; i < B; ++i) out[i] /= cnt[i];
        return out;
    };
}

/// coef * (mean Q(s, policy(s)) - mean Q(s, a_data)), evaluated numerically.
inline double conservative_penalty(const Network& q, const Network& policy,
                                   const OfflineDataset::Batch& batch, double coef) {
    if (coef < 0.0) throw dataset_error("conservative penalty: coef must be >= 0");
    if (coef == 0.0) return 0.0;
    const Tensor a_pi = policy.predict(batch.states);
    const double q_pi = mean_of(q.predict(concat_cols(batch.states, a_pi)));
    const double q_data = mean_of(q.predict(concat_cols(batch.states, batch.actions)));
    return coef * (q_pi - q_data);
}

/// One gradient step on the mean squared Bellman error, target held fixed,
/// plus the optional conservative penalty; then a Polyak update of the
/// target network. Returns the Bellman loss value.
inline double critic_bellman_update(Network& q, Network& q_target,
                                    const BootstrapFn& bootstrap,
                                    const OfflineDataset::Batch& batch, double gamma,
                                    AdamState& opt, double polyak_tau,
                                    const Network* penalty_policy = nullptr,
                                    double conservative_coef = 0.0) {
    const std::vector<double> v_next = bootstrap(batch);
    const std::size_t B = batch.size();
    Tensor target = Tensor::zeros({B, 1});
    for (std::size_t i = 0; i < B; ++i)
        target.values[i] = batch.rewards.values[i] +
                           gamma * (1.0 - batch.dones.values[i]) * v_next[i];

    Tape tape;
    std::vector<Tape::Var> pv;
    const Tape::Var s = tape.constant(batch.states);
    const Tape::Var a = tape.constant(batch.actions);
    const Tape::Var q_pred = q.forward(tape, tape.concat(s, a), true, &pv);
    const Tape::Var diff = tape.add(q_pred, tape.scalar_mul(tape.constant(target), -1.0));
    Tape::Var loss = tape.mean(tape.square(diff));
    const double bellman = tape.value(loss).values[0];

    if (penalty_policy && conservative_coef > 0.0) {
        const Tensor a_pi = penalty_policy->predict(batch.states);
        const Tape::Var sa_pi = tape.concat(s, tape.constant(a_pi));
        const Tape::Var q_pi = q.forward_given(tape, sa_pi, pv);
        const Tape::Var gap =
            tape.add(tape.mean(q_pi), tape.scalar_mul(tape.mean(q_pred), -1.0));
        loss = tape.add(loss, tape.scalar_mul(gap, conservative_coef));
    }

    tape.backward(loss);
    auto grads = collect_grads(tape, pv);
    adam_step(q.params, grads, opt);

    for (std::size_t k = 0; k < q.params.size(); ++k)
        for (std::size_t i = 0; i < q.params[k].size(); ++i)
            q_target.params[k].values[i] =
                (1.0 - polyak_tau) * q_target.params[k].values[i] +
                polyak_tau * q.params[k].values[i];
    return bellman;
}

struct PotentialStepStats {
    double objective = 0.0;
    double mean_f_data = 0.0;
    double mean_f_policy = 0.0;
};

/// One gradient step on L_f = -E[f(s, pi(s))] + w E_D[f(s, a)]; the policy's
/// actions enter as constants (alternating blocks of the maximin problem).
inline PotentialStepStats potential_update(Network& f, const Network& policy,
                                           const OfflineDataset::Batch& batch, double w,
                                           AdamState& opt) {
    if (w < 1.0) throw dataset_error("potential update: w must be >= 1");
    const Tensor a_pi = policy.predict(batch.states);

    Tape tape;
    std::vector<Tape::Var> pv;
    const Tape::Var s = tape.constant(batch.states);
    const Tape::Var f_pi =
        f.forward(tape, tape.concat(s, tape.constant(a_pi)), true, &pv);
    const Tape::Var f_data =
        f.forward_given(tape, tape.concat(s, tape.constant(batch.actions)), pv);
    const Tape::Var loss = tape.add(tape.scalar_mul(tape.mean(f_pi), -1.0),
                                    tape.scalar_mul(tape.mean(f_data), w));

    PotentialStepStats st;
    st.objective = tape.value(loss).values[0];
    st.mean_f_policy = tape.value(tape.mean(f_pi)).values[0];
    st.mean_f_data = tape.value(tape.mean(f_data)).values[0];

    tape.backward(loss);
    auto grads = collect_grads(tape, pv);
    adam_step(f.params, grads, opt);
    return st;
}

struct PolicyStepStats {
    double objective = 0.0;
    double mean_q_policy = 0.0;
    double mean_f_policy = 0.0;
};

/// One gradient step on L_pi = E[-Q(s, pi(s)) - f(s, pi(s))]; gradients flow
/// through the action only, Q and f parameters stay frozen.
inline PolicyStepStats policy_update(Network& policy, const Network& q, const Network* f,
                                     const OfflineDataset::Batch& batch, AdamState& opt) {
    Tape tape;
    std::vector<Tape::Var> pv;
    const Tape::Var s = tape.constant(batch.states);
    const Tape::Var a = policy.forward(tape, s, true, &pv);
    const Tape::Var sa = tape.concat(s, a);
    const Tape::Var q_pi = q.forward(tape, sa, false);
    Tape::Var obj = tape.mean(q_pi);
    double mean_f = 0.0;
    if (f) {
        const Tape::Var f_pi = f->forward(tape, sa, false);
        const Tape::Var mf = tape.mean(f_pi);
        mean_f = tape.value(mf).values[0];
        obj = tape.add(obj, mf);
    }
    const Tape::Var loss = tape.scalar_mul(obj, -1.0);

    PolicyStepStats st;
    st.objective = tape.value(loss).values[0];
    st.mean_q_policy = tape.value(tape.mean(q_pi)).values[0];
    st.mean_f_policy = mean_f;

    tape.backward(loss);
    auto grads = collect_grads(tape, pv);
    adam_step(policy.params, grads, opt);
    return st;
}

/// Update of the extraction probe co-trained with the critic: behavior
/// cloning toward the highest-Q dataset action observed for each state.
/// Batch rows that share an identical state are grouped and every row in a
/// group targets the group's argmax-Q action; rows whose state is unique in
/// the batch reduce to plain cloning. The probe therefore tracks the
/// critic's supported argmax with supervised targets rather than ascending
/// the Q surface, which keeps it on the data manifold and away from
/// off-support extrapolation artifacts.
inline double probe_clone_update(Network& probe, const Network& q,
                                 const OfflineDataset::Batch& batch, AdamState& opt) {
    const Tensor q_data = q.predict(concat_cols(batch.states, batch.actions));
    const std::size_t n = batch.states.shape[0];
    const std::size_t sd = batch.states.shape[1], ad = batch.actions.shape[1];
    const auto key = [&](std::size_t i) {
        return std::string(reinterpret_cast<const char*>(&batch.states.values[i * sd]),
                           sd * sizeof(double));
    };
    std::unordered_map<std::string, std::size_t> best;
    best.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto [it, fresh] = best.emplace(key(i), i);
        if (!fresh && q_data.values[i] > q_data.values[it->second]) it->second = i;
    }
    Tensor target({n, ad}, std::vector<double>(n * ad, 0.0));
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t b = best.at(key(i));
        for (std::size_t j = 0; j < ad; ++j)
            target.values[i * ad + j] = batch.actions.values[b * ad + j];
    }

    Tape tape;
    std::vector<Tape::Var> pv;
    const Tape::Var s = tape.constant(batch.states);
    const Tape::Var a = probe.forward(tape, s, true, &pv);
    const Tape::Var diff = tape.add(a, tape.scalar_mul(tape.constant(target), -1.0));
    const Tape::Var loss = tape.mean(tape.square(diff));
    const double out = tape.value(loss).values[0];
    tape.backward(loss);
    auto grads = collect_grads(tape, pv);
    adam_step(probe.params, grads, opt);
    return out;
}

/// Behavior cloning: minimize E||pi(s) - a||^2 over the dataset.
inline Network bc_pretrain(const OfflineDataset& ds, const std::vector<std::size_t>& hidden,
                           std::size_t steps, double lr, std::size_t batch_size,
                           std::mt19937_64& rng, TrainLog* log = nullptr,
                           std::size_t log_every = 50) {
    NetConfig cfg{ds.state_dim, hidden, ds.action_dim, Head::PolicyTanh};
    Network net = Network::init(cfg, rng, Tensor::row(ds.action_low),
                                Tensor::row(ds.action_high));
    AdamState opt = AdamState::init(net.params, lr);
    const double ad = static_cast<double>(ds.action_dim);
    for (std::size_t step = 0; step < steps; ++step) {
        const auto batch = sample_batch(ds, batch_size, rng);
        Tape tape;
        std::vector<Tape::Var> pv;
        const Tape::Var s = tape.constant(batch.states);
        const Tape::Var a = net.forward(tape, s, true, &pv);
        const Tape::Var diff =
            tape.add(a, tape.scalar_mul(tape.constant(batch.actions), -1.0));
        const Tape::Var loss = tape.scalar_mul(tape.mean(tape.square(diff)), ad);
        tape.backward(loss);
        auto grads = collect_grads(tape, pv);
        adam_step(net.params, grads, opt);
        if (log && (step % log_every == 0 || step + 1 == steps)) {
            TrainLogRecord r;
            r.step = step;
            r.phase = "bc";
            r.policy_obj = tape.value(loss).values[0];
            log->records.push_back(r);
        }
    }
    return net;
}

/// Q + behavior-cloning baseline: minimize E[-Q(s, pi(s)) + bc_weight ||pi(s) - a||^2]
/// against a pretrained (frozen) critic.
inline Network qbc_baseline(const OfflineDataset& ds, const Network& q,
                            const std::vector<std::size_t>& hidden, std::size_t steps,
                            double lr, double bc_weight, std::size_t batch_size,
                            std::mt19937_64& rng, TrainLog* log = nullptr,
                            std::size_t log_every = 50) {
    NetConfig cfg{ds.state_dim, hidden, ds.action_dim, Head::PolicyTanh};
    Network net = Network::init(cfg, rng, Tensor::row(ds.action_low),
                                Tensor::row(ds.action_high));
    AdamState opt = AdamState::init(net.params, lr);
    const double ad = static_cast<double>(ds.action_dim);
    for (std::size_t step = 0; step < steps; ++step) {
        const auto batch = sample_batch(ds, batch_size, rng);
        Tape tape;
        std::vector<Tape::Var> pv;
        const Tape::Var s = tape.constant(batch.states);
        const Tape::Var a = net.forward(tape, s, true, &pv);
        const Tape::Var q_pi = q.forward(tape, tape.concat(s, a), false);
        const Tape::Var diff =
            tape.add(a, tape.scalar_mul(tape.constant(batch.actions), -1.0));
        const Tape::Var loss =
            tape.add(tape.scalar_mul(tape.mean(q_pi), -1.0),
                     tape.scalar_mul(tape.mean(tape.square(diff)), bc_weight * ad));
        tape.backward(loss);
        auto grads = collect_grads(tape, pv);
        adam_step(net.params, grads, opt);
        if (log && (step % log_every == 0 || step + 1 == steps)) {
            TrainLogRecord r;
            r.step = step;
            r.phase = "qbc";
            r.policy_obj = tape.value(loss).values[0];
            r.mean_q_policy = tape.value(tape.mean(q_pi)).values[0];
            log->records.push_back(r);
        }
    }
    return net;
}

struct TrainResult {
    Network policy;
    Network critic;
    Network potential;
    Network behavior;  // BC policy (one-step mode); unused in joint mode
    TrainLog log;
};

/// Optional periodic evaluation hook for score curves.
struct ScoreProbe {
    std::function<double(const Network& policy)> score;
    std::size_t every = 250;
    std::vector<std::pair<double, double>> series;  // (step, score)
};

/// Full training loop.
///
/// One-step mode: behavior cloning, then Bellman training of Q^beta with the
/// conservative penalty, then alternating potential/policy updates against
/// the frozen critic. Joint mode: per iteration, one batch drives the critic,
/// potential and policy updates in that order.
inline TrainResult train(const OfflineDataset& ds, const TrainConfig& cfg,
                         ScoreProbe* probe = nullptr) {
    cfg.validate();
    ds.validate();
    std::mt19937_64 rng(cfg.seed);

    TrainResult out;
    out.log.records.reserve(64);

    NetConfig qcfg{ds.state_dim + ds.action_dim, cfg.hidden, 1, Head::Scalar};
    NetConfig fcfg{ds.state_dim + ds.action_dim, cfg.hidden, 1, Head::NonnegScalar};
    NetConfig pcfg{ds.state_dim, cfg.hidden, ds.action_dim, Head::PolicyTanh};

    // tabular datasets carry their behavior support; the Bellman bootstrap
    // then averages over it, matching the oracle's uniform behavior policy
    const bool tabular = ds.metadata.value("generator", "") == "tabular";

    if (cfg.mode == TrainConfig::Mode::OneStep) {
        out.behavior = bc_pretrain(ds, cfg.hidden, cfg.steps_bc, cfg.lr_policy,
                                   cfg.batch_size, rng, &out.log, cfg.log_every);

        out.critic = Network::init(qcfg, rng);
        Network q_target = out.critic;
        out.policy = out.behavior;
        out.potential = Network::init(fcfg, rng);

        BootstrapFn bootstrap;
        if (tabular) {
            auto [mdp, support] = tabular_from_metadata(ds.metadata);
            bootstrap = support_bootstrap(q_target, std::move(support), mdp.n_actions);
        } else {
            // Q^beta of the logging mixture, not of the deterministic clone:
            // the clone's continuation averages away exactly the stitched
            // returns the critic is supposed to surface.
            bootstrap = behavior_bootstrap(q_target);
        }

        // Two probe policies accompany the critic. The dig probe ascends Q
        // greedily and feeds the conservative penalty, so overestimated
        // off-support maxima are depressed along the very path a greedy
        // policy would take. The extraction probe clones the highest-Q
        // dataset action among batch rows that share a state, converging to
        // the critic's supported argmax while staying on the data manifold;
        // policy extraction warm-starts from it.
        Network probe_pi = out.behavior;
        AdamState probe_opt = AdamState::init(probe_pi.params, cfg.lr_policy);
        Network dig_pi = out.behavior;
        AdamState dig_opt = AdamState::init(dig_pi.params, cfg.lr_policy);

        AdamState q_opt = AdamState::init(out.critic.params, cfg.lr_critic);
        for (std::size_t step = 0; step < cfg.steps_critic; ++step) {
            const auto batch = sample_batch(ds, cfg.batch_size, rng);
            const double loss = critic_bellman_update(
                out.critic, q_target, bootstrap, batch, cfg.gamma, q_opt, cfg.polyak_tau,
                cfg.conservative_coef > 0.0 ? &dig_pi : nullptr, cfg.conservative_coef);
            if (cfg.conservative_coef > 0.0)
                policy_update(dig_pi, out.critic, nullptr, batch, dig_opt);
            probe_clone_update(probe_pi, out.critic, batch, probe_opt);
            if (step % cfg.log_every == 0 || step + 1 == cfg.steps_critic) {
                TrainLogRecord r;
                r.step = step;
                r.phase = "critic";
                r.critic_loss = loss;
                out.log.records.push_back(r);
            }
        }

        // Extraction continues from the probe: it already sits at the
        // supported argmax of the final critic, whereas a fresh start from
        // the behavior clone would have to climb the Q surface from the
        // behavior mixture's average action.
        if (cfg.steps_critic > 0) out.policy = probe_pi;

        AdamState f_opt = AdamState::init(out.potential.params, cfg.lr_potential);
        AdamState p_opt = AdamState::init(out.policy.params, cfg.lr_policy);
        for (std::size_t step = 0; step < cfg.steps_ppl; ++step) {
            const auto batch = sample_batch(ds, cfg.batch_size, rng);
            const auto fs = potential_update(out.potential, out.policy, batch, cfg.w, f_opt);
            const auto ps = policy_update(out.policy, out.critic, &out.potential, batch, p_opt);
            if (probe && probe->score && (step % probe->every == 0 || step + 1 == cfg.steps_ppl))
                probe->series.push_back({static_cast<double>(step), probe->score(out.policy)});
            if (step % cfg.log_every == 0 || step + 1 == cfg.steps_ppl) {
                TrainLogRecord r;
                r.step = step;
                r.phase = "ppl";
                r.potential_obj = fs.objective;
                r.policy_obj = ps.objective;
                r.mean_f_data = fs.mean_f_data;
                r.mean_f_policy = ps.mean_f_policy;
                r.mean_q_policy = ps.mean_q_policy;
                out.log.records.push_back(r);
            }
        }
        if (cfg.steps_ppl == 0) out.policy = out.behavior;
        return out;
    }

    // joint mode: Q^pi bootstraps with the current policy. With steps_bc > 0
    // the policy warm-starts from the cloned behavior; the conservative
    // penalty then measures the live policy against the data actions.
    out.critic = Network::init(qcfg, rng);
    Network q_target = out.critic;
    if (cfg.steps_bc > 0) {
        out.behavior = bc_pretrain(ds, cfg.hidden, cfg.steps_bc, cfg.lr_policy,
                                   cfg.batch_size, rng, &out.log, cfg.log_every);
        out.policy = out.behavior;
    } else {
        out.policy = Network::init(pcfg, rng, Tensor::row(ds.action_low),
                                   Tensor::row(ds.action_high));
        out.behavior = out.policy;
    }
    out.potential = Network::init(fcfg, rng);

    BootstrapFn bootstrap = policy_bootstrap(q_target, out.policy);
    AdamState q_opt = AdamState::init(out.critic.params, cfg.lr_critic);
    AdamState f_opt = AdamState::init(out.potential.params, cfg.lr_potential);
    AdamState p_opt = AdamState::init(out.policy.params, cfg.lr_policy);
    for (std::size_t step = 0; step < cfg.steps_ppl; ++step) {
        // Algorithm order: one batch per iteration, reused by all three updates
        const auto batch = sample_batch(ds, cfg.batch_size, rng);
        const double closs =
            critic_bellman_update(out.critic, q_target, bootstrap, batch, cfg.gamma,
                                  q_opt, cfg.polyak_tau, &out.policy,
                                  cfg.conservative_coef);
        const auto fs = potential_update(out.potential, out.policy, batch, cfg.w, f_opt);
        const auto ps = policy_update(out.policy, out.critic, &out.potential, batch, p_opt);
        if (probe && probe->score && (step % probe->every == 0 || step + 1 == cfg.steps_ppl))
            probe->series.push_back({static_cast<double>(step), probe->score(out.policy)});
        if (step % cfg.log_every == 0 || step + 1 == cfg.steps_ppl) {
            TrainLogRecord r;
            r.step = step;
            r.phase = "ppl";
            r.critic_loss = closs;
            r.potential_obj = fs.objective;
            r.policy_obj = ps.objective;
            r.mean_f_data = fs.mean_f_data;
            r.mean_f_policy = ps.mean_f_policy;
            r.mean_q_policy = ps.mean_q_policy;
            out.log.records.push_back(r);
        }
    }
    return out;
}

}  // namespace ppl
