#pragma once

#include <cmath>
#include <cstddef>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "ppl/tape.hpp"
#include "ppl/tensor.hpp"

namespace ppl {

/// Output head of a network.
///  PolicyTanh    -- tanh squashed and rescaled into [action_low, action_high]
///  Scalar        -- unbounded (critic)
///  NonnegScalar  -- softplus, structurally >= 0 (dual potential)
enum class Head { PolicyTanh, Scalar, NonnegScalar };

inline const char* head_name(Head h) {
    switch (h) {
        case Head::PolicyTanh: return "policy-tanh";
        case Head::Scalar: return "scalar";
        case Head::NonnegScalar: return "nonnegative-scalar";
    }
    return "?";
}

inline Head head_from_name(const std::string& s) {
    if (s == "policy-tanh") return Head::PolicyTanh;
    if (s == "scalar") return Head::Scalar;
    if (s == "nonnegative-scalar") return Head::NonnegScalar;
    throw tensor_error("unknown head kind: " + s);
}

struct NetConfig {
    std::size_t input_dim = 1;
    std::vector<std::size_t> hidden;
    std::size_t output_dim = 1;
    Head head = Head::Scalar;

    void validate() const {
        if (input_dim < 1 || output_dim < 1)
            throw tensor_error("net config: dims must be >= 1");
        for (auto h : hidden)
            if (h < 1) throw tensor_error("net config: hidden sizes must be >= 1");
    }
};

/// ReLU MLP with a role-specific head. Parameters are plain value tensors:
/// W0, b0, W1, b1, ... in layer order. Weights are Wx stored as
/// [in, out] so a batch [B, in] maps by matmul.
struct Network {
    NetConfig cfg;
    std::vector<Tensor> params;
    // tanh head rescaling, [1, output_dim] each; unused for scalar heads
    Tensor action_low;
    Tensor action_high;

    static Network init(NetConfig cfg, std::mt19937_64& rng,
                        Tensor action_low = {}, Tensor action_high = {}) {
        cfg.validate();
        Network net;
        net.cfg = cfg;
        std::vector<std::size_t> sizes;
        sizes.push_back(cfg.input_dim);
        for (auto h : cfg.hidden) sizes.push_back(h);
        sizes.push_back(cfg.output_dim);
        for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
            const std::size_t fan_in = sizes[l], fan_out = sizes[l + 1];
            const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
            std::uniform_real_distribution<double> u(-bound, bound);
            Tensor w = Tensor::zeros({fan_in, fan_out});
            for (double& v : w.values) v = u(rng);
            net.params.push_back(std::move(w));
            net.params.push_back(Tensor::zeros({1, fan_out}));  // bias
        }
        if (cfg.head == Head::PolicyTanh) {
            if (action_low.size() != cfg.output_dim || action_high.size() != cfg.output_dim)
                throw tensor_error("policy net: action bounds must match output dim");
            net.action_low = std::move(action_low);
            net.action_high = std::move(action_high);
        }
        return net;
    }

    std::size_t param_count() const {
        std::size_t n = 0;
        for (const auto& p : params) n += p.size();
        return n;
    }

    /// Differentiable forward. Registers parameters on the tape (trainable iff
    /// train_params) and returns the head output var. param_vars, when given,
    /// receives the tape vars of the parameters in params order.
    Tape::Var forward(Tape& tape, Tape::Var input, bool train_params,
                      std::vector<Tape::Var>* param_vars = nullptr) const {
        std::vector<Tape::Var> pv;
        pv.reserve(params.size());
        for (const auto& p : params) pv.push_back(tape.input(p, train_params));
        if (param_vars) *param_vars = pv;

        Tape::Var h = input;
        const std::size_t layers = params.size() / 2;
        for (std::size_t l = 0; l < layers; ++l) {
            h = tape.add(tape.matmul(h, pv[2 * l]), pv[2 * l + 1]);
            if (l + 1 < layers) h = tape.relu(h);
        }
        return apply_head(tape, h);
    }

    /// Forward pass through parameters already registered on the tape; lets
    /// one update evaluate the same network on several inputs.
    Tape::Var forward_given(Tape& tape, Tape::Var input,
                            const std::vector<Tape::Var>& pv) const {
        Tape::Var h = input;
        const std::size_t layers = params.size() / 2;
        for (std::size_t l = 0; l < layers; ++l) {
            h = tape.add(tape.matmul(h, pv[2 * l]), pv[2 * l + 1]);
            if (l + 1 < layers) h = tape.relu(h);
        }
        return apply_head(tape, h);
    }

    Tape::Var apply_head(Tape& tape, Tape::Var h) const {
        switch (cfg.head) {
            case Head::Scalar:
                return h;
            case Head::NonnegScalar:
                return tape.softplus(h);
            case Head::PolicyTanh: {
                // a = mid + halfrange * tanh(h), coordinatewise
                Tensor mid = Tensor::zeros({1, cfg.output_dim});
                Tensor halfrange = Tensor::zeros({1, cfg.output_dim});
                for (std::size_t j = 0; j < cfg.output_dim; ++j) {
                    mid.values[j] = 0.5 * (action_low.values[j] + action_high.values[j]);
                    halfrange.values[j] = 0.5 * (action_high.values[j] - action_low.values[j]);
                }
                Tape::Var y = tape.col_scale(tape.tanh(h), std::move(halfrange));
                return tape.add(y, tape.constant(std::move(mid)));
            }
        }
        throw tensor_error("unreachable head");
    }

    /// Plain numeric forward without a tape; used for bootstrap targets,
    /// rollouts and evaluation.
    Tensor predict(const Tensor& input) const {
        if (input.cols() != cfg.input_dim)
            throw tensor_error("predict: input dim " + std::to_string(input.cols()) +
                               " != " + std::to_string(cfg.input_dim));
        const std::size_t B = input.rows();
        std::vector<double> cur = input.values;
        std::size_t cur_cols = cfg.input_dim;
        const std::size_t layers = params.size() / 2;
        for (std::size_t l = 0; l < layers; ++l) {
            const Tensor& W = params[2 * l];
            const Tensor& b = params[2 * l + 1];
            const std::size_t out = W.cols();
            std::vector<double> next(B * out);
            for (std::size_t i = 0; i < B; ++i)
                for (std::size_t j = 0; j < out; ++j) next[i * out + j] = b.values[j];
            for (std::size_t i = 0; i < B; ++i) {
                const double* row = &cur[i * cur_cols];
                double* nrow = &next[i * out];
                for (std::size_t p = 0; p < cur_cols; ++p) {
                    const double av = row[p];
                    if (av == 0.0) continue;
                    const double* wrow = &W.values[p * out];
                    for (std::size_t j = 0; j < out; ++j) nrow[j] += av * wrow[j];
                }
            }
            if (l + 1 < layers)
                for (double& v : next) v = v > 0.0 ? v : 0.0;
            cur = std::move(next);
            cur_cols = out;
        }
        Tensor out({B, cfg.output_dim}, std::move(cur));
        switch (cfg.head) {
            case Head::Scalar: break;
            case Head::NonnegScalar:
                for (double& v : out.values) {
                    if (v > 30.0) continue;
                    v = v < -30.0 ? std::exp(v) : std::log1p(std::exp(v));
                }
                break;
            case Head::PolicyTanh:
                for (std::size_t i = 0; i < B; ++i)
                    for (std::size_t j = 0; j < cfg.output_dim; ++j) {
                        const double mid =
                            0.5 * (action_low.values[j] + action_high.values[j]);
                        const double hr =
                            0.5 * (action_high.values[j] - action_low.values[j]);
                        double& v = out.values[i * cfg.output_dim + j];
                        v = mid + hr * std::tanh(v);
                    }
                break;
        }
        if (!out.all_finite())
            throw tensor_error("predict: non-finite network output");
        return out;
    }
};

/// Collect gradients of a network's parameters after Tape::backward.
inline std::vector<Tensor> collect_grads(const Tape& tape,
                                         const std::vector<Tape::Var>& param_vars) {
    std::vector<Tensor> g;
    g.reserve(param_vars.size());
    for (auto v : param_vars) g.push_back(tape.grad(v));
    return g;
}

}  // namespace ppl
