#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include "ppl/tensor.hpp"

namespace ppl {

/// Adam optimizer state over a flat list of parameter tensors.
struct AdamState {
    std::vector<std::vector<double>> m;  // first moments, one entry per parameter tensor
    std::vector<std::vector<double>> v;  // second moments
    long step = 0;
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;

    static AdamState init(const std::vector<Tensor>& params, double lr) {
        AdamState s;
        s.lr = lr;
        s.m.reserve(params.size());
        s.v.reserve(params.size());
        for (const auto& p : params) {
            s.m.emplace_back(p.size(), 0.0);
            s.v.emplace_back(p.size(), 0.0);
        }
        return s;
    }
};

/// One Adam update with bias correction. params are updated in place.
inline void adam_step(std::vector<Tensor>& params, const std::vector<Tensor>& grads,
                      AdamState& st) {
    if (params.size() != grads.size() || params.size() != st.m.size())
        throw tensor_error("adam_step: parameter/gradient/state count mismatch");
    st.step += 1;
    const double bc1 = 1.0 - std::pow(st.beta1, static_cast<double>(st.step));
    const double bc2 = 1.0 - std::pow(st.beta2, static_cast<double>(st.step));
    for (std::size_t k = 0; k < params.size(); ++k) {
        if (params[k].size() != grads[k].size() || params[k].size() != st.m[k].size())
            throw tensor_error("adam_step: size mismatch in parameter " + std::to_string(k));
        auto& p = params[k].values;
        const auto& g = grads[k].values;
        auto& m = st.m[k];
        auto& v = st.v[k];
        for (std::size_t i = 0; i < p.size(); ++i) {
            m[i] = st.beta1 * m[i] + (1.0 - st.beta1) * g[i];
            v[i] = st.beta2 * v[i] + (1.0 - st.beta2) * g[i] * g[i];
            const double mhat = m[i] / bc1;
            const double vhat = v[i] / bc2;
            p[i] -= st.lr * mhat / (std::sqrt(vhat) + st.eps);
        }
    }
}

}  // namespace ppl
