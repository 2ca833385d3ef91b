#pragma once

#include <cmath>
#include <vector>

#include "cpdr/params.hpp"

namespace cpdr {

// Adam with bias correction. Moment buffers are laid out to match the
// parameter list handed to the first step.
struct AdamState {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    long step = 0;
    std::vector<std::vector<double>> m, v;
};

// One update over all params; gradients must be populated and are zeroed
// on the way out so the next backward starts clean.
inline void adam_step(AdamState& st, std::vector<Tensor>& params, double lr) {
    if (st.m.empty()) {
        st.m.resize(params.size());
        st.v.resize(params.size());
        for (std::size_t i = 0; i < params.size(); ++i) {
            st.m[i].assign(static_cast<std::size_t>(params[i].numel()), 0.0);
            st.v[i].assign(static_cast<std::size_t>(params[i].numel()), 0.0);
        }
    }
    if (st.m.size() != params.size())
        throw UsageError("optimizer state was built for a different parameter list");
    ++st.step;
    double c1 = 1.0 - std::pow(st.beta1, static_cast<double>(st.step));
    double c2 = 1.0 - std::pow(st.beta2, static_cast<double>(st.step));
    for (std::size_t i = 0; i < params.size(); ++i) {
        Tensor& p = params[i];
        if (!p.grad_allocated())
            throw UsageError("parameter has no gradient buffer; run backward first");
        if (st.m[i].size() != static_cast<std::size_t>(p.numel()))
            throw UsageError("optimizer state shape mismatch");
        double* x = p.data();
        double* g = p.grad();
        double* m = st.m[i].data();
        double* v = st.v[i].data();
        for (long j = 0; j < p.numel(); ++j) {
            m[j] = st.beta1 * m[j] + (1.0 - st.beta1) * g[j];
            v[j] = st.beta2 * v[j] + (1.0 - st.beta2) * g[j] * g[j];
            double mh = m[j] / c1;
            double vh = v[j] / c2;
            x[j] -= lr * mh / (std::sqrt(vh) + st.eps);
            g[j] = 0.0;
        }
    }
}

inline void adam_step(AdamState& st, ParamSet& ps, double lr) {
    std::vector<Tensor> params;
    params.reserve(ps.size());
    for (std::size_t i = 0; i < ps.size(); ++i) params.push_back(ps.tensor(i));
    adam_step(st, params, lr);
}

} // namespace cpdr
