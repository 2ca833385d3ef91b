#pragma once

#include <cmath>
#include <string>

#include "cpdr/ops.hpp"
#include "cpdr/params.hpp"
#include "cpdr/rng.hpp"

namespace cpdr {

// Uniform Glorot initialization over fan-in + fan-out.
inline void glorot_uniform_fill(Tensor& w, long fan_in, long fan_out, Rng& rng) {
    double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    for (long i = 0; i < w.numel(); ++i) w.data()[i] = rng.uniform(-limit, limit);
}

// A 2-D convolution with bias, registered in a ParamSet under
// "<name>.w" / "<name>.b". Weights Glorot-uniform, bias zero.
class Conv2dLayer {
public:
    Conv2dLayer(ParamSet& ps, const std::string& name, long c_in, long c_out,
                long k, int stride, int pad, Rng& rng)
        : w_(ps.add(name + ".w", Shape{c_out, c_in, k, k})),
          b_(ps.add(name + ".b", Shape{1, c_out, 1, 1})),
          c_in_(c_in), c_out_(c_out), k_(k), stride_(stride), pad_(pad) {
        glorot_uniform_fill(w_, c_in * k * k, c_out * k * k, rng);
    }

    Tensor operator()(Tape& tape, const Tensor& x) const {
        return conv2d(tape, x, w_, b_, stride_, pad_);
    }

    long out_extent(long in) const { return (in + 2 * pad_ - k_) / stride_ + 1; }
    long param_count() const { return c_out_ * c_in_ * k_ * k_ + c_out_; }
    long macs(long in_h, long in_w) const {
        return k_ * k_ * c_in_ * c_out_ * out_extent(in_h) * out_extent(in_w);
    }

    Tensor weight() const { return w_; }
    Tensor bias() const { return b_; }
    long c_in() const { return c_in_; }
    long c_out() const { return c_out_; }
    long kernel() const { return k_; }

private:
    Tensor w_, b_;
    long c_in_, c_out_, k_;
    int stride_, pad_;
};

} // namespace cpdr
