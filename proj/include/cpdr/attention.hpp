#pragma once

#include <algorithm>
#include <string>

#include "cpdr/layers.hpp"

namespace cpdr {

namespace detail {

inline long se_mid_channels(long c_in, long reduction) {
    if (reduction < 1) throw UsageError("SE reduction must be >= 1");
    return std::max<long>(1, c_in / reduction);
}

inline long checked_odd_kernel(long k) {
    if (k < 1 || k % 2 == 0) throw UsageError("spatial attention kernel must be odd and >= 1");
    return k;
}

} // namespace detail

// Channel attention: squeeze (global average pool) then a two-layer
// bottleneck ending in a sigmoid. c_out may differ from c_in so the gate
// can drive a feature map from another pyramid level.
class SEBlock {
public:
    SEBlock(ParamSet& ps, const std::string& prefix, long c_in, long c_out,
            Rng& rng, long reduction = 4)
        : fc1_(ps, prefix + ".fc1", c_in, detail::se_mid_channels(c_in, reduction), 1, 1, 0, rng),
          fc2_(ps, prefix + ".fc2", detail::se_mid_channels(c_in, reduction), c_out, 1, 1, 0, rng),
          c_in_(c_in), c_out_(c_out) {
        // the bottleneck can be 1 unit wide; a positive bias keeps its relu
        // responsive at init instead of gambling on the input sign
        Tensor b1 = fc1_.bias();
        for (long i = 0; i < b1.numel(); ++i) b1.data()[i] = 0.25;
    }

    // (n, c_in, h, w) -> gate (n, c_out, 1, 1), values in (0, 1)
    Tensor operator()(Tape& tape, const Tensor& x) const {
        if (x.shape().c != c_in_)
            throw ShapeError("channel gate expects " + std::to_string(c_in_) +
                             " input channels, got " + to_string(x.shape()));
        return sigmoid(tape, fc2_(tape, relu(tape, fc1_(tape, global_avg_pool(tape, x)))));
    }

    long param_count() const { return fc1_.param_count() + fc2_.param_count(); }
    long macs() const { return fc1_.macs(1, 1) + fc2_.macs(1, 1); }
    long c_out() const { return c_out_; }
    const Conv2dLayer& fc1() const { return fc1_; }
    const Conv2dLayer& fc2() const { return fc2_; }

private:
    Conv2dLayer fc1_, fc2_;
    long c_in_, c_out_;
};

// Spatial attention: per-pixel channel mean/max stats, one k x k conv,
// sigmoid. Output has a single channel at the input resolution.
class SpatialAttnBlock {
public:
    SpatialAttnBlock(ParamSet& ps, const std::string& prefix, Rng& rng, long k = 7)
        : conv_(ps, prefix + ".conv", 2, 1, detail::checked_odd_kernel(k), 1,
                static_cast<int>((k - 1) / 2), rng) {}

    // (n, c, h, w) -> gate (n, 1, h, w), values in (0, 1)
    Tensor operator()(Tape& tape, const Tensor& x) const {
        return sigmoid(tape, conv_(tape, channel_stats(tape, x)));
    }

    long param_count() const { return conv_.param_count(); }
    long macs(long h, long w) const { return conv_.macs(h, w); }
    const Conv2dLayer& conv() const { return conv_; }

private:
    Conv2dLayer conv_;
};

} // namespace cpdr
