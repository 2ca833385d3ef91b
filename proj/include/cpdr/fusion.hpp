#pragma once

#include <string>
#include <utility>

#include "cpdr/attention.hpp"

namespace cpdr {

namespace detail {

// Fusion blocks only join adjacent pyramid levels: fine is exactly twice
// the coarse resolution.
inline void require_adjacent(const Tensor& coarse, const Tensor& fine) {
    const Shape& c = coarse.shape();
    const Shape& f = fine.shape();
    if (c.n != f.n || f.h != 2 * c.h || f.w != 2 * c.w)
        throw ShapeError("fusion inputs must be adjacent pyramid levels, got " +
                         to_string(c) + " and " + to_string(f));
}

} // namespace detail

// Result of a two-output fusion block, one tensor per level.
struct FusionPair {
    Tensor coarse;
    Tensor fine;
};

// Downward fusion: the coarse level's channel statistics gate the fine
// level, the gated map is refined by a conv, and a strided conv carries it
// back down to be stacked onto the coarse level.
class ADFBlock {
public:
    ADFBlock(ParamSet& ps, const std::string& prefix, long c_coarse, long c_fine,
             long c_post, long c_down, Rng& rng)
        : se_(ps, prefix + ".se", c_coarse, c_fine, rng),
          post_(ps, prefix + ".post", c_fine, c_post, 3, 1, 1, rng),
          down_(ps, prefix + ".down", c_post, c_down, 3, 2, 1, rng) {}

    FusionPair operator()(Tape& tape, const Tensor& coarse, const Tensor& fine) const {
        detail::require_adjacent(coarse, fine);
        Tensor gate = se_(tape, coarse);
        Tensor fine_r = post_(tape, mul(tape, fine, gate));
        Tensor coarse_r = concat_channels(tape, {coarse, down_(tape, fine_r)});
        return {coarse_r, fine_r};
    }

    long param_count() const {
        return se_.param_count() + post_.param_count() + down_.param_count();
    }
    long macs(long coarse_h, long coarse_w) const {
        return se_.macs() + post_.macs(2 * coarse_h, 2 * coarse_w) +
               down_.macs(2 * coarse_h, 2 * coarse_w);
    }

    const SEBlock& se() const { return se_; }
    const Conv2dLayer& post() const { return post_; }
    const Conv2dLayer& down() const { return down_; }

private:
    SEBlock se_;
    Conv2dLayer post_, down_;
};

// Upward fusion: the fine level's spatial statistics gate the coarse level,
// the gated map is refined by a conv, then upscaled and stacked onto the
// fine level.
class AUFBlock {
public:
    AUFBlock(ParamSet& ps, const std::string& prefix, long c_coarse, long c_fine,
             long c_post, long c_up, Rng& rng)
        : sa_(ps, prefix + ".sa", rng),
          post_(ps, prefix + ".post", c_coarse, c_post, 3, 1, 1, rng),
          up_(ps, prefix + ".up", c_post, c_up, 3, 1, 1, rng) {}

    FusionPair operator()(Tape& tape, const Tensor& coarse, const Tensor& fine) const {
        detail::require_adjacent(coarse, fine);
        Tensor gate = sa_(tape, fine);
        Tensor gate_c = bilinear_resize(tape, gate, coarse.shape().h, coarse.shape().w);
        Tensor coarse_r = post_(tape, mul(tape, coarse, gate_c));
        Tensor lifted = bilinear_resize(tape, coarse_r, fine.shape().h, fine.shape().w);
        Tensor fine_r = concat_channels(tape, {fine, up_(tape, lifted)});
        return {coarse_r, fine_r};
    }

    long param_count() const {
        return sa_.param_count() + post_.param_count() + up_.param_count();
    }
    long macs(long coarse_h, long coarse_w) const {
        return sa_.macs(2 * coarse_h, 2 * coarse_w) + post_.macs(coarse_h, coarse_w) +
               up_.macs(2 * coarse_h, 2 * coarse_w);
    }

    const SpatialAttnBlock& sa() const { return sa_; }
    const Conv2dLayer& post() const { return post_; }
    const Conv2dLayer& up() const { return up_; }

private:
    SpatialAttnBlock sa_;
    Conv2dLayer post_, up_;
};

// Combined fusion: both gatings at once, aggregated at the coarse level,
// lifted back up, and mixed through two 1x1 convs with a residual add
// against the channel-gated fine map.
class DACFBlock {
public:
    // c_mix1 defaults to c_fine; the residual add rejects anything else.
    // c_out defaults to c_fine.
    DACFBlock(ParamSet& ps, const std::string& prefix, long c_coarse, long c_fine,
              long c_down, Rng& rng, long c_out = 0, long c_mix1 = 0)
        : se_(ps, prefix + ".se", c_coarse, c_fine, rng),
          sa_(ps, prefix + ".sa", rng),
          down_(ps, prefix + ".down", c_fine, c_down, 3, 2, 1, rng),
          mix1_(ps, prefix + ".mix1", c_down + c_coarse,
                c_mix1 > 0 ? c_mix1 : c_fine, 1, 1, 0, rng),
          mix2_(ps, prefix + ".mix2", c_fine, c_out > 0 ? c_out : c_fine, 1, 1, 0, rng) {}

    Tensor operator()(Tape& tape, const Tensor& coarse, const Tensor& fine) const {
        detail::require_adjacent(coarse, fine);
        Tensor w_fine = mul(tape, fine, se_(tape, coarse));
        Tensor sp_gate = bilinear_resize(tape, sa_(tape, fine), coarse.shape().h,
                                         coarse.shape().w);
        Tensor w_coarse = mul(tape, coarse, sp_gate);
        Tensor gathered = concat_channels(tape, {down_(tape, w_fine), w_coarse});
        Tensor lifted = bilinear_resize(tape, gathered, fine.shape().h, fine.shape().w);
        return mix2_(tape, add(tape, mix1_(tape, lifted), w_fine));
    }

    long param_count() const {
        return se_.param_count() + sa_.param_count() + down_.param_count() +
               mix1_.param_count() + mix2_.param_count();
    }
    long macs(long coarse_h, long coarse_w) const {
        long fh = 2 * coarse_h, fw = 2 * coarse_w;
        return se_.macs() + sa_.macs(fh, fw) + down_.macs(fh, fw) +
               mix1_.macs(fh, fw) + mix2_.macs(fh, fw);
    }

    const SEBlock& se() const { return se_; }
    const SpatialAttnBlock& sa() const { return sa_; }
    const Conv2dLayer& down() const { return down_; }
    const Conv2dLayer& mix1() const { return mix1_; }
    const Conv2dLayer& mix2() const { return mix2_; }

private:
    SEBlock se_;
    SpatialAttnBlock sa_;
    Conv2dLayer down_, mix1_, mix2_;
};

} // namespace cpdr
