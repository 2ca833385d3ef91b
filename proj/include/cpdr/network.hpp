#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "cpdr/fusion.hpp"

namespace cpdr {

enum class Arch { FPN, UNET };
enum class Refine { ADF_AUF, DACF, NONE };

inline std::string to_string(Arch a) { return a == Arch::FPN ? "FPN" : "UNET"; }
inline std::string to_string(Refine r) {
    switch (r) {
        case Refine::ADF_AUF: return "ADF_AUF";
        case Refine::DACF: return "DACF";
        default: return "NONE";
    }
}

// Declarative model description. Three pyramid stages are fixed; the input
// must be divisible by 16 so the deepest stage halves cleanly.
struct ModelConfig {
    std::vector<long> backbone_widths{16, 24, 32};
    long decoder_width = 16;
    Arch arch = Arch::FPN;
    Refine refine = Refine::DACF;
    long input_h = 96;
    long input_w = 96;
    std::uint64_t seed = 42;

    void validate() const {
        if (backbone_widths.size() != 3)
            throw ConfigError("backbone_widths must have exactly 3 entries");
        for (long w : backbone_widths)
            if (w < 1) throw ConfigError("backbone widths must be positive");
        if (decoder_width < 1) throw ConfigError("decoder_width must be positive");
        if (input_h < 16 || input_w < 16 || input_h % 16 != 0 || input_w % 16 != 0)
            throw ConfigError("input size must be a positive multiple of 16");
    }
};

// Three feature maps ordered coarse to fine; adjacent resolutions differ by
// exactly 2x. Index 0 sits at 1/8 input resolution, index 2 at 1/2.
using StagePyramid = std::array<Tensor, 3>;

// Backbone -> per-stage 1x1 laterals -> top-down decoder (add for FPN,
// concat for UNet) -> optional refinement stack -> three 1-channel heads.
class CPDRModel {
public:
    explicit CPDRModel(const ModelConfig& cfg) : cfg_(cfg) {
        cfg_.validate();
        Rng rng(cfg_.seed);
        const long w0 = cfg_.backbone_widths[0];
        const long w1 = cfg_.backbone_widths[1];
        const long w2 = cfg_.backbone_widths[2];
        const long dw = cfg_.decoder_width;

        stem_.emplace(params_, "backbone.stem", 3, w0, 3, 2, 1, rng);
        auto add_stage = [&](const std::string& name, long c_in, long c_out) {
            stage_convs_.emplace_back(params_, name + ".down", c_in, c_out, 3, 2, 1, rng);
            stage_convs_.emplace_back(params_, name + ".res1", c_out, c_out, 3, 1, 1, rng);
            stage_convs_.emplace_back(params_, name + ".res2", c_out, c_out, 3, 1, 1, rng);
        };
        add_stage("backbone.s1", w0, w1);
        add_stage("backbone.s2", w1, w2);

        // lateral k feeds decoder stage k; stage 1 is the coarsest
        laterals_.emplace_back(params_, "lateral1", w2, dw, 1, 1, 0, rng);
        laterals_.emplace_back(params_, "lateral2", w1, dw, 1, 1, 0, rng);
        laterals_.emplace_back(params_, "lateral3", w0, dw, 1, 1, 0, rng);

        for (int k = 1; k <= 3; ++k) {
            // UNet stages 2,3 concat the upsampled coarser output in front
            long c_first = (k > 1 && cfg_.arch == Arch::UNET) ? 2 * dw : dw;
            std::string name = "dec" + std::to_string(k);
            dec_convs_.emplace_back(params_, name + ".conv1", c_first, dw, 3, 1, 1, rng);
            dec_convs_.emplace_back(params_, name + ".conv2", dw, dw, 3, 1, 1, rng);
            dec_convs_.emplace_back(params_, name + ".conv3", dw, dw, 3, 1, 1, rng);
        }

        long head3_in = dw;
        if (cfg_.refine == Refine::ADF_AUF) {
            adf23_.emplace(params_, "refine.adf23", dw, dw, dw, dw, rng);
            adf12_.emplace(params_, "refine.adf12", dw, 2 * dw, dw, dw, rng);
            auf12_.emplace(params_, "refine.auf12", 2 * dw, dw, dw, dw, rng);
            auf23_.emplace(params_, "refine.auf23", 2 * dw, dw, dw, dw, rng);
            head3_in = 2 * dw; // stage-3 output carries the final concat
        } else if (cfg_.refine == Refine::DACF) {
            dacf12_.emplace(params_, "refine.dacf12", dw, dw, dw, rng);
            dacf23_.emplace(params_, "refine.dacf23", dw, dw, dw, rng);
        }

        heads_.emplace_back(params_, "head1", dw, 1, 1, 1, 0, rng);
        heads_.emplace_back(params_, "head2", dw, 1, 1, 1, 0, rng);
        heads_.emplace_back(params_, "head3", head3_in, 1, 1, 1, 0, rng);
    }

    // Per-stage logits, coarse to fine: 1/8, 1/4 and 1/2 input resolution,
    // one channel each. sigmoid of the last entry is the saliency map.
    std::array<Tensor, 3> forward(Tape& tape, const Tensor& x) const {
        const Shape& s = x.shape();
        if (s.c != 3 || s.h != cfg_.input_h || s.w != cfg_.input_w)
            throw ShapeError("model expects (n,3," + std::to_string(cfg_.input_h) + "," +
                             std::to_string(cfg_.input_w) + "), got " + to_string(s));
        StagePyramid feats = refined_pyramid(tape, x);
        return {heads_[0](tape, feats[0]), heads_[1](tape, feats[1]),
                heads_[2](tape, feats[2])};
    }

    // The three supervised feature maps before the heads.
    StagePyramid refined_pyramid(Tape& tape, const Tensor& x) const {
        Tensor t_half = relu(tape, (*stem_)(tape, x));
        Tensor t_quarter = run_stage(tape, 0, t_half);
        Tensor t_eighth = run_stage(tape, 1, t_quarter);

        Tensor l1 = laterals_[0](tape, t_eighth);
        Tensor l2 = laterals_[1](tape, t_quarter);
        Tensor l3 = laterals_[2](tape, t_half);

        Tensor p1 = run_decoder(tape, 0, l1);
        Tensor p2 = run_decoder(tape, 1, fuse_topdown(tape, l2, p1));
        Tensor p3 = run_decoder(tape, 2, fuse_topdown(tape, l3, p2));

        if (cfg_.refine == Refine::ADF_AUF) {
            auto [d2, d3] = (*adf23_)(tape, p2, p3);
            auto [d1, d2p] = (*adf12_)(tape, p1, d2);
            auto [u1, u2] = (*auf12_)(tape, d1, d2p);
            auto [u2p, u3] = (*auf23_)(tape, u2, d3);
            return {u1, u2p, u3};
        }
        if (cfg_.refine == Refine::DACF) {
            Tensor g2 = (*dacf12_)(tape, p1, p2);
            Tensor g3 = (*dacf23_)(tape, g2, p3);
            return {p1, g2, g3};
        }
        return {p1, p2, p3};
    }

    long param_count() const { return params_.total_count(); }

    long macs() const { return macs(cfg_.input_h, cfg_.input_w); }

    // Multiply-accumulate count over all convolutions at the given input
    // size; resizes and elementwise work are excluded.
    long macs(long in_h, long in_w) const {
        long h2 = in_h / 2, w2 = in_w / 2;
        long h4 = in_h / 4, w4 = in_w / 4;
        long h8 = in_h / 8, w8 = in_w / 8;
        long total = stem_->macs(in_h, in_w);
        total += stage_convs_[0].macs(h2, w2) + stage_convs_[1].macs(h4, w4) +
                 stage_convs_[2].macs(h4, w4);
        total += stage_convs_[3].macs(h4, w4) + stage_convs_[4].macs(h8, w8) +
                 stage_convs_[5].macs(h8, w8);
        const long sh[3] = {h8, h4, h2}, sw[3] = {w8, w4, w2};
        for (int k = 0; k < 3; ++k) {
            total += laterals_[k].macs(sh[k], sw[k]);
            for (int j = 0; j < 3; ++j) total += dec_convs_[k * 3 + j].macs(sh[k], sw[k]);
            total += heads_[k].macs(sh[k], sw[k]);
        }
        if (cfg_.refine == Refine::ADF_AUF) {
            total += adf23_->macs(h4, w4) + adf12_->macs(h8, w8);
            total += auf12_->macs(h8, w8) + auf23_->macs(h4, w4);
        } else if (cfg_.refine == Refine::DACF) {
            total += dacf12_->macs(h8, w8) + dacf23_->macs(h4, w4);
        }
        return total;
    }

    const ModelConfig& config() const { return cfg_; }
    ParamSet& params() { return params_; }
    const ParamSet& params() const { return params_; }

private:
    Tensor run_stage(Tape& tape, int idx, const Tensor& x) const {
        const Conv2dLayer& down = stage_convs_[idx * 3];
        const Conv2dLayer& res1 = stage_convs_[idx * 3 + 1];
        const Conv2dLayer& res2 = stage_convs_[idx * 3 + 2];
        Tensor d = relu(tape, down(tape, x));
        Tensor r = res2(tape, relu(tape, res1(tape, d)));
        return relu(tape, add(tape, d, r));
    }

    Tensor fuse_topdown(Tape& tape, const Tensor& lateral, const Tensor& coarser) const {
        Tensor up = bilinear_resize(tape, coarser, lateral.shape().h, lateral.shape().w);
        if (cfg_.arch == Arch::UNET) return concat_channels(tape, {lateral, up});
        return add(tape, lateral, up);
    }

    Tensor run_decoder(Tape& tape, int idx, const Tensor& x) const {
        const Conv2dLayer& c1 = dec_convs_[idx * 3];
        const Conv2dLayer& c2 = dec_convs_[idx * 3 + 1];
        const Conv2dLayer& c3 = dec_convs_[idx * 3 + 2];
        return c3(tape, relu(tape, c2(tape, relu(tape, c1(tape, x)))));
    }

    ModelConfig cfg_;
    ParamSet params_;
    std::optional<Conv2dLayer> stem_;
    std::vector<Conv2dLayer> stage_convs_;
    std::vector<Conv2dLayer> laterals_;
    std::vector<Conv2dLayer> dec_convs_;
    std::optional<ADFBlock> adf23_, adf12_;
    std::optional<AUFBlock> auf12_, auf23_;
    std::optional<DACFBlock> dacf12_, dacf23_;
    std::vector<Conv2dLayer> heads_;
};

} // namespace cpdr
