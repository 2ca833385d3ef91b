#pragma once

#include <array>
#include <vector>

#include "cpdr/ops.hpp"

namespace cpdr {

// The soft-overlap loss ships in two flavors: Standard2x carries the usual
// factor-2 numerator so a perfect prediction scores 0; Verbatim omits it
// (perfect overlap then tends to 0.5 as epsilon shrinks). Standard2x is the
// default; Verbatim is kept selectable for comparison runs.
enum class DiceVariant { Standard2x, Verbatim };

struct LossConfig {
    double epsilon = 1.0;
    DiceVariant dice_variant = DiceVariant::Standard2x;
    std::array<double, 3> stage_weights{1.0, 1.0, 1.0};

    void validate() const {
        if (!(epsilon > 0)) throw ConfigError("loss epsilon must be > 0");
        for (double w : stage_weights)
            if (!(w > 0)) throw ConfigError("stage weights must be > 0");
    }
};

namespace detail {

inline void require_same_shape(const Tensor& p, const Tensor& y) {
    if (!(p.shape() == y.shape()))
        throw ShapeError("loss inputs differ: " + to_string(p.shape()) + " vs " +
                         to_string(y.shape()));
}

} // namespace detail

// p are probabilities in [0,1]; y is the target in [0,1]. Returns a scalar
// graph node.
inline Tensor dice_loss(Tape& tape, const Tensor& p, const Tensor& y,
                        const LossConfig& cfg = {}) {
    detail::require_same_shape(p, y);
    cfg.validate();
    Tensor inter = sum_all(tape, mul(tape, p, y));
    Tensor sums = add(tape, sum_all(tape, p), sum_all(tape, y));
    Tensor num = cfg.dice_variant == DiceVariant::Standard2x
                     ? add_const(tape, scale(tape, inter, 2.0), cfg.epsilon)
                     : add_const(tape, inter, cfg.epsilon);
    Tensor ratio = div(tape, num, add_const(tape, sums, cfg.epsilon));
    return add_const(tape, scale(tape, ratio, -1.0), 1.0);
}

inline Tensor iou_loss(Tape& tape, const Tensor& p, const Tensor& y,
                       const LossConfig& cfg = {}) {
    detail::require_same_shape(p, y);
    cfg.validate();
    Tensor inter = sum_all(tape, mul(tape, p, y));
    Tensor uni = add(tape, add(tape, sum_all(tape, p), sum_all(tape, y)),
                     scale(tape, inter, -1.0));
    Tensor ratio = div(tape, add_const(tape, inter, cfg.epsilon),
                       add_const(tape, uni, cfg.epsilon));
    return add_const(tape, scale(tape, ratio, -1.0), 1.0);
}

inline Tensor total_loss(Tape& tape, const Tensor& p, const Tensor& y,
                         const LossConfig& cfg = {}) {
    return add(tape, dice_loss(tape, p, y, cfg), iou_loss(tape, p, y, cfg));
}

// Per-stage losses plus the weighted sum that training backpropagates.
struct LossBundle {
    std::array<Tensor, 3> dice;
    std::array<Tensor, 3> iou;
    std::array<Tensor, 3> stage_total;
    Tensor total;

    double weighted(const std::array<Tensor, 3>& parts,
                    const std::array<double, 3>& w) const {
        double s = 0;
        for (int k = 0; k < 3; ++k) s += w[k] * parts[k].data()[0];
        return s;
    }
};

// logits come coarse to fine; y_full must already sit at the finest stage's
// resolution. Coarser stages train against plain bilinear shrinks of it
// (raw values, no re-binarization).
inline LossBundle deep_supervised_loss(Tape& tape, const std::vector<Tensor>& logits,
                                       const Tensor& y_full, const LossConfig& cfg = {}) {
    cfg.validate();
    if (logits.size() != 3)
        throw UsageError("deep supervision expects exactly 3 stage logits");
    const Shape& ys = y_full.shape();
    const Shape& fs = logits[2].shape();
    if (ys.c != 1 || ys.n != fs.n || ys.h != fs.h || ys.w != fs.w)
        throw ShapeError("target must match the finest stage: expected " +
                         to_string(Shape{fs.n, 1, fs.h, fs.w}) + ", got " + to_string(ys));
    LossBundle out;
    for (int k = 0; k < 3; ++k) {
        const Shape& ls = logits[k].shape();
        if (ls.c != 1) throw ShapeError("stage logits must have one channel");
        Tensor yk = (k == 2) ? y_full : bilinear_resize(tape, y_full, ls.h, ls.w);
        Tensor p = sigmoid(tape, logits[k]);
        out.dice[k] = dice_loss(tape, p, yk, cfg);
        out.iou[k] = iou_loss(tape, p, yk, cfg);
        out.stage_total[k] = add(tape, out.dice[k], out.iou[k]);
        Tensor term = scale(tape, out.stage_total[k], cfg.stage_weights[k]);
        out.total = (k == 0) ? term : add(tape, out.total, term);
    }
    return out;
}

} // namespace cpdr
