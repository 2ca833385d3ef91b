#pragma once

#include <cstdio>
#include <fstream>
#include <iostream>
#include <numeric>
#include <vector>

#include "cpdr/checkpoint.hpp"
#include "cpdr/data.hpp"
#include "cpdr/loss.hpp"
#include "cpdr/optimizer.hpp"
#include "cpdr/schedule.hpp"

namespace cpdr {

struct TrainOptions {
    long batch_size = 16;
    long epochs = 20;
    long max_steps = 0; // 0: run `epochs`; otherwise an exact step budget
    double base_lr = 1e-3;
    long warmup_epochs = 5;
    double gamma = 3.0;
    LossConfig loss;
    std::uint64_t seed = 42;
    bool hflip = true;
    std::string log_path; // per-step CSV; empty disables logging
};

struct StepRow {
    long epoch = 0;
    long step = 0; // global optimizer step, 0-based
    double lr = 0, dice = 0, iou = 0, total = 0, train_mae = 0;
};

struct EpochRow {
    long epoch = 0;
    double mean_total = 0, train_mae = 0;
};

struct TrainLog {
    std::vector<StepRow> steps;
    std::vector<EpochRow> epochs;
    double final_train_mae = 0;
};

namespace detail {

inline double sigmoid_value(double x) {
    if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
    double e = std::exp(x);
    return e / (1.0 + e);
}

} // namespace detail

// Mean absolute error between sigmoid(logits) and the target, values only.
inline double batch_mae(const Tensor& logits, const Tensor& target) {
    double acc = 0;
    for (long i = 0; i < logits.numel(); ++i)
        acc += std::abs(detail::sigmoid_value(logits.data()[i]) - target.data()[i]);
    return acc / static_cast<double>(logits.numel());
}

// Full-resolution training loop: seeded shuffle and flip augmentation per
// epoch, drop-last batching, poly+warmup learning rate over the exact run
// horizon, Adam updates. Deterministic for a given seed.
inline TrainLog train(CPDRModel& model, const std::vector<SamplePair>& data,
                      const TrainOptions& opt) {
    if (data.empty()) throw UsageError("training dataset is empty");
    if (opt.batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (opt.max_steps == 0 && opt.epochs < 1) throw ConfigError("epochs must be >= 1");
    opt.loss.validate();
    if (!(opt.base_lr > 0)) throw ConfigError("base_lr must be > 0");

    const long h = model.config().input_h, w = model.config().input_w;
    for (const SamplePair& s : data) {
        if (!(s.image.shape() == Shape{1, 3, h, w}) || !(s.mask.shape() == Shape{1, 1, h, w}))
            throw ShapeError("sample " + s.name + " does not match the model input size");
    }

    const long n = static_cast<long>(data.size());
    const long bsz = opt.batch_size;
    const long spe = n / bsz;
    if (spe == 0) throw UsageError("batch size exceeds the dataset size");
    const long total_steps = opt.max_steps > 0 ? opt.max_steps : opt.epochs * spe;
    long warm = opt.warmup_epochs * spe;
    if (warm >= total_steps) {
        warm = total_steps > 1 ? total_steps - 1 : 0;
        std::cerr << "warning: run shorter than the warmup; clamping warmup to " << warm
                  << " steps\n";
    }
    const long hy = h / 2, wy = w / 2; // finest supervised resolution

    std::ofstream csv;
    if (!opt.log_path.empty()) {
        csv.open(opt.log_path, std::ios::trunc);
        if (!csv) throw IoError("cannot open " + opt.log_path + " for writing");
        csv << "epoch,step,lr,dice,iou,total,train_mae\n";
    }

    TrainLog log;
    AdamState adam;
    long step = 0;
    for (long epoch = 0; step < total_steps; ++epoch) {
        Rng rng(Rng::mix(opt.seed, static_cast<std::uint64_t>(epoch)));
        std::vector<long> perm(static_cast<std::size_t>(n));
        std::iota(perm.begin(), perm.end(), 0L);
        rng.shuffle(perm);

        double epoch_total = 0, epoch_mae = 0;
        long epoch_steps = 0;
        for (long b = 0; b < spe && step < total_steps; ++b) {
            Tensor x(Shape{bsz, 3, h, w});
            Tensor ym(Shape{bsz, 1, h, w});
            for (long j = 0; j < bsz; ++j) {
                const SamplePair& src = data[static_cast<std::size_t>(perm[b * bsz + j])];
                SamplePair s = augment_hflip(src, opt.hflip && rng.coin());
                std::copy(s.image.data(), s.image.data() + 3 * h * w, x.data() + j * 3 * h * w);
                std::copy(s.mask.data(), s.mask.data() + h * w, ym.data() + j * h * w);
            }
            Tape prep = Tape::inference();
            Tensor y_full = bilinear_resize(prep, ym, hy, wy);

            double lr = detail::poly_warmup_lr_steps(opt.base_lr, warm, total_steps,
                                                     opt.gamma, step);
            Tape tape;
            auto logits = model.forward(tape, x);
            LossBundle bundle = deep_supervised_loss(
                tape, {logits[0], logits[1], logits[2]}, y_full, opt.loss);
            backward(bundle.total, tape);
            adam_step(adam, model.params(), lr);

            StepRow row;
            row.epoch = epoch;
            row.step = step;
            row.lr = lr;
            row.dice = bundle.weighted(bundle.dice, opt.loss.stage_weights);
            row.iou = bundle.weighted(bundle.iou, opt.loss.stage_weights);
            row.total = bundle.total.data()[0];
            row.train_mae = batch_mae(logits[2], y_full);
            log.steps.push_back(row);
            if (csv.is_open()) {
                char buf[256];
                std::snprintf(buf, sizeof buf, "%ld,%ld,%.17g,%.17g,%.17g,%.17g,%.17g\n",
                              row.epoch, row.step, row.lr, row.dice, row.iou, row.total,
                              row.train_mae);
                csv << buf;
            }
            epoch_total += row.total;
            epoch_mae += row.train_mae;
            ++epoch_steps;
            ++step;
        }
        if (epoch_steps > 0)
            log.epochs.push_back({epoch, epoch_total / epoch_steps, epoch_mae / epoch_steps});
    }

    // unaugmented pass over the full training set
    double acc = 0;
    for (const SamplePair& s : data) {
        Tape tape = Tape::inference();
        auto logits = model.forward(tape, s.image);
        Tensor y = bilinear_resize(tape, s.mask, hy, wy);
        acc += batch_mae(logits[2], y);
    }
    log.final_train_mae = acc / static_cast<double>(n);
    return log;
}

} // namespace cpdr
