#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "cpdr/grad_check.hpp"
#include "cpdr/train.hpp"
#include "oracles.hpp"

using namespace cpdr;

namespace {

Tensor vec4(std::initializer_list<double> v) { return Tensor::from(Shape{1, 1, 2, 2}, v); }

double scalar_of(Tensor (*fn)(Tape&, const Tensor&, const Tensor&, const LossConfig&),
                 const Tensor& p, const Tensor& y, const LossConfig& cfg) {
    Tape tape = Tape::inference();
    return fn(tape, p, y, cfg).data()[0];
}

LossConfig cfg_std(double eps = 1.0) {
    LossConfig c;
    c.epsilon = eps;
    c.dice_variant = DiceVariant::Standard2x;
    return c;
}

LossConfig cfg_verbatim(double eps) {
    LossConfig c;
    c.epsilon = eps;
    c.dice_variant = DiceVariant::Verbatim;
    return c;
}

} // namespace

TEST(Loss, DiceKnownValues) {
    Tensor y = vec4({1, 1, 0, 0});
    EXPECT_DOUBLE_EQ(scalar_of(dice_loss, y, y, cfg_std()), 0.0);
    EXPECT_NEAR(scalar_of(dice_loss, y, y, cfg_verbatim(1e-12)), 0.5, 1e-9);
    Tensor p = vec4({1, 0, 0, 0});
    EXPECT_DOUBLE_EQ(scalar_of(dice_loss, p, y, cfg_std(1.0)), 0.25); // 1 - 3/4
}

TEST(Loss, IouKnownValues) {
    Tensor y = vec4({1, 1, 0, 0});
    EXPECT_DOUBLE_EQ(scalar_of(iou_loss, y, y, cfg_std()), 0.0);
    Tensor p8(Shape{1, 1, 2, 4});
    Tensor y8(Shape{1, 1, 2, 4});
    for (int i = 0; i < 4; ++i) p8.data()[i] = 1.0;      // first four pixels
    for (int i = 4; i < 8; ++i) y8.data()[i] = 1.0;      // disjoint four
    EXPECT_NEAR(scalar_of(iou_loss, p8, y8, cfg_std(1.0)), 1.0 - 1.0 / 9.0, 1e-15);
    Tensor z = vec4({0, 0, 0, 0});
    EXPECT_DOUBLE_EQ(scalar_of(iou_loss, z, z, cfg_std(1.0)), 0.0);
}

TEST(Loss, TotalIsSumAndErrorsPropagate) {
    Tensor p = vec4({0.2, 0.9, 0.4, 0.1});
    Tensor y = vec4({0, 1, 1, 0});
    Tape tape = Tape::inference();
    double total = total_loss(tape, p, y, cfg_std()).data()[0];
    double parts = dice_loss(tape, p, y, cfg_std()).data()[0] +
                   iou_loss(tape, p, y, cfg_std()).data()[0];
    EXPECT_DOUBLE_EQ(total, parts);
    Tensor bad(Shape{1, 1, 2, 3});
    EXPECT_THROW(total_loss(tape, p, bad, cfg_std()), ShapeError);
    EXPECT_THROW(total_loss(tape, p, y, cfg_std(0.0)), ConfigError);
}

TEST(Loss, ExhaustiveBinaryGridContracts) {
    // all 16 x 16 binary 2x2 combinations
    for (int pm = 0; pm < 16; ++pm) {
        Tensor p(Shape{1, 1, 2, 2});
        for (int i = 0; i < 4; ++i) p.data()[i] = (pm >> i) & 1;
        for (int ym = 0; ym < 16; ++ym) {
            Tensor y(Shape{1, 1, 2, 2});
            for (int i = 0; i < 4; ++i) y.data()[i] = (ym >> i) & 1;
            double d = scalar_of(dice_loss, p, y, cfg_std());
            double v = scalar_of(dice_loss, p, y, cfg_verbatim(1.0));
            double j = scalar_of(iou_loss, p, y, cfg_std());
            EXPECT_GE(d, 0.0);
            EXPECT_LE(d, 1.0);
            EXPECT_GE(v, 0.0);
            EXPECT_LE(v, 1.0);
            EXPECT_GE(j, 0.0);
            EXPECT_LE(j, 1.0);
            if (pm == ym) {
                EXPECT_DOUBLE_EQ(d, 0.0);
                EXPECT_DOUBLE_EQ(j, 0.0);
            }
        }
    }
    // single-pixel corruption of a perfect prediction never reduces a loss
    for (int ym = 0; ym < 16; ++ym) {
        Tensor y(Shape{1, 1, 2, 2});
        for (int i = 0; i < 4; ++i) y.data()[i] = (ym >> i) & 1;
        double d0 = scalar_of(dice_loss, y, y, cfg_std());
        double v0 = scalar_of(dice_loss, y, y, cfg_verbatim(1.0));
        double j0 = scalar_of(iou_loss, y, y, cfg_std());
        for (int i = 0; i < 4; ++i) {
            Tensor p = y.clone();
            p.data()[i] = 1.0 - p.data()[i];
            EXPECT_GE(scalar_of(dice_loss, p, y, cfg_std()), d0);
            EXPECT_GE(scalar_of(dice_loss, p, y, cfg_verbatim(1.0)), v0);
            EXPECT_GE(scalar_of(iou_loss, p, y, cfg_std()), j0);
        }
    }
}

TEST(Loss, GradientsMatchFiniteDifferences) {
    Tensor p = vec4({0.3, 0.7, 0.2, 0.9});
    Tensor y = vec4({0, 1, 0, 1});
    for (DiceVariant dv : {DiceVariant::Standard2x, DiceVariant::Verbatim}) {
        LossConfig cfg;
        cfg.dice_variant = dv;
        auto f = [&](Tape& t, const Tensor& v) { return total_loss(t, v, y, cfg); };
        EXPECT_LT(grad_check(f, p), 1e-6);
    }
}

TEST(DeepSupervision, WiringAndResizeOracle) {
    Rng rng(1);
    Tensor l1(Shape{2, 1, 4, 4}), l2(Shape{2, 1, 8, 8}), l3(Shape{2, 1, 16, 16});
    for (Tensor* t : {&l1, &l2, &l3})
        for (long i = 0; i < t->numel(); ++i) t->data()[i] = rng.uniform(-2, 2);
    Tensor y(Shape{2, 1, 16, 16});
    for (long i = 0; i < y.numel(); ++i) y.data()[i] = rng.coin() ? 1.0 : 0.0;

    Tape tape = Tape::inference();
    LossBundle b = deep_supervised_loss(tape, {l1, l2, l3}, y, cfg_std());
    double manual = b.stage_total[0].data()[0] + b.stage_total[1].data()[0] +
                    b.stage_total[2].data()[0];
    EXPECT_NEAR(b.total.data()[0], manual, 1e-12);

    // stage-2 target equals the independent interpolation oracle
    Tensor y2 = oracle::bilinear_direct(y, 8, 8);
    Tensor p2 = sigmoid(tape, l2);
    double want = total_loss(tape, p2, y2, cfg_std()).data()[0];
    EXPECT_NEAR(b.stage_total[1].data()[0], want, 1e-12);

    EXPECT_THROW(deep_supervised_loss(tape, {l1, l2}, y, cfg_std()), UsageError);
    Tensor ybad(Shape{2, 1, 8, 8});
    EXPECT_THROW(deep_supervised_loss(tape, {l1, l2, l3}, ybad, cfg_std()), ShapeError);
}

TEST(DeepSupervision, SaturatedLogitsDriveLossToZero) {
    // constant 4x4 quadrants survive both bilinear shrinks exactly, so every
    // stage target stays binary and a saturated match should cost nothing
    Tensor y(Shape{1, 1, 8, 8});
    for (long r = 0; r < 8; ++r)
        for (long c = 0; c < 8; ++c) y.data()[r * 8 + c] = ((r < 4) == (c < 4)) ? 1.0 : 0.0;
    Tape tape = Tape::inference();
    Tensor y1 = bilinear_resize(tape, y, 2, 2);
    Tensor y2 = bilinear_resize(tape, y, 4, 4);
    auto saturate = [&](const Tensor& t) {
        Tensor l(t.shape());
        for (long i = 0; i < t.numel(); ++i) l.data()[i] = t.data()[i] > 0.5 ? 60.0 : -60.0;
        return l;
    };
    LossBundle b = deep_supervised_loss(tape, {saturate(y1), saturate(y2), saturate(y)}, y,
                                        cfg_std(1e-6));
    EXPECT_LT(b.total.data()[0], 0.05);
}

TEST(Schedule, KnownPoints) {
    Schedule s;
    s.base_lr = 0.4;
    s.warmup_epochs = 2;
    s.total_epochs = 10;
    s.gamma = 3.0;
    s.steps_per_epoch = 5;
    // W = 10, T = 50
    EXPECT_DOUBLE_EQ(poly_warmup_lr(s, 0), 0.4 * 1 / 10);
    EXPECT_DOUBLE_EQ(poly_warmup_lr(s, 9), 0.4);        // last warmup step hits base
    EXPECT_DOUBLE_EQ(poly_warmup_lr(s, 10), 0.4);       // first decay step starts at base
    EXPECT_DOUBLE_EQ(poly_warmup_lr(s, 30), 0.4 * 0.125); // halfway into decay, 0.5^3
    EXPECT_DOUBLE_EQ(poly_warmup_lr(s, 50), 0.0);
    double last = poly_warmup_lr(s, 49);
    EXPECT_NEAR(last, 0.4 * std::pow(1.0 / 40.0, 3.0), 1e-18);
    EXPECT_GT(last, 0.0);
    EXPECT_THROW(poly_warmup_lr(s, -1), UsageError);
    EXPECT_THROW(poly_warmup_lr(s, 51), UsageError);
}

TEST(Schedule, Validation) {
    Schedule s;
    s.warmup_epochs = 20;
    s.total_epochs = 20;
    EXPECT_THROW(s.validate(), ConfigError);
    s = Schedule{};
    s.base_lr = 0;
    EXPECT_THROW(s.validate(), ConfigError);
    s = Schedule{};
    s.steps_per_epoch = 0;
    EXPECT_THROW(s.validate(), ConfigError);
    s = Schedule{};
    s.warmup_epochs = 0; // no warmup is legal
    s.validate();
    s.steps_per_epoch = 4;
    EXPECT_DOUBLE_EQ(poly_warmup_lr(s, 0), s.base_lr);
}

TEST(Adam, FirstStepIsSignedLr) {
    Tensor x = Tensor::scalar(1.0);
    x.set_requires_grad(true);
    x.ensure_grad();
    x.grad()[0] = 0.37; // arbitrary positive gradient
    std::vector<Tensor> params{x};
    AdamState st;
    adam_step(st, params, 0.01);
    EXPECT_NEAR(x.data()[0], 1.0 - 0.01, 1e-8);
    EXPECT_DOUBLE_EQ(x.cgrad()[0], 0.0); // gradient cleared by the step
}

TEST(Adam, ZeroGradLeavesParamUntouched) {
    Tensor x = Tensor::scalar(2.5);
    x.set_requires_grad(true);
    x.ensure_grad();
    std::vector<Tensor> params{x};
    AdamState st;
    adam_step(st, params, 0.1);
    EXPECT_DOUBLE_EQ(x.data()[0], 2.5);
    EXPECT_EQ(st.step, 1);
}

TEST(Adam, MissingGradientIsUsageError) {
    Tensor x = Tensor::scalar(1.0);
    std::vector<Tensor> params{x};
    AdamState st;
    EXPECT_THROW(adam_step(st, params, 0.1), UsageError);
}

TEST(Adam, MinimizesQuadratic) {
    Tensor x = Tensor::scalar(1.0);
    x.set_requires_grad(true);
    x.ensure_grad();
    std::vector<Tensor> params{x};
    AdamState st;
    for (int i = 0; i < 100; ++i) {
        x.grad()[0] = 2.0 * x.data()[0];
        adam_step(st, params, 0.1);
    }
    EXPECT_LT(std::abs(x.data()[0]), 0.1);
}

// ---------------------------------------------------------------------------
// training loop

namespace {

ModelConfig tiny_cfg(long input = 32) {
    ModelConfig cfg;
    cfg.backbone_widths = {4, 6, 8};
    cfg.decoder_width = 8;
    cfg.arch = Arch::FPN;
    cfg.refine = Refine::DACF;
    cfg.input_h = cfg.input_w = input;
    cfg.seed = 3;
    return cfg;
}

std::vector<SamplePair> tiny_data(long count, long size) {
    SynthSpec spec;
    spec.count = count;
    spec.size = size;
    spec.seed = 11;
    return generate_synthetic(spec);
}

} // namespace

TEST(Train, LossDecreasesOnSingleSample) {
    CPDRModel model(tiny_cfg());
    auto data = tiny_data(1, 32);
    TrainOptions opt;
    opt.batch_size = 1;
    opt.epochs = 12;
    opt.warmup_epochs = 2;
    opt.base_lr = 1e-3;
    opt.hflip = false;
    TrainLog log = train(model, data, opt);
    ASSERT_EQ(log.steps.size(), 12u);
    int run = 0, best = 0;
    for (std::size_t i = 1; i < log.steps.size(); ++i) {
        run = log.steps[i].total < log.steps[i - 1].total ? run + 1 : 0;
        best = std::max(best, run);
    }
    EXPECT_GE(best, 3);
    EXPECT_LT(log.steps.back().total, log.steps.front().total);
}

TEST(Train, DeterministicAcrossRuns) {
    auto data = tiny_data(4, 32);
    TrainOptions opt;
    opt.batch_size = 2;
    opt.epochs = 3;
    opt.warmup_epochs = 1;
    opt.seed = 5;
    CPDRModel a(tiny_cfg());
    TrainLog la = train(a, data, opt);
    CPDRModel b(tiny_cfg());
    TrainLog lb = train(b, data, opt);
    ASSERT_EQ(la.steps.size(), lb.steps.size());
    for (std::size_t i = 0; i < la.steps.size(); ++i) {
        EXPECT_EQ(la.steps[i].total, lb.steps[i].total);
        EXPECT_EQ(la.steps[i].train_mae, lb.steps[i].train_mae);
    }
    for (std::size_t i = 0; i < a.params().size(); ++i) {
        Tensor ta = a.params().tensor(i), tb = b.params().tensor(i);
        for (long j = 0; j < ta.numel(); ++j) EXPECT_EQ(ta.data()[j], tb.data()[j]);
    }
    // a different seed diverges
    CPDRModel c(tiny_cfg());
    opt.seed = 6;
    TrainLog lc = train(c, data, opt);
    bool diff = false;
    for (std::size_t i = 0; i < la.steps.size() && !diff; ++i)
        diff = la.steps[i].total != lc.steps[i].total;
    EXPECT_TRUE(diff);
}

TEST(Train, LrTraceMatchesSchedule) {
    auto data = tiny_data(4, 32);
    TrainOptions opt;
    opt.batch_size = 2; // 2 steps per epoch
    opt.epochs = 6;
    opt.warmup_epochs = 2;
    opt.base_lr = 0.02;
    opt.gamma = 3.0;
    CPDRModel model(tiny_cfg());
    TrainLog log = train(model, data, opt);
    Schedule s;
    s.base_lr = 0.02;
    s.warmup_epochs = 2;
    s.total_epochs = 6;
    s.gamma = 3.0;
    s.steps_per_epoch = 2;
    ASSERT_EQ(log.steps.size(), 12u);
    for (const StepRow& row : log.steps)
        EXPECT_DOUBLE_EQ(row.lr, poly_warmup_lr(s, row.step)) << row.step;
}

TEST(Train, StepBudgetAndWarmupClamp) {
    auto data = tiny_data(4, 32);
    TrainOptions opt;
    opt.batch_size = 2;
    opt.max_steps = 5; // crosses an epoch boundary
    opt.warmup_epochs = 5; // longer than the run; must clamp with a warning
    CPDRModel model(tiny_cfg());
    TrainLog log = train(model, data, opt);
    EXPECT_EQ(log.steps.size(), 5u);
    EXPECT_EQ(log.steps.back().epoch, 2);
    // clamped warmup spans steps 0..3 and ramps to base; step 4 opens the decay at base
    EXPECT_DOUBLE_EQ(log.steps[0].lr, opt.base_lr * 0.25);
    EXPECT_DOUBLE_EQ(log.steps[3].lr, opt.base_lr);
    EXPECT_DOUBLE_EQ(log.steps[4].lr, opt.base_lr);
}

TEST(Train, WritesCsvLog) {
    namespace fs = std::filesystem;
    std::string path = (fs::temp_directory_path() / "cpdr_train_log.csv").string();
    auto data = tiny_data(2, 32);
    TrainOptions opt;
    opt.batch_size = 2;
    opt.epochs = 2;
    opt.warmup_epochs = 1;
    opt.log_path = path;
    CPDRModel model(tiny_cfg());
    TrainLog log = train(model, data, opt);
    std::ifstream is(path);
    ASSERT_TRUE(is.good());
    std::string header;
    std::getline(is, header);
    EXPECT_EQ(header, "epoch,step,lr,dice,iou,total,train_mae");
    long rows = 0;
    for (std::string line; std::getline(is, line) && !line.empty();) ++rows;
    EXPECT_EQ(rows, static_cast<long>(log.steps.size()));
    fs::remove(path);
}

TEST(Train, RejectsBadInputs) {
    CPDRModel model(tiny_cfg());
    TrainOptions opt;
    EXPECT_THROW(train(model, {}, opt), UsageError);
    auto data = tiny_data(2, 32);
    opt.batch_size = 3; // exceeds dataset
    EXPECT_THROW(train(model, data, opt), UsageError);
    opt.batch_size = 1;
    auto wrong = tiny_data(1, 64); // resolution mismatch
    EXPECT_THROW(train(model, wrong, opt), ShapeError);
}
