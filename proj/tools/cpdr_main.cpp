// cpdr: train, run and score the crossed post-decoder refinement saliency
// network. Exit codes: 0 success, 1 runtime failure, 2 usage or validation.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "cpdr/checkpoint.hpp"
#include "cpdr/config.hpp"
#include "cpdr/report.hpp"
#include "cpdr/train.hpp"

namespace fs = std::filesystem;
using namespace cpdr;

namespace {

struct CommonArgs {
    std::string config_path;
    long seed = 42;
};

RunConfig resolve_config(const CommonArgs& c) {
    RunConfig cfg = c.config_path.empty() ? RunConfig{} : load_config(c.config_path);
    cfg.model.seed = c.seed;
    cfg.validate();
    return cfg;
}

struct TrainArgs : CommonArgs {
    std::string images, masks, synthetic, out = "model.ckpt", log_path;
    long epochs = 0; // 0: take the config value
    long steps = 0;  // 0: run by epochs
};

int run_train(const TrainArgs& a) {
    RunConfig cfg = resolve_config(a);
    const bool wants_synth = !a.synthetic.empty();
    const bool wants_dirs = !a.images.empty() || !a.masks.empty();
    if (wants_synth && wants_dirs)
        throw ConfigError("choose either --synthetic or --images/--masks, not both");
    if (!wants_synth && (a.images.empty() || a.masks.empty()))
        throw ConfigError("training needs --images and --masks, or --synthetic");

    std::vector<SamplePair> data;
    if (wants_synth) {
        SynthSpec spec;
        spec.seed = a.seed;
        spec.size = cfg.model.input_h;
        spec = parse_synth_spec(a.synthetic, spec);
        data = generate_synthetic(spec);
    } else {
        data = load_dataset(a.images, a.masks, cfg.model.input_h, cfg.model.input_w);
    }

    CPDRModel model(cfg.model);
    TrainOptions opt;
    opt.batch_size = cfg.batch_size;
    opt.epochs = a.epochs > 0 ? a.epochs : cfg.total_epochs;
    opt.max_steps = a.steps;
    opt.base_lr = cfg.base_lr;
    opt.warmup_epochs = cfg.warmup_epochs;
    opt.gamma = cfg.gamma;
    opt.loss = cfg.loss;
    opt.seed = a.seed;
    opt.log_path = a.log_path.empty() ? a.out + ".train.csv" : a.log_path;

    const TrainLog log = train(model, data, opt);
    save_checkpoint(a.out, model);
    std::printf("samples %zu\n", data.size());
    std::printf("steps %zu\n", log.steps.size());
    std::printf("final train mae %.6f\n", log.final_train_mae);
    std::printf("checkpoint %s\n", a.out.c_str());
    std::printf("log %s\n", opt.log_path.c_str());
    return 0;
}

struct PredictArgs : CommonArgs {
    std::string checkpoint, images, out;
};

int run_predict(const PredictArgs& a) {
    RunConfig cfg = resolve_config(a);
    CPDRModel model(cfg.model);
    load_checkpoint(a.checkpoint, model);

    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(a.images))
        if (entry.is_regular_file() && detail::has_image_ext(entry.path()))
            files.push_back(entry.path());
    std::sort(files.begin(), files.end());
    if (files.empty()) throw UsageError("no input images under " + a.images);

    fs::create_directories(a.out);
    Tape tape = Tape::inference();
    for (const fs::path& f : files) {
        const Tensor original = read_image_rgb(f.string());
        const long oh = original.shape().h, ow = original.shape().w;
        Tensor x = bilinear_resize(tape, original, cfg.model.input_h, cfg.model.input_w);
        const StagePyramid logits = model.forward(tape, x);
        Tensor prob = sigmoid(tape, logits[2]);
        Tensor up = bilinear_resize(tape, prob, oh, ow);
        const std::string out_path = (fs::path(a.out) / (f.stem().string() + ".png")).string();
        write_png_gray(out_path, up);
    }
    std::printf("predictions %zu\n", files.size());
    std::printf("out %s\n", a.out.c_str());
    return 0;
}

struct EvalArgs {
    std::string preds, gts, out = "report.json";
    int workers = 1;
};

int run_eval(const EvalArgs& a, bool write_json) {
    const MetricReport rep = evaluate_dataset(a.preds, a.gts, a.workers);
    std::printf("mae %.6f\n", rep.mae);
    std::printf("f_mean %.6f\n", rep.f_mean);
    std::printf("f_weighted %.6f\n", rep.f_weighted);
    std::printf("s_measure %.6f\n", rep.s_measure);
    std::printf("e_measure %.6f\n", rep.e_measure);
    std::printf("n_images %ld\n", rep.n_images);
    if (rep.n_empty_truth > 0)
        std::fprintf(stderr, "warning: %ld images had empty ground truth\n", rep.n_empty_truth);
    if (write_json) {
        write_report_json(a.out, rep);
        fs::path curves = fs::path(a.out);
        curves.replace_extension(".csv");
        write_curves_csv(curves.string(), rep);
        std::printf("report %s\n", a.out.c_str());
        std::printf("curves %s\n", curves.string().c_str());
    } else {
        write_curves_csv(a.out, rep);
        std::printf("curves %s\n", a.out.c_str());
    }
    return 0;
}

int run_params(const CommonArgs& a) {
    RunConfig cfg = resolve_config(a);
    CPDRModel model(cfg.model);
    const long params = model.param_count();
    const long macs = model.macs(cfg.model.input_h, cfg.model.input_w);
    std::printf("params %ld (%.2f M)\n", params, static_cast<double>(params) / 1e6);
    std::printf("macs %ld (%.2f G)\n", macs, static_cast<double>(macs) / 1e9);
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"crossed post-decoder refinement saliency toolkit"};
    app.require_subcommand(1);

    TrainArgs ta;
    CLI::App* train_cmd = app.add_subcommand("train", "fit a model and write a checkpoint");
    train_cmd->add_option("--config", ta.config_path, "run configuration file")
        ->check(CLI::ExistingFile);
    train_cmd->add_option("--images", ta.images, "training image directory")
        ->check(CLI::ExistingDirectory);
    train_cmd->add_option("--masks", ta.masks, "training mask directory")
        ->check(CLI::ExistingDirectory);
    train_cmd->add_option("--synthetic", ta.synthetic,
                          "generate data instead, e.g. count=16,size=96");
    train_cmd->add_option("--out", ta.out, "checkpoint output path");
    train_cmd->add_option("--log", ta.log_path, "training log CSV path (default <out>.train.csv)");
    train_cmd->add_option("--seed", ta.seed, "seed for init, shuffling and synthesis");
    train_cmd->add_option("--epochs", ta.epochs, "override total epochs");
    train_cmd->add_option("--steps", ta.steps, "stop after exactly this many steps");

    PredictArgs pa;
    CLI::App* predict_cmd = app.add_subcommand("predict", "write saliency maps for a directory");
    predict_cmd->add_option("--config", pa.config_path, "run configuration file")
        ->check(CLI::ExistingFile);
    predict_cmd->add_option("--checkpoint", pa.checkpoint, "trained checkpoint")
        ->required()
        ->check(CLI::ExistingFile);
    predict_cmd->add_option("--images", pa.images, "input image directory")
        ->required()
        ->check(CLI::ExistingDirectory);
    predict_cmd->add_option("--out", pa.out, "output directory")->required();
    predict_cmd->add_option("--seed", pa.seed, "seed (affects nothing at inference)");

    EvalArgs ea;
    CLI::App* eval_cmd = app.add_subcommand("eval", "score predictions against ground truth");
    eval_cmd->add_option("--preds", ea.preds, "prediction directory")
        ->required()
        ->check(CLI::ExistingDirectory);
    eval_cmd->add_option("--gts", ea.gts, "ground truth directory")
        ->required()
        ->check(CLI::ExistingDirectory);
    eval_cmd->add_option("--out", ea.out, "report JSON path (curves CSV sits beside it)");
    eval_cmd->add_option("--workers", ea.workers, "evaluation threads");

    EvalArgs ca;
    ca.out = "curves.csv";
    CLI::App* curves_cmd = app.add_subcommand("curves", "score and write only the curves CSV");
    curves_cmd->add_option("--preds", ca.preds, "prediction directory")
        ->required()
        ->check(CLI::ExistingDirectory);
    curves_cmd->add_option("--gts", ca.gts, "ground truth directory")
        ->required()
        ->check(CLI::ExistingDirectory);
    curves_cmd->add_option("--out", ca.out, "curves CSV path");
    curves_cmd->add_option("--workers", ca.workers, "evaluation threads");

    CommonArgs na;
    CLI::App* params_cmd = app.add_subcommand("params", "print parameter and MAC counts");
    params_cmd->add_option("--config", na.config_path, "run configuration file")
        ->check(CLI::ExistingFile);
    params_cmd->add_option("--seed", na.seed, "seed used for construction");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (train_cmd->parsed()) return run_train(ta);
        if (predict_cmd->parsed()) return run_predict(pa);
        if (eval_cmd->parsed()) return run_eval(ea, true);
        if (curves_cmd->parsed()) return run_eval(ca, false);
        if (params_cmd->parsed()) return run_params(na);
        std::fprintf(stderr, "error: no command selected\n");
        return 2;
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const UsageError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const ShapeError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const IoError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}
