#pragma once

// Directory-level evaluation and report serialization. Predictions and ground
// truths pair up by file stem; truths are binarized at byte value > 127.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "cpdr/data.hpp"
#include "cpdr/image_io.hpp"
#include "cpdr/metrics.hpp"

namespace cpdr {

inline std::vector<EvalPair> load_eval_pairs(const std::string& pred_dir,
                                             const std::string& gt_dir,
                                             long* missing = nullptr) {
    namespace fs = std::filesystem;
    if (!fs::is_directory(pred_dir)) throw IoError("prediction directory missing: " + pred_dir);
    if (!fs::is_directory(gt_dir)) throw IoError("ground truth directory missing: " + gt_dir);

    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(pred_dir))
        if (entry.is_regular_file() && detail::has_image_ext(entry.path().filename().string()))
            files.push_back(entry.path());
    std::sort(files.begin(), files.end());

    if (missing) *missing = 0;
    std::vector<EvalPair> pairs;
    for (const fs::path& f : files) {
        const std::string stem = f.stem().string();
        const std::string gt_path = detail::find_mask_file(gt_dir, stem);
        if (gt_path.empty()) {
            std::cerr << "warning: no ground truth for " << stem << "; skipped\n";
            if (missing) ++*missing;
            continue;
        }
        EvalPair pair;
        pair.name = stem;
        pair.pred = read_image_gray(f.string());
        Tensor raw = read_image_gray(gt_path);
        if (!(raw.shape() == pair.pred.shape()))
            throw ShapeError("prediction " + stem + " is " + to_string(pair.pred.shape()) +
                             " but its ground truth is " + to_string(raw.shape()));
        pair.truth = Tensor(raw.shape());
        const double cut = 127.0 / 255.0;
        for (long i = 0; i < raw.numel(); ++i)
            pair.truth.data()[i] = raw.data()[i] > cut ? 1.0 : 0.0;
        pairs.push_back(std::move(pair));
    }
    if (pairs.empty())
        throw UsageError("no usable prediction/ground-truth pairs under " + pred_dir);
    return pairs;
}

inline MetricReport evaluate_dataset(const std::string& pred_dir, const std::string& gt_dir,
                                     int workers = 1) {
    return evaluate_pairs(load_eval_pairs(pred_dir, gt_dir), workers);
}

inline void write_report_json(const std::string& path, const MetricReport& rep) {
    nlohmann::json j;
    j["mae"] = rep.mae;
    j["f_mean"] = rep.f_mean;
    j["f_weighted"] = rep.f_weighted;
    j["s_measure"] = rep.s_measure;
    j["e_measure"] = rep.e_measure;
    j["n_images"] = rep.n_images;
    j["n_empty_truth"] = rep.n_empty_truth;
    j["precision_curve"] = rep.precision_curve;
    j["recall_curve"] = rep.recall_curve;
    j["f_curve"] = rep.f_curve;
    std::ofstream os(path);
    if (!os) throw IoError("cannot write report: " + path);
    os << j.dump(2) << "\n";
    if (!os.good()) throw IoError("failed while writing report: " + path);
}

inline void write_curves_csv(const std::string& path, const MetricReport& rep) {
    std::ofstream os(path);
    if (!os) throw IoError("cannot write curves: " + path);
    os << "threshold,precision,recall,f\n";
    char line[160];
    for (int k = 0; k < 256; ++k) {
        std::snprintf(line, sizeof line, "%d,%.17g,%.17g,%.17g\n", k,
                      rep.precision_curve[static_cast<std::size_t>(k)],
                      rep.recall_curve[static_cast<std::size_t>(k)],
                      rep.f_curve[static_cast<std::size_t>(k)]);
        os << line;
    }
    if (!os.good()) throw IoError("failed while writing curves: " + path);
}

} // namespace cpdr
