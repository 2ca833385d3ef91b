#pragma once

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "cpdr/image_io.hpp"
#include "cpdr/ops.hpp"
#include "cpdr/rng.hpp"

namespace cpdr {

// One training example: RGB image in [0,1] and a same-size binary mask.
struct SamplePair {
    Tensor image; // (1,3,h,w)
    Tensor mask;  // (1,1,h,w), values 0 or 1
    std::string name;
};

// Toy scenes: a noisy dim background with 1..max_shapes bright rectangles
// and ellipses; the mask is the exact union of their supports.
struct SynthSpec {
    long count = 16;
    long size = 96;
    long max_shapes = 3;
    double noise = 0.05;
    std::uint64_t seed = 42;

    void validate() const {
        if (count < 1) throw ConfigError("synthetic count must be >= 1");
        if (size < 32) throw ConfigError("synthetic size must be >= 32");
        if (max_shapes < 1 || max_shapes > 3)
            throw ConfigError("synthetic max_shapes must be in 1..3");
        if (noise < 0 || noise > 0.2) throw ConfigError("synthetic noise must be in [0, 0.2]");
    }
};

inline std::vector<SamplePair> generate_synthetic(const SynthSpec& spec) {
    spec.validate();
    std::vector<SamplePair> out;
    out.reserve(static_cast<std::size_t>(spec.count));
    const long sz = spec.size;
    for (long i = 0; i < spec.count; ++i) {
        Rng rng(Rng::mix(spec.seed, static_cast<std::uint64_t>(i)));
        SamplePair s;
        s.image = Tensor(Shape{1, 3, sz, sz});
        s.mask = Tensor(Shape{1, 1, sz, sz});
        char buf[32];
        std::snprintf(buf, sizeof buf, "synth_%04ld", i);
        s.name = buf;

        double base = rng.uniform(0.05, 0.25);
        for (long c = 0; c < 3; ++c) {
            double tint = base + rng.uniform(-0.02, 0.02);
            for (long p = 0; p < sz * sz; ++p)
                s.image.data()[c * sz * sz + p] =
                    std::clamp(tint + rng.uniform(-spec.noise, spec.noise), 0.0, 1.0);
        }

        long nshapes = 1 + static_cast<long>(rng.below(static_cast<std::uint64_t>(spec.max_shapes)));
        for (long k = 0; k < nshapes; ++k) {
            bool ellipse = rng.coin();
            long lo = sz / 16, hi = sz / 6;
            long hx = lo + static_cast<long>(rng.below(static_cast<std::uint64_t>(hi - lo + 1)));
            long hy = lo + static_cast<long>(rng.below(static_cast<std::uint64_t>(hi - lo + 1)));
            // centers keep the full extent inside the frame
            long cx = hx + static_cast<long>(rng.below(static_cast<std::uint64_t>(sz - 2 * hx)));
            long cy = hy + static_cast<long>(rng.below(static_cast<std::uint64_t>(sz - 2 * hy)));
            double color[3];
            double lum = rng.uniform(0.55, 0.95);
            for (double& c : color) c = std::clamp(lum + rng.uniform(-0.05, 0.05), 0.5, 1.0);
            for (long y = cy - hy; y <= cy + hy; ++y)
                for (long x = cx - hx; x <= cx + hx; ++x) {
                    if (ellipse) {
                        double dx = static_cast<double>(x - cx) / hx;
                        double dy = static_cast<double>(y - cy) / hy;
                        if (dx * dx + dy * dy > 1.0) continue;
                    }
                    s.mask.at(0, 0, y, x) = 1.0;
                    for (long c = 0; c < 3; ++c)
                        s.image.at(0, c, y, x) =
                            std::clamp(color[c] + rng.uniform(-0.02, 0.02), 0.0, 1.0);
                }
        }
        out.push_back(std::move(s));
    }
    return out;
}

// Mirrors image and mask about the vertical axis when coin is set.
inline SamplePair augment_hflip(const SamplePair& s, bool coin) {
    if (!coin) return s;
    SamplePair f;
    f.name = s.name;
    f.image = Tensor(s.image.shape());
    f.mask = Tensor(s.mask.shape());
    const Shape& is = s.image.shape();
    for (long c = 0; c < is.c; ++c)
        for (long y = 0; y < is.h; ++y)
            for (long x = 0; x < is.w; ++x)
                f.image.at(0, c, y, x) = s.image.at(0, c, y, is.w - 1 - x);
    const Shape& ms = s.mask.shape();
    for (long y = 0; y < ms.h; ++y)
        for (long x = 0; x < ms.w; ++x)
            f.mask.at(0, 0, y, x) = s.mask.at(0, 0, y, ms.w - 1 - x);
    return f;
}

namespace detail {

inline bool has_image_ext(const std::filesystem::path& p) {
    std::string e = p.extension().string();
    std::transform(e.begin(), e.end(), e.begin(), [](unsigned char c) { return std::tolower(c); });
    return e == ".png" || e == ".pgm";
}

inline std::string find_mask_file(const std::filesystem::path& mask_dir,
                                  const std::string& stem) {
    for (const char* ext : {".png", ".pgm"}) {
        std::filesystem::path p = mask_dir / (stem + ext);
        if (std::filesystem::exists(p)) return p.string();
    }
    return {};
}

} // namespace detail

// Loads image/mask pairs matched by basename, resized to (h,w). Images are
// interpolated; masks are interpolated then re-binarized at 0.5. Unreadable
// or unmatched files are skipped with a warning on stderr.
inline std::vector<SamplePair> load_dataset(const std::string& image_dir,
                                            const std::string& mask_dir, long h, long w) {
    namespace fs = std::filesystem;
    if (!fs::is_directory(image_dir)) throw IoError("image directory not found: " + image_dir);
    if (!fs::is_directory(mask_dir)) throw IoError("mask directory not found: " + mask_dir);
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(image_dir))
        if (e.is_regular_file() && detail::has_image_ext(e.path())) files.push_back(e.path());
    std::sort(files.begin(), files.end());

    std::vector<SamplePair> out;
    Tape tape = Tape::inference();
    for (const fs::path& img_path : files) {
        std::string stem = img_path.stem().string();
        std::string mask_path = detail::find_mask_file(mask_dir, stem);
        if (mask_path.empty()) {
            std::cerr << "warning: no mask for " << img_path.string() << ", skipping\n";
            continue;
        }
        try {
            SamplePair s;
            s.name = stem;
            s.image = bilinear_resize(tape, read_image_rgb(img_path.string()), h, w);
            Tensor m = bilinear_resize(tape, read_image_gray(mask_path), h, w);
            for (long i = 0; i < m.numel(); ++i) m.data()[i] = m.data()[i] > 0.5 ? 1.0 : 0.0;
            s.mask = m;
            out.push_back(std::move(s));
        } catch (const IoError& e) {
            std::cerr << "warning: " << e.what() << ", skipping\n";
        }
    }
    if (out.empty()) throw IoError("no usable image/mask pairs under " + image_dir);
    return out;
}

// Writes pairs under root/images and root/masks as PNGs.
inline void write_dataset(const std::string& root, const std::vector<SamplePair>& data) {
    namespace fs = std::filesystem;
    fs::create_directories(fs::path(root) / "images");
    fs::create_directories(fs::path(root) / "masks");
    for (const SamplePair& s : data) {
        write_png_rgb((fs::path(root) / "images" / (s.name + ".png")).string(), s.image);
        write_png_gray((fs::path(root) / "masks" / (s.name + ".png")).string(), s.mask);
    }
}

} // namespace cpdr
