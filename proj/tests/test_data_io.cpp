#include <gtest/gtest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "cpdr/data.hpp"

using namespace cpdr;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const char* tag) {
    fs::path p = fs::temp_directory_path() / (std::string("cpdr_io_") + tag);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

double foreground_fraction(const Tensor& mask) {
    double s = 0;
    for (long i = 0; i < mask.numel(); ++i) s += mask.data()[i];
    return s / static_cast<double>(mask.numel());
}

} // namespace

TEST(Synthetic, DeterministicAndWellFormed) {
    SynthSpec spec;
    spec.count = 6;
    spec.size = 48;
    spec.seed = 9;
    auto a = generate_synthetic(spec);
    auto b = generate_synthetic(spec);
    ASSERT_EQ(a.size(), 6u);
    for (std::size_t i = 0; i < a.size(); ++i) {
        EXPECT_EQ(a[i].name, b[i].name);
        ASSERT_EQ(a[i].image.shape(), (Shape{1, 3, 48, 48}));
        ASSERT_EQ(a[i].mask.shape(), (Shape{1, 1, 48, 48}));
        for (long j = 0; j < a[i].image.numel(); ++j) {
            EXPECT_EQ(a[i].image.data()[j], b[i].image.data()[j]);
            EXPECT_GE(a[i].image.data()[j], 0.0);
            EXPECT_LE(a[i].image.data()[j], 1.0);
        }
        for (long j = 0; j < a[i].mask.numel(); ++j) {
            double m = a[i].mask.data()[j];
            EXPECT_TRUE(m == 0.0 || m == 1.0);
            EXPECT_EQ(m, b[i].mask.data()[j]);
        }
        double fg = foreground_fraction(a[i].mask);
        EXPECT_GT(fg, 0.0);
        EXPECT_LT(fg, 0.5);
    }
    spec.seed = 10;
    auto c = generate_synthetic(spec);
    bool diff = false;
    for (long j = 0; j < a[0].image.numel() && !diff; ++j)
        diff = a[0].image.data()[j] != c[0].image.data()[j];
    EXPECT_TRUE(diff);
}

TEST(Synthetic, SpecValidation) {
    SynthSpec s;
    s.count = 0;
    EXPECT_THROW(generate_synthetic(s), ConfigError);
    s = SynthSpec{};
    s.size = 16;
    EXPECT_THROW(generate_synthetic(s), ConfigError);
    s = SynthSpec{};
    s.max_shapes = 4;
    EXPECT_THROW(generate_synthetic(s), ConfigError);
    s = SynthSpec{};
    s.noise = 0.5;
    EXPECT_THROW(generate_synthetic(s), ConfigError);
}

TEST(Augment, HorizontalFlipInvolution) {
    SynthSpec spec;
    spec.count = 1;
    spec.size = 32;
    spec.seed = 4;
    SamplePair s = generate_synthetic(spec)[0];

    SamplePair same = augment_hflip(s, false);
    for (long j = 0; j < s.image.numel(); ++j)
        EXPECT_EQ(same.image.data()[j], s.image.data()[j]);

    SamplePair once = augment_hflip(s, true);
    SamplePair twice = augment_hflip(once, true);
    for (long j = 0; j < s.image.numel(); ++j)
        EXPECT_EQ(twice.image.data()[j], s.image.data()[j]);
    for (long j = 0; j < s.mask.numel(); ++j)
        EXPECT_EQ(twice.mask.data()[j], s.mask.data()[j]);

    // the mask centroid column mirrors about the vertical axis
    auto centroid_col = [](const Tensor& m) {
        double sum = 0, weighted = 0;
        long w = m.shape().w;
        for (long i = 0; i < m.numel(); ++i)
            if (m.data()[i] > 0) { sum += 1; weighted += static_cast<double>(i % w); }
        return weighted / sum;
    };
    double c0 = centroid_col(s.mask), c1 = centroid_col(once.mask);
    EXPECT_NEAR(c1, (32 - 1) - c0, 1e-9);
}

TEST(ImageIo, PngGrayRoundTripIsExact) {
    fs::path dir = fresh_dir("png_gray");
    Tensor img(Shape{1, 1, 16, 16});
    for (long i = 0; i < 256; ++i) img.data()[i] = static_cast<double>(i) / 255.0;
    std::string path = (dir / "ramp.png").string();
    write_png_gray(path, img);
    Tensor back = read_image_gray(path);
    ASSERT_EQ(back.shape(), img.shape());
    for (long i = 0; i < 256; ++i) EXPECT_EQ(back.data()[i], img.data()[i]);
}

TEST(ImageIo, PngRgbRoundTripIsExact) {
    fs::path dir = fresh_dir("png_rgb");
    Tensor img(Shape{1, 3, 5, 7});
    for (long i = 0; i < img.numel(); ++i)
        img.data()[i] = static_cast<double>((i * 37) % 256) / 255.0;
    std::string path = (dir / "pattern.png").string();
    write_png_rgb(path, img);
    Tensor back = read_image_rgb(path);
    ASSERT_EQ(back.shape(), img.shape());
    for (long i = 0; i < img.numel(); ++i) EXPECT_EQ(back.data()[i], img.data()[i]);
}

TEST(ImageIo, PgmRoundTripAndAsciiParsing) {
    fs::path dir = fresh_dir("pgm");
    Tensor img(Shape{1, 1, 4, 4});
    for (long i = 0; i < 16; ++i) img.data()[i] = static_cast<double>(i * 17) / 255.0;
    std::string raw = (dir / "raw.pgm").string();
    write_pgm(raw, img);
    Tensor back = read_image_gray(raw);
    for (long i = 0; i < 16; ++i) EXPECT_EQ(back.data()[i], img.data()[i]);

    // ascii variant with comments and a reduced max value that divides 255
    std::string ascii = (dir / "ascii.pgm").string();
    {
        std::ofstream os(ascii);
        os << "P2 # plain text\n# comment line\n2 2\n5\n0 1\n# more\n4 5\n";
    }
    Tensor t = read_image_gray(ascii);
    ASSERT_EQ(t.shape(), (Shape{1, 1, 2, 2}));
    EXPECT_EQ(t.data()[0], 0.0);
    EXPECT_EQ(t.data()[1], 51.0 / 255.0);
    EXPECT_EQ(t.data()[2], 204.0 / 255.0);
    EXPECT_EQ(t.data()[3], 1.0);
}

// the rgb reader must accept everything the directory scan admits, so a PGM
// comes back with its single channel replicated
TEST(ImageIo, PgmReadsAsReplicatedRgb) {
    fs::path dir = fresh_dir("pgm_rgb");
    Tensor g(Shape{1, 1, 5, 7});
    for (long i = 0; i < g.numel(); ++i) g.data()[i] = static_cast<double>(i * 7 % 256) / 255.0;
    std::string path = (dir / "gray.pgm").string();
    write_pgm(path, g);
    Tensor rgb = read_image_rgb(path);
    ASSERT_EQ(rgb.shape(), (Shape{1, 3, 5, 7}));
    for (long c = 0; c < 3; ++c)
        for (long i = 0; i < g.numel(); ++i)
            EXPECT_EQ(rgb.data()[c * g.numel() + i], g.data()[i]) << c << "," << i;
}

TEST(ImageIo, ErrorsAreIoErrors) {
    fs::path dir = fresh_dir("io_err");
    EXPECT_THROW(read_image_gray((dir / "missing.png").string()), IoError);
    std::string junk = (dir / "junk.pgm").string();
    {
        std::ofstream os(junk);
        os << "Q9 not an image";
    }
    EXPECT_THROW(read_image_gray(junk), IoError);
    std::string truncated = (dir / "short.pgm").string();
    {
        std::ofstream os(truncated, std::ios::binary);
        os << "P5\n4 4\n255\n\xff\x00"; // promises 16 bytes, delivers 2
    }
    EXPECT_THROW(read_image_gray(truncated), IoError);
    Tensor rgb(Shape{1, 3, 2, 2});
    EXPECT_THROW(write_png_gray((dir / "bad.png").string(), rgb), ShapeError);
}

TEST(Dataset, WriteThenLoadRoundTrip) {
    fs::path root = fresh_dir("roundtrip");
    SynthSpec spec;
    spec.count = 3;
    spec.size = 32;
    spec.seed = 21;
    auto data = generate_synthetic(spec);
    write_dataset(root.string(), data);
    auto loaded = load_dataset((root / "images").string(), (root / "masks").string(), 32, 32);
    ASSERT_EQ(loaded.size(), 3u);
    for (std::size_t i = 0; i < loaded.size(); ++i) {
        EXPECT_EQ(loaded[i].name, data[i].name);
        ASSERT_EQ(loaded[i].image.shape(), data[i].image.shape());
        for (long j = 0; j < data[i].image.numel(); ++j) {
            double q = std::lround(data[i].image.data()[j] * 255.0) / 255.0;
            EXPECT_NEAR(loaded[i].image.data()[j], q, 1e-12);
        }
        for (long j = 0; j < data[i].mask.numel(); ++j) {
            double m = loaded[i].mask.data()[j];
            EXPECT_TRUE(m == 0.0 || m == 1.0);
            EXPECT_EQ(m, data[i].mask.data()[j]);
        }
    }
}

TEST(Dataset, ResizeAndBinarizeOnLoad) {
    fs::path root = fresh_dir("resize");
    fs::create_directories(root / "images");
    fs::create_directories(root / "masks");
    Tensor img(Shape{1, 3, 64, 64});
    for (long i = 0; i < img.numel(); ++i) img.data()[i] = 0.25;
    Tensor mask(Shape{1, 1, 64, 64});
    for (long r = 16; r < 48; ++r)
        for (long c = 16; c < 48; ++c) mask.data()[r * 64 + c] = 1.0;
    write_png_rgb((root / "images" / "sq.png").string(), img);
    write_png_gray((root / "masks" / "sq.png").string(), mask);
    auto loaded = load_dataset((root / "images").string(), (root / "masks").string(), 32, 32);
    ASSERT_EQ(loaded.size(), 1u);
    EXPECT_EQ(loaded[0].image.shape(), (Shape{1, 3, 32, 32}));
    EXPECT_EQ(loaded[0].mask.shape(), (Shape{1, 1, 32, 32}));
    double area = foreground_fraction(loaded[0].mask);
    EXPECT_NEAR(area, 0.25, 0.025); // the centered square keeps its share
    for (long j = 0; j < loaded[0].mask.numel(); ++j) {
        double m = loaded[0].mask.data()[j];
        EXPECT_TRUE(m == 0.0 || m == 1.0);
    }
}

TEST(Dataset, SkipsPairsWithoutMasksAndFailsWhenEmpty) {
    fs::path root = fresh_dir("partial");
    fs::create_directories(root / "images");
    fs::create_directories(root / "masks");
    Tensor img(Shape{1, 3, 32, 32});
    Tensor mask(Shape{1, 1, 32, 32});
    mask.data()[0] = 1.0;
    write_png_rgb((root / "images" / "a.png").string(), img);
    write_png_rgb((root / "images" / "b.png").string(), img);
    write_png_gray((root / "masks" / "a.png").string(), mask);
    auto loaded = load_dataset((root / "images").string(), (root / "masks").string(), 32, 32);
    ASSERT_EQ(loaded.size(), 1u);
    EXPECT_EQ(loaded[0].name, "a");

    fs::remove(root / "masks" / "a.png");
    EXPECT_THROW(load_dataset((root / "images").string(), (root / "masks").string(), 32, 32),
                 IoError);
    EXPECT_THROW(load_dataset((root / "nope").string(), (root / "masks").string(), 32, 32),
                 IoError);
}
