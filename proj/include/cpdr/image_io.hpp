#pragma once

#include <png.h>

#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "cpdr/tensor.hpp"

namespace cpdr {

namespace detail {

struct PngReadGuard {
    std::FILE* fp = nullptr;
    png_structp png = nullptr;
    png_infop info = nullptr;
    ~PngReadGuard() {
        if (png) png_destroy_read_struct(&png, info ? &info : nullptr, nullptr);
        if (fp) std::fclose(fp);
    }
};

struct PngWriteGuard {
    std::FILE* fp = nullptr;
    png_structp png = nullptr;
    png_infop info = nullptr;
    ~PngWriteGuard() {
        if (png) png_destroy_write_struct(&png, info ? &info : nullptr);
        if (fp) std::fclose(fp);
    }
};

// Decode any PNG to packed 8-bit rows, RGB or grayscale.
inline void read_png_bytes(const std::string& path, bool want_gray,
                           std::vector<unsigned char>& out, long& h, long& w) {
    PngReadGuard g;
    g.fp = std::fopen(path.c_str(), "rb");
    if (!g.fp) throw IoError("cannot open " + path);
    unsigned char sig[8];
    if (std::fread(sig, 1, 8, g.fp) != 8 || png_sig_cmp(sig, 0, 8) != 0)
        throw IoError(path + " is not a PNG file");
    g.png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!g.png) throw IoError("png reader allocation failed");
    g.info = png_create_info_struct(g.png);
    if (!g.info) throw IoError("png info allocation failed");
    if (setjmp(png_jmpbuf(g.png))) throw IoError("failed to decode " + path);
    png_init_io(g.png, g.fp);
    png_set_sig_bytes(g.png, 8);
    png_read_info(g.png, g.info);

    png_set_expand(g.png);   // palette/low-depth/tRNS to full 8-bit
    png_set_strip_16(g.png); // 16-bit down to 8
    png_set_strip_alpha(g.png);
    int color = png_get_color_type(g.png, g.info);
    if (want_gray) {
        if (color & PNG_COLOR_MASK_COLOR) png_set_rgb_to_gray(g.png, 1, -1, -1);
    } else {
        if (!(color & PNG_COLOR_MASK_COLOR)) png_set_gray_to_rgb(g.png);
    }
    png_read_update_info(g.png, g.info);

    h = static_cast<long>(png_get_image_height(g.png, g.info));
    w = static_cast<long>(png_get_image_width(g.png, g.info));
    std::size_t rowbytes = png_get_rowbytes(g.png, g.info);
    std::size_t channels = png_get_channels(g.png, g.info);
    if (channels != (want_gray ? 1u : 3u) || rowbytes != channels * static_cast<std::size_t>(w))
        throw IoError("unexpected decoded layout for " + path);
    out.assign(rowbytes * static_cast<std::size_t>(h), 0);
    for (long y = 0; y < h; ++y)
        png_read_row(g.png, out.data() + static_cast<std::size_t>(y) * rowbytes, nullptr);
    png_read_end(g.png, nullptr);
}

inline void write_png_bytes(const std::string& path, const unsigned char* bytes, long h,
                            long w, int channels) {
    PngWriteGuard g;
    g.fp = std::fopen(path.c_str(), "wb");
    if (!g.fp) throw IoError("cannot open " + path + " for writing");
    g.png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!g.png) throw IoError("png writer allocation failed");
    g.info = png_create_info_struct(g.png);
    if (!g.info) throw IoError("png info allocation failed");
    if (setjmp(png_jmpbuf(g.png))) throw IoError("failed to encode " + path);
    png_init_io(g.png, g.fp);
    png_set_IHDR(g.png, g.info, static_cast<png_uint_32>(w), static_cast<png_uint_32>(h), 8,
                 channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(g.png, g.info);
    for (long y = 0; y < h; ++y)
        png_write_row(g.png, const_cast<png_bytep>(bytes + static_cast<std::size_t>(y) *
                                                               static_cast<std::size_t>(w) *
                                                               static_cast<std::size_t>(channels)));
    png_write_end(g.png, nullptr);
}

// PGM header token reader; '#' starts a comment running to end of line.
inline long pgm_token(std::istream& is, const std::string& path) {
    int c = is.get();
    while (c != EOF && (std::isspace(c) || c == '#')) {
        if (c == '#')
            while (c != EOF && c != '\n') c = is.get();
        c = is.get();
    }
    if (c == EOF || !std::isdigit(c)) throw IoError("malformed PGM header in " + path);
    long v = 0;
    while (c != EOF && std::isdigit(c)) {
        v = v * 10 + (c - '0');
        c = is.get();
    }
    return v;
}

inline void read_pgm_bytes(const std::string& path, std::vector<unsigned char>& out, long& h,
                           long& w) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open " + path);
    char m0 = 0, m1 = 0;
    is.get(m0);
    is.get(m1);
    bool raw = (m0 == 'P' && m1 == '5');
    bool ascii = (m0 == 'P' && m1 == '2');
    if (!raw && !ascii) throw IoError(path + " is not a PGM file");
    w = pgm_token(is, path);
    h = pgm_token(is, path);
    long maxval = pgm_token(is, path);
    if (w < 1 || h < 1 || maxval < 1 || maxval > 255)
        throw IoError("unsupported PGM geometry in " + path);
    out.resize(static_cast<std::size_t>(w) * static_cast<std::size_t>(h));
    if (raw) {
        // single whitespace byte separates the header from the raster
        if (!is.read(reinterpret_cast<char*>(out.data()), static_cast<std::streamsize>(out.size())))
            throw IoError(path + " truncated");
    } else {
        for (auto& b : out) {
            long v = pgm_token(is, path);
            if (v > maxval) throw IoError("PGM sample out of range in " + path);
            b = static_cast<unsigned char>(v);
        }
    }
    if (maxval != 255)
        for (auto& b : out)
            b = static_cast<unsigned char>(std::lround(255.0 * b / static_cast<double>(maxval)));
}

inline bool sniff_png(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    unsigned char sig[4] = {0, 0, 0, 0};
    is.read(reinterpret_cast<char*>(sig), 4);
    return is && sig[0] == 0x89 && sig[1] == 'P' && sig[2] == 'N' && sig[3] == 'G';
}

} // namespace detail

// Reads a PNG or PGM (sniffed by magic bytes) as (1,3,h,w) with values in
// [0,1]. Grayscale, palette and alpha PNGs are converted; a PGM fills all
// three channels with its single one.
inline Tensor read_image_rgb(const std::string& path) {
    std::vector<unsigned char> bytes;
    long h = 0, w = 0;
    if (detail::sniff_png(path)) {
        detail::read_png_bytes(path, false, bytes, h, w);
        Tensor t(Shape{1, 3, h, w});
        for (long y = 0; y < h; ++y)
            for (long x = 0; x < w; ++x)
                for (long c = 0; c < 3; ++c)
                    t.at(0, c, y, x) =
                        bytes[(static_cast<std::size_t>(y) * w + x) * 3 + c] / 255.0;
        return t;
    }
    detail::read_pgm_bytes(path, bytes, h, w);
    Tensor t(Shape{1, 3, h, w});
    for (long i = 0; i < h * w; ++i) {
        double v = bytes[static_cast<std::size_t>(i)] / 255.0;
        for (long c = 0; c < 3; ++c) t.data()[c * h * w + i] = v;
    }
    return t;
}

// Reads a PNG or PGM (sniffed by magic bytes) as (1,1,h,w) in [0,1].
inline Tensor read_image_gray(const std::string& path) {
    std::vector<unsigned char> bytes;
    long h = 0, w = 0;
    if (detail::sniff_png(path))
        detail::read_png_bytes(path, true, bytes, h, w);
    else
        detail::read_pgm_bytes(path, bytes, h, w);
    Tensor t(Shape{1, 1, h, w});
    for (long i = 0; i < h * w; ++i) t.data()[i] = bytes[static_cast<std::size_t>(i)] / 255.0;
    return t;
}

namespace detail {

inline unsigned char quantize(double v) {
    double r = std::lround(255.0 * std::min(1.0, std::max(0.0, v)));
    return static_cast<unsigned char>(r);
}

} // namespace detail

// Writes (1,1,h,w) values in [0,1] as an 8-bit grayscale PNG.
inline void write_png_gray(const std::string& path, const Tensor& t) {
    const Shape& s = t.shape();
    if (s.n != 1 || s.c != 1) throw ShapeError("grayscale write expects (1,1,h,w)");
    std::vector<unsigned char> bytes(static_cast<std::size_t>(s.h) * s.w);
    for (long i = 0; i < s.h * s.w; ++i) bytes[static_cast<std::size_t>(i)] = detail::quantize(t.data()[i]);
    detail::write_png_bytes(path, bytes.data(), s.h, s.w, 1);
}

// Writes (1,3,h,w) values in [0,1] as an 8-bit RGB PNG.
inline void write_png_rgb(const std::string& path, const Tensor& t) {
    const Shape& s = t.shape();
    if (s.n != 1 || s.c != 3) throw ShapeError("rgb write expects (1,3,h,w)");
    std::vector<unsigned char> bytes(static_cast<std::size_t>(s.h) * s.w * 3);
    for (long y = 0; y < s.h; ++y)
        for (long x = 0; x < s.w; ++x)
            for (long c = 0; c < 3; ++c)
                bytes[(static_cast<std::size_t>(y) * s.w + x) * 3 + c] =
                    detail::quantize(t.at(0, c, y, x));
    detail::write_png_bytes(path, bytes.data(), s.h, s.w, 3);
}

// Writes (1,1,h,w) as binary-raster PGM (P5, maxval 255).
inline void write_pgm(const std::string& path, const Tensor& t) {
    const Shape& s = t.shape();
    if (s.n != 1 || s.c != 1) throw ShapeError("PGM write expects (1,1,h,w)");
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw IoError("cannot open " + path + " for writing");
    os << "P5\n" << s.w << " " << s.h << "\n255\n";
    for (long i = 0; i < s.h * s.w; ++i) os.put(static_cast<char>(detail::quantize(t.data()[i])));
    if (!os) throw IoError("write failed for " + path);
}

} // namespace cpdr
