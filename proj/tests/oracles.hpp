#pragma once

// Reference implementations used only by tests. Each is written directly from
// the operation's definition, independent of the library code paths it checks:
// naive loops, explicit bounds tests, no shared helpers.

#include <algorithm>
#include <array>
#include <cmath>
#include <vector>

#include "cpdr/tensor.hpp"

namespace oracle {

// textbook convolution: loop every output element, test every tap for bounds
inline cpdr::Tensor conv2d_direct(const cpdr::Tensor& x, const cpdr::Tensor& w,
                                  const cpdr::Tensor& b, int stride, int pad) {
    const long N = x.n(), C = x.c(), H = x.h(), W = x.w();
    const long CO = w.n(), K = w.h();
    const long OH = (H + 2 * pad - K) / stride + 1;
    const long OW = (W + 2 * pad - K) / stride + 1;
    cpdr::Tensor out(cpdr::Shape{N, CO, OH, OW});
    for (long n = 0; n < N; ++n)
        for (long co = 0; co < CO; ++co)
            for (long oy = 0; oy < OH; ++oy)
                for (long ox = 0; ox < OW; ++ox) {
                    double acc = b.at(0, co, 0, 0);
                    for (long ci = 0; ci < C; ++ci)
                        for (long ky = 0; ky < K; ++ky)
                            for (long kx = 0; kx < K; ++kx) {
                                const long iy = oy * stride + ky - pad;
                                const long ix = ox * stride + kx - pad;
                                if (iy >= 0 && iy < H && ix >= 0 && ix < W)
                                    acc += x.at(n, ci, iy, ix) * w.at(co, ci, ky, kx);
                            }
                    out.at(n, co, oy, ox) = acc;
                }
    return out;
}

// bilinear interpolation with half-pixel centers and clamped borders
inline cpdr::Tensor bilinear_direct(const cpdr::Tensor& x, long oh, long ow) {
    const long N = x.n(), C = x.c(), H = x.h(), W = x.w();
    cpdr::Tensor out(cpdr::Shape{N, C, oh, ow});
    auto clampl = [](long v, long hi) { return v < 0 ? 0 : (v > hi ? hi : v); };
    for (long n = 0; n < N; ++n)
        for (long c = 0; c < C; ++c)
            for (long oy = 0; oy < oh; ++oy)
                for (long ox = 0; ox < ow; ++ox) {
                    const double sy = (oy + 0.5) * (double(H) / double(oh)) - 0.5;
                    const double sx = (ox + 0.5) * (double(W) / double(ow)) - 0.5;
                    const long y0 = (long)std::floor(sy), x0 = (long)std::floor(sx);
                    const double fy = sy - std::floor(sy), fx = sx - std::floor(sx);
                    const long y0c = clampl(y0, H - 1), y1c = clampl(y0 + 1, H - 1);
                    const long x0c = clampl(x0, W - 1), x1c = clampl(x0 + 1, W - 1);
                    out.at(n, c, oy, ox) =
                        (1 - fy) * ((1 - fx) * x.at(n, c, y0c, x0c) + fx * x.at(n, c, y0c, x1c)) +
                        fy * ((1 - fx) * x.at(n, c, y1c, x0c) + fx * x.at(n, c, y1c, x1c));
                }
    return out;
}

// ---------------------------------------------------------------------------
// saliency metric references; p is a row-major h*w map in [0,1], t is binary

struct PixelCounts {
    long tp = 0, fp = 0, fn = 0;
};

inline PixelCounts count_at(const std::vector<double>& p, const std::vector<uint8_t>& t,
                            double thr) {
    PixelCounts c;
    for (std::size_t i = 0; i < p.size(); ++i) {
        const bool bp = p[i] > thr;
        const bool bt = t[i] != 0;
        if (bp && bt) ++c.tp;
        if (bp && !bt) ++c.fp;
        if (!bp && bt) ++c.fn;
    }
    return c;
}

// precision/recall with the shared degenerate rules: empty prediction against
// a nonempty truth scores precision 0; empty against empty scores both 1;
// 0/0 recall is 0.
inline std::pair<double, double> pr_direct(const std::vector<double>& p,
                                           const std::vector<uint8_t>& t, int thr) {
    const PixelCounts c = count_at(p, t, double(thr) / 255.0);
    double prec, rec;
    if (c.tp + c.fp == 0) {
        prec = (c.tp + c.fn == 0) ? 1.0 : 0.0;
        rec = (c.tp + c.fn == 0) ? 1.0 : 0.0;
        return {prec, rec};
    }
    prec = double(c.tp) / double(c.tp + c.fp);
    rec = (c.tp + c.fn == 0) ? 0.0 : double(c.tp) / double(c.tp + c.fn);
    return {prec, rec};
}

inline double mae_direct(const std::vector<double>& p, const std::vector<uint8_t>& t) {
    double acc = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) acc += std::abs(p[i] - double(t[i]));
    return acc / double(p.size());
}

// structure measure, straight transliteration of its reference algorithm
namespace smdetail {

inline double mean_of(const std::vector<double>& v) {
    double a = 0;
    for (double x : v) a += x;
    return v.empty() ? 0.0 : a / double(v.size());
}

inline double object_score(const std::vector<double>& region) {
    // region holds prediction values on the (fg or bg) support
    if (region.empty()) return 0.0;
    const double x = mean_of(region);
    double var = 0.0;
    for (double v : region) var += (v - x) * (v - x);
    const double sd = region.size() > 1 ? std::sqrt(var / double(region.size() - 1)) : 0.0;
    return 2.0 * x / (x * x + 1.0 + sd + 1e-12);
}

inline double ssim_region(const std::vector<double>& p, const std::vector<double>& t) {
    const double n = double(p.size());
    if (p.empty()) return 1.0;
    const double x = mean_of(p), y = mean_of(t);
    double sx = 0, sy = 0, sxy = 0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        sx += (p[i] - x) * (p[i] - x);
        sy += (t[i] - y) * (t[i] - y);
        sxy += (p[i] - x) * (t[i] - y);
    }
    const double denom_n = n - 1.0 + 1e-12;
    sx /= denom_n;
    sy /= denom_n;
    sxy /= denom_n;
    const double alpha = 4.0 * x * y * sxy;
    const double beta = (x * x + y * y) * (sx + sy);
    if (alpha != 0.0) return alpha / (beta + 1e-12);
    return (beta == 0.0) ? 1.0 : 0.0;
}

} // namespace smdetail

inline double s_measure_direct(const std::vector<double>& p, const std::vector<uint8_t>& t,
                               long h, long w) {
    double tsum = 0;
    for (uint8_t v : t) tsum += v;
    const double y = tsum / double(h * w);
    const double pmean = smdetail::mean_of(p);
    if (y == 0.0) return 1.0 - pmean;
    if (y == 1.0) return pmean;

    // object-aware term
    std::vector<double> fgv, bgv;
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (t[i]) fgv.push_back(p[i]);
        else bgv.push_back(1.0 - p[i]);
    }
    const double s_o = y * smdetail::object_score(fgv) + (1.0 - y) * smdetail::object_score(bgv);

    // region-aware term: quadrants split at the (1-indexed, rounded) centroid
    double rsum = 0, csum = 0;
    for (long r = 0; r < h; ++r)
        for (long c = 0; c < w; ++c)
            if (t[std::size_t(r * w + c)]) {
                rsum += double(r + 1);
                csum += double(c + 1);
            }
    const long Y = (long)std::llround(rsum / tsum); // rows used by top quadrants
    const long X = (long)std::llround(csum / tsum); // cols used by left quadrants

    auto gather = [&](long r0, long r1, long c0, long c1, std::vector<double>& pp,
                      std::vector<double>& tt) {
        for (long r = r0; r < r1; ++r)
            for (long c = c0; c < c1; ++c) {
                pp.push_back(p[std::size_t(r * w + c)]);
                tt.push_back(double(t[std::size_t(r * w + c)]));
            }
    };
    double s_r = 0.0;
    const double area = double(h * w);
    {
        std::vector<double> pp, tt;
        gather(0, Y, 0, X, pp, tt);
        s_r += (double(X) * double(Y) / area) * smdetail::ssim_region(pp, tt);
    }
    {
        std::vector<double> pp, tt;
        gather(0, Y, X, w, pp, tt);
        s_r += (double(w - X) * double(Y) / area) * smdetail::ssim_region(pp, tt);
    }
    {
        std::vector<double> pp, tt;
        gather(Y, h, 0, X, pp, tt);
        s_r += (double(X) * double(h - Y) / area) * smdetail::ssim_region(pp, tt);
    }
    {
        std::vector<double> pp, tt;
        gather(Y, h, X, w, pp, tt);
        s_r += (1.0 - double(X) * double(Y) / area - double(w - X) * double(Y) / area -
                double(X) * double(h - Y) / area) *
               smdetail::ssim_region(pp, tt);
    }
    const double s = 0.5 * s_o + 0.5 * s_r;
    return std::clamp(s, 0.0, 1.0);
}

// mean enhanced-alignment measure over thresholds 0..255 (strict > binarize)
inline double e_measure_direct(const std::vector<double>& p, const std::vector<uint8_t>& t) {
    const double n = double(p.size());
    double tmean = 0;
    for (uint8_t v : t) tmean += v;
    tmean /= n;
    const bool t_const = (tmean == 0.0 || tmean == 1.0);

    double total = 0.0;
    for (int thr = 0; thr < 256; ++thr) {
        const double cut = double(thr) / 255.0;
        double bmean = 0;
        std::vector<uint8_t> bin(p.size());
        for (std::size_t i = 0; i < p.size(); ++i) {
            bin[i] = p[i] > cut ? 1 : 0;
            bmean += bin[i];
        }
        bmean /= n;
        const bool b_const = (bmean == 0.0 || bmean == 1.0);

        double acc = 0.0;
        for (std::size_t i = 0; i < p.size(); ++i) {
            const double ft = double(t[i]) - tmean;
            const double fb = double(bin[i]) - bmean;
            double phi;
            const double den = ft * ft + fb * fb;
            if (den == 0.0) {
                phi = (t_const && b_const && tmean == bmean) ? 1.0 : 0.0;
            } else {
                phi = 2.0 * ft * fb / den;
            }
            acc += (1.0 + phi) * (1.0 + phi) / 4.0;
        }
        total += acc / n;
    }
    return total / 256.0;
}

// weighted F-measure: brute-force nearest-foreground search with the pinned
// tie order (squared distance, then row, then column), direct 7x7 Gaussian
inline double weighted_f_direct(const std::vector<double>& p, const std::vector<uint8_t>& t,
                                long h, long w) {
    long nfg = 0;
    for (uint8_t v : t) nfg += v;
    if (nfg == 0) return 0.0;

    std::vector<double> E(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) E[i] = std::abs(p[i] - double(t[i]));

    // nearest foreground pixel per pixel, exhaustive
    std::vector<double> dist(p.size(), 0.0);
    std::vector<double> Et = E;
    for (long r = 0; r < h; ++r)
        for (long c = 0; c < w; ++c) {
            const std::size_t i = std::size_t(r * w + c);
            if (t[i]) continue;
            long bd = -1, br = -1, bc = -1;
            for (long rr = 0; rr < h; ++rr)
                for (long cc = 0; cc < w; ++cc) {
                    if (!t[std::size_t(rr * w + cc)]) continue;
                    const long d = (rr - r) * (rr - r) + (cc - c) * (cc - c);
                    if (bd < 0 || d < bd) {
                        bd = d;
                        br = rr;
                        bc = cc;
                    }
                }
            dist[i] = std::sqrt(double(bd));
            Et[i] = E[std::size_t(br * w + bc)];
        }

    // 7x7 gaussian, sigma 5, zero padded
    double kern[7][7], ksum = 0;
    for (int a = 0; a < 7; ++a)
        for (int b = 0; b < 7; ++b) {
            kern[a][b] = std::exp(-((a - 3) * (a - 3) + (b - 3) * (b - 3)) / (2.0 * 25.0));
            ksum += kern[a][b];
        }
    for (auto& row : kern)
        for (double& v : row) v /= ksum;

    std::vector<double> EA(p.size(), 0.0);
    for (long r = 0; r < h; ++r)
        for (long c = 0; c < w; ++c) {
            double acc = 0;
            for (int a = -3; a <= 3; ++a)
                for (int b = -3; b <= 3; ++b) {
                    const long rr = r + a, cc = c + b;
                    if (rr >= 0 && rr < h && cc >= 0 && cc < w)
                        acc += kern[a + 3][b + 3] * Et[std::size_t(rr * w + cc)];
                }
            EA[std::size_t(r * w + c)] = acc;
        }

    double fg_err = 0, bg_err = 0;
    for (long r = 0; r < h; ++r)
        for (long c = 0; c < w; ++c) {
            const std::size_t i = std::size_t(r * w + c);
            if (t[i]) {
                fg_err += std::min(E[i], EA[i]);
            } else {
                const double B = 2.0 - std::exp(std::log(0.5) / 5.0 * dist[i]);
                bg_err += E[i] * B;
            }
        }
    const double tpw = double(nfg) - fg_err;
    const double rec = tpw / double(nfg);
    const double prec = (tpw + bg_err) > 0.0 ? tpw / (tpw + bg_err) : 0.0;
    const double den = 0.3 * prec + rec;
    return den > 0.0 ? 1.3 * prec * rec / den : 0.0;
}

} // namespace oracle
