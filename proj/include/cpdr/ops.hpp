#pragma once

#include <algorithm>
#include <cmath>
#include <cstring>
#include <utility>
#include <vector>

#include "tape.hpp"
#include "tensor.hpp"

// Differentiable NCHW operators. Every op validates shapes up front, computes
// its forward result, and (when recording and some input requires grad)
// appends a closure to the tape that scatters d(loss)/d(out) back onto its
// inputs. Gradients always accumulate with +=.

namespace cpdr {

namespace detail {

// output positions o with 0 <= o*stride + k_off - pad < in_size
inline std::pair<long, long> conv_span(long in_size, long k_off, long pad, long stride,
                                       long out_size) {
    long lo = pad - k_off; // need o*stride >= lo
    long o0 = lo <= 0 ? 0 : (lo + stride - 1) / stride;
    long hi = in_size - 1 + pad - k_off; // need o*stride <= hi
    if (hi < 0) return {0, -1};
    long o1 = std::min(out_size - 1, hi / stride);
    return {o0, o1};
}

inline bool want_grad(const Tape& tape, std::initializer_list<const Tensor*> ins) {
    if (!tape.recording()) return false;
    for (const Tensor* t : ins)
        if (t->requires_grad()) return true;
    return false;
}

} // namespace detail

// ---------------------------------------------------------------------------
// conv2d: weight (c_out, c_in, k, k), bias (1, c_out, 1, 1), stride 1 or 2.
// out[h] = floor((h + 2*pad - k) / stride) + 1, same for w.
inline Tensor conv2d(Tape& tape, const Tensor& x, const Tensor& weight, const Tensor& bias,
                     int stride, int padding) {
    const Shape xs = x.shape(), ws = weight.shape();
    if (ws.h != ws.w)
        throw ShapeError("conv2d: kernel must be square, got " + to_string(ws));
    const long k = ws.h, c_out = ws.n, c_in = ws.c;
    if (xs.c != c_in)
        throw ShapeError("conv2d: input has " + std::to_string(xs.c) + " channels, weight expects " +
                         std::to_string(c_in));
    if (!(bias.shape() == Shape{1, c_out, 1, 1}))
        throw ShapeError("conv2d: bias must be (1," + std::to_string(c_out) + ",1,1), got " +
                         to_string(bias.shape()));
    if (stride != 1 && stride != 2) throw UsageError("conv2d: stride must be 1 or 2");
    if (padding < 0) throw UsageError("conv2d: padding must be >= 0");
    const long s = stride, p = padding;
    if (xs.h + 2 * p < k || xs.w + 2 * p < k)
        throw ShapeError("conv2d: kernel " + std::to_string(k) + " exceeds padded input " +
                         to_string(xs));
    const long oh = (xs.h + 2 * p - k) / s + 1;
    const long ow = (xs.w + 2 * p - k) / s + 1;

    Tensor out(Shape{xs.n, c_out, oh, ow});
    {
        const double* xp = x.data();
        const double* wp = weight.data();
        const double* bp = bias.data();
        double* op = out.data();
        const long H = xs.h, W = xs.w;
        for (long n = 0; n < xs.n; ++n) {
            for (long co = 0; co < c_out; ++co) {
                double* obase = op + (n * c_out + co) * oh * ow;
                std::fill(obase, obase + oh * ow, bp[co]);
                for (long ci = 0; ci < c_in; ++ci) {
                    const double* xbase = xp + (n * c_in + ci) * H * W;
                    const double* wbase = wp + (co * c_in + ci) * k * k;
                    for (long kh = 0; kh < k; ++kh) {
                        const auto [oy0, oy1] = detail::conv_span(H, kh, p, s, oh);
                        for (long kw = 0; kw < k; ++kw) {
                            const auto [ox0, ox1] = detail::conv_span(W, kw, p, s, ow);
                            const double wv = wbase[kh * k + kw];
                            const long xoff = kw - p;
                            for (long oy = oy0; oy <= oy1; ++oy) {
                                const double* xrow = xbase + (oy * s + kh - p) * W;
                                double* orow = obase + oy * ow;
                                for (long ox = ox0; ox <= ox1; ++ox)
                                    orow[ox] += wv * xrow[ox * s + xoff];
                            }
                        }
                    }
                }
            }
        }
    }

    if (detail::want_grad(tape, {&x, &weight, &bias})) {
        out.set_requires_grad(true);
        Tensor xc = x, wc = weight, bc = bias, oc = out;
        tape.record([xc, wc, bc, oc, s, p, k, c_in, c_out, oh, ow]() mutable {
            const Shape xsh = xc.shape();
            const long H = xsh.h, W = xsh.w, N = xsh.n;
            const double* gp = oc.grad();
            const double* xp = xc.data();
            const double* wp = wc.data();
            if (bc.requires_grad()) {
                double* db = bc.grad();
                for (long n = 0; n < N; ++n)
                    for (long co = 0; co < c_out; ++co) {
                        const double* g = gp + (n * c_out + co) * oh * ow;
                        double acc = 0.0;
                        for (long i = 0; i < oh * ow; ++i) acc += g[i];
                        db[co] += acc;
                    }
            }
            if (wc.requires_grad()) {
                double* dw = wc.grad();
                for (long co = 0; co < c_out; ++co)
                    for (long ci = 0; ci < c_in; ++ci)
                        for (long kh = 0; kh < k; ++kh) {
                            const auto [oy0, oy1] = detail::conv_span(H, kh, p, s, oh);
                            for (long kw = 0; kw < k; ++kw) {
                                const auto [ox0, ox1] = detail::conv_span(W, kw, p, s, ow);
                                const long xoff = kw - p;
                                double acc = 0.0;
                                for (long n = 0; n < N; ++n) {
                                    const double* g = gp + (n * c_out + co) * oh * ow;
                                    const double* xbase = xp + (n * c_in + ci) * H * W;
                                    for (long oy = oy0; oy <= oy1; ++oy) {
                                        const double* xrow = xbase + (oy * s + kh - p) * W;
                                        const double* grow = g + oy * ow;
                                        for (long ox = ox0; ox <= ox1; ++ox)
                                            acc += grow[ox] * xrow[ox * s + xoff];
                                    }
                                }
                                dw[((co * c_in + ci) * k + kh) * k + kw] += acc;
                            }
                        }
            }
            if (xc.requires_grad()) {
                double* dx = xc.grad();
                for (long n = 0; n < N; ++n)
                    for (long co = 0; co < c_out; ++co) {
                        const double* g = gp + (n * c_out + co) * oh * ow;
                        for (long ci = 0; ci < c_in; ++ci) {
                            double* dxbase = dx + (n * c_in + ci) * H * W;
                            const double* wbase = wp + (co * c_in + ci) * k * k;
                            for (long kh = 0; kh < k; ++kh) {
                                const auto [oy0, oy1] = detail::conv_span(H, kh, p, s, oh);
                                for (long kw = 0; kw < k; ++kw) {
                                    const auto [ox0, ox1] = detail::conv_span(W, kw, p, s, ow);
                                    const double wv = wbase[kh * k + kw];
                                    const long xoff = kw - p;
                                    for (long oy = oy0; oy <= oy1; ++oy) {
                                        double* dxrow = dxbase + (oy * s + kh - p) * W;
                                        const double* grow = g + oy * ow;
                                        for (long ox = ox0; ox <= ox1; ++ox)
                                            dxrow[ox * s + xoff] += wv * grow[ox];
                                    }
                                }
                            }
                        }
                    }
            }
        });
    }
    return out;
}

// ---------------------------------------------------------------------------
// bilinear_resize: half-pixel centers (align_corners = false), clamped edges.
// Linear in the input, exact identity when sizes match, preserves constants.
namespace detail {
struct Lerp {
    long i0, i1;
    double f;
};
inline std::vector<Lerp> lerp_table(long in, long out) {
    std::vector<Lerp> t(static_cast<std::size_t>(out));
    const double scale = static_cast<double>(in) / static_cast<double>(out);
    for (long o = 0; o < out; ++o) {
        const double src = (static_cast<double>(o) + 0.5) * scale - 0.5;
        const double fl = std::floor(src);
        long i0 = static_cast<long>(fl);
        t[static_cast<std::size_t>(o)] = {std::clamp(i0, 0L, in - 1),
                                          std::clamp(i0 + 1, 0L, in - 1), src - fl};
    }
    return t;
}
} // namespace detail

inline Tensor bilinear_resize(Tape& tape, const Tensor& x, long out_h, long out_w) {
    if (out_h < 1 || out_w < 1)
        throw ShapeError("bilinear_resize: target size must be positive");
    const Shape xs = x.shape();
    const auto ty = detail::lerp_table(xs.h, out_h);
    const auto tx = detail::lerp_table(xs.w, out_w);

    Tensor out(Shape{xs.n, xs.c, out_h, out_w});
    {
        const double* xp = x.data();
        double* op = out.data();
        for (long nc = 0; nc < xs.n * xs.c; ++nc) {
            const double* xbase = xp + nc * xs.h * xs.w;
            double* obase = op + nc * out_h * out_w;
            for (long oy = 0; oy < out_h; ++oy) {
                const auto& ly = ty[static_cast<std::size_t>(oy)];
                const double* r0 = xbase + ly.i0 * xs.w;
                const double* r1 = xbase + ly.i1 * xs.w;
                double* orow = obase + oy * out_w;
                for (long ox = 0; ox < out_w; ++ox) {
                    const auto& lx = tx[static_cast<std::size_t>(ox)];
                    const double top = (1.0 - lx.f) * r0[lx.i0] + lx.f * r0[lx.i1];
                    const double bot = (1.0 - lx.f) * r1[lx.i0] + lx.f * r1[lx.i1];
                    orow[ox] = (1.0 - ly.f) * top + ly.f * bot;
                }
            }
        }
    }

    if (detail::want_grad(tape, {&x})) {
        out.set_requires_grad(true);
        Tensor xc = x, oc = out;
        tape.record([xc, oc, ty, tx, out_h, out_w]() mutable {
            const Shape xsh = xc.shape();
            const double* gp = oc.grad();
            double* dx = xc.grad();
            for (long nc = 0; nc < xsh.n * xsh.c; ++nc) {
                double* dxbase = dx + nc * xsh.h * xsh.w;
                const double* gbase = gp + nc * out_h * out_w;
                for (long oy = 0; oy < out_h; ++oy) {
                    const auto& ly = ty[static_cast<std::size_t>(oy)];
                    const double* grow = gbase + oy * out_w;
                    for (long ox = 0; ox < out_w; ++ox) {
                        const auto& lx = tx[static_cast<std::size_t>(ox)];
                        const double g = grow[ox];
                        dxbase[ly.i0 * xsh.w + lx.i0] += (1.0 - ly.f) * (1.0 - lx.f) * g;
                        dxbase[ly.i0 * xsh.w + lx.i1] += (1.0 - ly.f) * lx.f * g;
                        dxbase[ly.i1 * xsh.w + lx.i0] += ly.f * (1.0 - lx.f) * g;
                        dxbase[ly.i1 * xsh.w + lx.i1] += ly.f * lx.f * g;
                    }
                }
            }
        });
    }
    return out;
}

// ---------------------------------------------------------------------------
// concat_channels / slice_channels
inline Tensor concat_channels(Tape& tape, const std::vector<Tensor>& xs) {
    if (xs.empty()) throw UsageError("concat_channels: no inputs");
    const Shape s0 = xs.front().shape();
    long c_total = 0;
    for (const Tensor& t : xs) {
        const Shape s = t.shape();
        if (s.n != s0.n || s.h != s0.h || s.w != s0.w)
            throw ShapeError("concat_channels: mismatched dims " + to_string(s) + " vs " +
                             to_string(s0));
        c_total += s.c;
    }
    const long hw = s0.h * s0.w;
    Tensor out(Shape{s0.n, c_total, s0.h, s0.w});
    {
        double* op = out.data();
        for (long n = 0; n < s0.n; ++n) {
            long coff = 0;
            for (const Tensor& t : xs) {
                const long cj = t.c();
                std::memcpy(op + (n * c_total + coff) * hw, t.data() + n * cj * hw,
                            static_cast<std::size_t>(cj * hw) * sizeof(double));
                coff += cj;
            }
        }
    }

    bool any = false;
    for (const Tensor& t : xs) any = any || t.requires_grad();
    if (tape.recording() && any) {
        out.set_requires_grad(true);
        std::vector<Tensor> ins = xs;
        Tensor oc = out;
        tape.record([ins, oc, c_total, hw]() mutable {
            const double* gp = oc.grad();
            const long N = oc.n();
            for (long n = 0; n < N; ++n) {
                long coff = 0;
                for (Tensor& t : ins) {
                    const long cj = t.c();
                    if (t.requires_grad()) {
                        double* dt = t.grad() + n * cj * hw;
                        const double* g = gp + (n * c_total + coff) * hw;
                        for (long i = 0; i < cj * hw; ++i) dt[i] += g[i];
                    }
                    coff += cj;
                }
            }
        });
    }
    return out;
}

// channels [c0, c1) of x
inline Tensor slice_channels(Tape& tape, const Tensor& x, long c0, long c1) {
    const Shape xs = x.shape();
    if (c0 < 0 || c1 <= c0 || c1 > xs.c)
        throw ShapeError("slice_channels: bad range [" + std::to_string(c0) + "," +
                         std::to_string(c1) + ") for " + to_string(xs));
    const long cj = c1 - c0, hw = xs.h * xs.w;
    Tensor out(Shape{xs.n, cj, xs.h, xs.w});
    for (long n = 0; n < xs.n; ++n)
        std::memcpy(out.data() + n * cj * hw, x.data() + (n * xs.c + c0) * hw,
                    static_cast<std::size_t>(cj * hw) * sizeof(double));

    if (detail::want_grad(tape, {&x})) {
        out.set_requires_grad(true);
        Tensor xc = x, oc = out;
        tape.record([xc, oc, c0, cj, hw]() mutable {
            const double* gp = oc.grad();
            double* dx = xc.grad();
            const long C = xc.c();
            for (long n = 0; n < xc.n(); ++n) {
                double* d = dx + (n * C + c0) * hw;
                const double* g = gp + n * cj * hw;
                for (long i = 0; i < cj * hw; ++i) d[i] += g[i];
            }
        });
    }
    return out;
}

// ---------------------------------------------------------------------------
// Elementwise mul/add. y must match x, or broadcast as a per-channel gate
// (n,c,1,1) or a per-pixel gate (n,1,h,w); gradients reduce-sum over the
// broadcast axes.
namespace detail {
enum class Bcast { Same, PerChannel, PerPixel };

inline Bcast bcast_kind(const Shape& x, const Shape& y, const char* who) {
    if (x == y) return Bcast::Same;
    if (y.n == x.n && y.c == x.c && y.h == 1 && y.w == 1) return Bcast::PerChannel;
    if (y.n == x.n && y.c == 1 && y.h == x.h && y.w == x.w) return Bcast::PerPixel;
    throw ShapeError(std::string(who) + ": cannot broadcast " + to_string(y) + " against " +
                     to_string(x));
}
} // namespace detail

inline Tensor mul(Tape& tape, const Tensor& x, const Tensor& y) {
    const Shape xs = x.shape(), ys = y.shape();
    const auto kind = detail::bcast_kind(xs, ys, "mul");
    const long hw = xs.h * xs.w;
    Tensor out(xs);
    {
        const double* xp = x.data();
        const double* yp = y.data();
        double* op = out.data();
        switch (kind) {
        case detail::Bcast::Same:
            for (long i = 0; i < xs.numel(); ++i) op[i] = xp[i] * yp[i];
            break;
        case detail::Bcast::PerChannel:
            for (long nc = 0; nc < xs.n * xs.c; ++nc) {
                const double yv = yp[nc];
                for (long i = 0; i < hw; ++i) op[nc * hw + i] = xp[nc * hw + i] * yv;
            }
            break;
        case detail::Bcast::PerPixel:
            for (long n = 0; n < xs.n; ++n) {
                const double* yb = yp + n * hw;
                for (long c = 0; c < xs.c; ++c) {
                    const long off = (n * xs.c + c) * hw;
                    for (long i = 0; i < hw; ++i) op[off + i] = xp[off + i] * yb[i];
                }
            }
            break;
        }
    }

    if (detail::want_grad(tape, {&x, &y})) {
        out.set_requires_grad(true);
        Tensor xc = x, yc = y, oc = out;
        tape.record([xc, yc, oc, kind, hw]() mutable {
            const Shape xsh = xc.shape();
            const double* gp = oc.grad();
            const double* xp = xc.data();
            const double* yp = yc.data();
            if (xc.requires_grad()) {
                double* dx = xc.grad();
                switch (kind) {
                case detail::Bcast::Same:
                    for (long i = 0; i < xsh.numel(); ++i) dx[i] += gp[i] * yp[i];
                    break;
                case detail::Bcast::PerChannel:
                    for (long nc = 0; nc < xsh.n * xsh.c; ++nc)
                        for (long i = 0; i < hw; ++i) dx[nc * hw + i] += gp[nc * hw + i] * yp[nc];
                    break;
                case detail::Bcast::PerPixel:
                    for (long n = 0; n < xsh.n; ++n)
                        for (long c = 0; c < xsh.c; ++c) {
                            const long off = (n * xsh.c + c) * hw;
                            const double* yb = yp + n * hw;
                            for (long i = 0; i < hw; ++i) dx[off + i] += gp[off + i] * yb[i];
                        }
                    break;
                }
            }
            if (yc.requires_grad()) {
                double* dy = yc.grad();
                switch (kind) {
                case detail::Bcast::Same:
                    for (long i = 0; i < xsh.numel(); ++i) dy[i] += gp[i] * xp[i];
                    break;
                case detail::Bcast::PerChannel:
                    for (long nc = 0; nc < xsh.n * xsh.c; ++nc) {
                        double acc = 0.0;
                        for (long i = 0; i < hw; ++i) acc += gp[nc * hw + i] * xp[nc * hw + i];
                        dy[nc] += acc;
                    }
                    break;
                case detail::Bcast::PerPixel:
                    for (long n = 0; n < xsh.n; ++n)
                        for (long c = 0; c < xsh.c; ++c) {
                            const long off = (n * xsh.c + c) * hw;
                            double* yb = dy + n * hw;
                            for (long i = 0; i < hw; ++i) yb[i] += gp[off + i] * xp[off + i];
                        }
                    break;
                }
            }
        });
    }
    return out;
}

inline Tensor add(Tape& tape, const Tensor& x, const Tensor& y) {
    const Shape xs = x.shape(), ys = y.shape();
    const auto kind = detail::bcast_kind(xs, ys, "add");
    const long hw = xs.h * xs.w;
    Tensor out(xs);
    {
        const double* xp = x.data();
        const double* yp = y.data();
        double* op = out.data();
        switch (kind) {
        case detail::Bcast::Same:
            for (long i = 0; i < xs.numel(); ++i) op[i] = xp[i] + yp[i];
            break;
        case detail::Bcast::PerChannel:
            for (long nc = 0; nc < xs.n * xs.c; ++nc)
                for (long i = 0; i < hw; ++i) op[nc * hw + i] = xp[nc * hw + i] + yp[nc];
            break;
        case detail::Bcast::PerPixel:
            for (long n = 0; n < xs.n; ++n)
                for (long c = 0; c < xs.c; ++c) {
                    const long off = (n * xs.c + c) * hw;
                    const double* yb = yp + n * hw;
                    for (long i = 0; i < hw; ++i) op[off + i] = xp[off + i] + yb[i];
                }
            break;
        }
    }

    if (detail::want_grad(tape, {&x, &y})) {
        out.set_requires_grad(true);
        Tensor xc = x, yc = y, oc = out;
        tape.record([xc, yc, oc, kind, hw]() mutable {
            const Shape xsh = xc.shape();
            const double* gp = oc.grad();
            if (xc.requires_grad()) {
                double* dx = xc.grad();
                for (long i = 0; i < xsh.numel(); ++i) dx[i] += gp[i];
            }
            if (yc.requires_grad()) {
                double* dy = yc.grad();
                switch (kind) {
                case detail::Bcast::Same:
                    for (long i = 0; i < xsh.numel(); ++i) dy[i] += gp[i];
                    break;
                case detail::Bcast::PerChannel:
                    for (long nc = 0; nc < xsh.n * xsh.c; ++nc) {
                        double acc = 0.0;
                        for (long i = 0; i < hw; ++i) acc += gp[nc * hw + i];
                        dy[nc] += acc;
                    }
                    break;
                case detail::Bcast::PerPixel:
                    for (long n = 0; n < xsh.n; ++n)
                        for (long c = 0; c < xsh.c; ++c) {
                            const double* g = gp + (n * xsh.c + c) * hw;
                            double* yb = dy + n * hw;
                            for (long i = 0; i < hw; ++i) yb[i] += g[i];
                        }
                    break;
                }
            }
        });
    }
    return out;
}

// elementwise quotient, same shapes only (used for scalar loss ratios)
inline Tensor div(Tape& tape, const Tensor& a, const Tensor& b) {
    if (!(a.shape() == b.shape()))
        throw ShapeError("div: shape mismatch " + to_string(a.shape()) + " vs " +
                         to_string(b.shape()));
    Tensor out(a.shape());
    for (long i = 0; i < a.numel(); ++i) out.data()[i] = a.data()[i] / b.data()[i];

    if (detail::want_grad(tape, {&a, &b})) {
        out.set_requires_grad(true);
        Tensor ac = a, bc = b, oc = out;
        tape.record([ac, bc, oc]() mutable {
            const double* gp = oc.grad();
            const double* bp = bc.data();
            const double* op = oc.data();
            if (ac.requires_grad()) {
                double* da = ac.grad();
                for (long i = 0; i < ac.numel(); ++i) da[i] += gp[i] / bp[i];
            }
            if (bc.requires_grad()) {
                double* db = bc.grad();
                for (long i = 0; i < bc.numel(); ++i) db[i] -= gp[i] * op[i] / bp[i];
            }
        });
    }
    return out;
}

// ---------------------------------------------------------------------------
// pointwise nonlinearities
inline Tensor sigmoid(Tape& tape, const Tensor& x) {
    Tensor out(x.shape());
    for (long i = 0; i < x.numel(); ++i) {
        const double v = x.data()[i];
        if (v >= 0.0) {
            out.data()[i] = 1.0 / (1.0 + std::exp(-v));
        } else {
            const double e = std::exp(v);
            out.data()[i] = e / (1.0 + e);
        }
    }
    if (detail::want_grad(tape, {&x})) {
        out.set_requires_grad(true);
        Tensor xc = x, oc = out;
        tape.record([xc, oc]() mutable {
            const double* gp = oc.grad();
            const double* op = oc.data();
            double* dx = xc.grad();
            for (long i = 0; i < xc.numel(); ++i) dx[i] += gp[i] * op[i] * (1.0 - op[i]);
        });
    }
    return out;
}

inline Tensor relu(Tape& tape, const Tensor& x) {
    Tensor out(x.shape());
    for (long i = 0; i < x.numel(); ++i) out.data()[i] = x.data()[i] > 0.0 ? x.data()[i] : 0.0;
    if (detail::want_grad(tape, {&x})) {
        out.set_requires_grad(true);
        Tensor xc = x, oc = out;
        tape.record([xc, oc]() mutable {
            const double* gp = oc.grad();
            const double* xp = xc.data();
            double* dx = xc.grad();
            for (long i = 0; i < xc.numel(); ++i)
                if (xp[i] > 0.0) dx[i] += gp[i];
        });
    }
    return out;
}

// ---------------------------------------------------------------------------
// reductions
inline Tensor global_avg_pool(Tape& tape, const Tensor& x) {
    const Shape xs = x.shape();
    const long hw = xs.h * xs.w;
    Tensor out(Shape{xs.n, xs.c, 1, 1});
    for (long nc = 0; nc < xs.n * xs.c; ++nc) {
        double acc = 0.0;
        for (long i = 0; i < hw; ++i) acc += x.data()[nc * hw + i];
        out.data()[nc] = acc / static_cast<double>(hw);
    }
    if (detail::want_grad(tape, {&x})) {
        out.set_requires_grad(true);
        Tensor xc = x, oc = out;
        tape.record([xc, oc, hw]() mutable {
            const double* gp = oc.grad();
            double* dx = xc.grad();
            for (long nc = 0; nc < xc.n() * xc.c(); ++nc) {
                const double g = gp[nc] / static_cast<double>(hw);
                for (long i = 0; i < hw; ++i) dx[nc * hw + i] += g;
            }
        });
    }
    return out;
}

// Per-pixel channel statistics: out channel 0 = mean over c, channel 1 = max
// over c. The max gradient routes to the lowest-index channel attaining it.
inline Tensor channel_stats(Tape& tape, const Tensor& x) {
    const Shape xs = x.shape();
    const long hw = xs.h * xs.w, C = xs.c;
    Tensor out(Shape{xs.n, 2, xs.h, xs.w});
    std::vector<long> argmax(static_cast<std::size_t>(xs.n * hw));
    {
        const double* xp = x.data();
        double* op = out.data();
        for (long n = 0; n < xs.n; ++n) {
            const double* xb = xp + n * C * hw;
            double* mean_row = op + n * 2 * hw;
            double* max_row = mean_row + hw;
            long* am = argmax.data() + n * hw;
            for (long i = 0; i < hw; ++i) {
                double acc = xb[i], best = xb[i];
                long besti = 0;
                for (long c = 1; c < C; ++c) {
                    const double v = xb[c * hw + i];
                    acc += v;
                    if (v > best) {
                        best = v;
                        besti = c;
                    }
                }
                mean_row[i] = acc / static_cast<double>(C);
                max_row[i] = best;
                am[i] = besti;
            }
        }
    }
    if (detail::want_grad(tape, {&x})) {
        out.set_requires_grad(true);
        Tensor xc = x, oc = out;
        tape.record([xc, oc, argmax = std::move(argmax), hw, C]() mutable {
            const double* gp = oc.grad();
            double* dx = xc.grad();
            for (long n = 0; n < xc.n(); ++n) {
                const double* gmean = gp + n * 2 * hw;
                const double* gmax = gmean + hw;
                double* dxb = dx + n * C * hw;
                const long* am = argmax.data() + n * hw;
                for (long i = 0; i < hw; ++i) {
                    const double gm = gmean[i] / static_cast<double>(C);
                    for (long c = 0; c < C; ++c) dxb[c * hw + i] += gm;
                    dxb[am[i] * hw + i] += gmax[i];
                }
            }
        });
    }
    return out;
}

inline Tensor sum_all(Tape& tape, const Tensor& x) {
    double acc = 0.0;
    for (long i = 0; i < x.numel(); ++i) acc += x.data()[i];
    Tensor out = Tensor::scalar(acc);
    if (detail::want_grad(tape, {&x})) {
        out.set_requires_grad(true);
        Tensor xc = x, oc = out;
        tape.record([xc, oc]() mutable {
            const double g = oc.grad()[0];
            double* dx = xc.grad();
            for (long i = 0; i < xc.numel(); ++i) dx[i] += g;
        });
    }
    return out;
}

// ---------------------------------------------------------------------------
// scalar-coefficient helpers
inline Tensor scale(Tape& tape, const Tensor& x, double a) {
    Tensor out(x.shape());
    for (long i = 0; i < x.numel(); ++i) out.data()[i] = a * x.data()[i];
    if (detail::want_grad(tape, {&x})) {
        out.set_requires_grad(true);
        Tensor xc = x, oc = out;
        tape.record([xc, oc, a]() mutable {
            const double* gp = oc.grad();
            double* dx = xc.grad();
            for (long i = 0; i < xc.numel(); ++i) dx[i] += a * gp[i];
        });
    }
    return out;
}

inline Tensor add_const(Tape& tape, const Tensor& x, double cst) {
    Tensor out(x.shape());
    for (long i = 0; i < x.numel(); ++i) out.data()[i] = x.data()[i] + cst;
    if (detail::want_grad(tape, {&x})) {
        out.set_requires_grad(true);
        Tensor xc = x, oc = out;
        tape.record([xc, oc]() mutable {
            const double* gp = oc.grad();
            double* dx = xc.grad();
            for (long i = 0; i < xc.numel(); ++i) dx[i] += gp[i];
        });
    }
    return out;
}

} // namespace cpdr
