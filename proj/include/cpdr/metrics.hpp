#pragma once

// Saliency evaluation suite: MAE, adaptive F, weighted F, structure measure,
// mean enhanced-alignment measure, and 256-point precision/recall/F curves.
// Predictions are maps in [0,1]; ground truth is binary {0,1}; both (1,1,h,w).
// Binarization is strict: on at threshold k means value > k/255.

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "cpdr/errors.hpp"
#include "cpdr/tensor.hpp"

namespace cpdr {

struct PrPoint {
    double precision = 0.0;
    double recall = 0.0;
};

namespace metricdetail {

inline void require_pair(const Tensor& p, const Tensor& t) {
    if (p.shape().n != 1 || p.shape().c != 1)
        throw ShapeError("metric inputs must be single maps (1,1,h,w), got " +
                         to_string(p.shape()));
    if (!(p.shape() == t.shape()))
        throw ShapeError("prediction " + to_string(p.shape()) + " and truth " +
                         to_string(t.shape()) + " differ");
    for (long i = 0; i < p.numel(); ++i) {
        if (p.data()[i] < 0.0 || p.data()[i] > 1.0)
            throw UsageError("prediction values must lie in [0,1]");
        const double tv = t.data()[i];
        if (tv != 0.0 && tv != 1.0) throw UsageError("ground truth values must be 0 or 1");
    }
}

inline double mean_of(const double* v, long n) {
    double acc = 0.0;
    for (long i = 0; i < n; ++i) acc += v[i];
    return acc / static_cast<double>(n);
}

// counts of predicted-on pixels split by truth, at an arbitrary real cut
struct OnCounts {
    long tp = 0, on = 0; // fp = on - tp
};

inline OnCounts count_above(const double* p, const double* t, long n, double cut) {
    OnCounts c;
    for (long i = 0; i < n; ++i)
        if (p[i] > cut) {
            ++c.on;
            if (t[i] != 0.0) ++c.tp;
        }
    return c;
}

inline PrPoint pr_from_counts(long tp, long on, long fg) {
    PrPoint r;
    if (on == 0) {
        r.precision = r.recall = (fg == 0) ? 1.0 : 0.0;
        return r;
    }
    r.precision = static_cast<double>(tp) / static_cast<double>(on);
    r.recall = (fg == 0) ? 0.0 : static_cast<double>(tp) / static_cast<double>(fg);
    return r;
}

// number of thresholds k in 0..255 at which a value counts as on; the on-set
// over k is a shrinking prefix, so one binary search per pixel settles all 256
inline int on_threshold_count(double v) {
    int lo = 0, hi = 256; // invariant: on for all k < lo, off for all k >= hi
    while (lo < hi) {
        const int mid = (lo + hi) / 2;
        if (v > static_cast<double>(mid) / 255.0)
            lo = mid + 1;
        else
            hi = mid;
    }
    return lo;
}

// exact squared Euclidean distance transform (lower-envelope-of-parabolas)
constexpr double kFar = 1e15;

inline void dt1d(const std::vector<double>& f, std::vector<double>& d, std::vector<long>& v,
                 std::vector<double>& z, long n) {
    long k = 0;
    v[0] = 0;
    z[0] = -kFar;
    z[1] = kFar;
    for (long q = 1; q < n; ++q) {
        double s;
        while (true) {
            const double fq = f[static_cast<std::size_t>(q)] + static_cast<double>(q) * q;
            const double fv = f[static_cast<std::size_t>(v[k])] + static_cast<double>(v[k]) * v[k];
            s = (fq - fv) / (2.0 * static_cast<double>(q - v[k]));
            if (s <= z[static_cast<std::size_t>(k)] && k > 0)
                --k;
            else
                break;
        }
        ++k;
        v[static_cast<std::size_t>(k)] = q;
        z[static_cast<std::size_t>(k)] = s;
        z[static_cast<std::size_t>(k) + 1] = kFar;
    }
    k = 0;
    for (long q = 0; q < n; ++q) {
        while (z[static_cast<std::size_t>(k) + 1] < static_cast<double>(q)) ++k;
        const double dq = static_cast<double>(q - v[static_cast<std::size_t>(k)]);
        d[static_cast<std::size_t>(q)] = dq * dq + f[static_cast<std::size_t>(v[static_cast<std::size_t>(k)])];
    }
}

// squared distance to the nearest truth-foreground pixel, exact
inline std::vector<double> squared_fg_distance(const double* t, long h, long w) {
    std::vector<double> g(static_cast<std::size_t>(h * w));
    std::vector<double> f(static_cast<std::size_t>(std::max(h, w)));
    std::vector<double> d(f.size());
    std::vector<long> v(f.size());
    std::vector<double> z(f.size() + 1);
    for (long c = 0; c < w; ++c) {
        for (long r = 0; r < h; ++r)
            f[static_cast<std::size_t>(r)] = t[r * w + c] != 0.0 ? 0.0 : kFar;
        dt1d(f, d, v, z, h);
        for (long r = 0; r < h; ++r) g[static_cast<std::size_t>(r * w + c)] = d[static_cast<std::size_t>(r)];
    }
    std::vector<double> out(g.size());
    for (long r = 0; r < h; ++r) {
        for (long c = 0; c < w; ++c) f[static_cast<std::size_t>(c)] = g[static_cast<std::size_t>(r * w + c)];
        dt1d(f, d, v, z, w);
        for (long c = 0; c < w; ++c) out[static_cast<std::size_t>(r * w + c)] = d[static_cast<std::size_t>(c)];
    }
    return out;
}

inline long exact_isqrt(long x) {
    long r = static_cast<long>(std::llround(std::sqrt(static_cast<double>(x))));
    while (r * r > x) --r;
    while ((r + 1) * (r + 1) <= x) ++r;
    return r;
}

// index of the nearest foreground pixel, ties resolved by squared distance,
// then row, then column; walks only the ring at the known exact distance
inline long nearest_fg_index(const double* t, long h, long w, long r, long c, long d2) {
    const long reach = exact_isqrt(d2);
    for (long rr = std::max(0L, r - reach); rr <= std::min(h - 1, r + reach); ++rr) {
        const long rem = d2 - (rr - r) * (rr - r);
        if (rem < 0) continue;
        const long dc = exact_isqrt(rem);
        if (dc * dc != rem) continue;
        const long left = c - dc, right = c + dc;
        if (left >= 0 && t[rr * w + left] != 0.0) return rr * w + left;
        if (dc > 0 && right < w && t[rr * w + right] != 0.0) return rr * w + right;
    }
    throw UsageError("distance transform inconsistency"); // unreachable on valid input
}

} // namespace metricdetail

inline double mae(const Tensor& p, const Tensor& t) {
    metricdetail::require_pair(p, t);
    double acc = 0.0;
    for (long i = 0; i < p.numel(); ++i) acc += std::abs(p.data()[i] - t.data()[i]);
    return acc / static_cast<double>(p.numel());
}

inline PrPoint pr_at_threshold(const Tensor& p, const Tensor& t, int thr) {
    metricdetail::require_pair(p, t);
    if (thr < 0 || thr > 255) throw UsageError("threshold index must lie in 0..255");
    long fg = 0;
    for (long i = 0; i < t.numel(); ++i) fg += t.data()[i] != 0.0 ? 1 : 0;
    const metricdetail::OnCounts c = metricdetail::count_above(
        p.data(), t.data(), p.numel(), static_cast<double>(thr) / 255.0);
    return metricdetail::pr_from_counts(c.tp, c.on, fg);
}

inline double f_beta(double precision, double recall, double beta2 = 0.3) {
    const double den = beta2 * precision + recall;
    if (den <= 0.0) return 0.0;
    return (1.0 + beta2) * precision * recall / den;
}

// F at the per-image adaptive threshold min(1, 2*mean(p))
inline double adaptive_f(const Tensor& p, const Tensor& t) {
    metricdetail::require_pair(p, t);
    const long n = p.numel();
    const double tau = std::min(1.0, 2.0 * metricdetail::mean_of(p.data(), n));
    long fg = 0;
    for (long i = 0; i < n; ++i) fg += t.data()[i] != 0.0 ? 1 : 0;
    const metricdetail::OnCounts c = metricdetail::count_above(p.data(), t.data(), n, tau);
    const PrPoint pr = metricdetail::pr_from_counts(c.tp, c.on, fg);
    return f_beta(pr.precision, pr.recall);
}

// weighted F: errors on foreground may borrow their Gaussian-smoothed value
// when smaller, background errors are amplified by proximity to the object;
// an empty truth yields 0 and sets the warning flag when one is supplied
inline double weighted_f_measure(const Tensor& p, const Tensor& t, bool* empty_truth = nullptr) {
    metricdetail::require_pair(p, t);
    if (empty_truth) *empty_truth = false;
    const long h = p.shape().h, w = p.shape().w, n = p.numel();
    const double* pv = p.data();
    const double* tv = t.data();
    long fg = 0;
    for (long i = 0; i < n; ++i) fg += tv[i] != 0.0 ? 1 : 0;
    if (fg == 0) {
        if (empty_truth) *empty_truth = true;
        return 0.0;
    }

    std::vector<double> err(static_cast<std::size_t>(n));
    for (long i = 0; i < n; ++i) err[static_cast<std::size_t>(i)] = std::abs(pv[i] - tv[i]);

    const std::vector<double> d2 = metricdetail::squared_fg_distance(tv, h, w);
    std::vector<double> borrowed = err; // background pixels take the nearest object pixel's error
    for (long r = 0; r < h; ++r)
        for (long c = 0; c < w; ++c) {
            const long i = r * w + c;
            if (tv[i] != 0.0) continue;
            const long j = metricdetail::nearest_fg_index(
                tv, h, w, r, c, static_cast<long>(std::llround(d2[static_cast<std::size_t>(i)])));
            borrowed[static_cast<std::size_t>(i)] = err[static_cast<std::size_t>(j)];
        }

    std::array<double, 49> kern{};
    double ksum = 0.0;
    for (int a = 0; a < 7; ++a)
        for (int b = 0; b < 7; ++b) {
            const double q = static_cast<double>((a - 3) * (a - 3) + (b - 3) * (b - 3));
            kern[static_cast<std::size_t>(a * 7 + b)] = std::exp(-q / 50.0); // sigma 5
            ksum += kern[static_cast<std::size_t>(a * 7 + b)];
        }
    for (double& k : kern) k /= ksum;

    double fg_err = 0.0, bg_err = 0.0;
    for (long r = 0; r < h; ++r)
        for (long c = 0; c < w; ++c) {
            const long i = r * w + c;
            if (tv[i] != 0.0) {
                double smooth = 0.0;
                for (int a = -3; a <= 3; ++a)
                    for (int b = -3; b <= 3; ++b) {
                        const long rr = r + a, cc = c + b;
                        if (rr < 0 || rr >= h || cc < 0 || cc >= w) continue;
                        smooth += kern[static_cast<std::size_t>((a + 3) * 7 + (b + 3))] *
                                  borrowed[static_cast<std::size_t>(rr * w + cc)];
                    }
                fg_err += std::min(err[static_cast<std::size_t>(i)], smooth);
            } else {
                const double dist = std::sqrt(d2[static_cast<std::size_t>(i)]);
                bg_err += err[static_cast<std::size_t>(i)] *
                          (2.0 - std::exp(std::log(0.5) / 5.0 * dist));
            }
        }

    const double tpw = static_cast<double>(fg) - fg_err;
    const double recall = tpw / static_cast<double>(fg);
    const double precision = (tpw + bg_err) > 0.0 ? tpw / (tpw + bg_err) : 0.0;
    return f_beta(precision, recall);
}

namespace metricdetail {

// shared dispersion-aware similarity pieces of the structure measure
inline double object_similarity(const std::vector<double>& vals) {
    if (vals.empty()) return 0.0;
    const double m = mean_of(vals.data(), static_cast<long>(vals.size()));
    double var = 0.0;
    for (double v : vals) var += (v - m) * (v - m);
    const double sd =
        vals.size() > 1 ? std::sqrt(var / static_cast<double>(vals.size() - 1)) : 0.0;
    return 2.0 * m / (m * m + 1.0 + sd + 1e-12);
}

inline double region_similarity(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.empty()) return 1.0;
    const double n = static_cast<double>(a.size());
    const double ma = mean_of(a.data(), static_cast<long>(a.size()));
    const double mb = mean_of(b.data(), static_cast<long>(b.size()));
    double va = 0.0, vb = 0.0, cov = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        va += (a[i] - ma) * (a[i] - ma);
        vb += (b[i] - mb) * (b[i] - mb);
        cov += (a[i] - ma) * (b[i] - mb);
    }
    const double norm = n - 1.0 + 1e-12;
    va /= norm;
    vb /= norm;
    cov /= norm;
    const double num = 4.0 * ma * mb * cov;
    const double den = (ma * ma + mb * mb) * (va + vb);
    if (num != 0.0) return num / (den + 1e-12);
    return den == 0.0 ? 1.0 : 0.0;
}

} // namespace metricdetail

inline double s_measure(const Tensor& p, const Tensor& t) {
    metricdetail::require_pair(p, t);
    const long h = p.shape().h, w = p.shape().w, n = p.numel();
    const double* pv = p.data();
    const double* tv = t.data();
    long fg = 0;
    for (long i = 0; i < n; ++i) fg += tv[i] != 0.0 ? 1 : 0;
    const double pmean = metricdetail::mean_of(pv, n);
    if (fg == 0) return 1.0 - pmean;
    if (fg == n) return pmean;
    const double y = static_cast<double>(fg) / static_cast<double>(n);

    std::vector<double> on_fg, inv_bg;
    on_fg.reserve(static_cast<std::size_t>(fg));
    inv_bg.reserve(static_cast<std::size_t>(n - fg));
    for (long i = 0; i < n; ++i) {
        if (tv[i] != 0.0)
            on_fg.push_back(pv[i]);
        else
            inv_bg.push_back(1.0 - pv[i]);
    }
    const double object_term = y * metricdetail::object_similarity(on_fg) +
                               (1.0 - y) * metricdetail::object_similarity(inv_bg);

    // quadrants split at the rounded 1-indexed foreground centroid
    double rsum = 0.0, csum = 0.0;
    for (long r = 0; r < h; ++r)
        for (long c = 0; c < w; ++c)
            if (tv[r * w + c] != 0.0) {
                rsum += static_cast<double>(r + 1);
                csum += static_cast<double>(c + 1);
            }
    const long cy = std::llround(rsum / static_cast<double>(fg));
    const long cx = std::llround(csum / static_cast<double>(fg));

    const double area = static_cast<double>(n);
    double region_term = 0.0;
    double weight_used = 0.0;
    for (int q = 0; q < 4; ++q) {
        const long r0 = (q < 2) ? 0 : cy, r1 = (q < 2) ? cy : h;
        const long c0 = (q % 2 == 0) ? 0 : cx, c1 = (q % 2 == 0) ? cx : w;
        std::vector<double> pp, tt;
        pp.reserve(static_cast<std::size_t>((r1 - r0) * (c1 - c0)));
        tt.reserve(pp.capacity());
        for (long r = r0; r < r1; ++r)
            for (long c = c0; c < c1; ++c) {
                pp.push_back(pv[r * w + c]);
                tt.push_back(tv[r * w + c]);
            }
        const double wq = q < 3 ? static_cast<double>((r1 - r0) * (c1 - c0)) / area
                                : 1.0 - weight_used;
        weight_used += wq;
        region_term += wq * metricdetail::region_similarity(pp, tt);
    }
    return std::clamp(0.5 * object_term + 0.5 * region_term, 0.0, 1.0);
}

namespace metricdetail {

// cumulative on-counts per threshold, derived once per image
struct ThresholdCounts {
    std::array<long, 256> tp{}, on{};
    long fg = 0;
    long total = 0;
};

inline ThresholdCounts threshold_counts(const double* p, const double* t, long n) {
    ThresholdCounts tc;
    tc.total = n;
    std::array<long, 257> hist_fg{}, hist_all{};
    for (long i = 0; i < n; ++i) {
        const int m = on_threshold_count(p[i]);
        ++hist_all[static_cast<std::size_t>(m)];
        if (t[i] != 0.0) {
            ++tc.fg;
            ++hist_fg[static_cast<std::size_t>(m)];
        }
    }
    long run_fg = 0, run_all = 0;
    for (int k = 255; k >= 0; --k) {
        run_fg += hist_fg[static_cast<std::size_t>(k) + 1];
        run_all += hist_all[static_cast<std::size_t>(k) + 1];
        tc.tp[static_cast<std::size_t>(k)] = run_fg;
        tc.on[static_cast<std::size_t>(k)] = run_all;
    }
    return tc;
}

} // namespace metricdetail

inline double e_measure_mean(const Tensor& p, const Tensor& t) {
    metricdetail::require_pair(p, t);
    const long n = p.numel();
    const metricdetail::ThresholdCounts tc =
        metricdetail::threshold_counts(p.data(), t.data(), n);
    const double nn = static_cast<double>(n);
    const double tmean = static_cast<double>(tc.fg) / nn;
    const bool t_const = tc.fg == 0 || tc.fg == n;

    double total = 0.0;
    for (int k = 0; k < 256; ++k) {
        const long on = tc.on[static_cast<std::size_t>(k)];
        const long tp = tc.tp[static_cast<std::size_t>(k)];
        const double bmean = static_cast<double>(on) / nn;
        const bool b_const = on == 0 || on == n;
        // only four (truth, binarized) pixel classes exist at one threshold
        const long counts[4] = {n - tc.fg - (on - tp), on - tp, tc.fg - tp, tp};
        double acc = 0.0;
        for (int cls = 0; cls < 4; ++cls) {
            const double ft = static_cast<double>(cls >> 1) - tmean;
            const double fb = static_cast<double>(cls & 1) - bmean;
            const double den = ft * ft + fb * fb;
            double phi;
            if (den == 0.0)
                phi = (t_const && b_const && tmean == bmean) ? 1.0 : 0.0;
            else
                phi = 2.0 * ft * fb / den;
            acc += static_cast<double>(counts[cls]) * (1.0 + phi) * (1.0 + phi) / 4.0;
        }
        total += acc / nn;
    }
    return total / 256.0;
}

// ---------------------------------------------------------------------------
// dataset-level evaluation

struct ImageMetrics {
    double mae = 0.0;
    double f_adaptive = 0.0;
    double f_weighted = 0.0;
    double s = 0.0;
    double e = 0.0;
    std::array<double, 256> precision{}, recall{};
    bool empty_truth = false;
};

inline ImageMetrics evaluate_image(const Tensor& p, const Tensor& t) {
    ImageMetrics im;
    im.mae = mae(p, t);
    im.f_adaptive = adaptive_f(p, t);
    im.f_weighted = weighted_f_measure(p, t, &im.empty_truth);
    im.s = s_measure(p, t);
    im.e = e_measure_mean(p, t);
    const metricdetail::ThresholdCounts tc =
        metricdetail::threshold_counts(p.data(), t.data(), p.numel());
    for (int k = 0; k < 256; ++k) {
        const PrPoint pr = metricdetail::pr_from_counts(
            tc.tp[static_cast<std::size_t>(k)], tc.on[static_cast<std::size_t>(k)], tc.fg);
        im.precision[static_cast<std::size_t>(k)] = pr.precision;
        im.recall[static_cast<std::size_t>(k)] = pr.recall;
    }
    return im;
}

struct EvalPair {
    Tensor pred;
    Tensor truth;
    std::string name;
};

struct MetricReport {
    double mae = 0.0;
    double f_mean = 0.0;
    double f_weighted = 0.0;
    double s_measure = 0.0;
    double e_measure = 0.0;
    std::array<double, 256> f_curve{}, precision_curve{}, recall_curve{};
    long n_images = 0;
    long n_empty_truth = 0;
};

// fans out per image, then reduces in the callers order so the result is
// independent of scheduling and of the worker count
inline MetricReport evaluate_pairs(const std::vector<EvalPair>& pairs, int workers = 1) {
    if (pairs.empty()) throw UsageError("evaluation needs at least one prediction/truth pair");
    if (workers < 1) throw UsageError("worker count must be positive");

    std::vector<ImageMetrics> per(pairs.size());
    const int lanes = static_cast<int>(
        std::min<std::size_t>(static_cast<std::size_t>(workers), pairs.size()));
    if (lanes == 1) {
        for (std::size_t i = 0; i < pairs.size(); ++i)
            per[i] = evaluate_image(pairs[i].pred, pairs[i].truth);
    } else {
        std::atomic<std::size_t> next{0};
        std::exception_ptr first_error;
        std::mutex error_lock;
        auto work = [&] {
            for (;;) {
                const std::size_t i = next.fetch_add(1);
                if (i >= pairs.size()) return;
                try {
                    per[i] = evaluate_image(pairs[i].pred, pairs[i].truth);
                } catch (...) {
                    std::lock_guard<std::mutex> hold(error_lock);
                    if (!first_error) first_error = std::current_exception();
                    return;
                }
            }
        };
        std::vector<std::thread> pool;
        pool.reserve(static_cast<std::size_t>(lanes));
        for (int i = 0; i < lanes; ++i) pool.emplace_back(work);
        for (std::thread& th : pool) th.join();
        if (first_error) std::rethrow_exception(first_error);
    }

    MetricReport rep;
    rep.n_images = static_cast<long>(pairs.size());
    const double inv = 1.0 / static_cast<double>(pairs.size());
    for (const ImageMetrics& im : per) {
        rep.mae += im.mae * inv;
        rep.f_mean += im.f_adaptive * inv;
        rep.f_weighted += im.f_weighted * inv;
        rep.s_measure += im.s * inv;
        rep.e_measure += im.e * inv;
        if (im.empty_truth) ++rep.n_empty_truth;
        for (int k = 0; k < 256; ++k) {
            rep.precision_curve[static_cast<std::size_t>(k)] +=
                im.precision[static_cast<std::size_t>(k)] * inv;
            rep.recall_curve[static_cast<std::size_t>(k)] +=
                im.recall[static_cast<std::size_t>(k)] * inv;
        }
    }
    for (int k = 0; k < 256; ++k)
        rep.f_curve[static_cast<std::size_t>(k)] =
            f_beta(rep.precision_curve[static_cast<std::size_t>(k)],
                   rep.recall_curve[static_cast<std::size_t>(k)]);
    return rep;
}

} // namespace cpdr
