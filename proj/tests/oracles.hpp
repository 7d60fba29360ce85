#pragma once

// Independent brute-force reference implementations used only by tests.
// Everything here is written directly from the definitions, without touching
// the library's computation paths.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "vmtl/tensor.hpp"

namespace oracle {

// Plain 7-loop cross-correlation with zero padding.
inline vmtl::Tensor conv3d_naive(const vmtl::Tensor& x, const vmtl::Tensor& k,
                                 std::size_t sT, std::size_t sH, std::size_t sW,
                                 std::size_t pT, std::size_t pH, std::size_t pW) {
    const std::size_t C = x.dim(0), T = x.dim(1), H = x.dim(2), W = x.dim(3);
    const std::size_t C2 = k.dim(0), kT = k.dim(2), kH = k.dim(3), kW = k.dim(4);
    const std::size_t To = (T + 2 * pT - kT) / sT + 1;
    const std::size_t Ho = (H + 2 * pH - kH) / sH + 1;
    const std::size_t Wo = (W + 2 * pW - kW) / sW + 1;
    vmtl::Tensor out({C2, To, Ho, Wo});
    for (std::size_t c2 = 0; c2 < C2; ++c2)
        for (std::size_t to = 0; to < To; ++to)
            for (std::size_t yo = 0; yo < Ho; ++yo)
                for (std::size_t xo = 0; xo < Wo; ++xo) {
                    double acc = 0.0;
                    for (std::size_t c = 0; c < C; ++c)
                        for (std::size_t kt = 0; kt < kT; ++kt)
                            for (std::size_t kh = 0; kh < kH; ++kh)
                                for (std::size_t kw = 0; kw < kW; ++kw) {
                                    const long ti = static_cast<long>(to * sT + kt) - static_cast<long>(pT);
                                    const long yi = static_cast<long>(yo * sH + kh) - static_cast<long>(pH);
                                    const long xi = static_cast<long>(xo * sW + kw) - static_cast<long>(pW);
                                    if (ti < 0 || ti >= static_cast<long>(T)) continue;
                                    if (yi < 0 || yi >= static_cast<long>(H)) continue;
                                    if (xi < 0 || xi >= static_cast<long>(W)) continue;
                                    acc += x.at(c, static_cast<std::size_t>(ti),
                                                static_cast<std::size_t>(yi),
                                                static_cast<std::size_t>(xi)) *
                                           k.at(c2, c, kt, kh, kw);
                                }
                    out.at(c2, to, yo, xo) = acc;
                }
    return out;
}

inline vmtl::Tensor conv2d_naive(const vmtl::Tensor& x, const vmtl::Tensor& k,
                                 std::size_t sH, std::size_t sW, std::size_t pH,
                                 std::size_t pW) {
    const vmtl::Tensor x3 = x.reshaped({x.dim(0), 1, x.dim(1), x.dim(2)});
    // 2D oracle stays independent of the library's 3D wrapper: run explicit loops.
    const std::size_t C = x.dim(0), H = x.dim(1), W = x.dim(2);
    const std::size_t C2 = k.dim(0), kH = k.dim(2), kW = k.dim(3);
    const std::size_t Ho = (H + 2 * pH - kH) / sH + 1;
    const std::size_t Wo = (W + 2 * pW - kW) / sW + 1;
    vmtl::Tensor out({C2, Ho, Wo});
    (void)x3;
    for (std::size_t c2 = 0; c2 < C2; ++c2)
        for (std::size_t yo = 0; yo < Ho; ++yo)
            for (std::size_t xo = 0; xo < Wo; ++xo) {
                double acc = 0.0;
                for (std::size_t c = 0; c < C; ++c)
                    for (std::size_t kh = 0; kh < kH; ++kh)
                        for (std::size_t kw = 0; kw < kW; ++kw) {
                            const long yi = static_cast<long>(yo * sH + kh) - static_cast<long>(pH);
                            const long xi = static_cast<long>(xo * sW + kw) - static_cast<long>(pW);
                            if (yi < 0 || yi >= static_cast<long>(H)) continue;
                            if (xi < 0 || xi >= static_cast<long>(W)) continue;
                            acc += x.at(c, static_cast<std::size_t>(yi),
                                        static_cast<std::size_t>(xi)) *
                                   k.at(c2, c, kh, kw);
                        }
                out.at(c2, yo, xo) = acc;
            }
    return out;
}

// AUC as the exhaustive pairwise Mann-Whitney statistic with half-weight ties.
inline double pairwise_auc(const std::vector<double>& pos, const std::vector<double>& neg) {
    double s = 0.0;
    for (double p : pos)
        for (double n : neg) {
            if (p > n) s += 1.0;
            else if (p == n) s += 0.5;
        }
    return s / (static_cast<double>(pos.size()) * static_cast<double>(neg.size()));
}

// Exhaustive 0/1 knapsack over all subsets; returns the best value and, for
// comparison, keeps the tie convention irrelevant by returning value only.
inline double knapsack_exhaustive(const std::vector<std::size_t>& weights,
                                  const std::vector<double>& values, std::size_t capacity) {
    const std::size_t n = weights.size();
    double best = 0.0;
    for (std::size_t mask = 0; mask < (std::size_t{1} << n); ++mask) {
        std::size_t w = 0;
        double v = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            if (mask & (std::size_t{1} << i)) {
                w += weights[i];
                v += values[i];
            }
        if (w <= capacity) best = std::max(best, v);
    }
    return best;
}

// Direct double-loop truncated Gaussian blur of a binary map (radius 3σ),
// peak-normalized.
inline vmtl::Tensor gaussian_blur_naive(const vmtl::Tensor& fix, double sigma) {
    const std::size_t H = fix.dim(0), W = fix.dim(1);
    const long r = static_cast<long>(std::ceil(3.0 * sigma));
    vmtl::Tensor out({H, W});
    for (std::size_t y = 0; y < H; ++y)
        for (std::size_t x = 0; x < W; ++x) {
            if (fix.at(y, x) == 0.0) continue;
            for (long dy = -r; dy <= r; ++dy)
                for (long dx = -r; dx <= r; ++dx) {
                    const long yy = static_cast<long>(y) + dy;
                    const long xx = static_cast<long>(x) + dx;
                    if (yy < 0 || yy >= static_cast<long>(H) || xx < 0 ||
                        xx >= static_cast<long>(W))
                        continue;
                    out.at(static_cast<std::size_t>(yy), static_cast<std::size_t>(xx)) +=
                        std::exp(-(static_cast<double>(dy * dy + dx * dx)) /
                                 (2.0 * sigma * sigma));
                }
        }
    double mx = 0.0;
    for (std::size_t i = 0; i < out.numel(); ++i) mx = std::max(mx, out[i]);
    if (mx > 0.0)
        for (std::size_t i = 0; i < out.numel(); ++i) out[i] /= mx;
    return out;
}

// Population Pearson correlation straight from the definition.
inline double pearson_naive(const vmtl::Tensor& a, const vmtl::Tensor& b) {
    const std::size_t n = a.numel();
    double ma = 0, mb = 0;
    for (std::size_t i = 0; i < n; ++i) {
        ma += a[i];
        mb += b[i];
    }
    ma /= n;
    mb /= n;
    double cov = 0, va = 0, vb = 0;
    for (std::size_t i = 0; i < n; ++i) {
        cov += (a[i] - ma) * (b[i] - mb);
        va += (a[i] - ma) * (a[i] - ma);
        vb += (b[i] - mb) * (b[i] - mb);
    }
    return cov / std::sqrt(va * vb);
}

} // namespace oracle
