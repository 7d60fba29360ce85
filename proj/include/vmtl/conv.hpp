#pragma once

#include <array>
#include <cstddef>
#include <vector>

#include "vmtl/tape.hpp"

namespace vmtl {
namespace ops {

namespace detail {

// C[M,N] += A[M,K] * B[K,N]
inline void gemm_nn(const double* A, const double* B, double* C,
                    std::size_t M, std::size_t K, std::size_t N) {
    for (std::size_t i = 0; i < M; ++i)
        for (std::size_t k = 0; k < K; ++k) {
            const double a = A[i * K + k];
            const double* b = B + k * N;
            double* c = C + i * N;
            for (std::size_t j = 0; j < N; ++j) c[j] += a * b[j];
        }
}

// C[M,N] += A[M,K] * B[N,K]^T. Four independent accumulators keep the
// reduction vectorizable without reassociating within a lane.
inline void gemm_nt(const double* A, const double* B, double* C,
                    std::size_t M, std::size_t K, std::size_t N) {
    for (std::size_t i = 0; i < M; ++i)
        for (std::size_t j = 0; j < N; ++j) {
            const double* a = A + i * K;
            const double* b = B + j * K;
            double acc0 = 0.0, acc1 = 0.0, acc2 = 0.0, acc3 = 0.0;
            std::size_t k = 0;
            for (; k + 4 <= K; k += 4) {
                acc0 += a[k] * b[k];
                acc1 += a[k + 1] * b[k + 1];
                acc2 += a[k + 2] * b[k + 2];
                acc3 += a[k + 3] * b[k + 3];
            }
            double s = (acc0 + acc1) + (acc2 + acc3);
            for (; k < K; ++k) s += a[k] * b[k];
            C[i * N + j] += s;
        }
}

// C[M,N] += A[K,M]^T * B[K,N]
inline void gemm_tn(const double* A, const double* B, double* C,
                    std::size_t M, std::size_t K, std::size_t N) {
    for (std::size_t k = 0; k < K; ++k)
        for (std::size_t i = 0; i < M; ++i) {
            const double a = A[k * M + i];
            const double* b = B + k * N;
            double* c = C + i * N;
            for (std::size_t j = 0; j < N; ++j) c[j] += a * b[j];
        }
}

struct ConvDims {
    std::size_t C, T, H, W;        // input
    std::size_t C2, kT, kH, kW;    // kernel
    std::size_t sT, sH, sW;        // stride
    std::size_t pT, pH, pW;        // zero padding
    std::size_t To, Ho, Wo;        // output
    std::size_t patch() const { return C * kT * kH * kW; }
    std::size_t plane_out() const { return Ho * Wo; }
};

inline ConvDims conv_dims(const Tensor& x, const Tensor& k,
                          std::array<std::size_t, 3> stride,
                          std::array<std::size_t, 3> pad) {
    check_dim(x.rank() == 4, "conv3d: input must be [C,T,H,W]");
    check_dim(k.rank() == 5, "conv3d: kernel must be [C2,C,kT,kH,kW]");
    ConvDims d{};
    d.C = x.dim(0); d.T = x.dim(1); d.H = x.dim(2); d.W = x.dim(3);
    d.C2 = k.dim(0); d.kT = k.dim(2); d.kH = k.dim(3); d.kW = k.dim(4);
    check_dim(k.dim(1) == d.C, "conv3d: kernel input channels (" + std::to_string(k.dim(1)) +
                                   ") differ from input channels (" + std::to_string(d.C) + ")");
    d.sT = stride[0]; d.sH = stride[1]; d.sW = stride[2];
    d.pT = pad[0]; d.pH = pad[1]; d.pW = pad[2];
    check_dim(d.sT >= 1 && d.sH >= 1 && d.sW >= 1, "conv3d: stride components must be >= 1");
    check_dim(d.T + 2 * d.pT >= d.kT && d.H + 2 * d.pH >= d.kH && d.W + 2 * d.pW >= d.kW,
              "conv3d: kernel extent exceeds padded input");
    d.To = (d.T + 2 * d.pT - d.kT) / d.sT + 1;
    d.Ho = (d.H + 2 * d.pH - d.kH) / d.sH + 1;
    d.Wo = (d.W + 2 * d.pW - d.kW) / d.sW + 1;
    return d;
}

// Gather one temporal output slice into col[patch, Ho*Wo].
inline void im2col_slice(const ConvDims& d, const double* x, std::size_t to, double* col) {
    const std::size_t P = d.plane_out();
    for (std::size_t c = 0; c < d.C; ++c)
        for (std::size_t kt = 0; kt < d.kT; ++kt) {
            const long tin = static_cast<long>(to * d.sT + kt) - static_cast<long>(d.pT);
            const bool t_ok = tin >= 0 && tin < static_cast<long>(d.T);
            const double* xplane = x + (c * d.T + static_cast<std::size_t>(t_ok ? tin : 0)) * d.H * d.W;
            for (std::size_t kh = 0; kh < d.kH; ++kh)
                for (std::size_t kw = 0; kw < d.kW; ++kw) {
                    double* row = col + (((c * d.kT + kt) * d.kH + kh) * d.kW + kw) * P;
                    if (!t_ok) {
                        for (std::size_t i = 0; i < P; ++i) row[i] = 0.0;
                        continue;
                    }
                    for (std::size_t y = 0; y < d.Ho; ++y) {
                        const long yin = static_cast<long>(y * d.sH + kh) - static_cast<long>(d.pH);
                        double* out_row = row + y * d.Wo;
                        if (yin < 0 || yin >= static_cast<long>(d.H)) {
                            for (std::size_t xo = 0; xo < d.Wo; ++xo) out_row[xo] = 0.0;
                            continue;
                        }
                        const double* in_row = xplane + static_cast<std::size_t>(yin) * d.W;
                        for (std::size_t xo = 0; xo < d.Wo; ++xo) {
                            const long xin = static_cast<long>(xo * d.sW + kw) - static_cast<long>(d.pW);
                            out_row[xo] = (xin >= 0 && xin < static_cast<long>(d.W))
                                              ? in_row[static_cast<std::size_t>(xin)]
                                              : 0.0;
                        }
                    }
                }
        }
}

// Transposed gather: colT[P, patch]. Contiguous dot products pay off when
// the output plane P is small and the ikj kernel cannot vectorize.
inline void im2col_slice_t(const ConvDims& d, const double* x, std::size_t to, double* colT) {
    const std::size_t K = d.patch();
    for (std::size_t y = 0; y < d.Ho; ++y)
        for (std::size_t xo = 0; xo < d.Wo; ++xo) {
            double* row = colT + (y * d.Wo + xo) * K;
            std::size_t idx = 0;
            for (std::size_t c = 0; c < d.C; ++c)
                for (std::size_t kt = 0; kt < d.kT; ++kt) {
                    const long tin = static_cast<long>(to * d.sT + kt) - static_cast<long>(d.pT);
                    const bool t_ok = tin >= 0 && tin < static_cast<long>(d.T);
                    const double* xplane =
                        x + (c * d.T + static_cast<std::size_t>(t_ok ? tin : 0)) * d.H * d.W;
                    for (std::size_t kh = 0; kh < d.kH; ++kh) {
                        const long yin = static_cast<long>(y * d.sH + kh) - static_cast<long>(d.pH);
                        const bool y_ok = t_ok && yin >= 0 && yin < static_cast<long>(d.H);
                        for (std::size_t kw = 0; kw < d.kW; ++kw, ++idx) {
                            const long xin =
                                static_cast<long>(xo * d.sW + kw) - static_cast<long>(d.pW);
                            row[idx] = (y_ok && xin >= 0 && xin < static_cast<long>(d.W))
                                           ? xplane[static_cast<std::size_t>(yin) * d.W +
                                                    static_cast<std::size_t>(xin)]
                                           : 0.0;
                        }
                    }
                }
        }
}

inline void col2im_slice_add_t(const ConvDims& d, const double* colT, std::size_t to, double* gx) {
    const std::size_t K = d.patch();
    for (std::size_t y = 0; y < d.Ho; ++y)
        for (std::size_t xo = 0; xo < d.Wo; ++xo) {
            const double* row = colT + (y * d.Wo + xo) * K;
            std::size_t idx = 0;
            for (std::size_t c = 0; c < d.C; ++c)
                for (std::size_t kt = 0; kt < d.kT; ++kt) {
                    const long tin = static_cast<long>(to * d.sT + kt) - static_cast<long>(d.pT);
                    const bool t_ok = tin >= 0 && tin < static_cast<long>(d.T);
                    double* xplane =
                        gx + (c * d.T + static_cast<std::size_t>(t_ok ? tin : 0)) * d.H * d.W;
                    for (std::size_t kh = 0; kh < d.kH; ++kh) {
                        const long yin = static_cast<long>(y * d.sH + kh) - static_cast<long>(d.pH);
                        const bool y_ok = t_ok && yin >= 0 && yin < static_cast<long>(d.H);
                        for (std::size_t kw = 0; kw < d.kW; ++kw, ++idx) {
                            const long xin =
                                static_cast<long>(xo * d.sW + kw) - static_cast<long>(d.pW);
                            if (y_ok && xin >= 0 && xin < static_cast<long>(d.W))
                                xplane[static_cast<std::size_t>(yin) * d.W +
                                       static_cast<std::size_t>(xin)] += row[idx];
                        }
                    }
                }
        }
}

inline constexpr std::size_t kSmallPlane = 32;

// Scatter-add the col gradient of one temporal slice back into grad_x.
inline void col2im_slice_add(const ConvDims& d, const double* col, std::size_t to, double* gx) {
    const std::size_t P = d.plane_out();
    for (std::size_t c = 0; c < d.C; ++c)
        for (std::size_t kt = 0; kt < d.kT; ++kt) {
            const long tin = static_cast<long>(to * d.sT + kt) - static_cast<long>(d.pT);
            if (tin < 0 || tin >= static_cast<long>(d.T)) continue;
            double* xplane = gx + (c * d.T + static_cast<std::size_t>(tin)) * d.H * d.W;
            for (std::size_t kh = 0; kh < d.kH; ++kh)
                for (std::size_t kw = 0; kw < d.kW; ++kw) {
                    const double* row = col + (((c * d.kT + kt) * d.kH + kh) * d.kW + kw) * P;
                    for (std::size_t y = 0; y < d.Ho; ++y) {
                        const long yin = static_cast<long>(y * d.sH + kh) - static_cast<long>(d.pH);
                        if (yin < 0 || yin >= static_cast<long>(d.H)) continue;
                        double* in_row = xplane + static_cast<std::size_t>(yin) * d.W;
                        const double* out_row = row + y * d.Wo;
                        for (std::size_t xo = 0; xo < d.Wo; ++xo) {
                            const long xin = static_cast<long>(xo * d.sW + kw) - static_cast<long>(d.pW);
                            if (xin >= 0 && xin < static_cast<long>(d.W))
                                in_row[static_cast<std::size_t>(xin)] += out_row[xo];
                        }
                    }
                }
        }
}

inline Tensor conv3d_forward(const ConvDims& d, const Tensor& x, const Tensor& k) {
    Tensor out({d.C2, d.To, d.Ho, d.Wo});
    const std::size_t P = d.plane_out();
    const std::size_t K = d.patch();
    std::vector<double> col(K * P);
    std::vector<double> slice(d.C2 * P);
    for (std::size_t to = 0; to < d.To; ++to) {
        std::fill(slice.begin(), slice.end(), 0.0);
        if (P >= kSmallPlane) {
            im2col_slice(d, x.data(), to, col.data());
            gemm_nn(k.data(), col.data(), slice.data(), d.C2, K, P);
        } else {
            im2col_slice_t(d, x.data(), to, col.data());
            gemm_nt(k.data(), col.data(), slice.data(), d.C2, K, P);
        }
        for (std::size_t c2 = 0; c2 < d.C2; ++c2)
            std::copy(slice.data() + c2 * P, slice.data() + (c2 + 1) * P,
                      out.data() + (c2 * d.To + to) * P);
    }
    return out;
}

inline void conv3d_backward(const ConvDims& d, const Tensor& x, const Tensor& k,
                            const Tensor& g_out, Tensor* gx, Tensor* gk) {
    const std::size_t P = d.plane_out();
    const std::size_t K = d.patch();
    std::vector<double> col(K * P);
    std::vector<double> gslice(d.C2 * P);
    std::vector<double> gcol(K * P);
    for (std::size_t to = 0; to < d.To; ++to) {
        for (std::size_t c2 = 0; c2 < d.C2; ++c2)
            std::copy(g_out.data() + (c2 * d.To + to) * P,
                      g_out.data() + (c2 * d.To + to) * P + P, gslice.data() + c2 * P);
        if (P >= kSmallPlane) {
            if (gk) {
                im2col_slice(d, x.data(), to, col.data());
                gemm_nt(gslice.data(), col.data(), gk->data(), d.C2, P, K);
            }
            if (gx) {
                std::fill(gcol.begin(), gcol.end(), 0.0);
                gemm_tn(k.data(), gslice.data(), gcol.data(), K, d.C2, P);
                col2im_slice_add(d, gcol.data(), to, gx->data());
            }
        } else {
            if (gk) {
                im2col_slice_t(d, x.data(), to, col.data());
                gemm_nn(gslice.data(), col.data(), gk->data(), d.C2, P, K);
            }
            if (gx) {
                std::fill(gcol.begin(), gcol.end(), 0.0);
                gemm_tn(gslice.data(), k.data(), gcol.data(), P, d.C2, K);
                col2im_slice_add_t(d, gcol.data(), to, gx->data());
            }
        }
    }
}

} // namespace detail

// Zero-padded strided cross-correlation. input [C,T,H,W], kernel
// [C2,C,kT,kH,kW] -> [C2,T',H',W'] with T' = (T+2p-k)/s+1 per axis.
inline Var conv3d(Var x, Var k, std::array<std::size_t, 3> stride = {1, 1, 1},
                  std::array<std::size_t, 3> pad = {0, 0, 0}) {
    Tape& t = *x.tape;
    const detail::ConvDims d = detail::conv_dims(t.value(x.id), t.value(k.id), stride, pad);
    Tensor out = detail::conv3d_forward(d, t.value(x.id), t.value(k.id));
    return t.push(std::move(out), {x.id, k.id}, [d](Tape& t, std::size_t self) {
        const Tensor& g = *t.grad_ptr(self);
        const std::size_t px = t.parents(self)[0], pk = t.parents(self)[1];
        detail::conv3d_backward(d, t.value(px), t.value(pk), g,
                                t.grad_slot(px), t.grad_slot(pk));
    });
}

// 2D specialization: input [C,H,W], kernel [C2,C,kH,kW].
inline Var conv2d_spatial(Var x, Var k, std::array<std::size_t, 2> stride = {1, 1},
                          std::array<std::size_t, 2> pad = {0, 0}) {
    Tape& t = *x.tape;
    const Tensor& xv = t.value(x.id);
    const Tensor& kv = t.value(k.id);
    check_dim(xv.rank() == 3, "conv2d_spatial: input must be [C,H,W]");
    check_dim(kv.rank() == 4, "conv2d_spatial: kernel must be [C2,C,kH,kW]");
    const Tensor x3 = xv.reshaped({xv.dim(0), 1, xv.dim(1), xv.dim(2)});
    const Tensor k3 = kv.reshaped({kv.dim(0), kv.dim(1), 1, kv.dim(2), kv.dim(3)});
    const detail::ConvDims d =
        detail::conv_dims(x3, k3, {1, stride[0], stride[1]}, {0, pad[0], pad[1]});
    Tensor out = detail::conv3d_forward(d, x3, k3).reshaped({d.C2, d.Ho, d.Wo});
    return t.push(std::move(out), {x.id, k.id}, [d](Tape& t, std::size_t self) {
        const Tensor& g = *t.grad_ptr(self);
        const std::size_t px = t.parents(self)[0], pk = t.parents(self)[1];
        const Tensor& xv = t.value(px);
        const Tensor& kv = t.value(pk);
        const Tensor x3 = xv.reshaped({xv.dim(0), 1, xv.dim(1), xv.dim(2)});
        const Tensor k3 = kv.reshaped({kv.dim(0), kv.dim(1), 1, kv.dim(2), kv.dim(3)});
        const Tensor g3 = g.reshaped({d.C2, 1, d.Ho, d.Wo});
        Tensor gx3 = Tensor::zeros(x3.shape());
        Tensor gk3 = Tensor::zeros(k3.shape());
        Tensor* want_gx = t.grad_slot(px);
        Tensor* want_gk = t.grad_slot(pk);
        detail::conv3d_backward(d, x3, k3, g3, want_gx ? &gx3 : nullptr,
                                want_gk ? &gk3 : nullptr);
        if (want_gx) t.accumulate_grad(px, gx3.reshaped(xv.shape()));
        if (want_gk) t.accumulate_grad(pk, gk3.reshaped(kv.shape()));
    });
}

} // namespace ops
} // namespace vmtl
