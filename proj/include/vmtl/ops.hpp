#pragma once

#include <algorithm>
#include <cmath>
#include <utility>
#include <vector>

#include "vmtl/tape.hpp"

namespace vmtl {
namespace ops {

// ---------------------------------------------------------------------------
// Elementwise
// ---------------------------------------------------------------------------

inline Var add(Var a, Var b) {
    Tape& t = *a.tape;
    const Tensor& av = t.value(a.id);
    const Tensor& bv = t.value(b.id);
    check_dim(av.same_shape(bv), "add: shape mismatch " + shape_string(av.shape()) +
                                     " vs " + shape_string(bv.shape()));
    Tensor out(av.shape());
    for (std::size_t i = 0; i < out.numel(); ++i) out[i] = av[i] + bv[i];
    return t.push(std::move(out), {a.id, b.id}, [](Tape& t, std::size_t self) {
        const Tensor& g = *t.grad_ptr(self);
        for (std::size_t p : t.parents(self)) t.accumulate_grad(p, g);
    });
}

inline Var mul(Var a, Var b) {
    Tape& t = *a.tape;
    const Tensor& av = t.value(a.id);
    const Tensor& bv = t.value(b.id);
    check_dim(av.same_shape(bv), "mul: shape mismatch");
    Tensor out(av.shape());
    for (std::size_t i = 0; i < out.numel(); ++i) out[i] = av[i] * bv[i];
    return t.push(std::move(out), {a.id, b.id}, [](Tape& t, std::size_t self) {
        const Tensor& g = *t.grad_ptr(self);
        const std::size_t pa = t.parents(self)[0], pb = t.parents(self)[1];
        const Tensor& av = t.value(pa);
        const Tensor& bv = t.value(pb);
        if (Tensor* ga = t.grad_slot(pa))
            for (std::size_t i = 0; i < g.numel(); ++i) (*ga)[i] += g[i] * bv[i];
        if (Tensor* gb = t.grad_slot(pb))
            for (std::size_t i = 0; i < g.numel(); ++i) (*gb)[i] += g[i] * av[i];
    });
}

inline Var scalar_mul(Var x, double s) {
    Tape& t = *x.tape;
    const Tensor& xv = t.value(x.id);
    Tensor out(xv.shape());
    for (std::size_t i = 0; i < out.numel(); ++i) out[i] = xv[i] * s;
    return t.push(std::move(out), {x.id}, [s](Tape& t, std::size_t self) {
        const Tensor& g = *t.grad_ptr(self);
        if (Tensor* gx = t.grad_slot(t.parents(self)[0]))
            for (std::size_t i = 0; i < g.numel(); ++i) (*gx)[i] += g[i] * s;
    });
}

inline Var add_scalar(Var x, double c) {
    Tape& t = *x.tape;
    const Tensor& xv = t.value(x.id);
    Tensor out(xv.shape());
    for (std::size_t i = 0; i < out.numel(); ++i) out[i] = xv[i] + c;
    return t.push(std::move(out), {x.id}, [](Tape& t, std::size_t self) {
        const Tensor& g = *t.grad_ptr(self);
        t.accumulate_grad(t.parents(self)[0], g);
    });
}

inline Var relu(Var x) {
    Tape& t = *x.tape;
    const Tensor& xv = t.value(x.id);
    Tensor out(xv.shape());
    for (std::size_t i = 0; i < out.numel(); ++i) out[i] = xv[i] > 0.0 ? xv[i] : 0.0;
    return t.push(std::move(out), {x.id}, [](Tape& t, std::size_t self) {
        const Tensor& g = *t.grad_ptr(self);
        const std::size_t p = t.parents(self)[0];
        const Tensor& xv = t.value(p);
        if (Tensor* gx = t.grad_slot(p))
            for (std::size_t i = 0; i < g.numel(); ++i)
                if (xv[i] > 0.0) (*gx)[i] += g[i];
    });
}

inline Var sigmoid(Var x) {
    Tape& t = *x.tape;
    const Tensor& xv = t.value(x.id);
    Tensor out(xv.shape());
    for (std::size_t i = 0; i < out.numel(); ++i) out[i] = 1.0 / (1.0 + std::exp(-xv[i]));
    return t.push(std::move(out), {x.id}, [](Tape& t, std::size_t self) {
        const Tensor& g = *t.grad_ptr(self);
        const Tensor& y = t.value(self);
        if (Tensor* gx = t.grad_slot(t.parents(self)[0]))
            for (std::size_t i = 0; i < g.numel(); ++i) (*gx)[i] += g[i] * y[i] * (1.0 - y[i]);
    });
}

// View with a new shape over the same elements.
inline Var reshape(Var x, std::vector<std::size_t> shape) {
    Tape& t = *x.tape;
    Tensor out = t.value(x.id).reshaped(std::move(shape));
    return t.push(std::move(out), {x.id}, [](Tape& t, std::size_t self) {
        const Tensor& g = *t.grad_ptr(self);
        const std::size_t p = t.parents(self)[0];
        t.accumulate_grad(p, g.reshaped(t.value(p).shape()));
    });
}

// ---------------------------------------------------------------------------
// Structure: concatenation, bias, fully connected
// ---------------------------------------------------------------------------

// Concatenate along dim 0; trailing dims must match.
inline Var concat_channels(const std::vector<Var>& xs) {
    if (xs.empty()) throw ContractError("concat_channels: no inputs");
    Tape& t = *xs[0].tape;
    const auto& first = t.value(xs[0].id).shape();
    check_dim(!first.empty(), "concat_channels: rank-0 input");
    std::size_t c_total = 0;
    std::vector<std::size_t> parents;
    for (const Var& x : xs) {
        const auto& s = t.value(x.id).shape();
        check_dim(s.size() == first.size() &&
                      std::equal(s.begin() + 1, s.end(), first.begin() + 1),
                  "concat_channels: trailing dims differ");
        c_total += s[0];
        parents.push_back(x.id);
    }
    std::vector<std::size_t> out_shape = first;
    out_shape[0] = c_total;
    Tensor out(out_shape);
    std::size_t off = 0;
    for (const Var& x : xs) {
        const Tensor& xv = t.value(x.id);
        std::copy(xv.data(), xv.data() + xv.numel(), out.data() + off);
        off += xv.numel();
    }
    return t.push(std::move(out), std::move(parents), [](Tape& t, std::size_t self) {
        const Tensor& g = *t.grad_ptr(self);
        std::size_t off = 0;
        for (std::size_t p : t.parents(self)) {
            const std::size_t n = t.value(p).numel();
            if (Tensor* gp = t.grad_slot(p))
                for (std::size_t i = 0; i < n; ++i) (*gp)[i] += g[off + i];
            off += n;
        }
    });
}

// x: [C, ...], b: [C] — adds b[c] to every position of channel c.
inline Var add_channel_bias(Var x, Var b) {
    Tape& t = *x.tape;
    const Tensor& xv = t.value(x.id);
    const Tensor& bv = t.value(b.id);
    check_dim(xv.rank() >= 1 && bv.rank() == 1 && bv.dim(0) == xv.dim(0),
              "add_channel_bias: bias length must equal channel count");
    const std::size_t C = xv.dim(0);
    const std::size_t stride = xv.numel() / C;
    Tensor out(xv.shape());
    for (std::size_t c = 0; c < C; ++c)
        for (std::size_t i = 0; i < stride; ++i)
            out[c * stride + i] = xv[c * stride + i] + bv[c];
    return t.push(std::move(out), {x.id, b.id}, [C, stride](Tape& t, std::size_t self) {
        const Tensor& g = *t.grad_ptr(self);
        t.accumulate_grad(t.parents(self)[0], g);
        if (Tensor* gb = t.grad_slot(t.parents(self)[1]))
            for (std::size_t c = 0; c < C; ++c) {
                double s = 0.0;
                for (std::size_t i = 0; i < stride; ++i) s += g[c * stride + i];
                (*gb)[c] += s;
            }
    });
}

// x: [in], w: [out,in], b: [out] -> [out]
inline Var fully_connected(Var x, Var w, Var b) {
    Tape& t = *x.tape;
    const Tensor& xv = t.value(x.id);
    const Tensor& wv = t.value(w.id);
    const Tensor& bv = t.value(b.id);
    check_dim(xv.rank() == 1 && wv.rank() == 2 && bv.rank() == 1, "fully_connected: bad ranks");
    const std::size_t in = xv.dim(0), out_n = wv.dim(0);
    check_dim(wv.dim(1) == in && bv.dim(0) == out_n, "fully_connected: shape mismatch");
    Tensor out({out_n});
    for (std::size_t o = 0; o < out_n; ++o) {
        double s = bv[o];
        const double* row = wv.data() + o * in;
        for (std::size_t i = 0; i < in; ++i) s += row[i] * xv[i];
        out[o] = s;
    }
    return t.push(std::move(out), {x.id, w.id, b.id}, [in, out_n](Tape& t, std::size_t self) {
        const Tensor& g = *t.grad_ptr(self);
        const std::size_t px = t.parents(self)[0], pw = t.parents(self)[1], pb = t.parents(self)[2];
        const Tensor& xv = t.value(px);
        const Tensor& wv = t.value(pw);
        if (Tensor* gx = t.grad_slot(px))
            for (std::size_t o = 0; o < out_n; ++o) {
                const double* row = wv.data() + o * in;
                for (std::size_t i = 0; i < in; ++i) (*gx)[i] += g[o] * row[i];
            }
        if (Tensor* gw = t.grad_slot(pw))
            for (std::size_t o = 0; o < out_n; ++o)
                for (std::size_t i = 0; i < in; ++i) (*gw)[o * in + i] += g[o] * xv[i];
        if (Tensor* gb = t.grad_slot(pb))
            for (std::size_t o = 0; o < out_n; ++o) (*gb)[o] += g[o];
    });
}

// ---------------------------------------------------------------------------
// Normalization
// ---------------------------------------------------------------------------

// Per-channel normalization with learned scale/shift, normalized by the
// running statistics. Training is sample-at-a-time here (effective batches
// are accumulated gradients), so normalizing by per-sample statistics would
// divide out cross-sample scale differences; instead the running averages
// carry the statistics. In training mode the stats observed on the sample
// update the running averages with momentum 0.1 *after* normalization, so
// the output depends on the input only through the numerator and the
// constant-stat backward is exact. Channels with a single position skip the
// variance update.
inline Var batch_norm(Var x, Var gamma, Var beta, Tensor& running_mean, Tensor& running_var,
                      bool training, double momentum = 0.1, double eps = 1e-5) {
    Tape& t = *x.tape;
    const Tensor& xv = t.value(x.id);
    const Tensor& gv = t.value(gamma.id);
    const Tensor& bv = t.value(beta.id);
    check_dim(xv.rank() >= 1, "batch_norm: rank-0 input");
    const std::size_t C = xv.dim(0);
    const std::size_t stride = xv.numel() / C;
    check_dim(gv.rank() == 1 && gv.dim(0) == C && bv.rank() == 1 && bv.dim(0) == C,
              "batch_norm: scale/shift length must equal channel count");
    check_dim(running_mean.rank() == 1 && running_mean.dim(0) == C &&
                  running_var.rank() == 1 && running_var.dim(0) == C,
              "batch_norm: running stats length must equal channel count");

    std::vector<double> mean(C), var(C);
    for (std::size_t c = 0; c < C; ++c) {
        mean[c] = running_mean[c];
        var[c] = running_var[c];
    }

    Tensor out(xv.shape());
    for (std::size_t c = 0; c < C; ++c) {
        const double inv = 1.0 / std::sqrt(var[c] + eps);
        const double* px = xv.data() + c * stride;
        double* po = out.data() + c * stride;
        for (std::size_t i = 0; i < stride; ++i)
            po[i] = gv[c] * (px[i] - mean[c]) * inv + bv[c];
    }

    if (training) {
        for (std::size_t c = 0; c < C; ++c) {
            double m = 0.0;
            const double* px = xv.data() + c * stride;
            for (std::size_t i = 0; i < stride; ++i) m += px[i];
            m /= static_cast<double>(stride);
            running_mean[c] = (1.0 - momentum) * running_mean[c] + momentum * m;
            if (stride > 1) {
                double v = 0.0;
                for (std::size_t i = 0; i < stride; ++i) {
                    const double d = px[i] - m;
                    v += d * d;
                }
                v /= static_cast<double>(stride);
                running_var[c] = (1.0 - momentum) * running_var[c] + momentum * v;
            }
        }
    }

    return t.push(std::move(out), {x.id, gamma.id, beta.id},
                  [C, stride, eps, mean, var](Tape& t, std::size_t self) {
        const Tensor& g = *t.grad_ptr(self);
        const std::size_t px_id = t.parents(self)[0];
        const std::size_t pg_id = t.parents(self)[1];
        const std::size_t pb_id = t.parents(self)[2];
        const Tensor& xv = t.value(px_id);
        const Tensor& gv = t.value(pg_id);
        Tensor* gx = t.grad_slot(px_id);
        Tensor* gg = t.grad_slot(pg_id);
        Tensor* gb = t.grad_slot(pb_id);
        for (std::size_t c = 0; c < C; ++c) {
            const double inv = 1.0 / std::sqrt(var[c] + eps);
            const double* pxv = xv.data() + c * stride;
            const double* pgr = g.data() + c * stride;
            double sum_g = 0.0, sum_gxhat = 0.0;
            for (std::size_t i = 0; i < stride; ++i) {
                const double xhat = (pxv[i] - mean[c]) * inv;
                sum_g += pgr[i];
                sum_gxhat += pgr[i] * xhat;
            }
            if (gb) (*gb)[c] += sum_g;
            if (gg) (*gg)[c] += sum_gxhat;
            if (gx) {
                double* pgx = gx->data() + c * stride;
                const double scale = gv[c] * inv;
                for (std::size_t i = 0; i < stride; ++i) pgx[i] += scale * pgr[i];
            }
        }
    });
}

// ---------------------------------------------------------------------------
// Softmax
// ---------------------------------------------------------------------------

namespace detail {

// Max-subtracted softmax over all elements, any shape.
inline Var softmax_flat(Var x, const char* name) {
    Tape& t = *x.tape;
    const Tensor& xv = t.value(x.id);
    check_dim(xv.numel() >= 1, std::string(name) + ": empty input");
    double mx = xv[0];
    for (std::size_t i = 1; i < xv.numel(); ++i) mx = std::max(mx, xv[i]);
    Tensor out(xv.shape());
    double z = 0.0;
    for (std::size_t i = 0; i < xv.numel(); ++i) {
        out[i] = std::exp(xv[i] - mx);
        z += out[i];
    }
    for (std::size_t i = 0; i < out.numel(); ++i) out[i] /= z;
    return t.push(std::move(out), {x.id}, [](Tape& t, std::size_t self) {
        const Tensor& g = *t.grad_ptr(self);
        const Tensor& y = t.value(self);
        if (Tensor* gx = t.grad_slot(t.parents(self)[0])) {
            double dot = 0.0;
            for (std::size_t i = 0; i < g.numel(); ++i) dot += g[i] * y[i];
            for (std::size_t i = 0; i < g.numel(); ++i) (*gx)[i] += y[i] * (g[i] - dot);
        }
    });
}

} // namespace detail

inline Var softmax_vector(Var x) {
    check_dim(x.value().rank() == 1, "softmax_vector: expects rank-1 input");
    return detail::softmax_flat(x, "softmax_vector");
}

// Probability map over all pixels of a 2D activation; entries sum to 1.
inline Var spatial_softmax(Var a) {
    check_dim(a.value().rank() == 2, "spatial_softmax: expects rank-2 input");
    return detail::softmax_flat(a, "spatial_softmax");
}

// ---------------------------------------------------------------------------
// Pooling
// ---------------------------------------------------------------------------

// [C,T,H,W] -> [C,H,W], mean over time.
inline Var temporal_avg_pool(Var x) {
    Tape& t = *x.tape;
    const Tensor& xv = t.value(x.id);
    check_dim(xv.rank() == 4, "temporal_avg_pool: expects [C,T,H,W]");
    const std::size_t C = xv.dim(0), T = xv.dim(1), H = xv.dim(2), W = xv.dim(3);
    Tensor out({C, H, W});
    const std::size_t plane = H * W;
    for (std::size_t c = 0; c < C; ++c)
        for (std::size_t tt = 0; tt < T; ++tt) {
            const double* src = xv.data() + (c * T + tt) * plane;
            double* dst = out.data() + c * plane;
            for (std::size_t i = 0; i < plane; ++i) dst[i] += src[i];
        }
    for (std::size_t i = 0; i < out.numel(); ++i) out[i] /= static_cast<double>(T);
    return t.push(std::move(out), {x.id}, [C, T, plane](Tape& t, std::size_t self) {
        const Tensor& g = *t.grad_ptr(self);
        if (Tensor* gx = t.grad_slot(t.parents(self)[0])) {
            const double inv = 1.0 / static_cast<double>(T);
            for (std::size_t c = 0; c < C; ++c)
                for (std::size_t tt = 0; tt < T; ++tt) {
                    double* dst = gx->data() + (c * T + tt) * plane;
                    const double* src = g.data() + c * plane;
                    for (std::size_t i = 0; i < plane; ++i) dst[i] += src[i] * inv;
                }
        }
    });
}

// [C,T,H,W] -> [C], mean over every position of the channel. Feeds the
// fixed-size fully connected layers regardless of spatial resolution.
inline Var global_avg_pool(Var x) {
    Tape& t = *x.tape;
    const Tensor& xv = t.value(x.id);
    check_dim(xv.rank() == 4, "global_avg_pool: expects [C,T,H,W]");
    const std::size_t C = xv.dim(0);
    const std::size_t stride = xv.numel() / C;
    Tensor out({C});
    for (std::size_t c = 0; c < C; ++c) {
        double s = 0.0;
        const double* src = xv.data() + c * stride;
        for (std::size_t i = 0; i < stride; ++i) s += src[i];
        out[c] = s / static_cast<double>(stride);
    }
    return t.push(std::move(out), {x.id}, [C, stride](Tape& t, std::size_t self) {
        const Tensor& g = *t.grad_ptr(self);
        if (Tensor* gx = t.grad_slot(t.parents(self)[0])) {
            const double inv = 1.0 / static_cast<double>(stride);
            for (std::size_t c = 0; c < C; ++c) {
                double* dst = gx->data() + c * stride;
                for (std::size_t i = 0; i < stride; ++i) dst[i] += g[c] * inv;
            }
        }
    });
}

// ---------------------------------------------------------------------------
// Bilinear upsampling (corner-aligned)
// ---------------------------------------------------------------------------

namespace detail {

struct LerpAxis {
    std::vector<std::size_t> i0, i1;
    std::vector<double> w1; // weight on i1; weight on i0 is 1-w1
};

inline LerpAxis lerp_axis(std::size_t in, std::size_t out) {
    LerpAxis ax;
    ax.i0.resize(out);
    ax.i1.resize(out);
    ax.w1.resize(out);
    for (std::size_t o = 0; o < out; ++o) {
        double src = 0.0;
        if (out > 1 && in > 1)
            src = static_cast<double>(o) * static_cast<double>(in - 1) /
                  static_cast<double>(out - 1);
        const auto lo = static_cast<std::size_t>(std::floor(src));
        ax.i0[o] = lo;
        ax.i1[o] = std::min(lo + 1, in - 1);
        ax.w1[o] = src - static_cast<double>(lo);
    }
    return ax;
}

} // namespace detail

// [C,h,w] -> [C,H,W] (or [h,w] -> [H,W]); target must not shrink either axis.
inline Var upsample_bilinear(Var x, std::size_t H, std::size_t W) {
    Tape& t = *x.tape;
    const Tensor& xv = t.value(x.id);
    check_dim(xv.rank() == 2 || xv.rank() == 3, "upsample_bilinear: expects [h,w] or [C,h,w]");
    const bool has_c = xv.rank() == 3;
    const std::size_t C = has_c ? xv.dim(0) : 1;
    const std::size_t h = has_c ? xv.dim(1) : xv.dim(0);
    const std::size_t w = has_c ? xv.dim(2) : xv.dim(1);
    check_dim(H >= h && W >= w, "upsample_bilinear: target smaller than input");

    const detail::LerpAxis ay = detail::lerp_axis(h, H);
    const detail::LerpAxis ax = detail::lerp_axis(w, W);
    std::vector<std::size_t> out_shape = has_c ? std::vector<std::size_t>{C, H, W}
                                               : std::vector<std::size_t>{H, W};
    Tensor out(out_shape);
    for (std::size_t c = 0; c < C; ++c) {
        const double* src = xv.data() + c * h * w;
        double* dst = out.data() + c * H * W;
        for (std::size_t y = 0; y < H; ++y) {
            const std::size_t y0 = ay.i0[y], y1 = ay.i1[y];
            const double fy = ay.w1[y];
            for (std::size_t xo = 0; xo < W; ++xo) {
                const std::size_t x0 = ax.i0[xo], x1 = ax.i1[xo];
                const double fx = ax.w1[xo];
                dst[y * W + xo] = (1.0 - fy) * ((1.0 - fx) * src[y0 * w + x0] + fx * src[y0 * w + x1]) +
                                  fy * ((1.0 - fx) * src[y1 * w + x0] + fx * src[y1 * w + x1]);
            }
        }
    }
    return t.push(std::move(out), {x.id}, [C, h, w, H, W, ay, ax](Tape& t, std::size_t self) {
        const Tensor& g = *t.grad_ptr(self);
        if (Tensor* gx = t.grad_slot(t.parents(self)[0])) {
            for (std::size_t c = 0; c < C; ++c) {
                const double* src = g.data() + c * H * W;
                double* dst = gx->data() + c * h * w;
                for (std::size_t y = 0; y < H; ++y) {
                    const std::size_t y0 = ay.i0[y], y1 = ay.i1[y];
                    const double fy = ay.w1[y];
                    for (std::size_t xo = 0; xo < W; ++xo) {
                        const std::size_t x0 = ax.i0[xo], x1 = ax.i1[xo];
                        const double fx = ax.w1[xo];
                        const double gg = src[y * W + xo];
                        dst[y0 * w + x0] += (1.0 - fy) * (1.0 - fx) * gg;
                        dst[y0 * w + x1] += (1.0 - fy) * fx * gg;
                        dst[y1 * w + x0] += fy * (1.0 - fx) * gg;
                        dst[y1 * w + x1] += fy * fx * gg;
                    }
                }
            }
        }
    });
}

// ---------------------------------------------------------------------------
// Attention modulation
// ---------------------------------------------------------------------------

// x: [C,T,h,w], m: [h,w] -> (1 + m) ⊙ x, m broadcast over channels and time.
inline Var scale_by_map(Var x, Var m) {
    Tape& t = *x.tape;
    const Tensor& xv = t.value(x.id);
    const Tensor& mv = t.value(m.id);
    check_dim(xv.rank() == 4 && mv.rank() == 2, "scale_by_map: expects [C,T,h,w] and [h,w]");
    check_dim(xv.dim(2) == mv.dim(0) && xv.dim(3) == mv.dim(1),
              "scale_by_map: spatial dims differ");
    const std::size_t C = xv.dim(0), T = xv.dim(1), plane = mv.numel();
    Tensor out(xv.shape());
    for (std::size_t ct = 0; ct < C * T; ++ct) {
        const double* src = xv.data() + ct * plane;
        double* dst = out.data() + ct * plane;
        for (std::size_t i = 0; i < plane; ++i) dst[i] = (1.0 + mv[i]) * src[i];
    }
    return t.push(std::move(out), {x.id, m.id}, [C, T, plane](Tape& t, std::size_t self) {
        const Tensor& g = *t.grad_ptr(self);
        const std::size_t px = t.parents(self)[0], pm = t.parents(self)[1];
        const Tensor& xv = t.value(px);
        const Tensor& mv = t.value(pm);
        if (Tensor* gx = t.grad_slot(px))
            for (std::size_t ct = 0; ct < C * T; ++ct) {
                const double* src = g.data() + ct * plane;
                double* dst = gx->data() + ct * plane;
                for (std::size_t i = 0; i < plane; ++i) dst[i] += (1.0 + mv[i]) * src[i];
            }
        if (Tensor* gm = t.grad_slot(pm))
            for (std::size_t ct = 0; ct < C * T; ++ct) {
                const double* gsrc = g.data() + ct * plane;
                const double* xsrc = xv.data() + ct * plane;
                for (std::size_t i = 0; i < plane; ++i) (*gm)[i] += gsrc[i] * xsrc[i];
            }
    });
}

// ---------------------------------------------------------------------------
// Reductions to scalar
// ---------------------------------------------------------------------------

inline Var sum_all(Var x) {
    Tape& t = *x.tape;
    const Tensor& xv = t.value(x.id);
    double s = 0.0;
    for (std::size_t i = 0; i < xv.numel(); ++i) s += xv[i];
    return t.push(Tensor::scalar(s), {x.id}, [](Tape& t, std::size_t self) {
        const double g = (*t.grad_ptr(self))[0];
        if (Tensor* gx = t.grad_slot(t.parents(self)[0]))
            for (std::size_t i = 0; i < gx->numel(); ++i) (*gx)[i] += g;
    });
}

inline Var mean_all(Var x) {
    Tape& t = *x.tape;
    const Tensor& xv = t.value(x.id);
    const double n = static_cast<double>(xv.numel());
    double s = 0.0;
    for (std::size_t i = 0; i < xv.numel(); ++i) s += xv[i];
    return t.push(Tensor::scalar(s / n), {x.id}, [n](Tape& t, std::size_t self) {
        const double g = (*t.grad_ptr(self))[0] / n;
        if (Tensor* gx = t.grad_slot(t.parents(self)[0]))
            for (std::size_t i = 0; i < gx->numel(); ++i) (*gx)[i] += g;
    });
}

} // namespace ops
} // namespace vmtl
