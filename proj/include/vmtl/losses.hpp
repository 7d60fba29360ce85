#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "vmtl/ops.hpp"
#include "vmtl/tape.hpp"

namespace vmtl {

// Per-clip saliency ground truth at network output resolution.
struct SaliencyTarget {
    Tensor fix; // binary fixation map {0,1}
    Tensor den; // dense map in [0,1]
    Tensor thr; // thresholded dense map {0,1}
};

// Sub-loss weights, task weights and the summarization positive weight.
struct LossWeights {
    double w_ce = 0.1;
    double w_cc = 2.0;
    double w_nss = 1.0;
    double alpha_sal = 0.1;
    double alpha_act = 1.0;
    double alpha_sum = 1.0;
    double gamma = 3.06;
    double dense_threshold = 0.5; // fraction of the map peak
};

namespace detail {

struct MapStats {
    double mean = 0.0;
    double sd = 0.0; // population standard deviation
};

inline MapStats map_stats(const Tensor& m) {
    const std::size_t n = m.numel();
    double mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) mean += m[i];
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double d = m[i] - mean;
        var += d * d;
    }
    var /= static_cast<double>(n);
    return {mean, std::sqrt(var)};
}

inline bool is_constant(const Tensor& m) {
    for (std::size_t i = 1; i < m.numel(); ++i)
        if (m[i] != m[0]) return false;
    return true;
}

// Pearson linear correlation with population statistics. Shared by the CC
// loss and the CC metric so the two are bitwise negations of each other.
inline double pearson_corr(const Tensor& p, const Tensor& y) {
    check_dim(p.same_shape(y), "pearson: map shapes differ");
    const std::size_t n = p.numel();
    if (is_constant(p)) throw ValueError("pearson: prediction map has zero variance");
    if (is_constant(y)) throw ValueError("pearson: target map has zero variance");
    const MapStats sp = map_stats(p);
    const MapStats sy = map_stats(y);
    double cov = 0.0;
    for (std::size_t i = 0; i < n; ++i) cov += (p[i] - sp.mean) * (y[i] - sy.mean);
    cov /= static_cast<double>(n);
    return cov / (sp.sd * sy.sd);
}

// Mean of the standardized prediction at fixated pixels. Shared by the NSS
// loss and metric.
inline double nss_score(const Tensor& p, const Tensor& fix) {
    check_dim(p.same_shape(fix), "nss: map shapes differ");
    if (is_constant(p)) throw ValueError("nss: prediction map has zero variance");
    const MapStats sp = map_stats(p);
    double s = 0.0;
    std::size_t nf = 0;
    for (std::size_t i = 0; i < p.numel(); ++i) {
        if (fix[i] != 0.0) {
            s += (p[i] - sp.mean) / sp.sd;
            ++nf;
        }
    }
    if (nf == 0) throw ValueError("nss: no fixation points");
    return s / static_cast<double>(nf);
}

constexpr double kProbFloor = 1e-12;

} // namespace detail

// Pixel class counts and the imbalance weight beta = |neg| / (|pos|+|neg|).
struct ClassBalance {
    double beta = 0.0;
    std::size_t n_pos = 0;
    std::size_t n_neg = 0;
};

inline ClassBalance class_balance(const Tensor& target) {
    ClassBalance b;
    for (std::size_t i = 0; i < target.numel(); ++i)
        (target[i] != 0.0 ? b.n_pos : b.n_neg) += 1;
    if (b.n_pos == 0 || b.n_neg == 0)
        throw ValueError("class_balance: degenerate target (needs both classes)");
    b.beta = static_cast<double>(b.n_neg) / static_cast<double>(b.n_pos + b.n_neg);
    return b;
}

namespace ops {

// Class-balanced pixelwise cross-entropy: with beta = |neg|/(|pos|+|neg|),
//   L = -beta * sum_pos log P - (1-beta) * sum_neg log(1-P).
// P must already be in (0,1); the target must contain both classes.
inline Var balanced_ce_map(Var p, const Tensor& target) {
    Tape& t = *p.tape;
    const Tensor& pv = t.value(p.id);
    check_dim(pv.same_shape(target), "balanced_ce_map: shape mismatch");
    const double beta = class_balance(target).beta;

    double loss = 0.0;
    for (std::size_t i = 0; i < pv.numel(); ++i) {
        const double pi = std::min(std::max(pv[i], vmtl::detail::kProbFloor), 1.0 - vmtl::detail::kProbFloor);
        loss += target[i] != 0.0 ? -beta * std::log(pi) : -(1.0 - beta) * std::log(1.0 - pi);
    }
    return t.push(Tensor::scalar(loss), {p.id}, [target, beta](Tape& t, std::size_t self) {
        const double g = (*t.grad_ptr(self))[0];
        const std::size_t pp = t.parents(self)[0];
        const Tensor& pv = t.value(pp);
        if (Tensor* gp = t.grad_slot(pp))
            for (std::size_t i = 0; i < pv.numel(); ++i) {
                if (pv[i] <= vmtl::detail::kProbFloor || pv[i] >= 1.0 - vmtl::detail::kProbFloor) continue;
                (*gp)[i] += target[i] != 0.0 ? g * (-beta / pv[i])
                                             : g * ((1.0 - beta) / (1.0 - pv[i]));
            }
    });
}

// Negative Pearson correlation against the dense map; in [-1, 1].
inline Var cc_loss(Var p, const Tensor& den) {
    Tape& t = *p.tape;
    const Tensor& pv = t.value(p.id);
    const double corr = vmtl::detail::pearson_corr(pv, den);
    return t.push(Tensor::scalar(-corr), {p.id}, [den, corr](Tape& t, std::size_t self) {
        const double g = (*t.grad_ptr(self))[0];
        const std::size_t pp = t.parents(self)[0];
        const Tensor& pv = t.value(pp);
        if (Tensor* gp = t.grad_slot(pp)) {
            const std::size_t n = pv.numel();
            const auto sp = vmtl::detail::map_stats(pv);
            const auto sy = vmtl::detail::map_stats(den);
            const double cov = corr * sp.sd * sy.sd;
            const double denom = static_cast<double>(n) * sp.sd * sy.sd;
            for (std::size_t i = 0; i < n; ++i) {
                const double d = (den[i] - sy.mean) -
                                 cov * (pv[i] - sp.mean) / (sp.sd * sp.sd);
                (*gp)[i] += g * (-d / denom);
            }
        }
    });
}

// Negative mean standardized prediction at fixation pixels.
inline Var nss_loss(Var p, const Tensor& fix) {
    Tape& t = *p.tape;
    const Tensor& pv = t.value(p.id);
    const double score = vmtl::detail::nss_score(pv, fix);
    return t.push(Tensor::scalar(-score), {p.id}, [fix](Tape& t, std::size_t self) {
        const double g = (*t.grad_ptr(self))[0];
        const std::size_t pp = t.parents(self)[0];
        const Tensor& pv = t.value(pp);
        if (Tensor* gp = t.grad_slot(pp)) {
            const std::size_t n = pv.numel();
            const auto sp = vmtl::detail::map_stats(pv);
            double nf = 0.0, sum_fix_dev = 0.0;
            for (std::size_t i = 0; i < n; ++i)
                if (fix[i] != 0.0) {
                    nf += 1.0;
                    sum_fix_dev += pv[i] - sp.mean;
                }
            for (std::size_t i = 0; i < n; ++i) {
                const double in_f = fix[i] != 0.0 ? 1.0 : 0.0;
                const double dd = (in_f - nf / static_cast<double>(n)) / (nf * sp.sd) -
                                  sum_fix_dev * (pv[i] - sp.mean) /
                                      (nf * static_cast<double>(n) * sp.sd * sp.sd * sp.sd);
                (*gp)[i] += g * (-dd);
            }
        }
    });
}

// Multi-class cross-entropy on raw logits, log-sum-exp stabilized.
inline Var action_ce(Var logits, std::size_t cls) {
    Tape& t = *logits.tape;
    const Tensor& lv = t.value(logits.id);
    check_dim(lv.rank() == 1, "action_ce: logits must be rank 1");
    if (cls >= lv.dim(0)) throw ContractError("action_ce: class index out of range");
    double mx = lv[0];
    for (std::size_t i = 1; i < lv.numel(); ++i) mx = std::max(mx, lv[i]);
    double z = 0.0;
    for (std::size_t i = 0; i < lv.numel(); ++i) z += std::exp(lv[i] - mx);
    const double loss = std::log(z) + mx - lv[cls];
    return t.push(Tensor::scalar(loss), {logits.id}, [cls, mx, z](Tape& t, std::size_t self) {
        const double g = (*t.grad_ptr(self))[0];
        const std::size_t pl = t.parents(self)[0];
        const Tensor& lv = t.value(pl);
        if (Tensor* gl = t.grad_slot(pl))
            for (std::size_t i = 0; i < lv.numel(); ++i) {
                const double soft = std::exp(lv[i] - mx) / z;
                (*gl)[i] += g * (soft - (i == cls ? 1.0 : 0.0));
            }
    });
}

namespace detail2 {
inline double softplus(double x) { return std::log1p(std::exp(-std::abs(x))) + std::max(x, 0.0); }
} // namespace detail2

// Importance-weighted binary cross-entropy on a raw logit:
//   L = -gamma*y*log(sigmoid(z)) - (1-y)*log(1-sigmoid(z)),
// evaluated through softplus so large |z| stays finite.
inline Var weighted_bce(Var logit, double y, double gamma) {
    Tape& t = *logit.tape;
    const Tensor& lv = t.value(logit.id);
    check_dim(lv.numel() == 1, "weighted_bce: logit must be scalar");
    const double z = lv[0];
    const double loss = gamma * y * detail2::softplus(-z) + (1.0 - y) * detail2::softplus(z);
    return t.push(Tensor::scalar(loss), {logit.id}, [y, gamma](Tape& t, std::size_t self) {
        const double g = (*t.grad_ptr(self))[0];
        const std::size_t pl = t.parents(self)[0];
        if (Tensor* gl = t.grad_slot(pl)) {
            const double z = t.value(pl)[0];
            const double sig = 1.0 / (1.0 + std::exp(-z));
            (*gl)[0] += g * (gamma * y * (sig - 1.0) + (1.0 - y) * sig);
        }
    });
}

// Deep-supervision saliency loss: each sub-loss is evaluated on the sigmoid
// of the fused map and of every level's activation map, the per-metric sums
// are then combined as w_ce*CE + w_cc*CC + w_nss*NSS.
inline Var saliency_total(Var fused_logits, const std::vector<Var>& level_logits,
                          const SaliencyTarget& target, const LossWeights& w) {
    std::vector<Var> maps;
    maps.push_back(sigmoid(fused_logits));
    for (Var a : level_logits) maps.push_back(sigmoid(a));

    Var ce = balanced_ce_map(maps[0], target.thr);
    Var cc = cc_loss(maps[0], target.den);
    Var nss = nss_loss(maps[0], target.fix);
    for (std::size_t m = 1; m < maps.size(); ++m) {
        ce = add(ce, balanced_ce_map(maps[m], target.thr));
        cc = add(cc, cc_loss(maps[m], target.den));
        nss = add(nss, nss_loss(maps[m], target.fix));
    }
    return add(add(scalar_mul(ce, w.w_ce), scalar_mul(cc, w.w_cc)),
               scalar_mul(nss, w.w_nss));
}

// alpha-weighted sum of per-task losses over a batch; absent tasks contribute 0.
inline Var multitask_total(const std::vector<Var>& sal, const std::vector<Var>& act,
                           const std::vector<Var>& sum, const LossWeights& w) {
    if (sal.empty() && act.empty() && sum.empty())
        throw ContractError("multitask_total: no task losses given");
    Var total;
    auto fold = [&](const std::vector<Var>& xs, double alpha) {
        if (xs.empty()) return;
        Var s = xs[0];
        for (std::size_t i = 1; i < xs.size(); ++i) s = add(s, xs[i]);
        s = scalar_mul(s, alpha);
        total = total.valid() ? add(total, s) : s;
    };
    fold(sal, w.alpha_sal);
    fold(act, w.alpha_act);
    fold(sum, w.alpha_sum);
    return total;
}

} // namespace ops

// Binarize a dense map at a fraction of its peak: 1 where den >= theta*max.
inline Tensor threshold_dense(const Tensor& den, double theta) {
    double mx = 0.0;
    for (std::size_t i = 0; i < den.numel(); ++i) mx = std::max(mx, den[i]);
    if (mx == 0.0) throw ValueError("threshold_dense: dense map is all zero");
    const double cut = theta * mx;
    Tensor out(den.shape());
    for (std::size_t i = 0; i < den.numel(); ++i) out[i] = den[i] >= cut ? 1.0 : 0.0;
    return out;
}

} // namespace vmtl
