#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "vmtl/conv.hpp"
#include "vmtl/losses.hpp"
#include "vmtl/ops.hpp"
#include "vmtl/rng.hpp"
#include "vmtl/tape.hpp"

namespace vmtl {
namespace gradcheck {

// Builds a scalar objective from leaves bound to the input tensors.
using BuildFn = std::function<Var(Tape&, std::vector<Var>&)>;

inline double eval_objective(const std::vector<Tensor>& inputs, const BuildFn& build) {
    Tape tape;
    std::vector<Var> vars;
    vars.reserve(inputs.size());
    for (const Tensor& in : inputs) vars.push_back(tape.leaf(in, false));
    return build(tape, vars).value().item();
}

// Central finite differences against the analytic backward pass. Returns
// max over all input entries of |analytic - numeric| / max(1, |numeric|).
inline double finite_diff_check(const std::vector<Tensor>& inputs, const BuildFn& build,
                                double eps = 1e-5) {
    Tape tape;
    std::vector<Var> vars;
    vars.reserve(inputs.size());
    for (const Tensor& in : inputs) vars.push_back(tape.leaf(in, true));
    Var root = build(tape, vars);
    if (root.value().numel() != 1)
        throw ContractError("finite_diff_check: objective must be scalar");
    tape.backward(root);

    double max_err = 0.0;
    std::vector<Tensor> pert = inputs;
    for (std::size_t i = 0; i < inputs.size(); ++i) {
        const Tensor* g = tape.grad(vars[i]);
        for (std::size_t j = 0; j < inputs[i].numel(); ++j) {
            const double orig = pert[i][j];
            pert[i][j] = orig + eps;
            const double fp = eval_objective(pert, build);
            pert[i][j] = orig - eps;
            const double fm = eval_objective(pert, build);
            pert[i][j] = orig;
            const double fd = (fp - fm) / (2.0 * eps);
            const double an = g ? (*g)[j] : 0.0;
            const double err = std::abs(an - fd) / std::max(1.0, std::abs(fd));
            max_err = std::max(max_err, err);
        }
    }
    return max_err;
}

namespace detail {

inline Tensor random_tensor(Rng& rng, std::vector<std::size_t> shape, double lo = -1.0,
                            double hi = 1.0) {
    Tensor t(std::move(shape));
    for (std::size_t i = 0; i < t.numel(); ++i) t[i] = rng.uniform(lo, hi);
    return t;
}

} // namespace detail

// One registered differentiability check; run() returns the max relative
// error over `instances` random instances.
struct OpCheck {
    std::string name;
    std::function<double(Rng&, int instances)> run;
};

// Every differentiable op and loss, each exactly once.
inline std::vector<OpCheck> standard_checks() {
    using detail::random_tensor;
    std::vector<OpCheck> checks;

    auto simple = [&](const std::string& name, auto make_inputs, auto apply) {
        checks.push_back(OpCheck{
            name, [make_inputs, apply](Rng& rng, int instances) {
                double worst = 0.0;
                for (int k = 0; k < instances; ++k) {
                    std::vector<Tensor> inputs = make_inputs(rng);
                    // Fix the output weighting for this instance so repeated
                    // objective evaluations are consistent.
                    Tensor w;
                    {
                        Tape scratch;
                        std::vector<Var> v;
                        for (const Tensor& in : inputs) v.push_back(scratch.leaf(in, false));
                        w = random_tensor(rng, apply(scratch, v).value().shape());
                    }
                    const double err = finite_diff_check(
                        inputs, [&apply, &w](Tape& t, std::vector<Var>& v) {
                            return ops::sum_all(ops::mul(apply(t, v), t.constant(w)));
                        });
                    worst = std::max(worst, err);
                }
                return worst;
            }});
    };

    auto shp = [](Rng& rng) {
        return std::vector<std::size_t>{2 + rng.below(3), 2 + rng.below(3)};
    };

    simple("add",
           [shp](Rng& rng) {
               auto s = shp(rng);
               return std::vector<Tensor>{random_tensor(rng, s), random_tensor(rng, s)};
           },
           [](Tape&, std::vector<Var>& v) { return ops::add(v[0], v[1]); });
    simple("mul",
           [shp](Rng& rng) {
               auto s = shp(rng);
               return std::vector<Tensor>{random_tensor(rng, s), random_tensor(rng, s)};
           },
           [](Tape&, std::vector<Var>& v) { return ops::mul(v[0], v[1]); });
    simple("scalar_mul",
           [shp](Rng& rng) { return std::vector<Tensor>{random_tensor(rng, shp(rng))}; },
           [](Tape&, std::vector<Var>& v) { return ops::scalar_mul(v[0], 0.37); });
    simple("add_scalar",
           [shp](Rng& rng) { return std::vector<Tensor>{random_tensor(rng, shp(rng))}; },
           [](Tape&, std::vector<Var>& v) { return ops::add_scalar(v[0], 1.25); });
    simple("relu",
           [shp](Rng& rng) { return std::vector<Tensor>{random_tensor(rng, shp(rng))}; },
           [](Tape&, std::vector<Var>& v) { return ops::relu(v[0]); });
    simple("sigmoid",
           [shp](Rng& rng) { return std::vector<Tensor>{random_tensor(rng, shp(rng), -3, 3)}; },
           [](Tape&, std::vector<Var>& v) { return ops::sigmoid(v[0]); });
    simple("reshape",
           [](Rng& rng) { return std::vector<Tensor>{random_tensor(rng, {2, 6})}; },
           [](Tape&, std::vector<Var>& v) { return ops::reshape(v[0], {3, 4}); });
    simple("concat_channels",
           [](Rng& rng) {
               return std::vector<Tensor>{random_tensor(rng, {2, 3, 3}),
                                          random_tensor(rng, {3, 3, 3})};
           },
           [](Tape&, std::vector<Var>& v) {
               return ops::concat_channels({v[0], v[1]});
           });
    simple("add_channel_bias",
           [](Rng& rng) {
               return std::vector<Tensor>{random_tensor(rng, {3, 2, 4}), random_tensor(rng, {3})};
           },
           [](Tape&, std::vector<Var>& v) { return ops::add_channel_bias(v[0], v[1]); });
    simple("fully_connected",
           [](Rng& rng) {
               return std::vector<Tensor>{random_tensor(rng, {5}), random_tensor(rng, {3, 5}),
                                          random_tensor(rng, {3})};
           },
           [](Tape&, std::vector<Var>& v) { return ops::fully_connected(v[0], v[1], v[2]); });
    simple("batch_norm",
           [](Rng& rng) {
               return std::vector<Tensor>{random_tensor(rng, {3, 2, 4, 4}),
                                          random_tensor(rng, {3}, 0.5, 1.5),
                                          random_tensor(rng, {3})};
           },
           [](Tape&, std::vector<Var>& v) {
               // fresh running stats; training mode exercises the batch path
               Tensor rm = Tensor::zeros({3});
               Tensor rv = Tensor::full({3}, 1.0);
               return ops::batch_norm(v[0], v[1], v[2], rm, rv, true);
           });
    simple("softmax_vector",
           [](Rng& rng) { return std::vector<Tensor>{random_tensor(rng, {6}, -2, 2)}; },
           [](Tape&, std::vector<Var>& v) { return ops::softmax_vector(v[0]); });
    simple("spatial_softmax",
           [](Rng& rng) { return std::vector<Tensor>{random_tensor(rng, {4, 5}, -2, 2)}; },
           [](Tape&, std::vector<Var>& v) { return ops::spatial_softmax(v[0]); });
    simple("conv3d",
           [](Rng& rng) {
               return std::vector<Tensor>{random_tensor(rng, {2, 4, 5, 5}),
                                          random_tensor(rng, {3, 2, 2, 3, 3})};
           },
           [](Tape&, std::vector<Var>& v) {
               return ops::conv3d(v[0], v[1], {1, 2, 2}, {1, 1, 1});
           });
    simple("conv2d_spatial",
           [](Rng& rng) {
               return std::vector<Tensor>{random_tensor(rng, {2, 6, 6}),
                                          random_tensor(rng, {3, 2, 3, 3})};
           },
           [](Tape&, std::vector<Var>& v) {
               return ops::conv2d_spatial(v[0], v[1], {2, 2}, {1, 1});
           });
    simple("temporal_avg_pool",
           [](Rng& rng) { return std::vector<Tensor>{random_tensor(rng, {2, 3, 4, 4})}; },
           [](Tape&, std::vector<Var>& v) { return ops::temporal_avg_pool(v[0]); });
    simple("global_avg_pool",
           [](Rng& rng) { return std::vector<Tensor>{random_tensor(rng, {3, 2, 4, 4})}; },
           [](Tape&, std::vector<Var>& v) { return ops::global_avg_pool(v[0]); });
    simple("upsample_bilinear",
           [](Rng& rng) { return std::vector<Tensor>{random_tensor(rng, {2, 3, 3})}; },
           [](Tape&, std::vector<Var>& v) { return ops::upsample_bilinear(v[0], 7, 5); });
    simple("scale_by_map",
           [](Rng& rng) {
               return std::vector<Tensor>{random_tensor(rng, {2, 3, 4, 4}),
                                          random_tensor(rng, {4, 4}, 0.0, 1.0)};
           },
           [](Tape&, std::vector<Var>& v) { return ops::scale_by_map(v[0], v[1]); });
    simple("sum_all",
           [shp](Rng& rng) { return std::vector<Tensor>{random_tensor(rng, shp(rng))}; },
           [](Tape&, std::vector<Var>& v) { return ops::sum_all(v[0]); });
    simple("mean_all",
           [shp](Rng& rng) { return std::vector<Tensor>{random_tensor(rng, shp(rng))}; },
           [](Tape&, std::vector<Var>& v) { return ops::mean_all(v[0]); });

    // Losses. Targets are sampled alongside the prediction inputs and
    // captured as constants; the scalar outputs need no extra weighting.
    auto loss = [&](const std::string& name, auto run_one) {
        checks.push_back(OpCheck{name, [run_one](Rng& rng, int instances) {
                                     double worst = 0.0;
                                     for (int k = 0; k < instances; ++k)
                                         worst = std::max(worst, run_one(rng));
                                     return worst;
                                 }});
    };

    auto random_fix = [](Rng& rng, std::size_t h, std::size_t w) {
        Tensor fix({h, w});
        const std::size_t n = 1 + rng.below(3);
        for (std::size_t i = 0; i < n; ++i) fix[rng.below(h * w)] = 1.0;
        return fix;
    };
    auto random_thr = [](Rng& rng, std::size_t h, std::size_t w) {
        Tensor thr({h, w});
        bool pos = false, neg = false;
        for (std::size_t i = 0; i < thr.numel(); ++i) {
            thr[i] = rng.coin() ? 1.0 : 0.0;
            (thr[i] != 0.0 ? pos : neg) = true;
        }
        if (!pos) thr[0] = 1.0;
        if (!neg) thr[1] = 0.0;
        return thr;
    };

    loss("balanced_ce_map", [random_thr](Rng& rng) {
        Tensor p = random_tensor(rng, {4, 4}, 0.1, 0.9);
        Tensor thr = random_thr(rng, 4, 4);
        return finite_diff_check({p}, [&thr](Tape&, std::vector<Var>& v) {
            return ops::balanced_ce_map(v[0], thr);
        });
    });
    loss("cc_loss", [](Rng& rng) {
        Tensor p = random_tensor(rng, {4, 5}, 0.05, 0.95);
        Tensor den = random_tensor(rng, {4, 5}, 0.0, 1.0);
        return finite_diff_check({p}, [&den](Tape&, std::vector<Var>& v) {
            return ops::cc_loss(v[0], den);
        });
    });
    loss("nss_loss", [random_fix](Rng& rng) {
        Tensor p = random_tensor(rng, {4, 5}, 0.05, 0.95);
        Tensor fix = random_fix(rng, 4, 5);
        return finite_diff_check({p}, [&fix](Tape&, std::vector<Var>& v) {
            return ops::nss_loss(v[0], fix);
        });
    });
    loss("action_ce", [](Rng& rng) {
        Tensor logits = random_tensor(rng, {7}, -2, 2);
        const std::size_t cls = rng.below(7);
        return finite_diff_check({logits}, [cls](Tape&, std::vector<Var>& v) {
            return ops::action_ce(v[0], cls);
        });
    });
    loss("weighted_bce", [](Rng& rng) {
        Tensor logit = random_tensor(rng, {}, -2, 2);
        const double y = rng.uniform();
        return finite_diff_check({logit}, [y](Tape&, std::vector<Var>& v) {
            return ops::weighted_bce(v[0], y, 3.06);
        });
    });
    loss("saliency_total", [random_fix](Rng& rng) {
        const std::size_t h = 4, w = 4;
        std::vector<Tensor> inputs;
        for (int m = 0; m < 5; ++m) inputs.push_back(random_tensor(rng, {h, w}, -2, 2));
        SaliencyTarget target;
        target.den = random_tensor(rng, {h, w}, 0.0, 1.0);
        target.fix = random_fix(rng, h, w);
        target.thr = threshold_dense(target.den, 0.5);
        LossWeights weights;
        return finite_diff_check(inputs, [&target, &weights](Tape&, std::vector<Var>& v) {
            return ops::saliency_total(v[0], {v[1], v[2], v[3], v[4]}, target, weights);
        });
    });
    loss("multitask_total", [](Rng& rng) {
        std::vector<Tensor> inputs{random_tensor(rng, {}), random_tensor(rng, {}),
                                   random_tensor(rng, {})};
        LossWeights weights;
        return finite_diff_check(inputs, [&weights](Tape&, std::vector<Var>& v) {
            return ops::multitask_total({v[0]}, {v[1]}, {v[2]}, weights);
        });
    });

    return checks;
}

} // namespace gradcheck
} // namespace vmtl
