#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "vmtl/losses.hpp"
#include "vmtl/model.hpp"
#include "vmtl/sampling.hpp"
#include "vmtl/task.hpp"

namespace vmtl {

struct OptimizerConfig {
    double lr = 0.01;
    double momentum = 0.9;
    double weight_decay = 1e-5;
    std::size_t batch_sal = 128;
    std::size_t batch_act = 128;
    std::size_t batch_sum = 128;
    std::size_t plateau_patience = 3;
    double plateau_factor = 10.0;  // divide lr by this on plateau
    double plateau_min_rel = 1e-3; // relative improvement that resets patience

    std::size_t batch(Task t) const {
        switch (t) {
            case Task::saliency: return batch_sal;
            case Task::action: return batch_act;
            case Task::summary: return batch_sum;
        }
        return 0;
    }
    std::size_t batch_total() const { return batch_sal + batch_act + batch_sum; }

    void validate() const {
        if (lr <= 0.0) throw ConfigError("lr must be positive");
        if (momentum < 0.0 || momentum >= 1.0) throw ConfigError("momentum must be in [0,1)");
        if (weight_decay < 0.0) throw ConfigError("weight_decay must be non-negative");
        if (batch_sal == 0 || batch_act == 0 || batch_sum == 0)
            throw ConfigError("effective batch sizes must be at least 1");
    }
};

// One parameter-group update emitted by maybe_step.
struct UpdateEvent {
    Partition group = Partition::shared;
    std::size_t step = 0; // 1-based per group
};

// SGD with momentum and weight decay on an averaged gradient sum:
//   g   = grad_sum / divisor + weight_decay * param
//   buf = momentum * buf + g
//   p  -= lr * buf
inline void sgd_update(Tensor& param, const Tensor& grad_sum, Tensor& momentum_buf,
                       double divisor, double lr, double momentum, double weight_decay) {
    check_dim(param.same_shape(grad_sum) && param.same_shape(momentum_buf),
              "sgd_update: shape mismatch");
    for (std::size_t i = 0; i < param.numel(); ++i) {
        const double g = grad_sum[i] / divisor + weight_decay * param[i];
        momentum_buf[i] = momentum * momentum_buf[i] + g;
        param[i] -= lr * momentum_buf[i];
    }
}

// Plateau schedule over recorded epoch losses: an epoch counts as an
// improvement when it beats the best seen so far by at least
// plateau_min_rel (relative); after `patience` non-improving epochs the rate
// divides by plateau_factor and the patience window restarts.
inline double lr_on_plateau(const std::vector<double>& epoch_losses,
                            const OptimizerConfig& cfg, double initial_lr) {
    double lr = initial_lr;
    if (epoch_losses.size() < cfg.plateau_patience + 1) return lr;
    double best = epoch_losses[0];
    std::size_t bad = 0;
    for (std::size_t i = 1; i < epoch_losses.size(); ++i) {
        if (epoch_losses[i] < best * (1.0 - cfg.plateau_min_rel)) {
            best = epoch_losses[i];
            bad = 0;
        } else {
            ++bad;
            if (bad >= cfg.plateau_patience) {
                lr /= cfg.plateau_factor;
                bad = 0;
            }
        }
    }
    return lr;
}

// Asynchronous multi-task SGD. Each sample's gradients flow into its task's
// accumulator (task head parameters) and the shared accumulator (trunk and
// attention parameters). A task group steps once its effective batch is
// full; the shared group steps once batch_sal+batch_act+batch_sum samples
// have been seen since its last step. Accumulators are divided by their
// effective batch size so lr keeps its meaning across batch settings.
class MultiTaskSgd {
public:
    MultiTaskSgd(const MultiTaskNet& net, OptimizerConfig cfg) : cfg_(cfg), lr_(cfg.lr) {
        cfg_.validate();
        const ParamStore& ps = net.params();
        momentum_.reserve(ps.size());
        accum_.reserve(ps.size());
        for (std::size_t i = 0; i < ps.size(); ++i) {
            momentum_.push_back(Tensor::zeros(ps[i].value.shape()));
            accum_.push_back(Tensor::zeros(ps[i].value.shape()));
        }
    }

    const OptimizerConfig& config() const { return cfg_; }
    double lr() const { return lr_; }
    void set_lr(double lr) { lr_ = lr; }

    // Forward + backward of alpha_task * L_task for one annotated clip.
    // Returns the raw (unweighted) task loss for logging.
    double accumulate(MultiTaskNet& net, const AnnotatedClip& sample, const LossWeights& w) {
        Tape tape;
        Binding bind(net.params().size());
        TaskOutputs outs = net.forward(tape, sample.clip, TaskSet::only(sample.task), true, &bind);

        Var loss;
        double alpha = 1.0;
        switch (sample.task) {
            case Task::saliency:
                if (sample.sal.fix.numel() == 0)
                    throw DataError("accumulate: saliency clip without target");
                loss = ops::saliency_total(outs.fused_map, outs.level_maps, sample.sal, w);
                alpha = w.alpha_sal;
                break;
            case Task::action:
                if (sample.action_class < 0)
                    throw DataError("accumulate: action clip without label");
                loss = ops::action_ce(outs.action_logits,
                                      static_cast<std::size_t>(sample.action_class));
                alpha = w.alpha_act;
                break;
            case Task::summary:
                loss = ops::weighted_bce(outs.summary_logit, sample.y_sum, w.gamma);
                alpha = w.alpha_sum;
                break;
        }
        const double raw = loss.value().item();
        if (!std::isfinite(raw)) throw NumericError("non-finite loss");
        tape.backward(ops::scalar_mul(loss, alpha));

        const ParamStore& ps = net.params();
        for (std::size_t i = 0; i < ps.size(); ++i) {
            if (!ps[i].trainable || !bind.bound(i)) continue;
            const Tensor* g = tape.grad(bind.var(i));
            if (!g) continue;
            double* dst = accum_[i].data();
            const double* src = g->data();
            for (std::size_t j = 0; j < accum_[i].numel(); ++j) dst[j] += src[j];
        }
        ++task_seen_[static_cast<std::size_t>(sample.task)];
        ++shared_seen_;
        return raw;
    }

    // Apply any updates whose effective batch is complete.
    std::vector<UpdateEvent> maybe_step(MultiTaskNet& net) {
        std::vector<UpdateEvent> events;
        for (Task t : kAllTasks) {
            auto& seen = task_seen_[static_cast<std::size_t>(t)];
            if (seen < cfg_.batch(t)) continue;
            apply_group(net, MultiTaskNet::task_partition(t),
                        static_cast<double>(cfg_.batch(t)));
            seen = 0;
            events.push_back({MultiTaskNet::task_partition(t),
                              ++steps_[static_cast<std::size_t>(MultiTaskNet::task_partition(t))]});
        }
        if (shared_seen_ >= cfg_.batch_total()) {
            apply_group(net, Partition::shared, static_cast<double>(cfg_.batch_total()));
            shared_seen_ = 0;
            events.push_back(
                {Partition::shared, ++steps_[static_cast<std::size_t>(Partition::shared)]});
        }
        return events;
    }

    // Checkpointable state.
    std::vector<Tensor>& momentum_buffers() { return momentum_; }
    std::vector<Tensor>& accumulators() { return accum_; }
    std::array<std::size_t, 3>& task_counters() { return task_seen_; }
    std::size_t& shared_counter() { return shared_seen_; }
    std::array<std::size_t, 4>& step_counters() { return steps_; }

private:
    void apply_group(MultiTaskNet& net, Partition part, double divisor) {
        ParamStore& ps = net.params();
        for (std::size_t i : ps.partition(part)) {
            sgd_update(ps[i].value, accum_[i], momentum_[i], divisor, lr_, cfg_.momentum,
                       cfg_.weight_decay);
            Tensor& a = accum_[i];
            for (std::size_t j = 0; j < a.numel(); ++j) a[j] = 0.0;
        }
    }

    OptimizerConfig cfg_;
    double lr_;
    std::vector<Tensor> momentum_;
    std::vector<Tensor> accum_;
    std::array<std::size_t, 3> task_seen_{0, 0, 0};
    std::size_t shared_seen_ = 0;
    std::array<std::size_t, 4> steps_{0, 0, 0, 0}; // indexed by Partition
};

} // namespace vmtl
