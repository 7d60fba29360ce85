#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "vmtl/attention.hpp"
#include "vmtl/conv.hpp"
#include "vmtl/ops.hpp"
#include "vmtl/rng.hpp"
#include "vmtl/task.hpp"

namespace vmtl {

// Ownership class of a parameter: shared trunk + attention vs one of the
// three task heads. Task-specific updates touch exactly one class.
enum class Partition { shared = 0, sal = 1, act = 2, sum = 3 };

inline const char* partition_name(Partition p) {
    switch (p) {
        case Partition::shared: return "shared";
        case Partition::sal: return "sal";
        case Partition::act: return "act";
        case Partition::sum: return "sum";
    }
    return "?";
}

inline Partition partition_from_name(const std::string& s) {
    if (s == "shared") return Partition::shared;
    if (s == "sal") return Partition::sal;
    if (s == "act") return Partition::act;
    if (s == "sum") return Partition::sum;
    throw ParseError("unknown partition tag '" + s + "'");
}

struct ParamDef {
    std::string name;
    Tensor value;
    Partition part = Partition::shared;
    bool trainable = true; // false: running statistic, saved but never updated
};

// Flat, deterministically ordered parameter table.
class ParamStore {
public:
    std::size_t add(std::string name, Tensor value, Partition part, bool trainable = true) {
        if (index_.count(name)) throw ContractError("duplicate parameter name " + name);
        index_[name] = defs_.size();
        defs_.push_back(ParamDef{std::move(name), std::move(value), part, trainable});
        return defs_.size() - 1;
    }

    std::size_t size() const { return defs_.size(); }
    ParamDef& operator[](std::size_t i) { return defs_[i]; }
    const ParamDef& operator[](std::size_t i) const { return defs_[i]; }

    std::size_t index_of(const std::string& name) const {
        auto it = index_.find(name);
        if (it == index_.end()) throw ContractError("unknown parameter " + name);
        return it->second;
    }

    std::vector<std::size_t> partition(Partition p, bool trainable_only = true) const {
        std::vector<std::size_t> out;
        for (std::size_t i = 0; i < defs_.size(); ++i)
            if (defs_[i].part == p && (!trainable_only || defs_[i].trainable)) out.push_back(i);
        return out;
    }

    std::vector<std::size_t> trainable() const {
        std::vector<std::size_t> out;
        for (std::size_t i = 0; i < defs_.size(); ++i)
            if (defs_[i].trainable) out.push_back(i);
        return out;
    }

private:
    std::vector<ParamDef> defs_;
    std::unordered_map<std::string, std::size_t> index_;
};

// Maps parameter indices to tape leaves for one forward pass. Only the
// parameters a pass actually touches get bound, so gradients of unused heads
// are structurally absent rather than zero.
class Binding {
public:
    explicit Binding(std::size_t n) : vars_(n) {}
    bool bound(std::size_t i) const { return vars_[i].valid(); }
    Var var(std::size_t i) const { return vars_[i]; }
    Var& slot(std::size_t i) { return vars_[i]; }
    std::size_t size() const { return vars_.size(); }

private:
    std::vector<Var> vars_;
};

struct NetworkConfig {
    std::size_t input_size = 112; // square H0 = W0
    std::size_t frames = 16;
    std::size_t in_channels = 3;
    std::array<std::size_t, 4> widths{16, 32, 64, 128}; // trunk levels 1..4
    std::size_t head_width = 128;                       // task head blocks
    std::size_t action_classes = 51;
    std::size_t sal_channels = 16; // saliency feature channels per level

    void validate() const {
        if (input_size < 16) throw ConfigError("input_size must be at least 16");
        if (frames < 4) throw ConfigError("frames must be at least 4");
        if (action_classes < 2) throw ConfigError("action_classes must be at least 2");
        for (std::size_t w : widths)
            if (w == 0) throw ConfigError("trunk widths must be positive");
        if (head_width == 0 || sal_channels == 0)
            throw ConfigError("head_width and sal_channels must be positive");
    }
};

// Network outputs for one clip; only the requested heads are populated.
struct TaskOutputs {
    Var fused_map;              // saliency logits [H0,W0]
    std::vector<Var> level_maps;// per-level activation logits [H0,W0]
    Var action_logits;          // [C_a]
    Var summary_logit;          // [1]
};

// The multi-task network: a reduced residual 3D trunk with an attention
// branch per level, a fully convolutional saliency head over concatenated
// multi-level features, and two pooled classifier heads off the last
// attended trunk output.
class MultiTaskNet {
public:
    MultiTaskNet(NetworkConfig cfg, std::uint64_t seed) : cfg_(cfg) {
        cfg_.validate();
        Rng rng(seed);
        build(rng);
    }

    const NetworkConfig& config() const { return cfg_; }
    ParamStore& params() { return store_; }
    const ParamStore& params() const { return store_; }

    std::vector<std::size_t> partition(Partition p) const { return store_.partition(p); }

    static Partition task_partition(Task t) {
        switch (t) {
            case Task::saliency: return Partition::sal;
            case Task::action: return Partition::act;
            case Task::summary: return Partition::sum;
        }
        return Partition::shared;
    }

    TaskOutputs forward(Tape& tape, const Tensor& clip, TaskSet tasks, bool training,
                        Binding* binding_out = nullptr) {
        check_dim(clip.rank() == 4 && clip.dim(0) == cfg_.in_channels &&
                      clip.dim(1) == cfg_.frames && clip.dim(2) == cfg_.input_size &&
                      clip.dim(3) == cfg_.input_size,
                  "forward: clip shape " + shape_string(clip.shape()) +
                      " does not match configured input");
        if (!tasks.any()) throw ContractError("forward: no task requested");

        Binding local(store_.size());
        Binding& bind = binding_out ? *binding_out : local;
        if (binding_out && binding_out->size() != store_.size())
            throw ContractError("forward: binding has wrong size");

        Var x = tape.constant(clip);

        // Trunk with per-level attention; the attended features feed the
        // next level.
        std::vector<AttentionOut> att(4);
        x = conv_bn_relu(tape, bind, x, stem_, {1, 2, 2}, {1, 3, 3}, training);
        att[0] = run_attention(tape, bind, x, attn_[0]);
        x = apply_attention(x, att[0].attention);
        for (std::size_t level = 0; level < 3; ++level) {
            x = residual_block(tape, bind, x, trunk_[level], training);
            att[level + 1] = run_attention(tape, bind, x, attn_[level + 1]);
            x = apply_attention(x, att[level + 1].attention);
        }

        TaskOutputs out;
        if (tasks.has(Task::saliency)) {
            std::vector<Var> feats;
            for (const auto& a : att) feats.push_back(a.s_up);
            Var cat = ops::concat_channels(feats);
            Var h = ops::relu(ops::add_channel_bias(
                ops::conv2d_spatial(cat, p(tape, bind, sal_.w1), {1, 1}, {0, 0}),
                p(tape, bind, sal_.b1)));
            Var logit = ops::add_channel_bias(
                ops::conv2d_spatial(h, p(tape, bind, sal_.w2), {1, 1}, {1, 1}),
                p(tape, bind, sal_.b2));
            out.fused_map = ops::reshape(logit, {cfg_.input_size, cfg_.input_size});
            for (const auto& a : att) out.level_maps.push_back(a.a_up);
        }
        if (tasks.has(Task::action)) {
            Var h = residual_block(tape, bind, x, act_head_.block, training);
            h = ops::global_avg_pool(h);
            out.action_logits = ops::fully_connected(h, p(tape, bind, act_head_.fc_w),
                                                     p(tape, bind, act_head_.fc_b));
        }
        if (tasks.has(Task::summary)) {
            Var h = residual_block(tape, bind, x, sum_head_.block, training);
            h = ops::global_avg_pool(h);
            out.summary_logit = ops::fully_connected(h, p(tape, bind, sum_head_.fc_w),
                                                     p(tape, bind, sum_head_.fc_b));
        }
        return out;
    }

private:
    struct ConvBn {
        std::size_t w, gamma, beta, rmean, rvar;
    };
    struct Block {
        ConvBn c1, c2, proj;
        std::array<std::size_t, 3> stride;
    };
    struct AttnIdx {
        std::size_t feat_w, feat_b, act_w, act_b;
    };
    struct SalHeadIdx {
        std::size_t w1, b1, w2, b2;
    };
    struct PoolHeadIdx {
        Block block;
        std::size_t fc_w, fc_b;
    };

    Tensor he_uniform(Rng& rng, std::vector<std::size_t> shape, std::size_t fan_in) {
        Tensor t(std::move(shape));
        const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
        for (std::size_t i = 0; i < t.numel(); ++i) t[i] = rng.uniform(-bound, bound);
        return t;
    }

    ConvBn add_conv_bn(Rng& rng, const std::string& name, Partition part, std::size_t c_out,
                       std::size_t c_in, std::array<std::size_t, 3> k) {
        ConvBn cb{};
        const std::size_t fan_in = c_in * k[0] * k[1] * k[2];
        cb.w = store_.add(name + ".w", he_uniform(rng, {c_out, c_in, k[0], k[1], k[2]}, fan_in), part);
        cb.gamma = store_.add(name + ".bn.gamma", Tensor::full({c_out}, 1.0), part);
        cb.beta = store_.add(name + ".bn.beta", Tensor::zeros({c_out}), part);
        cb.rmean = store_.add(name + ".bn.rmean", Tensor::zeros({c_out}), part, false);
        cb.rvar = store_.add(name + ".bn.rvar", Tensor::full({c_out}, 1.0), part, false);
        return cb;
    }

    Block add_block(Rng& rng, const std::string& name, Partition part, std::size_t c_in,
                    std::size_t c_out, std::array<std::size_t, 3> stride) {
        Block b{};
        b.stride = stride;
        b.c1 = add_conv_bn(rng, name + ".conv1", part, c_out, c_in, {3, 3, 3});
        b.c2 = add_conv_bn(rng, name + ".conv2", part, c_out, c_out, {3, 3, 3});
        b.proj = add_conv_bn(rng, name + ".proj", part, c_out, c_in, {1, 1, 1});
        return b;
    }

    void build(Rng& rng) {
        stem_ = add_conv_bn(rng, "trunk1", Partition::shared, cfg_.widths[0], cfg_.in_channels,
                            {3, 7, 7});
        const char* names[3] = {"trunk2", "trunk3", "trunk4"};
        const std::array<std::array<std::size_t, 3>, 3> strides{
            {{1, 2, 2}, {2, 2, 2}, {2, 2, 2}}};
        for (std::size_t i = 0; i < 3; ++i)
            trunk_[i] = add_block(rng, names[i], Partition::shared, cfg_.widths[i],
                                  cfg_.widths[i + 1], strides[i]);

        for (std::size_t m = 0; m < 4; ++m) {
            const std::string nm = "attn" + std::to_string(m + 1);
            const std::size_t c_in = cfg_.widths[m];
            const std::size_t f = cfg_.sal_channels;
            AttnIdx a{};
            a.feat_w = store_.add(nm + ".feat.w", he_uniform(rng, {f, c_in, 3, 3}, c_in * 9),
                                  Partition::shared);
            a.feat_b = store_.add(nm + ".feat.b", Tensor::zeros({f}), Partition::shared);
            a.act_w = store_.add(nm + ".act.w", he_uniform(rng, {1, f, 1, 1}, f),
                                 Partition::shared);
            a.act_b = store_.add(nm + ".act.b", Tensor::zeros({1}), Partition::shared);
            attn_[m] = a;
        }

        const std::size_t cat = 4 * cfg_.sal_channels;
        sal_.w1 = store_.add("sal.fuse1.w", he_uniform(rng, {cfg_.sal_channels, cat, 1, 1}, cat),
                             Partition::sal);
        sal_.b1 = store_.add("sal.fuse1.b", Tensor::zeros({cfg_.sal_channels}), Partition::sal);
        sal_.w2 = store_.add("sal.fuse2.w",
                             he_uniform(rng, {1, cfg_.sal_channels, 3, 3}, cfg_.sal_channels * 9),
                             Partition::sal);
        sal_.b2 = store_.add("sal.fuse2.b", Tensor::zeros({1}), Partition::sal);

        act_head_.block = add_block(rng, "act.block", Partition::act, cfg_.widths[3],
                                    cfg_.head_width, {2, 2, 2});
        act_head_.fc_w = store_.add(
            "act.fc.w", he_uniform(rng, {cfg_.action_classes, cfg_.head_width}, cfg_.head_width),
            Partition::act);
        act_head_.fc_b = store_.add("act.fc.b", Tensor::zeros({cfg_.action_classes}),
                                    Partition::act);

        sum_head_.block = add_block(rng, "sum.block", Partition::sum, cfg_.widths[3],
                                    cfg_.head_width, {2, 2, 2});
        sum_head_.fc_w = store_.add("sum.fc.w", he_uniform(rng, {1, cfg_.head_width}, cfg_.head_width),
                                    Partition::sum);
        sum_head_.fc_b = store_.add("sum.fc.b", Tensor::zeros({1}), Partition::sum);
    }

    Var p(Tape& tape, Binding& bind, std::size_t idx) {
        if (!bind.bound(idx))
            bind.slot(idx) = tape.leaf(store_[idx].value, store_[idx].trainable);
        return bind.var(idx);
    }

    Var conv_bn_relu(Tape& tape, Binding& bind, Var x, const ConvBn& cb,
                     std::array<std::size_t, 3> stride, std::array<std::size_t, 3> pad,
                     bool training) {
        Var y = ops::conv3d(x, p(tape, bind, cb.w), stride, pad);
        y = ops::batch_norm(y, p(tape, bind, cb.gamma), p(tape, bind, cb.beta),
                            store_[cb.rmean].value, store_[cb.rvar].value, training);
        return ops::relu(y);
    }

    Var residual_block(Tape& tape, Binding& bind, Var x, const Block& b, bool training) {
        Var main = ops::conv3d(x, p(tape, bind, b.c1.w), b.stride, {1, 1, 1});
        main = ops::batch_norm(main, p(tape, bind, b.c1.gamma), p(tape, bind, b.c1.beta),
                               store_[b.c1.rmean].value, store_[b.c1.rvar].value, training);
        main = ops::relu(main);
        main = ops::conv3d(main, p(tape, bind, b.c2.w), {1, 1, 1}, {1, 1, 1});
        main = ops::batch_norm(main, p(tape, bind, b.c2.gamma), p(tape, bind, b.c2.beta),
                               store_[b.c2.rmean].value, store_[b.c2.rvar].value, training);
        Var skip = ops::conv3d(x, p(tape, bind, b.proj.w), b.stride, {0, 0, 0});
        skip = ops::batch_norm(skip, p(tape, bind, b.proj.gamma), p(tape, bind, b.proj.beta),
                               store_[b.proj.rmean].value, store_[b.proj.rvar].value, training);
        return ops::relu(ops::add(main, skip));
    }

    AttentionOut run_attention(Tape& tape, Binding& bind, Var x, const AttnIdx& a) {
        return attention_forward(x, p(tape, bind, a.feat_w), p(tape, bind, a.feat_b),
                                 p(tape, bind, a.act_w), p(tape, bind, a.act_b),
                                 cfg_.input_size, cfg_.input_size);
    }

    NetworkConfig cfg_;
    ParamStore store_;
    ConvBn stem_{};
    std::array<Block, 3> trunk_{};
    std::array<AttnIdx, 4> attn_{};
    SalHeadIdx sal_{};
    PoolHeadIdx act_head_{};
    PoolHeadIdx sum_head_{};
};

} // namespace vmtl
