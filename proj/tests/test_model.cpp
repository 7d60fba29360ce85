#include <catch2/catch_amalgamated.hpp>

#include <set>

#include "vmtl/gradcheck.hpp"
#include "vmtl/losses.hpp"
#include "vmtl/model.hpp"
#include "vmtl/rng.hpp"

using namespace vmtl;

namespace {

NetworkConfig tiny_config(std::size_t classes = 4) {
    NetworkConfig cfg;
    cfg.input_size = 16;
    cfg.frames = 16;
    cfg.widths = {4, 6, 8, 10};
    cfg.head_width = 10;
    cfg.sal_channels = 4;
    cfg.action_classes = classes;
    return cfg;
}

Tensor random_clip(Rng& rng, const NetworkConfig& cfg) {
    Tensor clip({3, cfg.frames, cfg.input_size, cfg.input_size});
    for (std::size_t i = 0; i < clip.numel(); ++i) clip[i] = rng.uniform(0, 1);
    return clip;
}

} // namespace

TEST_CASE("forward produces the contracted output shapes") {
    NetworkConfig cfg = tiny_config(51);
    MultiTaskNet net(cfg, 1);
    Rng rng(2);
    Tensor clip = random_clip(rng, cfg);
    Tape tape;
    TaskOutputs out = net.forward(tape, clip, TaskSet::all(), false);

    REQUIRE(out.fused_map.value().shape() ==
            std::vector<std::size_t>{cfg.input_size, cfg.input_size});
    REQUIRE(out.level_maps.size() == 4);
    for (const Var& a : out.level_maps)
        REQUIRE(a.value().shape() == std::vector<std::size_t>{cfg.input_size, cfg.input_size});
    REQUIRE(out.action_logits.value().shape() == std::vector<std::size_t>{51});
    REQUIRE(out.summary_logit.value().numel() == 1);
}

TEST_CASE("heads are gated by the requested task set") {
    NetworkConfig cfg = tiny_config();
    MultiTaskNet net(cfg, 1);
    Rng rng(3);
    Tensor clip = random_clip(rng, cfg);
    Tape tape;
    Binding bind(net.params().size());
    TaskOutputs out = net.forward(tape, clip, TaskSet::only(Task::action), false, &bind);

    REQUIRE(out.action_logits.valid());
    REQUIRE_FALSE(out.fused_map.valid());
    REQUIRE(out.level_maps.empty());
    REQUIRE_FALSE(out.summary_logit.valid());
    // no saliency/summary parameter was even bound
    for (std::size_t i : net.params().partition(Partition::sal)) REQUIRE_FALSE(bind.bound(i));
    for (std::size_t i : net.params().partition(Partition::sum)) REQUIRE_FALSE(bind.bound(i));
}

TEST_CASE("all-zero weights give a uniform action softmax") {
    NetworkConfig cfg = tiny_config(5);
    MultiTaskNet net(cfg, 1);
    ParamStore& ps = net.params();
    for (std::size_t i = 0; i < ps.size(); ++i)
        if (ps[i].trainable)
            for (std::size_t j = 0; j < ps[i].value.numel(); ++j) ps[i].value[j] = 0.0;
    Rng rng(4);
    Tensor clip = random_clip(rng, cfg);
    Tape tape;
    TaskOutputs out = net.forward(tape, clip, TaskSet::only(Task::action), false);
    Var soft = ops::softmax_vector(out.action_logits);
    for (std::size_t c = 0; c < 5; ++c)
        REQUIRE_THAT(soft.value()[c], Catch::Matchers::WithinAbs(0.2, 1e-12));
}

TEST_CASE("parameter partition is disjoint and exhaustive") {
    MultiTaskNet net(tiny_config(), 7);
    const ParamStore& ps = net.params();
    std::set<std::size_t> seen;
    std::size_t total = 0;
    for (Partition p : {Partition::shared, Partition::sal, Partition::act, Partition::sum}) {
        for (std::size_t i : ps.partition(p)) {
            REQUIRE(seen.insert(i).second); // no index in two partitions
            ++total;
        }
    }
    REQUIRE(total == ps.trainable().size());

    // attention parameters sit in the shared partition
    const std::size_t attn_w = ps.index_of("attn1.act.w");
    REQUIRE(ps[attn_w].part == Partition::shared);
    // head parameters sit in their own partitions
    REQUIRE(ps[ps.index_of("sal.fuse1.w")].part == Partition::sal);
    REQUIRE(ps[ps.index_of("act.fc.w")].part == Partition::act);
    REQUIRE(ps[ps.index_of("sum.fc.w")].part == Partition::sum);
}

TEST_CASE("zeroing saliency head parameters leaves action logits bit-identical") {
    NetworkConfig cfg = tiny_config();
    Rng rng(5);
    Tensor clip = random_clip(rng, cfg);

    MultiTaskNet a(cfg, 11);
    MultiTaskNet b(cfg, 11);
    for (std::size_t i : b.params().partition(Partition::sal))
        for (std::size_t j = 0; j < b.params()[i].value.numel(); ++j)
            b.params()[i].value[j] = 0.0;

    Tape ta, tb;
    TaskOutputs oa = a.forward(ta, clip, TaskSet::only(Task::action), false);
    TaskOutputs ob = b.forward(tb, clip, TaskSet::only(Task::action), false);
    for (std::size_t c = 0; c < cfg.action_classes; ++c)
        REQUIRE(oa.action_logits.value()[c] == ob.action_logits.value()[c]);
}

TEST_CASE("action loss reaches shared parameters but not other heads") {
    NetworkConfig cfg = tiny_config();
    MultiTaskNet net(cfg, 13);
    Rng rng(6);
    Tensor clip = random_clip(rng, cfg);

    Tape tape;
    Binding bind(net.params().size());
    TaskOutputs out = net.forward(tape, clip, TaskSet::only(Task::action), true, &bind);
    tape.backward(ops::action_ce(out.action_logits, 1));

    auto grad_norm = [&](Partition p) {
        double n = 0.0;
        std::size_t bound = 0;
        for (std::size_t i : net.params().partition(p)) {
            if (!bind.bound(i)) continue;
            ++bound;
            if (const Tensor* g = tape.grad(bind.var(i)))
                for (std::size_t j = 0; j < g->numel(); ++j) n += (*g)[j] * (*g)[j];
        }
        return std::pair<double, std::size_t>{n, bound};
    };

    REQUIRE(grad_norm(Partition::sal).second == 0);  // never bound
    REQUIRE(grad_norm(Partition::sum).second == 0);
    REQUIRE(grad_norm(Partition::act).first > 0.0);
    REQUIRE(grad_norm(Partition::shared).first > 0.0);

    // attention parameters specifically receive gradient from the action loss
    const std::size_t am = net.params().index_of("attn2.feat.w");
    REQUIRE(bind.bound(am));
    const Tensor* g = tape.grad(bind.var(am));
    REQUIRE(g != nullptr);
    double n = 0.0;
    for (std::size_t j = 0; j < g->numel(); ++j) n += std::abs((*g)[j]);
    REQUIRE(n > 0.0);
}

TEST_CASE("same seed and clip give bitwise identical outputs") {
    NetworkConfig cfg = tiny_config();
    Rng rng(7);
    Tensor clip = random_clip(rng, cfg);
    MultiTaskNet a(cfg, 99), b(cfg, 99);
    Tape ta, tb;
    TaskOutputs oa = a.forward(ta, clip, TaskSet::all(), false);
    TaskOutputs ob = b.forward(tb, clip, TaskSet::all(), false);
    for (std::size_t i = 0; i < oa.fused_map.value().numel(); ++i)
        REQUIRE(oa.fused_map.value()[i] == ob.fused_map.value()[i]);
    for (std::size_t c = 0; c < cfg.action_classes; ++c)
        REQUIRE(oa.action_logits.value()[c] == ob.action_logits.value()[c]);
    REQUIRE(oa.summary_logit.value().item() == ob.summary_logit.value().item());
}

TEST_CASE("head gradients pass spot finite-difference checks through the net") {
    // Perturb a handful of entries of representative parameters and compare
    // against the analytic gradient of the action loss.
    NetworkConfig cfg = tiny_config();
    MultiTaskNet net(cfg, 21);
    Rng rng(8);
    Tensor clip = random_clip(rng, cfg);

    auto loss_value = [&]() {
        Tape tape;
        TaskOutputs out = net.forward(tape, clip, TaskSet::only(Task::action), true);
        return ops::action_ce(out.action_logits, 2).value().item();
    };

    Tape tape;
    Binding bind(net.params().size());
    TaskOutputs out = net.forward(tape, clip, TaskSet::only(Task::action), true, &bind);
    tape.backward(ops::action_ce(out.action_logits, 2));

    const double eps = 1e-5;
    for (const char* name : {"trunk1.w", "attn3.act.w", "act.fc.w", "trunk4.conv1.bn.gamma"}) {
        const std::size_t idx = net.params().index_of(name);
        REQUIRE(bind.bound(idx));
        const Tensor* g = tape.grad(bind.var(idx));
        REQUIRE(g != nullptr);
        Tensor& value = net.params()[idx].value;
        for (std::size_t j : {std::size_t{0}, value.numel() / 2}) {
            const double orig = value[j];
            value[j] = orig + eps;
            const double fp = loss_value();
            value[j] = orig - eps;
            const double fm = loss_value();
            value[j] = orig;
            const double fd = (fp - fm) / (2 * eps);
            INFO(name << "[" << j << "]");
            REQUIRE_THAT((*g)[j], Catch::Matchers::WithinAbs(fd, 1e-4));
        }
    }
}
