#include <catch2/catch_amalgamated.hpp>

#include "vmtl/attention.hpp"
#include "vmtl/gradcheck.hpp"
#include "vmtl/losses.hpp"
#include "vmtl/rng.hpp"

using namespace vmtl;

namespace {

Tensor random_tensor(Rng& rng, std::vector<std::size_t> shape, double lo = -1, double hi = 1) {
    Tensor t(std::move(shape));
    for (std::size_t i = 0; i < t.numel(); ++i) t[i] = rng.uniform(lo, hi);
    return t;
}

struct AttnFixture {
    Tensor x, feat_w, feat_b, act_w, act_b;
    AttnFixture(Rng& rng, std::size_t c = 3, std::size_t f = 4, std::size_t h = 5,
                std::size_t w = 6) {
        x = random_tensor(rng, {c, 4, h, w});
        feat_w = random_tensor(rng, {f, c, 3, 3}, -0.5, 0.5);
        feat_b = random_tensor(rng, {f}, -0.1, 0.1);
        act_w = random_tensor(rng, {1, f, 1, 1}, -0.5, 0.5);
        act_b = random_tensor(rng, {1}, -0.1, 0.1);
    }
};

} // namespace

TEST_CASE("zero input with zero biases gives a uniform attention map") {
    Tape tape;
    const std::size_t h = 4, w = 6;
    Var x = tape.constant(Tensor::zeros({3, 2, h, w}));
    Var fw = tape.constant(Tensor::zeros({4, 3, 3, 3}));
    Var fb = tape.constant(Tensor::zeros({4}));
    Var aw = tape.constant(Tensor::zeros({1, 4, 1, 1}));
    Var ab = tape.constant(Tensor::zeros({1}));
    AttentionOut out = attention_forward(x, fw, fb, aw, ab, 8, 8);
    for (std::size_t i = 0; i < h * w; ++i)
        REQUIRE_THAT(out.attention.value()[i],
                     Catch::Matchers::WithinAbs(1.0 / (h * w), 1e-15));
}

TEST_CASE("attention map is a probability map for random inputs") {
    Rng rng(31);
    Tape tape;
    AttnFixture fx(rng);
    AttentionOut out = attention_forward(tape.constant(fx.x), tape.constant(fx.feat_w),
                                         tape.constant(fx.feat_b), tape.constant(fx.act_w),
                                         tape.constant(fx.act_b), 10, 12);
    double sum = 0.0;
    for (std::size_t i = 0; i < out.attention.value().numel(); ++i) {
        REQUIRE(out.attention.value()[i] >= 0.0);
        sum += out.attention.value()[i];
    }
    REQUIRE_THAT(sum, Catch::Matchers::WithinAbs(1.0, 1e-9));
    REQUIRE(out.s_up.value().shape() == std::vector<std::size_t>{4, 10, 12});
    REQUIRE(out.a_up.value().shape() == std::vector<std::size_t>{10, 12});
}

TEST_CASE("attention pipeline equals the hand-composed op chain") {
    Rng rng(32);
    Tape tape;
    AttnFixture fx(rng);
    AttentionOut out = attention_forward(tape.constant(fx.x), tape.constant(fx.feat_w),
                                         tape.constant(fx.feat_b), tape.constant(fx.act_w),
                                         tape.constant(fx.act_b), 9, 11);

    Var pooled = ops::temporal_avg_pool(tape.constant(fx.x));
    Var s = ops::relu(ops::add_channel_bias(
        ops::conv2d_spatial(pooled, tape.constant(fx.feat_w), {1, 1}, {1, 1}),
        tape.constant(fx.feat_b)));
    Var a = ops::reshape(ops::add_channel_bias(ops::conv2d_spatial(s, tape.constant(fx.act_w)),
                                               tape.constant(fx.act_b)),
                         {5, 6});
    Var m = ops::spatial_softmax(a);
    Var s_up = ops::upsample_bilinear(s, 9, 11);
    Var a_up = ops::upsample_bilinear(a, 9, 11);

    for (std::size_t i = 0; i < m.value().numel(); ++i)
        REQUIRE_THAT(out.attention.value()[i], Catch::Matchers::WithinAbs(m.value()[i], 1e-12));
    for (std::size_t i = 0; i < s_up.value().numel(); ++i)
        REQUIRE_THAT(out.s_up.value()[i], Catch::Matchers::WithinAbs(s_up.value()[i], 1e-12));
    for (std::size_t i = 0; i < a_up.value().numel(); ++i)
        REQUIRE_THAT(out.a_up.value()[i], Catch::Matchers::WithinAbs(a_up.value()[i], 1e-12));
}

TEST_CASE("attention map ignores constant activation bias shifts") {
    Rng rng(33);
    Tape tape;
    AttnFixture fx(rng);
    auto run = [&](double bias_shift) {
        Tensor ab = fx.act_b;
        ab[0] += bias_shift;
        return attention_forward(tape.constant(fx.x), tape.constant(fx.feat_w),
                                 tape.constant(fx.feat_b), tape.constant(fx.act_w),
                                 tape.constant(ab), 8, 8)
            .attention;
    };
    Var m0 = run(0.0);
    Var m1 = run(7.5);
    for (std::size_t i = 0; i < m0.value().numel(); ++i)
        REQUIRE_THAT(m0.value()[i], Catch::Matchers::WithinAbs(m1.value()[i], 1e-12));
}

TEST_CASE("apply_attention leaves features unchanged for a zero map") {
    Rng rng(34);
    Tape tape;
    Tensor x = random_tensor(rng, {2, 3, 4, 4});
    Var y = apply_attention(tape.constant(x), tape.constant(Tensor::zeros({4, 4})));
    for (std::size_t i = 0; i < x.numel(); ++i) REQUIRE(y.value()[i] == x[i]);
}

TEST_CASE("uniform attention scales uniformly by 1 + 1/(h*w)") {
    Rng rng(35);
    Tape tape;
    Tensor x = random_tensor(rng, {2, 2, 3, 3});
    Var m = tape.constant(Tensor::full({3, 3}, 1.0 / 9.0));
    Var y = apply_attention(tape.constant(x), m);
    for (std::size_t i = 0; i < x.numel(); ++i)
        REQUIRE_THAT(y.value()[i], Catch::Matchers::WithinAbs((1.0 + 1.0 / 9.0) * x[i], 1e-12));
}

TEST_CASE("gradients reach the activation kernel through a downstream loss") {
    Rng rng(36);
    AttnFixture fx(rng);
    // loss = NSS of the sigmoid of the upsampled activation map
    Tensor fix = Tensor::zeros({8, 8});
    fix.at(2u, 3u) = 1.0;
    fix.at(6u, 1u) = 1.0;
    const double err = gradcheck::finite_diff_check(
        {fx.act_w, fx.feat_w}, [&](Tape& t, std::vector<Var>& v) {
            AttentionOut out =
                attention_forward(t.constant(fx.x), v[1], t.constant(fx.feat_b), v[0],
                                  t.constant(fx.act_b), 8, 8);
            return ops::nss_loss(ops::sigmoid(out.a_up), fix);
        });
    REQUIRE(err < 1e-4);
}
