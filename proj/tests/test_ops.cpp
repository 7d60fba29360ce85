#include <catch2/catch_amalgamated.hpp>
#include "vmtl/gradcheck.hpp"

#include "oracles.hpp"
#include "vmtl/conv.hpp"
#include "vmtl/ops.hpp"
#include "vmtl/rng.hpp"

using namespace vmtl;

namespace {

Tensor random_tensor(Rng& rng, std::vector<std::size_t> shape, double lo = -1, double hi = 1) {
    Tensor t(std::move(shape));
    for (std::size_t i = 0; i < t.numel(); ++i) t[i] = rng.uniform(lo, hi);
    return t;
}

} // namespace

TEST_CASE("conv3d identity kernel returns the input") {
    Rng rng(1);
    const std::size_t C = 3;
    Tensor x = random_tensor(rng, {C, 4, 5, 5});
    Tensor k({C, C, 1, 1, 1});
    for (std::size_t c = 0; c < C; ++c) k.at(c, c, 0, 0, 0) = 1.0;

    Tape tape;
    Var y = ops::conv3d(tape.constant(x), tape.constant(k));
    REQUIRE(y.value().shape() == x.shape());
    for (std::size_t i = 0; i < x.numel(); ++i) REQUIRE(y.value()[i] == x[i]);
}

TEST_CASE("conv3d full-window all-ones kernel sums the window") {
    Tensor x = Tensor::full({1, 2, 2, 2}, 1.0);
    Tensor k = Tensor::full({1, 1, 2, 2, 2}, 1.0);
    Tape tape;
    Var y = ops::conv3d(tape.constant(x), tape.constant(k));
    REQUIRE(y.value().shape() == std::vector<std::size_t>{1, 1, 1, 1});
    REQUIRE(y.value()[0] == 8.0);
}

TEST_CASE("conv3d matches the naive 7-loop oracle") {
    Rng rng(2);
    Tensor x = random_tensor(rng, {2, 4, 6, 6});
    Tensor k = random_tensor(rng, {3, 2, 3, 3, 3});
    Tape tape;
    Var y = ops::conv3d(tape.constant(x), tape.constant(k), {1, 2, 2}, {1, 1, 1});
    Tensor ref = oracle::conv3d_naive(x, k, 1, 2, 2, 1, 1, 1);
    REQUIRE(y.value().shape() == ref.shape());
    for (std::size_t i = 0; i < ref.numel(); ++i)
        REQUIRE_THAT(y.value()[i], Catch::Matchers::WithinAbs(ref[i], 1e-12));
}

TEST_CASE("conv3d matches the oracle on large output planes") {
    // output plane >= 32 exercises the non-transposed im2col path
    Rng rng(23);
    Tensor x = random_tensor(rng, {2, 3, 10, 10});
    Tensor k = random_tensor(rng, {3, 2, 3, 3, 3});
    Tape tape;
    Var y = ops::conv3d(tape.constant(x), tape.constant(k), {1, 1, 1}, {1, 1, 1});
    Tensor ref = oracle::conv3d_naive(x, k, 1, 1, 1, 1, 1, 1);
    REQUIRE(y.value().shape() == ref.shape());
    for (std::size_t i = 0; i < ref.numel(); ++i)
        REQUIRE_THAT(y.value()[i], Catch::Matchers::WithinAbs(ref[i], 1e-12));

    // and its gradient path
    const double err = gradcheck::finite_diff_check(
        {x, k}, [](Tape& t, std::vector<Var>& v) {
            return ops::mean_all(ops::conv3d(v[0], v[1], {1, 1, 1}, {1, 1, 1}));
        });
    REQUIRE(err < 1e-5);
}

TEST_CASE("conv3d output extents follow the floor formula") {
    Rng rng(3);
    Tensor x = random_tensor(rng, {1, 5, 7, 9});
    Tensor k = random_tensor(rng, {2, 1, 3, 3, 3});
    Tape tape;
    Var y = ops::conv3d(tape.constant(x), tape.constant(k), {2, 2, 3}, {1, 0, 1});
    // T' = (5+2-3)/2+1 = 3, H' = (7-3)/2+1 = 3, W' = (9+2-3)/3+1 = 3
    REQUIRE(y.value().shape() == std::vector<std::size_t>{2, 3, 3, 3});
}

TEST_CASE("conv3d rejects channel mismatch") {
    Tape tape;
    Var x = tape.constant(Tensor::zeros({2, 2, 2, 2}));
    Var k = tape.constant(Tensor::zeros({1, 3, 1, 1, 1}));
    REQUIRE_THROWS_AS(ops::conv3d(x, k), DimensionError);
}

TEST_CASE("conv2d identity and window-sum examples") {
    Rng rng(4);
    Tensor x = random_tensor(rng, {1, 3, 3});
    Tensor ident({1, 1, 1, 1});
    ident[0] = 1.0;
    Tape tape;
    Var y = ops::conv2d_spatial(tape.constant(x), tape.constant(ident));
    for (std::size_t i = 0; i < x.numel(); ++i) REQUIRE(y.value()[i] == x[i]);

    Var s = ops::conv2d_spatial(tape.constant(Tensor::full({1, 2, 2}, 1.0)),
                                tape.constant(Tensor::full({1, 1, 2, 2}, 1.0)));
    REQUIRE(s.value().numel() == 1);
    REQUIRE(s.value()[0] == 4.0);
}

TEST_CASE("conv2d matches the naive oracle") {
    Rng rng(5);
    Tensor x = random_tensor(rng, {3, 6, 5});
    Tensor k = random_tensor(rng, {2, 3, 3, 3});
    Tape tape;
    Var y = ops::conv2d_spatial(tape.constant(x), tape.constant(k), {2, 1}, {1, 1});
    Tensor ref = oracle::conv2d_naive(x, k, 2, 1, 1, 1);
    REQUIRE(y.value().shape() == ref.shape());
    for (std::size_t i = 0; i < ref.numel(); ++i)
        REQUIRE_THAT(y.value()[i], Catch::Matchers::WithinAbs(ref[i], 1e-12));
}

TEST_CASE("temporal_avg_pool averages frames") {
    Tensor x({1, 2, 1, 1});
    x[0] = 2.0;
    x[1] = 4.0;
    Tape tape;
    Var y = ops::temporal_avg_pool(tape.constant(x));
    REQUIRE(y.value().shape() == std::vector<std::size_t>{1, 1, 1});
    REQUIRE(y.value()[0] == 3.0);

    // T=1 squeezes without changing values
    Rng rng(6);
    Tensor one = random_tensor(rng, {3, 1, 4, 4});
    Var z = ops::temporal_avg_pool(tape.constant(one));
    for (std::size_t i = 0; i < z.value().numel(); ++i) REQUIRE(z.value()[i] == one[i]);
}

TEST_CASE("temporal_avg_pool matches a direct mean") {
    Rng rng(7);
    Tensor x = random_tensor(rng, {2, 5, 3, 4});
    Tape tape;
    Var y = ops::temporal_avg_pool(tape.constant(x));
    for (std::size_t c = 0; c < 2; ++c)
        for (std::size_t h = 0; h < 3; ++h)
            for (std::size_t w = 0; w < 4; ++w) {
                double m = 0;
                for (std::size_t t = 0; t < 5; ++t) m += x.at(c, t, h, w);
                m /= 5.0;
                REQUIRE_THAT(y.value().at(c, h, w), Catch::Matchers::WithinAbs(m, 1e-12));
            }
}

TEST_CASE("global_avg_pool gives one mean per channel") {
    Tape tape;
    Var c = ops::global_avg_pool(tape.constant(Tensor::full({3, 2, 2, 2}, 0.7)));
    REQUIRE(c.value().shape() == std::vector<std::size_t>{3});
    for (std::size_t i = 0; i < 3; ++i)
        REQUIRE_THAT(c.value()[i], Catch::Matchers::WithinAbs(0.7, 1e-15));

    Tensor halves({1, 2, 1, 1});
    halves[0] = 0.0;
    halves[1] = 1.0;
    Var h = ops::global_avg_pool(tape.constant(halves));
    REQUIRE(h.value()[0] == 0.5);

    Rng rng(8);
    Tensor x = random_tensor(rng, {2, 3, 4, 5});
    Var y = ops::global_avg_pool(tape.constant(x));
    for (std::size_t ch = 0; ch < 2; ++ch) {
        double m = 0;
        for (std::size_t i = 0; i < 60; ++i) m += x[ch * 60 + i];
        REQUIRE_THAT(y.value()[ch], Catch::Matchers::WithinAbs(m / 60.0, 1e-12));
    }
}

TEST_CASE("upsample_bilinear identity, constants and the 3x3 center") {
    Rng rng(9);
    Tensor x = random_tensor(rng, {2, 4, 4});
    Tape tape;
    Var same = ops::upsample_bilinear(tape.constant(x), 4, 4);
    for (std::size_t i = 0; i < x.numel(); ++i) REQUIRE(same.value()[i] == x[i]);

    Var c = ops::upsample_bilinear(tape.constant(Tensor::full({1, 2, 3}, 2.5)), 5, 7);
    for (std::size_t i = 0; i < c.value().numel(); ++i)
        REQUIRE_THAT(c.value()[i], Catch::Matchers::WithinAbs(2.5, 1e-12));

    Tensor checker({1, 2, 2});
    checker[1] = 1.0;
    checker[2] = 1.0; // [[0,1],[1,0]]
    Var up = ops::upsample_bilinear(tape.constant(checker), 3, 3);
    REQUIRE_THAT(up.value().at(0u, 1u, 1u), Catch::Matchers::WithinAbs(0.5, 1e-12));

    REQUIRE_THROWS_AS(ops::upsample_bilinear(tape.constant(x), 3, 4), DimensionError);
}

TEST_CASE("spatial_softmax is a probability map and shift invariant") {
    Tape tape;
    Var u = ops::spatial_softmax(tape.constant(Tensor::full({3, 4}, 1.7)));
    for (std::size_t i = 0; i < 12; ++i)
        REQUIRE_THAT(u.value()[i], Catch::Matchers::WithinAbs(1.0 / 12.0, 1e-15));

    Tensor two({1, 2});
    two[0] = 0.0;
    two[1] = std::log(3.0);
    Var m = ops::spatial_softmax(tape.constant(two));
    REQUIRE_THAT(m.value()[0], Catch::Matchers::WithinAbs(0.25, 1e-12));
    REQUIRE_THAT(m.value()[1], Catch::Matchers::WithinAbs(0.75, 1e-12));

    Rng rng(10);
    Tensor a = random_tensor(rng, {5, 5}, -2, 2);
    Var ma = ops::spatial_softmax(tape.constant(a));
    double total = 0.0, direct_z = 0.0;
    for (std::size_t i = 0; i < 25; ++i) direct_z += std::exp(a[i]);
    for (std::size_t i = 0; i < 25; ++i) {
        total += ma.value()[i];
        REQUIRE(ma.value()[i] > 0.0);
        REQUIRE(ma.value()[i] < 1.0);
        REQUIRE_THAT(ma.value()[i], Catch::Matchers::WithinAbs(std::exp(a[i]) / direct_z, 1e-12));
    }
    REQUIRE_THAT(total, Catch::Matchers::WithinAbs(1.0, 1e-12));

    Tensor shifted = a;
    for (std::size_t i = 0; i < 25; ++i) shifted[i] += 11.0;
    Var ms = ops::spatial_softmax(tape.constant(shifted));
    for (std::size_t i = 0; i < 25; ++i)
        REQUIRE_THAT(ms.value()[i], Catch::Matchers::WithinAbs(ma.value()[i], 1e-12));
}

TEST_CASE("elementwise basics") {
    Tape tape;
    Var s = ops::sigmoid(tape.constant(Tensor::scalar(0.0)));
    REQUIRE(s.value().item() == 0.5);

    Tensor v({2});
    v[0] = -1.0;
    v[1] = 2.0;
    Var r = ops::relu(tape.constant(v));
    REQUIRE(r.value()[0] == 0.0);
    REQUIRE(r.value()[1] == 2.0);

    Var sm = ops::softmax_vector(tape.constant(Tensor::zeros({3})));
    for (std::size_t i = 0; i < 3; ++i)
        REQUIRE_THAT(sm.value()[i], Catch::Matchers::WithinAbs(1.0 / 3.0, 1e-15));

    REQUIRE_THROWS_AS(ops::add(tape.constant(Tensor::zeros({2})),
                               tape.constant(Tensor::zeros({3}))),
                      DimensionError);
}

TEST_CASE("concat_channels stacks along dim 0") {
    Rng rng(11);
    Tensor a = random_tensor(rng, {2, 3, 3});
    Tensor b = random_tensor(rng, {1, 3, 3});
    Tape tape;
    Var y = ops::concat_channels({tape.constant(a), tape.constant(b)});
    REQUIRE(y.value().shape() == std::vector<std::size_t>{3, 3, 3});
    REQUIRE(y.value().at(2u, 1u, 1u) == b.at(0u, 1u, 1u));

    REQUIRE_THROWS_AS(
        ops::concat_channels({tape.constant(a), tape.constant(Tensor::zeros({1, 2, 3}))}),
        DimensionError);
}

TEST_CASE("batch_norm normalizes per channel and tracks running stats") {
    Rng rng(12);
    Tensor x = random_tensor(rng, {2, 3, 4, 4}, -2, 5);
    Tensor gamma = Tensor::full({2}, 1.0);
    Tensor beta = Tensor::zeros({2});
    Tensor rmean = Tensor::zeros({2});
    Tensor rvar = Tensor::full({2}, 1.0);

    Tape tape;
    Var y = ops::batch_norm(tape.constant(x), tape.constant(gamma), tape.constant(beta),
                            rmean, rvar, true);
    const std::size_t stride = 48;
    for (std::size_t c = 0; c < 2; ++c) {
        double m = 0;
        for (std::size_t i = 0; i < stride; ++i) m += y.value()[c * stride + i];
        REQUIRE_THAT(m / stride, Catch::Matchers::WithinAbs(0.0, 1e-12));
        // momentum 0.1 update pulled the running mean toward the batch mean
        double xm = 0;
        for (std::size_t i = 0; i < stride; ++i) xm += x[c * stride + i];
        xm /= stride;
        REQUIRE_THAT(rmean[c], Catch::Matchers::WithinAbs(0.1 * xm, 1e-12));
    }

    // eval mode applies the stored statistics without touching them
    Tensor rm_before = rmean;
    Var z = ops::batch_norm(tape.constant(x), tape.constant(gamma), tape.constant(beta),
                            rmean, rvar, false);
    REQUIRE(rmean[0] == rm_before[0]);
    REQUIRE(z.value().numel() == x.numel());
}

TEST_CASE("scale_by_map applies (1+M) per spatial site") {
    Rng rng(13);
    Tensor x = random_tensor(rng, {2, 2, 3, 3});
    Tensor m = random_tensor(rng, {3, 3}, 0.0, 1.0);
    Tape tape;
    Var y = ops::scale_by_map(tape.constant(x), tape.constant(m));
    for (std::size_t c = 0; c < 2; ++c)
        for (std::size_t t = 0; t < 2; ++t)
            for (std::size_t h = 0; h < 3; ++h)
                for (std::size_t w = 0; w < 3; ++w)
                    REQUIRE_THAT(y.value().at(c, t, h, w),
                                 Catch::Matchers::WithinAbs((1.0 + m.at(h, w)) * x.at(c, t, h, w),
                                                            1e-15));

    // zero map leaves features untouched; magnitudes never shrink for M >= 0
    Var same = ops::scale_by_map(tape.constant(x), tape.constant(Tensor::zeros({3, 3})));
    for (std::size_t i = 0; i < x.numel(); ++i) {
        REQUIRE(same.value()[i] == x[i]);
        REQUIRE(std::abs(y.value()[i]) >= std::abs(x[i]));
    }
}

TEST_CASE("fully_connected computes w*x + b") {
    Tensor x({2});
    x[0] = 1.0;
    x[1] = 2.0;
    Tensor w({2, 2});
    w[0] = 1.0; w[1] = 1.0; w[2] = 0.5; w[3] = -0.5;
    Tensor b({2});
    b[0] = 0.0; b[1] = 3.0;
    Tape tape;
    Var y = ops::fully_connected(tape.constant(x), tape.constant(w), tape.constant(b));
    REQUIRE(y.value()[0] == 3.0);
    REQUIRE(y.value()[1] == 2.5);
}
