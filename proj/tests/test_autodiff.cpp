#include <catch2/catch_amalgamated.hpp>

#include "vmtl/gradcheck.hpp"
#include "vmtl/ops.hpp"

using namespace vmtl;

TEST_CASE("backward of sum gives all-ones gradient") {
    Tape tape;
    Var x = tape.leaf(Tensor::full({2, 3}, 4.0), true);
    Var root = ops::sum_all(x);
    tape.backward(root);
    const Tensor* g = tape.grad(x);
    REQUIRE(g != nullptr);
    for (std::size_t i = 0; i < g->numel(); ++i) REQUIRE((*g)[i] == 1.0);
}

TEST_CASE("backward through sigmoid at zero uses sigma'(0)=0.25") {
    Tape tape;
    Var w = tape.leaf(Tensor::scalar(0.0), true);
    const double c = 3.0;
    Var root = ops::scalar_mul(ops::sigmoid(w), c);
    tape.backward(root);
    REQUIRE_THAT((*tape.grad(w))[0], Catch::Matchers::WithinAbs(0.25 * c, 1e-15));
}

TEST_CASE("backward requires a scalar root") {
    Tape tape;
    Var x = tape.leaf(Tensor::zeros({2}), true);
    REQUIRE_THROWS_AS(tape.backward(x), ContractError);
}

TEST_CASE("gradients accumulate across fan-out") {
    // root = x*x computed with the same node twice: d/dx = 2x
    Tape tape;
    Var x = tape.leaf(Tensor::scalar(3.0), true);
    Var root = ops::mul(x, x);
    tape.backward(root);
    REQUIRE_THAT((*tape.grad(x))[0], Catch::Matchers::WithinAbs(6.0, 1e-15));
}

TEST_CASE("shared subexpression equals the unshared rewrite") {
    // f(x) = relu(x)·a + relu(x)·b  vs  g(x) = relu(x)·a + relu(x')·b
    Rng rng(20);
    Tensor xv({4});
    for (std::size_t i = 0; i < 4; ++i) xv[i] = rng.uniform(-1, 1);
    Tensor a({4}), b({4});
    for (std::size_t i = 0; i < 4; ++i) {
        a[i] = rng.uniform(-1, 1);
        b[i] = rng.uniform(-1, 1);
    }

    Tape shared;
    Var x1 = shared.leaf(xv, true);
    Var r = ops::relu(x1);
    Var root1 = ops::sum_all(ops::add(ops::mul(r, shared.constant(a)),
                                      ops::mul(r, shared.constant(b))));
    shared.backward(root1);

    Tape split;
    Var x2 = split.leaf(xv, true);
    Var root2 = ops::sum_all(ops::add(ops::mul(ops::relu(x2), split.constant(a)),
                                      ops::mul(ops::relu(x2), split.constant(b))));
    split.backward(root2);

    REQUIRE(root1.value().item() == root2.value().item());
    for (std::size_t i = 0; i < 4; ++i)
        REQUIRE((*shared.grad(x1))[i] == (*split.grad(x2))[i]);
}

TEST_CASE("constants never get gradient slots") {
    Tape tape;
    Var x = tape.leaf(Tensor::scalar(1.0), true);
    Var c = tape.constant(Tensor::scalar(2.0));
    Var root = ops::mul(x, c);
    tape.backward(root);
    REQUIRE(tape.grad(c) == nullptr);
    REQUIRE((*tape.grad(x))[0] == 2.0);
}

TEST_CASE("reachable parameters get populated slots even when grads cancel") {
    Tape tape;
    Var x = tape.leaf(Tensor::scalar(5.0), true);
    // x + (-1)*x: gradient is exactly zero but the slot must exist
    Var root = ops::add(x, ops::scalar_mul(x, -1.0));
    tape.backward(root);
    const Tensor* g = tape.grad(x);
    REQUIRE(g != nullptr);
    REQUIRE((*g)[0] == 0.0);
}

TEST_CASE("linear ops pass finite differences at machine precision") {
    Rng rng(21);
    Tensor x({3, 3});
    for (std::size_t i = 0; i < 9; ++i) x[i] = rng.uniform(-1, 1);
    const double err = gradcheck::finite_diff_check({x}, [](Tape&, std::vector<Var>& v) {
        return ops::sum_all(ops::scalar_mul(v[0], 1.5));
    });
    REQUIRE(err < 1e-9);
}

TEST_CASE("every registered op and loss passes finite differences") {
    Rng rng(22);
    for (auto& check : gradcheck::standard_checks()) {
        INFO(check.name);
        const double err = check.run(rng, 5);
        CAPTURE(err);
        REQUIRE(err < 1e-4);
    }
}

TEST_CASE("finite_diff_check flags a corrupted gradient rule") {
    // A deliberately wrong backward: claims d(2x)/dx = 3.
    auto bad_scale = [](Var x) {
        Tape& t = *x.tape;
        const Tensor& xv = t.value(x.id);
        Tensor out(xv.shape());
        for (std::size_t i = 0; i < out.numel(); ++i) out[i] = 2.0 * xv[i];
        return t.push(std::move(out), {x.id}, [](Tape& t, std::size_t self) {
            const Tensor& g = *t.grad_ptr(self);
            if (Tensor* gx = t.grad_slot(t.parents(self)[0]))
                for (std::size_t i = 0; i < g.numel(); ++i) (*gx)[i] += 3.0 * g[i];
        });
    };
    Tensor x = Tensor::full({2}, 1.0);
    const double err = gradcheck::finite_diff_check({x}, [&](Tape&, std::vector<Var>& v) {
        return ops::sum_all(bad_scale(v[0]));
    });
    REQUIRE(err > 1e-4);
}
