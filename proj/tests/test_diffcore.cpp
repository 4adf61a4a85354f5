#include <doctest.h>

#include <cmath>

#include "decennt/rng.hpp"
#include "decennt/tape.hpp"
#include "gradcheck.hpp"

using namespace decennt;
using testsupport::finite_difference_check;

namespace {

TensorPtr random_tensor(Rng& rng, std::vector<std::size_t> shape, bool rg, double lo = -1.0, double hi = 1.0) {
    std::vector<double> v(DiffTensor::element_count(shape));
    for (auto& x : v) x = rng.uniform(lo, hi);
    return make_tensor(std::move(shape), std::move(v), rg);
}

}  // namespace

TEST_CASE("matmul identity and direct arithmetic") {
    Tape tape;
    auto a = make_tensor({2, 2}, {1, 2, 3, 4});
    auto eye = make_tensor({2, 2}, {1, 0, 0, 1});
    auto prod = tape.matmul(a, eye);
    CHECK(prod->values == std::vector<double>{1, 2, 3, 4});

    auto row = make_tensor({1, 2}, {1, 2});
    auto col = make_tensor({2, 1}, {3, 4});
    CHECK(tape.matmul(row, col)->values[0] == doctest::Approx(11.0).epsilon(1e-15));

    CHECK_THROWS_AS((void)tape.matmul(row, row), Error);
}

TEST_CASE("matmul gradient vs finite differences") {
    Rng rng(11);
    auto a = random_tensor(rng, {3, 4}, true);
    auto b = random_tensor(rng, {4, 2}, true);

    Tape tape;
    auto loss = tape.sum_all(tape.matmul(a, b));
    tape.backward(loss);

    auto loss_fn = [&] {
        Tape t(false);
        return t.sum_all(t.matmul(a, b))->values[0];
    };
    const auto check = finite_difference_check(loss_fn, {a, b});
    CHECK(check.coordinates == 20);
    CHECK(check.max_rel_err <= 1e-4);
}

TEST_CASE("block matmul variants match per-block dense products") {
    Rng rng(12);
    auto a = random_tensor(rng, {6, 3}, true);  // 2 blocks of 3 rows
    auto b = random_tensor(rng, {6, 3}, true);

    Tape tape;
    auto nt = tape.block_matmul_nt(a, b, 2);
    REQUIRE(nt->shape == std::vector<std::size_t>{6, 3});
    for (std::size_t s = 0; s < 2; ++s) {
        for (std::size_t i = 0; i < 3; ++i) {
            for (std::size_t j = 0; j < 3; ++j) {
                double expect = 0.0;
                for (std::size_t k = 0; k < 3; ++k) expect += a->at(s * 3 + i, k) * b->at(s * 3 + j, k);
                CHECK(nt->at(s * 3 + i, j) == doctest::Approx(expect).epsilon(1e-12));
            }
        }
    }

    auto loss = tape.sum_all(tape.block_matmul_nn(nt, a, 2));
    tape.backward(loss);
    auto loss_fn = [&] {
        Tape t(false);
        return t.sum_all(t.block_matmul_nn(t.block_matmul_nt(a, b, 2), a, 2))->values[0];
    };
    CHECK(finite_difference_check(loss_fn, {a, b}).max_rel_err <= 1e-4);
}

TEST_CASE("activations: fixed points and derivative accuracy") {
    Tape tape;
    auto x = make_tensor({3}, {0.0, 0.0, -3.0});
    CHECK(tape.apply_activation(x, Activation::Sigmoid)->values[0] == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(tape.apply_activation(x, Activation::Tanh)->values[1] == 0.0);
    CHECK(tape.apply_activation(x, Activation::Relu)->values[2] == 0.0);

    // sigmoid' via the backward path against central differences
    for (double point : {-2.0, 0.0, 2.0}) {
        auto leaf = make_tensor({1}, {point}, true);
        Tape t2;
        auto loss = t2.sum_all(t2.apply_activation(leaf, Activation::Sigmoid));
        t2.backward(loss);
        auto loss_fn = [&] {
            Tape t(false);
            return t.sum_all(t.apply_activation(leaf, Activation::Sigmoid))->values[0];
        };
        CHECK(finite_difference_check(loss_fn, {leaf}).max_rel_err <= 1e-6);
    }
}

TEST_CASE("softmax rows: symmetry, analytic values, shift invariance") {
    Tape tape;
    auto sym = tape.softmax_rows(make_tensor({1, 2}, {0.0, 0.0}));
    CHECK(sym->values[0] == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(sym->values[1] == doctest::Approx(0.5).epsilon(1e-15));

    auto an = tape.softmax_rows(make_tensor({1, 2}, {std::log(2.0), 0.0}));
    CHECK(an->values[0] == doctest::Approx(2.0 / 3.0).epsilon(1e-14));
    CHECK(an->values[1] == doctest::Approx(1.0 / 3.0).epsilon(1e-14));

    Rng rng(5);
    auto x = random_tensor(rng, {4, 6}, false, -5.0, 5.0);
    auto shifted = make_tensor(x->shape, x->values);
    for (auto& v : shifted->values) v += 7.3;
    auto y0 = tape.softmax_rows(x);
    auto y1 = tape.softmax_rows(shifted);
    for (std::size_t i = 0; i < y0->size(); ++i) CHECK(std::abs(y0->values[i] - y1->values[i]) <= 1e-12);
}

TEST_CASE("softmax rows sum to one over 1000 random matrices") {
    Rng rng(99);
    for (int iter = 0; iter < 1000; ++iter) {
        const std::size_t r = 1 + rng.below(5), c = 1 + rng.below(7);
        Tape tape;
        auto y = tape.softmax_rows(random_tensor(rng, {r, c}, false, -50.0, 50.0));
        for (std::size_t i = 0; i < r; ++i) {
            double s = 0.0;
            for (std::size_t j = 0; j < c; ++j) {
                const double v = y->at(i, j);
                CHECK(std::isfinite(v));
                CHECK(v >= 0.0);
                s += v;
            }
            CHECK(std::abs(s - 1.0) <= 1e-12);
        }
    }
}

TEST_CASE("hadamard arithmetic, identity and zero-gradient flow") {
    Tape tape;
    auto a = make_tensor({2, 2}, {1, 2, 3, 4});
    auto b = make_tensor({2, 2}, {2, 0, 1, 3});
    CHECK(tape.hadamard(a, b)->values == std::vector<double>{2, 0, 3, 12});

    auto ones = make_tensor({2, 2}, {1, 1, 1, 1});
    CHECK(tape.hadamard(a, ones)->values == a->values);
    CHECK_THROWS_AS((void)tape.hadamard(a, make_tensor({1, 2}, {1, 1})), Error);

    auto x = make_tensor({1, 2}, {1.5, -0.5}, true);
    auto zero = make_tensor({1, 2}, {0.0, 0.0}, true);
    Tape t2;
    auto out = t2.hadamard(x, zero);
    CHECK(out->values == std::vector<double>{0.0, 0.0});
    auto loss = t2.sum_all(out);
    t2.backward(loss);
    auto loss_fn = [&] {
        Tape t(false);
        return t.sum_all(t.hadamard(x, zero))->values[0];
    };
    CHECK(finite_difference_check(loss_fn, {x, zero}).max_rel_err <= 1e-4);
}

TEST_CASE("concat, sum_over and flatten/reshape round trip") {
    Tape tape;
    const TensorPtr vecs[] = {make_tensor({2}, {1, 2}), make_tensor({1}, {3})};
    CHECK(tape.concat(vecs, 0)->values == std::vector<double>{1, 2, 3});

    auto m = make_tensor({2, 2}, {1, 2, 3, 4});
    CHECK(tape.sum_over(m, Axis::Rows)->values == std::vector<double>{4, 6});
    CHECK(tape.sum_over(m, Axis::Cols)->values == std::vector<double>{3, 7});

    auto x = make_tensor({2, 3}, {1, 2, 3, 4, 5, 6}, true);
    Tape t2;
    auto flat = t2.flatten(x);
    REQUIRE(flat->shape == std::vector<std::size_t>{6});
    auto back = t2.reshape(flat, {2, 3});
    CHECK(back->values == x->values);
    auto loss = t2.sum_all(t2.hadamard(back, back));
    t2.backward(loss);
    for (std::size_t i = 0; i < 6; ++i) {
        CHECK(x->grad[i] == doctest::Approx(2.0 * x->values[i]).epsilon(1e-12));
    }

    const TensorPtr bad[] = {make_tensor({2, 2}, {1, 2, 3, 4}), make_tensor({2, 3}, {1, 2, 3, 4, 5, 6})};
    CHECK_THROWS_AS((void)tape.concat(bad, 0), Error);
}

TEST_CASE("interleave and repeat rows route values and gradients") {
    auto a = make_tensor({2, 2}, {1, 2, 3, 4}, true);
    auto b = make_tensor({2, 2}, {5, 6, 7, 8}, true);
    Tape tape;
    const TensorPtr parts[] = {a, b};
    auto mixed = tape.interleave_rows(parts);
    CHECK(mixed->values == std::vector<double>{1, 2, 5, 6, 3, 4, 7, 8});

    auto rep = tape.repeat_rows(a, 3);
    REQUIRE(rep->shape == std::vector<std::size_t>{6, 2});
    CHECK(rep->values[0] == 1.0);
    CHECK(rep->values[4] == 1.0);
    CHECK(rep->values[6] == 3.0);

    auto loss = tape.sum_all(tape.hadamard(mixed, mixed));
    tape.backward(loss);
    auto loss_fn = [&] {
        Tape t(false);
        const TensorPtr p[] = {a, b};
        auto mx = t.interleave_rows(p);
        return t.sum_all(t.hadamard(mx, mx))->values[0];
    };
    CHECK(finite_difference_check(loss_fn, {a, b}).max_rel_err <= 1e-4);
}

TEST_CASE("block reductions are bitwise insensitive to row order") {
    Rng rng(21);
    auto x = random_tensor(rng, {8, 3}, false);
    auto w = random_tensor(rng, {1, 8}, false, 0.0, 1.0);

    // reversed row order within the single block
    auto x_rev = make_tensor({8, 3}, std::vector<double>(24, 0.0));
    auto w_rev = make_tensor({1, 8}, std::vector<double>(8, 0.0));
    for (std::size_t t = 0; t < 8; ++t) {
        w_rev->values[7 - t] = w->values[t];
        for (std::size_t j = 0; j < 3; ++j) x_rev->values[(7 - t) * 3 + j] = x->values[t * 3 + j];
    }

    Tape tape;
    CHECK(tape.block_sum_rows(x, 1)->values == tape.block_sum_rows(x_rev, 1)->values);
    CHECK(tape.block_weighted_rows(w, x, 1)->values == tape.block_weighted_rows(w_rev, x_rev, 1)->values);
}

TEST_CASE("batchnorm: two-point column, degenerate variance, gradients") {
    Rng rng(31);
    auto bn = BatchNormParams::init(1);
    Tape tape;
    auto y = tape.batchnorm(make_tensor({2, 1}, {1.0, 3.0}), bn, true);
    CHECK(y->values[0] == doctest::Approx(-0.999995).epsilon(1e-6));
    CHECK(y->values[1] == doctest::Approx(0.999995).epsilon(1e-6));

    auto bn2 = BatchNormParams::init(1);
    auto yc = tape.batchnorm(make_tensor({3, 1}, {5.0, 5.0, 5.0}), bn2, true);
    for (double v : yc->values) CHECK(v == doctest::Approx(0.0).epsilon(1e-12));

    auto bn3 = BatchNormParams::init(1);
    CHECK_THROWS_AS((void)tape.batchnorm(make_tensor({1, 1}, {2.0}), bn3, true), Error);

    // gradient through train-mode normalization, mixed so every path is live
    auto bn4 = BatchNormParams::init(3);
    auto x = random_tensor(rng, {4, 3}, true);
    std::vector<double> weights(12);
    for (std::size_t i = 0; i < 12; ++i) weights[i] = 0.3 + 0.1 * static_cast<double>(i);
    auto wtens = make_tensor({4, 3}, weights);
    Tape t3;
    auto loss3 = t3.sum_all(t3.hadamard(t3.batchnorm(x, bn4, true), wtens));
    t3.backward(loss3);
    auto loss_fn = [&] {
        Tape t(false);
        return t.sum_all(t.hadamard(t.batchnorm(x, bn4, true), wtens))->values[0];
    };
    CHECK(finite_difference_check(loss_fn, {x, bn4.scale, bn4.shift}).max_rel_err <= 1e-4);
}

TEST_CASE("batchnorm inference uses running statistics") {
    auto bn = BatchNormParams::init(2);
    bn.running_mean = {1.0, -1.0};
    bn.running_var = {4.0, 0.25};
    Tape tape;
    auto y = tape.batchnorm(make_tensor({1, 2}, {3.0, 0.0}), bn, false);
    CHECK(y->values[0] == doctest::Approx((3.0 - 1.0) / std::sqrt(4.0 + 1e-5)).epsilon(1e-12));
    CHECK(y->values[1] == doctest::Approx(1.0 / std::sqrt(0.25 + 1e-5)).epsilon(1e-12));
}

TEST_CASE("cross entropy: uniform, confident, gradient") {
    Tape tape;
    const int label0[] = {0};
    auto uniform = tape.cross_entropy_logits(make_tensor({1, 2}, {0.0, 0.0}), label0);
    CHECK(uniform->values[0] == doctest::Approx(std::log(2.0)).epsilon(1e-12));

    auto confident = tape.cross_entropy_logits(make_tensor({1, 2}, {100.0, 0.0}), label0);
    CHECK(confident->values[0] == doctest::Approx(0.0).epsilon(1e-12));

    const int bad[] = {2};
    CHECK_THROWS_AS((void)tape.cross_entropy_logits(make_tensor({1, 2}, {0.0, 0.0}), bad), Error);

    Rng rng(7);
    auto logits = random_tensor(rng, {3, 2}, true);
    const int labels[] = {0, 1, 0};
    Tape t2;
    auto loss = t2.cross_entropy_logits(logits, labels);
    t2.backward(loss);
    auto loss_fn = [&] {
        Tape t(false);
        return t.cross_entropy_logits(logits, labels)->values[0];
    };
    CHECK(finite_difference_check(loss_fn, {logits}).max_rel_err <= 1e-4);
}

TEST_CASE("l1 norm: values and subgradient away from zero") {
    Tape tape;
    const TensorPtr zeros[] = {make_tensor({2}, {0.0, 0.0})};
    CHECK(tape.l1_norm(zeros)->values[0] == 0.0);

    const TensorPtr two[] = {make_tensor({2}, {1.0, -2.0}), make_tensor({1}, {0.5})};
    CHECK(tape.l1_norm(two)->values[0] == doctest::Approx(3.5).epsilon(1e-15));

    Rng rng(13);
    std::vector<double> v(6);
    for (auto& x : v) {
        do {
            x = rng.uniform(-1.0, 1.0);
        } while (std::abs(x) <= 0.1);
    }
    auto p = make_tensor({6}, v, true);
    Tape t2;
    const TensorPtr params[] = {p};
    auto loss = t2.l1_norm(params);
    t2.backward(loss);
    auto loss_fn = [&] {
        Tape t(false);
        const TensorPtr ps[] = {p};
        return t.l1_norm(ps)->values[0];
    };
    CHECK(finite_difference_check(loss_fn, {p}).max_rel_err <= 1e-6);
    for (std::size_t i = 0; i < 6; ++i) {
        CHECK(p->grad[i] == (p->values[i] > 0.0 ? 1.0 : -1.0));
    }
}

TEST_CASE("backward: ones for sum, analytic for quadratic, protocol errors") {
    auto x = make_tensor({2, 2}, {0.3, -0.7, 1.1, 0.0}, true);
    Tape tape;
    auto loss = tape.sum_all(x);
    tape.backward(loss);
    CHECK(x->grad == std::vector<double>(4, 1.0));

    auto y = make_tensor({2}, {1.0, 2.0}, true);
    Tape t2;
    auto loss2 = t2.sum_all(t2.hadamard(y, y));
    t2.backward(loss2);
    CHECK(y->grad[0] == doctest::Approx(2.0).epsilon(1e-15));
    CHECK(y->grad[1] == doctest::Approx(4.0).epsilon(1e-15));

    CHECK_THROWS_AS(t2.backward(loss2), Error);  // tape consumed

    Tape t3;
    auto non_scalar = t3.hadamard(y, y);
    CHECK_THROWS_AS(t3.backward(non_scalar), Error);

    Tape t4;
    auto no_grad = t4.sum_all(make_tensor({2}, {1.0, 2.0}));
    CHECK_THROWS_AS(t4.backward(no_grad), Error);
}

TEST_CASE("double backward rejection is deterministic") {
    for (int i = 0; i < 5; ++i) {
        auto x = make_tensor({2}, {1.0, 2.0}, true);
        Tape tape;
        auto loss = tape.sum_all(x);
        tape.backward(loss);
        CHECK_THROWS_WITH_AS(tape.backward(loss), "backward: tape already consumed; re-run the forward pass",
                             Error);
    }
}

TEST_CASE("fuzz: pipelines over finite inputs never produce NaN or Inf") {
    Rng rng(777);
    for (int iter = 0; iter < 200; ++iter) {
        const std::size_t r = 2 + rng.below(4), c = 2 + rng.below(4);
        Tape tape;
        auto a = random_tensor(rng, {r, c}, true, -30.0, 30.0);
        auto b = random_tensor(rng, {c, r}, true, -30.0, 30.0);
        auto m = tape.matmul(a, b);
        auto act = tape.apply_activation(m, iter % 2 ? Activation::Tanh : Activation::Sigmoid);
        auto soft = tape.softmax_rows(tape.matmul(act, random_tensor(rng, {r, c}, false, -3.0, 3.0)));
        auto loss = tape.sum_all(tape.hadamard(soft, soft));
        tape.backward(loss);
        for (double v : soft->values) CHECK(std::isfinite(v));
        for (double g : a->grad) CHECK(std::isfinite(g));
        for (double g : b->grad) CHECK(std::isfinite(g));
    }
}
