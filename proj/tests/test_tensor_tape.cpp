#include <limits>

#include "doctest.h"
#include "shiftlab/core/ops.hpp"
#include "shiftlab/core/rng.hpp"
#include "support/oracles.hpp"

using namespace shiftlab;

TEST_CASE("tensor shape bookkeeping") {
    Tensor<float> t({2, 3, 4});
    CHECK(t.numel() == 24);
    CHECK(t.rank() == 3);
    CHECK(t.dim(1) == 3);
    for (Eigen::Index i = 0; i < t.numel(); ++i) CHECK(t[i] == 0.0f);

    CHECK(shape_str({2, 3}) == "[2x3]");
    CHECK(shape_numel({}) == 1);
    CHECK_THROWS_AS(shape_numel({2, -1}), ShapeError);
    CHECK_THROWS_AS(Tensor<float>({2, 2}, {1.0f, 2.0f, 3.0f}), ShapeError);
}

TEST_CASE("tensor row-major addressing") {
    Tensor<float> t({2, 3, 2, 2});
    t.at(1, 2, 1, 0) = 7.0f;
    // flat index ((1*3+2)*2+1)*2+0 = 22
    CHECK(t[22] == 7.0f);
    Tensor<float> m({2, 3}, {1, 2, 3, 4, 5, 6});
    CHECK(m.at(1, 0) == 4.0f);
    CHECK(m.matrix(2, 3)(1, 2) == 6.0f);
}

TEST_CASE("tensor reshape preserves data") {
    Tensor<float> t({2, 3}, {1, 2, 3, 4, 5, 6});
    Tensor<float> r = t.reshaped({3, 2});
    CHECK(r.at(2, 1) == 6.0f);
    CHECK_THROWS_AS(t.reshaped({4, 2}), ShapeError);
}

TEST_CASE("tensor finiteness guards") {
    Tensor<float> t({2});
    t[0] = std::numeric_limits<float>::quiet_NaN();
    CHECK_FALSE(t.all_finite());
    Tape<float> tape;
    CHECK_THROWS_AS(tape.leaf(t), NumericsError);
}

TEST_CASE("backward of a sum is all ones") {
    Tape<float> tape;
    auto x = tape.leaf(Tensor<float>({2, 3}, {1, 2, 3, 4, 5, 6}), true);
    auto s = sum(x);
    CHECK(s.value()[0] == doctest::Approx(21.0));
    tape.backward(s);
    for (Eigen::Index i = 0; i < 6; ++i) CHECK(x.grad()[i] == 1.0f);
}

TEST_CASE("backward rejects non-scalar losses and foreign tapes") {
    Tape<float> tape;
    auto x = tape.leaf(Tensor<float>({2}, {1, 2}), true);
    CHECK_THROWS_AS(tape.backward(x), ShapeError);
    Tape<float> other;
    CHECK_THROWS_AS(other.backward(x), Error);
}

TEST_CASE("gradients accumulate across reuse of a node") {
    // loss = sum(x) + sum(x) => d/dx = 2
    Tape<float> tape;
    auto x = tape.leaf(Tensor<float>({3}, {1, 2, 3}), true);
    auto a = sum(x);
    auto b = sum(x);
    Tensor<float> two = a.value();
    two.array() += b.value().array();
    auto total = tape.record(std::move(two), {a.id, b.id}, [=](Tape<float>& t, int self) {
        t.accumulate(a.id, t.grad(self));
        t.accumulate(b.id, t.grad(self));
    });
    tape.backward(total);
    for (Eigen::Index i = 0; i < 3; ++i) CHECK(x.grad()[i] == 2.0f);
}

TEST_CASE("eval-mode graphs record no backward closures") {
    Tape<float> tape;
    auto x = tape.leaf(Tensor<float>({1, 1, 4, 4}), false);
    auto y = relu(x);
    CHECK_FALSE(y.requires_grad());
}

TEST_CASE("rng streams are deterministic and splittable") {
    Rng a(42), b(42);
    for (int i = 0; i < 100; ++i) CHECK(a.uniform() == b.uniform());
    CHECK(derive_seed(42, 1) != derive_seed(42, 2));
    CHECK(derive_seed(42, 1) == derive_seed(42, 1));

    Rng c(7);
    double mean = 0;
    const int n = 20000;
    for (int i = 0; i < n; ++i) mean += c.uniform(-1.0, 3.0);
    mean /= n;
    CHECK(mean == doctest::Approx(1.0).epsilon(0.05));

    Rng d(9);
    int lo = 0, hi = 0;
    for (int i = 0; i < 10000; ++i) {
        const int v = d.uniform_int(2, 5);
        CHECK(v >= 2);
        CHECK(v <= 5);
        if (v == 2) ++lo;
        if (v == 5) ++hi;
    }
    CHECK(lo > 2000);
    CHECK(hi > 2000);
}

TEST_CASE("rng normal moments") {
    Rng rng(11);
    double mean = 0, sq = 0;
    const int n = 100000;
    for (int i = 0; i < n; ++i) {
        const double v = rng.normal(2.0, 3.0);
        mean += v;
        sq += v * v;
    }
    mean /= n;
    const double var = sq / n - mean * mean;
    CHECK(mean == doctest::Approx(2.0).epsilon(0.02));
    CHECK(var == doctest::Approx(9.0).epsilon(0.05));
}
