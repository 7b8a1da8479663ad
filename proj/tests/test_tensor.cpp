#include <gtest/gtest.h>

#include <cmath>
#include <cstdint>
#include <limits>

#include "cnet/error.hpp"
#include "cnet/rng.hpp"
#include "cnet/tensor.hpp"

namespace {

using cnet::RandomStream;
using cnet::Shape;
using cnet::Tensor;
using cnet::TensorPtr;

TEST(Tensor, ShapeBasics) {
    auto t = Tensor<float>::create({2, 3, 4});
    EXPECT_EQ(t->rank(), 3u);
    EXPECT_EQ(t->numel(), 24);
    EXPECT_EQ(t->dim(1), 3);
    EXPECT_EQ(cnet::shape_str(t->shape()), "[2, 3, 4]");
    EXPECT_FALSE(t->requires_grad());
}

TEST(Tensor, NonPositiveDimThrows) {
    EXPECT_THROW(Tensor<float>::create({2, 0, 3}), cnet::ShapeError);
    EXPECT_THROW(Tensor<float>::create({-1}), cnet::ShapeError);
}

TEST(Tensor, FromValuesChecksCount) {
    EXPECT_THROW(Tensor<double>::from_values({2, 2}, {1.0, 2.0, 3.0}), cnet::ShapeError);
    auto t = Tensor<double>::from_values({2, 2}, {1.0, 2.0, 3.0, 4.0});
    EXPECT_DOUBLE_EQ(t->values()[3], 4.0);
}

TEST(Tensor, ItemRequiresScalar) {
    EXPECT_THROW(Tensor<float>::zeros({2})->item(), cnet::ShapeError);
    EXPECT_FLOAT_EQ(Tensor<float>::scalar(7.0f)->item(), 7.0f);
}

// The C++ standard pins the 10000th draw of a default-seeded mt19937_64;
// RandomStream must sit directly on that engine.
TEST(Rng, EngineMatchesStandardReference) {
    RandomStream rng(5489u);
    std::uint64_t v = 0;
    for (int i = 0; i < 10000; ++i) {
        v = rng.next_u64();
    }
    EXPECT_EQ(v, 9981545732273789042ull);
}

TEST(Rng, UniformBoundsAndDeterminism) {
    RandomStream a(123);
    RandomStream b(123);
    RandomStream c(124);
    bool any_diff = false;
    for (int i = 0; i < 1000; ++i) {
        const double ua = a.uniform();
        EXPECT_GE(ua, 0.0);
        EXPECT_LT(ua, 1.0);
        EXPECT_EQ(ua, b.uniform());
        any_diff = any_diff || (ua != c.uniform());
    }
    EXPECT_TRUE(any_diff);
}

TEST(Rng, UniformRangeAndIndex) {
    RandomStream rng(7);
    for (int i = 0; i < 1000; ++i) {
        const double v = rng.uniform(-2.0, 5.0);
        EXPECT_GE(v, -2.0);
        EXPECT_LT(v, 5.0);
        const auto idx = rng.uniform_index(13);
        EXPECT_LT(idx, 13u);
    }
}

TEST(Rng, NormalMoments) {
    RandomStream rng(99);
    const int n = 200000;
    double sum = 0.0;
    double sq = 0.0;
    for (int i = 0; i < n; ++i) {
        const double v = rng.normal();
        sum += v;
        sq += v * v;
    }
    const double mean = sum / n;
    const double var = sq / n - mean * mean;
    EXPECT_NEAR(mean, 0.0, 0.01);
    EXPECT_NEAR(var, 1.0, 0.02);
}

TEST(Rng, DeriveSeedSeparatesStreams) {
    const auto base = cnet::derive_seed(42, "shuffle");
    EXPECT_EQ(base, cnet::derive_seed(42, "shuffle"));
    EXPECT_NE(base, cnet::derive_seed(42, "augment"));
    EXPECT_NE(base, cnet::derive_seed(43, "shuffle"));
    EXPECT_NE(cnet::derive_seed(42, "augment", 0, 1), cnet::derive_seed(42, "augment", 1, 0));
}

TensorPtr<double> square(const TensorPtr<double>& x) {
    auto out = Tensor<double>::create(x->shape());
    for (std::int64_t i = 0; i < x->numel(); ++i) {
        out->data()[i] = x->data()[i] * x->data()[i];
    }
    out->set_autograd({x}, [x](const Tensor<double>& out_node) {
        for (std::int64_t i = 0; i < x->numel(); ++i) {
            x->grad_data()[i] += 2.0 * x->data()[i] * out_node.grad()[i];
        }
    });
    return out;
}

TEST(Autograd, ChainRule) {
    auto x = Tensor<double>::scalar(2.0, true);
    auto z = square(square(x));  // x^4, dz/dx = 4 x^3 = 32
    z->backward();
    EXPECT_DOUBLE_EQ(x->grad()[0], 32.0);
}

TEST(Autograd, SharedNodeAccumulates) {
    auto x = Tensor<double>::scalar(3.0, true);
    auto y = square(x);
    // z = y + y through a manual two-parent node sharing y.
    auto z = Tensor<double>::scalar(2.0 * y->item());
    z->set_autograd({y, y}, [y](const Tensor<double>& out_node) {
        y->grad_data()[0] += 2.0 * out_node.grad()[0];
    });
    z->backward();
    EXPECT_DOUBLE_EQ(x->grad()[0], 12.0);  // d(2x^2)/dx = 4x
}

TEST(Autograd, RepeatedBackwardAccumulates) {
    auto x = Tensor<double>::scalar(2.0, true);
    auto y = square(x);
    y->backward();
    EXPECT_DOUBLE_EQ(x->grad()[0], 4.0);
    y->zero_grad();  // clear the root seed, keep leaf grads
    y->backward();
    EXPECT_DOUBLE_EQ(x->grad()[0], 8.0);
    x->zero_grad();
    EXPECT_DOUBLE_EQ(x->grad()[0], 0.0);
}

TEST(Autograd, RootMustBeScalar) {
    auto x = Tensor<double>::ones({3}, true);
    EXPECT_THROW(x->backward(), cnet::ShapeError);
}

TEST(Autograd, RootWithoutGraphThrows) {
    auto x = Tensor<double>::scalar(1.0);
    EXPECT_THROW(x->backward(), cnet::Error);
}

TEST(Autograd, AccumulateGradChecksSize) {
    auto x = Tensor<double>::ones({3}, true);
    std::vector<double> g{1.0, 2.0};
    EXPECT_THROW(x->accumulate_grad(g), cnet::ShapeError);
}

TEST(Tensor, CheckFiniteFlagsNanAndInf) {
    auto ok = Tensor<float>::ones({4});
    EXPECT_NO_THROW(cnet::check_finite(*ok, "test"));
    auto bad = Tensor<float>::ones({4});
    bad->data()[2] = std::numeric_limits<float>::quiet_NaN();
    EXPECT_THROW(cnet::check_finite(*bad, "test"), cnet::NumericError);
    bad->data()[2] = std::numeric_limits<float>::infinity();
    EXPECT_THROW(cnet::check_finite(*bad, "test"), cnet::NumericError);
}

TEST(Tensor, FactoriesFillValues) {
    RandomStream rng(5);
    auto n = Tensor<float>::randn({100}, rng, 2.0f);
    auto u = Tensor<float>::rand_uniform({100}, rng, -1.0f, 1.0f);
    for (float v : u->values()) {
        EXPECT_GE(v, -1.0f);
        EXPECT_LT(v, 1.0f);
    }
    bool nonzero = false;
    for (float v : n->values()) {
        nonzero = nonzero || v != 0.0f;
    }
    EXPECT_TRUE(nonzero);
    EXPECT_FLOAT_EQ(Tensor<float>::full({2}, 3.5f)->values()[1], 3.5f);
}

}  // namespace
