#include <cmath>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "cnet/error.hpp"
#include "cnet/gradcheck.hpp"
#include "cnet/objective.hpp"

namespace {

using cnet::class_weights;
using cnet::DataError;
using cnet::joint_loss;
using cnet::ShapeError;
using cnet::Tensor;
using cnet::weighted_cross_entropy;

TEST(ClassWeights, InverseFrequencyFormula) {
    const std::vector<std::int64_t> labels = {0, 0, 0, 1, 2, 3, 3, 3, 3, 3};
    const auto w = class_weights(labels, 4);
    ASSERT_EQ(w.size(), 4u);
    EXPECT_DOUBLE_EQ(w[0], 0.7);
    EXPECT_DOUBLE_EQ(w[1], 0.9);
    EXPECT_DOUBLE_EQ(w[2], 0.9);
    EXPECT_DOUBLE_EQ(w[3], 0.5);
}

TEST(ClassWeights, AbsentClassGetsFullWeight) {
    const std::vector<std::int64_t> labels = {0, 0};
    const auto w = class_weights(labels, 3);
    EXPECT_DOUBLE_EQ(w[0], 0.0);
    EXPECT_DOUBLE_EQ(w[1], 1.0);
    EXPECT_DOUBLE_EQ(w[2], 1.0);
}

TEST(ClassWeights, SumIsAlwaysClassesMinusOne) {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 50; ++trial) {
        const std::int64_t classes = 2 + static_cast<std::int64_t>(rng() % 9);
        std::vector<std::int64_t> labels(1 + rng() % 64);
        for (auto& y : labels) {
            y = static_cast<std::int64_t>(rng() % static_cast<std::uint64_t>(classes));
        }
        const auto w = class_weights(labels, classes);
        double sum = 0.0;
        for (double v : w) {
            sum += v;
        }
        EXPECT_NEAR(sum, static_cast<double>(classes - 1), 1e-12);
    }
}

TEST(ClassWeights, Validation) {
    EXPECT_THROW(class_weights({}, 3), DataError);
    const std::vector<std::int64_t> bad = {0, 3};
    EXPECT_THROW(class_weights(bad, 3), DataError);
    const std::vector<std::int64_t> neg = {-1};
    EXPECT_THROW(class_weights(neg, 3), DataError);
}

TEST(WeightedCrossEntropy, MatchesScalarLoopOracle) {
    std::mt19937_64 rng(2024);
    std::normal_distribution<double> dist(0.0, 2.0);
    for (int trial = 0; trial < 100; ++trial) {
        const std::int64_t n = 1 + static_cast<std::int64_t>(rng() % 12);
        const std::int64_t c = 2 + static_cast<std::int64_t>(rng() % 9);
        auto logits = Tensor<double>::create({n, c});
        for (auto& v : logits->values()) {
            v = dist(rng);
        }
        std::vector<std::int64_t> labels(static_cast<std::size_t>(n));
        for (auto& y : labels) {
            y = static_cast<std::int64_t>(rng() % static_cast<std::uint64_t>(c));
        }
        std::vector<double> weights(static_cast<std::size_t>(c));
        for (auto& w : weights) {
            w = static_cast<double>(rng() % 1000) / 1000.0;
        }

        const auto loss = weighted_cross_entropy<double>(logits, labels, weights);

        double oracle = 0.0;
        for (std::int64_t i = 0; i < n; ++i) {
            double hi = -1e300;
            for (std::int64_t k = 0; k < c; ++k) {
                hi = std::max(hi, logits->values()[static_cast<std::size_t>(i * c + k)]);
            }
            double z = 0.0;
            for (std::int64_t k = 0; k < c; ++k) {
                z += std::exp(logits->values()[static_cast<std::size_t>(i * c + k)] - hi);
            }
            const std::int64_t y = labels[static_cast<std::size_t>(i)];
            const double log_p =
                logits->values()[static_cast<std::size_t>(i * c + y)] - hi - std::log(z);
            oracle -= weights[static_cast<std::size_t>(y)] * log_p;
        }
        ASSERT_NEAR(loss->item(), oracle, 1e-6 * std::max(1.0, std::abs(oracle))) << trial;
    }
}

TEST(WeightedCrossEntropy, HandGradient) {
    // two equal logits, label 0, weight 0.6: loss = 0.6*ln 2 and the
    // gradient splits into -0.3 / +0.3
    auto logits = Tensor<double>::zeros({1, 2});
    logits->set_requires_grad(true);
    const std::vector<std::int64_t> labels = {0};
    const std::vector<double> weights = {0.6, 0.4};
    auto loss = weighted_cross_entropy<double>(logits, labels, weights);
    EXPECT_NEAR(loss->item(), 0.6 * std::log(2.0), 1e-14);
    loss->backward();
    EXPECT_NEAR(logits->grad()[0], -0.3, 1e-14);
    EXPECT_NEAR(logits->grad()[1], 0.3, 1e-14);
}

TEST(WeightedCrossEntropy, GradcheckAgainstNumericDifferences) {
    cnet::RandomStream rng(515);
    auto logits = Tensor<double>::create({4, 5});
    for (auto& v : logits->values()) {
        v = rng.normal(0.0, 1.5);
    }
    logits->set_requires_grad(true);
    const std::vector<std::int64_t> labels = {3, 0, 4, 2};
    const std::vector<double> weights = {0.9, 0.5, 0.75, 1.0, 0.2};
    const auto result = cnet::grad_check<double>(
        [&] { return weighted_cross_entropy<double>(logits, labels, weights); }, {logits});
    EXPECT_TRUE(result.ok(1e-6)) << result.describe();
}

TEST(WeightedCrossEntropy, UnitWeightsReduceToPlainNll) {
    cnet::RandomStream rng(99);
    auto logits = Tensor<double>::create({3, 4});
    for (auto& v : logits->values()) {
        v = rng.normal(0.0, 1.0);
    }
    const std::vector<std::int64_t> labels = {1, 3, 0};
    const std::vector<double> unit(4, 1.0);
    const auto weighted = weighted_cross_entropy<double>(logits, labels, unit);
    auto lsm = cnet::log_softmax(logits);
    double nll = 0.0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        nll -= lsm->values()[i * 4 + static_cast<std::size_t>(labels[i])];
    }
    EXPECT_NEAR(weighted->item(), nll, 1e-12);
}

TEST(WeightedCrossEntropy, Validation) {
    auto logits = Tensor<double>::zeros({2, 3});
    const std::vector<std::int64_t> two = {0, 1};
    const std::vector<double> w3 = {1, 1, 1};
    EXPECT_THROW(weighted_cross_entropy<double>(Tensor<double>::zeros({6}), two, w3),
                 ShapeError);
    const std::vector<std::int64_t> one = {0};
    EXPECT_THROW(weighted_cross_entropy<double>(logits, one, w3), ShapeError);
    const std::vector<double> w2 = {1, 1};
    EXPECT_THROW(weighted_cross_entropy<double>(logits, two, w2), ShapeError);
    const std::vector<std::int64_t> bad = {0, 3};
    EXPECT_THROW(weighted_cross_entropy<double>(logits, bad, w3), DataError);
}

TEST(JointLoss, WeightedSumOfBranches) {
    auto a = Tensor<double>::scalar(2.0);
    auto b = Tensor<double>::scalar(3.0);
    EXPECT_NEAR(joint_loss<double>(a, b, 0.7, 0.3)->item(), 2.3, 1e-15);
    EXPECT_NEAR(joint_loss<double>(a, b, 1.0, 1.0)->item(), 5.0, 1e-15);
    EXPECT_NEAR(joint_loss<double>(a, b, 0.0, 1.0)->item(), 3.0, 1e-15);
}

TEST(JointLoss, ZeroCoefficientGivesExactlyZeroBranchGradient) {
    cnet::RandomStream rng(7);
    auto la = Tensor<float>::create({2, 3});
    auto lb = Tensor<float>::create({2, 3});
    for (auto& v : la->values()) {
        v = static_cast<float>(rng.normal(0.0, 1.0));
    }
    for (auto& v : lb->values()) {
        v = static_cast<float>(rng.normal(0.0, 1.0));
    }
    la->set_requires_grad(true);
    lb->set_requires_grad(true);
    const std::vector<std::int64_t> labels = {0, 2};
    const std::vector<float> weights = {1.0f, 0.8f, 0.6f};
    auto a = weighted_cross_entropy<float>(la, labels, weights);
    auto b = weighted_cross_entropy<float>(lb, labels, weights);
    auto joint = joint_loss<float>(a, b, 1.0, 0.0);
    joint->backward();
    bool a_has_grad = false;
    for (float g : la->grad()) {
        a_has_grad = a_has_grad || g != 0.0f;
    }
    EXPECT_TRUE(a_has_grad);
    for (float g : lb->grad()) {
        EXPECT_EQ(g, 0.0f);
    }
}

TEST(TaskSpec, CuisineFlavorFactoryListsBothVocabularies) {
    const auto spec = cnet::TaskSpec::cuisine_flavor();
    ASSERT_EQ(spec.names.size(), 2u);
    EXPECT_EQ(spec.names[0], "cuisine");
    EXPECT_EQ(spec.names[1], "flavor");
    EXPECT_EQ(spec.vocabularies[0].size(), 10u);
    EXPECT_EQ(spec.vocabularies[1].size(), 6u);
    EXPECT_EQ(spec.vocabularies[0][0], "American");
    EXPECT_EQ(spec.vocabularies[1][5], "Sweet");
    EXPECT_NO_THROW(spec.validate());
}

TEST(TaskSpec, RejectsDegenerateSpecs) {
    auto spec = cnet::TaskSpec::cuisine_flavor(0.0, 0.0);
    EXPECT_THROW(spec.validate(), cnet::ConfigError);
    spec = cnet::TaskSpec::cuisine_flavor(1.0, -0.5);
    EXPECT_THROW(spec.validate(), cnet::ConfigError);
    spec = cnet::TaskSpec::cuisine_flavor();
    spec.alphas.pop_back();
    EXPECT_THROW(spec.validate(), cnet::ConfigError);
    spec = cnet::TaskSpec{};
    EXPECT_THROW(spec.validate(), cnet::ConfigError);
    spec = cnet::TaskSpec::cuisine_flavor();
    spec.vocabularies[1].clear();
    EXPECT_THROW(spec.validate(), cnet::ConfigError);
}

TEST(TaskSpec, ListFormJointLossMatchesThePairForm) {
    auto a = cnet::Tensor<float>::scalar(0.5f);
    auto b = cnet::Tensor<float>::scalar(0.25f);
    const auto spec = cnet::TaskSpec::cuisine_flavor(2.0, 3.0);
    auto joint = cnet::joint_loss<float>({a, b}, spec);
    EXPECT_NEAR(joint->values()[0], 2.0 * 0.5 + 3.0 * 0.25, 1e-12);

    const std::vector<cnet::TensorPtr<float>> too_few = {a};
    EXPECT_THROW(cnet::joint_loss<float>(too_few, spec), cnet::ShapeError);
}

}  // namespace
