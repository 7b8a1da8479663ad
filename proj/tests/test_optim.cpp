#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "cnet/error.hpp"
#include "cnet/lr_schedule.hpp"
#include "cnet/optim.hpp"
#include "cnet/tensor.hpp"

namespace {

using cnet::Adam;
using cnet::AdamConfig;
using cnet::ConfigError;
using cnet::poly_lr;
using cnet::Tensor;

TEST(PolyLr, ExactEndpoints) {
    EXPECT_EQ(poly_lr(0.001, 0, 1000, 0.9), 0.001);
    EXPECT_EQ(poly_lr(0.001, 1000, 1000, 0.9), 0.0);
    EXPECT_EQ(poly_lr(0.05, 0, 1, 2.0), 0.05);
}

TEST(PolyLr, MidpointValue) {
    // 0.5^0.9 in double
    EXPECT_NEAR(poly_lr(0.001, 500, 1000, 0.9), 0.001 * 0.5358867312681466, 1e-15);
    EXPECT_NEAR(poly_lr(0.01, 250, 1000, 1.0), 0.0075, 1e-15);
    EXPECT_NEAR(poly_lr(1.0, 900, 1000, 0.9), std::pow(0.1, 0.9), 1e-15);
}

TEST(PolyLr, DecaysMonotonically) {
    double prev = poly_lr(0.001, 0, 100, 0.9);
    for (std::int64_t i = 1; i <= 100; ++i) {
        const double cur = poly_lr(0.001, i, 100, 0.9);
        EXPECT_LT(cur, prev) << i;
        prev = cur;
    }
}

TEST(PolyLr, RejectsBadArguments) {
    EXPECT_THROW(poly_lr(0.001, -1, 100, 0.9), ConfigError);
    EXPECT_THROW(poly_lr(0.001, 101, 100, 0.9), ConfigError);
    EXPECT_THROW(poly_lr(0.001, 0, 0, 0.9), ConfigError);
    EXPECT_THROW(poly_lr(-0.001, 0, 100, 0.9), ConfigError);
    EXPECT_THROW(poly_lr(0.001, 0, 100, 0.0), ConfigError);
}

TEST(AdamTest, FirstStepMagnitude) {
    auto w = Tensor<double>::zeros({3});
    w->set_requires_grad(true);
    std::fill(w->grad().begin(), w->grad().end(), 1.0);
    Adam<double> opt({{"w", w}});
    opt.step(0.1);
    // with every moment fresh the update is lr/(1+eps) regardless of scale
    for (double v : w->values()) {
        EXPECT_NEAR(v, -0.09999999900000002, 1e-15);
    }
    EXPECT_EQ(opt.step_count(), 1u);
}

TEST(AdamTest, ScalarSequenceOracle) {
    auto w = Tensor<double>::full({1}, 0.5);
    w->set_requires_grad(true);
    Adam<double> opt({{"w", w}});
    const double grads[] = {1.0, -0.5, 0.25, 2.0, -1.0};
    const double expected[] = {0.400000001, 0.37336629737090316, 0.3393233830648465,
                               0.27503419152588415, 0.24691786291607576};
    for (int t = 0; t < 5; ++t) {
        w->zero_grad();
        w->grad()[0] = grads[t];
        opt.step(0.1);
        EXPECT_NEAR(w->values()[0], expected[t], 1e-12) << t;
    }
}

TEST(AdamTest, LargeAndTinyGradientsStepEqually) {
    auto big = Tensor<double>::zeros({1});
    auto small = Tensor<double>::zeros({1});
    big->set_requires_grad(true);
    small->set_requires_grad(true);
    Adam<double> opt({{"big", big}, {"small", small}});
    big->grad()[0] = 1e6;
    small->grad()[0] = 1e-6;
    opt.step(0.01);
    // sign-scaled steps, nearly invariant to gradient magnitude
    EXPECT_NEAR(big->values()[0], -0.01, 1e-9);
    EXPECT_NEAR(small->values()[0], -0.01, 1e-4);
    EXPECT_LT(small->values()[0], 0.0);
}

TEST(AdamTest, ZeroGradLeavesParameterAlone) {
    auto w = Tensor<double>::full({2}, 3.0);
    w->set_requires_grad(true);
    Adam<double> opt({{"w", w}});
    opt.step(0.1);
    EXPECT_EQ(w->values()[0], 3.0);
    EXPECT_EQ(w->values()[1], 3.0);
}

TEST(AdamTest, ZeroGradClearsParameterGrads) {
    auto w = Tensor<double>::zeros({2});
    w->set_requires_grad(true);
    w->grad()[0] = 5.0;
    Adam<double> opt({{"w", w}});
    opt.zero_grad();
    EXPECT_EQ(w->grad()[0], 0.0);
}

TEST(AdamTest, StateRoundTripContinuesIdentically) {
    auto run = [](bool reload) {
        auto w = Tensor<double>::full({2}, 1.0);
        w->set_requires_grad(true);
        auto opt = std::make_unique<Adam<double>>(
            std::vector<std::pair<std::string, cnet::TensorPtr<double>>>{{"w", w}});
        const double grads[] = {0.3, -0.7, 0.2, 0.9, -0.1, 0.4};
        for (int t = 0; t < 6; ++t) {
            if (reload && t == 3) {
                auto records = opt->state_records();
                const auto step = opt->step_count();
                opt = std::make_unique<Adam<double>>(
                    std::vector<std::pair<std::string, cnet::TensorPtr<double>>>{{"w", w}});
                opt->load_state(records, step);
            }
            w->zero_grad();
            w->grad()[0] = grads[t];
            w->grad()[1] = -grads[t];
            opt->step(0.05);
        }
        return std::vector<double>{w->values()[0], w->values()[1]};
    };
    EXPECT_EQ(run(false), run(true));
}

TEST(AdamTest, StateRecordNames) {
    auto w = Tensor<double>::zeros({2});
    auto b = Tensor<double>::zeros({1});
    w->set_requires_grad(true);
    b->set_requires_grad(true);
    Adam<double> opt({{"fc.weight", w}, {"fc.bias", b}});
    const auto records = opt.state_records();
    ASSERT_EQ(records.size(), 4u);
    EXPECT_EQ(records[0].name, "adam.m.fc.weight");
    EXPECT_EQ(records[1].name, "adam.v.fc.weight");
    EXPECT_EQ(records[2].name, "adam.m.fc.bias");
    EXPECT_EQ(records[3].name, "adam.v.fc.bias");
}

TEST(AdamTest, LoadStateRejectsMissingOrMisshapen) {
    auto w = Tensor<double>::zeros({2});
    w->set_requires_grad(true);
    Adam<double> opt({{"w", w}});
    EXPECT_THROW(opt.load_state({}, 1), cnet::IoError);
    auto records = opt.state_records();
    records[1].values.resize(3);
    EXPECT_THROW(opt.load_state(records, 1), cnet::IoError);
}

TEST(AdamTest, ConfigValidation) {
    EXPECT_THROW((AdamConfig{1.0, 0.999, 1e-8}).validate(), ConfigError);
    EXPECT_THROW((AdamConfig{0.9, -0.1, 1e-8}).validate(), ConfigError);
    EXPECT_THROW((AdamConfig{0.9, 0.999, 0.0}).validate(), ConfigError);
    EXPECT_NO_THROW((AdamConfig{}).validate());
}

}  // namespace
