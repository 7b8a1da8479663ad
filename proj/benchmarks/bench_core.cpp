#include <benchmark/benchmark.h>

#include <cstdint>
#include <vector>

#include "cnet/augment.hpp"
#include "cnet/detail/matmul.hpp"
#include "cnet/image.hpp"
#include "cnet/model.hpp"
#include "cnet/objective.hpp"
#include "cnet/ops.hpp"
#include "cnet/optim.hpp"
#include "cnet/rng.hpp"
#include "cnet/tensor.hpp"

namespace {

std::vector<float> random_block(std::int64_t count, std::uint64_t seed) {
    cnet::RandomStream rng(seed);
    std::vector<float> out(static_cast<std::size_t>(count));
    for (auto& v : out) {
        v = static_cast<float>(rng.uniform(-1.0, 1.0));
    }
    return out;
}

// The backbone's hot shape family: few output rows, wide im2col columns.
void BM_MatmulAcc(benchmark::State& state) {
    const std::int64_t m = state.range(0);
    const std::int64_t k = state.range(1);
    const std::int64_t n = state.range(2);
    const auto a = random_block(m * k, 1);
    const auto b = random_block(k * n, 2);
    std::vector<float> c(static_cast<std::size_t>(m * n), 0.0f);
    for (auto _ : state) {
        cnet::detail::matmul_acc(a.data(), b.data(), c.data(), m, k, n);
        benchmark::DoNotOptimize(c.data());
    }
    state.SetItemsProcessed(state.iterations() * m * k * n);
}
BENCHMARK(BM_MatmulAcc)->Args({32, 288, 1024})->Args({64, 576, 256})->Args({256, 1152, 64});

void BM_MatmulAtbAcc(benchmark::State& state) {
    const std::int64_t k = state.range(0);
    const std::int64_t m = state.range(1);
    const std::int64_t n = state.range(2);
    const auto a = random_block(k * m, 3);
    const auto b = random_block(k * n, 4);
    std::vector<float> c(static_cast<std::size_t>(m * n), 0.0f);
    for (auto _ : state) {
        cnet::detail::matmul_atb_acc(a.data(), b.data(), c.data(), k, m, n);
        benchmark::DoNotOptimize(c.data());
    }
    state.SetItemsProcessed(state.iterations() * m * k * n);
}
BENCHMARK(BM_MatmulAtbAcc)->Args({32, 288, 1024})->Args({64, 576, 256});

void BM_Conv2dForward(benchmark::State& state) {
    const std::int64_t channels = state.range(0);
    const std::int64_t hw = state.range(1);
    cnet::ConvParams p;
    p.kernel = 3;
    p.padding = 1;
    p.in_channels = channels;
    p.out_channels = channels;
    cnet::RandomStream rng(5);
    auto input = cnet::Tensor<float>::randn({2, channels, hw, hw}, rng);
    auto weight = cnet::Tensor<float>::randn({channels, channels, 3, 3}, rng, 0.05f);
    auto bias = cnet::Tensor<float>::zeros({channels});
    for (auto _ : state) {
        auto out = cnet::conv2d(input, p, weight, bias);
        benchmark::DoNotOptimize(out->values().data());
    }
    state.SetItemsProcessed(state.iterations() * 2 * channels * channels * 9 * hw * hw);
}
BENCHMARK(BM_Conv2dForward)->Args({16, 32})->Args({32, 16})->Args({64, 8});

void BM_ResizeBilinear(benchmark::State& state) {
    cnet::RandomStream rng(7);
    auto img = cnet::make_image(64, 64);
    for (auto& v : img.pixels) {
        v = static_cast<float>(rng.uniform());
    }
    for (auto _ : state) {
        auto out = cnet::resize_bilinear(img, 224, 224);
        benchmark::DoNotOptimize(out.pixels.data());
    }
}
BENCHMARK(BM_ResizeBilinear);

void BM_AugmentDrawAndApply(benchmark::State& state) {
    cnet::RandomStream rng(11);
    auto img = cnet::make_image(64, 64);
    for (auto& v : img.pixels) {
        v = static_cast<float>(rng.uniform());
    }
    std::uint64_t seed = 0;
    for (auto _ : state) {
        cnet::RandomStream draw_rng(cnet::derive_seed(13, "augment", 0, seed++));
        auto out = cnet::augment_image(img, draw_rng);
        benchmark::DoNotOptimize(out.pixels.data());
    }
}
BENCHMARK(BM_AugmentDrawAndApply);

void BM_ModelForwardEval(benchmark::State& state) {
    cnet::ModelConfig config;
    config.input_size = 32;
    config.width_multiplier = 0.125;
    config.pool_scales = {1, 2};
    config.dropout_p = 0.0;
    cnet::Model<float> model(config, 3);
    cnet::RandomStream rng(9);
    auto batch = cnet::Tensor<float>::randn({4, 3, 32, 32}, rng);
    for (auto _ : state) {
        auto out = model.forward(batch, cnet::Mode::kEval);
        benchmark::DoNotOptimize(out.cuisine->values().data());
    }
    state.SetItemsProcessed(state.iterations() * 4);
}
BENCHMARK(BM_ModelForwardEval);

void BM_TrainStep(benchmark::State& state) {
    cnet::ModelConfig config;
    config.input_size = 32;
    config.width_multiplier = 0.125;
    config.pool_scales = {1, 2};
    config.dropout_p = 0.0;
    cnet::Model<float> model(config, 3);
    cnet::RandomStream rng(9);
    auto batch = cnet::Tensor<float>::randn({4, 3, 32, 32}, rng);
    const std::vector<std::int64_t> cuisine_labels = {0, 1, 2, 3};
    const std::vector<std::int64_t> flavor_labels = {0, 1, 2, 3};
    const std::vector<float> wc(10, 0.9f);
    const std::vector<float> wf(6, 0.83f);
    cnet::Adam<float> adam(model.parameters(), {});
    cnet::RandomStream dropout_rng(21);
    for (auto _ : state) {
        auto out = model.forward(batch, cnet::Mode::kTrain, &dropout_rng);
        auto lc = cnet::weighted_cross_entropy<float>(out.cuisine, cuisine_labels, wc);
        auto lf = cnet::weighted_cross_entropy<float>(out.flavor, flavor_labels, wf);
        auto joint = cnet::add(lc, lf);
        joint->backward();
        adam.step(0.001);
        adam.zero_grad();
        benchmark::DoNotOptimize(joint->values().data());
    }
    state.SetItemsProcessed(state.iterations() * 4);
}
BENCHMARK(BM_TrainStep);

}  // namespace
