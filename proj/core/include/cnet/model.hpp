#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "cnet/error.hpp"
#include "cnet/model_config.hpp"
#include "cnet/ops.hpp"
#include "cnet/rng.hpp"
#include "cnet/tensor.hpp"
#include "cnet/vocab.hpp"

namespace cnet {

/// Two-headed classifier: a dual-branch stem with learned branch weighting,
/// a bottleneck-residual backbone, pyramid pooling over the final feature
/// map, and separate cuisine / flavor linear heads sharing the pooled
/// features. Parameter names are stable and define the checkpoint layout.
template <class T>
class Model {
public:
    struct Outputs {
        TensorPtr<T> cuisine;
        TensorPtr<T> flavor;
    };

    Model(ModelConfig config, std::uint64_t seed)
        : cfg_(std::move(config)), init_rng_(derive_seed(seed, "model_init")) {
        cfg_.validate();
        build();
    }

    Model(const Model&) = delete;
    Model& operator=(const Model&) = delete;

    const ModelConfig& config() const { return cfg_; }

    /// Named learnable tensors in construction order; the order is the
    /// checkpoint and optimizer-state layout.
    const std::vector<std::pair<std::string, TensorPtr<T>>>& parameters() const {
        return params_;
    }

    /// Named running statistics (non-learnable state), construction order.
    std::vector<std::pair<std::string, std::vector<T>*>> buffers() {
        std::vector<std::pair<std::string, std::vector<T>*>> out;
        for (auto& [name, norm] : norms_) {
            out.emplace_back(name + ".running_mean", &norm->state.running_mean);
            out.emplace_back(name + ".running_var", &norm->state.running_var);
        }
        return out;
    }

    std::int64_t parameter_count() const {
        std::int64_t total = 0;
        for (const auto& [name, p] : params_) {
            total += p->numel();
        }
        return total;
    }

    void zero_grad() {
        for (auto& [name, p] : params_) {
            p->zero_grad();
        }
    }

    /// Runs the network. Train mode updates normalization statistics and
    /// applies dropout, which needs `dropout_rng`; eval mode uses running
    /// statistics and no randomness.
    Outputs forward(const TensorPtr<T>& images, Mode mode, RandomStream* dropout_rng = nullptr) {
        if (images->rank() != 4 || images->dim(1) != 3) {
            throw ShapeError("model: input must be [n,3," + std::to_string(cfg_.input_size) +
                             "," + std::to_string(cfg_.input_size) + "], got " +
                             shape_str(images->shape()));
        }
        if (images->dim(2) != cfg_.input_size || images->dim(3) != cfg_.input_size) {
            throw ShapeError("model: input is " + std::to_string(images->dim(2)) + "x" +
                             std::to_string(images->dim(3)) + " but the model was built for " +
                             std::to_string(cfg_.input_size) + "x" +
                             std::to_string(cfg_.input_size));
        }
        for (T v : images->values()) {
            if (!(v >= T(0) && v <= T(1))) {
                throw DataError("model: input pixel " + std::to_string(static_cast<double>(v)) +
                                " outside [0, 1]");
            }
        }
        if (mode == Mode::kTrain && cfg_.dropout_p > 0.0 && dropout_rng == nullptr) {
            throw ConfigError("model: train-mode forward needs a dropout random stream");
        }

        auto b1 = conv_bn_relu(conv1_, bn1_, images, mode);
        auto b2 = conv_bn_relu(conv2_, bn2_, images, mode);
        auto merged1 = weighted_pair_sum(b1, b2, agg1_);
        auto down = conv_bn_relu(conv3_, bn3_, merged1, mode);
        auto b4 = conv_bn_relu(conv4_, bn4_, down, mode);
        auto b5 = conv_bn_relu(conv5_, bn5_, down, mode);
        auto merged2 = weighted_pair_sum(b4, b5, agg2_);
        auto x = conv_bn_relu(conv6_, bn6_, merged2, mode);

        for (auto& stage : layers_) {
            for (auto& unit : stage) {
                x = bottleneck(unit, x, mode);
            }
        }

        // Pyramid pooling: the raw map first, then one upsampled branch per
        // scale in configured order.
        const std::int64_t grid = cfg_.final_grid();
        std::vector<TensorPtr<T>> pyramid{x};
        for (std::size_t i = 0; i < cfg_.pool_scales.size(); ++i) {
            const std::int64_t s = cfg_.pool_scales[i];
            auto pooled = adaptive_avg_pool2d(x, s, s);
            auto reduced = conv_bn_relu(psp_convs_[i], psp_norms_[i], pooled, mode);
            pyramid.push_back(bilinear_upsample(reduced, grid, grid));
        }
        auto fused = concat_channels(pyramid);

        auto c = conv_bn_relu(fuse1_, fuse1_n_, fused, mode);
        c = conv_bn_relu(fuse2_, fuse2_n_, c, mode);
        if (mode == Mode::kTrain && cfg_.dropout_p > 0.0) {
            c = cnet::dropout(c, cfg_.dropout_p, mode, *dropout_rng);
        }
        auto pooled = adaptive_avg_pool2d(c, 1, 1);
        auto features = cnet::reshape(pooled, {pooled->dim(0), pooled->dim(1)});

        auto cu = relu(linear(features, cuisine_fc1_.w, cuisine_fc1_.b));
        cu = relu(linear(cu, cuisine_fc2_.w, cuisine_fc2_.b));
        cu = linear(cu, cuisine_fc3_.w, cuisine_fc3_.b);

        auto fl = relu(linear(features, flavor_fc1_.w, flavor_fc1_.b));
        fl = relu(linear(fl, flavor_fc2_.w, flavor_fc2_.b));
        fl = relu(linear(fl, flavor_fc3_.w, flavor_fc3_.b));
        fl = linear(fl, flavor_fc4_.w, flavor_fc4_.b);

        return Outputs{cu, fl};
    }

private:
    struct Conv {
        ConvParams p;
        TensorPtr<T> w, b;
    };
    struct Norm {
        TensorPtr<T> gamma, beta;
        BatchNormState<T> state;
    };
    struct Fc {
        TensorPtr<T> w, b;
    };
    struct Bottleneck {
        Conv c1, c2, c3;
        Norm n1, n2, n3;
        bool has_down = false;
        Conv down;
        Norm down_n;
    };

    void reg(const std::string& name, const TensorPtr<T>& t) {
        t->set_requires_grad(true);
        params_.emplace_back(name, t);
    }

    Conv make_conv(const std::string& name, ConvParams p) {
        p.validate();
        Conv c;
        c.p = p;
        const double fan_in = static_cast<double>(p.in_channels * p.kernel * p.kernel);
        const T stddev = static_cast<T>(std::sqrt(2.0 / fan_in));
        c.w = Tensor<T>::randn({p.out_channels, p.in_channels, p.kernel, p.kernel}, init_rng_,
                               stddev);
        c.b = Tensor<T>::zeros({p.out_channels});
        reg(name + ".weight", c.w);
        reg(name + ".bias", c.b);
        return c;
    }

    Norm* make_norm(const std::string& name, Norm& n, std::int64_t c, bool zero_gamma = false) {
        n.gamma = zero_gamma ? Tensor<T>::zeros({c}) : Tensor<T>::ones({c});
        n.beta = Tensor<T>::zeros({c});
        n.state = BatchNormState<T>(c);
        reg(name + ".gamma", n.gamma);
        reg(name + ".beta", n.beta);
        norms_.emplace_back(name, &n);
        return &n;
    }

    Fc make_fc(const std::string& name, std::int64_t out, std::int64_t in) {
        Fc f;
        const T bound = static_cast<T>(1.0 / std::sqrt(static_cast<double>(in)));
        f.w = Tensor<T>::rand_uniform({out, in}, init_rng_, -bound, bound);
        f.b = Tensor<T>::rand_uniform({out}, init_rng_, -bound, bound);
        reg(name + ".weight", f.w);
        reg(name + ".bias", f.b);
        return f;
    }

    TensorPtr<T> make_agg(const std::string& name) {
        auto t = Tensor<T>::zeros({2});
        reg(name, t);
        return t;
    }

    TensorPtr<T> conv_bn_relu(Conv& c, Norm& n, const TensorPtr<T>& x, Mode mode) {
        return relu(batchnorm2d(conv2d(x, c.p, c.w, c.b), n.gamma, n.beta, n.state, mode));
    }

    TensorPtr<T> bottleneck(Bottleneck& u, const TensorPtr<T>& x, Mode mode) {
        auto y = conv_bn_relu(u.c1, u.n1, x, mode);
        y = conv_bn_relu(u.c2, u.n2, y, mode);
        y = batchnorm2d(conv2d(y, u.c3.p, u.c3.w, u.c3.b), u.n3.gamma, u.n3.beta, u.n3.state,
                        mode);
        auto skip = x;
        if (u.has_down) {
            skip = batchnorm2d(conv2d(x, u.down.p, u.down.w, u.down.b), u.down_n.gamma,
                               u.down_n.beta, u.down_n.state, mode);
        }
        return relu(add(y, skip));
    }

    // Fills `u` where it already lives: norm registration keeps a pointer to
    // the struct, so it must not move afterwards.
    void init_bottleneck(Bottleneck& u, const std::string& name, std::int64_t in,
                         std::int64_t mid, std::int64_t out, std::int64_t stride, bool project) {
        u.c1 = make_conv(name + ".conv1", {.kernel = 1,
                                           .stride = 1,
                                           .padding = 0,
                                           .in_channels = in,
                                           .out_channels = mid});
        make_norm(name + ".bn1", u.n1, mid);
        u.c2 = make_conv(name + ".conv2", {.kernel = 3,
                                           .stride = stride,
                                           .padding = 1,
                                           .in_channels = mid,
                                           .out_channels = mid});
        make_norm(name + ".bn2", u.n2, mid);
        u.c3 = make_conv(name + ".conv3", {.kernel = 1,
                                           .stride = 1,
                                           .padding = 0,
                                           .in_channels = mid,
                                           .out_channels = out});
        // Zero gamma leaves a fresh unit as the identity over its skip path.
        make_norm(name + ".bn3", u.n3, out, /*zero_gamma=*/true);
        u.has_down = project;
        if (project) {
            u.down = make_conv(name + ".downsample.conv", {.kernel = 1,
                                                           .stride = stride,
                                                           .padding = 0,
                                                           .in_channels = in,
                                                           .out_channels = out});
            make_norm(name + ".downsample.bn", u.down_n, out);
        }
    }

    void build() {
        const std::int64_t c32 = cfg_.scaled(32);
        const std::int64_t c64 = cfg_.scaled(64);

        conv1_ = make_conv("conv1", {.kernel = 5,
                                     .stride = 1,
                                     .padding = 2,
                                     .in_channels = 3,
                                     .out_channels = c32});
        make_norm("bn1", bn1_, c32);
        conv2_ = make_conv("conv2", {.kernel = 7,
                                     .stride = 1,
                                     .padding = 3,
                                     .in_channels = 3,
                                     .out_channels = c32});
        make_norm("bn2", bn2_, c32);
        agg1_ = make_agg("w1.logits");
        conv3_ = make_conv("conv3", {.kernel = 1,
                                     .stride = 2,
                                     .padding = 0,
                                     .in_channels = c32,
                                     .out_channels = c32});
        make_norm("bn3", bn3_, c32);
        conv4_ = make_conv("conv4", {.kernel = 3,
                                     .stride = 1,
                                     .padding = 1,
                                     .in_channels = c32,
                                     .out_channels = c64});
        make_norm("bn4", bn4_, c64);
        conv5_ = make_conv("conv5", {.kernel = 5,
                                     .stride = 1,
                                     .padding = 2,
                                     .in_channels = c32,
                                     .out_channels = c64});
        make_norm("bn5", bn5_, c64);
        agg2_ = make_agg("w2.logits");
        conv6_ = make_conv("conv6", {.kernel = 1,
                                     .stride = 1,
                                     .padding = 0,
                                     .in_channels = c64,
                                     .out_channels = c64});
        make_norm("bn6", bn6_, c64);

        const std::int64_t unit_counts[4] = {3, 4, 6, 3};
        std::int64_t in = c64;
        for (int s = 0; s < 4; ++s) {
            const std::int64_t mid = cfg_.scaled(64 << s);
            const std::int64_t out = cfg_.scaled(256 << s);
            const std::int64_t stride = s == 0 ? 1 : 2;
            auto& stage = layers_[static_cast<std::size_t>(s)];
            stage.reserve(static_cast<std::size_t>(unit_counts[s]));
            for (std::int64_t u = 0; u < unit_counts[s]; ++u) {
                const std::string name =
                    "layer" + std::to_string(s + 1) + "." + std::to_string(u);
                stage.emplace_back();
                init_bottleneck(stage.back(), name, in, mid, out, u == 0 ? stride : 1,
                                /*project=*/u == 0);
                in = out;
            }
        }

        const std::int64_t backbone_out = cfg_.scaled(2048);
        const std::int64_t level = cfg_.psp_level_channels();
        psp_convs_.reserve(cfg_.pool_scales.size());
        psp_norms_.resize(cfg_.pool_scales.size());
        for (std::size_t i = 0; i < cfg_.pool_scales.size(); ++i) {
            const std::string name = "psp." + std::to_string(i);
            psp_convs_.push_back(make_conv(name + ".conv", {.kernel = 1,
                                                            .stride = 1,
                                                            .padding = 0,
                                                            .in_channels = backbone_out,
                                                            .out_channels = level}));
            make_norm(name + ".bn", psp_norms_[i], level);
        }

        const std::int64_t fused =
            backbone_out + static_cast<std::int64_t>(cfg_.pool_scales.size()) * level;
        fuse1_ = make_conv("convpsp.0.conv", {.kernel = 3,
                                              .stride = 1,
                                              .padding = 1,
                                              .in_channels = fused,
                                              .out_channels = backbone_out});
        make_norm("convpsp.0.bn", fuse1_n_, backbone_out);
        const std::int64_t feat = cfg_.scaled(1024);
        fuse2_ = make_conv("convpsp.1.conv", {.kernel = 3,
                                              .stride = 1,
                                              .padding = 1,
                                              .in_channels = backbone_out,
                                              .out_channels = feat});
        make_norm("convpsp.1.bn", fuse2_n_, feat);

        cuisine_fc1_ = make_fc("cuisine.fc1", cfg_.scaled(256), feat);
        cuisine_fc2_ = make_fc("cuisine.fc2", kNumCuisines, cfg_.scaled(256));
        cuisine_fc3_ = make_fc("cuisine.fc3", kNumCuisines, kNumCuisines);

        flavor_fc1_ = make_fc("flavor.fc1", cfg_.scaled(512), feat);
        flavor_fc2_ = make_fc("flavor.fc2", cfg_.scaled(128), cfg_.scaled(512));
        flavor_fc3_ = make_fc("flavor.fc3", kNumFlavors, cfg_.scaled(128));
        flavor_fc4_ = make_fc("flavor.fc4", kNumFlavors, kNumFlavors);
    }

    ModelConfig cfg_;
    RandomStream init_rng_;
    std::vector<std::pair<std::string, TensorPtr<T>>> params_;
    std::vector<std::pair<std::string, Norm*>> norms_;

    Conv conv1_, conv2_, conv3_, conv4_, conv5_, conv6_;
    Norm bn1_, bn2_, bn3_, bn4_, bn5_, bn6_;
    TensorPtr<T> agg1_, agg2_;
    std::vector<Bottleneck> layers_[4];
    std::vector<Conv> psp_convs_;
    std::vector<Norm> psp_norms_;
    Conv fuse1_, fuse2_;
    Norm fuse1_n_, fuse2_n_;
    Fc cuisine_fc1_, cuisine_fc2_, cuisine_fc3_;
    Fc flavor_fc1_, flavor_fc2_, flavor_fc3_, flavor_fc4_;
};

}  // namespace cnet
