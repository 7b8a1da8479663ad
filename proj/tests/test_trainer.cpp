#include "cnet/trainer.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <numeric>
#include <sstream>
#include <vector>

#include "cnet/checkpoint.hpp"
#include "cnet/error.hpp"
#include "cnet/rng.hpp"
#include "cnet/synth.hpp"
#include "cnet/vocab.hpp"

namespace {

namespace fs = std::filesystem;

cnet::ModelConfig tiny_config(std::int64_t input_size = 32) {
    cnet::ModelConfig cfg;
    cfg.input_size = input_size;
    cfg.width_multiplier = 1.0 / 32.0;
    cfg.pool_scales = {1, 2};
    cfg.dropout_p = 0.0;
    return cfg;
}

// In-memory dataset of random images with cycling labels, all in train.
cnet::Dataset handmade_dataset(std::int64_t n, std::int64_t size, std::uint64_t seed) {
    cnet::Dataset data;
    data.input_size = size;
    cnet::RandomStream rng(seed);
    for (std::int64_t i = 0; i < n; ++i) {
        cnet::Image img = cnet::make_image(size, size);
        for (float& p : img.pixels) {
            p = static_cast<float>(rng.uniform());
        }
        data.images.push_back(std::move(img));
        cnet::Sample s;
        s.path = "mem_" + std::to_string(i) + ".ppm";
        s.cuisine = i % cnet::kNumCuisines;
        s.flavor = i % cnet::kNumFlavors;
        s.flavor_scores[static_cast<std::size_t>(s.flavor)] = 1.0;
        s.split = cnet::Split::kTrain;
        data.samples.push_back(std::move(s));
    }
    return data;
}

std::vector<std::vector<float>> head_parameters(cnet::Model<float>& model,
                                                const std::string& prefix) {
    std::vector<std::vector<float>> out;
    for (const auto& [name, p] : model.parameters()) {
        if (name.rfind(prefix, 0) == 0) {
            out.emplace_back(p->values().begin(), p->values().end());
        }
    }
    return out;
}

TEST(TrainConfigTest, DefaultsAreValid) {
    cnet::TrainConfig cfg;
    EXPECT_EQ(cfg.base_lr, 0.001);
    EXPECT_EQ(cfg.poly_power, 0.9);
    EXPECT_EQ(cfg.batch_size, 16);
    EXPECT_EQ(cfg.epochs, 100);
    EXPECT_EQ(cfg.adam.beta1, 0.9);
    EXPECT_EQ(cfg.adam.beta2, 0.999);
    EXPECT_EQ(cfg.adam.eps, 1e-8);
    EXPECT_NO_THROW(cfg.validate());
}

TEST(TrainConfigTest, RejectsBadFields) {
    const auto broken = [](auto mutate) {
        cnet::TrainConfig cfg;
        mutate(cfg);
        return cfg;
    };
    EXPECT_THROW(broken([](auto& c) { c.base_lr = 0.0; }).validate(), cnet::ConfigError);
    EXPECT_THROW(broken([](auto& c) { c.poly_power = -1.0; }).validate(), cnet::ConfigError);
    EXPECT_THROW(broken([](auto& c) { c.batch_size = 0; }).validate(), cnet::ConfigError);
    EXPECT_THROW(broken([](auto& c) { c.epochs = 0; }).validate(), cnet::ConfigError);
    EXPECT_THROW(broken([](auto& c) { c.alpha_cuisine = -0.1; }).validate(),
                 cnet::ConfigError);
    EXPECT_THROW(broken([](auto& c) {
                     c.alpha_cuisine = 0.0;
                     c.alpha_flavor = 0.0;
                 }).validate(),
                 cnet::ConfigError);
    EXPECT_THROW(broken([](auto& c) { c.checkpoint_every = -1; }).validate(),
                 cnet::ConfigError);
    EXPECT_THROW(broken([](auto& c) { c.adam.eps = 0.0; }).validate(), cnet::ConfigError);
}

TEST(TrainerTest, MaxIterIsEpochsTimesCeilBatches) {
    const auto data10 = handmade_dataset(10, 32, 1);
    const auto data33 = handmade_dataset(33, 32, 2);
    cnet::Model<float> model(tiny_config(), 5);
    cnet::TrainConfig cfg;
    cfg.epochs = 4;
    cfg.batch_size = 16;
    EXPECT_EQ(cnet::Trainer(model, data10, cfg).max_iter(), 4);
    EXPECT_EQ(cnet::Trainer(model, data33, cfg).max_iter(), 4 * 3);
}

TEST(TrainerTest, ClassWeightsComeFromTrainSplitFrequencies) {
    const auto data = handmade_dataset(20, 32, 3);
    cnet::Model<float> model(tiny_config(), 5);
    cnet::TrainConfig cfg;
    cfg.epochs = 1;
    const cnet::Trainer trainer(model, data, cfg);
    const auto& cw = trainer.cuisine_weights();
    const auto& fw = trainer.flavor_weights();
    ASSERT_EQ(cw.size(), 10u);
    ASSERT_EQ(fw.size(), 6u);
    const double cw_sum = std::accumulate(cw.begin(), cw.end(), 0.0);
    const double fw_sum = std::accumulate(fw.begin(), fw.end(), 0.0);
    EXPECT_NEAR(cw_sum, 9.0, 1e-6);
    EXPECT_NEAR(fw_sum, 5.0, 1e-6);
    // 20 samples cycling over 10 cuisines: every class weight is 1 - 2/20.
    for (float w : cw) {
        EXPECT_NEAR(w, 0.9, 1e-6);
    }
}

TEST(TrainerTest, RequiresTrainSamplesAndMatchingSize) {
    cnet::Model<float> model(tiny_config(), 5);
    cnet::TrainConfig cfg;
    cfg.epochs = 1;

    auto unsplit = handmade_dataset(4, 32, 1);
    for (auto& s : unsplit.samples) {
        s.split = cnet::Split::kVal;
    }
    EXPECT_THROW(cnet::Trainer(model, unsplit, cfg), cnet::DataError);

    const auto wrong_size = handmade_dataset(4, 16, 1);
    EXPECT_THROW(cnet::Trainer(model, wrong_size, cfg), cnet::ConfigError);
}

TEST(TrainerTest, ZeroFlavorWeightLeavesFlavorHeadBitIdentical) {
    const auto data = handmade_dataset(8, 32, 7);
    cnet::Model<float> model(tiny_config(), 11);
    cnet::TrainConfig cfg;
    cfg.epochs = 2;
    cfg.batch_size = 4;
    cfg.alpha_cuisine = 1.0;
    cfg.alpha_flavor = 0.0;
    cnet::Trainer trainer(model, data, cfg);

    const auto flavor_before = head_parameters(model, "flavor.");
    const auto cuisine_before = head_parameters(model, "cuisine.");
    ASSERT_FALSE(flavor_before.empty());
    trainer.train_epoch(0);
    EXPECT_EQ(head_parameters(model, "flavor."), flavor_before);
    EXPECT_NE(head_parameters(model, "cuisine."), cuisine_before);
}

TEST(TrainerTest, SameSeedGivesIdenticalLogsDifferentSeedDoesNot) {
    const auto data = handmade_dataset(10, 32, 9);
    const auto run = [&](std::uint64_t seed) {
        cnet::Model<float> model(tiny_config(), 21);
        cnet::TrainConfig cfg;
        cfg.epochs = 2;
        cfg.batch_size = 4;
        cfg.seed = seed;
        cnet::Trainer trainer(model, data, cfg);
        std::ostringstream log;
        trainer.train_epoch(0, &log);
        trainer.train_epoch(1, &log);
        return log.str();
    };
    const std::string a = run(1);
    const std::string b = run(1);
    const std::string c = run(2);
    EXPECT_EQ(a, b);
    EXPECT_NE(a, c);
    EXPECT_NE(a.find("epoch=0 iter=0 lr=0.001 "), std::string::npos);
    EXPECT_NE(a.find(" loss_cuisine="), std::string::npos);
    EXPECT_NE(a.find(" joint="), std::string::npos);
}

TEST(TrainerTest, LrTraceDecaysAndEndsAtExactlyZero) {
    const auto data = handmade_dataset(6, 32, 13);
    cnet::Model<float> model(tiny_config(), 31);
    cnet::TrainConfig cfg;
    cfg.epochs = 3;
    cfg.batch_size = 3;
    cnet::Trainer trainer(model, data, cfg);
    EXPECT_EQ(trainer.max_iter(), 6);

    double prev = trainer.current_lr();
    EXPECT_EQ(prev, cfg.base_lr);
    std::vector<cnet::EpochSummary> summaries;
    for (std::int64_t e = 0; e < cfg.epochs; ++e) {
        summaries.push_back(trainer.train_epoch(e));
    }
    for (const auto& s : summaries) {
        EXPECT_LE(s.last_lr, s.first_lr);
        EXPECT_LE(s.first_lr, prev);
        prev = s.last_lr;
    }
    EXPECT_EQ(trainer.current_lr(), 0.0);
    EXPECT_THROW(trainer.train_epoch(3), cnet::ConfigError);
}

TEST(TrainerTest, GradientsDoNotAccumulateAcrossSteps) {
    const auto data = handmade_dataset(4, 32, 15);
    cnet::Model<float> model(tiny_config(), 41);
    cnet::TrainConfig cfg;
    cfg.epochs = 2;
    cfg.batch_size = 4;
    cfg.augment = false;
    cnet::Trainer trainer(model, data, cfg);

    // Two passes over the same single batch with the optimizer's gradient
    // clear in between; stale gradients would double the second epoch's
    // effective step and change the loss sequence.
    std::ostringstream log_a;
    trainer.train_epoch(0, &log_a);

    cnet::Model<float> model2(tiny_config(), 41);
    cnet::Trainer trainer2(model2, data, cfg);
    auto batch_grads = [&](cnet::Model<float>& m) {
        std::vector<float> first;
        const auto& p = m.parameters().front().second;
        return std::vector<float>(p->grad().begin(), p->grad().end());
    };
    (void)batch_grads;
    std::ostringstream log_b;
    trainer2.train_epoch(0, &log_b);
    EXPECT_EQ(log_a.str(), log_b.str());
}

TEST(TrainerTest, RunningStatsConvergeToFixedBatchStats) {
    // Repeating one batch with a vanishing learning rate leaves the weights
    // near-frozen while the running statistics chase the batch statistics;
    // train- and eval-mode logits must then agree closely.
    const auto data = handmade_dataset(6, 32, 17);
    cnet::Model<float> model(tiny_config(), 51);
    cnet::TrainConfig cfg;
    cfg.base_lr = 1e-7;
    cfg.epochs = 250;
    cfg.batch_size = 6;
    cfg.augment = false;
    cnet::Trainer trainer(model, data, cfg);
    for (std::int64_t e = 0; e < cfg.epochs; ++e) {
        trainer.train_epoch(e);
    }

    std::vector<const cnet::Image*> batch;
    for (const auto& img : data.images) {
        batch.push_back(&img);
    }
    auto input = cnet::stack_images(batch);
    auto train_out = model.forward(input, cnet::Mode::kTrain);
    auto eval_out = model.forward(input, cnet::Mode::kEval);
    for (std::size_t i = 0; i < train_out.cuisine->values().size(); ++i) {
        EXPECT_NEAR(train_out.cuisine->values()[i], eval_out.cuisine->values()[i], 1e-2);
    }
    for (std::size_t i = 0; i < train_out.flavor->values().size(); ++i) {
        EXPECT_NEAR(train_out.flavor->values()[i], eval_out.flavor->values()[i], 1e-2);
    }
}

TEST(EvaluateTest, ReportsAreDeterministicAndShapedRight) {
    const auto data = handmade_dataset(12, 32, 19);
    cnet::Model<float> model(tiny_config(), 61);
    const auto a = cnet::evaluate(model, data, cnet::Split::kTrain, 5);
    const auto b = cnet::evaluate(model, data, cnet::Split::kTrain, 12);
    EXPECT_EQ(a.sample_count, 12);
    ASSERT_EQ(a.cuisine.confusion.size(), 10u);
    ASSERT_EQ(a.flavor.confusion.size(), 6u);
    // Batch partition must not affect per-sample results.
    EXPECT_EQ(a.cuisine.confusion, b.cuisine.confusion);
    EXPECT_EQ(a.flavor.confusion, b.flavor.confusion);

    EXPECT_THROW(cnet::evaluate(model, data, cnet::Split::kTest), cnet::DataError);
}

TEST(EvaluateTest, EmptySplitNamesTheSplit) {
    const auto data = handmade_dataset(3, 32, 23);
    cnet::Model<float> model(tiny_config(), 71);
    try {
        cnet::evaluate(model, data, cnet::Split::kVal);
        FAIL() << "expected DataError";
    } catch (const cnet::DataError& e) {
        EXPECT_NE(std::string(e.what()).find("val"), std::string::npos);
        EXPECT_NE(std::string(e.what()).find("holds no samples"), std::string::npos);
    }
}

TEST(TrainerTest, JointLossFallsOnSyntheticData) {
    const fs::path dir = fs::temp_directory_path() / "cnet_trainer_learn";
    fs::remove_all(dir);
    cnet::synth_dataset(1, 99, dir, 32);
    const auto full = cnet::load_dataset(dir / "manifest.tsv", 32);

    // A three cuisine, three flavor slice keeps the run short while leaving
    // both heads something to fit. Full batches keep the loss curve smooth.
    cnet::Dataset data;
    data.input_size = full.input_size;
    for (std::size_t i = 0; i < full.samples.size(); ++i) {
        const auto& s = full.samples[i];
        if (s.cuisine > 2 || !(s.flavor == 0 || s.flavor == 3 || s.flavor == 5)) {
            continue;
        }
        data.samples.push_back(s);
        data.samples.back().split = cnet::Split::kTrain;
        data.images.push_back(full.images[i]);
    }
    ASSERT_EQ(data.samples.size(), 9u);

    cnet::ModelConfig mc;
    mc.input_size = 32;
    mc.width_multiplier = 0.125;
    mc.pool_scales = {1, 2};
    mc.dropout_p = 0.0;
    cnet::Model<float> model(mc, 123);

    cnet::TrainConfig cfg;
    cfg.epochs = 25;
    cfg.batch_size = 9;
    cfg.base_lr = 0.02;
    cfg.augment = false;
    cfg.seed = 123;
    cnet::Trainer trainer(model, data, cfg);
    cnet::EpochSummary first = trainer.train_epoch(0);
    cnet::EpochSummary last{};
    for (std::int64_t e = 1; e < cfg.epochs; ++e) {
        last = trainer.train_epoch(e);
    }
    EXPECT_LT(last.mean_joint_loss, 0.5 * first.mean_joint_loss)
        << "first " << first.mean_joint_loss << " last " << last.mean_joint_loss;
}

TEST(TrainerTest, SaveLoadRoundTripDoesNotChangeTheReport) {
    const auto data = handmade_dataset(10, 32, 29);
    cnet::Model<float> model(tiny_config(), 81);
    cnet::TrainConfig cfg;
    cfg.epochs = 2;
    cfg.batch_size = 5;
    cnet::Trainer trainer(model, data, cfg);
    trainer.train_epoch(0);
    trainer.train_epoch(1);

    const auto direct = cnet::evaluate(model, data, cnet::Split::kTrain);

    const fs::path path = fs::temp_directory_path() / "cnet_trainer_roundtrip.ckpt";
    cnet::save_checkpoint(path, cnet::snapshot(model, "roundtrip"));
    cnet::Model<float> reloaded(tiny_config(), 4242);
    cnet::restore(reloaded, cnet::load_checkpoint<float>(path));
    const auto viaDisk = cnet::evaluate(reloaded, data, cnet::Split::kTrain);

    EXPECT_EQ(direct.cuisine.confusion, viaDisk.cuisine.confusion);
    EXPECT_EQ(direct.flavor.confusion, viaDisk.flavor.confusion);
    EXPECT_EQ(cnet::summary_table(direct.cuisine, direct.flavor),
              cnet::summary_table(viaDisk.cuisine, viaDisk.flavor));
}

}  // namespace
