#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "cnet/checkpoint.hpp"
#include "cnet/dataset.hpp"
#include "cnet/error.hpp"
#include "cnet/manifest.hpp"
#include "cnet/metrics.hpp"
#include "cnet/model.hpp"
#include "cnet/run_config.hpp"
#include "cnet/synth.hpp"
#include "cnet/trainer.hpp"
#include "cnet/vocab.hpp"

namespace fs = std::filesystem;

namespace {

// Exit codes, also listed in --help: 0 success, 2 configuration error,
// 3 data error, 4 numerical abort, 5 I/O error.
constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitNumeric = 4;
constexpr int kExitIo = 5;

std::string fmt(double v) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

void apply_sets(cnet::RunConfig& config, const std::vector<std::string>& sets) {
    for (const auto& entry : sets) {
        const auto eq = entry.find('=');
        if (eq == std::string::npos) {
            throw cnet::ConfigError("--set expects key=value, got \"" + entry + "\"");
        }
        cnet::apply_run_config_entry(config, entry.substr(0, eq), entry.substr(eq + 1));
    }
}

void write_text_file(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw cnet::IoError("cannot open " + path.string() + " for writing");
    }
    out << text;
    if (!out) {
        throw cnet::IoError("failed writing " + path.string());
    }
}

struct HeadPrediction {
    std::int64_t label = 0;
    double probability = 0.0;
};

HeadPrediction softmax_argmax(const float* row, std::int64_t classes) {
    HeadPrediction p;
    double mx = row[0];
    for (std::int64_t j = 1; j < classes; ++j) {
        if (row[j] > mx) {
            mx = row[j];
        }
    }
    double sum = 0.0;
    for (std::int64_t j = 0; j < classes; ++j) {
        sum += std::exp(static_cast<double>(row[j]) - mx);
    }
    for (std::int64_t j = 1; j < classes; ++j) {
        if (row[j] > row[p.label]) {
            p.label = j;
        }
    }
    p.probability = std::exp(static_cast<double>(row[p.label]) - mx) / sum;
    return p;
}

int run_synth(std::int64_t per_class, std::uint64_t seed, const std::string& out_dir,
              std::int64_t image_size) {
    auto samples = cnet::synth_dataset(per_class, seed, out_dir, image_size);
    cnet::stratified_split(samples, seed);
    cnet::write_manifest(fs::path(out_dir) / "manifest.tsv", samples);
    std::int64_t train = 0;
    std::int64_t val = 0;
    std::int64_t test = 0;
    for (const auto& s : samples) {
        train += s.split == cnet::Split::kTrain;
        val += s.split == cnet::Split::kVal;
        test += s.split == cnet::Split::kTest;
    }
    std::cout << "wrote " << samples.size() << " images to " << out_dir << " (train=" << train
              << " val=" << val << " test=" << test << ")\n";
    return 0;
}

int run_train(const std::string& config_path, const std::vector<std::string>& sets,
              bool seed_given, std::uint64_t seed) {
    cnet::RunConfig config;
    if (!config_path.empty()) {
        config = cnet::load_run_config(config_path);
    }
    apply_sets(config, sets);
    if (seed_given) {
        config.train.seed = seed;
    }
    config.validate();
    if (config.manifest.empty()) {
        throw cnet::ConfigError("config: key \"manifest\" must name the dataset manifest");
    }
    if (config.out_dir.empty()) {
        throw cnet::ConfigError("config: key \"out_dir\" must name the run directory");
    }

    const fs::path out_dir(config.out_dir);
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec || !fs::is_directory(out_dir)) {
        throw cnet::IoError("cannot create run directory " + out_dir.string());
    }
    const std::string config_echo = cnet::serialize_run_config(config);
    write_text_file(out_dir / "config.txt", config_echo);

    const auto data = cnet::load_dataset(config.manifest, config.model.input_size);
    cnet::Model<float> model(config.model, config.train.seed);
    cnet::Trainer trainer(model, data, config.train);

    std::ofstream log(out_dir / "train.log", std::ios::binary);
    if (!log) {
        throw cnet::IoError("cannot open " + (out_dir / "train.log").string() +
                            " for writing");
    }

    const auto save = [&](const fs::path& path) {
        auto ckpt = cnet::snapshot(model, config_echo);
        ckpt.has_optimizer = true;
        ckpt.optimizer_step = trainer.optimizer().step_count();
        ckpt.optimizer = trainer.optimizer().state_records();
        cnet::save_checkpoint(path, ckpt);
    };

    for (std::int64_t e = 0; e < config.train.epochs; ++e) {
        const auto summary = trainer.train_epoch(e, &log);
        std::cout << "epoch=" << summary.epoch << " batches=" << summary.batches
                  << " mean_loss_cuisine=" << fmt(summary.mean_cuisine_loss)
                  << " mean_loss_flavor=" << fmt(summary.mean_flavor_loss)
                  << " mean_joint=" << fmt(summary.mean_joint_loss)
                  << " last_lr=" << fmt(summary.last_lr) << "\n";
        if (config.train.checkpoint_every > 0 && (e + 1) % config.train.checkpoint_every == 0 &&
            e + 1 < config.train.epochs) {
            char name[32];
            std::snprintf(name, sizeof(name), "epoch_%04lld.ckpt",
                          static_cast<long long>(e + 1));
            save(out_dir / name);
        }
    }
    save(out_dir / "final.ckpt");

    const auto report = cnet::evaluate(model, data, cnet::split_from_name(config.report_split),
                                       config.eval_batch_size);
    write_text_file(out_dir / "report.txt",
                    cnet::full_report(report.cuisine, report.flavor, cnet::cuisine_names(),
                                      cnet::flavor_names()));
    write_text_file(out_dir / "report.kv",
                    cnet::metrics_kv(report.cuisine, report.flavor, cnet::cuisine_names(),
                                     cnet::flavor_names()));
    std::cout << cnet::summary_table(report.cuisine, report.flavor);
    std::cout << "run artifacts in " << out_dir.string() << "\n";
    return 0;
}

int run_eval(const std::string& checkpoint_path, const std::string& manifest,
             const std::string& split, const std::string& out_dir, std::int64_t batch_size) {
    const auto ckpt = cnet::load_checkpoint<float>(checkpoint_path);
    const auto config = cnet::parse_run_config_text(ckpt.config_text, "checkpoint config");
    cnet::Model<float> model(config.model, config.train.seed);
    cnet::restore(model, ckpt);
    const auto data = cnet::load_dataset(manifest, config.model.input_size);
    const auto report = cnet::evaluate(model, data, cnet::split_from_name(split), batch_size);
    const std::string text = cnet::full_report(report.cuisine, report.flavor,
                                               cnet::cuisine_names(), cnet::flavor_names());
    if (!out_dir.empty()) {
        std::error_code ec;
        fs::create_directories(out_dir, ec);
        if (ec || !fs::is_directory(fs::path(out_dir))) {
            throw cnet::IoError("cannot create report directory " + out_dir);
        }
        write_text_file(fs::path(out_dir) / "report.txt", text);
        write_text_file(fs::path(out_dir) / "report.kv",
                        cnet::metrics_kv(report.cuisine, report.flavor, cnet::cuisine_names(),
                                         cnet::flavor_names()));
    }
    std::cout << text;
    std::cout << "samples=" << report.sample_count << " split=" << split << "\n";
    return 0;
}

int run_predict(const std::string& checkpoint_path, const std::string& image_path) {
    const auto ckpt = cnet::load_checkpoint<float>(checkpoint_path);
    const auto config = cnet::parse_run_config_text(ckpt.config_text, "checkpoint config");
    cnet::Model<float> model(config.model, config.train.seed);
    cnet::restore(model, ckpt);
    const auto image = cnet::load_image(image_path, config.model.input_size);
    const auto batch = cnet::stack_images({&image});
    const auto out = model.forward(batch, cnet::Mode::kEval);

    const auto cuisine = softmax_argmax(out.cuisine->values().data(), cnet::kNumCuisines);
    const auto flavor = softmax_argmax(out.flavor->values().data(), cnet::kNumFlavors);
    char line[96];
    std::snprintf(line, sizeof(line), "cuisine: %s p=%.4f\n",
                  cnet::cuisine_name(cuisine.label).c_str(), cuisine.probability);
    std::cout << line;
    std::snprintf(line, sizeof(line), "flavor: %s p=%.4f\n",
                  cnet::flavor_name(flavor.label).c_str(), flavor.probability);
    std::cout << line;
    return 0;
}

int run_inspect(const std::string& config_path, const std::vector<std::string>& sets) {
    cnet::RunConfig config;
    if (!config_path.empty()) {
        config = cnet::load_run_config(config_path);
    }
    apply_sets(config, sets);
    config.model.validate();
    std::cout << cnet::shape_trace(config.model);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{
        "cnet: trains and runs a small food-image network that labels the cuisine and the "
        "dominant flavor of a dish.\n"
        "Exit codes: 0 success, 2 configuration error, 3 data error, 4 numerical abort, "
        "5 I/O error."};
    app.require_subcommand(1);

    auto* synth = app.add_subcommand(
        "synth", "Generate a labeled synthetic dataset with train/val/test splits");
    std::int64_t per_class = 1;
    std::uint64_t synth_seed = 0;
    std::string synth_out;
    std::int64_t image_size = 64;
    synth->add_option("--per-class", per_class, "Images per (cuisine, flavor) pair");
    synth->add_option("--seed", synth_seed, "Generator seed");
    synth->add_option("--out", synth_out, "Output directory")->required();
    synth->add_option("--image-size", image_size, "Edge length of generated images");

    auto* train = app.add_subcommand("train", "Train a model and write run artifacts");
    std::string train_config;
    std::vector<std::string> train_sets;
    std::uint64_t train_seed = 0;
    train->add_option("--config", train_config, "Config file, one key = value per line");
    train->add_option("--set", train_sets, "Override a config key, e.g. --set epochs=5");
    auto* seed_opt = train->add_option("--seed", train_seed, "Master seed; overrides the config");

    auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint on one manifest split");
    std::string eval_checkpoint;
    std::string eval_manifest;
    std::string eval_split = "test";
    std::string eval_out;
    std::int64_t eval_batch = 16;
    eval->add_option("--checkpoint", eval_checkpoint, "Checkpoint file")->required();
    eval->add_option("--manifest", eval_manifest, "Dataset manifest")->required();
    eval->add_option("--split", eval_split, "Split to evaluate: train, val or test");
    eval->add_option("--out", eval_out, "Directory for report.txt and report.kv");
    eval->add_option("--batch-size", eval_batch, "Forward chunk size");

    auto* predict = app.add_subcommand("predict", "Label a single image with a checkpoint");
    std::string predict_checkpoint;
    std::string predict_image;
    predict->add_option("--checkpoint", predict_checkpoint, "Checkpoint file")->required();
    predict->add_option("--image", predict_image, "Image to classify (binary PPM)")
        ->required();

    auto* inspect =
        app.add_subcommand("inspect", "Print the layer-by-layer shape table for a config");
    std::string inspect_config;
    std::vector<std::string> inspect_sets;
    inspect->add_option("--config", inspect_config, "Config file");
    inspect->add_option("--set", inspect_sets, "Override a config key");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : kExitConfig;
    }

    try {
        if (app.got_subcommand(synth)) {
            return run_synth(per_class, synth_seed, synth_out, image_size);
        }
        if (app.got_subcommand(train)) {
            return run_train(train_config, train_sets, seed_opt->count() > 0, train_seed);
        }
        if (app.got_subcommand(eval)) {
            return run_eval(eval_checkpoint, eval_manifest, eval_split, eval_out, eval_batch);
        }
        if (app.got_subcommand(predict)) {
            return run_predict(predict_checkpoint, predict_image);
        }
        if (app.got_subcommand(inspect)) {
            return run_inspect(inspect_config, inspect_sets);
        }
    } catch (const cnet::ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const cnet::NumericError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitNumeric;
    } catch (const cnet::IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitIo;
    } catch (const cnet::Error& e) {
        // Shape conflicts and data problems both mean the inputs do not fit.
        std::cerr << "error: " << e.what() << "\n";
        return kExitData;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
