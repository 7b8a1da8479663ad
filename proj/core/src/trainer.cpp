#include "cnet/trainer.hpp"

#include <charconv>
#include <cmath>
#include <ostream>

#include "cnet/augment.hpp"
#include "cnet/error.hpp"
#include "cnet/lr_schedule.hpp"
#include "cnet/objective.hpp"

namespace cnet {

namespace {

// Shortest decimal form that parses back to the same double; log lines must
// be byte-stable across reruns.
std::string fmt(double v) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

std::vector<float> weights_as_float(const std::vector<double>& w) {
    return std::vector<float>(w.begin(), w.end());
}

std::int64_t argmax_row(const float* row, std::int64_t c) {
    std::int64_t best = 0;
    for (std::int64_t j = 1; j < c; ++j) {
        if (row[j] > row[best]) {
            best = j;
        }
    }
    return best;
}

}  // namespace

void TrainConfig::validate() const {
    if (!(base_lr > 0.0)) {
        throw ConfigError("train: base_lr must be > 0");
    }
    if (!(poly_power > 0.0)) {
        throw ConfigError("train: poly_power must be > 0");
    }
    if (batch_size < 1) {
        throw ConfigError("train: batch_size must be >= 1");
    }
    if (epochs < 1) {
        throw ConfigError("train: epochs must be >= 1");
    }
    if (alpha_cuisine < 0.0 || alpha_flavor < 0.0) {
        throw ConfigError("train: task weights must be >= 0");
    }
    if (alpha_cuisine == 0.0 && alpha_flavor == 0.0) {
        throw ConfigError("train: at least one task weight must be > 0");
    }
    if (checkpoint_every < 0) {
        throw ConfigError("train: checkpoint_every must be >= 0");
    }
    adam.validate();
}

EvalReport evaluate(Model<float>& model, const Dataset& data, Split split,
                    std::int64_t batch_size) {
    if (batch_size < 1) {
        throw ConfigError("evaluate: batch_size must be >= 1");
    }
    if (data.input_size != model.config().input_size) {
        throw ConfigError("evaluate: dataset images are " + std::to_string(data.input_size) +
                          " px, the model expects " +
                          std::to_string(model.config().input_size));
    }
    const std::vector<std::size_t> idx = data.indices_in(split);
    if (idx.empty()) {
        throw DataError("split \"" + split_name(split) + "\" holds no samples");
    }

    std::vector<std::int64_t> truth_cuisine, truth_flavor, pred_cuisine, pred_flavor;
    truth_cuisine.reserve(idx.size());
    for (std::size_t start = 0; start < idx.size();
         start += static_cast<std::size_t>(batch_size)) {
        const std::size_t stop =
            std::min(idx.size(), start + static_cast<std::size_t>(batch_size));
        std::vector<const Image*> batch;
        batch.reserve(stop - start);
        for (std::size_t i = start; i < stop; ++i) {
            batch.push_back(&data.images[idx[i]]);
            truth_cuisine.push_back(data.samples[idx[i]].cuisine);
            truth_flavor.push_back(data.samples[idx[i]].flavor);
        }
        auto out = model.forward(stack_images(batch), Mode::kEval);
        const float* cu = out.cuisine->data();
        const float* fl = out.flavor->data();
        for (std::size_t i = 0; i < stop - start; ++i) {
            pred_cuisine.push_back(
                argmax_row(cu + static_cast<std::int64_t>(i) * kNumCuisines, kNumCuisines));
            pred_flavor.push_back(
                argmax_row(fl + static_cast<std::int64_t>(i) * kNumFlavors, kNumFlavors));
        }
    }

    EvalReport report;
    report.cuisine = compute_metrics(truth_cuisine, pred_cuisine, kNumCuisines);
    report.flavor = compute_metrics(truth_flavor, pred_flavor, kNumFlavors);
    report.sample_count = static_cast<std::int64_t>(idx.size());
    return report;
}

Trainer::Trainer(Model<float>& model, const Dataset& data, TrainConfig config)
    : model_(model), data_(data), cfg_(config), adam_(model.parameters(), config.adam) {
    cfg_.validate();
    if (data_.input_size != model_.config().input_size) {
        throw ConfigError("train: dataset images are " + std::to_string(data_.input_size) +
                          " px, the model expects " +
                          std::to_string(model_.config().input_size));
    }
    train_indices_ = data_.indices_in(Split::kTrain);
    if (train_indices_.empty()) {
        throw DataError("training split holds no samples");
    }
    std::vector<std::int64_t> cuisine_labels, flavor_labels;
    cuisine_labels.reserve(train_indices_.size());
    for (std::size_t i : train_indices_) {
        cuisine_labels.push_back(data_.samples[i].cuisine);
        flavor_labels.push_back(data_.samples[i].flavor);
    }
    cuisine_weights_ = weights_as_float(class_weights(cuisine_labels, kNumCuisines));
    flavor_weights_ = weights_as_float(class_weights(flavor_labels, kNumFlavors));

    const auto n = static_cast<std::int64_t>(train_indices_.size());
    max_iter_ = cfg_.epochs * ((n + cfg_.batch_size - 1) / cfg_.batch_size);
}

double Trainer::current_lr() const {
    return poly_lr(cfg_.base_lr, iter_, max_iter_, cfg_.poly_power);
}

EpochSummary Trainer::train_epoch(std::int64_t epoch, std::ostream* log) {
    std::vector<std::size_t> order = train_indices_;
    RandomStream shuffle_rng(
        derive_seed(cfg_.seed, "shuffle", static_cast<std::uint64_t>(epoch)));
    for (std::size_t i = order.size() - 1; i > 0; --i) {
        std::swap(order[i], order[shuffle_rng.uniform_index(i + 1)]);
    }

    EpochSummary summary;
    summary.epoch = epoch;
    double total_cuisine = 0.0;
    double total_flavor = 0.0;

    for (std::size_t start = 0; start < order.size();
         start += static_cast<std::size_t>(cfg_.batch_size)) {
        if (iter_ >= max_iter_) {
            throw ConfigError("train_epoch: schedule exhausted after " +
                              std::to_string(max_iter_) + " iterations");
        }
        const std::size_t stop =
            std::min(order.size(), start + static_cast<std::size_t>(cfg_.batch_size));
        const auto nb = static_cast<std::int64_t>(stop - start);

        std::vector<Image> augmented;
        std::vector<const Image*> batch;
        std::vector<std::int64_t> cuisine_labels, flavor_labels;
        augmented.reserve(static_cast<std::size_t>(nb));
        batch.reserve(static_cast<std::size_t>(nb));
        for (std::size_t i = start; i < stop; ++i) {
            const std::size_t si = order[i];
            if (cfg_.augment) {
                RandomStream sample_rng(derive_seed(cfg_.seed, "augment",
                                                    static_cast<std::uint64_t>(epoch),
                                                    static_cast<std::uint64_t>(si)));
                augmented.push_back(augment_image(data_.images[si], sample_rng));
                batch.push_back(&augmented.back());
            } else {
                batch.push_back(&data_.images[si]);
            }
            cuisine_labels.push_back(data_.samples[si].cuisine);
            flavor_labels.push_back(data_.samples[si].flavor);
        }

        try {
            RandomStream dropout_rng(derive_seed(cfg_.seed, "dropout",
                                                 static_cast<std::uint64_t>(epoch),
                                                 static_cast<std::uint64_t>(summary.batches)));
            auto out = model_.forward(stack_images(batch), Mode::kTrain, &dropout_rng);
            auto cuisine_loss = weighted_cross_entropy<float>(
                out.cuisine, cuisine_labels,
                std::span<const float>(cuisine_weights_));
            auto flavor_loss = weighted_cross_entropy<float>(
                out.flavor, flavor_labels, std::span<const float>(flavor_weights_));
            const double lc =
                static_cast<double>(cuisine_loss->values()[0]) / static_cast<double>(nb);
            const double lf =
                static_cast<double>(flavor_loss->values()[0]) / static_cast<double>(nb);
            auto joint = scale(joint_loss(cuisine_loss, flavor_loss, cfg_.alpha_cuisine,
                                          cfg_.alpha_flavor),
                               1.0f / static_cast<float>(nb));
            const double jv = static_cast<double>(joint->values()[0]);
            if (!std::isfinite(jv)) {
                throw NumericError("non-finite joint loss (cuisine=" + fmt(lc) +
                                   ", flavor=" + fmt(lf) + ")");
            }

            joint->backward();
            const double lr = poly_lr(cfg_.base_lr, iter_, max_iter_, cfg_.poly_power);
            adam_.step(lr);
            adam_.zero_grad();

            if (summary.batches == 0) {
                summary.first_lr = lr;
            }
            summary.last_lr = lr;
            total_cuisine += lc * static_cast<double>(nb);
            total_flavor += lf * static_cast<double>(nb);
            if (log != nullptr) {
                (*log) << "epoch=" << epoch << " iter=" << iter_ << " lr=" << fmt(lr)
                       << " loss_cuisine=" << fmt(lc) << " loss_flavor=" << fmt(lf)
                       << " joint=" << fmt(jv) << "\n";
            }
        } catch (const NumericError& e) {
            throw NumericError("epoch " + std::to_string(epoch) + ", batch " +
                               std::to_string(summary.batches) + ": " + e.what());
        }
        ++iter_;
        ++summary.batches;
    }

    const auto n = static_cast<double>(order.size());
    summary.mean_cuisine_loss = total_cuisine / n;
    summary.mean_flavor_loss = total_flavor / n;
    summary.mean_joint_loss =
        (cfg_.alpha_cuisine * total_cuisine + cfg_.alpha_flavor * total_flavor) / n;
    return summary;
}

}  // namespace cnet
