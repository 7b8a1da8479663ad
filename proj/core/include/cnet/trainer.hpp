#pragma once

#include <cstdint>
#include <iosfwd>
#include <vector>

#include "cnet/dataset.hpp"
#include "cnet/metrics.hpp"
#include "cnet/model.hpp"
#include "cnet/optim.hpp"

namespace cnet {

struct TrainConfig {
    double base_lr = 0.001;
    double poly_power = 0.9;
    std::int64_t batch_size = 16;
    std::int64_t epochs = 100;
    AdamConfig adam;
    std::uint64_t seed = 0;
    double alpha_cuisine = 1.0;
    double alpha_flavor = 1.0;
    /// Epochs between checkpoint saves; 0 keeps only the final one. The
    /// trainer itself never writes files, callers act on this.
    std::int64_t checkpoint_every = 0;
    bool augment = true;

    void validate() const;
};

struct EpochSummary {
    std::int64_t epoch = 0;
    std::int64_t batches = 0;
    /// Per-sample means over the whole epoch.
    double mean_cuisine_loss = 0.0;
    double mean_flavor_loss = 0.0;
    double mean_joint_loss = 0.0;
    double first_lr = 0.0;
    double last_lr = 0.0;
};

struct EvalReport {
    TaskMetrics cuisine;
    TaskMetrics flavor;
    std::int64_t sample_count = 0;
};

/// Eval-mode pass over one split: plain resized images, no augmentation, no
/// randomness; arg-max per head (ties to the lowest class index). Throws
/// DataError when the split holds no samples.
EvalReport evaluate(Model<float>& model, const Dataset& data, Split split,
                    std::int64_t batch_size = 16);

/// Owns the optimization loop over a dataset's training split: seeded
/// shuffling, per-sample augmentation, class-weighted losses from the
/// training label frequencies, the polynomial learning-rate schedule over
/// epochs x ceil(train / batch) iterations, and Adam updates.
class Trainer {
public:
    Trainer(Model<float>& model, const Dataset& data, TrainConfig config);

    /// One pass over the training split. Epochs are 0-based and feed the
    /// shuffle and augmentation streams, so calling epochs in order
    /// reproduces a run exactly. Writes one line per batch to `log` when
    /// given. A non-finite loss aborts with the epoch and batch named.
    EpochSummary train_epoch(std::int64_t epoch, std::ostream* log = nullptr);

    std::int64_t max_iter() const { return max_iter_; }
    std::int64_t global_iter() const { return iter_; }
    double current_lr() const;
    Adam<float>& optimizer() { return adam_; }
    const std::vector<float>& cuisine_weights() const { return cuisine_weights_; }
    const std::vector<float>& flavor_weights() const { return flavor_weights_; }

private:
    Model<float>& model_;
    const Dataset& data_;
    TrainConfig cfg_;
    Adam<float> adam_;
    std::vector<std::size_t> train_indices_;
    std::vector<float> cuisine_weights_;
    std::vector<float> flavor_weights_;
    std::int64_t max_iter_ = 0;
    std::int64_t iter_ = 0;
};

}  // namespace cnet
