#pragma once

#include <filesystem>
#include <string>

#include "cnet/model_config.hpp"
#include "cnet/trainer.hpp"

namespace cnet {

/// Everything a run needs, merged into one flat key = value namespace.
///
/// Keys and defaults:
///   input_size = 224          edge length of the model input
///   width_multiplier = 1      channel scale; accepts fractions like 1/8
///   pool_scales = 1,2,3,6     pyramid grid sizes, comma separated
///   dropout = 0.5             classifier dropout probability
///   base_lr = 0.001           initial learning rate
///   poly_power = 0.9          polynomial decay exponent
///   batch_size = 16           training batch size
///   epochs = 100              passes over the training split
///   beta1 = 0.9               Adam first-moment decay
///   beta2 = 0.999             Adam second-moment decay
///   eps = 1e-08               Adam denominator floor
///   seed = 0                  master seed; every stream derives from it
///   alpha_cuisine = 1         cuisine loss weight
///   alpha_flavor = 1          flavor loss weight
///   checkpoint_every = 0      epochs between periodic saves, 0 = final only
///   augment = true            random crop/flip/rotate during training
///   manifest =                dataset manifest path
///   out_dir =                 run output directory
///   report_split = train      split the end-of-run report evaluates
///   eval_batch_size = 16      forward chunk size for evaluation
///   workers = 1               reserved; loading is sequential either way
///
/// Files hold one assignment per line; blank lines and lines starting with
/// '#' are skipped; on duplicate keys the last assignment wins.
struct RunConfig {
    ModelConfig model;
    TrainConfig train;
    std::string manifest;
    std::string out_dir;
    std::string report_split = "train";
    std::int64_t eval_batch_size = 16;
    std::int64_t workers = 1;

    void validate() const;
};

/// Applies one assignment. Unknown keys and malformed values throw
/// ConfigError naming the key.
void apply_run_config_entry(RunConfig& config, const std::string& key,
                            const std::string& value);

/// Parses config text over the defaults; `origin` names the source in
/// errors, which carry 1-based line numbers.
RunConfig parse_run_config_text(const std::string& text, const std::string& origin);

/// Reads and parses a config file; unreadable files throw IoError.
RunConfig load_run_config(const std::filesystem::path& path);

/// Canonical echo, one line per key in the documented order. Values
/// round-trip: parsing the echo reproduces the config exactly.
std::string serialize_run_config(const RunConfig& config);

}  // namespace cnet
