#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "cnet/manifest.hpp"

namespace cnet {

/// Generates a labeled dataset whose pixels carry both labels: every cuisine
/// owns a hue and a stripe period, every flavor a brightness level, so the
/// pair can be read back from per-image color statistics. Writes per_pair P6
/// images for each of the 60 (cuisine, flavor) combinations plus manifest.tsv
/// into out_dir, and returns the samples with paths relative to out_dir.
/// Output is byte-identical for a given (per_pair, seed, image_size).
std::vector<Sample> synth_dataset(std::int64_t per_pair, std::uint64_t seed,
                                  const std::filesystem::path& out_dir,
                                  std::int64_t image_size = 64);

}  // namespace cnet
