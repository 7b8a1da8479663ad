#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace cnet {

/// Structural hyperparameters of the network. Class counts are fixed by the
/// label vocabularies and are deliberately not part of the config.
struct ModelConfig {
    std::int64_t input_size = 224;
    /// Scales every internal channel count; head class dimensions stay fixed.
    double width_multiplier = 1.0;
    /// Pyramid pooling grid sizes applied to the final feature map.
    std::vector<std::int64_t> pool_scales{1, 2, 3, 6};
    double dropout_p = 0.5;

    void validate() const;

    /// Channel count under the width multiplier: ceil with a small epsilon so
    /// exact products stay exact, clamped to at least one channel.
    std::int64_t scaled(std::int64_t channels) const;

    /// Edge length of the final backbone feature map (three stride-2 points
    /// after the stem's own halving).
    std::int64_t final_grid() const { return input_size / 16; }

    /// Channels each pyramid level contributes after its 1x1 reduction.
    std::int64_t psp_level_channels() const;
};

/// Layer-by-layer output shapes for a batch of n images, one line per layer.
std::string shape_trace(const ModelConfig& config);

}  // namespace cnet
