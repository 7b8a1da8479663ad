#pragma once

#include "cnet/image.hpp"
#include "cnet/rng.hpp"

namespace cnet {

/// One sampled set of augmentation parameters. draw_augment consumes exactly
/// six values from the stream no matter what it draws, so per-sample streams
/// stay aligned independent of the values.
struct AugmentDraw {
    double crop_scale_y = 1.0;  // fraction of height kept, in [0.8, 1]
    double crop_scale_x = 1.0;  // fraction of width kept, in [0.8, 1]
    double crop_frac_y = 0.0;   // window position within the vertical slack, [0, 1]
    double crop_frac_x = 0.0;   // window position within the horizontal slack, [0, 1]
    bool hflip = false;
    double angle_deg = 0.0;     // rotation about the center, in [-10, 10]
};

AugmentDraw draw_augment(RandomStream& rng);

/// Applies, in order: crop a sub-window and resize it back to the input size,
/// mirror left-right, rotate about the center with bilinear resampling and
/// zero fill outside the source. Stages at their neutral parameter are
/// skipped, so the identity draw returns the input bit for bit.
Image augment_image(const Image& image, const AugmentDraw& draw);

/// Draws parameters from the stream and applies them.
Image augment_image(const Image& image, RandomStream& rng);

}  // namespace cnet
