#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "cnet/image.hpp"
#include "cnet/manifest.hpp"
#include "cnet/tensor.hpp"

namespace cnet {

/// Decodes one image file and resizes it to target x target, values in [0, 1].
Image load_image(const std::filesystem::path& path, std::int64_t target);

/// A manifest with every image decoded and resized to one side length, held
/// in memory. images[i] belongs to samples[i]; manifest paths resolve
/// relative to the manifest's own directory.
struct Dataset {
    std::vector<Sample> samples;
    std::vector<Image> images;
    std::int64_t input_size = 0;

    /// Positions of the samples in `split`; Split::kNone selects everything.
    std::vector<std::size_t> indices_in(Split split) const;
};

Dataset load_dataset(const std::filesystem::path& manifest_path, std::int64_t input_size);

/// Stacks equally sized images into an [n, 3, h, w] input tensor.
TensorPtr<float> stack_images(const std::vector<const Image*>& images);

}  // namespace cnet
