#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

namespace cnet {

/// RGB image stored planar (channel, row, column), values in [0, 1].
struct Image {
    std::int64_t width = 0;
    std::int64_t height = 0;
    std::vector<float> pixels;

    float& at(std::int64_t c, std::int64_t y, std::int64_t x) {
        return pixels[static_cast<std::size_t>((c * height + y) * width + x)];
    }
    float at(std::int64_t c, std::int64_t y, std::int64_t x) const {
        return pixels[static_cast<std::size_t>((c * height + y) * width + x)];
    }
};

Image make_image(std::int64_t width, std::int64_t height);

/// Reads a binary 8-bit P6 PPM. Anything else (P3, 16-bit maxval) is a data
/// error; unreadable files are I/O errors.
Image load_ppm(const std::filesystem::path& path);

/// Writes binary 8-bit P6, rounding to the nearest byte.
void save_ppm(const std::filesystem::path& path, const Image& image);

/// Corner-aligned bilinear resample, the same coordinate convention the
/// network's upsampling layer uses; unlike that layer it may also shrink.
Image resize_bilinear(const Image& image, std::int64_t width, std::int64_t height);

}  // namespace cnet
