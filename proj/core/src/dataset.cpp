#include "cnet/dataset.hpp"

#include <algorithm>

#include "cnet/error.hpp"

namespace cnet {

Image load_image(const std::filesystem::path& path, std::int64_t target) {
    if (target < 1) {
        throw ConfigError("load_image: target size must be >= 1, got " +
                          std::to_string(target));
    }
    return resize_bilinear(load_ppm(path), target, target);
}

std::vector<std::size_t> Dataset::indices_in(Split split) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        if (split == Split::kNone || samples[i].split == split) {
            out.push_back(i);
        }
    }
    return out;
}

Dataset load_dataset(const std::filesystem::path& manifest_path, std::int64_t input_size) {
    Dataset data;
    data.input_size = input_size;
    data.samples = parse_manifest(manifest_path);
    const std::filesystem::path root = manifest_path.parent_path();
    data.images.reserve(data.samples.size());
    for (const Sample& s : data.samples) {
        data.images.push_back(load_image(root / s.path, input_size));
    }
    return data;
}

TensorPtr<float> stack_images(const std::vector<const Image*>& images) {
    if (images.empty()) {
        throw DataError("stack_images: empty batch");
    }
    const std::int64_t h = images[0]->height;
    const std::int64_t w = images[0]->width;
    const auto n = static_cast<std::int64_t>(images.size());
    auto batch = Tensor<float>::zeros({n, 3, h, w});
    float* out = batch->data();
    const std::size_t per = static_cast<std::size_t>(3 * h * w);
    for (std::size_t i = 0; i < images.size(); ++i) {
        const Image& img = *images[i];
        if (img.height != h || img.width != w) {
            throw ShapeError("stack_images: image " + std::to_string(i) + " is " +
                             std::to_string(img.width) + "x" + std::to_string(img.height) +
                             ", batch is " + std::to_string(w) + "x" + std::to_string(h));
        }
        std::copy(img.pixels.begin(), img.pixels.end(), out + i * per);
    }
    return batch;
}

}  // namespace cnet
