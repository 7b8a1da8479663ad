#include "cnet/augment.hpp"

#include <algorithm>
#include <cmath>

#include "cnet/error.hpp"

namespace cnet {

AugmentDraw draw_augment(RandomStream& rng) {
    AugmentDraw d;
    d.crop_scale_y = rng.uniform(0.8, 1.0);
    d.crop_scale_x = rng.uniform(0.8, 1.0);
    d.crop_frac_y = rng.uniform();
    d.crop_frac_x = rng.uniform();
    d.hflip = rng.bernoulli(0.5);
    d.angle_deg = rng.uniform(-10.0, 10.0);
    return d;
}

namespace {

// Cuts the drawn window out at integer coordinates, then scales it back up to
// the original size. A full-size window is returned untouched.
Image crop_and_restore(const Image& img, const AugmentDraw& d) {
    const std::int64_t crop_h = std::clamp<std::int64_t>(
        std::llround(d.crop_scale_y * static_cast<double>(img.height)), 1, img.height);
    const std::int64_t crop_w = std::clamp<std::int64_t>(
        std::llround(d.crop_scale_x * static_cast<double>(img.width)), 1, img.width);
    if (crop_h == img.height && crop_w == img.width) {
        return img;
    }
    const std::int64_t off_y =
        std::llround(d.crop_frac_y * static_cast<double>(img.height - crop_h));
    const std::int64_t off_x =
        std::llround(d.crop_frac_x * static_cast<double>(img.width - crop_w));
    Image crop = make_image(crop_w, crop_h);
    for (std::int64_t c = 0; c < 3; ++c) {
        for (std::int64_t y = 0; y < crop_h; ++y) {
            for (std::int64_t x = 0; x < crop_w; ++x) {
                crop.at(c, y, x) = img.at(c, y + off_y, x + off_x);
            }
        }
    }
    return resize_bilinear(crop, img.width, img.height);
}

Image mirror_horizontal(const Image& img) {
    Image out = make_image(img.width, img.height);
    for (std::int64_t c = 0; c < 3; ++c) {
        for (std::int64_t y = 0; y < img.height; ++y) {
            for (std::int64_t x = 0; x < img.width; ++x) {
                out.at(c, y, x) = img.at(c, y, img.width - 1 - x);
            }
        }
    }
    return out;
}

// Inverse mapping: each output pixel reads the source point that the rotation
// carries onto it. Taps outside the source contribute zero.
Image rotate_about_center(const Image& img, double angle_deg) {
    const double theta = angle_deg * 3.14159265358979323846 / 180.0;
    const double cs = std::cos(theta);
    const double sn = std::sin(theta);
    const double cx = static_cast<double>(img.width - 1) / 2.0;
    const double cy = static_cast<double>(img.height - 1) / 2.0;
    Image out = make_image(img.width, img.height);
    for (std::int64_t y = 0; y < img.height; ++y) {
        for (std::int64_t x = 0; x < img.width; ++x) {
            const double dx = static_cast<double>(x) - cx;
            const double dy = static_cast<double>(y) - cy;
            const double sx = cx + cs * dx + sn * dy;
            const double sy = cy - sn * dx + cs * dy;
            const std::int64_t x0 = static_cast<std::int64_t>(std::floor(sx));
            const std::int64_t y0 = static_cast<std::int64_t>(std::floor(sy));
            const double fx = sx - static_cast<double>(x0);
            const double fy = sy - static_cast<double>(y0);
            for (std::int64_t c = 0; c < 3; ++c) {
                const auto tap = [&](std::int64_t yy, std::int64_t xx) -> double {
                    if (yy < 0 || yy >= img.height || xx < 0 || xx >= img.width) {
                        return 0.0;
                    }
                    return static_cast<double>(img.at(c, yy, xx));
                };
                const double v =
                    (1.0 - fy) * ((1.0 - fx) * tap(y0, x0) + fx * tap(y0, x0 + 1)) +
                    fy * ((1.0 - fx) * tap(y0 + 1, x0) + fx * tap(y0 + 1, x0 + 1));
                out.at(c, y, x) = static_cast<float>(v);
            }
        }
    }
    return out;
}

}  // namespace

Image augment_image(const Image& image, const AugmentDraw& draw) {
    if (image.width < 1 || image.height < 1 ||
        image.pixels.size() !=
            static_cast<std::size_t>(3 * image.width * image.height)) {
        throw ShapeError("augment_image: malformed image");
    }
    Image out = crop_and_restore(image, draw);
    if (draw.hflip) {
        out = mirror_horizontal(out);
    }
    if (draw.angle_deg != 0.0) {
        out = rotate_about_center(out, draw.angle_deg);
    }
    return out;
}

Image augment_image(const Image& image, RandomStream& rng) {
    return augment_image(image, draw_augment(rng));
}

}  // namespace cnet
